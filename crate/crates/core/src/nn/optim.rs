use super::{NnError, ParamStore};
use crate::scalar::Real;

/// Adam state for one [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState<T> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> OptimState<T> {
    pub fn new(params: &ParamStore<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: zeros.clone(), v: zeros }
    }
}

/// One bias-corrected Adam update. `grads[i]` belongs to the i-th tensor.
pub fn adam_step<T: Real>(params: &mut ParamStore<T>, grads: &[Vec<T>], state: &mut OptimState<T>) -> Result<(), NnError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::ShapeMismatch(format!(
            "adam: {} tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().flatten().any(|g| !g.is_finite()) {
        return Err(NnError::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.tensors_mut().enumerate() {
        let (m, v, g) = (&mut state.m[i], &mut state.v[i], &grads[i]);
        if g.len() != p.len() || m.len() != p.len() {
            return Err(NnError::ShapeMismatch(format!("adam: tensor {i} has {} values, gradient {}", p.len(), g.len())));
        }
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            let gj = g[j].as_f64();
            let mj = b1 * m[j].as_f64() + (1.0 - b1) * gj;
            let vj = b2 * v[j].as_f64() + (1.0 - b2) * gj * gj;
            m[j] = T::lit(mj);
            v[j] = T::lit(vj);
            let update = state.lr * (mj / c1) / ((vj / c2).sqrt() + state.eps);
            *w = T::lit(w.as_f64() - update);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn square_descent() {
        let mut p = ParamStore::<f64>::new();
        p.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut st = OptimState::new(&p, 0.05);
        for _ in 0..500 {
            let w = p.get("w").unwrap().item();
            adam_step(&mut p, &[vec![2.0 * w]], &mut st).unwrap();
        }
        assert!(p.get("w").unwrap().item().abs() < 1e-3);
    }
}
