use rand::Rng;

use super::{ModelConfig, ModelError, PARAM_BUDGET};
use crate::nn::{mamba_block, MambaVars, ParamStore, Tape, Tensor, Var};
use crate::rng::SeedStream;
use crate::scalar::Real;

/// Trainable parameters plus the per-channel input normalisation, which is
/// fitted on training data and not learned.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub norm_mean: Vec<T>,
    pub norm_std: Vec<T>,
}

/// Kaiming-uniform weights (bound 1/√fan_in), zero biases, `A_log = ln(1..N)`, `D = 1`.
pub fn build_model<T: Real>(cfg: &ModelConfig, seed: u64) -> Result<Model<T>, ModelError> {
    cfg.validate()?;
    let count = cfg.num_params();
    if count > PARAM_BUDGET {
        return Err(ModelError::BudgetExceeded(count));
    }
    let stream = SeedStream::new(seed).named("init");
    let mut params = ParamStore::new();
    for (i, (name, shape)) in cfg.param_shapes().into_iter().enumerate() {
        let n: usize = shape.iter().product();
        let data: Vec<T> = if name.ends_with(".b") {
            vec![T::zero(); n]
        } else if name == "mamba.a_log" {
            let ns = shape[1];
            (0..n).map(|j| T::lit(((j % ns) + 1) as f64).ln()).collect()
        } else if name == "mamba.d" {
            vec![T::one(); n]
        } else {
            let fan_in: usize = shape[1..].iter().product();
            // Kaiming-uniform with negative slope √5, the usual framework default
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = stream.split(i as u64).rng();
            (0..n).map(|_| T::lit(rng.random_range(-bound..bound))).collect()
        };
        params.insert(name, Tensor::new(shape, data)?)?;
    }
    let c = cfg.in_channels;
    Ok(Model { config: cfg.clone(), params, norm_mean: vec![T::zero(); c], norm_std: vec![T::one(); c] })
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub logits: Var,
    pub embedding: Var,
}

impl<T: Real> Model<T> {
    /// Puts every parameter on the tape as a gradient-tracked leaf.
    pub fn param_vars(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|(_, t)| tape.leaf(t.clone(), true)).collect()
    }

    fn var(&self, vars: &[Var], name: &str) -> Var {
        vars[self.params.index_of(name).unwrap_or_else(|| panic!("parameter '{name}' missing"))]
    }

    /// Normalises raw `[n × channels × len]` windows into a tensor.
    pub fn prepare_input(&self, raw: &[f32], n: usize) -> Result<Tensor<T>, ModelError> {
        let (c, l) = (self.config.in_channels, self.config.input_len);
        if raw.len() != n * c * l {
            return Err(ModelError::Shape(format!("{} values for {n} windows of {c}×{l}", raw.len())));
        }
        let mut data = Vec::with_capacity(raw.len());
        for (i, chunk) in raw.chunks_exact(l).enumerate() {
            let ch = i % c;
            let (m, s) = (self.norm_mean[ch], self.norm_std[ch]);
            data.extend(chunk.iter().map(|&v| (T::lit(v as f64) - m) / s));
        }
        Ok(Tensor::new(vec![n, c, l], data)?)
    }

    fn res_block(&self, tape: &mut Tape<T>, vars: &[Var], x: Var, block: usize) -> Result<Var, ModelError> {
        let mut h = x;
        for li in 0..3 {
            let w = self.var(vars, &format!("res{block}.conv{li}.w"));
            let b = self.var(vars, &format!("res{block}.conv{li}.b"));
            let k = self.config.res_kernels[block][li];
            h = tape.conv1d(h, w, Some(b), 1, k / 2)?;
            if li < 2 {
                h = tape.relu(h);
            }
        }
        let sum = tape.add(h, x)?;
        Ok(tape.relu(sum))
    }

    /// `x [B × in_channels × input_len]` (already normalised).
    pub fn forward(&self, tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Forward, ModelError> {
        let cfg = &self.config;
        let s = tape.value(x).shape();
        if s.len() != 3 || s[1] != cfg.in_channels || s[2] != cfg.input_len {
            return Err(ModelError::Shape(format!(
                "input {s:?}, expected [B, {}, {}]",
                cfg.in_channels, cfg.input_len
            )));
        }
        let front = tape.conv1d(x, self.var(vars, "front.w"), Some(self.var(vars, "front.b")), 1, cfg.front_kernel / 2)?;
        let mut h = tape.relu(front);
        h = tape.maxpool1d(h, cfg.pools[0].0, cfg.pools[0].1)?;
        h = self.res_block(tape, vars, h, 0)?;
        h = tape.maxpool1d(h, cfg.pools[1].0, cfg.pools[1].1)?;
        h = self.res_block(tape, vars, h, 1)?;
        let seq = tape.transpose12(h)?;
        let mv = MambaVars::resolve(&cfg.mamba, |n| self.var(vars, &format!("mamba.{n}")));
        let m = mamba_block(tape, seq, &mv)?;
        let back = tape.transpose12(m)?;
        let embedding = tape.global_avg_pool(back)?;
        let logits = tape.linear(embedding, self.var(vars, "head.w"), Some(self.var(vars, "head.b")))?;
        Ok(Forward { logits, embedding })
    }

    /// Logits `[n × classes]` for raw windows, evaluated in batches.
    pub fn logits(&self, raw: &[f32], n: usize, batch: usize) -> Result<Vec<T>, ModelError> {
        let per = self.config.in_channels * self.config.input_len;
        if raw.len() != n * per {
            return Err(ModelError::Shape(format!("{} values for {n} windows of {per}", raw.len())));
        }
        let mut out = Vec::with_capacity(n * self.config.num_classes);
        let mut start = 0;
        while start < n {
            let b = batch.max(1).min(n - start);
            let mut tape = Tape::new();
            let vars = self.param_vars(&mut tape);
            let x = tape.leaf(self.prepare_input(&raw[start * per..(start + b) * per], b)?, false);
            let f = self.forward(&mut tape, &vars, x)?;
            out.extend_from_slice(tape.value(f.logits).data());
            start += b;
        }
        Ok(out)
    }

    /// Arg-max class per window, ties to class 0.
    pub fn predict(&self, raw: &[f32], n: usize, batch: usize) -> Result<Vec<usize>, ModelError> {
        let k = self.config.num_classes;
        let z = self.logits(raw, n, batch)?;
        Ok(z.chunks_exact(k)
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    /// Per-channel mean and standard deviation of raw windows.
    pub fn fit_normalization(&mut self, raw: &[f32], n: usize) {
        let (c, l) = (self.config.in_channels, self.config.input_len);
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        for (i, chunk) in raw[..n * c * l].chunks_exact(l).enumerate() {
            for &v in chunk {
                sum[i % c] += v as f64;
                sq[i % c] += v as f64 * v as f64;
            }
        }
        let count = (n * l).max(1) as f64;
        for ch in 0..c {
            let mean = sum[ch] / count;
            let var = (sq[ch] / count - mean * mean).max(0.0);
            self.norm_mean[ch] = T::lit(mean);
            self.norm_std[ch] = T::lit(if var > 1e-12 { var.sqrt() } else { 1.0 });
        }
    }
}
