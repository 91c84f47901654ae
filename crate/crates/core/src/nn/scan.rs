//! Fused selective scan.
//!
//! For every batch row and channel `d`, with state size `N`:
//!
//! ```text
//! A      = -exp(A_log[d, :])
//! h_t    = exp(Δ_t A) ⊙ h_{t-1} + Δ_t B_t x_t,     h_0 = 0
//! y_t    = <C_t, h_t> + D[d] x_t
//! ```
//!
//! `x` and `Δ` are `[batch × len × d_inner]`, `B` and `C` are
//! `[batch × len × N]`. The state is carried in `f64` whatever the scalar.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanShape {
    pub batch: usize,
    pub len: usize,
    pub d_inner: usize,
    pub d_state: usize,
}

pub struct ScanInputs<'a, T> {
    pub x: &'a [T],
    pub delta: &'a [T],
    pub a_log: &'a [T],
    pub b: &'a [T],
    pub c: &'a [T],
    pub d: &'a [T],
}

/// Returns `y` and the hidden states `[batch × len × d_inner × N]`.
pub fn scan_forward<T: Real>(inp: &ScanInputs<'_, T>, s: ScanShape) -> (Vec<T>, Vec<f64>) {
    let (l, di, n) = (s.len, s.d_inner, s.d_state);
    let mut y = vec![T::zero(); s.batch * l * di];
    let mut hs = vec![0.0f64; s.batch * l * di * n];
    let a: Vec<f64> = inp.a_log.iter().map(|v| -v.as_f64().exp()).collect();
    let mut h = vec![0.0f64; n];
    for b in 0..s.batch {
        for d in 0..di {
            h.iter_mut().for_each(|v| *v = 0.0);
            let ad = &a[d * n..(d + 1) * n];
            let dd = inp.d[d].as_f64();
            for t in 0..l {
                let i = (b * l + t) * di + d;
                let (dt, xv) = (inp.delta[i].as_f64(), inp.x[i].as_f64());
                let bt = &inp.b[(b * l + t) * n..][..n];
                let ct = &inp.c[(b * l + t) * n..][..n];
                let mut acc = dd * xv;
                for k in 0..n {
                    h[k] = (dt * ad[k]).exp() * h[k] + dt * bt[k].as_f64() * xv;
                    acc += ct[k].as_f64() * h[k];
                }
                hs[i * n..(i + 1) * n].copy_from_slice(&h);
                y[i] = T::lit(acc);
            }
        }
    }
    (y, hs)
}

/// Gradients of the scan inputs, each shaped like its input.
pub struct ScanGrads<T> {
    pub x: Vec<T>,
    pub delta: Vec<T>,
    pub a_log: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub d: Vec<T>,
}

pub fn scan_backward<T: Real>(gy: &[T], inp: &ScanInputs<'_, T>, hs: &[f64], s: ScanShape) -> ScanGrads<T> {
    let (l, di, n) = (s.len, s.d_inner, s.d_state);
    let a: Vec<f64> = inp.a_log.iter().map(|v| -v.as_f64().exp()).collect();
    let mut gx = vec![0.0f64; inp.x.len()];
    let mut gdelta = vec![0.0f64; inp.x.len()];
    let mut ga = vec![0.0f64; di * n];
    let mut gb = vec![0.0f64; inp.b.len()];
    let mut gc = vec![0.0f64; inp.c.len()];
    let mut gd = vec![0.0f64; di];
    let mut gh = vec![0.0f64; n];
    for b in 0..s.batch {
        for d in 0..di {
            gh.iter_mut().for_each(|v| *v = 0.0);
            let ad = &a[d * n..(d + 1) * n];
            let dd = inp.d[d].as_f64();
            for t in (0..l).rev() {
                let i = (b * l + t) * di + d;
                let (dt, xv, g) = (inp.delta[i].as_f64(), inp.x[i].as_f64(), gy[i].as_f64());
                let row = (b * l + t) * n;
                gd[d] += g * xv;
                let mut dx = g * dd;
                let mut ddt = 0.0;
                for k in 0..n {
                    let h = hs[i * n + k];
                    let hp = if t > 0 { hs[(i - di) * n + k] } else { 0.0 };
                    let bk = inp.b[row + k].as_f64();
                    let abar = (dt * ad[k]).exp();
                    gc[row + k] += g * h;
                    let ghk = gh[k] + g * inp.c[row + k].as_f64();
                    ga[d * n + k] += ghk * hp * abar * dt;
                    ddt += ghk * (hp * abar * ad[k] + bk * xv);
                    gb[row + k] += ghk * dt * xv;
                    dx += ghk * dt * bk;
                    gh[k] = ghk * abar;
                }
                gx[i] += dx;
                gdelta[i] += ddt;
            }
        }
    }
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    // d/dA_log = d/dA · A
    let ga_log: Vec<f64> = ga.iter().zip(&a).map(|(g, a)| g * a).collect();
    ScanGrads { x: cast(gx), delta: cast(gdelta), a_log: cast(ga_log), b: cast(gb), c: cast(gc), d: cast(gd) }
}
