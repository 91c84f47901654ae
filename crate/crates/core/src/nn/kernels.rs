//! Forward and backward kernels on raw slices. Shapes are validated by the
//! tape before these are called. Backward kernels accumulate (`+=`) into
//! their gradient outputs.

use crate::scalar::{axpy, dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub batch: usize,
    pub c_in: usize,
    pub len: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvShape {
    pub fn out_len(&self) -> Option<usize> {
        let padded = self.len + 2 * self.pad;
        if self.kernel == 0 || self.stride == 0 || padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Output positions `t` for which input index `t*stride + k - pad` is valid.
    fn valid(&self, k: usize, lout: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > k { (self.pad - k).div_ceil(s) } else { 0 };
        let top = self.len + self.pad;
        let hi = if top > k { ((top - k - 1) / s + 1).min(lout) } else { 0 };
        (lo, hi.max(lo))
    }
}

pub fn conv1d_forward<T: Real>(x: &[T], w: &[T], b: Option<&[T]>, s: ConvShape) -> Vec<T> {
    let lout = s.out_len().expect("validated conv shape");
    let mut y = vec![T::zero(); s.batch * s.c_out * lout];
    for bi in 0..s.batch {
        for co in 0..s.c_out {
            let yr = &mut y[(bi * s.c_out + co) * lout..][..lout];
            if let Some(b) = b {
                yr.iter_mut().for_each(|v| *v = b[co]);
            }
            for ci in 0..s.c_in {
                let xr = &x[(bi * s.c_in + ci) * s.len..][..s.len];
                let wr = &w[(co * s.c_in + ci) * s.kernel..][..s.kernel];
                for (k, &wv) in wr.iter().enumerate() {
                    let (lo, hi) = s.valid(k, lout);
                    if lo >= hi {
                        continue;
                    }
                    let start = lo * s.stride + k - s.pad;
                    if s.stride == 1 {
                        axpy(wv, &xr[start..start + (hi - lo)], &mut yr[lo..hi]);
                    } else {
                        for (j, t) in (lo..hi).enumerate() {
                            yr[t] += wv * xr[start + j * s.stride];
                        }
                    }
                }
            }
        }
    }
    y
}

pub fn conv1d_backward<T: Real>(
    gy: &[T],
    x: &[T],
    w: &[T],
    s: ConvShape,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let lout = s.out_len().expect("validated conv shape");
    if let Some(db) = db {
        for bi in 0..s.batch {
            for co in 0..s.c_out {
                db[co] += gy[(bi * s.c_out + co) * lout..][..lout].iter().copied().sum::<T>();
            }
        }
    }
    for bi in 0..s.batch {
        for co in 0..s.c_out {
            let gr = &gy[(bi * s.c_out + co) * lout..][..lout];
            for ci in 0..s.c_in {
                let xoff = (bi * s.c_in + ci) * s.len;
                let woff = (co * s.c_in + ci) * s.kernel;
                for k in 0..s.kernel {
                    let (lo, hi) = s.valid(k, lout);
                    if lo >= hi {
                        continue;
                    }
                    let start = lo * s.stride + k - s.pad;
                    if s.stride == 1 {
                        let n = hi - lo;
                        if let Some(dw) = dw.as_deref_mut() {
                            dw[woff + k] += dot(&gr[lo..hi], &x[xoff + start..xoff + start + n]);
                        }
                        if let Some(dx) = dx.as_deref_mut() {
                            axpy(w[woff + k], &gr[lo..hi], &mut dx[xoff + start..xoff + start + n]);
                        }
                    } else {
                        for (j, t) in (lo..hi).enumerate() {
                            let xi = xoff + start + j * s.stride;
                            if let Some(dw) = dw.as_deref_mut() {
                                dw[woff + k] += gr[t] * x[xi];
                            }
                            if let Some(dx) = dx.as_deref_mut() {
                                dx[xi] += w[woff + k] * gr[t];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling over the last axis of `[rows × len]`. Returns values and the
/// flat input index of each maximum (first on ties).
pub fn maxpool_forward<T: Real>(x: &[T], rows: usize, len: usize, window: usize, stride: usize) -> (Vec<T>, Vec<u32>) {
    let lout = (len - window) / stride + 1;
    let mut y = Vec::with_capacity(rows * lout);
    let mut arg = Vec::with_capacity(rows * lout);
    for r in 0..rows {
        let xr = &x[r * len..(r + 1) * len];
        for t in 0..lout {
            let base = t * stride;
            let mut best = base;
            for i in base + 1..base + window {
                if xr[i] > xr[best] {
                    best = i;
                }
            }
            y.push(xr[best]);
            arg.push((r * len + best) as u32);
        }
    }
    (y, arg)
}

/// `[rows × len]` → `[rows]` means.
pub fn mean_last_forward<T: Real>(x: &[T], rows: usize, len: usize) -> Vec<T> {
    let inv = T::from_usize_exact(len).recip();
    (0..rows).map(|r| x[r * len..(r + 1) * len].iter().copied().sum::<T>() * inv).collect()
}

/// `y[m] = x[m] · wᵀ + b` for `x` `[rows × d_in]`, `w` `[d_out × d_in]`.
pub fn linear_forward<T: Real>(x: &[T], w: &[T], b: Option<&[T]>, rows: usize, d_in: usize, d_out: usize) -> Vec<T> {
    let mut y = vec![T::zero(); rows * d_out];
    for m in 0..rows {
        let xr = &x[m * d_in..(m + 1) * d_in];
        for o in 0..d_out {
            let bias = b.map_or(T::zero(), |b| b[o]);
            y[m * d_out + o] = dot(xr, &w[o * d_in..(o + 1) * d_in]) + bias;
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Real>(
    gy: &[T],
    x: &[T],
    w: &[T],
    rows: usize,
    d_in: usize,
    d_out: usize,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    for m in 0..rows {
        let xr = &x[m * d_in..(m + 1) * d_in];
        for o in 0..d_out {
            let g = gy[m * d_out + o];
            if let Some(dx) = dx.as_deref_mut() {
                axpy(g, &w[o * d_in..(o + 1) * d_in], &mut dx[m * d_in..(m + 1) * d_in]);
            }
            if let Some(dw) = dw.as_deref_mut() {
                axpy(g, xr, &mut dw[o * d_in..(o + 1) * d_in]);
            }
            if let Some(db) = db.as_deref_mut() {
                db[o] += g;
            }
        }
    }
}

/// `[batch × p × q]` → `[batch × q × p]`
pub fn transpose_last2<T: Real>(x: &[T], batch: usize, p: usize, q: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for b in 0..batch {
        let off = b * p * q;
        for i in 0..p {
            for j in 0..q {
                y[off + j * p + i] = x[off + i * q + j];
            }
        }
    }
    y
}

/// Causal depthwise conv over time for `[batch × len × ch]`, `w` `[ch × k]`:
/// `y[t, c] = b[c] + Σ_j w[c, j] · x[t - (k-1) + j, c]`.
pub fn dw_causal_forward<T: Real>(x: &[T], w: &[T], b: &[T], batch: usize, len: usize, ch: usize, k: usize) -> Vec<T> {
    let wt = transpose_last2(w, 1, ch, k); // [k × ch]
    let mut y = vec![T::zero(); x.len()];
    for bi in 0..batch {
        for t in 0..len {
            let yr = &mut y[(bi * len + t) * ch..][..ch];
            yr.copy_from_slice(b);
            for j in 0..k {
                if t + j + 1 < k {
                    continue;
                }
                let src = t + j + 1 - k;
                let xr = &x[(bi * len + src) * ch..][..ch];
                for ((yv, &xv), &wv) in yr.iter_mut().zip(xr).zip(&wt[j * ch..(j + 1) * ch]) {
                    *yv += wv * xv;
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn dw_causal_backward<T: Real>(
    gy: &[T],
    x: &[T],
    w: &[T],
    batch: usize,
    len: usize,
    ch: usize,
    k: usize,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    for bi in 0..batch {
        for t in 0..len {
            let gr = &gy[(bi * len + t) * ch..][..ch];
            if let Some(db) = db.as_deref_mut() {
                axpy(T::one(), gr, db);
            }
            for j in 0..k {
                if t + j + 1 < k {
                    continue;
                }
                let src = (bi * len + t + j + 1 - k) * ch;
                for c in 0..ch {
                    if let Some(dw) = dw.as_deref_mut() {
                        dw[c * k + j] += gr[c] * x[src + c];
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        dx[src + c] += gr[c] * w[c * k + j];
                    }
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::lit(20.0) {
        x
    } else if x < T::lit(-20.0) {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], w: &[f64], b: &[f64], s: ConvShape) -> Vec<f64> {
        let lout = s.out_len().unwrap();
        let mut y = vec![0.0; s.batch * s.c_out * lout];
        for bi in 0..s.batch {
            for co in 0..s.c_out {
                for t in 0..lout {
                    let mut acc = b[co];
                    for ci in 0..s.c_in {
                        for k in 0..s.kernel {
                            let i = (t * s.stride + k) as isize - s.pad as isize;
                            if i >= 0 && (i as usize) < s.len {
                                acc += w[(co * s.c_in + ci) * s.kernel + k] * x[(bi * s.c_in + ci) * s.len + i as usize];
                            }
                        }
                    }
                    y[(bi * s.c_out + co) * lout + t] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_naive() {
        let mut seed = 1u64;
        let mut next = || {
            seed = crate::rng::mix64(seed);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for (batch, c_in, len, c_out, kernel, stride, pad) in
            [(2, 3, 11, 4, 3, 1, 1), (1, 2, 9, 2, 5, 2, 2), (3, 1, 5, 1, 5, 1, 0), (1, 2, 4, 3, 7, 3, 3)]
        {
            let s = ConvShape { batch, c_in, len, c_out, kernel, stride, pad };
            let x: Vec<f64> = (0..batch * c_in * len).map(|_| next()).collect();
            let w: Vec<f64> = (0..c_out * c_in * kernel).map(|_| next()).collect();
            let b: Vec<f64> = (0..c_out).map(|_| next()).collect();
            let got = conv1d_forward(&x, &w, Some(&b), s);
            let want = naive_conv(&x, &w, &b, s);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ones_conv() {
        let s = ConvShape { batch: 1, c_in: 1, len: 5, c_out: 1, kernel: 3, stride: 1, pad: 0 };
        assert_eq!(conv1d_forward(&[1.0f32; 5], &[1.0; 3], None, s), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn pool_ties_first() {
        let (y, a) = maxpool_forward(&[1.0f32, 3.0, 3.0, 0.0], 1, 4, 4, 4);
        assert_eq!((y, a), (vec![3.0], vec![1]));
    }

    #[test]
    fn causal_dw() {
        // k = 2, single channel: y[t] = w0 x[t-1] + w1 x[t]
        let y = dw_causal_forward(&[1.0f64, 2.0, 3.0], &[10.0, 1.0], &[0.5], 1, 3, 1, 2);
        assert_eq!(y, vec![1.5, 12.5, 23.5]);
    }

    #[test]
    fn activations() {
        assert_eq!(softplus(0.0f64), 2f64.ln());
        assert!((sigmoid(-800.0f64)).abs() < 1e-300);
        assert_eq!(softplus(50.0f32), 50.0);
    }
}
