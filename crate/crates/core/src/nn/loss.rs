//! Cross-entropy and supervised contrastive losses, computed in `f64`.

use crate::scalar::Real;

/// Mean negative log-softmax of the true class. Returns the loss and the
/// row-wise softmax, reused by the backward pass.
pub fn cross_entropy_forward<T: Real>(logits: &[T], labels: &[usize], classes: usize) -> (f64, Vec<f64>) {
    let rows = labels.len();
    let mut probs = vec![0.0; rows * classes];
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let z = &logits[r * classes..(r + 1) * classes];
        let m = z.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v.as_f64() - m).exp()).sum();
        let lse = m + sum.ln();
        for c in 0..classes {
            probs[r * classes + c] = (z[c].as_f64() - lse).exp();
        }
        loss += lse - z[y].as_f64();
    }
    (loss / rows as f64, probs)
}

pub fn cross_entropy_backward<T: Real>(g: f64, probs: &[f64], labels: &[usize], classes: usize) -> Vec<T> {
    let scale = g / labels.len() as f64;
    let mut out = Vec::with_capacity(probs.len());
    for (r, &y) in labels.iter().enumerate() {
        for c in 0..classes {
            let p = probs[r * classes + c] - if c == y { 1.0 } else { 0.0 };
            out.push(T::lit(p * scale));
        }
    }
    out
}

/// State kept by the contrastive loss for its backward pass.
#[derive(Debug, Clone)]
pub struct SupConSaved {
    /// Unit-normalised embeddings `[rows × dim]`.
    z: Vec<f64>,
    norms: Vec<f64>,
    /// d loss / d similarity, `[rows × rows]`, already divided by τ.
    gs: Vec<f64>,
    dim: usize,
}

/// Supervised contrastive loss on L2-normalised embeddings. Anchors without
/// a same-label partner are skipped; `None` when every anchor is skipped.
pub fn supcon_forward<T: Real>(emb: &[T], labels: &[usize], dim: usize, tau: f64) -> Option<(f64, SupConSaved)> {
    let rows = labels.len();
    let mut z = vec![0.0; rows * dim];
    let mut norms = vec![0.0; rows];
    for r in 0..rows {
        let e = &emb[r * dim..(r + 1) * dim];
        let nrm = e.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt().max(1e-12);
        norms[r] = nrm;
        for j in 0..dim {
            z[r * dim + j] = e[j].as_f64() / nrm;
        }
    }
    let mut sim = vec![0.0; rows * rows];
    for i in 0..rows {
        for j in 0..rows {
            sim[i * rows + j] = (0..dim).map(|q| z[i * dim + q] * z[j * dim + q]).sum::<f64>() / tau;
        }
    }
    let valid: Vec<usize> =
        (0..rows).filter(|&i| (0..rows).any(|p| p != i && labels[p] == labels[i])).collect();
    if valid.is_empty() {
        return None;
    }
    let nv = valid.len() as f64;
    let mut loss = 0.0;
    let mut gs = vec![0.0; rows * rows];
    for &i in &valid {
        let s = &sim[i * rows..(i + 1) * rows];
        let m = (0..rows).filter(|&a| a != i).map(|a| s[a]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..rows).filter(|&a| a != i).map(|a| (s[a] - m).exp()).sum();
        let lse = m + sum.ln();
        let pos: Vec<usize> = (0..rows).filter(|&p| p != i && labels[p] == labels[i]).collect();
        let np = pos.len() as f64;
        loss += pos.iter().map(|&p| lse - s[p]).sum::<f64>() / np;
        for a in (0..rows).filter(|&a| a != i) {
            let soft = (s[a] - lse).exp();
            let ind = if labels[a] == labels[i] { 1.0 / np } else { 0.0 };
            gs[i * rows + a] = (soft - ind) / nv / tau;
        }
    }
    Some((loss / nv, SupConSaved { z, norms, gs, dim }))
}

pub fn supcon_backward<T: Real>(g: f64, saved: &SupConSaved) -> Vec<T> {
    let dim = saved.dim;
    let rows = saved.norms.len();
    let z = &saved.z;
    let mut dz = vec![0.0; rows * dim];
    for i in 0..rows {
        for j in 0..rows {
            let w = g * saved.gs[i * rows + j];
            if w == 0.0 {
                continue;
            }
            for q in 0..dim {
                dz[i * dim + q] += w * z[j * dim + q];
                dz[j * dim + q] += w * z[i * dim + q];
            }
        }
    }
    let mut de = Vec::with_capacity(rows * dim);
    for r in 0..rows {
        let zr = &z[r * dim..(r + 1) * dim];
        let dr = &dz[r * dim..(r + 1) * dim];
        let proj: f64 = zr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for q in 0..dim {
            de.push(T::lit((dr[q] - zr[q] * proj) / saved.norms[r]));
        }
    }
    de
}
