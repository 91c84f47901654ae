//! Dense symmetric eigensolver for the leading eigenpairs.
//!
//! Householder reduction to tridiagonal form, all eigenvalues by implicit QL,
//! then only the requested leading eigenvectors by inverse iteration on the
//! tridiagonal and back-transformation through the stored reflectors. The
//! cubic cost is the reduction alone; no full eigenvector matrix is formed.

use super::Matrix;
use crate::rng::mix64;
use crate::scalar::{axpy, dot, Real};

#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// All eigenvalues, non-increasing.
    pub values: Vec<T>,
    /// Unit eigenvectors for the first `vectors.rows()` values, one per row.
    pub vectors: Matrix<T>,
}

struct Tridiagonal<T> {
    diag: Vec<T>,
    /// `off[i]` couples rows `i` and `i + 1`; `off[n - 1] = 0`.
    off: Vec<T>,
    /// Householder vectors `v_k` (acting on indices `k+1..n`) and their `beta`.
    reflectors: Vec<(Vec<T>, T)>,
}

fn tridiagonalize<T: Real>(a: &Matrix<T>) -> Tridiagonal<T> {
    let n = a.rows();
    let mut s = a.clone();
    let mut diag = vec![T::zero(); n];
    let mut off = vec![T::zero(); n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![T::zero(); n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = s.get(k, k);
        let m = n - k - 1;
        let mut v: Vec<T> = (k + 1..n).map(|i| s.get(i, k)).collect();
        let norm = dot(&v, &v).sqrt();
        let tail = dot(&v[1..], &v[1..]);
        if tail == T::zero() {
            // already tridiagonal in this column
            off[k] = v[0];
            reflectors.push((vec![T::zero(); m], T::zero()));
            continue;
        }
        let alpha = if v[0] > T::zero() { -norm } else { norm };
        v[0] -= alpha;
        let beta = T::lit(2.0) / dot(&v, &v);
        off[k] = alpha;

        // trailing block S <- H S H with H = I - beta v v^T
        let p = &mut p[..m];
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = beta * dot(&s.row(k + 1 + i)[k + 1..], &v);
        }
        let kk = T::lit(0.5) * beta * dot(p, &v);
        let w: Vec<T> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kk * vi).collect();
        for i in 0..m {
            let row = &mut s.row_mut(k + 1 + i)[k + 1..];
            axpy(-v[i], &w, row);
            axpy(-w[i], &v, row);
        }
        reflectors.push((v, beta));
    }
    if n >= 2 {
        diag[n - 2] = s.get(n - 2, n - 2);
        off[n - 2] = s.get(n - 1, n - 2);
    }
    if n >= 1 {
        diag[n - 1] = s.get(n - 1, n - 1);
        off[n - 1] = T::zero();
    }
    Tridiagonal { diag, off, reflectors }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL.
fn tridiagonal_eigenvalues<T: Real>(diag: &[T], off: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (T::one(), T::one(), T::one());
                let el1 = e[l + 1];
                let (mut s, mut s2) = (T::zero(), T::zero());
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iterations > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    d
}

/// Solves `(T - shift I) x = b` in place by Gaussian elimination with
/// partial pivoting; zero pivots are nudged to `tiny`.
fn shifted_tridiagonal_solve<T: Real>(diag: &[T], off: &[T], shift: T, tiny: T, b: &mut [T]) {
    let n = diag.len();
    if n == 1 {
        let p = diag[0] - shift;
        b[0] = b[0] / if p.abs() < tiny { tiny } else { p };
        return;
    }
    let mut dd: Vec<T> = diag.iter().map(|&x| x - shift).collect();
    let mut dl: Vec<T> = off[..n - 1].to_vec();
    let mut du: Vec<T> = off[..n - 1].to_vec();
    let mut du2 = vec![T::zero(); n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i].abs() < tiny {
                dd[i] = tiny;
            }
            let fact = dl[i] / dd[i];
            dl[i] = fact;
            dd[i + 1] -= fact * du[i];
        } else {
            let fact = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = temp - fact * dd[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    if dd[n - 1].abs() < tiny {
        dd[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            b.swap(i, i + 1);
        }
        let bi = b[i];
        b[i + 1] -= dl[i] * bi;
    }
    b[n - 1] = b[n - 1] / dd[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i];
    }
}

fn normalize<T: Real>(x: &mut [T]) -> T {
    let norm = dot(x, x).sqrt();
    if norm > T::zero() {
        let inv = norm.recip();
        x.iter_mut().for_each(|v| *v *= inv);
    }
    norm
}

/// All eigenvalues of the symmetric matrix `a` and unit eigenvectors for the
/// `count` largest. Eigenvectors of (near-)repeated eigenvalues are
/// orthogonalised against each other.
pub fn symmetric_eigen_top<T: Real>(a: &Matrix<T>, count: usize) -> SymmetricEigen<T> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "eigen input must be square");
    let count = count.min(n);
    if n == 0 {
        return SymmetricEigen { values: vec![], vectors: Matrix::zeros(0, 0) };
    }
    let tri = tridiagonalize(a);
    let mut values = tridiagonal_eigenvalues(&tri.diag, &tri.off);
    values.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));

    let norm = (0..n)
        .map(|i| tri.diag[i].abs() + tri.off[i].abs() + if i > 0 { tri.off[i - 1].abs() } else { T::zero() })
        .fold(T::zero(), T::max);
    let scale = if norm > T::zero() { norm } else { T::one() };
    let tiny = T::epsilon() * scale;
    let cluster_tol = T::lit(1e-3) * scale;

    let mut tvecs: Vec<Vec<T>> = Vec::with_capacity(count);
    for j in 0..count {
        let lambda = values[j];
        let mut x: Vec<T> = (0..n)
            .map(|i| {
                let h = mix64((j as u64) << 32 ^ i as u64);
                T::lit((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            })
            .collect();
        normalize(&mut x);
        let cluster_start = (0..j).find(|&i| (values[i] - lambda).abs() <= cluster_tol).unwrap_or(j);
        for _ in 0..4 {
            shifted_tridiagonal_solve(&tri.diag, &tri.off, lambda, tiny, &mut x);
            for prev in &tvecs[cluster_start..j] {
                let c = dot(prev, &x);
                axpy(-c, prev, &mut x);
            }
            if normalize(&mut x) == T::zero() {
                x[j % n] = T::one();
            }
        }
        tvecs.push(x);
    }

    let mut vectors = Matrix::zeros(count, n);
    for (j, mut x) in tvecs.into_iter().enumerate() {
        for (k, (v, beta)) in tri.reflectors.iter().enumerate().rev() {
            if *beta == T::zero() {
                continue;
            }
            let tail = &mut x[k + 1..];
            let c = *beta * dot(v, tail);
            axpy(-c, v, tail);
        }
        vectors.row_mut(j).copy_from_slice(&x);
    }
    SymmetricEigen { values, vectors }
}
