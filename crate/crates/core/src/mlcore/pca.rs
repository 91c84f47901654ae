use super::linalg::symmetric_eigen_top;
use super::{Matrix, MlError};
use crate::scalar::{axpy, dot, Real};

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Components {
    Fixed(usize),
    /// Smallest count whose cumulative explained variance reaches `target`
    /// of the total, never more than `cap`.
    Variance { target: f64, cap: usize },
}

impl Default for Components {
    fn default() -> Self {
        Components::Variance { target: 0.95, cap: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `[n_components × d]`, orthonormal rows.
    pub components: Matrix<T>,
    /// Non-increasing.
    pub explained_variance: Vec<T>,
    /// Trace of the sample covariance.
    pub total_variance: T,
}

impl<T: Real> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Maps projected rows back to the input space.
    pub fn inverse_transform(&self, z: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(z.rows(), self.dim());
        for i in 0..z.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (k, &zk) in z.row(i).iter().enumerate() {
                axpy(zk, self.components.row(k), row);
            }
        }
        out
    }
}

fn centered<T: Real>(x: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        axpy(T::one(), x.row(i), &mut mean);
    }
    let inv = T::from_usize_exact(n).recip();
    mean.iter_mut().for_each(|m| *m *= inv);
    let mut xc = x.clone();
    for i in 0..n {
        axpy(-T::one(), &mean, xc.row_mut(i));
    }
    (mean, xc)
}

/// `A^T A / denom` for `A` = `[n × d]`, exploiting symmetry.
fn scaled_gram_of_columns<T: Real>(a: &Matrix<T>, denom: T) -> Matrix<T> {
    // accumulate outer products row by row; each is an axpy into the upper triangle
    let d = a.cols();
    let mut g = Matrix::zeros(d, d);
    for r in 0..a.rows() {
        let row = a.row(r);
        for i in 0..d {
            let ri = row[i];
            if ri != T::zero() {
                axpy(ri, &row[i..], &mut g.row_mut(i)[i..]);
            }
        }
    }
    let inv = denom.recip();
    for i in 0..d {
        for j in i..d {
            let v = g.get(i, j) * inv;
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// `A A^T / denom` for `A` = `[n × d]`.
fn scaled_gram_of_rows<T: Real>(a: &Matrix<T>, denom: T) -> Matrix<T> {
    let n = a.rows();
    let inv = denom.recip();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(a.row(i), a.row(j)) * inv;
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

fn choose_count<T: Real>(values: &[T], total: T, spec: Components, max: usize) -> Result<usize, MlError> {
    match spec {
        Components::Fixed(k) => {
            if k == 0 || k > max {
                return Err(MlError::InvalidArgument(format!("n_components {k} outside 1..={max}")));
            }
            Ok(k)
        }
        Components::Variance { target, cap } => {
            if cap == 0 {
                return Err(MlError::InvalidArgument("component cap must be >= 1".into()));
            }
            let limit = cap.min(max);
            let mut acc = T::zero();
            for (i, &v) in values.iter().take(limit).enumerate() {
                acc += v.max(T::zero());
                if acc >= T::lit(target) * total {
                    return Ok(i + 1);
                }
            }
            Ok(limit)
        }
    }
}

/// Fits principal axes by eigendecomposition of the sample covariance. When
/// there are fewer rows than features the equivalent row Gram matrix is
/// decomposed instead, which has the same non-zero spectrum.
pub fn pca_fit<T: Real>(x: &Matrix<T>, components: Components) -> Result<PcaModel<T>, MlError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 || d == 0 {
        return Err(MlError::InvalidArgument(format!("PCA needs n >= 2 rows and d >= 1, got {n}x{d}")));
    }
    let (mean, xc) = centered(x);
    let denom = T::from_usize_exact(n - 1);
    let total = (0..n).map(|i| dot(xc.row(i), xc.row(i))).fold(T::zero(), |a, b| a + b) / denom;
    if !(total > T::zero()) {
        return Err(MlError::DegenerateInput("zero variance in every feature".into()));
    }
    let max = (n - 1).min(d);

    if n < d {
        let gram = scaled_gram_of_rows(&xc, denom);
        let eig = symmetric_eigen_top(&gram, max);
        let count = choose_count(&eig.values, total, components, max)?;
        let floor = T::epsilon() * T::lit(100.0) * total;
        if eig.values[..count].iter().all(|&v| v > floor) {
            let mut comps = Matrix::zeros(count, d);
            for k in 0..count {
                let u = eig.vectors.row(k);
                let row = comps.row_mut(k);
                for i in 0..n {
                    axpy(u[i], xc.row(i), row);
                }
                let norm = dot(row, row).sqrt();
                row.iter_mut().for_each(|v| *v /= norm);
            }
            return Ok(finish(mean, comps, eig.values[..count].to_vec(), total));
        }
        // rank-deficient data: fall back to the covariance route
    }

    let cov = scaled_gram_of_columns(&xc, denom);
    let probe = match components {
        Components::Fixed(k) => k.min(max),
        Components::Variance { cap, .. } => cap.min(max),
    };
    let eig = symmetric_eigen_top(&cov, probe);
    let count = choose_count(&eig.values, total, components, max)?;
    let comps = Matrix::from_vec(count, d, eig.vectors.as_slice()[..count * d].to_vec());
    Ok(finish(mean, comps, eig.values[..count].to_vec(), total))
}

fn finish<T: Real>(mean: Vec<T>, mut comps: Matrix<T>, values: Vec<T>, total: T) -> PcaModel<T> {
    // sign convention: largest-magnitude entry positive
    for k in 0..comps.rows() {
        let row = comps.row_mut(k);
        let mut best = T::zero();
        for &v in row.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < T::zero() {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let explained_variance = values.into_iter().map(|v| v.max(T::zero())).collect();
    PcaModel { mean, components: comps, explained_variance, total_variance: total }
}

/// `(X - mean) · components^T`
pub fn pca_transform<T: Real>(model: &PcaModel<T>, x: &Matrix<T>) -> Result<Matrix<T>, MlError> {
    if x.cols() != model.dim() {
        return Err(MlError::ShapeMismatch { expected: model.dim(), got: x.cols() });
    }
    let k = model.n_components();
    let mut out = Matrix::zeros(x.rows(), k);
    let mut buf = vec![T::zero(); model.dim()];
    for i in 0..x.rows() {
        buf.copy_from_slice(x.row(i));
        axpy(-T::one(), &model.mean, &mut buf);
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = dot(&buf, model.components.row(j));
        }
    }
    Ok(out)
}
