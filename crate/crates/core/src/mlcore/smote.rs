use rand::Rng;

use super::{Matrix, MlError};
use crate::rng::SeedStream;
use crate::scalar::{axpy, Real};

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).fold(T::zero(), |s, v| s + v)
}

/// Indices of the `k` nearest other rows of `x` to row `i`, nearest first,
/// ties by lower index.
fn neighbours<T: Real>(x: &Matrix<T>, i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(T, usize)> =
        (0..x.rows()).filter(|&j| j != i).map(|j| (sq_dist(x.row(i), x.row(j)), j)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Synthetic minority rows by interpolation towards nearest neighbours.
///
/// Row `s` uses base row `s mod n_min`, a uniformly drawn neighbour among its
/// `min(k_neighbors, n_min - 1)` nearest, and a uniform interpolation weight.
pub fn smote<T: Real>(
    x_min: &Matrix<T>,
    n_synthetic: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Matrix<T>, MlError> {
    let n = x_min.rows();
    if n < 2 {
        return Err(MlError::TooFewMinority(n));
    }
    if k_neighbors == 0 {
        return Err(MlError::InvalidArgument("k_neighbors must be >= 1".into()));
    }
    let k = k_neighbors.min(n - 1);
    let d = x_min.cols();
    let mut rng = SeedStream::new(seed).named("smote").rng();
    let mut cache: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut out = Matrix::zeros(n_synthetic, d);
    for s in 0..n_synthetic {
        let i = s % n;
        let nb = cache[i].get_or_insert_with(|| neighbours(x_min, i, k));
        let j = nb[rng.random_range(0..k)];
        let u = T::lit(rng.random::<f64>());
        let (xi, xj) = (x_min.row(i), x_min.row(j));
        let row = out.row_mut(s);
        row.copy_from_slice(xi);
        axpy(u, xj, row);
        axpy(-u, xi, row);
    }
    Ok(out)
}
