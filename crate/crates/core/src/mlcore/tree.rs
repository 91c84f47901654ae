use super::{Matrix, MlError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        /// Weighted Gini decrease achieved by this split.
        gain: f64,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub root: TreeNode<T>,
    pub n_features: usize,
}

impl<T: Real> DecisionTree<T> {
    pub fn depth(&self) -> usize {
        fn go<T>(n: &TreeNode<T>) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }

    pub fn predict_row(&self, x: &[T]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

pub(crate) fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

fn leaf<T>(counts: [usize; 2]) -> TreeNode<T> {
    // ties go to class 0
    TreeNode::Leaf { class: u8::from(counts[1] > counts[0]), counts }
}

struct Best<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

/// Exhaustive scan over (feature, midpoint) candidates. Features are scanned
/// in index order and thresholds in increasing order; a later candidate only
/// replaces the incumbent on a strictly larger gain.
fn best_split<T: Real>(x: &Matrix<T>, y: &[u8], rows: &[usize], min_leaf: usize) -> Option<Best<T>> {
    let n = rows.len();
    let mut total = [0usize; 2];
    for &r in rows {
        total[y[r] as usize] += 1;
    }
    let parent = gini(total);
    let mut best: Option<Best<T>> = None;
    let mut order: Vec<(T, u8)> = Vec::with_capacity(n);
    for f in 0..x.cols() {
        order.clear();
        order.extend(rows.iter().map(|&r| (x.get(r, f), y[r])));
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut left = [0usize; 2];
        for i in 0..n - 1 {
            left[order[i].1 as usize] += 1;
            let nl = i + 1;
            if order[i].0 == order[i + 1].0 || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let gain = parent - (nl as f64 * gini(left) + (n - nl) as f64 * gini(right)) / n as f64;
            if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                let threshold = (order[i].0 + order[i + 1].0) * T::lit(0.5);
                best = Some(Best { feature: f, threshold, gain });
            }
        }
    }
    best
}

fn grow<T: Real>(
    x: &Matrix<T>,
    y: &[u8],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode<T> {
    let mut counts = [0usize; 2];
    for &r in &rows {
        counts[y[r] as usize] += 1;
    }
    if depth >= max_depth || counts[0] == 0 || counts[1] == 0 || rows.len() < 2 * min_leaf.max(1) {
        return leaf(counts);
    }
    // an impure node is split even at zero gain (XOR needs this at the root)
    let Some(b) = best_split(x, y, &rows, min_leaf) else {
        return leaf(counts);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x.get(i, b.feature) <= b.threshold);
    TreeNode::Split {
        feature: b.feature,
        threshold: b.threshold,
        gain: b.gain,
        left: Box::new(grow(x, y, l, depth + 1, max_depth, min_leaf)),
        right: Box::new(grow(x, y, r, depth + 1, max_depth, min_leaf)),
    }
}

/// Grows a CART classifier with Gini impurity. `y` holds class indices 0/1.
pub fn tree_fit<T: Real>(x: &Matrix<T>, y: &[u8], max_depth: usize, min_leaf: usize) -> Result<DecisionTree<T>, MlError> {
    if x.rows() != y.len() {
        return Err(MlError::LengthMismatch(x.rows(), y.len()));
    }
    if y.is_empty() {
        return Err(MlError::InvalidArgument("tree needs at least one row".into()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(MlError::InvalidArgument(format!("label {bad} is not binary")));
    }
    let root = grow(x, y, (0..x.rows()).collect(), 0, max_depth, min_leaf);
    Ok(DecisionTree { root, n_features: x.cols() })
}

pub fn tree_predict<T: Real>(tree: &DecisionTree<T>, x: &Matrix<T>) -> Result<Vec<u8>, MlError> {
    if x.cols() != tree.n_features {
        return Err(MlError::ShapeMismatch { expected: tree.n_features, got: x.cols() });
    }
    Ok((0..x.rows()).map(|i| tree.predict_row(x.row(i))).collect())
}
