//! CART trees: Gini classification trees for the forest and least-squares
//! regression trees for boosting.

use rand::seq::SliceRandom;

use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(&self, row: &[f64]) -> &L {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(l) => return l,
            }
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Position in the feature-sorted index list where the right side starts.
    cut: usize,
    score: f64,
}

/// Sorts `idx` by feature `f` (ties by row index for determinism).
fn sort_by_feature(x: &Matrix, idx: &mut [usize], f: usize) {
    idx.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
}

fn gini_from_counts(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

/// Class-probability leaf: relative class frequencies of the node.
pub(crate) type ClassLeaf = Vec<f64>;

pub(crate) struct ClassTreeFit {
    pub tree: Tree<ClassLeaf>,
    /// Unnormalised weighted impurity decrease per feature.
    pub importance: Vec<f64>,
}

/// Grows a Gini tree to purity on the (possibly repeated) row indices
/// `idx`. `max_features` candidate features are drawn per node; when none
/// of them admits a split the remaining features are tried in draw order.
pub(crate) fn fit_classification_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    idx: Vec<usize>,
    max_features: usize,
    rng: &mut Rng,
) -> ClassTreeFit {
    let p = x.cols();
    let total = idx.len() as f64;
    let mut tree = Tree { nodes: Vec::new() };
    let mut importance = vec![0.0; p];
    let mut stack = vec![(idx, usize::MAX, false)];
    let mut features: Vec<usize> = (0..p).collect();
    while let Some((mut rows, parent, is_right)) = stack.pop() {
        let id = tree.nodes.len();
        if parent != usize::MAX {
            if let Node::Split { left, right, .. } = &mut tree.nodes[parent] {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let mut counts = vec![0.0; n_classes];
        for &r in &rows {
            counts[y[r]] += 1.0;
        }
        let n = rows.len() as f64;
        let impurity = gini_from_counts(&counts, n);
        let leaf = || Node::Leaf(counts.iter().map(|c| c / n).collect());
        if rows.len() < 2 || impurity <= 0.0 {
            tree.nodes.push(leaf());
            continue;
        }
        features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= max_features && best.is_some() {
                break;
            }
            sort_by_feature(x, &mut rows, f);
            let mut left = vec![0.0; n_classes];
            for k in 1..rows.len() {
                left[y[rows[k - 1]]] += 1.0;
                let (a, b) = (x[(rows[k - 1], f)], x[(rows[k], f)]);
                if a == b {
                    continue;
                }
                let nl = k as f64;
                let nr = n - nl;
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let child = (nl * gini_from_counts(&left, nl) + nr * gini_from_counts(&right, nr)) / n;
                if best.as_ref().is_none_or(|b| child < b.score - 1e-15) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(a, b),
                        cut: k,
                        score: child,
                    });
                }
            }
        }
        let Some(split) = best else {
            tree.nodes.push(leaf());
            continue;
        };
        importance[split.feature] += n / total * (impurity - split.score);
        sort_by_feature(x, &mut rows, split.feature);
        let right_rows = rows.split_off(split.cut);
        tree.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: usize::MAX,
            right: usize::MAX,
        });
        stack.push((right_rows, id, true));
        stack.push((rows, id, false));
    }
    ClassTreeFit { tree, importance }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against the midpoint rounding onto the upper value
    if m >= b {
        a
    } else {
        m
    }
}

pub(crate) struct RegTreeFit {
    pub tree: Tree<f64>,
    pub importance: Vec<f64>,
    /// Leaf index reached by each training row (positionally aligned with
    /// the input rows), for leaf-value refits.
    pub leaf_of_row: Vec<usize>,
}

/// Least-squares regression tree of bounded depth over all features.
/// Leaf values are filled by `leaf_value(rows)` on each leaf's row set.
pub(crate) fn fit_regression_tree(
    x: &Matrix,
    target: &[f64],
    max_depth: usize,
    leaf_value: impl Fn(&[usize]) -> f64,
) -> RegTreeFit {
    let n_rows = x.rows();
    let p = x.cols();
    let total = n_rows as f64;
    let mut tree = Tree { nodes: Vec::new() };
    let mut importance = vec![0.0; p];
    let mut leaf_of_row = vec![0; n_rows];
    let mut stack = vec![((0..n_rows).collect::<Vec<_>>(), 0usize, usize::MAX, false)];
    while let Some((mut rows, depth, parent, is_right)) = stack.pop() {
        let id = tree.nodes.len();
        if parent != usize::MAX {
            if let Node::Split { left, right, .. } = &mut tree.nodes[parent] {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| target[r]).sum();
        let sum_sq: f64 = rows.iter().map(|&r| target[r] * target[r]).sum();
        let sse = (sum_sq - sum * sum / n).max(0.0);
        let mut best: Option<BestSplit> = None;
        if depth < max_depth && rows.len() >= 2 && sse > 0.0 {
            for f in 0..p {
                sort_by_feature(x, &mut rows, f);
                let mut left_sum = 0.0;
                for k in 1..rows.len() {
                    left_sum += target[rows[k - 1]];
                    let (a, b) = (x[(rows[k - 1], f)], x[(rows[k], f)]);
                    if a == b {
                        continue;
                    }
                    let nl = k as f64;
                    let nr = n - nl;
                    let right_sum = sum - left_sum;
                    // maximise between-node separation ⇔ minimise child SSE
                    let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / n;
                    let score = -gain;
                    if best.as_ref().is_none_or(|b| score < b.score - 1e-15) {
                        best = Some(BestSplit {
                            feature: f,
                            threshold: midpoint(a, b),
                            cut: k,
                            score,
                        });
                    }
                }
            }
        }
        match best {
            Some(split) if -split.score > 0.0 => {
                importance[split.feature] += -split.score / total;
                sort_by_feature(x, &mut rows, split.feature);
                let right_rows = rows.split_off(split.cut);
                tree.nodes.push(Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push((right_rows, depth + 1, id, true));
                stack.push((rows, depth + 1, id, false));
            }
            _ => {
                for &r in &rows {
                    leaf_of_row[r] = id;
                }
                tree.nodes.push(Node::Leaf(leaf_value(&rows)));
            }
        }
    }
    RegTreeFit {
        tree,
        importance,
        leaf_of_row,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn classification_tree_separates_threshold_data() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [1.0, 4.0], [2.0, 3.0], [3.0, 2.0], [4.0, 1.0]]);
        let y = [0, 0, 0, 1, 1];
        let fit = fit_classification_tree(&x, &y, 2, (0..5).collect(), 2, &mut rng::rng(1));
        for (i, &label) in y.iter().enumerate() {
            let p = fit.tree.leaf(x.row(i));
            assert_eq!(p[label], 1.0);
        }
        let total: f64 = fit.importance.iter().sum();
        // root Gini 0.48 fully removed
        assert!((total - 0.48).abs() < 1e-12);
    }

    #[test]
    fn regression_tree_respects_depth() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
        let t = [0.0, 1.0, 2.0, 3.0];
        let fit = fit_regression_tree(&x, &t, 1, |rows| rows.iter().map(|&r| t[r]).sum::<f64>() / rows.len() as f64);
        assert_eq!(fit.tree.nodes.len(), 3);
        assert_eq!(*fit.tree.leaf(&[0.2]), 0.5);
        assert_eq!(*fit.tree.leaf(&[2.7]), 2.5);
        assert_eq!(fit.leaf_of_row[0], fit.leaf_of_row[1]);
        assert_ne!(fit.leaf_of_row[1], fit.leaf_of_row[2]);
    }
}
