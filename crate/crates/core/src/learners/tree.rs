//! CART-style decision tree: greedy binary splits on feature-threshold
//! midpoints. The grower is shared with the random forest, which feeds
//! it per-node feature subsets.

use crate::error::Error;

/// A split must beat this impurity decrease to be kept.
pub(crate) const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

impl SplitCriterion {
    pub fn name(self) -> &'static str {
        match self {
            SplitCriterion::Gini => "gini",
            SplitCriterion::Entropy => "entropy",
        }
    }

    /// Node impurity from class counts. Entropy is in bits.
    pub(crate) fn impurity(self, pos: usize, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let p = pos as f64 / n as f64;
        let q = 1.0 - p;
        match self {
            SplitCriterion::Gini => 1.0 - p * p - q * q,
            SplitCriterion::Entropy => {
                let h = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
                h(p) + h(q)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub criterion: SplitCriterion,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            criterion: SplitCriterion::Gini,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub(crate) fn score(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf { score } => *score,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.score(row)
                } else {
                    right.score(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    pub n_features: usize,
    pub(crate) root: Node,
}

pub fn train(x: &[Vec<f64>], y: &[bool], params: &TreeParams) -> Result<TreeModel, Error> {
    let rows: Vec<usize> = (0..x.len()).collect();
    let p = x[0].len();
    let mut all_features = |_rows: &[usize]| (0..p).collect::<Vec<usize>>();
    let root = grow(
        x,
        y,
        rows,
        params.max_depth,
        params.min_samples_split,
        params.criterion,
        &mut all_features,
    );
    Ok(TreeModel { n_features: p, root })
}

impl TreeModel {
    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|row| self.root.score(row)).collect()
    }
}

/// Recursive exact-split grower. `candidates` picks which features a node
/// may split on; it runs once per node, before either subtree, so any
/// randomness inside it consumes its stream in depth-first order.
pub(crate) fn grow<F>(
    x: &[Vec<f64>],
    y: &[bool],
    rows: Vec<usize>,
    depth_left: usize,
    min_samples_split: usize,
    criterion: SplitCriterion,
    candidates: &mut F,
) -> Node
where
    F: FnMut(&[usize]) -> Vec<usize>,
{
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let leaf = Node::Leaf {
        score: pos as f64 / rows.len() as f64,
    };
    if depth_left == 0 || rows.len() < min_samples_split || pos == 0 || pos == rows.len() {
        return leaf;
    }
    let feats = candidates(&rows);
    match best_split(x, y, &rows, &feats, criterion) {
        None => leaf,
        Some((feature, threshold, left_rows, right_rows)) => {
            let left = grow(
                x,
                y,
                left_rows,
                depth_left - 1,
                min_samples_split,
                criterion,
                candidates,
            );
            let right = grow(
                x,
                y,
                right_rows,
                depth_left - 1,
                min_samples_split,
                criterion,
                candidates,
            );
            Node::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Scans midpoints between consecutive distinct values of each candidate
/// feature. Strict improvement keeps the first-best split on ties.
#[allow(clippy::type_complexity)]
fn best_split(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    feats: &[usize],
    criterion: SplitCriterion,
) -> Option<(usize, f64, Vec<usize>, Vec<usize>)> {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let parent = criterion.impurity(pos, n);

    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = MIN_GAIN;
    for &j in feats {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][j]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut nl = 0usize;
            let mut pl = 0usize;
            for &r in rows {
                if x[r][j] <= thr {
                    nl += 1;
                    if y[r] {
                        pl += 1;
                    }
                }
            }
            let nr = n - nl;
            let pr = pos - pl;
            let gain = parent
                - (nl as f64 / n as f64) * criterion.impurity(pl, nl)
                - (nr as f64 / n as f64) * criterion.impurity(pr, nr);
            if gain > best_gain {
                best_gain = gain;
                best = Some((j, thr));
            }
        }
    }

    best.map(|(feature, threshold)| {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &r in rows {
            if x[r][feature] <= threshold {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        (feature, threshold, left, right)
    })
}
