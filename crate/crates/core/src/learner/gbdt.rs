//! Gradient-boosted regression trees on logistic loss.
//!
//! Trees are grown depth-first with exact greedy splits scored by the
//! second-order gain
//!
//! ```text
//! gain = ½ [ G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ) ]
//! ```
//!
//! where `G`/`H` are the gradient and curvature sums of the rows in a node
//! and `λ` is the L2 leaf penalty. Leaf weights are `−G/(H+λ)`. A node turns
//! into a leaf at `max_depth`, when its curvature sum is below
//! `min_child_weight`, or when no split has positive gain.
//!
//! Columns are sorted once per fit; each node keeps one row list per column
//! in that column's order and splits them stably, so no node re-sorts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub rounds: usize,
    pub l2_leaf_penalty: f64,
    pub min_child_weight: f64,
}

impl GbdtParams {
    pub fn new(learning_rate: f64, max_depth: usize, rounds: usize) -> Self {
        Self {
            learning_rate,
            max_depth,
            rounds,
            l2_leaf_penalty: 1.0,
            min_child_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 || self.rounds == 0 {
            return Err(Error::InvalidParams("max_depth and rounds must be at least 1".into()));
        }
        if !(self.l2_leaf_penalty >= 0.0 && self.min_child_weight >= 0.0) {
            return Err(Error::InvalidParams(
                "l2_leaf_penalty and min_child_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Cross product of the three tuned parameters, learning rate outermost.
pub fn grid(learning_rates: &[f64], depths: &[usize], rounds: &[usize]) -> Vec<GbdtParams> {
    let mut out = Vec::with_capacity(learning_rates.len() * depths.len() * rounds.len());
    for &lr in learning_rates {
        for &d in depths {
            for &r in rounds {
                out.push(GbdtParams::new(lr, d, r));
            }
        }
    }
    out
}

pub const PAPER_LEARNING_RATES: [f64; 4] = [0.01, 0.05, 0.1, 0.3];
pub const PAPER_DEPTHS: [usize; 4] = [2, 5, 10, 15];
pub const PAPER_ROUNDS: [usize; 5] = [50, 100, 200, 400, 800];

/// The full 4 × 4 × 5 tuning grid.
pub fn full_grid() -> Vec<GbdtParams> {
    grid(&PAPER_LEARNING_RATES, &PAPER_DEPTHS, &PAPER_ROUNDS)
}

/// A 2 × 2 × 2 grid small enough for quick end-to-end runs.
pub fn reduced_grid() -> Vec<GbdtParams> {
    grid(&[0.1, 0.3], &[2, 5], &[50, 100])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    trees: Vec<Tree>,
    /// Mean training logistic loss after each round.
    pub loss_curve: Vec<f64>,
}

impl GbdtModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// The model made of the first `rounds` trees; identical to training
    /// with `rounds` rounds, since each tree only depends on its predecessors.
    pub fn truncated(&self, rounds: usize) -> GbdtModel {
        let keep = rounds.min(self.trees.len());
        GbdtModel {
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            n_features: self.n_features,
            trees: self.trees[..keep].to_vec(),
            loss_curve: self.loss_curve[..keep].to_vec(),
        }
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got,
            });
        }
        Ok(())
    }

    /// Log-odds for one row, accumulated tree by tree as during training.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut f = self.base_score;
        for tree in &self.trees {
            f += self.learning_rate * tree.leaf_value(x);
        }
        f
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> Result<f64> {
        self.check(x.len())?;
        Ok(sigmoid(self.margin(x)))
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x.ncols())?;
        Ok(x.rows_iter().map(|row| sigmoid(self.margin(row))).collect())
    }
}

impl Classifier for GbdtModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn classify_row(&self, x: &[f64]) -> u8 {
        u8::from(sigmoid(self.margin(x)) >= 0.5)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&f, &label)| softplus(f) - f64::from(label) * f)
        .sum();
    total / margins.len() as f64
}

pub fn train_gbdt(x: &Matrix, y: &[u8], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleLabel);
    }
    let prevalence = positives as f64 / n as f64;
    let base_score = (prevalence / (1.0 - prevalence)).ln();

    let sorted: Vec<Vec<usize>> = (0..x.ncols())
        .map(|f| {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
            rows
        })
        .collect();

    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut loss_curve = Vec::with_capacity(params.rounds);
    let mut goes_left = vec![false; n];

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let mut builder = TreeBuilder {
            x,
            grad: &grad,
            hess: &hess,
            params,
            goes_left: &mut goes_left,
            nodes: Vec::new(),
        };
        builder.grow(sorted.clone(), 0);
        let tree = Tree {
            nodes: builder.nodes,
        };
        for (i, f) in margins.iter_mut().enumerate() {
            *f += params.learning_rate * tree.leaf_value(x.row(i));
        }
        loss_curve.push(logistic_loss(&margins, y));
        trees.push(tree);
    }

    Ok(GbdtModel {
        base_score,
        learning_rate: params.learning_rate,
        n_features: x.ncols(),
        trees,
        loss_curve,
    })
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    goes_left: &'a mut [bool],
    nodes: Vec<Node>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    /// `rows[f]` lists this node's rows sorted by feature `f`. Returns the node index.
    fn grow(&mut self, rows: Vec<Vec<usize>>, depth: usize) -> usize {
        let members = &rows[0];
        let g: f64 = members.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = members.iter().map(|&i| self.hess[i]).sum();
        let lambda = self.params.l2_leaf_penalty;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            weight: -g / (h + lambda),
        });

        if depth >= self.params.max_depth || h < self.params.min_child_weight || members.len() < 2 {
            return at;
        }
        let Some(best) = self.best_split(&rows, g, h) else {
            return at;
        };

        for &i in members {
            self.goes_left[i] = self.x.get(i, best.feature) < best.threshold;
        }
        let (left_rows, right_rows): (Vec<Vec<usize>>, Vec<Vec<usize>>) = rows
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| self.goes_left[i]))
            .unzip();
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, rows: &[Vec<usize>], g: f64, h: f64) -> Option<Candidate> {
        let lambda = self.params.l2_leaf_penalty;
        let mcw = self.params.min_child_weight;
        let parent = g * g / (h + lambda);
        let mut best: Option<Candidate> = None;
        for (feature, order) in rows.iter().enumerate() {
            let mut gl = 0.0;
            let mut hl = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let here = self.x.get(i, feature);
                let next = self.x.get(order[k + 1], feature);
                if here >= next {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = here + (next - here) / 2.0;
                    let threshold = if here < mid { mid } else { next };
                    best = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn threshold_data(n: usize) -> (Matrix, Vec<u8>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let ys = xs.iter().map(|&v| u8::from(v >= 0.37)).collect();
        (column(&xs), ys)
    }

    #[test]
    fn separable_threshold_is_fit() {
        let (x, y) = threshold_data(100);
        let model = train_gbdt(&x, &y, &GbdtParams::new(0.3, 2, 50)).unwrap();
        assert_eq!(model.classify(&x).unwrap(), y);
        assert!(model.trees().iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn zero_trees_give_prevalence() {
        let (x, y) = threshold_data(10);
        let balanced: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let model = train_gbdt(&x, &balanced, &GbdtParams::new(0.1, 2, 3)).unwrap().truncated(0);
        for p in model.predict_proba(&x).unwrap() {
            assert_eq!(p, 0.5);
        }
        let skewed = train_gbdt(&x, &y, &GbdtParams::new(0.1, 2, 1)).unwrap().truncated(0);
        let p = skewed.predict_proba_row(&[0.0]).unwrap();
        assert!((p - y.iter().map(|&l| f64::from(l)).sum::<f64>() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_tree_prediction_follows_leaf_value() {
        let mut r = rng::seeded(4);
        let xs: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
        let ys: Vec<u8> = xs.iter().map(|&v| u8::from(v + r.random_range(-0.5..0.5) > 0.0)).collect();
        let x = column(&xs);
        let model = train_gbdt(&x, &ys, &GbdtParams::new(0.7, 3, 1)).unwrap();
        let tree = &model.trees()[0];
        let mut pairs: Vec<(f64, f64)> = xs
            .iter()
            .map(|&v| (tree.leaf_value(&[v]), model.predict_proba_row(&[v]).unwrap()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn loss_decreases_on_random_data() {
        let mut r = rng::seeded(20);
        let data: Vec<f64> = (0..60).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = Matrix::from_vec(20, 3, data).unwrap();
        let mut y: Vec<u8> = (0..20).map(|_| u8::from(r.random_bool(0.5))).collect();
        y[0] = 0;
        y[1] = 1;
        let model = train_gbdt(&x, &y, &GbdtParams::new(0.1, 3, 50)).unwrap();
        assert_eq!(model.loss_curve.len(), 50);
        assert!(model.loss_curve.iter().all(|l| l.is_finite()));
        assert!(model.loss_curve[49] < model.loss_curve[0]);
    }

    #[test]
    fn truncation_equals_shorter_training() {
        let (x, y) = threshold_data(64);
        let params = GbdtParams::new(0.05, 3, 40);
        let long = train_gbdt(&x, &y, &params).unwrap();
        let short = train_gbdt(&x, &y, &GbdtParams { rounds: 15, ..params }).unwrap();
        assert_eq!(long.truncated(15), short);
    }

    #[test]
    fn bad_inputs() {
        let (x, y) = threshold_data(10);
        assert!(matches!(
            train_gbdt(&x, &[1; 10], &GbdtParams::new(0.1, 2, 5)),
            Err(Error::SingleLabel)
        ));
        assert!(matches!(
            train_gbdt(&x, &y[..9], &GbdtParams::new(0.1, 2, 5)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(train_gbdt(&x, &y, &GbdtParams::new(0.0, 2, 5)).is_err());
        assert!(train_gbdt(&x, &y, &GbdtParams::new(0.1, 0, 5)).is_err());
        let model = train_gbdt(&x, &y, &GbdtParams::new(0.1, 2, 5)).unwrap();
        assert!(matches!(
            model.predict_proba(&Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_grid_has_eighty_points() {
        let g = full_grid();
        assert_eq!(g.len(), 80);
        assert_eq!(g[0], GbdtParams::new(0.01, 2, 50));
        assert_eq!(g[79], GbdtParams::new(0.3, 15, 800));
        assert_eq!(reduced_grid().len(), 8);
    }

    /// Checks every split against the rows that reach it.
    fn partitions_rows(tree: &Tree, x: &Matrix, at: usize, rows: &[usize]) -> bool {
        match tree.nodes()[at] {
            Node::Leaf { .. } => true,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, feature) < threshold);
                !l.is_empty()
                    && !r.is_empty()
                    && l.len() + r.len() == rows.len()
                    && partitions_rows(tree, x, left, &l)
                    && partitions_rows(tree, x, right, &r)
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn trees_respect_depth_and_partition_rows(
            seed in any::<u64>(),
            depth in 1usize..6,
            cols in 1usize..4,
        ) {
            let mut r = rng::seeded(seed);
            let n = 30;
            let data: Vec<f64> = (0..n * cols).map(|_| (r.random_range(0..8) as f64) / 2.0).collect();
            let x = Matrix::from_vec(n, cols, data).unwrap();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(r.random_bool(0.5))).collect();
            y[0] = 0;
            y[1] = 1;
            let model = train_gbdt(&x, &y, &GbdtParams { min_child_weight: 0.0, ..GbdtParams::new(0.3, depth, 5) }).unwrap();
            let all: Vec<usize> = (0..n).collect();
            for tree in model.trees() {
                prop_assert!(tree.depth() <= depth);
                prop_assert!(partitions_rows(tree, &x, 0, &all));
            }
            let batch = model.predict_proba(&x).unwrap();
            for (i, p) in batch.iter().enumerate() {
                prop_assert_eq!(*p, model.predict_proba_row(x.row(i)).unwrap());
                prop_assert!(*p > 0.0 && *p < 1.0);
            }
        }
    }
}
