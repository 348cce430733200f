//! Second-order gradient-boosted regression trees on the logistic loss,
//! with exact greedy split search.

use std::io::{Read, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StageRng};
use crate::tensor::ops::sigmoid;

/// Gains within this relative distance of the best are treated as ties and
/// resolved by (feature, threshold) order.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-10;

/// Gains below this fraction of a node's gradient scale `(Σ|g|)² / (H + λ)`
/// are rounding noise and count as zero.
pub const GAIN_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtConfig {
    pub max_depth: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain for a split.
    pub gamma: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            n_estimators: 5000,
            learning_rate: 0.1,
            lambda: 0.3,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 0.8,
            colsample_bytree: 0.4,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::config(format!("{path}.{key}"), msg));
        if self.max_depth < 1 {
            return err("max_depth", "must be at least 1".into());
        }
        for (key, v) in [
            ("learning_rate", self.learning_rate),
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return err(key, format!("must lie in (0, 1], got {v}"));
            }
        }
        for (key, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(key, format!("must be a finite value >= 0, got {v}"));
            }
        }
        if self.lambda == 0.0 && self.min_child_weight == 0.0 {
            // Children with zero hessian would get unbounded weights.
            return err("lambda", "lambda and min_child_weight cannot both be 0".into());
        }
        Ok(())
    }
}

/// Logistic-loss gradient and hessian per example: `(p − y, p(1 − p))`.
pub fn grad_hess(labels: &[usize], probs: &[f64]) -> Vec<(f64, f64)> {
    labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| (p - y as f64, p * (1.0 - p)))
        .collect()
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        -g / (h + lambda)
    }
}

/// Structure score of a split with child sums `(gl, hl)` and `(gr, hr)`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| if g == 0.0 { 0.0 } else { g * g / (h + lambda) };
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint strictly above `lo` and at most `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo {
        t
    } else {
        hi
    }
}

/// Best admissible split of `rows` over `columns` (ascending), or `None`
/// when no split has positive gain and enough hessian on both sides.
pub fn best_split(
    x: &[Vec<f64>],
    gh: &[(f64, f64)],
    rows: &[usize],
    columns: &[usize],
    cfg: &GbtConfig,
) -> Option<Split> {
    let (g_total, h_total) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + gh[r].0, h + gh[r].1));
    let g_abs: f64 = rows.iter().map(|&r| gh[r].0.abs()).sum();
    let noise = GAIN_RESOLUTION * g_abs * g_abs / (h_total + cfg.lambda);
    let mut candidates: Vec<Split> = Vec::new();
    let mut sorted: Vec<usize> = rows.to_vec();
    for &f in columns {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..sorted.len().saturating_sub(1) {
            let r = sorted[k];
            gl += gh[r].0;
            hl += gh[r].1;
            let (v, next) = (x[r][f], x[sorted[k + 1]][f]);
            if v == next {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if !heavy_enough(hl, cfg.min_child_weight) || !heavy_enough(hr, cfg.min_child_weight) {
                continue;
            }
            candidates.push(Split {
                feature: f,
                threshold: midpoint(v, next),
                gain: denoise(split_gain(gl, hl, gr, hr, cfg.lambda, cfg.gamma), cfg.gamma, noise),
            });
        }
    }
    pick_split(&candidates)
}

/// Hessian sums are compared with a relative slack so that sums formed in
/// different orders agree at the boundary.
fn heavy_enough(h: f64, min_child_weight: f64) -> bool {
    h >= min_child_weight * (1.0 - 1e-12)
}

fn denoise(gain: f64, gamma: f64, noise: f64) -> f64 {
    if (gain + gamma).abs() <= noise {
        -gamma
    } else {
        gain
    }
}

/// First candidate (in the given order) whose gain ties the maximum, if
/// that maximum is positive.
pub fn pick_split(candidates: &[Split]) -> Option<Split> {
    let best = candidates.iter().map(|s| s.gain).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return None;
    }
    let floor = best * (1.0 - GAIN_TIE_TOLERANCE);
    candidates.iter().copied().find(|s| s.gain >= floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { weight: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary tree stored as a node array in depth-first pre-order; node 0 is
/// the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Grow greedily, depth first, from `rows`.
    pub fn grow(x: &[Vec<f64>], gh: &[(f64, f64)], rows: &[usize], columns: &[usize], cfg: &GbtConfig) -> Self {
        let mut nodes = Vec::new();
        grow_node(x, gh, rows, columns, cfg, 0, &mut nodes);
        Tree { nodes }
    }
}

fn grow_node(
    x: &[Vec<f64>],
    gh: &[(f64, f64)],
    rows: &[usize],
    columns: &[usize],
    cfg: &GbtConfig,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let split = if depth < cfg.max_depth {
        best_split(x, gh, rows, columns, cfg)
    } else {
        None
    };
    let Some(split) = split else {
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + gh[r].0, h + gh[r].1));
        nodes.push(Node::Leaf {
            weight: leaf_weight(g, h, cfg.lambda),
        });
        return id;
    };
    nodes.push(Node::Leaf { weight: 0.0 });
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][split.feature] < split.threshold);
    let left = grow_node(x, gh, &l, columns, cfg, depth + 1, nodes);
    let right = grow_node(x, gh, &r, columns, cfg, depth + 1, nodes);
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: GbtConfig,
    pub n_features: usize,
    /// Log-odds of the training class prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn margin(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        self.base_score + self.config.learning_rate * sum
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        usize::from(self.predict(x) >= 0.5)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let c = &self.config;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_features as u32).to_le_bytes())?;
        w.write_all(&(c.max_depth as u32).to_le_bytes())?;
        w.write_all(&(c.n_estimators as u32).to_le_bytes())?;
        for v in [
            c.learning_rate,
            c.lambda,
            c.gamma,
            c.min_child_weight,
            c.subsample,
            c.colsample_bytree,
            self.base_score,
        ] {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        w.write_all(&(self.trees.len() as u32).to_le_bytes())?;
        for tree in &self.trees {
            w.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
            for node in &tree.nodes {
                let (feature, threshold, left, right, weight) = match *node {
                    Node::Leaf { weight } => (-1i32, 0.0, 0u32, 0u32, weight),
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => (feature as i32, threshold, left as u32, right as u32, 0.0),
                };
                w.write_all(&feature.to_le_bytes())?;
                w.write_all(&threshold.to_bits().to_le_bytes())?;
                w.write_all(&left.to_le_bytes())?;
                w.write_all(&right.to_le_bytes())?;
                w.write_all(&weight.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::data("not a tree ensemble (bad magic)"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::data(format!("unsupported ensemble version {version}")));
        }
        let n_features = read_u32(r)? as usize;
        let max_depth = read_u32(r)? as usize;
        let n_estimators = read_u32(r)? as usize;
        let mut reals = [0.0; 7];
        for v in reals.iter_mut() {
            *v = read_f64(r)?;
        }
        let [learning_rate, lambda, gamma, min_child_weight, subsample, colsample_bytree, base_score] = reals;
        let config = GbtConfig {
            max_depth,
            n_estimators,
            learning_rate,
            lambda,
            gamma,
            min_child_weight,
            subsample,
            colsample_bytree,
        };
        config.validate("ensemble")?;
        let n_trees = read_u32(r)? as usize;
        let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
        for t in 0..n_trees {
            let n_nodes = read_u32(r)? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
            for _ in 0..n_nodes {
                let mut b = [0u8; 4];
                read_exact(r, &mut b)?;
                let feature = i32::from_le_bytes(b);
                let threshold = read_f64(r)?;
                let left = read_u32(r)? as usize;
                let right = read_u32(r)? as usize;
                let weight = read_f64(r)?;
                nodes.push(if feature < 0 {
                    Node::Leaf { weight }
                } else {
                    Node::Split {
                        feature: feature as usize,
                        threshold,
                        left,
                        right,
                    }
                });
            }
            let tree = Tree { nodes };
            check_tree(&tree, n_features).map_err(|m| Error::data(format!("tree {t}: {m}")))?;
            trees.push(tree);
        }
        Ok(Self {
            config,
            n_features,
            base_score,
            trees,
        })
    }
}

/// Every split points forward to existing nodes, every feature is in range,
/// and leaves are finite.
fn check_tree(tree: &Tree, n_features: usize) -> std::result::Result<(), String> {
    if tree.nodes.is_empty() {
        return Err("no nodes".into());
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        match *node {
            Node::Leaf { weight } if !weight.is_finite() => return Err(format!("leaf {i} is not finite")),
            Node::Leaf { .. } => {}
            Node::Split {
                feature, left, right, ..
            } => {
                if feature >= n_features {
                    return Err(format!("node {i} splits on feature {feature}"));
                }
                if left <= i || right <= i || left >= tree.nodes.len() || right >= tree.nodes.len() {
                    return Err(format!("node {i} has invalid children"));
                }
            }
        }
    }
    Ok(())
}

const MAGIC: &[u8; 4] = b"EGBT";
const VERSION: u32 = 1;

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::data(format!("truncated ensemble: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

fn sample_sorted(rng: &mut StageRng, n: usize, rate: f64) -> Vec<usize> {
    if rate >= 1.0 {
        return (0..n).collect();
    }
    let k = ((rate * n as f64).round() as usize).clamp(1, n);
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Boost `n_estimators` trees on `(x, y)`. Row and column subsampling draw
/// from the `"subsample"` stream of `seed`.
pub fn fit(x: &[Vec<f64>], y: &[usize], cfg: &GbtConfig, seed: u64) -> Result<Ensemble> {
    cfg.validate("gbt")?;
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} rows, {} labels", x.len(), y.len())));
    }
    let d = x.first().map_or(0, Vec::len);
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::shape("feature rows must be non-empty and equally long"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features must be finite"));
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives < 2 || y.len() - positives < 2 {
        return Err(Error::Training("boosting needs at least 2 examples of each class".into()));
    }
    let prior = positives as f64 / y.len() as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut ensemble = Ensemble {
        config: cfg.clone(),
        n_features: d,
        base_score,
        trees: Vec::with_capacity(cfg.n_estimators),
    };
    let mut margins = vec![base_score; x.len()];
    let mut rng = substream(seed, "subsample");
    for _ in 0..cfg.n_estimators {
        let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let gh = grad_hess(y, &probs);
        let rows = sample_sorted(&mut rng, x.len(), cfg.subsample);
        let columns = sample_sorted(&mut rng, d, cfg.colsample_bytree);
        let tree = Tree::grow(x, &gh, &rows, &columns, cfg);
        for (m, row) in margins.iter_mut().zip(x) {
            *m += cfg.learning_rate * tree.leaf_value(row);
        }
        ensemble.trees.push(tree);
    }
    Ok(ensemble)
}

/// Mean logistic loss of an ensemble on `(x, y)`.
pub fn log_loss(ensemble: &Ensemble, x: &[Vec<f64>], y: &[usize]) -> f64 {
    let total: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let p = ensemble.predict(row).clamp(1e-15, 1.0 - 1e-15);
            if label == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_hessian_closed_forms() {
        assert_eq!(grad_hess(&[1, 0], &[1.0, 0.0]), vec![(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(grad_hess(&[1], &[0.5]), vec![(-0.5, 0.25)]);
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            assert!(grad_hess(&[0], &[p])[0].1 >= 0.0);
        }
    }

    #[test]
    fn leaf_weight_closed_forms() {
        assert_eq!(leaf_weight(0.0, 3.0, 0.3), 0.0);
        assert!((leaf_weight(2.0, 2.0, 0.3) + 0.869_565_217_391_304_3).abs() < 1e-12);
        assert!(leaf_weight(-1.5, 1.0, 0.0) > 0.0);
        assert!(leaf_weight(1.5, 1.0, 0.0) < 0.0);
    }

    fn cfg(lambda: f64, gamma: f64) -> GbtConfig {
        GbtConfig {
            lambda,
            gamma,
            min_child_weight: 0.0,
            ..GbtConfig::default()
        }
    }

    #[test]
    fn four_point_split() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        let gh = [(-1.0, 1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, 1.0)];
        let s = best_split(&x, &gh, &[0, 1, 2, 3], &[0], &cfg(0.0, 0.0)).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert!((s.gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn no_split_without_gain() {
        let x: Vec<Vec<f64>> = vec![vec![1.0]; 4];
        let gh = [(0.5, 0.25); 4];
        assert!(best_split(&x, &gh, &[0, 1, 2, 3], &[0], &cfg(0.3, 0.0)).is_none());
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        let gh = [(-1.0, 1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, 1.0)];
        // Gain tends to -gamma as lambda grows.
        assert!(best_split(&x, &gh, &[0, 1, 2, 3], &[0], &cfg(1e12, 1e-9)).is_none());
        let s = best_split(&x, &gh, &[0, 1, 2, 3], &[0], &cfg(1e12, 0.0)).unwrap();
        assert!(s.gain > 0.0 && s.gain < 1e-11);
        assert!(best_split(&x, &gh, &[0, 1, 2, 3], &[0], &cfg(0.0, 2.5)).is_none());
        let heavy = GbtConfig {
            min_child_weight: 2.5,
            ..cfg(0.0, 0.0)
        };
        assert!(best_split(&x, &gh, &[0, 1, 2, 3], &[0], &heavy).is_none());
    }

    #[test]
    fn ties_go_to_the_lowest_feature() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v, v]).collect();
        let gh = [(-1.0, 1.0), (-1.0, 1.0), (1.0, 1.0), (1.0, 1.0)];
        let s = best_split(&x, &gh, &[0, 1, 2, 3], &[1, 0], &cfg(0.0, 0.0)).unwrap();
        // Columns arrive in caller order; the callers pass them ascending.
        assert_eq!(s.feature, 1);
        let s = best_split(&x, &gh, &[0, 1, 2, 3], &[0, 1], &cfg(0.0, 0.0)).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a < t && t <= b);
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }

    #[test]
    fn empty_ensemble_predicts_the_prior() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..10).map(|i| usize::from(i < 3)).collect();
        let cfg = GbtConfig {
            n_estimators: 0,
            ..GbtConfig::default()
        };
        let e = fit(&x, &y, &cfg, 0).unwrap();
        for row in &x {
            assert!((e.predict(row) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_traced_two_tree_ensemble() {
        let stump = |feature, threshold, l, r| Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { weight: l },
                Node::Leaf { weight: r },
            ],
        };
        let e = Ensemble {
            config: GbtConfig {
                learning_rate: 0.5,
                ..GbtConfig::default()
            },
            n_features: 2,
            base_score: 0.0,
            trees: vec![stump(0, 1.0, -2.0, 2.0), stump(1, 0.0, 1.0, -1.0)],
        };
        // x = (2, -1): right leaf of tree 0 (+2), left leaf of tree 1 (+1).
        assert!((e.margin(&[2.0, -1.0]) - 1.5).abs() < 1e-15);
        assert!((e.predict(&[2.0, -1.0]) - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-15);
        assert!((e.margin(&[0.0, 5.0]) + 1.5).abs() < 1e-15);
        assert_eq!(e.predict_class(&[0.0, 5.0]), 0);
        assert_eq!(e.trees[0].depth(), 1);
    }

    #[test]
    fn config_domain() {
        assert!(GbtConfig::default().validate("gbt").is_ok());
        for bad in [
            GbtConfig {
                max_depth: 0,
                ..GbtConfig::default()
            },
            GbtConfig {
                learning_rate: 0.0,
                ..GbtConfig::default()
            },
            GbtConfig {
                subsample: 1.5,
                ..GbtConfig::default()
            },
            GbtConfig {
                colsample_bytree: 0.0,
                ..GbtConfig::default()
            },
            GbtConfig {
                lambda: -0.1,
                ..GbtConfig::default()
            },
            GbtConfig {
                gamma: f64::NAN,
                ..GbtConfig::default()
            },
            GbtConfig {
                lambda: 0.0,
                min_child_weight: 0.0,
                ..GbtConfig::default()
            },
        ] {
            assert!(matches!(bad.validate("gbt"), Err(Error::Config { .. })), "{bad:?}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0]; 4];
        assert!(matches!(fit(&x, &[1, 1, 1, 1], &GbtConfig::default(), 0), Err(Error::Training(_))));
    }
}
