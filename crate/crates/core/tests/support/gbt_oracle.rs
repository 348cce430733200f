//! Exhaustive reference for exact greedy boosting: every candidate partition
//! is rebuilt from scratch and its sums recomputed directly.

use phonoeeg_core::gbt::{Ensemble, GbtConfig, Node, Tree};

pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn sums(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    (rows.iter().map(|&r| g[r]).sum(), rows.iter().map(|&r| h[r]).sum())
}

fn term(g: f64, h: f64, lambda: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        g * g / (h + lambda)
    }
}

pub fn oracle_split(x: &[Vec<f64>], g: &[f64], h: &[f64], rows: &[usize], cfg: &GbtConfig) -> Option<OracleSplit> {
    let d = x[0].len();
    let mut all = Vec::new();
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mut t = w[0] + (w[1] - w[0]) / 2.0;
            if t <= w[0] {
                t = w[1];
            }
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] < t).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] >= t).collect();
            let (gl, hl) = sums(&left, g, h);
            let (gr, hr) = sums(&right, g, h);
            let slack = cfg.min_child_weight * (1.0 - 1e-12);
            if hl < slack || hr < slack {
                continue;
            }
            let (ga, ha) = sums(rows, g, h);
            let (l, r, p) = (term(gl, hl, cfg.lambda), term(gr, hr, cfg.lambda), term(ga, ha, cfg.lambda));
            // Structure gains at rounding level of the node's gradients are zero.
            let g_abs: f64 = rows.iter().map(|&r| g[r].abs()).sum();
            let half = 0.5 * (l + r - p);
            let half = if half.abs() <= 1e-12 * g_abs * g_abs / (ha + cfg.lambda) { 0.0 } else { half };
            let gain = half - cfg.gamma;
            all.push(OracleSplit {
                feature: f,
                threshold: t,
                gain,
            });
        }
    }
    let best = all.iter().map(|s| s.gain).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return None;
    }
    let floor = best * (1.0 - 1e-10);
    all.into_iter().find(|s| s.gain >= floor)
}

fn build(x: &[Vec<f64>], g: &[f64], h: &[f64], rows: &[usize], cfg: &GbtConfig, depth: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { weight: 0.0 });
    let split = if depth < cfg.max_depth { oracle_split(x, g, h, rows, cfg) } else { None };
    match split {
        None => {
            let (gs, hs) = sums(rows, g, h);
            nodes[id] = Node::Leaf {
                weight: if gs == 0.0 { 0.0 } else { -gs / (hs + cfg.lambda) },
            };
        }
        Some(s) => {
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][s.feature] < s.threshold).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][s.feature] >= s.threshold).collect();
            let l = build(x, g, h, &left, cfg, depth + 1, nodes);
            let r = build(x, g, h, &right, cfg, depth + 1, nodes);
            nodes[id] = Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: l,
                right: r,
            };
        }
    }
    id
}

/// Boost without subsampling, recomputing everything from the definitions.
pub fn oracle_fit(x: &[Vec<f64>], y: &[usize], cfg: &GbtConfig) -> (f64, Vec<Tree>) {
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let prior = pos / y.len() as f64;
    let base = (prior / (1.0 - prior)).ln();
    let mut margin = vec![base; x.len()];
    let rows: Vec<usize> = (0..x.len()).collect();
    let mut trees = Vec::new();
    for _ in 0..cfg.n_estimators {
        let p: Vec<f64> = margin.iter().map(|m| 1.0 / (1.0 + (-m).exp())).collect();
        let g: Vec<f64> = p.iter().zip(y).map(|(p, &y)| p - y as f64).collect();
        let h: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let mut nodes = Vec::new();
        build(x, &g, &h, &rows, cfg, 0, &mut nodes);
        let tree = Tree { nodes };
        for (m, row) in margin.iter_mut().zip(x) {
            *m += cfg.learning_rate * tree.leaf_value(row);
        }
        trees.push(tree);
    }
    (base, trees)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Same topology, features and thresholds; leaf weights and predictions
/// equal up to summation-order rounding.
pub fn matches_oracle(ens: &Ensemble, x: &[Vec<f64>], y: &[usize]) -> Result<(), String> {
    let (base, trees) = oracle_fit(x, y, &ens.config);
    if !close(base, ens.base_score) {
        return Err(format!("base score {} vs {}", ens.base_score, base));
    }
    if trees.len() != ens.trees.len() {
        return Err("tree count differs".into());
    }
    for (t, (a, b)) in ens.trees.iter().zip(&trees).enumerate() {
        if a.nodes.len() != b.nodes.len() {
            return Err(format!("tree {t}: {} nodes vs oracle {}", a.nodes.len(), b.nodes.len()));
        }
        for (i, (na, nb)) in a.nodes.iter().zip(&b.nodes).enumerate() {
            let same = match (na, nb) {
                (Node::Leaf { weight: wa }, Node::Leaf { weight: wb }) => close(*wa, *wb),
                (
                    Node::Split { feature: fa, threshold: ta, left: la, right: ra },
                    Node::Split { feature: fb, threshold: tb, left: lb, right: rb },
                ) => fa == fb && ta.to_bits() == tb.to_bits() && la == lb && ra == rb,
                _ => false,
            };
            if !same {
                return Err(format!("tree {t} node {i}: {na:?} vs oracle {nb:?}"));
            }
        }
    }
    for row in x {
        let margin = base + ens.config.learning_rate * trees.iter().map(|t| t.leaf_value(row)).sum::<f64>();
        if !close(ens.margin(row), margin) {
            return Err(format!("margin {} vs oracle {margin}", ens.margin(row)));
        }
    }
    Ok(())
}

/// A random small instance: up to 50 rows, up to 4 features, depth up to 3,
/// values on a coarse grid so ties and repeated values occur.
pub fn instance(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, GbtConfig) {
    use rand::Rng;
    let mut rng = phonoeeg_core::rng::substream(seed, "gbt-oracle");
    let n = rng.random_range(8..=50);
    let d = rng.random_range(1..=4);
    let grid = [2.0, 5.0, 1e3][rng.random_range(0..3)];
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| (rng.random_range(0.0..grid) as f64).floor() * 0.5 - 1.0).collect())
        .collect();
    let mut y: Vec<usize> = x
        .iter()
        .map(|r| usize::from(r[0] + 0.3 * rng.random_range(-1.0..1.0) > 0.0))
        .collect();
    y[0] = 0;
    y[1] = 0;
    y[2] = 1;
    y[3] = 1;
    let mut cfg = GbtConfig {
        max_depth: rng.random_range(1..=3),
        n_estimators: rng.random_range(1..=6),
        learning_rate: [0.1, 0.3, 1.0][rng.random_range(0..3)],
        lambda: [0.0, 0.3, 1.0][rng.random_range(0..3)],
        gamma: [0.0, 0.0, 0.05][rng.random_range(0..3)],
        min_child_weight: [0.0, 0.5, 1.0][rng.random_range(0..3)],
        subsample: 1.0,
        colsample_bytree: 1.0,
    };
    if cfg.lambda == 0.0 && cfg.min_child_weight == 0.0 {
        cfg.min_child_weight = 0.5;
    }
    (x, y, cfg)
}
