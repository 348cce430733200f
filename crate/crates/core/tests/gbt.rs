mod support {
    pub mod gbt_oracle;
}

use phonoeeg_core::gbt::{fit, log_loss, Ensemble, GbtConfig, Node, Tree};
use proptest::prelude::*;
use support::gbt_oracle::{instance, matches_oracle};

#[test]
fn trees_match_the_exhaustive_oracle() {
    for seed in 0..100 {
        let (x, y, cfg) = instance(seed);
        let ens = fit(&x, &y, &cfg, seed).unwrap();
        if let Err(why) = matches_oracle(&ens, &x, &y) {
            panic!("seed {seed}: {why}");
        }
    }
}

fn separable(n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * 0.37 % 5.0, (i * 7 % 11) as f64]).collect();
    let y = x.iter().map(|r| usize::from(r[0] + 0.2 * r[1] > 3.0)).collect();
    (x, y)
}

#[test]
fn separable_fixture_reaches_full_train_accuracy() {
    let (x, y) = separable(40);
    let cfg = GbtConfig {
        n_estimators: 50,
        ..GbtConfig::default()
    };
    let ens = fit(&x, &y, &cfg, 3).unwrap();
    let hits = x.iter().zip(&y).filter(|(r, &l)| ens.predict_class(r) == l).count();
    assert_eq!(hits, 40);
    assert!(ens.trees.iter().all(|t| t.depth() <= cfg.max_depth));
}

#[test]
fn training_loss_does_not_increase_without_subsampling() {
    let (x, y) = separable(40);
    let cfg = GbtConfig {
        n_estimators: 30,
        subsample: 1.0,
        colsample_bytree: 1.0,
        max_depth: 2,
        ..GbtConfig::default()
    };
    let ens = fit(&x, &y, &cfg, 0).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=ens.trees.len() {
        let partial = Ensemble {
            trees: ens.trees[..k].to_vec(),
            ..ens.clone()
        };
        let loss = log_loss(&partial, &x, &y);
        assert!(loss <= prev + 1e-12, "tree {k}: {loss} > {prev}");
        prev = loss;
    }
}

#[test]
fn seeded_fit_is_deterministic_including_subsampling() {
    let (x, y) = separable(40);
    let cfg = GbtConfig {
        n_estimators: 20,
        ..GbtConfig::default()
    };
    let a = fit(&x, &y, &cfg, 42).unwrap();
    assert_eq!(a.to_bytes(), fit(&x, &y, &cfg, 42).unwrap().to_bytes());
    assert_ne!(a.to_bytes(), fit(&x, &y, &cfg, 43).unwrap().to_bytes());
}

#[test]
fn zero_weight_trees_leave_predictions_alone() {
    let (x, y) = separable(20);
    let cfg = GbtConfig {
        n_estimators: 5,
        ..GbtConfig::default()
    };
    let ens = fit(&x, &y, &cfg, 1).unwrap();
    let mut extended = ens.clone();
    extended.trees.push(Tree {
        nodes: vec![
            Node::Split {
                feature: 0,
                threshold: 2.0,
                left: 1,
                right: 2,
            },
            Node::Leaf { weight: 0.0 },
            Node::Leaf { weight: 3.0 },
        ],
    });
    for row in x.iter().filter(|r| r[0] < 2.0) {
        assert_eq!(ens.predict(row), extended.predict(row));
    }
}

#[test]
fn serialization_roundtrip_is_exact() {
    let (x, y) = separable(30);
    let cfg = GbtConfig {
        n_estimators: 10,
        ..GbtConfig::default()
    };
    let ens = fit(&x, &y, &cfg, 5).unwrap();
    let bytes = ens.to_bytes();
    let back = Ensemble::read_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(back, ens);
    assert!(Ensemble::read_from(&mut &bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[1] = b'X';
    assert!(Ensemble::read_from(&mut bad.as_slice()).is_err());
}

fn topology(t: &Tree) -> Vec<(i64, usize, usize)> {
    t.nodes
        .iter()
        .map(|n| match *n {
            Node::Leaf { .. } => (-1, 0, 0),
            Node::Split {
                feature, left, right, ..
            } => (feature as i64, left, right),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positive_feature_scaling_preserves_trees(
        seed in 0u64..1000,
        feature in 0usize..4,
        scale in prop_oneof![Just(0.5), Just(2.0), Just(1024.0), 1e-3f64..1e3],
    ) {
        let (mut x, y, mut cfg) = instance(seed);
        cfg.subsample = 0.8;
        cfg.colsample_bytree = 0.5;
        let f = feature % x[0].len();
        let a = fit(&x, &y, &cfg, seed).unwrap();
        for row in x.iter_mut() {
            row[f] *= scale;
        }
        let b = fit(&x, &y, &cfg, seed).unwrap();
        prop_assert_eq!(a.trees.len(), b.trees.len());
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            prop_assert_eq!(topology(ta), topology(tb));
            for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                match (na, nb) {
                    (Node::Split { feature: fa, threshold: t1, .. }, Node::Split { threshold: t2, .. }) => {
                        let expected = if *fa == f { t1 * scale } else { *t1 };
                        prop_assert!((t2 - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
                    }
                    (Node::Leaf { weight: w1 }, Node::Leaf { weight: w2 }) => prop_assert_eq!(w1, w2),
                    _ => prop_assert!(false),
                }
            }
        }
        for (ra, rb) in x.iter().map(|r| {
            let mut orig = r.clone();
            orig[f] /= scale;
            (orig, r.clone())
        }) {
            prop_assert!((a.predict(&ra) - b.predict(&rb)).abs() < 1e-12);
        }
    }
}
