mod support {
    pub mod ccv_oracle;
}

use phonoeeg_core::covariance::{ccv_matrix, reject_channels, rejection_scores, to_network_input, CovMatrix};
use proptest::prelude::*;
use support::ccv_oracle::{min_eigenvalue, naive_ccv, random_channels, recording, relative_error};

#[test]
fn zero_lag_matrices_are_symmetric_psd_and_match_the_oracle() {
    for seed in 0..1000 {
        let channels = random_channels(seed);
        let cov = ccv_matrix(&recording(channels.clone()), 0).unwrap();
        let k = cov.size();
        let scale = cov.max_abs();
        let oracle = naive_ccv(&channels, 0);
        for i in 0..k {
            for j in 0..k {
                assert_eq!(cov.get(i, j), cov.get(j, i), "seed {seed}");
                let err = relative_error(cov.get(i, j), oracle[i][j], scale);
                assert!(err <= 1e-10, "seed {seed} ({i},{j}): {err:e}");
            }
        }
        let min_eig = min_eigenvalue(cov.values(), k);
        assert!(min_eig >= -1e-8 * scale, "seed {seed}: min eigenvalue {min_eig:e}");
    }
}

#[test]
fn lagged_matrices_match_the_oracle() {
    for seed in 0..200 {
        let channels = random_channels(seed);
        let t = channels[0].len() as i64;
        for lag in [1, -1, t / 3, -(t / 2), t - 2] {
            let cov = ccv_matrix(&recording(channels.clone()), lag).unwrap();
            let oracle = naive_ccv(&channels, lag);
            let scale = cov.max_abs();
            for i in 0..cov.size() {
                for j in 0..cov.size() {
                    assert!(relative_error(cov.get(i, j), oracle[i][j], scale) <= 1e-10, "seed {seed} lag {lag}");
                }
            }
        }
    }
}

#[test]
fn independent_noise_channel_is_rejected() {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = phonoeeg_core::rng::substream(9, "noise");
    let base: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
    let a: Vec<f64> = base.iter().map(|v| v + 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
    let b: Vec<f64> = base.iter().map(|v| -v + 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
    let noise: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
    let channels = vec![a, b, noise];
    let cov = ccv_matrix(&recording(channels.clone()), 0).unwrap();
    // Brute-force normalised covariance of the noise channel.
    let o = naive_ccv(&channels, 0);
    let s2 = (0..2).map(|j| o[2][j].abs() / (o[2][2] * o[j][j]).sqrt()).fold(0.0, f64::max);
    assert!(s2 < 0.1);
    assert!((rejection_scores(&cov)[2].unwrap() - s2).abs() < 1e-12);
    let kept = reject_channels(&cov, 0.3).unwrap();
    assert_eq!(kept.matrix.kept_channels(), &[0, 1]);
}

#[test]
fn vacuous_threshold_keeps_everything() {
    for seed in 0..50 {
        let cov = ccv_matrix(&recording(random_channels(seed)), 0).unwrap();
        let min = rejection_scores(&cov).into_iter().flatten().fold(f64::INFINITY, f64::min);
        if min > 0.0 && rejection_scores(&cov).iter().all(Option::is_some) {
            let out = reject_channels(&cov, min.min(1.0)).unwrap();
            assert_eq!(out.matrix, cov);
        }
    }
}

fn permuted(values: &CovMatrix, order: &[usize]) -> Vec<f64> {
    let k = values.size();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = values.get(order[i], order[j]);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn permuting_channels_permutes_the_matrix(seed in any::<u64>(), rot in 0usize..12, lag in -3i64..=3) {
        let channels = random_channels(seed);
        prop_assume!((lag.unsigned_abs() as usize) + 2 <= channels[0].len());
        let k = channels.len();
        let order: Vec<usize> = (0..k).map(|i| (i + rot) % k).rev().collect();
        let rec = recording(channels);
        let a = ccv_matrix(&rec, lag).unwrap();
        let b = ccv_matrix(&rec.permute_channels(&order).unwrap(), lag).unwrap();
        let expected = permuted(&a, &order);
        prop_assert_eq!(b.values(), expected.as_slice());
    }

    #[test]
    fn scaling_a_channel_scales_its_row_and_column(seed in any::<u64>(), pick in 0usize..12, exp in -6i32..6, factor in 0.01f64..100.0) {
        let channels = random_channels(seed);
        let i = pick % channels.len();
        let base = ccv_matrix(&recording(channels.clone()), 0).unwrap();
        let k = base.size();
        // Powers of two scale without rounding, so the result is exact.
        let pow = 2f64.powi(exp);
        let mut scaled = channels.clone();
        scaled[i].iter_mut().for_each(|v| *v *= pow);
        let s = ccv_matrix(&recording(scaled), 0).unwrap();
        for r in 0..k {
            for c in 0..k {
                let m = if r == i { pow } else { 1.0 } * if c == i { pow } else { 1.0 };
                prop_assert_eq!(s.get(r, c), base.get(r, c) * m);
            }
        }
        let mut scaled = channels;
        scaled[i].iter_mut().for_each(|v| *v *= factor);
        let s = ccv_matrix(&recording(scaled), 0).unwrap();
        for r in 0..k {
            for c in 0..k {
                let m = if r == i { factor } else { 1.0 } * if c == i { factor } else { 1.0 };
                let expected = base.get(r, c) * m;
                prop_assert!((s.get(r, c) - expected).abs() <= 1e-12 * s.max_abs().max(f64::MIN_POSITIVE));
            }
        }
        for (a, b) in rejection_scores(&base).iter().zip(rejection_scores(&s).iter()) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "zero-variance flag changed under scaling"),
            }
        }
    }

    #[test]
    fn network_input_is_standardised(seed in any::<u64>(), size in 2usize..16) {
        let cov = ccv_matrix(&recording(random_channels(seed)), 0).unwrap();
        let m = to_network_input(&cov, size).unwrap();
        prop_assert_eq!(m.values.len(), size * size);
        let n = m.values.len() as f64;
        let mean = m.values.iter().sum::<f64>() / n;
        let var = m.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(var.abs() < 1e-12 || (var - 1.0).abs() < 1e-9);
    }
}
