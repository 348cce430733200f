#![allow(dead_code)]

//! Reference cross-covariance by direct double summation, plus helpers for
//! random recordings and an eigenvalue check.

use phonoeeg_core::signal::{Prompt, Recording};
use rand::Rng;
use rand_distr::StandardNormal;

/// `Σ_t (x_i(t) − μ_i)(x_j(t+τ) − μ_j) / (N − |τ|)`, means over the overlap.
pub fn naive_ccv(channels: &[Vec<f64>], lag: i64) -> Vec<Vec<f64>> {
    let t = channels[0].len();
    let s = lag.unsigned_abs() as usize;
    let n = t - s;
    let (a0, b0) = if lag >= 0 { (0, s) } else { (s, 0) };
    let mean = |ch: &[f64], start: usize| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += ch[start + k];
        }
        acc / n as f64
    };
    let c = channels.len();
    let mut out = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            let (mi, mj) = (mean(&channels[i], a0), mean(&channels[j], b0));
            let mut acc = 0.0;
            for k in 0..n {
                acc += (channels[i][a0 + k] - mi) * (channels[j][b0 + k] - mj);
            }
            out[i][j] = acc / n as f64;
        }
    }
    out
}

pub fn min_eigenvalue(values: &[f64], k: usize) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(k, k, values);
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Random trial: 2–12 channels, 4–300 samples, mixing shared sources so
/// channels correlate, with occasional constant channels.
pub fn random_channels(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = phonoeeg_core::rng::substream(seed, "ccv-fixture");
    let c = rng.random_range(2..=12);
    let t = rng.random_range(4..=300);
    let sources: Vec<Vec<f64>> = (0..3).map(|_| (0..t).map(|_| rng.sample(StandardNormal)).collect()).collect();
    (0..c)
        .map(|_| {
            if rng.random_bool(0.05) {
                return vec![rng.random_range(-5.0..5.0); t];
            }
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let scale = 10f64.powi(rng.random_range(-3..4));
            (0..t)
                .map(|k| scale * (w[0] * sources[0][k] + w[1] * sources[1][k] + w[2] * sources[2][k] + 0.3 * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect()
}

pub fn recording(channels: Vec<Vec<f64>>) -> Recording {
    let names = (0..channels.len()).map(|i| format!("E{i}")).collect();
    Recording::new("s01", Prompt::Knew, channels, 256.0, names).unwrap()
}

pub fn relative_error(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}
