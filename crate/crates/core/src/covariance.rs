//! Channel cross-covariance features and channel rejection.
//!
//! Entry `(i, j)` of a [`CovMatrix`] at lag τ is the empirical covariance of
//! channel `i` at time `t` with channel `j` at time `t + τ`, each centred on
//! its own mean over the overlapping window and normalised by the overlap
//! length `T - |τ|`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Recording;

/// Square cross-covariance matrix over a subset of the original channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    k: usize,
    values: Vec<f64>,
    kept_channels: Vec<usize>,
    lag: i64,
}

impl CovMatrix {
    pub fn new(values: Vec<f64>, kept_channels: Vec<usize>, lag: i64) -> Result<Self> {
        let k = kept_channels.len();
        if values.len() != k * k {
            return Err(Error::shape(format!("{} values for a {k}x{k} matrix", values.len())));
        }
        if kept_channels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("kept channels must be unique and ascending"));
        }
        Ok(Self {
            k,
            values,
            kept_channels,
            lag,
        })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn lag(&self) -> i64 {
        self.lag
    }

    pub fn kept_channels(&self) -> &[usize] {
        &self.kept_channels
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Restrict to the given positions (indices into this matrix, ascending).
    pub fn submatrix(&self, positions: &[usize]) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) || positions.iter().any(|&p| p >= self.k) {
            return Err(Error::invalid("submatrix positions must be ascending and in range"));
        }
        let mut values = Vec::with_capacity(positions.len() * positions.len());
        for &i in positions {
            for &j in positions {
                values.push(self.get(i, j));
            }
        }
        let kept = positions.iter().map(|&p| self.kept_channels[p]).collect();
        Self::new(values, kept, self.lag)
    }

    /// Binary layout: `k: u32`, `lag: i64`, `k` × `u32` kept channels, then
    /// `k*k` row-major `f64`, all little-endian.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&(self.k as u32).to_le_bytes())?;
        w.write_all(&self.lag.to_le_bytes())?;
        for &c in &self.kept_channels {
            w.write_all(&(c as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let io = |e: std::io::Error| Error::data(format!("truncated covariance record: {e}"));
        r.read_exact(&mut b4).map_err(io)?;
        let k = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8).map_err(io)?;
        let lag = i64::from_le_bytes(b8);
        let mut kept = Vec::with_capacity(k);
        for _ in 0..k {
            r.read_exact(&mut b4).map_err(io)?;
            kept.push(u32::from_le_bytes(b4) as usize);
        }
        let mut values = Vec::with_capacity(k * k);
        for _ in 0..k * k {
            r.read_exact(&mut b8).map_err(io)?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::new(values, kept, lag)
    }
}

/// Cross-covariance matrix of a recording at `lag` samples.
pub fn ccv_matrix(rec: &Recording, lag: i64) -> Result<CovMatrix> {
    let t = rec.n_times();
    let shift = lag.unsigned_abs() as usize;
    if shift >= t {
        return Err(Error::invalid(format!("lag {lag} out of range for {t} samples")));
    }
    let overlap = t - shift;
    if overlap < 2 {
        return Err(Error::invalid(format!("lag {lag} leaves a degenerate overlap of {overlap}")));
    }
    // For τ >= 0 the leading factor uses [0, N) and the lagged one [τ, τ+N).
    let (lead_start, lag_start) = if lag >= 0 { (0, shift) } else { (shift, 0) };
    let centred = |start: usize| -> Vec<Vec<f64>> {
        rec.channels()
            .map(|ch| {
                let seg = &ch[start..start + overlap];
                // Exactly constant segments centre to exact zeros; the computed
                // mean can be an ulp off and leave a scale-dependent residue.
                if seg.iter().all(|&v| v == seg[0]) {
                    return vec![0.0; overlap];
                }
                let mean = seg.iter().sum::<f64>() / overlap as f64;
                seg.iter().map(|v| v - mean).collect()
            })
            .collect()
    };
    let lead = centred(lead_start);
    let lagged = if lag == 0 { lead.clone() } else { centred(lag_start) };

    let c = rec.n_channels();
    let mut values = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            if lag == 0 && j < i {
                values[i * c + j] = values[j * c + i];
                continue;
            }
            values[i * c + j] = crate::tensor::dot(&lead[i], &lagged[j]) / overlap as f64;
        }
    }
    CovMatrix::new(values, (0..c).collect(), lag)
}

/// Per-channel rejection score: the largest absolute normalised covariance
/// with any other non-degenerate channel. `None` marks zero variance.
pub fn rejection_scores(cov: &CovMatrix) -> Vec<Option<f64>> {
    let k = cov.size();
    let live: Vec<bool> = (0..k).map(|i| cov.get(i, i) > 0.0).collect();
    (0..k)
        .map(|i| {
            if !live[i] {
                return None;
            }
            let score = (0..k)
                .filter(|&j| j != i && live[j])
                .map(|j| cov.get(i, j).abs() / (cov.get(i, i) * cov.get(j, j)).sqrt())
                .fold(0.0, f64::max);
            Some(score)
        })
        .collect()
}

/// Outcome of [`reject_channels`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub matrix: CovMatrix,
    /// Score of every input channel position (`None` = zero variance).
    pub scores: Vec<Option<f64>>,
    /// Original channel indices removed for zero variance.
    pub zero_variance: Vec<usize>,
}

pub const MIN_KEPT_CHANNELS: usize = 2;

/// Keep the positions whose score meets `threshold`, topping up to two
/// channels by score (then lowest index) when too few survive.
fn select_positions(scores: &[Option<f64>], passes: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..scores.len()).filter(|&i| passes(i)).collect();
    if kept.len() < MIN_KEPT_CHANNELS {
        let mut ranked: Vec<usize> = (0..scores.len()).collect();
        ranked.sort_by(|&a, &b| {
            let sa = scores[a].unwrap_or(f64::NEG_INFINITY);
            let sb = scores[b].unwrap_or(f64::NEG_INFINITY);
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        for i in ranked {
            if kept.len() >= MIN_KEPT_CHANNELS {
                break;
            }
            if !kept.contains(&i) {
                kept.push(i);
            }
        }
        kept.sort_unstable();
    }
    kept
}

/// Drop channels whose cross-covariance is weak relative to their
/// auto-covariance.
pub fn reject_channels(cov: &CovMatrix, threshold: f64) -> Result<Rejection> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("threshold must be in (0, 1], got {threshold}")));
    }
    if cov.lag() != 0 {
        return Err(Error::invalid("channel rejection needs a zero-lag matrix"));
    }
    if (0..cov.size()).any(|i| cov.get(i, i) < 0.0) {
        return Err(Error::invalid("negative auto-covariance"));
    }
    let scores = rejection_scores(cov);
    let zero_variance = (0..cov.size())
        .filter(|&i| scores[i].is_none())
        .map(|i| cov.kept_channels()[i])
        .collect();
    let kept = select_positions(&scores, |i| scores[i].is_some_and(|s| s >= threshold));
    Ok(Rejection {
        matrix: cov.submatrix(&kept)?,
        scores,
        zero_variance,
    })
}

/// Fixed-size, standardised network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMatrix {
    pub size: usize,
    /// Row-major `size * size` values.
    pub values: Vec<f64>,
}

impl InputMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }
}

/// Reduce or zero-pad to `size` × `size`, then standardise all entries to
/// zero mean and unit variance (all zeros when the variance vanishes).
pub fn to_network_input(cov: &CovMatrix, size: usize) -> Result<InputMatrix> {
    if size < 2 {
        return Err(Error::invalid(format!("network input size must be >= 2, got {size}")));
    }
    let reduced;
    let cov = if cov.size() > size {
        let scores = rejection_scores(cov);
        let mut ranked: Vec<usize> = (0..cov.size()).collect();
        ranked.sort_by(|&a, &b| {
            let sa = scores[a].unwrap_or(f64::NEG_INFINITY);
            let sb = scores[b].unwrap_or(f64::NEG_INFINITY);
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        ranked.truncate(size);
        ranked.sort_unstable();
        reduced = cov.submatrix(&ranked)?;
        &reduced
    } else {
        cov
    };
    let k = cov.size();
    let mut values = vec![0.0; size * size];
    for i in 0..k {
        values[i * size..i * size + k].copy_from_slice(&cov.values()[i * k..(i + 1) * k]);
    }
    standardize(&mut values);
    Ok(InputMatrix { size, values })
}

/// In-place z-scoring with population variance.
pub fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    // Rounding leaves a residue of order eps^2 * mean^2 on constant input.
    if !var.is_finite() || var <= 1e-24 * mean * mean || var < f64::MIN_POSITIVE {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let sd = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

/// Channel subset chosen from training trials and then applied unchanged to
/// every trial of a fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSelection {
    /// Original channel indices, ascending.
    pub channels: Vec<usize>,
    /// Mean rejection score of each original channel over the fitting trials.
    pub mean_scores: Vec<f64>,
}

impl ChannelSelection {
    /// A channel survives when it passes `threshold` in at least
    /// `keep_fraction` of the fitting matrices; the survivors are then capped
    /// at `max_channels` by mean score.
    pub fn fit(
        covs: &[&CovMatrix],
        threshold: f64,
        keep_fraction: f64,
        max_channels: usize,
    ) -> Result<Self> {
        let first = covs.first().ok_or_else(|| Error::invalid("no matrices to fit channels on"))?;
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!("threshold must be in (0, 1], got {threshold}")));
        }
        let k = first.size();
        if covs.iter().any(|c| c.size() != k || c.kept_channels() != first.kept_channels()) {
            return Err(Error::invalid("fitting matrices disagree on channel layout"));
        }
        let mut passes = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for cov in covs {
            for (i, s) in rejection_scores(cov).into_iter().enumerate() {
                let s = s.unwrap_or(0.0);
                sums[i] += s;
                if s >= threshold {
                    passes[i] += 1;
                }
            }
        }
        let n = covs.len() as f64;
        let mean_scores: Vec<f64> = sums.iter().map(|s| s / n).collect();
        let as_opt: Vec<Option<f64>> = mean_scores.iter().copied().map(Some).collect();
        let mut kept = select_positions(&as_opt, |i| passes[i] as f64 >= keep_fraction * n);
        if kept.len() > max_channels.max(MIN_KEPT_CHANNELS) {
            kept.sort_by(|&a, &b| mean_scores[b].total_cmp(&mean_scores[a]).then(a.cmp(&b)));
            kept.truncate(max_channels.max(MIN_KEPT_CHANNELS));
            kept.sort_unstable();
        }
        Ok(Self {
            channels: kept.iter().map(|&p| first.kept_channels()[p]).collect(),
            mean_scores,
        })
    }

    pub fn apply(&self, cov: &CovMatrix) -> Result<CovMatrix> {
        let positions = self
            .channels
            .iter()
            .map(|c| {
                cov.kept_channels()
                    .iter()
                    .position(|k| k == c)
                    .ok_or_else(|| Error::invalid(format!("channel {c} missing from matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        cov.submatrix(&positions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Prompt;

    fn rec(channels: Vec<Vec<f64>>) -> Recording {
        let names = (0..channels.len()).map(|i| format!("C{i}")).collect();
        Recording::new("s", Prompt::Pat, channels, 100.0, names).unwrap()
    }

    #[test]
    fn constant_channels_give_zero_matrix() {
        let cov = ccv_matrix(&rec(vec![vec![3.0; 5], vec![-1.0; 5]]), 0).unwrap();
        assert_eq!(cov.values(), &[0.0; 4]);
        assert_eq!(cov.kept_channels(), &[0, 1]);
    }

    #[test]
    fn alternating_channels() {
        let x = vec![1.0, -1.0, 1.0, -1.0];
        let cov = ccv_matrix(&rec(vec![x.clone(), x]), 0).unwrap();
        assert_eq!(cov.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn lag_bounds() {
        let r = rec(vec![vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 0.0]]);
        assert!(ccv_matrix(&r, 3).is_err());
        assert!(ccv_matrix(&r, -2).is_err()); // overlap of 1
        let pos = ccv_matrix(&r, 1).unwrap();
        let neg = ccv_matrix(&r, -1).unwrap();
        // Cov(x_i(t), x_j(t+1)) == Cov(x_j(t), x_i(t-1)).
        assert!((pos.get(0, 1) - neg.get(1, 0)).abs() < 1e-15);
    }

    #[test]
    fn identical_channels_are_never_rejected() {
        let x = vec![0.3, -1.2, 2.0, 0.1, -0.7];
        let cov = ccv_matrix(&rec(vec![x.clone(), x.clone(), x]), 0).unwrap();
        let out = reject_channels(&cov, 1.0).unwrap();
        assert_eq!(out.matrix, cov);
    }

    #[test]
    fn zero_variance_channel_is_flagged_and_dropped() {
        let x = vec![0.3, -1.2, 2.0, 0.1, -0.7];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let cov = ccv_matrix(&rec(vec![x.clone(), vec![1.0; 5], y]), 0).unwrap();
        let out = reject_channels(&cov, 0.3).unwrap();
        assert_eq!(out.zero_variance, vec![1]);
        assert_eq!(out.matrix.kept_channels(), &[0, 2]);
    }

    #[test]
    fn at_least_two_channels_survive() {
        // Three mutually orthogonal channels: every score is 0.
        let cov = CovMatrix::new(
            vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
            vec![0, 1, 2],
            0,
        )
        .unwrap();
        let out = reject_channels(&cov, 0.5).unwrap();
        assert_eq!(out.matrix.kept_channels(), &[0, 1]);
    }

    #[test]
    fn rejection_threshold_domain() {
        let cov = CovMatrix::new(vec![1.0, 0.5, 0.5, 1.0], vec![0, 1], 0).unwrap();
        assert!(reject_channels(&cov, 0.0).is_err());
        assert!(reject_channels(&cov, 1.5).is_err());
        let lagged = CovMatrix::new(vec![1.0, 0.5, 0.5, 1.0], vec![0, 1], 2).unwrap();
        assert!(reject_channels(&lagged, 0.5).is_err());
    }

    #[test]
    fn network_input_padding() {
        let cov = CovMatrix::new(
            vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0],
            vec![0, 1, 2],
            0,
        )
        .unwrap();
        let out = to_network_input(&cov, 4).unwrap();
        // Before standardisation: original block top-left, zeros elsewhere.
        let raw = [2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 0.0, 1.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mean = raw.iter().sum::<f64>() / 16.0;
        let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0).sqrt();
        for (got, r) in out.values.iter().zip(raw) {
            assert!((got - (r - mean) / sd).abs() < 1e-12);
        }
        for i in 0..4 {
            assert!((out.values[3 * 4 + i] - out.values[3 * 4]).abs() < 1e-15);
        }
    }

    #[test]
    fn network_input_edge_cases() {
        let flat = CovMatrix::new(vec![1.5; 4], vec![0, 1], 0).unwrap();
        assert!(to_network_input(&flat, 2).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(to_network_input(&flat, 1).is_err());
        let cov = CovMatrix::new(vec![1.0, 0.2, 0.2, 3.0], vec![0, 1], 0).unwrap();
        let out = to_network_input(&cov, 2).unwrap();
        assert!(out.values.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn network_input_truncates_by_score() {
        // Channel 1 is uncorrelated with the others.
        let cov = CovMatrix::new(
            vec![1.0, 0.0, 0.9, 0.0, 1.0, 0.0, 0.9, 0.0, 1.0],
            vec![0, 1, 2],
            0,
        )
        .unwrap();
        let out = to_network_input(&cov, 2).unwrap();
        let direct = to_network_input(&cov.submatrix(&[0, 2]).unwrap(), 2).unwrap();
        assert_eq!(out, direct);
    }

    #[test]
    fn selection_fit_majority_rule() {
        let good = CovMatrix::new(
            vec![1.0, 0.8, 0.0, 0.8, 1.0, 0.0, 0.0, 0.0, 1.0],
            vec![0, 1, 2],
            0,
        )
        .unwrap();
        let sel = ChannelSelection::fit(&[&good, &good], 0.3, 0.5, 8).unwrap();
        assert_eq!(sel.channels, vec![0, 1]);
        let applied = sel.apply(&good).unwrap();
        assert_eq!(applied.kept_channels(), &[0, 1]);
    }

    #[test]
    fn serialization_roundtrip() {
        let cov = CovMatrix::new(vec![1.0, -0.25, 0.5, 2.0], vec![3, 7], -2).unwrap();
        let mut buf = Vec::new();
        cov.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 8 + 2 * 4 + 4 * 8);
        assert_eq!(CovMatrix::read_from(&mut buf.as_slice()).unwrap(), cov);
        assert!(CovMatrix::read_from(&mut &buf[..10]).is_err());
    }
}
