//! Confusion counts, Cohen's kappa and cross-task summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[truth][prediction]` for a binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn from_pairs(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!("{} labels, {} predictions", truth.len(), predicted.len())));
        }
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t > 1 || p > 1 {
                return Err(Error::invalid("labels must be 0 or 1"));
            }
            c.counts[t][p] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }

    pub fn add(&mut self, other: &Confusion) {
        for t in 0..2 {
            for p in 0..2 {
                self.counts[t][p] += other.counts[t][p];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    /// Chance agreement was 1, so kappa is undefined and reported as 0.
    pub degenerate: bool,
}

/// κ = (p_o − p_e) / (1 − p_e) with chance agreement from the marginals.
pub fn cohen_kappa(c: &Confusion) -> Result<Kappa> {
    let n = c.total();
    if n == 0 {
        return Err(Error::invalid("kappa of an empty confusion matrix"));
    }
    let n = n as f64;
    let m = &c.counts;
    let p_o = c.correct() as f64 / n;
    let p_e = (0..2)
        .map(|k| ((m[k][0] + m[k][1]) as f64 / n) * ((m[0][k] + m[1][k]) as f64 / n))
        .sum::<f64>();
    if p_e >= 1.0 {
        return Ok(Kappa {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: (p_o - p_e) / (1.0 - p_e),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// n − 1 denominator; 0 for a single value.
    pub sample_std: f64,
    pub population_std: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("nothing to summarise"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(Summary {
        mean,
        sample_std: if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
        population_std: (ss / n).sqrt(),
    })
}

/// Per-task difference `ours − baseline`, in the units of the inputs.
pub fn improvements(ours: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    if ours.len() != baseline.len() {
        return Err(Error::shape("score lists differ in length"));
    }
    Ok(ours.iter().zip(baseline).map(|(a, b)| a - b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conf(m: [[u64; 2]; 2]) -> Confusion {
        Confusion { counts: m }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohen_kappa(&conf([[50, 0], [0, 50]])).unwrap().value, 1.0);
        let always_zero = cohen_kappa(&conf([[50, 0], [50, 0]])).unwrap();
        assert_eq!(always_zero.value, 0.0);
        assert!(!always_zero.degenerate);
        let k = cohen_kappa(&conf([[40, 10], [5, 45]])).unwrap();
        assert!((k.value - 0.7).abs() < 1e-12);
        let single = cohen_kappa(&conf([[30, 0], [0, 0]])).unwrap();
        assert!(single.degenerate && single.value == 0.0);
        assert!(cohen_kappa(&Confusion::default()).is_err());
    }

    #[test]
    fn confusion_from_pairs() {
        let c = Confusion::from_pairs(&[0, 0, 1, 1, 1], &[0, 1, 1, 1, 0]).unwrap();
        assert_eq!(c.counts, [[1, 1], [1, 2]]);
        assert_eq!(c.accuracy(), Some(0.6));
        assert!(Confusion::from_pairs(&[0, 2], &[0, 1]).is_err());
    }

    #[test]
    fn summary_conventions() {
        let s = summarize(&[0.7]).unwrap();
        assert_eq!((s.mean, s.sample_std, s.population_std), (0.7, 0.0, 0.0));
        let s = summarize(&[2.5; 5]).unwrap();
        assert_eq!((s.sample_std, s.population_std), (0.0, 0.0));
        // Two points a distance 2 apart: population std 1, sample std sqrt(2).
        let s = summarize(&[1.0, 3.0]).unwrap();
        assert_eq!(s.population_std, 1.0);
        assert!((s.sample_std - 2f64.sqrt()).abs() < 1e-15);
    }
}
