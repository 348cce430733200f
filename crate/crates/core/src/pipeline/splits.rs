//! Random hold-out and leave-one-subject-out fold construction.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// One 80/10/10 partition of shuffled trials.
    RandomHoldout,
    LeaveOneSubjectOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
}

pub const MIN_HOLDOUT_TRIALS: usize = 10;

/// Trial indices of one fold, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    /// Subject whose trials form the test set (leave-one-subject-out only).
    pub held_out_subject: Option<String>,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Development share of the non-test trials: floor(10%).
fn tenth(n: usize) -> usize {
    n / 10
}

/// `subjects[i]` is the subject of trial `i`.
pub fn make_splits<S: AsRef<str>>(subjects: &[S], plan: &SplitPlan) -> Result<Vec<Fold>> {
    match plan.mode {
        SplitMode::RandomHoldout => {
            let n = subjects.len();
            if n < MIN_HOLDOUT_TRIALS {
                return Err(Error::invalid(format!(
                    "hold-out split needs at least {MIN_HOLDOUT_TRIALS} trials, got {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut substream(plan.seed, "split"));
            let (n_test, n_dev) = (tenth(n), tenth(n));
            let sorted = |s: &[usize]| {
                let mut v = s.to_vec();
                v.sort_unstable();
                v
            };
            Ok(vec![Fold {
                index: 0,
                held_out_subject: None,
                test: sorted(&order[..n_test]),
                dev: sorted(&order[n_test..n_test + n_dev]),
                train: sorted(&order[n_test + n_dev..]),
            }])
        }
        SplitMode::LeaveOneSubjectOut => {
            let distinct: BTreeSet<&str> = subjects.iter().map(AsRef::as_ref).collect();
            if distinct.len() < 2 {
                return Err(Error::invalid(format!(
                    "leave-one-subject-out needs at least 2 subjects, got {}",
                    distinct.len()
                )));
            }
            Ok(distinct
                .into_iter()
                .enumerate()
                .map(|(index, subject)| {
                    let test: Vec<usize> = (0..subjects.len()).filter(|&i| subjects[i].as_ref() == subject).collect();
                    let mut rest: Vec<usize> = (0..subjects.len()).filter(|&i| subjects[i].as_ref() != subject).collect();
                    rest.shuffle(&mut substream(plan.seed, &format!("split/{subject}")));
                    let mut dev = rest.split_off(rest.len() - tenth(rest.len()));
                    dev.sort_unstable();
                    rest.sort_unstable();
                    Fold {
                        index,
                        held_out_subject: Some(subject.to_string()),
                        train: rest,
                        dev,
                        test,
                    }
                })
                .collect())
        }
    }
}
