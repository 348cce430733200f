//! Binary phonological tasks and the prompt → label table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Bilabial,
    Nasal,
    Cv,
    Uw,
    Iy,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [TaskId::Bilabial, TaskId::Nasal, TaskId::Cv, TaskId::Uw, TaskId::Iy];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::Bilabial => "bilabial",
            TaskId::Nasal => "nasal",
            TaskId::Cv => "cv",
            TaskId::Uw => "uw",
            TaskId::Iy => "iy",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task `{s}`")))
    }
}

/// A task with the prompts that count as its positive class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: TaskId,
    positive: Vec<Prompt>,
}

impl Task {
    pub fn new(id: TaskId, mut positive: Vec<Prompt>) -> Result<Self> {
        positive.sort_unstable();
        positive.dedup();
        if positive.is_empty() || positive.len() >= Prompt::ALL.len() {
            return Err(Error::invalid(format!(
                "task {id}: positive prompts must be a non-empty strict subset of the {} prompts",
                Prompt::ALL.len()
            )));
        }
        Ok(Self { id, positive })
    }

    pub fn positive(&self) -> &[Prompt] {
        &self.positive
    }
}

/// 1 when `prompt` carries the task's feature.
pub fn derive_label(prompt: Prompt, task: &Task) -> usize {
    usize::from(task.positive.binary_search(&prompt).is_ok())
}

/// Positive-prompt sets for every task, kept as configuration data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelTable(pub BTreeMap<TaskId, Vec<Prompt>>);

impl Default for LabelTable {
    fn default() -> Self {
        use Prompt::*;
        let not_cv = [Iy, Uw];
        Self(BTreeMap::from([
            (TaskId::Bilabial, vec![Piy, M, Pat, Pot]),
            (TaskId::Nasal, vec![M, N, Knew, Gnaw]),
            (TaskId::Cv, Prompt::ALL.into_iter().filter(|p| !not_cv.contains(p)).collect()),
            (TaskId::Uw, vec![Uw]),
            (TaskId::Iy, vec![Iy, Piy, Tiy, Diy]),
        ]))
    }
}

impl LabelTable {
    pub fn task(&self, id: TaskId) -> Result<Task> {
        let positive = self
            .0
            .get(&id)
            .ok_or_else(|| Error::config(format!("labels.{id}"), "task has no label entry"))?;
        Task::new(id, positive.clone()).map_err(|e| Error::config(format!("labels.{id}"), e.to_string()))
    }
}
