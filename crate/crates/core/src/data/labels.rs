use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Arousal,
    Valence,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Arousal => "arousal",
            Task::Valence => "valence",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arousal" => Ok(Task::Arousal),
            "valence" => Ok(Task::Valence),
            _ => Err(Error::Config(format!(
                "unknown task {s:?}, expected arousal or valence"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Low,
    High,
}

impl Label {
    /// Output unit of the class: 0 for low, 1 for high.
    pub fn index(self) -> usize {
        match self {
            Label::Low => 0,
            Label::High => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Low
        } else {
            Label::High
        }
    }
}

/// Self-assessment score to class: below 5 is low, above 5 is high and
/// exactly 5 is discarded (`None`).
pub fn map_label(score: f64) -> Result<Option<Label>> {
    if !(1.0..=9.0).contains(&score) {
        return arg_err(format!("rating {score} outside [1, 9]"));
    }
    Ok(if score < 5.0 {
        Some(Label::Low)
    } else if score > 5.0 {
        Some(Label::High)
    } else {
        None
    })
}
