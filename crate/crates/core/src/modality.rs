use std::fmt;

use serde::{Deserialize, Serialize};

/// Acoustic, visual and language streams. Language is the alignment target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "a")]
    Acoustic,
    #[serde(rename = "v")]
    Visual,
    #[serde(rename = "l")]
    Language,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Acoustic, Modality::Visual, Modality::Language];
    /// Modalities that are transported onto language.
    pub const SOURCES: [Modality; 2] = [Modality::Acoustic, Modality::Visual];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Acoustic => "a",
            Modality::Visual => "v",
            Modality::Language => "l",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Mapping key used in checkpoints, e.g. `a2l`.
    pub fn mapping_key(self) -> String {
        format!("{}2l", self.as_str())
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Downstream task family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Ground-truth label of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Value(f64),
}

impl Label {
    pub fn task(self) -> Task {
        match self {
            Label::Class(_) => Task::Classification,
            Label::Value(_) => Task::Regression,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Class(c) => c as f64,
            Label::Value(v) => v,
        }
    }

    /// Squared label distance: 0/1 class disagreement for classification,
    /// squared difference for regression. Mixed kinds count as different.
    pub fn distance_sq(self, other: Label) -> f64 {
        match (self, other) {
            (Label::Class(a), Label::Class(b)) => f64::from(u8::from(a != b)),
            (Label::Value(a), Label::Value(b)) => (a - b) * (a - b),
            _ => 1.0,
        }
    }
}
