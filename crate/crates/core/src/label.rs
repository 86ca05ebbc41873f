use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary group membership of a feature: which of the two samples it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Zero => 0,
            Label::One => 1,
        }
    }

    pub fn is_one(self) -> bool {
        self == Label::One
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl From<bool> for Label {
    fn from(one: bool) -> Self {
        if one {
            Label::One
        } else {
            Label::Zero
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Zero),
            1 => Ok(Label::One),
            other => Err(Error::data(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// A feature vector together with its revealed label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub feature: Vec<f64>,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(feature: Vec<f64>, label: Label) -> Self {
        Self { feature, label }
    }

    pub fn dim(&self) -> usize {
        self.feature.len()
    }
}
