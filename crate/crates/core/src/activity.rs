use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of recognized activities.
pub const N_ACTIVITIES: usize = 7;

/// The recognized activities, in output-neuron order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityLabel {
    Drive,
    Jump,
    LieDown,
    Sit,
    Stand,
    Walk,
    Transition,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; N_ACTIVITIES] = [
        ActivityLabel::Drive,
        ActivityLabel::Jump,
        ActivityLabel::LieDown,
        ActivityLabel::Sit,
        ActivityLabel::Stand,
        ActivityLabel::Walk,
        ActivityLabel::Transition,
    ];

    /// Zero-based output-neuron index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            ActivityLabel::Drive => "D",
            ActivityLabel::Jump => "J",
            ActivityLabel::LieDown => "L",
            ActivityLabel::Sit => "S",
            ActivityLabel::Stand => "Sd",
            ActivityLabel::Walk => "W",
            ActivityLabel::Transition => "T",
        }
    }

    /// Scalar encoding used for the previous-activity feature: the
    /// one-based label index divided by the number of activities. The
    /// absence of a previous segment encodes as 0.
    pub fn encode_prev(prev: Option<Self>) -> f64 {
        prev.map_or(0.0, |a| (a.index() + 1) as f64 / N_ACTIVITIES as f64)
    }

    /// Inverse of [`ActivityLabel::encode_prev`], rounding to the nearest slot.
    pub fn decode_prev(value: f64) -> Option<Self> {
        let slot = (value * N_ACTIVITIES as f64).round();
        if slot < 1.0 {
            return None;
        }
        Self::from_index(slot as usize - 1)
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ActivityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.code() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activity code {s:?}")))
    }
}
