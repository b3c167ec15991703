use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three longitudinal driving styles, ordered from shortest to longest
/// preferred headway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrivingStyle {
    Aggressive,
    Normal,
    Conservative,
}

impl DrivingStyle {
    pub const ALL: [DrivingStyle; 3] = [
        DrivingStyle::Aggressive,
        DrivingStyle::Normal,
        DrivingStyle::Conservative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DrivingStyle::Aggressive => "aggressive",
            DrivingStyle::Normal => "normal",
            DrivingStyle::Conservative => "conservative",
        }
    }
}

impl fmt::Display for DrivingStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown driving style `{0}`")]
pub struct UnknownStyle(pub String);

impl FromStr for DrivingStyle {
    type Err = UnknownStyle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aggressive" | "a" => Ok(DrivingStyle::Aggressive),
            "normal" | "n" => Ok(DrivingStyle::Normal),
            "conservative" | "c" => Ok(DrivingStyle::Conservative),
            _ => Err(UnknownStyle(s.to_string())),
        }
    }
}
