//! The five experiment arms: control plus four upselling intensities.

use core::fmt;

use serde::{Deserialize, Serialize};

/// Arm identifier. `Cg` is the control group and receives the default
/// (non-personalized) recommendation; the target groups scale the
/// personalized recommendation by their intensity multiplier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ArmId {
    #[serde(rename = "CG")]
    Cg,
    #[serde(rename = "TG1")]
    Tg1,
    #[serde(rename = "TG2")]
    Tg2,
    #[serde(rename = "TG3")]
    Tg3,
    #[serde(rename = "TG4")]
    Tg4,
}

impl ArmId {
    /// All five arms in canonical order.
    pub const ALL: [ArmId; 5] = [ArmId::Cg, ArmId::Tg1, ArmId::Tg2, ArmId::Tg3, ArmId::Tg4];

    /// The four target groups in intensity order.
    pub const TARGETS: [ArmId; 4] = [ArmId::Tg1, ArmId::Tg2, ArmId::Tg3, ArmId::Tg4];

    /// Upselling intensity multiplier applied to the recommendation.
    pub const fn intensity(self) -> f64 {
        match self {
            ArmId::Cg => 1.0,
            ArmId::Tg1 => 1.0,
            ArmId::Tg2 => 1.25,
            ArmId::Tg3 => 1.5,
            ArmId::Tg4 => 2.0,
        }
    }

    /// Whether the arm shows the fixed default recommendation instead of
    /// a personalized one.
    pub const fn is_control(self) -> bool {
        matches!(self, ArmId::Cg)
    }

    /// Position in [`ArmId::ALL`].
    pub const fn index(self) -> usize {
        match self {
            ArmId::Cg => 0,
            ArmId::Tg1 => 1,
            ArmId::Tg2 => 2,
            ArmId::Tg3 => 3,
            ArmId::Tg4 => 4,
        }
    }

    /// Position in [`ArmId::TARGETS`]; `None` for control.
    pub const fn target_index(self) -> Option<usize> {
        match self {
            ArmId::Cg => None,
            ArmId::Tg1 => Some(0),
            ArmId::Tg2 => Some(1),
            ArmId::Tg3 => Some(2),
            ArmId::Tg4 => Some(3),
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            ArmId::Cg => "CG",
            ArmId::Tg1 => "TG1",
            ArmId::Tg2 => "TG2",
            ArmId::Tg3 => "TG3",
            ArmId::Tg4 => "TG4",
        }
    }

    pub fn from_label(label: &str) -> Option<ArmId> {
        ArmId::ALL.into_iter().find(|a| a.label() == label)
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
