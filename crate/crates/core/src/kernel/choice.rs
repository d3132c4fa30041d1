use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::config::Layer;

/// Guarded internal actions, in protocol-text order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "PIF.A1")]
    PifA1,
    #[serde(rename = "PIF.A2")]
    PifA2,
    #[serde(rename = "IDL.A1")]
    IdlA1,
    #[serde(rename = "IDL.A2")]
    IdlA2,
    #[serde(rename = "ME.A0")]
    MeA0,
    #[serde(rename = "ME.A1")]
    MeA1,
    #[serde(rename = "ME.A2")]
    MeA2,
    #[serde(rename = "ME.A3")]
    MeA3,
    #[serde(rename = "ME.A4")]
    MeA4,
    #[serde(rename = "ME.CS-EXIT")]
    MeCsExit,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::PifA1,
        Action::PifA2,
        Action::IdlA1,
        Action::IdlA2,
        Action::MeA0,
        Action::MeA1,
        Action::MeA2,
        Action::MeA3,
        Action::MeA4,
        Action::MeCsExit,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn me_phase(phase: u8) -> Action {
        match phase {
            0 => Action::MeA0,
            1 => Action::MeA1,
            2 => Action::MeA2,
            3 => Action::MeA3,
            _ => Action::MeA4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::PifA1 => "PIF.A1",
            Action::PifA2 => "PIF.A2",
            Action::IdlA1 => "IDL.A1",
            Action::IdlA2 => "IDL.A2",
            Action::MeA0 => "ME.A0",
            Action::MeA1 => "ME.A1",
            Action::MeA2 => "ME.A2",
            Action::MeA3 => "ME.A3",
            Action::MeA4 => "ME.A4",
            Action::MeCsExit => "ME.CS-EXIT",
        }
    }
}

/// One scheduler step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleChoice {
    FireGuard { process: usize, action: Action },
    Deliver { from: usize, to: usize },
    Lose { from: usize, to: usize },
    ExternalRequest { process: usize, layer: Layer },
}

impl ScheduleChoice {
    pub fn fire(process: usize, action: Action) -> Self {
        ScheduleChoice::FireGuard { process, action }
    }

    pub fn deliver(from: usize, to: usize) -> Self {
        ScheduleChoice::Deliver { from, to }
    }

    pub fn lose(from: usize, to: usize) -> Self {
        ScheduleChoice::Lose { from, to }
    }
}

impl fmt::Display for ScheduleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleChoice::FireGuard { process, action } => write!(f, "fire({process}, {})", action.label()),
            ScheduleChoice::Deliver { from, to } => write!(f, "deliver({from}->{to})"),
            ScheduleChoice::Lose { from, to } => write!(f, "lose({from}->{to})"),
            ScheduleChoice::ExternalRequest { process, layer } => write!(f, "request({process}, {layer:?})"),
        }
    }
}
