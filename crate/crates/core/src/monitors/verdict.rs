use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::trace::RunEnd;

/// Ordered by severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Clause {
    #[serde(rename = "PIF.Start")]
    PifStart,
    #[serde(rename = "PIF.Correctness")]
    PifCorrectness,
    #[serde(rename = "PIF.Termination")]
    PifTermination,
    #[serde(rename = "PIF.Decision")]
    PifDecision,
    /// Preconditions of the last-but-one flag switch (capacity one only).
    #[serde(rename = "PIF.HandshakeGate")]
    PifHandshakeGate,
    #[serde(rename = "PIF.Flush")]
    PifFlush,
    #[serde(rename = "IDL.Start")]
    IdlStart,
    #[serde(rename = "IDL.Correctness")]
    IdlCorrectness,
    #[serde(rename = "IDL.Termination")]
    IdlTermination,
    #[serde(rename = "IDL.Decision")]
    IdlDecision,
    #[serde(rename = "ME.Start")]
    MeStart,
    #[serde(rename = "ME.Correctness")]
    MeCorrectness,
    #[serde(rename = "ME.LeaderFavour")]
    MeLeaderFavour,
    #[serde(rename = "ME.ExitSweep")]
    MeExitSweep,
}

impl Clause {
    pub fn name(self) -> &'static str {
        match self {
            Clause::PifStart => "PIF.Start",
            Clause::PifCorrectness => "PIF.Correctness",
            Clause::PifTermination => "PIF.Termination",
            Clause::PifDecision => "PIF.Decision",
            Clause::PifHandshakeGate => "PIF.HandshakeGate",
            Clause::PifFlush => "PIF.Flush",
            Clause::IdlStart => "IDL.Start",
            Clause::IdlCorrectness => "IDL.Correctness",
            Clause::IdlTermination => "IDL.Termination",
            Clause::IdlDecision => "IDL.Decision",
            Clause::MeStart => "ME.Start",
            Clause::MeCorrectness => "ME.Correctness",
            Clause::MeLeaderFavour => "ME.LeaderFavour",
            Clause::MeExitSweep => "ME.ExitSweep",
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One monitor outcome. Renders as `{clause, status, witness_step, detail}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub clause: Clause,
    pub status: Status,
    pub witness_step: Option<u64>,
    pub detail: String,
}

impl Verdict {
    pub fn pass(clause: Clause, detail: impl Into<String>) -> Self {
        Verdict { clause, status: Status::Pass, witness_step: None, detail: detail.into() }
    }

    pub fn fail(clause: Clause, step: u64, detail: impl Into<String>) -> Self {
        Verdict { clause, status: Status::Fail, witness_step: Some(step), detail: detail.into() }
    }

    pub fn inconclusive(clause: Clause, detail: impl Into<String>) -> Self {
        Verdict { clause, status: Status::Inconclusive, witness_step: None, detail: detail.into() }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialize")
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Inconclusive => "inconclusive",
        };
        write!(f, "{:<18} {:<12}", self.clause.name(), status)?;
        if let Some(s) = self.witness_step {
            write!(f, " step {s}:")?;
        }
        write!(f, " {}", self.detail)
    }
}

/// Running state of a safety clause: the first violation and a check count.
#[derive(Clone, Debug, Default)]
pub(crate) struct Safety {
    pub first_fail: Option<(u64, String)>,
    pub checked: u64,
}

impl Safety {
    pub fn check(&mut self, ok: bool, step: u64, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.first_fail.is_none() {
            self.first_fail = Some((step, detail()));
        }
    }

    pub fn verdict(&self, clause: Clause, what: &str) -> Verdict {
        match &self.first_fail {
            Some((step, d)) => Verdict::fail(clause, *step, d.clone()),
            None => Verdict::pass(clause, format!("{} {what} checked", self.checked)),
        }
    }
}

/// Verdict for an eventuality still open when the run ended: a quiescent run
/// can no longer satisfy it, a stopped one might have later.
pub(crate) fn open_obligation(clause: Clause, end: RunEnd, since: u64, what: String) -> Verdict {
    match end {
        RunEnd::Quiescent => Verdict::fail(clause, since, format!("{what}, and the run is quiescent")),
        RunEnd::Truncated | RunEnd::Goal => Verdict::inconclusive(clause, format!("{what} when the run stopped")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_canonical_keys() {
        let v = Verdict::fail(Clause::PifDecision, 7, "bad ack");
        assert_eq!(
            v.to_json_line(),
            r#"{"clause":"PIF.Decision","status":"fail","witness_step":7,"detail":"bad ack"}"#
        );
        let back: Verdict = serde_json::from_str(&v.to_json_line()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn severity_order() {
        assert!(Status::Fail > Status::Inconclusive && Status::Inconclusive > Status::Pass);
    }

    #[test]
    fn safety_keeps_first_failure() {
        let mut s = Safety::default();
        s.check(true, 0, String::new);
        s.check(false, 3, || "a".into());
        s.check(false, 5, || "b".into());
        let v = s.verdict(Clause::MeCorrectness, "entries");
        assert_eq!((v.status, v.witness_step, v.detail.as_str()), (Status::Fail, Some(3), "a"));
    }
}
