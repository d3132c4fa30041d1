use serde::{Deserialize, Serialize};

use crate::kernel::config::{neighbor_slot, Configuration, Layer};
use crate::kernel::message::{Payload, Request};
use crate::kernel::sched::{Observer, StepView};
use crate::kernel::trace::{Event, RunEnd};
use crate::monitors::verdict::{open_obligation, Clause, Safety, Verdict};
use crate::monitors::Monitor;

/// Critical-section statistics of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeReport {
    /// Entries by requesters (processes that accepted a request).
    pub cs_entries: u64,
    /// Steps from each served request to its critical-section entry.
    pub steps_to_cs: Vec<u64>,
}

impl MeReport {
    pub fn max_steps_to_cs(&self) -> Option<u64> {
        self.steps_to_cs.iter().copied().max()
    }
}

/// Mutual exclusion among requesters, the leader-favour invariant, the EXIT
/// sweep before each entry, and eventual entry for every request.
///
/// Only requesters are judged: a process counts once it has accepted a
/// request (its phase-0 action promoted `Wait` to `In`). A process that
/// starts inside the critical section by corruption is ignored.
pub struct MeMonitor {
    leader: usize,
    /// Per process: requester id while inside the critical section.
    inside: Vec<Option<u64>>,
    requested_at: Vec<Option<u64>>,
    /// Per process: latest EXIT broadcast and who has received it.
    exit_wave: Vec<Option<(u64, u64)>>,
    correctness: Safety,
    favour: Safety,
    sweep: Safety,
    report: MeReport,
}

impl MeMonitor {
    pub fn new() -> Self {
        MeMonitor {
            leader: 0,
            inside: Vec::new(),
            requested_at: Vec::new(),
            exit_wave: Vec::new(),
            correctness: Safety::default(),
            favour: Safety::default(),
            sweep: Safety::default(),
            report: MeReport::default(),
        }
    }

    pub fn report(&self) -> MeReport {
        self.report.clone()
    }

    fn enter(&mut self, step: u64, p: usize, cid: u64, n: usize) {
        let others: Vec<usize> = (0..n).filter(|&q| q != p && self.inside[q].is_some()).collect();
        self.correctness.check(others.is_empty(), step, || {
            format!("{p} entered the critical section while {others:?} were inside")
        });
        self.inside[p] = Some(cid);
        let everyone_else = ((1u64 << n) - 1) & !(1u64 << p);
        let wave = self.exit_wave[p];
        self.sweep.check(wave.is_some_and(|(_, got)| got & everyone_else == everyone_else), step, || match wave {
            None => format!("{p} entered the critical section without broadcasting EXIT"),
            Some((k, got)) => {
                let missing: Vec<usize> = (0..n).filter(|&q| q != p && got & (1 << q) == 0).collect();
                format!("{p} entered the critical section before {missing:?} received EXIT broadcast {k}")
            }
        });
        if let Some(since) = self.requested_at[p].take() {
            self.report.steps_to_cs.push(step - since);
        }
        self.report.cs_entries += 1;
    }
}

impl Default for MeMonitor {
    fn default() -> Self {
        Self::new()
    }
}

impl Observer for MeMonitor {
    fn on_start(&mut self, initial: &Configuration) {
        let n = initial.n();
        assert!(n < 64, "mutual exclusion monitor tracks fewer than 64 processes");
        self.leader = initial.leader().expect("mutual exclusion needs identities");
        self.inside = vec![None; n];
        self.exit_wave = vec![None; n];
        self.requested_at = initial
            .procs
            .iter()
            .map(|p| p.me.as_ref().is_some_and(|m| m.request == Request::Wait).then_some(0))
            .collect();
    }

    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration) {
        let n = post.n();
        for ev in view.events {
            match *ev {
                Event::Request { at, layer: Layer::Me } => self.requested_at[at] = Some(view.step),
                Event::Start { at, layer: Layer::Pif, cid, payload: Some(Payload::Exit) } => self.exit_wave[at] = Some((cid, 0)),
                Event::ReceiveBrd { at, from, payload: Payload::Exit, cid: Some(k), .. } => {
                    if let Some((w, got)) = self.exit_wave[from].as_mut() {
                        if *w == k {
                            *got |= 1 << at;
                        }
                    }
                }
                Event::CsEnter { at, cid: Some(c) } => self.enter(view.step, at, c, n),
                Event::CsExit { at, .. } => self.inside[at] = None,
                _ => {}
            }
        }
        let leader = self.leader;
        let value = post.procs[leader].me.as_ref().expect("ME layer").value;
        for p in (0..n).filter(|&p| self.inside[p].is_some()) {
            let favoured = if p == leader { 0 } else { neighbor_slot(leader, p) + 1 };
            self.favour.check(value == favoured, view.step, || {
                format!("{p} is inside the critical section but the leader {leader} has value {value}, not {favoured}")
            });
        }
    }
}

impl Monitor for MeMonitor {
    fn verdicts(&self, _last: &Configuration, end: RunEnd) -> Vec<Verdict> {
        let start = match self.requested_at.iter().enumerate().find_map(|(p, s)| s.map(|s| (p, s))) {
            Some((p, since)) => open_obligation(Clause::MeStart, end, since, format!("request of {p} has not reached the critical section")),
            None => Verdict::pass(
                Clause::MeStart,
                format!(
                    "{} requests served, at most {} steps to the critical section",
                    self.report.steps_to_cs.len(),
                    self.report.max_steps_to_cs().unwrap_or(0)
                ),
            ),
        };
        vec![
            start,
            self.correctness.verdict(Clause::MeCorrectness, "entries"),
            self.favour.verdict(Clause::MeLeaderFavour, "occupied steps"),
            self.sweep.verdict(Clause::MeExitSweep, "entries"),
        ]
    }
}
