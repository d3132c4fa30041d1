//! Trace monitors for the three protocol specifications.
//!
//! Every monitor is an online [`Observer`]: it is fed each step's events and
//! the configuration after the step, and renders [`Verdict`]s at the end. The
//! `check_*` functions replay a recorded trace through the kernel and feed it
//! to the matching monitors, so a saved trace is judged exactly as the live
//! run was.

mod idl;
mod me;
mod pif;
mod projection;
mod verdict;

pub use idl::IdlMonitor;
pub use me::{MeMonitor, MeReport};
pub use pif::{FlushMonitor, PifMonitor};
pub use projection::{project, project_process, AbstractConfiguration};
pub use verdict::{Clause, Status, Verdict};

use crate::error::Error;
use crate::kernel::sched::{Observer, StepView};
use crate::kernel::step::execute;
use crate::kernel::trace::{RunEnd, Trace};
use crate::kernel::{digest, Configuration, Digest, Stack};

/// A monitor: an observer that can render verdicts once the run is over.
pub trait Monitor: Observer {
    fn verdicts(&self, last: &Configuration, end: RunEnd) -> Vec<Verdict>;
}

/// The monitors that apply to a stack.
///
/// Lower-layer liveness clauses are left to the top layer on the mutual
/// exclusion stack: its runs stop once every request is served, not at
/// quiescence.
pub struct Suite {
    pub pif: PifMonitor,
    pub flush: FlushMonitor,
    pub idl: Option<IdlMonitor>,
    pub me: Option<MeMonitor>,
}

impl Suite {
    pub fn for_config(initial: &Configuration) -> Self {
        let stack = initial.setup.stack;
        let lower_liveness = stack != Stack::Me;
        Suite {
            pif: PifMonitor::new(initial.setup, lower_liveness),
            flush: FlushMonitor::new(),
            idl: (stack != Stack::Pif).then(|| IdlMonitor::new(lower_liveness)),
            me: (stack == Stack::Me).then(MeMonitor::new),
        }
    }

    pub fn verdicts(&self, last: &Configuration, end: RunEnd) -> Vec<Verdict> {
        let mut out = self.pif.verdicts(last, end);
        out.extend(self.flush.verdicts(last, end));
        if let Some(m) = &self.idl {
            out.extend(m.verdicts(last, end));
        }
        if let Some(m) = &self.me {
            out.extend(m.verdicts(last, end));
        }
        out
    }
}

impl Observer for Suite {
    fn on_start(&mut self, initial: &Configuration) {
        self.pif.on_start(initial);
        self.flush.on_start(initial);
        if let Some(m) = &mut self.idl {
            m.on_start(initial);
        }
        if let Some(m) = &mut self.me {
            m.on_start(initial);
        }
    }

    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration) {
        self.pif.on_step(view, post);
        self.flush.on_step(view, post);
        if let Some(m) = &mut self.idl {
            m.on_step(view, post);
        }
        if let Some(m) = &mut self.me {
            m.on_step(view, post);
        }
    }
}

/// First step whose recomputed digest differs from the recorded one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: u64,
    pub recorded: Digest,
    pub replayed: Digest,
}

#[derive(Clone, Debug)]
pub struct Replay {
    pub divergence: Option<Divergence>,
    pub last: Configuration,
    pub steps: u64,
}

/// Re-executes a trace's choices from its initial configuration, feeding
/// `observers` and, when `verify` is set, comparing every digest.
pub fn replay_into(trace: &Trace, verify: bool, observers: &mut [&mut dyn Observer]) -> Result<Replay, Error> {
    let mut config = trace.initial.clone();
    config.validate()?;
    for o in observers.iter_mut() {
        o.on_start(&config);
    }
    let mut events = Vec::new();
    let mut divergence = None;
    for (i, rec) in trace.records.iter().enumerate() {
        if rec.step != i as u64 {
            return Err(Error::Trace(format!("record {i} is numbered {}", rec.step)));
        }
        events.clear();
        let message = execute(&mut config, &rec.choice, &mut events)
            .map_err(|e| Error::Trace(format!("step {i}: {e}")))?;
        let view = StepView {
            step: rec.step,
            choice: &rec.choice,
            message: message.as_ref(),
            events: &events,
        };
        for o in observers.iter_mut() {
            o.on_step(&view, &config);
        }
        if verify && divergence.is_none() {
            let d = digest(&config);
            if d != rec.digest {
                divergence = Some(Divergence {
                    step: rec.step,
                    recorded: rec.digest,
                    replayed: d,
                });
            }
        }
    }
    Ok(Replay {
        divergence,
        last: config,
        steps: trace.records.len() as u64,
    })
}

/// All verdicts for a trace, as the live run's suite would produce them.
pub fn check_trace(trace: &Trace) -> Result<Vec<Verdict>, Error> {
    let mut suite = Suite::for_config(&trace.initial);
    let r = replay_into(trace, false, &mut [&mut suite])?;
    Ok(suite.verdicts(&r.last, trace.end))
}

fn check_with<M: Monitor>(trace: &Trace, mut m: M) -> Result<Vec<Verdict>, Error> {
    let r = replay_into(trace, false, &mut [&mut m])?;
    Ok(m.verdicts(&r.last, trace.end))
}

/// PIF Start, Correctness, Termination and Decision (plus the handshake gate
/// when the protocol runs at capacity one).
pub fn check_pif(trace: &Trace) -> Result<Vec<Verdict>, Error> {
    check_with(trace, PifMonitor::new(trace.initial.setup, true))
}

/// Stale initial messages are flushed from the initiator's channels by every
/// started computation's decision.
pub fn check_flush(trace: &Trace) -> Result<Verdict, Error> {
    let mut v = check_with(trace, FlushMonitor::new())?;
    Ok(v.remove(0))
}

/// IDL clauses against the given true identities (process order).
pub fn check_idl(trace: &Trace, true_ids: &[u64]) -> Result<Vec<Verdict>, Error> {
    let m = IdlMonitor::new(true).with_ids(true_ids.to_vec());
    check_with(trace, m)
}

pub fn check_me(trace: &Trace) -> Result<Vec<Verdict>, Error> {
    check_with(trace, MeMonitor::new())
}

/// Mutual exclusion verdicts together with the steps-to-CS report.
pub fn check_me_report(trace: &Trace) -> Result<(Vec<Verdict>, MeReport), Error> {
    let mut m = MeMonitor::new();
    let r = replay_into(trace, false, &mut [&mut m])?;
    Ok((m.verdicts(&r.last, trace.end), m.report()))
}

/// Worst status over a verdict list: fail beats inconclusive beats pass.
pub fn overall(verdicts: &[Verdict]) -> Status {
    verdicts.iter().map(|v| v.status).max().unwrap_or(Status::Pass)
}
