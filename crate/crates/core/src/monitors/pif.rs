use crate::kernel::config::{neighbor_slot, Configuration, Layer, Setup, Stack};
use crate::kernel::message::{Origin, Payload, Request};
use crate::kernel::sched::{Observer, StepView};
use crate::kernel::trace::{Event, RunEnd};
use crate::kernel::ScheduleChoice;
use crate::monitors::verdict::{open_obligation, Clause, Safety, Verdict};
use crate::monitors::Monitor;

/// A started computation not yet decided.
#[derive(Clone, Debug)]
struct Running {
    cid: u64,
    payload: Payload,
    /// Per slot: the neighbor raised receive-brd for this computation.
    brd: Vec<bool>,
    /// Per slot: acknowledgments counted by the initiator.
    fck: Vec<u32>,
}

/// Start, Correctness, Termination and Decision of every PIF computation
/// started during the run. A computation restarted before its decision (an
/// upper layer re-requested a broadcast) is dropped, not judged.
pub struct PifMonitor {
    setup: Setup,
    liveness: bool,
    gate: bool,
    running: Vec<Option<Running>>,
    awaiting_start: Vec<Option<u64>>,
    prev_request: Vec<Request>,
    prev_state: Vec<Vec<u8>>,
    seq_before: u64,
    correctness: Safety,
    decision: Safety,
    gate_checks: Safety,
    started: u64,
    decided: u64,
    aborted: u64,
}

impl PifMonitor {
    /// `liveness` enables the Start and Termination clauses.
    pub fn new(setup: Setup, liveness: bool) -> Self {
        PifMonitor {
            setup,
            liveness,
            gate: setup.capacity == 1 && setup.assumed_capacity == 1,
            running: Vec::new(),
            awaiting_start: Vec::new(),
            prev_request: Vec::new(),
            prev_state: Vec::new(),
            seq_before: 0,
            correctness: Safety::default(),
            decision: Safety::default(),
            gate_checks: Safety::default(),
            started: 0,
            decided: 0,
            aborted: 0,
        }
    }

    pub fn started(&self) -> u64 {
        self.started
    }

    pub fn decided(&self) -> u64 {
        self.decided
    }

    fn on_event(&mut self, step: u64, ev: &Event, post: &Configuration) {
        let max = self.setup.max_state();
        match *ev {
            Event::Start { at, layer: Layer::Pif, cid, payload } => {
                if self.running[at].is_some() {
                    self.aborted += 1;
                }
                let k = self.setup.n - 1;
                self.running[at] = Some(Running {
                    cid,
                    payload: payload.unwrap_or(Payload::Nil),
                    brd: vec![false; k],
                    fck: vec![0; k],
                });
                self.awaiting_start[at] = None;
                self.started += 1;
            }
            Event::ReceiveBrd { at, from, payload, cid: Some(k), .. } => {
                if let Some(r) = self.running[from].as_mut().filter(|r| r.cid == k) {
                    self.correctness.check(payload == r.payload, step, || {
                        format!("process {at} received broadcast {payload:?} for computation {k} of {from}, which broadcasts {:?}", r.payload)
                    });
                    r.brd[neighbor_slot(from, at)] = true;
                }
            }
            Event::ReceiveFck { at, from, payload, feedback_for, .. } => {
                // A restart request (Wait) leaves the old computation orphaned.
                let live = post.procs[at].pif.request == Request::In;
                if let Some(r) = self.running[at].as_mut().filter(|_| live) {
                    let slot = neighbor_slot(at, from);
                    r.fck[slot] += 1;
                    let cid = r.cid;
                    self.decision.check(feedback_for == Some(cid), step, || {
                        format!(
                            "flag of {at} towards {from} reached {max} on feedback written for {} while computation {cid} runs",
                            feedback_for.map_or("no started computation".to_string(), |f| format!("computation {f}"))
                        )
                    });
                    if self.setup.stack == Stack::Pif {
                        let expected = r.payload;
                        self.correctness.check(payload == expected, step, || {
                            format!("process {at} acknowledged {payload:?} from {from}, expected {expected:?}")
                        });
                    }
                }
            }
            Event::Decide { at, layer: Layer::Pif, cid } => {
                if let Some(r) = self.running[at].take() {
                    debug_assert_eq!(cid, Some(r.cid));
                    let missing: Vec<usize> = (0..r.brd.len())
                        .filter(|&s| !r.brd[s])
                        .map(|s| crate::kernel::slot_process(at, s))
                        .collect();
                    self.correctness.check(missing.is_empty(), step, || {
                        format!("computation {} of {at} decided before {missing:?} received its broadcast", r.cid)
                    });
                    let counts = r.fck.clone();
                    self.decision.check(counts.iter().all(|&c| c == 1), step, || {
                        format!("computation {} of {at} decided with acknowledgment counts {counts:?}", r.cid)
                    });
                    self.decided += 1;
                }
            }
            _ => {}
        }
    }

    fn check_gate(&mut self, step: u64, q: usize, p: usize, post: &Configuration) {
        let max = self.setup.max_state();
        let (from2, to3) = (max - 2, max - 1);
        let slot = neighbor_slot(p, q);
        let before = self.prev_state[p][slot];
        let after = post.procs[p].pif.state[slot];
        let live = self.running[p].is_some() && post.procs[p].pif.request == Request::In;
        if !(before == from2 && after == to3 && live) {
            return;
        }
        let seq_before = self.seq_before;
        let old = |m: &&crate::kernel::Message| m.ghost.seq < seq_before;
        let pq_three = post.channel(p, q).queue.iter().filter(old).any(|m| m.wire.sender_state == to3);
        let q_seen = post.procs[q].pif.neig_state[neighbor_slot(q, p)] == to3;
        let qp_echo = post.channel(q, p).queue.iter().filter(old).any(|m| m.wire.echoed_state == to3);
        self.gate_checks.check(!(pq_three || q_seen || qp_echo), step, || {
            format!(
                "flag of {p} towards {q} switched {from2}->{to3} with {}",
                [
                    (pq_three, format!("a {to3}-flagged message in flight {p}->{q}")),
                    (q_seen, format!("{q} already holding {to3} for {p}")),
                    (qp_echo, format!("an echo of {to3} in flight {q}->{p}")),
                ]
                .into_iter()
                .filter(|(b, _)| *b)
                .map(|(_, s)| s)
                .collect::<Vec<_>>()
                .join(" and ")
            )
        });
    }
}

impl Observer for PifMonitor {
    fn on_start(&mut self, initial: &Configuration) {
        let n = initial.n();
        self.setup = initial.setup;
        self.running = vec![None; n];
        self.prev_request = initial.procs.iter().map(|p| p.pif.request).collect();
        self.awaiting_start = self.prev_request.iter().map(|&r| (r == Request::Wait).then_some(0)).collect();
        self.prev_state = initial.procs.iter().map(|p| p.pif.state.clone()).collect();
        self.seq_before = initial.ghost.next_seq;
    }

    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration) {
        for ev in view.events {
            self.on_event(view.step, ev, post);
        }
        for (p, ps) in post.procs.iter().enumerate() {
            let r = ps.pif.request;
            if r == Request::Wait && self.prev_request[p] != Request::Wait {
                self.awaiting_start[p] = Some(view.step);
            }
            self.prev_request[p] = r;
        }
        let touched = match *view.choice {
            ScheduleChoice::Deliver { from, to } => {
                if self.gate {
                    self.check_gate(view.step, from, to, post);
                }
                Some(to)
            }
            ScheduleChoice::FireGuard { process, .. } => Some(process),
            _ => None,
        };
        if let Some(p) = touched {
            self.prev_state[p].copy_from_slice(&post.procs[p].pif.state);
        }
        self.seq_before = post.ghost.next_seq;
    }
}

impl Monitor for PifMonitor {
    fn verdicts(&self, last: &Configuration, end: RunEnd) -> Vec<Verdict> {
        let summary = format!("{} started, {} decided, {} restarted", self.started, self.decided, self.aborted);
        let mut out = Vec::new();
        if self.liveness {
            out.push(match self.awaiting_start.iter().enumerate().find_map(|(p, s)| s.map(|s| (p, s))) {
                Some((p, since)) => open_obligation(Clause::PifStart, end, since, format!("request of {p} not started")),
                None => Verdict::pass(Clause::PifStart, format!("{} computations started", self.started)),
            });
        }
        out.push(self.correctness.verdict(Clause::PifCorrectness, &format!("events ({summary})")));
        if self.liveness {
            let open: Vec<usize> = (0..last.n()).filter(|&p| last.procs[p].pif.request != Request::Done).collect();
            out.push(if open.is_empty() {
                Verdict::pass(Clause::PifTermination, "every request is done")
            } else {
                open_obligation(Clause::PifTermination, end, 0, format!("processes {open:?} not done"))
            });
        }
        out.push(self.decision.verdict(Clause::PifDecision, &format!("acknowledgments ({summary})")));
        if self.gate {
            out.push(self.gate_checks.verdict(Clause::PifHandshakeGate, "flag switches"));
        }
        out
    }
}

/// Stale initial messages must be gone from the initiator's channels by the
/// decision of every started computation.
pub struct FlushMonitor {
    running: Vec<Option<u64>>,
    flush: Safety,
    pending_at_end: bool,
}

impl FlushMonitor {
    pub fn new() -> Self {
        FlushMonitor {
            running: Vec::new(),
            flush: Safety::default(),
            pending_at_end: false,
        }
    }
}

impl Default for FlushMonitor {
    fn default() -> Self {
        Self::new()
    }
}

impl Observer for FlushMonitor {
    fn on_start(&mut self, initial: &Configuration) {
        self.running = vec![None; initial.n()];
    }

    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration) {
        for ev in view.events {
            match *ev {
                Event::Start { at, layer: Layer::Pif, cid, .. } => self.running[at] = Some(cid),
                Event::Decide { at, layer: Layer::Pif, cid: Some(k) } if self.running[at] == Some(k) => {
                    self.running[at] = None;
                    let stale: Vec<(usize, usize)> = post
                        .channels
                        .iter()
                        .filter(|c| c.from == at || c.to == at)
                        .filter(|c| c.queue.iter().any(|m| m.ghost.origin == Origin::InitialConfig))
                        .map(|c| (c.from, c.to))
                        .collect();
                    self.flush.check(stale.is_empty(), view.step, || {
                        format!("computation {k} of {at} decided with initial messages still on {stale:?}")
                    });
                }
                _ => {}
            }
        }
        self.pending_at_end = self.running.iter().any(Option::is_some);
    }
}

impl Monitor for FlushMonitor {
    fn verdicts(&self, _last: &Configuration, end: RunEnd) -> Vec<Verdict> {
        let v = if self.flush.first_fail.is_none() && self.flush.checked == 0 && self.pending_at_end && end != RunEnd::Quiescent {
            Verdict::inconclusive(Clause::PifFlush, "no started computation decided before the run stopped")
        } else {
            self.flush.verdict(Clause::PifFlush, "decisions")
        };
        vec![v]
    }
}
