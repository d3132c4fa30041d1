//! Exhaustive exploration of two-process PIF.
//!
//! Every configuration is a legal starting point, so the states worth
//! exploring are those in which process 0 runs a computation it started
//! itself: the successors of its start action from any configuration. The
//! computation of process 1 is covered by symmetry. Broadcast and feedback
//! payloads range over `{m, m'}`; process 0 always broadcasts `m` (swapping
//! the two symbols is a symmetry).
//!
//! Payload fields that cannot reach a clause about process 0's computation
//! are left out of the state key: process 1's broadcast payload, process 0's
//! feedback slot, and what those two write on the wire. The protocol never
//! branches on a payload, so states that differ only there behave alike.
//! Process 1 may receive an external request whenever it is idle.
//!
//! A state is packed into a `u64`:
//!
//! | field | bits |
//! |---|---|
//! | flag and neighbor flag of process 0 | 3 + 3 |
//! | request, feedback, flag, neighbor flag of process 1 | 2 + 1 + 3 + 3 |
//! | process 1 last received process 0's running broadcast | 1 |
//! | broadcast seen, acknowledgments counted | 1 + 2 |
//! | channel 0 -> 1: length, then per message payload, two flags, current, initial | 2 + 9 per slot |
//! | channel 1 -> 0: length, then per message payload, two flags, for current, initial | 2 + 9 per slot |

use std::collections::VecDeque;

use rustc_hash::FxHashSet;

use crate::error::Error;
use crate::kernel::config::{Channel, Configuration, Environment, GlobalGhost, ProcGhost, ProcessState, Setup, Stack};
use crate::kernel::message::{Ghost, Message, Origin, Payload, Request, Wire};
use crate::kernel::sched::{RunOptions, Scripted};
use crate::kernel::step::{enabled_choices_into, execute};
use crate::kernel::trace::{Event, Trace};
use crate::kernel::{run_observed, Action, ScheduleChoice};
use crate::monitors::{check_flush, check_pif, Clause, Status, Verdict};
use crate::pif::PifState;

const RUNNING: u64 = 1;
const START_BATCH: u64 = 1 << 12;
const SCRAMBLE_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    pub capacity: usize,
    pub assumed_capacity: usize,
    /// Stop with an inconclusive outcome past this many states.
    pub budget: u64,
}

impl ExploreOptions {
    pub fn new(capacity: usize) -> Self {
        ExploreOptions { capacity, assumed_capacity: capacity, budget: u64::MAX }
    }

    pub fn assumed(mut self, assumed_capacity: usize) -> Self {
        self.assumed_capacity = assumed_capacity;
        self
    }

    pub fn budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every reachable state was explored without a violation.
    Closed,
    Violation,
    BudgetExceeded,
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub clause: Clause,
    pub detail: String,
    /// Step index of the violating step within `trace`.
    pub step: u64,
    pub trace: Trace,
    /// Verdicts of the trace monitors on `trace`.
    pub verdicts: Vec<Verdict>,
}

#[derive(Clone, Debug)]
pub struct ExploreReport {
    pub options: ExploreOptions,
    pub start_states: u64,
    pub states: u64,
    pub transitions: u64,
    pub outcome: Outcome,
    pub counterexample: Option<Counterexample>,
}

impl ExploreReport {
    pub fn status(&self) -> Status {
        match self.outcome {
            Outcome::Closed => Status::Pass,
            Outcome::Violation => Status::Fail,
            Outcome::BudgetExceeded => Status::Inconclusive,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Watch {
    brd_seen: bool,
    fcks: u8,
}

fn sym(p: Payload) -> u64 {
    (p != Payload::M) as u64
}

fn payload(bit: u64) -> Payload {
    if bit == 0 {
        Payload::M
    } else {
        Payload::M_PRIME
    }
}

fn request_code(r: Request) -> u64 {
    match r {
        Request::Wait => 0,
        Request::In => 1,
        Request::Done => 2,
    }
}

fn request_of(code: u64) -> Request {
    [Request::Wait, Request::In, Request::Done][code as usize]
}

struct Bits(u64, u32);

impl Bits {
    fn put(&mut self, v: u64, width: u32) {
        debug_assert!(v < 1 << width);
        self.0 |= v << self.1;
        self.1 += width;
    }

    fn take(&mut self, width: u32) -> u64 {
        let v = (self.0 >> self.1) & ((1 << width) - 1);
        self.1 += width;
        v
    }
}

struct Space {
    setup: Setup,
}

impl Space {
    fn encode(&self, c: &Configuration, w: Watch) -> u64 {
        let mut b = Bits(0, 0);
        let (p, q) = (&c.procs[0].pif, &c.procs[1]);
        b.put(p.state[0] as u64, 3);
        b.put(p.neig_state[0] as u64, 3);
        b.put(request_code(q.pif.request), 2);
        b.put(sym(q.pif.f_mes[0]), 1);
        b.put(q.pif.state[0] as u64, 3);
        b.put(q.pif.neig_state[0] as u64, 3);
        b.put((q.ghost.brd_cid[0] == Some(RUNNING)) as u64, 1);
        b.put(w.brd_seen as u64, 1);
        b.put(w.fcks as u64, 2);
        for (from, to) in [(0, 1), (1, 0)] {
            let ch = c.channel(from, to);
            b.put(ch.queue.len() as u64, 2);
            for slot in 0..self.setup.capacity {
                let Some(m) = ch.queue.get(slot) else {
                    b.put(0, 9);
                    continue;
                };
                let (data, current) = if from == 0 {
                    (m.wire.b_payload, m.ghost.computation_id == Some(RUNNING))
                } else {
                    (m.wire.f_payload, m.ghost.feedback_for == Some(RUNNING))
                };
                b.put(sym(data), 1);
                b.put(m.wire.sender_state as u64, 3);
                b.put(m.wire.echoed_state as u64, 3);
                b.put(current as u64, 1);
                b.put((m.ghost.origin == Origin::InitialConfig) as u64, 1);
            }
        }
        b.0
    }

    fn decode(&self, key: u64) -> (Configuration, Watch) {
        let s = self.setup;
        let mut b = Bits(key, 0);
        let mut p = PifState::fresh(2, s.assumed_capacity);
        p.request = Request::In;
        p.b_mes = Payload::M;
        p.f_mes[0] = Payload::M;
        p.state[0] = b.take(3) as u8;
        p.neig_state[0] = b.take(3) as u8;
        let mut q = PifState::fresh(2, s.assumed_capacity);
        q.request = request_of(b.take(2));
        q.b_mes = Payload::M;
        q.f_mes[0] = payload(b.take(1));
        q.state[0] = b.take(3) as u8;
        q.neig_state[0] = b.take(3) as u8;
        let q_brd = (b.take(1) == 1).then_some(RUNNING);
        let w = Watch { brd_seen: b.take(1) == 1, fcks: b.take(2) as u8 };
        let mut seq = 0;
        let mut channels = Vec::with_capacity(2);
        for (from, to) in [(0, 1), (1, 0)] {
            let len = b.take(2) as usize;
            let mut queue = VecDeque::with_capacity(s.capacity);
            for slot in 0..s.capacity {
                let data = payload(b.take(1));
                let (ss, es) = (b.take(3) as u8, b.take(3) as u8);
                let current = b.take(1) == 1;
                let initial = b.take(1) == 1;
                if slot >= len {
                    continue;
                }
                let wire = if from == 0 { Wire::pif(data, Payload::M, ss, es) } else { Wire::pif(Payload::M, data, ss, es) };
                let ghost = Ghost {
                    origin: if initial { Origin::InitialConfig } else { Origin::ProcessSent },
                    computation_id: (from == 0 && current).then_some(RUNNING),
                    sent_by: (!initial).then_some(from),
                    seq,
                    feedback_for: (from == 1 && current).then_some(RUNNING),
                };
                seq += 1;
                queue.push_back(Message { wire, ghost });
            }
            channels.push(Channel { from, to, capacity: s.capacity, queue });
        }
        let proc = |pif: PifState, ghost: ProcGhost| ProcessState { pif, idl: None, me: None, ghost };
        let config = Configuration {
            setup: s,
            procs: vec![
                proc(p, ProcGhost { pif_cid: Some(RUNNING), brd_cid: vec![None], ..ProcGhost::default() }),
                proc(q, ProcGhost { brd_cid: vec![q_brd], ..ProcGhost::default() }),
            ],
            channels,
            env: Environment { pending: vec![0, 1], request_payload: Payload::M },
            ghost: GlobalGhost { next_cid: RUNNING + 1, next_seq: seq },
        };
        (config, w)
    }

    fn channel_contents(&self) -> u64 {
        let one = 2 * (self.setup.max_state() as u64 + 1).pow(2);
        (0..=self.setup.capacity as u32).map(|len| one.pow(len)).sum()
    }

    /// Number of configurations just after process 0 starts with every
    /// channel message an initial one.
    fn start_count(&self) -> u64 {
        let v = self.setup.max_state() as u64 + 1;
        v * 3 * 2 * v * v * self.channel_contents().pow(2)
    }

    /// The `idx`-th start in mixed-radix order.
    fn start(&self, mut idx: u64) -> u64 {
        let v = self.setup.max_state() as u64 + 1;
        let mut digit = |radix: u64| {
            let d = idx % radix;
            idx /= radix;
            d
        };
        let contents = self.channel_contents();
        let (c10, c01) = (digit(contents), digit(contents));
        let (qn, qs, qf, qr, pn) = (digit(v), digit(v), digit(2), digit(3), digit(v));
        let mut b = Bits(0, 0);
        b.put(0, 3);
        b.put(pn, 3);
        b.put(qr, 2);
        b.put(qf, 1);
        b.put(qs, 3);
        b.put(qn, 3);
        b.put(0, 4);
        for mut c in [c01, c10] {
            let one = 2 * v * v;
            let mut len = 0;
            let mut block = 1;
            while c >= block {
                c -= block;
                len += 1;
                block *= one;
            }
            b.put(len, 2);
            for slot in 0..self.setup.capacity as u64 {
                if slot >= len {
                    b.put(0, 9);
                    continue;
                }
                let (d, rest) = (c % 2, c / 2);
                let (ss, es) = (rest % v, rest / v % v);
                c = rest / (v * v);
                b.put(d, 1);
                b.put(ss, 3);
                b.put(es, 3);
                b.put(0, 1);
                b.put(1, 1);
            }
        }
        b.0
    }

    /// The real starting configuration behind a start key: process 0
    /// waiting, before its start action.
    fn before_start(&self, key: u64, external_requests: u32) -> Configuration {
        let (mut c, _) = self.decode(key);
        c.procs[0].pif.request = Request::Wait;
        c.procs[0].ghost.pif_cid = None;
        c.env.pending = vec![0, external_requests];
        c.ghost.next_cid = 1;
        for (i, m) in c.channels.iter_mut().flat_map(|ch| ch.queue.iter_mut()).enumerate() {
            m.ghost = Ghost::initial(i as u64);
        }
        c.ghost.next_seq = c.in_flight() as u64;
        c
    }
}

struct Violation {
    clause: Clause,
    detail: String,
}

/// Judges one step of process 0's computation. `None` means the
/// computation decided and the successor leaves the explored set.
fn judge(
    setup: Setup,
    pre: &Configuration,
    choice: &ScheduleChoice,
    post: &Configuration,
    events: &[Event],
    w: &mut Watch,
) -> Result<bool, Violation> {
    let mut decided = false;
    for ev in events {
        match *ev {
            Event::ReceiveBrd { at: 1, payload, cid: Some(RUNNING), .. } => {
                if payload != Payload::M {
                    return Err(Violation { clause: Clause::PifCorrectness, detail: format!("process 1 received broadcast {payload:?} for the running computation") });
                }
                w.brd_seen = true;
            }
            Event::ReceiveFck { at: 0, payload, feedback_for, .. } => {
                if feedback_for != Some(RUNNING) {
                    return Err(Violation { clause: Clause::PifDecision, detail: "process 0 counted feedback not written for its computation".into() });
                }
                if payload != Payload::M {
                    return Err(Violation { clause: Clause::PifCorrectness, detail: format!("process 0 acknowledged {payload:?}") });
                }
                w.fcks = (w.fcks + 1).min(2);
            }
            Event::Decide { at: 0, .. } => {
                if !w.brd_seen {
                    return Err(Violation { clause: Clause::PifCorrectness, detail: "process 0 decided before process 1 received its broadcast".into() });
                }
                if w.fcks != 1 {
                    return Err(Violation { clause: Clause::PifDecision, detail: format!("process 0 decided with {} acknowledgments", w.fcks) });
                }
                if post.channels.iter().any(|ch| ch.queue.iter().any(|m| m.ghost.origin == Origin::InitialConfig)) {
                    return Err(Violation { clause: Clause::PifFlush, detail: "process 0 decided with initial messages in flight".into() });
                }
                decided = true;
            }
            _ => {}
        }
    }
    let gate = setup.capacity == 1 && setup.assumed_capacity == 1;
    if gate && *choice == ScheduleChoice::deliver(1, 0) {
        let max = setup.max_state();
        if pre.procs[0].pif.state[0] == max - 2 && post.procs[0].pif.state[0] == max - 1 {
            let old = |m: &&Message| m.ghost.seq < pre.ghost.next_seq;
            let stale = post.channel(0, 1).queue.iter().filter(old).any(|m| m.wire.sender_state == max - 1)
                || post.procs[1].pif.neig_state[0] == max - 1
                || post.channel(1, 0).queue.iter().filter(old).any(|m| m.wire.echoed_state == max - 1);
            if stale {
                return Err(Violation { clause: Clause::PifHandshakeGate, detail: format!("flag of process 0 switched to {} with that value still around", max - 1) });
            }
        }
    }
    Ok(decided)
}

/// A bijection of `0..total` that spreads neighboring indices apart, so
/// that the starts admitted early are spread over the whole space.
fn scramble(idx: u64, total: u64) -> u64 {
    let mut stride = SCRAMBLE_STRIDE % total;
    while gcd(stride, total) != 1 {
        stride += 1;
    }
    ((idx as u128 * stride as u128) % total as u128) as u64
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Breadth-first search over every state of a running computation of
/// process 0 on two processes.
pub fn explore(opts: ExploreOptions) -> Result<ExploreReport, Error> {
    if !(1..=2).contains(&opts.capacity) || !(1..=2).contains(&opts.assumed_capacity) {
        return Err(Error::Usage("exhaustive exploration supports capacities 1 and 2".into()));
    }
    let setup = Setup::new(2, Stack::Pif, opts.capacity).with_assumed_capacity(opts.assumed_capacity);
    let space = Space { setup };
    let total_starts = space.start_count();
    let mut next_start = 0;
    let mut seen: FxHashSet<u64> = FxHashSet::default();
    let mut keys: Vec<u64> = Vec::new();
    let mut parent: Vec<(u32, u8)> = Vec::new();
    let mut report = ExploreReport { options: opts, start_states: 0, states: 0, transitions: 0, outcome: Outcome::Closed, counterexample: None };
    let mut enabled = Vec::new();
    let mut events = Vec::new();
    let mut i = 0;
    loop {
        if i == keys.len() {
            // Queue drained: admit the next batch of starts.
            if next_start == total_starts {
                break;
            }
            let end = (next_start + START_BATCH).min(total_starts);
            for idx in next_start..end {
                let k = space.start(scramble(idx, total_starts));
                if seen.insert(k) {
                    keys.push(k);
                    parent.push((u32::MAX, 0));
                    report.start_states += 1;
                }
            }
            next_start = end;
            if keys.len() as u64 > opts.budget {
                report.states = keys.len() as u64;
                report.outcome = Outcome::BudgetExceeded;
                return Ok(report);
            }
            continue;
        }
        let (config, watch) = space.decode(keys[i]);
        enabled_choices_into(&config, &mut enabled);
        for (ci, choice) in enabled.iter().enumerate() {
            report.transitions += 1;
            let mut next = config.clone();
            events.clear();
            execute(&mut next, choice, &mut events)?;
            let mut w = watch;
            match judge(setup, &config, choice, &next, &events, &mut w) {
                Ok(true) => {}
                Ok(false) => {
                    next.env.pending[1] = 1;
                    let k = space.encode(&next, w);
                    if seen.insert(k) {
                        keys.push(k);
                        parent.push((i as u32, ci as u8));
                        if keys.len() as u64 > opts.budget {
                            report.states = keys.len() as u64;
                            report.outcome = Outcome::BudgetExceeded;
                            return Ok(report);
                        }
                    }
                }
                Err(v) => {
                    report.states = keys.len() as u64;
                    report.outcome = Outcome::Violation;
                    report.counterexample = Some(counterexample(&space, &keys, &parent, i, *choice, v)?);
                    return Ok(report);
                }
            }
        }
        i += 1;
    }
    report.states = keys.len() as u64;
    Ok(report)
}

fn counterexample(space: &Space, keys: &[u64], parent: &[(u32, u8)], at: usize, last: ScheduleChoice, v: Violation) -> Result<Counterexample, Error> {
    let mut path = vec![last];
    let mut i = at;
    let mut enabled = Vec::new();
    while parent[i].0 != u32::MAX {
        let (pi, ci) = parent[i];
        let (c, _) = space.decode(keys[pi as usize]);
        enabled_choices_into(&c, &mut enabled);
        path.push(enabled[ci as usize]);
        i = pi as usize;
    }
    path.push(ScheduleChoice::fire(0, Action::PifA1));
    path.reverse();
    let externals = path.iter().filter(|c| matches!(c, ScheduleChoice::ExternalRequest { .. })).count() as u32;
    let initial = space.before_start(keys[i], externals);
    let steps = path.len() as u64;
    let mut policy = Scripted::new(path);
    let out = run_observed(initial, &mut policy, &RunOptions::new(steps), &mut [])?;
    let trace = out.trace.expect("recorded run");
    let mut verdicts = check_pif(&trace)?;
    verdicts.push(check_flush(&trace)?);
    Ok(Counterexample { clause: v.clause, detail: v.detail, step: steps - 1, trace, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_round_trip() {
        let space = Space { setup: Setup::new(2, Stack::Pif, 2).with_assumed_capacity(1) };
        for idx in (0..space.start_count()).step_by(999_983) {
            let k = space.start(idx);
            let (c, w) = space.decode(k);
            assert_eq!(space.encode(&c, w), k);
        }
    }

    #[test]
    fn starts_are_distinct() {
        // 5 neighbor flags, 3*2*5*5 states of process 1, (1 + 2*5*5)^2 channel pairs.
        let space = Space { setup: Setup::new(2, Stack::Pif, 1) };
        assert_eq!(space.start_count(), 5 * 150 * 51 * 51);
        let keys: FxHashSet<u64> = (0..space.start_count()).map(|i| space.start(i)).collect();
        assert_eq!(keys.len() as u64, space.start_count());
    }

    #[test]
    fn tiny_budget_is_inconclusive() {
        let r = explore(ExploreOptions::new(1).budget(10)).unwrap();
        assert_eq!(r.outcome, Outcome::BudgetExceeded);
        assert_eq!(r.status(), Status::Inconclusive);
    }
}
