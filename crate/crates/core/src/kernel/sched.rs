//! Scheduling policies and the run loop.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::choice::{Action, ScheduleChoice};
use crate::kernel::config::Configuration;
use crate::kernel::digest::digest;
use crate::kernel::message::{Message, Request};
use crate::kernel::step::{enabled_choices_into, execute};
use crate::kernel::trace::{Event, RunEnd, Trace, TraceRecord};

pub const DEFAULT_STARVATION_BOUND: u32 = 64;

/// Picks the next step among the admissible ones. `None` ends the run.
pub trait Policy {
    fn choose(&mut self, config: &Configuration, enabled: &[ScheduleChoice]) -> Option<ScheduleChoice>;
}

/// Uniform choice among actors (each enabled action, each nonempty channel,
/// each admissible external request). A channel turn loses its head message
/// with probability `loss_rate` and delivers it otherwise. An action that has
/// stayed enabled for more than `starvation_bound` consecutive rounds is forced.
pub struct RandomFair {
    rng: ChaCha8Rng,
    loss_rate: f64,
    starvation_bound: u32,
    waiting: Vec<u32>,
    actors: Vec<usize>,
}

impl RandomFair {
    pub fn new(seed: u64, loss_rate: f64, starvation_bound: u32) -> Self {
        assert!((0.0..1.0).contains(&loss_rate), "loss rate must lie in [0, 1)");
        RandomFair {
            rng: ChaCha8Rng::seed_from_u64(seed),
            loss_rate,
            starvation_bound,
            waiting: Vec::new(),
            actors: Vec::new(),
        }
    }
}

impl Policy for RandomFair {
    fn choose(&mut self, config: &Configuration, enabled: &[ScheduleChoice]) -> Option<ScheduleChoice> {
        let slots = config.n() * Action::ALL.len();
        if self.waiting.len() != slots {
            self.waiting = vec![0; slots];
        }
        let mut still = vec![false; slots];
        let mut forced = None;
        self.actors.clear();
        for (i, c) in enabled.iter().enumerate() {
            match *c {
                ScheduleChoice::FireGuard { process, action } => {
                    let k = process * Action::ALL.len() + action.index();
                    still[k] = true;
                    self.waiting[k] += 1;
                    if forced.is_none() && self.waiting[k] > self.starvation_bound {
                        forced = Some(i);
                    }
                    self.actors.push(i);
                }
                ScheduleChoice::Lose { .. } => {}
                _ => self.actors.push(i),
            }
        }
        for (w, s) in self.waiting.iter_mut().zip(&still) {
            if !s {
                *w = 0;
            }
        }
        if self.actors.is_empty() {
            return None;
        }
        let i = forced.unwrap_or_else(|| self.actors[self.rng.gen_range(0..self.actors.len())]);
        let choice = match enabled[i] {
            ScheduleChoice::Deliver { from, to } if self.loss_rate > 0.0 && self.rng.gen_bool(self.loss_rate) => {
                ScheduleChoice::lose(from, to)
            }
            ScheduleChoice::FireGuard { process, action } => {
                self.waiting[process * Action::ALL.len() + action.index()] = 0;
                enabled[i]
            }
            c => c,
        };
        Some(choice)
    }
}

/// Cycles over processes, then channels. A process turn fires every action
/// enabled at the start of the turn, in text order, then its external
/// request. A channel turn delivers its head message. Never loses.
#[derive(Default)]
pub struct RoundRobin {
    cursor: usize,
    batch: VecDeque<ScheduleChoice>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for RoundRobin {
    fn choose(&mut self, config: &Configuration, enabled: &[ScheduleChoice]) -> Option<ScheduleChoice> {
        while let Some(c) = self.batch.pop_front() {
            if enabled.contains(&c) {
                return Some(c);
            }
        }
        let n = config.n();
        let actors = n + config.channels.len();
        for _ in 0..actors {
            let a = self.cursor;
            self.cursor = (self.cursor + 1) % actors;
            if a < n {
                self.batch.extend(enabled.iter().filter(|c| match c {
                    ScheduleChoice::FireGuard { process, .. } | ScheduleChoice::ExternalRequest { process, .. } => *process == a,
                    _ => false,
                }));
                if let Some(c) = self.batch.pop_front() {
                    return Some(c);
                }
            } else {
                let ch = &config.channels[a - n];
                if !ch.queue.is_empty() {
                    return Some(ScheduleChoice::deliver(ch.from, ch.to));
                }
            }
        }
        None
    }
}

/// Plays a fixed schedule, then hands over to `then` (or stops).
pub struct Scripted {
    script: VecDeque<ScheduleChoice>,
    then: Option<Box<dyn Policy>>,
}

impl Scripted {
    pub fn new(script: Vec<ScheduleChoice>) -> Self {
        Scripted { script: script.into(), then: None }
    }

    pub fn then(mut self, policy: Box<dyn Policy>) -> Self {
        self.then = Some(policy);
        self
    }
}

impl Policy for Scripted {
    fn choose(&mut self, config: &Configuration, enabled: &[ScheduleChoice]) -> Option<ScheduleChoice> {
        match self.script.pop_front() {
            Some(c) => Some(c),
            None => self.then.as_mut()?.choose(config, enabled),
        }
    }
}

/// Serializable description of a policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum PolicySpec {
    RandomFair { loss_rate: f64, starvation_bound: u32 },
    RoundRobin,
}

impl PolicySpec {
    pub fn random(loss_rate: f64) -> Self {
        PolicySpec::RandomFair {
            loss_rate,
            starvation_bound: DEFAULT_STARVATION_BOUND,
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn Policy> {
        match *self {
            PolicySpec::RandomFair { loss_rate, starvation_bound } => Box::new(RandomFair::new(seed, loss_rate, starvation_bound)),
            PolicySpec::RoundRobin => Box::new(RoundRobin::new()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Run until nothing is enabled.
    #[default]
    Quiescence,
    /// Also stop once no external request is pending and every top-layer
    /// request is `Done` (mutual exclusion never quiesces).
    RequestsServed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub max_steps: u64,
    pub stop: StopRule,
    /// Keep step records (with digests). Off for bulk fuzzing.
    pub record: bool,
}

impl RunOptions {
    pub fn new(max_steps: u64) -> Self {
        RunOptions {
            max_steps,
            stop: StopRule::Quiescence,
            record: true,
        }
    }

    pub fn stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn record(mut self, record: bool) -> Self {
        self.record = record;
        self
    }
}

/// What an observer sees of one step.
#[derive(Clone, Copy, Debug)]
pub struct StepView<'a> {
    pub step: u64,
    pub choice: &'a ScheduleChoice,
    pub message: Option<&'a Message>,
    pub events: &'a [Event],
}

/// Online consumer of a run, fed the configuration after every step.
pub trait Observer {
    fn on_start(&mut self, _initial: &Configuration) {}
    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration);
}

pub struct RunOutcome {
    pub last: Configuration,
    pub end: RunEnd,
    pub steps: u64,
    /// Present when the run was recorded.
    pub trace: Option<Trace>,
}

pub fn requests_served(config: &Configuration) -> bool {
    let top = config.setup.stack.top();
    config.env.pending.iter().all(|&k| k == 0)
        && config
            .procs
            .iter()
            .all(|p| p.request(top) == Some(Request::Done) && !p.in_cs())
}

/// Runs `initial` under `policy`, feeding every observer.
pub fn run_observed(
    initial: Configuration,
    policy: &mut dyn Policy,
    opts: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome, Error> {
    initial.validate()?;
    for o in observers.iter_mut() {
        o.on_start(&initial);
    }
    let start = opts.record.then(|| initial.clone());
    let mut config = initial;
    let mut records = Vec::new();
    let mut enabled = Vec::new();
    let mut events = Vec::new();
    let mut step = 0u64;
    let end = loop {
        if opts.stop == StopRule::RequestsServed && requests_served(&config) {
            break RunEnd::Goal;
        }
        enabled_choices_into(&config, &mut enabled);
        if enabled.is_empty() {
            break RunEnd::Quiescent;
        }
        if step >= opts.max_steps {
            break RunEnd::Truncated;
        }
        let Some(choice) = policy.choose(&config, &enabled) else {
            break RunEnd::Truncated;
        };
        events.clear();
        let message = execute(&mut config, &choice, &mut events).map_err(|e| match e {
            Error::Inadmissible(c) => Error::Inadmissible(format!("{c} at step {step}")),
            e => e,
        })?;
        let view = StepView {
            step,
            choice: &choice,
            message: message.as_ref(),
            events: &events,
        };
        for o in observers.iter_mut() {
            o.on_step(&view, &config);
        }
        if opts.record {
            records.push(TraceRecord {
                step,
                choice,
                message,
                events: events.clone(),
                digest: digest(&config),
            });
        }
        step += 1;
    };
    let trace = start.map(|initial| Trace { initial, records, end });
    Ok(RunOutcome {
        last: config,
        end,
        steps: step,
        trace,
    })
}

/// Deterministic recorded run from a policy description and a seed.
pub fn run(initial: Configuration, policy: &PolicySpec, opts: &RunOptions, seed: u64) -> Result<Trace, Error> {
    let mut p = policy.build(seed);
    let opts = opts.record(true);
    let out = run_observed(initial, p.as_mut(), &opts, &mut [])?;
    Ok(out.trace.expect("recorded run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::config::{Setup, Stack};

    fn one_request(n: usize) -> Configuration {
        let mut c = Configuration::clean(Setup::new(n, Stack::Pif, 1)).unwrap();
        c.env.pending[0] = 1;
        c
    }

    #[test]
    fn quiescent_gives_empty_trace() {
        let c = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        for seed in 0..5 {
            let t = run(c.clone(), &PolicySpec::random(0.3), &RunOptions::new(100), seed).unwrap();
            assert!(t.is_empty());
            assert_eq!(t.end, RunEnd::Quiescent);
        }
    }

    #[test]
    fn round_robin_single_wave() {
        let t = run(one_request(2), &PolicySpec::RoundRobin, &RunOptions::new(10_000), 0).unwrap();
        assert_eq!(t.end, RunEnd::Quiescent);
        let mut c = t.initial.clone();
        let mut ev = Vec::new();
        for r in &t.records {
            execute(&mut c, &r.choice, &mut ev).unwrap();
        }
        assert_eq!(c.procs[0].pif.request, Request::Done);
        let p_to_q = t
            .records
            .iter()
            .filter(|r| r.choice == ScheduleChoice::deliver(0, 1))
            .count();
        assert!(p_to_q >= 4, "only {p_to_q} deliveries p->q");
    }

    #[test]
    fn same_seed_same_digests() {
        let a = run(one_request(3), &PolicySpec::random(0.3), &RunOptions::new(5_000), 42).unwrap();
        let b = run(one_request(3), &PolicySpec::random(0.3), &RunOptions::new(5_000), 42).unwrap();
        assert_eq!(a.digests(), b.digests());
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_recorded() {
        let t = run(one_request(3), &PolicySpec::random(0.0), &RunOptions::new(3), 1).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.end, RunEnd::Truncated);
    }

    #[test]
    fn round_robin_fires_in_text_order() {
        let mut c = Configuration::clean(Setup::new(2, Stack::Idl, 1)).unwrap();
        c.procs[0].pif.request = Request::Wait;
        c.procs[0].idl.as_mut().unwrap().request = Request::Wait;
        c.env.pending[0] = 0;
        let mut rr = RoundRobin::new();
        let mut enabled = Vec::new();
        enabled_choices_into(&c, &mut enabled);
        let first = rr.choose(&c, &enabled).unwrap();
        assert_eq!(first, ScheduleChoice::fire(0, Action::PifA1));
        let mut ev = Vec::new();
        execute(&mut c, &first, &mut ev).unwrap();
        enabled_choices_into(&c, &mut enabled);
        assert_eq!(rr.choose(&c, &enabled).unwrap(), ScheduleChoice::fire(0, Action::IdlA1));
    }

    #[test]
    fn starved_action_is_forced() {
        let mut c = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        c.procs[1].pif.request = Request::In;
        c.procs[1].pif.state = vec![4];
        c.procs[0].pif.request = Request::In;
        let mut p = RandomFair::new(0, 0.0, 3);
        let target = ScheduleChoice::fire(1, Action::PifA2);
        let enabled = vec![ScheduleChoice::fire(0, Action::PifA2), target];
        let mut seen_at = None;
        for round in 0..5 {
            if p.choose(&c, &enabled) == Some(target) {
                seen_at = Some(round);
                break;
            }
        }
        assert!(seen_at.is_some_and(|r| r <= 3));
    }
}
