//! Experiment plumbing behind the `snapstab` binary: configuration, single
//! runs, seed sweeps, exhaustive checks and trace replay.
//!
//! Every command returns a process exit code: 0 all pass, 1 some clause
//! failed (or a replayed digest diverged), 2 usage or input error, 3 nothing
//! failed but something was inconclusive.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::adversary::arbitrary_config;
use crate::error::Error;
use crate::explore::{explore, ExploreOptions, ExploreReport, Outcome};
use crate::kernel::sched::DEFAULT_STARVATION_BOUND;
use crate::kernel::{run_observed, Configuration, PolicySpec, RunEnd, RunOptions, Setup, Stack, StopRule, Trace};
use crate::monitors::{overall, replay_into, MeReport, Status, Suite, Verdict};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Pass => EXIT_PASS,
        Status::Fail => EXIT_FAIL,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Exit code for an error surfaced by a command.
pub fn error_exit_code(_e: &Error) -> i32 {
    EXIT_USAGE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Pif,
    Idl,
    Me,
}

impl Protocol {
    pub fn stack(self) -> Stack {
        match self {
            Protocol::Pif => Stack::Pif,
            Protocol::Idl => Stack::Idl,
            Protocol::Me => Stack::Me,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    RandomFair,
    RoundRobin,
    /// Only for `check`.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RequestPattern {
    /// One external request, at process `seed mod n`.
    Single,
    /// `repeats` requests at every process.
    AllRepeating,
    /// Per-process request counts from `requests`.
    Scripted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Every variable and channel drawn at random from the seed.
    Arbitrary,
    /// Idle processes, empty channels.
    Clean,
}

/// Experiment flags. Every field is optional so that the same struct reads
/// a config file; flags given on the command line win.
#[derive(Clone, Debug, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Channel capacity the protocol is tuned for (defaults to --capacity).
    #[arg(long)]
    pub assumed_capacity: Option<usize>,
    #[arg(long)]
    pub loss_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long, value_enum)]
    pub request_pattern: Option<RequestPattern>,
    /// Requests per process for the scripted pattern, e.g. `1,0,2`.
    #[arg(long, value_delimiter = ',')]
    pub requests: Option<Vec<u32>>,
    /// Requests per process for the all-repeating pattern.
    #[arg(long)]
    pub repeats: Option<u32>,
    #[arg(long, value_enum)]
    pub start: Option<StartKind>,
    #[arg(long)]
    pub starvation_bound: Option<u32>,
    /// State budget of the exhaustive check.
    #[arg(long)]
    pub budget: Option<u64>,
}

impl ExperimentArgs {
    /// Fields of `self`, falling back to `file` where unset.
    pub fn over(self, file: ExperimentArgs) -> ExperimentArgs {
        ExperimentArgs {
            protocol: self.protocol.or(file.protocol),
            n: self.n.or(file.n),
            capacity: self.capacity.or(file.capacity),
            assumed_capacity: self.assumed_capacity.or(file.assumed_capacity),
            loss_rate: self.loss_rate.or(file.loss_rate),
            seed: self.seed.or(file.seed),
            max_steps: self.max_steps.or(file.max_steps),
            policy: self.policy.or(file.policy),
            request_pattern: self.request_pattern.or(file.request_pattern),
            requests: self.requests.or(file.requests),
            repeats: self.repeats.or(file.repeats),
            start: self.start.or(file.start),
            starvation_bound: self.starvation_bound.or(file.starvation_bound),
            budget: self.budget.or(file.budget),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    pub capacity: usize,
    pub assumed_capacity: usize,
    pub loss_rate: f64,
    pub seed: u64,
    pub max_steps: u64,
    pub policy: PolicyKind,
    pub request_pattern: RequestPattern,
    pub requests: Vec<u32>,
    pub repeats: u32,
    pub start: StartKind,
    pub starvation_bound: u32,
    pub budget: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Pif,
            n: 2,
            capacity: 1,
            assumed_capacity: 1,
            loss_rate: 0.0,
            seed: 0,
            max_steps: 50_000,
            policy: PolicyKind::RandomFair,
            request_pattern: RequestPattern::Single,
            requests: Vec::new(),
            repeats: 3,
            start: StartKind::Arbitrary,
            starvation_bound: DEFAULT_STARVATION_BOUND,
            budget: 20_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn resolve(args: ExperimentArgs) -> Result<Self, Error> {
        let d = ExperimentConfig::default();
        let capacity = args.capacity.unwrap_or(d.capacity);
        let cfg = ExperimentConfig {
            protocol: args.protocol.unwrap_or(d.protocol),
            n: args.n.unwrap_or(d.n),
            capacity,
            assumed_capacity: args.assumed_capacity.unwrap_or(capacity),
            loss_rate: args.loss_rate.unwrap_or(d.loss_rate),
            seed: args.seed.unwrap_or(d.seed),
            max_steps: args.max_steps.unwrap_or(d.max_steps),
            policy: args.policy.unwrap_or(d.policy),
            request_pattern: args.request_pattern.unwrap_or(d.request_pattern),
            requests: args.requests.unwrap_or_default(),
            repeats: args.repeats.unwrap_or(d.repeats),
            start: args.start.unwrap_or(d.start),
            starvation_bound: args.starvation_bound.unwrap_or(d.starvation_bound),
            budget: args.budget.unwrap_or(d.budget),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let usage = |m: String| Err(Error::Usage(m));
        if !(2..64).contains(&self.n) {
            return usage(format!("n must be in 2..64, got {}", self.n));
        }
        if self.capacity == 0 || self.assumed_capacity == 0 {
            return usage("capacities must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return usage(format!("loss rate must be in [0, 1), got {}", self.loss_rate));
        }
        if self.policy == PolicyKind::Exhaustive && (self.n > 3 || self.protocol != Protocol::Pif) {
            return usage("the exhaustive policy is for PIF with at most 3 processes".into());
        }
        if self.request_pattern == RequestPattern::Scripted && self.requests.len() != self.n {
            return usage(format!("scripted requests need {} counts, got {}", self.n, self.requests.len()));
        }
        Ok(())
    }

    pub fn setup(&self) -> Setup {
        Setup::new(self.n, self.protocol.stack(), self.capacity).with_assumed_capacity(self.assumed_capacity)
    }

    pub fn policy_spec(&self) -> Result<PolicySpec, Error> {
        match self.policy {
            PolicyKind::RandomFair => Ok(PolicySpec::RandomFair {
                loss_rate: self.loss_rate,
                starvation_bound: self.starvation_bound,
            }),
            PolicyKind::RoundRobin => Ok(PolicySpec::RoundRobin),
            PolicyKind::Exhaustive => Err(Error::Usage("the exhaustive policy only applies to check".into())),
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        match self.protocol {
            Protocol::Me => StopRule::RequestsServed,
            _ => StopRule::Quiescence,
        }
    }

    /// Starting configuration of trial `seed`, with the request pattern applied.
    pub fn initial(&self, seed: u64) -> Result<Configuration, Error> {
        let setup = self.setup();
        let mut c = match self.start {
            StartKind::Arbitrary => arbitrary_config(seed, setup)?,
            StartKind::Clean => Configuration::clean(setup)?,
        };
        match self.request_pattern {
            RequestPattern::Single => c.env.pending[(seed % self.n as u64) as usize] = 1,
            RequestPattern::AllRepeating => c.env.pending.iter_mut().for_each(|k| *k = self.repeats),
            RequestPattern::Scripted => c.env.pending.clone_from(&self.requests),
        }
        Ok(c)
    }
}

/// Scheduler seed of a trial, kept apart from the configuration seed.
fn policy_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_0f5c_4ed0_1e55
}

/// Outcome of one seeded run.
#[derive(Clone, Debug)]
pub struct Trial {
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    pub end: RunEnd,
    pub steps: u64,
    pub pif_decided: u64,
    pub idl_decided: u64,
    pub me: Option<MeReport>,
    pub trace: Option<Trace>,
}

impl Trial {
    pub fn status(&self) -> Status {
        overall(&self.verdicts)
    }
}

/// One run of `cfg` with trial seed `seed`, judged online.
pub fn run_trial(cfg: &ExperimentConfig, seed: u64, max_steps: u64, record: bool) -> Result<Trial, Error> {
    let initial = cfg.initial(seed)?;
    let mut policy = cfg.policy_spec()?.build(policy_seed(seed));
    let opts = RunOptions::new(max_steps).stop(cfg.stop_rule()).record(record);
    let mut suite = Suite::for_config(&initial);
    let out = run_observed(initial, policy.as_mut(), &opts, &mut [&mut suite])?;
    Ok(Trial {
        seed,
        verdicts: suite.verdicts(&out.last, out.end),
        end: out.end,
        steps: out.steps,
        pif_decided: suite.pif.decided(),
        idl_decided: suite.idl.as_ref().map_or(0, |m| m.decided()),
        me: suite.me.as_ref().map(|m| m.report()),
        trace: out.trace,
    })
}

/// A seed that did not pass on its first attempt.
#[derive(Clone, Debug, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub status: Status,
    pub end: RunEnd,
    pub steps: u64,
    /// Status before the longer retry, when one was made.
    pub first_status: Status,
    pub verdicts: Vec<Verdict>,
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FuzzReport {
    pub seeds: u64,
    pub passed: u64,
    pub failed: u64,
    pub inconclusive: u64,
    /// Seeds inconclusive on the first attempt.
    pub first_inconclusive: u64,
    pub pif_decisions: u64,
    pub idl_decisions: u64,
    pub cs_entries: u64,
    pub max_steps_to_cs: Option<u64>,
    pub max_run_steps: u64,
    /// Non-passing seeds in seed order.
    pub results: Vec<SeedResult>,
}

impl FuzzReport {
    pub fn status(&self) -> Status {
        if self.failed > 0 {
            Status::Fail
        } else if self.inconclusive > 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzOptions {
    pub seeds: u64,
    /// Inconclusive seeds are run again with this many times the step bound.
    pub retry_factor: u64,
    /// Where failing traces are saved.
    pub out_dir: Option<PathBuf>,
}

fn trace_name(cfg: &ExperimentConfig, seed: u64) -> String {
    let p = match cfg.protocol {
        Protocol::Pif => "pif",
        Protocol::Idl => "idl",
        Protocol::Me => "me",
    };
    format!("{p}-n{}-c{}-a{}-seed{seed}.jsonl", cfg.n, cfg.capacity, cfg.assumed_capacity)
}

/// Seeds `cfg.seed .. cfg.seed + seeds`, each from its own arbitrary start.
pub fn fuzz(cfg: &ExperimentConfig, opts: &FuzzOptions) -> Result<FuzzReport, Error> {
    let mut r = FuzzReport { seeds: opts.seeds, ..FuzzReport::default() };
    for seed in cfg.seed..cfg.seed + opts.seeds {
        let mut t = run_trial(cfg, seed, cfg.max_steps, false)?;
        let first_status = t.status();
        if first_status == Status::Inconclusive {
            r.first_inconclusive += 1;
            if opts.retry_factor > 1 {
                t = run_trial(cfg, seed, cfg.max_steps * opts.retry_factor, false)?;
            }
        }
        r.pif_decisions += t.pif_decided;
        r.idl_decisions += t.idl_decided;
        r.max_run_steps = r.max_run_steps.max(t.steps);
        if let Some(me) = &t.me {
            r.cs_entries += me.cs_entries;
            r.max_steps_to_cs = r.max_steps_to_cs.max(me.max_steps_to_cs());
        }
        let status = t.status();
        match status {
            Status::Pass => r.passed += 1,
            Status::Fail => r.failed += 1,
            Status::Inconclusive => r.inconclusive += 1,
        }
        if status == Status::Pass && first_status == Status::Pass {
            continue;
        }
        let mut saved = None;
        if status == Status::Fail {
            if let Some(dir) = &opts.out_dir {
                let steps = if first_status == Status::Inconclusive { cfg.max_steps * opts.retry_factor.max(1) } else { cfg.max_steps };
                let recorded = run_trial(cfg, seed, steps, true)?;
                std::fs::create_dir_all(dir)?;
                let path = dir.join(trace_name(cfg, seed));
                recorded.trace.expect("recorded run").save(&path)?;
                saved = Some(path);
            }
        }
        r.results.push(SeedResult {
            seed,
            status,
            end: t.end,
            steps: t.steps,
            first_status,
            verdicts: t.verdicts.into_iter().filter(|v| v.status != Status::Pass).collect(),
            trace: saved,
        });
    }
    Ok(r)
}

fn write_verdicts(out: &mut dyn Write, verdicts: &[Verdict]) -> Result<(), Error> {
    for v in verdicts {
        writeln!(out, "{}", v.to_json_line())?;
    }
    Ok(())
}

/// One run: prints verdict lines, optionally saves the trace.
pub fn cmd_run(cfg: &ExperimentConfig, trace_out: Option<&Path>, out: &mut dyn Write) -> Result<i32, Error> {
    let t = run_trial(cfg, cfg.seed, cfg.max_steps, trace_out.is_some())?;
    if let (Some(path), Some(trace)) = (trace_out, &t.trace) {
        trace.save(path)?;
    }
    write_verdicts(out, &t.verdicts)?;
    Ok(exit_code(t.status()))
}

/// Seed sweep: one JSON line per non-passing seed, then a summary line.
pub fn cmd_fuzz(cfg: &ExperimentConfig, opts: &FuzzOptions, out: &mut dyn Write) -> Result<i32, Error> {
    let r = fuzz(cfg, opts)?;
    for s in &r.results {
        writeln!(out, "{}", serde_json::to_string(s)?)?;
    }
    let summary = serde_json::json!({
        "seeds": r.seeds,
        "passed": r.passed,
        "failed": r.failed,
        "inconclusive": r.inconclusive,
        "first_inconclusive": r.first_inconclusive,
        "pif_decisions": r.pif_decisions,
        "idl_decisions": r.idl_decisions,
        "cs_entries": r.cs_entries,
        "max_steps_to_cs": r.max_steps_to_cs,
        "max_run_steps": r.max_run_steps,
    });
    writeln!(out, "{summary}")?;
    Ok(exit_code(r.status()))
}

/// Exhaustive two-process PIF check.
pub fn check(cfg: &ExperimentConfig) -> Result<ExploreReport, Error> {
    if cfg.protocol != Protocol::Pif || cfg.n != 2 {
        return Err(Error::Usage("the exhaustive check covers PIF on two processes".into()));
    }
    explore(ExploreOptions::new(cfg.capacity).assumed(cfg.assumed_capacity).budget(cfg.budget))
}

/// Prints a summary line and, on a violation, the counterexample's verdicts;
/// the counterexample trace goes to `trace_out`.
pub fn cmd_check(cfg: &ExperimentConfig, trace_out: Option<&Path>, out: &mut dyn Write) -> Result<i32, Error> {
    let r = check(cfg)?;
    let outcome = match r.outcome {
        Outcome::Closed => "closed",
        Outcome::Violation => "violation",
        Outcome::BudgetExceeded => "budget-exceeded",
    };
    let summary = serde_json::json!({
        "outcome": outcome,
        "status": r.status(),
        "states": r.states,
        "start_states": r.start_states,
        "transitions": r.transitions,
        "counterexample": r.counterexample.as_ref().map(|c| serde_json::json!({
            "clause": c.clause, "step": c.step, "detail": c.detail,
        })),
    });
    writeln!(out, "{summary}")?;
    if let Some(c) = &r.counterexample {
        write_verdicts(out, &c.verdicts)?;
        if let Some(path) = trace_out {
            c.trace.save(path)?;
        }
    }
    Ok(exit_code(r.status()))
}

/// Replays a trace, checks every digest and re-judges it. The exit code
/// reflects the digests only: 0 when all match, 1 at the first divergence.
pub fn cmd_replay(trace_in: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let trace = Trace::load(trace_in)?;
    let mut suite = Suite::for_config(&trace.initial);
    let r = replay_into(&trace, true, &mut [&mut suite])?;
    write_verdicts(out, &suite.verdicts(&r.last, trace.end))?;
    match r.divergence {
        None => Ok(EXIT_PASS),
        Some(d) => {
            writeln!(err, "digest mismatch at step {}: recorded {}, replayed {}", d.step, d.recorded, d.replayed)?;
            Ok(EXIT_FAIL)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: ExperimentArgs) -> ExperimentConfig {
        ExperimentConfig::resolve(args).unwrap()
    }

    #[test]
    fn flags_win_over_file() {
        let file = ExperimentArgs::from_toml("protocol = \"me\"\nn = 4\nloss-rate = 0.3\n").unwrap();
        let flags = ExperimentArgs { n: Some(3), ..Default::default() };
        let c = cfg(flags.over(file));
        assert_eq!((c.protocol, c.n, c.loss_rate), (Protocol::Me, 3, 0.3));
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(ExperimentArgs::from_toml("nodes = 3\n").is_err());
    }

    #[test]
    fn loss_rate_one_is_usage_error() {
        let e = ExperimentConfig::resolve(ExperimentArgs { loss_rate: Some(1.0), ..Default::default() }).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
        assert_eq!(error_exit_code(&e), EXIT_USAGE);
    }

    #[test]
    fn assumed_capacity_defaults_to_capacity() {
        let c = cfg(ExperimentArgs { capacity: Some(2), ..Default::default() });
        assert_eq!(c.assumed_capacity, 2);
    }

    #[test]
    fn zero_seeds_is_empty_pass() {
        let c = cfg(ExperimentArgs::default());
        let mut out = Vec::new();
        let code = cmd_fuzz(&c, &FuzzOptions { seeds: 0, retry_factor: 1, out_dir: None }, &mut out).unwrap();
        assert_eq!(code, EXIT_PASS);
        assert!(String::from_utf8(out).unwrap().contains("\"seeds\":0"));
    }

    #[test]
    fn run_is_reproducible() {
        let c = cfg(ExperimentArgs { n: Some(3), seed: Some(5), loss_rate: Some(0.3), ..Default::default() });
        let a = run_trial(&c, 5, c.max_steps, true).unwrap();
        let b = run_trial(&c, 5, c.max_steps, true).unwrap();
        assert_eq!(a.trace.unwrap().to_jsonl(), b.trace.unwrap().to_jsonl());
    }

    #[test]
    fn request_patterns() {
        let c = cfg(ExperimentArgs { n: Some(3), request_pattern: Some(RequestPattern::Single), ..Default::default() });
        assert_eq!(c.initial(4).unwrap().env.pending, vec![0, 1, 0]);
        let c = cfg(ExperimentArgs { n: Some(3), request_pattern: Some(RequestPattern::AllRepeating), repeats: Some(2), ..Default::default() });
        assert_eq!(c.initial(4).unwrap().env.pending, vec![2, 2, 2]);
        let bad = ExperimentArgs { n: Some(3), request_pattern: Some(RequestPattern::Scripted), requests: Some(vec![1]), ..Default::default() };
        assert!(ExperimentConfig::resolve(bad).is_err());
    }
}
