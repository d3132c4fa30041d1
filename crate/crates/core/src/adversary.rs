//! Hostile starting points: uniformly corrupted configurations, and the
//! forged channel contents that defeat a protocol tuned for a smaller
//! channel capacity than the real one.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::kernel::config::{Channel, Configuration, Environment, GlobalGhost, Layer, ProcGhost, ProcessState, Setup, Stack};
use crate::kernel::message::{Ghost, Message, Payload, Request, Wire};
use crate::kernel::{Action, ScheduleChoice};
use crate::monitors::AbstractConfiguration;

/// Identities are drawn from `0..ID_RANGE`; corrupted identity fields too.
pub const ID_RANGE: u64 = 1000;

fn payload_domain(stack: Stack, rng: &mut ChaCha8Rng) -> Payload {
    match stack {
        Stack::Pif => [Payload::Nil, Payload::M, Payload::M_PRIME][rng.gen_range(0..3)],
        Stack::Idl => match rng.gen_range(0..4) {
            0 => Payload::Nil,
            1 => Payload::Idl,
            2 => Payload::Id(rng.gen_range(0..ID_RANGE)),
            _ => Payload::M_PRIME,
        },
        Stack::Me => match rng.gen_range(0..10) {
            0 => Payload::Nil,
            1 => Payload::Idl,
            2 => Payload::Ask,
            3 => Payload::Exit,
            4 => Payload::ExitCs,
            5 => Payload::Yes,
            6 => Payload::No,
            7 => Payload::Ok,
            8 => Payload::Id(rng.gen_range(0..ID_RANGE)),
            _ => Payload::M_PRIME,
        },
    }
}

fn request(rng: &mut ChaCha8Rng) -> Request {
    Request::ALL[rng.gen_range(0..3)]
}

/// A configuration with every variable drawn uniformly from its domain and
/// every channel holding `0..=capacity` arbitrary messages. Identities are
/// unique. No external request is pending. Deterministic in `seed`.
pub fn arbitrary_config(seed: u64, setup: Setup) -> Result<Configuration, Error> {
    setup.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = setup.n;
    let max = setup.max_state();
    let ids: Vec<u64> = sample(&mut rng, ID_RANGE as usize, n).into_iter().map(|i| i as u64).collect();
    let mut config = Configuration::clean_with_ids(setup, &ids)?;
    for ps in config.procs.iter_mut() {
        let pif = &mut ps.pif;
        pif.request = request(&mut rng);
        pif.b_mes = payload_domain(setup.stack, &mut rng);
        for q in 0..n - 1 {
            pif.f_mes[q] = payload_domain(setup.stack, &mut rng);
            pif.state[q] = rng.gen_range(0..=max);
            pif.neig_state[q] = rng.gen_range(0..=max);
        }
        if let Some(idl) = ps.idl.as_mut() {
            idl.request = request(&mut rng);
            idl.min_id = rng.gen_range(0..ID_RANGE);
            for t in idl.id_tab.iter_mut() {
                *t = rng.gen_range(0..ID_RANGE);
            }
        }
        if let Some(me) = ps.me.as_mut() {
            me.request = request(&mut rng);
            me.phase = rng.gen_range(0..=4);
            me.value = rng.gen_range(0..n);
            for b in me.privileges.iter_mut() {
                *b = rng.gen_bool(0.5);
            }
            me.in_cs = rng.gen_bool(0.5);
        }
    }
    let mut seq = 0;
    for ch in config.channels.iter_mut() {
        let len = rng.gen_range(0..=setup.capacity);
        for _ in 0..len {
            let wire = Wire::pif(
                payload_domain(setup.stack, &mut rng),
                payload_domain(setup.stack, &mut rng),
                rng.gen_range(0..=max),
                rng.gen_range(0..=max),
            );
            ch.queue.push_back(Message { wire, ghost: Ghost::initial(seq) });
            seq += 1;
        }
    }
    config.ghost.next_seq = seq;
    config.validate()?;
    Ok(config)
}

/// A forbidden joint behavior together with the channel contents that make
/// processes follow it: `sequence` prescribes the process states step by
/// step, `mes_seq` the messages each channel must hold at the start.
#[derive(Clone, Debug, PartialEq)]
pub struct BadFactor {
    pub sequence: Vec<AbstractConfiguration>,
    pub mes_seq: Vec<((usize, usize), Vec<Wire>)>,
    pub pending: Vec<u32>,
}

impl BadFactor {
    /// The starting configuration on channels of capacity `setup.capacity`,
    /// with the protocol tuned for `setup.assumed_capacity`. Fails if some
    /// channel would need more messages than it can hold.
    pub fn materialize(&self, setup: Setup) -> Result<Configuration, Error> {
        setup.validate()?;
        let first = self
            .sequence
            .first()
            .ok_or_else(|| Error::InvalidSetup("bad factor has no configuration".into()))?;
        if first.len() != setup.n {
            return Err(Error::InvalidSetup(format!("bad factor is for {} processes", first.len())));
        }
        let mut channels = Vec::with_capacity(setup.n * (setup.n - 1));
        for from in 0..setup.n {
            for to in (0..setup.n).filter(|&t| t != from) {
                channels.push(Channel { from, to, capacity: setup.capacity, queue: VecDeque::new() });
            }
        }
        let mut config = Configuration {
            setup,
            procs: first
                .iter()
                .map(|p| {
                    let mut p = ProcessState {
                        ghost: ProcGhost { brd_cid: vec![None; setup.n - 1], ..ProcGhost::default() },
                        ..p.clone()
                    };
                    p.pif.max_state = setup.max_state();
                    p
                })
                .collect(),
            channels,
            env: Environment { pending: self.pending.clone(), request_payload: Payload::M },
            ghost: GlobalGhost { next_cid: 1, next_seq: 0 },
        };
        for ((from, to), msgs) in &self.mes_seq {
            if msgs.len() > setup.capacity {
                return Err(Error::InvalidConfiguration(format!(
                    "channel {from} -> {to} must hold {} forged messages but has capacity {}",
                    msgs.len(),
                    setup.capacity
                )));
            }
            for w in msgs {
                let seq = config.ghost.next_seq;
                config.ghost.next_seq += 1;
                config.channel_mut(*from, *to).queue.push_back(Message { wire: *w, ghost: Ghost::initial(seq) });
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Step at which the forged schedule makes process 0 count a feedback that
/// no process wrote for its computation.
pub const FORGE_WITNESS_STEP: u64 = 7;

/// The schedule that drives [`overflow_forge`] into the violation.
pub fn overflow_schedule() -> Vec<ScheduleChoice> {
    vec![
        ScheduleChoice::ExternalRequest { process: 0, layer: Layer::Pif },
        ScheduleChoice::fire(0, Action::PifA1),
        ScheduleChoice::deliver(1, 0),
        ScheduleChoice::deliver(1, 0),
        ScheduleChoice::deliver(0, 1),
        ScheduleChoice::deliver(1, 0),
        ScheduleChoice::deliver(0, 1),
        ScheduleChoice::deliver(1, 0),
        ScheduleChoice::fire(0, Action::PifA2),
    ]
}

/// Two processes running PIF tuned for capacity 1. Process 0 is idle with a
/// pending request to broadcast `m`. Two stale acknowledgments (echoing 0,
/// then 1) wait in channel 1 -> 0, and two stale broadcasts of `m'` (flags 2,
/// then 3) wait in channel 0 -> 1. Process 1 holds `m'` as feedback.
pub fn overflow_bad_factor() -> BadFactor {
    let setup = Setup::new(2, Stack::Pif, 2).with_assumed_capacity(1);
    let mut base = Configuration::clean(setup).expect("valid setup");
    base.procs[0].pif.b_mes = Payload::M_PRIME;
    let q = &mut base.procs[1].pif;
    q.b_mes = Payload::M_PRIME;
    q.f_mes = vec![Payload::M_PRIME];
    q.state = vec![4];
    q.neig_state = vec![0];
    let mes_seq = vec![
        ((1, 0), vec![Wire::pif(Payload::M_PRIME, Payload::M_PRIME, 0, 0), Wire::pif(Payload::M_PRIME, Payload::M_PRIME, 0, 1)]),
        ((0, 1), vec![Wire::pif(Payload::M_PRIME, Payload::Nil, 2, 0), Wire::pif(Payload::M_PRIME, Payload::Nil, 3, 0)]),
    ];
    let mut factor = BadFactor {
        sequence: vec![base.procs.clone()],
        mes_seq,
        pending: vec![1, 0],
    };
    let mut config = factor.materialize(setup).expect("capacity 2 holds the forgery");
    let mut events = Vec::new();
    for choice in overflow_schedule() {
        crate::kernel::execute(&mut config, &choice, &mut events).expect("forged schedule is admissible");
        factor.sequence.push(
            config
                .procs
                .iter()
                .map(|p| ProcessState { ghost: ProcGhost::default(), ..p.clone() })
                .collect(),
        );
    }
    factor.sequence[0] = base.procs.iter().map(|p| ProcessState { ghost: ProcGhost::default(), ..p.clone() }).collect();
    factor
}

/// The forged starting configuration on channels of capacity
/// `real_capacity`, for the protocol tuned to capacity 1.
pub fn overflow_forge(real_capacity: usize) -> Result<Configuration, Error> {
    overflow_forge_tuned(real_capacity, 1)
}

/// The same forged contents for the protocol tuned to `assumed_capacity`.
pub fn overflow_forge_tuned(real_capacity: usize, assumed_capacity: usize) -> Result<Configuration, Error> {
    overflow_bad_factor().materialize(Setup::new(2, Stack::Pif, real_capacity).with_assumed_capacity(assumed_capacity))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let s = Setup::new(3, Stack::Me, 1);
        assert_eq!(arbitrary_config(9, s).unwrap(), arbitrary_config(9, s).unwrap());
        assert_ne!(arbitrary_config(9, s).unwrap(), arbitrary_config(10, s).unwrap());
    }

    #[test]
    fn capacity_one_channels_hold_at_most_one() {
        for seed in 0..200 {
            let c = arbitrary_config(seed, Setup::new(3, Stack::Pif, 1)).unwrap();
            assert!(c.channels.iter().all(|ch| ch.queue.len() <= 1));
        }
    }

    #[test]
    fn every_flag_value_appears() {
        let mut seen = [false; 5];
        for seed in 0..10_000 {
            let c = arbitrary_config(seed, Setup::new(2, Stack::Pif, 1)).unwrap();
            for p in &c.procs {
                for &s in p.pif.state.iter().chain(&p.pif.neig_state) {
                    seen[s as usize] = true;
                }
            }
        }
        assert_eq!(seen, [true; 5]);
    }

    #[test]
    fn forge_needs_capacity_two() {
        assert!(overflow_forge(1).is_err());
        let c = overflow_forge(2).unwrap();
        assert_eq!(c.channel(1, 0).queue.len(), 2);
        assert_eq!(c.channel(0, 1).queue.len(), 2);
        assert_eq!(c.setup.max_state(), 4);
    }

    #[test]
    fn forge_violates_decision_at_documented_step() {
        use crate::kernel::{run_observed, RunOptions, Scripted};
        use crate::monitors::{check_pif, Clause, Status};
        let steps = overflow_schedule().len() as u64;
        let mut policy = Scripted::new(overflow_schedule());
        let out = run_observed(overflow_forge(2).unwrap(), &mut policy, &RunOptions::new(steps), &mut []).unwrap();
        let v = check_pif(&out.trace.unwrap()).unwrap();
        let d = v.iter().find(|v| v.clause == Clause::PifDecision).unwrap();
        assert_eq!((d.status, d.witness_step), (Status::Fail, Some(FORGE_WITNESS_STEP)));
    }

    #[test]
    fn forge_without_forged_messages_is_clean() {
        use crate::kernel::{run_observed, PolicySpec, RunOptions};
        use crate::monitors::{overall, Status, Suite};
        let mut f = overflow_bad_factor();
        f.mes_seq.clear();
        let c = f.materialize(Setup::new(2, Stack::Pif, 2).with_assumed_capacity(1)).unwrap();
        for seed in 0..50 {
            let mut suite = Suite::for_config(&c);
            let out = run_observed(c.clone(), PolicySpec::random(0.2).build(seed).as_mut(), &RunOptions::new(10_000).record(false), &mut [&mut suite]).unwrap();
            assert_eq!(overall(&suite.verdicts(&out.last, out.end)), Status::Pass, "seed {seed}");
        }
    }

    #[test]
    fn retuned_forge_keeps_channel_contents() {
        let a = overflow_forge(2).unwrap();
        let b = overflow_forge_tuned(2, 2).unwrap();
        assert_eq!(a.channels, b.channels);
        assert_eq!(b.procs[0].pif.max_state, 6);
    }

    #[test]
    fn bad_factor_sequence_covers_the_schedule() {
        let f = overflow_bad_factor();
        assert_eq!(f.sequence.len(), overflow_schedule().len() + 1);
        let last = f.sequence.last().unwrap();
        assert_eq!(last[0].pif.request, Request::Done);
    }
}
