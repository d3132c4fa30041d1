use proptest::prelude::*;

use snapstab::adversary::arbitrary_config;
use snapstab::kernel::{digest, run, run_observed, Digest, PolicySpec, RunOptions, Setup, Stack, StopRule, Trace};
use snapstab::monitors::{check_trace, project, replay_into, Clause, Status, Suite};

fn stack() -> impl Strategy<Value = Stack> {
    prop_oneof![Just(Stack::Pif), Just(Stack::Idl), Just(Stack::Me)]
}

fn setup() -> impl Strategy<Value = Setup> {
    (2usize..=4, stack(), 1usize..=2).prop_map(|(n, s, c)| Setup::new(n, s, c))
}

fn loss() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.3), 0.0f64..0.9]
}

fn opts(s: Setup, steps: u64) -> RunOptions {
    let stop = if s.stack == Stack::Me { StopRule::RequestsServed } else { StopRule::Quiescence };
    RunOptions::new(steps).stop(stop)
}

fn short_run(seed: u64, s: Setup, loss: f64) -> Trace {
    let c = arbitrary_config(seed, s).unwrap();
    run(c, &PolicySpec::random(loss), &opts(s, 400), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_configs_are_valid(seed in any::<u64>(), s in setup()) {
        let c = arbitrary_config(seed, s).unwrap();
        prop_assert!(c.validate().is_ok());
        prop_assert!(c.channels.iter().all(|ch| ch.queue.len() <= s.capacity));
        if s.stack != Stack::Pif {
            let mut ids = c.identities().unwrap();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), s.n);
        }
    }

    #[test]
    fn digest_is_a_function_of_the_configuration(seed in any::<u64>(), s in setup()) {
        let a = arbitrary_config(seed, s).unwrap();
        let b = a.clone();
        prop_assert_eq!(digest(&a), digest(&b));
        prop_assert_eq!(format!("{}", digest(&a)).len(), 16);
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), s in setup(), l in loss()) {
        prop_assert_eq!(short_run(seed, s, l).to_jsonl(), short_run(seed, s, l).to_jsonl());
    }

    #[test]
    fn trace_text_round_trips(seed in any::<u64>(), s in setup(), l in loss()) {
        let t = short_run(seed, s, l);
        let text = t.to_jsonl();
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn projection_has_one_entry_per_configuration(seed in any::<u64>(), s in setup(), l in loss()) {
        let t = short_run(seed, s, l);
        prop_assert_eq!(project(&t).unwrap().len(), t.len() + 1);
    }

    #[test]
    fn replay_matches_every_digest_and_verdict(seed in any::<u64>(), s in setup(), l in loss()) {
        let c = arbitrary_config(seed, s).unwrap();
        let mut suite = Suite::for_config(&c);
        let out = run_observed(c, PolicySpec::random(l).build(seed).as_mut(), &opts(s, 400), &mut [&mut suite]).unwrap();
        let online = suite.verdicts(&out.last, out.end);
        let trace = out.trace.unwrap();
        let r = replay_into(&trace, true, &mut []).unwrap();
        prop_assert!(r.divergence.is_none());
        prop_assert_eq!(r.last, out.last);
        prop_assert_eq!(check_trace(&trace).unwrap(), online);
    }

    #[test]
    fn a_corrupted_digest_is_caught_at_its_step(seed in any::<u64>(), l in loss(), pick in any::<prop::sample::Index>()) {
        let mut t = short_run(seed, Setup::new(2, Stack::Pif, 1), l);
        prop_assume!(!t.is_empty());
        let k = pick.index(t.len());
        t.records[k].digest = Digest(t.records[k].digest.0 ^ 0xff);
        let r = replay_into(&t, true, &mut []).unwrap();
        prop_assert_eq!(r.divergence.map(|d| d.step), Some(k as u64));
    }

    #[test]
    fn pif_safety_from_any_capacity_one_start(seed in any::<u64>(), n in 2usize..=5, l in loss()) {
        let c = arbitrary_config(seed, Setup::new(n, Stack::Pif, 1)).unwrap();
        let t = run(c, &PolicySpec::random(l), &RunOptions::new(20_000), seed).unwrap();
        for v in check_trace(&t).unwrap() {
            prop_assert!(v.status != Status::Fail, "{}", v);
        }
    }

    #[test]
    fn critical_sections_never_overlap(seed in any::<u64>(), n in 2usize..=4, l in loss()) {
        let s = Setup::new(n, Stack::Me, 1);
        let mut c = arbitrary_config(seed, s).unwrap();
        c.env.pending = vec![2; n];
        let t = run(c, &PolicySpec::random(l), &opts(s, 20_000), seed).unwrap();
        for v in check_trace(&t).unwrap() {
            if matches!(v.clause, Clause::MeCorrectness | Clause::MeLeaderFavour | Clause::MeExitSweep) {
                prop_assert_eq!(v.status, Status::Pass, "{}", v);
            }
        }
    }
}
