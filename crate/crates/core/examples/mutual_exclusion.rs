//! Every process requests the critical section three times, from an
//! arbitrary start. Prints entries and the worst wait.

use snapstab::cli::{run_trial, ExperimentArgs, ExperimentConfig, Protocol, RequestPattern};

fn main() -> Result<(), snapstab::Error> {
    let cfg = ExperimentConfig::resolve(ExperimentArgs {
        protocol: Some(Protocol::Me),
        n: Some(3),
        request_pattern: Some(RequestPattern::AllRepeating),
        loss_rate: Some(0.1),
        ..Default::default()
    })?;
    for seed in 0..5 {
        let t = run_trial(&cfg, seed, cfg.max_steps, false)?;
        let status = t.status();
        let me = t.me.expect("ME stack");
        println!(
            "seed {seed}: {:?} after {} steps, {} entries, worst wait {} steps, {:?}",
            t.end,
            t.steps,
            me.cs_entries,
            me.max_steps_to_cs().unwrap_or(0),
            status
        );
    }
    Ok(())
}
