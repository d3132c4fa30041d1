//! Seed sweep over arbitrary starting configurations, as `snapstab fuzz`
//! does it.

use snapstab::cli::{fuzz, ExperimentArgs, ExperimentConfig, FuzzOptions, Protocol};

fn main() -> Result<(), snapstab::Error> {
    for (protocol, n) in [(Protocol::Pif, 3), (Protocol::Pif, 5), (Protocol::Idl, 3)] {
        let cfg = ExperimentConfig::resolve(ExperimentArgs {
            protocol: Some(protocol),
            n: Some(n),
            loss_rate: Some(0.3),
            ..Default::default()
        })?;
        let r = fuzz(&cfg, &FuzzOptions { seeds: 2000, retry_factor: 4, out_dir: None })?;
        println!(
            "{protocol:?} n={n}: {} passed, {} failed, {} inconclusive, {} PIF decisions, longest run {} steps",
            r.passed, r.failed, r.inconclusive, r.pif_decisions, r.max_run_steps
        );
        for s in r.results.iter().take(3) {
            for v in &s.verdicts {
                println!("  seed {}: {v}", s.seed);
            }
        }
    }
    Ok(())
}
