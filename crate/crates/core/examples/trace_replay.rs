//! Save a trace, load it back, replay it with digest checks, then corrupt
//! one digest and watch the replay point at it.

use snapstab::adversary::arbitrary_config;
use snapstab::kernel::{run, Digest, PolicySpec, RunOptions, Setup, Stack, Trace};
use snapstab::monitors::{check_trace, replay_into};

fn main() -> Result<(), snapstab::Error> {
    let config = arbitrary_config(21, Setup::new(3, Stack::Pif, 1))?;
    let trace = run(config, &PolicySpec::random(0.3), &RunOptions::new(10_000), 21)?;
    let path = std::env::temp_dir().join("snapstab-example-trace.jsonl");
    trace.save(&path)?;
    println!("saved {} steps to {}", trace.len(), path.display());

    let loaded = Trace::load(&path)?;
    let r = replay_into(&loaded, true, &mut [])?;
    println!("replay divergence: {:?}", r.divergence);
    println!("verdicts identical: {}", check_trace(&loaded)? == check_trace(&trace)?);

    let mut broken = loaded;
    let k = broken.len() / 2;
    broken.records[k].digest = Digest(!broken.records[k].digest.0);
    let r = replay_into(&broken, true, &mut [])?;
    println!("corrupted step {k}: {:?}", r.divergence);
    std::fs::remove_file(&path)?;
    Ok(())
}
