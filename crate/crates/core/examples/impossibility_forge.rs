//! The forged configuration: two stale messages per channel fit when the
//! real capacity is 2, and process 0 decides on feedback nobody sent for
//! its broadcast. Retuning the flags for capacity 2 removes the problem.

use snapstab::adversary::{overflow_forge, overflow_forge_tuned, overflow_schedule};
use snapstab::kernel::{run, run_observed, PolicySpec, RunOptions, Scripted};
use snapstab::monitors::{check_trace, overall, Status};

fn main() -> Result<(), snapstab::Error> {
    let schedule = overflow_schedule();
    let forged = overflow_forge(2)?;
    for ch in &forged.channels {
        println!("{} -> {}: {:?}", ch.from, ch.to, ch.queue.iter().map(|m| m.wire).collect::<Vec<_>>());
    }
    let mut policy = Scripted::new(schedule.clone());
    let out = run_observed(forged, &mut policy, &RunOptions::new(schedule.len() as u64), &mut [])?;
    for v in check_trace(&out.trace.expect("recorded"))? {
        println!("{v}");
    }

    let tuned = overflow_forge_tuned(2, 2)?;
    let mut passing = 0;
    for seed in 0..200 {
        let t = run(tuned.clone(), &PolicySpec::random(0.2), &RunOptions::new(10_000), seed)?;
        if overall(&check_trace(&t)?) == Status::Pass {
            passing += 1;
        }
    }
    println!("flags tuned for capacity 2: {passing}/200 random schedules pass");
    Ok(())
}
