//! One PIF wave from a clean start: process 0 broadcasts, everyone
//! acknowledges, process 0 decides.

use snapstab::kernel::{run, Configuration, Event, PolicySpec, RunOptions, Setup, Stack};
use snapstab::monitors::check_trace;

fn main() -> Result<(), snapstab::Error> {
    let mut config = Configuration::clean(Setup::new(4, Stack::Pif, 1))?;
    config.env.pending[0] = 1;
    let trace = run(config, &PolicySpec::random(0.2), &RunOptions::new(10_000), 11)?;

    for rec in &trace.records {
        for ev in &rec.events {
            match ev {
                Event::Start { .. } | Event::ReceiveBrd { .. } | Event::ReceiveFck { .. } | Event::Decide { .. } => {
                    println!("step {:>3}  {ev:?}", rec.step)
                }
                _ => {}
            }
        }
    }
    println!("{} steps, run ended {:?}", trace.len(), trace.end);
    for v in check_trace(&trace)? {
        println!("{v}");
    }
    Ok(())
}
