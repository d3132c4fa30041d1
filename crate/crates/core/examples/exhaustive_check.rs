//! Exhaustive two-process PIF search. Capacity 1 closes without a
//! violation; channels of capacity 2 under a protocol tuned for 1 do not.

use snapstab::explore::{explore, ExploreOptions};

fn main() -> Result<(), snapstab::Error> {
    for opts in [ExploreOptions::new(1), ExploreOptions::new(2).assumed(1)] {
        let r = explore(opts)?;
        println!(
            "capacity {} assumed {}: {:?}, {} states, {} transitions",
            opts.capacity, opts.assumed_capacity, r.outcome, r.states, r.transitions
        );
        if let Some(c) = r.counterexample {
            println!("  {} at step {}: {}", c.clause, c.step, c.detail);
            for rec in &c.trace.records {
                println!("  {:>2} {:?}", rec.step, rec.choice);
            }
        }
    }
    Ok(())
}
