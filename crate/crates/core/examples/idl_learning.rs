//! Identity learning from a corrupted start: the requester ends up with
//! its neighbors' identities and the global minimum.

use snapstab::adversary::arbitrary_config;
use snapstab::kernel::{run, slot_process, PolicySpec, RunOptions, Setup, Stack};
use snapstab::monitors::{check_trace, project_process};

fn main() -> Result<(), snapstab::Error> {
    let setup = Setup::new(4, Stack::Idl, 1);
    let mut config = arbitrary_config(3, setup)?;
    config.env.pending[2] = 1;
    let ids = config.identities().expect("IDL has identities");
    println!("identities {ids:?}, minimum {}", ids.iter().min().unwrap());

    let trace = run(config, &PolicySpec::random(0.3), &RunOptions::new(50_000), 3)?;
    let p = 2;
    let last = project_process(&trace, p)?.pop().unwrap();
    let idl = last.idl.unwrap();
    for (slot, id) in idl.id_tab.iter().enumerate() {
        println!("process {p} slot {slot} (process {}): {id}", slot_process(p, slot));
    }
    println!("process {p} minimum: {}", idl.min_id);
    for v in check_trace(&trace)? {
        println!("{v}");
    }
    Ok(())
}
