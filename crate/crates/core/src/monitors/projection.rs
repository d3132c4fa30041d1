use crate::error::Error;
use crate::kernel::config::{ProcGhost, ProcessState};
use crate::kernel::trace::Trace;
use crate::monitors::replay_into;
use crate::kernel::sched::{Observer, StepView};
use crate::kernel::Configuration;

/// A configuration with channel contents (and checker bookkeeping) erased.
pub type AbstractConfiguration = Vec<ProcessState>;

fn strip(config: &Configuration) -> AbstractConfiguration {
    config
        .procs
        .iter()
        .map(|p| ProcessState { ghost: ProcGhost::default(), ..p.clone() })
        .collect()
}

struct Collect(Vec<AbstractConfiguration>);

impl Observer for Collect {
    fn on_start(&mut self, initial: &Configuration) {
        self.0.push(strip(initial));
    }

    fn on_step(&mut self, _view: &StepView<'_>, post: &Configuration) {
        self.0.push(strip(post));
    }
}

/// Abstract configuration sequence of a trace: one entry per configuration,
/// so one more than the number of steps.
pub fn project(trace: &Trace) -> Result<Vec<AbstractConfiguration>, Error> {
    let mut c = Collect(Vec::with_capacity(trace.len() + 1));
    replay_into(trace, false, &mut [&mut c])?;
    Ok(c.0)
}

/// State sequence of process `p`.
pub fn project_process(trace: &Trace, p: usize) -> Result<Vec<ProcessState>, Error> {
    if p >= trace.initial.n() {
        return Err(Error::Usage(format!("no process {p} in a system of {}", trace.initial.n())));
    }
    Ok(project(trace)?.into_iter().map(|mut a| a.swap_remove(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{run, Ghost, Message, Payload, PolicySpec, RunOptions, Setup, Stack, Wire};

    #[test]
    fn length_is_steps_plus_one() {
        let mut c = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        c.env.pending[1] = 1;
        let t = run(c, &PolicySpec::random(0.2), &RunOptions::new(1000), 3).unwrap();
        assert_eq!(project(&t).unwrap().len(), t.len() + 1);
        assert_eq!(project_process(&t, 1).unwrap().len(), t.len() + 1);
    }

    #[test]
    fn empty_trace_projects_to_singleton() {
        let c = Configuration::clean(Setup::new(3, Stack::Idl, 1)).unwrap();
        let t = run(c, &PolicySpec::RoundRobin, &RunOptions::new(10), 0).unwrap();
        assert_eq!(project(&t).unwrap().len(), 1);
    }

    #[test]
    fn blind_to_channel_contents() {
        let a = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        let mut b = a.clone();
        b.channel_mut(0, 1).queue.push_back(Message {
            wire: Wire::pif(Payload::M, Payload::Nil, 4, 4),
            ghost: Ghost::initial(0),
        });
        assert_eq!(strip(&a), strip(&b));
    }
}
