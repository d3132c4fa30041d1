use crate::kernel::config::{slot_process, Configuration, Layer};
use crate::kernel::message::Request;
use crate::kernel::sched::{Observer, StepView};
use crate::kernel::trace::{Event, RunEnd};
use crate::monitors::verdict::{open_obligation, Clause, Safety, Verdict};
use crate::monitors::Monitor;

#[derive(Clone, Copy, Debug)]
struct Learning {
    cid: u64,
    /// Latest PIF computation started since, and whether it decided.
    wave: Option<(u64, bool)>,
}

/// Identity learning: at the decision of every started computation the
/// initiator knows every neighbor's identity and the global minimum.
pub struct IdlMonitor {
    liveness: bool,
    ids: Option<Vec<u64>>,
    running: Vec<Option<Learning>>,
    awaiting_start: Vec<Option<u64>>,
    prev_request: Vec<Request>,
    correctness: Safety,
    decision: Safety,
    started: u64,
    decided: u64,
}

impl IdlMonitor {
    /// True identities default to those of the initial configuration.
    pub fn new(liveness: bool) -> Self {
        IdlMonitor {
            liveness,
            ids: None,
            running: Vec::new(),
            awaiting_start: Vec::new(),
            prev_request: Vec::new(),
            correctness: Safety::default(),
            decision: Safety::default(),
            started: 0,
            decided: 0,
        }
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn decided(&self) -> u64 {
        self.decided
    }

    fn judge(&mut self, step: u64, p: usize, cid: u64, wave: Option<(u64, bool)>, post: &Configuration) {
        self.decided += 1;
        self.decision.check(matches!(wave, Some((_, true))), step, || {
            format!("learning {cid} of {p} decided without a completed broadcast of its own")
        });
        let ids = self.ids.as_ref().expect("identities known");
        let idl = post.procs[p].idl.as_ref().expect("IDL layer");
        let expected_tab: Vec<u64> = (0..ids.len() - 1).map(|s| ids[slot_process(p, s)]).collect();
        let expected_min = *ids.iter().min().expect("n >= 2");
        self.correctness.check(idl.id_tab == expected_tab && idl.min_id == expected_min, step, || {
            format!(
                "learning {cid} of {p} decided with table {:?} and minimum {}, expected {expected_tab:?} and {expected_min}",
                idl.id_tab, idl.min_id
            )
        });
    }
}

impl Observer for IdlMonitor {
    fn on_start(&mut self, initial: &Configuration) {
        if self.ids.is_none() {
            self.ids = initial.identities();
        }
        self.running = vec![None; initial.n()];
        self.prev_request = initial
            .procs
            .iter()
            .map(|p| p.idl.as_ref().map_or(Request::Done, |i| i.request))
            .collect();
        self.awaiting_start = self.prev_request.iter().map(|&r| (r == Request::Wait).then_some(0)).collect();
    }

    fn on_step(&mut self, view: &StepView<'_>, post: &Configuration) {
        for ev in view.events {
            match *ev {
                Event::Start { at, layer: Layer::Idl, cid, .. } => {
                    self.running[at] = Some(Learning { cid, wave: None });
                    self.awaiting_start[at] = None;
                    self.started += 1;
                }
                Event::Start { at, layer: Layer::Pif, cid, .. } => {
                    if let Some(l) = self.running[at].as_mut() {
                        l.wave = Some((cid, false));
                    }
                }
                Event::Decide { at, layer: Layer::Pif, cid: Some(k) } => {
                    if let Some(l) = self.running[at].as_mut() {
                        if l.wave.is_some_and(|(w, _)| w == k) {
                            l.wave = Some((k, true));
                        }
                    }
                }
                Event::Decide { at, layer: Layer::Idl, cid } => {
                    if let Some(l) = self.running[at].take() {
                        debug_assert_eq!(cid, Some(l.cid));
                        self.judge(view.step, at, l.cid, l.wave, post);
                    }
                }
                _ => {}
            }
        }
        for (p, ps) in post.procs.iter().enumerate() {
            let r = ps.idl.as_ref().map_or(Request::Done, |i| i.request);
            if r == Request::Wait && self.prev_request[p] != Request::Wait {
                self.awaiting_start[p] = Some(view.step);
            }
            self.prev_request[p] = r;
        }
    }
}

impl Monitor for IdlMonitor {
    fn verdicts(&self, last: &Configuration, end: RunEnd) -> Vec<Verdict> {
        let mut out = Vec::new();
        if self.liveness {
            out.push(match self.awaiting_start.iter().enumerate().find_map(|(p, s)| s.map(|s| (p, s))) {
                Some((p, since)) => open_obligation(Clause::IdlStart, end, since, format!("learning request of {p} not started")),
                None => Verdict::pass(Clause::IdlStart, format!("{} learning computations started", self.started)),
            });
        }
        let correctness = if self.decided == 0 && self.correctness.first_fail.is_none() {
            Verdict::pass(Clause::IdlCorrectness, "no started learning computation decided")
        } else {
            self.correctness.verdict(Clause::IdlCorrectness, "decisions")
        };
        out.push(correctness);
        if self.liveness {
            let open: Vec<usize> = (0..last.n())
                .filter(|&p| last.procs[p].idl.as_ref().is_some_and(|i| i.request != Request::Done))
                .collect();
            out.push(if open.is_empty() {
                Verdict::pass(Clause::IdlTermination, "every learning request is done")
            } else {
                open_obligation(Clause::IdlTermination, end, 0, format!("processes {open:?} not done"))
            });
        }
        out.push(self.decision.verdict(Clause::IdlDecision, "decisions"));
        out
    }
}
