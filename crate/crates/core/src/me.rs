//! Snap-stabilizing mutual exclusion layered over IDL and PIF.
//!
//! The process with the smallest identity (the leader) designates the
//! privileged process through `value`: `0` means itself, `c` means the
//! neighbor behind its channel number `c`. A process cycles through phases
//! 0..4: learn identities, ask who is privileged, evict everyone to phase 0
//! with `EXIT`, run the critical section, then release it with `EXITCS`.
//!
//! The critical section is not atomic here. Phase action 3 only *enters* it
//! (`in_cs`); a separate scheduler-controlled exit action performs the rest of
//! the phase-3 statement. While inside, receive handlers keep running but no
//! phase action fires.

use serde::{Deserialize, Serialize};

use crate::idl::IdlState;
use crate::kernel::message::{Payload, Request};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeState {
    pub request: Request,
    pub phase: u8,
    pub value: usize,
    pub privileges: Vec<bool>,
    pub in_cs: bool,
}

/// Everything the `Winner` predicate reads.
#[derive(Clone, Copy, Debug)]
pub struct WinnerInput<'a> {
    pub min_id: u64,
    pub my_id: u64,
    pub id_tab: &'a [u64],
    pub privileges: &'a [bool],
    pub value: usize,
}

impl<'a> WinnerInput<'a> {
    pub fn of(me: &'a MeState, idl: &'a IdlState) -> Self {
        WinnerInput {
            min_id: idl.min_id,
            my_id: idl.my_id,
            id_tab: &idl.id_tab,
            privileges: &me.privileges,
            value: me.value,
        }
    }
}

pub fn winner(w: &WinnerInput<'_>) -> bool {
    (w.min_id == w.my_id && w.value == 0)
        || w
            .privileges
            .iter()
            .zip(w.id_tab)
            .any(|(&granted, &id)| granted && id == w.min_id)
}

/// Side effects of a phase action on the lower layers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseOutcome {
    /// Phase whose action fired.
    pub fired: u8,
    /// A0 turned a pending `Wait` into `In`.
    pub started: bool,
    /// `IDL.Request <- Wait`.
    pub request_idl: bool,
    /// `PIF.B-Mes <- payload; PIF.Request <- Wait`.
    pub broadcast: Option<Payload>,
    pub entered_cs: bool,
}

impl MeState {
    pub fn fresh(n: usize) -> Self {
        MeState {
            request: Request::Done,
            phase: 0,
            value: 0,
            privileges: vec![false; n - 1],
            in_cs: false,
        }
    }

    /// Guard of the phase action matching the current phase.
    pub fn phase_enabled(&self, idl_request: Request, pif_request: Request) -> bool {
        if self.in_cs {
            return false;
        }
        match self.phase {
            0 => true,
            1 => idl_request == Request::Done,
            2..=4 => pif_request == Request::Done,
            _ => false,
        }
    }

    /// A0..A4 for the current phase. The caller checks [`Self::phase_enabled`].
    pub fn phase_step(&mut self, idl: &IdlState, pif_request: Request) -> PhaseOutcome {
        debug_assert!(self.phase_enabled(idl.request, pif_request));
        let mut out = PhaseOutcome {
            fired: self.phase,
            ..PhaseOutcome::default()
        };
        match self.phase {
            0 => {
                out.request_idl = true;
                if self.request == Request::Wait {
                    self.request = Request::In;
                    out.started = true;
                }
                self.phase = 1;
            }
            1 => {
                out.broadcast = Some(Payload::Ask);
                self.phase = 2;
            }
            2 => {
                if winner(&WinnerInput::of(self, idl)) {
                    out.broadcast = Some(Payload::Exit);
                }
                self.phase = 3;
            }
            3 => {
                if winner(&WinnerInput::of(self, idl)) {
                    if self.request == Request::In {
                        self.in_cs = true;
                        out.entered_cs = true;
                        return out;
                    }
                    out.broadcast = self.release(idl);
                }
                self.phase = 4;
            }
            4 => self.phase = 0,
            p => unreachable!("phase {p} out of domain"),
        }
        out
    }

    /// Remainder of A3 after the critical section. Returns the `EXITCS`
    /// broadcast for non-leaders.
    pub fn leave_cs(&mut self, idl: &IdlState) -> Option<Payload> {
        debug_assert!(self.in_cs);
        self.in_cs = false;
        self.request = Request::Done;
        let out = self.release(idl);
        // An EXIT received while inside already sent us back to phase 0.
        if self.phase == 3 {
            self.phase = 4;
        }
        out
    }

    fn release(&mut self, idl: &IdlState) -> Option<Payload> {
        if idl.min_id == idl.my_id {
            self.value = 1;
            None
        } else {
            Some(Payload::ExitCs)
        }
    }

    /// A5..A7. `from` is a slot, so the neighbor's channel number is `from + 1`.
    /// Returns the feedback to write in `f_mes[from]`.
    pub fn on_brd(&mut self, from: usize, payload: Payload, n: usize) -> Payload {
        let channel = from + 1;
        match payload {
            Payload::Ask => {
                if self.value == channel {
                    Payload::Yes
                } else {
                    Payload::No
                }
            }
            Payload::Exit => {
                self.phase = 0;
                Payload::Ok
            }
            Payload::ExitCs => {
                if self.value == channel {
                    self.value = (self.value + 1) % n;
                }
                Payload::Ok
            }
            _ => Payload::Nil,
        }
    }

    /// A8..A10.
    pub fn on_fck(&mut self, from: usize, payload: Payload) {
        match payload {
            Payload::Yes => self.privileges[from] = true,
            Payload::No => self.privileges[from] = false,
            _ => {}
        }
    }
}
