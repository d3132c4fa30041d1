//! Snap-stabilizing propagation of information with feedback over a
//! fully-connected network of bounded-capacity lossy FIFO channels.
//!
//! Each process keeps, per neighbor, a flag `state[q]` it stamps on outgoing
//! messages and the last flag `neig_state[q]` it saw from that neighbor. The
//! initiator only trusts a neighbor's acknowledgment once the neighbor has
//! echoed `max_state` consecutive flag values, which is more than the stale
//! messages a channel of the assumed capacity can hold.
//!
//! Neighbors are addressed by *slot* (`channel number - 1`), see
//! [`crate::kernel::neighbor_slot`].

use serde::{Deserialize, Serialize};

use crate::kernel::message::{Payload, Request, Wire};

/// Flag bound for a protocol that assumes `capacity` messages per channel.
pub fn max_state_for(capacity: usize) -> u8 {
    u8::try_from(2 * capacity + 2).expect("assumed capacity too large")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PifState {
    pub request: Request,
    pub b_mes: Payload,
    pub f_mes: Vec<Payload>,
    pub state: Vec<u8>,
    pub neig_state: Vec<u8>,
    pub max_state: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PifEventKind {
    ReceiveBrd,
    ReceiveFck,
}

/// A `receive-brd` or `receive-fck` event raised towards the upper layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PifEvent {
    pub kind: PifEventKind,
    pub payload: Payload,
    pub from: usize,
}

/// Application sitting on top of PIF. Events are delivered synchronously,
/// inside the atomic receive action.
pub trait UpperLayer {
    /// Handles `receive-brd<payload> from slot`; returns the new value of
    /// `f_mes[slot]`, or `None` to leave it untouched.
    fn on_receive_brd(&mut self, from: usize, payload: Payload) -> Option<Payload>;
    fn on_receive_fck(&mut self, from: usize, payload: Payload);
}

/// Upper layer that ignores everything.
pub struct NoUpper;

impl UpperLayer for NoUpper {
    fn on_receive_brd(&mut self, _from: usize, _payload: Payload) -> Option<Payload> {
        None
    }
    fn on_receive_fck(&mut self, _from: usize, _payload: Payload) {}
}

/// Result of the repeatable resend action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resend {
    /// Every flag reached `max_state`: the decision event.
    Decided,
    /// `(slot, message)` pairs still waiting for their handshake.
    Sent(Vec<(usize, Wire)>),
}

/// Outcome of handling one incoming message.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Receipt {
    pub events: Vec<PifEvent>,
    pub reply: Option<Wire>,
}

impl PifState {
    /// A freshly initialised, idle process: `Done`, all flags zero, NIL payloads.
    pub fn fresh(n: usize, assumed_capacity: usize) -> Self {
        PifState {
            request: Request::Done,
            b_mes: Payload::Nil,
            f_mes: vec![Payload::Nil; n - 1],
            state: vec![0; n - 1],
            neig_state: vec![0; n - 1],
            max_state: max_state_for(assumed_capacity),
        }
    }

    pub fn neighbors(&self) -> usize {
        self.state.len()
    }

    /// A1 guard.
    pub fn can_start(&self) -> bool {
        self.request == Request::Wait
    }

    /// A2 guard.
    pub fn can_resend(&self) -> bool {
        self.request == Request::In
    }

    /// A1: start a computation.
    pub fn start(&mut self) {
        debug_assert!(self.can_start(), "A1 fired with request {:?}", self.request);
        self.request = Request::In;
        self.state.iter_mut().for_each(|s| *s = 0);
    }

    /// A2: decide if every handshake is complete, otherwise resend to every
    /// neighbor whose handshake is still open.
    pub fn resend_or_decide(&mut self) -> Resend {
        debug_assert!(self.can_resend(), "A2 fired with request {:?}", self.request);
        if self.state.iter().all(|&s| s == self.max_state) {
            self.request = Request::Done;
            return Resend::Decided;
        }
        let out = (0..self.neighbors())
            .filter(|&q| self.state[q] != self.max_state)
            .map(|q| (q, self.outgoing(q)))
            .collect();
        Resend::Sent(out)
    }

    /// A3: handle `<PIF, B, F, qState, pState>` from `slot`.
    pub fn receive<U: UpperLayer + ?Sized>(&mut self, slot: usize, msg: &Wire, upper: &mut U) -> Receipt {
        let trigger = self.max_state - 1;
        let mut receipt = Receipt::default();

        if self.neig_state[slot] != trigger && msg.sender_state == trigger {
            receipt.events.push(PifEvent {
                kind: PifEventKind::ReceiveBrd,
                payload: msg.b_payload,
                from: slot,
            });
            if let Some(f) = upper.on_receive_brd(slot, msg.b_payload) {
                self.f_mes[slot] = f;
            }
        }

        self.neig_state[slot] = msg.sender_state;

        if self.state[slot] == msg.echoed_state && self.state[slot] < self.max_state {
            self.state[slot] += 1;
            if self.state[slot] == self.max_state {
                receipt.events.push(PifEvent {
                    kind: PifEventKind::ReceiveFck,
                    payload: msg.f_payload,
                    from: slot,
                });
                upper.on_receive_fck(slot, msg.f_payload);
            }
        }

        if msg.sender_state < self.max_state {
            receipt.reply = Some(self.outgoing(slot));
        }
        receipt
    }

    fn outgoing(&self, slot: usize) -> Wire {
        Wire::pif(self.b_mes, self.f_mes[slot], self.state[slot], self.neig_state[slot])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;
    impl UpperLayer for Echo {
        fn on_receive_brd(&mut self, _from: usize, payload: Payload) -> Option<Payload> {
            Some(payload)
        }
        fn on_receive_fck(&mut self, _from: usize, _payload: Payload) {}
    }

    fn with(n: usize, request: Request, state: &[u8]) -> PifState {
        let mut s = PifState::fresh(n, 1);
        s.request = request;
        s.state = state.to_vec();
        s
    }

    #[test]
    fn a1_resets_flags_and_starts() {
        let mut s = with(2, Request::Wait, &[3]);
        s.start();
        assert_eq!(s.request, Request::In);
        assert_eq!(s.state, vec![0]);

        let mut s = with(4, Request::Wait, &[4, 4, 4]);
        s.neig_state = vec![1, 4, 2];
        s.start();
        assert_eq!(s.state, vec![0, 0, 0]);
        assert_eq!(s.neig_state, vec![1, 4, 2]);
    }

    #[test]
    fn a2_decides_when_all_flags_maxed() {
        let mut s = with(2, Request::In, &[4]);
        assert_eq!(s.resend_or_decide(), Resend::Decided);
        assert_eq!(s.request, Request::Done);
    }

    #[test]
    fn a2_sends_only_to_open_handshakes() {
        let mut s = with(3, Request::In, &[4, 2]);
        match s.resend_or_decide() {
            Resend::Sent(out) => {
                assert_eq!(out.len(), 1);
                assert_eq!(out[0].0, 1);
                assert_eq!(out[0].1.sender_state, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.request, Request::In);
    }

    #[test]
    fn a2_fresh_start_resend_carries_current_fields() {
        let mut s = with(2, Request::In, &[0]);
        s.b_mes = Payload::M;
        s.f_mes = vec![Payload::Yes];
        s.neig_state = vec![2];
        let Resend::Sent(out) = s.resend_or_decide() else { panic!() };
        assert_eq!(out, vec![(0, Wire::pif(Payload::M, Payload::Yes, 0, 2))]);
    }

    #[test]
    fn a3_full_path_brd_then_fck_then_reply() {
        let mut s = with(2, Request::In, &[3]);
        s.neig_state = vec![2];
        let msg = Wire::pif(Payload::M, Payload::M_PRIME, 3, 3);
        let r = s.receive(0, &msg, &mut Echo);
        assert_eq!(
            r.events,
            vec![
                PifEvent { kind: PifEventKind::ReceiveBrd, payload: Payload::M, from: 0 },
                PifEvent { kind: PifEventKind::ReceiveFck, payload: Payload::M_PRIME, from: 0 },
            ]
        );
        assert_eq!(s.neig_state, vec![3]);
        assert_eq!(s.state, vec![4]);
        // Reply uses the f_mes just written by the upper layer.
        assert_eq!(r.reply, Some(Wire::pif(Payload::Nil, Payload::M, 4, 3)));
    }

    #[test]
    fn a3_stale_termination_message_absorbed() {
        let mut s = with(2, Request::In, &[3]);
        let r = s.receive(0, &Wire::pif(Payload::M, Payload::M, 4, 0), &mut Echo);
        assert!(r.events.is_empty());
        assert_eq!(s.neig_state, vec![4]);
        assert_eq!(s.state, vec![3]);
        assert_eq!(r.reply, None);
    }

    #[test]
    fn a3_no_brd_when_trigger_flag_already_seen() {
        let mut s = with(2, Request::Done, &[4]);
        s.neig_state = vec![3];
        let r = s.receive(0, &Wire::pif(Payload::M, Payload::Nil, 3, 0), &mut Echo);
        assert!(r.events.is_empty());
        assert_eq!(s.f_mes, vec![Payload::Nil]);
        assert!(r.reply.is_some());
    }

    #[test]
    fn capacity_two_uses_six() {
        assert_eq!(max_state_for(1), 4);
        assert_eq!(max_state_for(2), 6);
        let mut s = PifState::fresh(2, 2);
        s.request = Request::In;
        s.state = vec![5];
        s.neig_state = vec![4];
        let r = s.receive(0, &Wire::pif(Payload::M, Payload::M, 5, 5), &mut Echo);
        assert_eq!(r.events.len(), 2);
        assert_eq!(s.state, vec![6]);
    }
}
