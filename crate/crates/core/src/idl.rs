//! IDs-learning: one PIF wave collects every neighbor's identity and the
//! global minimum.

use serde::{Deserialize, Serialize};

use crate::kernel::message::{Payload, Request};

/// Order handed down to the PIF layer: set `b_mes` and request a broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PifDirective {
    pub broadcast: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdlState {
    pub request: Request,
    pub min_id: u64,
    pub id_tab: Vec<u64>,
    pub my_id: u64,
}

impl IdlState {
    pub fn fresh(n: usize, my_id: u64) -> Self {
        IdlState {
            request: Request::Done,
            min_id: my_id,
            id_tab: vec![0; n - 1],
            my_id,
        }
    }

    pub fn can_start(&self) -> bool {
        self.request == Request::Wait
    }

    /// A1.
    pub fn start(&mut self) -> PifDirective {
        debug_assert!(self.can_start());
        self.request = Request::In;
        self.min_id = self.my_id;
        PifDirective { broadcast: Payload::Idl }
    }

    pub fn can_terminate(&self, pif_request: Request) -> bool {
        self.request == Request::In && pif_request == Request::Done
    }

    /// A2. Returns whether the guard held.
    pub fn terminate(&mut self, pif_request: Request) -> bool {
        if !self.can_terminate(pif_request) {
            return false;
        }
        self.request = Request::Done;
        true
    }

    /// A3: feedback written for an `IDL` broadcast from any neighbor.
    pub fn on_brd(&self, _from: usize) -> Payload {
        Payload::Id(self.my_id)
    }

    /// A4.
    pub fn on_fck(&mut self, from: usize, qid: u64) {
        self.id_tab[from] = qid;
        self.min_id = self.min_id.min(qid);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_overwrites_corrupted_min() {
        let mut s = IdlState::fresh(3, 7);
        s.min_id = 1;
        s.request = Request::Wait;
        assert_eq!(s.start(), PifDirective { broadcast: Payload::Idl });
        assert_eq!(s.min_id, 7);
        assert_eq!(s.request, Request::In);
        assert!(!s.can_start());
    }

    #[test]
    fn terminate_guard() {
        let mut s = IdlState::fresh(2, 1);
        s.request = Request::In;
        assert!(!s.terminate(Request::In));
        assert_eq!(s.request, Request::In);
        assert!(s.terminate(Request::Done));
        assert_eq!(s.request, Request::Done);
        assert!(!s.terminate(Request::Done));
        assert_eq!(s.request, Request::Done);
    }

    #[test]
    fn brd_feeds_back_own_id_regardless_of_sender() {
        let s = IdlState::fresh(4, 3);
        assert_eq!(s.on_brd(0), Payload::Id(3));
        assert_eq!(s.on_brd(2), Payload::Id(3));
    }

    #[test]
    fn fck_records_and_takes_min() {
        let mut s = IdlState::fresh(3, 7);
        s.on_fck(1, 2);
        assert_eq!(s.min_id, 2);
        assert_eq!(s.id_tab[1], 2);
        s.on_fck(0, 2);
        assert_eq!(s.min_id, 2);
    }

    #[test]
    fn three_process_learning_by_hand() {
        // ids {5, 9, 2}; initiator has id 5, neighbors in slot order 9 then 2.
        let mut s = IdlState::fresh(3, 5);
        s.request = Request::Wait;
        s.start();
        s.on_fck(0, 9);
        s.on_fck(1, 2);
        let expected_min = [5u64, 9, 2].into_iter().min().unwrap();
        assert_eq!(s.min_id, expected_min);
        assert_eq!(s.id_tab, vec![9, 2]);
    }
}
