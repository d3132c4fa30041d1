//! Wire records and the checker-only provenance that rides alongside them.

use serde::{Deserialize, Serialize};

/// Request variable shared by every protocol layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Request {
    Wait,
    In,
    Done,
}

impl Request {
    pub const ALL: [Request; 3] = [Request::Wait, Request::In, Request::Done];

    pub(crate) fn code(self) -> u64 {
        match self {
            Request::Wait => 0,
            Request::In => 1,
            Request::Done => 2,
        }
    }
}

/// Values carried in the broadcast and feedback slots of a PIF message.
///
/// Upper layers share one PIF instance, so every layer's vocabulary lives in
/// this one enum. `Sym` values are opaque test symbols (`Sym(0)` is the
/// conventional `m`, `Sym(1)` the foreign `m'`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Nil,
    Sym(u8),
    Idl,
    Ask,
    Exit,
    ExitCs,
    Yes,
    No,
    Ok,
    Id(u64),
}

impl Payload {
    pub const M: Payload = Payload::Sym(0);
    pub const M_PRIME: Payload = Payload::Sym(1);

    pub(crate) fn code(self) -> (u64, u64) {
        match self {
            Payload::Nil => (0, 0),
            Payload::Sym(s) => (1, s as u64),
            Payload::Idl => (2, 0),
            Payload::Ask => (3, 0),
            Payload::Exit => (4, 0),
            Payload::ExitCs => (5, 0),
            Payload::Yes => (6, 0),
            Payload::No => (7, 0),
            Payload::Ok => (8, 0),
            Payload::Id(id) => (9, id),
        }
    }
}

/// Message type tag. Upper-layer traffic rides inside PIF messages, so this
/// has a single inhabitant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MsgType {
    #[default]
    #[serde(rename = "PIF")]
    Pif,
}

/// The protocol-visible part of a message: `<PIF, B, F, State, NeigState>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire {
    pub mtype: MsgType,
    pub b_payload: Payload,
    pub f_payload: Payload,
    pub sender_state: u8,
    pub echoed_state: u8,
}

impl Wire {
    pub fn pif(b_payload: Payload, f_payload: Payload, sender_state: u8, echoed_state: u8) -> Self {
        Wire {
            mtype: MsgType::Pif,
            b_payload,
            f_payload,
            sender_state,
            echoed_state,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    InitialConfig,
    ProcessSent,
}

/// Provenance stamped by the kernel. Protocol code never sees it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ghost {
    pub origin: Origin,
    /// Sender's started PIF computation, if the sender was `In` one when sending.
    pub computation_id: Option<u64>,
    pub sent_by: Option<usize>,
    /// Global enqueue sequence number.
    pub seq: u64,
    /// Computation whose broadcast wrote the feedback slot this message carries.
    pub feedback_for: Option<u64>,
}

impl Ghost {
    pub fn initial(seq: u64) -> Self {
        Ghost {
            origin: Origin::InitialConfig,
            computation_id: None,
            sent_by: None,
            seq,
            feedback_for: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    #[serde(flatten)]
    pub wire: Wire,
    pub ghost: Ghost,
}
