//! 64-bit configuration digest.
//!
//! FNV-1a over a canonical serialization: every field is rendered as decimal
//! ASCII (an absent optional renders as the empty string) and consecutive
//! fields are separated by `0x1F`. Field order:
//!
//! 1. setup: `n, stack, capacity, assumed_capacity`
//! 2. environment: `pending[0..n], request_payload`
//! 3. global ghost: `next_cid, next_seq`
//! 4. each process in index order:
//!    `pif.request, pif.b_mes, (f_mes[q], state[q], neig_state[q]) for each slot`,
//!    then IDL `present, request, min_id, my_id, id_tab[..]` (or just `0`),
//!    then ME `present, request, phase, value, privileges[..], in_cs` (or `0`),
//!    then ghost `pif_cid, brd_cid[..], idl_cid, me_cid`
//! 5. each channel in `(from, to)` order: `from, to, capacity, len`, then per
//!    message `mtype, b_payload, f_payload, sender_state, echoed_state, origin,
//!    computation_id, sent_by, seq, feedback_for`
//!
//! A payload renders as two fields: its tag code and its value.

use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::kernel::config::Configuration;
use crate::kernel::message::{Message, Origin, Payload};

const SEP: u8 = 0x1F;

/// Digest newtype; renders as 16 lowercase hex digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub u64);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(de::Error::custom(format!("digest must be 16 lowercase hex digits, got {s:?}")));
        }
        u64::from_str_radix(&s, 16).map(Digest).map_err(de::Error::custom)
    }
}

struct Canon {
    h: FnvHasher,
    first: bool,
}

impl Canon {
    fn new() -> Self {
        Canon { h: FnvHasher::default(), first: true }
    }

    fn sep(&mut self) {
        if !self.first {
            self.h.write_u8(SEP);
        }
        self.first = false;
    }

    fn int(&mut self, v: u64) {
        self.sep();
        let mut buf = [0u8; 20];
        let mut i = buf.len();
        let mut v = v;
        loop {
            i -= 1;
            buf[i] = b'0' + (v % 10) as u8;
            v /= 10;
            if v == 0 {
                break;
            }
        }
        self.h.write(&buf[i..]);
    }

    fn opt(&mut self, v: Option<u64>) {
        match v {
            Some(v) => self.int(v),
            None => self.sep(),
        }
    }

    fn payload(&mut self, p: Payload) {
        let (tag, val) = p.code();
        self.int(tag);
        self.int(val);
    }

    fn message(&mut self, m: &Message) {
        self.int(0);
        self.payload(m.wire.b_payload);
        self.payload(m.wire.f_payload);
        self.int(m.wire.sender_state as u64);
        self.int(m.wire.echoed_state as u64);
        self.int(match m.ghost.origin {
            Origin::InitialConfig => 0,
            Origin::ProcessSent => 1,
        });
        self.opt(m.ghost.computation_id);
        self.opt(m.ghost.sent_by.map(|p| p as u64));
        self.int(m.ghost.seq);
        self.opt(m.ghost.feedback_for);
    }
}

pub fn digest(config: &Configuration) -> Digest {
    let mut c = Canon::new();
    let s = &config.setup;
    c.int(s.n as u64);
    c.int(s.stack.code());
    c.int(s.capacity as u64);
    c.int(s.assumed_capacity as u64);
    for &p in &config.env.pending {
        c.int(p as u64);
    }
    c.payload(config.env.request_payload);
    c.int(config.ghost.next_cid);
    c.int(config.ghost.next_seq);

    for ps in &config.procs {
        let pif = &ps.pif;
        c.int(pif.request.code());
        c.payload(pif.b_mes);
        for q in 0..pif.state.len() {
            c.payload(pif.f_mes[q]);
            c.int(pif.state[q] as u64);
            c.int(pif.neig_state[q] as u64);
        }
        match &ps.idl {
            Some(idl) => {
                c.int(1);
                c.int(idl.request.code());
                c.int(idl.min_id);
                c.int(idl.my_id);
                for &id in &idl.id_tab {
                    c.int(id);
                }
            }
            None => c.int(0),
        }
        match &ps.me {
            Some(me) => {
                c.int(1);
                c.int(me.request.code());
                c.int(me.phase as u64);
                c.int(me.value as u64);
                for &b in &me.privileges {
                    c.int(b as u64);
                }
                c.int(me.in_cs as u64);
            }
            None => c.int(0),
        }
        c.opt(ps.ghost.pif_cid);
        for &b in &ps.ghost.brd_cid {
            c.opt(b);
        }
        c.opt(ps.ghost.idl_cid);
        c.opt(ps.ghost.me_cid);
    }

    for ch in &config.channels {
        c.int(ch.from as u64);
        c.int(ch.to as u64);
        c.int(ch.capacity as u64);
        c.int(ch.queue.len() as u64);
        for m in &ch.queue {
            c.message(m);
        }
    }
    Digest(c.h.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::config::{Setup, Stack};
    use crate::kernel::message::{Ghost, Wire};

    fn fnv1a_reference(bytes: &[u8]) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    #[test]
    fn hasher_is_fnv1a_64() {
        let mut h = FnvHasher::default();
        h.write(b"a");
        assert_eq!(h.finish(), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_reference(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn canonical_bytes_match_reference_encoding() {
        let mut c = Canon::new();
        c.int(12);
        c.opt(None);
        c.int(0);
        assert_eq!(c.h.finish(), fnv1a_reference(b"12\x1f\x1f0"));
    }

    #[test]
    fn pure() {
        let c = Configuration::clean(Setup::new(3, Stack::Me, 1)).unwrap();
        assert_eq!(digest(&c), digest(&c.clone()));
    }

    #[test]
    fn one_message_changes_digest() {
        let a = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        let mut b = a.clone();
        b.channel_mut(1, 0).queue.push_back(Message {
            wire: Wire::pif(Payload::M, Payload::M, 0, 0),
            ghost: Ghost::initial(0),
        });
        let mut c = b.clone();
        c.channel_mut(1, 0).queue[0].wire.echoed_state = 1;
        assert_ne!(digest(&a), digest(&b));
        assert_ne!(digest(&b), digest(&c));
    }

    #[test]
    fn golden_clean_two_process() {
        let c = Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap();
        let proc_fields = ["2", "0", "0", "0", "0", "0", "0", "0", "0", "", "", "", ""];
        let mut fields: Vec<&str> = vec!["2", "0", "1", "1", "0", "0", "1", "0", "1", "0"];
        fields.extend(proc_fields);
        fields.extend(proc_fields);
        fields.extend(["0", "1", "1", "0", "1", "0", "1", "0"]);
        let by_hand = fnv1a_reference(fields.join("\x1f").as_bytes());
        assert_eq!(digest(&c).0, by_hand);
        assert_eq!(digest(&c).to_string(), GOLDEN_CLEAN_N2);
    }

    const GOLDEN_CLEAN_N2: &str = "859c199ec07fd0ae";

    #[test]
    fn hex_round_trip() {
        let d = Digest(0x00ab_cdef_0123_4567);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, "\"00abcdef01234567\"");
        assert_eq!(serde_json::from_str::<Digest>(&s).unwrap(), d);
        assert!(serde_json::from_str::<Digest>("\"00ABCDEF01234567\"").is_err());
    }
}
