use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::idl::IdlState;
use crate::kernel::message::{Message, Payload, Request};
use crate::me::MeState;
use crate::pif::{max_state_for, PifState};

/// Which protocol layers are active at every process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stack {
    /// PIF with an echo application on top.
    Pif,
    /// IDL over PIF.
    Idl,
    /// ME over IDL over PIF.
    Me,
}

impl Stack {
    /// Layer that receives external requests.
    pub fn top(self) -> Layer {
        match self {
            Stack::Pif => Layer::Pif,
            Stack::Idl => Layer::Idl,
            Stack::Me => Layer::Me,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Stack::Pif => 0,
            Stack::Idl => 1,
            Stack::Me => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "PIF")]
    Pif,
    #[serde(rename = "IDL")]
    Idl,
    #[serde(rename = "ME")]
    Me,
}

/// Static parameters of a system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setup {
    pub n: usize,
    pub stack: Stack,
    /// Real channel capacity enforced by the kernel.
    pub capacity: usize,
    /// Capacity the PIF layer is parameterized for.
    pub assumed_capacity: usize,
}

impl Setup {
    pub fn new(n: usize, stack: Stack, capacity: usize) -> Self {
        Setup {
            n,
            stack,
            capacity,
            assumed_capacity: capacity,
        }
    }

    pub fn with_assumed_capacity(mut self, assumed: usize) -> Self {
        self.assumed_capacity = assumed;
        self
    }

    pub fn max_state(&self) -> u8 {
        max_state_for(self.assumed_capacity)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n < 2 {
            return Err(Error::InvalidSetup(format!("n must be at least 2, got {}", self.n)));
        }
        if self.capacity == 0 || self.assumed_capacity == 0 {
            return Err(Error::InvalidSetup("capacities must be positive".into()));
        }
        if self.assumed_capacity > 100 {
            return Err(Error::InvalidSetup("assumed capacity too large".into()));
        }
        Ok(())
    }
}

/// Slot (channel number - 1) under which process `p` addresses process `q`.
pub fn neighbor_slot(p: usize, q: usize) -> usize {
    debug_assert_ne!(p, q);
    if q < p {
        q
    } else {
        q - 1
    }
}

/// Inverse of [`neighbor_slot`].
pub fn slot_process(p: usize, slot: usize) -> usize {
    if slot < p {
        slot
    } else {
        slot + 1
    }
}

/// Checker-only per-process bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcGhost {
    /// Last PIF computation started here.
    pub pif_cid: Option<u64>,
    /// Per slot: computation id of the message that raised the last receive-brd.
    pub brd_cid: Vec<Option<u64>>,
    pub idl_cid: Option<u64>,
    /// Set when ME.A0 accepts a request, cleared when the request is done.
    pub me_cid: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessState {
    pub pif: PifState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idl: Option<IdlState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub me: Option<MeState>,
    pub ghost: ProcGhost,
}

impl ProcessState {
    /// Request variable of the layer `layer`, if present.
    pub fn request(&self, layer: Layer) -> Option<Request> {
        match layer {
            Layer::Pif => Some(self.pif.request),
            Layer::Idl => self.idl.as_ref().map(|s| s.request),
            Layer::Me => self.me.as_ref().map(|s| s.request),
        }
    }

    pub fn in_cs(&self) -> bool {
        self.me.as_ref().is_some_and(|m| m.in_cs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub from: usize,
    pub to: usize,
    pub capacity: usize,
    pub queue: VecDeque<Message>,
}

impl Channel {
    pub fn is_full(&self) -> bool {
        self.queue.len() >= self.capacity
    }
}

/// The environment issuing external requests.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Environment {
    /// External requests still to be issued, per process.
    pub pending: Vec<u32>,
    /// Broadcast payload used for external PIF requests.
    pub request_payload: Payload,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalGhost {
    pub next_cid: u64,
    pub next_seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub setup: Setup,
    pub procs: Vec<ProcessState>,
    /// One channel per ordered pair, in `(from, to)` lexicographic order.
    pub channels: Vec<Channel>,
    pub env: Environment,
    pub ghost: GlobalGhost,
}

impl Configuration {
    /// Every process idle with fresh variables, every channel empty.
    /// Identities default to `1..=n`.
    pub fn clean(setup: Setup) -> Result<Self, Error> {
        let ids: Vec<u64> = (1..=setup.n as u64).collect();
        Self::clean_with_ids(setup, &ids)
    }

    pub fn clean_with_ids(setup: Setup, ids: &[u64]) -> Result<Self, Error> {
        setup.validate()?;
        let n = setup.n;
        if ids.len() != n {
            return Err(Error::InvalidSetup(format!("expected {n} identities, got {}", ids.len())));
        }
        let procs = (0..n)
            .map(|p| ProcessState {
                pif: PifState::fresh(n, setup.assumed_capacity),
                idl: (setup.stack != Stack::Pif).then(|| IdlState::fresh(n, ids[p])),
                me: (setup.stack == Stack::Me).then(|| MeState::fresh(n)),
                ghost: ProcGhost {
                    brd_cid: vec![None; n - 1],
                    ..ProcGhost::default()
                },
            })
            .collect();
        let mut channels = Vec::with_capacity(n * (n - 1));
        for from in 0..n {
            for to in (0..n).filter(|&t| t != from) {
                channels.push(Channel {
                    from,
                    to,
                    capacity: setup.capacity,
                    queue: VecDeque::new(),
                });
            }
        }
        let cfg = Configuration {
            setup,
            procs,
            channels,
            env: Environment {
                pending: vec![0; n],
                request_payload: Payload::M,
            },
            ghost: GlobalGhost { next_cid: 1, next_seq: 0 },
        };
        cfg.check_identities()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.setup.n
    }

    pub fn channel_index(&self, from: usize, to: usize) -> usize {
        debug_assert_ne!(from, to);
        from * (self.n() - 1) + neighbor_slot(from, to)
    }

    pub fn channel(&self, from: usize, to: usize) -> &Channel {
        &self.channels[self.channel_index(from, to)]
    }

    pub fn channel_mut(&mut self, from: usize, to: usize) -> &mut Channel {
        let i = self.channel_index(from, to);
        &mut self.channels[i]
    }

    /// True identities, if the stack carries them.
    pub fn identities(&self) -> Option<Vec<u64>> {
        self.procs.iter().map(|p| p.idl.as_ref().map(|i| i.my_id)).collect()
    }

    /// Index of the smallest identity.
    pub fn leader(&self) -> Option<usize> {
        let ids = self.identities()?;
        (0..ids.len()).min_by_key(|&p| ids[p])
    }

    fn check_identities(&self) -> Result<(), Error> {
        if let Some(mut ids) = self.identities() {
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSetup("identities must be unique".into()));
            }
        }
        Ok(())
    }

    /// Checks topology, channel bounds and variable domains.
    pub fn validate(&self) -> Result<(), Error> {
        self.setup.validate()?;
        let n = self.n();
        let max = self.setup.max_state();
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if self.procs.len() != n {
            return bad(format!("{} process states for n = {n}", self.procs.len()));
        }
        if self.channels.len() != n * (n - 1) || self.env.pending.len() != n {
            return bad("channel or environment vector has the wrong shape".into());
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.from == ch.to || ch.from >= n || ch.to >= n || self.channel_index(ch.from, ch.to) != i {
                return bad(format!("channel {i} is misplaced ({} -> {})", ch.from, ch.to));
            }
            if ch.capacity != self.setup.capacity || ch.queue.len() > ch.capacity {
                return bad(format!("channel {} -> {} exceeds its capacity", ch.from, ch.to));
            }
            if let Some(m) = ch.queue.iter().find(|m| m.wire.sender_state > max || m.wire.echoed_state > max) {
                return bad(format!("message flag out of range on {} -> {}: {:?}", ch.from, ch.to, m.wire));
            }
        }
        for (p, ps) in self.procs.iter().enumerate() {
            let pif = &ps.pif;
            let widths = [pif.f_mes.len(), pif.state.len(), pif.neig_state.len(), ps.ghost.brd_cid.len()];
            if widths.iter().any(|&w| w != n - 1) {
                return bad(format!("process {p} has per-neighbor arrays of the wrong width"));
            }
            if pif.max_state != max || pif.state.iter().chain(&pif.neig_state).any(|&s| s > max) {
                return bad(format!("process {p} has PIF flags outside 0..={max}"));
            }
            if ps.idl.is_some() != (self.setup.stack != Stack::Pif) || ps.me.is_some() != (self.setup.stack == Stack::Me) {
                return bad(format!("process {p} layers do not match the stack"));
            }
            if let Some(idl) = &ps.idl {
                if idl.id_tab.len() != n - 1 {
                    return bad(format!("process {p} id table has the wrong width"));
                }
            }
            if let Some(me) = &ps.me {
                if me.phase > 4 || me.value >= n || me.privileges.len() != n - 1 {
                    return bad(format!("process {p} ME variables out of domain"));
                }
            }
        }
        self.check_identities()
    }

    /// Total messages in flight.
    pub fn in_flight(&self) -> usize {
        self.channels.iter().map(|c| c.queue.len()).sum()
    }
}
