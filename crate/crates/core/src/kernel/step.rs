//! Enabled choices and the atomic step function.

use crate::error::Error;
use crate::idl::IdlState;
use crate::kernel::choice::{Action, ScheduleChoice};
use crate::kernel::config::{neighbor_slot, slot_process, Configuration, Layer, Stack};
use crate::kernel::digest::digest;
use crate::kernel::message::{Ghost, Message, Origin, Payload, Request, Wire};
use crate::kernel::trace::{Event, TraceRecord};
use crate::me::MeState;
use crate::pif::{PifEventKind, Resend, UpperLayer};

/// Upper layers of one process, as seen by its PIF instance.
struct Apps<'a> {
    stack: Stack,
    n: usize,
    idl: Option<&'a mut IdlState>,
    me: Option<&'a mut MeState>,
}

impl UpperLayer for Apps<'_> {
    fn on_receive_brd(&mut self, from: usize, payload: Payload) -> Option<Payload> {
        if self.stack == Stack::Pif {
            return Some(payload);
        }
        let f = match payload {
            Payload::Idl => self.idl.as_ref().map(|i| i.on_brd(from)),
            Payload::Ask | Payload::Exit | Payload::ExitCs => self.me.as_mut().map(|m| m.on_brd(from, payload, self.n)),
            _ => None,
        };
        Some(f.unwrap_or(Payload::Nil))
    }

    fn on_receive_fck(&mut self, from: usize, payload: Payload) {
        match payload {
            Payload::Id(q) => {
                if let Some(idl) = self.idl.as_mut() {
                    idl.on_fck(from, q);
                }
            }
            Payload::Yes | Payload::No | Payload::Ok => {
                if let Some(me) = self.me.as_mut() {
                    me.on_fck(from, payload);
                }
            }
            _ => {}
        }
    }
}

fn guard_holds(config: &Configuration, p: usize, action: Action) -> bool {
    let ps = &config.procs[p];
    match action {
        Action::PifA1 => ps.pif.can_start(),
        Action::PifA2 => ps.pif.can_resend(),
        Action::IdlA1 => ps.idl.as_ref().is_some_and(|i| i.can_start()),
        Action::IdlA2 => ps.idl.as_ref().is_some_and(|i| i.can_terminate(ps.pif.request)),
        Action::MeCsExit => ps.in_cs(),
        phase_action => match (&ps.me, &ps.idl) {
            (Some(me), Some(idl)) => {
                Action::me_phase(me.phase) == phase_action && me.phase_enabled(idl.request, ps.pif.request)
            }
            _ => false,
        },
    }
}

fn external_admissible(config: &Configuration, p: usize, layer: Layer) -> bool {
    layer == config.setup.stack.top()
        && config.env.pending[p] > 0
        && config.procs[p].request(layer) == Some(Request::Done)
}

/// Guard-true actions of process `p`, in protocol-text order.
pub fn enabled_actions(config: &Configuration, p: usize, out: &mut Vec<Action>) {
    let ps = &config.procs[p];
    if ps.pif.can_start() {
        out.push(Action::PifA1);
    }
    if ps.pif.can_resend() {
        out.push(Action::PifA2);
    }
    if let Some(idl) = &ps.idl {
        if idl.can_start() {
            out.push(Action::IdlA1);
        }
        if idl.can_terminate(ps.pif.request) {
            out.push(Action::IdlA2);
        }
        if let Some(me) = &ps.me {
            if me.phase_enabled(idl.request, ps.pif.request) {
                out.push(Action::me_phase(me.phase));
            }
            if me.in_cs {
                out.push(Action::MeCsExit);
            }
        }
    }
}

/// Every admissible choice: per process its enabled actions in text order,
/// then deliver/lose per nonempty channel, then external requests.
pub fn enabled_choices(config: &Configuration) -> Vec<ScheduleChoice> {
    let mut out = Vec::new();
    enabled_choices_into(config, &mut out);
    out
}

pub fn enabled_choices_into(config: &Configuration, out: &mut Vec<ScheduleChoice>) {
    out.clear();
    let mut actions = Vec::with_capacity(4);
    for p in 0..config.n() {
        actions.clear();
        enabled_actions(config, p, &mut actions);
        out.extend(actions.iter().map(|&a| ScheduleChoice::fire(p, a)));
    }
    for ch in &config.channels {
        if !ch.queue.is_empty() {
            out.push(ScheduleChoice::deliver(ch.from, ch.to));
            out.push(ScheduleChoice::lose(ch.from, ch.to));
        }
    }
    let top = config.setup.stack.top();
    for p in 0..config.n() {
        if external_admissible(config, p, top) {
            out.push(ScheduleChoice::ExternalRequest { process: p, layer: top });
        }
    }
}

pub fn is_admissible(config: &Configuration, choice: &ScheduleChoice) -> bool {
    let n = config.n();
    match *choice {
        ScheduleChoice::FireGuard { process, action } => process < n && guard_holds(config, process, action),
        ScheduleChoice::Deliver { from, to } | ScheduleChoice::Lose { from, to } => {
            from < n && to < n && from != to && !config.channel(from, to).queue.is_empty()
        }
        ScheduleChoice::ExternalRequest { process, layer } => process < n && external_admissible(config, process, layer),
    }
}

/// Whether nothing at all is enabled.
pub fn is_quiescent(config: &Configuration) -> bool {
    config.in_flight() == 0
        && (0..config.n()).all(|p| {
            let mut a = Vec::new();
            enabled_actions(config, p, &mut a);
            a.is_empty() && !external_admissible(config, p, config.setup.stack.top())
        })
}

/// Enqueues a process-sent message, stamping its ghost. A full channel drops it.
fn send(config: &mut Configuration, from: usize, to: usize, wire: Wire, events: &mut Vec<Event>) {
    let sender = &config.procs[from];
    let ghost = Ghost {
        origin: Origin::ProcessSent,
        computation_id: if sender.pif.request == Request::In { sender.ghost.pif_cid } else { None },
        sent_by: Some(from),
        seq: config.ghost.next_seq,
        feedback_for: sender.ghost.brd_cid[neighbor_slot(from, to)],
    };
    config.ghost.next_seq += 1;
    let message = Message { wire, ghost };
    let ch = config.channel_mut(from, to);
    let dropped = ch.is_full();
    if !dropped {
        ch.queue.push_back(message);
    }
    events.push(Event::Send { from, to, message, dropped });
}

fn mint(config: &mut Configuration) -> u64 {
    let cid = config.ghost.next_cid;
    config.ghost.next_cid += 1;
    cid
}

fn request_broadcast(config: &mut Configuration, p: usize, payload: Payload) {
    let pif = &mut config.procs[p].pif;
    pif.b_mes = payload;
    pif.request = Request::Wait;
}

fn fire(config: &mut Configuration, p: usize, action: Action, events: &mut Vec<Event>) {
    match action {
        Action::PifA1 => {
            config.procs[p].pif.start();
            let cid = mint(config);
            let ps = &mut config.procs[p];
            ps.ghost.pif_cid = Some(cid);
            events.push(Event::Start { at: p, layer: Layer::Pif, cid, payload: Some(ps.pif.b_mes) });
        }
        Action::PifA2 => match config.procs[p].pif.resend_or_decide() {
            Resend::Decided => events.push(Event::Decide { at: p, layer: Layer::Pif, cid: config.procs[p].ghost.pif_cid }),
            Resend::Sent(out) => {
                for (slot, wire) in out {
                    send(config, p, slot_process(p, slot), wire, events);
                }
            }
        },
        Action::IdlA1 => {
            let directive = config.procs[p].idl.as_mut().expect("IDL layer").start();
            request_broadcast(config, p, directive.broadcast);
            let cid = mint(config);
            config.procs[p].ghost.idl_cid = Some(cid);
            events.push(Event::Start { at: p, layer: Layer::Idl, cid, payload: None });
        }
        Action::IdlA2 => {
            let ps = &mut config.procs[p];
            ps.idl.as_mut().expect("IDL layer").terminate(ps.pif.request);
            events.push(Event::Decide { at: p, layer: Layer::Idl, cid: ps.ghost.idl_cid });
        }
        Action::MeCsExit => {
            let ps = &mut config.procs[p];
            let idl = ps.idl.as_ref().expect("IDL layer");
            let out = ps.me.as_mut().expect("ME layer").leave_cs(idl);
            let cid = ps.ghost.me_cid.take();
            events.push(Event::CsExit { at: p, cid });
            if let Some(payload) = out {
                request_broadcast(config, p, payload);
            }
        }
        _ => {
            let ps = &mut config.procs[p];
            let idl = ps.idl.as_ref().expect("IDL layer");
            let out = ps.me.as_mut().expect("ME layer").phase_step(idl, ps.pif.request);
            if out.started {
                let cid = mint(config);
                config.procs[p].ghost.me_cid = Some(cid);
                events.push(Event::Start { at: p, layer: Layer::Me, cid, payload: None });
            }
            if out.request_idl {
                config.procs[p].idl.as_mut().expect("IDL layer").request = Request::Wait;
            }
            if let Some(payload) = out.broadcast {
                request_broadcast(config, p, payload);
            }
            if out.entered_cs {
                events.push(Event::CsEnter { at: p, cid: config.procs[p].ghost.me_cid });
            }
        }
    }
}

fn deliver(config: &mut Configuration, from: usize, to: usize, msg: &Message, events: &mut Vec<Event>) {
    let n = config.n();
    let slot = neighbor_slot(to, from);
    let stack = config.setup.stack;
    let ps = &mut config.procs[to];
    let mut apps = Apps {
        stack,
        n,
        idl: ps.idl.as_mut(),
        me: ps.me.as_mut(),
    };
    let receipt = ps.pif.receive(slot, &msg.wire, &mut apps);
    for ev in &receipt.events {
        match ev.kind {
            PifEventKind::ReceiveBrd => {
                ps.ghost.brd_cid[slot] = msg.ghost.computation_id;
                events.push(Event::ReceiveBrd {
                    at: to,
                    from,
                    payload: ev.payload,
                    cid: msg.ghost.computation_id,
                    origin: msg.ghost.origin,
                });
            }
            PifEventKind::ReceiveFck => events.push(Event::ReceiveFck {
                at: to,
                from,
                payload: ev.payload,
                feedback_for: msg.ghost.feedback_for,
                origin: msg.ghost.origin,
            }),
        }
    }
    if let Some(reply) = receipt.reply {
        send(config, to, from, reply, events);
    }
}

/// Executes `choice` in place. Returns the message removed from a channel,
/// if any. Events are appended to `events`.
pub fn execute(config: &mut Configuration, choice: &ScheduleChoice, events: &mut Vec<Event>) -> Result<Option<Message>, Error> {
    if !is_admissible(config, choice) {
        return Err(Error::Inadmissible(choice.to_string()));
    }
    let removed = match *choice {
        ScheduleChoice::FireGuard { process, action } => {
            fire(config, process, action, events);
            None
        }
        ScheduleChoice::Deliver { from, to } => {
            let msg = config.channel_mut(from, to).queue.pop_front().expect("admissible deliver");
            deliver(config, from, to, &msg, events);
            Some(msg)
        }
        ScheduleChoice::Lose { from, to } => Some(config.channel_mut(from, to).queue.pop_front().expect("admissible lose")),
        ScheduleChoice::ExternalRequest { process, layer } => {
            let request_payload = config.env.request_payload;
            let ps = &mut config.procs[process];
            match layer {
                Layer::Pif => {
                    ps.pif.b_mes = request_payload;
                    ps.pif.request = Request::Wait;
                }
                Layer::Idl => ps.idl.as_mut().expect("IDL layer").request = Request::Wait,
                Layer::Me => ps.me.as_mut().expect("ME layer").request = Request::Wait,
            }
            config.env.pending[process] -= 1;
            events.push(Event::Request { at: process, layer });
            None
        }
    };
    debug_assert!(config.channels.iter().all(|c| c.queue.len() <= c.capacity));
    Ok(removed)
}

/// Pure form of [`execute`]: returns the successor and its trace record.
pub fn apply_step(config: &Configuration, choice: ScheduleChoice, step: u64) -> Result<(Configuration, TraceRecord), Error> {
    let mut next = config.clone();
    let mut events = Vec::new();
    let message = execute(&mut next, &choice, &mut events)?;
    let record = TraceRecord {
        step,
        choice,
        message,
        events,
        digest: digest(&next),
    };
    Ok((next, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::config::Setup;

    fn pif2() -> Configuration {
        Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap()
    }

    fn forged(b: Payload, s: u8, e: u8) -> Message {
        Message { wire: Wire::pif(b, b, s, e), ghost: Ghost::initial(0) }
    }

    #[test]
    fn quiescent_has_no_choices() {
        let c = pif2();
        assert!(enabled_choices(&c).is_empty());
        assert!(is_quiescent(&c));
    }

    #[test]
    fn wait_enables_a1() {
        let mut c = pif2();
        c.procs[0].pif.request = Request::Wait;
        assert!(enabled_choices(&c).contains(&ScheduleChoice::fire(0, Action::PifA1)));
    }

    #[test]
    fn nonempty_channel_enables_deliver_and_lose() {
        let mut c = pif2();
        c.channel_mut(1, 0).queue.push_back(forged(Payload::M, 0, 0));
        let ch = enabled_choices(&c);
        assert_eq!(ch, vec![ScheduleChoice::deliver(1, 0), ScheduleChoice::lose(1, 0)]);
    }

    #[test]
    fn a1_resets_flags_n3() {
        let mut c = Configuration::clean(Setup::new(3, Stack::Pif, 1)).unwrap();
        c.procs[1].pif.request = Request::Wait;
        c.procs[1].pif.state = vec![2, 3];
        let (next, rec) = apply_step(&c, ScheduleChoice::fire(1, Action::PifA1), 0).unwrap();
        assert_eq!(next.procs[1].pif.request, Request::In);
        assert_eq!(next.procs[1].pif.state, vec![0, 0]);
        assert!(matches!(rec.events[..], [Event::Start { at: 1, layer: Layer::Pif, cid: 1, .. }]));
    }

    #[test]
    fn lose_only_removes() {
        let mut c = pif2();
        c.channel_mut(1, 0).queue.push_back(forged(Payload::M, 0, 0));
        let (next, rec) = apply_step(&c, ScheduleChoice::lose(1, 0), 0).unwrap();
        assert!(next.channel(1, 0).queue.is_empty());
        assert_eq!(next.procs, c.procs);
        assert!(rec.message.is_some() && rec.events.is_empty());
    }

    #[test]
    fn send_into_full_channel_is_dropped() {
        let mut c = pif2();
        c.procs[0].pif.request = Request::In;
        c.channel_mut(0, 1).queue.push_back(forged(Payload::M_PRIME, 2, 2));
        let (next, rec) = apply_step(&c, ScheduleChoice::fire(0, Action::PifA2), 0).unwrap();
        assert_eq!(next.channel(0, 1).queue, c.channel(0, 1).queue);
        assert!(matches!(rec.events[..], [Event::Send { dropped: true, .. }]));
    }

    #[test]
    fn inadmissible_choice_rejected() {
        let c = pif2();
        assert!(apply_step(&c, ScheduleChoice::fire(0, Action::PifA2), 0).is_err());
        assert!(apply_step(&c, ScheduleChoice::deliver(0, 1), 0).is_err());
        assert!(apply_step(&c, ScheduleChoice::ExternalRequest { process: 0, layer: Layer::Pif }, 0).is_err());
    }

    #[test]
    fn sends_are_stamped_with_running_computation() {
        let mut c = pif2();
        c.env.pending[0] = 1;
        let mut events = Vec::new();
        for choice in [
            ScheduleChoice::ExternalRequest { process: 0, layer: Layer::Pif },
            ScheduleChoice::fire(0, Action::PifA1),
            ScheduleChoice::fire(0, Action::PifA2),
        ] {
            execute(&mut c, &choice, &mut events).unwrap();
        }
        let g = c.channel(0, 1).queue[0].ghost;
        assert_eq!(g.origin, Origin::ProcessSent);
        assert_eq!(g.computation_id, Some(1));
        assert_eq!(g.sent_by, Some(0));
        assert_eq!(c.procs[0].pif.b_mes, Payload::M);
    }

    #[test]
    fn idl_stack_routes_ids() {
        let mut c = Configuration::clean_with_ids(Setup::new(2, Stack::Idl, 1), &[7, 3]).unwrap();
        c.channel_mut(0, 1).queue.push_back(forged(Payload::Idl, 3, 0));
        let mut ev = Vec::new();
        execute(&mut c, &ScheduleChoice::deliver(0, 1), &mut ev).unwrap();
        assert_eq!(c.procs[1].pif.f_mes[0], Payload::Id(3));
        let reply = c.channel(1, 0).queue[0];
        assert_eq!(reply.wire.f_payload, Payload::Id(3));
    }

    #[test]
    fn corrupted_payload_gets_nil_feedback() {
        let mut c = Configuration::clean(Setup::new(2, Stack::Me, 1)).unwrap();
        c.procs[1].pif.f_mes[0] = Payload::Yes;
        c.channel_mut(0, 1).queue.push_back(forged(Payload::Sym(1), 3, 0));
        let mut ev = Vec::new();
        execute(&mut c, &ScheduleChoice::deliver(0, 1), &mut ev).unwrap();
        assert_eq!(c.procs[1].pif.f_mes[0], Payload::Nil);
    }
}
