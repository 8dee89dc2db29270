//! Tick-quantized message network with per-link latency, jitter and loss.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consensus::TrackMessage;
use crate::geometry::RobotId;
use crate::rng::{link_stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: RobotId,
    pub to: RobotId,
    /// Ticks.
    pub base_latency: u64,
    /// Ticks; samples are truncated at zero and rounded.
    #[serde(default)]
    pub jitter_std: f64,
    #[serde(default)]
    pub drop_prob: f64,
}

impl LinkSpec {
    pub fn new(from: RobotId, to: RobotId, base_latency: u64) -> Self {
        Self { from, to, base_latency, jitter_std: 0.0, drop_prob: 0.0 }
    }

    pub fn collect_violations(&self, key: &str, out: &mut Vec<String>) {
        if !(self.jitter_std >= 0.0) || !self.jitter_std.is_finite() {
            out.push(format!("{key}.jitter_std: must be >= 0 (got {})", self.jitter_std));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            out.push(format!("{key}.drop_prob: must be in [0, 1] (got {})", self.drop_prob));
        }
        if self.from == self.to {
            out.push(format!("{key}: self-loop {} -> {}", self.from, self.to));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub payload: TrackMessage,
    pub send_tick: u64,
    pub deliver_tick: u64,
}

/// Samples the delivery tick of one message, or `None` if it is dropped.
pub fn send<R: Rng>(link: &LinkSpec, tick: u64, rng: &mut R) -> Option<u64> {
    if link.drop_prob > 0.0 && rng.random::<f64>() < link.drop_prob {
        return None;
    }
    let jitter = match Normal::new(0.0, link.jitter_std) {
        Ok(n) if link.jitter_std > 0.0 => n.sample(rng).max(0.0).round() as u64,
        _ => 0,
    };
    Some(tick + link.base_latency + jitter)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl LinkCounters {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

#[derive(Debug)]
struct Link {
    spec: LinkSpec,
    rng: SimRng,
    counters: LinkCounters,
}

#[derive(Debug)]
struct Queued {
    envelope: Envelope,
    link: usize,
    seq: u64,
}

/// All links plus one inbox per destination robot.
#[derive(Debug)]
pub struct Network {
    links: Vec<Link>,
    inboxes: BTreeMap<RobotId, Vec<Queued>>,
    seq: u64,
}

impl Network {
    pub fn new(links: &[LinkSpec], seed: u64) -> Self {
        let links = links
            .iter()
            .map(|spec| Link {
                spec: spec.clone(),
                rng: link_stream(seed, spec.from.0, spec.to.0),
                counters: LinkCounters::default(),
            })
            .collect();
        Self { links, inboxes: BTreeMap::new(), seq: 0 }
    }

    /// Sends `msg` over every outgoing link of its sender.
    pub fn broadcast(&mut self, msg: &TrackMessage, tick: u64) {
        for i in 0..self.links.len() {
            if self.links[i].spec.from == msg.sender {
                self.send_on(i, msg.clone(), tick);
            }
        }
    }

    /// Sends over link `index`; returns the scheduled envelope unless dropped.
    pub fn send_on(&mut self, index: usize, msg: TrackMessage, tick: u64) -> Option<&Envelope> {
        let link = &mut self.links[index];
        link.counters.sent += 1;
        let Some(deliver_tick) = send(&link.spec, tick, &mut link.rng) else {
            link.counters.dropped += 1;
            return None;
        };
        self.seq += 1;
        let inbox = self.inboxes.entry(link.spec.to).or_default();
        inbox.push(Queued {
            envelope: Envelope { payload: msg, send_tick: tick, deliver_tick },
            link: index,
            seq: self.seq,
        });
        inbox.last().map(|q| &q.envelope)
    }

    /// Removes and returns every message due at or before `tick`, ordered
    /// by delivery tick, send tick, sender, then send order.
    pub fn poll(&mut self, robot: RobotId, tick: u64) -> Vec<TrackMessage> {
        let Some(inbox) = self.inboxes.get_mut(&robot) else {
            return Vec::new();
        };
        let (mut due, rest): (Vec<Queued>, Vec<Queued>) =
            std::mem::take(inbox).into_iter().partition(|q| q.envelope.deliver_tick <= tick);
        *inbox = rest;
        due.sort_by_key(|q| (q.envelope.deliver_tick, q.envelope.send_tick, q.envelope.payload.sender, q.seq));
        for q in &due {
            self.links[q.link].counters.delivered += 1;
        }
        due.into_iter().map(|q| q.envelope.payload).collect()
    }

    pub fn counters(&self) -> Vec<(LinkSpec, LinkCounters)> {
        self.links.iter().map(|l| (l.spec.clone(), l.counters)).collect()
    }

    pub fn pending(&self) -> usize {
        self.inboxes.values().map(Vec::len).sum()
    }
}
