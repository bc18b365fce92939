//! Deterministic in-memory message fabric.
//!
//! Delivery is synchronous, loss-free and FIFO: an envelope lands in its
//! recipients' inboxes before `send`/`broadcast` returns. Every envelope is
//! kept in an ordered log; the public projection of that log is what a
//! passive global eavesdropper observes.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::algebra::{BinaryVector, Matrix, Vector};
use crate::error::{usage, Error, Result};

/// Ring position `1..=n`, doubling as the participant's identity ("P3").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub usize);

impl ParticipantId {
    pub fn position(self) -> usize {
        self.0
    }

    /// Index into zero-based per-participant vectors.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    /// Ring successor: `(j mod n) + 1`.
    pub fn successor(self, n: usize) -> ParticipantId {
        ParticipantId(self.0 % n + 1)
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Dealer,
    Participant(ParticipantId),
    Broadcast,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Dealer => f.write_str("dealer"),
            Endpoint::Participant(p) => p.fmt(f),
            Endpoint::Broadcast => f.write_str("broadcast"),
        }
    }
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dealer" => Ok(Endpoint::Dealer),
            "broadcast" => Ok(Endpoint::Broadcast),
            _ => s
                .strip_prefix('P')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&p| p >= 1)
                .map(|p| Endpoint::Participant(ParticipantId(p)))
                .ok_or_else(|| Error::Format(format!("unknown endpoint {s:?}"))),
        }
    }
}

impl From<ParticipantId> for Endpoint {
    fn from(p: ParticipantId) -> Self {
        Endpoint::Participant(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Secure,
}

/// Message body. The variant determines the `kind` tag on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    /// Dealer tells a participant which public matrix is its shadow.
    ShareIndex(usize),
    /// Dealer hands a participant its private check vector.
    CheckVector(BinaryVector),
    /// Running product forwarded along the verification chain.
    ChainVector(Vector),
    Verdict(bool),
    /// Running blinded product revealed during reconstruction.
    Reveal(Matrix),
    /// Final reconstruction product returned to the round's starter.
    Handback(Matrix),
    /// Starter's private record of the secret it recovered.
    Recovered(Matrix),
    Abort(String),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::ShareIndex(_) => "share_index",
            Payload::CheckVector(_) => "check_vector",
            Payload::ChainVector(_) => "chain_vector",
            Payload::Verdict(_) => "verdict",
            Payload::Reveal(_) => "reveal",
            Payload::Handback(_) => "handback",
            Payload::Recovered(_) => "recovered",
            Payload::Abort(_) => "abort",
        }
    }

    fn to_value(&self) -> serde_json::Result<Value> {
        match self {
            Payload::ShareIndex(i) => serde_json::to_value(i),
            Payload::CheckVector(u) => serde_json::to_value(u),
            Payload::ChainVector(v) => serde_json::to_value(v),
            Payload::Verdict(b) => serde_json::to_value(b),
            Payload::Reveal(m) | Payload::Handback(m) | Payload::Recovered(m) => {
                serde_json::to_value(m)
            }
            Payload::Abort(reason) => serde_json::to_value(reason),
        }
    }

    fn from_value(kind: &str, value: Value) -> Result<Self> {
        Ok(match kind {
            "share_index" => Payload::ShareIndex(serde_json::from_value(value)?),
            "check_vector" => Payload::CheckVector(serde_json::from_value(value)?),
            "chain_vector" => Payload::ChainVector(serde_json::from_value(value)?),
            "verdict" => Payload::Verdict(serde_json::from_value(value)?),
            "reveal" => Payload::Reveal(serde_json::from_value(value)?),
            "handback" => Payload::Handback(serde_json::from_value(value)?),
            "recovered" => Payload::Recovered(serde_json::from_value(value)?),
            "abort" => Payload::Abort(serde_json::from_value(value)?),
            other => return Err(Error::Format(format!("unknown message kind {other:?}"))),
        })
    }

    pub fn as_matrix(&self) -> Option<&Matrix> {
        match self {
            Payload::Reveal(m) | Payload::Handback(m) | Payload::Recovered(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub step: u64,
    pub from: Endpoint,
    pub to: Endpoint,
    pub visibility: Visibility,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
struct RawEnvelope {
    step: u64,
    from: String,
    to: String,
    visibility: Visibility,
    kind: String,
    payload: Value,
}

impl Serialize for Envelope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawEnvelope {
            step: self.step,
            from: self.from.to_string(),
            to: self.to.to_string(),
            visibility: self.visibility,
            kind: self.payload.kind().to_owned(),
            payload: self.payload.to_value().map_err(serde::ser::Error::custom)?,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawEnvelope::deserialize(deserializer)?;
        Ok(Envelope {
            step: raw.step,
            from: raw.from.parse().map_err(D::Error::custom)?,
            to: raw.to.parse().map_err(D::Error::custom)?,
            visibility: raw.visibility,
            payload: Payload::from_value(&raw.kind, raw.payload).map_err(D::Error::custom)?,
        })
    }
}

/// Ordered log of every envelope of one or more runs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(rename = "events")]
    pub envelopes: Vec<Envelope>,
}

impl Transcript {
    /// The public envelopes, in order.
    pub fn eavesdropper_view(&self) -> Vec<&Envelope> {
        self.envelopes
            .iter()
            .filter(|e| e.visibility == Visibility::Public)
            .collect()
    }

    pub fn next_step(&self) -> u64 {
        self.envelopes.last().map_or(0, |e| e.step + 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Transcript = serde_json::from_str(s)?;
        if t.envelopes.windows(2).any(|w| w[0].step >= w[1].step) {
            return Err(Error::Format("transcript steps must strictly increase".into()));
        }
        Ok(t)
    }
}

/// Message fabric for a ring of `n` participants plus the dealer.
#[derive(Debug)]
pub struct Transport {
    n: usize,
    log: Vec<Envelope>,
    next_step: u64,
    inboxes: Vec<VecDeque<usize>>,
}

impl Transport {
    pub fn new(n: usize) -> Self {
        Self::resume(n, Transcript::default())
    }

    /// Continues an existing transcript; new envelopes get later steps.
    pub fn resume(n: usize, transcript: Transcript) -> Self {
        let next_step = transcript.next_step();
        Transport {
            n,
            log: transcript.envelopes,
            next_step,
            inboxes: vec![VecDeque::new(); n],
        }
    }

    pub fn participants(&self) -> usize {
        self.n
    }

    fn check_participant(&self, p: ParticipantId) -> Result<()> {
        if p.0 == 0 || p.0 > self.n {
            return Err(usage(format!("unknown participant {p} (ring has {} members)", self.n)));
        }
        Ok(())
    }

    fn check_sender(&self, from: Endpoint) -> Result<()> {
        match from {
            Endpoint::Dealer => Ok(()),
            Endpoint::Participant(p) => self.check_participant(p),
            Endpoint::Broadcast => Err(usage("broadcast is not a sender")),
        }
    }

    fn append(&mut self, from: Endpoint, to: Endpoint, visibility: Visibility, payload: Payload) -> usize {
        let step = self.next_step;
        self.next_step += 1;
        self.log.push(Envelope {
            step,
            from,
            to,
            visibility,
            payload,
        });
        self.log.len() - 1
    }

    /// Point-to-point delivery to one participant.
    pub fn send(
        &mut self,
        from: Endpoint,
        to: ParticipantId,
        visibility: Visibility,
        payload: Payload,
    ) -> Result<u64> {
        self.check_sender(from)?;
        self.check_participant(to)?;
        let at = self.append(from, to.into(), visibility, payload);
        self.inboxes[to.index()].push_back(at);
        Ok(self.log[at].step)
    }

    /// Public delivery to every participant and the eavesdropper.
    pub fn broadcast(&mut self, from: Endpoint, payload: Payload) -> Result<u64> {
        self.check_sender(from)?;
        let at = self.append(from, Endpoint::Broadcast, Visibility::Public, payload);
        for inbox in &mut self.inboxes {
            inbox.push_back(at);
        }
        Ok(self.log[at].step)
    }

    /// Records an event a participant keeps for itself; nothing is delivered.
    pub fn record_local(&mut self, who: ParticipantId, payload: Payload) -> Result<u64> {
        self.check_participant(who)?;
        let at = self.append(who.into(), who.into(), Visibility::Secure, payload);
        Ok(self.log[at].step)
    }

    /// Pops the oldest undelivered envelope for `p`.
    pub fn recv(&mut self, p: ParticipantId) -> Option<Envelope> {
        let idx = *self.inboxes.get(p.index())?.front()?;
        self.inboxes[p.index()].pop_front();
        Some(self.log[idx].clone())
    }

    /// Drains every pending envelope for `p`.
    pub fn drain(&mut self, p: ParticipantId) -> Vec<Envelope> {
        std::iter::from_fn(|| self.recv(p)).collect()
    }

    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    /// Log entries with step at or after `step`.
    pub fn since(&self, step: u64) -> impl Iterator<Item = &Envelope> {
        self.log.iter().filter(move |e| e.step >= step)
    }

    pub fn next_step(&self) -> u64 {
        self.next_step
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            envelopes: self.log.clone(),
        }
    }

    pub fn into_transcript(self) -> Transcript {
        Transcript {
            envelopes: self.log,
        }
    }
}
