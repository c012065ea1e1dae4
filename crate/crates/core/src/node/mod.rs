//! The per-node actor: sensor-first scheduling over round-robin LIFO peer
//! queues, the gated random sharing protocol and logical-clock versioning.

mod message;
mod queue;

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

pub use message::{encoded_len, CodecError, GossipMessage, NodeId};
pub use queue::{PeerQueue, QueuePolicy};

use crate::compress::{compress_model_report, CompressionConfig};
use crate::metrics::{F1Mode, Prequential};
use crate::prototype::{IlvqParams, Label, Prototype, PrototypeModel, Sample};
use crate::similarity::{is_it_worthy, KdeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NodeError {
    #[error("invalid node configuration: {0}")]
    InvalidConfig(String),
    #[error("node {0} received its own message")]
    SelfMessage(NodeId),
    #[error("message from unknown node {0}")]
    UnknownSender(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareParams {
    /// Number of neighbours drawn per sharing round.
    pub s: usize,
    /// Probability of sharing after a sensor update.
    pub t_share: f64,
    pub th_jsd: f64,
    /// When false every selected neighbour is considered worthy.
    pub gate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub n_nodes: usize,
    pub share: ShareParams,
    pub queue: QueuePolicy,
    pub kde: KdeConfig,
    pub ilvq: IlvqParams,
    pub compression: Option<CompressionConfig>,
    /// Compress after each absorbed peer prototype when over the cap.
    pub compress_on_queue: bool,
    /// Compress the local model before sending when over the cap.
    pub compress_on_share: bool,
    pub f1_mode: F1Mode,
}

impl NodeConfig {
    pub fn validate(&self) -> Result<(), NodeError> {
        let bad = |m: String| Err(NodeError::InvalidConfig(m));
        if self.n_nodes == 0 {
            return bad("need at least one node".into());
        }
        if self.share.s > self.n_nodes - 1 {
            return bad(format!(
                "s = {} exceeds the {} available neighbours",
                self.share.s,
                self.n_nodes - 1
            ));
        }
        if !(0.0..=1.0).contains(&self.share.t_share) {
            return bad(format!(
                "sharing probability {} outside [0, 1]",
                self.share.t_share
            ));
        }
        if !(self.share.th_jsd >= 0.0) {
            return bad(format!(
                "JSD threshold {} must be non-negative",
                self.share.th_jsd
            ));
        }
        if let Some(c) = &self.compression {
            c.validate()
                .map_err(|e| NodeError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

pub type Outgoing = (NodeId, GossipMessage);

#[derive(Debug, Clone, Default)]
pub struct SensorEffects {
    /// Label predicted before training, if the model existed.
    pub predicted: Option<Label>,
    pub trained: bool,
    pub messages: Vec<Outgoing>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeCounters {
    pub bytes_sent: u64,
    pub messages_sent: u64,
    pub prototypes_trained: u64,
    pub compressions: u64,
    /// Largest model size seen right before a compression.
    pub max_pre_compression: usize,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    id: NodeId,
    cfg: NodeConfig,
    model: Option<PrototypeModel>,
    pending: Option<Sample>,
    peer_queues: Vec<PeerQueue>,
    rr_cursor: usize,
    logical_clock: u64,
    known_versions: Vec<u64>,
    peer_snapshots: Vec<Option<Arc<[Prototype]>>>,
    counters: NodeCounters,
    prequential: Prequential,
}

impl NodeState {
    pub fn new(id: NodeId, cfg: NodeConfig) -> Result<Self, NodeError> {
        cfg.validate()?;
        if id as usize >= cfg.n_nodes {
            return Err(NodeError::InvalidConfig(format!(
                "node id {id} out of range"
            )));
        }
        let n = cfg.n_nodes;
        Ok(Self {
            id,
            model: None,
            pending: None,
            peer_queues: vec![PeerQueue::new(cfg.queue); n - 1],
            rr_cursor: 0,
            logical_clock: 0,
            known_versions: vec![0; n],
            peer_snapshots: vec![None; n],
            counters: NodeCounters::default(),
            prequential: Prequential::new(cfg.f1_mode),
            cfg,
        })
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn model(&self) -> Option<&PrototypeModel> {
        self.model.as_ref()
    }

    pub fn logical_clock(&self) -> u64 {
        self.logical_clock
    }

    pub fn rr_cursor(&self) -> usize {
        self.rr_cursor
    }

    pub fn counters(&self) -> &NodeCounters {
        &self.counters
    }

    pub fn prequential(&self) -> &Prequential {
        &self.prequential
    }

    pub fn known_version(&self, peer: NodeId) -> u64 {
        self.known_versions.get(peer as usize).copied().unwrap_or(0)
    }

    pub fn peer_snapshot(&self, peer: NodeId) -> Option<&Arc<[Prototype]>> {
        self.peer_snapshots
            .get(peer as usize)
            .and_then(Option::as_ref)
    }

    /// Neighbour ids in queue-slot order.
    pub fn neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.cfg.n_nodes as NodeId).filter(move |&j| j != self.id)
    }

    fn slot_of(&self, peer: NodeId) -> usize {
        if peer < self.id {
            peer as usize
        } else {
            peer as usize - 1
        }
    }

    fn peer_of(&self, slot: usize) -> NodeId {
        if (slot as NodeId) < self.id {
            slot as NodeId
        } else {
            slot as NodeId + 1
        }
    }

    pub fn queue(&self, peer: NodeId) -> Option<&PeerQueue> {
        (peer != self.id && (peer as usize) < self.cfg.n_nodes)
            .then(|| &self.peer_queues[self.slot_of(peer)])
    }

    pub fn queued_prototypes(&self) -> usize {
        self.peer_queues.iter().map(PeerQueue::len).sum()
    }

    pub fn has_peer_work(&self) -> bool {
        self.peer_queues.iter().any(|q| !q.is_empty())
    }

    fn dimension_ok(&self, x: &[f64]) -> bool {
        match (&self.model, &self.pending) {
            (Some(m), _) => m.dimension() == x.len(),
            (None, Some(p)) => p.features.len() == x.len(),
            (None, None) => !x.is_empty(),
        }
    }

    /// Feeds one sample (sensor or peer prototype) to the learner. The first
    /// two samples initialize the model and set the clock to 1.
    fn absorb(&mut self, x: Sample, now: f64) -> bool {
        if let Some(model) = self.model.as_mut() {
            model.set_tick(now);
            return match model.train_one(&x) {
                Ok(_) => {
                    self.logical_clock += 1;
                    self.counters.prototypes_trained += 1;
                    true
                }
                Err(e) => {
                    log::debug!("node {}: dropping sample ({e})", self.id);
                    false
                }
            };
        }
        match self.pending.take() {
            None => {
                self.pending = Some(x);
                false
            }
            Some(first) => match PrototypeModel::init(&first, &x, self.cfg.ilvq) {
                Ok(mut m) => {
                    m.set_tick(now);
                    self.model = Some(m);
                    self.logical_clock = 1;
                    true
                }
                Err(e) => {
                    log::debug!("node {}: dropping sample ({e})", self.id);
                    self.pending = Some(first);
                    false
                }
            },
        }
    }

    fn compress_if_needed(&mut self) {
        let Some(cfg) = &self.cfg.compression else {
            return;
        };
        let Some(model) = &self.model else { return };
        if model.len() <= cfg.limit_size {
            return;
        }
        self.counters.max_pre_compression = self.counters.max_pre_compression.max(model.len());
        let (compressed, _) = compress_model_report(model, cfg);
        self.counters.compressions += 1;
        self.model = Some(compressed);
    }

    /// Test-then-train on a sensor sample, followed by a sharing attempt.
    pub fn on_sensor_sample<R: Rng + ?Sized>(
        &mut self,
        sample: Sample,
        now: f64,
        rng: &mut R,
    ) -> SensorEffects {
        if !self.dimension_ok(&sample.features) {
            log::warn!(
                "node {}: dropping sensor sample with dimension {}",
                self.id,
                sample.features.len()
            );
            return SensorEffects::default();
        }
        let predicted = self.model.as_mut().and_then(|m| {
            let p = m.record_prediction(&sample.features, sample.label).ok()?;
            Some(p)
        });
        if let Some(p) = predicted {
            self.prequential.update(sample.label, p);
        }
        let trained = self.absorb(sample, now);
        let messages = self.try_share(now, rng);
        SensorEffects {
            predicted,
            trained,
            messages,
        }
    }

    /// One scheduler quantum: serves a single prototype from the next
    /// non-empty peer queue in round-robin order.
    pub fn idle_step<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> bool {
        let k = self.peer_queues.len();
        if k == 0 {
            return false;
        }
        let start = (self.rr_cursor + 1) % k;
        let Some(slot) = (0..k)
            .map(|off| (start + off) % k)
            .find(|&s| !self.peer_queues[s].is_empty())
        else {
            self.rr_cursor = start;
            return false;
        };
        self.rr_cursor = slot;
        let proto = self.peer_queues[slot]
            .pop_random(rng)
            .expect("queue is non-empty");
        if self.dimension_ok(&proto.vector) {
            self.absorb(proto.to_sample(), now);
            if self.cfg.compress_on_queue {
                self.compress_if_needed();
            }
        } else {
            log::warn!(
                "node {}: dropping peer prototype with wrong dimension",
                self.id
            );
        }
        true
    }

    pub fn enqueue_peer_model(&mut self, msg: &GossipMessage) -> Result<(), NodeError> {
        if msg.sender == self.id {
            return Err(NodeError::SelfMessage(self.id));
        }
        if msg.sender as usize >= self.cfg.n_nodes {
            return Err(NodeError::UnknownSender(msg.sender));
        }
        let slot = self.slot_of(msg.sender);
        self.peer_queues[slot].push(msg.prototypes.clone());
        let known = &mut self.known_versions[msg.sender as usize];
        *known = (*known).max(msg.version);
        self.peer_snapshots[msg.sender as usize] = Some(msg.prototypes.clone());
        Ok(())
    }

    /// Randomized, gated sharing round.
    pub fn try_share<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Vec<Outgoing> {
        let share = self.cfg.share;
        if !(rng.random::<f64>() < share.t_share) || share.s == 0 || self.model.is_none() {
            return Vec::new();
        }
        let mut selected: Vec<NodeId> =
            rand::seq::index::sample(rng, self.cfg.n_nodes - 1, share.s)
                .into_iter()
                .map(|slot| self.peer_of(slot))
                .collect();
        selected.sort_unstable();

        if self.cfg.compress_on_share {
            self.compress_if_needed();
        }
        let model = self.model.as_ref().expect("checked above");
        let empty: &[Prototype] = &[];
        let recipients: Vec<NodeId> = selected
            .into_iter()
            .filter(|&peer| {
                !share.gate || {
                    let known = self.peer_snapshots[peer as usize]
                        .as_deref()
                        .unwrap_or(empty);
                    is_it_worthy(model.prototypes(), known, share.th_jsd, &self.cfg.kde, rng)
                }
            })
            .collect();
        if recipients.is_empty() {
            return Vec::new();
        }

        let snapshot: Arc<[Prototype]> = model.prototypes().into();
        let msg = GossipMessage {
            sender: self.id,
            version: self.logical_clock,
            prototypes: snapshot.clone(),
            send_tick: now,
        };
        let bytes = msg.encoded_len() as u64;
        recipients
            .into_iter()
            .map(|peer| {
                self.peer_snapshots[peer as usize] = Some(snapshot.clone());
                self.counters.bytes_sent += bytes;
                self.counters.messages_sent += 1;
                (peer, msg.clone())
            })
            .collect()
    }
}
