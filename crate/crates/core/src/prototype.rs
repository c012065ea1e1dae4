//! Prototype dictionaries and the incremental LVQ learner.
//!
//! A [`PrototypeModel`] holds the prototype set, the topological edges
//! between prototypes and the per-class sample counts. Samples are absorbed
//! one at a time with [`PrototypeModel::train_one`], which either inserts the
//! sample as a new prototype or adapts the winner and its neighbours.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub type Label = i32;
pub type PrototypeId = u64;

/// A labeled feature vector from a data stream (or a prototype fed back as
/// training data).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

impl AsRef<[f64]> for Sample {
    fn as_ref(&self) -> &[f64] {
        &self.features
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub id: PrototypeId,
    pub vector: Vec<f64>,
    pub label: Label,
    /// Number of successful predictions credited to this prototype.
    pub relevance: u64,
    pub creation_tick: f64,
}

impl Prototype {
    pub fn to_sample(&self) -> Sample {
        Sample::new(self.vector.clone(), self.label)
    }
}

impl AsRef<[f64]> for Prototype {
    fn as_ref(&self) -> &[f64] {
        &self.vector
    }
}

/// Unordered edge between two prototypes, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey(PrototypeId, PrototypeId);

impl EdgeKey {
    pub fn new(a: PrototypeId, b: PrototypeId) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn endpoints(&self) -> (PrototypeId, PrototypeId) {
        (self.0, self.1)
    }

    pub fn touches(&self, id: PrototypeId) -> bool {
        self.0 == id || self.1 == id
    }

    pub fn other(&self, id: PrototypeId) -> Option<PrototypeId> {
        if self.0 == id {
            Some(self.1)
        } else if self.1 == id {
            Some(self.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlvqParams {
    /// Edges whose age reaches this value are dropped.
    pub max_edge_age: u32,
    /// Number of absorbed samples between denoising passes.
    pub denoise_period: u64,
    /// Floor for the winner learning rate.
    pub min_winner_rate: f64,
    /// Neighbour rate as a fraction of the winner rate.
    pub neighbor_rate_ratio: f64,
}

impl Default for IlvqParams {
    fn default() -> Self {
        Self {
            max_edge_age: 50,
            denoise_period: 100,
            min_winner_rate: 0.01,
            neighbor_rate_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature vectors must have at least one dimension")]
    ZeroDimension,
    #[error("model has {len} prototypes, at least 2 are required")]
    InsufficientModel { len: usize },
    #[error("model has no prototypes")]
    EmptyModel,
    #[error("edge references unknown prototype {0}")]
    DanglingEdge(PrototypeId),
    #[error("duplicate prototype id {0}")]
    DuplicateId(PrototypeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainOutcome {
    Inserted,
    Adapted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    prototypes: Vec<Prototype>,
    edges: BTreeMap<EdgeKey, u32>,
    class_counts: BTreeMap<Label, u64>,
    dimension: usize,
    params: IlvqParams,
    next_id: PrototypeId,
    since_denoise: u64,
    tick: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

impl PrototypeModel {
    /// Seeds a model with its first two samples, unconditionally.
    pub fn init(a: &Sample, b: &Sample, params: IlvqParams) -> Result<Self, ModelError> {
        let dimension = a.features.len();
        if dimension == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if b.features.len() != dimension {
            return Err(ModelError::DimensionMismatch {
                expected: dimension,
                found: b.features.len(),
            });
        }
        let mut model = Self {
            prototypes: Vec::with_capacity(2),
            edges: BTreeMap::new(),
            class_counts: BTreeMap::new(),
            dimension,
            params,
            next_id: 0,
            since_denoise: 0,
            tick: 0.0,
        };
        model.insert(a);
        model.insert(b);
        Ok(model)
    }

    /// Assembles a model from explicit parts, checking the structural
    /// invariants. The id counter starts above the largest id present.
    pub fn from_parts(
        prototypes: Vec<Prototype>,
        edges: impl IntoIterator<Item = (EdgeKey, u32)>,
        class_counts: BTreeMap<Label, u64>,
        dimension: usize,
        params: IlvqParams,
    ) -> Result<Self, ModelError> {
        if dimension == 0 {
            return Err(ModelError::ZeroDimension);
        }
        let mut ids = BTreeSet::new();
        for p in &prototypes {
            if p.vector.len() != dimension {
                return Err(ModelError::DimensionMismatch {
                    expected: dimension,
                    found: p.vector.len(),
                });
            }
            if !ids.insert(p.id) {
                return Err(ModelError::DuplicateId(p.id));
            }
        }
        let edges: BTreeMap<EdgeKey, u32> = edges.into_iter().collect();
        for key in edges.keys() {
            let (a, b) = key.endpoints();
            for id in [a, b] {
                if !ids.contains(&id) {
                    return Err(ModelError::DanglingEdge(id));
                }
            }
        }
        let next_id = ids.iter().next_back().map_or(0, |m| m + 1);
        Ok(Self {
            prototypes,
            edges,
            class_counts,
            dimension,
            params,
            next_id,
            since_denoise: 0,
            tick: 0.0,
        })
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, u32)> + '_ {
        self.edges.iter().map(|(k, a)| (*k, *a))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_age(&self, a: PrototypeId, b: PrototypeId) -> Option<u32> {
        self.edges.get(&EdgeKey::new(a, b)).copied()
    }

    pub fn class_counts(&self) -> &BTreeMap<Label, u64> {
        &self.class_counts
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn params(&self) -> &IlvqParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn total_relevance(&self) -> u64 {
        self.prototypes.iter().map(|p| p.relevance).sum()
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.prototypes.iter().map(|p| p.label).collect()
    }

    pub fn get(&self, id: PrototypeId) -> Option<&Prototype> {
        self.position(id).map(|i| &self.prototypes[i])
    }

    /// Sets the simulation time stamped on newly inserted prototypes.
    pub fn set_tick(&mut self, tick: f64) {
        self.tick = tick;
    }

    /// Reserves a fresh prototype id.
    pub fn allocate_id(&mut self) -> PrototypeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub(crate) fn next_id(&self) -> PrototypeId {
        self.next_id
    }

    pub fn since_denoise(&self) -> u64 {
        self.since_denoise
    }

    /// Replaces prototypes and edges wholesale, keeping class counts and
    /// learner state. Used by the compressor.
    pub(crate) fn rebuild(
        &self,
        prototypes: Vec<Prototype>,
        edges: BTreeMap<EdgeKey, u32>,
        next_id: PrototypeId,
    ) -> Self {
        Self {
            prototypes,
            edges,
            class_counts: self.class_counts.clone(),
            dimension: self.dimension,
            params: self.params,
            next_id: next_id.max(self.next_id),
            since_denoise: self.since_denoise,
            tick: self.tick,
        }
    }

    pub fn neighbors(&self, id: PrototypeId) -> Vec<PrototypeId> {
        self.edges.keys().filter_map(|k| k.other(id)).collect()
    }

    fn position(&self, id: PrototypeId) -> Option<usize> {
        self.prototypes.iter().position(|p| p.id == id)
    }

    fn check_dimension(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dimension {
            return Err(ModelError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn insert(&mut self, x: &Sample) -> PrototypeId {
        let id = self.allocate_id();
        self.prototypes.push(Prototype {
            id,
            vector: x.features.clone(),
            label: x.label,
            relevance: 0,
            creation_tick: self.tick,
        });
        *self.class_counts.entry(x.label).or_insert(0) += 1;
        id
    }

    /// Index of the nearest prototype, ties broken by lowest id.
    fn nearest_index(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, PrototypeId, usize)> = None;
        for (i, p) in self.prototypes.iter().enumerate() {
            let d = squared_distance(&p.vector, x);
            let better = match best {
                None => true,
                Some((bd, bid, _)) => d < bd || (d == bd && p.id < bid),
            };
            if better {
                best = Some((d, p.id, i));
            }
        }
        best.map(|(_, _, i)| i)
    }

    fn winner_indices(&self, x: &[f64]) -> Result<(usize, usize), ModelError> {
        if self.prototypes.len() < 2 {
            return Err(ModelError::InsufficientModel {
                len: self.prototypes.len(),
            });
        }
        self.check_dimension(x)?;
        let key = |i: usize| {
            (
                squared_distance(&self.prototypes[i].vector, x),
                self.prototypes[i].id,
            )
        };
        let less =
            |a: (f64, PrototypeId), b: (f64, PrototypeId)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
        let (mut first, mut second) = if less(key(0), key(1)) { (0, 1) } else { (1, 0) };
        for i in 2..self.prototypes.len() {
            let k = key(i);
            if less(k, key(first)) {
                second = first;
                first = i;
            } else if less(k, key(second)) {
                second = i;
            }
        }
        Ok((first, second))
    }

    /// Winner and runner-up prototype ids for `x` (Euclidean, ties by id).
    pub fn find_winners(&self, x: &[f64]) -> Result<(PrototypeId, PrototypeId), ModelError> {
        let (a, b) = self.winner_indices(x)?;
        Ok((self.prototypes[a].id, self.prototypes[b].id))
    }

    /// Adaptive insertion threshold of a prototype: the largest distance to
    /// an edge neighbour, or the distance to the nearest other prototype when
    /// it has no edges.
    pub fn insertion_threshold(&self, id: PrototypeId) -> f64 {
        let Some(p) = self.get(id) else { return 0.0 };
        let mut neighbor_max: Option<f64> = None;
        for key in self.edges.keys() {
            if let Some(other) = key.other(id) {
                if let Some(q) = self.get(other) {
                    let d = euclidean(&p.vector, &q.vector);
                    neighbor_max = Some(neighbor_max.map_or(d, |m: f64| m.max(d)));
                }
            }
        }
        neighbor_max.unwrap_or_else(|| {
            self.prototypes
                .iter()
                .filter(|q| q.id != id)
                .map(|q| euclidean(&p.vector, &q.vector))
                .fold(f64::INFINITY, f64::min)
        })
    }

    pub fn should_insert(&self, x: &Sample, winner: PrototypeId, runner_up: PrototypeId) -> bool {
        if !self.class_counts.contains_key(&x.label) {
            return true;
        }
        [winner, runner_up]
            .into_iter()
            .any(|id| match self.get(id) {
                Some(p) => euclidean(&x.features, &p.vector) > self.insertion_threshold(id),
                None => true,
            })
    }

    /// Absorbs one labeled sample.
    pub fn train_one(&mut self, x: &Sample) -> Result<TrainOutcome, ModelError> {
        self.check_dimension(&x.features)?;
        self.since_denoise += 1;
        if self.prototypes.len() < 2 {
            self.insert(x);
            return Ok(TrainOutcome::Inserted);
        }
        let (wi, ri) = self.winner_indices(&x.features)?;
        let (s1, s2) = (self.prototypes[wi].id, self.prototypes[ri].id);
        if self.should_insert(x, s1, s2) {
            self.insert(x);
            return Ok(TrainOutcome::Inserted);
        }

        self.edges.entry(EdgeKey::new(s1, s2)).or_insert(0);
        for (key, age) in self.edges.iter_mut() {
            if key.touches(s1) {
                *age += 1;
            }
        }
        *self.class_counts.entry(x.label).or_insert(0) += 1;

        let winner = &self.prototypes[wi];
        let winner_rate = (1.0 / (1.0 + winner.relevance as f64)).max(self.params.min_winner_rate);
        let neighbor_rate = winner_rate * self.params.neighbor_rate_ratio;
        let winner_agrees = winner.label == x.label;

        let neighbors = self.neighbors(s1);
        if winner_agrees {
            attract(&mut self.prototypes[wi].vector, &x.features, winner_rate);
            self.prototypes[wi].relevance += 1;
        } else {
            attract(&mut self.prototypes[wi].vector, &x.features, -winner_rate);
        }
        for n in neighbors {
            let Some(ni) = self.position(n) else { continue };
            let same = self.prototypes[ni].label == x.label;
            if winner_agrees && !same {
                attract(&mut self.prototypes[ni].vector, &x.features, -neighbor_rate);
            } else if !winner_agrees && same {
                attract(&mut self.prototypes[ni].vector, &x.features, neighbor_rate);
            }
        }

        let max_age = self.params.max_edge_age;
        self.edges.retain(|_, age| *age < max_age);

        if self.since_denoise >= self.params.denoise_period {
            self.since_denoise = 0;
            self.denoise();
        }
        Ok(TrainOutcome::Adapted)
    }

    /// Removes prototypes without edges, never dropping the last prototype
    /// of a label or going below two prototypes.
    fn denoise(&mut self) {
        let connected: BTreeSet<PrototypeId> = self
            .edges
            .keys()
            .flat_map(|k| {
                let (a, b) = k.endpoints();
                [a, b]
            })
            .collect();
        let mut per_label: BTreeMap<Label, usize> = BTreeMap::new();
        for p in &self.prototypes {
            *per_label.entry(p.label).or_insert(0) += 1;
        }
        let mut remaining = self.prototypes.len();
        let mut keep = Vec::with_capacity(self.prototypes.len());
        for p in self.prototypes.drain(..) {
            let label_left = per_label[&p.label];
            if !connected.contains(&p.id) && label_left > 1 && remaining > 2 {
                per_label.insert(p.label, label_left - 1);
                remaining -= 1;
            } else {
                keep.push(p);
            }
        }
        self.prototypes = keep;
    }

    /// Label of the nearest prototype.
    pub fn predict(&self, x: &[f64]) -> Result<Label, ModelError> {
        if self.prototypes.is_empty() {
            return Err(ModelError::EmptyModel);
        }
        self.check_dimension(x)?;
        let i = self.nearest_index(x).expect("non-empty");
        Ok(self.prototypes[i].label)
    }

    /// Predicts `x`, crediting the nearest prototype's relevance when the
    /// prediction matches `truth`.
    pub fn record_prediction(&mut self, x: &[f64], truth: Label) -> Result<Label, ModelError> {
        if self.prototypes.is_empty() {
            return Err(ModelError::EmptyModel);
        }
        self.check_dimension(x)?;
        let i = self.nearest_index(x).expect("non-empty");
        let predicted = self.prototypes[i].label;
        if predicted == truth {
            self.prototypes[i].relevance += 1;
        }
        Ok(predicted)
    }
}

/// `w <- w + rate * (x - w)`; a negative rate pushes `w` away from `x`.
fn attract(w: &mut [f64], x: &[f64], rate: f64) {
    for (wi, xi) in w.iter_mut().zip(x) {
        *wi += rate * (xi - *wi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(id: PrototypeId, v: &[f64], label: Label, relevance: u64) -> Prototype {
        Prototype {
            id,
            vector: v.to_vec(),
            label,
            relevance,
            creation_tick: 0.0,
        }
    }

    fn model_of(protos: Vec<Prototype>, edges: &[(PrototypeId, PrototypeId)]) -> PrototypeModel {
        let mut counts = BTreeMap::new();
        for p in &protos {
            *counts.entry(p.label).or_insert(0) += 1;
        }
        let d = protos[0].vector.len();
        PrototypeModel::from_parts(
            protos,
            edges.iter().map(|&(a, b)| (EdgeKey::new(a, b), 0)),
            counts,
            d,
            IlvqParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn init_places_both_samples() {
        let m = PrototypeModel::init(
            &Sample::new(vec![0.0, 0.0], 0),
            &Sample::new(vec![1.0, 1.0], 1),
            IlvqParams::default(),
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.edge_count(), 0);
        assert_eq!(m.class_counts().get(&0), Some(&1));
        assert_eq!(m.class_counts().get(&1), Some(&1));
    }

    #[test]
    fn init_allows_duplicates() {
        let s = Sample::new(vec![1.0, 2.0], 0);
        let m = PrototypeModel::init(&s, &s, IlvqParams::default()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.class_counts().get(&0), Some(&2));
    }

    #[test]
    fn init_rejects_dimension_mismatch() {
        let err = PrototypeModel::init(
            &Sample::new(vec![0.0, 0.0], 0),
            &Sample::new(vec![1.0], 1),
            IlvqParams::default(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            ModelError::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn winners_by_distance() {
        let m = model_of(
            vec![proto(0, &[0.0, 0.0], 0, 0), proto(1, &[3.0, 0.0], 1, 0)],
            &[],
        );
        assert_eq!(m.find_winners(&[1.0, 0.0]).unwrap(), (0, 1));
    }

    #[test]
    fn winners_tie_break_by_id() {
        let m = model_of(
            vec![proto(1, &[2.0, 0.0], 1, 0), proto(0, &[0.0, 0.0], 0, 0)],
            &[],
        );
        assert_eq!(m.find_winners(&[1.0, 0.0]).unwrap(), (0, 1));
    }

    #[test]
    fn winners_need_two_prototypes() {
        let m = model_of(vec![proto(0, &[0.0, 0.0], 0, 0)], &[]);
        assert_eq!(
            m.find_winners(&[0.0, 0.0]).unwrap_err(),
            ModelError::InsufficientModel { len: 1 }
        );
    }

    #[test]
    fn new_class_always_inserts() {
        let m = model_of(
            vec![proto(0, &[0.0, 0.0], 0, 0), proto(1, &[3.0, 0.0], 0, 0)],
            &[],
        );
        let x = Sample::new(vec![0.0, 0.0], 7);
        assert!(m.should_insert(&x, 0, 1));
    }

    #[test]
    fn sample_on_winner_is_not_inserted() {
        let m = model_of(
            vec![proto(0, &[0.0, 0.0], 0, 0), proto(1, &[3.0, 0.0], 1, 0)],
            &[],
        );
        let x = Sample::new(vec![0.0, 0.0], 0);
        assert!(!m.should_insert(&x, 0, 1));
    }

    #[test]
    fn distance_beyond_neighbor_threshold_inserts() {
        // Winner p0 has a single neighbour p1 at distance 1, so its
        // threshold is 1; x sits at distance 2 from p0.
        let m = model_of(
            vec![
                proto(0, &[0.0, 0.0], 0, 0),
                proto(1, &[1.0, 0.0], 0, 0),
                proto(2, &[9.0, 9.0], 1, 0),
            ],
            &[(0, 1)],
        );
        let x = Sample::new(vec![-2.0, 0.0], 0);
        let (w, r) = m.find_winners(&x.features).unwrap();
        assert_eq!((w, r), (0, 1));
        assert_eq!(m.insertion_threshold(0), 1.0);
        assert!(m.should_insert(&x, w, r));
    }

    #[test]
    fn far_sample_with_new_label_is_inserted() {
        let mut m = PrototypeModel::init(
            &Sample::new(vec![0.0, 0.0], 0),
            &Sample::new(vec![1.0, 0.0], 0),
            IlvqParams::default(),
        )
        .unwrap();
        let out = m.train_one(&Sample::new(vec![50.0, 50.0], 1)).unwrap();
        assert_eq!(out, TrainOutcome::Inserted);
        assert_eq!(m.len(), 3);
        assert_eq!(m.class_counts().values().sum::<u64>(), 3);
    }

    #[test]
    fn matching_winner_moves_closer() {
        // relevance 9 gives a winner rate of exactly 0.1
        let mut m = model_of(
            vec![proto(0, &[0.0, 0.0], 0, 9), proto(1, &[2.0, 0.0], 1, 0)],
            &[],
        );
        let out = m.train_one(&Sample::new(vec![1.0, 0.0], 0)).unwrap();
        assert_eq!(out, TrainOutcome::Adapted);
        let w = m.get(0).unwrap();
        assert!((w.vector[0] - 0.1).abs() < 1e-12 && w.vector[1] == 0.0);
        assert_eq!(w.relevance, 10);
        // the freshly linked runner-up has another label and is pushed away at 0.01
        let n = m.get(1).unwrap();
        assert!((n.vector[0] - 2.01).abs() < 1e-12);
        assert_eq!(m.edge_age(0, 1), Some(1));
    }

    #[test]
    fn mismatched_winner_moves_away() {
        let mut m = model_of(
            vec![proto(0, &[0.0, 0.0], 1, 9), proto(1, &[2.0, 0.0], 0, 0)],
            &[],
        );
        let out = m.train_one(&Sample::new(vec![1.0, 0.0], 0)).unwrap();
        assert_eq!(out, TrainOutcome::Adapted);
        let w = m.get(0).unwrap();
        assert!((w.vector[0] + 0.1).abs() < 1e-12);
        assert_eq!(w.relevance, 9);
        // same-label neighbour is attracted
        assert!((m.get(1).unwrap().vector[0] - 1.99).abs() < 1e-12);
    }

    #[test]
    fn old_edges_are_removed() {
        let params = IlvqParams {
            max_edge_age: 3,
            ..IlvqParams::default()
        };
        let mut m = PrototypeModel::from_parts(
            vec![
                proto(0, &[0.0], 0, 0),
                proto(1, &[1.0], 0, 0),
                proto(2, &[-1.0], 0, 0),
            ],
            [(EdgeKey::new(0, 2), 2)],
            BTreeMap::from([(0, 3)]),
            1,
            params,
        )
        .unwrap();
        m.train_one(&Sample::new(vec![0.2], 0)).unwrap();
        assert_eq!(m.edge_age(0, 1), Some(1));
        assert_eq!(m.edge_age(0, 2), None);
    }

    #[test]
    fn denoise_keeps_label_representatives() {
        let params = IlvqParams {
            denoise_period: 1,
            ..IlvqParams::default()
        };
        let mut m = PrototypeModel::from_parts(
            vec![
                proto(0, &[0.0], 0, 0),
                proto(1, &[1.0], 0, 0),
                proto(2, &[10.0], 0, 0),
                proto(3, &[30.0], 1, 0),
            ],
            [],
            BTreeMap::from([(0, 3), (1, 1)]),
            1,
            params,
        )
        .unwrap();
        m.train_one(&Sample::new(vec![0.4], 0)).unwrap();
        let ids: Vec<_> = m.prototypes().iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![0, 1, 3]);
    }

    #[test]
    fn predict_nearest_label() {
        let m = model_of(
            vec![proto(0, &[0.0, 0.0], 0, 0), proto(1, &[4.0, 4.0], 1, 0)],
            &[],
        );
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 0);
        assert_eq!(m.predict(&[4.0, 4.0]).unwrap(), 1);
    }

    #[test]
    fn predict_on_empty_model_fails() {
        let m = PrototypeModel::from_parts(vec![], [], BTreeMap::new(), 2, IlvqParams::default())
            .unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap_err(), ModelError::EmptyModel);
    }

    #[test]
    fn correct_prediction_credits_relevance() {
        let mut m = model_of(vec![proto(0, &[0.0], 0, 0), proto(1, &[4.0], 1, 0)], &[]);
        assert_eq!(m.record_prediction(&[0.5], 0).unwrap(), 0);
        assert_eq!(m.record_prediction(&[0.5], 1).unwrap(), 0);
        assert_eq!(m.get(0).unwrap().relevance, 1);
    }

    #[test]
    fn from_parts_rejects_dangling_edges() {
        let err = PrototypeModel::from_parts(
            vec![proto(0, &[0.0], 0, 0)],
            [(EdgeKey::new(0, 5), 0)],
            BTreeMap::new(),
            1,
            IlvqParams::default(),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::DanglingEdge(5));
    }
}
