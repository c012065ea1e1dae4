//! Model compression by per-label density clustering.
//!
//! When a model grows past its prototype cap, the prototypes of each label
//! are clustered with DBSCAN, searching epsilon until the cluster count lands
//! in the label's target window, and every cluster is merged into its
//! centroid. The edge graph is then rebuilt from nearest neighbours.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::prototype::{euclidean, EdgeKey, Label, Prototype, PrototypeId, PrototypeModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompressError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot merge an empty cluster")]
    EmptyCluster,
    #[error("cluster mixes labels {0} and {1}")]
    MixedLabels(Label, Label),
    #[error("no epsilon reached the target window after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<LabelClustering>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionConfig {
    /// Prototype cap; compression triggers when a model strictly exceeds it.
    pub limit_size: usize,
    /// Target cluster count per label, as fractions of the label quota.
    pub target_range: (f64, f64),
    pub eps_initial: f64,
    pub eps_up: f64,
    pub eps_down: f64,
    pub max_iterations: usize,
    pub min_pts: usize,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            limit_size: 500,
            target_range: (0.725, 0.775),
            eps_initial: 0.5,
            eps_up: 1.25,
            eps_down: 0.8,
            max_iterations: 50,
            min_pts: 1,
        }
    }
}

impl CompressionConfig {
    pub fn with_limit(limit_size: usize) -> Self {
        Self {
            limit_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CompressError> {
        let (lo, hi) = self.target_range;
        let bad = |m: &str| Err(CompressError::InvalidParameter(m.to_string()));
        if self.limit_size == 0 {
            return bad("limit_size must be positive");
        }
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return bad("target_range must satisfy 0 < lo < hi <= 1");
        }
        if !(self.eps_initial > 0.0) {
            return bad("eps_initial must be positive");
        }
        if !(self.eps_up > 1.0 && self.eps_down > 0.0 && self.eps_down < 1.0) {
            return bad("need eps_up > 1 > eps_down > 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.min_pts == 0 {
            return bad("min_pts must be at least 1");
        }
        Ok(())
    }
}

fn distance_matrix<V: AsRef<[f64]>>(points: &[V]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(points[i].as_ref(), points[j].as_ref());
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

/// DBSCAN on a precomputed distance matrix. Noise points become singleton
/// clusters. Returns a cluster id per point, numbered in discovery order.
fn dbscan_matrix(dist: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let n = dist.len();
    let neighbors = |i: usize| (0..n).filter(move |&j| dist[i][j] <= eps);
    let is_core: Vec<bool> = (0..n).map(|i| neighbors(i).count() >= min_pts).collect();
    let mut cluster = vec![UNSET; n];
    let mut next = 0;
    for start in 0..n {
        if cluster[start] != UNSET || !is_core[start] {
            continue;
        }
        let id = next;
        next += 1;
        cluster[start] = id;
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for q in neighbors(p) {
                if cluster[q] == UNSET {
                    cluster[q] = id;
                    if is_core[q] {
                        stack.push(q);
                    }
                }
            }
        }
    }
    for c in cluster.iter_mut().filter(|c| **c == UNSET) {
        *c = next;
        next += 1;
    }
    cluster
}

/// Euclidean DBSCAN keeping noise points as singleton clusters.
pub fn dbscan<V: AsRef<[f64]>>(
    points: &[V],
    eps: f64,
    min_pts: usize,
) -> Result<Vec<usize>, CompressError> {
    if !(eps > 0.0) {
        return Err(CompressError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if min_pts == 0 {
        return Err(CompressError::InvalidParameter(
            "min_pts must be at least 1".into(),
        ));
    }
    Ok(dbscan_matrix(&distance_matrix(points), eps, min_pts))
}

/// Collapses a same-label cluster into its centroid, summing relevance.
pub fn merge_cluster(members: &[Prototype], id: PrototypeId) -> Result<Prototype, CompressError> {
    let first = members.first().ok_or(CompressError::EmptyCluster)?;
    if let Some(other) = members.iter().find(|p| p.label != first.label) {
        return Err(CompressError::MixedLabels(first.label, other.label));
    }
    let d = first.vector.len();
    let mut centroid = vec![0.0; d];
    for p in members {
        for (c, v) in centroid.iter_mut().zip(&p.vector) {
            *c += v;
        }
    }
    let n = members.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    Ok(Prototype {
        id,
        vector: centroid,
        label: first.label,
        relevance: members.iter().map(|p| p.relevance).sum(),
        creation_tick: members
            .iter()
            .map(|p| p.creation_tick)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelClustering {
    pub prototypes: Vec<Prototype>,
    pub eps: f64,
    pub iterations: usize,
}

fn merge_assignment(
    protos: &[Prototype],
    assignment: &[usize],
    next_id: &mut PrototypeId,
) -> Result<Vec<Prototype>, CompressError> {
    let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<Prototype>> = vec![Vec::new(); n_clusters];
    for (p, &c) in protos.iter().zip(assignment) {
        groups[c].push(p.clone());
    }
    groups
        .into_iter()
        .map(|members| {
            if members.len() == 1 {
                Ok(members.into_iter().next().expect("one member"))
            } else {
                let id = *next_id;
                *next_id += 1;
                merge_cluster(&members, id)
            }
        })
        .collect()
}

/// Searches epsilon until the number of DBSCAN clusters for one label falls
/// in `[lo * quota, hi * quota]`, then merges each cluster.
///
/// Epsilon grows by `eps_up` while there are too many clusters and shrinks
/// by `eps_down` while there are too few; once the window is bracketed the
/// search bisects geometrically between the bracketing values. Labels with
/// fewer prototypes than the window's lower bound are returned unchanged.
/// Singleton clusters keep their original prototype.
pub fn adaptive_cluster_label(
    protos: &[Prototype],
    quota: f64,
    cfg: &CompressionConfig,
    next_id: &mut PrototypeId,
) -> Result<LabelClustering, CompressError> {
    cfg.validate()?;
    let label = protos.first().ok_or(CompressError::EmptyCluster)?.label;
    if let Some(p) = protos.iter().find(|p| p.label != label) {
        return Err(CompressError::MixedLabels(label, p.label));
    }
    let (lo, hi) = (cfg.target_range.0 * quota, cfg.target_range.1 * quota);
    if (protos.len() as f64) < lo {
        return Ok(LabelClustering {
            prototypes: protos.to_vec(),
            eps: cfg.eps_initial,
            iterations: 0,
        });
    }

    let dist = distance_matrix(protos);
    let mut eps = cfg.eps_initial;
    let mut too_fine: Option<f64> = None;
    let mut too_coarse: Option<f64> = None;
    // (penalty, eps, assignment); counts above the window rank behind any below it
    let mut best: Option<((u8, f64), f64, Vec<usize>)> = None;

    for iteration in 1..=cfg.max_iterations {
        let assignment = dbscan_matrix(&dist, eps, cfg.min_pts);
        let count = assignment.iter().max().map_or(0, |m| m + 1) as f64;
        if lo <= count && count <= hi {
            return Ok(LabelClustering {
                prototypes: merge_assignment(protos, &assignment, next_id)?,
                eps,
                iterations: iteration,
            });
        }
        let penalty = if count > hi {
            (1, count - hi)
        } else {
            (0, lo - count)
        };
        if best.as_ref().is_none_or(|(b, _, _)| penalty < *b) {
            best = Some((penalty, eps, assignment));
        }
        if count > hi {
            too_fine = Some(too_fine.map_or(eps, |f: f64| f.max(eps)));
        } else {
            too_coarse = Some(too_coarse.map_or(eps, |c: f64| c.min(eps)));
        }
        eps = match (too_fine, too_coarse) {
            (Some(f), Some(c)) => {
                // the count jumps across the window between f and c
                if c / f < 1.0 + 1e-12 {
                    break;
                }
                (f * c).sqrt()
            }
            _ if count > hi => eps * cfg.eps_up,
            _ => eps * cfg.eps_down,
        };
    }

    let (_, eps, assignment) = best.expect("at least one iteration");
    let best = LabelClustering {
        prototypes: merge_assignment(protos, &assignment, next_id)?,
        eps,
        iterations: cfg.max_iterations,
    };
    Err(CompressError::NoConvergence {
        iterations: cfg.max_iterations,
        best: Box::new(best),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    /// The cluster count landed inside the target window.
    Converged,
    /// Fewer prototypes than the window's lower bound; left as is.
    Untouched,
    /// The search gave up and the closest iterate was kept.
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelReport {
    pub label: Label,
    pub before: usize,
    pub after: usize,
    pub window: (f64, f64),
    pub eps: f64,
    pub outcome: LabelOutcome,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompressionReport {
    /// Empty when the model was within its cap.
    pub labels: Vec<LabelReport>,
}

impl CompressionReport {
    pub fn triggered(&self) -> bool {
        !self.labels.is_empty()
    }
}

/// Connects every prototype to its two nearest others (ties by id), age 0.
pub fn nearest_two_edges(prototypes: &[Prototype]) -> BTreeMap<EdgeKey, u32> {
    let mut edges = BTreeMap::new();
    for p in prototypes {
        let mut others: Vec<(f64, PrototypeId)> = prototypes
            .iter()
            .filter(|q| q.id != p.id)
            .map(|q| (euclidean(&p.vector, &q.vector), q.id))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, q) in others.iter().take(2) {
            edges.insert(EdgeKey::new(p.id, q), 0);
        }
    }
    edges
}

/// Compresses a model that exceeds `cfg.limit_size`; models within the cap
/// are returned unchanged.
pub fn compress_model(model: &PrototypeModel, cfg: &CompressionConfig) -> PrototypeModel {
    compress_model_report(model, cfg).0
}

pub fn compress_model_report(
    model: &PrototypeModel,
    cfg: &CompressionConfig,
) -> (PrototypeModel, CompressionReport) {
    if model.len() <= cfg.limit_size {
        return (model.clone(), CompressionReport::default());
    }
    let mut by_label: BTreeMap<Label, Vec<Prototype>> = BTreeMap::new();
    for p in model.prototypes() {
        by_label.entry(p.label).or_default().push(p.clone());
    }
    let quota = cfg.limit_size as f64 / by_label.len() as f64;
    let window = (cfg.target_range.0 * quota, cfg.target_range.1 * quota);
    let mut next_id = model.next_id();
    let mut merged = Vec::with_capacity(cfg.limit_size);
    let mut report = CompressionReport::default();

    for (label, protos) in by_label {
        let before = protos.len();
        let (clustering, outcome) = match adaptive_cluster_label(&protos, quota, cfg, &mut next_id)
        {
            Ok(c) if c.iterations == 0 => (c, LabelOutcome::Untouched),
            Ok(c) => (c, LabelOutcome::Converged),
            Err(CompressError::NoConvergence { best, iterations }) => {
                log::warn!(
                    "label {label}: clustering did not reach [{:.2}, {:.2}] in {iterations} iterations; keeping {} clusters",
                    window.0,
                    window.1,
                    best.prototypes.len()
                );
                (*best, LabelOutcome::Fallback)
            }
            Err(e) => {
                log::error!("label {label}: compression failed ({e}); keeping prototypes");
                (
                    LabelClustering {
                        prototypes: protos,
                        eps: cfg.eps_initial,
                        iterations: 0,
                    },
                    LabelOutcome::Untouched,
                )
            }
        };
        report.labels.push(LabelReport {
            label,
            before,
            after: clustering.prototypes.len(),
            window,
            eps: clustering.eps,
            outcome,
        });
        merged.extend(clustering.prototypes);
    }

    let edges = nearest_two_edges(&merged);
    (model.rebuild(merged, edges, next_id), report)
}
