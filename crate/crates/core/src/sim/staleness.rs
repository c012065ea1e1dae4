use thiserror::Error;

use crate::node::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StalenessEvent {
    /// Node `node` now holds model version `version`.
    ModelUpdate { node: NodeId, version: u64 },
    /// A message carrying `from`'s `version` reached `at`.
    Delivery {
        at: NodeId,
        from: NodeId,
        version: u64,
    },
}

/// Version matrix and time-integrated staleness for every ordered pair.
///
/// `versions[j][i]` is the version of node i's model known at node j; the
/// diagonal holds each node's own version, and the staleness of j's copy
/// of i is `versions[i][i] - versions[j][i]`.
#[derive(Debug, Clone)]
pub struct StalenessTracker {
    n: usize,
    versions: Vec<u64>,
    row_sum: Vec<u64>,
    row_integral: Vec<f64>,
    start: f64,
    last: f64,
    batch_len_sum: u64,
    batches: u64,
    max_batch_len: usize,
}

impl StalenessTracker {
    pub fn new(n: usize, start: f64) -> Self {
        Self {
            n,
            versions: vec![0; n * n],
            row_sum: vec![0; n],
            row_integral: vec![0.0; n],
            start,
            last: start,
            batch_len_sum: 0,
            batches: 0,
            max_batch_len: 0,
        }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn version(&self, at: NodeId, of: NodeId) -> u64 {
        self.versions[at as usize * self.n + of as usize]
    }

    pub fn staleness(&self, at: NodeId, of: NodeId) -> u64 {
        self.version(of, of) - self.version(at, of)
    }

    /// Accumulates the staleness integral up to `time`.
    pub fn advance(&mut self, time: f64) {
        let dt = time - self.last;
        if dt > 0.0 {
            for (acc, &s) in self.row_integral.iter_mut().zip(&self.row_sum) {
                *acc += s as f64 * dt;
            }
            self.last = time;
        }
    }

    pub fn track(&mut self, time: f64, event: StalenessEvent) {
        self.advance(time);
        let n = self.n;
        match event {
            StalenessEvent::ModelUpdate { node, version } => {
                let i = node as usize;
                let own = &mut self.versions[i * n + i];
                if version > *own {
                    let diff = version - *own;
                    *own = version;
                    for (j, row) in self.row_sum.iter_mut().enumerate() {
                        if j != i {
                            *row += diff;
                        }
                    }
                }
            }
            StalenessEvent::Delivery { at, from, version } => {
                let (j, i) = (at as usize, from as usize);
                let own = self.versions[i * n + i];
                let known = &mut self.versions[j * n + i];
                let new = version.min(own);
                if new > *known {
                    self.row_sum[j] -= new - *known;
                    *known = new;
                }
            }
        }
    }

    pub fn record_batch(&mut self, len: usize) {
        self.batch_len_sum += len as u64;
        self.batches += 1;
        self.max_batch_len = self.max_batch_len.max(len);
    }

    /// Running mean of transmitted batch lengths.
    pub fn mean_batch_len(&self) -> Option<f64> {
        (self.batches > 0).then(|| self.batch_len_sum as f64 / self.batches as f64)
    }

    pub fn max_batch_len(&self) -> usize {
        self.max_batch_len
    }

    /// Current mean staleness over all ordered pairs.
    pub fn instantaneous_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.row_sum.iter().sum::<u64>() as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Time-averaged staleness of node j's copies of all peers.
    pub fn node_mean(&self, j: NodeId) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let elapsed = self.last - self.start;
        let peers = (self.n - 1) as f64;
        if elapsed > 0.0 {
            self.row_integral[j as usize] / (elapsed * peers)
        } else {
            self.row_sum[j as usize] as f64 / peers
        }
    }

    /// Time-averaged staleness over all ordered pairs.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (0..self.n as NodeId)
            .map(|j| self.node_mean(j))
            .sum::<f64>()
            / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("parameter {name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
}

fn require(name: &'static str, value: f64, ok: bool) -> Result<(), AnalysisError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(AnalysisError::OutOfRange { name, value })
    }
}

/// `min(lambda * (s*T*L + 1), mu)`.
pub fn effective_update_rate(
    lambda: f64,
    s: f64,
    t_share: f64,
    l_bar: f64,
    mu: f64,
) -> Result<f64, AnalysisError> {
    require("lambda", lambda, lambda >= 0.0)?;
    require("s", s, s >= 0.0)?;
    require("t_share", t_share, t_share >= 0.0)?;
    require("l_bar", l_bar, l_bar >= 0.0)?;
    require("mu", mu, mu > 0.0)?;
    Ok((lambda * (s * t_share * l_bar + 1.0)).min(mu))
}

/// Node input queues are stable iff `lambda * (s*T*L + 1) < mu`.
pub fn lemma1_stable(
    lambda: f64,
    s: f64,
    t_share: f64,
    l_bar: f64,
    mu: f64,
) -> Result<bool, AnalysisError> {
    require("mu", mu, mu > 0.0)?;
    Ok(lambda * (s * t_share * l_bar + 1.0) < mu)
}

/// `1 + 1/2 + ... + 1/k`, summed exactly from the small end.
pub fn harmonic(k: usize) -> f64 {
    (1..=k).rev().map(|i| 1.0 / i as f64).sum()
}

/// Upper bound on expected staleness: `mu / (lambda*s*T) * H(N-1)`.
pub fn lemma2_bound(
    mu: f64,
    lambda: f64,
    s: f64,
    t_share: f64,
    n: usize,
) -> Result<f64, AnalysisError> {
    require("mu", mu, mu > 0.0)?;
    require("lambda", lambda, lambda > 0.0)?;
    require("s", s, s > 0.0)?;
    require("t_share", t_share, t_share > 0.0)?;
    require("n", n as f64, n >= 2)?;
    Ok(mu / (lambda * s * t_share) * harmonic(n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_rate_examples() {
        assert_eq!(
            effective_update_rate(1.0, 2.0, 0.5, 1.0, 100.0).unwrap(),
            2.0
        );
        assert_eq!(
            effective_update_rate(3.0, 0.0, 0.5, 9.0, 100.0).unwrap(),
            3.0
        );
        assert_eq!(
            effective_update_rate(3.0, 4.0, 0.0, 9.0, 100.0).unwrap(),
            3.0
        );
        assert_eq!(
            effective_update_rate(10.0, 4.0, 1.0, 50.0, 200.0).unwrap(),
            200.0
        );
        assert!(effective_update_rate(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn stability_examples() {
        assert!(lemma1_stable(10.0, 4.0, 1.0, 50.0, 2500.0).unwrap());
        assert!(!lemma1_stable(10.0, 4.0, 1.0, 50.0, 2000.0).unwrap());
        assert!(lemma1_stable(0.0, 4.0, 1.0, 50.0, 1e-9).unwrap());
    }

    #[test]
    fn bound_examples() {
        let b = lemma2_bound(100.0, 1.0, 2.0, 0.5, 5).unwrap();
        assert!((b - 100.0 * (1.0 + 0.5 + 1.0 / 3.0 + 0.25)).abs() < 1e-12);
        assert_eq!(lemma2_bound(100.0, 1.0, 2.0, 0.5, 2).unwrap(), 100.0);
        let half = lemma2_bound(100.0, 1.0, 4.0, 0.5, 5).unwrap();
        assert!((half - b / 2.0).abs() < 1e-12);
        assert!(lemma2_bound(100.0, 1.0, 2.0, 0.5, 1).is_err());
        assert!(lemma2_bound(100.0, 0.0, 2.0, 0.5, 5).is_err());
    }

    #[test]
    fn tracker_counts_versions() {
        let mut t = StalenessTracker::new(3, 0.0);
        t.track(
            1.0,
            StalenessEvent::ModelUpdate {
                node: 0,
                version: 1,
            },
        );
        t.track(
            2.0,
            StalenessEvent::ModelUpdate {
                node: 0,
                version: 2,
            },
        );
        assert_eq!(t.staleness(1, 0), 2);
        assert_eq!(t.staleness(2, 0), 2);
        t.track(
            3.0,
            StalenessEvent::Delivery {
                at: 1,
                from: 0,
                version: 2,
            },
        );
        assert_eq!(t.staleness(1, 0), 0);
        // older version arriving later does not regress
        t.track(
            3.0,
            StalenessEvent::Delivery {
                at: 1,
                from: 0,
                version: 1,
            },
        );
        assert_eq!(t.version(1, 0), 2);
        t.advance(4.0);
        // node 1: staleness 1 on [1,2), 2 on [2,3), 0 after; two peers; 4 s
        assert!((t.node_mean(1) - 3.0 / 8.0).abs() < 1e-12);
        // node 2: 1 on [1,2), 2 on [2,4)
        assert!((t.node_mean(2) - 5.0 / 8.0).abs() < 1e-12);
        assert!((t.instantaneous_mean() - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn batch_stats() {
        let mut t = StalenessTracker::new(2, 0.0);
        assert!(t.mean_batch_len().is_none());
        t.record_batch(4);
        t.record_batch(6);
        assert_eq!(t.mean_batch_len(), Some(5.0));
        assert_eq!(t.max_batch_len(), 6);
    }
}
