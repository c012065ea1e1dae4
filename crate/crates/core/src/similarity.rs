//! Jensen-Shannon distance between prototype sets.
//!
//! Each set is smoothed with a product Epanechnikov kernel density estimate,
//! both estimates are evaluated on one shared random grid spanning the union
//! bounding box, normalized into discrete pmfs and compared with base-2
//! Jensen-Shannon distance.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("cannot estimate a density from an empty set")]
    EmptyModel,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pmfs are defined on different grids ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
}

/// Epanechnikov kernel `3/4 (1 - u^2)` on `|u| <= 1`.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Scott's rule bandwidth `m^(-1/(d+4))`.
pub fn scott_bandwidth(m: usize, d: usize) -> f64 {
    (m.max(1) as f64).powf(-1.0 / (d as f64 + 4.0))
}

/// Product-kernel density estimate `1/(m h^d) sum_i prod_k K((q_k - x_ik)/h)`.
pub fn kde_density<V: AsRef<[f64]>>(
    samples: &[V],
    query: &[f64],
    h: f64,
) -> Result<f64, SimilarityError> {
    if !(h > 0.0) {
        return Err(SimilarityError::InvalidBandwidth(h));
    }
    if samples.is_empty() {
        return Err(SimilarityError::EmptyModel);
    }
    for s in samples {
        if s.as_ref().len() != query.len() {
            return Err(SimilarityError::DimensionMismatch {
                expected: query.len(),
                found: s.as_ref().len(),
            });
        }
    }
    Ok(density_unchecked(samples, query, h))
}

fn density_unchecked<V: AsRef<[f64]>>(samples: &[V], query: &[f64], h: f64) -> f64 {
    Columns::new(samples, query.len()).density(query, h, &mut Vec::new())
}

/// Sum with four independent accumulators.
fn sum_lanes(xs: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = xs.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for (a, x) in acc.iter_mut().zip(c) {
            *a += x;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Column-major copy of a point set sorted on the first coordinate, so a
/// query only visits samples whose first coordinate is within one bandwidth.
struct Columns {
    cols: Vec<Vec<f64>>,
    m: usize,
}

impl Columns {
    fn new<V: AsRef<[f64]>>(samples: &[V], d: usize) -> Self {
        let mut order: Vec<&[f64]> = samples.iter().map(|s| s.as_ref()).collect();
        if d > 0 {
            order.sort_by(|a, b| a[0].total_cmp(&b[0]));
        }
        let cols = (0..d)
            .map(|k| order.iter().map(|s| s[k]).collect())
            .collect();
        Self {
            cols,
            m: samples.len(),
        }
    }

    fn density(&self, query: &[f64], h: f64, buf: &mut Vec<f64>) -> f64 {
        let d = query.len() as i32;
        let norm = 0.75f64.powi(d) / (self.m as f64 * h.powi(d));
        let Some(first) = self.cols.first() else {
            return 0.0;
        };
        let lo = first.partition_point(|&x| x < query[0] - h);
        let hi = first.partition_point(|&x| x <= query[0] + h);
        if lo >= hi {
            return 0.0;
        }
        let inv_h = 1.0 / h;
        buf.clear();
        buf.resize(hi - lo, 1.0);
        for (col, &q) in self.cols.iter().zip(query) {
            for (p, &x) in buf.iter_mut().zip(&col[lo..hi]) {
                let u = (q - x) * inv_h;
                // zero outside the support
                *p *= (1.0 - u * u).max(0.0);
            }
        }
        sum_lanes(buf) * norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Scott's rule, computed per estimated set from its own size.
    Scott,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub base_points: usize,
    pub min_points: usize,
    pub bandwidth: Bandwidth,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            base_points: 1000,
            min_points: 100,
            bandwidth: Bandwidth::Scott,
        }
    }
}

impl KdeConfig {
    fn bandwidth_for(&self, m: usize, d: usize) -> f64 {
        match self.bandwidth {
            Bandwidth::Scott => scott_bandwidth(m, d),
            Bandwidth::Fixed(h) => h,
        }
    }
}

/// Grid size `floor(B * 2^(d/2) * T_range / (2d))`, floored at `min_points`.
pub fn grid_size(cfg: &KdeConfig, d: usize, t_range: f64) -> usize {
    let d_f = d as f64;
    let raw = (cfg.base_points as f64 * 2f64.powf(d_f / 2.0) * (t_range / (2.0 * d_f))).floor();
    let raw = if raw.is_finite() && raw > 0.0 {
        raw as usize
    } else {
        0
    };
    raw.max(cfg.min_points)
}

fn common_dimension<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    a: &[A],
    b: &[B],
) -> Result<usize, SimilarityError> {
    let first = a.first().ok_or(SimilarityError::EmptyModel)?;
    if b.is_empty() {
        return Err(SimilarityError::EmptyModel);
    }
    let d = first.as_ref().len();
    let all = a
        .iter()
        .map(|v| v.as_ref().len())
        .chain(b.iter().map(|v| v.as_ref().len()));
    for found in all {
        if found != d {
            return Err(SimilarityError::DimensionMismatch { expected: d, found });
        }
    }
    Ok(d)
}

/// Uniform random evaluation points inside the bounding box of both sets.
pub fn evaluation_grid<A, B, R>(
    set_a: &[A],
    set_b: &[B],
    cfg: &KdeConfig,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, SimilarityError>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    let d = common_dimension(set_a, set_b)?;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let all = set_a
        .iter()
        .map(|v| v.as_ref())
        .chain(set_b.iter().map(|v| v.as_ref()));
    for v in all {
        for k in 0..d {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let t_range: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).sum();
    let n = grid_size(cfg, d, t_range);
    if t_range == 0.0 {
        return Ok(vec![lo; n]);
    }
    Ok((0..n)
        .map(|_| {
            lo.iter()
                .zip(&hi)
                .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                .collect()
        })
        .collect())
}

/// A normalized probability mass function over a set of evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    points: Arc<Vec<Vec<f64>>>,
    masses: Vec<f64>,
}

const MASS_TOLERANCE: f64 = 1e-9;

impl DiscretePmf {
    pub fn new(points: Arc<Vec<Vec<f64>>>, masses: Vec<f64>) -> Result<Self, SimilarityError> {
        if masses.is_empty() {
            return Err(SimilarityError::InvalidPmf("no points".into()));
        }
        if points.len() != masses.len() {
            return Err(SimilarityError::InvalidPmf(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(SimilarityError::InvalidPmf(
                "negative or non-finite mass".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(SimilarityError::InvalidPmf(format!(
                "masses sum to {total}"
            )));
        }
        Ok(Self { points, masses })
    }

    /// A pmf whose points are the indices `0..J` on a line.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self, SimilarityError> {
        let points = Arc::new((0..masses.len()).map(|i| vec![i as f64]).collect());
        Self::new(points, masses)
    }

    /// Normalizes raw densities on `points`; an all-zero density becomes
    /// the uniform pmf on the grid.
    pub fn from_densities(
        points: Arc<Vec<Vec<f64>>>,
        densities: Vec<f64>,
    ) -> Result<Self, SimilarityError> {
        let total: f64 = densities.iter().sum();
        let masses = if total > 0.0 {
            densities.iter().map(|f| f / total).collect()
        } else {
            vec![1.0 / densities.len() as f64; densities.len()]
        };
        Self::new(points, masses)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Density estimates of both sets, normalized on one shared grid.
pub fn pmf_pair<A, B, R>(
    set_a: &[A],
    set_b: &[B],
    cfg: &KdeConfig,
    rng: &mut R,
) -> Result<(DiscretePmf, DiscretePmf), SimilarityError>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    let grid = Arc::new(evaluation_grid(set_a, set_b, cfg, rng)?);
    let d = set_a[0].as_ref().len();
    let h_a = cfg.bandwidth_for(set_a.len(), d);
    let h_b = cfg.bandwidth_for(set_b.len(), d);
    for h in [h_a, h_b] {
        if !(h > 0.0) {
            return Err(SimilarityError::InvalidBandwidth(h));
        }
    }
    let (cols_a, cols_b) = (Columns::new(set_a, d), Columns::new(set_b, d));
    let mut buf = Vec::new();
    let dens_a = grid
        .iter()
        .map(|u| cols_a.density(u, h_a, &mut buf))
        .collect();
    let dens_b = grid
        .iter()
        .map(|u| cols_b.density(u, h_b, &mut buf))
        .collect();
    Ok((
        DiscretePmf::from_densities(grid.clone(), dens_a)?,
        DiscretePmf::from_densities(grid, dens_b)?,
    ))
}

fn check_grid(p: &DiscretePmf, q: &DiscretePmf) -> Result<(), SimilarityError> {
    if p.len() != q.len() {
        return Err(SimilarityError::GridMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

fn kl_masses(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).log2();
    }
    acc.max(0.0)
}

/// Kullback-Leibler divergence in bits.
pub fn kl_divergence(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64, SimilarityError> {
    check_grid(p, q)?;
    Ok(kl_masses(&p.masses, &q.masses))
}

/// Jensen-Shannon distance (base 2, so in `[0, 1]`).
pub fn js_distance(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64, SimilarityError> {
    check_grid(p, q)?;
    let m: Vec<f64> = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    let js = 0.5 * kl_masses(&p.masses, &m) + 0.5 * kl_masses(&q.masses, &m);
    Ok(js.clamp(0.0, 1.0).sqrt())
}

/// Whether `local` differs enough from what is known of a peer to be worth
/// sending. An empty snapshot means nothing is known, so it is always worthy.
pub fn is_it_worthy<A, B, R>(
    local: &[A],
    peer_snapshot: &[B],
    th_jsd: f64,
    cfg: &KdeConfig,
    rng: &mut R,
) -> bool
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    if peer_snapshot.is_empty() || local.is_empty() {
        return true;
    }
    match pmf_pair(local, peer_snapshot, cfg, rng).and_then(|(p, q)| js_distance(&p, &q)) {
        Ok(jsd) => jsd > th_jsd,
        Err(e) => {
            log::debug!("worthiness check failed ({e}); sharing anyway");
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.5625);
        assert_eq!(epanechnikov(1.5), 0.0);
    }

    #[test]
    fn kde_point_values() {
        assert_eq!(kde_density(&[vec![0.0]], &[0.0], 1.0).unwrap(), 0.75);
        assert_eq!(kde_density(&[vec![0.0]], &[2.0], 1.0).unwrap(), 0.0);
        assert_eq!(
            kde_density(&[vec![0.0], vec![0.0]], &[0.0], 1.0).unwrap(),
            0.75
        );
    }

    #[test]
    fn kde_rejects_bad_bandwidth() {
        for h in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                kde_density(&[vec![0.0]], &[0.0], h),
                Err(SimilarityError::InvalidBandwidth(_))
            ));
        }
    }

    #[test]
    fn grid_sizes() {
        let cfg = KdeConfig::default();
        assert_eq!(grid_size(&cfg, 2, 4.0), 2000);
        assert_eq!(grid_size(&cfg, 1, 2.0), 1414);
        assert_eq!(grid_size(&cfg, 3, 0.0), 100);
    }

    #[test]
    fn grid_uses_union_bounding_box() {
        let a = [vec![0.0, 0.0], vec![1.0, 0.0]];
        let b = [vec![3.0, 2.0]];
        let grid = evaluation_grid(&a, &b, &KdeConfig::default(), &mut rng()).unwrap();
        // T_range = 3 + 2 = 5 -> floor(1000 * 2 * 5/4)
        assert_eq!(grid.len(), 2500);
        for u in &grid {
            assert!((0.0..=3.0).contains(&u[0]) && (0.0..=2.0).contains(&u[1]));
        }
    }

    #[test]
    fn degenerate_grid_repeats_the_point() {
        let a = [vec![1.0, 2.0]];
        let grid = evaluation_grid(&a, &a, &KdeConfig::default(), &mut rng()).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.iter().all(|u| u == &vec![1.0, 2.0]));
    }

    #[test]
    fn empty_set_is_rejected() {
        let a: [Vec<f64>; 0] = [];
        let b = [vec![1.0]];
        assert_eq!(
            evaluation_grid(&a, &b, &KdeConfig::default(), &mut rng()).unwrap_err(),
            SimilarityError::EmptyModel
        );
    }

    #[test]
    fn identical_sets_give_identical_pmfs() {
        let a = [vec![0.0, 0.1], vec![0.5, 0.7], vec![0.9, 0.2]];
        let (p, q) = pmf_pair(&a, &a, &KdeConfig::default(), &mut rng()).unwrap();
        assert_eq!(p.masses(), q.masses());
        assert!((p.masses().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(js_distance(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn separated_singletons_have_disjoint_support() {
        let cfg = KdeConfig {
            bandwidth: Bandwidth::Fixed(0.4),
            ..KdeConfig::default()
        };
        let (p, q) = pmf_pair(&[vec![0.0]], &[vec![1.0]], &cfg, &mut rng()).unwrap();
        for (a, b) in p.masses().iter().zip(q.masses()) {
            assert!(*a == 0.0 || *b == 0.0);
        }
        assert!((js_distance(&p, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_hand_values() {
        let half = DiscretePmf::from_masses(vec![0.5, 0.5]).unwrap();
        let point = DiscretePmf::from_masses(vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        assert!((kl_divergence(&point, &half).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kl_divergence(&half, &point).unwrap(), f64::INFINITY);
    }

    #[test]
    fn js_hand_values() {
        let half = DiscretePmf::from_masses(vec![0.5, 0.5]).unwrap();
        let left = DiscretePmf::from_masses(vec![1.0, 0.0]).unwrap();
        let right = DiscretePmf::from_masses(vec![0.0, 1.0]).unwrap();
        assert_eq!(js_distance(&half, &half).unwrap(), 0.0);
        assert!((js_distance(&left, &right).unwrap() - 1.0).abs() < 1e-15);
        assert!((js_distance(&half, &left).unwrap() - 0.5579).abs() < 1e-4);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = DiscretePmf::from_masses(vec![1.0]).unwrap();
        let b = DiscretePmf::from_masses(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            js_distance(&a, &b).unwrap_err(),
            SimilarityError::GridMismatch { left: 1, right: 2 }
        );
        assert!(kl_divergence(&a, &b).is_err());
    }

    #[test]
    fn pmf_validation() {
        assert!(DiscretePmf::from_masses(vec![0.5, 0.4]).is_err());
        assert!(DiscretePmf::from_masses(vec![1.5, -0.5]).is_err());
        assert!(DiscretePmf::from_masses(vec![]).is_err());
        let uniform =
            DiscretePmf::from_densities(Arc::new(vec![vec![0.0]; 4]), vec![0.0; 4]).unwrap();
        assert_eq!(uniform.masses(), &[0.25; 4]);
    }

    #[test]
    fn worthiness_gate() {
        let local = [vec![0.0, 0.0], vec![1.0, 1.0]];
        let cfg = KdeConfig::default();
        assert!(!is_it_worthy(&local, &local, 0.05, &cfg, &mut rng()));
        let empty: [Vec<f64>; 0] = [];
        assert!(is_it_worthy(&local, &empty, 0.05, &cfg, &mut rng()));
        let narrow = KdeConfig {
            bandwidth: Bandwidth::Fixed(0.3),
            ..cfg
        };
        assert!(is_it_worthy(
            &[vec![0.0]],
            &[vec![1.0]],
            0.5,
            &narrow,
            &mut rng()
        ));
    }
}
