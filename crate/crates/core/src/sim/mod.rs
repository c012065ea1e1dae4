//! Deterministic discrete-event simulation of a node population.

mod calendar;
mod engine;
mod staleness;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

pub use calendar::EventCalendar;
pub use engine::{run_simulation, run_simulation_traced, SimOutcome, SimSummary};
pub use staleness::{
    effective_update_rate, harmonic, lemma1_stable, lemma2_bound, AnalysisError, StalenessEvent,
    StalenessTracker,
};

use crate::data::DataError;
use crate::metrics::ConfigError;
use crate::node::NodeError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("trace output failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("arrival rate {0} must be positive")]
    InvalidRate(f64),
}

/// Event times of a Poisson process on `(0, horizon]`.
pub fn schedule_poisson_arrivals<R: Rng + ?Sized>(
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SimError::InvalidRate(rate));
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gap.sample(rng);
        if t > horizon {
            return Ok(out);
        }
        out.push(t);
    }
}
