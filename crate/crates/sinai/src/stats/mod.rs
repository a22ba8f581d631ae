//! Statistics toolkit on top of the return map: observables, correlation
//! decay, characteristic-function factorization, limit covariance of
//! Birkhoff sums, and central-limit diagnostics.

pub mod clt;
pub mod correlation;
pub mod covariance;
pub mod invariance;
pub mod observable;

pub use clt::{clt_diagnostics, ks_two_sample, CltParams, CltReport, KsResult};
pub use invariance::{pushforward_invariance, InvarianceReport, MarginalCheck};
pub use correlation::{
    gouezel_covariance, pair_correlation, BlockLayout, CorrelationParams,
    CorrelationReport, GouezelReport,
};
pub use covariance::{
    empirical_covariance, estimate_sigma2, positive_definiteness, variance_growth,
    EmpiricalCovariance, PdReport, SigmaEstimate, SigmaParams, VarianceGrowth,
};
pub use observable::{observable_mean, Observable};

use crate::dynamics::ReturnRecord;
use crate::error::{Error, Result};
use crate::geometry::{Centering, Table};
use crate::phase::sample_mu;
use rand::Rng;

/// Trace an orbit from a fresh invariant-measure sample, redrawing the
/// start when the orbit grazes a singularity (a measure-zero set; the
/// redraw conditions on its complement).
pub(crate) fn orbit_from_mu<R: Rng + ?Sized>(
    table: &Table,
    centerings: &[Centering],
    rng: &mut R,
) -> Result<Vec<ReturnRecord>> {
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let x = sample_mu(table, &centerings[0], rng);
        match crate::dynamics::orbit(table, centerings, &x) {
            Ok(records) => return Ok(records),
            Err(Error::SingularityProximity { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Internal(
        "singular orbits dominate the sample; the table is numerically degenerate".into(),
    ))
}

/// Evaluate an observable along consecutive records into a flat buffer of
/// `records.len() * dim` values. `state_offset` aligns the records with
/// the state sequence (empty when the model carries no states).
pub(crate) fn eval_series(
    table: &Table,
    observable: &Observable,
    records: &[ReturnRecord],
    states: &[usize],
    state_offset: usize,
    out: &mut Vec<f64>,
) {
    let dim = observable.dim();
    out.clear();
    out.resize(records.len() * dim, 0.0);
    for (m, rec) in records.iter().enumerate() {
        let state = if states.is_empty() {
            None
        } else {
            Some(states[state_offset + m])
        };
        observable.eval(table, rec, state, &mut out[m * dim..(m + 1) * dim]);
    }
}
