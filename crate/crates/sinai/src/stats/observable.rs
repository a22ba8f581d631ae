//! Observables of the random return map: vector-valued functions of one
//! return, centered so that their mean under the invariant measure
//! vanishes on every fiber of the scatterer sequence.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::ReturnRecord;
use crate::error::{Error, Result};
use crate::geometry::{Centering, Table};
use crate::phase::{mean_return_time_flow_identity, sample_mu};
use crate::sequences::SequenceModel;

/// A vector-valued observable evaluated on one return record.
///
/// The built-in observables are exactly centered: the flow identity pins
/// the mean return time for every centering, and the displacement has
/// zero mean by time-reversal symmetry, so no Monte Carlo centering is
/// needed and the long-run covariance estimators carry no centering bias.
#[derive(Clone)]
pub enum Observable {
    /// Return time minus its invariant mean (scalar).
    FlightTime,
    /// Plane displacement of the return (two components).
    Displacement,
    /// Per-state gain times the centered return time (scalar). Requires
    /// a Markov sequence model; the gain indexes its states.
    Tabulated { gains: Vec<f64> },
    /// Arbitrary function of the record (and the Markov state, if any).
    Custom {
        dim: usize,
        f: Arc<dyn Fn(&ReturnRecord, Option<usize>, &mut [f64]) + Send + Sync>,
    },
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::FlightTime => write!(f, "FlightTime"),
            Observable::Displacement => write!(f, "Displacement"),
            Observable::Tabulated { gains } => {
                write!(f, "Tabulated {{ gains: {gains:?} }}")
            }
            Observable::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

impl Observable {
    pub fn dim(&self) -> usize {
        match self {
            Observable::FlightTime => 1,
            Observable::Displacement => 2,
            Observable::Tabulated { .. } => 1,
            Observable::Custom { dim, .. } => *dim,
        }
    }

    /// Check compatibility with a sequence model.
    pub fn validate(&self, model: &SequenceModel) -> Result<()> {
        match self {
            Observable::Tabulated { gains } => match model {
                SequenceModel::Markov(m) if m.states.len() == gains.len() => Ok(()),
                SequenceModel::Markov(m) => Err(Error::Model(format!(
                    "tabulated observable has {} gains for {} Markov states",
                    gains.len(),
                    m.states.len()
                ))),
                _ => Err(Error::Model(
                    "tabulated observable requires a Markov sequence model".into(),
                )),
            },
            _ => Ok(()),
        }
    }

    /// Evaluate on one return. `state` is the Markov state driving this
    /// return, when the model has states. `out` must have length `dim()`.
    pub fn eval(
        &self,
        table: &Table,
        rec: &ReturnRecord,
        state: Option<usize>,
        out: &mut [f64],
    ) {
        debug_assert_eq!(out.len(), self.dim());
        match self {
            Observable::FlightTime => {
                out[0] = rec.time - mean_return_time_flow_identity(table);
            }
            Observable::Displacement => {
                out[0] = rec.displacement[0];
                out[1] = rec.displacement[1];
            }
            Observable::Tabulated { gains } => {
                let s = state.expect("tabulated observable needs a state sequence");
                out[0] = gains[s] * (rec.time - mean_return_time_flow_identity(table));
            }
            Observable::Custom { f, .. } => f(rec, state, out),
        }
    }
}

/// Monte Carlo estimate of the observable's mean on one fiber: sample the
/// invariant measure, apply one return with the given centering, average.
/// Returns per-component means and standard errors. Samples whose return
/// grazes a singularity are redrawn.
pub fn observable_mean(
    table: &Table,
    c: &Centering,
    state: Option<usize>,
    observable: &Observable,
    samples: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let dim = observable.dim();
    let mut sum = vec![0.0; dim];
    let mut sum2 = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let mut rng = crate::rng::stream_rng(seed, 0);
    let mut done = 0usize;
    while done < samples {
        let x = sample_mu(table, c, &mut rng);
        let Ok(rec) = crate::dynamics::step(table, c, &x) else {
            continue;
        };
        observable.eval(table, &rec, state, &mut buf);
        for k in 0..dim {
            sum[k] += buf[k];
            sum2[k] += buf[k] * buf[k];
        }
        done += 1;
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se: Vec<f64> = (0..dim)
        .map(|k| ((sum2[k] / n - mean[k] * mean[k]).max(0.0) / n).sqrt())
        .collect();
    (mean, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{validate_table, TableConfig};

    fn table() -> Table {
        validate_table(TableConfig::new(0.36, 0.20, 0.01)).unwrap()
    }

    #[test]
    fn flight_time_is_centered_on_every_fiber() {
        let t = table();
        for (k, c) in [
            Centering::ZERO,
            Centering::new(0.0099, 0.0),
            Centering::new(-0.006, 0.007),
        ]
        .iter()
        .enumerate()
        {
            let (mean, se) = observable_mean(&t, c, None, &Observable::FlightTime, 40_000, 31 + k as u64);
            assert!(
                mean[0].abs() < 4.0 * se[0].max(1e-4),
                "flight time mean {} (se {}) not centered at {c:?}",
                mean[0],
                se[0]
            );
        }
    }

    #[test]
    fn displacement_is_centered_by_time_reversal() {
        let t = table();
        let c = Centering::new(0.008, -0.003);
        let (mean, se) = observable_mean(&t, &c, None, &Observable::Displacement, 40_000, 37);
        for k in 0..2 {
            assert!(
                mean[k].abs() < 4.0 * se[k].max(1e-4),
                "displacement component {k} mean {} (se {})",
                mean[k],
                se[k]
            );
        }
    }

    #[test]
    fn tabulated_requires_matching_markov_model() {
        use crate::sequences::{InitialLaw, MarkovModel};
        use nalgebra::DMatrix;
        let obs = Observable::Tabulated { gains: vec![1.0, -1.0] };
        let t = table();
        let good = SequenceModel::Markov(MarkovModel {
            states: vec![Centering::ZERO, Centering::new(0.005, 0.0)],
            transition: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]),
            initial: InitialLaw::Stationary,
        });
        assert!(obs.validate(&good).is_ok());
        assert!(obs.validate(&SequenceModel::IidUniform).is_err());
        let _ = t;
    }

    #[test]
    fn custom_observables_evaluate() {
        let obs = Observable::Custom {
            dim: 2,
            f: Arc::new(|rec, _state, out| {
                out[0] = rec.time;
                out[1] = rec.legs as f64;
            }),
        };
        assert_eq!(obs.dim(), 2);
        assert_eq!(format!("{obs:?}"), "Custom { dim: 2 }");
    }
}
