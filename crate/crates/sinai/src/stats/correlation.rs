//! Decay of correlations along the random composition, and the
//! characteristic-function factorization of separated Birkhoff blocks
//! (the quantitative independence property behind the limit theorems).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Table;
use crate::sequences::SequenceModel;
use crate::stats::observable::Observable;
use crate::stats::{eval_series, orbit_from_mu};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationParams {
    /// Largest lag reported; one orbit of this length serves every lag.
    pub max_lag: usize,
    pub replicas: usize,
    pub batches: usize,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams {
            max_lag: 30,
            replicas: 2_000,
            batches: 40,
        }
    }
}

/// Lagged pair correlations `C(m) = E[A_0 (x) A_m]` of a fiberwise
/// centered observable, with entrywise batch-means errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub lags: Vec<usize>,
    pub matrices: Vec<DMatrix<f64>>,
    pub se: Vec<DMatrix<f64>>,
    /// Frobenius norm per lag.
    pub norms: Vec<f64>,
    pub replicas: usize,
}

/// Estimate the pair correlations of the observable at every lag up to
/// `max_lag`. Each replica draws one scatterer sequence, one start from
/// the invariant measure, and one orbit; for stationary models this is
/// the autocorrelation of the stationary chain of returns.
pub fn pair_correlation(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    params: &CorrelationParams,
    seed: u64,
) -> Result<CorrelationReport> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    let lags = params.max_lag;
    let replicas = params.replicas.max(1);
    let batches = params.batches.clamp(1, replicas);

    let mut sums = vec![DMatrix::<f64>::zeros(dim, dim); lags + 1];
    let mut batch_sums = vec![vec![DMatrix::<f64>::zeros(dim, dim); lags + 1]; batches];
    let mut batch_counts = vec![0usize; batches];
    let mut values = Vec::new();

    for r in 0..replicas {
        let mut rng = crate::rng::stream_rng(seed, r as u64);
        let draw = model.draw(table, lags + 1, &mut rng)?;
        let records = orbit_from_mu(table, &draw.centerings, &mut rng)?;
        eval_series(table, observable, &records, &draw.states, 0, &mut values);
        let b = r * batches / replicas;
        let a0 = values[0..dim].to_vec();
        for m in 0..=lags {
            let am = &values[m * dim..(m + 1) * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let v = a0[i] * am[j];
                    sums[m][(i, j)] += v;
                    batch_sums[b][m][(i, j)] += v;
                }
            }
        }
        batch_counts[b] += 1;
    }

    let mut matrices = Vec::with_capacity(lags + 1);
    let mut se = Vec::with_capacity(lags + 1);
    let mut norms = Vec::with_capacity(lags + 1);
    for m in 0..=lags {
        let mean = &sums[m] / replicas as f64;
        let mut err = DMatrix::<f64>::zeros(dim, dim);
        let batch_means: Vec<DMatrix<f64>> = batch_sums
            .iter()
            .zip(&batch_counts)
            .filter(|(_, &c)| c > 0)
            .map(|(bs, &c)| &bs[m] / c as f64)
            .collect();
        let nb = batch_means.len();
        if nb > 1 {
            for i in 0..dim {
                for j in 0..dim {
                    let bm = batch_means.iter().map(|x| x[(i, j)]).sum::<f64>() / nb as f64;
                    let var = batch_means
                        .iter()
                        .map(|x| (x[(i, j)] - bm).powi(2))
                        .sum::<f64>()
                        / (nb - 1) as f64;
                    err[(i, j)] = (var / nb as f64).sqrt();
                }
            }
        }
        norms.push(mean.norm());
        matrices.push(mean);
        se.push(err);
    }

    Ok(CorrelationReport {
        lags: (0..=lags).collect(),
        matrices,
        se,
        norms,
        replicas,
    })
}

/// Two Birkhoff blocks separated by a gap: the first `first` returns,
/// then `gap` returns skipped, then `second` returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub first: usize,
    pub gap: usize,
    pub second: usize,
}

impl BlockLayout {
    pub fn total(&self) -> usize {
        self.first + self.gap + self.second
    }
}

/// Characteristic-function factorization defect of two separated blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GouezelReport {
    /// `|E e^{i(X1+X2)} - E e^{iX1} E e^{iX2}|`.
    pub modulus: f64,
    /// Scale of the Monte Carlo noise on the modulus (batch means).
    pub se: f64,
    pub layout: BlockLayout,
    pub replicas: usize,
}

/// Estimate the factorization defect of the characteristic functions of
/// two separated Birkhoff blocks of the observable paired with the
/// frequency vector: `X1` sums the first block, `X2` the block after the
/// gap, and the defect vanishes at the rate of correlation decay as the
/// gap grows. Layouts with an empty block factorize exactly and return
/// zero without sampling.
pub fn gouezel_covariance(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    layout: &BlockLayout,
    frequency: &[f64],
    replicas: usize,
    batches: usize,
    seed: u64,
) -> Result<GouezelReport> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    assert_eq!(
        frequency.len(),
        dim,
        "frequency vector must match the observable dimension"
    );
    if layout.first == 0 || layout.second == 0 {
        return Ok(GouezelReport {
            modulus: 0.0,
            se: 0.0,
            layout: *layout,
            replicas: 0,
        });
    }
    let replicas = replicas.max(1);
    let batches = batches.clamp(1, replicas);
    let total = layout.total();

    // Complex means of e^{i(X1+X2)}, e^{iX1}, e^{iX2}, overall and per batch.
    let mut z12 = (0.0f64, 0.0f64);
    let mut z1 = (0.0f64, 0.0f64);
    let mut z2 = (0.0f64, 0.0f64);
    let mut bz12 = vec![(0.0f64, 0.0f64); batches];
    let mut bz1 = vec![(0.0f64, 0.0f64); batches];
    let mut bz2 = vec![(0.0f64, 0.0f64); batches];
    let mut counts = vec![0usize; batches];
    let mut values = Vec::new();

    for r in 0..replicas {
        let mut rng = crate::rng::stream_rng(seed, r as u64);
        let draw = model.draw(table, total, &mut rng)?;
        let records = orbit_from_mu(table, &draw.centerings, &mut rng)?;
        eval_series(table, observable, &records, &draw.states, 0, &mut values);
        let project = |m: usize| -> f64 {
            (0..dim).map(|k| frequency[k] * values[m * dim + k]).sum()
        };
        let x1: f64 = (0..layout.first).map(project).sum();
        let x2: f64 = (layout.first + layout.gap..total).map(project).sum();
        let e12 = ((x1 + x2).cos(), (x1 + x2).sin());
        let e1 = (x1.cos(), x1.sin());
        let e2 = (x2.cos(), x2.sin());
        let b = r * batches / replicas;
        for (acc, bacc, v) in [
            (&mut z12, &mut bz12[b], e12),
            (&mut z1, &mut bz1[b], e1),
            (&mut z2, &mut bz2[b], e2),
        ] {
            acc.0 += v.0;
            acc.1 += v.1;
            bacc.0 += v.0;
            bacc.1 += v.1;
        }
        counts[b] += 1;
    }

    let nr = replicas as f64;
    let defect = |m12: (f64, f64), m1: (f64, f64), m2: (f64, f64)| -> (f64, f64) {
        (
            m12.0 - (m1.0 * m2.0 - m1.1 * m2.1),
            m12.1 - (m1.0 * m2.1 + m1.1 * m2.0),
        )
    };
    let v = defect(
        (z12.0 / nr, z12.1 / nr),
        (z1.0 / nr, z1.1 / nr),
        (z2.0 / nr, z2.1 / nr),
    );
    let modulus = v.0.hypot(v.1);

    let mut defects = Vec::with_capacity(batches);
    for b in 0..batches {
        if counts[b] == 0 {
            continue;
        }
        let c = counts[b] as f64;
        defects.push(defect(
            (bz12[b].0 / c, bz12[b].1 / c),
            (bz1[b].0 / c, bz1[b].1 / c),
            (bz2[b].0 / c, bz2[b].1 / c),
        ));
    }
    let nb = defects.len();
    let se = if nb > 1 {
        let mr = defects.iter().map(|d| d.0).sum::<f64>() / nb as f64;
        let mi = defects.iter().map(|d| d.1).sum::<f64>() / nb as f64;
        let vr = defects.iter().map(|d| (d.0 - mr).powi(2)).sum::<f64>() / (nb - 1) as f64;
        let vi = defects.iter().map(|d| (d.1 - mi).powi(2)).sum::<f64>() / (nb - 1) as f64;
        ((vr + vi) / nb as f64).sqrt()
    } else {
        f64::NAN
    };

    Ok(GouezelReport {
        modulus,
        se,
        layout: *layout,
        replicas,
    })
}
