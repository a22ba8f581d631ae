//! The limit covariance of normalized Birkhoff sums of the random return
//! map, estimated two independent ways: through the truncated series of
//! shift-averaged correlation terms, and through the empirical covariance
//! of replicated sums. Agreement of the two is itself a strong check of
//! the decorrelation picture.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Table;
use crate::sequences::SequenceModel;
use crate::stats::observable::Observable;
use crate::stats::{eval_series, orbit_from_mu};

/// Tuning for the series estimator of the limit covariance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SigmaParams {
    /// Truncation lag of the correlation series.
    pub m_max: usize,
    /// Number of sequence shifts averaged (1 suffices for stationary
    /// models; nonstationary models need enough shifts for the averaged
    /// terms to settle).
    pub shifts: usize,
    /// Shifts skipped before the averaging window starts. The defining
    /// average runs over shifts `0..k`; skipping an initial transient
    /// estimates the same `k -> infinity` limit with less finite-`k`
    /// bias for models that start far from equilibrium.
    pub burn_in: usize,
    /// Independent replicas of the sequence draw.
    pub replicas: usize,
    /// Batches for standard errors (kept at thirty or more).
    pub batches: usize,
}

impl SigmaParams {
    pub fn for_model(model: &SequenceModel) -> Self {
        SigmaParams {
            m_max: 30,
            shifts: if model.is_stationary() { 1 } else { 50 },
            burn_in: 0,
            replicas: 2_000,
            batches: 40,
        }
    }
}

/// Series estimate of the limit covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaEstimate {
    /// The estimated limit covariance (symmetric, dim x dim).
    pub matrix: DMatrix<f64>,
    /// Batch-means standard error per entry.
    pub se: DMatrix<f64>,
    /// Frobenius norm of the averaged lag-m term, m = 0..=m_max; decay
    /// across lags justifies the truncation.
    pub term_norms: Vec<f64>,
    /// Mean norm of the last three lag terms relative to the lag-0 term.
    pub tail_fraction: f64,
    pub m_max: usize,
    pub shifts: usize,
    pub burn_in: usize,
    pub replicas: usize,
}

/// Estimate the limit covariance through the truncated correlation
/// series. For each replica a scatterer sequence is drawn; for each
/// shift of that sequence a fresh start is sampled from the invariant
/// measure and one orbit supplies every lag at once:
/// the lag-0 term contributes the outer square of the first value, each
/// positive lag the symmetrized outer product with the lagged value, and
/// the result averages the shifts, then the replicas.
pub fn estimate_sigma2(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    params: &SigmaParams,
    seed: u64,
) -> Result<SigmaEstimate> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    let m_max = params.m_max;
    let shifts = params.shifts.max(1);
    let burn_in = params.burn_in;
    let replicas = params.replicas.max(1);
    let batches = params.batches.clamp(1, replicas);

    let mut mean = DMatrix::<f64>::zeros(dim, dim);
    let mut batch_sums = vec![DMatrix::<f64>::zeros(dim, dim); batches];
    let mut batch_counts = vec![0usize; batches];
    let mut term_sums = vec![DMatrix::<f64>::zeros(dim, dim); m_max + 1];
    let mut values = Vec::new();

    for r in 0..replicas {
        let mut rng = crate::rng::stream_rng(seed, r as u64);
        let draw = model.draw(table, burn_in + shifts + m_max, &mut rng)?;
        let mut replica = DMatrix::<f64>::zeros(dim, dim);
        let mut replica_terms = vec![DMatrix::<f64>::zeros(dim, dim); m_max + 1];
        for shift in burn_in..burn_in + shifts {
            let window = &draw.centerings[shift..shift + m_max + 1];
            let records = orbit_from_mu(table, window, &mut rng)?;
            eval_series(table, observable, &records, &draw.states, shift, &mut values);
            let a0 = &values[0..dim];
            for m in 0..=m_max {
                let am = &values[m * dim..(m + 1) * dim];
                let term = &mut replica_terms[m];
                if m == 0 {
                    for i in 0..dim {
                        for j in 0..dim {
                            term[(i, j)] += a0[i] * a0[j];
                        }
                    }
                } else {
                    for i in 0..dim {
                        for j in 0..dim {
                            term[(i, j)] += a0[i] * am[j] + am[i] * a0[j];
                        }
                    }
                }
            }
        }
        for m in 0..=m_max {
            replica_terms[m] /= shifts as f64;
            replica += &replica_terms[m];
            term_sums[m] += &replica_terms[m];
        }
        mean += &replica;
        let b = r * batches / replicas;
        batch_sums[b] += &replica;
        batch_counts[b] += 1;
    }

    mean /= replicas as f64;
    let mut se = DMatrix::<f64>::zeros(dim, dim);
    let mut batch_means = Vec::with_capacity(batches);
    for (sum, count) in batch_sums.iter().zip(&batch_counts) {
        if *count > 0 {
            batch_means.push(sum / *count as f64);
        }
    }
    let nb = batch_means.len();
    if nb > 1 {
        for i in 0..dim {
            for j in 0..dim {
                let m = batch_means.iter().map(|b| b[(i, j)]).sum::<f64>() / nb as f64;
                let var = batch_means
                    .iter()
                    .map(|b| (b[(i, j)] - m).powi(2))
                    .sum::<f64>()
                    / (nb - 1) as f64;
                se[(i, j)] = (var / nb as f64).sqrt();
            }
        }
    }

    let term_norms: Vec<f64> = term_sums
        .iter()
        .map(|t| (t / replicas as f64).norm())
        .collect();
    let tail = term_norms.iter().rev().take(3).sum::<f64>() / 3.0;
    let tail_fraction = if term_norms[0] > 0.0 {
        tail / term_norms[0]
    } else {
        0.0
    };

    Ok(SigmaEstimate {
        matrix: mean,
        se,
        term_norms,
        tail_fraction,
        m_max,
        shifts,
        burn_in,
        replicas,
    })
}

/// Empirical covariance of the normalized Birkhoff sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalCovariance {
    /// Replicate covariance of `S_n / sqrt(n)` about the replicate mean.
    pub matrix: DMatrix<f64>,
    /// Batch-means standard error per entry.
    pub se: DMatrix<f64>,
    /// Replicate mean of `S_n / sqrt(n)` (small for centered observables).
    pub mean: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
}

/// Estimate the covariance of `S_n / sqrt(n)` over independent replicas
/// of both the scatterer sequence and the initial condition. Subtracting
/// the replicate mean removes any residual centering error, so this
/// converges to the limit covariance as `n` grows.
pub fn empirical_covariance(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    n: usize,
    replicas: usize,
    batches: usize,
    seed: u64,
) -> Result<EmpiricalCovariance> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    let sums = replicate_sums(table, model, observable, n, replicas, seed)?;
    let (matrix, se, mean) = replicate_covariance(&sums, dim, batches);
    Ok(EmpiricalCovariance {
        matrix,
        se,
        mean,
        n,
        replicas,
    })
}

/// Independent replicas of the normalized sum `S_n / sqrt(n)`, one row
/// per replica. Sequence draws and starts use per-replica streams.
pub(crate) fn replicate_sums(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let dim = observable.dim();
    let mut sums = Vec::with_capacity(replicas);
    let mut values = Vec::new();
    for r in 0..replicas {
        let mut rng = crate::rng::stream_rng(seed, r as u64);
        let draw = model.draw(table, n, &mut rng)?;
        let records = orbit_from_mu(table, &draw.centerings, &mut rng)?;
        eval_series(table, observable, &records, &draw.states, 0, &mut values);
        let mut s = vec![0.0; dim];
        for m in 0..n {
            for k in 0..dim {
                s[k] += values[m * dim + k];
            }
        }
        let scale = 1.0 / (n as f64).sqrt();
        for v in &mut s {
            *v *= scale;
        }
        sums.push(s);
    }
    Ok(sums)
}

/// Mean-subtracted covariance of replicate vectors plus batch-means
/// standard errors.
pub(crate) fn replicate_covariance(
    rows: &[Vec<f64>],
    dim: usize,
    batches: usize,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let r = rows.len();
    let mut mean = vec![0.0; dim];
    for row in rows {
        for k in 0..dim {
            mean[k] += row[k];
        }
    }
    for v in &mut mean {
        *v /= r as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in rows {
        for i in 0..dim {
            for j in 0..dim {
                cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    cov /= (r - 1).max(1) as f64;

    let b = batches.clamp(1, r);
    let mut se = DMatrix::<f64>::zeros(dim, dim);
    if b > 1 {
        let mut batch_vals = vec![DMatrix::<f64>::zeros(dim, dim); b];
        let mut counts = vec![0usize; b];
        for (idx, row) in rows.iter().enumerate() {
            let bi = idx * b / r;
            for i in 0..dim {
                for j in 0..dim {
                    batch_vals[bi][(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
            counts[bi] += 1;
        }
        let mut means = Vec::with_capacity(b);
        for (m, count) in batch_vals.iter().zip(&counts) {
            if *count > 0 {
                means.push(m / *count as f64);
            }
        }
        let nb = means.len();
        for i in 0..dim {
            for j in 0..dim {
                let m = means.iter().map(|x| x[(i, j)]).sum::<f64>() / nb as f64;
                let var = means
                    .iter()
                    .map(|x| (x[(i, j)] - m).powi(2))
                    .sum::<f64>()
                    / (nb - 1).max(1) as f64;
                se[(i, j)] = (var / nb as f64).sqrt();
            }
        }
    }
    (cov, se, mean)
}

/// Covariance of the normalized sums along a grid of horizon lengths,
/// from one orbit per replica (each horizon reads a prefix).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceGrowth {
    pub ns: Vec<usize>,
    /// Covariance matrix of `S_n / sqrt(n)` per horizon.
    pub matrices: Vec<DMatrix<f64>>,
    /// Entrywise batch-means standard errors per horizon.
    pub se: Vec<DMatrix<f64>>,
    /// Trace of each matrix: flat traces mean diffusive scaling.
    pub traces: Vec<f64>,
    /// Standard error of each trace.
    pub trace_se: Vec<f64>,
    pub replicas: usize,
}

pub fn variance_growth(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    ns: &[usize],
    replicas: usize,
    batches: usize,
    seed: u64,
) -> Result<VarianceGrowth> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    let n_top = ns.iter().copied().max().unwrap_or(0).max(1);
    let mut per_n: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(replicas); ns.len()];
    let mut values = Vec::new();
    for r in 0..replicas {
        let mut rng = crate::rng::stream_rng(seed, r as u64);
        let draw = model.draw(table, n_top, &mut rng)?;
        let records = orbit_from_mu(table, &draw.centerings, &mut rng)?;
        eval_series(table, observable, &records, &draw.states, 0, &mut values);
        let mut running = vec![0.0; dim];
        let mut cuts: Vec<(usize, usize)> = ns.iter().copied().enumerate().collect();
        cuts.sort_by_key(|&(_, n)| n);
        let mut next = 0usize;
        for m in 0..n_top {
            for k in 0..dim {
                running[k] += values[m * dim + k];
            }
            while next < cuts.len() && cuts[next].1 == m + 1 {
                let (slot, n) = cuts[next];
                let scale = 1.0 / (n as f64).sqrt();
                per_n[slot].push(running.iter().map(|v| v * scale).collect());
                next += 1;
            }
        }
    }
    let mut matrices = Vec::with_capacity(ns.len());
    let mut ses = Vec::with_capacity(ns.len());
    let mut traces = Vec::with_capacity(ns.len());
    let mut trace_se = Vec::with_capacity(ns.len());
    for rows in &per_n {
        let (cov, se, _) = replicate_covariance(rows, dim, batches);
        traces.push(cov.trace());
        trace_se.push((0..dim).map(|i| se[(i, i)].powi(2)).sum::<f64>().sqrt());
        matrices.push(cov);
        ses.push(se);
    }
    Ok(VarianceGrowth {
        ns: ns.to_vec(),
        matrices,
        se: ses,
        traces,
        trace_se,
        replicas,
    })
}

/// Eigenvalue report of a symmetric matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdReport {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

pub fn positive_definiteness(matrix: &DMatrix<f64>) -> PdReport {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(f64::NAN);
    PdReport {
        eigenvalues,
        min_eigenvalue,
        positive_definite: min_eigenvalue > 0.0,
    }
}
