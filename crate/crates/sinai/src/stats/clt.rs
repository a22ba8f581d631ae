//! Normality diagnostics for normalized Birkhoff sums: whitened
//! component-wise Kolmogorov-Smirnov tests plus Mardia's multivariate
//! skewness and kurtosis statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::sequences::SequenceModel;
use crate::stats::covariance::{replicate_covariance, replicate_sums};
use crate::stats::observable::Observable;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CltParams {
    /// Returns summed per replica before normalizing by `sqrt(n)`.
    pub n: usize,
    pub replicas: usize,
}

impl Default for CltParams {
    fn default() -> Self {
        CltParams {
            n: 400,
            replicas: 2_000,
        }
    }
}

/// One-sample Kolmogorov-Smirnov comparison against the standard normal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltReport {
    /// Sample covariance of the normalized sums (the plug-in limit estimate).
    pub sigma_hat: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// KS result per whitened component.
    pub component_ks: Vec<KsResult>,
    /// Mardia skewness statistic and its chi-squared p-value.
    pub mardia_skewness: f64,
    pub mardia_skewness_p: f64,
    /// Mardia kurtosis z-score (standard normal under the null).
    pub mardia_kurtosis_z: f64,
    /// Whitened normalized sums, one row per replica. Kept for quantile
    /// plots; omitted from serialized reports.
    #[serde(skip)]
    pub whitened: Vec<Vec<f64>>,
    pub n: usize,
    pub replicas: usize,
}

/// Asymptotic Kolmogorov p-value with the small-sample correction
/// `p = Q((sqrt(n) + 0.12 + 0.11/sqrt(n)) D)`, `Q(x) = 2 sum (-1)^{j-1} exp(-2 j^2 x^2)`.
/// `n` is the sample size (or the effective size for two samples).
fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    if x < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0f64;
    for j in 1..=100 {
        let term = 2.0 * (-2.0 * (j as f64).powi(2) * x * x).exp();
        p += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn ks_against_standard_normal(sample: &mut [f64]) -> KsResult {
    let normal = Normal::new(0.0, 1.0).unwrap();
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len();
    let mut d = 0.0f64;
    for (i, &z) in sample.iter().enumerate() {
        let cdf = normal.cdf(z);
        let hi = (i as f64 + 1.0) / n as f64 - cdf;
        let lo = cdf - i as f64 / n as f64;
        d = d.max(hi).max(lo);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n as f64),
    }
}

/// Two-sample Kolmogorov-Smirnov comparison. Sorts both samples in
/// place; the p-value is asymptotic with the effective sample size
/// `na nb / (na + nb)`.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let effective = na * nb / (na + nb);
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, effective),
    }
}

/// Simulate `replicas` normalized sums `S_n / sqrt(n)`, whiten them with
/// the sample covariance, and test each component and the joint moments
/// for normality. Fails if the sample covariance is numerically singular,
/// since whitening is then meaningless.
pub fn clt_diagnostics(
    table: &Table,
    model: &SequenceModel,
    observable: &Observable,
    params: &CltParams,
    seed: u64,
) -> Result<CltReport> {
    model.validate(table)?;
    observable.validate(model)?;
    let dim = observable.dim();
    let replicas = params.replicas.max(8);
    let sums = replicate_sums(table, model, observable, params.n, replicas, seed)?;
    let (sigma_hat, _, mean) = replicate_covariance(&sums, dim, 1);

    let eig = sigma_hat.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(min_eig > 1e-10 * max_eig.max(1e-300)) {
        return Err(Error::Model(format!(
            "sample covariance is numerically singular (eigenvalues {min_eig:.3e} .. {max_eig:.3e}); \
             whitened normality diagnostics are undefined"
        )));
    }
    let mut inv_sqrt = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let col = eig.eigenvectors.column(k);
        let w = 1.0 / eig.eigenvalues[k].sqrt();
        for i in 0..dim {
            for j in 0..dim {
                inv_sqrt[(i, j)] += w * col[i] * col[j];
            }
        }
    }

    // Whitened replicas.
    let mut z = vec![DVector::<f64>::zeros(dim); replicas];
    for (r, zr) in z.iter_mut().enumerate() {
        let centered =
            DVector::from_iterator(dim, (0..dim).map(|k| sums[r][k] - mean[k]));
        *zr = &inv_sqrt * centered;
    }

    let mut component_ks = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut column: Vec<f64> = z.iter().map(|v| v[k]).collect();
        component_ks.push(ks_against_standard_normal(&mut column));
    }

    // Mardia's statistics on the whitened sample.
    let rf = replicas as f64;
    let mut b1 = 0.0f64;
    for zi in &z {
        for zj in &z {
            b1 += zi.dot(zj).powi(3);
        }
    }
    b1 /= rf * rf;
    let skew_stat = rf * b1 / 6.0;
    let skew_df = (dim * (dim + 1) * (dim + 2)) as f64 / 6.0;
    let chi = ChiSquared::new(skew_df).unwrap();
    let mardia_skewness_p = 1.0 - chi.cdf(skew_stat);

    let b2 = z.iter().map(|v| v.norm_squared().powi(2)).sum::<f64>() / rf;
    let d = dim as f64;
    let kurt_mean = d * (d + 2.0);
    let kurt_sd = (8.0 * d * (d + 2.0) / rf).sqrt();
    let mardia_kurtosis_z = (b2 - kurt_mean) / kurt_sd;

    Ok(CltReport {
        sigma_hat,
        mean,
        component_ks,
        mardia_skewness: skew_stat,
        mardia_skewness_p,
        mardia_kurtosis_z,
        whitened: z.iter().map(|v| v.iter().copied().collect()).collect(),
        n: params.n,
        replicas,
    })
}
