//! Invariant-measure verification: the pushforward of fresh samples
//! under one return must be statistically indistinguishable from fresh
//! samples, marginal by marginal.

use serde::Serialize;

use crate::dynamics::step;
use crate::error::{Error, Result};
use crate::geometry::{Centering, Table};
use crate::phase::{sample_mu, PhasePoint};
use crate::stats::clt::ks_two_sample;

/// One two-sample comparison: the named marginal on one wall.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalCheck {
    pub wall: String,
    pub marginal: &'static str,
    pub pushed: usize,
    pub fresh: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub centering: Centering,
    pub samples: usize,
    /// Starts discarded for singularity proximity (resampled).
    pub discarded: usize,
    pub alpha: f64,
    /// Bonferroni-corrected per-test threshold.
    pub threshold: f64,
    pub tests: Vec<MarginalCheck>,
    pub min_p: f64,
    pub pass: bool,
}

/// Compare the pushforward of `samples` invariant-measure draws under
/// one return against `samples` fresh draws: per wall, two-sample
/// Kolmogorov-Smirnov on the `r` and `phi` marginals, Bonferroni-corrected
/// at level `alpha`.
pub fn pushforward_invariance(
    table: &Table,
    c: &Centering,
    samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<InvarianceReport> {
    table.check_centering(c)?;
    let mut rng = crate::rng::stream_rng(seed, 0);

    let mut fresh: Vec<PhasePoint> = Vec::with_capacity(samples);
    for _ in 0..samples {
        fresh.push(sample_mu(table, c, &mut rng));
    }

    let mut pushed: Vec<PhasePoint> = Vec::with_capacity(samples);
    let mut discarded = 0usize;
    while pushed.len() < samples {
        let x = sample_mu(table, c, &mut rng);
        match step(table, c, &x) {
            Ok(rec) => pushed.push(rec.to),
            Err(Error::SingularityProximity { .. }) => {
                discarded += 1;
                if discarded > samples / 10 + 1_000 {
                    return Err(Error::Internal(
                        "singularity discards dominate the pushforward sample".into(),
                    ));
                }
            }
            Err(e) => return Err(e),
        }
    }

    // Bucket both clouds by wall.
    let bucket = |points: &[PhasePoint]| -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut by_wall = vec![(Vec::new(), Vec::new()); 8];
        for p in points {
            let slot = &mut by_wall[p.wall.index() - 1];
            slot.0.push(p.r);
            slot.1.push(p.phi);
        }
        by_wall
    };
    let mut fresh_walls = bucket(&fresh);
    let mut pushed_walls = bucket(&pushed);

    let mut tests = Vec::with_capacity(16);
    for w in 0..8 {
        let (fr, fphi) = &mut fresh_walls[w];
        let (pr, pphi) = &mut pushed_walls[w];
        if fr.is_empty() || pr.is_empty() {
            return Err(Error::Internal(format!(
                "wall {w} received no samples; increase the sample count"
            )));
        }
        let wall_name = format!("W{}", w + 1);
        let kr = ks_two_sample(pr, fr);
        tests.push(MarginalCheck {
            wall: wall_name.clone(),
            marginal: "r",
            pushed: pr.len(),
            fresh: fr.len(),
            statistic: kr.statistic,
            p_value: kr.p_value,
        });
        let kp = ks_two_sample(pphi, fphi);
        tests.push(MarginalCheck {
            wall: wall_name,
            marginal: "phi",
            pushed: pphi.len(),
            fresh: fphi.len(),
            statistic: kp.statistic,
            p_value: kp.p_value,
        });
    }

    let threshold = alpha / tests.len() as f64;
    let min_p = tests.iter().map(|t| t.p_value).fold(f64::INFINITY, f64::min);
    Ok(InvarianceReport {
        centering: *c,
        samples,
        discarded,
        alpha,
        threshold,
        tests,
        min_p,
        pass: min_p > threshold,
    })
}
