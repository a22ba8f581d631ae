//! Estimates the limit covariance of the per-return displacement under
//! i.i.d. re-centering two ways: the truncated correlation series and
//! the covariance of normalized sums over independent replicas. The two
//! must agree within their combined Monte Carlo errors, and the matrix
//! must be positive definite.

use sinai::geometry::{validate_table, TableConfig};
use sinai::sequences::SequenceModel;
use sinai::stats::{
    empirical_covariance, estimate_sigma2, positive_definiteness, Observable,
    SigmaParams,
};

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let model = SequenceModel::IidUniform;
    let observable = Observable::Displacement;

    let params = SigmaParams {
        m_max: 12,
        ..SigmaParams::for_model(&model)
    };
    let series = estimate_sigma2(&table, &model, &observable, &params, 11)?;
    println!(
        "series estimate (m_max = {}, {} replicas):",
        series.m_max, series.replicas
    );
    for i in 0..2 {
        println!(
            "    [{:+.6} {:+.6}]  se [{:.1e} {:.1e}]",
            series.matrix[(i, 0)],
            series.matrix[(i, 1)],
            series.se[(i, 0)],
            series.se[(i, 1)]
        );
    }
    println!(
        "    lag-term norms: {}",
        series
            .term_norms
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    );

    let emp = empirical_covariance(&table, &model, &observable, 2_000, 2_000, 40, 12)?;
    println!("replica estimate (n = {}, {} replicas):", emp.n, emp.replicas);
    for i in 0..2 {
        println!(
            "    [{:+.6} {:+.6}]  se [{:.1e} {:.1e}]",
            emp.matrix[(i, 0)],
            emp.matrix[(i, 1)],
            emp.se[(i, 0)],
            emp.se[(i, 1)]
        );
    }

    let pd = positive_definiteness(&series.matrix);
    println!(
        "eigenvalues {:?} -> {}",
        pd.eigenvalues,
        if pd.positive_definite {
            "positive definite"
        } else {
            "NOT positive definite"
        }
    );

    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let z = (series.matrix[(i, j)] - emp.matrix[(i, j)]).abs()
                / (series.se[(i, j)].powi(2) + emp.se[(i, j)].powi(2)).sqrt();
            worst = worst.max(z);
        }
    }
    println!("largest entrywise disagreement: {worst:.2} combined standard errors");
    Ok(())
}
