//! Normality diagnostics for the normalized Birkhoff sums S_n / sqrt(n)
//! of the displacement: whitened component KS tests plus Mardia's
//! multivariate skewness and kurtosis.

use sinai::geometry::{validate_table, TableConfig};
use sinai::sequences::SequenceModel;
use sinai::stats::{clt_diagnostics, CltParams, Observable};

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let params = CltParams {
        n: 300,
        replicas: 1_500,
    };
    let rep = clt_diagnostics(
        &table,
        &SequenceModel::IidUniform,
        &Observable::Displacement,
        &params,
        5,
    )?;

    println!(
        "{} replicas of S_n / sqrt(n) at n = {}",
        rep.replicas, rep.n
    );
    println!("sample covariance:");
    for i in 0..2 {
        println!(
            "    [{:+.6} {:+.6}]",
            rep.sigma_hat[(i, 0)],
            rep.sigma_hat[(i, 1)]
        );
    }
    println!("replicate mean: ({:+.5}, {:+.5})", rep.mean[0], rep.mean[1]);
    for (k, ks) in rep.component_ks.iter().enumerate() {
        println!(
            "whitened component {k}: KS D = {:.4}, p = {:.4}",
            ks.statistic, ks.p_value
        );
    }
    println!(
        "Mardia skewness = {:.4} (p = {:.4}), kurtosis z = {:+.3}",
        rep.mardia_skewness, rep.mardia_skewness_p, rep.mardia_kurtosis_z
    );
    Ok(())
}
