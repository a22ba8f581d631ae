//! Estimates the lagged pair correlations of the centered flight time
//! under i.i.d. re-centering of the white disk. The norms should fall
//! into the Monte Carlo noise within a handful of returns.

use sinai::geometry::{validate_table, TableConfig};
use sinai::sequences::SequenceModel;
use sinai::stats::{pair_correlation, CorrelationParams, Observable};

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let params = CorrelationParams {
        max_lag: 20,
        replicas: 30_000,
        batches: 40,
    };
    let rep = pair_correlation(
        &table,
        &SequenceModel::IidUniform,
        &Observable::FlightTime,
        &params,
        123,
    )?;

    println!("{} replicas, flight time observable", rep.replicas);
    println!("{:>4} {:>14} {:>12} {:>8}", "lag", "C(m)", "se", "|C|/C0");
    let c0 = rep.norms[0];
    for (k, lag) in rep.lags.iter().enumerate() {
        println!(
            "{:>4} {:>14.6e} {:>12.2e} {:>8.4}",
            lag,
            rep.matrices[k][(0, 0)],
            rep.se[k][(0, 0)],
            rep.norms[k] / c0
        );
    }
    Ok(())
}
