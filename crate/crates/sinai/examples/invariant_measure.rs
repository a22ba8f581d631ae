//! Tests that one step of the return map preserves the cos(phi) dr dphi
//! measure: pushforward samples against fresh samples, per-wall
//! Kolmogorov-Smirnov on both marginals.

use sinai::geometry::{validate_table, Centering, TableConfig};
use sinai::stats::pushforward_invariance;

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let samples = 60_000;
    let alpha = 1e-3;

    for (label, c) in [
        ("centered white disk", Centering::ZERO),
        ("offset white disk", Centering::new(0.007, -0.005)),
    ] {
        let rep = pushforward_invariance(&table, &c, samples, alpha, 42)?;
        println!(
            "{label} ({}, {}): {} samples, {} tests, Bonferroni threshold {:.2e}",
            c.x,
            c.y,
            rep.samples,
            rep.tests.len(),
            rep.threshold
        );
        for t in &rep.tests {
            println!(
                "    {:<3} {:<4} D = {:.5}  p = {:.4}",
                t.wall, t.marginal, t.statistic, t.p_value
            );
        }
        println!(
            "    min p = {:.4} -> {}\n",
            rep.min_p,
            if rep.pass { "measure preserved" } else { "REJECTED" }
        );
    }
    Ok(())
}
