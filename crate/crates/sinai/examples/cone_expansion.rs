//! Sweeps cone invariance and the expansion bounds over random starts
//! and random white-disk centerings: the unstable cone must map strictly
//! into itself, every leg must expand the p-metric by at least lambda,
//! and the n-step Euclidean growth must clear the certified floor
//! C lambda^n.

use sinai::dynamics::hyperbolicity_check;
use sinai::geometry::{validate_table, TableConfig};

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let rep = hyperbolicity_check(&table, 40, 500, 200, 20, 9);

    println!(
        "{} centerings x {} starts ({} discarded near singularities)",
        rep.centerings, rep.samples_per_centering, rep.discarded
    );
    println!(
        "cone checks: {} with {} violations",
        rep.cone_checks, rep.cone_violations
    );
    println!(
        "per-leg p-metric expansion: min {:.9} over {} legs (lambda = {:.9})",
        rep.min_leg_expansion, rep.legs_checked, rep.lambda
    );
    println!(
        "Euclidean floor C = {:.6e}; worst ratio |DF^n v| / (C lambda^n |v|):",
        rep.expansion_constant
    );
    for g in &rep.euclidean {
        println!("    n = {:>2}  min ratio = {:.3}", g.n, g.min_ratio);
    }
    println!("{}", if rep.pass { "uniform hyperbolicity holds" } else { "BOUND VIOLATED" });
    Ok(())
}
