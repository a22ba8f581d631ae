//! Prints the derived constants of the reference table and checks the
//! mean return time predicted by the flow identity against a long orbit.

use sinai::dynamics::orbit_fixed;
use sinai::geometry::{validate_table, Centering, TableConfig};
use sinai::phase::{mean_return_time_flow_identity, measure_masses, sample_mu};
use sinai::rng::stream_rng;

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;

    println!("expansion and cone constants");
    println!("    tau_min            = {:.12}", table.tau_min());
    println!("    tau_max            = {:.12}", table.tau_max());
    println!("    a_transparent      = {:.12}", table.a_transparent());
    println!("    a_min              = {:.12}", table.a_min());
    println!("    b_max              = {:.12}", table.b_max());
    println!("    lambda             = {:.12}", table.lambda());
    println!("    expansion constant = {:.12e}", table.expansion_constant());

    let masses = measure_masses(&table);
    println!("section masses of cos(phi) dr dphi");
    println!("    gray arcs          = {:.12}", masses.gray);
    println!("    transparent sides  = {:.12}", masses.transparent);
    println!("    white boundary     = {:.12}", masses.white);
    println!("    base section       = {:.12}", masses.base);
    println!("    extended section   = {:.12}", masses.extended);
    println!(
        "    white hits per return (measure ratio) = {:.6}",
        masses.white / masses.base
    );

    // The flow identity predicts the mean return time exactly; a long
    // orbit should reproduce it to Monte Carlo accuracy.
    let predicted = mean_return_time_flow_identity(&table);
    let c = Centering::new(0.004, -0.006);
    let n = 200_000;
    let mut rng = stream_rng(2024, 0);
    let records = loop {
        let start = sample_mu(&table, &c, &mut rng);
        match orbit_fixed(&table, &c, &start, n) {
            Ok(r) => break r,
            Err(sinai::Error::SingularityProximity { .. }) => continue,
            Err(e) => return Err(e),
        }
    };
    let mean: f64 = records.iter().map(|r| r.time).sum::<f64>() / n as f64;
    let white: u64 = records.iter().map(|r| u64::from(r.white_hits)).sum();
    println!("one orbit of {n} returns at centering ({}, {})", c.x, c.y);
    println!("    mean flight time   = {mean:.6}");
    println!("    flow identity      = {predicted:.6}");
    println!("    white hit fraction = {:.6}", white as f64 / n as f64);
    Ok(())
}
