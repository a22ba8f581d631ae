//! Traces a short orbit of the return map with a freshly re-drawn white
//! disk before every return and prints one line per return.

use sinai::geometry::{validate_table, TableConfig};
use sinai::phase::sample_mu;
use sinai::rng::stream_rng;
use sinai::sequences::SequenceModel;

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let model = SequenceModel::IidUniform;
    let n = 25;

    let mut rng = stream_rng(7, 0);
    let draw = model.draw(&table, n, &mut rng)?;
    let start = sample_mu(&table, &draw.centerings[0], &mut rng);
    let records = sinai::dynamics::orbit(&table, &draw.centerings, &start)?;

    println!(
        "{:>3} {:>5} {:>12} {:>12} {:>10} {:>10} {:>10} {:>5} {:>6}",
        "k", "wall", "r", "phi", "tau", "dx", "dy", "legs", "white"
    );
    for (k, rec) in records.iter().enumerate() {
        println!(
            "{:>3} {:>5} {:>12.6} {:>12.6} {:>10.6} {:>10.6} {:>10.6} {:>5} {:>6}",
            k + 1,
            format!("{:?}", rec.to.wall),
            rec.to.r,
            rec.to.phi,
            rec.time,
            rec.displacement[0],
            rec.displacement[1],
            rec.legs,
            rec.white_hits,
        );
    }

    let time: f64 = records.iter().map(|r| r.time).sum();
    let dx: f64 = records.iter().map(|r| r.displacement[0]).sum();
    let dy: f64 = records.iter().map(|r| r.displacement[1]).sum();
    println!("total flight time {time:.6}, net displacement ({dx:+.6}, {dy:+.6})");
    Ok(())
}
