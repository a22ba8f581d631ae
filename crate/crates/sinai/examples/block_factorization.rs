//! Measures how fast the characteristic function of two Birkhoff blocks
//! factorizes as the gap between the blocks grows. The defect
//! |E e^{i(X1+X2)} - E e^{iX1} E e^{iX2}| decays at the correlation rate,
//! which is the estimate behind the limit-theorem machinery for random
//! scatterer sequences.

use sinai::geometry::{validate_table, TableConfig};
use sinai::sequences::SequenceModel;
use sinai::stats::{gouezel_covariance, BlockLayout, Observable};

fn main() -> sinai::Result<()> {
    let table = validate_table(TableConfig::new(0.36, 0.20, 0.01))?;
    let model = SequenceModel::IidUniform;
    let observable = Observable::FlightTime;
    let frequency = [3.0];

    println!("single-return blocks, frequency t = {}", frequency[0]);
    println!("{:>4} {:>12} {:>12}", "gap", "defect", "se");
    for gap in [0, 1, 2, 4, 6, 8, 12, 16, 24] {
        let layout = BlockLayout {
            first: 1,
            gap,
            second: 1,
        };
        let rep = gouezel_covariance(
            &table, &model, &observable, &layout, &frequency, 30_000, 40, 7,
        )?;
        println!("{:>4} {:>12.6} {:>12.2e}", gap, rep.modulus, rep.se);
    }
    Ok(())
}
