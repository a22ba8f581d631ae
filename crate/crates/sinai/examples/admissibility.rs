//! Checks a handful of two-disk tables against the admissibility
//! inequalities and prints the slack in each one.

use sinai::geometry::{free_zone_bound, Table, TableConfig};

fn main() {
    let candidates = [
        ("reference", TableConfig::new(0.36, 0.20, 0.01)),
        ("tight free zone", TableConfig::new(0.45, 0.24, 0.005)),
        ("corner disk too small", TableConfig::new(0.30, 0.20, 0.01)),
        ("channel left open", TableConfig::new(0.36, 0.13, 0.01)),
        ("disks too large", TableConfig::new(0.40, 0.32, 0.01)),
    ];
    for (label, config) in candidates {
        let rows = Table::condition_report(config);
        let ok = rows.iter().all(|c| c.pass);
        println!(
            "{label}: rbar = {}, r = {}, eps = {} -> {}",
            config.rbar,
            config.r,
            config.eps,
            if ok { "admissible" } else { "rejected" }
        );
        for c in &rows {
            println!(
                "    {:<34} lhs = {:+.6}  rhs = {:+.6}  slack = {:+.6}  [{}]",
                c.name,
                c.lhs,
                c.rhs,
                c.slack,
                if c.pass { "ok" } else { "violated" }
            );
        }
        println!(
            "    free zone bound L(rbar) = {:.6}\n",
            free_zone_bound(config.rbar)
        );
    }
}
