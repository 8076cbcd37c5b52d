//! Median convergence of the off-diagonal norm for three accuracies on a
//! 3-antenna secondary transmitter. Writes CSVs when given a directory.

use std::path::PathBuf;

use blind_null_space::experiments::figures::{run_figure, Overrides};

fn main() {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let overrides = Overrides {
        trials: Some(50),
        ..Overrides::default()
    };
    let summary = run_figure(4, &overrides, out.as_deref()).unwrap();
    for s in &summary.series {
        let p2: Vec<String> = s.median_p2_per_cycle.iter().map(|x| format!("{x:.1e}")).collect();
        println!("{:<22} {}", s.label, p2.join(" "));
    }
    for (label, db) in &summary.first_cycle_db {
        println!("{label}: first cycle {db:.1} dB");
    }
}
