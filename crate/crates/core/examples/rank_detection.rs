//! Learning the null space without knowing the primary rank: columns are
//! ordered by measured energy and each one is tested by scaling.

use blind_null_space::experiments::verify::rank_detect_demo;
use blind_null_space::experiments::OracleKind;

fn main() {
    for (n_t, n_r) in [(3, 1), (4, 2), (6, 3), (8, 5)] {
        let demo = rank_detect_demo(n_t, n_r, 1e-5, 3, OracleKind::Ideal).unwrap();
        let flags: String = demo.columns.iter().map(|c| if c.2 { 'N' } else { '.' }).collect();
        println!(
            "n_t={n_t} n_r={n_r}: estimated {} flags {flags} cycles {} (rank tests {})",
            demo.estimated_rank, demo.total_cycles, demo.rank_cycles
        );
    }
}
