//! Blind null-space learning on a random channel with a known primary rank.

use blind_null_space::bnsl::{run_bnsl, BnslConfig, Extraction};
use blind_null_space::experiments::fixtures::{channel, trial_rng};
use blind_null_space::oracle::IdealOracle;

fn main() {
    let (n_r, n_t) = (2, 5);
    let ch = channel(n_r, n_t, &mut trial_rng(11, 0)).unwrap();
    let g = ch.gram();
    let config = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..BnslConfig::with_eta(1e-4)
    };
    let mut oracle = IdealOracle::identity(g.clone());
    let mut report = run_bnsl(&mut oracle, &config).unwrap();
    report.trace.annotate(&g, n_t - n_r).unwrap();

    println!("sweep  phase  cycles    P_k          interference");
    for p in report.trace.phases.iter().filter(|p| p.l == 0 && p.m == 1) {
        println!(
            "{:>5}  {:>5}  {:>7}  {:.4e}  {:.4e}",
            p.sweep,
            p.k,
            p.cycle_count,
            p.off_norm.unwrap(),
            p.interference_sq.unwrap()
        );
    }
    println!(
        "stop {:?} after {} cycles; null space of dimension {} leaks {:.3e}",
        report.stop,
        report.total_cycles,
        report.t.cols(),
        report.interference(&g).unwrap()
    );
}
