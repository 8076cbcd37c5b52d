//! Reduced-complexity learning, one null direction at a time through small
//! equivalent channels, against the plain algorithm on the same channel.

use blind_null_space::bnsl::{run_bnsl, run_rc_bnsl, BnslConfig, Extraction, RcConfig};
use blind_null_space::experiments::fixtures::{channel, trial_rng};
use blind_null_space::oracle::IdealOracle;

fn main() {
    let (n_r, n_t, eta) = (2, 8, 1e-3);
    let ch = channel(n_r, n_t, &mut trial_rng(5, 0)).unwrap();
    let g = ch.gram();

    let inner = BnslConfig::with_eta(eta);
    let mut oracle = IdealOracle::identity(g.clone());
    let rc = run_rc_bnsl(&mut oracle, Some(n_r), None, &RcConfig { inner: inner.clone(), ..RcConfig::default() }).unwrap();
    println!(
        "reduced: {} stages, {} cycles, interference {:.3e}",
        rc.stages.len(),
        rc.total_cycles,
        rc.interference(&g).unwrap()
    );

    let mut oracle = IdealOracle::identity(g.clone());
    let plain = run_bnsl(&mut oracle, &BnslConfig { extraction: Extraction::KnownRank(n_r), ..inner }).unwrap();
    println!(
        "plain:   {} cycles, interference {:.3e}",
        plain.total_cycles,
        plain.interference(&g).unwrap()
    );
}
