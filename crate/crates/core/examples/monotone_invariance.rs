//! The learner only compares measurements, so any increasing response map
//! yields the same decisions.

use blind_null_space::bnsl::{run_bnsl, BnslConfig, Extraction};
use blind_null_space::experiments::fixtures::{random_psd, trial_rng};
use blind_null_space::experiments::verify::traces_identical;
use blind_null_space::oracle::{IdealOracle, ResponseFamily};

fn main() {
    let g = random_psd(5, &mut trial_rng(9, 0));
    let config = BnslConfig {
        extraction: Extraction::None,
        ..BnslConfig::with_eta(1e-3)
    };
    let run = |family: ResponseFamily| {
        let mut oracle = IdealOracle::new(g.clone(), family).unwrap();
        run_bnsl(&mut oracle, &config).unwrap()
    };
    let reference = run(ResponseFamily::Identity);
    for family in ResponseFamily::standard_set() {
        let report = run(family.clone());
        println!("{family:?}: identical trace = {}", traces_identical(&reference, &report));
    }
}
