//! One blind Jacobi rotation next to the closed-form rotation computed from
//! the hidden matrix.

use blind_null_space::bnsl::blind_rotation_params;
use blind_null_space::experiments::fixtures::{random_psd, trial_rng};
use blind_null_space::linalg::{closed_form_rotation, rotate, ComplexMatrix};
use blind_null_space::linesearch::LineSearchOptions;
use blind_null_space::oracle::{IdealOracle, QueryOracle};

fn main() {
    let mut rng = trial_rng(7, 0);
    let g = random_psd(4, &mut rng);
    let w = ComplexMatrix::identity(4);
    let (l, m) = (0, 2);
    let exact = closed_form_rotation(&g, l, m).unwrap();

    let mut oracle = IdealOracle::identity(g.clone());
    oracle.advance_phase();
    let eta = 1e-6;
    let direction = oracle.direction();
    let blind = blind_rotation_params(
        &mut oracle,
        &w,
        l,
        m,
        eta,
        direction,
        &LineSearchOptions::default(),
        1.0,
    )
    .unwrap();

    println!("closed form: theta={:+.8} phi={:+.8}", exact.theta, exact.phi);
    println!(
        "blind:       theta={:+.8} phi={:+.8} ({} probes)",
        blind.params.theta, blind.params.phi, blind.evaluations
    );
    let after = rotate(&g, &blind.params).unwrap();
    println!("|a_lm| before {:.3e}, after {:.3e}", g.get(l, m).norm(), after.get(l, m).norm());
}
