//! The non-blind cyclic Jacobi eigensolver used as a reference.

use blind_null_space::experiments::fixtures::{random_psd, trial_rng};
use blind_null_space::linalg::{reference_cyclic_jacobi, JacobiOptions};

fn main() {
    let g = random_psd(6, &mut trial_rng(1, 0));
    let eig = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap();
    println!("eigenvalues {:.6?}", eig.sorted_values());
    println!("sweeps {} reconstruction error {:.2e}", eig.sweeps, eig.reconstruction_error(&g));
    for (s, off) in eig.off_norm_trace.iter().enumerate() {
        println!("  after sweep {s}: off-diagonal norm {off:.3e}");
    }
}
