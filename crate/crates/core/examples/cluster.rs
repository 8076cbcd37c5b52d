//! Behaviour when a cluster of nearly equal eigenvalues sits at the
//! bottom of the spectrum: convergence stays quadratic down to the
//! cluster-width level.

use blind_null_space::experiments::verify::cluster_experiment;

fn main() {
    for width in [1e-9, 1e-5] {
        let r = cluster_experiment(8, 3, width, 0.2, 1e-7, 50, 8, 2).unwrap();
        println!(
            "width {width:e}: median order {:.2} ({} trials without enough pairs), median final P^2 {:.2e}",
            r.median_band_order, r.insufficient, r.median_final_p2
        );
    }
}
