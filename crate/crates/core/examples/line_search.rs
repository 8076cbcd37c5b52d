//! Comparison-only minimization of a shifted sinusoid seen through an
//! unknown increasing map.

use blind_null_space::linesearch::{circular_distance, line_search, LineSearchOptions};

fn main() {
    let z_star = 1.234_f64;
    let z_max = std::f64::consts::PI;
    for eta in [1e-2, 1e-4, 1e-8] {
        // cos(z - z*) has period 2π = 2·z_max; exp() hides its shape from the search
        let mut calls = 0;
        let result = line_search(
            |z: f64| -> Result<f64, std::convert::Infallible> {
                calls += 1;
                Ok((-(z - z_star).cos()).exp())
            },
            z_max,
            eta,
            &LineSearchOptions::default(),
        )
        .expect("valid search parameters");
        let err = circular_distance(result.z_hat, z_star, 2.0 * z_max);
        println!(
            "eta={eta:e}: z_hat={:.10} error={err:.2e} evaluations={}",
            result.z_hat, result.evaluations
        );
        assert!(err <= eta && calls == result.evaluations);
    }
}
