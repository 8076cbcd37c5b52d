//! Small batch of the linear-rate and interference-plateau checks.

use blind_null_space::experiments::verify::{verify_bounds, BoundsOptions};

fn main() {
    let opts = BoundsOptions {
        linear_sizes: vec![3, 4, 5],
        linear_trials: 30,
        plateau_trials: 30,
        ..BoundsOptions::default()
    };
    let s = verify_bounds(&opts).unwrap();
    for r in &s.linear.sizes {
        println!("linear n_t={}: {} violations, worst ratio {:.3}", r.n_t, r.violations, r.worst_ratio);
    }
    for (n_t, r) in &s.plateau.per_size {
        println!("plateau n_t={n_t}: slope {:.2}", r.slope);
    }
    println!("total violations {}", s.violations());
}
