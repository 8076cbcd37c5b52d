//! Seeded random fixtures and the parallel trial runner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ExperimentError;
use crate::linalg::{
    eigen_gap_delta, random_unitary, reference_cyclic_jacobi, ComplexMatrix, HermitianMatrix, JacobiOptions,
};
use crate::radiosim::ChannelSet;

/// Independent generator for one trial: stream `trial` of the master seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent trials on the rayon pool; results are in trial
/// order regardless of scheduling.
pub fn run_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

/// Random channel with `‖H12ᴴH12‖_F = 1`.
pub fn channel<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> Result<ChannelSet, ExperimentError> {
    Ok(ChannelSet::random(n_r, n_t, rng.random())?)
}

/// One third of the smallest distinct eigenvalue gap of `g`.
pub fn gap_delta(g: &HermitianMatrix) -> Result<Option<f64>, ExperimentError> {
    let eig = reference_cyclic_jacobi(g, &JacobiOptions::default())?;
    Ok(eigen_gap_delta(&eig.values))
}

/// Rejection-samples a channel whose Gram matrix has `δ ≥ min_delta`.
pub fn channel_with_min_delta<R: Rng + ?Sized>(
    n_r: usize,
    n_t: usize,
    min_delta: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(ChannelSet, f64), ExperimentError> {
    for _ in 0..max_attempts {
        let ch = channel(n_r, n_t, rng)?;
        if let Some(d) = gap_delta(&ch.gram())? {
            if d >= min_delta {
                return Ok((ch, d));
            }
        }
    }
    Err(ExperimentError::Insufficient(format!(
        "no channel with delta >= {min_delta} in {max_attempts} draws"
    )))
}

/// `V diag(values) Vᴴ` with a Haar-random unitary `V`.
pub fn spectrum<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> HermitianMatrix {
    let v = random_unitary(values.len(), rng);
    HermitianMatrix::from_spectrum(&v, values).expect("square unitary")
}

/// Ascending eigenvalues starting in `[0, 0.3)` with consecutive gaps in
/// `[min_gap, min_gap + 0.5)`.
pub fn separated_values<R: Rng + ?Sized>(n: usize, min_gap: f64, rng: &mut R) -> Vec<f64> {
    let mut values = Vec::with_capacity(n);
    let mut x: f64 = rng.random_range(0.0..0.3);
    for _ in 0..n {
        values.push(x);
        x += min_gap + rng.random_range(0.0..0.5);
    }
    values
}

/// Full-rank Wishart matrix normalized to unit Frobenius norm.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let h = ComplexMatrix::random_gaussian(n, n, rng);
    let g = HermitianMatrix::gram(&h);
    g.scale(1.0 / g.frobenius_norm())
}

/// Eigenvalues with a cluster of `size` values `λ + ξ_l` (`Σξ_l = 0`,
/// `|ξ_l| ≤ width`) and `n − size` further values, every gap among the
/// non-cluster values and to `λ` at least `3·delta_c`.
pub fn cluster_values<R: Rng + ?Sized>(
    n: usize,
    size: usize,
    width: f64,
    delta_c: f64,
    rng: &mut R,
) -> Vec<f64> {
    let others = separated_values(n - size + 1, 3.0 * delta_c, rng);
    let lambda = others[0];
    let mut xi: Vec<f64> = (0..size).map(|_| rng.random_range(-width..=width)).collect();
    let mean = xi.iter().sum::<f64>() / size as f64;
    xi.iter_mut().for_each(|x| *x -= mean);
    let scale = xi.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if scale > width {
        xi.iter_mut().for_each(|x| *x *= width / scale);
    }
    let mut values: Vec<f64> = xi.iter().map(|x| lambda + x).collect();
    values.extend_from_slice(&others[1..]);
    values
}
