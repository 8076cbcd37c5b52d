//! A primary/secondary link simulator whose secondary-side energy
//! measurement is a monotone function of the interference `‖H12 x‖²`.
//!
//! The primary transmitter runs closed-loop power control against the
//! interference it sees; the secondary receiver measures
//! `q = a1·p1 + a2` with `a1 = ‖H21 P1‖_F²` and `a2 = n_rx·σ₂²`. Power control
//! settles within one transmission cycle.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::linalg::{hermitian_form, ComplexMatrix, HermitianMatrix};
use crate::oracle::{check_probe, Direction, OracleError, QueryOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("channel dimensions are inconsistent: {0}")]
    Dimensions(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl From<RadioError> for OracleError {
    fn from(e: RadioError) -> Self {
        OracleError::InvalidConfig(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Secondary-to-primary interference channel, `n_r × n_t`.
    pub h12: ComplexMatrix,
    /// Primary-to-secondary observation channel, `n_rx × n_p`.
    pub h21: ComplexMatrix,
    /// Primary precoder, `n_p × d`.
    pub p1: ComplexMatrix,
    /// Noise power at the primary receiver (σ₁²).
    pub noise_var_pu: f64,
    /// Noise power per secondary receive antenna (σ₂²).
    pub noise_var_su: f64,
}

impl ChannelSet {
    /// i.i.d. standard complex Gaussian channels; `H12` is scaled so that
    /// `‖H12ᴴ H12‖_F = 1`. The primary uses `n_r` antennas and an identity
    /// precoder; the secondary receives on its `n_t` antennas.
    pub fn random(n_r: usize, n_t: usize, seed: u64) -> Result<Self, RadioError> {
        if n_r == 0 || n_r >= n_t {
            return Err(RadioError::Dimensions(format!("need 0 < n_r < n_t, got {n_r}, {n_t}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ComplexMatrix::random_gaussian(n_r, n_t, &mut rng);
        let g_norm = HermitianMatrix::gram(&h).frobenius_norm();
        let h12 = h.scale(1.0 / g_norm.sqrt());
        let h21 = ComplexMatrix::random_gaussian(n_t, n_r, &mut rng);
        Ok(Self {
            h12,
            h21,
            p1: ComplexMatrix::identity(n_r),
            noise_var_pu: 0.1,
            noise_var_su: 0.01,
        })
    }

    pub fn gram(&self) -> HermitianMatrix {
        HermitianMatrix::gram(&self.h12)
    }

    pub fn n_t(&self) -> usize {
        self.h12.cols()
    }

    pub fn n_r(&self) -> usize {
        self.h12.rows()
    }

    /// `a1 = ‖H21 P1‖_F²`, the received primary power per unit of `p1`.
    pub fn a1(&self) -> f64 {
        self.h21.matmul(&self.p1).expect("validated dimensions").frobenius_norm().powi(2)
    }

    /// `a2 = E‖v₂‖²`, the secondary receiver noise power.
    pub fn a2(&self) -> f64 {
        self.h21.rows() as f64 * self.noise_var_su
    }

    fn validate(&self) -> Result<(), RadioError> {
        if self.h21.cols() != self.p1.rows() {
            return Err(RadioError::Dimensions(format!(
                "H21 has {} columns but P1 has {} rows",
                self.h21.cols(),
                self.p1.rows()
            )));
        }
        if self.h12.frobenius_norm() == 0.0 {
            return Err(RadioError::Parameter("H12 must be nonzero".into()));
        }
        if !(self.noise_var_pu >= 0.0 && self.noise_var_su >= 0.0) {
            return Err(RadioError::Parameter("noise variances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerControlKind {
    /// Holds the primary SNR at `gamma_target`: power rises with interference.
    #[default]
    SnrTarget,
    /// Linear stand-in for water filling: power falls with interference.
    WaterfillingProxy,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PowerControlModel {
    pub kind: PowerControlKind,
    pub gamma_target: f64,
    /// Gain of the primary's own link.
    pub g_eff: f64,
    /// Water level `c` of the proxy law `p = c − (σ₁² + I)`.
    pub water_level: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for PowerControlModel {
    fn default() -> Self {
        Self {
            kind: PowerControlKind::SnrTarget,
            gamma_target: 10.0,
            g_eff: 1.0,
            water_level: 10.0,
            p_min: 0.0,
            p_max: 100.0,
        }
    }
}

impl PowerControlModel {
    pub fn waterfilling() -> Self {
        Self {
            kind: PowerControlKind::WaterfillingProxy,
            ..Self::default()
        }
    }

    pub fn direction(&self) -> Direction {
        match self.kind {
            PowerControlKind::SnrTarget => Direction::Increasing,
            PowerControlKind::WaterfillingProxy => Direction::Decreasing,
        }
    }

    /// Unclamped steady-state measurement law `q = slope·I + intercept` for a
    /// receiver with coefficients `a1`, `a2`.
    pub fn measurement_law(&self, noise_var_pu: f64, a1: f64, a2: f64) -> (f64, f64) {
        match self.kind {
            PowerControlKind::SnrTarget => {
                let slope = a1 * self.gamma_target / self.g_eff;
                (slope, slope * noise_var_pu + a2)
            }
            PowerControlKind::WaterfillingProxy => (-a1, a1 * (self.water_level - noise_var_pu) + a2),
        }
    }

    /// Steady-state primary power for the given interference, and whether
    /// the clamp was active.
    pub fn step_power_control(&self, noise_var_pu: f64, interference: f64) -> (f64, bool) {
        let raw = match self.kind {
            PowerControlKind::SnrTarget => self.gamma_target * (noise_var_pu + interference) / self.g_eff,
            PowerControlKind::WaterfillingProxy => self.water_level - (noise_var_pu + interference),
        };
        let p = raw.clamp(self.p_min, self.p_max);
        (p, p != raw)
    }

    fn validate(&self) -> Result<(), RadioError> {
        if !(self.p_min < self.p_max) {
            return Err(RadioError::Parameter(format!(
                "need p_min < p_max, got {} and {}",
                self.p_min, self.p_max
            )));
        }
        if self.kind == PowerControlKind::SnrTarget && !(self.gamma_target > 0.0 && self.g_eff > 0.0) {
            return Err(RadioError::Parameter("gamma_target and g_eff must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MeasurementConfig {
    /// Transmission-cycle length in samples.
    pub cycle_len: usize,
    /// Samples averaged into one measurement.
    pub snapshot_len: usize,
    pub noise_enabled: bool,
    /// Per-sample standard deviation of the measurement perturbation.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            cycle_len: 100,
            snapshot_len: 16,
            noise_enabled: false,
            noise_std: 0.01,
            seed: 0,
        }
    }
}

impl MeasurementConfig {
    fn validate(&self) -> Result<(), RadioError> {
        if self.snapshot_len == 0 || self.snapshot_len > self.cycle_len {
            return Err(RadioError::Parameter(format!(
                "need 1 <= N' <= N, got N'={} and N={}",
                self.snapshot_len, self.cycle_len
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(RadioError::Parameter("noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// The simulator exposed as a [`QueryOracle`].
#[derive(Debug, Clone)]
pub struct RadioOracle {
    channels: ChannelSet,
    g: HermitianMatrix,
    power: PowerControlModel,
    measurement: MeasurementConfig,
    a1: f64,
    a2: f64,
    law: (f64, f64),
    phase: u64,
    cycles: u64,
    cap: f64,
    saturated: bool,
    last_power: f64,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl RadioOracle {
    pub fn new(
        channels: ChannelSet,
        power: PowerControlModel,
        measurement: MeasurementConfig,
    ) -> Result<Self, RadioError> {
        channels.validate()?;
        power.validate()?;
        measurement.validate()?;
        let noise = if measurement.noise_enabled {
            let normal = Normal::new(0.0, measurement.noise_std)
                .map_err(|e| RadioError::Parameter(e.to_string()))?;
            Some((ChaCha8Rng::seed_from_u64(measurement.seed), normal))
        } else {
            None
        };
        let (a1, a2) = (channels.a1(), channels.a2());
        Ok(Self {
            g: channels.gram(),
            a1,
            a2,
            law: power.measurement_law(channels.noise_var_pu, a1, a2),
            channels,
            power,
            measurement,
            phase: 0,
            cycles: 0,
            cap: 1.0,
            saturated: false,
            last_power: f64::NAN,
            noise,
        })
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    /// `G = H12ᴴ H12`, for evaluation code only.
    pub fn disclosed_gram(&self) -> &HermitianMatrix {
        &self.g
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.a1, self.a2)
    }

    /// `(slope, intercept)` of `q` against interference inside the clamp band.
    pub fn measurement_law(&self) -> (f64, f64) {
        self.law
    }

    /// Primary power during the most recent cycle.
    pub fn last_power(&self) -> f64 {
        self.last_power
    }

    /// Noiseless measurement for a given interference level.
    pub fn noiseless_q(&self, interference: f64) -> f64 {
        self.steady_q(interference).0
    }

    /// Inside the clamp band the composed law is evaluated in its affine
    /// form, so it agrees bit for bit with any other evaluation of
    /// `slope·I + intercept`.
    fn steady_q(&self, interference: f64) -> (f64, f64, bool) {
        let (p, saturated) = self.power.step_power_control(self.channels.noise_var_pu, interference);
        let q = if saturated {
            self.a1 * p + self.a2
        } else {
            self.law.0 * interference + self.law.1
        };
        (q, p, saturated)
    }

    /// One measurement: settle the power loop, then average `N'` samples.
    pub fn measure_q(&mut self, x: &[Complex64]) -> Result<f64, OracleError> {
        let interference = hermitian_form(&self.g, x)?;
        let (mut q, p, saturated) = self.steady_q(interference);
        self.saturated |= saturated;
        self.last_power = p;
        if let Some((rng, normal)) = self.noise.as_mut() {
            let n = self.measurement.snapshot_len;
            let sum: f64 = (0..n).map(|_| normal.sample(rng)).sum();
            q += sum / n as f64;
        }
        Ok(q)
    }
}

impl QueryOracle for RadioOracle {
    fn dim(&self) -> usize {
        self.channels.n_t()
    }

    fn probe(&mut self, x: &[Complex64]) -> Result<f64, OracleError> {
        check_probe(x, self.dim(), self.phase, self.cap)?;
        let q = self.measure_q(x)?;
        if !q.is_finite() {
            return Err(OracleError::NonFinite);
        }
        self.cycles += 1;
        Ok(q)
    }

    fn advance_phase(&mut self) {
        self.phase += 1;
        self.saturated = false;
    }

    fn cycles_used(&self) -> u64 {
        self.cycles
    }

    fn phase(&self) -> u64 {
        self.phase
    }

    fn direction(&self) -> Direction {
        self.power.direction()
    }

    fn power_cap(&self) -> f64 {
        self.cap
    }

    fn set_power_cap(&mut self, cap: f64) {
        self.cap = cap;
    }

    fn phase_warning(&self) -> bool {
        self.saturated
    }
}

/// Builds the simulator oracle.
pub fn as_oracle(
    channels: ChannelSet,
    power: PowerControlModel,
    measurement: MeasurementConfig,
) -> Result<RadioOracle, RadioError> {
    RadioOracle::new(channels, power, measurement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{reference_cyclic_jacobi, JacobiOptions};
    use rand::Rng;

    fn started(o: RadioOracle) -> RadioOracle {
        let mut o = o;
        o.advance_phase();
        o
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn snr_target_examples() {
        let m = PowerControlModel::default();
        assert_eq!(m.step_power_control(0.1, 0.0), (1.0, false));
        let (p1, _) = m.step_power_control(0.1, 0.1);
        let (p2, _) = m.step_power_control(0.1, 0.2);
        assert!((p1 - 2.0).abs() < 1e-12 && (p2 - 3.0).abs() < 1e-12);
        let (p, sat) = m.step_power_control(0.1, 1e6);
        assert_eq!(p, m.p_max);
        assert!(sat);
    }

    #[test]
    fn waterfilling_decreases() {
        let m = PowerControlModel::waterfilling();
        let (a, _) = m.step_power_control(0.1, 0.1);
        let (b, _) = m.step_power_control(0.1, 0.2);
        assert!(b < a);
        assert_eq!(m.direction(), Direction::Decreasing);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let ch = ChannelSet::random(2, 3, 1).unwrap();
        let bad = PowerControlModel {
            p_min: 5.0,
            p_max: 1.0,
            ..PowerControlModel::default()
        };
        assert!(RadioOracle::new(ch.clone(), bad, MeasurementConfig::default()).is_err());
        let bad = MeasurementConfig {
            snapshot_len: 0,
            ..MeasurementConfig::default()
        };
        assert!(RadioOracle::new(ch, PowerControlModel::default(), bad).is_err());
        assert!(ChannelSet::random(3, 3, 1).is_err());
    }

    #[test]
    fn null_probe_gives_baseline() {
        let ch = ChannelSet {
            h12: ComplexMatrix::from_real_rows(&[vec![1.0, 0.0]]).unwrap(),
            h21: ComplexMatrix::from_real_rows(&[vec![1.0], vec![0.5]]).unwrap(),
            p1: ComplexMatrix::identity(1),
            noise_var_pu: 0.1,
            noise_var_su: 0.01,
        };
        let mut o = started(RadioOracle::new(ch, PowerControlModel::default(), MeasurementConfig::default()).unwrap());
        let q0 = o.noiseless_q(0.0);
        assert_eq!(o.probe(&[c(0.0), c(1.0)]).unwrap(), q0);
        assert!((q0 - (1.25 * 1.0 + 0.02)).abs() < 1e-12);
        assert!(o.probe(&[c(1.0), c(0.0)]).unwrap() > q0);
        o.advance_phase();
        assert_eq!(o.probe(&[c(0.0), c(0.0)]).unwrap(), q0);
    }

    #[test]
    fn coefficients_recoverable_from_two_probes() {
        let ch = ChannelSet::random(2, 4, 3).unwrap();
        let g = ch.gram();
        let mut o = started(RadioOracle::new(ch, PowerControlModel::default(), MeasurementConfig::default()).unwrap());
        let (a1, a2) = o.coefficients();
        let x: Vec<Complex64> = vec![c(0.5), c(0.5), c(0.5), c(0.5)];
        let q0 = o.probe(&[c(0.0); 4]).unwrap();
        let q1 = o.probe(&x).unwrap();
        let m = PowerControlModel::default();
        let p0 = m.gamma_target * 0.1 / m.g_eff;
        let p1 = m.gamma_target * (0.1 + hermitian_form(&g, &x).unwrap()) / m.g_eff;
        let a1_hat = (q1 - q0) / (p1 - p0);
        let a2_hat = q0 - a1_hat * p0;
        assert!((a1_hat - a1).abs() < 1e-10 && (a2_hat - a2).abs() < 1e-10);
    }

    #[test]
    fn measurement_is_monotone_in_interference() {
        for (power, increasing) in [(PowerControlModel::default(), true), (PowerControlModel::waterfilling(), false)] {
            let ch = ChannelSet::random(2, 4, 5).unwrap();
            let g = ch.gram();
            let mut o = started(RadioOracle::new(ch, power, MeasurementConfig::default()).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut pairs: Vec<(f64, f64)> = (0..50)
                .map(|_| {
                    let mut x: Vec<Complex64> =
                        (0..4).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                    let n = crate::linalg::vector_norm(&x);
                    x.iter_mut().for_each(|z| *z /= n);
                    (hermitian_form(&g, &x).unwrap(), o.probe(&x).unwrap())
                })
                .collect();
            assert!(!o.phase_warning());
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                if increasing {
                    assert!(w[1].1 > w[0].1);
                } else {
                    assert!(w[1].1 < w[0].1);
                }
            }
        }
    }

    #[test]
    fn saturation_raises_phase_warning() {
        let ch = ChannelSet::random(2, 3, 2).unwrap();
        let power = PowerControlModel {
            p_max: 1.2,
            ..PowerControlModel::default()
        };
        let mut o = started(RadioOracle::new(ch, power, MeasurementConfig::default()).unwrap());
        o.probe(&[c(1.0), c(0.0), c(0.0)]).unwrap();
        assert!(o.phase_warning());
        o.advance_phase();
        assert!(!o.phase_warning());
    }

    #[test]
    fn noise_statistics_match_snapshot_averaging() {
        let ch = ChannelSet::random(2, 3, 2).unwrap();
        let meas = MeasurementConfig {
            noise_enabled: true,
            noise_std: 0.1,
            snapshot_len: 64,
            seed: 77,
            ..MeasurementConfig::default()
        };
        let mut o = started(RadioOracle::new(ch, PowerControlModel::default(), meas).unwrap());
        let x = [c(0.6), c(0.8), c(0.0)];
        let samples: Vec<f64> = (0..4000).map(|_| o.probe(&x).unwrap()).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let std = var.sqrt();
        let expected = 0.1 / 8.0;
        assert!((std - expected).abs() < 0.05 * expected, "{std} vs {expected}");
    }

    #[test]
    fn random_channel_is_normalized_and_full_rank() {
        for seed in 0..500u64 {
            let n_t = 3 + (seed % 6) as usize;
            let n_r = 1 + (seed % (n_t as u64 - 1)) as usize;
            let ch = ChannelSet::random(n_r, n_t, seed).unwrap();
            let g = ch.gram();
            assert!((g.frobenius_norm() - 1.0).abs() < 1e-12);
            let vals = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap().sorted_values();
            assert!(vals[n_t - n_r] > 1e-10, "seed {seed}: {vals:?}");
        }
        let a = ChannelSet::random(2, 4, 9).unwrap();
        let b = ChannelSet::random(2, 4, 9).unwrap();
        assert_eq!(a.h12, b.h12);
    }
}
