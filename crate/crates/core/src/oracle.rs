//! The measurement boundary: a stateful oracle answering `q = f_k(xᴴ G x)`
//! for an unknown, per-phase strictly monotone `f_k`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{hermitian_form, vector_norm, ComplexMatrix, HermitianMatrix, LinalgError};

/// Relative slack on the power cap so that unit-norm rotation columns are
/// never rejected because of rounding.
const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("probe issued before the first learning phase was started")]
    PhaseNotStarted,
    #[error("probe length {got} does not match oracle dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("probe norm {norm} exceeds the power cap {cap}")]
    PowerCapExceeded { norm: f64, cap: f64 },
    #[error("oracle produced a non-finite measurement")]
    NonFinite,
    #[error("measurement direction is unknown; configure it or enable auto-detection")]
    UnknownDirection,
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Orientation of the per-phase response with respect to `‖Hx‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
    Unknown,
}

/// Everything a blind learner may observe about the hidden channel.
pub trait QueryOracle {
    /// Length of admissible probe vectors.
    fn dim(&self) -> usize;

    /// One transmission cycle with the constant probe `x`.
    fn probe(&mut self, x: &[Complex64]) -> Result<f64, OracleError>;

    /// Starts the next learning phase; the first call starts phase 1.
    fn advance_phase(&mut self);

    /// Total number of probes answered so far.
    fn cycles_used(&self) -> u64;

    /// Current phase index (0 before the first [`advance_phase`](Self::advance_phase)).
    fn phase(&self) -> u64;

    fn direction(&self) -> Direction;

    fn power_cap(&self) -> f64;

    fn set_power_cap(&mut self, cap: f64);

    /// True when the current phase may violate strict monotonicity (e.g. a
    /// saturated power-control loop).
    fn phase_warning(&self) -> bool {
        false
    }
}

impl<O: QueryOracle + ?Sized> QueryOracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn probe(&mut self, x: &[Complex64]) -> Result<f64, OracleError> {
        (**self).probe(x)
    }
    fn advance_phase(&mut self) {
        (**self).advance_phase()
    }
    fn cycles_used(&self) -> u64 {
        (**self).cycles_used()
    }
    fn phase(&self) -> u64 {
        (**self).phase()
    }
    fn direction(&self) -> Direction {
        (**self).direction()
    }
    fn power_cap(&self) -> f64 {
        (**self).power_cap()
    }
    fn set_power_cap(&mut self, cap: f64) {
        (**self).set_power_cap(cap)
    }
    fn phase_warning(&self) -> bool {
        (**self).phase_warning()
    }
}

/// Shared precondition checks for probe implementations.
pub(crate) fn check_probe(
    x: &[Complex64],
    dim: usize,
    phase: u64,
    cap: f64,
) -> Result<(), OracleError> {
    if phase == 0 {
        return Err(OracleError::PhaseNotStarted);
    }
    if x.len() != dim {
        return Err(OracleError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let norm = vector_norm(x);
    if !norm.is_finite() {
        return Err(OracleError::NonFinite);
    }
    if norm > cap * (1.0 + CAP_SLACK) {
        return Err(OracleError::PowerCapExceeded { norm, cap });
    }
    Ok(())
}

/// Strictly increasing scalar maps applied to `s = xᴴ G x`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFamily {
    Identity,
    Affine { scale: f64, offset: f64 },
    Exp,
    Log1p,
    CubicPlusLinear,
    /// Fresh `scale ~ U[0.5, 2]`, `offset ~ U[0, 1]` at every phase.
    RandomAffine { seed: u64 },
}

impl ResponseFamily {
    /// The five fixed families used for invariance checks.
    pub fn standard_set() -> Vec<ResponseFamily> {
        vec![
            ResponseFamily::Identity,
            ResponseFamily::Affine {
                scale: 7.0,
                offset: 1.0,
            },
            ResponseFamily::Exp,
            ResponseFamily::Log1p,
            ResponseFamily::CubicPlusLinear,
        ]
    }

    fn validate(&self) -> Result<(), OracleError> {
        match self {
            ResponseFamily::Affine { scale, offset } if !(*scale > 0.0) || !offset.is_finite() => {
                Err(OracleError::InvalidConfig(format!(
                    "affine response needs a positive finite scale, got {scale}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Oracle over a disclosed Gram matrix with a chosen response family.
#[derive(Debug, Clone)]
pub struct IdealOracle {
    g: HermitianMatrix,
    family: ResponseFamily,
    direction: Direction,
    phase: u64,
    cycles: u64,
    cap: f64,
    phase_affine: (f64, f64),
    rng: Option<ChaCha8Rng>,
}

impl IdealOracle {
    pub fn new(g: HermitianMatrix, family: ResponseFamily) -> Result<Self, OracleError> {
        family.validate()?;
        let rng = match family {
            ResponseFamily::RandomAffine { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Ok(Self {
            g,
            family,
            direction: Direction::Increasing,
            phase: 0,
            cycles: 0,
            cap: 1.0,
            phase_affine: (1.0, 0.0),
            rng,
        })
    }

    /// Identity response, increasing direction.
    pub fn identity(g: HermitianMatrix) -> Self {
        Self::new(g, ResponseFamily::Identity).expect("identity family is always valid")
    }

    /// Reverses the response orientation (`q = -f(s)`), or hides it with
    /// [`Direction::Unknown`] (values stay increasing).
    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn family(&self) -> &ResponseFamily {
        &self.family
    }

    /// The hidden matrix, for evaluation code only.
    pub fn disclosed_gram(&self) -> &HermitianMatrix {
        &self.g
    }

    fn respond(&self, s: f64) -> f64 {
        let f = match self.family {
            ResponseFamily::Identity => s,
            ResponseFamily::Affine { scale, offset } => scale * s + offset,
            ResponseFamily::Exp => s.exp(),
            ResponseFamily::Log1p => s.ln_1p(),
            ResponseFamily::CubicPlusLinear => s * s * s + s,
            ResponseFamily::RandomAffine { .. } => self.phase_affine.0 * s + self.phase_affine.1,
        };
        match self.direction {
            Direction::Decreasing => -f,
            _ => f,
        }
    }
}

impl QueryOracle for IdealOracle {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn probe(&mut self, x: &[Complex64]) -> Result<f64, OracleError> {
        check_probe(x, self.dim(), self.phase, self.cap)?;
        let s = hermitian_form(&self.g, x)?;
        let q = self.respond(s);
        if !q.is_finite() {
            return Err(OracleError::NonFinite);
        }
        self.cycles += 1;
        Ok(q)
    }

    fn advance_phase(&mut self) {
        self.phase += 1;
        if let Some(rng) = self.rng.as_mut() {
            let scale = rng.random_range(0.5..2.0);
            let offset = rng.random_range(0.0..1.0);
            self.phase_affine = (scale, offset);
        }
    }

    fn cycles_used(&self) -> u64 {
        self.cycles
    }

    fn phase(&self) -> u64 {
        self.phase
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn power_cap(&self) -> f64 {
        self.cap
    }

    fn set_power_cap(&mut self, cap: f64) {
        self.cap = cap;
    }
}

/// Restricts an oracle to the column span of a tall matrix with orthonormal
/// columns: probing `x` transmits `U x`.
pub struct SubspaceOracle<'a, O: QueryOracle + ?Sized> {
    inner: &'a mut O,
    basis: ComplexMatrix,
}

impl<'a, O: QueryOracle + ?Sized> SubspaceOracle<'a, O> {
    pub fn new(inner: &'a mut O, basis: ComplexMatrix) -> Result<Self, OracleError> {
        if basis.rows() != inner.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: inner.dim(),
                got: basis.rows(),
            });
        }
        Ok(Self { inner, basis })
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }
}

impl<O: QueryOracle + ?Sized> QueryOracle for SubspaceOracle<'_, O> {
    fn dim(&self) -> usize {
        self.basis.cols()
    }

    fn probe(&mut self, x: &[Complex64]) -> Result<f64, OracleError> {
        if x.len() != self.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let lifted = self.basis.mul_vec(x)?;
        self.inner.probe(&lifted)
    }

    fn advance_phase(&mut self) {
        self.inner.advance_phase()
    }

    fn cycles_used(&self) -> u64 {
        self.inner.cycles_used()
    }

    fn phase(&self) -> u64 {
        self.inner.phase()
    }

    fn direction(&self) -> Direction {
        self.inner.direction()
    }

    fn power_cap(&self) -> f64 {
        self.inner.power_cap()
    }

    fn set_power_cap(&mut self, cap: f64) {
        self.inner.set_power_cap(cap)
    }

    fn phase_warning(&self) -> bool {
        self.inner.phase_warning()
    }
}

/// Null-space test by scaling: `v ∈ N(G)` iff `S(G, v) = S(G, 2v)`.
///
/// Costs two cycles, both inside one phase; the power cap is raised to
/// `2‖v‖` for the duration and restored afterwards.
pub fn null_membership_test<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    v: &[Complex64],
    tol: f64,
) -> Result<bool, OracleError> {
    let norm = vector_norm(v);
    if !(norm > 0.0) {
        return Err(OracleError::InvalidConfig(
            "null membership test needs a nonzero vector".into(),
        ));
    }
    let doubled: Vec<Complex64> = v.iter().map(|z| z * 2.0).collect();
    let saved_cap = oracle.power_cap();
    oracle.set_power_cap(saved_cap.max(2.0 * norm));
    let outcome = (|| {
        loop {
            let phase = oracle.phase();
            let single = oracle.probe(v)?;
            let double = oracle.probe(&doubled)?;
            if oracle.phase() == phase {
                return Ok((single - double).abs() <= tol * double.abs().max(1.0));
            }
            if oracle.phase() == 0 {
                return Err(OracleError::PhaseNotStarted);
            }
        }
    })();
    oracle.set_power_cap(saved_cap);
    outcome
}

/// Two-probe direction heuristic: the zero vector causes no interference,
/// so a full-power probe measuring higher means the response increases.
/// Returns [`Direction::Unknown`] if both measurements coincide.
pub fn detect_direction<O: QueryOracle + ?Sized>(oracle: &mut O) -> Result<Direction, OracleError> {
    let n = oracle.dim();
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let amplitude = Complex64::new(oracle.power_cap() / (n as f64).sqrt(), 0.0);
    let full = vec![amplitude; n];
    let q0 = oracle.probe(&zero)?;
    let q1 = oracle.probe(&full)?;
    Ok(if q1 > q0 {
        Direction::Increasing
    } else if q1 < q0 {
        Direction::Decreasing
    } else {
        Direction::Unknown
    })
}
