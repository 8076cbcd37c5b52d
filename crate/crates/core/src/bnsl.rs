//! Blind null space learning: cyclic Jacobi rotations whose angles are found
//! by comparison-only line searches through a [`QueryOracle`], and the
//! reduced-complexity variant working on `(n_r + 1)`-dimensional equivalent
//! channels.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    apply_rotation_right, cyclic_pivots, off_diagonal_norm, ComplexMatrix, HermitianMatrix,
    LinalgError, RotationParams,
};
use crate::linesearch::{expected_evaluations, line_search, LineSearchOptions, SearchError};
use crate::oracle::{detect_direction, null_membership_test, Direction, OracleError, QueryOracle, SubspaceOracle};

/// Angle at which the phase search is carried out; any value with
/// `sin 2θ ≠ 0` works.
const PHI_SEARCH_THETA: f64 = PI / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BnslError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line search rejected its input: {0}")]
    Search(String),
}

impl From<SearchError<OracleError>> for BnslError {
    fn from(e: SearchError<OracleError>) -> Self {
        match e {
            SearchError::Objective(o) => BnslError::Oracle(o),
            SearchError::InvalidSpec(s) => BnslError::Search(s),
        }
    }
}

/// Line-search accuracy per sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant(f64),
    /// Entry `i` is used in sweep `i`; the last entry repeats.
    PerSweep(Vec<f64>),
}

impl EtaSchedule {
    /// `η = 10^(dB/10)` for each entry.
    pub fn from_db(values: &[f64]) -> Self {
        let etas: Vec<f64> = values.iter().map(|db| db_to_eta(*db)).collect();
        if etas.len() == 1 {
            EtaSchedule::Constant(etas[0])
        } else {
            EtaSchedule::PerSweep(etas)
        }
    }

    pub fn for_sweep(&self, sweep: usize) -> f64 {
        match self {
            EtaSchedule::Constant(e) => *e,
            EtaSchedule::PerSweep(v) => v[sweep.min(v.len() - 1)],
        }
    }

    fn smallest(&self) -> f64 {
        match self {
            EtaSchedule::Constant(e) => *e,
            EtaSchedule::PerSweep(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn validate(&self) -> Result<(), BnslError> {
        let ok = match self {
            EtaSchedule::Constant(e) => valid_eta(*e),
            EtaSchedule::PerSweep(v) => !v.is_empty() && v.iter().all(|e| valid_eta(*e)),
        };
        if ok {
            Ok(())
        } else {
            Err(BnslError::InvalidConfig(format!(
                "every eta must lie in (0, pi/2): {self:?}"
            )))
        }
    }
}

fn valid_eta(e: f64) -> bool {
    e > 0.0 && e < FRAC_PI_2
}

pub fn db_to_eta(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// When the phase loop ends.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once every `|θ̂|` of the last full pivot cycle is below the value.
    Threshold(f64),
    /// Threshold equal to the given multiple of the smallest scheduled η.
    EtaMultiple(f64),
    /// Run exactly `max_sweeps` sweeps.
    Never,
}

/// What to do after the rotation phases.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    /// Return the precoder only; no extra probes.
    None,
    /// Order the columns by probing them, then use the given rank.
    KnownRank(usize),
    /// Order the columns, then run the scaling test on each.
    EstimateRank,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BnslConfig {
    pub eta: EtaSchedule,
    pub stop: StopRule,
    pub max_sweeps: usize,
    /// Upper bound on oracle cycles spent in rotation phases.
    pub probe_budget: Option<u64>,
    /// Overrides the oracle's reported direction.
    pub direction: Option<Direction>,
    /// Spend two probes to detect the direction if it is unknown.
    pub auto_detect_direction: bool,
    pub line_search: LineSearchOptions,
    /// Norm of every rotation probe (at most the oracle's power cap).
    pub probe_scale: f64,
    pub extraction: Extraction,
    /// Relative tolerance of the scaling test.
    pub null_tol: f64,
}

impl Default for BnslConfig {
    fn default() -> Self {
        Self {
            eta: EtaSchedule::Constant(1e-3),
            stop: StopRule::EtaMultiple(10.0),
            max_sweeps: 30,
            probe_budget: None,
            direction: None,
            auto_detect_direction: false,
            line_search: LineSearchOptions::default(),
            probe_scale: 1.0,
            extraction: Extraction::EstimateRank,
            null_tol: 1e-8,
        }
    }
}

impl BnslConfig {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta: EtaSchedule::Constant(eta),
            ..Self::default()
        }
    }

    pub fn stop_threshold(&self) -> Option<f64> {
        match self.stop {
            StopRule::Threshold(xi) => Some(xi),
            StopRule::EtaMultiple(c) => Some(c * self.eta.smallest()),
            StopRule::Never => None,
        }
    }

    /// Oracle cycles of one non-degenerate phase at accuracy `eta`.
    pub fn phase_cost(&self, eta: f64) -> u64 {
        2 * expected_evaluations(PI, eta, &self.line_search)
    }

    fn validate(&self) -> Result<(), BnslError> {
        self.eta.validate()?;
        if let Some(xi) = self.stop_threshold() {
            if !(xi > 0.0) {
                return Err(BnslError::InvalidConfig(format!("stop threshold must be positive, got {xi}")));
            }
        }
        if !(self.probe_scale > 0.0) {
            return Err(BnslError::InvalidConfig("probe_scale must be positive".into()));
        }
        if !(self.null_tol >= 0.0) {
            return Err(BnslError::InvalidConfig("null_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Outcome of one blind rotation phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlindRotation {
    pub params: RotationParams,
    /// The phase search saw a constant objective; no rotation is applied.
    pub degenerate: bool,
    pub evaluations: u64,
}

/// Probe direction `W·r_l(θ, φ)` where `r_l = cos θ·e_l − e^{iφ} sin θ·e_m`.
fn probe_vector(w: &ComplexMatrix, l: usize, m: usize, theta: f64, phi: f64, scale: f64) -> Vec<Complex64> {
    let a = theta.cos() * scale;
    let b = -Complex64::from_polar(theta.sin() * scale, phi);
    (0..w.rows()).map(|r| w[(r, l)] * a + w[(r, m)] * b).collect()
}

fn fold_theta(theta: f64) -> f64 {
    if theta.abs() <= FRAC_PI_4 {
        theta
    } else {
        theta - theta.signum() * FRAC_PI_2
    }
}

fn orientation(direction: Direction) -> Result<f64, BnslError> {
    match direction {
        Direction::Increasing => Ok(1.0),
        Direction::Decreasing => Ok(-1.0),
        Direction::Unknown => Err(OracleError::UnknownDirection.into()),
    }
}

/// Finds `(θ̂, φ̂)` for pivot `(l, m)` of the current iterate `Wᴴ G W` using
/// only oracle probes `W·r_l(θ, φ)`.
///
/// The phase search minimizes over φ at θ = π/3; the angle search minimizes
/// over the doubled angle `u = 2θ` (a full-period sinusoid) with accuracy
/// `eta`, and the minimizer is folded into `[-π/4, π/4]`.
pub fn blind_rotation_params<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    w: &ComplexMatrix,
    l: usize,
    m: usize,
    eta: f64,
    direction: Direction,
    opts: &LineSearchOptions,
    probe_scale: f64,
) -> Result<BlindRotation, BnslError> {
    RotationParams::identity(l, m).validate(w.cols())?;
    let sign = orientation(direction)?;
    let phi_search = line_search(
        |phi| {
            oracle
                .probe(&probe_vector(w, l, m, PHI_SEARCH_THETA, phi, probe_scale))
                .map(|q| sign * q)
        },
        PI,
        eta,
        opts,
    )?;
    if phi_search.degenerate {
        return Ok(BlindRotation {
            params: RotationParams::identity(l, m),
            degenerate: true,
            evaluations: phi_search.evaluations,
        });
    }
    let phi = phi_search.z_hat;
    let theta_search = line_search(
        |u| {
            oracle
                .probe(&probe_vector(w, l, m, 0.5 * u, phi, probe_scale))
                .map(|q| sign * q)
        },
        PI,
        eta,
        opts,
    )?;
    let theta = if theta_search.degenerate {
        0.0
    } else {
        fold_theta(0.5 * theta_search.z_hat)
    };
    Ok(BlindRotation {
        params: RotationParams::new(l, m, theta, phi),
        degenerate: theta_search.degenerate,
        evaluations: phi_search.evaluations + theta_search.evaluations,
    })
}

/// One learning phase of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PhaseRecord {
    /// 1-based phase index within the run.
    pub k: usize,
    /// 0-based sweep index.
    pub sweep: usize,
    /// Cycles consumed by the run up to and including this phase.
    pub cycle_count: u64,
    pub phase_cycles: u64,
    pub l: usize,
    pub m: usize,
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub eta: f64,
    pub degenerate: bool,
    pub warning: bool,
    /// Filled on the evaluation side by [`ConvergenceTrace::annotate`].
    pub off_norm: Option<f64>,
    pub interference_sq: Option<f64>,
}

impl PhaseRecord {
    pub fn rotation(&self) -> RotationParams {
        RotationParams::new(self.l, self.m, self.theta_hat, self.phi_hat)
    }

    /// Everything the blind side decided, with evaluation fields dropped.
    pub fn decisions(&self) -> (usize, usize, u64, u64, u64, usize, usize, u64, u64, bool) {
        (
            self.k,
            self.sweep,
            self.cycle_count,
            self.phase_cycles,
            self.eta.to_bits(),
            self.l,
            self.m,
            self.theta_hat.to_bits(),
            self.phi_hat.to_bits(),
            self.degenerate,
        )
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConvergenceTrace {
    pub n_t: usize,
    pub phases: Vec<PhaseRecord>,
    /// `(P_0, ‖H T_0‖²)` before any rotation, once annotated.
    pub initial: Option<(f64, f64)>,
}

impl ConvergenceTrace {
    pub fn new(n_t: usize) -> Self {
        Self {
            n_t,
            phases: Vec::new(),
            initial: None,
        }
    }

    /// Number of phases in one full pivot cycle.
    pub fn cycle_len(&self) -> usize {
        self.n_t * (self.n_t - 1) / 2
    }

    /// Replays the rotations against a disclosed Gram matrix (expressed in the
    /// same coordinates the run probed) and fills `P_k` and the interference
    /// of the `n_null` columns with the smallest Rayleigh quotients.
    pub fn annotate(&mut self, g: &HermitianMatrix, n_null: usize) -> Result<(), LinalgError> {
        let n = g.dim();
        let mut w = ComplexMatrix::identity(n);
        let a0 = g.clone();
        self.initial = Some((off_diagonal_norm(&a0), smallest_sum(&a0.diagonal(), n_null)));
        for rec in &mut self.phases {
            apply_rotation_right(&mut w, &rec.rotation())?;
            let a = g.congruence(&w)?;
            rec.off_norm = Some(off_diagonal_norm(&a));
            rec.interference_sq = Some(smallest_sum(&a.diagonal(), n_null));
        }
        Ok(())
    }

    /// Off-norm series `P_0, P_1, …` (requires annotation).
    pub fn off_norms(&self) -> Option<Vec<f64>> {
        let mut out = vec![self.initial?.0];
        for rec in &self.phases {
            out.push(rec.off_norm?);
        }
        Some(out)
    }

    /// Cycle counts aligned with [`off_norms`](Self::off_norms).
    pub fn cycle_counts(&self) -> Vec<u64> {
        std::iter::once(0).chain(self.phases.iter().map(|r| r.cycle_count)).collect()
    }
}

fn smallest_sum(values: &[f64], count: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().take(count).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxSweeps,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RankEstimate {
    pub estimated_rank: usize,
    /// Scaling-test verdict per column, in ordering order.
    pub null_flags: Vec<bool>,
    /// The null verdicts were not a prefix of the ordering.
    pub inconsistent: bool,
}

#[derive(Debug, Clone)]
pub struct NullSpaceReport {
    pub w: ComplexMatrix,
    /// Columns of `w` spanning the learned null space.
    pub t: ComplexMatrix,
    /// Column indices of `w` by ascending measured energy.
    pub ordering: Vec<usize>,
    pub rank: Option<RankEstimate>,
    pub trace: ConvergenceTrace,
    pub stop: StopReason,
    /// Probe budget ran out before the stop rule fired.
    pub partial: bool,
    pub direction: Direction,
    pub total_cycles: u64,
    pub phase_cycles: u64,
    pub ordering_cycles: u64,
    pub rank_cycles: u64,
    pub detection_cycles: u64,
}

impl NullSpaceReport {
    /// Rank used for the null-space split, if any was known or estimated.
    pub fn rank_used(&self) -> Option<usize> {
        self.rank.as_ref().map(|r| r.estimated_rank)
    }

    /// `‖H T‖_F² = tr(Tᴴ G T)` on a disclosed Gram matrix.
    pub fn interference(&self, g: &HermitianMatrix) -> Result<f64, LinalgError> {
        Ok(g.congruence(&self.t)?.diagonal().iter().sum())
    }
}

/// A BNSL run that can be driven phase by phase.
pub struct BnslRun<'a, O: QueryOracle + ?Sized> {
    oracle: &'a mut O,
    config: BnslConfig,
    w: ComplexMatrix,
    pivots: Vec<(usize, usize)>,
    k: usize,
    window: VecDeque<f64>,
    trace: ConvergenceTrace,
    direction: Direction,
    start_cycles: u64,
    detection_cycles: u64,
}

impl<'a, O: QueryOracle + ?Sized> BnslRun<'a, O> {
    pub fn new(oracle: &'a mut O, config: BnslConfig) -> Result<Self, BnslError> {
        config.validate()?;
        let n = oracle.dim();
        if n < 2 {
            return Err(BnslError::InvalidConfig(format!("need n_t >= 2, got {n}")));
        }
        if config.probe_scale > oracle.power_cap() * (1.0 + 1e-12) {
            return Err(BnslError::InvalidConfig(format!(
                "probe_scale {} exceeds the power cap {}",
                config.probe_scale,
                oracle.power_cap()
            )));
        }
        let start_cycles = oracle.cycles_used();
        let mut direction = config.direction.unwrap_or_else(|| oracle.direction());
        if direction == Direction::Unknown && config.auto_detect_direction {
            oracle.advance_phase();
            direction = detect_direction(oracle)?;
        }
        orientation(direction)?;
        let detection_cycles = oracle.cycles_used() - start_cycles;
        let pivots = cyclic_pivots(n);
        let xi = config.stop_threshold().unwrap_or(f64::INFINITY);
        Ok(Self {
            window: vec![2.0 * xi; pivots.len()].into(),
            oracle,
            config,
            w: ComplexMatrix::identity(n),
            pivots,
            k: 0,
            trace: ConvergenceTrace::new(n),
            direction,
            start_cycles,
            detection_cycles,
        })
    }

    pub fn precoder(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    pub fn phases_done(&self) -> usize {
        self.k
    }

    pub fn sweeps_done(&self) -> usize {
        self.k / self.pivots.len()
    }

    pub fn cycles_used(&self) -> u64 {
        self.oracle.cycles_used() - self.start_cycles
    }

    /// Largest `|θ̂|` over the last full pivot cycle.
    pub fn window_max(&self) -> f64 {
        self.window.iter().copied().fold(0.0, f64::max)
    }

    /// Runs the next phase of the cyclic order at accuracy `eta`.
    pub fn step_phase(&mut self, eta: f64) -> Result<&PhaseRecord, BnslError> {
        if !valid_eta(eta) {
            return Err(BnslError::InvalidConfig(format!("eta must lie in (0, pi/2), got {eta}")));
        }
        let (l, m) = self.pivots[self.k % self.pivots.len()];
        let before = self.oracle.cycles_used();
        self.oracle.advance_phase();
        let rot = blind_rotation_params(
            self.oracle,
            &self.w,
            l,
            m,
            eta,
            self.direction,
            &self.config.line_search,
            self.config.probe_scale,
        )?;
        let warning = self.oracle.phase_warning();
        if !rot.degenerate {
            apply_rotation_right(&mut self.w, &rot.params)?;
        }
        self.window.pop_front();
        self.window.push_back(rot.params.theta.abs());
        let phase_cycles = self.oracle.cycles_used() - before;
        self.trace.phases.push(PhaseRecord {
            k: self.k + 1,
            sweep: self.k / self.pivots.len(),
            cycle_count: self.cycles_used(),
            phase_cycles,
            l,
            m,
            theta_hat: rot.params.theta,
            phi_hat: rot.params.phi,
            eta,
            degenerate: rot.degenerate,
            warning,
            off_norm: None,
            interference_sq: None,
        });
        self.k += 1;
        Ok(self.trace.phases.last().expect("just pushed"))
    }

    /// Runs phases under the configured schedule until a stop condition.
    pub fn run_phases(&mut self) -> Result<StopReason, BnslError> {
        let xi = self.config.stop_threshold();
        loop {
            if self.sweeps_done() >= self.config.max_sweeps {
                return Ok(StopReason::MaxSweeps);
            }
            let eta = self.config.eta.for_sweep(self.sweeps_done());
            if let Some(budget) = self.config.probe_budget {
                if self.cycles_used() + self.config.phase_cost(eta) > budget {
                    return Ok(StopReason::BudgetExhausted);
                }
            }
            self.step_phase(eta)?;
            if let Some(xi) = xi {
                if self.window_max() < xi {
                    return Ok(StopReason::Converged);
                }
            }
        }
    }

    /// Orders the columns and splits off the null space per the configured
    /// extraction mode.
    pub fn finish(self, stop: StopReason) -> Result<NullSpaceReport, BnslError> {
        let n = self.w.cols();
        let phase_cycles: u64 = self.trace.phases.iter().map(|r| r.phase_cycles).sum();
        let mut ordering: Vec<usize> = (0..n).collect();
        let mut ordering_cycles = 0;
        let mut rank_cycles = 0;
        let mut rank = None;
        if self.config.extraction != Extraction::None {
            let sign = orientation(self.direction)?;
            self.oracle.advance_phase();
            let before = self.oracle.cycles_used();
            let mut energy = Vec::with_capacity(n);
            for c in 0..n {
                let col: Vec<Complex64> = self.w.column(c).iter().map(|z| z * self.config.probe_scale).collect();
                energy.push(sign * self.oracle.probe(&col)?);
            }
            ordering.sort_by(|a, b| energy[*a].total_cmp(&energy[*b]));
            ordering_cycles = self.oracle.cycles_used() - before;
            rank = Some(match self.config.extraction {
                Extraction::KnownRank(r) => {
                    if r > n {
                        return Err(BnslError::InvalidConfig(format!("rank {r} exceeds dimension {n}")));
                    }
                    RankEstimate {
                        estimated_rank: r,
                        null_flags: (0..n).map(|i| i < n - r).collect(),
                        inconsistent: false,
                    }
                }
                _ => {
                    let before = self.oracle.cycles_used();
                    let mut flags = Vec::with_capacity(n);
                    for &c in &ordering {
                        let col: Vec<Complex64> =
                            self.w.column(c).iter().map(|z| z * self.config.probe_scale).collect();
                        flags.push(null_membership_test(self.oracle, &col, self.config.null_tol)?);
                    }
                    rank_cycles = self.oracle.cycles_used() - before;
                    rank_from_flags(flags)
                }
            });
        }
        let n_null = rank.as_ref().map_or(0, |r| n - r.estimated_rank);
        let t = self.w.select_columns(&ordering[..n_null]);
        let total_cycles = self.cycles_used();
        Ok(NullSpaceReport {
            t,
            w: self.w,
            ordering,
            rank,
            trace: self.trace,
            stop,
            partial: stop == StopReason::BudgetExhausted,
            direction: self.direction,
            total_cycles,
            phase_cycles,
            ordering_cycles,
            rank_cycles,
            detection_cycles: self.detection_cycles,
        })
    }
}

fn rank_from_flags(flags: Vec<bool>) -> RankEstimate {
    let n = flags.len();
    let count = flags.iter().filter(|f| **f).count();
    let last_null = flags.iter().rposition(|f| *f);
    let null_dim = last_null.map_or(0, |i| i + 1);
    RankEstimate {
        estimated_rank: n - null_dim,
        inconsistent: null_dim != count,
        null_flags: flags,
    }
}

/// Runs BNSL to its stop condition and extracts the null space.
pub fn run_bnsl<O: QueryOracle + ?Sized>(oracle: &mut O, config: &BnslConfig) -> Result<NullSpaceReport, BnslError> {
    let mut run = BnslRun::new(oracle, config.clone())?;
    let stop = run.run_phases()?;
    run.finish(stop)
}

/// Orders the columns of a finished precoder and applies the scaling test to
/// each; two cycles per column plus one ordering probe per column.
pub fn estimate_rank<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    w: &ComplexMatrix,
    direction: Direction,
    tol: f64,
) -> Result<(Vec<usize>, RankEstimate), BnslError> {
    let sign = orientation(direction)?;
    oracle.advance_phase();
    let n = w.cols();
    let mut energy = Vec::with_capacity(n);
    for c in 0..n {
        energy.push(sign * oracle.probe(&w.column(c))?);
    }
    let mut ordering: Vec<usize> = (0..n).collect();
    ordering.sort_by(|a, b| energy[*a].total_cmp(&energy[*b]));
    let mut flags = Vec::with_capacity(n);
    for &c in &ordering {
        flags.push(null_membership_test(oracle, &w.column(c), tol)?);
    }
    Ok((ordering, rank_from_flags(flags)))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RcConfig {
    /// Configuration of every inner run; its extraction mode is ignored.
    pub inner: BnslConfig,
    /// Sweeps of the plain-BNSL prefix used when `n_r` is not given.
    pub rank_prefix_sweeps: usize,
}

impl Default for RcConfig {
    fn default() -> Self {
        Self {
            inner: BnslConfig::default(),
            rank_prefix_sweeps: 6,
        }
    }
}

/// One inner run of RC-BNSL.
#[derive(Debug, Clone)]
pub struct RcStage {
    /// Orthonormal `n_t × (n_r + 1)` basis of the equivalent channel.
    pub basis: ComplexMatrix,
    pub report: NullSpaceReport,
    pub v: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct RcReport {
    pub t: ComplexMatrix,
    pub stages: Vec<RcStage>,
    pub n_r: usize,
    /// `n_r` came from the plain-BNSL prefix.
    pub rank_estimated: bool,
    pub prefix_cycles: u64,
    pub total_cycles: u64,
}

impl RcReport {
    pub fn interference(&self, g: &HermitianMatrix) -> Result<f64, LinalgError> {
        Ok(g.congruence(&self.t)?.diagonal().iter().sum())
    }
}

/// Reduced-complexity BNSL: learns one null direction at a time through
/// `(n_r + 1)`-dimensional equivalent channels built from the columns of
/// `seed` (identity when `None`).
pub fn run_rc_bnsl<O: QueryOracle + ?Sized>(
    oracle: &mut O,
    n_r: Option<usize>,
    seed: Option<&ComplexMatrix>,
    config: &RcConfig,
) -> Result<RcReport, BnslError> {
    let n_t = oracle.dim();
    let start = oracle.cycles_used();
    let (n_r, rank_estimated) = match n_r {
        Some(r) => (r, false),
        None => {
            let prefix = BnslConfig {
                stop: StopRule::Never,
                max_sweeps: config.rank_prefix_sweeps,
                extraction: Extraction::EstimateRank,
                ..config.inner.clone()
            };
            let report = run_bnsl(oracle, &prefix)?;
            (report.rank_used().expect("rank was estimated"), true)
        }
    };
    let prefix_cycles = oracle.cycles_used() - start;
    if n_r == 0 || n_r >= n_t {
        return Err(BnslError::InvalidConfig(format!("need 0 < n_r < n_t, got n_r={n_r}, n_t={n_t}")));
    }
    let w = match seed {
        Some(s) => {
            if s.rows() != n_t || s.cols() != n_t || s.unitarity_error() > 1e-9 {
                return Err(BnslError::InvalidConfig("seed must be an n_t x n_t unitary".into()));
            }
            s.clone()
        }
        None => ComplexMatrix::identity(n_t),
    };
    let inner = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..config.inner.clone()
    };
    let mut basis = w.select_columns(&((n_t - n_r - 1)..n_t).collect::<Vec<_>>());
    let mut stages = Vec::with_capacity(n_t - n_r);
    for stage in 0..(n_t - n_r) {
        let report = {
            let mut sub = SubspaceOracle::new(&mut *oracle, basis.clone())?;
            run_bnsl(&mut sub, &inner)?
        };
        let u1 = report.w.column(report.ordering[0]);
        let v = basis.mul_vec(&u1)?;
        let rest = report.w.select_columns(&report.ordering[1..]);
        let next_basis = if stage + 1 < n_t - n_r {
            let carried = basis.matmul(&rest)?;
            let fresh = w.column(n_t - n_r - 2 - stage);
            let mut cols = vec![fresh];
            cols.extend((0..carried.cols()).map(|c| carried.column(c)));
            Some(ComplexMatrix::from_columns(&cols)?)
        } else {
            None
        };
        stages.push(RcStage {
            basis: basis.clone(),
            report,
            v,
        });
        if let Some(b) = next_basis {
            basis = b;
        }
    }
    let vs: Vec<Vec<Complex64>> = stages.iter().map(|s| s.v.clone()).collect();
    Ok(RcReport {
        t: ComplexMatrix::from_columns(&vs)?,
        stages,
        n_r,
        rank_estimated,
        prefix_cycles,
        total_cycles: oracle.cycles_used() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{closed_form_rotation, random_unitary, reference_cyclic_jacobi, rotate, JacobiOptions};
    use crate::linesearch::circular_distance;
    use crate::oracle::{IdealOracle, ResponseFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real_herm(rows: &[Vec<f64>]) -> HermitianMatrix {
        HermitianMatrix::new(ComplexMatrix::from_real_rows(rows).unwrap()).unwrap()
    }

    fn random_gram(n_r: usize, n_t: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ComplexMatrix::random_gaussian(n_r, n_t, &mut rng);
        let g = HermitianMatrix::gram(&h);
        g.scale(1.0 / g.frobenius_norm())
    }

    fn started(g: HermitianMatrix) -> IdealOracle {
        let mut o = IdealOracle::identity(g);
        o.advance_phase();
        o
    }

    fn blind(o: &mut IdealOracle, w: &ComplexMatrix, l: usize, m: usize, eta: f64) -> BlindRotation {
        blind_rotation_params(o, w, l, m, eta, Direction::Increasing, &LineSearchOptions::default(), 1.0).unwrap()
    }

    #[test]
    fn blind_matches_closed_form_on_two_by_two() {
        let g = real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]]).scale(0.25);
        let mut o = started(g);
        let r = blind(&mut o, &ComplexMatrix::identity(2), 0, 1, 1e-6);
        // ±π/4 describe the same annihilating rotation
        assert!(circular_distance(r.params.theta, FRAC_PI_4, FRAC_PI_2) <= 2e-6, "{r:?}");
        assert!(circular_distance(r.params.phi, 0.0, 2.0 * PI) <= 2e-6);
        assert_eq!(r.evaluations, 2 * (3 + 21));
    }

    #[test]
    fn diagonal_input_gives_zero_angle() {
        let mut o = started(HermitianMatrix::from_real_diagonal(&[0.7, 0.2]));
        let r = blind(&mut o, &ComplexMatrix::identity(2), 0, 1, 1e-4);
        assert!(r.params.theta.abs() <= 1e-4);
    }

    #[test]
    fn blind_matches_closed_form_with_random_precoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..50 {
            let g = random_gram(4, 4, trial);
            let w = random_unitary(4, &mut rng);
            let a = g.congruence(&w).unwrap();
            let mut o = started(g);
            let r = blind(&mut o, &w, 1, 3, 1e-5);
            let cf = closed_form_rotation(&a, 1, 3).unwrap();
            assert!(circular_distance(r.params.theta, cf.theta, FRAC_PI_2) <= 2e-5);
            assert!(circular_distance(r.params.phi, cf.phi, 2.0 * PI) <= 2e-5);
            let after = rotate(&a, &r.params).unwrap();
            assert!(after.get(1, 3).norm() <= 1e-4 * a.frobenius_norm());
        }
    }

    #[test]
    fn response_family_does_not_change_decisions() {
        let g = random_gram(3, 3, 4);
        let mut base = started(g.clone());
        let w = ComplexMatrix::identity(3);
        let a = blind(&mut base, &w, 0, 2, 1e-5);
        let mut o = IdealOracle::new(g, ResponseFamily::Exp).unwrap();
        o.advance_phase();
        let b = blind(&mut o, &w, 0, 2, 1e-5);
        assert_eq!(a, b);
    }

    #[test]
    fn rank_one_channel_null_space() {
        let mut o = IdealOracle::identity(HermitianMatrix::from_real_diagonal(&[1.0, 0.0]));
        let report = run_bnsl(&mut o, &BnslConfig::with_eta(1e-4)).unwrap();
        assert_eq!(report.rank_used(), Some(1));
        assert_eq!(report.t.cols(), 1);
        assert!(report.t[(0, 0)].norm() < 1e-12);
        assert!((report.t[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(report.interference(o.disclosed_gram()).unwrap() < 1e-20);
    }

    #[test]
    fn full_rank_two_by_two_converges_to_eigenvectors() {
        let g = real_herm(&[vec![2.0, 1.0], vec![1.0, 2.0]]).scale(0.25);
        let eta = 1e-5;
        let mut o = IdealOracle::identity(g.clone());
        let report = run_bnsl(&mut o, &BnslConfig::with_eta(eta)).unwrap();
        assert_eq!(report.rank_used(), Some(2));
        let d = g.congruence(&report.w).unwrap();
        let mut diag = d.diagonal();
        diag.sort_by(f64::total_cmp);
        assert!((diag[0] - 0.25).abs() < 10.0 * eta && (diag[1] - 0.75).abs() < 10.0 * eta);
        let low = report.w.column(report.ordering[0]);
        let overlap = (low[0] - low[1]).norm() * std::f64::consts::FRAC_1_SQRT_2;
        assert!(overlap > (2.0 * eta).cos());
    }

    #[test]
    fn precoder_stays_unitary_and_isospectral() {
        let g = random_gram(3, 5, 8);
        let mut o = IdealOracle::identity(g.clone());
        let cfg = BnslConfig {
            stop: StopRule::Never,
            max_sweeps: 10,
            extraction: Extraction::None,
            ..BnslConfig::with_eta(1e-4)
        };
        let report = run_bnsl(&mut o, &cfg).unwrap();
        assert!(report.w.unitarity_error() < 1e-9);
        let a = g.congruence(&report.w).unwrap();
        let ev_g = reference_cyclic_jacobi(&g, &JacobiOptions::default()).unwrap().sorted_values();
        let ev_a = reference_cyclic_jacobi(&a, &JacobiOptions::default()).unwrap().sorted_values();
        for (x, y) in ev_g.iter().zip(&ev_a) {
            assert!((x - y).abs() < 1e-10);
        }
        assert_eq!(report.trace.phases.len(), 100);
        assert_eq!(report.total_cycles, report.phase_cycles);
    }

    #[test]
    fn off_norm_near_monotone() {
        for seed in 0..10 {
            let g = random_gram(3, 4, seed);
            let eta = 1e-4;
            let mut o = IdealOracle::identity(g.clone());
            let cfg = BnslConfig {
                stop: StopRule::Never,
                max_sweeps: 6,
                extraction: Extraction::None,
                ..BnslConfig::with_eta(eta)
            };
            let mut report = run_bnsl(&mut o, &cfg).unwrap();
            report.trace.annotate(&g, 1).unwrap();
            let p = report.trace.off_norms().unwrap();
            let eps = 2.0 * (7.0 + 2.0 * 2f64.sqrt()) * eta * eta * g.frobenius_norm().powi(2);
            for w in p.windows(2) {
                assert!(w[1] * w[1] <= w[0] * w[0] + eps, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn phase_cost_is_exact() {
        let g = random_gram(2, 4, 3);
        let eta = 3e-4;
        let mut o = IdealOracle::identity(g);
        let cfg = BnslConfig {
            stop: StopRule::Never,
            max_sweeps: 2,
            extraction: Extraction::EstimateRank,
            ..BnslConfig::with_eta(eta)
        };
        let report = run_bnsl(&mut o, &cfg).unwrap();
        let expected = 2 * (3 + ((FRAC_PI_2 / eta).log2().ceil() as u64));
        assert!(report.trace.phases.iter().all(|r| r.phase_cycles == expected));
        assert_eq!(report.ordering_cycles, 4);
        assert_eq!(report.rank_cycles, 8);
        assert_eq!(
            report.total_cycles,
            report.phase_cycles + report.ordering_cycles + report.rank_cycles
        );
        assert_eq!(o.cycles_used(), report.total_cycles);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let g = random_gram(2, 4, 3);
        let mut o = IdealOracle::identity(g);
        let cfg = BnslConfig {
            probe_budget: Some(200),
            extraction: Extraction::None,
            ..BnslConfig::with_eta(1e-3)
        };
        let report = run_bnsl(&mut o, &cfg).unwrap();
        assert!(report.partial);
        assert_eq!(report.stop, StopReason::BudgetExhausted);
        assert!(report.total_cycles <= 200);
    }

    #[test]
    fn decreasing_direction_matches_increasing() {
        let g = random_gram(2, 3, 5);
        let cfg = BnslConfig::with_eta(1e-4);
        let mut inc = IdealOracle::identity(g.clone());
        let mut dec = IdealOracle::identity(g).with_direction(Direction::Decreasing);
        let a = run_bnsl(&mut inc, &cfg).unwrap();
        let b = run_bnsl(&mut dec, &cfg).unwrap();
        assert_eq!(a.trace.phases, b.trace.phases);
        assert_eq!(a.ordering, b.ordering);
    }

    #[test]
    fn unknown_direction_needs_configuration() {
        let g = random_gram(2, 3, 5);
        let mut o = IdealOracle::identity(g.clone()).with_direction(Direction::Unknown);
        assert!(matches!(
            run_bnsl(&mut o, &BnslConfig::default()),
            Err(BnslError::Oracle(OracleError::UnknownDirection))
        ));
        let mut o = IdealOracle::identity(g).with_direction(Direction::Unknown);
        let cfg = BnslConfig {
            auto_detect_direction: true,
            ..BnslConfig::default()
        };
        let report = run_bnsl(&mut o, &cfg).unwrap();
        assert_eq!(report.direction, Direction::Increasing);
        assert_eq!(report.detection_cycles, 2);
    }

    #[test]
    fn rank_detection_on_seeded_four_by_two() {
        let g = random_gram(2, 4, 17);
        let mut o = IdealOracle::identity(g);
        let report = run_bnsl(&mut o, &BnslConfig::with_eta(1e-4)).unwrap();
        assert_eq!(report.stop, StopReason::Converged);
        assert_eq!(report.rank_used(), Some(2));
        assert!(!report.rank.unwrap().inconsistent);
    }

    #[test]
    fn rank_flags_handle_non_prefix_nulls() {
        let r = rank_from_flags(vec![true, false, true, false]);
        assert!(r.inconsistent);
        assert_eq!(r.estimated_rank, 1);
        let r = rank_from_flags(vec![true, true, false]);
        assert!(!r.inconsistent);
        assert_eq!(r.estimated_rank, 1);
    }

    #[test]
    fn eta_schedule_from_db() {
        let s = EtaSchedule::from_db(&[-6.0, -8.0, -15.0]);
        assert!((s.for_sweep(0) - 0.251188643150958).abs() < 1e-12);
        assert_eq!(s.for_sweep(7), s.for_sweep(2));
        assert!(matches!(EtaSchedule::from_db(&[-10.0]), EtaSchedule::Constant(_)));
        assert!(BnslConfig {
            eta: EtaSchedule::Constant(0.0),
            ..BnslConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rc_bnsl_three_by_two_is_single_stage() {
        let g = random_gram(2, 3, 9);
        let mut o = IdealOracle::identity(g.clone());
        let rc = run_rc_bnsl(&mut o, Some(2), None, &RcConfig::default()).unwrap();
        assert_eq!(rc.stages.len(), 1);
        assert_eq!(rc.t.cols(), 1);
        assert!(rc.interference(&g).unwrap() < 1e-5);
    }

    #[test]
    fn rc_bnsl_learns_orthonormal_null_basis() {
        let g = random_gram(2, 6, 10);
        let mut o = IdealOracle::identity(g.clone());
        let rc = run_rc_bnsl(&mut o, Some(2), None, &RcConfig::default()).unwrap();
        assert_eq!(rc.t.cols(), 4);
        assert!(rc.t.unitarity_error() < 1e-9);
        assert!(rc.interference(&g).unwrap() < 1e-4);
        assert_eq!(rc.total_cycles, o.cycles_used());
    }

    #[test]
    fn rc_bnsl_estimates_rank_when_missing() {
        let g = random_gram(2, 5, 12);
        let mut o = IdealOracle::identity(g.clone());
        let cfg = RcConfig {
            inner: BnslConfig::with_eta(1e-4),
            ..RcConfig::default()
        };
        let rc = run_rc_bnsl(&mut o, None, None, &cfg).unwrap();
        assert!(rc.rank_estimated);
        assert_eq!(rc.n_r, 2);
        assert!(rc.prefix_cycles > 0);
    }

    #[test]
    fn rc_bnsl_rejects_bad_rank() {
        let g = random_gram(2, 3, 9);
        let mut o = IdealOracle::identity(g);
        assert!(run_rc_bnsl(&mut o, Some(3), None, &RcConfig::default()).is_err());
    }
}
