//! Verification experiments: each runs a seeded Monte Carlo batch against
//! disclosed fixtures and reports what it measured next to its threshold.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::Serialize;

use super::bounds::{
    check_interference_plateau, check_linear_bound, estimate_convergence_order, linear_bound_fixed_point, median,
    plateau_bound,
    sufficiency_coefficient, PlateauReport, PlateauSample, SufficiencyMode,
};
use super::fixtures::{channel, channel_with_min_delta, gap_delta, random_psd, run_trials, separated_values, spectrum, trial_rng};
use super::ExperimentError;
use crate::bnsl::{
    run_bnsl, run_rc_bnsl, BnslConfig, BnslRun, Extraction, NullSpaceReport, RcConfig, StopReason, StopRule,
};
use crate::linalg::{
    closed_form_rotation, off_diagonal_norm, reference_cyclic_jacobi, ComplexMatrix, HermitianMatrix, JacobiOptions,
};
use crate::linesearch::{circular_distance, BracketMode, LineSearchOptions};
use crate::oracle::{Direction, IdealOracle, ResponseFamily};
use crate::radiosim::{ChannelSet, MeasurementConfig, PowerControlModel, RadioOracle};

/// Cycle accounting audit accumulated over every run of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CycleAudit {
    pub runs: usize,
    pub phases: usize,
    pub degenerate_phases: usize,
    /// Phases whose cycle count differs from `2·(3 + ⌈log2(bracket/η)⌉)`.
    pub phase_mismatches: usize,
    /// Runs whose total differs from the sum of its parts.
    pub total_mismatches: usize,
}

impl CycleAudit {
    pub fn passed(&self) -> bool {
        self.phase_mismatches == 0 && self.total_mismatches == 0
    }

    pub fn merge(&mut self, other: &CycleAudit) {
        self.runs += other.runs;
        self.phases += other.phases;
        self.degenerate_phases += other.degenerate_phases;
        self.phase_mismatches += other.phase_mismatches;
        self.total_mismatches += other.total_mismatches;
    }

    pub fn merged<'a>(audits: impl IntoIterator<Item = &'a CycleAudit>) -> CycleAudit {
        let mut out = CycleAudit::default();
        for a in audits {
            out.merge(a);
        }
        out
    }
}

/// Explicit per-phase cycle count: two line searches, each with three or
/// four bracketing samples plus one probe per bisection step.
pub fn expected_phase_cycles(eta: f64, config: &BnslConfig) -> u64 {
    config.phase_cost(eta)
}

/// `2·(3 + ⌈log2((π/2)/η)⌉)` for the default ordinal bracket with memoized
/// probes, computed independently of the line-search module.
pub fn closed_form_phase_cycles(eta: f64) -> u64 {
    2 * (3 + ((FRAC_PI_2 / eta).log2().ceil().max(0.0) as u64))
}

/// Audits one finished report: every non-degenerate phase must cost exactly
/// the scheduled amount and the total must equal phases plus extraction plus
/// detection. A degenerate phase stops after bracketing, either in the phase
/// search or in the angle search.
pub fn audit_report(report: &NullSpaceReport, config: &BnslConfig) -> CycleAudit {
    let mut audit = CycleAudit {
        runs: 1,
        ..CycleAudit::default()
    };
    let default_search = config.line_search == LineSearchOptions::default();
    let samples = match config.line_search.bracket {
        BracketMode::Ordinal => 4,
        BracketMode::Table => 3,
    };
    for rec in &report.trace.phases {
        audit.phases += 1;
        let full = expected_phase_cycles(rec.eta, config);
        let ok = if rec.degenerate {
            audit.degenerate_phases += 1;
            rec.phase_cycles == samples || rec.phase_cycles == full / 2 + samples
        } else {
            rec.phase_cycles == full && (!default_search || full == closed_form_phase_cycles(rec.eta))
        };
        if !ok {
            audit.phase_mismatches += 1;
        }
    }
    let sum: u64 = report.trace.phases.iter().map(|r| r.phase_cycles).sum();
    let parts = sum + report.ordering_cycles + report.rank_cycles + report.detection_cycles;
    if sum != report.phase_cycles || parts != report.total_cycles {
        audit.total_mismatches += 1;
    }
    audit
}

// ---------------------------------------------------------------------------
// blind versus closed-form rotation parameters

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub fixtures: usize,
    pub etas: Vec<f64>,
    pub phases_checked: usize,
    pub failures: usize,
    /// Largest `|θ̂ − θ*| / η` (angles compared modulo π/2).
    pub worst_theta_ratio: f64,
    /// Largest `|φ̂ − φ*| / η` (angles compared modulo 2π).
    pub worst_phi_ratio: f64,
    pub audit: CycleAudit,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.phases_checked > 0
    }
}

/// Runs the first full pivot cycle of BNSL on random PSD matrices of random
/// size in `2..=8` (full rank), comparing every phase with the
/// closed-form parameters of the disclosed iterate `Wᴴ G W`.
pub fn blind_vs_closed_form(fixtures: usize, etas: &[f64], seed: u64) -> Result<EquivalenceReport, ExperimentError> {
    let per_fixture = run_trials(fixtures, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let n = rng.random_range(2..=8usize);
        let g = random_psd(n, &mut rng);
        let mut out = Vec::new();
        let mut audit = CycleAudit::default();
        for &eta in etas {
            let config = BnslConfig {
                stop: StopRule::Never,
                extraction: Extraction::None,
                ..BnslConfig::with_eta(eta)
            };
            let mut oracle = IdealOracle::identity(g.clone());
            let mut run = BnslRun::new(&mut oracle, config.clone())?;
            for _ in 0..n * (n - 1) / 2 {
                let iterate = g.congruence(run.precoder())?;
                let rec = run.step_phase(eta)?;
                let truth = closed_form_rotation(&iterate, rec.l, rec.m)?;
                let dt = circular_distance(rec.theta_hat, truth.theta, FRAC_PI_2);
                let dp = if truth.theta == 0.0 && iterate.get(rec.l, rec.m).norm() == 0.0 {
                    0.0
                } else {
                    circular_distance(rec.phi_hat, truth.phi, 2.0 * PI)
                };
                out.push((eta, dt, dp));
            }
            let report = run.finish(StopReason::MaxSweeps)?;
            audit.merge(&audit_report(&report, &config));
        }
        Ok((out, audit))
    });
    let mut report = EquivalenceReport {
        fixtures,
        etas: etas.to_vec(),
        phases_checked: 0,
        failures: 0,
        worst_theta_ratio: 0.0,
        worst_phi_ratio: 0.0,
        audit: CycleAudit::default(),
    };
    for r in per_fixture {
        let (phases, audit) = r?;
        report.audit.merge(&audit);
        for (eta, dt, dp) in phases {
            report.phases_checked += 1;
            if dt > 2.0 * eta || dp > 2.0 * eta {
                report.failures += 1;
            }
            report.worst_theta_ratio = report.worst_theta_ratio.max(dt / eta);
            report.worst_phi_ratio = report.worst_phi_ratio.max(dp / eta);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// invariance under the response map

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub fixtures: usize,
    pub families: usize,
    pub eta: f64,
    /// Fixtures where some family produced a different trace.
    pub mismatched_fixtures: usize,
    pub phases_compared: usize,
    pub audit: CycleAudit,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.mismatched_fixtures == 0 && self.phases_compared > 0
    }
}

/// Runs BNSL to its stop rule under each response family and compares the
/// traces, cycle counters and final precoders for bit equality.
pub fn monotone_invariance(
    fixtures: usize,
    families: &[ResponseFamily],
    eta: f64,
    seed: u64,
) -> Result<InvarianceReport, ExperimentError> {
    let config = BnslConfig {
        extraction: Extraction::None,
        ..BnslConfig::with_eta(eta)
    };
    let per_fixture = run_trials(fixtures, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let n = rng.random_range(2..=8usize);
        let g = random_psd(n, &mut rng);
        let mut reference: Option<NullSpaceReport> = None;
        let mut same = true;
        let mut audit = CycleAudit::default();
        for family in families {
            let mut oracle = IdealOracle::new(g.clone(), family.clone()).map_err(crate::bnsl::BnslError::from)?;
            let report = run_bnsl(&mut oracle, &config)?;
            audit.merge(&audit_report(&report, &config));
            match &reference {
                None => reference = Some(report),
                Some(r) => same &= traces_identical(r, &report),
            }
        }
        Ok((same, reference.map_or(0, |r| r.trace.phases.len()), audit))
    });
    let mut report = InvarianceReport {
        fixtures,
        families: families.len(),
        eta,
        mismatched_fixtures: 0,
        phases_compared: 0,
        audit: CycleAudit::default(),
    };
    for r in per_fixture {
        let (same, phases, audit) = r?;
        report.mismatched_fixtures += usize::from(!same);
        report.phases_compared += phases * families.len().saturating_sub(1);
        report.audit.merge(&audit);
    }
    Ok(report)
}

/// Bit equality of every trace row plus the final precoder.
pub fn traces_identical(a: &NullSpaceReport, b: &NullSpaceReport) -> bool {
    a.trace.phases.len() == b.trace.phases.len()
        && a.trace.phases.iter().zip(&b.trace.phases).all(|(x, y)| x.decisions() == y.decisions())
        && a.total_cycles == b.total_cycles
        && a.w.as_slice().iter().zip(b.w.as_slice()).all(|(x, y)| {
            x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
        })
}

// ---------------------------------------------------------------------------
// linear-rate bound under the sufficient accuracy

#[derive(Debug, Clone, Serialize)]
pub struct LinearRateSize {
    pub n_t: usize,
    pub coefficient: f64,
    pub trials: usize,
    pub cycles_checked: usize,
    pub violations: usize,
    /// Largest `LHS / RHS` observed.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearRateReport {
    pub sizes: Vec<LinearRateSize>,
    pub floor: f64,
    pub audit: CycleAudit,
}

impl LinearRateReport {
    pub fn violations(&self) -> usize {
        self.sizes.iter().map(|s| s.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0 && self.sizes.iter().all(|s| s.cycles_checked > 0)
    }
}

/// Drives BNSL with the sufficient accuracy `η = a·P/‖G‖` re-evaluated at
/// the start of each pivot cycle and checks the linear-rate inequality on
/// every cycle. Trials stop once `P²/‖G‖²` falls below `floor`, where the
/// off-norm is at the level of floating-point round-off.
pub fn linear_rate_experiment(
    sizes: &[usize],
    trials: usize,
    max_cycles: usize,
    floor: f64,
    mode: SufficiencyMode,
    seed: u64,
) -> Result<LinearRateReport, ExperimentError> {
    let mut out = LinearRateReport {
        sizes: Vec::new(),
        floor,
        audit: CycleAudit::default(),
    };
    for (si, &n) in sizes.iter().enumerate() {
        let coefficient = sufficiency_coefficient(n, mode)?;
        let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
            let mut rng = trial_rng(seed.wrapping_add(si as u64), t);
            let n_r = rng.random_range(1..n);
            let g = channel(n_r, n, &mut rng)?.gram();
            let norm_g = g.frobenius_norm();
            let config = BnslConfig {
                stop: StopRule::Never,
                extraction: Extraction::None,
                max_sweeps: max_cycles,
                ..BnslConfig::with_eta(coefficient)
            };
            let mut oracle = IdealOracle::identity(g.clone());
            let mut run = BnslRun::new(&mut oracle, config.clone())?;
            let m = n * (n - 1) / 2;
            let mut etas = Vec::new();
            let mut p = off_diagonal_norm(&g);
            for _ in 0..max_cycles {
                if p * p < floor * norm_g * norm_g {
                    break;
                }
                let eta = (coefficient * p / norm_g).min(1.0);
                for _ in 0..m {
                    run.step_phase(eta)?;
                    etas.push(eta);
                }
                p = off_diagonal_norm(&g.congruence(run.precoder())?);
            }
            let mut report = run.finish(StopReason::MaxSweeps)?;
            let audit = audit_report(&report, &config);
            report.trace.annotate(&g, 0)?;
            let series = report.trace.off_norms().expect("annotated");
            let checks = if series.len() > m {
                check_linear_bound(&series, &etas, n, norm_g, true, 0.0)?.checks
            } else {
                Vec::new()
            };
            Ok((checks, audit))
        });
        let mut size = LinearRateSize {
            n_t: n,
            coefficient,
            trials,
            cycles_checked: 0,
            violations: 0,
            worst_ratio: 0.0,
        };
        for r in runs {
            let (checks, audit) = r?;
            out.audit.merge(&audit);
            for c in checks {
                size.cycles_checked += 1;
                size.violations += usize::from(c.violated);
                if c.rhs > 0.0 {
                    size.worst_ratio = size.worst_ratio.max(c.lhs / c.rhs);
                }
            }
        }
        out.sizes.push(size);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// fixed-accuracy convergence profile (figure 4 statistics)

#[derive(Debug, Clone, Serialize)]
pub struct CycleProfile {
    pub eta: f64,
    /// Median `P²` after `c` completed cycles, `c = 0, 1, …`.
    pub median: Vec<f64>,
    pub lower_quartile: Vec<f64>,
    pub upper_quartile: Vec<f64>,
}

impl CycleProfile {
    /// `10·log10(median P₀² / median P₁²)`.
    pub fn first_cycle_decrease_db(&self) -> f64 {
        10.0 * (self.median[0] / self.median[1]).log10()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub n_t: usize,
    pub n_r: usize,
    pub trials: usize,
    pub profiles: Vec<CycleProfile>,
    pub audit: CycleAudit,
}

/// Per-trial off-norm squares at whole cycles for a fixed accuracy.
pub fn cycle_profile_trials(
    n_t: usize,
    n_r: usize,
    trials: usize,
    eta: f64,
    cycles: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, CycleAudit), ExperimentError> {
    let config = BnslConfig {
        stop: StopRule::Never,
        max_sweeps: cycles,
        extraction: Extraction::None,
        ..BnslConfig::with_eta(eta)
    };
    let m = n_t * (n_t - 1) / 2;
    let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let g = channel(n_r, n_t, &mut rng)?.gram();
        let mut oracle = IdealOracle::identity(g.clone());
        let mut report = run_bnsl(&mut oracle, &config)?;
        let audit = audit_report(&report, &config);
        report.trace.annotate(&g, n_t - n_r)?;
        let series = report.trace.off_norms().expect("annotated");
        Ok((series.iter().step_by(m).map(|p| p * p).collect::<Vec<_>>(), audit))
    });
    let mut out = Vec::with_capacity(trials);
    let mut audit = CycleAudit::default();
    for r in runs {
        let (s, a) = r?;
        out.push(s);
        audit.merge(&a);
    }
    Ok((out, audit))
}

/// Median and quartiles of `P²` per completed cycle for each accuracy.
pub fn cycle_profiles(
    n_t: usize,
    n_r: usize,
    trials: usize,
    etas: &[f64],
    cycles: usize,
    seed: u64,
) -> Result<ProfileReport, ExperimentError> {
    let mut report = ProfileReport {
        n_t,
        n_r,
        trials,
        profiles: Vec::new(),
        audit: CycleAudit::default(),
    };
    for &eta in etas {
        let (series, audit) = cycle_profile_trials(n_t, n_r, trials, eta, cycles, seed)?;
        report.audit.merge(&audit);
        let stat = |q: f64| -> Vec<f64> {
            (0..=cycles)
                .map(|c| super::bounds::quantile(&series.iter().map(|s| s[c]).collect::<Vec<_>>(), q))
                .collect()
        };
        report.profiles.push(CycleProfile {
            eta,
            median: stat(0.5),
            lower_quartile: stat(0.25),
            upper_quartile: stat(0.75),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCheck {
    pub report: ProfileReport,
    /// Median `P²` after three cycles at the smallest accuracy.
    pub plateau_median: f64,
    pub plateau_limit: f64,
    /// First-cycle decrease in dB per accuracy.
    pub first_cycle_db: Vec<f64>,
    /// `(max − min) / max` of the first-cycle decreases.
    pub first_cycle_spread: f64,
}

impl ProfileCheck {
    pub fn plateau_ok(&self) -> bool {
        self.plateau_median <= self.plateau_limit
    }

    pub fn first_cycle_ok(&self) -> bool {
        self.first_cycle_spread < 0.2
    }

    pub fn passed(&self) -> bool {
        self.plateau_ok() && self.first_cycle_ok()
    }
}

/// The two figure-4 properties: the three-cycle plateau at the finest
/// accuracy and the accuracy-independence of the first-cycle decrease.
pub fn figure4_check(trials: usize, etas: &[f64], seed: u64) -> Result<ProfileCheck, ExperimentError> {
    let report = cycle_profiles(3, 2, trials, etas, 3, seed)?;
    let finest = report
        .profiles
        .iter()
        .min_by(|a, b| a.eta.total_cmp(&b.eta))
        .ok_or_else(|| ExperimentError::Insufficient("empty accuracy grid".into()))?;
    let plateau_median = finest.median[3];
    let plateau_limit = 100.0 * finest.eta * finest.eta;
    let first_cycle_db: Vec<f64> = report.profiles.iter().map(|p| p.first_cycle_decrease_db()).collect();
    let hi = first_cycle_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = first_cycle_db.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProfileCheck {
        plateau_median,
        plateau_limit,
        first_cycle_spread: (hi - lo) / hi,
        first_cycle_db,
        report,
    })
}

// ---------------------------------------------------------------------------
// interference plateau

#[derive(Debug, Clone, Serialize)]
pub struct PlateauExperiment {
    pub n_r: usize,
    pub sizes: Vec<usize>,
    pub etas: Vec<f64>,
    pub trials: usize,
    pub min_delta: f64,
    /// Plateau fit per size.
    pub per_size: Vec<(usize, PlateauReport)>,
    pub audit: CycleAudit,
}

impl PlateauExperiment {
    pub fn violations(&self) -> usize {
        self.per_size
            .iter()
            .flat_map(|(_, r)| r.per_eta.iter().map(|e| e.1))
            .sum()
    }

    pub fn slopes_ok(&self, lo: f64, hi: f64) -> bool {
        self.per_size.iter().all(|(_, r)| r.slope >= lo && r.slope <= hi)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0 && self.slopes_ok(1.5, 2.5)
    }
}

/// Runs BNSL to its stop rule on channels with `δ ≥ min_delta` for each
/// accuracy and compares the interference of the `n_t − n_r` learned null
/// columns with the explicit plateau term.
///
/// A run counts as converged when the stop rule fired, or when it used up
/// its sweeps with the off-norm already under the fixed point of the
/// linear-rate recursion. The second case is the norm once the null space
/// has dimension two or more: rotations inside it are driven by η-level
/// leakage and keep `|θ̂|` large, so the stop rule cannot fire.
pub fn plateau_experiment(
    sizes: &[usize],
    n_r: usize,
    etas: &[f64],
    trials: usize,
    min_delta: f64,
    slack: f64,
    seed: u64,
) -> Result<PlateauExperiment, ExperimentError> {
    let mut out = PlateauExperiment {
        n_r,
        sizes: sizes.to_vec(),
        etas: etas.to_vec(),
        trials,
        min_delta,
        per_size: Vec::new(),
        audit: CycleAudit::default(),
    };
    for (si, &n_t) in sizes.iter().enumerate() {
        let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
            let mut rng = trial_rng(seed.wrapping_add(si as u64), t);
            let (ch, delta) = channel_with_min_delta(n_r, n_t, min_delta, &mut rng, 100_000)?;
            let g = ch.gram();
            let mut samples = Vec::new();
            let mut audit = CycleAudit::default();
            for &eta in etas {
                let config = BnslConfig {
                    extraction: Extraction::KnownRank(n_r),
                    ..BnslConfig::with_eta(eta)
                };
                let mut oracle = IdealOracle::identity(g.clone());
                let report = run_bnsl(&mut oracle, &config)?;
                audit.merge(&audit_report(&report, &config));
                let norm_g = g.frobenius_norm();
                let p = off_diagonal_norm(&g.congruence(&report.w)?);
                let settled = report.stop == StopReason::MaxSweeps && p * p <= linear_bound_fixed_point(n_t, eta, norm_g);
                samples.push(PlateauSample {
                    eta,
                    interference: report.interference(&g)?,
                    bound: plateau_bound(n_t, n_r, eta, norm_g, delta),
                    converged: report.stop == StopReason::Converged || settled,
                });
            }
            Ok((samples, audit))
        });
        let mut samples = Vec::new();
        for r in runs {
            let (s, a) = r?;
            samples.extend(s);
            out.audit.merge(&a);
        }
        out.per_size.push((n_t, check_interference_plateau(&samples, slack)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// quadratic regime

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub n_t: usize,
    pub eta: f64,
    pub trials: usize,
    /// Fitted orders of the trials with enough pre-plateau pairs.
    pub orders: Vec<f64>,
    pub insufficient: usize,
    pub median_order: f64,
    pub audit: CycleAudit,
}

impl OrderReport {
    pub fn passed(&self) -> bool {
        self.median_order >= 1.6 && self.median_order <= 2.4
    }
}

/// Fits the convergence order of the per-phase off-norm series at lag one
/// pivot cycle on matrices with consecutive eigenvalue gaps of at least
/// `3·min_delta`. Only pairs whose later point lies above
/// `floor_factor·η·‖G‖` enter the fit, which keeps the accuracy plateau out.
pub fn quadratic_order_experiment(
    n_t: usize,
    eta: f64,
    trials: usize,
    min_delta: f64,
    floor_factor: f64,
    seed: u64,
) -> Result<OrderReport, ExperimentError> {
    let m = n_t * (n_t - 1) / 2;
    let config = BnslConfig {
        stop: StopRule::Never,
        max_sweeps: 10,
        extraction: Extraction::None,
        ..BnslConfig::with_eta(eta)
    };
    let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let values = separated_values(n_t, 3.0 * min_delta, &mut rng);
        let g = spectrum(&values, &mut rng);
        let mut oracle = IdealOracle::identity(g.clone());
        let mut report = run_bnsl(&mut oracle, &config)?;
        let audit = audit_report(&report, &config);
        report.trace.annotate(&g, 0)?;
        let series = report.trace.off_norms().expect("annotated");
        let floor = floor_factor * eta * g.frobenius_norm();
        Ok((estimate_convergence_order(&series, m, f64::INFINITY, floor).ok(), audit))
    });
    let mut orders = Vec::new();
    let mut insufficient = 0;
    let mut audit = CycleAudit::default();
    for r in runs {
        let (o, a) = r?;
        audit.merge(&a);
        match o {
            Some(v) => orders.push(v),
            None => insufficient += 1,
        }
    }
    Ok(OrderReport {
        n_t,
        eta,
        trials,
        median_order: median(&orders),
        orders,
        insufficient,
        audit,
    })
}

// ---------------------------------------------------------------------------
// rank detection

#[derive(Debug, Clone, Serialize)]
pub struct RankDetectionReport {
    pub draws: usize,
    pub eta: f64,
    pub null_tol: f64,
    pub correct: usize,
    pub inconsistent: usize,
    pub not_converged: usize,
    /// `(n_r, n_t, estimated)` of every miss.
    pub misses: Vec<(usize, usize, usize)>,
    pub audit: CycleAudit,
}

impl RankDetectionReport {
    pub fn passed(&self) -> bool {
        self.correct == self.draws
    }
}

/// Draws `(n_r, n_t)` with `1 ≤ n_r < n_t ≤ max_nt`, runs BNSL to
/// convergence on the exact oracle and applies the scaling test.
pub fn rank_detection_experiment(
    draws: usize,
    max_nt: usize,
    eta: f64,
    null_tol: f64,
    seed: u64,
) -> Result<RankDetectionReport, ExperimentError> {
    let config = BnslConfig {
        extraction: Extraction::EstimateRank,
        null_tol,
        max_sweeps: 60,
        ..BnslConfig::with_eta(eta)
    };
    let runs = run_trials(draws, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let n_t = rng.random_range(2..=max_nt);
        let n_r = rng.random_range(1..n_t);
        let g = channel(n_r, n_t, &mut rng)?.gram();
        let mut oracle = IdealOracle::identity(g);
        let report = run_bnsl(&mut oracle, &config)?;
        let rank = report.rank.clone().expect("rank estimated");
        Ok((n_r, n_t, rank, report.stop, audit_report(&report, &config)))
    });
    let mut out = RankDetectionReport {
        draws,
        eta,
        null_tol,
        correct: 0,
        inconsistent: 0,
        not_converged: 0,
        misses: Vec::new(),
        audit: CycleAudit::default(),
    };
    for r in runs {
        let (n_r, n_t, rank, stop, audit) = r?;
        out.audit.merge(&audit);
        out.inconsistent += usize::from(rank.inconsistent);
        out.not_converged += usize::from(stop != StopReason::Converged);
        if rank.estimated_rank == n_r && !rank.inconsistent {
            out.correct += 1;
        } else {
            out.misses.push((n_r, n_t, rank.estimated_rank));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reduced-complexity variant against plain BNSL

#[derive(Debug, Clone, Serialize)]
pub struct RcTrial {
    pub rc_cycles: u64,
    pub rc_interference: f64,
    /// Cycles plain BNSL spent (phases plus column ordering) until its
    /// learned null columns first reached the RC interference; `None` if
    /// it never did.
    pub plain_cycles_to_match: Option<u64>,
    pub plain_total_cycles: u64,
    pub plain_interference: f64,
    /// `(‖H v_m‖², bound)` per learned direction.
    pub directions: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RcComparison {
    pub n_t: usize,
    pub n_r: usize,
    pub eta: f64,
    pub slack: f64,
    pub trials: Vec<RcTrial>,
    pub median_rc_cycles: f64,
    /// Median with never-matching runs counted as infinite.
    pub median_plain_cycles: f64,
    pub direction_violations: usize,
    pub audit: CycleAudit,
}

impl RcComparison {
    pub fn passed(&self) -> bool {
        self.median_rc_cycles < self.median_plain_cycles && self.direction_violations == 0
    }
}

/// Paired runs of RC-BNSL and plain BNSL on the same channel.
///
/// Each learned direction is checked against the explicit plateau term of
/// its own `(n_r + 1)`-dimensional equivalent channel `UᴴGU`.
pub fn rc_vs_plain(
    n_t: usize,
    n_r: usize,
    eta: f64,
    trials: usize,
    slack: f64,
    seed: u64,
) -> Result<RcComparison, ExperimentError> {
    let plain_config = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..BnslConfig::with_eta(eta)
    };
    let rc_config = RcConfig {
        inner: plain_config.clone(),
        ..RcConfig::default()
    };
    let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let g = channel(n_r, n_t, &mut rng)?.gram();
        let mut audit = CycleAudit::default();

        let mut oracle = IdealOracle::identity(g.clone());
        let rc = run_rc_bnsl(&mut oracle, Some(n_r), None, &rc_config)?;
        let rc_interference = rc.interference(&g)?;
        let mut directions = Vec::new();
        for stage in &rc.stages {
            audit.merge(&audit_report(&stage.report, &rc_config.inner));
            let inner = g.congruence(&stage.basis)?;
            let leak = crate::linalg::hermitian_form(&g, &stage.v)?;
            let bound = match gap_delta(&inner)? {
                Some(d) => plateau_bound(n_r + 1, n_r, eta, inner.frobenius_norm(), d),
                None => f64::INFINITY,
            };
            directions.push((leak, bound));
        }

        let mut oracle = IdealOracle::identity(g.clone());
        let mut plain = run_bnsl(&mut oracle, &plain_config)?;
        audit.merge(&audit_report(&plain, &plain_config));
        let plain_interference = plain.interference(&g)?;
        plain.trace.annotate(&g, n_t - n_r)?;
        let ordering = plain.ordering_cycles;
        let plain_cycles_to_match = plain
            .trace
            .phases
            .iter()
            .find(|r| r.interference_sq.expect("annotated") <= rc_interference)
            .map(|r| r.cycle_count + ordering);
        Ok((
            RcTrial {
                rc_cycles: rc.total_cycles,
                rc_interference,
                plain_cycles_to_match,
                plain_total_cycles: plain.total_cycles,
                plain_interference,
                directions,
            },
            audit,
        ))
    });
    let mut out = RcComparison {
        n_t,
        n_r,
        eta,
        slack,
        trials: Vec::new(),
        median_rc_cycles: 0.0,
        median_plain_cycles: 0.0,
        direction_violations: 0,
        audit: CycleAudit::default(),
    };
    for r in runs {
        let (trial, audit) = r?;
        out.audit.merge(&audit);
        out.direction_violations += trial.directions.iter().filter(|(v, b)| *v > slack * b).count();
        out.trials.push(trial);
    }
    out.median_rc_cycles = median(&out.trials.iter().map(|t| t.rc_cycles as f64).collect::<Vec<_>>());
    out.median_plain_cycles = median(
        &out.trials
            .iter()
            .map(|t| t.plain_cycles_to_match.map_or(f64::INFINITY, |c| c as f64))
            .collect::<Vec<_>>(),
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// radio simulator against the exact oracle

#[derive(Debug, Clone, Serialize)]
pub struct RadioFidelityReport {
    pub fixtures: usize,
    pub eta: f64,
    /// Fixtures whose SNR-target trace differs from the affine exact trace.
    pub decision_mismatches: usize,
    /// Largest principal-angle sine between the waterfilling null space and
    /// the SNR-target one.
    pub worst_waterfilling_angle: f64,
    pub angle_failures: usize,
    pub saturated_phases: usize,
    pub audit: CycleAudit,
}

impl RadioFidelityReport {
    pub fn passed(&self) -> bool {
        self.decision_mismatches == 0 && self.angle_failures == 0
    }
}

/// Exact-oracle response equivalent to a noiseless SNR-target simulator:
/// `q = a₁·γ(σ₁² + s)/g + a₂`.
pub fn equivalent_affine(channels: &ChannelSet, model: &PowerControlModel) -> ResponseFamily {
    let (scale, offset) = model.measurement_law(channels.noise_var_pu, channels.a1(), channels.a2());
    ResponseFamily::Affine { scale, offset }
}

/// Largest sine of the principal angles between two orthonormal column sets
/// of equal size, from the singular values of `AᴴB`.
pub fn subspace_angle(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64, ExperimentError> {
    if a.cols() != b.cols() {
        return Err(ExperimentError::Unsupported("subspaces of different dimension".into()));
    }
    if a.cols() == 0 {
        return Ok(0.0);
    }
    let c = a.adjoint().matmul(b)?;
    let gram = HermitianMatrix::gram(&c);
    let eig = reference_cyclic_jacobi(&gram, &JacobiOptions::default())?;
    let smallest = eig.values.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    Ok((1.0 - smallest).max(0.0).sqrt())
}

/// Paired runs of the radio simulator (SNR-target, noise off) and the exact
/// oracle with the equivalent affine response, plus a waterfilling run
/// compared by null-space angle.
pub fn radio_fidelity(
    fixtures: usize,
    n_r: usize,
    n_t: usize,
    eta: f64,
    seed: u64,
) -> Result<RadioFidelityReport, ExperimentError> {
    let config = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..BnslConfig::with_eta(eta)
    };
    let runs = run_trials(fixtures, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let ch = channel(n_r, n_t, &mut rng)?;
        let mut audit = CycleAudit::default();
        let snr = PowerControlModel::default();
        let measurement = MeasurementConfig {
            noise_enabled: false,
            ..MeasurementConfig::default()
        };

        let mut radio = RadioOracle::new(ch.clone(), snr.clone(), measurement.clone())?;
        let radio_report = run_bnsl(&mut radio, &config)?;
        audit.merge(&audit_report(&radio_report, &config));
        let saturated = radio_report.trace.phases.iter().filter(|r| r.warning).count();

        let mut ideal = IdealOracle::new(ch.gram(), equivalent_affine(&ch, &snr)).map_err(crate::bnsl::BnslError::from)?;
        let ideal_report = run_bnsl(&mut ideal, &config)?;
        audit.merge(&audit_report(&ideal_report, &config));
        let same = traces_identical(&radio_report, &ideal_report);

        let mut wf = RadioOracle::new(ch.clone(), PowerControlModel::waterfilling(), measurement)?;
        let wf_report = run_bnsl(&mut wf, &config)?;
        audit.merge(&audit_report(&wf_report, &config));
        let angle = subspace_angle(&wf_report.t, &radio_report.t)?;
        Ok((same, angle, saturated, audit))
    });
    let mut out = RadioFidelityReport {
        fixtures,
        eta,
        decision_mismatches: 0,
        worst_waterfilling_angle: 0.0,
        angle_failures: 0,
        saturated_phases: 0,
        audit: CycleAudit::default(),
    };
    for r in runs {
        let (same, angle, saturated, audit) = r?;
        out.audit.merge(&audit);
        out.decision_mismatches += usize::from(!same);
        out.worst_waterfilling_angle = out.worst_waterfilling_angle.max(angle);
        out.angle_failures += usize::from(angle > 2.0 * eta);
        out.saturated_phases += saturated;
    }
    Ok(out)
}

/// Runs the exact oracle with a decreasing response and checks the learned
/// null space matches the increasing run.
pub fn direction_flip_angle(g: &HermitianMatrix, n_r: usize, eta: f64) -> Result<f64, ExperimentError> {
    let config = BnslConfig {
        extraction: Extraction::KnownRank(n_r),
        ..BnslConfig::with_eta(eta)
    };
    let mut up = IdealOracle::identity(g.clone());
    let a = run_bnsl(&mut up, &config)?;
    let mut down = IdealOracle::identity(g.clone()).with_direction(Direction::Decreasing);
    let b = run_bnsl(&mut down, &config)?;
    subspace_angle(&a.t, &b.t)
}

// ---------------------------------------------------------------------------
// eigenvalue clusters

#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub n_t: usize,
    pub cluster_size: usize,
    pub width: f64,
    pub delta_c: f64,
    pub eta: f64,
    pub trials: usize,
    /// Median fitted order over pairs above `P² = max(2δ_c√(Σξ²), (100·η·‖G‖)²)`.
    pub median_band_order: f64,
    /// Trials with too few pairs inside the band.
    pub insufficient: usize,
    /// Median `P²` after the last cycle.
    pub median_final_p2: f64,
    pub audit: CycleAudit,
}

/// BNSL on matrices with a cluster of `cluster_size` eigenvalues of spread
/// at most `width` and a remainder separated by `3·delta_c`.
pub fn cluster_experiment(
    n_t: usize,
    cluster_size: usize,
    width: f64,
    delta_c: f64,
    eta: f64,
    trials: usize,
    cycles: usize,
    seed: u64,
) -> Result<ClusterReport, ExperimentError> {
    if n_t < 3 {
        return Err(ExperimentError::Unsupported(format!(
            "a cluster plus a separated remainder needs n_t >= 3, got {n_t}"
        )));
    }
    if cluster_size < 2 || cluster_size >= n_t {
        return Err(ExperimentError::Unsupported(format!(
            "cluster size must lie in 2..n_t, got {cluster_size}"
        )));
    }
    let m = n_t * (n_t - 1) / 2;
    let config = BnslConfig {
        stop: StopRule::Never,
        max_sweeps: cycles,
        extraction: Extraction::None,
        ..BnslConfig::with_eta(eta)
    };
    let runs = run_trials(trials, |t| -> Result<_, ExperimentError> {
        let mut rng = trial_rng(seed, t);
        let values = super::fixtures::cluster_values(n_t, cluster_size, width, delta_c, &mut rng);
        let lambda = values[..cluster_size].iter().sum::<f64>() / cluster_size as f64;
        let xi_norm = values[..cluster_size].iter().map(|v| (v - lambda).powi(2)).sum::<f64>().sqrt();
        let g = spectrum(&values, &mut rng);
        let mut oracle = IdealOracle::identity(g.clone());
        let mut report = run_bnsl(&mut oracle, &config)?;
        let audit = audit_report(&report, &config);
        report.trace.annotate(&g, 0)?;
        let series = report.trace.off_norms().expect("annotated");
        let upper = f64::INFINITY;
        let floor = (2.0 * delta_c * xi_norm).sqrt().max(100.0 * eta * g.frobenius_norm());
        let order = estimate_convergence_order(&series, m, upper, floor).ok();
        let last = series.last().copied().unwrap_or(0.0);
        Ok((order, last * last, audit))
    });
    let mut orders = Vec::new();
    let mut finals = Vec::new();
    let mut insufficient = 0;
    let mut audit = CycleAudit::default();
    for r in runs {
        let (o, f, a) = r?;
        audit.merge(&a);
        finals.push(f);
        match o {
            Some(v) => orders.push(v),
            None => insufficient += 1,
        }
    }
    Ok(ClusterReport {
        n_t,
        cluster_size,
        width,
        delta_c,
        eta,
        trials,
        median_band_order: median(&orders),
        insufficient,
        median_final_p2: median(&finals),
        audit,
    })
}

/// Full-rank random PSD fixture, exposed for examples.
pub fn full_rank_fixture(n: usize, seed: u64) -> HermitianMatrix {
    random_psd(n, &mut trial_rng(seed, 0))
}

// ---------------------------------------------------------------------------
// command-line drivers

/// Settings of the bound verification batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsOptions {
    pub linear_sizes: Vec<usize>,
    pub plateau_sizes: Vec<usize>,
    pub n_r: usize,
    pub etas: Vec<f64>,
    pub linear_trials: usize,
    pub plateau_trials: usize,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            linear_sizes: vec![3, 4, 5, 6, 8],
            plateau_sizes: vec![3, 4, 5],
            n_r: 2,
            etas: vec![1e-1, 1e-2, 1e-4],
            linear_trials: 200,
            plateau_trials: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub options: BoundsOptions,
    pub linear: LinearRateReport,
    pub plateau: PlateauExperiment,
    pub linear_violations: usize,
    pub plateau_violations: usize,
    pub slopes_in_range: bool,
    pub audit: CycleAudit,
}

impl BoundsSummary {
    /// Explicit-inequality violations plus accounting mismatches.
    pub fn violations(&self) -> usize {
        self.linear_violations + self.plateau_violations + self.audit.phase_mismatches + self.audit.total_mismatches
    }
}

/// Linear-rate check at the sufficient accuracy (tabulated coefficient where
/// available, the closed form otherwise) and the interference plateau check.
pub fn verify_bounds(opts: &BoundsOptions) -> Result<BoundsSummary, ExperimentError> {
    let mut linear = LinearRateReport {
        sizes: Vec::new(),
        floor: 1e-12,
        audit: CycleAudit::default(),
    };
    for (i, &n) in opts.linear_sizes.iter().enumerate() {
        let mode = if sufficiency_coefficient(n, SufficiencyMode::Table).is_ok() {
            SufficiencyMode::Table
        } else {
            SufficiencyMode::Formula
        };
        let r = linear_rate_experiment(&[n], opts.linear_trials, 12, 1e-12, mode, opts.seed.wrapping_add(i as u64))?;
        linear.audit.merge(&r.audit);
        linear.sizes.extend(r.sizes);
    }
    let plateau = plateau_experiment(
        &opts.plateau_sizes,
        opts.n_r,
        &opts.etas,
        opts.plateau_trials,
        0.1,
        10.0,
        opts.seed,
    )?;
    let mut audit = linear.audit.clone();
    audit.merge(&plateau.audit);
    Ok(BoundsSummary {
        options: opts.clone(),
        linear_violations: linear.violations(),
        plateau_violations: plateau.violations(),
        slopes_in_range: plateau.slopes_ok(1.5, 2.5),
        linear,
        plateau,
        audit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RankDemo {
    pub n_t: usize,
    pub n_r: usize,
    pub eta: f64,
    pub seed: u64,
    pub oracle: super::OracleKind,
    pub estimated_rank: usize,
    pub inconsistent: bool,
    /// `(column, Rayleigh quotient, null flag)` in the blind ordering.
    pub columns: Vec<(usize, f64, bool)>,
    pub stop: StopReason,
    pub total_cycles: u64,
    pub rank_cycles: u64,
    pub interference: f64,
    #[serde(skip)]
    pub report: Option<NullSpaceReport>,
}

/// One BNSL run with rank estimation on a seeded channel.
pub fn rank_detect_demo(
    n_t: usize,
    n_r: usize,
    eta: f64,
    seed: u64,
    oracle: super::OracleKind,
) -> Result<RankDemo, ExperimentError> {
    if n_r == 0 || n_r >= n_t {
        return Err(ExperimentError::Config(format!("need 0 < n_r < n_t, got n_r={n_r} n_t={n_t}")));
    }
    let mut rng = trial_rng(seed, 0);
    let ch = channel(n_r, n_t, &mut rng)?;
    let g = ch.gram();
    let config = BnslConfig {
        extraction: Extraction::EstimateRank,
        max_sweeps: 60,
        ..BnslConfig::with_eta(eta)
    };
    let mut o = super::build_oracle(&ch, oracle)?;
    let mut report = run_bnsl(o.as_mut(), &config)?;
    let rank = report.rank.clone().expect("rank estimated");
    let a = g.congruence(&report.w)?;
    let diag = a.diagonal();
    let columns = report
        .ordering
        .iter()
        .zip(&rank.null_flags)
        .map(|(&c, &f)| (c, diag[c], f))
        .collect();
    report.trace.annotate(&g, n_t - rank.estimated_rank)?;
    Ok(RankDemo {
        n_t,
        n_r,
        eta,
        seed,
        oracle,
        estimated_rank: rank.estimated_rank,
        inconsistent: rank.inconsistent,
        columns,
        stop: report.stop,
        total_cycles: report.total_cycles,
        rank_cycles: report.rank_cycles,
        interference: report.interference(&g)?,
        report: Some(report),
    })
}
