//! Monte Carlo series behind the convergence figures and their CSV output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bounds::{median, quantile, sufficiency_coefficient, SufficiencyMode};
use super::fixtures::{channel, run_trials, trial_rng};
use super::verify::{audit_report, CycleAudit};
use super::{build_oracle, ExperimentError, OracleKind};
use crate::bnsl::{db_to_eta, BnslConfig, BnslRun, ConvergenceTrace, EtaSchedule, Extraction, StopReason, StopRule};
use crate::linalg::off_diagonal_norm;

/// How the line-search accuracy is chosen per pivot cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaPlan {
    Schedule(EtaSchedule),
    /// `η = coefficient·P/‖G‖` from the disclosed off-norm at the start of
    /// each cycle, never below `floor`.
    Adaptive { coefficient: f64, floor: f64 },
}

/// One curve: a batch of seeded trials with shared settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub label: String,
    pub n_t: usize,
    pub n_r: usize,
    pub trials: usize,
    pub cycles: usize,
    pub eta: EtaPlan,
    pub oracle: OracleKind,
    pub seed: u64,
    /// Apply the |θ̂| stop rule instead of running all cycles.
    pub stop_on_convergence: bool,
}

/// One CSV row; the `k = 0` row holds the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub trial: u64,
    pub k: usize,
    pub cycle_count: u64,
    pub l: Option<usize>,
    pub m: Option<usize>,
    #[serde(serialize_with = "sci_opt")]
    pub theta_hat: Option<f64>,
    #[serde(serialize_with = "sci_opt")]
    pub phi_hat: Option<f64>,
    #[serde(rename = "P_k", serialize_with = "sci")]
    pub p_k: f64,
    #[serde(serialize_with = "sci")]
    pub interference_sq: f64,
    #[serde(serialize_with = "sci_opt")]
    pub eta_k: Option<f64>,
}

pub const TRACE_COLUMNS: [&str; 10] = [
    "trial",
    "k",
    "cycle_count",
    "l",
    "m",
    "theta_hat",
    "phi_hat",
    "P_k",
    "interference_sq",
    "eta_k",
];

fn sci<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.14e}"))
}

fn sci_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => sci(x, s),
        None => s.serialize_str(""),
    }
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub trial: u64,
    pub rows: Vec<TraceRow>,
    pub total_cycles: u64,
    pub warnings: usize,
    pub stop: StopReason,
    pub audit: CycleAudit,
}

/// Per-phase-index statistics across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub k: usize,
    pub trials: usize,
    pub median_cycle_count: f64,
    pub p2_median: f64,
    pub p2_q1: f64,
    pub p2_q3: f64,
    pub interference_median: f64,
    pub interference_q1: f64,
    pub interference_q3: f64,
}

#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub spec: SeriesSpec,
    pub trials: Vec<TrialRun>,
    pub stats: Vec<StatRow>,
    pub audit: CycleAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub label: String,
    pub n_t: usize,
    pub n_r: usize,
    pub trials: usize,
    /// Median `P²` after each completed cycle, starting with the initial state.
    pub median_p2_per_cycle: Vec<f64>,
    /// Median interference after each completed cycle.
    pub median_interference_per_cycle: Vec<f64>,
    pub median_total_cycles: f64,
    pub saturation_warnings: usize,
    pub audit: CycleAudit,
}

impl SeriesResult {
    pub fn summary(&self) -> SeriesSummary {
        let m = self.spec.n_t * (self.spec.n_t - 1) / 2;
        let at_cycles: Vec<&StatRow> = self.stats.iter().filter(|r| r.k % m == 0).collect();
        SeriesSummary {
            label: self.spec.label.clone(),
            n_t: self.spec.n_t,
            n_r: self.spec.n_r,
            trials: self.trials.len(),
            median_p2_per_cycle: at_cycles.iter().map(|r| r.p2_median).collect(),
            median_interference_per_cycle: at_cycles.iter().map(|r| r.interference_median).collect(),
            median_total_cycles: median(&self.trials.iter().map(|t| t.total_cycles as f64).collect::<Vec<_>>()),
            saturation_warnings: self.trials.iter().map(|t| t.warnings).sum(),
            audit: self.audit.clone(),
        }
    }
}

fn series_config(spec: &SeriesSpec) -> BnslConfig {
    let eta = match &spec.eta {
        EtaPlan::Schedule(s) => s.clone(),
        EtaPlan::Adaptive { coefficient, .. } => EtaSchedule::Constant(*coefficient),
    };
    BnslConfig {
        eta,
        stop: if spec.stop_on_convergence {
            StopRule::EtaMultiple(10.0)
        } else {
            StopRule::Never
        },
        max_sweeps: spec.cycles,
        extraction: Extraction::KnownRank(spec.n_r),
        ..BnslConfig::default()
    }
}

fn validate_spec(spec: &SeriesSpec) -> Result<(), ExperimentError> {
    if spec.n_r == 0 || spec.n_r >= spec.n_t {
        return Err(ExperimentError::Config(format!(
            "need 0 < n_r < n_t, got n_r={} n_t={}",
            spec.n_r, spec.n_t
        )));
    }
    if let EtaPlan::Adaptive { coefficient, floor } = spec.eta {
        if !(coefficient > 0.0 && floor > 0.0) {
            return Err(ExperimentError::Config("adaptive accuracy needs positive coefficient and floor".into()));
        }
    }
    Ok(())
}

/// Runs every trial of a series on the rayon pool.
pub fn run_series(spec: &SeriesSpec) -> Result<SeriesResult, ExperimentError> {
    validate_spec(spec)?;
    let config = series_config(spec);
    let m = spec.n_t * (spec.n_t - 1) / 2;
    let runs = run_trials(spec.trials, |t| -> Result<TrialRun, ExperimentError> {
        let mut rng = trial_rng(spec.seed, t);
        let ch = channel(spec.n_r, spec.n_t, &mut rng)?;
        let g = ch.gram();
        let norm_g = g.frobenius_norm();
        let mut oracle = build_oracle(&ch, spec.oracle)?;
        let mut run = BnslRun::new(oracle.as_mut(), config.clone())?;
        let stop = match &spec.eta {
            EtaPlan::Schedule(_) => run.run_phases()?,
            EtaPlan::Adaptive { coefficient, floor } => {
                let mut stop = StopReason::MaxSweeps;
                'cycles: for _ in 0..spec.cycles {
                    let p = off_diagonal_norm(&g.congruence(run.precoder())?);
                    let eta = (coefficient * p / norm_g).clamp(*floor, 1.0);
                    for _ in 0..m {
                        run.step_phase(eta)?;
                        if spec.stop_on_convergence && run.window_max() < 10.0 * eta {
                            stop = StopReason::Converged;
                            break 'cycles;
                        }
                    }
                }
                stop
            }
        };
        let mut report = run.finish(stop)?;
        let audit = audit_report(&report, &config);
        report.trace.annotate(&g, spec.n_t - spec.n_r)?;
        let rows = trace_rows(t, &report.trace);
        Ok(TrialRun {
            trial: t,
            warnings: report.trace.phases.iter().filter(|r| r.warning).count(),
            total_cycles: report.total_cycles,
            stop: report.stop,
            rows,
            audit,
        })
    });
    let trials = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let audit = CycleAudit::merged(trials.iter().map(|t| &t.audit));
    let stats = phase_stats(&trials);
    Ok(SeriesResult {
        spec: spec.clone(),
        trials,
        stats,
        audit,
    })
}

/// CSV rows of an annotated trace, starting with the initial state.
pub fn trace_rows(trial: u64, trace: &ConvergenceTrace) -> Vec<TraceRow> {
    let (p0, i0) = trace.initial.unwrap_or((f64::NAN, f64::NAN));
    let mut rows = vec![TraceRow {
        trial,
        k: 0,
        cycle_count: 0,
        l: None,
        m: None,
        theta_hat: None,
        phi_hat: None,
        p_k: p0,
        interference_sq: i0,
        eta_k: None,
    }];
    rows.extend(trace.phases.iter().map(|r| TraceRow {
        trial,
        k: r.k,
        cycle_count: r.cycle_count,
        l: Some(r.l),
        m: Some(r.m),
        theta_hat: Some(r.theta_hat),
        phi_hat: Some(r.phi_hat),
        p_k: r.off_norm.unwrap_or(f64::NAN),
        interference_sq: r.interference_sq.unwrap_or(f64::NAN),
        eta_k: Some(r.eta),
    }));
    rows
}

/// Writes rows of a single run.
pub fn write_rows_csv(path: &Path, rows: &[TraceRow]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Statistics per phase index over the trials that reached it.
pub fn phase_stats(trials: &[TrialRun]) -> Vec<StatRow> {
    let longest = trials.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let rows: Vec<&TraceRow> = trials.iter().filter_map(|t| t.rows.get(k)).collect();
            let p2: Vec<f64> = rows.iter().map(|r| r.p_k * r.p_k).collect();
            let inter: Vec<f64> = rows.iter().map(|r| r.interference_sq).collect();
            StatRow {
                k,
                trials: rows.len(),
                median_cycle_count: median(&rows.iter().map(|r| r.cycle_count as f64).collect::<Vec<_>>()),
                p2_median: median(&p2),
                p2_q1: quantile(&p2, 0.25),
                p2_q3: quantile(&p2, 0.75),
                interference_median: median(&inter),
                interference_q1: quantile(&inter, 0.25),
                interference_q3: quantile(&inter, 0.75),
            }
        })
        .collect()
}

/// Writes the trace rows of all trials; the header is written even when
/// there are no rows.
pub fn write_trace_csv(path: &Path, trials: &[TrialRun]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for t in trials {
        for r in &t.rows {
            w.serialize(r)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats_csv(path: &Path, stats: &[StatRow]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record([
        "k",
        "trials",
        "median_cycle_count",
        "p2_median",
        "p2_q1",
        "p2_q3",
        "interference_median",
        "interference_q1",
        "interference_q3",
    ])?;
    for s in stats {
        w.write_record([
            s.k.to_string(),
            s.trials.to_string(),
            format!("{:.14e}", s.median_cycle_count),
            format!("{:.14e}", s.p2_median),
            format!("{:.14e}", s.p2_q1),
            format!("{:.14e}", s.p2_q3),
            format!("{:.14e}", s.interference_median),
            format!("{:.14e}", s.interference_q1),
            format!("{:.14e}", s.interference_q3),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Command-line overrides applied on top of a figure's defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    /// Replaces the accuracy grid or schedule.
    pub eta: Option<Vec<f64>>,
    pub n_t: Option<Vec<usize>>,
    pub n_r: Option<Vec<usize>>,
    pub oracle: Option<OracleKind>,
    pub cycles: Option<usize>,
}

fn db_label(eta: f64) -> String {
    let db = 10.0 * eta.log10();
    if (db - db.round()).abs() < 1e-9 {
        format!("{}dB", db.round() as i64)
    } else {
        format!("eta{eta:e}")
    }
}

/// Series of figure `id` with overrides applied.
pub fn figure_specs(id: u8, o: &Overrides) -> Result<Vec<SeriesSpec>, ExperimentError> {
    let seed = o.seed.unwrap_or(1);
    let oracle = o.oracle.unwrap_or_default();
    let base = |label: String, n_t: usize, n_r: usize, trials: usize, cycles: usize, eta: EtaPlan| SeriesSpec {
        label,
        n_t,
        n_r,
        trials: o.trials.unwrap_or(trials),
        cycles: o.cycles.unwrap_or(cycles),
        eta,
        oracle,
        seed,
        stop_on_convergence: false,
    };
    let mut specs = Vec::new();
    match id {
        4 => {
            let etas = o.eta.clone().unwrap_or_else(|| [-10.0, -20.0, -40.0].map(db_to_eta).to_vec());
            for &n_t in o.n_t.as_deref().unwrap_or(&[3]) {
                for &n_r in o.n_r.as_deref().unwrap_or(&[2]) {
                    for &eta in &etas {
                        let label = format!("fig4_nt{n_t}_nr{n_r}_{}", db_label(eta));
                        specs.push(base(label, n_t, n_r, 200, 6, EtaPlan::Schedule(EtaSchedule::Constant(eta))));
                    }
                }
            }
        }
        5 => {
            for &n_t in o.n_t.as_deref().unwrap_or(&[3]) {
                let coefficient = sufficiency_coefficient(n_t, SufficiencyMode::Table)
                    .or_else(|_| sufficiency_coefficient(n_t, SufficiencyMode::Formula))?;
                for &n_r in o.n_r.as_deref().unwrap_or(&[1, 2]) {
                    let adaptive = EtaPlan::Adaptive {
                        coefficient,
                        floor: 1e-10,
                    };
                    specs.push(base(format!("fig5_nt{n_t}_nr{n_r}_adaptive"), n_t, n_r, 100, 6, adaptive));
                    let constant = o.eta.clone().unwrap_or_else(|| vec![db_to_eta(-20.0)]);
                    for eta in constant {
                        let label = format!("fig5_nt{n_t}_nr{n_r}_{}", db_label(eta));
                        specs.push(base(label, n_t, n_r, 100, 6, EtaPlan::Schedule(EtaSchedule::Constant(eta))));
                    }
                }
            }
        }
        6 => {
            let schedule = match &o.eta {
                Some(v) if v.len() == 1 => EtaSchedule::Constant(v[0]),
                Some(v) => EtaSchedule::PerSweep(v.clone()),
                None => EtaSchedule::from_db(&[-6.0, -8.0, -15.0]),
            };
            let sizes: Vec<usize> = o.n_t.clone().unwrap_or_else(|| (3..=8).collect());
            for n_t in sizes {
                for &n_r in o.n_r.as_deref().unwrap_or(&[2]) {
                    specs.push(base(
                        format!("fig6_nt{n_t}_nr{n_r}"),
                        n_t,
                        n_r,
                        200,
                        8,
                        EtaPlan::Schedule(schedule.clone()),
                    ));
                }
            }
        }
        _ => return Err(ExperimentError::Unsupported(format!("figure {id} (expected 4, 5 or 6)"))),
    }
    Ok(specs)
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureSummary {
    pub figure: u8,
    pub seed: u64,
    pub series: Vec<SeriesSummary>,
    /// First-cycle decrease of median `P²` in dB per series.
    pub first_cycle_db: Vec<(String, f64)>,
    pub audit: CycleAudit,
}

/// Runs every series of a figure and, with `out`, writes one trace CSV and
/// one statistics CSV per series plus `summary.json`.
pub fn run_figure(id: u8, overrides: &Overrides, out: Option<&Path>) -> Result<FigureSummary, ExperimentError> {
    let specs = figure_specs(id, overrides)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut series = Vec::new();
    let mut first_cycle_db = Vec::new();
    let mut audit = CycleAudit::default();
    for spec in &specs {
        let result = run_series(spec)?;
        if let Some(dir) = out {
            write_trace_csv(&dir.join(format!("{}.csv", spec.label)), &result.trials)?;
            write_stats_csv(&dir.join(format!("{}_stats.csv", spec.label)), &result.stats)?;
        }
        let summary = result.summary();
        if summary.median_p2_per_cycle.len() >= 2 {
            let db = 10.0 * (summary.median_p2_per_cycle[0] / summary.median_p2_per_cycle[1]).log10();
            first_cycle_db.push((spec.label.clone(), db));
        }
        audit.merge(&result.audit);
        series.push(summary);
    }
    let summary = FigureSummary {
        figure: id,
        seed: overrides.seed.unwrap_or(1),
        series,
        first_cycle_db,
        audit,
    };
    if let Some(dir) = out {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Overrides {
        Overrides {
            trials: Some(3),
            cycles: Some(2),
            ..Overrides::default()
        }
    }

    #[test]
    fn default_specs() {
        let f4 = figure_specs(4, &Overrides::default()).unwrap();
        assert_eq!(f4.len(), 3);
        assert!(f4.iter().all(|s| s.n_t == 3 && s.n_r == 2 && s.trials == 200));
        let f5 = figure_specs(5, &Overrides::default()).unwrap();
        assert_eq!(f5.iter().filter(|s| matches!(s.eta, EtaPlan::Adaptive { .. })).count(), 2);
        let f6 = figure_specs(6, &Overrides::default()).unwrap();
        assert_eq!(f6.iter().map(|s| s.n_t).collect::<Vec<_>>(), vec![3, 4, 5, 6, 7, 8]);
        assert!(figure_specs(7, &Overrides::default()).is_err());
    }

    #[test]
    fn series_is_deterministic_and_audited() {
        for id in [4, 5, 6] {
            let specs = figure_specs(id, &small()).unwrap();
            let a = run_series(&specs[0]).unwrap();
            let b = run_series(&specs[0]).unwrap();
            assert_eq!(a.stats, b.stats);
            assert!(a.audit.passed());
            assert_eq!(a.trials.len(), 3);
            let m = specs[0].n_t * (specs[0].n_t - 1) / 2;
            assert_eq!(a.trials[0].rows.len(), 1 + 2 * m);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let spec = &figure_specs(4, &small()).unwrap()[0];
        let r = run_series(spec).unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&path, &r.trials).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(&first[..5], &["0", "0", "0", "", ""]);
        let p: f64 = first[7].parse().unwrap();
        assert!(p > 0.0);
        // 15 significant digits: one leading digit and 14 decimals
        assert_eq!(first[7].split('e').next().unwrap().len(), 16);
    }

    #[test]
    fn zero_trials_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let o = Overrides {
            trials: Some(0),
            ..Overrides::default()
        };
        let s = run_figure(4, &o, Some(dir.path())).unwrap();
        assert!(s.series.iter().all(|x| x.trials == 0));
        let text = std::fs::read_to_string(dir.path().join("fig4_nt3_nr2_-10dB.csv")).unwrap();
        assert_eq!(text.trim_end(), TRACE_COLUMNS.join(","));
        assert!(dir.path().join("summary.json").exists());
    }
}
