//! Acceptance suite. Runs every criterion at its stated size and tolerance,
//! prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use blind_null_space::experiments::bounds::SufficiencyMode;
use blind_null_space::experiments::verify::{
    blind_vs_closed_form, figure4_check, linear_rate_experiment, monotone_invariance, plateau_experiment,
    quadratic_order_experiment, radio_fidelity, rank_detection_experiment, rc_vs_plain, CycleAudit,
};
use blind_null_space::experiments::ExperimentError;
use blind_null_space::oracle::ResponseFamily;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
    audit: CycleAudit,
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Result<Outcome, ExperimentError>,
}

fn c1() -> Result<Outcome, ExperimentError> {
    let r = blind_vs_closed_form(1000, &[1e-2, 1e-4, 1e-6], SEED)?;
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "{} phases, {} outside 2η, worst |Δθ|/η {:.3}, worst |Δφ|/η {:.3}",
            r.phases_checked, r.failures, r.worst_theta_ratio, r.worst_phi_ratio
        ),
        audit: r.audit,
    })
}

fn c2() -> Result<Outcome, ExperimentError> {
    let families = ResponseFamily::standard_set();
    let mut audit = CycleAudit::default();
    let mut parts = Vec::new();
    let mut passed = true;
    for eta in [1e-2, 1e-3] {
        let r = monotone_invariance(50, &families, eta, SEED)?;
        passed &= r.passed();
        parts.push(format!("η={eta:e}: {} of 50 fixtures differ", r.mismatched_fixtures));
        audit.merge(&r.audit);
    }
    Ok(Outcome {
        passed,
        detail: parts.join("; "),
        audit,
    })
}

fn c3() -> Result<Outcome, ExperimentError> {
    let r = linear_rate_experiment(&[3, 4, 5, 6, 8], 200, 12, 1e-12, SufficiencyMode::Table, SEED)?;
    let parts: Vec<String> = r
        .sizes
        .iter()
        .map(|s| format!("n={}: {}/{}", s.n_t, s.violations, s.cycles_checked))
        .collect();
    Ok(Outcome {
        passed: r.passed(),
        detail: format!("violations/cycles {}", parts.join(", ")),
        audit: r.audit,
    })
}

fn c4() -> Result<Outcome, ExperimentError> {
    let r = figure4_check(200, &[1e-1, 1e-2, 1e-4], SEED)?;
    let db: Vec<String> = r.first_cycle_db.iter().map(|d| format!("{d:.2}")).collect();
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "(a) median P² after 3 cycles {:.3e} ≤ {:.1e}: {}; (b) first-cycle dB [{}] spread {:.1}%",
            r.plateau_median,
            r.plateau_limit,
            r.plateau_ok(),
            db.join(", "),
            100.0 * r.first_cycle_spread
        ),
        audit: r.report.audit.clone(),
    })
}

fn c5() -> Result<Outcome, ExperimentError> {
    let r = plateau_experiment(&[3, 4, 5], 2, &[1e-1, 1e-2, 1e-4], 100, 0.1, 10.0, SEED)?;
    let slopes: Vec<String> = r.per_size.iter().map(|(n, p)| format!("n={n}: {:.3}", p.slope)).collect();
    Ok(Outcome {
        passed: r.passed(),
        detail: format!("{} violations, slopes {}", r.violations(), slopes.join(", ")),
        audit: r.audit,
    })
}

fn c6() -> Result<Outcome, ExperimentError> {
    let r = quadratic_order_experiment(8, 1e-6, 100, 0.2, 10.0, SEED)?;
    // informational: the 3×3 cyclic sweep is faster than quadratic
    let small = quadratic_order_experiment(3, 1e-6, 100, 0.2, 10.0, SEED)?;
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "n_t=8 median order {:.3} ({} trials without enough pairs); n_t=3 median order {:.3} (informational)",
            r.median_order, r.insufficient, small.median_order
        ),
        audit: CycleAudit::merged([&r.audit, &small.audit]),
    })
}

fn c7() -> Result<Outcome, ExperimentError> {
    let r = rank_detection_experiment(500, 8, 1e-5, 1e-8, SEED)?;
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "{}/{} correct, {} inconsistent orderings, {} stopped at the sweep limit",
            r.correct, r.draws, r.inconsistent, r.not_converged
        ),
        audit: r.audit,
    })
}

fn c8() -> Result<Outcome, ExperimentError> {
    let r = rc_vs_plain(8, 2, 1e-3, 50, 10.0, SEED)?;
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "median cycles reduced {:.0} vs plain {:.0}; {} directions above their plateau bound",
            r.median_rc_cycles, r.median_plain_cycles, r.direction_violations
        ),
        audit: r.audit,
    })
}

fn c9() -> Result<Outcome, ExperimentError> {
    let r = radio_fidelity(50, 2, 4, 1e-4, SEED)?;
    Ok(Outcome {
        passed: r.passed(),
        detail: format!(
            "{} of 50 traces differ; worst waterfilling angle {:.2e} (limit {:.0e}), {} over",
            r.decision_mismatches,
            r.worst_waterfilling_angle,
            2.0 * r.eta,
            r.angle_failures
        ),
        audit: r.audit,
    })
}

fn main() -> ExitCode {
    // the standard test harness flags (e.g. --list from tooling) are not supported
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria = [
        Criterion { id: 1, name: "blind/closed-form equivalence", limit: Some(Duration::from_secs(120)), run: c1 },
        Criterion { id: 2, name: "monotone invariance", limit: Some(Duration::from_secs(60)), run: c2 },
        Criterion { id: 3, name: "linear-rate bound", limit: Some(Duration::from_secs(300)), run: c3 },
        Criterion { id: 4, name: "three-accuracy convergence profile", limit: Some(Duration::from_secs(120)), run: c4 },
        Criterion { id: 5, name: "interference plateau", limit: Some(Duration::from_secs(300)), run: c5 },
        Criterion { id: 6, name: "quadratic regime", limit: None, run: c6 },
        Criterion { id: 7, name: "rank detection", limit: None, run: c7 },
        Criterion { id: 8, name: "reduced complexity", limit: None, run: c8 },
        Criterion { id: 9, name: "radio simulator fidelity", limit: None, run: c9 },
    ];
    let mut audits = Vec::new();
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(o) => {
                audits.push(o.audit);
                let in_time = c.limit.is_none_or(|l| elapsed <= l);
                let time_note = match c.limit {
                    Some(l) if !in_time => format!(" [over the {}s limit]", l.as_secs()),
                    _ => String::new(),
                };
                (o.passed && in_time, format!("{}{time_note}", o.detail))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!passed);
        println!(
            "{} criterion {:>2} {:<36} {:>7.1}s  {}",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    let audit = CycleAudit::merged(&audits);
    let passed = audit.passed() && audit.phases > 0;
    failures += usize::from(!passed);
    println!(
        "{} criterion 10 {:<36} {:>7}   {} runs, {} phases ({} degenerate), {} phase and {} total mismatches",
        if passed { "PASS" } else { "FAIL" },
        "query accounting",
        "",
        audit.runs,
        audit.phases,
        audit.degenerate_phases,
        audit.phase_mismatches,
        audit.total_mismatches
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
