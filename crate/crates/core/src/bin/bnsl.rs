use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blind_null_space::bnsl::db_to_eta;
use blind_null_space::experiments::config::ExperimentConfig;
use blind_null_space::experiments::figures::{
    run_figure, run_series, trace_rows, write_json, write_rows_csv, write_stats_csv, write_trace_csv, Overrides,
};
use blind_null_space::experiments::verify::{rank_detect_demo, verify_bounds, BoundsOptions, BoundsSummary};
use blind_null_space::experiments::{ExperimentError, OracleKind};

/// Blind null-space learning experiments.
#[derive(Debug, Parser)]
#[command(name = "bnsl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Accuracy values, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "eta_db")]
    eta: Option<Vec<f64>>,
    /// Accuracy values in dB, comma separated.
    #[arg(long = "eta-db", global = true, value_delimiter = ',', allow_hyphen_values = true)]
    eta_db: Option<Vec<f64>>,
    /// Transmit antenna counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    nt: Option<Vec<usize>>,
    /// Primary receive antenna counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    nr: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    oracle: Option<OracleKind>,
    /// Output directory for CSV traces and the JSON summary.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reproduce one of the convergence figures.
    Figure {
        #[arg(long, value_parser = clap::value_parser!(u8).range(4..=6))]
        id: u8,
    },
    /// Check the linear-rate and interference bounds; fails on any violation.
    VerifyBounds,
    /// Learn a null space with rank estimation on one channel.
    RankDetectDemo,
}

impl Cli {
    fn etas(&self) -> Option<Vec<f64>> {
        self.eta
            .clone()
            .or_else(|| self.eta_db.as_ref().map(|d| d.iter().map(|&x| db_to_eta(x)).collect()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, ExperimentError> {
    match &cli.command {
        Command::Run { config } => run(cli, config),
        Command::Figure { id } => figure(cli, *id),
        Command::VerifyBounds => bounds(cli),
        Command::RankDetectDemo => rank_demo(cli),
    }
}

fn run(cli: &Cli, path: &Path) -> Result<ExitCode, ExperimentError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(o) = cli.oracle {
        cfg.oracle = o;
    }
    if let Some(etas) = cli.etas() {
        cfg.eta = Some(etas);
        cfg.eta_db = None;
        cfg.adaptive = None;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let n_ts = cli.nt.clone().unwrap_or_else(|| vec![cfg.n_t]);
    let n_rs = cli.nr.clone().unwrap_or_else(|| vec![cfg.n_r]);
    let mut summaries = Vec::new();
    let mut audit_ok = true;
    for &n_t in &n_ts {
        for &n_r in &n_rs {
            let mut c = cfg.clone();
            c.n_t = n_t;
            c.n_r = n_r;
            c.validate()?;
            let mut spec = c.series();
            if n_ts.len() * n_rs.len() > 1 {
                spec.label = format!("{}_nt{n_t}_nr{n_r}", c.name);
            }
            let result = run_series(&spec)?;
            write_trace_csv(&out.join(format!("{}.csv", spec.label)), &result.trials)?;
            write_stats_csv(&out.join(format!("{}_stats.csv", spec.label)), &result.stats)?;
            let s = result.summary();
            println!(
                "{}: {} trials, median total cycles {:.0}, final median P^2 {:.3e}",
                s.label,
                s.trials,
                s.median_total_cycles,
                s.median_p2_per_cycle.last().copied().unwrap_or(f64::NAN)
            );
            audit_ok &= result.audit.passed();
            summaries.push(s);
        }
    }
    write_json(&out.join("summary.json"), &summaries)?;
    println!("wrote {}", out.display());
    Ok(if audit_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn figure(cli: &Cli, id: u8) -> Result<ExitCode, ExperimentError> {
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        eta: cli.etas(),
        n_t: cli.nt.clone(),
        n_r: cli.nr.clone(),
        oracle: cli.oracle,
        cycles: None,
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("out/figure{id}")));
    let summary = run_figure(id, &overrides, Some(&out))?;
    for s in &summary.series {
        let p2: Vec<String> = s.median_p2_per_cycle.iter().map(|x| format!("{x:.2e}")).collect();
        println!("{}: median P^2 per cycle [{}]", s.label, p2.join(", "));
    }
    for (label, db) in &summary.first_cycle_db {
        println!("{label}: first cycle decrease {db:.2} dB");
    }
    println!("wrote {}", out.display());
    Ok(if summary.audit.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn bounds(cli: &Cli) -> Result<ExitCode, ExperimentError> {
    let mut opts = BoundsOptions::default();
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    if let Some(t) = cli.trials {
        opts.linear_trials = t;
        opts.plateau_trials = t;
    }
    if let Some(n) = &cli.nt {
        opts.linear_sizes = n.clone();
        opts.plateau_sizes = n.clone();
    }
    if let Some(r) = cli.nr.as_ref().and_then(|r| r.first()) {
        opts.n_r = *r;
    }
    if let Some(e) = cli.etas() {
        opts.etas = e;
    }
    let summary = verify_bounds(&opts)?;
    for s in &summary.linear.sizes {
        println!(
            "linear  n_t={}: {} cycles checked, {} violations, worst ratio {:.3}",
            s.n_t, s.cycles_checked, s.violations, s.worst_ratio
        );
    }
    for (n_t, r) in &summary.plateau.per_size {
        println!("plateau n_t={n_t}: slope {:.3}", r.slope);
        for (eta, violations, used, median) in &r.per_eta {
            println!("  eta={eta:.0e}: {violations}/{used} violations, median interference {median:.3e}");
        }
    }
    println!(
        "cycle audit: {} phases, {} mismatches",
        summary.audit.phases,
        summary.audit.phase_mismatches + summary.audit.total_mismatches
    );
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out)?;
        write_bounds_csv(&out.join("bounds.csv"), &summary)?;
        write_json(&out.join("summary.json"), &summary)?;
        println!("wrote {}", out.display());
    }
    let violations = summary.violations();
    if violations > 0 || !summary.slopes_in_range {
        eprintln!("FAIL: {violations} violations, slopes in range: {}", summary.slopes_in_range);
        return Ok(ExitCode::FAILURE);
    }
    println!("PASS");
    Ok(ExitCode::SUCCESS)
}

fn write_bounds_csv(path: &Path, s: &BoundsSummary) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "n_t", "eta_or_coefficient", "checked", "violations", "statistic"])?;
    for r in &s.linear.sizes {
        w.write_record([
            "linear".to_string(),
            r.n_t.to_string(),
            format!("{:e}", r.coefficient),
            r.cycles_checked.to_string(),
            r.violations.to_string(),
            format!("{:e}", r.worst_ratio),
        ])?;
    }
    for (n_t, r) in &s.plateau.per_size {
        for (eta, violations, used, median) in &r.per_eta {
            w.write_record([
                "plateau".to_string(),
                n_t.to_string(),
                format!("{eta:e}"),
                used.to_string(),
                violations.to_string(),
                format!("{median:e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn rank_demo(cli: &Cli) -> Result<ExitCode, ExperimentError> {
    let n_t = cli.nt.as_ref().and_then(|v| v.first().copied()).unwrap_or(4);
    let n_r = cli.nr.as_ref().and_then(|v| v.first().copied()).unwrap_or(2);
    let eta = cli.etas().and_then(|v| v.first().copied()).unwrap_or(1e-5);
    let seed = cli.seed.unwrap_or(1);
    let demo = rank_detect_demo(n_t, n_r, eta, seed, cli.oracle.unwrap_or_default())?;
    println!("n_t={n_t} n_r={n_r} eta={eta:e} seed={seed}");
    println!("column  w^H G w         null");
    for (c, q, null) in &demo.columns {
        println!("{c:>6}  {q:<14.6e}  {null}");
    }
    println!(
        "estimated rank {} (true {}), stop {:?}, {} cycles ({} for rank tests), interference {:.3e}",
        demo.estimated_rank, n_r, demo.stop, demo.total_cycles, demo.rank_cycles, demo.interference
    );
    if demo.inconsistent {
        println!("warning: null verdicts were not a prefix of the ordering");
    }
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out)?;
        if let Some(report) = &demo.report {
            write_rows_csv(&out.join("rank_detect_demo.csv"), &trace_rows(0, &report.trace))?;
        }
        write_json(&out.join("summary.json"), &demo)?;
        println!("wrote {}", out.display());
    }
    Ok(if demo.estimated_rank == n_r { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
