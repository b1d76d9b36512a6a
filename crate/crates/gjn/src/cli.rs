//! Command-line front end.
//!
//! ```text
//! gjn analyze|simulate|compare|gtest|bar-check --config <file>
//!     [--seed N] [--horizon T] [--paper-scale] [--out DIR]
//! ```
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime error,
//! 3 acceptance-check failure (a bar-check residual above tolerance).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::approx::{build_approx, ApproxModel};
use crate::config::{ExperimentConfig, OutputKind, ResolvedCase};
use crate::network::{DistributionSpec, NetworkSpec};
use crate::report;
use crate::rng::{child_stream, derive_seed};
use crate::sim::{simulate, SimConfig, SimEstimate};
use crate::stats;
use crate::transform;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gjn", version, about = "Steady-state analysis of generalized Jackson networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytical pipeline: traffic solution, w-matrix, variance constants,
    /// approximate means and quantiles.
    Analyze(RunArgs),
    /// Discrete-event simulation with batch-means estimates.
    Simulate(RunArgs),
    /// Side-by-side simulation vs approximation report with SVG histograms.
    Compare(CompareArgs),
    /// G-test of independence over representative points.
    Gtest(RunArgs),
    /// Numerical identity suite for the transform machinery.
    BarCheck(RunArgs),
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's simulation horizon (time units).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Restore the long-run protocol (horizon 1e9; 4e9 for gtest).
    #[arg(long)]
    pub paper_scale: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Skip the simulation and emit approximation-only reports.
    #[arg(long)]
    pub approx_only: bool,
}

/// Parse the process arguments and run; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidNetwork(_)
        | Error::NotTransient
        | Error::Unstable { .. }
        | Error::UnknownConvention(_)
        | Error::BadHorizon(_)
        | Error::TooFewBatches(_)
        | Error::DegenerateTable(_)
        | Error::JointUnavailable(_)
        | Error::Config(_)
        | Error::Json(_) => 1,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(args) => {
            let (cfg, cases) = load(&args, GtestScale::No)?;
            cmd_analyze(&cfg, &cases, &args.out)?;
            Ok(0)
        }
        Command::Simulate(args) => {
            let (cfg, cases) = load(&args, GtestScale::No)?;
            cmd_simulate(&cfg, &cases, &args.out)?;
            Ok(0)
        }
        Command::Compare(args) => {
            let (cfg, cases) = load(&args.run, GtestScale::No)?;
            cmd_compare(&cfg, &cases, &args.run.out, args.approx_only)?;
            Ok(0)
        }
        Command::Gtest(args) => {
            let (cfg, cases) = load(&args, GtestScale::Yes)?;
            cmd_gtest(&cfg, &cases, &args.out)?;
            Ok(0)
        }
        Command::BarCheck(args) => {
            let (cfg, cases) = load(&args, GtestScale::No)?;
            let failures = cmd_bar_check(&cfg, &cases, &args.out)?;
            Ok(if failures == 0 { 0 } else { 3 })
        }
    }
}

enum GtestScale {
    No,
    Yes,
}

fn load(args: &RunArgs, gtest: GtestScale) -> Result<(ExperimentConfig, Vec<ResolvedCase>)> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if args.paper_scale {
        match gtest {
            GtestScale::No => {
                cfg.sim.horizon = 1e9;
                cfg.sim.warmup_fraction = 0.9;
            }
            GtestScale::Yes => {
                // long-run independence protocol: 4e9 units, the last 3e9
                // recorded, one representative point per 1e6 units
                cfg.sim.horizon = 4e9;
                cfg.sim.warmup_fraction = 0.25;
                cfg.sim.joint_interval = Some(1e6);
            }
        }
        cfg.sim.num_batches = 20;
    }
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(horizon) = args.horizon {
        cfg.sim.horizon = horizon;
    }
    let cases = cfg.resolve_cases()?;
    Ok((cfg, cases))
}

fn case_dir(out: &Path, label: &str) -> Result<PathBuf> {
    let dir = out.join(label);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Run the simulations for all cases on a worker pool, one derived seed per
/// case.
fn simulate_cases(
    cfg: &ExperimentConfig,
    cases: &[ResolvedCase],
) -> Result<Vec<(SimConfig, SimEstimate)>> {
    let mut slots: Vec<Option<Result<(SimConfig, SimEstimate)>>> =
        (0..cases.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (idx, case) in cases.iter().enumerate() {
            let cfg = &*cfg;
            handles.push(scope.spawn(move || {
                let mut sim = cfg.sim_for(&case.spec)?;
                sim.seed = derive_seed(sim.seed, idx as u64);
                let est = simulate(&case.spec, &sim)?;
                Ok((sim, est))
            }));
        }
        for (slot, handle) in slots.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("simulation worker panicked"));
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

pub fn cmd_analyze(cfg: &ExperimentConfig, cases: &[ResolvedCase], out: &Path) -> Result<()> {
    for case in cases {
        let model = build_approx(&case.spec)?;
        let dir = case_dir(out, &case.label)?;
        emit_case_reports(cfg, &case.label, &model, None, &dir)?;
        print!("{}", report::render_report(&case.label, &model, None, &cfg.quantile_levels));
        println!();
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &ExperimentConfig, cases: &[ResolvedCase], out: &Path) -> Result<()> {
    let results = simulate_cases(cfg, cases)?;
    for (case, (_, est)) in cases.iter().zip(&results) {
        let model = build_approx(&case.spec)?;
        let dir = case_dir(out, &case.label)?;
        report::save_estimate(&dir.join("estimates.csv"), est)?;
        emit_case_reports(cfg, &case.label, &model, Some(est), &dir)?;
        let mut text = report::render_report(&case.label, &model, Some(est), &cfg.quantile_levels);
        if let Some(oracle) = oracle_comparison_text(&case.spec, est) {
            text.push('\n');
            text.push_str(&oracle);
            std::fs::write(
                dir.join("report.txt"),
                format!(
                    "{}\n{oracle}",
                    report::render_report(&case.label, &model, Some(est), &cfg.quantile_levels)
                ),
            )?;
        }
        print!("{text}");
        println!();
    }
    Ok(())
}

/// For an all-exponential network, compare the simulated marginals with the
/// exact product-form geometric law.
fn oracle_comparison_text(spec: &NetworkSpec, est: &SimEstimate) -> Option<String> {
    if !spec.all_exponential() {
        return None;
    }
    let cap = est.config.pmf_cap;
    let law = crate::sim::jackson_oracle(spec, cap).ok()?;
    let k_show = 10usize.min(cap);
    let mut text = String::new();
    use std::fmt::Write as _;
    writeln!(text, "exact product-form comparison (all-exponential network):").unwrap();
    let mut max_gap = 0.0f64;
    for j in 0..spec.num_stations() {
        let gap = (0..=k_show)
            .map(|k| (est.stations[j].pmf[k] - law.marginals[j][k]).abs())
            .fold(0.0f64, f64::max);
        max_gap = max_gap.max(gap);
        writeln!(
            text,
            "  station {}: exact mean {:.4}, sim mean {:.4}, max |dpmf| over k<={k_show}: {:.3e}",
            j + 1,
            law.mean(j),
            est.stations[j].mean,
            gap
        )
        .unwrap();
    }
    writeln!(text, "  max |dpmf| overall: {max_gap:.3e}").unwrap();
    Some(text)
}

pub fn cmd_compare(
    cfg: &ExperimentConfig,
    cases: &[ResolvedCase],
    out: &Path,
    approx_only: bool,
) -> Result<()> {
    // reuse persisted estimates when present so post-processing can be
    // re-run without re-simulating
    let estimates: Vec<Option<SimEstimate>> = if approx_only {
        cases.iter().map(|_| None).collect()
    } else {
        let mut loaded: Vec<Option<SimEstimate>> = Vec::new();
        let mut missing = Vec::new();
        for case in cases {
            let path = out.join(&case.label).join("estimates.csv");
            if path.exists() {
                loaded.push(Some(report::load_estimate(&path)?));
            } else {
                loaded.push(None);
                missing.push(case.clone());
            }
        }
        if !missing.is_empty() {
            let fresh = simulate_cases(cfg, &missing)?;
            let mut fresh_iter = fresh.into_iter();
            for slot in loaded.iter_mut() {
                if slot.is_none() {
                    slot.replace(fresh_iter.next().unwrap().1);
                }
            }
        }
        loaded
    };

    for (case, est) in cases.iter().zip(&estimates) {
        let model = build_approx(&case.spec)?;
        let dir = case_dir(out, &case.label)?;
        if let Some(est) = est {
            report::save_estimate(&dir.join("estimates.csv"), est)?;
        }
        emit_case_reports(cfg, &case.label, &model, est.as_ref(), &dir)?;
        print!(
            "{}",
            report::render_report(&case.label, &model, est.as_ref(), &cfg.quantile_levels)
        );
        println!();
    }
    Ok(())
}

fn emit_case_reports(
    cfg: &ExperimentConfig,
    label: &str,
    model: &ApproxModel,
    est: Option<&SimEstimate>,
    dir: &Path,
) -> Result<()> {
    let wants = |k: OutputKind| cfg.outputs.contains(&k);
    if wants(OutputKind::Means) {
        report::write_means_csv(&dir.join("means.csv"), label, model, est)?;
    }
    if wants(OutputKind::Quantiles) {
        report::write_quantiles_csv(
            &dir.join("quantiles.csv"),
            label,
            model,
            est,
            &cfg.quantile_levels,
        )?;
    }
    let k_hist = histogram_range(model, est);
    report::write_pmf_csv(
        &dir.join("pmf.csv"),
        label,
        model,
        est,
        cfg.pmf_convention,
        k_hist,
    )?;
    if wants(OutputKind::Histogram) {
        for j in 0..model.num_stations() {
            let approx_pmf: Vec<f64> = (0..=k_hist)
                .map(|k| model.pmf(j, k as u64, cfg.pmf_convention))
                .collect();
            let svg = match est {
                Some(est) => report::histogram_svg(
                    &format!("case {label} station {}", j + 1),
                    &est.stations[j],
                    est,
                    j,
                    &approx_pmf,
                    k_hist,
                ),
                None => report::approx_histogram_svg(
                    &format!("case {label} station {} (approximation)", j + 1),
                    &approx_pmf,
                ),
            };
            std::fs::write(dir.join(format!("hist_station{}.svg", j + 1)), svg)?;
        }
    }
    if wants(OutputKind::Joint) {
        if let Some(est) = est {
            if let Ok(cells) = stats::joint_product_report(est, 16) {
                report::write_joint_csv(&dir.join("joint.csv"), &cells)?;
            }
        }
    }
    std::fs::write(
        dir.join("report.txt"),
        report::render_report(label, model, est, &cfg.quantile_levels),
    )?;
    Ok(())
}

/// Show the histogram out to the 99th percentile of the approximation (or
/// the simulated cap when smaller).
fn histogram_range(model: &ApproxModel, est: Option<&SimEstimate>) -> usize {
    let mut k = 20usize;
    for j in 0..model.num_stations() {
        k = k.max(model.quantile(j, 0.99).ceil() as usize);
    }
    if let Some(est) = est {
        k = k.min(est.config.pmf_cap);
    }
    k
}

pub fn cmd_gtest(cfg: &ExperimentConfig, cases: &[ResolvedCase], out: &Path) -> Result<()> {
    if cfg.sim.joint_interval.is_none() {
        return Err(Error::JointUnavailable(
            "set sim.joint_interval in the config (or pass --paper-scale)".into(),
        ));
    }
    let results = simulate_cases(cfg, cases)?;
    for (case, (_, est)) in cases.iter().zip(&results) {
        let dir = case_dir(out, &case.label)?;
        report::save_estimate(&dir.join("estimates.csv"), est)?;
        let table = stats::contingency_from_estimate(est)?;
        let g = stats::g_test(&table)?;
        let mut text = String::new();
        use std::fmt::Write as _;
        writeln!(text, "case {}", case.label).unwrap();
        writeln!(
            text,
            "contingency table: {}x{} from {} representative points",
            table.shape().0,
            table.shape().1,
            table.total
        )
        .unwrap();
        writeln!(
            text,
            "G = {:.2}, df = {}, p-value = {:.4}",
            g.statistic, g.df, g.p_value
        )
        .unwrap();
        writeln!(text).unwrap();
        writeln!(text, "time-weighted product(joint), values in 1e-3:").unwrap();
        let cells = stats::joint_product_report(est, 5)?;
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .map(|c| format!("{:.2}({:.2})", c.product * 1e3, c.joint * 1e3))
                .collect();
            writeln!(text, "  {}", line.join("  ")).unwrap();
        }
        report::write_joint_csv(&dir.join("joint.csv"), &stats::joint_product_report(est, 16)?)?;
        std::fs::write(dir.join("gtest.txt"), &text)?;
        print!("{text}");
        println!();
    }
    Ok(())
}

/// One row of the bar-check residual report.
struct CheckRow {
    name: String,
    worst: f64,
    tolerance: f64,
    pass: bool,
}

/// Numerical identity suite; returns the number of failed checks.
pub fn cmd_bar_check(cfg: &ExperimentConfig, cases: &[ResolvedCase], out: &Path) -> Result<usize> {
    let mut failures = 0usize;
    for case in cases {
        let rows = bar_check_case(&case.spec, cfg.sim.seed)?;
        let mut text = String::new();
        use std::fmt::Write as _;
        writeln!(text, "case {}", case.label).unwrap();
        writeln!(text, "{:<44} {:>12} {:>10} {:>6}", "check", "worst", "tol", "pass").unwrap();
        for row in &rows {
            writeln!(
                text,
                "{:<44} {:>12.3e} {:>10.0e} {:>6}",
                row.name,
                row.worst,
                row.tolerance,
                if row.pass { "ok" } else { "FAIL" }
            )
            .unwrap();
            if !row.pass {
                failures += 1;
            }
        }
        let dir = case_dir(out, &case.label)?;
        std::fs::write(dir.join("bar_check.txt"), &text)?;
        print!("{text}");
        println!();
    }
    Ok(failures)
}

fn bar_check_case(spec: &NetworkSpec, seed: u64) -> Result<Vec<CheckRow>> {
    let n = spec.num_stations();
    let traffic = crate::flow::solve_traffic(spec)?;
    let w = crate::flow::compute_w(&crate::flow::routing_matrix(spec))?;
    let model = build_approx(spec)?;
    let mut rng = child_stream(seed, 1);
    let mut rows = Vec::new();

    // flow balance over random theta
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let theta: Vec<f64> = (0..n).map(|_| -2.0 * rng.gen::<f64>()).collect();
        worst = worst.max(transform::flow_balance_residual(spec, &traffic.lambda, &theta).abs());
    }
    rows.push(CheckRow {
        name: "flow balance over 1000 random theta".into(),
        worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    });

    // variance identity sigma^2 = 2 Q*(truncated w-column)
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut u = vec![0.0; n];
        for i in 0..j {
            u[i] = w.w[i][j];
        }
        u[j] = 1.0;
        let q2 = 2.0 * transform::q_star(spec, &traffic.lambda, &u);
        worst = worst.max((q2 - model.sigma2[j]).abs());
    }
    rows.push(CheckRow {
        name: "sigma^2 = 2Q* at every station".into(),
        worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    });

    // theta construction: vanishing drifts below j, scaled drift at j
    let mut worst = 0.0f64;
    for j in 0..n {
        for &r in &[0.5, 0.1, 0.05] {
            for _ in 0..20 {
                let eta = transform::ThetaVector::new(
                    (0..n).map(|_| -2.0 * rng.gen::<f64>()).collect(),
                )?;
                let theta = transform::build_theta(spec, &w, &eta, j, r)?;
                let check = transform::check_linear(spec, &w, &theta)?;
                worst = worst.max(check.max_residual() / check.theta_norm.max(1.0));
            }
        }
    }
    rows.push(CheckRow {
        name: "theta-construction drift identities".into(),
        worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    });

    // root-finder vs closed forms
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta: Vec<f64> = (0..n).map(|_| -2.0 * rng.gen::<f64>()).collect();
        for i in 0..n {
            for dist in [
                DistributionSpec::Exponential,
                DistributionSpec::Gamma { shape: 0.75 },
                spec.arrival_dist[i],
            ] {
                let g = transform::gamma_fn(&dist, theta[i])?;
                worst = worst.max((g - transform::gamma_closed_form(&dist, theta[i])).abs());
            }
            for dist in [
                DistributionSpec::Exponential,
                DistributionSpec::Gamma { shape: 0.6 },
                spec.service_dist[i],
            ] {
                let x = transform::xi_fn(&dist, &spec.routing[i], &theta, i)?;
                worst = worst
                    .max((x - transform::xi_closed_form(&dist, &spec.routing[i], &theta, i)).abs());
            }
        }
    }
    rows.push(CheckRow {
        name: "root-finder vs closed forms (gamma, xi)".into(),
        worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    });

    // Taylor convergence of the exponents
    let scales: Vec<f64> = (3..=20).map(|m| -(2.0f64).powi(-m)).collect();
    let direction = vec![1.0; n];
    let mut final_ratio = 0.0f64;
    let mut monotone = true;
    for i in 0..n {
        let rows_t = transform::taylor_check(
            &spec.arrival_dist[i],
            &spec.service_dist[i],
            &spec.routing[i],
            &direction,
            &scales,
            i,
        );
        for pair in rows_t.windows(2) {
            if pair[1].gamma_ratio > pair[0].gamma_ratio + 1e-9
                || pair[1].xi_ratio > pair[0].xi_ratio + 1e-9
            {
                monotone = false;
            }
        }
        let last = rows_t.last().unwrap();
        final_ratio = final_ratio.max(last.gamma_ratio).max(last.xi_ratio);
    }
    rows.push(CheckRow {
        name: "Taylor second-order residual decay".into(),
        worst: final_ratio,
        tolerance: 1e-3,
        pass: monotone && final_ratio < 1e-3,
    });

    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::variability_experiment;

    #[test]
    fn bar_check_passes_on_reference_cases() {
        let cfg = variability_experiment();
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let failures = cmd_bar_check(&cfg, &cases, dir.path()).unwrap();
        assert_eq!(failures, 0);
        assert!(dir.path().join("B/bar_check.txt").exists());
    }

    #[test]
    fn analyze_writes_reports() {
        let cfg = variability_experiment();
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_analyze(&cfg, &cases, dir.path()).unwrap();
        for label in ["A", "B", "C"] {
            assert!(dir.path().join(label).join("means.csv").exists());
            assert!(dir.path().join(label).join("quantiles.csv").exists());
            assert!(dir.path().join(label).join("report.txt").exists());
        }
        let means = std::fs::read_to_string(dir.path().join("B/means.csv")).unwrap();
        assert!(means.contains("case,station,"));
        // Exp means land in the CSV at 6 significant digits
        assert!(means.contains("13.4095"), "{means}");
        assert!(means.contains("63.0839"), "{means}");
    }

    #[test]
    fn simulate_then_compare_reuses_estimates() {
        let mut cfg = variability_experiment();
        cfg.cases.truncate(1); // case A only
        cfg.sim.horizon = 5e4;
        cfg.sim.warmup_fraction = 0.5;
        cfg.sim.num_batches = 5;
        cfg.sim.pmf_cap = 64;
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, &cases, dir.path()).unwrap();
        let est_path = dir.path().join("A/estimates.csv");
        assert!(est_path.exists());
        let before = std::fs::metadata(&est_path).unwrap().len();
        cmd_compare(&cfg, &cases, dir.path(), false).unwrap();
        assert_eq!(std::fs::metadata(&est_path).unwrap().len(), before);
        assert!(dir.path().join("A/hist_station1.svg").exists());
        assert!(dir.path().join("A/hist_station2.svg").exists());
    }

    #[test]
    fn compare_approx_only() {
        let mut cfg = variability_experiment();
        cfg.cases.truncate(1);
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_compare(&cfg, &cases, dir.path(), true).unwrap();
        assert!(dir.path().join("A/hist_station1.svg").exists());
        assert!(!dir.path().join("A/estimates.csv").exists());
    }

    #[test]
    fn simulate_reports_oracle_gap_for_exponential_network() {
        let mut cfg = variability_experiment();
        cfg.cases.clear(); // base preset network is all-exponential
        cfg.sim.horizon = 1e5;
        cfg.sim.warmup_fraction = 0.5;
        cfg.sim.num_batches = 5;
        cfg.sim.pmf_cap = 64;
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, &cases, dir.path()).unwrap();
        let report = std::fs::read_to_string(dir.path().join("base/report.txt")).unwrap();
        assert!(report.contains("max |dpmf|"), "{report}");
    }

    #[test]
    fn gtest_requires_joint_interval() {
        let mut cfg = variability_experiment();
        cfg.cases.truncate(1);
        cfg.sim.joint_interval = None;
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            cmd_gtest(&cfg, &cases, dir.path()),
            Err(Error::JointUnavailable(_))
        ));
    }

    #[test]
    fn gtest_end_to_end_small() {
        let mut cfg = variability_experiment();
        cfg.cases.truncate(1);
        cfg.sim.horizon = 2e5;
        cfg.sim.warmup_fraction = 0.5;
        cfg.sim.num_batches = 5;
        cfg.sim.pmf_cap = 128;
        cfg.sim.joint_interval = Some(100.0);
        let cases = cfg.resolve_cases().unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_gtest(&cfg, &cases, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("A/gtest.txt")).unwrap();
        assert!(text.contains("G = "));
        assert!(text.contains("p-value"));
    }
}
