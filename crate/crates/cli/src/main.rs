use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hetcov::analytic::{
    coverage_curve, deviation_ignoring_correlation, gain_vs_coherent, rate_at_coverage,
    CoverageMethod, CoverageOptions,
};
use hetcov::montecarlo::{estimate_coverage_curve, McConfig, DEFAULT_REGION_RADIUS_M};
use hetcov::{load_scenario, split_from_eta, ResourceSplit, Scenario, ScenarioConfig};
use serde_json::json;

mod output;

use output::{write_outputs, Table};

#[derive(Parser)]
#[command(
    name = "hetcov",
    version,
    about = "Rate coverage of heterogeneous cellular networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage probability along a grid of rate thresholds.
    Coverage(CoverageArgs),
    /// Rate gain of a two-block split over a single block.
    Gain(TargetArgs),
    /// Rate overestimation when interference correlation is ignored.
    Deviation(TargetArgs),
    /// Compare the analytic coverage curve with simulation.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in three-tier reference when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted. A manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    /// Lowest rate threshold in bit/s.
    #[arg(long)]
    tau_min: Option<f64>,
    /// Highest rate threshold in bit/s.
    #[arg(long)]
    tau_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    #[arg(long, value_delimiter = ',', default_value = "exact,indep,coherent")]
    methods: Vec<MethodArg>,
}

#[derive(Args)]
struct TargetArgs {
    #[command(flatten)]
    common: Common,
    /// Coverage targets.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.7,0.9")]
    pc: Vec<f64>,
    /// Fractions of the bandwidth in block 1.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.5")]
    eta: Vec<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Defaults to 15 thresholds spanning coverage 0.99 down to 0.1.
    #[command(flatten)]
    grid: Grid,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REGION_RADIUS_M)]
    region_radius_m: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Indep,
    Coherent,
    Nonoise,
}

impl From<MethodArg> for CoverageMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => CoverageMethod::Exact,
            MethodArg::Indep => CoverageMethod::IndependentInterference,
            MethodArg::Coherent => CoverageMethod::Coherent,
            MethodArg::Nonoise => CoverageMethod::NoNoiseEqualAlpha,
        }
    }
}

fn load(common: &Common) -> Result<(Scenario, ResourceSplit)> {
    match &common.config {
        Some(path) => load_scenario(path).with_context(|| format!("loading {}", path.display())),
        None => Ok((
            Scenario::reference_three_tier(),
            ResourceSplit::from_eta(hetcov::model::REFERENCE_BANDWIDTH_HZ, 0.5)?,
        )),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0) {
        bail!(hetcov::Error::Validation(format!(
            "rate range [{lo}, {hi}] is invalid"
        )));
    }
    match n {
        0 => bail!(hetcov::Error::Validation(
            "--points must be at least 1".into()
        )),
        1 => Ok(vec![lo]),
        _ if hi <= lo => bail!(hetcov::Error::Validation(format!(
            "--tau-max ({hi}) must exceed --tau-min ({lo})"
        ))),
        _ => Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn check_probabilities(name: &str, values: &[f64], open: bool) -> Result<()> {
    for &v in values {
        let ok = if open {
            v > 0.0 && v < 1.0
        } else {
            (0.0..=1.0).contains(&v)
        };
        if !ok {
            bail!(hetcov::Error::Validation(format!(
                "--{name} value {v} is out of range"
            )));
        }
    }
    Ok(())
}

fn scenario_json(scenario: &Scenario, split: &ResourceSplit) -> serde_json::Value {
    serde_json::to_value(ScenarioConfig::from_model(scenario, split)).expect("config serializes")
}

fn config_label(common: &Common) -> String {
    common
        .config
        .as_deref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "builtin:reference".into())
}

fn method_split(method: CoverageMethod, split: &ResourceSplit) -> Result<ResourceSplit> {
    // The single-block column always uses the whole bandwidth as one block.
    Ok(match method {
        CoverageMethod::Coherent => split_from_eta(split.total(), 0.0)?,
        _ => *split,
    })
}

fn run_coverage(args: &CoverageArgs) -> Result<(Table, serde_json::Value)> {
    let (scenario, split) = load(&args.common)?;
    let grid = linspace(
        args.grid.tau_min.unwrap_or(0.0),
        args.grid.tau_max.unwrap_or(2.0 * split.total()),
        args.grid.points.unwrap_or(50),
    )?;
    let opts = CoverageOptions::default();
    let mut header = vec!["tau_bps".to_string()];
    let mut columns = Vec::new();
    for &m in &args.methods {
        let method = CoverageMethod::from(m);
        let curve = coverage_curve(
            &scenario,
            &method_split(method, &split)?,
            &grid,
            &[method],
            &opts,
        )?;
        let column = curve
            .columns
            .into_iter()
            .next()
            .expect("one column per method");
        header.push(column.label);
        columns.push(column.values);
    }
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, tau)| {
            std::iter::once(format!("{tau:.0}"))
                .chain(columns.iter().map(|c| format!("{:.6}", c[i])))
                .collect()
        })
        .collect();
    let params = json!({
        "config": config_label(&args.common),
        "scenario": scenario_json(&scenario, &split),
        "tau_grid_bps": grid,
        "methods": args.methods.iter().map(|&m| CoverageMethod::from(m).label()).collect::<Vec<_>>(),
        "tolerance": opts.tol,
    });
    Ok((Table { header, rows }, params))
}

fn run_gain(args: &TargetArgs) -> Result<(Table, serde_json::Value)> {
    check_probabilities("pc", &args.pc, true)?;
    check_probabilities("eta", &args.eta, false)?;
    let (scenario, split) = load(&args.common)?;
    let opts = CoverageOptions::default();
    let mut rows = Vec::new();
    for &pc in &args.pc {
        for &eta in &args.eta {
            let g = gain_vs_coherent(&scenario, split.total(), eta, pc, &opts)?;
            rows.push(vec![
                format!("{pc:.6}"),
                format!("{eta:.6}"),
                format!("{:.0}", g.tau_eta),
                format!("{:.0}", g.tau_coherent),
                format!("{:.6}", g.gain()),
            ]);
        }
    }
    let header = ["pc", "eta", "tau_eta_bps", "tau0_bps", "gain"]
        .map(String::from)
        .to_vec();
    let params = json!({
        "config": config_label(&args.common),
        "scenario": scenario_json(&scenario, &split),
        "pc": args.pc,
        "eta": args.eta,
        "tolerance": opts.tol,
    });
    Ok((Table { header, rows }, params))
}

fn run_deviation(args: &TargetArgs) -> Result<(Table, serde_json::Value)> {
    check_probabilities("pc", &args.pc, true)?;
    check_probabilities("eta", &args.eta, false)?;
    let (scenario, split) = load(&args.common)?;
    let opts = CoverageOptions::default();
    let mut rows = Vec::new();
    for &pc in &args.pc {
        for &eta in &args.eta {
            let d = deviation_ignoring_correlation(&scenario, split.total(), eta, pc, &opts)?;
            rows.push(vec![
                format!("{pc:.6}"),
                format!("{eta:.6}"),
                format!("{:.0}", d.tau_exact),
                format!("{:.0}", d.tau_indep),
                format!("{:.6}", d.deviation()),
                format!("{:.0}", d.abs_diff()),
            ]);
        }
    }
    let header = [
        "pc",
        "eta",
        "tau_exact_bps",
        "tau_indep_bps",
        "deviation",
        "abs_diff_bps",
    ]
    .map(String::from)
    .to_vec();
    let params = json!({
        "config": config_label(&args.common),
        "scenario": scenario_json(&scenario, &split),
        "pc": args.pc,
        "eta": args.eta,
        "tolerance": opts.tol,
    });
    Ok((Table { header, rows }, params))
}

struct Validation {
    table: Table,
    params: serde_json::Value,
    worst_z: f64,
}

fn run_validate(args: &ValidateArgs) -> Result<Validation> {
    let (scenario, split) = load(&args.common)?;
    let opts = CoverageOptions::default();
    let method = if split.is_coherent() {
        CoverageMethod::Coherent
    } else {
        CoverageMethod::Exact
    };
    let grid = match (args.grid.tau_min, args.grid.tau_max) {
        (Some(lo), Some(hi)) => linspace(lo, hi, args.grid.points.unwrap_or(15))?,
        (None, None) => {
            let lo = rate_at_coverage(&scenario, &split, 0.99, method, &opts)?;
            let hi = rate_at_coverage(&scenario, &split, 0.1, method, &opts)?;
            linspace(lo.round(), hi.round(), args.grid.points.unwrap_or(15))?
        }
        _ => bail!(hetcov::Error::Validation(
            "give both --tau-min and --tau-max, or neither".into()
        )),
    };
    let analytic = coverage_curve(&scenario, &split, &grid, &[method], &opts)?;
    let cfg = McConfig {
        trials: args.trials,
        seed: args.seed,
        region_radius: args.region_radius_m,
        ..McConfig::default()
    };
    let mc = estimate_coverage_curve(&scenario, &split, &grid, &cfg)?;
    let mut worst_z = 0.0f64;
    let mut rows = Vec::new();
    for ((tau, pc), est) in grid.iter().zip(&analytic.columns[0].values).zip(&mc) {
        // With no spread in the sample, fall back to the largest possible
        // binomial standard error.
        let se = if est.std_err > 0.0 {
            est.std_err
        } else {
            0.5 / (est.trials as f64).sqrt()
        };
        let z = (est.p_hat - pc) / se;
        worst_z = worst_z.max(z.abs());
        rows.push(vec![
            format!("{tau:.0}"),
            format!("{pc:.6}"),
            format!("{:.6}", est.p_hat),
            format!("{:.6}", est.std_err),
            format!("{z:.6}"),
        ]);
    }
    let header = ["tau_bps", "pc_exact", "pc_mc", "mc_stderr", "z_score"]
        .map(String::from)
        .to_vec();
    let params = json!({
        "config": config_label(&args.common),
        "scenario": scenario_json(&scenario, &split),
        "tau_grid_bps": grid,
        "trials": args.trials,
        "seed": args.seed,
        "region_radius_m": args.region_radius_m,
        "tolerance": opts.tol,
    });
    Ok(Validation {
        table: Table { header, rows },
        params,
        worst_z,
    })
}

fn emit(
    command: &str,
    out: Option<&Path>,
    table: &Table,
    params: serde_json::Value,
    start: Instant,
) -> Result<()> {
    write_outputs(command, out, table, params, start.elapsed().as_secs_f64())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let start = Instant::now();
    match cli.command {
        Command::Coverage(args) => {
            let (table, params) = run_coverage(&args)?;
            emit(
                "coverage",
                args.common.out.as_deref(),
                &table,
                params,
                start,
            )?;
        }
        Command::Gain(args) => {
            let (table, params) = run_gain(&args)?;
            emit("gain", args.common.out.as_deref(), &table, params, start)?;
        }
        Command::Deviation(args) => {
            let (table, params) = run_deviation(&args)?;
            emit(
                "deviation",
                args.common.out.as_deref(),
                &table,
                params,
                start,
            )?;
        }
        Command::Validate(args) => {
            let v = run_validate(&args)?;
            emit(
                "validate",
                args.common.out.as_deref(),
                &v.table,
                v.params,
                start,
            )?;
            let pass = v.worst_z <= 3.0;
            eprintln!(
                "{}: max |z| = {:.3} over {} thresholds",
                if pass { "PASS" } else { "FAIL" },
                v.worst_z,
                v.table.rows.len()
            );
            if !pass {
                return Ok(ExitCode::from(4));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hetcov::Error>() {
            return if e.is_config() || matches!(e, hetcov::Error::Domain(_)) {
                2
            } else {
                3
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        assert_eq!(linspace(1.0, 3.0, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(linspace(5.0, 5.0, 1).unwrap(), vec![5.0]);
        assert!(linspace(3.0, 1.0, 4).is_err());
        assert!(linspace(0.0, 1.0, 0).is_err());
        assert!(linspace(-1.0, 1.0, 2).is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let config = anyhow::Error::new(hetcov::Error::Validation("x".into()));
        assert_eq!(exit_code(&config), 2);
        let numerical = anyhow::Error::new(hetcov::Error::Numerical("x".into())).context("outer");
        assert_eq!(exit_code(&numerical), 3);
        let io = anyhow::Error::new(std::io::Error::other("disk"));
        assert_eq!(exit_code(&io), 2);
    }
}
