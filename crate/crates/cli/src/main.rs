//! `pchaos` — batch front-end for the Poisson-chaos toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pchaos_cli::config::{parse_config, ExperimentConfig, StudyId};
use pchaos_cli::csvout::parse_csv;
use pchaos_cli::ratefit::fit_rate;
use pchaos_cli::{builtins, identity, runner, CliError, CliResult};

#[derive(Parser)]
#[command(name = "pchaos", version, about = "Poisson-chaos bounds and simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suite; exit 0 iff every check passes.
    Check {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = builtins::DEFAULT_SEED)]
        seed: u64,
    },
    /// Compute the bound report for a kernel spec and print it as JSON.
    Bound {
        /// Experiment config providing [space] and [kernel] (and nu).
        #[arg(long)]
        config: PathBuf,
        /// Seed override (bound reports are exact; kept for config echo).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a full study and write CSV/manifest/rate artifacts.
    Simulate {
        /// Experiment config; omit to use a built-in study's defaults.
        #[arg(long, required_unless_present = "builtin")]
        config: Option<PathBuf>,
        /// Built-in study id (identity-suite, gamma-ustat, three-moment,
        /// dejong-normal, hybrid-gn, hybrid-gp).
        #[arg(long)]
        builtin: Option<String>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a log-log rate from a results CSV column.
    Rate {
        /// Path to a results.csv produced by `simulate`.
        csv: PathBuf,
        /// Column to fit against n.
        #[arg(long)]
        column: String,
        /// Restrict to one kernel name (default: first kernel found).
        #[arg(long)]
        kernel: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code.clamp(0, 255) as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Check { seed } => {
            let results = identity::run_all(seed);
            let mut ok = true;
            for r in &results {
                println!(
                    "{} {}{}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail.as_deref().map(|d| format!(" — {d}")).unwrap_or_default()
                );
                ok &= r.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bound { config, seed } => {
            let (cfg, _raw) = load_config(&config, seed, None)?;
            let report = bound_report_json(&cfg)?;
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { config, builtin, seed, workers, out } => {
            if let Some(k) = workers {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            let (cfg, raw) = match (&config, &builtin) {
                (Some(path), _) => load_config(path, seed, builtin.as_deref())?,
                (None, Some(name)) => {
                    let id = StudyId::parse(name)
                        .ok_or_else(|| CliError::config(format!("unknown study `{name}`")))?;
                    let mut cfg = builtins::default_config(id);
                    if let Some(s) = seed {
                        cfg.seed = s;
                    }
                    (cfg, None)
                }
                (None, None) => unreachable!("clap enforces one of --config/--builtin"),
            };
            let artifacts = runner::execute(&cfg, raw.as_deref())?;
            runner::write_artifacts(&out, &artifacts)?;
            for note in &artifacts.output.notes {
                println!("{note}");
            }
            println!(
                "wrote {} rows to {}",
                artifacts.output.rows.len(),
                out.join("results.csv").display()
            );
            Ok(if artifacts.output.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Rate { csv, column, kernel } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| CliError::new(format!("{}: {e}", csv.display())))?;
            let (header, rows) =
                parse_csv(&text).ok_or_else(|| CliError::new("empty or malformed CSV"))?;
            let col = |name: &str| header.iter().position(|h| h == name);
            let (in_, ik, ic) = (
                col("n").ok_or_else(|| CliError::new("no `n` column"))?,
                col("kernel").ok_or_else(|| CliError::new("no `kernel` column"))?,
                col(&column).ok_or_else(|| CliError::new(format!("no `{column}` column")))?,
            );
            let kernel = kernel.or_else(|| rows.first().map(|r| r[ik].clone()));
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| Some(&r[ik]) == kernel.as_ref() && !r[ic].is_empty())
                .filter_map(|r| Some((r[in_].parse().ok()?, r[ic].parse().ok()?)))
                .collect();
            let (slope, stderr) = fit_rate(&pairs)?;
            println!(
                "{}",
                serde_json::json!({
                    "column": column,
                    "kernel": kernel,
                    "points": pairs.len(),
                    "slope": slope,
                    "stderr": stderr,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    _builtin: Option<&str>,
) -> CliResult<(ExperimentConfig, Option<String>)> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&raw)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, Some(raw)))
}

/// JSON bound report for the first kernel of a config, evaluated at the
/// largest scheduled intensity.
fn bound_report_json(cfg: &ExperimentConfig) -> CliResult<String> {
    let n = cfg.n_schedule.last().copied().unwrap_or(1.0);
    let space = cfg.space.build(n)?;
    let spec = cfg
        .kernels
        .first()
        .ok_or_else(|| CliError::config("bound needs a [kernel] section"))?;
    let kernel = spec.build(&space, n)?;
    let mut body = serde_json::Map::new();
    body.insert("n".into(), n.into());
    body.insert("order".into(), (kernel.order() as u64).into());
    if kernel.order() % 2 == 0 {
        let rep = pchaos_core::bounds::gamma_bound_report(&space, &kernel, cfg.nu, false)?;
        body.insert("gamma".into(), report_to_json(&rep));
    }
    if kernel.order() == 2 {
        if let Ok(rep) = pchaos_core::bounds::dejong_report(&space, &kernel, Some(cfg.nu)) {
            body.insert("dejong".into(), report_to_json(&rep));
        }
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(body))
        .map_err(|e| CliError::new(format!("json: {e}")))
}

fn report_to_json(rep: &pchaos_core::bounds::BoundReport) -> serde_json::Value {
    let opt = |v: Option<f64>| match v {
        Some(x) => serde_json::json!(x),
        None => serde_json::Value::Null,
    };
    serde_json::json!({
        "nu": opt(rep.nu),
        "q": rep.q,
        "intensity": rep.intensity,
        "variance": rep.variance,
        "sigma2": opt(rep.sigma2),
        "middle_defect": opt(rep.middle_defect),
        "contraction_norms": rep.contraction_norms
            .iter()
            .map(|&(r, l, v)| serde_json::json!({"r": r, "l": l, "norm": v}))
            .collect::<Vec<_>>(),
        "a1_exact": opt(rep.a1_exact),
        "a3_bound": opt(rep.a3_bound),
        "a4_bound": opt(rep.a4_bound),
        "a5": opt(rep.a5),
        "final_bound": opt(rep.final_bound),
        "max_form": opt(rep.max_form),
        "max_form_entries": rep.max_form_entries
            .iter()
            .map(|(k, v)| serde_json::json!({"entry": k, "value": v}))
            .collect::<Vec<_>>(),
        "k_lin": opt(rep.k_lin),
        "k_quad": opt(rep.k_quad),
        "bn": opt(rep.bn),
        "cn": opt(rep.cn),
        "bn_depoissonized": opt(rep.bn_depoissonized),
        "cn_depoissonized": opt(rep.cn_depoissonized),
        "method_tags": rep.method_tags
            .iter()
            .map(|(k, v)| serde_json::json!({"key": k, "value": v}))
            .collect::<Vec<_>>(),
    })
}
