//! The `esr` command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::detection::DetectionModel;
use crate::error::{EsrError, Result};
use crate::linalg::{c, StateVector};
use crate::observables::{GeneralizedObservable, OutcomeSet, Property};
use crate::probability::{
    composite_conditional_prob, composite_overall_prob, conditional_prob, overall_prob, quantum_prob,
};
use crate::states::{make_improper_from_composite, State};

use super::config::{ExperimentConfig, OutputFormat, ResolvedConfig, SweepSpec};
use super::output::{write_json, write_rows, write_table};
use super::scenario::run_sweep;
use super::validate::validate_config;

#[derive(Debug, Parser)]
#[command(name = "esr", version, about = "Detection-conditioned measurement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON). Defaults to the built-in spin-mixture experiment.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Sweep an observable parameter, e.g. `--sweep theta 0..pi 25`.
    #[arg(long, num_args = 3, value_names = ["NAME", "START..END", "STEPS"], allow_hyphen_values = true)]
    sweep: Option<Vec<String>>,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "csv|json")]
    format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic probabilities over a sweep.
    Analytic(Common),
    /// Analytic probabilities plus Monte Carlo estimates.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "COUNT")]
        n: Option<u64>,
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
        #[arg(long, value_name = "REAL")]
        z: Option<f64>,
    },
    /// Check the invariant suite on the config's objects.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "csv|json")]
        format: Option<OutputFormat>,
    },
    /// Improper-mixture walkthrough on the spin singlet.
    DemoSinglet {
        #[command(flatten)]
        common: Common,
        /// Constant detection probability used when no config is given.
        #[arg(long, value_name = "REAL", default_value_t = 0.9)]
        detection: f64,
    },
}

fn exit_code(err: &EsrError) -> i32 {
    match err {
        EsrError::Config(_) | EsrError::UnresolvedReference(_) | EsrError::Io(_) => 2,
        _ => 3,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Tables go to stdout unless `--out` is given.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::spin_mixture(0.6, 0.9, 0.8)),
    }
}

fn sweep_from(common: &Common, config: &ExperimentConfig) -> Result<Option<SweepSpec>> {
    match &common.sweep {
        Some(v) => Ok(Some(SweepSpec::from_cli(&v[0], &v[1], &v[2])?)),
        None => Ok(config.sweep.clone()),
    }
}

fn sink<'a>(
    path: Option<&PathBuf>,
    config_path: Option<&String>,
    out: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>> {
    match path.cloned().or_else(|| config_path.map(PathBuf::from)) {
        Some(p) => {
            let f = File::create(&p).map_err(|e| EsrError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(out)),
    }
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Analytic(common) => {
            let config = load_config(common.config.as_ref())?;
            let resolved = ResolvedConfig::resolve(&config)?;
            let rows = run_sweep(&resolved, sweep_from(&common, &config)?.as_ref(), None)?;
            let output = config.output.clone().unwrap_or_default();
            let format = common.format.unwrap_or(output.format);
            let mut w = sink(common.out.as_ref(), output.path.as_ref(), out)?;
            write_rows(&rows, format, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Mc { common, n, seed, z } => {
            let config = load_config(common.config.as_ref())?;
            let resolved = ResolvedConfig::resolve(&config)?;
            let mut opts = config.mc_options();
            opts.n = n.unwrap_or(opts.n);
            opts.seed = seed.unwrap_or(opts.seed);
            opts.z = z.unwrap_or(opts.z);
            let rows = run_sweep(&resolved, sweep_from(&common, &config)?.as_ref(), Some(&opts))?;
            let output = config.output.clone().unwrap_or_default();
            let format = common.format.unwrap_or(output.format);
            let mut w = sink(common.out.as_ref(), output.path.as_ref(), out)?;
            write_rows(&rows, format, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Validate {
            config,
            out: out_path,
            format,
        } => {
            let config = load_config(config.as_ref())?;
            let resolved = ResolvedConfig::resolve(&config)?;
            let results = validate_config(&resolved)?;
            let mut w = sink(out_path.as_ref(), None, out)?;
            match format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Json => write_json(&results, &mut w)?,
                OutputFormat::Csv => {
                    for r in &results {
                        writeln!(
                            w,
                            "{} {} (checked {}, worst {:e}, tol {:e})",
                            if r.passed { "PASS" } else { "FAIL" },
                            r.name,
                            r.checked,
                            r.worst,
                            r.tolerance
                        )?;
                    }
                }
            }
            w.flush()?;
            Ok(if results.iter().all(|r| r.passed) { 0 } else { 1 })
        }
        Command::DemoSinglet { common, detection } => demo_singlet(&common, detection, out, err),
    }
}

#[derive(Serialize)]
struct SingletRow {
    sweep_value: f64,
    p_conditional_reduced: f64,
    p_conditional_composite: f64,
    p_overall_reduced: f64,
    p_overall_composite: f64,
    p_quantum: f64,
}

const SINGLET_TOL: f64 = 1e-12;

fn demo_singlet(common: &Common, detection: f64, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let (model, config) = match &common.config {
        Some(p) => {
            let config = ExperimentConfig::load(p)?;
            (ResolvedConfig::resolve(&config)?.model, Some(config))
        }
        None => (
            DetectionModel::constant(detection).map_err(|e| EsrError::Config(format!("--detection: {e}")))?,
            None,
        ),
    };
    let sweep = match &common.sweep {
        Some(v) => SweepSpec::from_cli(&v[0], &v[1], &v[2])?,
        None => SweepSpec::from_cli("theta", "0..pi", "13")?,
    };
    if sweep.parameter != "theta" && sweep.parameter != "phi" {
        return Err(EsrError::Config(format!(
            "sweep.parameter: unknown parameter {:?} (expected theta or phi)",
            sweep.parameter
        )));
    }

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = StateVector::new(&[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)], 1e-12)?;
    let n = make_improper_from_composite(&psi, 2, 2)?;
    writeln!(
        err,
        "composite pure state: spin singlet (|+-> - |-+>)/sqrt(2) on C2 (x) C2"
    )?;
    writeln!(
        err,
        "reduced state of the first particle: rho_N = [[{:.3}, {:.3}], [{:.3}, {:.3}]], purity {:.3}",
        n.rho().get(0, 0).re,
        n.rho().get(0, 1).re,
        n.rho().get(1, 0).re,
        n.rho().get(1, 1).re,
        n.purity()
    )?;
    writeln!(
        err,
        "comparing P(X) (x) I and T(X) (x) I on the composite space with P(X) and T(X) on rho_N"
    )?;

    let key = n.label().to_string();
    let state = State::Improper(n);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for value in sweep.values()? {
        let (theta, phi) = if sweep.parameter == "theta" {
            (value, 0.0)
        } else {
            (std::f64::consts::FRAC_PI_2, value)
        };
        let obs = GeneralizedObservable::spin("sigma_n", theta, phi)?;
        let x = OutcomeSet::from_eigenvalues(&obs, &[1.0], false, 1e-10)?;
        let prop = Property::new(obs, x)?;
        let row = SingletRow {
            sweep_value: value,
            p_conditional_reduced: conditional_prob(&state, &prop, &model)?,
            p_conditional_composite: composite_conditional_prob(&psi, 2, 2, &prop)?,
            p_overall_reduced: overall_prob(&state, &prop, &model)?,
            p_overall_composite: composite_overall_prob(&psi, 2, 2, &prop, &model, Some(&key))?,
            p_quantum: quantum_prob(&state, &prop)?,
        };
        worst = worst
            .max((row.p_conditional_reduced - row.p_conditional_composite).abs())
            .max((row.p_overall_reduced - row.p_overall_composite).abs());
        rows.push(row);
    }

    let output = config.and_then(|c| c.output).unwrap_or_default();
    let format = common.format.unwrap_or(output.format);
    let mut w = sink(common.out.as_ref(), output.path.as_ref(), out)?;
    match format {
        OutputFormat::Json => write_json(&rows, &mut w)?,
        OutputFormat::Csv => {
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.sweep_value,
                        r.p_conditional_reduced,
                        r.p_conditional_composite,
                        r.p_overall_reduced,
                        r.p_overall_composite,
                        r.p_quantum,
                    ]
                })
                .collect();
            write_table(
                &[
                    "sweep_value",
                    "p_conditional_reduced",
                    "p_conditional_composite",
                    "p_overall_reduced",
                    "p_overall_composite",
                    "p_quantum",
                ],
                &table,
                &mut w,
            )?;
        }
    }
    w.flush()?;
    writeln!(err, "largest composite/reduced discrepancy: {worst:e}")?;
    if worst > SINGLET_TOL {
        return Err(EsrError::NumericalIntegrity {
            context: "singlet composite consistency",
            value: worst,
        });
    }
    Ok(0)
}
