use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sspectra::assembly::OperatorMatrix;
use sspectra::error::{Error, Result};
use sspectra::powerfit::fit_power_law;
use sspectra::runner::{
    artifact_paths, build_kernel, build_measure, build_weights, load_report, run_experiment,
    verify_report, verify_report_with, ExperimentConfig, Tolerances,
};
use sspectra::spectra::{hermitian_eigen, singular_values, Sign, Spectrum};
use sspectra::weyl::{
    circle_oracle, circle_oracle_log, exponent_table, weyl_coefficient, Normalization,
};

#[derive(Parser)]
#[command(
    name = "sspectra",
    about = "Spectra of weighted weakly singular integral operators on singular measures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the measure for one resolution and write its JSON document.
    Measure {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Assemble the operator matrix for one resolution.
    Assemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Decompose a matrix (from --matrix, or rebuilt from --config) into a
    /// spectrum CSV.
    Spectrum {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a power law to a spectrum CSV and print the result JSON.
    Fit {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long, value_parser = parse_window)]
        window: Option<(usize, usize)>,
        #[arg(long, default_value = "abs")]
        sign: String,
    },
    /// Print the analytic prediction for a config at one resolution.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        normalization: Option<String>,
    },
    /// Run the full experiment pipeline and write all artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's output_dir, then "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a report's verdicts; exit 0 only if all pass.
    Verify {
        #[arg(long)]
        report: PathBuf,
        /// Override the stored exponent tolerance.
        #[arg(long)]
        exponent_rel: Option<f64>,
        /// Override the stored coefficient tolerance.
        #[arg(long)]
        coefficient_rel: Option<f64>,
    },
    /// Print circle-oracle eigenvalues and the asymptotic constant.
    Oracle {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 64)]
        n_max: usize,
        /// Use the log-kernel variant (exact pi/n coefficients).
        #[arg(long, default_value_t = false)]
        log: bool,
    },
}

fn parse_window(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("window must be lo,hi".into());
    }
    let lo = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn parse_sign(s: &str) -> Result<Sign> {
    match s {
        "plus" | "+" => Ok(Sign::Plus),
        "minus" | "-" => Ok(Sign::Minus),
        "abs" => Ok(Sign::Abs),
        other => Err(Error::invalid(format!("unknown sign '{other}'"))),
    }
}

fn pick_resolution(cfg: &ExperimentConfig, requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| *cfg.measure.resolutions.last().unwrap())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Measure {
            config,
            resolution,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let res = pick_resolution(&cfg, resolution);
            let m = build_measure(&cfg.measure, res)?;
            std::fs::create_dir_all(&out)?;
            let (path, _, _) = artifact_paths(&out, res);
            std::fs::write(&path, serde_json::to_string(&m.to_json())?)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Assemble {
            config,
            resolution,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let res = pick_resolution(&cfg, resolution);
            let m = build_measure(&cfg.measure, res)?;
            let kernel = build_kernel(&cfg.kernel, m.ambient_dim)?;
            let f1 = build_weights(&cfg.weights, &m)?;
            let f2 = f1.adjoint();
            let matrix = sspectra::assemble(&m, &kernel, &f1, &f2, cfg.diagonal_rule)?;
            std::fs::create_dir_all(&out)?;
            let (mpath, xpath, _) = artifact_paths(&out, res);
            std::fs::write(&mpath, serde_json::to_string(&m.to_json())?)?;
            matrix.write_sspm(&xpath)?;
            println!("{}", xpath.display());
            Ok(0)
        }
        Command::Spectrum {
            config,
            matrix,
            resolution,
            out,
        } => {
            let (matrix, res) = match (matrix, config) {
                (Some(path), _) => (OperatorMatrix::read_sspm(&path)?, resolution.unwrap_or(0)),
                (None, Some(config)) => {
                    let cfg = ExperimentConfig::from_path(&config)?;
                    let res = pick_resolution(&cfg, resolution);
                    let m = build_measure(&cfg.measure, res)?;
                    let kernel = build_kernel(&cfg.kernel, m.ambient_dim)?;
                    let f1 = build_weights(&cfg.weights, &m)?;
                    let f2 = f1.adjoint();
                    (
                        sspectra::assemble(&m, &kernel, &f1, &f2, cfg.diagonal_rule)?,
                        res,
                    )
                }
                (None, None) => {
                    return Err(Error::invalid("spectrum needs --matrix or --config"));
                }
            };
            let spectrum = if matrix.hermitian {
                hermitian_eigen(&matrix)?
            } else {
                singular_values(&matrix)?
            };
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("spectrum_{res}.csv"));
            std::fs::write(&path, spectrum.to_csv())?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Fit {
            spectrum,
            window,
            sign,
        } => {
            let text = std::fs::read_to_string(&spectrum)?;
            let s = Spectrum::from_csv(&text)?;
            let fit = fit_power_law(&s, parse_sign(&sign)?, window)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(0)
        }
        Command::Predict {
            config,
            resolution,
            normalization,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(n) = normalization {
                cfg.normalization = match n.as_str() {
                    "canonical" => Normalization::Canonical,
                    "paper" => Normalization::Paper,
                    other => {
                        return Err(Error::invalid(format!("unknown normalization '{other}'")))
                    }
                };
            }
            let res = pick_resolution(&cfg, resolution);
            let m = build_measure(&cfg.measure, res)?;
            let kernel = build_kernel(&cfg.kernel, m.ambient_dim)?;
            let f = build_weights(&cfg.weights, &m)?;
            let p = weyl_coefficient(&m, &kernel, &f, cfg.normalization)?;
            let alpha = m.known_alpha().unwrap_or(1.0);
            let l = m.ambient_dim as f64 - kernel.theta();
            let table = exponent_table(m.ambient_dim, alpha, l, l / 2.0);
            // the unit-circle oracle pins the constant conventions for the
            // canonical test kernel
            let theta = kernel.theta();
            let oracle = if cfg.measure.kind == "circle" && theta > 0.0 && theta < 1.0 {
                Some(circle_oracle(theta, 64)?)
            } else {
                None
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&p.to_json(&table, oracle.as_ref()))?
            );
            Ok(0)
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out = out.unwrap_or_else(|| {
                PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()))
            });
            let report = run_experiment(&cfg, &out)?;
            println!("{}", out.join("report.json").display());
            Ok(verify_report(&report))
        }
        Command::Verify {
            report,
            exponent_rel,
            coefficient_rel,
        } => {
            let r = load_report(&report)?;
            let tol = match (exponent_rel, coefficient_rel) {
                (None, None) => None,
                (e, c) => Some(Tolerances {
                    exponent_rel: e.unwrap_or(r.config.tolerances.exponent_rel),
                    coefficient_rel: c.unwrap_or(r.config.tolerances.coefficient_rel),
                }),
            };
            Ok(verify_report_with(&r, tol.as_ref()))
        }
        Command::Oracle { theta, n_max, log } => {
            if log {
                let coeffs = circle_oracle_log(n_max);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "kernel": "log",
                        "coeffs": coeffs,
                    }))?
                );
            } else {
                let oracle = circle_oracle(theta, n_max)?;
                println!("{}", serde_json::to_string_pretty(&oracle)?);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
