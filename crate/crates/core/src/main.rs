use std::path::PathBuf;
use std::process::ExitCode;

use aclab::config::ExperimentConfig;
use aclab::energy::{total_energy, Region};
use aclab::geometry::{Cylinder, Grid};
use aclab::profile::heteroclinic;
use aclab::run::{self, write_json};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aclab", version, about = "Symmetric Allen-Cahn minimizers: solve, verify, report")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the 1D connection profile and emit CSV/JSON artifacts.
    Profile {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the Dirichlet problem from the config.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parity-split spectrum of the transverse linearization.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Energy of a stored field over a region.
    Energy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Cylinder selector `l,r,eta`; whole domain when omitted.
        #[arg(long)]
        cylinder: Option<String>,
    },
    /// Radial comparison decay: CSV of center values and fitted (k0, K0).
    Comparison {
        #[arg(long)]
        config: PathBuf,
        /// Linearization constant; defaults to the shifted-well value.
        #[arg(long)]
        c: Option<f64>,
        /// Sphere level; defaults to the shifted-well q*.
        #[arg(long)]
        q_bar: Option<f64>,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Radius window `lo,hi` for the decay fit.
        #[arg(long, default_value = "5,20")]
        r_range: String,
    },
    /// Run one named check (thm11|thm12|thm14|lemma32|sigma).
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        check: String,
        /// Post-process this stored field instead of solving.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Full pipeline: profile, solve, all configured checks, report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat `run` over values of one dotted config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `grid.h`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
}

fn parse_cylinder(spec: &str) -> Result<Cylinder, String> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("cylinder spec `{spec}` must be l,r,eta"));
    }
    let p = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("cylinder spec: {e}"));
    Ok(Cylinder { l: p(parts[0])?, r: p(parts[1])?, eta: p(parts[2])? })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Profile { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            let p = cfg.build_potential()?;
            let pr = heteroclinic(&p, cfg.profile.l_max, cfg.profile.h)?;
            run::write_profile_artifacts(&cfg.output.dir, &pr)?;
            let (k, big_k) = pr.decay_constants()?;
            println!("profile: k = {k:.6}, K = {big_k:.6}, energy = {:.6}", pr.energy());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.verify.checks.clear();
            let out = run::run(&cfg, None)?;
            println!("solve: report at {}", out.report_path.display());
            Ok(if out.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Spectrum { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run::spectrum_artifacts(&cfg)?;
            println!("spectrum: {summary}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Energy { config, field, cylinder } => {
            let cfg = ExperimentConfig::load(&config)?;
            let domain = cfg.build_domain()?;
            let grid = Grid::build(&domain, cfg.grid.h)?;
            let f = run::read_field_csv(&grid, &field)?;
            let p = cfg.build_potential()?;
            let region = match cylinder {
                Some(spec) => Region::Cylinder(parse_cylinder(&spec)?),
                None => Region::All,
            };
            let e = total_energy(&f, &p, &region)?;
            let value = serde_json::json!({
                "gradient_part": e.gradient_part,
                "potential_part": e.potential_part,
                "total": e.total,
            });
            std::fs::create_dir_all(&cfg.output.dir)?;
            write_json(&cfg.output.dir.join("energy.json"), &value)?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Comparison { config, c, q_bar, n, r_range } => {
            let cfg = ExperimentConfig::load(&config)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            let p = cfg.build_potential()?;
            let wc = p.with_shift(1.0).well_constants(cfg.potential.m0, cfg.potential.scan_step)?;
            let c = c.unwrap_or(wc.c);
            let q_bar = q_bar.unwrap_or(wc.q_star);
            let parts: Vec<&str> = r_range.split(',').collect();
            if parts.len() != 2 {
                return Err(format!("r-range `{r_range}` must be lo,hi").into());
            }
            let lo: f64 = parts[0].trim().parse()?;
            let hi: f64 = parts[1].trim().parse()?;
            let samples = 31;
            let mut csv = String::from("R,phi0\n");
            for i in 0..samples {
                let big_r = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
                let sol = aclab::comparison::radial_solve(c, q_bar, big_r, n, (big_r / 2000.0).min(0.01))?;
                csv.push_str(&format!("{:.16e},{:.16e}\n", big_r, sol.phi0()));
            }
            let csv_path = cfg.output.dir.join("comparison.csv");
            std::fs::write(&csv_path, csv)?;
            let (k0, big_k0) = aclab::comparison::fit_k0(c, q_bar, n, lo, hi, samples)?;
            let value = serde_json::json!({ "k0": k0, "K0": big_k0, "c": c, "q_bar": q_bar, "n": n });
            write_json(&cfg.output.dir.join("comparison.json"), &value)?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { config, check, field } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !aclab::config::VALID_CHECKS.contains(&check.as_str()) {
                return Err(format!(
                    "unknown check `{check}`; valid checks: {}",
                    aclab::config::VALID_CHECKS.join(", ")
                )
                .into());
            }
            cfg.verify.checks = vec![check];
            let preloaded = match field {
                Some(path) => {
                    let domain = cfg.build_domain()?;
                    let grid = Grid::build(&domain, cfg.grid.h)?;
                    Some(run::read_field_csv(&grid, &path)?)
                }
                None => None,
            };
            let out = run::run(&cfg, preloaded)?;
            Ok(if !out.converged {
                ExitCode::from(2)
            } else if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run::run(&cfg, None)?;
            println!("report: {}", out.report_path.display());
            Ok(if !out.converged {
                ExitCode::from(2)
            } else if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Sweep { config, param, values, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let values: Vec<String> = values.split(',').map(|s| s.trim().to_string()).collect();
            let entries = run::sweep(&cfg, &param, &values, jobs)?;
            let mut all = true;
            for e in &entries {
                println!("{} = {}: {}", param, e.value, if e.pass { "PASS" } else { "FAIL" });
                all &= e.pass && e.converged;
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
