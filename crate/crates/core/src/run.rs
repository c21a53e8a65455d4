//! Batch orchestration: profile → solve → checks, with CSV/JSON artifacts,
//! deterministic reports, and parameter sweeps over a bounded worker pool.
//!
//! `report.json` is byte-reproducible for a fixed config and seed; wall-clock
//! timings go to the separate `timings.json` sidecar.


use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::comparison::{self, ComparisonError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::energy::EnergyError;
use crate::geometry::{distance_field, DistanceTarget, Field, GeometryError, Grid};
use crate::potential::{Potential, PotentialError, WellConstants};
use crate::profile::{heteroclinic, Profile1d, ProfileError};
use crate::solver::{solve_dirichlet_monitored, BoundaryData, SolveError, SolveReport};
use crate::spectral::SpectralError;
use crate::verify::{self, EnvelopeMode, VerifyError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("field file {path}: {message}")]
    FieldFile { path: String, message: String },
    #[error("{0}")]
    Check(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// One verification verdict in the report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    pub constants: serde_json::Value,
    pub samples_csv_path: Option<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report_path: PathBuf,
    pub pass: bool,
    pub converged: bool,
}

/// Writes `x1,x2,value` rows (17 significant digits) for every valued node.
pub fn write_field_csv(path: &Path, f: &Field) -> Result<(), RunError> {
    let grid = f.grid();
    let mut out = String::from("x1,x2,value\n");
    for jy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let id = grid.idx(ix, jy);
            if grid.has_value(id) {
                let (x1, x2) = grid.coords(id);
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x1, x2, f.get(id)));
            }
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads a field dump back onto a grid; every valued node must be covered.
pub fn read_field_csv(grid: &Arc<Grid>, path: &Path) -> Result<Field, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut f = Field::zeros(Arc::clone(grid));
    let mut seen = vec![false; grid.len()];
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(RunError::FieldFile {
                path: path.display().to_string(),
                message: format!("row {}: expected x1,x2,value", i + 1),
            });
        }
        let parse = |s: &str|

            s.trim().parse::<f64>().map_err(|e| RunError::FieldFile {
                path: path.display().to_string(),
                message: format!("row {}: {e}", i + 1),
            });
        let (x1, x2, v) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        let id = grid.nearest(x1, x2);
        let (gx1, gx2) = grid.coords(id);
        if (gx1 - x1).abs() > grid.h / 2.0 || (gx2 - x2).abs() > grid.h / 2.0 {
            return Err(RunError::FieldFile {
                path: path.display().to_string(),
                message: format!("row {}: point ({x1}, {x2}) is off-grid", i + 1),
            });
        }
        f.set(id, v);
        seen[id] = true;
    }
    let missing = (0..grid.len()).filter(|&id| grid.has_value(id) && !seen[id]).count();
    if missing > 0 {
        return Err(RunError::FieldFile {
            path: path.display().to_string(),
            message: format!("{missing} valued nodes uncovered by the file"),
        });
    }
    Ok(f)
}

pub fn write_profile_artifacts(dir: &Path, pr: &Profile1d) -> Result<(), RunError> {
    let csv = dir.join("profile.csv");
    let mut out = String::from("s,u,du\n");
    let n = pr.values().len();
    for i in (1..n).rev() {
        let s = i as f64 * pr.h();
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", -s, -pr.values()[i], pr.derivs()[i]));
    }
    for i in 0..n {
        let s = i as f64 * pr.h();
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", s, pr.values()[i], pr.derivs()[i]));
    }
    std::fs::write(&csv, out).map_err(io_err(&csv))?;
    let (k, big_k) = pr.decay_constants().map(|kk| (kk.0, kk.1)).unwrap_or((f64::NAN, f64::NAN));
    let header = json!({ "k": k, "K": big_k, "energy": pr.energy() });
    write_json(&dir.join("profile.json"), &header)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serialization");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_samples_csv(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<(), RunError> {
    let mut out = String::from(header);
    out.push('\n');
    for &(a, b) in rows {
        out.push_str(&format!("{:.16e},{:.16e}\n", a, b));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// `sup(|u| + |∇u|)` over the interior, the observed C¹-type bound.
pub fn observed_c1_bound(u: &Field) -> f64 {
    let grid = u.grid();
    let mut m0 = 0.0f64;
    for &id in grid.interior() {
        let (ix, jy) = grid.split(id);
        let gx = (u.get(grid.idx(ix + 1, jy)) - u.get(grid.idx(ix - 1, jy))) / (2.0 * grid.h);
        let gy = (u.get(grid.idx(ix, jy + 1)) - u.get(grid.idx(ix, jy - 1))) / (2.0 * grid.h);
        m0 = m0.max(u.get(id).abs() + (gx * gx + gy * gy).sqrt());
    }
    m0
}

/// Shifted field `û = u - 1` on the right half, zero elsewhere, paired with
/// a positive-part distance that is zeroed off the right half so masked
/// nodes never enter distance-thresholded scans.
fn shifted_right_half(u: &Field, dist_plus: &Field) -> (Field, Field) {
    let grid = u.grid();
    let mut shifted = Field::zeros(Arc::clone(grid));
    let mut dist = Field::zeros(Arc::clone(grid));
    for &id in grid.interior() {
        let (x1, _) = grid.coords(id);
        if x1 > 0.0 {
            shifted.set(id, u.get(id) - 1.0);
            dist.set(id, dist_plus.get(id));
        }
    }
    (shifted, dist)
}

pub struct CheckContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub potential: &'a Potential,
    pub profile: &'a Profile1d,
    pub grid: &'a Arc<Grid>,
    pub field: &'a Field,
    pub m0_observed: f64,
    pub out_dir: &'a Path,
}

/// Convexity constants of the shifted single-well problem, based on the
/// configured range bound.
pub fn shifted_constants(ctx: &CheckContext) -> Result<WellConstants, RunError> {
    let shifted = ctx.potential.with_shift(1.0);
    Ok(shifted.well_constants(ctx.cfg.potential.m0, ctx.cfg.potential.scan_step)?)
}

pub fn run_check(ctx: &CheckContext, name: &str) -> Result<CheckOutcome, RunError> {
    let h = ctx.grid.h;
    let near_exclusion = 2.0 * h * 2.0f64.sqrt();
    let bin_width = 4.0 * h;
    match name {
        "thm11" => {
            let dist_plus = distance_field(ctx.grid, DistanceTarget::PositivePartBoundary);
            let chk = verify::saturation_check(
                ctx.field,
                &dist_plus,
                EnvelopeMode::ValueOnly,
                ctx.cfg.verify.k_min,
                ctx.cfg.solver.tol,
                near_exclusion,
                bin_width,
            )?;
            let grad = verify::saturation_check(
                ctx.field,
                &dist_plus,
                EnvelopeMode::WithGradient,
                ctx.cfg.verify.k_min,
                ctx.cfg.solver.tol,
                near_exclusion,
                bin_width,
            )?;
            let csv = ctx.out_dir.join("thm11_samples.csv");
            write_samples_csv(&csv, "d,e", &chk.samples)?;
            Ok(CheckOutcome {
                check: name.into(),
                pass: chk.pass,
                constants: json!({
                    "k": chk.fit.k,
                    "K": chk.fit.big_k,
                    "k_with_gradient": grad.fit.k,
                    "K_with_gradient": grad.fit.big_k,
                    "min_u_positive_part": chk.min_u_positive_part,
                    "k_min": ctx.cfg.verify.k_min,
                }),
                samples_csv_path: Some("thm11_samples.csv".into()),
            })
        }
        "thm12" => {
            let dist = distance_field(ctx.grid, DistanceTarget::WholeBoundary);
            let curve = verify::profile_distance_curve(ctx.field, &dist, ctx.profile, 0.5)?;
            let pass = curve.pass(ctx.cfg.verify.r_target, ctx.cfg.verify.eps_target);
            let csv = ctx.out_dir.join("thm12_curve.csv");
            write_samples_csv(&csv, "R,q_emp", &curve.bins)?;
            Ok(CheckOutcome {
                check: name.into(),
                pass,
                constants: json!({
                    "q_emp_at_target": curve.value_at(ctx.cfg.verify.r_target),
                    "strict_decreases": curve.strict_decreases,
                    "non_increasing": curve.is_non_increasing(),
                    "r_target": ctx.cfg.verify.r_target,
                    "eps_target": ctx.cfg.verify.eps_target,
                }),
                samples_csv_path: Some("thm12_curve.csv".into()),
            })
        }
        "thm14" => {
            let wc = shifted_constants(ctx)?;
            let dist_plus = distance_field(ctx.grid, DistanceTarget::PositivePartBoundary);
            let (shifted, dist) = shifted_right_half(ctx.field, &dist_plus);
            let r0 = verify::saturation_radius(&shifted, &dist, wc.q_star)
                .ok_or_else(|| RunError::Check("no saturation radius: |û| never drops below q*".into()))?;
            let slack = 10.0 * h * h;
            let report = comparison::pointwise_bound_check(&shifted, &dist, wc.c, wc.q_star, r0, slack)?;
            let q_grid: Vec<f64> = (0..30).map(|i| wc.q_star * 0.85f64.powi(i)).collect();
            let rq = verify::rq_curve(&shifted, &dist, &q_grid)?;
            let envelope = rq.envelope(near_exclusion.max(r0), bin_width).ok();
            let csv = ctx.out_dir.join("thm14_bound.csv");
            let mut out = String::from("R,empirical,phi0\n");
            for row in &report.rows {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", row.radius, row.empirical, row.phi0));
            }
            std::fs::write(&csv, out).map_err(io_err(&csv))?;
            Ok(CheckOutcome {
                check: name.into(),
                pass: report.pass && rq.is_non_increasing_in_q(),
                constants: json!({
                    "c": wc.c,
                    "q_star": wc.q_star,
                    "w_bar": wc.w_bar,
                    "r0": r0,
                    "slack": slack,
                    "worst_margin": report.worst_margin,
                    "rq_envelope_k": envelope.as_ref().map(|f| f.k),
                    "rq_envelope_K": envelope.as_ref().map(|f| f.big_k),
                }),
                samples_csv_path: Some("thm14_bound.csv".into()),
            })
        }
        "lemma32" => {
            let (k, big_k) = ctx.profile.decay_constants()?;
            let l = (ctx.cfg.profile.l_max - 1.0).min(15.0);
            let pr = ctx.profile;
            let f = crate::energy::Slice1d::from_fn(l, ctx.cfg.profile.h, |s| 1.0 - pr.eval(s.abs()));
            let chk = verify::sup_interpolation_check(&f, k, big_k);
            let csv = ctx.out_dir.join("lemma32_slice.csv");
            let rows: Vec<(f64, f64)> = (0..f.values.len()).map(|i| (f.s(i), f.values[i])).collect();
            write_samples_csv(&csv, "s,f", &rows)?;
            Ok(CheckOutcome {
                check: name.into(),
                pass: chk.pass,
                constants: json!({
                    "k": k,
                    "K": big_k,
                    "C2": chk.c2,
                    "sup_norm": chk.sup_norm,
                    "bound": chk.bound,
                    "hypothesis_ok": chk.hypothesis_ok,
                }),
                samples_csv_path: Some("lemma32_slice.csv".into()),
            })
        }
        "sigma" => {
            let wc = shifted_constants(ctx)?;
            let dist_plus = distance_field(ctx.grid, DistanceTarget::PositivePartBoundary);
            let (shifted, dist) = shifted_right_half(ctx.field, &dist_plus);
            // deepest right-half node
            let grid = ctx.grid;
            let mut x0 = (0.0, 0.0);
            let mut depth = 0.0f64;
            for &id in grid.interior() {
                if dist.get(id) > depth {
                    depth = dist.get(id);
                    x0 = grid.coords(id);
                }
            }
            let q_bar = 0.5 * wc.q_star;
            let lambda = 1.0;
            let r_bar = (wc.q_star - q_bar) / ctx.m0_observed.max(1e-6);
            let j_max = ((depth - r_bar) / lambda - 1.0).floor();
            if j_max < 0.0 {
                return Err(RunError::Check(format!(
                    "domain too shallow for level-set balls (depth {depth:.2})"
                )));
            }
            let diag = verify::level_set_growth(&shifted, x0, q_bar, lambda, r_bar, j_max as usize)?;
            let csv = ctx.out_dir.join("sigma_curve.csv");
            let rows: Vec<(f64, f64)> =
                diag.sigma.iter().enumerate().map(|(j, &s)| (j as f64, s)).collect();
            write_samples_csv(&csv, "j,sigma", &rows)?;
            Ok(CheckOutcome {
                check: name.into(),
                pass: diag.core_is_empty(),
                constants: json!({
                    "x0": [x0.0, x0.1],
                    "q_bar": q_bar,
                    "lambda": lambda,
                    "r_bar": r_bar,
                    "sigma0": diag.sigma[0],
                    "j_max": j_max,
                }),
                samples_csv_path: Some("sigma_curve.csv".into()),
            })
        }
        other => Err(RunError::Check(format!("unknown check `{other}`"))),
    }
}

/// Full pipeline: profile → solve → requested checks → artifacts.
///
/// `preloaded_field` skips the solve stage and post-processes the given
/// field instead.
pub fn run(cfg: &ExperimentConfig, preloaded_field: Option<Field>) -> Result<RunOutput, RunError> {
    let out_dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut timings: Vec<(String, f64)> = Vec::new();

    let t = Instant::now();
    let potential = cfg.build_potential()?;
    let pr = heteroclinic(&potential, cfg.profile.l_max, cfg.profile.h)?;
    write_profile_artifacts(&out_dir, &pr)?;
    timings.push(("profile".into(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let domain = cfg.build_domain()?;
    let grid = Grid::build(&domain, cfg.grid.h)?;
    let bd = match cfg.bc.kind.as_str() {
        "profile" => BoundaryData::from_profile(&grid, &pr, cfg.bc.scale),
        _ => {
            let field = read_field_csv(&grid, cfg.bc.path.as_ref().unwrap())?;
            BoundaryData::from_values(&grid, field.values().to_vec())
        }
    };
    let (field, solve_report) = match preloaded_field {
        Some(f) => {
            let m0 = observed_c1_bound(&f);
            let report = SolveReport {
                iterations: 0,
                final_residual: crate::solver::residual_norm(&f, &potential)?,
                energy_trace: vec![],
                oddness_residual: f.oddness_residual(),
                clamp_activations: 0,
                clamp_projection_coactivations: 0,
                min_u_positive_part: f64::NAN,
                m0_observed: m0,
                converged: true,
                tau_final: f64::NAN,
            };
            (f, report)
        }
        None => {
            let scfg = cfg.build_solve_config();
            let init = Field::from_fn(Arc::clone(&grid), |x1, _| pr.eval(x1));
            let every = cfg.solver.checkpoint_every;
            let mut checkpoint_err: Option<RunError> = None;
            let (f, rep) = solve_dirichlet_monitored(&grid, &potential, &bd, &scfg, Some(&init), |it, u| {
                if every > 0 && it % every == 0 && checkpoint_err.is_none() {
                    let path = out_dir.join(format!("checkpoint_{it:05}.csv"));
                    if let Err(e) = write_field_csv(&path, u) {
                        checkpoint_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = checkpoint_err {
                return Err(e);
            }
            (f, rep)
        }
    };
    write_field_csv(&out_dir.join("field.csv"), &field)?;
    write_json(&out_dir.join("solve.json"), &serde_json::to_value(&solve_report).unwrap())?;
    timings.push(("solve".into(), t.elapsed().as_secs_f64()));

    let ctx = CheckContext {
        cfg,
        potential: &potential,
        profile: &pr,
        grid: &grid,
        field: &field,
        m0_observed: solve_report.m0_observed,
        out_dir: &out_dir,
    };
    let mut outcomes = Vec::new();
    for check in &cfg.verify.checks {
        let t = Instant::now();
        let outcome = run_check(&ctx, check)?;
        timings.push((format!("verify:{check}"), t.elapsed().as_secs_f64()));
        println!(
            "check {}: {}",
            outcome.check,
            if outcome.pass { "PASS" } else { "FAIL" }
        );
        outcomes.push(outcome);
    }

    let all_pass = outcomes.iter().all(|o| o.pass);
    let report = json!({
        "config": serde_json::to_value(cfg).unwrap(),
        "seed": cfg.run.seed,
        "solve": serde_json::to_value(&solve_report).unwrap(),
        "checks": outcomes,
        "artifacts": {
            "field_csv": "field.csv",
            "profile_csv": "profile.csv",
            "profile_json": "profile.json",
            "solve_json": "solve.json",
        },
        "pass": all_pass,
    });
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &report)?;
    let timing_value = json!({
        "stages": timings.iter().map(|(n, s)| json!({"stage": n, "seconds": s})).collect::<Vec<_>>(),
    });
    write_json(&out_dir.join("timings.json"), &timing_value)?;

    Ok(RunOutput { report_path, pass: all_pass, converged: solve_report.converged })
}

/// Sweep result entry.
#[derive(Debug, serde::Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub pass: bool,
    pub converged: bool,
    pub report: String,
}

/// Runs the config once per parameter value over a bounded worker pool.
/// `param` is a dotted `section.key`; each run writes under
/// `<output.dir>/sweep/<param>=<value>/`.
pub fn sweep(
    base: &ExperimentConfig,
    param: &str,
    values: &[String],
    jobs: usize,
) -> Result<Vec<SweepEntry>, RunError> {
    let Some((section, key)) = param.split_once('.') else {
        return Err(RunError::Check(format!("sweep parameter `{param}` must be section.key")));
    };
    let base_dir = base.output.dir.clone();
    let mut configs = Vec::new();
    for value in values {
        let mut tree: toml::Value = toml::Value::try_from(base).map_err(|e| RunError::Check(e.to_string()))?;
        crate::config::apply_env_overrides(
            &mut tree,
            std::iter::once((format!("ACLAB_{}_{}", section.to_uppercase(), key.to_uppercase()), value.clone())),
        )?;
        let mut cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let safe: String = value.chars().map(|c| if c == '/' || c == '\\' { '_' } else { c }).collect();
        cfg.output.dir = base_dir.join("sweep").join(format!("{param}={safe}"));
        cfg.validate()?;
        configs.push((value.clone(), cfg));
    }

    let next = AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<RunOutput, RunError>>>> =
        (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
    let workers = jobs.clamp(1, configs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let out = run(&configs[i].1, None);
                *results[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut entries = Vec::new();
    for ((value, _), cell) in configs.iter().zip(results) {
        let out = cell.into_inner().unwrap().expect("worker finished")?;
        entries.push(SweepEntry {
            value: value.clone(),
            pass: out.pass,
            converged: out.converged,
            report: out.report_path.display().to_string(),
        });
    }
    let summary = json!({ "param": param, "runs": entries });
    let path = base_dir.join("sweep").join("sweep.json");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write_json(&path, &summary)?;
    Ok(entries)
}

/// Writes CSV and JSON artifacts for the standalone spectrum subcommand.
pub fn spectrum_artifacts(cfg: &ExperimentConfig) -> Result<serde_json::Value, RunError> {
    let out_dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let p = cfg.build_potential()?;
    let pr = heteroclinic(&p, cfg.profile.l_max, cfg.profile.h)?;
    let sr = crate::spectral::analyze(&pr, cfg.profile.l_max, cfg.profile.h, None)?;
    let summary = json!({
        "lambda_even": sr.lambda_even,
        "lambda_odd": sr.lambda_odd,
        "c1_sq": sr.c1_sq,
        "q0": sr.q0,
        "essential_edge": sr.essential_edge,
        "m_dprime": sr.m_dprime,
        "l": sr.l,
        "h": sr.h,
    });
    write_json(&out_dir.join("spectrum.json"), &summary)?;
    let n = sr.vec_even.len();
    let mut csv = String::from("s,even,odd\n");
    for i in (1..n).rev() {
        let s = -(i as f64) * sr.h;
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", s, sr.vec_even[i], -sr.vec_odd[i]));
    }
    for i in 0..n {
        let s = i as f64 * sr.h;
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", s, sr.vec_even[i], sr.vec_odd[i]));
    }
    let path = out_dir.join("eigenvectors.csv");
    std::fs::write(&path, csv).map_err(io_err(&path))?;
    Ok(summary)
}
