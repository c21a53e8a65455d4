//! Experiment configuration: a TOML file with dotted sections, environment
//! overrides under the `ACLAB_` prefix, and upfront validation that names the
//! offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, SymmetricDomain};
use crate::potential::{Potential, PotentialError};
use crate::solver::{SolveConfig, StepRule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub const VALID_CHECKS: [&str; 5] = ["thm11", "thm12", "thm14", "lemma32", "sigma"];

fn default_m() -> f64 {
    1.0
}
fn default_m0() -> f64 {
    2.5
}
fn default_scan_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Monotonicity threshold `M`.
    #[serde(default = "default_m")]
    pub m: f64,
    /// Range bound `m0` for the shifted-well constants.
    #[serde(default = "default_m0")]
    pub m0: f64,
    #[serde(default = "default_scan_step")]
    pub scan_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: String,
    pub x2_min: f64,
    pub x2_max: f64,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub w_start: Option<f64>,
    #[serde(default)]
    pub w_end: Option<f64>,
    #[serde(default)]
    pub w_neck: Option<f64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
}

fn default_l_max() -> f64 {
    20.0
}
fn default_profile_h() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_l_max")]
    pub l_max: f64,
    #[serde(default = "default_profile_h")]
    pub h: f64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec { l_max: default_l_max(), h: default_profile_h() }
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    500
}
fn default_scheme() -> String {
    "semi-implicit".into()
}
fn default_cg_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: default_tol(),
            max_iter: default_max_iter(),
            scheme: default_scheme(),
            cg_tol: default_cg_tol(),
            checkpoint_every: 0,
        }
    }
}

fn default_bc_kind() -> String {
    "profile".into()
}
fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    #[serde(default = "default_bc_kind")]
    pub kind: String,
    /// Steepening factor for the profile datum `g = ū(scale · x₁)`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for BcSpec {
    fn default() -> Self {
        BcSpec { kind: default_bc_kind(), scale: 1.0, path: None }
    }
}

fn default_k_min() -> f64 {
    1.0
}
fn default_eps_target() -> f64 {
    1e-2
}
fn default_r_target() -> f64 {
    8.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_k_min")]
    pub k_min: f64,
    #[serde(default = "default_eps_target")]
    pub eps_target: f64,
    #[serde(default = "default_r_target")]
    pub r_target: f64,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_out() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub bc: BcSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub run: RunSpec,
}

impl ExperimentConfig {
    /// Loads, applies `ACLAB_SECTION_KEY` environment overrides, validates.
    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut value: toml::Value =
            text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        apply_env_overrides(&mut value, std::env::vars())?;
        let cfg: ExperimentConfig =
            value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_no_env(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |key: &str, message: String| Err(ConfigError::Invalid { key: key.into(), message });

        match self.potential.kind.as_str() {
            "quartic" => {}
            "table" => {
                if self.potential.path.is_none() {
                    return fail("potential.path", "table potentials need a CSV path".into());
                }
            }
            other => return fail("potential.kind", format!("unknown kind `{other}` (quartic|table)")),
        }
        if !(self.potential.m0 > 0.0) {
            return fail("potential.m0", "must be positive".into());
        }

        let d = &self.domain;
        if !(d.x2_max > d.x2_min) {
            return fail("domain.x2_max", format!("must exceed x2_min = {}", d.x2_min));
        }
        match d.kind.as_str() {
            "strip" => {
                if d.half_width.is_none() {
                    return fail("domain.half_width", "strip domains need a half width".into());
                }
            }
            "trapezoid" => {
                if d.w_start.is_none() || d.w_end.is_none() {
                    return fail("domain.w_start", "trapezoid domains need w_start and w_end".into());
                }
            }
            "dumbbell" => {
                if d.w_end.is_none() || d.w_neck.is_none() {
                    return fail("domain.w_end", "dumbbell domains need w_end and w_neck".into());
                }
                if d.w_end < d.w_neck {
                    return fail("domain.w_neck", "neck cannot exceed the bulb width".into());
                }
            }
            "table" => {
                if d.path.is_none() {
                    return fail("domain.path", "table domains need a CSV path".into());
                }
            }
            other => {
                return fail("domain.kind", format!("unknown kind `{other}` (strip|dumbbell|trapezoid|table)"))
            }
        }

        let domain = self.build_domain()?;
        domain.validate()?;
        if !(self.grid.h > 0.0) {
            return fail("grid.h", "must be positive".into());
        }
        if self.grid.h > domain.min_width() / 4.0 {
            return fail(
                "grid.h",
                format!("h = {} exceeds min width / 4 = {}", self.grid.h, domain.min_width() / 4.0),
            );
        }

        if !(self.profile.h > 0.0 && self.profile.l_max > self.profile.h) {
            return fail("profile.h", "need 0 < h < l_max".into());
        }
        if !(self.solver.tol > 0.0) {
            return fail("solver.tol", "must be positive".into());
        }
        match self.solver.scheme.as_str() {
            "semi-implicit" | "explicit" => {}
            other => return fail("solver.scheme", format!("unknown scheme `{other}` (semi-implicit|explicit)")),
        }
        match self.bc.kind.as_str() {
            "profile" => {}
            "table" => {
                if self.bc.path.is_none() {
                    return fail("bc.path", "table boundary data needs a CSV path".into());
                }
            }
            other => return fail("bc.kind", format!("unknown kind `{other}` (profile|table)")),
        }
        for check in &self.verify.checks {
            if !VALID_CHECKS.contains(&check.as_str()) {
                return fail(
                    "verify.checks",
                    format!("unknown check `{check}`; valid checks: {}", VALID_CHECKS.join(", ")),
                );
            }
        }
        Ok(())
    }

    pub fn build_potential(&self) -> Result<Potential, ConfigError> {
        let p = match self.potential.kind.as_str() {
            "quartic" => Potential::quartic(),
            _ => Potential::from_table_csv(self.potential.path.as_ref().unwrap(), self.potential.m)?,
        };
        p.validate_double_well(self.potential.m0.max(2.0), 1e-3)?;
        Ok(p)
    }

    pub fn build_domain(&self) -> Result<SymmetricDomain, ConfigError> {
        let d = &self.domain;
        Ok(match d.kind.as_str() {
            "strip" => SymmetricDomain::strip(d.half_width.unwrap(), d.x2_min, d.x2_max),
            "trapezoid" => SymmetricDomain::trapezoid(d.w_start.unwrap(), d.w_end.unwrap(), d.x2_min, d.x2_max),
            "dumbbell" => SymmetricDomain::dumbbell(d.w_end.unwrap(), d.w_neck.unwrap(), d.x2_min, d.x2_max),
            _ => {
                let path = d.path.as_ref().unwrap();
                let (x2, w) = read_width_table(path)?;
                SymmetricDomain::from_width_table(x2, w, d.x2_min, d.x2_max)?
            }
        })
    }

    pub fn build_solve_config(&self) -> SolveConfig {
        SolveConfig {
            tol_residual: self.solver.tol,
            max_iterations: self.solver.max_iter,
            step: match self.solver.scheme.as_str() {
                "explicit" => StepRule::Explicit,
                _ => StepRule::SemiImplicit { cg_tol: self.solver.cg_tol },
            },
            m_prime: None,
            symmetry_projection: true,
            tau0: if self.solver.scheme == "explicit" { self.grid.h * self.grid.h / 8.0 } else { 1.0 },
            seed: self.run.seed,
        }
    }
}

fn read_width_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    let mut x2 = Vec::new();
    let mut w = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("x2")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(ConfigError::Parse(format!("width table row {}: expected x2,w", i + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| ConfigError::Parse(format!("row {}: {e}", i + 1)));
        x2.push(parse(parts[0])?);
        w.push(parse(parts[1])?);
    }
    Ok((x2, w))
}

/// Applies `ACLAB_<SECTION>_<KEY>=value` overrides onto the raw TOML tree.
/// The section is the first underscore-delimited token; the rest (lowercased)
/// is the key. Values parse as TOML scalars, falling back to strings;
/// comma-separated values become arrays for list-valued keys.
pub fn apply_env_overrides<I: Iterator<Item = (String, String)>>(
    value: &mut toml::Value,
    vars: I,
) -> Result<(), ConfigError> {
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix("ACLAB_") else { continue };
        let Some((section, key)) = rest.split_once('_') else { continue };
        let section = section.to_lowercase();
        let key = key.to_lowercase();
        let table = value
            .as_table_mut()
            .ok_or_else(|| ConfigError::Parse("config root is not a table".into()))?;
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()));
        let section_table = entry.as_table_mut().ok_or_else(|| ConfigError::Invalid {
            key: section.clone(),
            message: "cannot override a non-table section".into(),
        })?;
        let parsed: toml::Value = if key == "checks" {
            toml::Value::Array(
                raw.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| toml::Value::String(s.trim().to_string()))
                    .collect(),
            )
        } else if let Ok(i) = raw.parse::<i64>() {
            toml::Value::Integer(i)
        } else if let Ok(f) = raw.parse::<f64>() {
            toml::Value::Float(f)
        } else if let Ok(b) = raw.parse::<bool>() {
            toml::Value::Boolean(b)
        } else {
            toml::Value::String(raw.clone())
        };
        section_table.insert(key, parsed);
    }
    Ok(())
}
