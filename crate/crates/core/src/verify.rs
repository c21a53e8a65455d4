//! Post-processing checks on solved fields: exponential saturation envelopes,
//! profile-distance curves, the sup-norm interpolation inequality for
//! decaying slices, level-set growth diagnostics, and empirical `R(q)`
//! curves. Fits are envelope fits: the regression sets the rate, then the
//! prefactor is inflated until the bound holds at every retained sample.

use crate::energy::Slice1d;
use crate::geometry::{Field, NodeKind};
use crate::profile::Profile1d;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("need at least {need} samples beyond the exclusion radius, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Comparison(#[from] crate::comparison::ComparisonError),
}

/// Envelope `e ≤ K e^{-k d}` fitted from per-bin maxima.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayFit {
    pub k: f64,
    pub big_k: f64,
    pub bin_width: f64,
    pub near_exclusion: f64,
    /// All retained samples sit below `1e-14`; `k` is `+∞` by convention.
    pub degenerate: bool,
    pub samples_used: usize,
}

const DEGENERATE_FLOOR: f64 = 1e-14;
const MIN_ENVELOPE_SAMPLES: usize = 20;

/// Fits `(k, K)` to `(d, e)` samples: `k` from least squares on the log of
/// per-bin maxima, `K = max e_i e^{k d_i}` so the envelope holds pointwise.
pub fn fit_envelope(
    samples: &[(f64, f64)],
    near_exclusion: f64,
    bin_width: f64,
) -> Result<DecayFit, VerifyError> {
    if !(bin_width > 0.0) {
        return Err(VerifyError::InvalidArgument("bin_width must be positive".into()));
    }
    let retained: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(d, _)| d >= near_exclusion)
        .cloned()
        .collect();
    if retained.len() < MIN_ENVELOPE_SAMPLES {
        return Err(VerifyError::TooFewSamples { got: retained.len(), need: MIN_ENVELOPE_SAMPLES });
    }
    if retained.iter().all(|&(_, e)| e < DEGENERATE_FLOOR) {
        return Ok(DecayFit {
            k: f64::INFINITY,
            big_k: 0.0,
            bin_width,
            near_exclusion,
            degenerate: true,
            samples_used: retained.len(),
        });
    }
    // bin maxima, keyed by the argmax sample's own abscissa
    let d0 = retained.iter().map(|&(d, _)| d).fold(f64::INFINITY, f64::min);
    let mut bins: std::collections::BTreeMap<i64, (f64, f64)> = std::collections::BTreeMap::new();
    for &(d, e) in &retained {
        let key = ((d - d0) / bin_width).floor() as i64;
        let entry = bins.entry(key).or_insert((d, e));
        if e > entry.1 {
            *entry = (d, e);
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (_, (d, e)) in bins {
        if e > 0.0 {
            xs.push(d);
            ys.push(e.ln());
        }
    }
    if xs.len() < 2 {
        return Err(VerifyError::TooFewSamples { got: xs.len(), need: 2 });
    }
    let (_, slope) = crate::numerics::linear_fit(&xs, &ys)
        .ok_or(VerifyError::InvalidArgument("degenerate abscissa in envelope fit".into()))?;
    let k = -slope;
    let mut big_k = 0.0f64;
    for &(d, e) in &retained {
        if e > 0.0 {
            big_k = big_k.max(e * (k * d).exp());
        }
    }
    Ok(DecayFit { k, big_k, bin_width, near_exclusion, degenerate: false, samples_used: retained.len() })
}

impl DecayFit {
    /// Envelope value at distance `d`.
    pub fn envelope(&self, d: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            self.big_k * (-self.k * d).exp()
        }
    }

    pub fn holds_for(&self, samples: &[(f64, f64)]) -> bool {
        samples
            .iter()
            .filter(|&&(d, _)| d >= self.near_exclusion)
            .all(|&(d, e)| e <= self.envelope(d) * (1.0 + 1e-12) + 1e-300)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMode {
    ValueOnly,
    /// Adds the centered-difference gradient magnitude to the deviation.
    WithGradient,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SaturationCheck {
    pub fit: DecayFit,
    pub min_u_positive_part: f64,
    pub k_min: f64,
    pub pass: bool,
    #[serde(skip)]
    pub samples: Vec<(f64, f64)>,
}

/// Saturation envelope over the right half: samples `|u - 1|` (optionally
/// plus `|∇u|`) against the distance to `∂(Ω⁺)` and fits the decay. Passes
/// when the fitted rate reaches `k_min` and `u ≥ -10·tol` on the right half.
pub fn saturation_check(
    u: &Field,
    dist_plus: &Field,
    mode: EnvelopeMode,
    k_min: f64,
    tol: f64,
    near_exclusion: f64,
    bin_width: f64,
) -> Result<SaturationCheck, VerifyError> {
    let grid = u.grid();
    let mut samples = Vec::new();
    let mut min_u = f64::INFINITY;
    for &id in grid.interior() {
        let (x1, _) = grid.coords(id);
        if x1 <= 0.0 {
            continue;
        }
        min_u = min_u.min(u.get(id));
        let mut e = (u.get(id) - 1.0).abs();
        if mode == EnvelopeMode::WithGradient {
            let (ix, jy) = grid.split(id);
            let gx = (u.get(grid.idx(ix + 1, jy)) - u.get(grid.idx(ix - 1, jy))) / (2.0 * grid.h);
            let gy = (u.get(grid.idx(ix, jy + 1)) - u.get(grid.idx(ix, jy - 1))) / (2.0 * grid.h);
            e += (gx * gx + gy * gy).sqrt();
        }
        samples.push((dist_plus.get(id), e));
    }
    let fit = fit_envelope(&samples, near_exclusion, bin_width)?;
    let pass = (fit.degenerate || fit.k >= k_min) && min_u >= -10.0 * tol;
    Ok(SaturationCheck { fit, min_u_positive_part: min_u, k_min, pass, samples })
}

/// Non-increasing curve `R ↦ max_{d(x,∂Ω) ≥ R} |u - ū(x₁)|`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProfileDistanceCurve {
    /// `(R, q_emp(R))` at bin edges, non-increasing by construction.
    pub bins: Vec<(f64, f64)>,
    pub strict_decreases: usize,
}

pub fn profile_distance_curve(
    u: &Field,
    dist: &Field,
    pr: &Profile1d,
    bin_width: f64,
) -> Result<ProfileDistanceCurve, VerifyError> {
    if !(bin_width > 0.0) {
        return Err(VerifyError::InvalidArgument("bin_width must be positive".into()));
    }
    let grid = u.grid();
    let mut samples: Vec<(f64, f64)> = grid
        .interior()
        .iter()
        .map(|&id| {
            let (x1, _) = grid.coords(id);
            (dist.get(id), (u.get(id) - pr.eval(x1)).abs())
        })
        .collect();
    if samples.is_empty() {
        return Err(VerifyError::TooFewSamples { got: 0, need: 1 });
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let d_max = samples.last().unwrap().0;
    let n_bins = (d_max / bin_width).floor() as usize + 1;
    // suffix maxima evaluated at every bin edge R = j·bin_width
    let mut bins = Vec::with_capacity(n_bins);
    let mut idx = samples.len();
    let mut running = f64::NEG_INFINITY;
    let mut suffix: Vec<f64> = vec![0.0; samples.len()];
    for i in (0..samples.len()).rev() {
        running = running.max(samples[i].1);
        suffix[i] = running;
        idx = i;
    }
    let _ = idx;
    for j in 0..n_bins {
        let r = j as f64 * bin_width;
        let pos = samples.partition_point(|&(d, _)| d < r);
        if pos >= samples.len() {
            break;
        }
        bins.push((r, suffix[pos]));
    }
    let strict_decreases = bins.windows(2).filter(|w| w[1].1 < w[0].1).count();
    Ok(ProfileDistanceCurve { bins, strict_decreases })
}

impl ProfileDistanceCurve {
    pub fn is_non_increasing(&self) -> bool {
        self.bins.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    /// `q_emp` at the largest bin edge ≤ `r`.
    pub fn value_at(&self, r: f64) -> Option<f64> {
        self.bins.iter().rev().find(|&&(edge, _)| edge <= r).map(|&(_, q)| q)
    }

    pub fn pass(&self, r_target: f64, eps_target: f64) -> bool {
        let deep = self
            .bins
            .iter()
            .filter(|&&(edge, _)| edge >= r_target)
            .map(|&(_, q)| q)
            .fold(f64::INFINITY, f64::min);
        self.is_non_increasing() && self.strict_decreases >= 3 && deep <= eps_target
    }
}

/// Sup-norm interpolation check for a decaying slice: with the envelope
/// hypothesis `|f|, |f'| ≤ K e^{-k|s|}`, asserts
/// `‖f‖_∞ ≤ (3K)^{1/3} ‖f‖₂^{2/3}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InterpolationCheck {
    pub hypothesis_ok: bool,
    pub c2: f64,
    pub sup_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn sup_interpolation_check(f: &Slice1d, k: f64, big_k: f64) -> InterpolationCheck {
    let m = f.values.len() - 1;
    let mut hypothesis_ok = true;
    // finite differences carry O(h) error at the one-sided ends
    let tol = 1.0 + f.h.max(1e-6);
    for i in 0..=m {
        let s = f.s(i);
        let envelope = big_k * (-k * s.abs()).exp();
        let deriv = if i == 0 {
            (f.values[1] - f.values[0]) / f.h
        } else if i == m {
            (f.values[m] - f.values[m - 1]) / f.h
        } else {
            (f.values[i + 1] - f.values[i - 1]) / (2.0 * f.h)
        };
        if f.values[i].abs() > envelope * tol + 1e-300 || deriv.abs() > envelope * tol + 1e-300 {
            hypothesis_ok = false;
        }
    }
    let c2 = (3.0 * big_k).cbrt();
    let sup_norm = f.norm_inf();
    let bound = c2 * f.norm_l2().powf(2.0 / 3.0);
    InterpolationCheck { hypothesis_ok, c2, sup_norm, bound, pass: hypothesis_ok && sup_norm <= bound * (1.0 + 1e-12) }
}

/// Level-set areas `σ_j = |{|u| > q̄} ∩ B(x₀, R̄ + jλ)|`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LevelSetDiagnostic {
    pub x0: (f64, f64),
    pub q_bar: f64,
    pub lambda: f64,
    pub r_bar: f64,
    pub sigma: Vec<f64>,
}

pub fn level_set_growth(
    u: &Field,
    x0: (f64, f64),
    q_bar: f64,
    lambda: f64,
    r_bar: f64,
    j_max: usize,
) -> Result<LevelSetDiagnostic, VerifyError> {
    let grid = u.grid();
    let r_outer = r_bar + (j_max as f64 + 1.0) * lambda;
    // every ball must stay inside the domain
    for id in 0..grid.len() {
        let (x1, x2) = grid.coords(id);
        let r = ((x1 - x0.0).powi(2) + (x2 - x0.1).powi(2)).sqrt();
        if r <= r_outer && grid.kind(id) != NodeKind::Interior {
            return Err(VerifyError::InvalidArgument(format!(
                "ball of radius {r_outer:.3} around ({}, {}) leaves the interior",
                x0.0, x0.1
            )));
        }
    }
    let h2 = grid.h * grid.h;
    let mut sigma = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let radius = r_bar + j as f64 * lambda;
        let mut area = 0.0;
        for &id in grid.interior() {
            let (x1, x2) = grid.coords(id);
            let r = ((x1 - x0.0).powi(2) + (x2 - x0.1).powi(2)).sqrt();
            if r < radius && u.get(id).abs() > q_bar {
                area += h2;
            }
        }
        sigma.push(area);
    }
    Ok(LevelSetDiagnostic { x0, q_bar, lambda, r_bar, sigma })
}

impl LevelSetDiagnostic {
    /// True when the center ball carries no level set at all, so the
    /// geometric growth demand never starts.
    pub fn core_is_empty(&self) -> bool {
        self.sigma[0] == 0.0
    }
}

/// Empirical map `q ↦ R(q)`: the smallest radius such that `|û| < q`
/// wherever the distance exceeds it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RqCurve {
    /// `(q, R(q))`, non-increasing in `q`.
    pub pairs: Vec<(f64, f64)>,
    /// Suffix maxima `(R, sup_{d ≥ R} |û|)` backing the curve.
    pub suffix: Vec<(f64, f64)>,
}

pub fn rq_curve(u_shifted: &Field, dist: &Field, q_grid: &[f64]) -> Result<RqCurve, VerifyError> {
    let grid = u_shifted.grid();
    let mut samples: Vec<(f64, f64)> = grid
        .interior()
        .iter()
        .map(|&id| (dist.get(id), u_shifted.get(id).abs()))
        .collect();
    if samples.is_empty() {
        return Err(VerifyError::TooFewSamples { got: 0, need: 1 });
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut suffix = vec![0.0f64; samples.len()];
    let mut running = f64::NEG_INFINITY;
    for i in (0..samples.len()).rev() {
        running = running.max(samples[i].1);
        suffix[i] = running;
    }
    let curve: Vec<(f64, f64)> = samples.iter().zip(&suffix).map(|(&(d, _), &m)| (d, m)).collect();
    let mut pairs = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if !(q > 0.0) {
            return Err(VerifyError::InvalidArgument("q grid must be positive".into()));
        }
        // smallest sampled distance whose suffix max already sits below q
        let mut r = match suffix.first() {
            Some(&m) if m < q => 0.0,
            _ => f64::INFINITY,
        };
        if r.is_infinite() {
            for (i, &m) in suffix.iter().enumerate() {
                if m < q {
                    r = samples[i].0;
                    break;
                }
            }
        }
        if r.is_infinite() {
            // never satisfied on the sampled range
            r = samples.last().unwrap().0;
        }
        pairs.push((q, r));
    }
    Ok(RqCurve { pairs, suffix: curve })
}

impl RqCurve {
    pub fn is_non_increasing_in_q(&self) -> bool {
        let mut sorted = self.pairs.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        sorted.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    /// Envelope fit of the suffix curve `(R, sup_{d≥R} |û|)`.
    pub fn envelope(&self, near_exclusion: f64, bin_width: f64) -> Result<DecayFit, VerifyError> {
        fit_envelope(&self.suffix, near_exclusion, bin_width)
    }
}

/// Smallest distance beyond which `|û|` stays below `threshold` (the measured
/// saturation radius; `None` when even the deepest nodes exceed it).
pub fn saturation_radius(u_shifted: &Field, dist: &Field, threshold: f64) -> Option<f64> {
    let grid = u_shifted.grid();
    let mut samples: Vec<(f64, f64)> = grid
        .interior()
        .iter()
        .map(|&id| (dist.get(id), u_shifted.get(id).abs()))
        .collect();
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best: Option<f64> = None;
    let mut running = f64::NEG_INFINITY;
    for i in (0..samples.len()).rev() {
        running = running.max(samples[i].1);
        if running < threshold {
            best = Some(samples[i].0);
        }
    }
    best
}
