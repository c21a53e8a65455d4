//! The odd increasing connection `ū` between the two wells, built from the
//! first integral `ū' = sqrt(2 W(ū))`, together with its exponential decay
//! envelope toward saturation.

use crate::numerics;
use crate::potential::{Potential, PotentialError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("W({u}) = {w} ≤ 0 inside (0,1): no monotone connection")]
    NonPositiveWell { u: f64, w: f64 },
    #[error("quadrature stalled at u = {u} before matching the far field (|u-1| = {gap:.3e})")]
    QuadratureStalled { u: f64, gap: f64 },
    #[error("grid too short for a decay fit: {usable} usable samples, need at least {needed}")]
    GridTooShort { usable: usize, needed: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Sampled heteroclinic on a uniform grid over `[0, l_max]`, odd-extended.
///
/// `values[i] = ū(i h)` and `derivs[i] = ū'(i h) = sqrt(2 W(ū(i h)))`. The
/// profile saturates to exactly 1 where the connection is beyond double
/// precision resolution.
#[derive(Debug, Clone)]
pub struct Profile1d {
    potential: Potential,
    h: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    decay: Option<(f64, f64)>,
    energy: f64,
}

const DECAY_FLOOR: f64 = 1e-12;
const MIN_FIT_SAMPLES: usize = 10;

/// Builds the odd connection of `v'' = W'(v)` with `v(±∞) = ±1` on a uniform
/// grid of spacing `h` over `[-l_max, l_max]`.
///
/// The map `s(u) = ∫_0^u dv / sqrt(2 W(v))` is accumulated by adaptive
/// midpoint quadrature over a u-grid that clusters geometrically toward the
/// saturation value, then inverted onto the uniform grid by cubic Hermite
/// interpolation with the exact slopes `du/ds = sqrt(2 W(u))`.
pub fn heteroclinic(p: &Potential, l_max: f64, h: f64) -> Result<Profile1d, ProfileError> {
    if !(h > 0.0) || !(l_max > h) {
        return Err(ProfileError::InvalidArgument(format!("need 0 < h < l_max, got h={h}, l_max={l_max}")));
    }
    let p0 = p.with_shift(0.0);
    let speed = |u: f64| -> Result<f64, ProfileError> {
        let w = p0.w(u)?;
        if w <= 0.0 && u < 1.0 {
            return Err(ProfileError::NonPositiveWell { u, w });
        }
        Ok((2.0 * w.max(0.0)).sqrt())
    };

    // Table of (s_j, u_j) pairs with step control Δs ≈ ds_target.
    let ds_target = (0.5 * h).min(0.02);
    let mut s_tab = vec![0.0f64];
    let mut u_tab = vec![0.0f64];
    let mut d_tab = vec![speed(0.0)?];
    let mut u = 0.0f64;
    let mut s = 0.0f64;
    while s < l_max {
        let v = speed(u)?;
        let mut du = (ds_target * v).min(0.05 * (1.0 - u).max(f64::MIN_POSITIVE));
        if u + du <= u {
            break; // saturated at double precision
        }
        if u + du > 1.0 {
            du = 1.0 - u;
            if du <= 0.0 {
                break;
            }
        }
        let u_next = u + du;
        let integrand = |x: f64| {
            let w = p0.w(x).unwrap_or(f64::INFINITY);
            1.0 / (2.0 * w).sqrt()
        };
        let ds = numerics::adaptive_midpoint(&integrand, u, u_next, 1e-13, 40);
        if !ds.is_finite() || ds <= 0.0 {
            break;
        }
        s += ds;
        u = u_next;
        s_tab.push(s);
        u_tab.push(u);
        d_tab.push(speed(u)?);
    }
    if s < l_max {
        let gap = 1.0 - u;
        if gap > 1e-9 {
            return Err(ProfileError::QuadratureStalled { u, gap });
        }
    }

    // Resample onto the uniform grid.
    let n = (l_max / h).round() as usize;
    let mut values = Vec::with_capacity(n + 1);
    let mut derivs = Vec::with_capacity(n + 1);
    let mut j = 0usize;
    for i in 0..=n {
        let si = i as f64 * h;
        if si > *s_tab.last().unwrap() {
            values.push(1.0);
            derivs.push(0.0);
            continue;
        }
        while j + 1 < s_tab.len() && s_tab[j + 1] < si {
            j += 1;
        }
        let (s0, s1) = (s_tab[j], s_tab[j + 1.min(s_tab.len() - 1 - j)]);
        let ui = if s1 > s0 {
            let mut d0 = d_tab[j];
            let mut d1 = d_tab[j + 1];
            numerics::monotone_clamp((u_tab[j + 1] - u_tab[j]) / (s1 - s0), &mut d0, &mut d1);
            numerics::hermite(si, s0, s1, u_tab[j], u_tab[j + 1], d0, d1)
        } else {
            u_tab[j]
        };
        let ui = ui.clamp(0.0, 1.0);
        values.push(ui);
        derivs.push(speed(ui)?);
    }

    // Transition energy ∫ (ū'²/2 + W(ū)) ds = ∫_{-1}^{1} sqrt(2 W) du.
    let energy = numerics::adaptive_midpoint(
        &|x: f64| (2.0 * p0.w(x).unwrap_or(0.0).max(0.0)).sqrt(),
        -1.0,
        1.0,
        1e-13,
        40,
    );

    let mut pr = Profile1d { potential: p0, h, values, derivs, decay: None, energy };
    pr.decay = pr.fit_decay().ok();
    Ok(pr)
}

impl Profile1d {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn l_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// Node values on `[0, l_max]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node derivatives `ū'` on `[0, l_max]`.
    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Transition energy of the full connection.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Fitted `(k, K)` with `|ū(s)-1| + |ū'(s)| ≤ K e^{-k s}` at every node.
    pub fn decay_constants(&self) -> Result<(f64, f64), ProfileError> {
        match self.decay {
            Some(kk) => Ok(kk),
            None => self.fit_decay(),
        }
    }

    fn envelope_samples(&self) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .zip(&self.derivs)
            .enumerate()
            .map(|(i, (&u, &du))| (i as f64 * self.h, (1.0 - u).abs() + du.abs()))
            .collect()
    }

    fn fit_decay(&self) -> Result<(f64, f64), ProfileError> {
        let samples = self.envelope_samples();
        let s_tail = samples
            .iter()
            .rev()
            .find(|&&(_, e)| e >= DECAY_FLOOR)
            .map(|&(s, _)| s)
            .unwrap_or(0.0);
        let lo = 0.5 * s_tail;
        let window: Vec<(f64, f64)> = samples
            .iter()
            .filter(|&&(s, e)| s >= lo && s <= s_tail && e >= DECAY_FLOOR)
            .cloned()
            .collect();
        if window.len() < MIN_FIT_SAMPLES {
            return Err(ProfileError::GridTooShort { usable: window.len(), needed: MIN_FIT_SAMPLES });
        }
        let xs: Vec<f64> = window.iter().map(|&(s, _)| s).collect();
        let ys: Vec<f64> = window.iter().map(|&(_, e)| e.ln()).collect();
        let (_, slope) = numerics::linear_fit(&xs, &ys)
            .ok_or(ProfileError::GridTooShort { usable: window.len(), needed: MIN_FIT_SAMPLES })?;
        let k = -slope;
        // inflate K so the envelope dominates at every node
        let mut big_k = 0.0f64;
        for &(s, e) in &samples {
            if e > 0.0 {
                big_k = big_k.max(e * (k * s).exp());
            }
        }
        Ok((k, big_k))
    }

    /// `ū(s)`, odd-extended, constant ±1 beyond the grid.
    pub fn eval(&self, s: f64) -> f64 {
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        sign * self.eval_abs(s.abs()).0
    }

    /// `ū'(s)` (even in `s`), 0 beyond the grid.
    pub fn eval_deriv(&self, s: f64) -> f64 {
        self.eval_abs(s.abs()).1
    }

    fn eval_abs(&self, s: f64) -> (f64, f64) {
        let n = self.values.len() - 1;
        let t = s / self.h;
        if t >= n as f64 {
            return (*self.values.last().unwrap(), *self.derivs.last().unwrap());
        }
        let i = t.floor() as usize;
        let (s0, s1) = (i as f64 * self.h, (i + 1) as f64 * self.h);
        if s == s0 {
            return (self.values[i], self.derivs[i]);
        }
        let mut d0 = self.derivs[i];
        let mut d1 = self.derivs[i + 1];
        numerics::monotone_clamp((self.values[i + 1] - self.values[i]) / self.h, &mut d0, &mut d1);
        let v = numerics::hermite(s, s0, s1, self.values[i], self.values[i + 1], d0, d1);
        // ū'' = W'(ū): interpolate the slope with its own exact derivative
        let dd0 = self.potential.dw(self.values[i]).unwrap_or(0.0);
        let dd1 = self.potential.dw(self.values[i + 1]).unwrap_or(0.0);
        let d = numerics::hermite(s, s0, s1, self.derivs[i], self.derivs[i + 1], dd0, dd1);
        (v, d)
    }

    /// Finite-difference residual `|ū''_h - W'(ū)|` maximized over interior
    /// nodes that are not saturated.
    pub fn ode_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.values.len() - 1 {
            if self.values[i] >= 1.0 {
                continue;
            }
            let lap = (self.values[i + 1] - 2.0 * self.values[i] + self.values[i - 1]) / (self.h * self.h);
            let rhs = self.potential.dw(self.values[i]).unwrap_or(0.0);
            worst = worst.max((lap - rhs).abs());
        }
        worst
    }
}
