//! Double-well potentials `W` and the convexity constants of the shifted
//! single-well problem.
//!
//! The built-in well is the quartic `W(u) = (1-u²)²/4`, even with
//! nondegenerate minima at ±1 and monotone beyond `|u| = 1`. Potentials can
//! also be tabulated (`u,w,dw,ddw` CSV). A `shift` moves the argument so the
//! same object can represent `Ŵ(v) = W(v + 1)`, the single-well form used by
//! the comparison machinery.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("query u={u} outside table range [{lo}, {hi}]")]
    OutOfDomain { u: f64, lo: f64, hi: f64 },
    #[error("invalid potential: {0}")]
    InvalidWell(String),
    #[error("table file: {0}")]
    Io(#[from] std::io::Error),
    #[error("table parse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone)]
struct TableData {
    u: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
    ddw: Vec<f64>,
}

impl TableData {
    fn locate(&self, u: f64) -> Result<usize, PotentialError> {
        let lo = self.u[0];
        let hi = *self.u.last().unwrap();
        if !(lo..=hi).contains(&u) {
            return Err(PotentialError::OutOfDomain { u, lo, hi });
        }
        // partition_point returns the first index with grid value > u
        let k = self.u.partition_point(|&g| g <= u);
        Ok(k.clamp(1, self.u.len() - 1) - 1)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Quartic,
    Table(Arc<TableData>),
}

/// An even double-well potential (possibly shifted) with its monotonicity
/// threshold `M`: `W'(u) ≥ 0` for `u ≥ M`.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: Kind,
    shift: f64,
    m_threshold: f64,
}

/// Convexity constants of the shifted well: `W'' ≥ c²` on `(-q*, q*)` and
/// `W(q* sign q) ≤ W(q) ≤ w_bar` for `|q| ∈ [q*, m0]`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WellConstants {
    pub c: f64,
    pub q_star: f64,
    pub w_bar: f64,
}

impl WellConstants {
    pub fn c_sq(&self) -> f64 {
        self.c * self.c
    }
}

impl Potential {
    /// The quartic well `W(u) = (1-u²)²/4` with minima at ±1 (`M = 1`).
    pub fn quartic() -> Self {
        Potential { kind: Kind::Quartic, shift: 0.0, m_threshold: 1.0 }
    }

    /// The quartic well shifted so the positive minimum sits at 0.
    pub fn quartic_shifted() -> Self {
        Potential { kind: Kind::Quartic, shift: 1.0, m_threshold: 1.0 }
    }

    /// Same potential evaluated at `u + shift`.
    pub fn with_shift(&self, shift: f64) -> Self {
        Potential { kind: self.kind.clone(), shift, m_threshold: self.m_threshold }
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Monotonicity threshold `M` (clamping uses `M' = max{M, max g}`).
    pub fn m_threshold(&self) -> f64 {
        self.m_threshold
    }

    /// Table bounds in the shifted variable, when tabulated.
    pub fn table_range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Quartic => None,
            Kind::Table(t) => Some((t.u[0] - self.shift, *t.u.last().unwrap() - self.shift)),
        }
    }

    /// Loads a tabulated potential from CSV with header `u,w,dw,ddw` and
    /// strictly increasing `u`.
    pub fn from_table_csv(path: &Path, m_threshold: f64) -> Result<Self, PotentialError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| PotentialError::Parse("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["u", "w", "dw", "ddw"] {
            return Err(PotentialError::Parse(format!("expected header u,w,dw,ddw, got {header:?}")));
        }
        let (mut u, mut w, mut dw, mut ddw) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(PotentialError::Parse(format!("row {}: expected 4 columns", i + 2)));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| PotentialError::Parse(format!("row {}: {e}", i + 2)))
            };
            u.push(parse(f[0])?);
            w.push(parse(f[1])?);
            dw.push(parse(f[2])?);
            ddw.push(parse(f[3])?);
        }
        Self::from_table(u, w, dw, ddw, m_threshold)
    }

    pub fn from_table(
        u: Vec<f64>,
        w: Vec<f64>,
        dw: Vec<f64>,
        ddw: Vec<f64>,
        m_threshold: f64,
    ) -> Result<Self, PotentialError> {
        if u.len() < 4 {
            return Err(PotentialError::Parse("need at least 4 table rows".into()));
        }
        if !u.windows(2).all(|p| p[1] > p[0]) {
            return Err(PotentialError::Parse("u column must be strictly increasing".into()));
        }
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(all_finite(&u) && all_finite(&w) && all_finite(&dw) && all_finite(&ddw)) {
            return Err(PotentialError::Parse("non-finite table entry".into()));
        }
        Ok(Potential {
            kind: Kind::Table(Arc::new(TableData { u, w, dw, ddw })),
            shift: 0.0,
            m_threshold,
        })
    }

    /// `W(u + shift)`.
    pub fn w(&self, u: f64) -> Result<f64, PotentialError> {
        let s = u + self.shift;
        match &self.kind {
            Kind::Quartic => {
                let a = 1.0 - s * s;
                Ok(0.25 * a * a)
            }
            Kind::Table(t) => {
                let k = t.locate(s)?;
                Ok(crate::numerics::hermite(s, t.u[k], t.u[k + 1], t.w[k], t.w[k + 1], t.dw[k], t.dw[k + 1]))
            }
        }
    }

    /// `W'(u + shift)`.
    pub fn dw(&self, u: f64) -> Result<f64, PotentialError> {
        let s = u + self.shift;
        match &self.kind {
            Kind::Quartic => Ok(s * s * s - s),
            Kind::Table(t) => {
                let k = t.locate(s)?;
                Ok(crate::numerics::hermite(s, t.u[k], t.u[k + 1], t.dw[k], t.dw[k + 1], t.ddw[k], t.ddw[k + 1]))
            }
        }
    }

    /// `W''(u + shift)`.
    pub fn ddw(&self, u: f64) -> Result<f64, PotentialError> {
        let s = u + self.shift;
        match &self.kind {
            Kind::Quartic => Ok(3.0 * s * s - 1.0),
            Kind::Table(t) => {
                let k = t.locate(s)?;
                let t0 = t.u[k];
                let t1 = t.u[k + 1];
                let lam = (s - t0) / (t1 - t0);
                Ok((1.0 - lam) * t.ddw[k] + lam * t.ddw[k + 1])
            }
        }
    }

    /// `W'''(u + shift)`; for tables this is the slope of the `ddw` column.
    pub fn dddw(&self, u: f64) -> Result<f64, PotentialError> {
        let s = u + self.shift;
        match &self.kind {
            Kind::Quartic => Ok(6.0 * s),
            Kind::Table(t) => {
                let k = t.locate(s)?;
                Ok((t.ddw[k + 1] - t.ddw[k]) / (t.u[k + 1] - t.u[k]))
            }
        }
    }

    /// Max of `|W'''|` over `[lo, hi]` in the shifted variable, by scanning.
    pub fn max_abs_dddw(&self, lo: f64, hi: f64, step: f64) -> Result<f64, PotentialError> {
        let mut m = 0.0f64;
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let u = lo + (hi - lo) * (i as f64) / (n as f64);
            m = m.max(self.dddw(u)?.abs());
        }
        Ok(m)
    }

    /// Checks the double-well hypotheses on the unshifted potential:
    /// evenness, `W(1) = 0 = W'(1)`, `W''(1) > 0`, and `W' ≥ 0` past `M`.
    pub fn validate_double_well(&self, scan_max: f64, step: f64) -> Result<(), PotentialError> {
        let p = self.with_shift(0.0);
        let w1 = p.w(1.0)?;
        if w1.abs() > 1e-10 {
            return Err(PotentialError::InvalidWell(format!("W(1) = {w1}, expected 0")));
        }
        let dw1 = p.dw(1.0)?;
        if dw1.abs() > 1e-8 {
            return Err(PotentialError::InvalidWell(format!("W'(1) = {dw1}, expected 0")));
        }
        let ddw1 = p.ddw(1.0)?;
        if ddw1 <= 0.0 {
            return Err(PotentialError::InvalidWell(format!("W''(1) = {ddw1}, expected > 0")));
        }
        let n = (scan_max / step).ceil() as usize;
        for i in 0..=n {
            let u = scan_max * (i as f64) / (n as f64);
            let sym = (p.w(u)? - p.w(-u)?).abs();
            if sym > 1e-12 {
                return Err(PotentialError::InvalidWell(format!(
                    "evenness residual {sym:.3e} at u = {u}"
                )));
            }
            if u > 0.0 && u < 1.0 && p.w(u)? <= 0.0 {
                return Err(PotentialError::InvalidWell(format!("W({u}) ≤ 0 inside (0,1)")));
            }
            if u >= self.m_threshold && p.dw(u)? < -1e-12 {
                return Err(PotentialError::InvalidWell(format!(
                    "W'({u}) < 0 beyond the monotonicity threshold M = {}",
                    self.m_threshold
                )));
            }
        }
        Ok(())
    }

    /// Convexity constants with the default margin `c² = W''(0)/2`.
    ///
    /// Expects the shifted well (minimum at 0). `q_star` is the largest
    /// radius with `W'' ≥ c²` on `(-q*, q*)`, then reduced until
    /// `W(q* sign q) ≤ W(q)` holds on the scanned admissible range;
    /// `w_bar` caps `W` over `|q| ∈ [q*, m0]`.
    pub fn well_constants(&self, m0: f64, grid_step: f64) -> Result<WellConstants, PotentialError> {
        self.well_constants_with_margin(m0, grid_step, 0.5)
    }

    pub fn well_constants_with_margin(
        &self,
        m0: f64,
        grid_step: f64,
        margin: f64,
    ) -> Result<WellConstants, PotentialError> {
        if m0 <= 0.0 || grid_step <= 0.0 || !(0.0..1.0).contains(&margin) {
            return Err(PotentialError::InvalidWell("need m0 > 0, grid_step > 0, margin in (0,1)".into()));
        }
        let ddw0 = self.ddw(0.0)?;
        if ddw0 <= 0.0 {
            return Err(PotentialError::InvalidWell(format!(
                "W''(0) = {ddw0}, expected > 0 for the shifted well"
            )));
        }
        let c_sq = margin * ddw0;

        // Largest symmetric interval on which W'' stays above c².
        let scan_eval = |q: f64| self.ddw(q);
        let mut q_star = m0;
        'scan: for side in [1.0, -1.0] {
            let mut k = 1usize;
            loop {
                let q = side * (k as f64) * grid_step;
                if q.abs() > m0 {
                    break;
                }
                match scan_eval(q) {
                    Ok(v) if v >= c_sq => {}
                    Ok(_) => {
                        // refine the crossing between the last good point and q
                        let mut lo = q.abs() - grid_step;
                        let mut hi = q.abs();
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if scan_eval(side * mid)? >= c_sq {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        q_star = q_star.min(lo);
                        continue 'scan;
                    }
                    // table ran out before m0: the known range bounds q*
                    Err(PotentialError::OutOfDomain { .. }) => {
                        q_star = q_star.min(q.abs() - grid_step);
                        continue 'scan;
                    }
                    Err(e) => return Err(e),
                }
                k += 1;
            }
        }
        if q_star <= 0.0 {
            return Err(PotentialError::InvalidWell("empty convexity interval".into()));
        }

        // The admissible range for the lower bound W(q* sign q) ≤ W(q): where
        // the original (unshifted) variable stays ≥ 0, i.e. q ≥ -shift. Below
        // that the potential is replaced by a dominating modification that is
        // never evaluated, so only the physical branch is scanned.
        let q_lo_limit = if self.shift > 0.0 { -self.shift } else { -m0 };
        // per-branch scan: the max feeds w_bar, the per-sign minima gate the
        // lower inequality W(q* sign q) ≤ W(q)
        let scan_w = |q_floor: f64| -> Result<(f64, f64, f64), PotentialError> {
            let mut min_pos = f64::INFINITY;
            let mut min_neg = f64::INFINITY;
            let mut max_w = f64::NEG_INFINITY;
            let n = ((2.0 * m0 / grid_step).ceil() as usize).max(1);
            for i in 0..=n {
                let q = -m0 + 2.0 * m0 * (i as f64) / (n as f64);
                if q.abs() < q_floor - 1e-15 {
                    continue;
                }
                let w = self.w(q)?;
                max_w = max_w.max(w);
                if q >= q_lo_limit {
                    if q > 0.0 {
                        min_pos = min_pos.min(w);
                    } else {
                        min_neg = min_neg.min(w);
                    }
                }
            }
            Ok((min_pos, min_neg, max_w))
        };

        let mut w_bar;
        loop {
            let (min_pos, min_neg, max_w) = scan_w(q_star)?;
            w_bar = max_w;
            if self.w(q_star)? <= min_pos + 1e-12 && self.w(-q_star)? <= min_neg + 1e-12 {
                break;
            }
            // shrink q* until both branch endpoints drop below their minima
            let mut t = q_star;
            let mut found = false;
            while t > grid_step {
                t -= grid_step;
                if self.w(t)? <= min_pos + 1e-12 && self.w(-t)? <= min_neg + 1e-12 {
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(PotentialError::InvalidWell(
                    "cannot satisfy W(q* sign q) ≤ W(q) on the scan range".into(),
                ));
            }
            q_star = t;
        }

        Ok(WellConstants { c: c_sq.sqrt(), q_star, w_bar })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        let p = Potential::quartic();
        assert_eq!(p.w(1.0).unwrap(), 0.0);
        assert_eq!(p.w(0.0).unwrap(), 0.25);
        assert_eq!(p.w(-0.3).unwrap(), p.w(0.3).unwrap());
        assert_eq!(p.dw(1.0).unwrap(), 0.0);
        assert_eq!(p.ddw(1.0).unwrap(), 2.0);
    }

    #[test]
    fn quartic_is_valid_double_well() {
        Potential::quartic().validate_double_well(3.0, 1e-3).unwrap();
    }

    #[test]
    fn shifted_constants_match_closed_form() {
        // c² = W''(0)/2 = 1; q* solves 3(1+v)² - 1 = 1 for v < 0.
        let p = Potential::quartic_shifted();
        let k = p.well_constants(2.5, 1e-4).unwrap();
        assert!((k.c - 1.0).abs() < 1e-12, "c = {}", k.c);
        let q_exact = 1.0 - (2.0f64 / 3.0).sqrt();
        assert!((k.q_star - q_exact).abs() < 2e-4, "q* = {} vs {}", k.q_star, q_exact);
        // max of W over u in [-1.5, 3.5] sits at u = 3.5
        assert!((k.w_bar - 31.640625).abs() < 1e-2, "w_bar = {}", k.w_bar);
    }

    #[test]
    fn tight_margin_shrinks_q_star() {
        let p = Potential::quartic_shifted();
        let loose = p.well_constants_with_margin(2.0, 1e-4, 0.5).unwrap();
        let tight = p.well_constants_with_margin(2.0, 1e-4, 0.999).unwrap();
        assert!(tight.q_star < loose.q_star);
        assert!(tight.q_star < 2e-3, "q* = {}", tight.q_star);
    }

    #[test]
    fn sign_dw_bound_on_convexity_interval() {
        let p = Potential::quartic_shifted();
        let k = p.well_constants(2.0, 1e-4).unwrap();
        let c_sq = k.c_sq();
        for i in -200..=200 {
            let q = k.q_star * (i as f64) / 201.0;
            let lhs = q.signum() * p.dw(q).unwrap();
            assert!(
                lhs >= q.signum() * c_sq * q - 1e-12,
                "failed at q = {q}: {lhs} < {}",
                q.signum() * c_sq * q
            );
        }
    }

    #[test]
    fn tangent_line_bound_in_convexity_region() {
        let p = Potential::quartic_shifted();
        let k = p.well_constants(2.0, 1e-4).unwrap();
        // W(q) ≥ W(q0) + W'(q0)(q - q0) on the convex window
        for i in 1..20 {
            for j in 1..20 {
                let q0 = k.q_star * (i as f64) / 20.0;
                let q = k.q_star * (j as f64) / 20.0;
                let lhs = p.w(q).unwrap();
                let rhs = p.w(q0).unwrap() + p.dw(q0).unwrap() * (q - q0);
                assert!(lhs >= rhs - 1e-12);
            }
        }
    }

    #[test]
    fn table_roundtrips_quartic() {
        let q = Potential::quartic();
        let u: Vec<f64> = (0..=800).map(|i| -2.0 + 4.0 * (i as f64) / 800.0).collect();
        let w = u.iter().map(|&x| q.w(x).unwrap()).collect();
        let dw = u.iter().map(|&x| q.dw(x).unwrap()).collect();
        let ddw = u.iter().map(|&x| q.ddw(x).unwrap()).collect();
        let t = Potential::from_table(u, w, dw, ddw, 1.0).unwrap();
        for i in 0..=100 {
            let x = -1.9 + 3.8 * (i as f64) / 100.0;
            assert!((t.w(x).unwrap() - q.w(x).unwrap()).abs() < 1e-9);
            assert!((t.dw(x).unwrap() - q.dw(x).unwrap()).abs() < 1e-7);
        }
        match t.w(5.0) {
            Err(PotentialError::OutOfDomain { .. }) => {}
            other => panic!("expected out-of-domain, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn derivative_matches_centered_difference(u in -2.0f64..2.0) {
            let p = Potential::quartic();
            let h = 1e-5;
            let fd = (p.w(u + h).unwrap() - p.w(u - h).unwrap()) / (2.0 * h);
            let exact = p.dw(u).unwrap();
            let scale = exact.abs().max(1e-3);
            prop_assert!((fd - exact).abs() / scale < 1e-6);
        }

        #[test]
        fn quartic_even(u in 0.0f64..3.0) {
            let p = Potential::quartic();
            prop_assert!((p.w(u).unwrap() - p.w(-u).unwrap()).abs() < 1e-12);
        }
    }
}
