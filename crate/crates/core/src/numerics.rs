//! Small shared numerical kernels: deterministic summation, tridiagonal
//! solves, least squares on a line, monotone Hermite interpolation.

/// Pairwise (cascade) summation with a fixed reduction tree.
///
/// The tree depends only on the slice length, so the result is reproducible
/// regardless of how the terms were produced. The split point is the largest
/// power of two strictly below `n`; summing a slice and summing its two
/// halves split at that point give bitwise-identical totals.
pub fn pairwise_sum(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => 0.0,
        1 => terms[0],
        2 => terms[0] + terms[1],
        n => {
            let split = pairwise_split(n);
            pairwise_sum(&terms[..split]) + pairwise_sum(&terms[split..])
        }
    }
}

/// Top-level split index used by [`pairwise_sum`] for a slice of length `n`.
pub fn pairwise_split(n: usize) -> usize {
    debug_assert!(n >= 3);
    let mut p = 1usize;
    while p * 2 < n {
        p *= 2;
    }
    p
}

/// Ordinary least squares for `y ≈ a + b x`; returns `(a, b)`.
///
/// Returns `None` with fewer than two points or a degenerate abscissa.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        sxx += dx * dx;
        sxy += dx * (ys[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Solves a tridiagonal system by the Thomas algorithm with partial scaling.
///
/// `sub[i]` couples row `i+1` to `i`, `sup[i]` couples row `i` to `i+1`.
/// Returns `None` when a pivot collapses.
pub fn tridiag_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert_eq!(sub.len(), n.saturating_sub(1));
    assert_eq!(sup.len(), n.saturating_sub(1));
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = if n > 1 { sup[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i - 1] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        if i + 1 < n {
            c[i] = sup[i] / piv;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Cubic Hermite evaluation on `[x0, x1]` from endpoint values and slopes.
pub fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + d0 * h * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + d1 * h * (t3 - t2)
}

/// Derivative of [`hermite`] with respect to `x`.
pub fn hermite_deriv(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    (y0 * (6.0 * t2 - 6.0 * t) + y1 * (-6.0 * t2 + 6.0 * t)) / h
        + d0 * (3.0 * t2 - 4.0 * t + 1.0)
        + d1 * (3.0 * t2 - 2.0 * t)
}

/// Clamps Hermite slopes to the Fritsch-Carlson monotone region for the
/// secant `s` of an increasing data pair. Slopes are left untouched when the
/// interpolant is already monotone on the interval.
pub fn monotone_clamp(s: f64, d0: &mut f64, d1: &mut f64) {
    if s == 0.0 {
        *d0 = 0.0;
        *d1 = 0.0;
        return;
    }
    let a = *d0 / s;
    let b = *d1 / s;
    if a < 0.0 {
        *d0 = 0.0;
    }
    if b < 0.0 {
        *d1 = 0.0;
    }
    let r = a * a + b * b;
    if r > 9.0 {
        let tau = 3.0 / r.sqrt();
        *d0 = tau * a * s;
        *d1 = tau * b * s;
    }
}

/// Adaptive midpoint quadrature of `f` on `[a, b]`.
///
/// Open rule, so integrable endpoint behavior is tolerated. Subdivides until
/// the midpoint/two-panel discrepancy is below `tol` (absolute, per call),
/// with Richardson extrapolation of the final pair.
pub fn adaptive_midpoint<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) * f(m);
    midpoint_rec(f, a, b, whole, tol, depth)
}

fn midpoint_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = 0.5 * (b - a) * f(0.5 * (a + m));
    let right = 0.5 * (b - a) * f(0.5 * (m + b));
    let halves = left + right;
    if depth == 0 || (halves - whole).abs() <= 3.0 * tol {
        // midpoint rule pairs halve the error by ~4; extrapolate the limit
        return halves + (halves - whole) / 3.0;
    }
    midpoint_rec(f, a, m, left, 0.5 * tol, depth - 1) + midpoint_rec(f, m, b, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_smooth_terms() {
        let terms: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.01).sin()).collect();
        let naive: f64 = terms.iter().sum();
        assert!((pairwise_sum(&terms) - naive).abs() < 1e-9);
    }

    #[test]
    fn pairwise_split_is_stable_under_concatenation() {
        let terms: Vec<f64> = (0..37).map(|i| (i as f64).exp().recip()).collect();
        let split = pairwise_split(terms.len());
        let total = pairwise_sum(&terms);
        let parts = pairwise_sum(&terms[..split]) + pairwise_sum(&terms[split..]);
        assert_eq!(total.to_bits(), parts.to_bits());
    }

    #[test]
    fn tridiag_solves_small_system() {
        // [2 -1; -1 2] x = [1, 1] -> x = [1, 1]
        let x = tridiag_solve(&[-1.0], &[2.0, 2.0], &[-1.0], &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_handles_inverse_sqrt_singularity() {
        // ∫_0^1 1/sqrt(x) dx = 2
        let v = adaptive_midpoint(&|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-12, 48);
        assert!((v - 2.0).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - x;
        let df = |x: f64| 3.0 * x * x - 1.0;
        let v = hermite(0.3, 0.0, 1.0, f(0.0), f(1.0), df(0.0), df(1.0));
        assert!((v - f(0.3)).abs() < 1e-14);
        let d = hermite_deriv(0.3, 0.0, 1.0, f(0.0), f(1.0), df(0.0), df(1.0));
        assert!((d - df(0.3)).abs() < 1e-13);
    }
}
