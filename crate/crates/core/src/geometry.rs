//! Symmetric planar domains given by even width functions, uniform grids with
//! interior/boundary-band masks, nodal fields, and exact distances to the
//! boundary polyline.
//!
//! A domain is `{(x₁,x₂) : x₂ ∈ (a,b), |x₁| < w(x₂)}`, which encodes both the
//! reflection symmetry and convexity of horizontal slices by construction.
//! Strips model truncations of unbounded domains: their `x₂` ends carry
//! Dirichlet data but are excluded from boundary distances.

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate domain: {0}")]
    Degenerate(String),
    #[error("grid resolution failure: {0}")]
    Resolution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone)]
enum WidthFn {
    Constant(f64),
    Trapezoid { w_start: f64, w_end: f64 },
    Dumbbell { w_end: f64, w_neck: f64 },
    Table { x2: Vec<f64>, w: Vec<f64> },
}

/// Planar domain symmetric under `x₁ ↦ -x₁`, convex in `x₁` slice by slice.
#[derive(Debug, Clone)]
pub struct SymmetricDomain {
    pub x2_min: f64,
    pub x2_max: f64,
    width: WidthFn,
    closed_ends: bool,
    pub tag: String,
}

impl SymmetricDomain {
    /// Infinite strip `|x₁| < w`, truncated to `x₂ ∈ (a, b)` for computation.
    pub fn strip(half_width: f64, x2_min: f64, x2_max: f64) -> Self {
        SymmetricDomain {
            x2_min,
            x2_max,
            width: WidthFn::Constant(half_width),
            closed_ends: false,
            tag: "strip".into(),
        }
    }

    /// Bounded domain with linearly varying half-width (a rectangle when the
    /// two widths agree).
    pub fn trapezoid(w_start: f64, w_end: f64, x2_min: f64, x2_max: f64) -> Self {
        SymmetricDomain {
            x2_min,
            x2_max,
            width: WidthFn::Trapezoid { w_start, w_end },
            closed_ends: true,
            tag: "trapezoid".into(),
        }
    }

    /// Two bulbs of half-width `w_end` joined by a neck of half-width
    /// `w_neck` through a cosine bump.
    pub fn dumbbell(w_end: f64, w_neck: f64, x2_min: f64, x2_max: f64) -> Self {
        SymmetricDomain {
            x2_min,
            x2_max,
            width: WidthFn::Dumbbell { w_end, w_neck },
            closed_ends: true,
            tag: "dumbbell".into(),
        }
    }

    /// Width samples `(x₂, w)` interpolated linearly; must cover `[a, b]`.
    pub fn from_width_table(
        x2: Vec<f64>,
        w: Vec<f64>,
        x2_min: f64,
        x2_max: f64,
    ) -> Result<Self, GeometryError> {
        if x2.len() != w.len() || x2.len() < 2 {
            return Err(GeometryError::InvalidArgument("width table needs ≥ 2 matching samples".into()));
        }
        if !x2.windows(2).all(|p| p[1] > p[0]) {
            return Err(GeometryError::InvalidArgument("width table x2 must be strictly increasing".into()));
        }
        if x2[0] > x2_min || *x2.last().unwrap() < x2_max {
            return Err(GeometryError::InvalidArgument("width table must cover [x2_min, x2_max]".into()));
        }
        Ok(SymmetricDomain {
            x2_min,
            x2_max,
            width: WidthFn::Table { x2, w },
            closed_ends: true,
            tag: "table".into(),
        })
    }

    /// Half-width `w(x₂)`.
    pub fn width(&self, x2: f64) -> f64 {
        match &self.width {
            WidthFn::Constant(w) => *w,
            WidthFn::Trapezoid { w_start, w_end } => {
                let t = (x2 - self.x2_min) / (self.x2_max - self.x2_min);
                w_start + (w_end - w_start) * t
            }
            WidthFn::Dumbbell { w_end, w_neck } => {
                let t = (x2 - self.x2_min) / (self.x2_max - self.x2_min);
                let bump = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * t).cos());
                w_neck + (w_end - w_neck) * bump
            }
            WidthFn::Table { x2: xs, w } => {
                let k = xs.partition_point(|&g| g <= x2).clamp(1, xs.len() - 1);
                let t = (x2 - xs[k - 1]) / (xs[k] - xs[k - 1]);
                w[k - 1] + (w[k] - w[k - 1]) * t
            }
        }
    }

    pub fn min_width(&self) -> f64 {
        match &self.width {
            WidthFn::Constant(w) => *w,
            WidthFn::Trapezoid { w_start, w_end } => w_start.min(*w_end),
            WidthFn::Dumbbell { w_end, w_neck } => w_end.min(*w_neck),
            WidthFn::Table { x2, w } => x2
                .iter()
                .zip(w)
                .filter(|(&x, _)| (self.x2_min..=self.x2_max).contains(&x))
                .fold(f64::INFINITY, |a, (_, &wi)| a.min(wi)),
        }
    }

    pub fn max_width(&self) -> f64 {
        match &self.width {
            WidthFn::Constant(w) => *w,
            WidthFn::Trapezoid { w_start, w_end } => w_start.max(*w_end),
            WidthFn::Dumbbell { w_end, w_neck } => w_end.max(*w_neck),
            WidthFn::Table { w, .. } => w.iter().fold(0.0f64, |a, &wi| a.max(wi)),
        }
    }

    /// Whether the `x₂` ends belong to the boundary (false for strips, whose
    /// ends are artificial truncation edges).
    pub fn closed_ends(&self) -> bool {
        self.closed_ends
    }

    /// Strict membership test.
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        x2 > self.x2_min && x2 < self.x2_max && x1.abs() < self.width(x2)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.x2_max > self.x2_min) {
            return Err(GeometryError::Degenerate(format!(
                "empty x2 interval [{}, {}]",
                self.x2_min, self.x2_max
            )));
        }
        if self.min_width() <= 0.0 {
            return Err(GeometryError::Degenerate("width must stay positive".into()));
        }
        Ok(())
    }
}

/// Open axis-aligned cylinder `|x₁| < l`, `|x₂ - η| < r`.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder {
    pub l: f64,
    pub r: f64,
    pub eta: f64,
}

impl Cylinder {
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        x1.abs() < self.l && (x2 - self.eta).abs() < self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Exterior,
    Interior,
    /// Exterior node adjacent to the interior; carries Dirichlet data.
    Band,
}

/// Uniform grid over the domain's bounding box with symmetric `x₁` indexing.
#[derive(Debug)]
pub struct Grid {
    pub h: f64,
    nx: usize,
    ny: usize,
    /// `x₁ = (ix - n1) h`; index `n1` is the symmetry axis.
    n1: usize,
    x2_origin: f64,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    band: Vec<usize>,
    domain: SymmetricDomain,
}

impl Grid {
    /// Masks the domain at spacing `h`. Interior nodes satisfy the strict
    /// membership test; the band is the exterior layer touching them.
    pub fn build(domain: &SymmetricDomain, h: f64) -> Result<Arc<Grid>, GeometryError> {
        domain.validate()?;
        if !(h > 0.0) {
            return Err(GeometryError::InvalidArgument("h must be positive".into()));
        }
        if domain.min_width() <= 2.0 * h {
            return Err(GeometryError::Resolution(format!(
                "min width {} ≤ 2h = {}",
                domain.min_width(),
                2.0 * h
            )));
        }
        let n1 = (domain.max_width() / h).floor() as usize + 2;
        let nx = 2 * n1 + 1;
        let span = domain.x2_max - domain.x2_min;
        let ny = (span / h + 1e-9).floor() as usize + 3;
        let x2_origin = domain.x2_min - h;
        let mut kinds = vec![NodeKind::Exterior; nx * ny];
        for jy in 0..ny {
            let x2 = x2_origin + jy as f64 * h;
            for ix in 0..nx {
                let x1 = (ix as f64 - n1 as f64) * h;
                if domain.contains(x1, x2) {
                    kinds[jy * nx + ix] = NodeKind::Interior;
                }
            }
        }
        let mut interior = Vec::new();
        let mut band = Vec::new();
        for jy in 0..ny {
            for ix in 0..nx {
                let id = jy * nx + ix;
                if kinds[id] == NodeKind::Interior {
                    interior.push(id);
                    continue;
                }
                let mut touches = false;
                if ix > 0 && kinds[id - 1] == NodeKind::Interior {
                    touches = true;
                }
                if ix + 1 < nx && kinds[id + 1] == NodeKind::Interior {
                    touches = true;
                }
                if jy > 0 && kinds[id - nx] == NodeKind::Interior {
                    touches = true;
                }
                if jy + 1 < ny && kinds[id + nx] == NodeKind::Interior {
                    touches = true;
                }
                if touches {
                    band.push(id);
                }
            }
        }
        for &id in &band {
            kinds[id] = NodeKind::Band;
        }
        if interior.is_empty() {
            return Err(GeometryError::Resolution("no interior nodes at this spacing".into()));
        }
        Ok(Arc::new(Grid { h, nx, ny, n1, x2_origin, kinds, interior, band, domain: domain.clone() }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> &SymmetricDomain {
        &self.domain
    }

    pub fn idx(&self, ix: usize, jy: usize) -> usize {
        jy * self.nx + ix
    }

    pub fn split(&self, id: usize) -> (usize, usize) {
        (id % self.nx, id / self.nx)
    }

    pub fn x1(&self, ix: usize) -> f64 {
        (ix as f64 - self.n1 as f64) * self.h
    }

    pub fn x2(&self, jy: usize) -> f64 {
        self.x2_origin + jy as f64 * self.h
    }

    pub fn coords(&self, id: usize) -> (f64, f64) {
        let (ix, jy) = self.split(id);
        (self.x1(ix), self.x2(jy))
    }

    pub fn kind(&self, id: usize) -> NodeKind {
        self.kinds[id]
    }

    pub fn has_value(&self, id: usize) -> bool {
        self.kinds[id] != NodeKind::Exterior
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    /// Mirror image of a column index under `x₁ ↦ -x₁`.
    pub fn reflect_ix(&self, ix: usize) -> usize {
        2 * self.n1 - ix
    }

    pub fn axis_ix(&self) -> usize {
        self.n1
    }

    /// Nearest node to `(x₁, x₂)`.
    pub fn nearest(&self, x1: f64, x2: f64) -> usize {
        let ix = ((x1 / self.h) + self.n1 as f64).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let jy = ((x2 - self.x2_origin) / self.h).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        self.idx(ix, jy)
    }
}

/// Nodal scalar field over a grid's bounding box; only interior and band
/// entries are meaningful.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.len();
        Field { grid, values: vec![0.0; n] }
    }

    /// Fills interior and band nodes from a coordinate function.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Arc<Grid>, f: F) -> Field {
        let mut field = Field::zeros(grid);
        for id in 0..field.values.len() {
            if field.grid.has_value(id) {
                let (x1, x2) = field.grid.coords(id);
                field.values[id] = f(x1, x2);
            }
        }
        field
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn set(&mut self, id: usize, v: f64) {
        self.values[id] = v;
    }

    /// Node map `x₁ ↦ -x₁`.
    pub fn reflect(&self) -> Field {
        let mut out = self.clone();
        for jy in 0..self.grid.ny() {
            for ix in 0..self.grid.nx() {
                let src = self.grid.idx(self.grid.reflect_ix(ix), jy);
                out.values[self.grid.idx(ix, jy)] = self.values[src];
            }
        }
        out
    }

    /// `max |f(x) + f(x̂)|` over valued nodes.
    pub fn oddness_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for jy in 0..self.grid.ny() {
            for ix in 0..self.grid.nx() {
                let id = self.grid.idx(ix, jy);
                if !self.grid.has_value(id) {
                    continue;
                }
                let mid = self.grid.idx(self.grid.reflect_ix(ix), jy);
                worst = worst.max((self.values[id] + self.values[mid]).abs());
            }
        }
        worst
    }

    /// Projects onto the odd subspace: `u ← (u - u∘reflect)/2`.
    pub fn project_odd(&mut self) {
        let refl = self.reflect();
        for (v, r) in self.values.iter_mut().zip(refl.values) {
            *v = 0.5 * (*v - r);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(id, _)| self.grid.has_value(*id))
            .fold(0.0f64, |a, (_, &v)| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceTarget {
    /// Distance to the geometric boundary (walls plus caps when the ends are
    /// part of the domain).
    WholeBoundary,
    /// Distance to the boundary of the right half `Ω⁺`, which includes the
    /// symmetry axis segment.
    PositivePartBoundary,
}

fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let vx = bx - ax;
    let vy = by - ay;
    let len_sq = vx * vx + vy * vy;
    let t = if len_sq > 0.0 { ((px - ax) * vx + (py - ay) * vy) / len_sq } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    let dx = px - (ax + t * vx);
    let dy = py - (ay + t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Exact Euclidean distance to the boundary polyline, per node.
///
/// Brute force over the wall segments (grid-row vertices) and, for closed
/// domains, the end caps. In positive-part mode only the `x₁ ≥ 0` portion of
/// the boundary is used and the axis contributes `|x₁|`.
pub fn distance_field(grid: &Arc<Grid>, target: DistanceTarget) -> Field {
    let d = grid.domain();
    let h = grid.h;
    // wall polyline vertices: domain ends plus every grid ordinate inside
    let mut ords = vec![d.x2_min];
    let mut jy = 0usize;
    loop {
        let x2 = grid.x2(jy);
        if x2 > d.x2_max {
            break;
        }
        if x2 > d.x2_min && x2 < d.x2_max {
            ords.push(x2);
        }
        jy += 1;
        if jy >= grid.ny() + 2 {
            break;
        }
    }
    ords.push(d.x2_max);

    // segments on the right wall; the left wall is its mirror image
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
    for p in ords.windows(2) {
        segs.push((d.width(p[0]), p[0], d.width(p[1]), p[1]));
    }
    if d.closed_ends() {
        segs.push((0.0, d.x2_min, d.width(d.x2_min), d.x2_min));
        segs.push((0.0, d.x2_max, d.width(d.x2_max), d.x2_max));
    }

    let positive_part = target == DistanceTarget::PositivePartBoundary;
    let mut out = Field::zeros(Arc::clone(grid));
    for id in 0..grid.len() {
        if !grid.has_value(id) {
            continue;
        }
        let (x1, x2) = grid.coords(id);
        let mut best = f64::INFINITY;
        for &(ax, ay, bx, by) in &segs {
            // right-side segment
            best = best.min(segment_distance(x1, x2, ax, ay, bx, by));
            if !positive_part {
                // mirrored segment
                best = best.min(segment_distance(x1, x2, -ax, ay, -bx, by));
            }
        }
        if positive_part {
            best = best.min(x1.abs());
            if d.closed_ends() {
                best = best.min(segment_distance(x1, x2, 0.0, d.x2_min, 0.0, d.x2_max));
            }
        }
        out.set(id, best);
    }
    let _ = h;
    out
}
