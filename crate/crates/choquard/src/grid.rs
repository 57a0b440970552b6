//! Masked Cartesian grids for bounded domains with Dirichlet boundary.
//!
//! A [`Grid`] discretizes a bounded domain Ω ⊂ R^n (n = 2 or 3) as a uniform
//! node lattice with a boolean mask: a node participates iff it lies strictly
//! inside Ω. Everything outside the mask is pinned to zero, which realizes the
//! homogeneous Dirichlet condition in the discrete energy exactly.
//!
//! The module also carries the analytic geometry of the domain catalog
//! ([`DomainSpec`]): membership tests, distance to the boundary, and the
//! inner/outer neighborhoods Ω_r^- and Ω_r^+ used to place seeds and to check
//! barycenter localization.

use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Exterior padding layers added on every face of the bounding box.
const PAD_LAYERS: usize = 2;

/// Minimum number of interior nodes across the smallest geometric feature.
const MIN_FEATURE_NODES: u32 = 16;

// ---------------------------------------------------------------------------
// Domain catalog
// ---------------------------------------------------------------------------

/// A ball excluded from a [`DomainKind::MultiHole`] domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_inner: f64, r_outer: f64 },
    MultiHole { center: Vec<f64>, radius: f64, holes: Vec<Hole> },
    Box { center: Vec<f64>, half_widths: Vec<f64> },
}

/// Analytic description of the domain Ω plus the margin r of Ω_r^±.
///
/// `declared_category` is the topological invariant of the catalog shape
/// (stored, never computed): 1 for ball and box, 2 for the annulus and for
/// any multi-hole domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    r_margin: f64,
    declared_category: u32,
}

fn check_dim(center: &[f64]) -> Result<usize> {
    let n = center.len();
    if n < 2 || n > MAX_DIM {
        return Err(Error::Config(format!(
            "domain dimension must be 2 or 3, got {n}"
        )));
    }
    Ok(n)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl DomainSpec {
    pub fn ball(center: &[f64], radius: f64, r_margin: Option<f64>) -> Result<Self> {
        check_dim(center)?;
        if !(radius > 0.0) {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let kind = DomainKind::Ball {
            center: center.to_vec(),
            radius,
        };
        Self::finish(kind, r_margin, 1)
    }

    pub fn annulus(center: &[f64], r_inner: f64, r_outer: f64, r_margin: Option<f64>) -> Result<Self> {
        check_dim(center)?;
        if !(r_inner > 0.0 && r_inner < r_outer) {
            return Err(Error::Config(format!(
                "annulus requires 0 < r_inner < r_outer, got {r_inner} and {r_outer}"
            )));
        }
        let kind = DomainKind::Annulus {
            center: center.to_vec(),
            r_inner,
            r_outer,
        };
        Self::finish(kind, r_margin, 2)
    }

    pub fn multi_hole(
        center: &[f64],
        radius: f64,
        holes: &[(Vec<f64>, f64)],
        r_margin: Option<f64>,
    ) -> Result<Self> {
        let n = check_dim(center)?;
        if !(radius > 0.0) {
            return Err(Error::Config("outer radius must be positive".into()));
        }
        if holes.is_empty() {
            return Err(Error::Config("multi_hole domain needs at least one hole".into()));
        }
        for (hc, hr) in holes {
            if hc.len() != n {
                return Err(Error::Config("hole center dimension mismatch".into()));
            }
            if !(*hr > 0.0) {
                return Err(Error::Config("hole radius must be positive".into()));
            }
            if dist(hc, center) + hr >= radius {
                return Err(Error::Config(
                    "hole must lie strictly inside the outer ball".into(),
                ));
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                if dist(&holes[i].0, &holes[j].0) <= holes[i].1 + holes[j].1 {
                    return Err(Error::Config("holes must be pairwise disjoint".into()));
                }
            }
        }
        let kind = DomainKind::MultiHole {
            center: center.to_vec(),
            radius,
            holes: holes
                .iter()
                .map(|(c, r)| Hole {
                    center: c.clone(),
                    radius: *r,
                })
                .collect(),
        };
        Self::finish(kind, r_margin, 2)
    }

    pub fn cuboid(center: &[f64], half_widths: &[f64], r_margin: Option<f64>) -> Result<Self> {
        let n = check_dim(center)?;
        if half_widths.len() != n {
            return Err(Error::Config("half_widths dimension mismatch".into()));
        }
        if half_widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("box half widths must be positive".into()));
        }
        let kind = DomainKind::Box {
            center: center.to_vec(),
            half_widths: half_widths.to_vec(),
        };
        Self::finish(kind, r_margin, 1)
    }

    fn finish(kind: DomainKind, r_margin: Option<f64>, category: u32) -> Result<Self> {
        let default_r = 0.2 * Self::smallest_feature_of(&kind);
        let r_margin = r_margin.unwrap_or(default_r);
        if !(r_margin > 0.0) {
            return Err(Error::Config("r_margin must be positive".into()));
        }
        let spec = DomainSpec {
            kind,
            r_margin,
            declared_category: category,
        };
        // Omega_{r_margin}^- must be nonempty.
        if spec.max_depth() < r_margin {
            return Err(Error::Config(format!(
                "r_margin {} exceeds the deepest interior point ({:.4}); Omega_r^- is empty",
                r_margin,
                spec.max_depth()
            )));
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn r_margin(&self) -> f64 {
        self.r_margin
    }

    pub fn declared_category(&self) -> u32 {
        self.declared_category
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Ball { center, .. }
            | DomainKind::Annulus { center, .. }
            | DomainKind::MultiHole { center, .. }
            | DomainKind::Box { center, .. } => center.len(),
        }
    }

    /// Anchor point used to align the grid (domain center).
    fn anchor(&self) -> &[f64] {
        match &self.kind {
            DomainKind::Ball { center, .. }
            | DomainKind::Annulus { center, .. }
            | DomainKind::MultiHole { center, .. }
            | DomainKind::Box { center, .. } => center,
        }
    }

    /// Axis-aligned bounding box of Ω.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DomainKind::Ball { center, radius } | DomainKind::MultiHole { center, radius, .. } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainKind::Annulus { center, r_outer, .. } => (
                center.iter().map(|c| c - r_outer).collect(),
                center.iter().map(|c| c + r_outer).collect(),
            ),
            DomainKind::Box { center, half_widths } => (
                center.iter().zip(half_widths).map(|(c, w)| c - w).collect(),
                center.iter().zip(half_widths).map(|(c, w)| c + w).collect(),
            ),
        }
    }

    fn smallest_feature_of(kind: &DomainKind) -> f64 {
        match kind {
            DomainKind::Ball { radius, .. } => 2.0 * radius,
            DomainKind::Annulus { r_inner, r_outer, .. } => r_outer - r_inner,
            DomainKind::MultiHole { radius, holes, .. } => {
                let min_hole = holes.iter().map(|h| 2.0 * h.radius).fold(f64::MAX, f64::min);
                min_hole.min(2.0 * radius)
            }
            DomainKind::Box { half_widths, .. } => {
                2.0 * half_widths.iter().fold(f64::MAX, |a, &b| a.min(b))
            }
        }
    }

    /// Name and length of the smallest geometric feature (drives the
    /// minimum-resolution check).
    pub fn smallest_feature(&self) -> (&'static str, f64) {
        match &self.kind {
            DomainKind::Ball { .. } => ("ball diameter", Self::smallest_feature_of(&self.kind)),
            DomainKind::Annulus { .. } => ("annulus gap", Self::smallest_feature_of(&self.kind)),
            DomainKind::MultiHole { .. } => ("hole diameter", Self::smallest_feature_of(&self.kind)),
            DomainKind::Box { .. } => ("box side", Self::smallest_feature_of(&self.kind)),
        }
    }

    /// Strict membership test: true iff `x` lies in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::Ball { center, radius } => dist(x, center) < *radius,
            DomainKind::Annulus { center, r_inner, r_outer } => {
                let d = dist(x, center);
                d > *r_inner && d < *r_outer
            }
            DomainKind::MultiHole { center, radius, holes } => {
                dist(x, center) < *radius
                    && holes.iter().all(|h| dist(x, &h.center) > h.radius)
            }
            DomainKind::Box { center, half_widths } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((xi, ci), wi)| (xi - ci).abs() < *wi),
        }
    }

    /// Distance from an interior point to ∂Ω. Negative for exterior points.
    pub fn boundary_depth(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Ball { center, radius } => radius - dist(x, center),
            DomainKind::Annulus { center, r_inner, r_outer } => {
                let d = dist(x, center);
                (d - r_inner).min(r_outer - d)
            }
            DomainKind::MultiHole { center, radius, holes } => {
                let mut depth = radius - dist(x, center);
                for h in holes {
                    depth = depth.min(dist(x, &h.center) - h.radius);
                }
                depth
            }
            DomainKind::Box { center, half_widths } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .map(|((xi, ci), wi)| wi - (xi - ci).abs())
                .fold(f64::MAX, f64::min),
        }
    }

    /// Distance from `x` to the closed domain; zero inside.
    pub fn dist_to_domain(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            DomainKind::Annulus { center, r_inner, r_outer } => {
                let d = dist(x, center);
                (d - r_outer).max(r_inner - d).max(0.0)
            }
            DomainKind::MultiHole { center, radius, holes } => {
                let outer = (dist(x, center) - radius).max(0.0);
                if outer > 0.0 {
                    return outer;
                }
                // Inside the outer ball: positive only when inside some hole.
                holes
                    .iter()
                    .map(|h| (h.radius - dist(x, &h.center)).max(0.0))
                    .fold(0.0, f64::max)
            }
            DomainKind::Box { center, half_widths } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .map(|((xi, ci), wi)| ((xi - ci).abs() - wi).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Deepest interior depth (analytic where available, sampled otherwise).
    fn max_depth(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => *radius,
            DomainKind::Annulus { r_inner, r_outer, .. } => 0.5 * (r_outer - r_inner),
            DomainKind::Box { half_widths, .. } => {
                half_widths.iter().fold(f64::MAX, |a, &b| a.min(b))
            }
            DomainKind::MultiHole { .. } => {
                // No closed form; coarse deterministic scan of the bounding box.
                let (lo, hi) = self.bounding_box();
                let n = lo.len();
                let steps = 64usize;
                let mut best = f64::MIN;
                let mut idx = vec![0usize; n];
                loop {
                    let x: Vec<f64> = (0..n)
                        .map(|a| lo[a] + (hi[a] - lo[a]) * (idx[a] as f64 + 0.5) / steps as f64)
                        .collect();
                    let d = self.boundary_depth(&x);
                    if d > best {
                        best = d;
                    }
                    let mut a = 0;
                    loop {
                        idx[a] += 1;
                        if idx[a] < steps {
                            break;
                        }
                        idx[a] = 0;
                        a += 1;
                        if a == n {
                            return best;
                        }
                    }
                }
            }
        }
    }
}

/// Membership test for the outer neighborhood Ω_r^+ = {x : d(x, Ω) ≤ r}.
pub fn in_omega_r_plus(spec: &DomainSpec, x: &[f64]) -> bool {
    spec.dist_to_domain(x) <= spec.r_margin
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Uniform node lattice covering Ω with exterior padding and a strict
/// interior mask.
#[derive(Debug)]
pub struct Grid {
    n: usize,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    h: f64,
    origin: [f64; MAX_DIM],
    mask: Vec<bool>,
    masked: Vec<u32>,
}

impl Grid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.n]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.n]
    }

    /// Total node count (masked and unmasked).
    pub fn len(&self) -> usize {
        self.shape[..self.n].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Flat indices of mask-true nodes, ascending.
    pub fn masked_nodes(&self) -> &[u32] {
        &self.masked
    }

    pub fn interior_count(&self) -> usize {
        self.masked.len()
    }

    /// Stride of one step along `axis` in the flat array.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Cell volume Πh.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn coord(&self, idx: usize, axis: usize) -> f64 {
        let along = (idx / self.strides[axis]) % self.shape[axis];
        self.origin[axis] + along as f64 * self.h
    }

    pub fn node_position(&self, idx: usize) -> Vec<f64> {
        (0..self.n).map(|a| self.coord(idx, a)).collect()
    }

    /// Flat index of the node nearest to `x` (clamped to the lattice).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = 0usize;
        for a in 0..self.n {
            let along = ((x[a] - self.origin[a]) / self.h).round();
            let along = along.clamp(0.0, (self.shape[a] - 1) as f64) as usize;
            idx += along * self.strides[a];
        }
        idx
    }
}

/// Build the masked grid for `spec`; `resolution` is nodes per unit length.
pub fn build_grid(spec: &DomainSpec, resolution: u32) -> Result<Arc<Grid>> {
    if resolution == 0 {
        return Err(Error::Config("resolution must be positive".into()));
    }
    let (feature, length) = spec.smallest_feature();
    let nodes_across = length * resolution as f64;
    if nodes_across + 1e-9 < MIN_FEATURE_NODES as f64 {
        return Err(Error::TooCoarse {
            feature: feature.to_string(),
            got: nodes_across,
            need: MIN_FEATURE_NODES,
        });
    }

    let n = spec.dim();
    let h = 1.0 / resolution as f64;
    let anchor = spec.anchor();
    let (lo, hi) = spec.bounding_box();

    let mut shape = [1usize; MAX_DIM];
    let mut origin = [0f64; MAX_DIM];
    for a in 0..n {
        // Snap the lattice so the domain center falls exactly on a node;
        // symmetric domains then yield exactly symmetric masks.
        let k_lo = ((anchor[a] - lo[a]) / h).ceil() as usize + PAD_LAYERS;
        let k_hi = ((hi[a] - anchor[a]) / h).ceil() as usize + PAD_LAYERS;
        shape[a] = k_lo + k_hi + 1;
        origin[a] = anchor[a] - k_lo as f64 * h;
    }

    let mut strides = [1usize; MAX_DIM];
    for a in (0..n.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }

    let total: usize = shape[..n].iter().product();
    let mut mask = vec![false; total];
    let mut masked = Vec::new();
    let mut x = [0f64; MAX_DIM];
    for idx in 0..total {
        for a in 0..n {
            x[a] = origin[a] + (((idx / strides[a]) % shape[a]) as f64) * h;
        }
        if spec.contains(&x[..n]) {
            mask[idx] = true;
            masked.push(idx as u32);
        }
    }

    Ok(Arc::new(Grid {
        n,
        shape,
        strides,
        h,
        origin,
        mask,
        masked,
    }))
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// A discrete function on a grid: one value per node, identically zero on
/// unmasked nodes. Operations treat fields as immutable values.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

fn same_grid(a: &Field, b: &Field) {
    assert!(
        Arc::ptr_eq(&a.grid, &b.grid),
        "fields live on different grids"
    );
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len();
        Field {
            grid,
            values: vec![0.0; len],
        }
    }

    /// Sample `f` at the masked nodes; exterior nodes stay zero.
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        let n = grid.n();
        let mut x = [0f64; MAX_DIM];
        for &i in grid.masked_nodes() {
            let i = i as usize;
            for a in 0..n {
                x[a] = grid.coord(i, a);
            }
            values[i] = f(&x[..n]);
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Zero out every unmasked node. Idempotent.
    pub fn enforce_mask(&mut self) {
        for (v, &m) in self.values.iter_mut().zip(self.grid.mask()) {
            if !m {
                *v = 0.0;
            }
        }
    }

    /// Replace values through `f` on masked nodes.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = Field::zeros(self.grid.clone());
        for &i in self.grid.masked_nodes() {
            let i = i as usize;
            out.values[i] = f(self.values[i]);
        }
        out
    }

    /// Nodewise positive part max(u, 0).
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// a·self + b·other.
    pub fn linear_comb(&self, a: f64, other: &Field, b: f64) -> Self {
        same_grid(self, other);
        let mut out = Field::zeros(self.grid.clone());
        for &i in self.grid.masked_nodes() {
            let i = i as usize;
            out.values[i] = a * self.values[i] + b * other.values[i];
        }
        out
    }

    /// Nodewise product.
    pub fn mul(&self, other: &Field) -> Self {
        same_grid(self, other);
        let mut out = Field::zeros(self.grid.clone());
        for &i in self.grid.masked_nodes() {
            let i = i as usize;
            out.values[i] = self.values[i] * other.values[i];
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid
            .masked_nodes()
            .iter()
            .map(|&i| self.values[i as usize].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.grid
            .masked_nodes()
            .iter()
            .map(|&i| self.values[i as usize])
            .fold(f64::MIN, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn values_mut_unchecked(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Compensated (Neumaier) summation in a fixed order.
pub fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Midpoint-rule integral Πh · Σ u over masked nodes.
pub fn integrate(u: &Field) -> f64 {
    let g = u.grid();
    let sum = neumaier_sum(g.masked_nodes().iter().map(|&i| u.values()[i as usize]));
    sum * g.cell_volume()
}

/// L² inner product Πh · Σ u v.
pub fn l2_dot(u: &Field, v: &Field) -> f64 {
    same_grid(u, v);
    let g = u.grid();
    let sum = neumaier_sum(
        g.masked_nodes()
            .iter()
            .map(|&i| u.values()[i as usize] * v.values()[i as usize]),
    );
    sum * g.cell_volume()
}

/// |u|₂² over the masked nodes.
pub fn l2_sq_integral(u: &Field) -> f64 {
    l2_dot(u, u)
}

/// Dirichlet gradient energy |∇u|₂²: sum of squared forward differences over
/// every lattice edge with at least one masked endpoint, exterior values
/// taken as zero. This is exactly the quadratic form of [`apply_operator`]
/// at λ = 0 (summation by parts holds edge for edge).
pub fn grad_sq_integral(u: &Field) -> f64 {
    let g = u.grid();
    let vals = u.values();
    let scale = g.cell_volume() / (g.h() * g.h());
    let mut terms = Vec::with_capacity(g.interior_count() * 2 * g.n());
    for &i in g.masked_nodes() {
        let i = i as usize;
        let ui = vals[i];
        for a in 0..g.n() {
            let s = g.stride(a);
            // Forward edge always owned by the masked node.
            let d = vals[i + s] - ui;
            terms.push(d * d);
            // Backward edge owned here only when the neighbor is exterior.
            if !g.mask()[i - s] {
                terms.push(ui * ui);
            }
        }
    }
    neumaier_sum(terms.into_iter()) * scale
}

/// ‖u‖_λ² = |∇u|₂² + λ|u|₂².
pub fn h1_lambda_sq(u: &Field, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(grad_sq_integral(u) + lambda * l2_sq_integral(u))
}

/// Apply the Dirichlet operator (−Δ + λ) with the 2n+1 point stencil;
/// exterior nodes contribute zero and the output is masked.
pub fn apply_operator(u: &Field, lambda: f64) -> Field {
    let g = u.grid().clone();
    let vals = u.values();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let mut out = Field::zeros(g.clone());
    {
        let o = out.values_mut_unchecked();
        for &i in g.masked_nodes() {
            let i = i as usize;
            let ui = vals[i];
            let mut acc = lambda * ui;
            for a in 0..g.n() {
                let s = g.stride(a);
                acc += (2.0 * ui - vals[i + s] - vals[i - s]) * inv_h2;
            }
            o[i] = acc;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Omega_r^- sampling
// ---------------------------------------------------------------------------

/// `count` quasi-uniform points of the discrete Ω_r^-, chosen by
/// farthest-point sampling starting from the deepest node. Deterministic for
/// a fixed (grid, spec, count).
pub fn omega_r_minus_points(grid: &Grid, spec: &DomainSpec, count: usize) -> Result<Vec<Vec<f64>>> {
    let r = spec.r_margin();
    let n = grid.n();
    let mut nodes: Vec<(usize, f64)> = Vec::new();
    let mut x = [0f64; MAX_DIM];
    for &i in grid.masked_nodes() {
        let i = i as usize;
        for a in 0..n {
            x[a] = grid.coord(i, a);
        }
        let depth = spec.boundary_depth(&x[..n]);
        if depth >= r {
            nodes.push((i, depth));
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyInnerRegion { r_margin: r });
    }
    if count == 0 {
        return Err(Error::Parameter("requested zero sample points".into()));
    }
    if count > nodes.len() {
        return Err(Error::Parameter(format!(
            "requested {count} points but Omega_r^- has only {} grid nodes",
            nodes.len()
        )));
    }

    let pos: Vec<Vec<f64>> = nodes.iter().map(|&(i, _)| grid.node_position(i)).collect();

    // Start at the deepest node (first index wins ties).
    let mut best = 0usize;
    for (k, &(_, d)) in nodes.iter().enumerate() {
        if d > nodes[best].1 {
            best = k;
        }
    }
    let mut chosen = vec![best];
    let mut min_d2: Vec<f64> = pos.iter().map(|p| dist2(p, &pos[best])).collect();
    while chosen.len() < count {
        let mut far = 0usize;
        for k in 1..pos.len() {
            if min_d2[k] > min_d2[far] {
                far = k;
            }
        }
        chosen.push(far);
        for k in 0..pos.len() {
            let d2 = dist2(&pos[k], &pos[far]);
            if d2 < min_d2[k] {
                min_d2[k] = d2;
            }
        }
    }
    Ok(chosen.into_iter().map(|k| pos[k].clone()).collect())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------------------
// Field dumps
// ---------------------------------------------------------------------------

const FIELD_MAGIC: &[u8; 4] = b"CHQF";
const FIELD_VERSION: u16 = 1;

/// Raw contents of a field dump (geometry plus node values, no mask).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n: usize,
    pub shape: Vec<usize>,
    pub h: f64,
    pub origin: Vec<f64>,
    pub values: Vec<f64>,
}

/// Serialize a field: magic "CHQF", version u16, n u16, shape (u32 per axis),
/// h (f64), origin (f64 per axis), then the node values as little-endian f64
/// in row-major order.
pub fn write_field(u: &Field, path: &Path) -> Result<()> {
    let g = u.grid();
    let mut buf: Vec<u8> = Vec::with_capacity(32 + 8 * u.values().len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.n() as u16).to_le_bytes());
    for &s in g.shape() {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    buf.extend_from_slice(&g.h().to_le_bytes());
    for &o in g.origin() {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    for &v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<FieldDump> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |m: &str| Error::BadFieldDump(format!("{m} ({})", path.display()));
    if bytes.len() < 8 || &bytes[0..4] != FIELD_MAGIC {
        return Err(fail("missing CHQF magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FIELD_VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let n = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if n < 2 || n > MAX_DIM {
        return Err(fail("bad dimension"));
    }
    let mut off = 8usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        if off + len > bytes.len() {
            return Err(Error::BadFieldDump(format!(
                "truncated dump ({})",
                path.display()
            )));
        }
        let s = &bytes[off..off + len];
        off += len;
        Ok(s)
    };
    let mut shape = Vec::with_capacity(n);
    for _ in 0..n {
        let b = take(4)?;
        shape.push(u32::from_le_bytes(b.try_into().unwrap()) as usize);
    }
    let h = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let mut origin = Vec::with_capacity(n);
    for _ in 0..n {
        origin.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if off != bytes.len() {
        return Err(fail("trailing bytes"));
    }
    Ok(FieldDump {
        n,
        shape,
        h,
        origin,
        values,
    })
}

impl FieldDump {
    /// Reattach the dump to a grid with identical geometry.
    pub fn into_field(self, grid: Arc<Grid>) -> Result<Field> {
        if grid.n() != self.n
            || grid.shape() != self.shape.as_slice()
            || grid.h() != self.h
            || grid.origin() != self.origin.as_slice()
        {
            return Err(Error::BadFieldDump(
                "dump geometry does not match the grid".into(),
            ));
        }
        let mut f = Field {
            grid,
            values: self.values,
        };
        f.enforce_mask();
        Ok(f)
    }
}
