//! Critical points on the Nehari manifold: preconditioned projected descent
//! from bubble seeds, multi-start over the inner region, a warm-started
//! exponent sweep, and a string-relaxation min-max search for a higher
//! saddle candidate.
//!
//! One descent step is
//!
//! ```text
//! u ← project( trim( u − α · P · ∇I(u) ) )
//! ```
//!
//! where P solves (−Δ+λ)w = g by conjugate gradients (the Sobolev gradient),
//! trim drops the negative part (constrained critical points are
//! nonnegative), project is the closed-form Nehari scaling, and α backtracks
//! until sufficient decrease. Everything is deterministic: fixed summation
//! orders, sequential descents, order-stable aggregation.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::barycenter;
use crate::energy::{self, ChoquardParams, EnergyPieces};
use crate::error::{Error, Result};
use crate::grid::{self, DomainSpec, Field, Grid};
use crate::riesz::RieszKernel;

/// Tunables for descent, seeding, and deduplication.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when ‖P∇I‖ / ‖u‖_λ falls below this.
    pub grad_tol: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    pub sufficient_decrease: f64,
    /// Bubble concentration rate for seeds; `None` picks a default from the
    /// cut-off radius and the grid spacing.
    pub seed_r_scale: Option<f64>,
    pub seed_count: usize,
    /// Records merge when relative energies agree to this…
    pub dedup_energy_rtol: f64,
    /// …and barycenters sit within this many grid spacings.
    pub dedup_bary_dist_h: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Images on a min-max path (endpoints included).
    pub path_images: usize,
    pub path_sweeps: usize,
    /// Descent step for path images.
    pub path_step: f64,
    /// A saddle candidate must exceed both endpoints by this relative margin.
    pub high_energy_margin_rtol: f64,
    /// Localization window δ = this × m_ε.
    pub localization_delta_rtol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 600,
            grad_tol: 1e-5,
            step_init: 1.0,
            step_shrink: 0.5,
            sufficient_decrease: 1e-4,
            seed_r_scale: None,
            seed_count: 4,
            dedup_energy_rtol: 2e-3,
            dedup_bary_dist_h: 6.0,
            cg_tol: 1e-8,
            cg_max_iters: 400,
            path_images: 13,
            path_sweeps: 160,
            path_step: 0.35,
            high_energy_margin_rtol: 0.05,
            localization_delta_rtol: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_iters", self.max_iters as f64),
            ("grad_tol", self.grad_tol),
            ("step_init", self.step_init),
            ("sufficient_decrease", self.sufficient_decrease),
            ("dedup_energy_rtol", self.dedup_energy_rtol),
            ("dedup_bary_dist_h", self.dedup_bary_dist_h),
            ("cg_tol", self.cg_tol),
            ("cg_max_iters", self.cg_max_iters as f64),
            ("path_step", self.path_step),
            ("high_energy_margin_rtol", self.high_energy_margin_rtol),
            ("localization_delta_rtol", self.localization_delta_rtol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("solver.{name} must be positive")));
            }
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::Config("solver.step_shrink must lie in (0, 1)".into()));
        }
        if let Some(r) = self.seed_r_scale {
            if !(r > 0.0) {
                return Err(Error::Config("solver.seed_r must be positive".into()));
            }
        }
        if self.path_images < 5 {
            return Err(Error::Config("solver.path_images must be at least 5".into()));
        }
        Ok(())
    }

    /// Seed concentration rate: large enough that the cut-off ball carries
    /// 99% of the uncut bubble's gradient mass, capped so the bubble core
    /// still spans a few grid cells.
    pub fn resolve_seed_r(&self, n_eff: u32, cutoff_radius: f64, h: f64) -> f64 {
        if let Some(r) = self.seed_r_scale {
            return r;
        }
        let r99 = seed_r_for_gradient_mass(n_eff, cutoff_radius, 0.99);
        let resolvable = 1.0 / (5.0 * h);
        r99.min(resolvable).max(1.0)
    }
}

/// Smallest R with at least `fraction` of ∫|∇U_R|² inside radius `rho`,
/// from the scaled profile: mass(R·rho) of the unit bubble.
fn seed_r_for_gradient_mass(n_eff: u32, rho: f64, fraction: f64) -> f64 {
    let total = gradient_mass_within(n_eff, f64::INFINITY);
    let mut lo = 1.0f64;
    let mut hi = 2.0f64;
    while gradient_mass_within(n_eff, hi * rho) / total < fraction && hi < 1e7 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gradient_mass_within(n_eff, mid * rho) / total < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// ∫_0^s r^{N+1} (1+r²)^{-N} dr by midpoint rule (monotone integrand use only).
fn gradient_mass_within(n_eff: u32, s: f64) -> f64 {
    let nf = n_eff as f64;
    let cap = if s.is_finite() { s } else { 1e6 };
    let steps = 4000usize;
    let dr = cap / steps as f64;
    let mut acc = 0.0;
    for k in 0..steps {
        let r = (k as f64 + 0.5) * dr;
        acc += r.powf(nf + 1.0) * (1.0 + r * r).powf(-nf) * dr;
    }
    acc
}

/// Where a record came from.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedOrigin {
    Point(Vec<f64>),
    WarmStart,
    PathMinmax,
}

impl SeedOrigin {
    pub fn label(&self) -> String {
        match self {
            SeedOrigin::Point(p) => p
                .iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(";"),
            SeedOrigin::WarmStart => "warm-start".into(),
            SeedOrigin::PathMinmax => "path-minmax".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LowEnergy,
    HighEnergy,
}

/// A converged (or flagged) critical point candidate.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub field: Field,
    pub energy: f64,
    pub norm_lambda_sq: f64,
    pub barycenter: Vec<f64>,
    pub eps: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub seed_origin: SeedOrigin,
    pub classification: Classification,
    pub converged: bool,
}

impl SolutionRecord {
    /// Relative Nehari residual |G(u)| / ‖u‖_λ².
    pub fn nehari_rel_residual(&self, params: &ChoquardParams, kernel: &RieszKernel) -> f64 {
        let pieces = EnergyPieces::evaluate(&self.field, params, kernel).expect("valid field");
        ((pieces.norm_lambda_sq - pieces.d_term) / pieces.norm_lambda_sq).abs()
    }
}

/// Conjugate-gradient solve of (−Δ+λ)w = rhs on the masked nodes.
pub fn solve_preconditioner(
    rhs: &Field,
    lambda: f64,
    tol: f64,
    max_iters: usize,
    warm: Option<&Field>,
) -> Field {
    let grid = rhs.grid().clone();
    let mut x = match warm {
        Some(w) => w.clone(),
        None => Field::zeros(grid.clone()),
    };
    let ax = grid::apply_operator(&x, lambda);
    let mut r = rhs.linear_comb(1.0, &ax, -1.0);
    let rhs_norm = grid::l2_dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Field::zeros(grid);
    }
    let mut p = r.clone();
    let mut rr = grid::l2_dot(&r, &r);
    for _ in 0..max_iters {
        if rr.sqrt() <= tol * rhs_norm {
            break;
        }
        let ap = grid::apply_operator(&p, lambda);
        let pap = grid::l2_dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x = x.linear_comb(1.0, &p, alpha);
        r = r.linear_comb(1.0, &ap, -alpha);
        let rr_new = grid::l2_dot(&r, &r);
        let beta = rr_new / rr;
        p = r.linear_comb(1.0, &p, beta);
        rr = rr_new;
    }
    x
}

struct IterState {
    u: Field,
    pieces: EnergyPieces,
    value: f64,
}

fn eval_state(u: Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<IterState> {
    let pieces = EnergyPieces::evaluate(&u, params, kernel)?;
    let value = pieces.value(params);
    Ok(IterState { u, pieces, value })
}

fn project_trimmed(
    u: &Field,
    params: &ChoquardParams,
    kernel: &RieszKernel,
) -> Result<IterState> {
    let trimmed = u.positive_part();
    let pieces = EnergyPieces::evaluate(&trimmed, params, kernel)?;
    let t = energy::t_from_pieces(&pieces, params)?;
    eval_state(trimmed.scale(t), params, kernel)
}

/// Projected, preconditioned descent on the Nehari manifold from one seed.
pub fn nehari_descent(
    seed: &Field,
    params: &ChoquardParams,
    kernel: &RieszKernel,
    config: &SolverConfig,
    origin: SeedOrigin,
) -> Result<SolutionRecord> {
    config.validate()?;
    let mut state = project_trimmed(seed, params, kernel)?;
    let mut warm: Option<Field> = None;
    let mut iterations = 0usize;
    let mut rel_grad = f64::INFINITY;
    let mut converged = false;

    for it in 0..config.max_iters {
        iterations = it;
        let g = energy::gradient_from_pieces(&state.u, params, &state.pieces);
        let w = solve_preconditioner(&g, params.lambda(), config.cg_tol, config.cg_max_iters, warm.as_ref());
        let gw = grid::l2_dot(&g, &w).max(0.0);
        rel_grad = (gw / state.pieces.norm_lambda_sq).sqrt();
        if rel_grad < config.grad_tol {
            converged = true;
            break;
        }
        warm = Some(w.clone());

        let mut alpha = config.step_init;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = state.u.linear_comb(1.0, &w, -alpha);
            match project_trimmed(&trial, params, kernel) {
                Ok(candidate) => {
                    if candidate.value <= state.value - config.sufficient_decrease * alpha * gw {
                        // Accepted steps never increase the energy.
                        debug_assert!(candidate.value <= state.value + 1e-12 * state.value.abs());
                        state = candidate;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::NonpositiveField) => {} // over-stepped into u⁺ ≡ 0
                Err(e) => return Err(e),
            }
            alpha *= config.step_shrink;
        }
        if !accepted {
            // Line search stalled; report the current point with its
            // measured gradient norm.
            break;
        }
    }

    let bary = barycenter(&state.u)?;
    let report = state.pieces.report_with(params);
    debug_assert!(report.nehari_residual.abs() <= 1e-8 * report.norm_lambda_sq);
    Ok(SolutionRecord {
        field: state.u,
        energy: report.value,
        norm_lambda_sq: report.norm_lambda_sq,
        barycenter: bary,
        eps: params.eps(),
        iterations,
        final_grad_norm: rel_grad,
        seed_origin: origin,
        classification: Classification::LowEnergy,
        converged,
    })
}

/// One descent per farthest-point seed of Ω_r^-, plus any extra seed fields,
/// aggregated in seed order and sorted by energy.
pub fn multistart(
    grid: &Arc<Grid>,
    spec: &DomainSpec,
    params: &ChoquardParams,
    kernel: &Arc<RieszKernel>,
    config: &SolverConfig,
    extra_seeds: &[(Field, SeedOrigin)],
) -> Result<Vec<SolutionRecord>> {
    config.validate()?;
    if config.seed_count < spec.declared_category() as usize {
        return Err(Error::Parameter(format!(
            "seed_count {} is below the declared category {}",
            config.seed_count,
            spec.declared_category()
        )));
    }
    let points = grid::omega_r_minus_points(grid, spec, config.seed_count)?;
    let n_eff = params.n_eff();
    let r_scale = config.resolve_seed_r(n_eff, spec.r_margin(), grid.h());

    let mut seeds: Vec<(Field, SeedOrigin)> = Vec::with_capacity(points.len() + extra_seeds.len());
    for p in &points {
        let s = crate::bubbles::seed_bubble(grid, spec, p, r_scale)?;
        seeds.push((s, SeedOrigin::Point(p.clone())));
    }
    seeds.extend(extra_seeds.iter().cloned());

    let results: Vec<Result<SolutionRecord>> = seeds
        .par_iter()
        .map(|(seed, origin)| nehari_descent(seed, params, kernel, config, origin.clone()))
        .collect();

    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }
    if records.iter().all(|r| !r.converged) {
        return Err(Error::RunFailed(
            "no multistart descent converged; increase max_iters or refine the grid".into(),
        ));
    }
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(records)
}

/// Outcome of the min-max search between two solution classes.
#[derive(Debug)]
pub enum PathOutcome {
    /// A relaxed interior maximum with small gradient, strictly above both
    /// endpoints by the configured margin.
    Candidate(SolutionRecord, PathState),
    /// The path max descended to the endpoint level (or no saddle emerged at
    /// tolerance); carries the final path for inspection.
    Collapsed { reason: String, path: PathState },
}

/// Discretized path on the Nehari manifold.
#[derive(Debug)]
pub struct PathState {
    pub points: Vec<Field>,
    pub energies: Vec<f64>,
    pub max_index: usize,
}

impl PathState {
    fn from_points(points: Vec<Field>, params: &ChoquardParams, kernel: &RieszKernel) -> Result<Self> {
        let mut energies = Vec::with_capacity(points.len());
        for p in &points {
            energies.push(energy::energy(p, params, kernel)?.value);
        }
        let max_index = argmax(&energies);
        Ok(PathState {
            points,
            energies,
            max_index,
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// String-style relaxation: join two records on the manifold, deform the
/// interior images downhill, redistribute them along the path, and watch the
/// interior maximum. A stalled maximum with a small gradient is the saddle
/// candidate; a maximum that sinks to the endpoint level is a collapse.
pub fn path_minmax(
    a: &SolutionRecord,
    b: &SolutionRecord,
    params: &ChoquardParams,
    kernel: &RieszKernel,
    config: &SolverConfig,
) -> Result<PathOutcome> {
    config.validate()?;
    let h = a.field.grid().h();
    let same_energy =
        (a.energy - b.energy).abs() <= config.dedup_energy_rtol * 0.5 * (a.energy.abs() + b.energy.abs());
    let same_bary = dist(&a.barycenter, &b.barycenter) < config.dedup_bary_dist_h * h;
    if same_energy && same_bary {
        return Err(Error::Parameter(
            "path endpoints belong to the same solution class".into(),
        ));
    }

    let k_images = config.path_images;
    let mut points: Vec<Field> = Vec::with_capacity(k_images);
    for k in 0..k_images {
        let theta = k as f64 / (k_images - 1) as f64;
        let blend = a.field.linear_comb(1.0 - theta, &b.field, theta);
        if k == 0 {
            points.push(a.field.clone());
        } else if k == k_images - 1 {
            points.push(b.field.clone());
        } else {
            points.push(project_trimmed(&blend, params, kernel)?.u);
        }
    }

    let end_max = a.energy.max(b.energy);
    let mut last_state = PathState::from_points(points, params, kernel)?;

    for _sweep in 0..config.path_sweeps {
        // Downhill step on each interior image.
        for k in 1..k_images - 1 {
            let u = &last_state.points[k];
            let pieces = EnergyPieces::evaluate(u, params, kernel)?;
            let g = energy::gradient_from_pieces(u, params, &pieces);
            let w = solve_preconditioner(&g, params.lambda(), config.cg_tol, config.cg_max_iters, None);
            let gw = grid::l2_dot(&g, &w).max(0.0);
            if gw == 0.0 {
                continue;
            }
            let mut alpha = config.path_step;
            let current = pieces.value(params);
            for _ in 0..20 {
                let trial = u.linear_comb(1.0, &w, -alpha);
                if let Ok(candidate) = project_trimmed(&trial, params, kernel) {
                    if candidate.value <= current {
                        last_state.points[k] = candidate.u;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }

        // Redistribute images equidistantly along the piecewise-linear path
        // (L² arclength), then put them back on the manifold.
        let pts = &last_state.points;
        let mut cumulative = vec![0.0; k_images];
        for k in 1..k_images {
            let d = pts[k].linear_comb(1.0, &pts[k - 1], -1.0);
            cumulative[k] = cumulative[k - 1] + grid::l2_sq_integral(&d).sqrt();
        }
        let total = cumulative[k_images - 1];
        if total > 0.0 {
            let mut redistributed = Vec::with_capacity(k_images);
            redistributed.push(pts[0].clone());
            let mut seg = 1usize;
            for k in 1..k_images - 1 {
                let target = total * k as f64 / (k_images - 1) as f64;
                while seg < k_images - 1 && cumulative[seg] < target {
                    seg += 1;
                }
                let lo = cumulative[seg - 1];
                let hi = cumulative[seg];
                let t = if hi > lo { (target - lo) / (hi - lo) } else { 0.0 };
                let blend = pts[seg - 1].linear_comb(1.0 - t, &pts[seg], t);
                redistributed.push(project_trimmed(&blend, params, kernel)?.u);
            }
            redistributed.push(pts[k_images - 1].clone());
            last_state = PathState::from_points(redistributed, params, kernel)?;
        } else {
            last_state = PathState::from_points(pts.clone(), params, kernel)?;
        }

        let max_idx = last_state.max_index;
        let path_max = last_state.energies[max_idx];

        // Collapse: the barrier sank to the endpoint level.
        if path_max <= end_max + config.dedup_energy_rtol * end_max.abs() {
            return Ok(PathOutcome::Collapsed {
                reason: format!(
                    "path maximum {path_max:.6e} descended to the endpoint level {end_max:.6e}"
                ),
                path: last_state,
            });
        }

        // Saddle probe: once the interior maximum is nearly critical there
        // is no point sweeping further.
        if max_idx > 0 && max_idx < k_images - 1 {
            let u = &last_state.points[max_idx];
            let pieces = EnergyPieces::evaluate(u, params, kernel)?;
            let g = energy::gradient_from_pieces(u, params, &pieces);
            let w = solve_preconditioner(&g, params.lambda(), config.cg_tol, config.cg_max_iters, None);
            let gw = grid::l2_dot(&g, &w).max(0.0);
            let rel = (gw / pieces.norm_lambda_sq).sqrt();
            if rel < config.grad_tol {
                break;
            }
        }
    }

    // Descend from the relaxed path maximum. A nearby constrained critical
    // point (often a multi-bump state) comes out as the candidate; sliding
    // back down to the endpoint level is a collapse.
    let max_idx = last_state.max_index;
    if max_idx == 0 || max_idx == k_images - 1 {
        return Ok(PathOutcome::Collapsed {
            reason: "path maximum sits on an endpoint".into(),
            path: last_state,
        });
    }
    let candidate = nehari_descent(
        &last_state.points[max_idx],
        params,
        kernel,
        config,
        SeedOrigin::PathMinmax,
    )?;
    let margin = config.high_energy_margin_rtol * end_max.abs();
    if candidate.converged && candidate.energy > end_max + margin {
        let record = SolutionRecord {
            classification: Classification::HighEnergy,
            ..candidate
        };
        return Ok(PathOutcome::Candidate(record, last_state));
    }
    Ok(PathOutcome::Collapsed {
        reason: format!(
            "descent from the path maximum reached {:.6e} (converged: {}), within the \
             margin of the endpoint level {end_max:.6e}: no saddle found at tolerance",
            candidate.energy, candidate.converged
        ),
        path: last_state,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One row of an exponent sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub m_eps: f64,
    pub barycenter: Vec<f64>,
    pub sup_norm: f64,
    pub converged: bool,
    /// The minimizer behind m_ε, kept for dumps and warm starts.
    pub minimizer: Option<SolutionRecord>,
}

/// Decreasing-ε sweep, warm-starting each level from the previous minimizer.
pub fn eps_sweep(
    grid: &Arc<Grid>,
    spec: &DomainSpec,
    params_base: &ChoquardParams,
    kernel: &Arc<RieszKernel>,
    eps_list: &[f64],
    config: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    if eps_list.is_empty() {
        return Err(Error::Parameter("eps_list must not be empty".into()));
    }
    let q = params_base.two_mu_star();
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Parameter(
                "eps_list must be strictly decreasing".into(),
            ));
        }
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < q - 1.0)) {
        return Err(Error::Parameter(format!(
            "every eps must lie in (0, 2mu*-1) = (0, {})",
            q - 1.0
        )));
    }

    let mut rows = Vec::with_capacity(eps_list.len());
    let mut warm_seed: Option<Field> = None;
    for &eps in eps_list {
        let params = params_base.at_eps(eps)?;
        let extra: Vec<(Field, SeedOrigin)> = warm_seed
            .take()
            .map(|f| vec![(f, SeedOrigin::WarmStart)])
            .unwrap_or_default();
        match multistart(grid, spec, &params, kernel, config, &extra) {
            Ok(records) => {
                let best = records
                    .iter()
                    .find(|r| r.converged)
                    .expect("multistart guarantees one converged record");
                rows.push(SweepRow {
                    eps,
                    m_eps: best.energy,
                    barycenter: best.barycenter.clone(),
                    sup_norm: best.field.sup_norm(),
                    converged: true,
                    minimizer: Some(best.clone()),
                });
                warm_seed = Some(best.field.clone());
            }
            Err(e) => {
                rows.push(SweepRow {
                    eps,
                    m_eps: f64::NAN,
                    barycenter: vec![f64::NAN; grid.n()],
                    sup_norm: f64::NAN,
                    converged: false,
                    minimizer: None,
                });
                eprintln!("eps = {eps}: {e}");
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::riesz::build_kernel;

    fn disk_problem(
        resolution: u32,
        eps: f64,
    ) -> (Arc<Grid>, DomainSpec, ChoquardParams, Arc<RieszKernel>) {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0, Some(0.3)).unwrap();
        let grid = build_grid(&spec, resolution).unwrap();
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, eps).unwrap();
        let kernel = build_kernel(&grid, 1.0).unwrap();
        (grid, spec, params, kernel)
    }

    #[test]
    fn descent_from_center_converges_to_centered_state() {
        let (grid, spec, params, kernel) = disk_problem(32, 0.5);
        let config = SolverConfig::default();
        let seed = crate::bubbles::seed_bubble(&grid, &spec, &[0.0, 0.0], 8.0).unwrap();
        let rec = nehari_descent(&seed, &params, &kernel, &config, SeedOrigin::Point(vec![0.0, 0.0]))
            .unwrap();
        assert!(rec.converged, "grad norm {}", rec.final_grad_norm);
        assert!(rec.final_grad_norm < config.grad_tol);
        assert!(rec.energy > 0.0);
        // Symmetry pins the barycenter to the center.
        let d = (rec.barycenter[0].powi(2) + rec.barycenter[1].powi(2)).sqrt();
        assert!(d < 2.0 * grid.h(), "barycenter drifted to {:?}", rec.barycenter);
        // The record sits on the manifold with nonnegative values.
        assert!(rec.nehari_rel_residual(&params, &kernel) < 1e-8);
        assert!(rec.field.values().iter().all(|&v| v >= -1e-12));

        // Restarting from the converged record terminates immediately.
        let again = nehari_descent(
            &rec.field,
            &params,
            &kernel,
            &config,
            SeedOrigin::WarmStart,
        )
        .unwrap();
        assert!(again.converged);
        assert!(again.iterations <= 2, "restart took {} iterations", again.iterations);
    }

    #[test]
    fn descent_rejects_nonpositive_seed() {
        let (grid, _spec, params, kernel) = disk_problem(24, 0.5);
        let config = SolverConfig::default();
        let seed = Field::from_fn(grid, |x| -(1.0 + x[0] * x[0]));
        let err = nehari_descent(&seed, &params, &kernel, &config, SeedOrigin::WarmStart);
        assert!(matches!(err, Err(crate::error::Error::NonpositiveField)));
    }

    #[test]
    fn multistart_validates_seed_count() {
        let (grid, spec, params, kernel) = disk_problem(24, 0.5);
        let config = SolverConfig {
            seed_count: 0,
            ..SolverConfig::default()
        };
        assert!(multistart(&grid, &spec, &params, &kernel, &config, &[]).is_err());
    }

    #[test]
    fn sweep_validates_eps_list() {
        let (grid, spec, params, kernel) = disk_problem(24, 0.5);
        let config = SolverConfig::default();
        for bad in [vec![0.5, 0.5], vec![0.2, 0.4], vec![5.0, 0.1]] {
            assert!(eps_sweep(&grid, &spec, &params, &kernel, &bad, &config).is_err());
        }
    }

    #[test]
    fn path_rejects_identical_endpoints() {
        let (grid, spec, params, kernel) = disk_problem(24, 0.5);
        let config = SolverConfig::default();
        let seed = crate::bubbles::seed_bubble(&grid, &spec, &[0.0, 0.0], 8.0).unwrap();
        let rec = nehari_descent(&seed, &params, &kernel, &config, SeedOrigin::WarmStart).unwrap();
        let err = path_minmax(&rec, &rec.clone(), &params, &kernel, &config);
        assert!(matches!(err, Err(crate::error::Error::Parameter(_))));
    }
}
