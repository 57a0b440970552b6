//! Closed-form bubble profiles, cut-off seeds, and the whole-space radial
//! quadrature oracle for the critical constants.
//!
//! The bubble family U_{R,a}(x) = C_N (R/(1+R²|x−a|²))^{(N−2)/2} with
//! C_N = (N(N−2))^{(N−2)/4} realizes the extremals of the sharp convolution
//! inequality. Its gradient integral and critical double integral are
//! computed here on graded Gauss–Legendre meshes, independently of any grid
//! code, and combined into the best constant S_{H,L}, the least limit energy
//! m_*, and the Nehari scaling of the bubble.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Field, Grid};
use std::sync::Arc;

/// Closed-form bubble U_{R,a} in dimension N ≥ 3.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleSpec {
    pub n: u32,
    pub r_scale: f64,
    pub center: Vec<f64>,
}

impl BubbleSpec {
    pub fn new(n: u32, r_scale: f64, center: &[f64]) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("bubble dimension must be >= 3, got {n}")));
        }
        if !(r_scale > 0.0) {
            return Err(Error::Parameter("concentration rate R must be positive".into()));
        }
        Ok(BubbleSpec {
            n,
            r_scale,
            center: center.to_vec(),
        })
    }

    /// Normalization C_N = (N(N−2))^{(N−2)/4}.
    pub fn normalization(&self) -> f64 {
        bubble_normalization(self.n)
    }
}

pub fn bubble_normalization(n: u32) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// Evaluate U_{R,a} at a point.
pub fn bubble_eval(spec: &BubbleSpec, x: &[f64]) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(&spec.center)
        .map(|(xi, ai)| (xi - ai) * (xi - ai))
        .sum();
    let nf = spec.n as f64;
    let base = spec.r_scale / (1.0 + spec.r_scale * spec.r_scale * r2);
    spec.normalization() * base.powf((nf - 2.0) / 2.0)
}

/// Radial profile U_1(r) and its derivative for dimension N.
fn u1(n: u32, r: f64) -> f64 {
    let nf = n as f64;
    bubble_normalization(n) * (1.0 + r * r).powf(-(nf - 2.0) / 2.0)
}

fn u1_prime_sq(n: u32, r: f64) -> f64 {
    let nf = n as f64;
    let c = bubble_normalization(n);
    let d = c * (nf - 2.0) * r * (1.0 + r * r).powf(-nf / 2.0);
    d * d
}

/// C¹ cut-off: 1 inside |x−x0| < r/2, 0 outside |x−x0| > r, cubic smoothstep
/// ramp in between.
pub fn cutoff_chi(x: &[f64], x0: &[f64], r: f64) -> f64 {
    assert!(r > 0.0, "cut-off radius must be positive");
    let d: f64 = x
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if d <= 0.5 * r {
        1.0
    } else if d >= r {
        0.0
    } else {
        let t = (d - 0.5 * r) / (0.5 * r);
        1.0 - (3.0 * t * t - 2.0 * t * t * t)
    }
}

/// Cut-off bubble seed supported in B_r(x0) ∩ Ω.
///
/// The profile dimension follows the grid convention (N_eff = 3 on planar
/// grids); amplitude is a convention only, since the Nehari projection of
/// t(su)·su is independent of s.
pub fn seed_bubble(grid: &Arc<Grid>, spec: &DomainSpec, x0: &[f64], r_scale: f64) -> Result<Field> {
    let r = spec.r_margin();
    if !(spec.contains(x0) && spec.boundary_depth(x0) >= r) {
        return Err(Error::Parameter(format!(
            "seed center {x0:?} is not in Omega_r^- (r_margin {r})"
        )));
    }
    let n_eff = crate::energy::default_n_eff(grid.n());
    let bubble = BubbleSpec::new(n_eff, r_scale, x0)?;
    let field = Field::from_fn(grid.clone(), |x| bubble_eval(&bubble, x) * cutoff_chi(x, x0, r));
    if field.sup_norm() == 0.0 {
        return Err(Error::RunFailed(
            "seed bubble vanished on the grid; refine the resolution".into(),
        ));
    }
    Ok(field)
}

// ---------------------------------------------------------------------------
// Radial quadrature
// ---------------------------------------------------------------------------

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for k in 0..order {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x), P_{n-1}(x).
            let (mut p0, mut p1) = (1.0f64, x);
            for j in 2..=order {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for j in 2..=order {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let dp = nf * (x * p1 - p0) / (x * x - 1.0);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Sampled radial function with quadrature weights: under the stored weights,
/// ∫_{R^N} f = |S^{N−1}| Σ w_j f(r_j) r_j^{N−1}.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub n: u32,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialProfile {
    /// Sample `f` on a graded composite Gauss–Legendre mesh reaching `r_max`:
    /// four equal panels on [0, 1], then dyadic panels outward.
    pub fn sample(n: u32, r_max: f64, order: usize, f: impl Fn(f64) -> f64) -> Self {
        let (gl_x, gl_w) = gauss_legendre(order);
        let mut panels: Vec<(f64, f64)> = Vec::new();
        for k in 0..4 {
            panels.push((0.25 * k as f64, 0.25 * (k + 1) as f64));
        }
        let mut lo = 1.0f64;
        while lo < r_max {
            let hi = (2.0 * lo).min(r_max);
            panels.push((lo, hi));
            lo = hi;
        }
        let mut radii = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for (a, b) in panels {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for k in 0..order {
                radii.push(mid + half * gl_x[k]);
                weights.push(half * gl_w[k]);
            }
        }
        let values = radii.iter().map(|&r| f(r)).collect();
        RadialProfile {
            n,
            radii,
            values,
            weights,
        }
    }

    /// |S^{N−1}| Σ w f(r) r^{N−1}.
    pub fn volume_integral(&self) -> f64 {
        let nf = self.n as f64;
        let sum = crate::grid::neumaier_sum(
            self.radii
                .iter()
                .zip(&self.values)
                .zip(&self.weights)
                .map(|((&r, &v), &w)| w * v * r.powf(nf - 1.0)),
        );
        unit_sphere_area(self.n) * sum
    }
}

/// |S^{m}| = 2 π^{(m+1)/2} / Γ((m+1)/2), surface area of the unit sphere in
/// R^{m+1}; only integer and half-integer gamma arguments occur.
pub fn unit_sphere_area(ambient_dim: u32) -> f64 {
    let m = ambient_dim; // sphere S^{m-1} bounding the unit ball of R^m
    let half = m as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(m)
}

/// Γ(m/2) for integer m ≥ 1.
fn gamma_half_integer(m: u32) -> f64 {
    if m % 2 == 0 {
        // Γ(k) = (k-1)!
        let k = m / 2;
        (1..k).map(|j| j as f64).product::<f64>().max(1.0)
    } else {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (m - 1) / 2;
        let mut g = std::f64::consts::PI.sqrt();
        for j in 0..k {
            g *= j as f64 + 0.5;
        }
        g
    }
}

/// Angular factor of the bivariate Riesz integral:
/// K_ang(r, s) = |S^{N−2}| ∫₀^π sin^{N−2}θ (r² + s² − 2 r s cosθ)^{−μ/2} dθ.
///
/// Homogeneous of degree −μ: K_ang(λr, λs) = λ^{−μ} K_ang(r, s), which the
/// bivariate quadrature below exploits to tabulate it on one ray only.
fn angular_kernel(n: u32, mu: f64, r: f64, s: f64, order: usize, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    // Panels graded toward θ = 0 where the integrand steepens for r ≈ s.
    const GRADE_LEVELS: usize = 14;
    let (gl_x, gl_w) = gl;
    let nf = n as f64;
    let mut total = 0.0;
    let mut hi = std::f64::consts::PI;
    for level in 0..=GRADE_LEVELS {
        let lo = if level == GRADE_LEVELS { 0.0 } else { hi * 0.5 };
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut panel = 0.0;
        for k in 0..order {
            let theta = mid + half * gl_x[k];
            let d2 = r * r + s * s - 2.0 * r * s * theta.cos();
            panel += gl_w[k] * theta.sin().powf(nf - 2.0) * d2.powf(-0.5 * mu);
        }
        total += half * panel;
        hi = lo;
        if hi == 0.0 {
            break;
        }
    }
    unit_sphere_area(n - 1) * total
}

/// ∬_{R^N × R^N} f(|x|) f(|y|) |x−y|^{−μ} dx dy for radial f, reduced to
/// nested 1-d quadratures.
///
/// Splitting at the diagonal and substituting s = rσ turns the inner
/// integral into a fixed mesh on σ ∈ [0, 1]:
///
/// ```text
/// ∬ = 2 |S^{N−1}| ∫₀^∞ f(r) r^{2N−1−μ} [ ∫₀^1 f(rσ) σ^{N−1} K̃(σ) dσ ] dr
/// ```
///
/// with K̃(σ) = K_ang(1, σ). The diagonal kink of the bivariate integrand
/// becomes the σ = 1 endpoint, so both meshes see smooth integrands and the
/// composite Gauss rules converge cleanly under refinement.
fn bivariate_riesz_radial(
    n: u32,
    mu: f64,
    f: &dyn Fn(f64) -> f64,
    r_max: f64,
    order: usize,
) -> f64 {
    let nf = n as f64;
    let (gl_x, gl_w) = gauss_legendre(order);

    // σ mesh on [0, 1], dyadically graded toward the diagonal endpoint σ = 1
    // where K̃ can have a |1−σ|^{N−1−μ} corner.
    let mut panels: Vec<(f64, f64)> = Vec::new();
    let mut lo = 0.0f64;
    let mut width = 0.5f64;
    for _ in 0..40 {
        panels.push((lo, lo + width));
        lo += width;
        width *= 0.5;
    }
    panels.push((lo, 1.0));
    let mut sigma_nodes = Vec::new();
    let mut sigma_weights = Vec::new();
    for (a, b) in panels {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for k in 0..order {
            sigma_nodes.push(mid + half * gl_x[k]);
            sigma_weights.push(half * gl_w[k]);
        }
    }
    let gl = (gl_x.clone(), gl_w.clone());
    let k_tilde: Vec<f64> = sigma_nodes
        .iter()
        .map(|&s| angular_kernel(n, mu, 1.0, s, order, &gl))
        .collect();

    let inner = |r: f64| -> f64 {
        let mut acc = 0.0;
        for ((&s, &w), &k) in sigma_nodes.iter().zip(&sigma_weights).zip(&k_tilde) {
            acc += w * f(r * s) * s.powf(nf - 1.0) * k;
        }
        acc
    };

    let outer = RadialProfile::sample(n, r_max, order, |r| {
        f(r) * r.powf(nf - mu) * inner(r)
    });
    // `volume_integral` supplies |S^{N−1}| and one r^{N−1} factor; the other
    // r^{N−1−μ} power sits in the sampled profile, and the diagonal split
    // contributes the factor 2.
    2.0 * outer.volume_integral()
}

// ---------------------------------------------------------------------------
// Critical constants
// ---------------------------------------------------------------------------

/// Whole-space constants of the critical problem at (N, μ), computed by
/// independent radial quadrature of the standard bubble U_1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalConstants {
    pub n: u32,
    pub mu: f64,
    /// ∫ |∇U_1|² over R^N.
    pub grad_u1_sq: f64,
    /// ∬ U_1^{2μ*}(x) U_1^{2μ*}(y) |x−y|^{−μ} over R^N × R^N.
    pub d_crit_u1: f64,
    /// Best constant grad / d^{(N−2)/(2N−μ)}.
    pub s_hl: f64,
    /// Least limit energy ((2μ*−1)/(2·2μ*)) S_{H,L}^{2μ*/(2μ*−1)}.
    pub m_star: f64,
    /// Nehari scaling of U_1: (grad/d)^{1/(2·2μ*−2)}.
    pub t_star_u1: f64,
    /// Relative change of (grad, d) under one quadrature refinement.
    pub refine_delta: f64,
}

impl CriticalConstants {
    pub fn two_mu_star(&self) -> f64 {
        crate::energy::critical_exponent(self.n, self.mu)
    }

    /// m_* recomputed through the projected bubble: the critical on-manifold
    /// energy (1/2 − 1/(2·2μ*)) ‖t_* U_1‖² — an independent formula route
    /// over the same quadrature values.
    pub fn m_star_from_projected_bubble(&self) -> f64 {
        let q = self.two_mu_star();
        (0.5 - 1.0 / (2.0 * q)) * self.t_star_u1 * self.t_star_u1 * self.grad_u1_sq
    }

    /// Critical-mode Nehari residual of the projected bubble, relative.
    pub fn projected_bubble_residual(&self) -> f64 {
        let q = self.two_mu_star();
        let t = self.t_star_u1;
        let norm = t * t * self.grad_u1_sq;
        let d = t.powf(2.0 * q) * self.d_crit_u1;
        ((norm - d) / norm).abs()
    }
}

/// |grad − d| / grad for the unprojected bubble. The constants module only
/// reports this; all downstream consumers use the projected bubble, whose
/// residual vanishes by construction.
pub fn bubble_nehari_defect(constants: &CriticalConstants) -> f64 {
    (constants.grad_u1_sq - constants.d_crit_u1).abs() / constants.grad_u1_sq
}

fn compute_at_order(n: u32, mu: f64, order: usize) -> (f64, f64) {
    let nf = n as f64;
    let q = crate::energy::critical_exponent(n, mu);

    // Gradient integrand decays like r^{1-N}: push r_max far enough out that
    // the truncated tail is below 1e-9 relative.
    let r_max_grad = 10f64.powf(10.0 / (nf - 2.0)).max(1e4);
    let grad = RadialProfile::sample(n, r_max_grad, order, |r| u1_prime_sq(n, r)).volume_integral();

    // U_1^{2μ*} decays like r^{-(2N-μ)}; tail of its radial moment is below
    // 1e-8 relative once r_max^{-(N-μ)} is.
    let r_max_d = 10f64.powf(8.0 / (nf - mu)).max(100.0);
    let f = move |r: f64| u1(n, r).powf(q);
    let d = bivariate_riesz_radial(n, mu, &f, r_max_d, order);

    (grad, d)
}

type ConstantsKey = (u32, u64, usize);
static CONSTANTS_CACHE: OnceLock<Mutex<HashMap<ConstantsKey, CriticalConstants>>> = OnceLock::new();

pub const DEFAULT_QUAD_POINTS: usize = 16;

/// Compute (and cache) the critical constants for (N, μ). `quad_points` is
/// the Gauss–Legendre order per mesh panel; the computation is repeated at
/// twice the order and rejected if the two disagree beyond 1e−6 relative.
pub fn critical_constants(n: u32, mu: f64, quad_points: usize) -> Result<CriticalConstants> {
    if n < 3 {
        return Err(Error::Parameter(format!("dimension must be >= 3, got {n}")));
    }
    if !(mu > 0.0 && mu < n as f64) {
        return Err(Error::Parameter(format!("mu must lie in (0, {n}), got {mu}")));
    }
    if quad_points < 4 {
        return Err(Error::Parameter("quad_points must be at least 4".into()));
    }
    let key = (n, mu.to_bits(), quad_points);
    if let Some(hit) = CONSTANTS_CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap()
        .get(&key)
    {
        return Ok(*hit);
    }

    let (grad_coarse, d_coarse) = compute_at_order(n, mu, quad_points);
    let (grad, d) = compute_at_order(n, mu, quad_points * 2);
    let delta_grad = ((grad - grad_coarse) / grad).abs();
    let delta_d = ((d - d_coarse) / d).abs();
    let refine_delta = delta_grad.max(delta_d);
    if refine_delta > 1e-6 {
        return Err(Error::QuadratureNonConvergence(format!(
            "(N={n}, mu={mu}): refinement moved grad by {delta_grad:.2e}, d by {delta_d:.2e} \
             (order {quad_points} vs {})",
            quad_points * 2
        )));
    }

    let q = crate::energy::critical_exponent(n, mu);
    let s_hl = grad / d.powf(1.0 / q);
    let m_star = ((q - 1.0) / (2.0 * q)) * s_hl.powf(q / (q - 1.0));
    let t_star_u1 = (grad / d).powf(1.0 / (2.0 * q - 2.0));

    let constants = CriticalConstants {
        n,
        mu,
        grad_u1_sq: grad,
        d_crit_u1: d,
        s_hl,
        m_star,
        t_star_u1,
        refine_delta,
    };
    CONSTANTS_CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap()
        .insert(key, constants);
    Ok(constants)
}

/// Quadrature-only evaluation of the two bubble integrals for a rescaled
/// bubble U_R; both are scale invariant at the critical exponent, which the
/// tests use as a consistency probe.
pub fn bubble_integrals_at_scale(n: u32, mu: f64, r_scale: f64, order: usize) -> (f64, f64) {
    let nf = n as f64;
    let q = crate::energy::critical_exponent(n, mu);
    let c = bubble_normalization(n);
    let amp = c * r_scale.powf((nf - 2.0) / 2.0);
    let u = move |r: f64| amp * (1.0 + r_scale * r_scale * r * r).powf(-(nf - 2.0) / 2.0);
    let du_sq = move |r: f64| {
        let d = amp * (nf - 2.0) * r_scale * r_scale * r
            * (1.0 + r_scale * r_scale * r * r).powf(-nf / 2.0);
        d * d
    };

    let r_max_grad = (10f64.powf(10.0 / (nf - 2.0)).max(1e4)) / r_scale;
    let grad = RadialProfile::sample(n, r_max_grad, order, du_sq).volume_integral();

    let r_max_d = (10f64.powf(8.0 / (nf - mu)).max(100.0)) / r_scale;
    let f = move |r: f64| u(r).powf(q);
    let d = bivariate_riesz_radial(n, mu, &f, r_max_d, order);
    (grad, d)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn bubble_values_match_closed_form() {
        // N = 4, R = 1 at the center: (4·2)^{1/2}.
        let b = BubbleSpec::new(4, 1.0, &[0.0, 0.0, 0.0, 0.0]).unwrap();
        let v = bubble_eval(&b, &[0.0, 0.0, 0.0, 0.0]);
        assert!((v - 8.0f64.sqrt()).abs() < 1e-14, "{v}");
        // N = 3, R = 4 at the center: 3^{1/4} · 4^{1/2}.
        let b = BubbleSpec::new(3, 4.0, &[0.1, 0.2, 0.3]).unwrap();
        let v = bubble_eval(&b, &[0.1, 0.2, 0.3]);
        assert!((v - 3.0f64.powf(0.25) * 2.0).abs() < 1e-14, "{v}");
        assert!(BubbleSpec::new(2, 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn bubble_tail_decay_exponent() {
        for n in [3u32, 4, 5] {
            let b = BubbleSpec::new(n, 1.0, &[0.0, 0.0, 0.0]).unwrap();
            let v10 = bubble_eval(&b, &[10.0, 0.0, 0.0]);
            let v20 = bubble_eval(&b, &[20.0, 0.0, 0.0]);
            let slope = (v10 / v20).ln() / 2.0f64.ln();
            let want = (n - 2) as f64;
            assert!((slope - want).abs() / want < 0.02, "N={n}: slope {slope}");
        }
    }

    #[test]
    fn cutoff_profile() {
        let x0 = [0.0, 0.0];
        let r = 0.4;
        assert_eq!(cutoff_chi(&[0.1, 0.0], &x0, r), 1.0); // d = r/4
        assert_eq!(cutoff_chi(&[0.8, 0.0], &x0, r), 0.0); // d = 2r
        let mid = cutoff_chi(&[0.3, 0.0], &x0, r); // d = 3r/4
        assert!((mid - 0.5).abs() < 1e-14, "ramp midpoint {mid}");
        // Monotone on the ramp.
        let mut last = 1.0;
        for k in 0..=20 {
            let d = 0.2 + 0.2 * k as f64 / 20.0;
            let v = cutoff_chi(&[d, 0.0], &x0, r);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn seed_support_and_center_rejection() {
        let spec = crate::grid::DomainSpec::ball(&[0.0, 0.0], 1.0, Some(0.3)).unwrap();
        let grid = build_grid(&spec, 32).unwrap();
        let seed = seed_bubble(&grid, &spec, &[0.2, 0.1], 8.0).unwrap();
        for &i in grid.masked_nodes() {
            let i = i as usize;
            if seed.values()[i] != 0.0 {
                let x = grid.node_position(i);
                let d = ((x[0] - 0.2f64).powi(2) + (x[1] - 0.1f64).powi(2)).sqrt();
                assert!(d <= 0.3 + 1e-12, "support leaked to distance {d}");
            }
        }
        // Center outside Omega_r^-: rejected.
        assert!(seed_bubble(&grid, &spec, &[0.9, 0.0], 8.0).is_err());
    }

    #[test]
    fn larger_r_concentrates_the_seed() {
        let spec = crate::grid::DomainSpec::ball(&[0.0, 0.0], 1.0, Some(0.4)).unwrap();
        let grid = build_grid(&spec, 48).unwrap();
        let x0 = [0.0, 0.0];
        let mut last_ratio = 0.0;
        for r_scale in [4.0, 8.0, 16.0] {
            let u = seed_bubble(&grid, &spec, &x0, r_scale).unwrap();
            let u2 = u.mul(&u);
            let total = crate::grid::integrate(&u2);
            let core = crate::grid::integrate(&Field::from_fn(grid.clone(), |x| {
                let d2 = x[0] * x[0] + x[1] * x[1];
                if d2 <= 0.1 * 0.1 {
                    let v = bubble_eval(
                        &BubbleSpec::new(3, r_scale, &x0).unwrap(),
                        x,
                    ) * cutoff_chi(x, &x0, 0.4);
                    v * v
                } else {
                    0.0
                }
            }));
            let ratio = core / total;
            assert!(ratio > last_ratio, "R={r_scale}: ratio {ratio} <= {last_ratio}");
            last_ratio = ratio;
        }
    }

    #[test]
    fn centered_seed_is_rotation_symmetric() {
        let spec = crate::grid::DomainSpec::ball(&[0.0, 0.0], 1.0, Some(0.3)).unwrap();
        let grid = build_grid(&spec, 32).unwrap();
        let u = seed_bubble(&grid, &spec, &[0.0, 0.0], 8.0).unwrap();
        let sup = u.sup_norm();
        for &i in grid.masked_nodes() {
            let i = i as usize;
            let x = grid.node_position(i);
            // 90-degree rotation maps the node lattice to itself.
            let j = grid.nearest_node(&[-x[1], x[0]]);
            let dev = (u.values()[i] - u.values()[j]).abs();
            assert!(dev <= 1e-10 * sup, "rotation asymmetry {dev} at {x:?}");
        }
    }

    #[test]
    fn gradient_integral_matches_beta_closed_form() {
        // ∫|∇U_1|² has the closed value |S^{N-1}| C² (N-2)² · B((N+2)/2, (N-2)/2) / 2.
        // For N = 3: 3√3 π²/4; for N = 4: 32 π²/3.
        let c3 = critical_constants(3, 1.0, DEFAULT_QUAD_POINTS).unwrap();
        let want3 = 3.0 * 3.0f64.sqrt() * std::f64::consts::PI.powi(2) / 4.0;
        assert!(((c3.grad_u1_sq - want3) / want3).abs() < 1e-8, "{}", c3.grad_u1_sq);
        let c4 = critical_constants(4, 2.0, DEFAULT_QUAD_POINTS).unwrap();
        let want4 = 32.0 * std::f64::consts::PI.powi(2) / 3.0;
        assert!(((c4.grad_u1_sq - want4) / want4).abs() < 1e-8, "{}", c4.grad_u1_sq);
    }

    #[test]
    fn m_star_two_routes_agree() {
        for (n, mu) in [(3u32, 1.0f64), (4, 2.0)] {
            let c = critical_constants(n, mu, DEFAULT_QUAD_POINTS).unwrap();
            let direct = c.m_star;
            let via_bubble = c.m_star_from_projected_bubble();
            assert!(((direct - via_bubble) / direct).abs() < 1e-6);
            assert!(c.projected_bubble_residual() < 1e-8);
            assert!(bubble_nehari_defect(&c) >= 0.0);
            assert!(c.refine_delta < 1e-6);
        }
    }

    #[test]
    fn exponent_arithmetic_for_4_2() {
        let c = critical_constants(4, 2.0, DEFAULT_QUAD_POINTS).unwrap();
        let q = c.two_mu_star();
        assert_eq!(q, 3.0);
        assert_eq!(q / (q - 1.0), 1.5);
    }

    #[test]
    fn integrals_are_scale_invariant() {
        let c = critical_constants(3, 1.0, DEFAULT_QUAD_POINTS).unwrap();
        let (g2, d2) = bubble_integrals_at_scale(3, 1.0, 2.0, DEFAULT_QUAD_POINTS * 2);
        assert!(((g2 - c.grad_u1_sq) / c.grad_u1_sq).abs() < 1e-6, "grad at R=2: {g2}");
        assert!(((d2 - c.d_crit_u1) / c.d_crit_u1).abs() < 1e-6, "d at R=2: {d2}");
        // Defect is scale invariant along with them.
        let defect2 = (g2 - d2).abs() / g2;
        assert!((defect2 - bubble_nehari_defect(&c)).abs() < 1e-5);
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(critical_constants(2, 1.0, 16).is_err());
        assert!(critical_constants(3, 3.0, 16).is_err());
        assert!(critical_constants(3, 1.0, 2).is_err());
    }
}
