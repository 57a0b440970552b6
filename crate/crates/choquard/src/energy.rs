//! The constrained variational problem: energy functional, its L² gradient,
//! the Nehari constraint and the closed-form projection onto it.
//!
//! For exponent p and coupling μ the energy of a field u is
//!
//! ```text
//! I(u) = 1/2 ‖u‖_λ² − 1/(2p) ∬ (u⁺(x))^p (u⁺(y))^p |x−y|^{−μ} dx dy
//! ```
//!
//! with ‖u‖_λ² = |∇u|₂² + λ|u|₂². The double integral D_p(u⁺) is evaluated
//! with one Riesz convolution and one quadrature. On the Nehari manifold
//! {G(u) = ‖u‖_λ² − D_p(u⁺) = 0} the energy collapses to
//! ((p−1)/(2p))‖u‖_λ², which is what the solver minimizes.

use crate::error::{Error, Result};
use crate::grid::{self, Field};
use crate::riesz::{convolve_fft, RieszKernel};

/// Problem parameters: effective dimension for the exponent formulas, Riesz
/// exponent μ, zeroth-order coefficient λ, and the nonlinearity power p.
///
/// The critical power is 2μ* = (2N−μ)/(N−2); p = 2μ* is the critical mode
/// and p = 2μ* − ε with ε > 0 the subcritical one. On 2-d grids the exponent
/// dimension is taken as N_eff = 3 (the planar analog; N_eff = 2 would blow
/// up the N−2 denominators).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoquardParams {
    n_eff: u32,
    mu: f64,
    lambda: f64,
    p: f64,
}

/// Default exponent dimension for a grid of spatial dimension `n`.
pub fn default_n_eff(grid_dim: usize) -> u32 {
    if grid_dim <= 2 {
        3
    } else {
        grid_dim as u32
    }
}

/// 2μ* = (2N − μ)/(N − 2).
pub fn critical_exponent(n_eff: u32, mu: f64) -> f64 {
    (2.0 * n_eff as f64 - mu) / (n_eff as f64 - 2.0)
}

impl ChoquardParams {
    fn validate(n_eff: u32, mu: f64, lambda: f64, p: f64) -> Result<Self> {
        if n_eff < 3 {
            return Err(Error::Parameter(format!(
                "effective dimension must be >= 3, got {n_eff}"
            )));
        }
        if !(mu > 0.0 && mu < n_eff as f64) {
            return Err(Error::Parameter(format!(
                "mu must lie in (0, {n_eff}), got {mu}"
            )));
        }
        if lambda < 0.0 {
            return Err(Error::Parameter(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        let q = critical_exponent(n_eff, mu);
        if !(p > 1.0 && p <= q + 1e-14) {
            return Err(Error::Parameter(format!(
                "exponent p must lie in (1, 2mu* = {q}], got {p}"
            )));
        }
        Ok(ChoquardParams {
            n_eff,
            mu,
            lambda,
            p: p.min(q),
        })
    }

    /// Subcritical instance p = 2μ* − ε with ε > 0.
    pub fn subcritical(n_eff: u32, mu: f64, lambda: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Parameter(format!("eps must be > 0, got {eps}")));
        }
        let q = critical_exponent(n_eff, mu);
        Self::validate(n_eff, mu, lambda, q - eps)
    }

    /// Critical instance p = 2μ*.
    pub fn critical(n_eff: u32, mu: f64, lambda: f64) -> Result<Self> {
        let q = critical_exponent(n_eff, mu);
        Self::validate(n_eff, mu, lambda, q)
    }

    /// Explicit exponent.
    pub fn with_exponent(n_eff: u32, mu: f64, lambda: f64, p: f64) -> Result<Self> {
        Self::validate(n_eff, mu, lambda, p)
    }

    pub fn n_eff(&self) -> u32 {
        self.n_eff
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn two_mu_star(&self) -> f64 {
        critical_exponent(self.n_eff, self.mu)
    }

    /// ε = 2μ* − p (zero in the critical mode).
    pub fn eps(&self) -> f64 {
        self.two_mu_star() - self.p
    }

    pub fn is_critical(&self) -> bool {
        self.eps() == 0.0
    }

    /// Same instance at a different exponent.
    pub fn at_eps(&self, eps: f64) -> Result<Self> {
        Self::subcritical(self.n_eff, self.mu, self.lambda, eps)
    }

    /// Same instance at the critical exponent.
    pub fn at_critical(&self) -> Self {
        ChoquardParams {
            p: self.two_mu_star(),
            ..*self
        }
    }
}

fn check_kernel(params: &ChoquardParams, kernel: &RieszKernel, u: &Field) {
    assert!(
        kernel.matches(u.grid()),
        "kernel does not match the field grid"
    );
    assert!(
        kernel.mu() == params.mu(),
        "kernel mu {} does not match params mu {}",
        kernel.mu(),
        params.mu()
    );
}

/// Scalar summary of one energy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// I(u).
    pub value: f64,
    /// ‖u‖_λ².
    pub norm_lambda_sq: f64,
    /// D_p(u⁺), the nonlocal double integral.
    pub d_term: f64,
    /// G(u) = ‖u‖_λ² − D_p(u⁺).
    pub nehari_residual: f64,
    /// Relative preconditioned gradient norm, when the caller computed one.
    pub gradient_norm: Option<f64>,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "p,eps,value,norm_lambda_sq,d_term,nehari_residual,grad_norm";

    pub fn csv_row(&self, params: &ChoquardParams) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            params.p(),
            params.eps(),
            self.value,
            self.norm_lambda_sq,
            self.d_term,
            self.nehari_residual,
            self.gradient_norm.map_or(String::new(), |g| g.to_string()),
        )
    }
}

/// (u⁺)^p nodewise.
fn positive_power(u: &Field, p: f64) -> Field {
    u.map(|v| if v > 0.0 { v.powf(p) } else { 0.0 })
}

/// D_p(u⁺) = ∫ (K * (u⁺)^p) (u⁺)^p.
pub fn d_term(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> f64 {
    check_kernel(params, kernel, u);
    let v = positive_power(u, params.p());
    let conv = convolve_fft(kernel, &v);
    grid::l2_dot(&conv, &v)
}

/// Full energy evaluation (gradient norm left empty).
pub fn energy(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<EnergyReport> {
    let pieces = EnergyPieces::evaluate(u, params, kernel)?;
    Ok(pieces.report_with(params))
}

/// Shared intermediates of one energy/gradient evaluation. The convolution
/// K * (u⁺)^p is the expensive part; computing it once serves both the
/// energy and the gradient of the same iterate.
pub struct EnergyPieces {
    pub norm_lambda_sq: f64,
    pub d_term: f64,
    pub conv: Field,
}

impl EnergyPieces {
    pub fn evaluate(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<Self> {
        check_kernel(params, kernel, u);
        let norm_lambda_sq = grid::h1_lambda_sq(u, params.lambda())?;
        let v = positive_power(u, params.p());
        let conv = convolve_fft(kernel, &v);
        let d_term = grid::l2_dot(&conv, &v);
        Ok(EnergyPieces {
            norm_lambda_sq,
            d_term,
            conv,
        })
    }

    pub fn value(&self, params: &ChoquardParams) -> f64 {
        0.5 * self.norm_lambda_sq - self.d_term / (2.0 * params.p())
    }

    pub fn report_with(&self, params: &ChoquardParams) -> EnergyReport {
        EnergyReport {
            value: self.value(params),
            norm_lambda_sq: self.norm_lambda_sq,
            d_term: self.d_term,
            nehari_residual: self.norm_lambda_sq - self.d_term,
            gradient_norm: None,
        }
    }
}

/// L² representer of the weak derivative:
/// (−Δ + λ)u − (K * (u⁺)^p)·(u⁺)^{p−1}, masked.
pub fn gradient(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<Field> {
    let pieces = EnergyPieces::evaluate(u, params, kernel)?;
    Ok(gradient_from_pieces(u, params, &pieces))
}

/// Gradient reusing an existing convolution of (u⁺)^p.
pub fn gradient_from_pieces(u: &Field, params: &ChoquardParams, pieces: &EnergyPieces) -> Field {
    let w = positive_power(u, params.p() - 1.0);
    let nonlocal = pieces.conv.mul(&w);
    grid::apply_operator(u, params.lambda()).linear_comb(1.0, &nonlocal, -1.0)
}

/// Signed Nehari residual G(u) = ‖u‖_λ² − D_p(u⁺).
pub fn nehari_residual(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<f64> {
    let pieces = EnergyPieces::evaluate(u, params, kernel)?;
    Ok(pieces.norm_lambda_sq - pieces.d_term)
}

/// The unique t > 0 with t·u on the Nehari manifold:
/// t^{2p−2} = ‖u‖_λ² / D_p(u⁺). Computed in log space so extreme scalings of
/// u cannot overflow. Errors when u⁺ ≡ 0 (the constraint divides by D_p).
pub fn t_projection(u: &Field, params: &ChoquardParams, kernel: &RieszKernel) -> Result<f64> {
    let pieces = EnergyPieces::evaluate(u, params, kernel)?;
    t_from_pieces(&pieces, params)
}

pub(crate) fn t_from_pieces(pieces: &EnergyPieces, params: &ChoquardParams) -> Result<f64> {
    if !(pieces.d_term > 0.0) || !(pieces.norm_lambda_sq > 0.0) {
        return Err(Error::NonpositiveField);
    }
    let log_t = (pieces.norm_lambda_sq.ln() - pieces.d_term.ln()) / (2.0 * params.p() - 2.0);
    Ok(log_t.exp())
}

/// Scale u onto the Nehari manifold; returns the projected field and t.
pub fn nehari_project(
    u: &Field,
    params: &ChoquardParams,
    kernel: &RieszKernel,
) -> Result<(Field, f64)> {
    let t = t_projection(u, params, kernel)?;
    Ok((u.scale(t), t))
}

/// Both sides of the interpolation bound
/// D_p(u⁺) ≤ D_{2μ*}(u⁺)^{p/2μ*} · C(Ω)^{ε/2μ*},
/// with C(Ω) = ∬ |x−y|^{−μ} over Ω×Ω evaluated by convolving the indicator.
/// Requires the subcritical mode p < 2μ*.
pub fn holder_interpolation_bound(
    u: &Field,
    params: &ChoquardParams,
    kernel: &RieszKernel,
) -> Result<(f64, f64)> {
    if params.eps() < 0.0 {
        return Err(Error::Parameter("p exceeds the critical exponent".into()));
    }
    let lhs = d_term(u, params, kernel);
    if params.eps() == 0.0 {
        return Ok((lhs, lhs));
    }
    let q = params.two_mu_star();
    let critical = params.at_critical();
    let d_crit = d_term(u, &critical, kernel);
    let ones = Field::from_fn(u.grid().clone(), |_| 1.0);
    let c_omega = grid::l2_dot(&convolve_fft(kernel, &ones), &ones);
    let rhs = d_crit.powf(params.p() / q) * c_omega.powf(params.eps() / q);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec, Grid};
    use crate::riesz::build_kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn disk_setup(resolution: u32, mu: f64) -> (Arc<Grid>, Arc<crate::riesz::RieszKernel>) {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0, None).unwrap();
        let grid = build_grid(&spec, resolution).unwrap();
        let kernel = build_kernel(&grid, mu).unwrap();
        (grid, kernel)
    }

    fn random_field(grid: &Arc<Grid>, seed: u64, positive: bool) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(grid.clone());
        for &i in grid.masked_nodes() {
            let v: f64 = rng.gen_range(-1.0..1.0);
            f.values_mut_unchecked()[i as usize] = if positive { v.abs() + 0.1 } else { v };
        }
        f
    }

    /// O(M^2) oracle for the double integral, independent of the FFT path.
    fn d_term_brute(u: &Field, params: &ChoquardParams, kernel: &crate::riesz::RieszKernel) -> f64 {
        let g = u.grid();
        let n = g.n();
        let cell = g.cell_volume();
        let mut total = 0.0f64;
        for &i in g.masked_nodes() {
            let i = i as usize;
            let vi = u.values()[i].max(0.0).powf(params.p());
            if vi == 0.0 {
                continue;
            }
            for &j in g.masked_nodes() {
                let j = j as usize;
                let vj = u.values()[j].max(0.0).powf(params.p());
                if vj == 0.0 {
                    continue;
                }
                let mut off = [0isize; 2];
                for a in 0..n {
                    off[a] = ((i / g.stride(a)) % g.shape()[a]) as isize
                        - ((j / g.stride(a)) % g.shape()[a]) as isize;
                }
                total += vi * vj * kernel.value_at_offset(&off[..n]);
            }
        }
        total * cell * cell
    }

    #[test]
    fn params_validation_and_exponents() {
        assert_eq!(critical_exponent(3, 1.0), 5.0);
        assert_eq!(critical_exponent(4, 2.0), 3.0);
        assert!(ChoquardParams::subcritical(2, 1.0, 0.0, 0.1).is_err());
        assert!(ChoquardParams::subcritical(3, 3.0, 0.0, 0.1).is_err());
        assert!(ChoquardParams::subcritical(3, 1.0, -1.0, 0.1).is_err());
        assert!(ChoquardParams::subcritical(3, 1.0, 0.0, -0.1).is_err());
        assert!(ChoquardParams::with_exponent(3, 1.0, 0.0, 6.0).is_err());
        let p = ChoquardParams::subcritical(3, 1.0, 0.5, 0.4).unwrap();
        assert_eq!(p.p(), 4.6);
        assert!((p.eps() - 0.4).abs() < 1e-15);
        assert!(!p.is_critical());
        assert!(p.at_critical().is_critical());
    }

    #[test]
    fn d_term_vanishes_for_nonpositive_u() {
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let u = random_field(&grid, 1, true).scale(-1.0);
        assert_eq!(d_term(&u, &params, &kernel), 0.0);
        // Gradient collapses to the linear operator.
        let g = gradient(&u, &params, &kernel).unwrap();
        let lin = crate::grid::apply_operator(&u, params.lambda());
        assert_eq!(g.values(), lin.values());
    }

    #[test]
    fn d_term_impulse_closed_form() {
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let q = grid.nearest_node(&[0.2, -0.1]);
        let a = 1.7f64;
        let mut u = Field::zeros(grid.clone());
        u.values_mut_unchecked()[q] = a;
        let got = d_term(&u, &params, &kernel);
        let cell = grid.cell_volume();
        let want = cell * cell * a.powf(2.0 * params.p()) * kernel.singular_value();
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn d_term_matches_brute_force() {
        let (grid, kernel) = disk_setup(8, 1.0);
        assert!(grid.interior_count() < 250);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let u = random_field(&grid, 42, false);
        let fast = d_term(&u, &params, &kernel);
        let brute = d_term_brute(&u, &params, &kernel);
        assert!(((fast - brute) / brute).abs() < 1e-10, "{fast} vs {brute}");
    }

    #[test]
    fn energy_identity_and_zero_field() {
        let (grid, kernel) = disk_setup(16, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.8, 0.3).unwrap();
        let zero = Field::zeros(grid.clone());
        let rep = energy(&zero, &params, &kernel).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(rep.norm_lambda_sq, 0.0);
        assert_eq!(rep.d_term, 0.0);

        let u = random_field(&grid, 3, false);
        let rep = energy(&u, &params, &kernel).unwrap();
        let reconstructed = 0.5 * rep.norm_lambda_sq - rep.d_term / (2.0 * params.p());
        assert!(((rep.value - reconstructed) / rep.value).abs() < 1e-12);
        assert!(rep.d_term >= 0.0);
    }

    #[test]
    fn on_manifold_energy_identity() {
        let (grid, kernel) = disk_setup(16, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.5, 0.4).unwrap();
        let u = random_field(&grid, 9, true);
        let (proj, _) = nehari_project(&u, &params, &kernel).unwrap();
        let rep = energy(&proj, &params, &kernel).unwrap();
        let p = params.p();
        let want = (p - 1.0) / (2.0 * p) * rep.norm_lambda_sq;
        assert!(((rep.value - want) / want).abs() < 1e-10);
    }

    #[test]
    fn cubic_exponent_gives_one_third() {
        // N_eff = 4, mu = 2 puts the critical exponent at exactly 3, where
        // (p-1)/(2p) = 1/3; needs a 3-d grid for mu < n.
        let spec = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0, None).unwrap();
        let grid = build_grid(&spec, 8).unwrap();
        let kernel = build_kernel(&grid, 2.0).unwrap();
        let params = ChoquardParams::critical(4, 2.0, 0.5).unwrap();
        assert_eq!(params.p(), 3.0);
        let u = random_field(&grid, 11, true);
        let (proj, _) = nehari_project(&u, &params, &kernel).unwrap();
        let rep = energy(&proj, &params, &kernel).unwrap();
        let want = rep.norm_lambda_sq / 3.0;
        assert!(((rep.value - want) / want).abs() < 1e-10);
    }

    #[test]
    fn gradient_finite_difference_check() {
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.3, 0.4).unwrap();
        for seed in 0..3 {
            let u = random_field(&grid, 100 + seed, false);
            let phi = random_field(&grid, 200 + seed, false);
            let t = 1e-5;
            let plus = energy(&u.linear_comb(1.0, &phi, t), &params, &kernel).unwrap().value;
            let minus = energy(&u.linear_comb(1.0, &phi, -t), &params, &kernel).unwrap().value;
            let fd = (plus - minus) / (2.0 * t);
            let inner = crate::grid::l2_dot(&gradient(&u, &params, &kernel).unwrap(), &phi);
            assert!(
                ((fd - inner) / inner.abs()).abs() < 1e-6,
                "seed {seed}: fd {fd} vs inner {inner}"
            );
        }
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.3, 0.4).unwrap();
        let g = gradient(&Field::zeros(grid), &params, &kernel).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_properties() {
        let (grid, kernel) = disk_setup(16, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let u = random_field(&grid, 21, true);
        let (proj, t) = nehari_project(&u, &params, &kernel).unwrap();
        assert!(t > 0.0);
        // Already on the manifold: t = 1.
        let t2 = t_projection(&proj, &params, &kernel).unwrap();
        assert!((t2 - 1.0).abs() < 1e-12, "t on manifold = {t2}");
        // Scaling: t(su) = t(u)/s, so the projected point is scale free.
        for s in [0.03f64, 0.8, 41.0] {
            let ts = t_projection(&u.scale(s), &params, &kernel).unwrap();
            assert!((ts * s / t - 1.0).abs() < 1e-12);
            let (proj_s, _) = nehari_project(&u.scale(s), &params, &kernel).unwrap();
            let max_dev = proj_s
                .values()
                .iter()
                .zip(proj.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_dev < 1e-10 * proj.sup_norm());
        }
        // Residual after projection, relative to the norm.
        let rep = energy(&proj, &params, &kernel).unwrap();
        assert!((rep.nehari_residual / rep.norm_lambda_sq).abs() < 1e-12);
        // Nonpositive fields have no projection.
        let neg = u.scale(-1.0);
        assert!(matches!(
            t_projection(&neg, &params, &kernel),
            Err(Error::NonpositiveField)
        ));
    }

    #[test]
    fn projected_residual_against_brute_force() {
        let (grid, kernel) = disk_setup(8, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let u = random_field(&grid, 33, true);
        let (proj, _) = nehari_project(&u, &params, &kernel).unwrap();
        let a = crate::grid::h1_lambda_sq(&proj, params.lambda()).unwrap();
        let d = d_term_brute(&proj, &params, &kernel);
        assert!(((a - d) / a).abs() < 1e-10, "brute-force residual {}", (a - d) / a);
    }

    #[test]
    fn small_scaling_keeps_residual_positive() {
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let u = random_field(&grid, 5, true);
        for t in [1e-3, 1e-2, 0.1] {
            let g = nehari_residual(&u.scale(t), &params, &kernel).unwrap();
            assert!(g > 0.0, "G({t} u) = {g}");
        }
    }

    #[test]
    fn holder_interpolation_bound_holds() {
        let spec = DomainSpec::annulus(&[0.0, 0.0], 0.4, 1.0, None).unwrap();
        let grid = build_grid(&spec, 32).unwrap();
        let kernel = build_kernel(&grid, 1.0).unwrap();
        // eps = 0: both sides coincide.
        let critical = ChoquardParams::critical(3, 1.0, 0.0).unwrap();
        let u = random_field(&grid, 55, true);
        let (lhs, rhs) = holder_interpolation_bound(&u, &critical, &kernel).unwrap();
        assert_eq!(lhs, rhs);
        // Subcritical: lhs <= rhs on random positive fields.
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.2).unwrap();
        for seed in 0..4 {
            let u = random_field(&grid, 60 + seed, true);
            let (lhs, rhs) = holder_interpolation_bound(&u, &params, &kernel).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "lhs {lhs} rhs {rhs}");
        }
        // Indicator-like bump: strict inequality.
        let bump = Field::from_fn(grid, |x| {
            if (x[0] - 0.7) * (x[0] - 0.7) + x[1] * x[1] < 0.01 {
                1.0
            } else {
                0.0
            }
        });
        let (lhs, rhs) = holder_interpolation_bound(&bump, &params, &kernel).unwrap();
        assert!(lhs < rhs * (1.0 - 1e-6), "not strict: {lhs} vs {rhs}");
    }

    #[test]
    fn nehari_lower_bound_regression() {
        // Discrete analog of the manifold's uniform lower bound: with the
        // grid constant c = max D_p / ||u||^{2p} over the suite, every
        // projected field satisfies ||t u||^{2p-2} c >= 1.
        let (grid, kernel) = disk_setup(12, 1.0);
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let p = params.p();
        let fields: Vec<Field> = (0..8).map(|s| random_field(&grid, 500 + s, true)).collect();
        let c_grid = fields
            .iter()
            .map(|u| {
                let a = crate::grid::h1_lambda_sq(u, 0.0).unwrap();
                d_term(u, &params, &kernel) / a.powf(p)
            })
            .fold(0.0f64, f64::max);
        for u in &fields {
            let (proj, _) = nehari_project(u, &params, &kernel).unwrap();
            let norm = crate::grid::h1_lambda_sq(&proj, 0.0).unwrap();
            assert!(norm > 0.0);
            assert!(norm.powf(p - 1.0) * c_grid >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn report_csv_row_shape() {
        let params = ChoquardParams::subcritical(3, 1.0, 0.0, 0.4).unwrap();
        let rep = EnergyReport {
            value: 1.5,
            norm_lambda_sq: 2.0,
            d_term: 3.0,
            nehari_residual: -1.0,
            gradient_norm: None,
        };
        let row = rep.csv_row(&params);
        assert_eq!(row.split(',').count(), EnergyReport::CSV_HEADER.split(',').count());
        assert!(row.ends_with(','));
    }
}
