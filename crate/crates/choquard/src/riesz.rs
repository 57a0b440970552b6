//! Riesz potential |·|^{-μ} * f on masked grids.
//!
//! The kernel is tabulated once per (grid, μ) on the full offset lattice with
//! a cell-averaged value at offset zero, then shared read-only. Convolution
//! runs through zero-padded FFTs (exact linear convolution) with a direct
//! O(M²) double loop kept as the oracle.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, MAX_DIM};

/// Direct convolution refuses grids larger than this (O(M²) cost).
const DIRECT_NODE_LIMIT: usize = 100_000;

/// Subgrid points per axis for the singular-cell average.
const SINGULAR_SUBGRID: usize = 32;

/// Tabulated Riesz kernel bound to one grid geometry.
pub struct RieszKernel {
    mu: f64,
    n: usize,
    h: f64,
    shape: [usize; MAX_DIM],
    /// Offset table, axis a running over -(s_a-1) ..= s_a-1.
    table: Vec<f64>,
    table_dims: [usize; MAX_DIM],
    /// Zero-padded sizes (2,3,5-smooth, ≥ 2s-1 per axis).
    pad: [usize; MAX_DIM],
    pad_total: usize,
    /// FFT of the wrapped kernel embedding.
    spectrum: Vec<Complex<f64>>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

fn next_smooth(mut m: usize) -> usize {
    loop {
        let mut k = m;
        for p in [2usize, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Average of |x|^{-μ} over the cell [-h/2, h/2]^n by midpoint subgrid
/// quadrature. Convergent for μ < n; the even subgrid never hits the origin.
fn singular_cell_average(n: usize, h: f64, mu: f64) -> f64 {
    let m = SINGULAR_SUBGRID;
    let step = h / m as f64;
    let start = -0.5 * h + 0.5 * step;
    let mut sum = 0.0;
    let mut idx = [0usize; MAX_DIM];
    let total = m.pow(n as u32);
    for _ in 0..total {
        let mut r2 = 0.0;
        for a in 0..n {
            let x = start + idx[a] as f64 * step;
            r2 += x * x;
        }
        sum += r2.sqrt().powf(-mu);
        let mut a = 0;
        while a < n {
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
    sum / total as f64
}

impl RieszKernel {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid_shape(&self) -> &[usize] {
        &self.shape[..self.n]
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        grid.n() == self.n && grid.shape() == self.grid_shape() && grid.h() == self.h
    }

    /// Kernel value at a lattice offset (components in nodes).
    pub fn value_at_offset(&self, offset: &[isize]) -> f64 {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for a in (0..self.n).rev() {
            let o = offset[a] + (self.shape[a] as isize - 1);
            assert!(
                o >= 0 && (o as usize) < self.table_dims[a],
                "offset out of tabulated range"
            );
            flat += o as usize * stride;
            stride *= self.table_dims[a];
        }
        self.table[flat]
    }

    /// Cell-averaged singular value K(0).
    pub fn singular_value(&self) -> f64 {
        let zero = [0isize; MAX_DIM];
        self.value_at_offset(&zero[..self.n])
    }

    /// Copy of this kernel with the singular cell forced to zero.
    ///
    /// Test hook for sensitivity checks: FFT/direct agreement is blind to the
    /// tabulated values, while energy identities that depend on K(0) are not.
    pub fn with_zeroed_singular_cell(&self) -> RieszKernel {
        let mut table = self.table.clone();
        let mut flat = 0usize;
        let mut stride = 1usize;
        for a in (0..self.n).rev() {
            flat += (self.shape[a] - 1) * stride;
            stride *= self.table_dims[a];
        }
        table[flat] = 0.0;
        let spectrum = build_spectrum(
            self.n,
            &self.shape,
            &self.table_dims,
            &table,
            &self.pad,
            &self.fwd,
        );
        RieszKernel {
            mu: self.mu,
            n: self.n,
            h: self.h,
            shape: self.shape,
            table,
            table_dims: self.table_dims,
            pad: self.pad,
            pad_total: self.pad_total,
            spectrum,
            fwd: self.fwd.clone(),
            inv: self.inv.clone(),
        }
    }
}

fn build_spectrum(
    n: usize,
    shape: &[usize; MAX_DIM],
    table_dims: &[usize; MAX_DIM],
    table: &[f64],
    pad: &[usize; MAX_DIM],
    fwd: &[Arc<dyn Fft<f64>>],
) -> Vec<Complex<f64>> {
    let pad_total: usize = pad[..n].iter().product();
    let mut embed = vec![Complex::new(0.0, 0.0); pad_total];
    let mut pad_strides = [1usize; MAX_DIM];
    for a in (0..n.saturating_sub(1)).rev() {
        pad_strides[a] = pad_strides[a + 1] * pad[a + 1];
    }
    let table_total: usize = table_dims[..n].iter().product();
    let mut t_strides = [1usize; MAX_DIM];
    for a in (0..n.saturating_sub(1)).rev() {
        t_strides[a] = t_strides[a + 1] * table_dims[a + 1];
    }
    for flat in 0..table_total {
        let mut pos = 0usize;
        for a in 0..n {
            let along = (flat / t_strides[a]) % table_dims[a];
            let o = along as isize - (shape[a] as isize - 1);
            let wrapped = o.rem_euclid(pad[a] as isize) as usize;
            pos += wrapped * pad_strides[a];
        }
        embed[pos] = Complex::new(table[flat], 0.0);
    }
    fft_nd(&mut embed, n, pad, fwd);
    embed
}

/// Transform each axis in turn (row-major layout, last axis contiguous).
fn fft_nd(data: &mut [Complex<f64>], n: usize, pad: &[usize; MAX_DIM], plans: &[Arc<dyn Fft<f64>>]) {
    let total = data.len();
    // Last axis: lines are contiguous, process the whole buffer at once.
    plans[n - 1].process(data);
    if n == 1 {
        return;
    }
    let mut pad_strides = [1usize; MAX_DIM];
    for a in (0..n - 1).rev() {
        pad_strides[a] = pad_strides[a + 1] * pad[a + 1];
    }
    let mut scratch = Vec::new();
    for axis in 0..n - 1 {
        let len = pad[axis];
        let stride = pad_strides[axis];
        scratch.resize(len, Complex::new(0.0, 0.0));
        let block = len * stride;
        let mut base = 0usize;
        while base < total {
            for inner in 0..stride {
                let start = base + inner;
                for k in 0..len {
                    scratch[k] = data[start + k * stride];
                }
                plans[axis].process(&mut scratch);
                for k in 0..len {
                    data[start + k * stride] = scratch[k];
                }
            }
            base += block;
        }
    }
}

/// Tabulate the kernel for `grid` with exponent μ ∈ (0, n).
pub fn build_kernel(grid: &Grid, mu: f64) -> Result<Arc<RieszKernel>> {
    let n = grid.n();
    if !(mu > 0.0 && mu < n as f64) {
        return Err(Error::Parameter(format!(
            "mu must lie in (0, {n}), got {mu}"
        )));
    }
    let h = grid.h();
    let mut shape = [1usize; MAX_DIM];
    let mut table_dims = [1usize; MAX_DIM];
    let mut pad = [1usize; MAX_DIM];
    for a in 0..n {
        shape[a] = grid.shape()[a];
        table_dims[a] = 2 * shape[a] - 1;
        pad[a] = next_smooth(table_dims[a]);
    }

    let table_total: usize = table_dims[..n].iter().product();
    let mut t_strides = [1usize; MAX_DIM];
    for a in (0..n.saturating_sub(1)).rev() {
        t_strides[a] = t_strides[a + 1] * table_dims[a + 1];
    }
    let singular = singular_cell_average(n, h, mu);
    let mut table = vec![0.0f64; table_total];
    for (flat, slot) in table.iter_mut().enumerate() {
        let mut r2 = 0.0f64;
        let mut at_origin = true;
        for a in 0..n {
            let along = (flat / t_strides[a]) % table_dims[a];
            let o = along as isize - (shape[a] as isize - 1);
            if o != 0 {
                at_origin = false;
            }
            let d = o as f64 * h;
            r2 += d * d;
        }
        *slot = if at_origin {
            singular
        } else {
            r2.sqrt().powf(-mu)
        };
    }

    let mut planner = FftPlanner::<f64>::new();
    let mut fwd = Vec::with_capacity(n);
    let mut inv = Vec::with_capacity(n);
    for a in 0..n {
        fwd.push(planner.plan_fft_forward(pad[a]));
        inv.push(planner.plan_fft_inverse(pad[a]));
    }

    let spectrum = build_spectrum(n, &shape, &table_dims, &table, &pad, &fwd);
    let pad_total: usize = pad[..n].iter().product();

    Ok(Arc::new(RieszKernel {
        mu,
        n,
        h,
        shape,
        table,
        table_dims,
        pad,
        pad_total,
        spectrum,
        fwd,
        inv,
    }))
}

/// g(x_i) = Πh · Σ_j K(x_i − x_j) f(x_j) by zero-padded FFT convolution.
pub fn convolve_fft(kernel: &RieszKernel, f: &Field) -> Field {
    let grid = f.grid().clone();
    assert!(kernel.matches(&grid), "kernel does not match the field grid");
    let n = kernel.n;

    let mut buf = vec![Complex::new(0.0, 0.0); kernel.pad_total];
    let mut pad_strides = [1usize; MAX_DIM];
    for a in (0..n.saturating_sub(1)).rev() {
        pad_strides[a] = pad_strides[a + 1] * kernel.pad[a + 1];
    }
    // Copy the field into the corner of the padded box, row by row.
    let vals = f.values();
    let shape = kernel.shape;
    let mut idx = [0usize; MAX_DIM];
    let rows: usize = shape[..n - 1].iter().product();
    let row_len = shape[n - 1];
    let mut src = 0usize;
    for _ in 0..rows {
        let mut dst = 0usize;
        for a in 0..n - 1 {
            dst += idx[a] * pad_strides[a];
        }
        for k in 0..row_len {
            buf[dst + k] = Complex::new(vals[src + k], 0.0);
        }
        src += row_len;
        let mut a = n - 1;
        while a > 0 {
            a -= 1;
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }

    fft_nd(&mut buf, n, &kernel.pad, &kernel.fwd);
    for (b, s) in buf.iter_mut().zip(&kernel.spectrum) {
        *b *= s;
    }
    fft_nd(&mut buf, n, &kernel.pad, &kernel.inv);

    let scale = grid.cell_volume() / kernel.pad_total as f64;
    let mut out = Field::zeros(grid.clone());
    {
        let o = out.values_mut_unchecked();
        let mut idx = [0usize; MAX_DIM];
        let mut dst = 0usize;
        for _ in 0..rows {
            let mut srcp = 0usize;
            for a in 0..n - 1 {
                srcp += idx[a] * pad_strides[a];
            }
            for k in 0..row_len {
                o[dst + k] = buf[srcp + k].re * scale;
            }
            dst += row_len;
            let mut a = n - 1;
            while a > 0 {
                a -= 1;
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
    out.enforce_mask();
    out
}

/// Exact double-loop convolution with compensated summation. Oracle for the
/// FFT path; refuses large grids.
pub fn convolve_direct(kernel: &RieszKernel, f: &Field) -> Result<Field> {
    let grid = f.grid().clone();
    assert!(kernel.matches(&grid), "kernel does not match the field grid");
    if grid.len() > DIRECT_NODE_LIMIT {
        return Err(Error::GridTooLarge {
            nodes: grid.len(),
            limit: DIRECT_NODE_LIMIT,
        });
    }
    let n = kernel.n;
    let vals = f.values();
    let mut out = Field::zeros(grid.clone());
    let cell = grid.cell_volume();

    // Per-node integer coordinates of the masked sources.
    let sources: Vec<(u32, [i32; MAX_DIM], f64)> = grid
        .masked_nodes()
        .iter()
        .map(|&j| {
            let ju = j as usize;
            let mut c = [0i32; MAX_DIM];
            for a in 0..n {
                c[a] = ((ju / grid.stride(a)) % grid.shape()[a]) as i32;
            }
            (j, c, vals[ju])
        })
        .collect();

    {
        let o = out.values_mut_unchecked();
        for &i in grid.masked_nodes() {
            let iu = i as usize;
            let mut ci = [0i32; MAX_DIM];
            for a in 0..n {
                ci[a] = ((iu / grid.stride(a)) % grid.shape()[a]) as i32;
            }
            let mut offset = [0isize; MAX_DIM];
            let sum = neumaier(sources.iter().map(|(_, cj, fj)| {
                for a in 0..n {
                    offset[a] = (ci[a] - cj[a]) as isize;
                }
                kernel.value_at_offset(&offset[..n]) * fj
            }));
            o[iu] = sum * cell;
        }
    }
    Ok(out)
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    crate::grid::neumaier_sum(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, l2_dot, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_grid(resolution: u32) -> Arc<Grid> {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0, None).unwrap();
        build_grid(&spec, resolution).unwrap()
    }

    fn ball_grid(resolution: u32) -> Arc<Grid> {
        let spec = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0, None).unwrap();
        build_grid(&spec, resolution).unwrap()
    }

    fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(grid.clone());
        for &i in grid.masked_nodes() {
            f.values_mut_unchecked()[i as usize] = rng.gen_range(-1.0..1.0);
        }
        f
    }

    fn rel_sup(a: &Field, b: &Field) -> f64 {
        let scale = b.sup_norm().max(f64::MIN_POSITIVE);
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn unit_offset_value_matches_inverse_distance() {
        // h = 0.1 grid; the (1,0) entry is the plain kernel value 1/h.
        let spec = DomainSpec::ball(&[0.0, 0.0], 0.8, None).unwrap();
        let grid = build_grid(&spec, 10).unwrap();
        assert_eq!(grid.h(), 0.1);
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let v = kernel.value_at_offset(&[1, 0]);
        assert!((v - 10.0).abs() / 10.0 < 0.03, "value {v}");
        // Singular cell should dominate the unit-offset value.
        assert!(kernel.singular_value() > v);
    }

    #[test]
    fn kernel_symmetry_and_radial_decay() {
        let grid = disk_grid(12);
        let kernel = build_kernel(&grid, 1.3).unwrap();
        let s = grid.shape()[0] as isize;
        let mut by_radius: Vec<(i64, f64)> = Vec::new();
        for i in -(s - 1)..s {
            for j in -(s - 1)..s {
                let v = kernel.value_at_offset(&[i, j]);
                let w = kernel.value_at_offset(&[-i, -j]);
                assert_eq!(v.to_bits(), w.to_bits(), "asymmetric at ({i},{j})");
                assert!(v > 0.0);
                by_radius.push(((i * i + j * j) as i64, v));
            }
        }
        by_radius.sort_by_key(|&(r2, _)| r2);
        by_radius.dedup_by_key(|&mut (r2, _)| r2);
        for w in by_radius.windows(2) {
            assert!(w[0].1 >= w[1].1, "kernel not decreasing in |offset|");
        }
    }

    #[test]
    fn mu_to_zero_limit() {
        let grid = disk_grid(12);
        let kernel = build_kernel(&grid, 1e-6).unwrap();
        let s = grid.shape()[0] as isize;
        for i in -(s - 1)..s {
            for j in [-1isize, 0, 3] {
                let v = kernel.value_at_offset(&[i, j]);
                assert!((v - 1.0).abs() < 1e-4, "entry ({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn mu_range_enforced() {
        let grid = disk_grid(12);
        assert!(build_kernel(&grid, 0.0).is_err());
        assert!(build_kernel(&grid, 2.0).is_err());
        let ball = ball_grid(8);
        assert!(build_kernel(&ball, 2.5).is_ok());
        assert!(build_kernel(&ball, 3.0).is_err());
    }

    #[test]
    fn impulse_response_is_kernel_column() {
        let grid = disk_grid(10);
        let kernel = build_kernel(&grid, 0.8).unwrap();
        let p = grid.nearest_node(&[0.1, -0.1]);
        assert!(grid.mask()[p]);
        let mut f = Field::zeros(grid.clone());
        f.values_mut_unchecked()[p] = 2.0;
        let direct = convolve_direct(&kernel, &f).unwrap();
        let cell = grid.cell_volume();
        for &i in grid.masked_nodes() {
            let i = i as usize;
            let mut off = [0isize; 2];
            for a in 0..2 {
                off[a] = ((i / grid.stride(a)) % grid.shape()[a]) as isize
                    - ((p / grid.stride(a)) % grid.shape()[a]) as isize;
            }
            let want = cell * 2.0 * kernel.value_at_offset(&off);
            assert_eq!(direct.values()[i].to_bits(), want.to_bits());
        }
        let fft = convolve_fft(&kernel, &f);
        assert!(rel_sup(&fft, &direct) < 1e-10);
    }

    #[test]
    fn direct_convolution_is_linear_and_positive() {
        let grid = disk_grid(10);
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let p = grid.nearest_node(&[0.1, 0.0]);
        let q = grid.nearest_node(&[-0.2, 0.1]);
        let mut f = Field::zeros(grid.clone());
        f.values_mut_unchecked()[p] = 1.0;
        let mut g = Field::zeros(grid.clone());
        g.values_mut_unchecked()[q] = 3.0;
        let sum = convolve_direct(&kernel, &f.linear_comb(1.0, &g, 1.0)).unwrap();
        let split = convolve_direct(&kernel, &f)
            .unwrap()
            .linear_comb(1.0, &convolve_direct(&kernel, &g).unwrap(), 1.0);
        assert!(rel_sup(&sum, &split) < 1e-12);
        let pos = random_field(&grid, 5).map(f64::abs);
        let out = convolve_direct(&kernel, &pos).unwrap();
        assert!(out.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fft_linearity() {
        let grid = disk_grid(12);
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let f = random_field(&grid, 1);
        let g = random_field(&grid, 2);
        let combo = convolve_fft(&kernel, &f.linear_comb(0.7, &g, -1.3));
        let split = convolve_fft(&kernel, &f).linear_comb(0.7, &convolve_fft(&kernel, &g), -1.3);
        assert!(rel_sup(&combo, &split) < 1e-12);
    }

    #[test]
    fn fft_matches_direct_2d_and_3d() {
        let grid2 = disk_grid(24);
        let kernel2 = build_kernel(&grid2, 1.0).unwrap();
        let f2 = random_field(&grid2, 7);
        assert!(rel_sup(&convolve_fft(&kernel2, &f2), &convolve_direct(&kernel2, &f2).unwrap()) < 1e-10);

        let grid3 = ball_grid(12);
        let kernel3 = build_kernel(&grid3, 1.7).unwrap();
        let f3 = random_field(&grid3, 8);
        assert!(rel_sup(&convolve_fft(&kernel3, &f3), &convolve_direct(&kernel3, &f3).unwrap()) < 1e-10);
    }

    #[test]
    fn bilinear_form_is_symmetric() {
        let grid = disk_grid(16);
        let kernel = build_kernel(&grid, 0.6).unwrap();
        let f = random_field(&grid, 11);
        let g = random_field(&grid, 12);
        let lhs = l2_dot(&convolve_fft(&kernel, &f), &g);
        let rhs = l2_dot(&convolve_fft(&kernel, &g), &f);
        assert!(((lhs - rhs) / lhs).abs() < 1e-10);
    }

    #[test]
    fn translation_equivariance_in_the_bulk() {
        let spec = DomainSpec::cuboid(&[0.0, 0.0], &[1.0, 1.0], None).unwrap();
        let grid = build_grid(&spec, 12).unwrap();
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let bump = |x: &[f64]| (-40.0 * (x[0] * x[0] + x[1] * x[1])).exp();
        let f = Field::from_fn(grid.clone(), |x| bump(x));
        let shifted = Field::from_fn(grid.clone(), |x| bump(&[x[0] - grid.h(), x[1]]));
        let conv = convolve_fft(&kernel, &f);
        let conv_shifted = convolve_fft(&kernel, &shifted);
        // Compare on nodes two layers away from the boundary of the mask.
        let s = grid.stride(0);
        let mut checked = 0usize;
        for &i in grid.masked_nodes() {
            let i = i as usize;
            if grid.mask()[i + s] && grid.mask()[i - s] && grid.mask()[i + 2 * s] && grid.mask()[i - 2 * s]
            {
                let a = conv.values()[i - s];
                let b = conv_shifted.values()[i];
                if a.abs() > 1e-9 {
                    assert!(((a - b) / a).abs() < 1e-9, "node {i}: {a} vs {b}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn direct_refuses_large_grids() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0, None).unwrap();
        let grid = build_grid(&spec, 200).unwrap();
        assert!(grid.len() > 100_000);
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let f = Field::zeros(grid);
        match convolve_direct(&kernel, &f) {
            Err(Error::GridTooLarge { nodes, limit }) => {
                assert!(nodes > limit);
            }
            other => panic!("expected GridTooLarge, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn zeroed_singular_cell_hook() {
        let grid = disk_grid(10);
        let kernel = build_kernel(&grid, 1.0).unwrap();
        let tampered = kernel.with_zeroed_singular_cell();
        assert_eq!(tampered.value_at_offset(&[0, 0]), 0.0);
        assert_eq!(
            tampered.value_at_offset(&[1, 0]).to_bits(),
            kernel.value_at_offset(&[1, 0]).to_bits()
        );
        // FFT and direct still agree on the tampered kernel.
        let f = random_field(&grid, 3);
        let fft = convolve_fft(&tampered, &f);
        let direct = convolve_direct(&tampered, &f).unwrap();
        assert!(rel_sup(&fft, &direct) < 1e-10);
    }
}
