//! Periodic spectral grid: FFT plans, Fourier derivatives, weights, cutoffs,
//! and deterministic reductions.
//!
//! The plane is truncated to the torus `[-L, L)^2` sampled on `n x n` points,
//! `dx = 2L/n`, with wavenumbers `k_j = pi j / L` for `j in [-n/2, n/2)` in FFT
//! order. Grid descriptors are immutable and shared behind `Arc`; the FFT
//! plans inside are safe for concurrent use (rustfft plans take `&self`), so
//! field operations may run from any number of workers. All norm reductions
//! use a fixed-order pairwise tree, making the results independent of worker
//! count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::DkgError;
use crate::spinor::Spinor;

pub type C64 = Complex64;

/// Descriptor of the periodic `n x n` grid on `[-L, L)^2`.
pub struct SpectralGrid {
    n: usize,
    half_width: f64,
    dx: f64,
    /// FFT-ordered wavenumbers; index n/2 holds the negative Nyquist mode.
    k: Vec<f64>,
    /// Wavenumbers for first derivatives: identical to `k` except the Nyquist
    /// entry is zeroed so real fields stay real under odd-order derivatives.
    k_deriv: Vec<f64>,
    /// Physical coordinates x_j = -L + j dx.
    x: Vec<f64>,
    /// 2/3-rule pass band per axis index.
    keep: Vec<bool>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl SpectralGrid {
    /// `n` must be a power of two with `n >= 16`; `half_width > 0`.
    pub fn new(n: usize, half_width: f64) -> Result<Arc<Self>, DkgError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(DkgError::InvalidInput(format!(
                "grid size {n} must be a power of two >= 16"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(DkgError::InvalidInput(format!(
                "half width {half_width} must be positive and finite"
            )));
        }
        let dx = 2.0 * half_width / n as f64;
        let mut k = Vec::with_capacity(n);
        let mut k_deriv = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let j = if i <= n / 2 - 1 { i as i64 } else { i as i64 - n as i64 };
            let kj = std::f64::consts::PI * j as f64 / half_width;
            k.push(kj);
            k_deriv.push(if i == n / 2 { 0.0 } else { kj });
            keep.push(j.unsigned_abs() as usize <= n / 3);
        }
        let x = (0..n).map(|i| -half_width + i as f64 * dx).collect();
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n);
        let fft_inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(SpectralGrid {
            n,
            half_width,
            dx,
            k,
            k_deriv,
            x,
            keep,
            fft_fwd,
            fft_inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Area element dx^2 of one cell.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dx
    }

    pub fn num_points(&self) -> usize {
        self.n * self.n
    }

    /// Linear index of the point with x1-index `ix` and x2-index `iy`.
    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.x[i]
    }

    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn deriv_wavenumbers(&self) -> &[f64] {
        &self.k_deriv
    }

    /// Radius of grid point `(ix, iy)`.
    #[inline]
    pub fn radius(&self, ix: usize, iy: usize) -> f64 {
        let x1 = self.x[ix];
        let x2 = self.x[iy];
        (x1 * x1 + x2 * x2).sqrt()
    }

    /// `(omega_1, omega_2) = x/r`, zero at the origin.
    #[inline]
    pub fn omega(&self, ix: usize, iy: usize) -> (f64, f64) {
        let x1 = self.x[ix];
        let x2 = self.x[iy];
        let r = (x1 * x1 + x2 * x2).sqrt();
        if r == 0.0 {
            (0.0, 0.0)
        } else {
            (x1 / r, x2 / r)
        }
    }

    /// True when the axis index is inside the 2/3 dealias pass band.
    #[inline]
    pub fn in_passband(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn same_grid(&self, other: &SpectralGrid) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }

    /// In-place unnormalized forward 2D FFT (rows, transpose, rows, transpose).
    pub fn fft2_forward(&self, data: &mut [C64]) {
        self.fft2(data, true);
    }

    /// In-place inverse 2D FFT, normalized by 1/n^2.
    pub fn fft2_inverse(&self, data: &mut [C64]) {
        self.fft2(data, false);
        let norm = 1.0 / (self.num_points() as f64);
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    fn fft2(&self, data: &mut [C64], forward: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "field length does not match grid");
        let plan = if forward { &self.fft_fwd } else { &self.fft_inv };
        let mut work = vec![C64::new(0.0, 0.0); n * n];
        row_pass(plan, data, n);
        transpose(data, &mut work, n);
        row_pass(plan, &mut work, n);
        transpose(&work, data, n);
    }
}

/// One-dimensional transforms over all rows. Rows are independent and each
/// is computed bit-identically whatever the worker count, so parallelism
/// does not disturb reproducibility.
fn row_pass(plan: &Arc<dyn Fft<f64>>, data: &mut [C64], n: usize) {
    data.par_chunks_mut(n).for_each_init(
        || vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
        |scratch, row| plan.process_with_scratch(row, scratch),
    );
}

fn transpose(src: &[C64], dst: &mut [C64], n: usize) {
    // Blocked to keep cache misses tolerable at large n.
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// A C^2-valued grid function (the spinor fields psi, Psi and derived ones).
#[derive(Clone, Debug)]
pub struct SpinorField {
    pub grid: Arc<SpectralGrid>,
    pub c0: Vec<C64>,
    pub c1: Vec<C64>,
}

impl SpinorField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        let m = grid.num_points();
        SpinorField {
            grid: grid.clone(),
            c0: vec![C64::new(0.0, 0.0); m],
            c1: vec![C64::new(0.0, 0.0); m],
        }
    }

    pub fn from_fn(grid: &Arc<SpectralGrid>, mut f: impl FnMut(f64, f64) -> Spinor) -> Self {
        let mut out = SpinorField::zeros(grid);
        let n = grid.n();
        for iy in 0..n {
            for ix in 0..n {
                let p = grid.idx(ix, iy);
                let s = f(grid.coord(ix), grid.coord(iy));
                out.c0[p] = s.c0;
                out.c1[p] = s.c1;
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, p: usize) -> Spinor {
        Spinor::new(self.c0[p], self.c1[p])
    }

    #[inline]
    pub fn set(&mut self, p: usize, s: Spinor) {
        self.c0[p] = s.c0;
        self.c1[p] = s.c1;
    }

    pub fn l2_norm(&self) -> f64 {
        let a = self.grid.cell_area();
        let s0 = tree_sum_by(&self.c0, |z| z.norm_sqr());
        let s1 = tree_sum_by(&self.c1, |z| z.norm_sqr());
        ((s0 + s1) * a).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for p in 0..self.c0.len() {
            m = m.max(self.at(p).norm_sqr());
        }
        m.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.c0.iter().chain(self.c1.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Pointwise `psi* g0 psi = |c0|^2 - |c1|^2` as a real field.
    pub fn dirac_bilinear_field(&self) -> Vec<f64> {
        (0..self.c0.len())
            .map(|p| self.c0[p].norm_sqr() - self.c1[p].norm_sqr())
            .collect()
    }
}

/// The pair `(u, d_t u)` of real grid functions for a wave/Klein-Gordon field.
#[derive(Clone, Debug)]
pub struct ScalarState {
    pub grid: Arc<SpectralGrid>,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl ScalarState {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        let m = grid.num_points();
        ScalarState { grid: grid.clone(), u: vec![0.0; m], ut: vec![0.0; m] }
    }

    pub fn from_fn(
        grid: &Arc<SpectralGrid>,
        mut f: impl FnMut(f64, f64) -> f64,
        mut ft: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut out = ScalarState::zeros(grid);
        let n = grid.n();
        for iy in 0..n {
            for ix in 0..n {
                let p = grid.idx(ix, iy);
                out.u[p] = f(grid.coord(ix), grid.coord(iy));
                out.ut[p] = ft(grid.coord(ix), grid.coord(iy));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.ut.iter()).all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Spectral derivatives
// ---------------------------------------------------------------------------

fn to_complex(data: &[f64]) -> Vec<C64> {
    data.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Gradient of a complex field by exact differentiation of the trigonometric
/// interpolant. Returns `(d1 f, d2 f)`.
pub fn spectral_gradient_c(grid: &SpectralGrid, data: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = grid.n();
    let mut hat = data.to_vec();
    grid.fft2_forward(&mut hat);
    let mut gx = hat.clone();
    let mut gy = hat;
    let kd = grid.deriv_wavenumbers();
    for iy in 0..n {
        let ky = kd[iy];
        let row = iy * n;
        for ix in 0..n {
            let kx = kd[ix];
            let h = gx[row + ix];
            gx[row + ix] = C64::new(-kx * h.im, kx * h.re);
            gy[row + ix] = C64::new(-ky * h.im, ky * h.re);
        }
    }
    grid.fft2_inverse(&mut gx);
    grid.fft2_inverse(&mut gy);
    (gx, gy)
}

/// Gradient of a real field; imaginary residue (roundoff level) is discarded.
pub fn spectral_gradient_r(grid: &SpectralGrid, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (gx, gy) = spectral_gradient_c(grid, &to_complex(data));
    (gx.iter().map(|z| z.re).collect(), gy.iter().map(|z| z.re).collect())
}

pub fn spectral_gradient_spinor(psi: &SpinorField) -> (SpinorField, SpinorField) {
    let grid = &psi.grid;
    let (a1, a2) = spectral_gradient_c(grid, &psi.c0);
    let (b1, b2) = spectral_gradient_c(grid, &psi.c1);
    (
        SpinorField { grid: grid.clone(), c0: a1, c1: b1 },
        SpinorField { grid: grid.clone(), c0: a2, c1: b2 },
    )
}

pub fn laplacian_c(grid: &SpectralGrid, data: &[C64]) -> Vec<C64> {
    let n = grid.n();
    let mut hat = data.to_vec();
    grid.fft2_forward(&mut hat);
    let k = grid.wavenumbers();
    for iy in 0..n {
        let ky2 = k[iy] * k[iy];
        let row = iy * n;
        for ix in 0..n {
            let k2 = k[ix] * k[ix] + ky2;
            hat[row + ix] *= -k2;
        }
    }
    grid.fft2_inverse(&mut hat);
    hat
}

pub fn laplacian_r(grid: &SpectralGrid, data: &[f64]) -> Vec<f64> {
    laplacian_c(grid, &to_complex(data)).iter().map(|z| z.re).collect()
}

/// Projects out all modes outside the 2/3 pass band (in place, physical space
/// in, physical space out).
pub fn dealias_c(grid: &SpectralGrid, data: &mut [C64]) {
    let n = grid.n();
    let mut hat = data.to_vec();
    grid.fft2_forward(&mut hat);
    for iy in 0..n {
        let keep_y = grid.in_passband(iy);
        let row = iy * n;
        for ix in 0..n {
            if !(keep_y && grid.in_passband(ix)) {
                hat[row + ix] = C64::new(0.0, 0.0);
            }
        }
    }
    grid.fft2_inverse(&mut hat);
    data.copy_from_slice(&hat);
}

// ---------------------------------------------------------------------------
// Deterministic reductions
// ---------------------------------------------------------------------------

/// Fixed-order pairwise tree sum: reproducible regardless of worker count and
/// with O(log n) rounding growth.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        let mut s = 0.0;
        for &v in xs {
            s += v;
        }
        return s;
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Tree sum of `f(x)` over a slice without materializing the mapped vector.
pub fn tree_sum_by<T, F: Fn(&T) -> f64 + Copy>(xs: &[T], f: F) -> f64 {
    if xs.len() <= 64 {
        let mut s = 0.0;
        for v in xs {
            s += f(v);
        }
        return s;
    }
    let mid = xs.len() / 2;
    tree_sum_by(&xs[..mid], f) + tree_sum_by(&xs[mid..], f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
    L1,
}

fn reduce_impl(
    grid: &SpectralGrid,
    len: usize,
    weight: Option<&[f64]>,
    kind: NormKind,
    mag: impl Fn(usize) -> f64 + Copy,
) -> Result<f64, DkgError> {
    if let Some(w) = weight {
        if w.len() != len {
            return Err(DkgError::GridMismatch(format!(
                "weight length {} does not match field length {len}",
                w.len()
            )));
        }
    }
    let wval = |p: usize| weight.map_or(1.0, |w| w[p]);
    let idx: Vec<usize> = (0..len).collect();
    Ok(match kind {
        NormKind::L2 => {
            let s = tree_sum_by(&idx, |&p| {
                let m = mag(p);
                wval(p) * m * m
            });
            (s * grid.cell_area()).sqrt()
        }
        NormKind::L1 => {
            tree_sum_by(&idx, |&p| wval(p) * mag(p)) * grid.cell_area()
        }
        NormKind::Linf => {
            let mut m = 0.0f64;
            for p in 0..len {
                m = m.max(wval(p) * mag(p));
            }
            m
        }
    })
}

/// Discrete norm of a real field, optionally weighted pointwise. For L2 the
/// weight multiplies `|f|^2` under the integral; for Linf and L1 it multiplies
/// `|f|`.
pub fn reduce_norm_r(
    grid: &SpectralGrid,
    data: &[f64],
    weight: Option<&[f64]>,
    kind: NormKind,
) -> Result<f64, DkgError> {
    reduce_impl(grid, data.len(), weight, kind, |p| data[p].abs())
}

pub fn reduce_norm_c(
    grid: &SpectralGrid,
    data: &[C64],
    weight: Option<&[f64]>,
    kind: NormKind,
) -> Result<f64, DkgError> {
    reduce_impl(grid, data.len(), weight, kind, |p| data[p].norm())
}

/// Norm of a spinor field using the pointwise C^2 magnitude.
pub fn reduce_norm_spinor(
    psi: &SpinorField,
    weight: Option<&[f64]>,
    kind: NormKind,
) -> Result<f64, DkgError> {
    reduce_impl(&psi.grid, psi.c0.len(), weight, kind, |p| psi.at(p).norm())
}

// ---------------------------------------------------------------------------
// Weights and cutoffs
// ---------------------------------------------------------------------------

/// Japanese bracket `<x> = sqrt(1 + x^2)`.
#[inline]
pub fn jbracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// C^1 cutoff: 0 for arguments <= 1, 1 for >= 2, smoothstep `3s^2 - 2s^3`
/// in between with `s = x - 1`.
#[inline]
pub fn chi_cutoff(x: f64) -> f64 {
    let s = (x - 1.0).clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `<r>`
    Jr,
    /// `<t - r>`
    Jtmr,
    /// `<t + r>`
    Jtpr,
    /// `chi(r - 2t)`, the exterior-region cutoff
    ChiExt,
    /// `<r - t>^(-6/5)`, the ghost-weight density
    GhostM65,
}

#[derive(Clone, Debug)]
pub struct WeightField {
    pub grid: Arc<SpectralGrid>,
    pub kind: WeightKind,
    pub t: f64,
    pub data: Vec<f64>,
}

/// Tabulates one of the radial weights at time `t`.
pub fn weight_field(kind: WeightKind, t: f64, grid: &Arc<SpectralGrid>) -> Result<WeightField, DkgError> {
    if !(t >= 0.0) {
        return Err(DkgError::InvalidInput(format!("weight time {t} must be >= 0")));
    }
    let n = grid.n();
    let mut data = vec![0.0; grid.num_points()];
    for iy in 0..n {
        for ix in 0..n {
            let r = grid.radius(ix, iy);
            data[grid.idx(ix, iy)] = match kind {
                WeightKind::Jr => jbracket(r),
                WeightKind::Jtmr => jbracket(t - r),
                WeightKind::Jtpr => jbracket(t + r),
                WeightKind::ChiExt => chi_cutoff(r - 2.0 * t),
                WeightKind::GhostM65 => jbracket(r - t).powf(-1.2),
            };
        }
    }
    Ok(WeightField { grid: grid.clone(), kind, t, data })
}
