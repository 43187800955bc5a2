//! Exact free evolutions in Fourier space for the 2D massless Dirac, the
//! Klein-Gordon, and the wave equations, plus Duhamel quadrature.
//!
//! Symbols are tabulated once per `(grid, dt)` pair and reused; rebuilding is
//! required when `dt` changes. Symbol construction is a plain single-threaded
//! setup pass; applying a propagator is pure per wavenumber, and the FFT plans
//! inside `SpectralGrid` are safe for concurrent use, so built propagators may
//! be shared freely across workers.
//!
//! The Dirac generator is `D = -i g0 g1 d_1 - i g0 g2 d_2` with Fourier symbol
//! `D(k) = k1 sigma_x + k2 sigma_y`, so
//! `exp(-it D) = cos(t|k|) - i sin(t|k|)/|k| D(k)` per mode (identity at k=0).
//! The Klein-Gordon flow is the rotation-like matrix
//! `[[cos(t<k>), sin(t<k>)/<k>], [-<k> sin(t<k>), cos(t<k>)]]` acting on
//! `(u, d_t u)` with `<k> = sqrt(1 + |k|^2)`; the wave flow is the same with
//! `<k>` replaced by `|k|` and the zero mode drifting as `(u + t u_t, u_t)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::DkgError;
use crate::grid::{ScalarState, SpectralGrid, SpinorField};

pub type C64 = Complex64;

fn check_dt(dt: f64) -> Result<(), DkgError> {
    if dt.is_finite() {
        Ok(())
    } else {
        Err(DkgError::InvalidInput(format!("time step {dt} is not finite")))
    }
}

/// Unitary per-mode matrices for `exp(-i dt D)`.
///
/// Each mode's matrix is `[[c, w], [-conj(w), c]]` with `c = cos(dt |k|)` and
/// `w = -i sin(dt |k|) (k1 - i k2)/|k|`; `c^2 + |w|^2 = 1` makes it unitary.
pub struct DiracPropagator {
    grid: Arc<SpectralGrid>,
    dt: f64,
    cos: Vec<f64>,
    off: Vec<C64>,
}

impl DiracPropagator {
    pub fn new(grid: &Arc<SpectralGrid>, dt: f64) -> Result<Self, DkgError> {
        check_dt(dt)?;
        let n = grid.n();
        let k = grid.wavenumbers();
        let mut cos = vec![0.0; grid.num_points()];
        let mut off = vec![C64::new(0.0, 0.0); grid.num_points()];
        for iy in 0..n {
            let k2 = k[iy];
            for ix in 0..n {
                let k1 = k[ix];
                let p = iy * n + ix;
                let kk = (k1 * k1 + k2 * k2).sqrt();
                if kk == 0.0 {
                    cos[p] = 1.0;
                } else {
                    let (s, c) = (dt * kk).sin_cos();
                    cos[p] = c;
                    // -i s/|k| (k1 - i k2)
                    off[p] = C64::new(-s * k2 / kk, -s * k1 / kk);
                }
            }
        }
        Ok(DiracPropagator { grid: grid.clone(), dt, cos, off })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Mode-mixing pass on spectral data.
    pub fn apply_spectral(&self, c0: &mut [C64], c1: &mut [C64]) {
        for p in 0..c0.len() {
            let a = c0[p];
            let b = c1[p];
            c0[p] = self.cos[p] * a + self.off[p] * b;
            c1[p] = -self.off[p].conj() * a + self.cos[p] * b;
        }
    }

    pub fn apply(&self, psi: &SpinorField) -> Result<SpinorField, DkgError> {
        if !psi.grid.same_grid(&self.grid) {
            return Err(DkgError::GridMismatch("spinor grid differs from propagator grid".into()));
        }
        let mut out = psi.clone();
        self.grid.fft2_forward(&mut out.c0);
        self.grid.fft2_forward(&mut out.c1);
        self.apply_spectral(&mut out.c0, &mut out.c1);
        self.grid.fft2_inverse(&mut out.c0);
        self.grid.fft2_inverse(&mut out.c1);
        Ok(out)
    }
}

/// Shared implementation of the two pair flows, the per-mode matrix
/// `[[c, b], [d, c]]` acting on `(u, u_t)`.
struct PairSymbol {
    c: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
}

impl PairSymbol {
    fn build(grid: &SpectralGrid, dt: f64, klein_gordon: bool) -> PairSymbol {
        let n = grid.n();
        let k = grid.wavenumbers();
        let m_points = grid.num_points();
        let (mut c, mut b, mut d) = (vec![0.0; m_points], vec![0.0; m_points], vec![0.0; m_points]);
        for iy in 0..n {
            let k2 = k[iy];
            for ix in 0..n {
                let k1 = k[ix];
                let p = iy * n + ix;
                let kk2 = k1 * k1 + k2 * k2;
                let m = if klein_gordon { (1.0 + kk2).sqrt() } else { kk2.sqrt() };
                if m == 0.0 {
                    // Wave zero mode: (u, u_t) -> (u + t u_t, u_t).
                    c[p] = 1.0;
                    b[p] = dt;
                    d[p] = 0.0;
                } else {
                    let (s, cc) = (dt * m).sin_cos();
                    c[p] = cc;
                    b[p] = s / m;
                    d[p] = -m * s;
                }
            }
        }
        PairSymbol { c, b, d }
    }

    fn apply_complex_pair(&self, u: &mut [C64], ut: &mut [C64]) {
        for p in 0..u.len() {
            let a = u[p];
            let v = ut[p];
            u[p] = self.c[p] * a + self.b[p] * v;
            ut[p] = self.d[p] * a + self.c[p] * v;
        }
    }

    /// Per-mode rotation of a real `(u, u_t)` pair packed as `z = u + i u_t`
    /// in spectral space; conjugate mode pairs are unpacked in the loop.
    fn mix_packed(&self, n: usize, z: &mut [C64]) {
        for iy in 0..n {
            let qy = (n - iy) % n;
            for ix in 0..n {
                let qx = (n - ix) % n;
                let p = iy * n + ix;
                let q = qy * n + qx;
                if p > q {
                    continue;
                }
                if p == q {
                    // Self-conjugate mode: u-hat and ut-hat are both real.
                    let (uh, vh) = (z[p].re, z[p].im);
                    z[p] = C64::new(
                        self.c[p] * uh + self.b[p] * vh,
                        self.d[p] * uh + self.c[p] * vh,
                    );
                } else {
                    let zp = z[p];
                    let zq = z[q];
                    let uh_p = 0.5 * (zp + zq.conj());
                    let vh_p = C64::new(0.0, -0.5) * (zp - zq.conj());
                    let uh_q = 0.5 * (zq + zp.conj());
                    let vh_q = C64::new(0.0, -0.5) * (zq - zp.conj());
                    let up = self.c[p] * uh_p + self.b[p] * vh_p;
                    let vp = self.d[p] * uh_p + self.c[p] * vh_p;
                    let uq = self.c[q] * uh_q + self.b[q] * vh_q;
                    let vq = self.d[q] * uh_q + self.c[q] * vh_q;
                    z[p] = up + C64::new(0.0, 1.0) * vp;
                    z[q] = uq + C64::new(0.0, 1.0) * vq;
                }
            }
        }
    }

    /// One forward and one inverse transform in total via the packed field.
    fn apply_packed(&self, grid: &SpectralGrid, s: &ScalarState) -> ScalarState {
        let mut z: Vec<C64> = (0..grid.num_points())
            .map(|p| C64::new(s.u[p], s.ut[p]))
            .collect();
        grid.fft2_forward(&mut z);
        self.mix_packed(grid.n(), &mut z);
        grid.fft2_inverse(&mut z);
        let mut out = ScalarState::zeros(&s.grid);
        for p in 0..z.len() {
            out.u[p] = z[p].re;
            out.ut[p] = z[p].im;
        }
        out
    }
}

/// The Klein-Gordon flow `S(dt)`; preserves the quadratic form
/// `<k>^2 |u-hat|^2 + |ut-hat|^2` mode by mode.
pub struct KgPropagator {
    grid: Arc<SpectralGrid>,
    dt: f64,
    sym: PairSymbol,
}

impl KgPropagator {
    pub fn new(grid: &Arc<SpectralGrid>, dt: f64) -> Result<Self, DkgError> {
        check_dt(dt)?;
        Ok(KgPropagator { grid: grid.clone(), dt, sym: PairSymbol::build(grid, dt, true) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, s: &ScalarState) -> Result<ScalarState, DkgError> {
        if !s.grid.same_grid(&self.grid) {
            return Err(DkgError::GridMismatch("state grid differs from propagator grid".into()));
        }
        Ok(self.sym.apply_packed(&self.grid, s))
    }

    pub fn apply_spectral_pair(&self, u: &mut [C64], ut: &mut [C64]) {
        self.sym.apply_complex_pair(u, ut);
    }

    /// Rotation of a packed `z-hat = u-hat + i ut-hat` field already in
    /// spectral space (lets callers fold in their own filters).
    pub fn mix_packed_spectral(&self, z: &mut [C64]) {
        self.sym.mix_packed(self.grid.n(), z);
    }
}

/// The d'Alembert flow; the zero mode drifts linearly.
pub struct WavePropagator {
    grid: Arc<SpectralGrid>,
    dt: f64,
    sym: PairSymbol,
}

impl WavePropagator {
    pub fn new(grid: &Arc<SpectralGrid>, dt: f64) -> Result<Self, DkgError> {
        check_dt(dt)?;
        Ok(WavePropagator { grid: grid.clone(), dt, sym: PairSymbol::build(grid, dt, false) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, s: &ScalarState) -> Result<ScalarState, DkgError> {
        if !s.grid.same_grid(&self.grid) {
            return Err(DkgError::GridMismatch("state grid differs from propagator grid".into()));
        }
        Ok(self.sym.apply_packed(&self.grid, s))
    }

    /// Spectral pair flow for complex-valued wave fields (used for the
    /// auxiliary spinor potential, componentwise).
    pub fn apply_spectral_pair(&self, u: &mut [C64], ut: &mut [C64]) {
        self.sym.apply_complex_pair(u, ut);
    }

    /// Adds `w * W(dt) (0, src)` to a spectral pair: the Duhamel contribution
    /// of a source sampled at the start of the step.
    pub fn add_spectral_source(&self, u: &mut [C64], ut: &mut [C64], src: &[C64], w: f64) {
        for p in 0..u.len() {
            u[p] += w * self.sym.b[p] * src[p];
            ut[p] += w * self.sym.c[p] * src[p];
        }
    }
}

pub fn dirac_free_flow(psi: &SpinorField, dt: f64) -> Result<SpinorField, DkgError> {
    DiracPropagator::new(&psi.grid, dt)?.apply(psi)
}

pub fn kg_free_flow(s: &ScalarState, dt: f64) -> Result<ScalarState, DkgError> {
    KgPropagator::new(&s.grid, dt)?.apply(s)
}

pub fn wave_free_flow(s: &ScalarState, dt: f64) -> Result<ScalarState, DkgError> {
    WavePropagator::new(&s.grid, dt)?.apply(s)
}

// ---------------------------------------------------------------------------
// Duhamel quadrature
// ---------------------------------------------------------------------------

/// A linear free flow together with the little vector-space structure needed
/// to accumulate Duhamel integrals over its state type.
pub trait LinearFlow {
    type Field: Clone;
    fn evolve(&self, f: &Self::Field, dt: f64) -> Result<Self::Field, DkgError>;
    fn scale_add(acc: &mut Self::Field, c: f64, f: &Self::Field);
    fn zero_like(f: &Self::Field) -> Self::Field;
}

pub struct DiracFlow;

impl LinearFlow for DiracFlow {
    type Field = SpinorField;

    fn evolve(&self, f: &SpinorField, dt: f64) -> Result<SpinorField, DkgError> {
        dirac_free_flow(f, dt)
    }

    fn scale_add(acc: &mut SpinorField, c: f64, f: &SpinorField) {
        for p in 0..acc.c0.len() {
            acc.c0[p] += c * f.c0[p];
            acc.c1[p] += c * f.c1[p];
        }
    }

    fn zero_like(f: &SpinorField) -> SpinorField {
        SpinorField::zeros(&f.grid)
    }
}

pub struct KgFlow;

impl LinearFlow for KgFlow {
    type Field = ScalarState;

    fn evolve(&self, f: &ScalarState, dt: f64) -> Result<ScalarState, DkgError> {
        kg_free_flow(f, dt)
    }

    fn scale_add(acc: &mut ScalarState, c: f64, f: &ScalarState) {
        for p in 0..acc.u.len() {
            acc.u[p] += c * f.u[p];
            acc.ut[p] += c * f.ut[p];
        }
    }

    fn zero_like(f: &ScalarState) -> ScalarState {
        ScalarState::zeros(&f.grid)
    }
}

pub struct WaveFlow;

impl LinearFlow for WaveFlow {
    type Field = ScalarState;

    fn evolve(&self, f: &ScalarState, dt: f64) -> Result<ScalarState, DkgError> {
        wave_free_flow(f, dt)
    }

    fn scale_add(acc: &mut ScalarState, c: f64, f: &ScalarState) {
        KgFlow::scale_add(acc, c, f)
    }

    fn zero_like(f: &ScalarState) -> ScalarState {
        ScalarState::zeros(&f.grid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    /// Samples at interval midpoints `(j + 1/2) ds`, O(ds^2).
    Midpoint,
    /// Samples at `j ds` including both endpoints, odd count >= 3, O(ds^4).
    Simpson,
}

/// Approximates `int_0^T U(T - s) src(s) ds` from uniformly spaced source
/// samples `(s_j, field_j)`.
pub fn duhamel_accumulate<F: LinearFlow>(
    flow: &F,
    t_end: f64,
    samples: &[(f64, F::Field)],
    quad: Quadrature,
) -> Result<F::Field, DkgError> {
    if samples.is_empty() {
        return Err(DkgError::TooFewSamples { need: 1, got: 0 });
    }
    let m = samples.len();
    let spacing_tol = 1e-9 * t_end.abs().max(1.0);
    let ds = if m >= 2 {
        samples[1].0 - samples[0].0
    } else {
        t_end
    };
    for j in 1..m {
        let d = samples[j].0 - samples[j - 1].0;
        if (d - ds).abs() > spacing_tol {
            return Err(DkgError::InvalidInput("source samples are not uniformly spaced".into()));
        }
    }
    let weights: Vec<f64> = match quad {
        Quadrature::Midpoint => {
            let expect0 = 0.5 * ds;
            if (samples[0].0 - expect0).abs() > spacing_tol
                || (t_end - (samples[m - 1].0 + 0.5 * ds)).abs() > spacing_tol
            {
                return Err(DkgError::InvalidInput(
                    "midpoint samples must sit at interval midpoints of [0, t_end]".into(),
                ));
            }
            vec![ds; m]
        }
        Quadrature::Simpson => {
            if m < 3 || m % 2 == 0 {
                return Err(DkgError::TooFewSamples { need: 3, got: m });
            }
            if samples[0].0.abs() > spacing_tol || (samples[m - 1].0 - t_end).abs() > spacing_tol {
                return Err(DkgError::InvalidInput(
                    "simpson samples must span [0, t_end] inclusively".into(),
                ));
            }
            (0..m)
                .map(|j| {
                    let w = if j == 0 || j == m - 1 {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * ds / 3.0
                })
                .collect()
        }
    };
    let mut acc = F::zero_like(&samples[0].1);
    for (j, (s, field)) in samples.iter().enumerate() {
        let propagated = flow.evolve(field, t_end - s)?;
        F::scale_add(&mut acc, weights[j], &propagated);
    }
    Ok(acc)
}
