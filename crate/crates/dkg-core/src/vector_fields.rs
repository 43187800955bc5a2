//! On-shell application of the symmetry vector fields.
//!
//! The six fields are, in order, the translations `d_t, d_1, d_2`, the
//! rotation `Om = x1 d_2 - x2 d_1`, and the Lorentz boosts
//! `L_a = t d_a + x_a d_t`. Spinors use the modified rotation/boosts
//! `Om - g1 g2 / 2` and `L_a - g0 g^a / 2`, which commute with the Dirac
//! operator. Time derivatives are never stored for the spinor; they are
//! reconstructed from the evolution equation (`on shell`), so every operation
//! here needs only instantaneous data.

use num_complex::Complex64;

use crate::error::DkgError;
use crate::grid::{spectral_gradient_r, spectral_gradient_spinor, laplacian_r, ScalarState, SpinorField};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldIndex {
    DT,
    D1,
    D2,
    Rotation,
    Boost1,
    Boost2,
}

impl FieldIndex {
    /// One-based index as conventionally ordered: 1..=6.
    pub fn from_index(k: usize) -> Result<Self, DkgError> {
        Ok(match k {
            1 => FieldIndex::DT,
            2 => FieldIndex::D1,
            3 => FieldIndex::D2,
            4 => FieldIndex::Rotation,
            5 => FieldIndex::Boost1,
            6 => FieldIndex::Boost2,
            _ => {
                return Err(DkgError::InvalidInput(format!(
                    "vector field index {k} out of range 1..=6"
                )))
            }
        })
    }
}

/// On-shell `d_t psi = -g0 g^a d_a psi + i g0 (v psi)`; pass `None` for the
/// free Dirac generator.
pub fn dpsi_dt(psi: &SpinorField, v: Option<&[f64]>) -> SpinorField {
    let (g1, g2) = spectral_gradient_spinor(psi);
    let mut out = SpinorField::zeros(&psi.grid);
    let i = C64::new(0.0, 1.0);
    for p in 0..out.c0.len() {
        // -sigma_x d1 - sigma_y d2 componentwise.
        out.c0[p] = -g1.c1[p] + i * g2.c1[p];
        out.c1[p] = -g1.c0[p] - i * g2.c0[p];
    }
    if let Some(v) = v {
        for p in 0..out.c0.len() {
            out.c0[p] += i * v[p] * psi.c0[p];
            out.c1[p] -= i * v[p] * psi.c1[p];
        }
    }
    out
}

/// On-shell `d_tt v = Lap v - v + psi* g0 psi`; pass `None` for the free
/// Klein-Gordon equation.
pub fn d2v_dtt(s: &ScalarState, psi: Option<&SpinorField>) -> Result<Vec<f64>, DkgError> {
    if let Some(psi) = psi {
        if !psi.grid.same_grid(&s.grid) {
            return Err(DkgError::GridMismatch("psi and v grids differ".into()));
        }
    }
    let mut out = laplacian_r(&s.grid, &s.u);
    for p in 0..out.len() {
        out[p] -= s.u[p];
    }
    if let Some(psi) = psi {
        for p in 0..out.len() {
            out[p] += psi.c0[p].norm_sqr() - psi.c1[p].norm_sqr();
        }
    }
    Ok(out)
}

/// On-shell `d_tt psi`, obtained by differentiating the first-order formula:
/// `d_tt psi = -g0 g^a d_a (d_t psi) + i g0 (v_t psi + v d_t psi)`.
pub fn d2psi_dtt(psi: &SpinorField, v: &ScalarState) -> SpinorField {
    let td = dpsi_dt(psi, Some(&v.u));
    let (g1, g2) = spectral_gradient_spinor(&td);
    let mut out = SpinorField::zeros(&psi.grid);
    let i = C64::new(0.0, 1.0);
    for p in 0..out.c0.len() {
        out.c0[p] = -g1.c1[p] + i * g2.c1[p] + i * (v.ut[p] * psi.c0[p] + v.u[p] * td.c0[p]);
        out.c1[p] = -g1.c0[p] - i * g2.c0[p] - i * (v.ut[p] * psi.c1[p] + v.u[p] * td.c1[p]);
    }
    out
}

/// `Gamma_k psi` on shell; `v` supplies the potential for the `d_t` parts.
pub fn vf_spinor(
    k: FieldIndex,
    psi: &SpinorField,
    v: Option<&[f64]>,
    t: f64,
) -> SpinorField {
    let grid = psi.grid.clone();
    let n = grid.n();
    match k {
        FieldIndex::DT => dpsi_dt(psi, v),
        FieldIndex::D1 => spectral_gradient_spinor(psi).0,
        FieldIndex::D2 => spectral_gradient_spinor(psi).1,
        FieldIndex::Rotation => {
            let (g1, g2) = spectral_gradient_spinor(psi);
            let mut out = SpinorField::zeros(&grid);
            for iy in 0..n {
                let x2 = grid.coord(iy);
                for ix in 0..n {
                    let x1 = grid.coord(ix);
                    let p = grid.idx(ix, iy);
                    out.c0[p] = x1 * g2.c0[p] - x2 * g1.c0[p];
                    out.c1[p] = x1 * g2.c1[p] - x2 * g1.c1[p];
                }
            }
            out
        }
        FieldIndex::Boost1 | FieldIndex::Boost2 => {
            let (g1, g2) = spectral_gradient_spinor(psi);
            let ga = if k == FieldIndex::Boost1 { &g1 } else { &g2 };
            let td = dpsi_dt(psi, v);
            let mut out = SpinorField::zeros(&grid);
            for iy in 0..n {
                for ix in 0..n {
                    let p = grid.idx(ix, iy);
                    let xa = if k == FieldIndex::Boost1 { grid.coord(ix) } else { grid.coord(iy) };
                    out.c0[p] = t * ga.c0[p] + xa * td.c0[p];
                    out.c1[p] = t * ga.c1[p] + xa * td.c1[p];
                }
            }
            out
        }
    }
}

/// `hat Gamma_k psi` for the rotation/boosts: the unmodified field minus the
/// constant spinor matrix (`g1 g2 / 2` resp. `g0 g^a / 2`).
pub fn vf_spinor_modified(
    k: FieldIndex,
    psi: &SpinorField,
    v: Option<&[f64]>,
    t: f64,
) -> Result<SpinorField, DkgError> {
    let mut out = vf_spinor(k, psi, v, t);
    let half_i = C64::new(0.0, 0.5);
    match k {
        FieldIndex::Rotation => {
            // g1 g2 = diag(-i, i)
            for p in 0..out.c0.len() {
                out.c0[p] += half_i * psi.c0[p];
                out.c1[p] -= half_i * psi.c1[p];
            }
        }
        FieldIndex::Boost1 => {
            for p in 0..out.c0.len() {
                out.c0[p] -= 0.5 * psi.c1[p];
                out.c1[p] -= 0.5 * psi.c0[p];
            }
        }
        FieldIndex::Boost2 => {
            for p in 0..out.c0.len() {
                out.c0[p] += half_i * psi.c1[p];
                out.c1[p] -= half_i * psi.c0[p];
            }
        }
        _ => {
            return Err(DkgError::InvalidInput(
                "modified vector fields exist only for rotation and boosts".into(),
            ))
        }
    }
    Ok(out)
}

/// `Gamma_k v` on shell for a scalar state (uses the stored `d_t u`).
pub fn vf_scalar(k: FieldIndex, s: &ScalarState, t: f64) -> Vec<f64> {
    let grid = &s.grid;
    let n = grid.n();
    match k {
        FieldIndex::DT => s.ut.clone(),
        FieldIndex::D1 => spectral_gradient_r(grid, &s.u).0,
        FieldIndex::D2 => spectral_gradient_r(grid, &s.u).1,
        FieldIndex::Rotation => {
            let (g1, g2) = spectral_gradient_r(grid, &s.u);
            let mut out = vec![0.0; grid.num_points()];
            for iy in 0..n {
                let x2 = grid.coord(iy);
                for ix in 0..n {
                    let p = grid.idx(ix, iy);
                    out[p] = grid.coord(ix) * g2[p] - x2 * g1[p];
                }
            }
            out
        }
        FieldIndex::Boost1 | FieldIndex::Boost2 => {
            let (g1, g2) = spectral_gradient_r(grid, &s.u);
            let ga = if k == FieldIndex::Boost1 { &g1 } else { &g2 };
            let mut out = vec![0.0; grid.num_points()];
            for iy in 0..n {
                for ix in 0..n {
                    let p = grid.idx(ix, iy);
                    let xa = if k == FieldIndex::Boost1 { grid.coord(ix) } else { grid.coord(iy) };
                    out[p] = t * ga[p] + xa * s.ut[p];
                }
            }
            out
        }
    }
}

/// Good derivative `G_a psi = d_a psi + omega_a d_t psi`; at the origin the
/// `omega` convention makes this plain `d_a`.
pub fn good_derivative_spinor(a: usize, psi: &SpinorField, v: Option<&[f64]>) -> SpinorField {
    assert!(a == 1 || a == 2, "good derivative index must be 1 or 2");
    let grid = psi.grid.clone();
    let n = grid.n();
    let (g1, g2) = spectral_gradient_spinor(psi);
    let ga = if a == 1 { &g1 } else { &g2 };
    let td = dpsi_dt(psi, v);
    let mut out = SpinorField::zeros(&grid);
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let w = grid.omega(ix, iy);
            let wa = if a == 1 { w.0 } else { w.1 };
            out.c0[p] = ga.c0[p] + wa * td.c0[p];
            out.c1[p] = ga.c1[p] + wa * td.c1[p];
        }
    }
    out
}

pub fn good_derivative_scalar(a: usize, s: &ScalarState) -> Vec<f64> {
    assert!(a == 1 || a == 2, "good derivative index must be 1 or 2");
    let grid = &s.grid;
    let n = grid.n();
    let (g1, g2) = spectral_gradient_r(grid, &s.u);
    let ga = if a == 1 { &g1 } else { &g2 };
    let mut out = vec![0.0; grid.num_points()];
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let w = grid.omega(ix, iy);
            let wa = if a == 1 { w.0 } else { w.1 };
            out[p] = ga[p] + wa * s.ut[p];
        }
    }
    out
}

/// Scaling field `S u = t d_t u + x^a d_a u` on shell. Used only inside
/// diagnostics; it is not a symmetry of the Klein-Gordon flow.
pub fn scaling_scalar(s: &ScalarState, t: f64) -> Vec<f64> {
    let grid = &s.grid;
    let n = grid.n();
    let (g1, g2) = spectral_gradient_r(grid, &s.u);
    let mut out = vec![0.0; grid.num_points()];
    for iy in 0..n {
        let x2 = grid.coord(iy);
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            out[p] = t * s.ut[p] + grid.coord(ix) * g1[p] + x2 * g2[p];
        }
    }
    out
}

/// Radial derivative `d_r = omega_a d_a` (zero at the origin by convention).
pub fn radial_derivative_r(s: &ScalarState) -> Vec<f64> {
    let grid = &s.grid;
    let n = grid.n();
    let (g1, g2) = spectral_gradient_r(grid, &s.u);
    let mut out = vec![0.0; grid.num_points()];
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let w = grid.omega(ix, iy);
            out[p] = w.0 * g1[p] + w.1 * g2[p];
        }
    }
    out
}
