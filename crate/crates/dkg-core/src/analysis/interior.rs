//! Pointwise interior-decay checks inside the cone `r <= 3t + 3`.
//!
//! Measured as worst-case ratios on a snapshot:
//!
//! ```text
//! |d psi| <= c ( <t-r>^-1 (|hat-Gamma psi| + |psi|) + t <t-r>^-1 |v psi| )
//! |v|     <= c ( <t-r>/<t+r> (|d Gamma v| + |d v|) + |psi* g0 psi| )
//! ```
//!
//! Points where the left side is below 1e-10 of its sup are skipped; in the
//! far tail both sides consist of roundoff dust and the ratio is meaningless.

use crate::evolver::SimState;
use crate::grid::{jbracket, spectral_gradient_r, spectral_gradient_spinor};
use crate::vector_fields::{d2v_dtt, dpsi_dt, vf_spinor_modified, FieldIndex};

const SIGNIFICANCE: f64 = 1e-10;

/// Worst ratio of `|d psi|` against the boosted right-hand side.
pub fn dirac_interior_ratio(state: &SimState) -> f64 {
    let grid = state.grid().clone();
    let n = grid.n();
    let t = state.t;
    let psi = &state.psi;
    let v = &state.v;

    let td = dpsi_dt(psi, Some(&v.u));
    let (g1, g2) = spectral_gradient_spinor(psi);
    let hat: Vec<_> = [FieldIndex::Rotation, FieldIndex::Boost1, FieldIndex::Boost2]
        .iter()
        .map(|&k| vf_spinor_modified(k, psi, Some(&v.u), t).expect("modified field"))
        .collect();

    let mut lhs = vec![0.0; grid.num_points()];
    for p in 0..lhs.len() {
        lhs[p] = (td.at(p).norm_sqr() + g1.at(p).norm_sqr() + g2.at(p).norm_sqr()).sqrt();
    }
    let sup = lhs.iter().fold(0.0f64, |m, &x| m.max(x));
    let mut worst = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            if r > 3.0 * t + 3.0 || lhs[p] < SIGNIFICANCE * sup {
                continue;
            }
            let hat_mag = (td.at(p).norm_sqr()
                + g1.at(p).norm_sqr()
                + g2.at(p).norm_sqr()
                + hat.iter().map(|h| h.at(p).norm_sqr()).sum::<f64>())
            .sqrt();
            let source = v.u[p].abs() * psi.at(p).norm();
            let inv_band = 1.0 / jbracket(t - r);
            let rhs = inv_band * (hat_mag + psi.at(p).norm()) + t * inv_band * source;
            if rhs > 0.0 {
                worst = worst.max(lhs[p] / rhs);
            }
        }
    }
    worst
}

/// Worst ratio of `|v|` against the Klein-Gordon interior right-hand side.
pub fn kg_interior_ratio(state: &SimState) -> f64 {
    let grid = state.grid().clone();
    let n = grid.n();
    let t = state.t;
    let v = &state.v;
    let psi = &state.psi;

    let vtt = d2v_dtt(v, Some(psi)).expect("shared grid");
    let (d1, d2) = spectral_gradient_r(&grid, &v.u);
    let (d11, d12) = spectral_gradient_r(&grid, &d1);
    let (_, d22) = spectral_gradient_r(&grid, &d2);
    let (e1, e2) = spectral_gradient_r(&grid, &v.ut);

    let sup_v = v.u.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for iy in 0..n {
        let x2 = grid.coord(iy);
        for ix in 0..n {
            let x1 = grid.coord(ix);
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            if r > 3.0 * t + 3.0 || v.u[p].abs() < SIGNIFICANCE * sup_v {
                continue;
            }
            // First jets of the six Gamma_k v, assembled by product rule so
            // no aperiodic coordinate factor is ever differentiated
            // spectrally.
            let jets = [
                // d_t v
                [vtt[p], e1[p], e2[p]],
                // d_1 v
                [e1[p], d11[p], d12[p]],
                // d_2 v
                [e2[p], d12[p], d22[p]],
                // Om v
                [
                    x1 * e2[p] - x2 * e1[p],
                    d2[p] + x1 * d12[p] - x2 * d11[p],
                    x1 * d22[p] - d1[p] - x2 * d12[p],
                ],
                // L_1 v
                [
                    d1[p] + t * e1[p] + x1 * vtt[p],
                    t * d11[p] + v.ut[p] + x1 * e1[p],
                    t * d12[p] + x1 * e2[p],
                ],
                // L_2 v
                [
                    d2[p] + t * e2[p] + x2 * vtt[p],
                    t * d12[p] + x2 * e1[p],
                    t * d22[p] + v.ut[p] + x2 * e2[p],
                ],
            ];
            let dgamma: f64 = jets
                .iter()
                .map(|j| j[0] * j[0] + j[1] * j[1] + j[2] * j[2])
                .sum::<f64>()
                .sqrt();
            let dv = (v.ut[p] * v.ut[p] + d1[p] * d1[p] + d2[p] * d2[p]).sqrt();
            let f = (psi.c0[p].norm_sqr() - psi.c1[p].norm_sqr()).abs();
            let rhs = jbracket(t - r) / jbracket(t + r) * (dgamma + dv) + f;
            if rhs > 0.0 {
                worst = worst.max(v.u[p].abs() / rhs);
            }
        }
    }
    worst
}
