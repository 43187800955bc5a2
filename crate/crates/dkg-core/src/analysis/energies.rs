//! Energy functionals and the running ledger of spacetime integrals.
//!
//! Instantaneous quantities: the Dirac L^2 mass `int |psi|^2`, the
//! Klein-Gordon energy `E1 = int (u_t^2 + |grad u|^2 + u^2)`, the wave energy
//! `E0` (no mass term), the conformal energy
//! `F = int ((Su + u)^2 + sum_a (L_a u)^2 + (Om u)^2)`, and the
//! exterior-weighted L^2 norms `|| <r-t> chi(r-2t) f ||`.
//!
//! Accumulated quantities (trapezoid in t at the sampling cadence): the
//! ghost integrals `int_0^t int |[psi]-|^2 <r-s>^(-6/5)` and
//! `int_0^t int (u^2 + |G_a u|^2) <r-s>^(-6/5)`, plus their modified variants
//! carrying an extra `<s>^(-delta1)` factor.

use crate::error::DkgError;
use crate::evolver::{AuxField, SimState};
use crate::grid::{
    chi_cutoff, jbracket, spectral_gradient_c, spectral_gradient_r, tree_sum_by, ScalarState,
    SpinorField,
};
use crate::spinor::{radial_projection, RadialSign};
use crate::vector_fields::{good_derivative_scalar, scaling_scalar, vf_scalar, FieldIndex};

/// `int |psi|^2 dx`.
pub fn dirac_mass(psi: &SpinorField) -> f64 {
    let idx: Vec<usize> = (0..psi.c0.len()).collect();
    tree_sum_by(&idx, |&p| psi.at(p).norm_sqr()) * psi.grid.cell_area()
}

/// Klein-Gordon energy `E1`.
pub fn kg_energy(s: &ScalarState) -> f64 {
    let (g1, g2) = spectral_gradient_r(&s.grid, &s.u);
    let idx: Vec<usize> = (0..s.u.len()).collect();
    tree_sum_by(&idx, |&p| {
        s.ut[p] * s.ut[p] + g1[p] * g1[p] + g2[p] * g2[p] + s.u[p] * s.u[p]
    }) * s.grid.cell_area()
}

/// Wave energy `E0` (derivatives only).
pub fn wave_energy(s: &ScalarState) -> f64 {
    let (g1, g2) = spectral_gradient_r(&s.grid, &s.u);
    let idx: Vec<usize> = (0..s.u.len()).collect();
    tree_sum_by(&idx, |&p| s.ut[p] * s.ut[p] + g1[p] * g1[p] + g2[p] * g2[p])
        * s.grid.cell_area()
}

/// Conformal energy `F` with `S`, `L_a`, `Om` applied on shell.
pub fn conformal_energy(s: &ScalarState, t: f64) -> f64 {
    let su = scaling_scalar(s, t);
    let l1 = vf_scalar(FieldIndex::Boost1, s, t);
    let l2 = vf_scalar(FieldIndex::Boost2, s, t);
    let om = vf_scalar(FieldIndex::Rotation, s, t);
    let idx: Vec<usize> = (0..s.u.len()).collect();
    tree_sum_by(&idx, |&p| {
        let a = su[p] + s.u[p];
        a * a + l1[p] * l1[p] + l2[p] * l2[p] + om[p] * om[p]
    }) * s.grid.cell_area()
}

/// Splits a complex wave pair into the four real (u, u_t) pairs so the scalar
/// energies apply componentwise.
fn aux_real_pairs(aux: &AuxField) -> Vec<ScalarState> {
    let grid = &aux.grid;
    let parts: [(&Vec<_>, &Vec<_>); 2] = [(&aux.p0, &aux.p0t), (&aux.p1, &aux.p1t)];
    let mut out = Vec::with_capacity(4);
    for (u, ut) in parts {
        for pick_im in [false, true] {
            let mut s = ScalarState::zeros(grid);
            for p in 0..u.len() {
                s.u[p] = if pick_im { u[p].im } else { u[p].re };
                s.ut[p] = if pick_im { ut[p].im } else { ut[p].re };
            }
            out.push(s);
        }
    }
    out
}

/// `E0` of the auxiliary pair, summed over components.
pub fn aux_wave_energy(aux: &AuxField) -> f64 {
    aux_real_pairs(aux).iter().map(wave_energy).sum()
}

/// Conformal energy of the auxiliary pair, summed over components.
pub fn aux_conformal_energy(aux: &AuxField, t: f64) -> f64 {
    aux_real_pairs(aux).iter().map(|s| conformal_energy(s, t)).sum()
}

/// `|| <r-t> chi(r-2t) psi ||_{L^2}`.
pub fn exterior_norm_spinor(psi: &SpinorField, t: f64) -> f64 {
    let grid = &psi.grid;
    let n = grid.n();
    let mut acc = Vec::with_capacity(grid.num_points());
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            let w = jbracket(r - t) * chi_cutoff(r - 2.0 * t);
            acc.push(w * w * psi.at(p).norm_sqr());
        }
    }
    (crate::grid::tree_sum(&acc) * grid.cell_area()).sqrt()
}

/// `|| <r-t> chi(r-2t) u ||_{L^2}` for the scalar field.
pub fn exterior_norm_scalar(s: &ScalarState, t: f64) -> f64 {
    let grid = &s.grid;
    let n = grid.n();
    let mut acc = Vec::with_capacity(grid.num_points());
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            let w = jbracket(r - t) * chi_cutoff(r - 2.0 * t);
            acc.push(w * w * s.u[p] * s.u[p]);
        }
    }
    (crate::grid::tree_sum(&acc) * grid.cell_area()).sqrt()
}

/// Pointwise minus bracket `[psi]-` with the grid's `omega` convention.
pub fn minus_bracket_field(psi: &SpinorField) -> SpinorField {
    let grid = psi.grid.clone();
    let n = grid.n();
    let mut out = SpinorField::zeros(&grid);
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let (w1, w2) = grid.omega(ix, iy);
            let w = crate::spinor::UnitDirection { w1, w2 };
            out.set(p, radial_projection(psi.at(p), w, RadialSign::Minus));
        }
    }
    out
}

/// `int |[psi]-|^2 <r-t>^(-6/5) dx`, the ghost dissipation rate.
pub fn dirac_ghost_rate(psi: &SpinorField, t: f64) -> f64 {
    let grid = &psi.grid;
    let n = grid.n();
    let minus = minus_bracket_field(psi);
    let mut acc = Vec::with_capacity(grid.num_points());
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            acc.push(minus.at(p).norm_sqr() * jbracket(r - t).powf(-1.2));
        }
    }
    crate::grid::tree_sum(&acc) * grid.cell_area()
}

/// `int (u^2 + |G_1 u|^2 + |G_2 u|^2) <r-t>^(-6/5) dx`.
pub fn kg_ghost_rate(s: &ScalarState, t: f64) -> f64 {
    let grid = &s.grid;
    let n = grid.n();
    let gd1 = good_derivative_scalar(1, s);
    let gd2 = good_derivative_scalar(2, s);
    let mut acc = Vec::with_capacity(grid.num_points());
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            let w = jbracket(r - t).powf(-1.2);
            acc.push((s.u[p] * s.u[p] + gd1[p] * gd1[p] + gd2[p] * gd2[p]) * w);
        }
    }
    crate::grid::tree_sum(&acc) * grid.cell_area()
}

/// Weighted sup `|| <t+r> u ||_{L^inf}` over grid points.
pub fn weighted_sup_scalar(s: &ScalarState, t: f64) -> f64 {
    let grid = &s.grid;
    let n = grid.n();
    let mut m = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            m = m.max(jbracket(t + grid.radius(ix, iy)) * s.u[p].abs());
        }
    }
    m
}

/// One sample time's energies plus the running spacetime accumulators.
///
/// `e0` and `f_conformal` refer to the auxiliary wave pair when it is
/// tracked, and to the scalar field otherwise. Accumulators are nondecreasing
/// in `t` and advanced with the trapezoid rule between samples.
#[derive(Clone, Debug)]
pub struct EnergyLedger {
    pub t: f64,
    pub delta: f64,
    pub delta1: f64,
    pub ed_inst: f64,
    pub ed_ghost_acc: f64,
    pub ed_ghost_mod_acc: f64,
    pub e1: f64,
    pub g1_ghost_acc: f64,
    pub g1_ghost_mod_acc: f64,
    pub e0: f64,
    pub f_conformal: f64,
    pub ext_psi: f64,
    pub ext_v: f64,
    prev_rates: Option<[f64; 4]>,
    started: bool,
}

impl EnergyLedger {
    /// `delta1 = 3 delta` unless overridden by the caller.
    pub fn new(delta: f64) -> Self {
        EnergyLedger {
            t: 0.0,
            delta,
            delta1: 3.0 * delta,
            ed_inst: 0.0,
            ed_ghost_acc: 0.0,
            ed_ghost_mod_acc: 0.0,
            e1: 0.0,
            g1_ghost_acc: 0.0,
            g1_ghost_mod_acc: 0.0,
            e0: 0.0,
            f_conformal: 0.0,
            ext_psi: 0.0,
            ext_v: 0.0,
            prev_rates: None,
            started: false,
        }
    }

    /// Total ghost-weight Dirac energy `E^D(t)`.
    pub fn dirac_ghost_energy(&self) -> f64 {
        self.ed_inst + self.ed_ghost_acc
    }

    /// Total Klein-Gordon ghost energy `G1(t)`.
    pub fn kg_ghost_energy(&self) -> f64 {
        self.e1 + self.g1_ghost_acc
    }
}

/// Advances the ledger to a new sample. Fails on time regression.
pub fn energy_snapshot(state: &SimState, ledger: &mut EnergyLedger) -> Result<(), DkgError> {
    if ledger.started && state.t < ledger.t {
        return Err(DkgError::InvalidInput(format!(
            "ledger time {} regressed to {}",
            ledger.t, state.t
        )));
    }
    let t = state.t;
    let mod_w = jbracket(t).powf(-ledger.delta1);
    let dirac_rate = dirac_ghost_rate(&state.psi, t);
    let kg_rate = kg_ghost_rate(&state.v, t);
    let rates = [dirac_rate, mod_w * dirac_rate, kg_rate, mod_w * kg_rate];
    if let Some(prev) = ledger.prev_rates {
        let h = t - ledger.t;
        ledger.ed_ghost_acc += 0.5 * h * (prev[0] + rates[0]);
        ledger.ed_ghost_mod_acc += 0.5 * h * (prev[1] + rates[1]);
        ledger.g1_ghost_acc += 0.5 * h * (prev[2] + rates[2]);
        ledger.g1_ghost_mod_acc += 0.5 * h * (prev[3] + rates[3]);
    }
    ledger.prev_rates = Some(rates);
    ledger.t = t;
    ledger.started = true;
    ledger.ed_inst = dirac_mass(&state.psi);
    ledger.e1 = kg_energy(&state.v);
    match &state.aux {
        Some(aux) => {
            ledger.e0 = aux_wave_energy(aux);
            ledger.f_conformal = aux_conformal_energy(aux, t);
        }
        None => {
            ledger.e0 = wave_energy(&state.v);
            ledger.f_conformal = conformal_energy(&state.v, t);
        }
    }
    ledger.ext_psi = exterior_norm_spinor(&state.psi, t);
    ledger.ext_v = exterior_norm_scalar(&state.v, t);
    Ok(())
}

/// H^1-type norm of a complex field: `sqrt(||f||^2 + ||grad f||^2)`.
pub fn h1_norm_c(grid: &crate::grid::SpectralGrid, data: &[crate::grid::C64]) -> f64 {
    let (g1, g2) = spectral_gradient_c(grid, data);
    let idx: Vec<usize> = (0..data.len()).collect();
    (tree_sum_by(&idx, |&p| data[p].norm_sqr() + g1[p].norm_sqr() + g2[p].norm_sqr())
        * grid.cell_area())
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::spinor::Spinor;
    use std::sync::Arc;

    fn grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(256, 10.0).unwrap()
    }

    #[test]
    fn constant_spinor_mass() {
        let g = grid();
        let c = Spinor::new(crate::spinor::C64::new(0.3, 0.4), crate::spinor::C64::new(0.0, 0.0));
        let psi = SpinorField::from_fn(&g, |_, _| c);
        let want = c.norm_sqr() * (2.0 * g.half_width()).powi(2);
        assert!((dirac_mass(&psi) - want).abs() < 1e-10 * want);
    }

    #[test]
    fn conformal_energy_of_gaussian() {
        // u = exp(-r^2), u_t = 0 at t = 0: Su + u = (1 - 2 r^2) e^{-r^2},
        // everything else vanishes, and the integral is pi/2.
        let g = grid();
        let s = ScalarState::from_fn(&g, |x, y| (-(x * x + y * y)).exp(), |_, _| 0.0);
        let f = conformal_energy(&s, 0.0);
        assert!((f - std::f64::consts::PI / 2.0).abs() < 1e-4, "F = {f}");
    }

    #[test]
    fn zero_state_ledger() {
        let g = grid();
        let state = SimState {
            t: 0.0,
            psi: SpinorField::zeros(&g),
            v: ScalarState::zeros(&g),
            aux: None,
        };
        let mut ledger = EnergyLedger::new(0.05);
        energy_snapshot(&state, &mut ledger).unwrap();
        assert_eq!(ledger.ed_inst, 0.0);
        assert_eq!(ledger.e1, 0.0);
        assert_eq!(ledger.f_conformal, 0.0);
        assert_eq!(ledger.ext_psi, 0.0);
    }

    #[test]
    fn accumulators_are_nondecreasing_and_time_checked() {
        let g = SpectralGrid::new(64, 8.0).unwrap();
        let psi = SpinorField::from_fn(&g, |x, y| {
            Spinor::from_re(0.2 * (-(x * x + y * y)).exp(), 0.0)
        });
        let v = ScalarState::from_fn(&g, |x, y| 0.1 * (-(x * x + y * y)).exp(), |_, _| 0.0);
        let mut ledger = EnergyLedger::new(0.05);
        let mut prev = 0.0;
        for j in 0..5 {
            let state = SimState {
                t: j as f64 * 0.5,
                psi: psi.clone(),
                v: v.clone(),
                aux: None,
            };
            energy_snapshot(&state, &mut ledger).unwrap();
            assert!(ledger.ed_ghost_acc >= prev);
            prev = ledger.ed_ghost_acc;
        }
        let back = SimState { t: 0.1, psi, v, aux: None };
        assert!(energy_snapshot(&back, &mut ledger).is_err());
    }

    #[test]
    fn e1_conserved_by_free_flow() {
        let g = SpectralGrid::new(64, 8.0).unwrap();
        let s = ScalarState::from_fn(&g, |x, y| (-(x * x + y * y)).exp(), |_, _| 0.0);
        let e0 = kg_energy(&s);
        let moved = crate::propagators::kg_free_flow(&s, 7.3).unwrap();
        assert!((kg_energy(&moved) - e0).abs() < 1e-10 * e0);

        let w0 = wave_energy(&s);
        let moved = crate::propagators::wave_free_flow(&s, 7.3).unwrap();
        assert!((wave_energy(&moved) - w0).abs() < 1e-10 * w0.max(1.0));
    }
}
