//! Normal-form transformations and their equation residuals.
//!
//! The transformed fields are
//!
//! ```text
//! psi~  = psi + i g^mu d_mu (v psi)
//! Psi~  = Psi - v psi
//! v~    = v - psi* g0 psi
//! ```
//!
//! whose evolution equations have only null-form and cubic right-hand sides:
//!
//! ```text
//! -i g^mu d_mu psi~ = N1 + N2 + 2 Q0(psi, v)
//! -Box Psi~         = -(N1 + N2 + 2 Q0(psi, v))
//! -Box v~ + v~      = N3 + N4
//! [psi]-            = -i (I - omega_a g0 g^a) g^b G_b Psi
//! ```
//!
//! Residuals are measured in L^2 with spectral space derivatives; the
//! outermost time derivative is a centered difference over a uniformly
//! sampled trajectory segment, so for exact-in-time trajectories the residual
//! is O(h^2) in the sampling interval, and for split-step trajectories the
//! integration error enters at the same order.

use num_complex::Complex64;

use crate::error::DkgError;
use crate::evolver::SimState;
use crate::grid::{
    laplacian_c, laplacian_r, spectral_gradient_c, spectral_gradient_r, spectral_gradient_spinor,
    tree_sum_by, ScalarState, SpinorField,
};
use crate::spinor::{cubic_terms, CubicInputs, Jet, Spinor};
use crate::vector_fields::dpsi_dt;

pub type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct TransformBundle {
    pub psi_tilde: SpinorField,
    /// `Psi~`; present only when the state carries the auxiliary pair.
    pub big_psi_tilde: Option<SpinorField>,
    pub v_tilde: ScalarState,
}

/// Contraction `g^mu j_mu` on whole fields.
fn gamma_contract_fields(jt: &SpinorField, j1: &SpinorField, j2: &SpinorField) -> SpinorField {
    let mut out = SpinorField::zeros(&jt.grid);
    let i = C64::new(0.0, 1.0);
    for p in 0..out.c0.len() {
        out.c0[p] = jt.c0[p] + j1.c1[p] - i * j2.c1[p];
        out.c1[p] = -jt.c1[p] - j1.c0[p] - i * j2.c0[p];
    }
    out
}

/// `v psi` and its on-shell time derivative `v_t psi + v d_t psi`.
fn product_and_time_derivative(
    psi: &SpinorField,
    v: &ScalarState,
) -> (SpinorField, SpinorField) {
    let td = dpsi_dt(psi, Some(&v.u));
    let mut w = SpinorField::zeros(&psi.grid);
    let mut wt = SpinorField::zeros(&psi.grid);
    for p in 0..w.c0.len() {
        w.c0[p] = v.u[p] * psi.c0[p];
        w.c1[p] = v.u[p] * psi.c1[p];
        wt.c0[p] = v.ut[p] * psi.c0[p] + v.u[p] * td.c0[p];
        wt.c1[p] = v.ut[p] * psi.c1[p] + v.u[p] * td.c1[p];
    }
    (w, wt)
}

/// All three transformed fields at one time slice, derivatives spectral and
/// time derivatives on shell.
pub fn transform_fields(state: &SimState) -> TransformBundle {
    let psi = &state.psi;
    let v = &state.v;
    let (w, wt) = product_and_time_derivative(psi, v);
    let (w1, w2) = spectral_gradient_spinor(&w);

    let contracted = gamma_contract_fields(&wt, &w1, &w2);
    let mut psi_tilde = psi.clone();
    let i = C64::new(0.0, 1.0);
    for p in 0..psi_tilde.c0.len() {
        psi_tilde.c0[p] += i * contracted.c0[p];
        psi_tilde.c1[p] += i * contracted.c1[p];
    }

    let td = dpsi_dt(psi, Some(&v.u));
    let mut v_tilde = ScalarState::zeros(&v.grid);
    for p in 0..v_tilde.u.len() {
        let bil = psi.c0[p].norm_sqr() - psi.c1[p].norm_sqr();
        v_tilde.u[p] = v.u[p] - bil;
        let dbil = 2.0
            * (psi.c0[p].conj() * td.c0[p] - psi.c1[p].conj() * td.c1[p]).re;
        v_tilde.ut[p] = v.ut[p] - dbil;
    }

    let big_psi_tilde = state.aux.as_ref().map(|aux| {
        let mut out = SpinorField::zeros(&psi.grid);
        for p in 0..out.c0.len() {
            out.c0[p] = aux.p0[p] - w.c0[p];
            out.c1[p] = aux.p1[p] - w.c1[p];
        }
        out
    });

    TransformBundle { psi_tilde, big_psi_tilde, v_tilde }
}

/// The nonlinearities `(N1 + N2 + 2 Q0(psi, v), N3 + N4)` assembled on the
/// grid from the pointwise kernels.
fn nonlinear_sides(state: &SimState) -> (SpinorField, Vec<C64>) {
    let psi = &state.psi;
    let v = &state.v;
    let grid = psi.grid.clone();
    let td = dpsi_dt(psi, Some(&v.u));
    let (p1, p2) = spectral_gradient_spinor(psi);
    let (v1, v2) = spectral_gradient_r(&grid, &v.u);
    let (w, wt) = product_and_time_derivative(psi, v);
    let (w1, w2) = spectral_gradient_spinor(&w);

    let mut spinor_side = SpinorField::zeros(&grid);
    let mut scalar_side = vec![C64::new(0.0, 0.0); grid.num_points()];
    for p in 0..grid.num_points() {
        let inputs = CubicInputs {
            psi: psi.at(p),
            v: v.u[p],
            d_psi: Jet::new(td.at(p), p1.at(p), p2.at(p)),
            d_v: Jet::new(
                C64::new(v.ut[p], 0.0),
                C64::new(v1[p], 0.0),
                C64::new(v2[p], 0.0),
            ),
            d_vpsi: Jet::new(wt.at(p), w1.at(p), w2.at(p)),
        };
        let terms = cubic_terms(&inputs);
        let q0 = crate::spinor::null_form_q0_spinor(
            &inputs.d_psi,
            &inputs.d_v,
        );
        spinor_side.set(
            p,
            terms
                .n1
                .add(terms.n2)
                .add(q0.scale(C64::new(2.0, 0.0))),
        );
        scalar_side[p] = terms.n3 + terms.n4;
    }
    (spinor_side, scalar_side)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    PsiTilde,
    BigPsiTilde,
    VTilde,
    MinusStructure,
}

fn l2_of_spinor_diff(a: &SpinorField, b: &SpinorField) -> f64 {
    let idx: Vec<usize> = (0..a.c0.len()).collect();
    (tree_sum_by(&idx, |&p| {
        (a.c0[p] - b.c0[p]).norm_sqr() + (a.c1[p] - b.c1[p]).norm_sqr()
    }) * a.grid.cell_area())
    .sqrt()
}

/// Residual of the transformed equation selected by `kind`, evaluated at the
/// middle sample of a uniformly spaced odd-length segment (MinusStructure
/// needs only the middle sample but accepts the same shape).
pub fn transform_residual(states: &[SimState], kind: ResidualKind) -> Result<f64, DkgError> {
    if states.len() < 3 || states.len() % 2 == 0 {
        if kind == ResidualKind::MinusStructure && states.len() == 1 {
            return minus_structure_residual(&states[0]);
        }
        return Err(DkgError::TooFewSamples { need: 3, got: states.len() });
    }
    let h = states[1].t - states[0].t;
    for j in 1..states.len() {
        if ((states[j].t - states[j - 1].t) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(DkgError::InvalidInput("states are not uniformly sampled".into()));
        }
    }
    let m = states.len() / 2;
    match kind {
        ResidualKind::MinusStructure => minus_structure_residual(&states[m]),
        ResidualKind::PsiTilde => {
            let prev = transform_fields(&states[m - 1]).psi_tilde;
            let here = transform_fields(&states[m]).psi_tilde;
            let next = transform_fields(&states[m + 1]).psi_tilde;
            let mut dt_fd = SpinorField::zeros(&here.grid);
            for p in 0..dt_fd.c0.len() {
                dt_fd.c0[p] = (next.c0[p] - prev.c0[p]) / (2.0 * h);
                dt_fd.c1[p] = (next.c1[p] - prev.c1[p]) / (2.0 * h);
            }
            let (g1, g2) = spectral_gradient_spinor(&here);
            let contracted = gamma_contract_fields(&dt_fd, &g1, &g2);
            let mut lhs = SpinorField::zeros(&here.grid);
            let i = C64::new(0.0, 1.0);
            for p in 0..lhs.c0.len() {
                lhs.c0[p] = -i * contracted.c0[p];
                lhs.c1[p] = -i * contracted.c1[p];
            }
            let (rhs, _) = nonlinear_sides(&states[m]);
            Ok(l2_of_spinor_diff(&lhs, &rhs))
        }
        ResidualKind::BigPsiTilde => {
            let get = |j: usize| -> Result<SpinorField, DkgError> {
                transform_fields(&states[j]).big_psi_tilde.ok_or_else(|| {
                    DkgError::InvalidInput("auxiliary field missing for the Psi~ residual".into())
                })
            };
            let prev = get(m - 1)?;
            let here = get(m)?;
            let next = get(m + 1)?;
            let lap0 = laplacian_c(&here.grid, &here.c0);
            let lap1 = laplacian_c(&here.grid, &here.c1);
            // -Box Psi~ = d_tt Psi~ - Lap Psi~ must equal -(N1 + N2 + 2 Q0).
            let (rhs, _) = nonlinear_sides(&states[m]);
            let idx: Vec<usize> = (0..here.c0.len()).collect();
            let h2 = h * h;
            let res = tree_sum_by(&idx, |&p| {
                let dtt0 = (next.c0[p] - 2.0 * here.c0[p] + prev.c0[p]) / h2;
                let dtt1 = (next.c1[p] - 2.0 * here.c1[p] + prev.c1[p]) / h2;
                let r0 = dtt0 - lap0[p] + rhs.c0[p];
                let r1 = dtt1 - lap1[p] + rhs.c1[p];
                r0.norm_sqr() + r1.norm_sqr()
            }) * here.grid.cell_area();
            Ok(res.sqrt())
        }
        ResidualKind::VTilde => {
            let prev = transform_fields(&states[m - 1]).v_tilde;
            let here = transform_fields(&states[m]).v_tilde;
            let next = transform_fields(&states[m + 1]).v_tilde;
            let lap = laplacian_r(&here.grid, &here.u);
            let (_, rhs) = nonlinear_sides(&states[m]);
            let idx: Vec<usize> = (0..here.u.len()).collect();
            let h2 = h * h;
            let res = tree_sum_by(&idx, |&p| {
                let dtt = (next.u[p] - 2.0 * here.u[p] + prev.u[p]) / h2;
                let lhs = dtt - lap[p] + here.u[p];
                (C64::new(lhs, 0.0) - rhs[p]).norm_sqr()
            }) * here.grid.cell_area();
            Ok(res.sqrt())
        }
    }
}

/// Relative defect of the Dirac constraint on the auxiliary pair:
/// `|| -i g^mu d_mu Psi - psi ||_{L^2} / || psi ||_{L^2}`.
pub fn aux_constraint_residual(state: &SimState) -> Result<f64, DkgError> {
    let aux = state
        .aux
        .as_ref()
        .ok_or_else(|| DkgError::InvalidInput("auxiliary field missing".into()))?;
    let grid = state.psi.grid.clone();
    let (d1_p0, d2_p0) = spectral_gradient_c(&grid, &aux.p0);
    let (d1_p1, d2_p1) = spectral_gradient_c(&grid, &aux.p1);
    let i = C64::new(0.0, 1.0);
    let idx: Vec<usize> = (0..grid.num_points()).collect();
    let res = tree_sum_by(&idx, |&p| {
        // -i [g0 Psi_t + g1 d1 Psi + g2 d2 Psi] componentwise.
        let jt = Spinor::new(aux.p0t[p], aux.p1t[p]);
        let j1 = Spinor::new(d1_p0[p], d1_p1[p]);
        let j2 = Spinor::new(d2_p0[p], d2_p1[p]);
        let c0 = -i * (jt.c0 + j1.c1 - i * j2.c1);
        let c1 = -i * (-jt.c1 - j1.c0 - i * j2.c0);
        (c0 - state.psi.c0[p]).norm_sqr() + (c1 - state.psi.c1[p]).norm_sqr()
    }) * grid.cell_area();
    let norm = state.psi.l2_norm();
    if norm == 0.0 {
        return Ok(res.sqrt());
    }
    Ok(res.sqrt() / norm)
}

/// `|| [psi]- + i (I - omega_a g0 g^a) g^b G_b Psi ||_{L^2}`, the pointwise
/// bracket identity given the Dirac constraint on the auxiliary pair. The
/// origin is excluded: the `omega = 0` convention makes the identity hold
/// everywhere except that single measure-zero point.
fn minus_structure_residual(state: &SimState) -> Result<f64, DkgError> {
    let aux = state
        .aux
        .as_ref()
        .ok_or_else(|| DkgError::InvalidInput("auxiliary field missing".into()))?;
    let grid = state.psi.grid.clone();
    let n = grid.n();
    let minus = super::energies::minus_bracket_field(&state.psi);
    let (d1_p0, d2_p0) = spectral_gradient_c(&grid, &aux.p0);
    let (d1_p1, d2_p1) = spectral_gradient_c(&grid, &aux.p1);
    let i = C64::new(0.0, 1.0);
    let origin = grid.idx(n / 2, n / 2);
    let mut acc = Vec::with_capacity(grid.num_points());
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            if p == origin {
                continue;
            }
            let (w1, w2) = grid.omega(ix, iy);
            // G_b Psi = d_b Psi + omega_b d_t Psi, componentwise.
            let g1 = Spinor::new(d1_p0[p] + w1 * aux.p0t[p], d1_p1[p] + w1 * aux.p1t[p]);
            let g2 = Spinor::new(d2_p0[p] + w2 * aux.p0t[p], d2_p1[p] + w2 * aux.p1t[p]);
            // g1 G1 + g2 G2.
            let contracted = Spinor::new(g1.c1 - i * g2.c1, -g1.c0 - i * g2.c0);
            // M(omega) = I - omega_a g0 g^a.
            let off = C64::new(w1, -w2);
            let m_apply = Spinor::new(
                contracted.c0 - off * contracted.c1,
                contracted.c1 - off.conj() * contracted.c0,
            );
            let rhs = m_apply.scale(-i);
            let diff = minus.at(p).sub(rhs);
            acc.push(diff.norm_sqr());
        }
    }
    Ok((crate::grid::tree_sum(&acc) * grid.cell_area()).sqrt())
}
