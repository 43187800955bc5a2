//! Coupled time integration by Strang splitting with exact sub-flows.
//!
//! One step is kick(dt/2) -> free flow(dt) -> kick(dt/2), where the kick
//! solves the nonlinear part exactly: with `v` frozen, `d_t psi = i g0 v psi`
//! is a pointwise diagonal phase rotation (`g0` is diagonal), and the phase
//! leaves `psi* g0 psi` invariant so `v_t <- v_t + tau psi* g0 psi` is exact
//! as well. The free flow is the tabulated Fourier-space evolution; the 2/3
//! dealias projection rides along inside the transform when enabled.
//!
//! The auxiliary wave potential `Psi` (per spinor component, with
//! `(Psi, d_t Psi) = (0, i g0 psi)` at t = 0 and source `-v psi`) is
//! co-evolved in spectral space: one wave-pair rotation plus a trapezoid
//! Duhamel correction from the step-endpoint sources. It is materialized to
//! physical space only at sample times.
//!
//! The evolution loop is single-writer; snapshots handed to sinks are fresh
//! copies and may be processed concurrently with subsequent steps.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::DkgError;
use crate::grid::{ScalarState, SpectralGrid, SpinorField};
use crate::propagators::{DiracPropagator, KgPropagator, WavePropagator};
use crate::spinor::Spinor;

pub type C64 = Complex64;

/// Hard cap on the splitting step.
pub const DT_MAX: f64 = 0.1;

/// Relative floor below which initial data counts as numerically supported.
pub const SUPPORT_TAIL: f64 = 1e-14;

/// The auxiliary C^2-valued wave pair `(Psi, d_t Psi)`, stored per component.
#[derive(Clone, Debug)]
pub struct AuxField {
    pub grid: Arc<SpectralGrid>,
    pub p0: Vec<C64>,
    pub p1: Vec<C64>,
    pub p0t: Vec<C64>,
    pub p1t: Vec<C64>,
}

impl AuxField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        let m = grid.num_points();
        let z = vec![C64::new(0.0, 0.0); m];
        AuxField { grid: grid.clone(), p0: z.clone(), p1: z.clone(), p0t: z.clone(), p1t: z }
    }

    pub fn is_finite(&self) -> bool {
        self.p0
            .iter()
            .chain(self.p1.iter())
            .chain(self.p0t.iter())
            .chain(self.p1t.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Full simulation state at one time slice.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub psi: SpinorField,
    pub v: ScalarState,
    pub aux: Option<AuxField>,
}

impl SimState {
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.psi.grid
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite()
            && self.v.is_finite()
            && self.aux.as_ref().map_or(true, |a| a.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFamily {
    Gaussian,
    Ring,
    PlaneModulated,
}

/// Parameters of the initial-data families. All profiles are radially
/// centered at `center` and numerically supported well inside the box; the
/// Klein-Gordon part is a Gaussian bump `(v0, 0)`.
#[derive(Clone, Debug)]
pub struct InitialDataSpec {
    pub family: DataFamily,
    /// Spinor amplitude (the smallness parameter).
    pub amplitude: f64,
    /// Spinor profile width.
    pub width: f64,
    pub center: (f64, f64),
    /// Spinor polarization; normalized internally.
    pub polarization: Spinor,
    pub kg_amplitude: f64,
    pub kg_width: f64,
    /// Peak radius for the ring family.
    pub ring_radius: f64,
    /// Integer mode indices of the plane modulation.
    pub mode: (i32, i32),
    /// Seed for the randomized modulation phase.
    pub seed: u64,
    /// Attach the auxiliary wave pair `(0, i g0 psi0)`.
    pub with_aux: bool,
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        InitialDataSpec {
            family: DataFamily::Gaussian,
            amplitude: 0.01,
            width: 1.5,
            center: (0.0, 0.0),
            polarization: Spinor::from_re(1.0, 0.0),
            kg_amplitude: 0.01,
            kg_width: 1.5,
            ring_radius: 3.0,
            mode: (2, 0),
            seed: 1,
            with_aux: true,
        }
    }
}

/// Largest radius at which any field exceeds `SUPPORT_TAIL` times its sup.
pub fn support_radius(state: &SimState) -> f64 {
    let grid = state.grid();
    let n = grid.n();
    let psi_sup = state.psi.linf_norm();
    let v_sup = state.v.u.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let vt_sup = state.v.ut.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut r_max = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let p = grid.idx(ix, iy);
            let live = state.psi.at(p).norm() > SUPPORT_TAIL * psi_sup
                || state.v.u[p].abs() > SUPPORT_TAIL * v_sup
                || state.v.ut[p].abs() > SUPPORT_TAIL * vt_sup;
            if live {
                r_max = r_max.max(grid.radius(ix, iy));
            }
        }
    }
    r_max
}

/// Builds `(psi0, v0, v1)` from the data spec, plus the auxiliary pair when
/// requested. Fails if the numerical support exceeds a quarter of the box.
pub fn make_initial_data(
    spec: &InitialDataSpec,
    grid: &Arc<SpectralGrid>,
) -> Result<SimState, DkgError> {
    if spec.amplitude < 0.0 || spec.kg_amplitude < 0.0 {
        return Err(DkgError::InvalidInput("amplitudes must be nonnegative".into()));
    }
    if !(spec.width > 0.0) || !(spec.kg_width > 0.0) {
        return Err(DkgError::InvalidInput("profile widths must be positive".into()));
    }
    let pol_norm = spec.polarization.norm();
    let pol = if pol_norm == 0.0 {
        Spinor::from_re(1.0, 0.0)
    } else {
        spec.polarization.scale(C64::new(1.0 / pol_norm, 0.0))
    };
    let (cx, cy) = spec.center;
    let phase0 = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
        rng.gen::<f64>() * std::f64::consts::TAU
    };
    let l = grid.half_width();
    let kx = std::f64::consts::PI * spec.mode.0 as f64 / l;
    let ky = std::f64::consts::PI * spec.mode.1 as f64 / l;

    let psi = SpinorField::from_fn(grid, |x, y| {
        let dxc = x - cx;
        let dyc = y - cy;
        let r = (dxc * dxc + dyc * dyc).sqrt();
        let profile = match spec.family {
            DataFamily::Gaussian => (-(r * r) / (spec.width * spec.width)).exp(),
            DataFamily::Ring => {
                let d = r - spec.ring_radius;
                (-(d * d) / (spec.width * spec.width)).exp()
            }
            DataFamily::PlaneModulated => (-(r * r) / (spec.width * spec.width)).exp(),
        };
        let mut amp = C64::new(spec.amplitude * profile, 0.0);
        if spec.family == DataFamily::PlaneModulated {
            amp *= C64::new(0.0, kx * x + ky * y + phase0).exp();
        }
        pol.scale(amp)
    });
    let v = ScalarState::from_fn(
        grid,
        |x, y| {
            let dxc = x - cx;
            let dyc = y - cy;
            spec.kg_amplitude * (-(dxc * dxc + dyc * dyc) / (spec.kg_width * spec.kg_width)).exp()
        },
        |_, _| 0.0,
    );

    let aux = if spec.with_aux {
        let mut a = AuxField::zeros(grid);
        // (Psi, d_t Psi) = (0, i g0 psi0); g0 = diag(1, -1).
        let i = C64::new(0.0, 1.0);
        for p in 0..a.p0.len() {
            a.p0t[p] = i * psi.c0[p];
            a.p1t[p] = -i * psi.c1[p];
        }
        Some(a)
    } else {
        None
    };

    let state = SimState { t: 0.0, psi, v, aux };
    let r_support = support_radius(&state);
    if r_support > l / 4.0 {
        return Err(DkgError::InvalidInput(format!(
            "initial data support radius {r_support:.2} exceeds a quarter box {:.2}",
            l / 4.0
        )));
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// The splitting stepper
// ---------------------------------------------------------------------------

pub struct Stepper {
    grid: Arc<SpectralGrid>,
    dt: f64,
    dealias: bool,
    dirac: DiracPropagator,
    kg: KgPropagator,
    wave: WavePropagator,
}

/// Spectral-resident form of the auxiliary pair used inside the loop,
/// together with the previous step-endpoint source.
struct AuxSpectral {
    p0: Vec<C64>,
    p1: Vec<C64>,
    p0t: Vec<C64>,
    p1t: Vec<C64>,
    src0: Vec<C64>,
    src1: Vec<C64>,
}

impl Stepper {
    pub fn new(grid: &Arc<SpectralGrid>, dt: f64, dealias: bool) -> Result<Self, DkgError> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(DkgError::InvalidInput(format!("step {dt} must be finite and nonzero")));
        }
        if dt.abs() > DT_MAX {
            return Err(DkgError::InvalidInput(format!(
                "step {dt} exceeds the splitting cap {DT_MAX}"
            )));
        }
        Ok(Stepper {
            grid: grid.clone(),
            dt,
            dealias,
            dirac: DiracPropagator::new(grid, dt)?,
            kg: KgPropagator::new(grid, dt)?,
            wave: WavePropagator::new(grid, dt)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn mask(&self, data: &mut [C64]) {
        if !self.dealias {
            return;
        }
        let n = self.grid.n();
        for iy in 0..n {
            let keep_y = self.grid.in_passband(iy);
            let row = iy * n;
            for ix in 0..n {
                if !(keep_y && self.grid.in_passband(ix)) {
                    data[row + ix] = C64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Exact nonlinear sub-flow over `tau`: phase-rotate the spinor by the
    /// frozen potential and kick `v_t` by the (phase-invariant) bilinear.
    fn kick(&self, psi: &mut SpinorField, v: &ScalarState, vt: &mut [f64], tau: f64) {
        for p in 0..psi.c0.len() {
            let (s, c) = (v.u[p] * tau).sin_cos();
            let phase = C64::new(c, s);
            psi.c0[p] *= phase;
            psi.c1[p] *= phase.conj();
            vt[p] += tau * (psi.c0[p].norm_sqr() - psi.c1[p].norm_sqr());
        }
    }

    /// One Strang step of the main fields, in place.
    fn step_main(&self, psi: &mut SpinorField, v: &mut ScalarState) {
        let half = 0.5 * self.dt;
        let mut vt = std::mem::take(&mut v.ut);
        self.kick(psi, v, &mut vt, half);

        self.grid.fft2_forward(&mut psi.c0);
        self.grid.fft2_forward(&mut psi.c1);
        self.mask(&mut psi.c0);
        self.mask(&mut psi.c1);
        self.dirac.apply_spectral(&mut psi.c0, &mut psi.c1);
        self.grid.fft2_inverse(&mut psi.c0);
        self.grid.fft2_inverse(&mut psi.c1);

        // Packed (u + i u_t) Klein-Gordon flow with the mask folded in.
        let mut z: Vec<C64> = (0..v.u.len()).map(|p| C64::new(v.u[p], vt[p])).collect();
        self.grid.fft2_forward(&mut z);
        self.mask(&mut z);
        self.kg.mix_packed_spectral(&mut z);
        self.grid.fft2_inverse(&mut z);
        for p in 0..v.u.len() {
            v.u[p] = z[p].re;
            vt[p] = z[p].im;
        }

        self.kick(psi, v, &mut vt, half);
        v.ut = vt;
    }

    /// Advances the spectral auxiliary pair by one step given the new
    /// step-endpoint source (already transformed and masked): wave rotation
    /// plus the trapezoid Duhamel correction.
    fn step_aux(&self, aux: &mut AuxSpectral, src0_new: Vec<C64>, src1_new: Vec<C64>) {
        let w = 0.5 * self.dt;
        self.wave.apply_spectral_pair(&mut aux.p0, &mut aux.p0t);
        self.wave.apply_spectral_pair(&mut aux.p1, &mut aux.p1t);
        self.wave.add_spectral_source(&mut aux.p0, &mut aux.p0t, &aux.src0, w);
        self.wave.add_spectral_source(&mut aux.p1, &mut aux.p1t, &aux.src1, w);
        for p in 0..aux.p0t.len() {
            aux.p0t[p] += w * src0_new[p];
            aux.p1t[p] += w * src1_new[p];
        }
        aux.src0 = src0_new;
        aux.src1 = src1_new;
    }

    /// Spectral, masked `-v psi` at the current state.
    fn source_spectral(&self, psi: &SpinorField, v: &ScalarState) -> (Vec<C64>, Vec<C64>) {
        let mut s0: Vec<C64> = (0..psi.c0.len()).map(|p| -v.u[p] * psi.c0[p]).collect();
        let mut s1: Vec<C64> = (0..psi.c1.len()).map(|p| -v.u[p] * psi.c1[p]).collect();
        self.grid.fft2_forward(&mut s0);
        self.grid.fft2_forward(&mut s1);
        self.mask(&mut s0);
        self.mask(&mut s1);
        (s0, s1)
    }

    fn ingest_aux(&self, aux: &AuxField, psi: &SpinorField, v: &ScalarState) -> AuxSpectral {
        let mut a = AuxSpectral {
            p0: aux.p0.clone(),
            p1: aux.p1.clone(),
            p0t: aux.p0t.clone(),
            p1t: aux.p1t.clone(),
            src0: Vec::new(),
            src1: Vec::new(),
        };
        self.grid.fft2_forward(&mut a.p0);
        self.grid.fft2_forward(&mut a.p1);
        self.grid.fft2_forward(&mut a.p0t);
        self.grid.fft2_forward(&mut a.p1t);
        let (s0, s1) = self.source_spectral(psi, v);
        a.src0 = s0;
        a.src1 = s1;
        a
    }

    fn materialize_aux(&self, aux: &AuxSpectral) -> AuxField {
        let mut out = AuxField {
            grid: self.grid.clone(),
            p0: aux.p0.clone(),
            p1: aux.p1.clone(),
            p0t: aux.p0t.clone(),
            p1t: aux.p1t.clone(),
        };
        self.grid.fft2_inverse(&mut out.p0);
        self.grid.fft2_inverse(&mut out.p1);
        self.grid.fft2_inverse(&mut out.p0t);
        self.grid.fft2_inverse(&mut out.p1t);
        out
    }
}

/// One Strang step of the full state; the auxiliary pair co-evolves when
/// present. Accepts signed `dt` (the reverse step undoes a forward step up to
/// splitting error); driving a trajectory forward is `evolve`'s job.
pub fn strang_step(state: &SimState, dt: f64, dealias: bool) -> Result<SimState, DkgError> {
    let stepper = Stepper::new(state.grid(), dt, dealias)?;
    let mut psi = state.psi.clone();
    let mut v = state.v.clone();
    let aux = state.aux.as_ref().map(|a| {
        let mut spec = stepper.ingest_aux(a, &state.psi, &state.v);
        stepper.step_main(&mut psi, &mut v);
        let (s0, s1) = stepper.source_spectral(&psi, &v);
        stepper.step_aux(&mut spec, s0, s1);
        stepper.materialize_aux(&spec)
    });
    if aux.is_none() {
        stepper.step_main(&mut psi, &mut v);
    }
    if !psi.c0[0].re.is_finite() || !v.u[0].is_finite() {
        return Err(DkgError::NonFinite { t: state.t + dt });
    }
    Ok(SimState { t: state.t + dt, psi, v, aux })
}

/// `strang_step` with the auxiliary pair required.
pub fn co_evolve_aux(state: &SimState, dt: f64, dealias: bool) -> Result<SimState, DkgError> {
    if state.aux.is_none() {
        return Err(DkgError::InvalidInput("auxiliary field missing".into()));
    }
    strang_step(state, dt, dealias)
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub psi_l2: f64,
    pub v_l2: f64,
    /// Klein-Gordon energy of the (dealiased) state at the sample.
    pub kg_energy: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveParams {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub dealias: bool,
}

pub struct EvolveOutput {
    pub state: SimState,
    pub reports: Vec<StepReport>,
}

/// Abort carrying the last finite state so it can be persisted.
#[derive(Debug)]
pub struct EvolveAbort {
    pub error: DkgError,
    pub last_good: Box<SimState>,
    pub reports: Vec<StepReport>,
}

/// Drives the trajectory from `state.t` to `t_end`, invoking `sink` on every
/// sampled snapshot (every `sample_every` steps and at the final time).
///
/// When the spinor is identically zero the coupling vanishes exactly; the
/// loop then short-circuits to the pure free flows (no kicks, no dealias
/// mask), reproducing the composed propagators bit for bit.
pub fn evolve(
    state: SimState,
    params: &EvolveParams,
    sink: &mut dyn FnMut(&SimState, &StepReport) -> Result<(), DkgError>,
) -> Result<EvolveOutput, Box<EvolveAbort>> {
    let invalid = |e: DkgError| {
        Box::new(EvolveAbort { error: e, last_good: Box::new(state_placeholder()), reports: vec![] })
    };
    if !(params.dt > 0.0) {
        return Err(invalid(DkgError::InvalidInput("dt must be positive".into())));
    }
    if params.t_end < state.t {
        return Err(invalid(DkgError::InvalidInput(format!(
            "t_end {} precedes state time {}",
            params.t_end, state.t
        ))));
    }
    if params.sample_every == 0 {
        return Err(invalid(DkgError::InvalidInput("sample_every must be >= 1".into())));
    }
    if !state.is_finite() {
        return Err(invalid(DkgError::InvalidInput(
            "initial state contains non-finite values".into(),
        )));
    }
    let span = params.t_end - state.t;
    let steps_f = span / params.dt;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-6 * steps_f.max(1.0) {
        return Err(invalid(DkgError::InvalidInput(format!(
            "horizon {span} is not an integer number of steps of {}",
            params.dt
        ))));
    }
    let mut reports = Vec::new();
    if steps == 0 {
        let report = report_for(&state, params.dt, 0.0);
        reports.push(report.clone());
        if let Err(e) = sink(&state, &report) {
            return Err(Box::new(EvolveAbort {
                error: e,
                last_good: Box::new(state.clone()),
                reports,
            }));
        }
        return Ok(EvolveOutput { state, reports });
    }

    let stepper = match Stepper::new(state.grid(), params.dt, params.dealias) {
        Ok(s) => s,
        Err(e) => return Err(invalid(e)),
    };
    let coupling_off = state.psi.c0.iter().chain(state.psi.c1.iter()).all(|z| {
        z.re == 0.0 && z.im == 0.0
    });

    let t0 = state.t;
    let mut psi = state.psi.clone();
    let mut v = state.v.clone();
    let mut aux_spec = state.aux.as_ref().map(|a| stepper.ingest_aux(a, &psi, &v));
    let mut last_good = state.clone();
    let clock = Instant::now();
    let mut last_wall = 0.0f64;

    for step in 1..=steps {
        if coupling_off {
            // Pure free flow: identical to composing the propagators.
            psi = match stepper.dirac.apply(&psi) {
                Ok(p) => p,
                Err(e) => return abort(e, last_good, reports),
            };
            v = match stepper.kg.apply(&v) {
                Ok(s) => s,
                Err(e) => return abort(e, last_good, reports),
            };
            if let Some(aux) = aux_spec.as_mut() {
                stepper.wave.apply_spectral_pair(&mut aux.p0, &mut aux.p0t);
                stepper.wave.apply_spectral_pair(&mut aux.p1, &mut aux.p1t);
            }
        } else {
            stepper.step_main(&mut psi, &mut v);
            if let Some(aux) = aux_spec.as_mut() {
                let (s0, s1) = stepper.source_spectral(&psi, &v);
                stepper.step_aux(aux, s0, s1);
            }
        }
        let t = t0 + step as f64 * params.dt;
        // Inverse transforms smear any non-finite value across the whole
        // field, so probing one entry is a reliable cheap check.
        if !psi.c0[0].re.is_finite() || !v.u[0].is_finite() {
            return abort(DkgError::NonFinite { t }, last_good, reports);
        }

        if step % params.sample_every == 0 || step == steps {
            let snapshot = SimState {
                t,
                psi: psi.clone(),
                v: v.clone(),
                aux: aux_spec.as_ref().map(|a| stepper.materialize_aux(a)),
            };
            if !snapshot.is_finite() {
                return abort(DkgError::NonFinite { t }, last_good, reports);
            }
            let wall = clock.elapsed().as_secs_f64() * 1e3;
            let report = report_for(&snapshot, params.dt, wall - last_wall);
            last_wall = wall;
            reports.push(report.clone());
            if let Err(e) = sink(&snapshot, &report) {
                return abort(e, last_good, reports);
            }
            last_good = snapshot;
        }
    }
    Ok(EvolveOutput { state: last_good, reports })
}

fn abort(
    error: DkgError,
    last_good: SimState,
    reports: Vec<StepReport>,
) -> Result<EvolveOutput, Box<EvolveAbort>> {
    Err(Box::new(EvolveAbort { error, last_good: Box::new(last_good), reports }))
}

fn report_for(state: &SimState, dt: f64, wall_ms: f64) -> StepReport {
    let v_l2 = crate::grid::reduce_norm_r(state.grid(), &state.v.u, None, crate::grid::NormKind::L2)
        .unwrap_or(f64::NAN);
    let kg_energy = {
        let (g1, g2) = crate::grid::spectral_gradient_r(state.grid(), &state.v.u);
        let idx: Vec<usize> = (0..state.v.u.len()).collect();
        crate::grid::tree_sum_by(&idx, |&p| {
            state.v.ut[p] * state.v.ut[p]
                + g1[p] * g1[p]
                + g2[p] * g2[p]
                + state.v.u[p] * state.v.u[p]
        }) * state.grid().cell_area()
    };
    StepReport { t: state.t, dt, psi_l2: state.psi.l2_norm(), v_l2, kg_energy, wall_ms }
}

fn state_placeholder() -> SimState {
    // Only used inside parameter-validation errors, never observed by sinks.
    let grid = SpectralGrid::new(16, 1.0).expect("static grid");
    SimState {
        t: 0.0,
        psi: SpinorField::zeros(&grid),
        v: ScalarState::zeros(&grid),
        aux: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NormKind;
    use crate::propagators::{dirac_free_flow, kg_free_flow};

    // Numerical support of a gaussian of width s reaches ~5.7 s, and the
    // quarter-box rule needs L >= 23 s; the resolved grid also keeps the
    // spectrum below the dealias cut (s/dx > 5).
    fn small_grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(64, 10.0).unwrap()
    }

    fn resolved_grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(256, 20.0).unwrap()
    }

    fn small_spec(eps: f64) -> InitialDataSpec {
        InitialDataSpec {
            amplitude: eps,
            kg_amplitude: eps,
            width: 0.4,
            kg_width: 0.4,
            ..InitialDataSpec::default()
        }
    }

    fn resolved_spec(eps: f64) -> InitialDataSpec {
        InitialDataSpec {
            amplitude: eps,
            kg_amplitude: eps,
            width: 0.85,
            kg_width: 0.85,
            ..InitialDataSpec::default()
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let grid = small_grid();
        let spec = InitialDataSpec { amplitude: 0.0, kg_amplitude: 0.0, ..small_spec(0.0) };
        let st = make_initial_data(&spec, &grid).unwrap();
        assert_eq!(st.psi.l2_norm(), 0.0);
        assert!(st.v.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_polarized_data_and_bilinear() {
        let grid = small_grid();
        let spec = small_spec(0.5);
        let st = make_initial_data(&spec, &grid).unwrap();
        let bil = st.psi.dirac_bilinear_field();
        let n = grid.n();
        let s2 = spec.width * spec.width;
        for iy in (0..n).step_by(7) {
            for ix in (0..n).step_by(7) {
                let p = grid.idx(ix, iy);
                let r2 = grid.radius(ix, iy).powi(2);
                // psi = eps e^{-r^2/s^2} (1,0): bilinear = eps^2 e^{-2r^2/s^2}.
                let want = 0.25 * (-2.0 * r2 / s2).exp();
                assert!((bil[p] - want).abs() < 1e-12);
            }
        }
        // Aux initialized as (0, i g0 psi0).
        let aux = st.aux.as_ref().unwrap();
        for p in (0..aux.p0.len()).step_by(11) {
            assert_eq!(aux.p0[p], C64::new(0.0, 0.0));
            assert!((aux.p0t[p] - C64::new(0.0, 1.0) * st.psi.c0[p]).norm() < 1e-15);
        }
    }

    #[test]
    fn ring_peaks_at_requested_radius() {
        let grid = resolved_grid();
        let spec = InitialDataSpec {
            family: DataFamily::Ring,
            ring_radius: 2.0,
            width: 0.5,
            ..small_spec(0.1)
        };
        let st = make_initial_data(&spec, &grid).unwrap();
        let n = grid.n();
        let mut best = (0.0f64, 0.0f64);
        for iy in 0..n {
            for ix in 0..n {
                let a = st.psi.at(grid.idx(ix, iy)).norm();
                if a > best.0 {
                    best = (a, grid.radius(ix, iy));
                }
            }
        }
        assert!((best.1 - 2.0).abs() <= grid.dx(), "peak at r = {}", best.1);
    }

    #[test]
    fn wide_data_is_rejected() {
        let grid = small_grid();
        let spec = InitialDataSpec { width: 1.0, ..small_spec(0.1) };
        // support radius ~ 5.7 > L/4 = 2.5.
        assert!(make_initial_data(&spec, &grid).is_err());
    }

    #[test]
    fn free_case_matches_propagator_composition() {
        let grid = small_grid();
        let spec = InitialDataSpec { amplitude: 0.0, kg_amplitude: 0.3, ..small_spec(0.0) };
        let st = make_initial_data(&spec, &grid).unwrap();
        let params = EvolveParams { dt: 0.05, t_end: 1.0, sample_every: 5, dealias: true };
        let out = evolve(st.clone(), &params, &mut |_, _| Ok(())).unwrap();

        let mut v_ref = st.v.clone();
        for _ in 0..20 {
            v_ref = kg_free_flow(&v_ref, 0.05).unwrap();
        }
        for p in 0..v_ref.u.len() {
            assert_eq!(out.state.v.u[p], v_ref.u[p], "free path must be bit-identical");
            assert_eq!(out.state.v.ut[p], v_ref.ut[p]);
        }
        assert_eq!(out.state.psi.l2_norm(), 0.0);
    }

    #[test]
    fn x1_profile_null_polarization_keeps_v_zero() {
        // (1,1)/sqrt(2) polarization on an x1-only profile is a sigma_x
        // eigenstate: the bilinear stays zero, so v never turns on.
        let grid = small_grid();
        let l = grid.half_width();
        let psi = SpinorField::from_fn(&grid, |x, _| {
            let a = 0.3 * (-(x * x)).exp() / 2.0f64.sqrt();
            Spinor::from_re(a, a)
        });
        let _ = l;
        let st = SimState { t: 0.0, psi, v: ScalarState::zeros(&grid), aux: None };
        let mut s = st;
        for _ in 0..10 {
            s = strang_step(&s, 0.01, true).unwrap();
        }
        let vmax = s.v.u.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let vtmax = s.v.ut.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(vmax < 1e-12, "v leaked to {vmax}");
        assert!(vtmax < 1e-12, "vt leaked to {vtmax}");
    }

    #[test]
    fn psi_l2_preserved_and_bilinear_real() {
        let grid = resolved_grid();
        let st = make_initial_data(&resolved_spec(0.3), &grid).unwrap();
        let n0 = st.psi.l2_norm();
        let mut s = st;
        for _ in 0..50 {
            s = strang_step(&s, 0.02, true).unwrap();
        }
        assert!((s.psi.l2_norm() - n0).abs() < 1e-9 * n0, "drift {}", (s.psi.l2_norm() - n0).abs());
    }

    #[test]
    fn step_then_reverse_step_returns() {
        let grid = resolved_grid();
        let st = make_initial_data(&resolved_spec(0.4), &grid).unwrap();
        let fwd = strang_step(&st, 0.02, true).unwrap();
        let back = strang_step(&fwd, -0.02, true).unwrap();
        let mut worst = 0.0f64;
        for p in 0..st.psi.c0.len() {
            worst = worst.max((back.psi.c0[p] - st.psi.c0[p]).norm());
            worst = worst.max((back.v.u[p] - st.v.u[p]).abs());
            worst = worst.max((back.v.ut[p] - st.v.ut[p]).abs());
        }
        assert!(worst < 1e-10, "reversal defect {worst}");
    }

    #[test]
    fn second_order_self_convergence() {
        let grid = resolved_grid();
        let st = make_initial_data(
            &InitialDataSpec { with_aux: false, ..resolved_spec(0.5) },
            &grid,
        )
        .unwrap();
        let run = |dt: f64| {
            let params = EvolveParams { dt, t_end: 1.0, sample_every: 100000, dealias: true };
            evolve(st.clone(), &params, &mut |_, _| Ok(())).unwrap().state
        };
        let a = run(0.02);
        let b = run(0.01);
        let c = run(0.005);
        let dist = |x: &SimState, y: &SimState| {
            let mut acc = 0.0;
            for p in 0..x.psi.c0.len() {
                acc += (x.psi.c0[p] - y.psi.c0[p]).norm_sqr();
                acc += (x.psi.c1[p] - y.psi.c1[p]).norm_sqr();
                acc += (x.v.u[p] - y.v.u[p]).powi(2);
            }
            acc.sqrt()
        };
        let e1 = dist(&a, &b);
        let e2 = dist(&b, &c);
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "order ratio {ratio}");
    }

    #[test]
    fn co_evolve_aux_requires_and_advances_the_pair() {
        let grid = resolved_grid();
        let spec = resolved_spec(0.1);
        let st = make_initial_data(&spec, &grid).unwrap();
        let stepped = co_evolve_aux(&st, 0.02, true).unwrap();
        let direct = strang_step(&st, 0.02, true).unwrap();
        let (a, b) = (stepped.aux.as_ref().unwrap(), direct.aux.as_ref().unwrap());
        for p in (0..a.p0.len()).step_by(17) {
            assert_eq!(a.p0t[p], b.p0t[p]);
        }
        let no_aux = SimState { aux: None, ..st };
        assert!(co_evolve_aux(&no_aux, 0.02, true).is_err());
    }

    #[test]
    fn evolve_validates_and_noops() {
        let grid = small_grid();
        let st = make_initial_data(&small_spec(0.1), &grid).unwrap();
        let params = EvolveParams { dt: 0.01, t_end: 0.0, sample_every: 1, dealias: true };
        let out = evolve(st.clone(), &params, &mut |_, _| Ok(())).unwrap();
        assert_eq!(out.state.t, 0.0);
        assert_eq!(out.reports.len(), 1);

        let bad = EvolveParams { dt: 0.3, t_end: 1.0, sample_every: 1, dealias: true };
        assert!(Stepper::new(&grid, bad.dt, true).is_err());
    }

    #[test]
    fn coupled_energy_stays_bounded() {
        let grid = small_grid();
        let st = make_initial_data(&small_spec(0.01), &grid).unwrap();
        let e1 = |s: &ScalarState| {
            let (g1, g2) = crate::grid::spectral_gradient_r(&s.grid, &s.u);
            let idx: Vec<usize> = (0..s.u.len()).collect();
            (crate::grid::tree_sum_by(&idx, |&p| {
                s.ut[p] * s.ut[p] + g1[p] * g1[p] + g2[p] * g2[p] + s.u[p] * s.u[p]
            }) * s.grid.cell_area())
            .sqrt()
        };
        let e0 = e1(&st.v);
        let params = EvolveParams { dt: 0.02, t_end: 4.0, sample_every: 50, dealias: true };
        let mut sup = 0.0f64;
        let out = evolve(st, &params, &mut |s, _| {
            sup = sup.max(e1(&s.v));
            Ok(())
        })
        .unwrap();
        let _ = out;
        assert!(sup <= 2.0 * e0 + 1e-2, "energy grew to {sup} from {e0}");
    }

    #[test]
    fn free_evolution_matches_direct_flow_after_horizon() {
        let grid = small_grid();
        let spec = InitialDataSpec { amplitude: 0.0, kg_amplitude: 0.2, ..small_spec(0.0) };
        let mut st = make_initial_data(&spec, &grid).unwrap();
        // Nonzero spinor but exactly zero amplitude: psi stays zero, and the
        // dirac flow on zero data is zero.
        st.psi = SpinorField::zeros(&grid);
        let params = EvolveParams { dt: 0.05, t_end: 2.0, sample_every: 10, dealias: true };
        let out = evolve(st.clone(), &params, &mut |_, _| Ok(())).unwrap();
        let direct = dirac_free_flow(&st.psi, 2.0).unwrap();
        assert_eq!(
            crate::grid::reduce_norm_spinor(&direct, None, NormKind::L2).unwrap(),
            crate::grid::reduce_norm_spinor(&out.state.psi, None, NormKind::L2).unwrap()
        );
    }

    #[test]
    fn nan_input_is_rejected_up_front() {
        let grid = small_grid();
        let mut st = make_initial_data(&small_spec(0.1), &grid).unwrap();
        st.v.u[5] = f64::NAN;
        let params = EvolveParams { dt: 0.01, t_end: 0.5, sample_every: 10, dealias: true };
        match evolve(st, &params, &mut |_, _| Ok(())) {
            Err(abort) => assert!(matches!(abort.error, DkgError::InvalidInput(_))),
            Ok(_) => panic!("expected rejection"),
        }
    }

    #[test]
    fn overflow_aborts_with_last_good_state() {
        // A finite but absurd amplitude overflows |psi|^2 in the first kick;
        // the abort must surface the pre-step snapshot.
        let grid = small_grid();
        let psi = SpinorField::from_fn(&grid, |x, y| {
            Spinor::from_re(1e200 * (-(x * x + y * y)).exp(), 0.0)
        });
        let st = SimState { t: 0.0, psi, v: ScalarState::zeros(&grid), aux: None };
        let params = EvolveParams { dt: 0.01, t_end: 0.5, sample_every: 10, dealias: true };
        match evolve(st, &params, &mut |_, _| Ok(())) {
            Err(abort) => {
                assert!(matches!(abort.error, DkgError::NonFinite { .. }));
                assert!(abort.last_good.is_finite());
            }
            Ok(_) => panic!("expected overflow abort"),
        }
    }
}
