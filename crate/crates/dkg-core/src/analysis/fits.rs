//! Decay-rate fits and scattering-profile traces.

use crate::error::DkgError;
use crate::evolver::SimState;
use crate::grid::{tree_sum_by, ScalarState, SpinorField};
use crate::propagators::{dirac_free_flow, kg_free_flow};

/// Least-squares fit of `log value` against `log t` over a window.
#[derive(Clone, Debug)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// Fits the decay exponent of a positive series on `window`; at least eight
/// samples must fall inside.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, DkgError> {
    if !(window.0 > 0.0) || !(window.1 > window.0) {
        return Err(DkgError::InvalidInput(format!(
            "bad fit window [{}, {}]",
            window.0, window.1
        )));
    }
    let inside: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if inside.len() < 8 {
        return Err(DkgError::TooFewSamples { need: 8, got: inside.len() });
    }
    if inside.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(DkgError::InvalidInput("decay fit needs positive values".into()));
    }
    let pts: Vec<(f64, f64)> = inside.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(DkgError::Numerics("degenerate fit window".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    Ok(DecayFit {
        window,
        samples: inside,
        slope,
        intercept,
        residual_rms: (ss / n).sqrt(),
    })
}

/// Back-propagated free profiles and their Cauchy differences.
///
/// `f(t) = exp(+i t D) psi(t)` for the spinor and `S(-t) (v, v_t)` for the
/// scalar pair; convergence of these sequences as `t` grows is what linear
/// scattering means, so the interesting output is the decay of consecutive
/// differences.
#[derive(Clone, Debug)]
pub struct ScatterTrace {
    pub times: Vec<f64>,
    /// `|| f(t_{j+1}) - f(t_j) ||_{L^2}`.
    pub dirac_l2: Vec<f64>,
    /// Same differences in H^1.
    pub dirac_h1: Vec<f64>,
    /// Pair differences in the energy norm `sqrt(|u|_{H^1}^2 + |u_t|_{L^2}^2)`.
    pub kg_energy: Vec<f64>,
}

fn spinor_l2_diff(a: &SpinorField, b: &SpinorField) -> f64 {
    let idx: Vec<usize> = (0..a.c0.len()).collect();
    (tree_sum_by(&idx, |&p| {
        (a.c0[p] - b.c0[p]).norm_sqr() + (a.c1[p] - b.c1[p]).norm_sqr()
    }) * a.grid.cell_area())
    .sqrt()
}

fn spinor_h1_diff(a: &SpinorField, b: &SpinorField) -> f64 {
    let grid = &a.grid;
    let d0: Vec<crate::grid::C64> = (0..a.c0.len()).map(|p| a.c0[p] - b.c0[p]).collect();
    let d1: Vec<crate::grid::C64> = (0..a.c1.len()).map(|p| a.c1[p] - b.c1[p]).collect();
    let n0 = super::energies::h1_norm_c(grid, &d0);
    let n1 = super::energies::h1_norm_c(grid, &d1);
    (n0 * n0 + n1 * n1).sqrt()
}

fn pair_energy_diff(a: &ScalarState, b: &ScalarState) -> f64 {
    let grid = &a.grid;
    let du: Vec<f64> = (0..a.u.len()).map(|p| a.u[p] - b.u[p]).collect();
    let dut: Vec<f64> = (0..a.ut.len()).map(|p| a.ut[p] - b.ut[p]).collect();
    let (g1, g2) = crate::grid::spectral_gradient_r(grid, &du);
    let idx: Vec<usize> = (0..du.len()).collect();
    (tree_sum_by(&idx, |&p| {
        du[p] * du[p] + g1[p] * g1[p] + g2[p] * g2[p] + dut[p] * dut[p]
    }) * grid.cell_area())
    .sqrt()
}

/// Computes the scattering trace over at least three snapshots at strictly
/// increasing times.
pub fn scattering_trace(snapshots: &[SimState]) -> Result<ScatterTrace, DkgError> {
    if snapshots.len() < 3 {
        return Err(DkgError::TooFewSamples { need: 3, got: snapshots.len() });
    }
    for j in 1..snapshots.len() {
        if snapshots[j].t <= snapshots[j - 1].t {
            return Err(DkgError::InvalidInput("snapshot times must increase".into()));
        }
    }
    let mut profiles_psi = Vec::with_capacity(snapshots.len());
    let mut profiles_v = Vec::with_capacity(snapshots.len());
    let mut times = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        profiles_psi.push(dirac_free_flow(&s.psi, -s.t)?);
        profiles_v.push(kg_free_flow(&s.v, -s.t)?);
        times.push(s.t);
    }
    let mut dirac_l2 = Vec::new();
    let mut dirac_h1 = Vec::new();
    let mut kg_energy = Vec::new();
    for j in 1..profiles_psi.len() {
        dirac_l2.push(spinor_l2_diff(&profiles_psi[j], &profiles_psi[j - 1]));
        dirac_h1.push(spinor_h1_diff(&profiles_psi[j], &profiles_psi[j - 1]));
        kg_energy.push(pair_energy_diff(&profiles_v[j], &profiles_v[j - 1]));
    }
    Ok(ScatterTrace { times, dirac_l2, dirac_h1, kg_energy })
}

/// Incremental form of `scattering_trace`: push snapshots as they stream by
/// and keep only the previous back-propagated profile in memory.
#[derive(Default)]
pub struct ScatterAccumulator {
    prev: Option<(f64, SpinorField, ScalarState)>,
    times: Vec<f64>,
    dirac_l2: Vec<f64>,
    dirac_h1: Vec<f64>,
    kg_energy: Vec<f64>,
}

impl ScatterAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, state: &SimState) -> Result<(), DkgError> {
        if let Some((t_prev, _, _)) = &self.prev {
            if state.t <= *t_prev {
                return Err(DkgError::InvalidInput("snapshot times must increase".into()));
            }
        }
        let f_psi = dirac_free_flow(&state.psi, -state.t)?;
        let f_v = kg_free_flow(&state.v, -state.t)?;
        if let Some((_, p_psi, p_v)) = &self.prev {
            self.dirac_l2.push(spinor_l2_diff(&f_psi, p_psi));
            self.dirac_h1.push(spinor_h1_diff(&f_psi, p_psi));
            self.kg_energy.push(pair_energy_diff(&f_v, p_v));
        }
        self.times.push(state.t);
        self.prev = Some((state.t, f_psi, f_v));
        Ok(())
    }

    pub fn finish(self) -> Result<ScatterTrace, DkgError> {
        if self.times.len() < 3 {
            return Err(DkgError::TooFewSamples { need: 3, got: self.times.len() });
        }
        Ok(ScatterTrace {
            times: self.times,
            dirac_l2: self.dirac_l2,
            dirac_h1: self.dirac_h1,
            kg_energy: self.kg_energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::spinor::Spinor;
    use num_complex::Complex64 as C64;

    #[test]
    fn exact_power_laws() {
        let series: Vec<(f64, f64)> = (1..=40).map(|j| {
            let t = j as f64;
            (t, t.powf(-0.5))
        }).collect();
        let fit = decay_fit(&series, (5.0, 40.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);

        let noisy: Vec<(f64, f64)> = (1..=60).map(|j| {
            let t = j as f64;
            (t, 3.0 * t.powf(-1.0) * (1.0 + 0.01 * t.sin()))
        }).collect();
        let fit = decay_fit(&noisy, (10.0, 60.0)).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.01, "slope {}", fit.slope);

        let flat: Vec<(f64, f64)> = (1..=20).map(|j| (j as f64, 2.0)).collect();
        let fit = decay_fit(&flat, (1.0, 20.0)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rejections() {
        let tiny: Vec<(f64, f64)> = (1..=5).map(|j| (j as f64, 1.0)).collect();
        assert!(decay_fit(&tiny, (1.0, 5.0)).is_err());
        let negative: Vec<(f64, f64)> = (1..=10).map(|j| (j as f64, -1.0)).collect();
        assert!(decay_fit(&negative, (1.0, 10.0)).is_err());
    }

    #[test]
    fn free_run_profiles_are_constant() {
        let grid = SpectralGrid::new(64, 8.0).unwrap();
        let psi0 = SpinorField::from_fn(&grid, |x, y| {
            let e = (-(x * x + y * y)).exp();
            Spinor::new(C64::new(e, 0.0), C64::new(0.0, 0.3 * e))
        });
        let v0 = ScalarState::from_fn(&grid, |x, y| (-(x * x + y * y)).exp(), |_, _| 0.0);
        let snaps: Vec<SimState> = (0..4)
            .map(|j| {
                let t = 1.0 + j as f64 * 2.0;
                SimState {
                    t,
                    psi: dirac_free_flow(&psi0, t).unwrap(),
                    v: kg_free_flow(&v0, t).unwrap(),
                    aux: None,
                }
            })
            .collect();
        let trace = scattering_trace(&snaps).unwrap();
        for d in trace.dirac_l2.iter().chain(trace.kg_energy.iter()) {
            assert!(*d <= 1e-11, "free profile drifted by {d}");
        }
    }

    #[test]
    fn accumulator_matches_batch_trace() {
        let grid = SpectralGrid::new(64, 8.0).unwrap();
        let psi0 = SpinorField::from_fn(&grid, |x, y| {
            let e = (-(x * x + y * y)).exp();
            Spinor::new(C64::new(e, 0.2 * e), C64::new(-0.4 * e, 0.0))
        });
        let v0 = ScalarState::from_fn(&grid, |x, y| (-(x * x + y * y) / 2.0).exp(), |_, _| 0.0);
        let snaps: Vec<SimState> = (0..4)
            .map(|j| {
                let t = 0.5 + j as f64;
                SimState {
                    t,
                    // Slightly perturbed free evolution so differences are
                    // nonzero.
                    psi: dirac_free_flow(&psi0, t * (1.0 + 0.01 * j as f64)).unwrap(),
                    v: kg_free_flow(&v0, t).unwrap(),
                    aux: None,
                }
            })
            .collect();
        let batch = scattering_trace(&snaps).unwrap();
        let mut acc = ScatterAccumulator::new();
        for s in &snaps {
            acc.push(s).unwrap();
        }
        let inc = acc.finish().unwrap();
        for j in 0..batch.dirac_l2.len() {
            assert!((batch.dirac_l2[j] - inc.dirac_l2[j]).abs() < 1e-13);
            assert!((batch.kg_energy[j] - inc.kg_energy[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn trace_needs_three_increasing_snapshots() {
        let grid = SpectralGrid::new(32, 6.0).unwrap();
        let mk = |t: f64| SimState {
            t,
            psi: SpinorField::zeros(&grid),
            v: ScalarState::zeros(&grid),
            aux: None,
        };
        assert!(scattering_trace(&[mk(0.0), mk(1.0)]).is_err());
        assert!(scattering_trace(&[mk(0.0), mk(1.0), mk(0.5)]).is_err());
        // Identical zero snapshots at increasing times: all differences zero.
        let tr = scattering_trace(&[mk(1.0), mk(2.0), mk(3.0)]).unwrap();
        assert!(tr.dirac_l2.iter().all(|&d| d == 0.0));
    }
}
