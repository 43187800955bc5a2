//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them all). Heavy runs execute at the
//! preset sizes, so expect the full suite to take on the order of fifteen
//! minutes on a desktop.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dkg_core::analysis::{
    self, aux_constraint_residual, energy_snapshot, ghost_identity_residual, transform_residual,
    DecayFit, EnergyLedger, GhostPrimitive, GhostSample, ResidualKind, ScatterTrace,
};
use dkg_core::checks;
use dkg_core::evolver::{evolve, make_initial_data, EvolveParams, SimState};
use dkg_core::grid::{ScalarState, SpectralGrid, SpinorField};
use dkg_core::propagators::{dirac_free_flow, kg_free_flow};
use dkg_core::spinor::{Spinor, C64};
use dkg_lab::config::RunConfig;
use dkg_lab::runner;

fn verdict(criterion: &str, pass: bool, detail: &str, elapsed: Duration) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {criterion}: {detail} ({:.1}s)", elapsed.as_secs_f64());
    assert!(pass, "{criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// Criterion 1: pointwise identity suite, 1000 randomized trials, < 1 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_identity_suite() {
    let clock = Instant::now();
    let mut failures = 0usize;
    let mut names = Vec::new();
    for report in checks::spinor_identity_suite(1000, 42) {
        failures += report.failures;
        names.push(format!("{} {:.1e}", report.name, report.worst));
    }
    let elapsed = clock.elapsed();
    let pass = failures == 0 && elapsed < Duration::from_secs(1);
    verdict(
        "criterion 1 (identity suite)",
        pass,
        &format!("failures {failures}, checks: {}", names.join(", ")),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: propagator unitarity/energy to 1e-10, group law to 1e-11,
// 256^2 grid, t <= 50, < 30 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_propagator_suite() {
    let clock = Instant::now();
    let grid = SpectralGrid::new(256, 60.0).unwrap();
    let psi = SpinorField::from_fn(&grid, |x, y| {
        let e = (-(x * x + y * y) / 4.0).exp();
        Spinor::new(C64::new(e, 0.2 * e), C64::new(-0.3 * e, 0.1 * e))
    });
    let v = ScalarState::from_fn(
        &grid,
        |x, y| (-(x * x + y * y) / 4.0).exp(),
        |x, y| 0.3 * (-(x * x + y * y) / 3.0).exp(),
    );

    let n0 = psi.l2_norm();
    let mut worst_unitarity = 0.0f64;
    for t in [1.0, 12.5, 50.0, -50.0] {
        let moved = dirac_free_flow(&psi, t).unwrap();
        worst_unitarity = worst_unitarity.max((moved.l2_norm() - n0).abs() / n0);
    }

    let e1 = analysis::kg_energy(&v);
    let mut worst_energy = 0.0f64;
    for t in [1.0, 12.5, 50.0] {
        let moved = kg_free_flow(&v, t).unwrap();
        worst_energy = worst_energy.max((analysis::kg_energy(&moved) - e1).abs() / e1);
    }

    // Group law on both flows.
    let a = dirac_free_flow(&dirac_free_flow(&psi, 19.0).unwrap(), 31.0).unwrap();
    let b = dirac_free_flow(&psi, 50.0).unwrap();
    let mut worst_group = 0.0f64;
    for p in 0..a.c0.len() {
        worst_group = worst_group
            .max((a.c0[p] - b.c0[p]).norm())
            .max((a.c1[p] - b.c1[p]).norm());
    }
    let ka = kg_free_flow(&kg_free_flow(&v, 19.0).unwrap(), 31.0).unwrap();
    let kb = kg_free_flow(&v, 50.0).unwrap();
    for p in 0..ka.u.len() {
        worst_group = worst_group.max((ka.u[p] - kb.u[p]).abs()).max((ka.ut[p] - kb.ut[p]).abs());
    }

    let elapsed = clock.elapsed();
    let pass = worst_unitarity <= 1e-10
        && worst_energy <= 1e-10
        && worst_group <= 1e-11
        && elapsed < Duration::from_secs(30);
    verdict(
        "criterion 2 (propagator suite)",
        pass,
        &format!(
            "unitarity drift {worst_unitarity:.2e}, E1 drift {worst_energy:.2e}, group law {worst_group:.2e}"
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: free decay at 1024^2, L = 120, window [20, 100]:
// Dirac slope -0.5 +- 0.05, Klein-Gordon slope -1.0 +- 0.1, <= 10 min.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_free_decay() {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset("free-decay").unwrap();
    cfg.output.dir = dir.path().join("fd").display().to_string();
    let summary = runner::run_free_decay(&cfg).unwrap();
    let fits: HashMap<String, DecayFit> = summary.fits.into_iter().collect();
    let psi_slope = fits["psi_linf"].slope;
    let v_slope = fits["v_linf"].slope;
    let elapsed = clock.elapsed();
    let pass = (psi_slope + 0.5).abs() <= 0.05
        && (v_slope + 1.0).abs() <= 0.1
        && elapsed <= Duration::from_secs(600);
    verdict(
        "criterion 3 (free decay)",
        pass,
        &format!("dirac sup slope {psi_slope:.4}, kg sup slope {v_slope:.4}"),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// Criterion 4 and 8 share the eps = 0.01, 512^2, L = 80, T = 60 run.
// ---------------------------------------------------------------------------

struct CoupledArtifacts {
    fits: HashMap<String, DecayFit>,
    psi_series: Vec<(f64, f64)>,
    weighted_series: Vec<(f64, f64)>,
    window: (f64, f64),
    scatter: ScatterTrace,
    wall: Duration,
}

fn coupled_run() -> &'static Result<CoupledArtifacts, String> {
    static RUN: OnceLock<Result<CoupledArtifacts, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let clock = Instant::now();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::preset("dkg-small").map_err(|e| e.to_string())?;
        cfg.output.dir = dir.path().join("c4").display().to_string();
        let summary = runner::run_coupled(&cfg, None).map_err(|e| e.to_string())?;
        let fits: HashMap<String, DecayFit> = summary.fits.into_iter().collect();
        let psi_fit = fits.get("psi_linf").ok_or("missing psi fit")?;
        let weighted_fit = fits.get("v_weighted_linf").ok_or("missing weighted fit")?;
        let window = psi_fit.window;
        Ok(CoupledArtifacts {
            psi_series: psi_fit.samples.clone(),
            weighted_series: weighted_fit.samples.clone(),
            window,
            fits,
            scatter: summary.scatter.ok_or("missing scattering trace")?,
            wall: clock.elapsed(),
        })
    })
}

#[test]
fn criterion_4_coupled_decay() {
    let artifacts = match coupled_run() {
        Ok(a) => a,
        Err(e) => {
            verdict("criterion 4 (coupled decay)", false, e, Duration::ZERO);
            return;
        }
    };
    let psi_slope = artifacts.fits["psi_linf"].slope;
    let weighted_slope = artifacts.fits["v_weighted_linf"].slope;
    // Boundedness of t^(1/2) |psi|_inf and of <t+r> |v|_inf over the window.
    let bound_ratio = |series: &[(f64, f64)], weight: fn(f64) -> f64| {
        let vals: Vec<f64> = series.iter().map(|&(t, v)| weight(t) * v).collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    };
    let psi_bound = bound_ratio(&artifacts.psi_series, |t| t.sqrt());
    let weighted_bound = bound_ratio(&artifacts.weighted_series, |_| 1.0);
    let pass = (psi_slope + 0.5).abs() <= 0.1
        && weighted_slope.abs() <= 0.15
        && psi_bound <= 2.0
        && weighted_bound <= 2.0
        && artifacts.wall <= Duration::from_secs(900);
    verdict(
        "criterion 4 (coupled decay)",
        pass,
        &format!(
            "sqrt(t)-weighted dirac sup slope {psi_slope:.4} (spread {psi_bound:.3}), \
             <t+r> kg sup slope {weighted_slope:.4} (spread {weighted_bound:.3}), window [{:.1}, {:.1}]",
            artifacts.window.0, artifacts.window.1
        ),
        artifacts.wall,
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: transformation residuals shrink 4 +- 1 x per dt halving,
// three refinements, at the criterion-4 configuration, <= 30 min total.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_transformation_residuals() {
    let clock = Instant::now();
    let grid = SpectralGrid::new(512, 80.0).unwrap();
    let cfg = RunConfig::preset("dkg-small").unwrap();
    let initial = make_initial_data(&cfg.data_spec().unwrap(), &grid).unwrap();

    let kinds = [
        ("psi~", ResidualKind::PsiTilde),
        ("Psi~", ResidualKind::BigPsiTilde),
        ("v~", ResidualKind::VTilde),
        ("bracket", ResidualKind::MinusStructure),
    ];
    let sample_every = 5usize;
    let t_eval = 5.0f64;
    let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    for k in 0..4 {
        let dt = 0.04 / (1 << k) as f64;
        let h = dt * sample_every as f64;
        let params = EvolveParams { dt, t_end: t_eval + h, sample_every, dealias: true };
        let mut kept: Vec<SimState> = Vec::new();
        evolve(initial.clone(), &params, &mut |s, _| {
            kept.push(s.clone());
            if kept.len() > 3 {
                kept.remove(0);
            }
            Ok(())
        })
        .map_err(|a| a.error.to_string())
        .unwrap();
        for (slot, (_, kind)) in residuals.iter_mut().zip(kinds.iter()) {
            slot.push(transform_residual(&kept, *kind).unwrap());
        }
    }
    let mut pass = true;
    let mut detail = String::new();
    for ((name, _), res) in kinds.iter().zip(residuals.iter()) {
        let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
        for r in &ratios {
            if !(3.0..=5.0).contains(r) {
                pass = false;
            }
        }
        detail.push_str(&format!(
            "{name} [{}] ",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ));
    }
    let elapsed = clock.elapsed();
    pass = pass && elapsed <= Duration::from_secs(1800);
    verdict("criterion 5 (residual refinement)", pass, detail.trim(), elapsed);
}

// ---------------------------------------------------------------------------
// Criterion 6: auxiliary Dirac identity <= 1e-5 at T = 20, dt = 0.005.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_auxiliary_identity() {
    let clock = Instant::now();
    let grid = SpectralGrid::new(256, 60.0).unwrap();
    let cfg = RunConfig::preset("dkg-small").unwrap();
    let initial = make_initial_data(&cfg.data_spec().unwrap(), &grid).unwrap();
    let params = EvolveParams { dt: 0.005, t_end: 20.0, sample_every: 4000, dealias: true };
    let out = evolve(initial, &params, &mut |_, _| Ok(()))
        .map_err(|a| a.error.to_string())
        .unwrap();
    let residual = aux_constraint_residual(&out.state).unwrap();
    let elapsed = clock.elapsed();
    let pass = residual <= 1e-5;
    verdict(
        "criterion 6 (auxiliary identity)",
        pass,
        &format!("relative residual {residual:.3e} at T = 20, dt = 0.005"),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: ghost balance law vanishes at second order on the free flow;
// the measured ghost energy stays below exp(P(inf)) times the initial mass.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_ghost_identity() {
    let clock = Instant::now();
    let grid = SpectralGrid::new(256, 40.0).unwrap();
    let psi0 = SpinorField::from_fn(&grid, |x, y| {
        let e = (-(x * x + y * y) / 2.25).exp();
        Spinor::new(C64::new(e, 0.0), C64::new(0.3 * e, -0.2 * e))
    });
    let residual_at = |h: f64| {
        let fields: Vec<SpinorField> = (0..5)
            .map(|j| dirac_free_flow(&psi0, 1.0 + j as f64 * h).unwrap())
            .collect();
        let segment: Vec<GhostSample> = fields
            .iter()
            .enumerate()
            .map(|(j, phi)| GhostSample { t: 1.0 + j as f64 * h, phi, source: None })
            .collect();
        ghost_identity_residual(&segment).unwrap()
    };
    let r1 = residual_at(0.1);
    let r2 = residual_at(0.05);
    let ratio = r1 / r2;

    let mass0 = analysis::dirac_mass(&psi0);
    let cap = GhostPrimitive::get().p_infinity().exp();
    let mut ledger = EnergyLedger::new(0.05);
    let mut worst_ratio = 0.0f64;
    for j in 0..=30 {
        let t = j as f64 * 0.5;
        let state = SimState {
            t,
            psi: dirac_free_flow(&psi0, t).unwrap(),
            v: ScalarState::zeros(&grid),
            aux: None,
        };
        energy_snapshot(&state, &mut ledger).unwrap();
        worst_ratio = worst_ratio.max(ledger.dirac_ghost_energy() / mass0);
    }
    let elapsed = clock.elapsed();
    let pass = (3.0..=5.0).contains(&ratio) && worst_ratio <= cap;
    verdict(
        "criterion 7 (ghost identity)",
        pass,
        &format!(
            "residual refinement ratio {ratio:.2}, measured E^D / mass {worst_ratio:.3} <= e^P(inf) = {cap:.3e}"
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: scattering Cauchy differences from the criterion-4 run are
// monotone decreasing for t >= 10 and the last is <= 10% of the first.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_scattering_trace() {
    let artifacts = match coupled_run() {
        Ok(a) => a,
        Err(e) => {
            verdict("criterion 8 (scattering trace)", false, e, Duration::ZERO);
            return;
        }
    };
    let clock = Instant::now();
    let trace = &artifacts.scatter;
    let mut pass = true;
    let mut check = |diffs: &[f64], name: &str, detail: &mut String| {
        let mut prev: Option<f64> = None;
        for (j, d) in diffs.iter().enumerate() {
            if trace.times[j] >= 10.0 {
                if let Some(p) = prev {
                    if *d > p {
                        pass = false;
                    }
                }
                prev = Some(*d);
            }
        }
        let first = diffs[0];
        let last = *diffs.last().unwrap();
        if last > 0.1 * first {
            pass = false;
        }
        detail.push_str(&format!("{name} first {first:.2e} last {last:.2e}; "));
    };
    let mut detail = String::new();
    check(&trace.dirac_l2, "dirac", &mut detail);
    check(&trace.kg_energy, "kg", &mut detail);
    verdict("criterion 8 (scattering trace)", pass, detail.trim(), clock.elapsed());
}

// ---------------------------------------------------------------------------
// Criterion 9: determinism, snapshot round trip, resume equivalence.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_harness() {
    let clock = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset("dkg-small").unwrap();
    cfg.grid.n = 128;
    cfg.grid.half_width = 20.0;
    cfg.data.width = 0.85;
    cfg.data.kg_width = 0.85;
    cfg.data.amplitude = 0.05;
    cfg.data.kg_amplitude = 0.05;
    cfg.integrator.t_end = 2.0;
    cfg.integrator.sample_every = 25;
    cfg.diagnostics.scatter_every = 0.5;
    cfg.output.dir = dir.path().join("det").display().to_string();

    // Determinism: identical config twice, byte-identical stream.
    runner::run_coupled(&cfg, None).unwrap();
    let first = std::fs::read(dir.path().join("det/diagnostics.ndjson")).unwrap();
    runner::run_coupled(&cfg, None).unwrap();
    let second = std::fs::read(dir.path().join("det/diagnostics.ndjson")).unwrap();
    let deterministic = first == second && !first.is_empty();

    // Snapshot round trip is bit-exact.
    let state = dkg_lab::snapshot::read_snapshot(&dir.path().join("det/final.dkg2")).unwrap();
    let copy_path = dir.path().join("copy.dkg2");
    dkg_lab::snapshot::write_snapshot(&copy_path, &state).unwrap();
    let back = dkg_lab::snapshot::read_snapshot(&copy_path).unwrap();
    let mut bit_exact = back.t.to_bits() == state.t.to_bits();
    for p in 0..state.psi.c0.len() {
        bit_exact &= back.psi.c0[p].re.to_bits() == state.psi.c0[p].re.to_bits();
        bit_exact &= back.v.u[p].to_bits() == state.v.u[p].to_bits();
    }

    // Resume: 0 -> 2 equals 0 -> 1 plus resume 1 -> 2 within 1e-10.
    let mut cfg_half = cfg.clone();
    cfg_half.integrator.t_end = 1.0;
    cfg_half.output.dir = dir.path().join("half").display().to_string();
    runner::run_coupled(&cfg_half, None).unwrap();
    let mut cfg_resume = cfg.clone();
    cfg_resume.output.dir = dir.path().join("resumed").display().to_string();
    runner::run_coupled(&cfg_resume, Some(&dir.path().join("half/final.dkg2"))).unwrap();
    let full = dkg_lab::snapshot::read_snapshot(&dir.path().join("det/final.dkg2")).unwrap();
    let resumed =
        dkg_lab::snapshot::read_snapshot(&dir.path().join("resumed/final.dkg2")).unwrap();
    let mut dist2 = 0.0f64;
    for p in 0..full.psi.c0.len() {
        dist2 += (full.psi.c0[p] - resumed.psi.c0[p]).norm_sqr();
        dist2 += (full.v.u[p] - resumed.v.u[p]).powi(2);
        dist2 += (full.v.ut[p] - resumed.v.ut[p]).powi(2);
    }
    let resume_dist = (dist2 * full.grid().cell_area()).sqrt();

    let pass = deterministic && bit_exact && resume_dist <= 1e-10;
    verdict(
        "criterion 9 (harness)",
        pass,
        &format!(
            "determinism {deterministic}, snapshot bit-exact {bit_exact}, resume distance {resume_dist:.2e}"
        ),
        clock.elapsed(),
    );
}
