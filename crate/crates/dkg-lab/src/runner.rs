//! Experiment drivers behind the CLI verbs.

use std::path::{Path, PathBuf};

use dkg_core::analysis::{
    self, aux_constraint_residual, decay_fit, energy_snapshot, transform_residual, DecayFit,
    EnergyLedger, ResidualKind, ScatterTrace,
};
use dkg_core::checks;
use dkg_core::evolver::{
    evolve, make_initial_data, support_radius, EvolveParams, SimState,
};
use dkg_core::grid::SpectralGrid;
use dkg_core::propagators::{dirac_free_flow, kg_free_flow};

use crate::config::RunConfig;
use crate::ndjson::{
    write_csv, DecayFitRecord, FailureRecord, HeaderRecord, NdjsonWriter, SampleRecord,
    ScatterRecord,
};
use crate::snapshot::{read_snapshot, write_snapshot};
use crate::LabError;

/// What a run produced, for callers that want to assert on it.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub fits: Vec<(String, DecayFit)>,
    pub scatter: Option<ScatterTrace>,
    pub final_t: f64,
    pub ndjson_path: Option<PathBuf>,
    pub final_snapshot: Option<PathBuf>,
    pub identity_failures: usize,
    pub self_convergence_ratios: Vec<f64>,
    pub residual_ratios: Vec<(String, Vec<f64>)>,
}

fn ensure_dir(dir: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))
}

fn wrap_time(cfg: &RunConfig, data: &SimState) -> (f64, f64) {
    let r_support = support_radius(data);
    (r_support, cfg.grid.half_width - r_support)
}

/// Decay-fit window: the configured one, capped so no fit ever uses samples
/// past 0.9 of the wrap time where periodic images pollute the rates.
fn fit_window(cfg: &RunConfig, t_wrap: f64) -> (f64, f64) {
    let (t0, t1) = cfg
        .diagnostics
        .decay_window
        .map(|w| (w[0], w[1]))
        .unwrap_or((t_wrap / 4.0, 0.9 * t_wrap));
    (t0, t1.min(0.9 * t_wrap))
}

/// Collected per-sample decay series.
struct Series {
    psi_linf: Vec<(f64, f64)>,
    v_linf: Vec<(f64, f64)>,
    v_weighted: Vec<(f64, f64)>,
    minus_linf: Vec<(f64, f64)>,
}

impl Series {
    fn new() -> Series {
        Series {
            psi_linf: Vec::new(),
            v_linf: Vec::new(),
            v_weighted: Vec::new(),
            minus_linf: Vec::new(),
        }
    }

    fn named(&self) -> [(&'static str, &Vec<(f64, f64)>); 4] {
        [
            ("psi_linf", &self.psi_linf),
            ("v_linf", &self.v_linf),
            ("v_weighted_linf", &self.v_weighted),
            ("minus_linf", &self.minus_linf),
        ]
    }
}

fn sample_record(
    cfg_hash: &str,
    state: &SimState,
    ledger: Option<&EnergyLedger>,
    with_transforms: bool,
    series: &mut Series,
) -> SampleRecord {
    let mut rec = SampleRecord::new(cfg_hash.to_string(), state.t);
    let psi_l2 = state.psi.l2_norm();
    let psi_linf = state.psi.linf_norm();
    let minus = analysis::minus_bracket_field(&state.psi);
    let minus_linf = minus.linf_norm();
    let v_l2 =
        dkg_core::grid::reduce_norm_r(state.grid(), &state.v.u, None, dkg_core::grid::NormKind::L2)
            .unwrap_or(f64::NAN);
    let v_linf = state.v.u.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let v_weighted = analysis::weighted_sup_scalar(&state.v, state.t);
    rec.put(|r| &mut r.psi_l2, "psi_l2", psi_l2);
    rec.put(|r| &mut r.psi_linf, "psi_linf", psi_linf);
    rec.put(|r| &mut r.minus_linf, "minus_linf", minus_linf);
    rec.put(|r| &mut r.v_l2, "v_l2", v_l2);
    rec.put(|r| &mut r.v_linf, "v_linf", v_linf);
    rec.put(|r| &mut r.v_weighted_linf, "v_weighted_linf", v_weighted);
    if let Some(ledger) = ledger {
        rec.put(|r| &mut r.ed_inst, "ed_inst", ledger.ed_inst);
        rec.put(|r| &mut r.ed_ghost, "ed_ghost", ledger.ed_ghost_acc);
        rec.put(|r| &mut r.ed_ghost_mod, "ed_ghost_mod", ledger.ed_ghost_mod_acc);
        rec.put(|r| &mut r.e1, "e1", ledger.e1);
        rec.put(|r| &mut r.g1_ghost, "g1_ghost", ledger.g1_ghost_acc);
        rec.put(|r| &mut r.g1_ghost_mod, "g1_ghost_mod", ledger.g1_ghost_mod_acc);
        rec.put(|r| &mut r.e0, "e0", ledger.e0);
        rec.put(|r| &mut r.f_conformal, "f_conformal", ledger.f_conformal);
        rec.put(|r| &mut r.ext_psi, "ext_psi", ledger.ext_psi);
        rec.put(|r| &mut r.ext_v, "ext_v", ledger.ext_v);
    }
    if with_transforms && state.aux.is_some() {
        if let Ok(res) = aux_constraint_residual(state) {
            rec.put(|r| &mut r.aux_residual, "aux_residual", res);
        }
        if let Ok(res) =
            transform_residual(std::slice::from_ref(state), ResidualKind::MinusStructure)
        {
            rec.put(|r| &mut r.minus_residual, "minus_residual", res);
        }
    }
    series.psi_linf.push((state.t, psi_linf));
    series.v_linf.push((state.t, v_linf));
    series.v_weighted.push((state.t, v_weighted));
    series.minus_linf.push((state.t, minus_linf));
    rec
}

fn emit_fits(
    cfg_hash: &str,
    writer: &mut NdjsonWriter,
    series: &Series,
    window: (f64, f64),
    out_dir: &Path,
    csv: bool,
    summary: &mut RunSummary,
) -> Result<(), LabError> {
    for (name, data) in series.named() {
        if csv {
            write_csv(&out_dir.join(format!("decay_{name}.csv")), data)?;
        }
        match decay_fit(data, window) {
            Ok(fit) => {
                writer.write(&DecayFitRecord {
                    kind: "decay_fit",
                    cfg: cfg_hash.to_string(),
                    series: name.to_string(),
                    window: [fit.window.0, fit.window.1],
                    slope: fit.slope,
                    intercept: fit.intercept,
                    residual_rms: fit.residual_rms,
                    n_samples: fit.samples.len(),
                })?;
                summary.fits.push((name.to_string(), fit));
            }
            Err(_) => {
                // Not enough usable samples in the window; the series CSV is
                // still there for inspection.
            }
        }
    }
    Ok(())
}

/// The coupled (or resumed) run: full ledger, decay series, scattering trace,
/// snapshots, deterministic NDJSON.
pub fn run_coupled(cfg: &RunConfig, resume_from: Option<&Path>) -> Result<RunSummary, LabError> {
    let out_dir = PathBuf::from(&cfg.output.dir);
    ensure_dir(&out_dir)?;
    let grid = SpectralGrid::new(cfg.grid.n, cfg.grid.half_width)
        .map_err(|e| LabError::config("grid", e.to_string()))?;

    let initial = match resume_from {
        Some(path) => {
            let state = read_snapshot(path)?;
            if state.grid().n() != cfg.grid.n
                || (state.grid().half_width() - cfg.grid.half_width).abs() > 1e-12
            {
                return Err(LabError::config(
                    "grid",
                    format!(
                        "snapshot grid {}x{} (L = {}) does not match config",
                        state.grid().n(),
                        state.grid().n(),
                        state.grid().half_width()
                    ),
                ));
            }
            state
        }
        None => make_initial_data(&cfg.data_spec()?, &grid)
            .map_err(|e| LabError::config("data", e.to_string()))?,
    };

    let cfg_hash = cfg.short_hash();
    let mut writer = NdjsonWriter::create(&out_dir.join("diagnostics.ndjson"))?;
    let smallness = if initial.t == 0.0 {
        analysis::smallness_norm(&initial, 2).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let (r_support, t_wrap) = wrap_time(cfg, &initial);
    writer.write(&HeaderRecord {
        kind: "header",
        cfg: cfg_hash.clone(),
        config_hash: cfg.hash(),
        config: cfg,
        smallness_norm: smallness,
        support_radius: r_support,
        t_wrap,
        delta: cfg.diagnostics.delta,
        delta1: cfg.delta1(),
    })?;

    let mut ledger = cfg.diagnostics.energies.then(|| EnergyLedger::new(cfg.diagnostics.delta));
    if let (Some(l), Some(d1)) = (ledger.as_mut(), cfg.diagnostics.delta1) {
        l.delta1 = d1;
    }
    let mut series = Series::new();
    let mut scatter = cfg.diagnostics.scattering.then(analysis::fits::ScatterAccumulator::new);
    let mut next_scatter = initial.t;
    let mut snapshot_counter = 0usize;
    let mut sample_counter = 0usize;
    let mut io_error: Option<LabError> = None;

    let params = EvolveParams {
        dt: cfg.integrator.dt,
        t_end: cfg.integrator.t_end,
        sample_every: cfg.integrator.sample_every,
        dealias: cfg.integrator.dealias,
    };
    let result = evolve(initial, &params, &mut |state, _report| {
        let mut inner = || -> Result<(), LabError> {
            if let Some(ledger) = ledger.as_mut() {
                energy_snapshot(state, ledger)
                    .map_err(|e| LabError::Numerics(e.to_string()))?;
            }
            let rec = sample_record(
                &cfg_hash,
                state,
                ledger.as_ref(),
                cfg.diagnostics.transforms,
                &mut series,
            );
            writer.write(&rec)?;
            if let Some(acc) = scatter.as_mut() {
                if state.t >= next_scatter - 1e-9 {
                    acc.push(state).map_err(|e| LabError::Numerics(e.to_string()))?;
                    next_scatter += cfg.diagnostics.scatter_every;
                }
            }
            sample_counter += 1;
            if cfg.output.snapshot_every > 0 && sample_counter % cfg.output.snapshot_every == 0 {
                snapshot_counter += 1;
                write_snapshot(
                    &out_dir.join(format!("snapshot_{snapshot_counter:04}.dkg2")),
                    state,
                )?;
            }
            Ok(())
        };
        inner().map_err(|e| {
            io_error = Some(e);
            dkg_core::DkgError::Numerics("sink failed".into())
        })
    });

    let output = match result {
        Ok(out) => out,
        Err(abort) => {
            if let Some(e) = io_error {
                return Err(e);
            }
            // Numerical failure: persist the last good snapshot plus a
            // failure record, then surface the error.
            let snap_path = out_dir.join("last_good.dkg2");
            write_snapshot(&snap_path, &abort.last_good)?;
            writer.write(&FailureRecord {
                kind: "failure",
                cfg: cfg_hash.clone(),
                t: abort.last_good.t,
                error: abort.error.to_string(),
                last_good_snapshot: snap_path.display().to_string(),
            })?;
            writer.finish()?;
            return Err(LabError::Numerics(abort.error.to_string()));
        }
    };

    let window = fit_window(cfg, t_wrap);
    let mut summary = RunSummary { final_t: output.state.t, ..RunSummary::default() };
    emit_fits(&cfg_hash, &mut writer, &series, window, &out_dir, cfg.output.csv, &mut summary)?;
    if let Some(acc) = scatter {
        if let Ok(trace) = acc.finish() {
            writer.write(&ScatterRecord {
                kind: "scatter",
                cfg: cfg_hash.clone(),
                times: trace.times.clone(),
                dirac_l2: trace.dirac_l2.clone(),
                dirac_h1: trace.dirac_h1.clone(),
                kg_energy: trace.kg_energy.clone(),
            })?;
            summary.scatter = Some(trace);
        }
    }
    let final_path = out_dir.join("final.dkg2");
    write_snapshot(&final_path, &output.state)?;
    writer.finish()?;
    summary.ndjson_path = Some(out_dir.join("diagnostics.ndjson"));
    summary.final_snapshot = Some(final_path);
    Ok(summary)
}

/// Linear flows only: fields evaluated directly at the sample times by the
/// exact propagators, no stepping.
pub fn run_free_decay(cfg: &RunConfig) -> Result<RunSummary, LabError> {
    let out_dir = PathBuf::from(&cfg.output.dir);
    ensure_dir(&out_dir)?;
    let grid = SpectralGrid::new(cfg.grid.n, cfg.grid.half_width)
        .map_err(|e| LabError::config("grid", e.to_string()))?;
    let mut spec = cfg.data_spec()?;
    spec.with_aux = false;
    let initial =
        make_initial_data(&spec, &grid).map_err(|e| LabError::config("data", e.to_string()))?;

    let cfg_hash = cfg.short_hash();
    let mut writer = NdjsonWriter::create(&out_dir.join("diagnostics.ndjson"))?;
    let (r_support, t_wrap) = wrap_time(cfg, &initial);
    writer.write(&HeaderRecord {
        kind: "header",
        cfg: cfg_hash.clone(),
        config_hash: cfg.hash(),
        config: cfg,
        smallness_norm: analysis::smallness_norm(&initial, 2).unwrap_or(f64::NAN),
        support_radius: r_support,
        t_wrap,
        delta: cfg.diagnostics.delta,
        delta1: cfg.delta1(),
    })?;

    let sample_dt = cfg.integrator.dt * cfg.integrator.sample_every as f64;
    let count = (cfg.integrator.t_end / sample_dt).round() as usize;
    let mut series = Series::new();
    let mut final_t = 0.0;
    for j in 0..=count {
        let t = j as f64 * sample_dt;
        let state = SimState {
            t,
            psi: dirac_free_flow(&initial.psi, t)
                .map_err(|e| LabError::Numerics(e.to_string()))?,
            v: kg_free_flow(&initial.v, t).map_err(|e| LabError::Numerics(e.to_string()))?,
            aux: None,
        };
        let rec = sample_record(&cfg_hash, &state, None, false, &mut series);
        writer.write(&rec)?;
        final_t = t;
    }
    let window = fit_window(cfg, t_wrap);
    let mut summary = RunSummary { final_t, ..RunSummary::default() };
    emit_fits(&cfg_hash, &mut writer, &series, window, &out_dir, cfg.output.csv, &mut summary)?;
    writer.finish()?;
    summary.ndjson_path = Some(out_dir.join("diagnostics.ndjson"));
    Ok(summary)
}

/// The randomized identity suites; fails (nonzero exit) on any failure.
pub fn run_identities(cfg: &RunConfig) -> Result<RunSummary, LabError> {
    let trials = cfg.diagnostics.trials;
    let seed = cfg.data.seed;
    let mut failures = 0usize;
    println!("pointwise identity suite ({trials} trials, seed {seed})");
    for report in checks::spinor_identity_suite(trials, seed) {
        let status = if report.passed() { "pass" } else { "FAIL" };
        println!(
            "  [{status}] {:<24} trials {:<6} worst {:.3e}",
            report.name, report.trials, report.worst
        );
        failures += report.failures;
    }
    println!("grid property suite");
    for report in checks::grid_identity_suite(seed) {
        let status = if report.passed() { "pass" } else { "FAIL" };
        println!(
            "  [{status}] {:<24} trials {:<6} worst {:.3e}",
            report.name, report.trials, report.worst
        );
        failures += report.failures;
    }
    if failures > 0 {
        return Err(LabError::Numerics(format!("{failures} identity check(s) failed")));
    }
    Ok(RunSummary { identity_failures: 0, ..RunSummary::default() })
}

/// Self-convergence in dt plus transformation-residual refinement.
pub fn run_convergence(cfg: &RunConfig) -> Result<RunSummary, LabError> {
    let out_dir = PathBuf::from(&cfg.output.dir);
    ensure_dir(&out_dir)?;
    let grid = SpectralGrid::new(cfg.grid.n, cfg.grid.half_width)
        .map_err(|e| LabError::config("grid", e.to_string()))?;
    let initial = make_initial_data(&cfg.data_spec()?, &grid)
        .map_err(|e| LabError::config("data", e.to_string()))?;
    let mut writer = NdjsonWriter::create(&out_dir.join("diagnostics.ndjson"))?;
    let cfg_hash = cfg.short_hash();

    // Self-convergence: distance between runs at dt and dt/2 shrinks 4x.
    let run_to_end = |dt: f64| -> Result<SimState, LabError> {
        let params = EvolveParams {
            dt,
            t_end: cfg.integrator.t_end,
            sample_every: usize::MAX / 2,
            dealias: cfg.integrator.dealias,
        };
        evolve(initial.clone(), &params, &mut |_, _| Ok(()))
            .map(|o| o.state)
            .map_err(|a| LabError::Numerics(a.error.to_string()))
    };
    let dts = [cfg.integrator.dt, cfg.integrator.dt / 2.0, cfg.integrator.dt / 4.0];
    let states: Vec<SimState> =
        dts.iter().map(|&dt| run_to_end(dt)).collect::<Result<_, _>>()?;
    let dist = |a: &SimState, b: &SimState| -> f64 {
        let mut acc = 0.0;
        for p in 0..a.psi.c0.len() {
            acc += (a.psi.c0[p] - b.psi.c0[p]).norm_sqr();
            acc += (a.psi.c1[p] - b.psi.c1[p]).norm_sqr();
            acc += (a.v.u[p] - b.v.u[p]).powi(2) + (a.v.ut[p] - b.v.ut[p]).powi(2);
        }
        (acc * a.grid().cell_area()).sqrt()
    };
    let e1 = dist(&states[0], &states[1]);
    let e2 = dist(&states[1], &states[2]);
    let ratio = e1 / e2;
    println!("self-convergence: err({}) = {e1:.3e}, err({}) = {e2:.3e}, ratio {ratio:.2}", dts[0], dts[1]);

    #[derive(serde::Serialize)]
    struct SelfConvergence {
        kind: &'static str,
        cfg: String,
        dts: Vec<f64>,
        errors: Vec<f64>,
        ratio: f64,
    }
    writer.write(&SelfConvergence {
        kind: "self_convergence",
        cfg: cfg_hash.clone(),
        dts: dts.to_vec(),
        errors: vec![e1, e2],
        ratio,
    })?;

    // Residual refinement: residuals of the four transformed equations at a
    // fixed evaluation time, across dt halvings with the sampling interval
    // scaled along.
    let kinds = [
        ("psi_tilde", ResidualKind::PsiTilde),
        ("big_psi_tilde", ResidualKind::BigPsiTilde),
        ("v_tilde", ResidualKind::VTilde),
        ("minus_structure", ResidualKind::MinusStructure),
    ];
    let mut per_kind: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let refine_dts: Vec<f64> =
        (0..4).map(|k| cfg.integrator.dt / (1 << k) as f64).collect();
    for &dt in &refine_dts {
        let h = dt * cfg.integrator.sample_every as f64;
        // Snap the evaluation time to a sample multiple so the kept segment
        // (the last three samples, final step included) is uniform.
        let m = (cfg.integrator.t_end / h).round().max(2.0);
        let params = EvolveParams {
            dt,
            t_end: (m + 1.0) * h,
            sample_every: cfg.integrator.sample_every,
            dealias: cfg.integrator.dealias,
        };
        let mut kept: Vec<SimState> = Vec::new();
        evolve(initial.clone(), &params, &mut |state, _| {
            kept.push(state.clone());
            if kept.len() > 3 {
                kept.remove(0);
            }
            Ok(())
        })
        .map_err(|a| LabError::Numerics(a.error.to_string()))?;
        if kept.len() < 3 {
            return Err(LabError::Numerics("too few samples for refinement".into()));
        }
        for (slot, (_, kind)) in per_kind.iter_mut().zip(kinds.iter()) {
            let res = transform_residual(&kept, *kind)
                .map_err(|e| LabError::Numerics(e.to_string()))?;
            slot.push(res);
        }
    }
    let mut summary = RunSummary {
        self_convergence_ratios: vec![ratio],
        ..RunSummary::default()
    };
    #[derive(serde::Serialize)]
    struct Refinement {
        kind: &'static str,
        cfg: String,
        series: String,
        dts: Vec<f64>,
        residuals: Vec<f64>,
        ratios: Vec<f64>,
    }
    for ((name, _), residuals) in kinds.iter().zip(per_kind.into_iter()) {
        let ratios: Vec<f64> =
            residuals.windows(2).map(|w| w[0] / w[1]).collect();
        println!(
            "residual refinement {name}: {:?} ratios {:?}",
            residuals
                .iter()
                .map(|r| format!("{r:.3e}"))
                .collect::<Vec<_>>(),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        );
        writer.write(&Refinement {
            kind: "refinement",
            cfg: cfg_hash.clone(),
            series: name.to_string(),
            dts: refine_dts.clone(),
            residuals: residuals.clone(),
            ratios: ratios.clone(),
        })?;
        summary.residual_ratios.push((name.to_string(), ratios));
    }
    writer.finish()?;
    summary.ndjson_path = Some(out_dir.join("diagnostics.ndjson"));
    Ok(summary)
}

/// Prints a snapshot's header and field inventory.
pub fn inspect_snapshot(path: &Path) -> Result<(), LabError> {
    let file =
        std::fs::File::open(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let mut r = std::io::BufReader::new(file);
    let header = crate::snapshot::read_header(&mut r, path)?;
    println!(
        "snapshot {} (format v{})",
        path.display(),
        header.version
    );
    println!(
        "  grid {n} x {n}, half width {l}, t = {t}",
        n = header.n,
        l = header.half_width,
        t = header.t
    );
    let fields = crate::snapshot::read_fields(&mut r, &header, path)?;
    for f in &fields {
        let (kind, sup) = if f.kind == 0 {
            ("real64", f.real.iter().fold(0.0f64, |m, &x| m.max(x.abs())))
        } else {
            ("complex128", f.complex.iter().fold(0.0f64, |m, z| m.max(z.norm())))
        };
        println!("  field {:<8} {:<10} sup |.| = {:.6e}", f.name, kind, sup);
    }
    Ok(())
}
