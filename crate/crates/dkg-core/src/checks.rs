//! Seeded randomized identity suites.
//!
//! These back the `identities` CLI verb and the acceptance run: each check
//! draws a fixed number of random samples from a seeded generator and counts
//! failures against the stated tolerance, so a run is reproducible bit for
//! bit given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spinor::{
    anticommutator, bilinear_split, dirac_bilinear, gamma0_gamma, gamma_matrix, minkowski,
    radial_projection, Mat2C, RadialSign, Spinor, UnitDirection, C64,
};

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of one named identity check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub worst: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn rand_spinor(rng: &mut impl Rng) -> Spinor {
    let mut c = || C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
    Spinor::new(c(), c())
}

fn rand_direction(rng: &mut impl Rng) -> UnitDirection {
    let a = rng.gen::<f64>() * std::f64::consts::TAU;
    UnitDirection { w1: a.cos(), w2: a.sin() }
}

/// `{g^mu, g^nu} = -2 eta I`, exact equality of every entry.
pub fn check_anticommutation() -> CheckReport {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for mu in 0..3 {
        for nu in 0..3 {
            let got = anticommutator(mu, nu);
            let want = Mat2C::identity().scale(C64::new(-2.0 * minkowski(mu, nu), 0.0));
            let d = got.max_abs_diff(&want);
            worst = worst.max(d);
            if d != 0.0 {
                failures += 1;
            }
        }
    }
    CheckReport { name: "anticommutation", trials: 9, failures, worst }
}

/// `(g^mu)* = -eta_{mu nu} g^nu`, exact.
pub fn check_adjoint_identity() -> CheckReport {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for mu in 0..3 {
        let got = gamma_matrix(mu).adjoint();
        let mut want = Mat2C::zero();
        for nu in 0..3 {
            want = want.add(&gamma_matrix(nu).scale(C64::new(-minkowski(mu, nu), 0.0)));
        }
        let d = got.max_abs_diff(&want);
        worst = worst.max(d);
        if d != 0.0 {
            failures += 1;
        }
    }
    CheckReport { name: "gamma-adjoint", trials: 3, failures, worst }
}

/// `|[phi]-|^2 = 2(|phi|^2 - omega_a phi* g0 g^a phi)` over random draws.
pub fn check_minus_norm_identity(trials: usize, seed: u64) -> CheckReport {
    let mut rng = test_rng(seed);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let phi = rand_spinor(&mut rng);
        let w = rand_direction(&mut rng);
        let minus = radial_projection(phi, w, RadialSign::Minus);
        let rot = gamma0_gamma(1)
            .scale(C64::new(w.w1, 0.0))
            .add(&gamma0_gamma(2).scale(C64::new(w.w2, 0.0)));
        let rv = rot.mul_vec(phi);
        let cross = (phi.c0.conj() * rv.c0 + phi.c1.conj() * rv.c1).re;
        let lhs = minus.norm_sqr();
        let rhs = 2.0 * (phi.norm_sqr() - cross);
        let rel = (lhs - rhs).abs() / (lhs.abs() + rhs.abs()).max(1e-2);
        worst = worst.max(rel);
        if rel > 1e-12 {
            failures += 1;
        }
    }
    CheckReport { name: "minus-bracket-norm", trials, failures, worst }
}

/// `[phi]+* g0 [phi]+ = 0` over random draws (1e-12 absolute).
pub fn check_plus_bracket_null(trials: usize, seed: u64) -> CheckReport {
    let mut rng = test_rng(seed);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let phi = rand_spinor(&mut rng);
        let w = rand_direction(&mut rng);
        let plus = radial_projection(phi, w, RadialSign::Plus);
        let d = dirac_bilinear(plus, plus).norm();
        worst = worst.max(d);
        if d > 1e-12 {
            failures += 1;
        }
    }
    CheckReport { name: "plus-bracket-null", trials, failures, worst }
}

/// `bilinear_split == dirac_bilinear` over random draws (1e-12 relative).
pub fn check_bilinear_split(trials: usize, seed: u64) -> CheckReport {
    let mut rng = test_rng(seed);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p1 = rand_spinor(&mut rng);
        let p2 = rand_spinor(&mut rng);
        let w = rand_direction(&mut rng);
        let a = dirac_bilinear(p1, p2);
        let b = bilinear_split(p1, p2, w);
        let rel = (a - b).norm() / (a.norm() + b.norm()).max(1e-2);
        worst = worst.max(rel);
        if rel > 1e-12 {
            failures += 1;
        }
    }
    CheckReport { name: "bilinear-split", trials, failures, worst }
}

/// The full pointwise identity suite at the standard trial count.
pub fn spinor_identity_suite(trials: usize, seed: u64) -> Vec<CheckReport> {
    vec![
        check_anticommutation(),
        check_adjoint_identity(),
        check_minus_norm_identity(trials, seed),
        check_plus_bracket_null(trials, seed.wrapping_add(1)),
        check_bilinear_split(trials, seed.wrapping_add(2)),
    ]
}

// ---------------------------------------------------------------------------
// Grid-level property suite
// ---------------------------------------------------------------------------

use crate::grid::{
    reduce_norm_r, spectral_gradient_r, NormKind, ScalarState, SpectralGrid, SpinorField,
};
use crate::vector_fields::{
    dpsi_dt, good_derivative_scalar, scaling_scalar, vf_scalar, vf_spinor, vf_spinor_modified,
    FieldIndex,
};

fn report(name: &'static str, trials: usize, worst: f64, tol: f64) -> CheckReport {
    CheckReport {
        name,
        trials,
        failures: usize::from(!(worst <= tol)),
        worst,
    }
}

/// Exact differentiation of a single sine mode.
fn check_gradient_exactness(grid: &std::sync::Arc<SpectralGrid>) -> CheckReport {
    let l = grid.half_width();
    let data: Vec<f64> = (0..grid.num_points())
        .map(|p| (std::f64::consts::PI * grid.coord(p % grid.n()) / l).sin())
        .collect();
    let (gx, _) = spectral_gradient_r(grid, &data);
    let mut worst = 0.0f64;
    for p in 0..data.len() {
        let want =
            (std::f64::consts::PI / l) * (std::f64::consts::PI * grid.coord(p % grid.n()) / l).cos();
        worst = worst.max((gx[p] - want).abs());
    }
    report("gradient-exactness", 1, worst, 1e-12)
}

fn check_mixed_partials(grid: &std::sync::Arc<SpectralGrid>, seed: u64) -> CheckReport {
    let mut rng = test_rng(seed);
    let l = grid.half_width();
    let modes: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                (rng.gen_range(1..4) as f64) * std::f64::consts::PI / l,
                (rng.gen_range(1..4) as f64) * std::f64::consts::PI / l,
                rng.gen::<f64>() - 0.5,
            )
        })
        .collect();
    let data: Vec<f64> = (0..grid.num_points())
        .map(|p| {
            let x = grid.coord(p % grid.n());
            let y = grid.coord(p / grid.n());
            modes.iter().map(|&(kx, ky, a)| a * (kx * x).sin() * (ky * y).cos()).sum()
        })
        .collect();
    let (gx, gy) = spectral_gradient_r(grid, &data);
    let (_, gxy) = spectral_gradient_r(grid, &gx);
    let (gyx, _) = spectral_gradient_r(grid, &gy);
    let mut worst = 0.0f64;
    for p in 0..data.len() {
        worst = worst.max((gxy[p] - gyx[p]).abs());
    }
    report("mixed-partials", 1, worst, 1e-12)
}

/// Modified minus unmodified rotation/boost is the constant spinor matrix.
fn check_modified_offsets(grid: &std::sync::Arc<SpectralGrid>) -> CheckReport {
    let psi = SpinorField::from_fn(grid, |x, y| {
        let e = (-(x * x + y * y) / 4.0).exp();
        crate::spinor::Spinor::new(C64::new(e, 0.3 * e), C64::new(-0.2 * e, 0.7 * e))
    });
    let t = 1.3;
    let mut worst = 0.0f64;
    for k in [FieldIndex::Rotation, FieldIndex::Boost1, FieldIndex::Boost2] {
        let plain = vf_spinor(k, &psi, None, t);
        let hat = vf_spinor_modified(k, &psi, None, t).expect("modified");
        for p in 0..psi.c0.len() {
            let d0 = hat.c0[p] - plain.c0[p];
            let d1 = hat.c1[p] - plain.c1[p];
            let (w0, w1) = match k {
                FieldIndex::Rotation => (
                    C64::new(0.0, 0.5) * psi.c0[p],
                    C64::new(0.0, -0.5) * psi.c1[p],
                ),
                FieldIndex::Boost1 => (-0.5 * psi.c1[p], -0.5 * psi.c0[p]),
                _ => (
                    C64::new(0.0, 0.5) * psi.c1[p],
                    C64::new(0.0, -0.5) * psi.c0[p],
                ),
            };
            worst = worst.max((d0 - w0).norm()).max((d1 - w1).norm());
        }
    }
    report("modified-field-offsets", 3, worst, 1e-13)
}

/// `[d_t, L_a] f = d_a f` and `[d_b, L_a] f = delta_ab d_t f` on a free
/// Dirac field, with on-shell time derivatives.
fn check_commutators(grid: &std::sync::Arc<SpectralGrid>) -> CheckReport {
    let psi = SpinorField::from_fn(grid, |x, y| {
        let e = (-(x * x + y * y) / 2.0).exp();
        crate::spinor::Spinor::new(C64::new(e, 0.0), C64::new(0.2 * e, -0.3 * e))
    });
    let t = 0.8;
    let td = dpsi_dt(&psi, None);
    let mut worst = 0.0f64;
    for a in [FieldIndex::Boost1, FieldIndex::Boost2] {
        // d_t(L_a psi) on shell (L_a psi solves the free equation plus the
        // commutator, so evaluate by the product rule instead).
        let la_td = vf_spinor(a, &td, None, t);
        let dt_la = {
            // d_t (t d_a psi + x_a T psi) = d_a psi + t d_a T psi + x_a T T psi.
            let ga = if a == FieldIndex::Boost1 {
                crate::grid::spectral_gradient_spinor(&psi).0
            } else {
                crate::grid::spectral_gradient_spinor(&psi).1
            };
            let ga_td = if a == FieldIndex::Boost1 {
                crate::grid::spectral_gradient_spinor(&td).0
            } else {
                crate::grid::spectral_gradient_spinor(&td).1
            };
            let tdtd = dpsi_dt(&td, None);
            let mut out = SpinorField::zeros(grid);
            for iy in 0..grid.n() {
                for ix in 0..grid.n() {
                    let p = grid.idx(ix, iy);
                    let xa = if a == FieldIndex::Boost1 { grid.coord(ix) } else { grid.coord(iy) };
                    out.c0[p] = ga.c0[p] + t * ga_td.c0[p] + xa * tdtd.c0[p];
                    out.c1[p] = ga.c1[p] + t * ga_td.c1[p] + xa * tdtd.c1[p];
                }
            }
            out
        };
        // [d_t, L_a] psi = d_t(L_a psi) - L_a(d_t psi) must equal d_a psi.
        let ga = if a == FieldIndex::Boost1 {
            crate::grid::spectral_gradient_spinor(&psi).0
        } else {
            crate::grid::spectral_gradient_spinor(&psi).1
        };
        for p in 0..psi.c0.len() {
            let comm0 = dt_la.c0[p] - la_td.c0[p];
            let comm1 = dt_la.c1[p] - la_td.c1[p];
            worst = worst.max((comm0 - ga.c0[p]).norm()).max((comm1 - ga.c1[p]).norm());
        }
        // [d_b, L_a] psi = delta_ab d_t psi.
        let la_field = vf_spinor(a, &psi, None, t);
        let (d1_la, d2_la) = crate::grid::spectral_gradient_spinor(&la_field);
        let (d1, d2) = crate::grid::spectral_gradient_spinor(&psi);
        let la_d1 = vf_spinor(a, &d1, None, t);
        let la_d2 = vf_spinor(a, &d2, None, t);
        for p in 0..psi.c0.len() {
            let c1 = d1_la.c0[p] - la_d1.c0[p];
            let c2 = d2_la.c0[p] - la_d2.c0[p];
            let want1 = if a == FieldIndex::Boost1 { td.c0[p] } else { C64::new(0.0, 0.0) };
            let want2 = if a == FieldIndex::Boost2 { td.c0[p] } else { C64::new(0.0, 0.0) };
            worst = worst.max((c1 - want1).norm()).max((c2 - want2).norm());
        }
    }
    report("vector-field-commutators", 2, worst, 1e-10)
}

/// Weighted pointwise inequality `<t+r> |G_a f| <= c (|Sf| + |Gamma f|)` with
/// `c <= 5` over the interior `r <= 3t + 3`, on a random smooth windowed
/// field.
fn check_good_derivative_inequality(
    grid: &std::sync::Arc<SpectralGrid>,
    seed: u64,
) -> CheckReport {
    let mut rng = test_rng(seed);
    let l = grid.half_width();
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                (rng.gen_range(1..5) as f64) * std::f64::consts::PI / l,
                (rng.gen_range(1..5) as f64) * std::f64::consts::PI / l,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() * std::f64::consts::TAU,
            )
        })
        .collect();
    let window = |x: f64, y: f64| (-(x * x + y * y) / (l * l / 16.0)).exp();
    let mut s = ScalarState::zeros(grid);
    for iy in 0..grid.n() {
        for ix in 0..grid.n() {
            let x = grid.coord(ix);
            let y = grid.coord(iy);
            let p = grid.idx(ix, iy);
            let val: f64 = modes
                .iter()
                .map(|&(kx, ky, a, ph)| a * (kx * x + ph).sin() * (ky * y).cos())
                .sum();
            s.u[p] = val * window(x, y);
            s.ut[p] = 0.3 * val * window(x, y);
        }
    }
    let t = 2.0;
    let su = scaling_scalar(&s, t);
    let gammas: Vec<Vec<f64>> = (1..=6)
        .map(|k| vf_scalar(FieldIndex::from_index(k).unwrap(), &s, t))
        .collect();
    let g1 = good_derivative_scalar(1, &s);
    let g2 = good_derivative_scalar(2, &s);
    let sup_g = g1.iter().chain(g2.iter()).fold(0.0f64, |m, &x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for iy in 0..grid.n() {
        for ix in 0..grid.n() {
            let p = grid.idx(ix, iy);
            let r = grid.radius(ix, iy);
            if r > 3.0 * t + 3.0 {
                continue;
            }
            let gamma_mag = gammas.iter().map(|g| g[p] * g[p]).sum::<f64>().sqrt();
            let rhs = su[p].abs() + gamma_mag;
            for ga in [&g1, &g2] {
                let lhs = crate::grid::jbracket(t + r) * ga[p].abs();
                if ga[p].abs() > 1e-9 * sup_g && rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                }
            }
        }
    }
    report("good-derivative-weight", 1, worst, 5.0)
}

fn check_norm_examples(grid: &std::sync::Arc<SpectralGrid>) -> CheckReport {
    let ones = vec![1.0; grid.num_points()];
    let l2 = reduce_norm_r(grid, &ones, None, NormKind::L2).unwrap();
    let mut worst = (l2 - 2.0 * grid.half_width()).abs();
    let gauss: Vec<f64> = (0..grid.num_points())
        .map(|p| {
            let x = grid.coord(p % grid.n());
            let y = grid.coord(p / grid.n());
            (-(x * x + y * y)).exp()
        })
        .collect();
    let l2 = reduce_norm_r(grid, &gauss, None, NormKind::L2).unwrap();
    worst = worst.max((l2 - (std::f64::consts::PI / 2.0).sqrt()).abs());
    report("norm-examples", 2, worst, 1e-6)
}

fn check_cutoff_shape() -> CheckReport {
    let mut worst = (crate::grid::chi_cutoff(1.5) - 0.5).abs();
    worst = worst.max(crate::grid::chi_cutoff(1.0));
    worst = worst.max((crate::grid::chi_cutoff(2.0) - 1.0).abs());
    let mut prev = -1.0;
    for i in 0..=300 {
        let v = crate::grid::chi_cutoff(i as f64 / 100.0);
        if v < prev {
            worst = worst.max(prev - v);
        }
        prev = v;
    }
    report("cutoff-shape", 4, worst, 1e-14)
}

/// Grid/derivative property suite on a self-contained 64^2 box.
pub fn grid_identity_suite(seed: u64) -> Vec<CheckReport> {
    let grid = SpectralGrid::new(64, 10.0).expect("static grid");
    vec![
        check_gradient_exactness(&grid),
        check_mixed_partials(&grid, seed),
        check_modified_offsets(&grid),
        check_commutators(&grid),
        check_good_derivative_inequality(&grid, seed.wrapping_add(1)),
        check_norm_examples(&grid),
        check_cutoff_shape(),
    ]
}
