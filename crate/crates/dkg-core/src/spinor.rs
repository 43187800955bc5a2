//! Pointwise Clifford algebra for the 2D Dirac system.
//!
//! The gamma matrices are the 2x2 representation
//!
//! ```text
//! g0 = [[1, 0], [0, -1]],   g1 = [[0, 1], [-1, 0]],   g2 = [[0, -i], [-i, 0]],
//! ```
//!
//! satisfying `{g^mu, g^nu} = -2 eta_{mu nu} I` and `(g^mu)* = -eta_{mu nu} g^nu`
//! with `eta = diag(-1, 1, 1)`. Everything in this module is a pure function of
//! its arguments and safe to call from any number of threads.

use num_complex::Complex64;

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// A C^2-valued amplitude (one grid point of a spinor field).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Spinor {
    pub c0: C64,
    pub c1: C64,
}

impl Spinor {
    pub fn new(c0: C64, c1: C64) -> Self {
        Spinor { c0, c1 }
    }

    pub fn zero() -> Self {
        Spinor::default()
    }

    pub fn from_re(a: f64, b: f64) -> Self {
        Spinor::new(C64::new(a, 0.0), C64::new(b, 0.0))
    }

    pub fn add(self, o: Spinor) -> Spinor {
        Spinor::new(self.c0 + o.c0, self.c1 + o.c1)
    }

    pub fn sub(self, o: Spinor) -> Spinor {
        Spinor::new(self.c0 - o.c0, self.c1 - o.c1)
    }

    pub fn scale(self, c: C64) -> Spinor {
        Spinor::new(self.c0 * c, self.c1 * c)
    }

    pub fn conj(self) -> Spinor {
        Spinor::new(self.c0.conj(), self.c1.conj())
    }

    /// |psi|^2 = |c0|^2 + |c1|^2.
    pub fn norm_sqr(self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.c0.re.is_finite()
            && self.c0.im.is_finite()
            && self.c1.re.is_finite()
            && self.c1.im.is_finite()
    }
}

/// A 2x2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2C {
    /// Row-major entries `m[row][col]`.
    pub m: [[C64; 2]; 2],
}

impl Mat2C {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2C { m: [[a, b], [c, d]] }
    }

    pub fn from_re(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2C::new(
            C64::new(a, 0.0),
            C64::new(b, 0.0),
            C64::new(c, 0.0),
            C64::new(d, 0.0),
        )
    }

    pub fn zero() -> Self {
        Mat2C::from_re(0.0, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        Mat2C::from_re(1.0, 0.0, 0.0, 1.0)
    }

    pub fn mul_vec(&self, v: Spinor) -> Spinor {
        Spinor::new(
            self.m[0][0] * v.c0 + self.m[0][1] * v.c1,
            self.m[1][0] * v.c0 + self.m[1][1] * v.c1,
        )
    }

    pub fn mul(&self, o: &Mat2C) -> Mat2C {
        let mut out = Mat2C::zero();
        for r in 0..2 {
            for c in 0..2 {
                out.m[r][c] = self.m[r][0] * o.m[0][c] + self.m[r][1] * o.m[1][c];
            }
        }
        out
    }

    pub fn add(&self, o: &Mat2C) -> Mat2C {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.m[r][c] += o.m[r][c];
            }
        }
        out
    }

    pub fn sub(&self, o: &Mat2C) -> Mat2C {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.m[r][c] -= o.m[r][c];
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Mat2C {
        let mut out = *self;
        for r in 0..2 {
            for col in 0..2 {
                out.m[r][col] *= c;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat2C {
        Mat2C::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn max_abs_diff(&self, o: &Mat2C) -> f64 {
        let mut d = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.m[r][c] - o.m[r][c]).norm());
            }
        }
        d
    }
}

/// Minkowski metric `diag(-1, 1, 1)`.
pub fn minkowski(mu: usize, nu: usize) -> f64 {
    assert!(mu <= 2 && nu <= 2, "spacetime index out of range");
    if mu != nu {
        0.0
    } else if mu == 0 {
        -1.0
    } else {
        1.0
    }
}

/// The gamma matrix `g^mu`, `mu` in `0..=2`.
///
/// Panics on an out-of-range index.
pub fn gamma_matrix(mu: usize) -> Mat2C {
    match mu {
        0 => Mat2C::from_re(1.0, 0.0, 0.0, -1.0),
        1 => Mat2C::from_re(0.0, 1.0, -1.0, 0.0),
        2 => Mat2C::new(C64::new(0.0, 0.0), -I, -I, C64::new(0.0, 0.0)),
        _ => panic!("gamma index {mu} out of range (expected 0..=2)"),
    }
}

/// `g0 g^a` for `a = 1, 2`; these are the Pauli matrices sigma_x, sigma_y and
/// turn up as the Dirac symbol and in the radial decomposition.
pub fn gamma0_gamma(a: usize) -> Mat2C {
    assert!(a == 1 || a == 2, "spatial index {a} out of range");
    gamma_matrix(0).mul(&gamma_matrix(a))
}

/// `{g^mu, g^nu} = g^mu g^nu + g^nu g^mu`; equals `-2 eta_{mu nu} I` exactly.
pub fn anticommutator(mu: usize, nu: usize) -> Mat2C {
    let a = gamma_matrix(mu);
    let b = gamma_matrix(nu);
    a.mul(&b).add(&b.mul(&a))
}

/// A unit direction `omega = x/r`, with the convention `omega = (0, 0)` at the
/// origin so radial decompositions degenerate to the identity there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitDirection {
    pub w1: f64,
    pub w2: f64,
}

impl UnitDirection {
    /// Requires `w1^2 + w2^2 = 1` within 1e-12, or exactly `(0, 0)`.
    pub fn new(w1: f64, w2: f64) -> Result<Self, crate::error::DkgError> {
        let s = w1 * w1 + w2 * w2;
        if s == 0.0 || (s - 1.0).abs() <= 1e-12 {
            Ok(UnitDirection { w1, w2 })
        } else {
            Err(crate::error::DkgError::InvalidInput(format!(
                "direction ({w1}, {w2}) is not unit length"
            )))
        }
    }

    /// Direction of the point `(x1, x2)`; the origin maps to `(0, 0)`.
    pub fn from_point(x1: f64, x2: f64) -> Self {
        let r = (x1 * x1 + x2 * x2).sqrt();
        if r == 0.0 {
            UnitDirection { w1: 0.0, w2: 0.0 }
        } else {
            UnitDirection { w1: x1 / r, w2: x2 / r }
        }
    }

    pub fn origin() -> Self {
        UnitDirection { w1: 0.0, w2: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialSign {
    Plus,
    Minus,
}

/// Radial decomposition `[phi]_pm = phi (+/-) omega_a g0 g^a phi`.
///
/// The minus bracket is the part of a spinor carrying extra decay away from
/// the light cone; the plus bracket is annihilated by the `g0`-bilinear.
pub fn radial_projection(phi: Spinor, omega: UnitDirection, sign: RadialSign) -> Spinor {
    // omega_a g0 g^a = omega_1 sigma_x + omega_2 sigma_y, expanded inline.
    let off = C64::new(omega.w1, -omega.w2);
    let rot = Spinor::new(off * phi.c1, off.conj() * phi.c0);
    match sign {
        RadialSign::Plus => phi.add(rot),
        RadialSign::Minus => phi.sub(rot),
    }
}

/// The Dirac bilinear `phi1* g0 phi2 = conj(a1) a2 - conj(b1) b2`.
///
/// Real whenever `phi1 == phi2`.
pub fn dirac_bilinear(phi1: Spinor, phi2: Spinor) -> C64 {
    phi1.c0.conj() * phi2.c0 - phi1.c1.conj() * phi2.c1
}

/// Rewrites the bilinear through minus/plus brackets:
///
/// `phi1* g0 phi2 = 1/4 ([p1]-* g0 [p2]- + [p1]-* g0 [p2]+ + [p1]+* g0 [p2]-)`.
///
/// The `[.]+ g0 [.]+` term vanishes identically, which is what makes the
/// split useful: every surviving term carries at least one minus bracket.
pub fn bilinear_split(phi1: Spinor, phi2: Spinor, omega: UnitDirection) -> C64 {
    let m1 = radial_projection(phi1, omega, RadialSign::Minus);
    let p1 = radial_projection(phi1, omega, RadialSign::Plus);
    let m2 = radial_projection(phi2, omega, RadialSign::Minus);
    let p2 = radial_projection(phi2, omega, RadialSign::Plus);
    (dirac_bilinear(m1, m2) + dirac_bilinear(m1, p2) + dirac_bilinear(p1, m2)) * 0.25
}

/// First derivatives `(d_t, d_1, d_2)` of a quantity at one spacetime point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet<T> {
    pub dt: T,
    pub d1: T,
    pub d2: T,
}

impl<T> Jet<T> {
    pub fn new(dt: T, d1: T, d2: T) -> Self {
        Jet { dt, d1, d2 }
    }
}

impl Jet<Spinor> {
    pub fn conj(&self) -> Jet<Spinor> {
        Jet::new(self.dt.conj(), self.d1.conj(), self.d2.conj())
    }
}

/// Null form `Q0(f, g) = d_t f d_t g - d_1 f d_1 g - d_2 f d_2 g`,
/// bilinear (no conjugation) in both jets.
pub fn null_form_q0(jf: &Jet<C64>, jg: &Jet<C64>) -> C64 {
    jf.dt * jg.dt - jf.d1 * jg.d1 - jf.d2 * jg.d2
}

/// `Q0` with a spinor-valued first slot and a scalar second slot.
pub fn null_form_q0_spinor(jf: &Jet<Spinor>, jg: &Jet<C64>) -> Spinor {
    jf.dt
        .scale(jg.dt)
        .sub(jf.d1.scale(jg.d1))
        .sub(jf.d2.scale(jg.d2))
}

/// Contraction `g^mu j_mu` of the gamma matrices against a spinor jet.
pub fn gamma_contract(j: &Jet<Spinor>) -> Spinor {
    gamma_matrix(0)
        .mul_vec(j.dt)
        .add(gamma_matrix(1).mul_vec(j.d1))
        .add(gamma_matrix(2).mul_vec(j.d2))
}

/// Contraction `g0 g^mu j_mu` (note `g0 g0 = I`).
fn gamma0_gamma_contract(j: &Jet<Spinor>) -> Spinor {
    j.dt
        .add(gamma0_gamma(1).mul_vec(j.d1))
        .add(gamma0_gamma(2).mul_vec(j.d2))
}

/// Plain (bilinear) inner product of two spinors.
fn dot(a: Spinor, b: Spinor) -> C64 {
    a.c0 * b.c0 + a.c1 * b.c1
}

/// Pointwise inputs for the cubic terms: the fields and all first jets that
/// appear, taken at a single spacetime point. Jets of `v psi*` and `psi*` are
/// derived by conjugation (v is real).
#[derive(Clone, Copy, Debug)]
pub struct CubicInputs {
    pub psi: Spinor,
    pub v: f64,
    pub d_psi: Jet<Spinor>,
    pub d_v: Jet<C64>,
    pub d_vpsi: Jet<Spinor>,
}

/// The four nonlinearities produced by the normal-form transformations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicTerms {
    /// `N1 = i v g^mu d_mu(v psi)` (spinor-valued).
    pub n1: Spinor,
    /// `N2 = (psi* g0 psi) psi` (spinor-valued).
    pub n2: Spinor,
    /// `N3 = i d_mu(v psi*) g0 g^mu psi - i psi* g0 g^mu d_mu(v psi)` (scalar).
    pub n3: C64,
    /// `N4 = 2 d_a psi* g0 d^a psi`, index raised with eta so `d^0 = -d_t` (scalar).
    pub n4: C64,
}

pub fn cubic_terms(input: &CubicInputs) -> CubicTerms {
    let n1 = gamma_contract(&input.d_vpsi).scale(I * input.v);
    let n2 = input.psi.scale(dirac_bilinear(input.psi, input.psi));

    // d_mu(v psi*) row-contracted against g0 g^mu psi; entries of d_mu(v psi*)
    // are the conjugates of d_mu(v psi) since v is real.
    let dvpsi_conj = input.d_vpsi.conj();
    let term_a = dot(dvpsi_conj.dt, input.psi)
        + dot(dvpsi_conj.d1, gamma0_gamma(1).mul_vec(input.psi))
        + dot(dvpsi_conj.d2, gamma0_gamma(2).mul_vec(input.psi));
    let term_b = input.psi.c0.conj() * gamma0_gamma_contract(&input.d_vpsi).c0
        + input.psi.c1.conj() * gamma0_gamma_contract(&input.d_vpsi).c1;
    let n3 = I * term_a - I * term_b;

    let n4 = 2.0
        * (-dirac_bilinear(input.d_psi.dt, input.d_psi.dt)
            + dirac_bilinear(input.d_psi.d1, input.d_psi.d1)
            + dirac_bilinear(input.d_psi.d2, input.d_psi.d2));

    CubicTerms { n1, n2, n3, n4 }
}
