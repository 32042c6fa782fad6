//! Analytic f and g for the exponential kernel and a free particle.
//!
//! The fourth-order equation has characteristic values x = upsilon1^2 and
//! y = upsilon2^2. Solutions are written on cosh(sqrt(z) s) and
//! sinh(sqrt(z) s)/sqrt(z), which are entire in z, so nothing depends on the
//! square-root branch. The small root's pair carries the linear anchor
//! (1 - s/t or s/t) exactly, and the unknowns solve for the deviation only.
//! Internals run at 160 bits (see `hp`); results are handed out as f64.

use crate::error::{Error, Result};
use crate::hp::{solve_dense, Hp};
use crate::kernel::{CorrelationKernel, DriftKernelB};
use crate::params::{Complex, ModelParams};
use crate::quad::gauss_composite_c;

/// Above this |Re u| t the hyperbolic pair is replaced by scaled exponentials;
/// cosh/sinh lose about e^{Re u t} in conditioning.
const EXP_SWITCH: f64 = 2.0;
/// Largest accepted condition number of the equilibrated 4x4 system.
const COND_MAX: f64 = 1e25;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicRoots {
    pub upsilon1: Complex,
    pub upsilon2: Complex,
    pub zeta: Complex,
    pub degenerate: bool,
    xh: Hp,
    yh: Hp,
}

impl CharacteristicRoots {
    pub fn x(&self) -> Complex {
        self.xh.to_c()
    }

    pub fn y(&self) -> Complex {
        self.yh.to_c()
    }
}

struct Derived {
    lm: Hp,
    g: Hp,
    /// Omega^2
    om2: Hp,
}

impl Derived {
    fn new(p: &ModelParams) -> Self {
        let lm = Hp::real(p.lambda) * p.mu;
        let om2 = Hp::real(p.omega) * p.omega - &lm * &lm;
        Derived { lm, g: Hp::real(p.gamma), om2 }
    }
}

/// Coefficients (b, c0) of upsilon^4 + b upsilon^2 + c0.
fn quartic_coeffs(p: &ModelParams) -> (Hp, Hp) {
    let Derived { lm, g, om2 } = Derived::new(p);
    let g2 = &g * &g;
    let b = om2 + &lm * &g * 2.0 - &g2;
    let c0 = &lm * &lm * &g2 * 4.0 - &g2 * (p.omega * p.omega)
        + Hp::new(0.0, 2.0) * p.hbar * p.lambda * &g2 / p.m;
    (b, c0)
}

/// |quartic(u)| relative to its largest monomial.
pub fn quartic_residual(p: &ModelParams, u: Complex) -> f64 {
    let (b, c0) = quartic_coeffs(p);
    let u = Hp::from_c(u);
    let u2 = &u * &u;
    let terms = [&u2 * &u2, &b * &u2, c0];
    let scale = terms.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let [a, b, c] = terms;
    (a + b + c).norm() / scale
}

pub fn characteristic_roots(p: &ModelParams) -> Result<CharacteristicRoots> {
    if p.omega != 0.0 {
        return Err(Error::UnsupportedRegime("closed form needs omega = 0; use the grid solver".into()));
    }
    let (b, c0) = quartic_coeffs(p);
    let zeta = (&b * &b - &c0 * 4.0).sqrt();
    let (r1, r2) = ((-&b + &zeta) * 0.5, (-&b - &zeta) * 0.5);
    let x = if r1.norm() >= r2.norm() { r1 } else { r2 };
    // y from the product of roots; avoids cancellation when c0 is tiny
    let y = if x.norm() == 0.0 { Hp::zero() } else { &c0 / &x };
    let (u1, u2) = (x.sqrt().to_c(), y.sqrt().to_c());
    let degenerate = u2.norm() < 1e-6 * u1.norm() || (u1 - u2).norm() < 1e-6 * u1.norm() || u1.norm() == 0.0;
    Ok(CharacteristicRoots { upsilon1: u1, upsilon2: u2, zeta: zeta.to_c(), degenerate, xh: x, yh: y })
}

/// sinh(q)/q
fn sinhc(q: &Hp) -> Hp {
    if q.norm() < 0.5 {
        let q2 = q * q;
        let (mut term, mut acc) = (Hp::one(), Hp::one());
        for n in 1..20 {
            term = &term * &q2 / ((2 * n * (2 * n + 1)) as f64);
            acc += &term;
        }
        acc
    } else {
        q.sinh() / q
    }
}

/// Jets of C(z;s) = cosh(sqrt(z) s), S(z;s) = sinh(sqrt(z) s)/sqrt(z) and the
/// reduced forms Chat = (C - 1)/z, Shat = (S - s)/z.
#[derive(Debug, Clone)]
struct HyperJet {
    c: Hp,
    s: Hp,
    ch: Hp,
    sh: Hp,
    z: Hp,
}

impl HyperJet {
    fn at(z: &Hp, u: &Hp, s: f64) -> Self {
        let us = u * s;
        let c = us.cosh();
        let sv = sinhc(&us) * s;
        let (ch, sh) = if z.norm() * s * s < 0.25 {
            let mut ch = Hp::zero();
            let mut sh = Hp::zero();
            let mut zp = Hp::one();
            let mut fact = Hp::one();
            let sp = Hp::real(s);
            let mut pw = Hp::one();
            for n in 1..24 {
                fact *= ((2 * n - 1) * (2 * n)) as f64;
                pw = &pw * &sp * &sp;
                let term = &zp * &pw / &fact;
                sh += &term * s / ((2 * n + 1) as f64);
                ch += term;
                zp *= z;
            }
            (ch, sh)
        } else {
            ((&c - Hp::one()) / z, (&sv - Hp::real(s)) / z)
        };
        HyperJet { c, s: sv, ch, sh, z: z.clone() }
    }

    fn cosh_d(&self, d: usize) -> Hp {
        let z = &self.z;
        match d {
            0 => self.c.clone(),
            1 => z * &self.s,
            2 => z * &self.c,
            _ => z * z * &self.s,
        }
    }

    fn sinh_d(&self, d: usize) -> Hp {
        match d {
            0 => self.s.clone(),
            1 => self.c.clone(),
            2 => &self.z * &self.s,
            _ => &self.z * &self.c,
        }
    }

    fn chat_d(&self, d: usize) -> Hp {
        match d {
            0 => self.ch.clone(),
            1 => self.s.clone(),
            2 => self.c.clone(),
            _ => &self.z * &self.s,
        }
    }

    fn shat_d(&self, d: usize) -> Hp {
        match d {
            0 => self.sh.clone(),
            1 => self.ch.clone(),
            2 => self.s.clone(),
            _ => self.c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Pair {
    /// cosh(u s), sinh(u s)/u with z = u^2
    Hyper { z: Hp, u: Hp },
    /// exp(-u s), exp(u (s - t))
    Exp { u: Hp },
    /// divided differences [C(x) - C(y)]/(x - y), [S(x) - S(y)]/(x - y) by series
    Divided { x: Hp, y: Hp },
}

impl Pair {
    fn eval(&self, s: f64, t: f64, d: usize) -> [Hp; 2] {
        match self {
            Pair::Hyper { z, u } => {
                let j = HyperJet::at(z, u, s);
                [j.cosh_d(d), j.sinh_d(d)]
            }
            Pair::Exp { u } => {
                let (e1, e2) = ((-u * s).exp(), (u * (Hp::real(s) - t)).exp());
                [(-u).powu(d as u32) * e1, u.powu(d as u32) * e2]
            }
            Pair::Divided { x, y } => [divided_series(x, y, s, -(d as i32)), divided_series(x, y, s, 1 - d as i32)],
        }
    }
}

/// sum_{n >= 1, 2n + e >= 0} h_{n-1}(x, y) s^{2n+e} / (2n+e)!, h_k = sum x^i y^{k-i}
fn divided_series(x: &Hp, y: &Hp, s: f64, e: i32) -> Hp {
    let mut acc = Hp::zero();
    let mut h = Hp::one();
    let mut ypow = Hp::one();
    for n in 1..60 {
        if n > 1 {
            ypow *= y;
            h = &h * x + &ypow;
        }
        let pw = 2 * n + e;
        if pw < 0 {
            continue;
        }
        let mut term = h.clone();
        for k in 1..=pw {
            term *= s;
            term = term / k as f64;
        }
        let small = term.norm() <= 1e-50 * acc.norm();
        acc += term;
        if n > 4 && small {
            break;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    F,
    G,
}

impl Role {
    /// Anchor p + q s with the role's boundary values.
    pub fn anchor(&self, t: f64) -> (f64, f64) {
        match self {
            Role::F => (1.0, -1.0 / t),
            Role::G => (0.0, 1.0 / t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Rows {
    a: Hp,
    gamma: f64,
    /// Qc / P
    qp: Hp,
    p: Hp,
}

impl Rows {
    fn new(p: &ModelParams) -> Self {
        let Derived { lm, g, om2 } = Derived::new(p);
        let lm2 = &lm * &lm;
        let pc = &lm2 + &lm * &g + Hp::new(0.0, p.hbar) * p.lambda / p.m;
        Rows {
            a: om2 + &lm * &g * 2.0,
            gamma: p.gamma,
            qp: Hp::one() + &lm2 / &pc,
            p: pc,
        }
    }

    /// Four functionals applied to jets [e, e', e'', e'''] at 0 and t.
    fn apply(&self, j0: &[Hp; 4], jt: &[Hp; 4]) -> [Hp; 4] {
        let (a, g, qp) = (&self.a, self.gamma, &self.qp);
        [
            j0[0].clone(),
            jt[0].clone(),
            &j0[3] + a * &j0[1] - qp * &j0[2] * g - qp * a * &j0[0] * g,
            &jt[3] + a * &jt[1] + &jt[2] * g + a * &jt[0] * g,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ClosedFormSolution {
    pub role: Role,
    pub t: f64,
    pub roots: CharacteristicRoots,
    params: ModelParams,
    rows: Option<Rows>,
    pair_y: Pair,
    pair_x: Pair,
    /// coefficients on [y-pair, x-pair]; deviation coefficients when anchored
    coef: [Hp; 4],
    anchored: bool,
    /// lambda = 0: exactly the anchor
    exact_free: bool,
}

pub fn solve_f(p: &ModelParams, t: f64) -> Result<ClosedFormSolution> {
    solve_role(p, t, Role::F)
}

pub fn solve_g(p: &ModelParams, t: f64) -> Result<ClosedFormSolution> {
    solve_role(p, t, Role::G)
}

pub fn solve_role(p: &ModelParams, t: f64, role: Role) -> Result<ClosedFormSolution> {
    let roots = characteristic_roots(p)?;
    solve_with_roots(p, t, role, roots)
}

/// As `solve_role` with precomputed roots.
pub fn solve_with_roots(p: &ModelParams, t: f64, role: Role, roots: CharacteristicRoots) -> Result<ClosedFormSolution> {
    if p.omega != 0.0 {
        return Err(Error::UnsupportedRegime("closed form needs omega = 0; use the grid solver".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter { name: "t", reason: format!("horizon {t} must be > 0") });
    }
    let (x, y) = (roots.xh.clone(), roots.yh.clone());
    let (u, v) = (x.sqrt(), y.sqrt());
    let pair_y = if v.re().abs() * t > EXP_SWITCH { Pair::Exp { u: v } } else { Pair::Hyper { z: y.clone(), u: v } };
    let pair_x = if x.norm() * t * t <= 1.0 {
        Pair::Divided { x, y }
    } else if u.re().abs() * t > EXP_SWITCH {
        Pair::Exp { u }
    } else {
        Pair::Hyper { z: x, u }
    };
    let anchored = matches!(pair_y, Pair::Hyper { .. });
    let mut sol = ClosedFormSolution {
        role,
        t,
        roots,
        params: *p,
        rows: None,
        pair_y,
        pair_x,
        coef: std::array::from_fn(|_| Hp::zero()),
        anchored,
        exact_free: p.lambda == 0.0,
    };
    if sol.exact_free {
        return Ok(sol);
    }
    sol.rows = Some(Rows::new(p));
    sol.fit()?;
    Ok(sol)
}

impl ClosedFormSolution {
    fn fit(&mut self) -> Result<()> {
        let rows = self.rows.clone().expect("rows set before fitting");
        let t = self.t;

        let jets0: Vec<[Hp; 4]> = (0..4).map(|d| self.basis(0.0, d)).collect();
        let jetst: Vec<[Hp; 4]> = (0..4).map(|d| self.basis(t, d)).collect();
        let mut m = vec![vec![Hp::zero(); 4]; 4];
        for i in 0..4 {
            let col = rows.apply(
                &std::array::from_fn(|d| jets0[d][i].clone()),
                &std::array::from_fn(|d| jetst[d][i].clone()),
            );
            for (r, v) in col.into_iter().enumerate() {
                m[r][i] = v;
            }
        }
        let rhs = self.target(&rows);

        // equilibrate rows then columns by powers of two, so scaling is exact
        let pow2 = |mx: f64| if mx > 0.0 { (-mx.log2().round()).exp2() } else { 1.0 };
        let mut rs = [1.0; 4];
        let mut cs = [1.0; 4];
        for r in 0..4 {
            rs[r] = pow2((0..4).map(|i| m[r][i].norm()).fold(0.0, f64::max));
        }
        for i in 0..4 {
            cs[i] = pow2((0..4).map(|r| m[r][i].norm() * rs[r]).fold(0.0, f64::max));
        }
        let ms: Vec<Vec<Hp>> = (0..4).map(|r| (0..4).map(|i| &m[r][i] * rs[r] * cs[i]).collect()).collect();
        let b: Vec<Hp> = (0..4).map(|r| &rhs[r] * rs[r]).collect();
        let (z, cond) = solve_dense(&ms, &b).ok_or(Error::IllConditioned(f64::INFINITY))?;
        if !cond.is_finite() || cond > COND_MAX {
            return Err(Error::IllConditioned(cond));
        }
        for (i, zi) in z.into_iter().enumerate() {
            self.coef[i] = zi * cs[i];
            if !self.coef[i].is_finite() {
                return Err(Error::Numerics("closed-form coefficients not finite".into()));
            }
        }
        Ok(())
    }

    /// Basis names for the (y, x) root pairs.
    pub fn basis_kind(&self) -> (&'static str, &'static str) {
        let name = |p: &Pair| match p {
            Pair::Hyper { .. } => "hyper",
            Pair::Exp { .. } => "exp",
            Pair::Divided { .. } => "divided",
        };
        (name(&self.pair_y), name(&self.pair_x))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Basis [y-pair, x-pair] d-th derivative at s.
    fn basis(&self, s: f64, d: usize) -> [Hp; 4] {
        let [a0, a1] = self.pair_y.eval(s, self.t, d);
        let [b0, b1] = self.pair_x.eval(s, self.t, d);
        [a0, a1, b0, b1]
    }

    /// y (p Chat + q Shat): the part of p C(y) + q S(y) beyond the anchor.
    fn anchor_excess(&self, s: f64, d: usize) -> Hp {
        match &self.pair_y {
            Pair::Hyper { z, u } => {
                let (p, q) = self.role.anchor(self.t);
                let j = HyperJet::at(z, u, s);
                z * (j.chat_d(d) * p + j.shat_d(d) * q)
            }
            _ => Hp::zero(),
        }
    }

    fn anchor_d(&self, s: f64, d: usize) -> Hp {
        let (p, q) = self.role.anchor(self.t);
        match d {
            0 => Hp::real(q) * s + p,
            1 => Hp::real(q),
            _ => Hp::zero(),
        }
    }

    /// Right-hand side of the boundary rows minus the anchor's own row values.
    fn target(&self, rows: &Rows) -> [Hp; 4] {
        let Derived { lm, g, .. } = Derived::new(&self.params);
        let full = match self.role {
            Role::F => {
                // rho = lambda mu gamma e^{-gamma s}
                let rho0 = &lm * &g;
                let third = -(&lm * &lm * &g * &rho0) / &rows.p - &g * &rho0 * 2.0;
                [Hp::one(), Hp::zero(), third, Hp::zero()]
            }
            Role::G => [Hp::zero(), Hp::one(), Hp::zero(), Hp::zero()],
        };
        if !self.anchored {
            return full;
        }
        let t = self.t;
        let a0: [Hp; 4] = std::array::from_fn(|d| self.anchor_d(0.0, d) + self.anchor_excess(0.0, d));
        let at: [Hp; 4] = std::array::from_fn(|d| self.anchor_d(t, d) + self.anchor_excess(t, d));
        let sub = rows.apply(&a0, &at);
        let [f0, f1, f2, f3] = full;
        let [s0, s1, s2, s3] = sub;
        [f0 - s0, f1 - s1, f2 - s2, f3 - s3]
    }

    pub(crate) fn delta_hp(&self, s: f64, order: usize) -> Result<Hp> {
        if order > 3 {
            return Err(Error::Unsupported(format!("derivative order {order} > 3")));
        }
        if s < -1e-12 * self.t || s > self.t * (1.0 + 1e-12) {
            return Err(Error::DomainError { lag: s });
        }
        if self.exact_free {
            return Ok(Hp::zero());
        }
        let b = self.basis(s, order);
        let lin: Hp = (0..4).map(|i| &self.coef[i] * &b[i]).sum();
        Ok(if self.anchored {
            lin + self.anchor_excess(s, order)
        } else {
            lin - self.anchor_d(s, order)
        })
    }

    /// Deviation from the anchor, d-th derivative.
    pub fn delta(&self, s: f64, order: usize) -> Result<Complex> {
        Ok(self.delta_hp(s, order)?.to_c())
    }

    pub fn eval(&self, s: f64, order: usize) -> Result<Complex> {
        Ok((self.anchor_d(s, order) + self.delta_hp(s, order)?).to_c())
    }

    pub fn anchor(&self) -> (f64, f64) {
        self.role.anchor(self.t)
    }

    /// int_0^t D(0,s) e(s) ds from the boundary identity
    /// (e''(0) + a e(0) - rho(0)) / (2P).
    pub fn kernel_moment(&self) -> Result<Complex> {
        Ok(self.kernel_moment_hp()?.to_c())
    }

    pub(crate) fn kernel_moment_hp(&self) -> Result<Hp> {
        let p = &self.params;
        if self.exact_free {
            let g = p.gamma;
            let (a, b) = self.anchor();
            // int (g/2) e^{-g s} (a + b s) ds
            let e = (-g * self.t).exp();
            let m0 = 0.5 * (1.0 - e);
            let m1 = 0.5 * ((1.0 - e) / g - self.t * e);
            return Ok(Hp::real(a * m0 + b * m1));
        }
        let rows = self.rows.as_ref().expect("rows set when lambda > 0");
        let Derived { lm, g, .. } = Derived::new(p);
        let rho0 = if self.role == Role::F { lm * g } else { Hp::zero() };
        let e0 = self.anchor_d(0.0, 0) + self.delta_hp(0.0, 0)?;
        Ok((self.delta_hp(0.0, 2)? + &rows.a * e0 - rho0) / (&rows.p * 2.0))
    }

    pub fn values_on(&self, grid: &[f64]) -> Result<Vec<Complex>> {
        grid.iter().map(|&s| self.eval(s, 0)).collect()
    }

    /// Substitutes the solution into the integro-differential equation at
    /// `nodes` interior points (integrals by composite Gauss, split at s).
    /// Returns max |residual| / max (sum of |terms|).
    pub fn equation_residual(&self, nodes: usize, panels: usize) -> Result<f64> {
        let p = &self.params;
        let kernel = CorrelationKernel::exponential(p.gamma);
        let b = DriftKernelB::new(*p, &kernel);
        let (m, lm, t) = (p.m, p.lm(), self.t);
        let err = std::cell::Cell::new(None);
        let grab = |r: Result<Complex>| {
            r.unwrap_or_else(|e| {
                err.set(Some(e));
                Complex::new(0.0, 0.0)
            })
        };
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for k in 1..=nodes {
            let s = t * k as f64 / (nodes + 1) as f64;
            let kin = self.eval(s, 2)? * (0.5 * m);
            let local = self.eval(s, 0)? * (0.5 * m * (p.omega_eff_sq() + 4.0 * lm * kernel.eval(s, s)?));
            let integrand = |r: f64, bv: Result<Complex>| -> Complex {
                let e = grab(self.eval(r, 0));
                let edge = kernel.edge_derivative(r, s).unwrap_or(0.0);
                (grab(bv) * -0.5 - Complex::new(m * lm * edge, 0.0)) * e
            };
            let left = gauss_composite_c(0.0, s, panels, |r| integrand(r, b.eval(r, s)));
            let right = gauss_composite_c(s, t, panels, |r| integrand(r, b.eval(s, r)));
            let forcing = match self.role {
                Role::F => Complex::new(m * lm * kernel.eval(0.0, s)?, 0.0),
                Role::G => Complex::new(0.0, 0.0),
            };
            if let Some(e) = err.take() {
                return Err(e);
            }
            worst = worst.max((kin + local + left + right - forcing).norm());
            scale = scale.max(kin.norm() + local.norm() + left.norm() + right.norm() + forcing.norm());
        }
        Ok(worst / scale)
    }
}
