//! Brute-force propagator exponent from the mid-point discretized action.
//!
//! The action is expanded as a quadratic form in (q_0, ..., q_N); the interior
//! block gives -M, the boundary columns give Y, and the Gaussian integral over
//! q_1..q_{N-1} leaves Y.M^-1 Y plus the boundary terms. Normalization
//! (det M) is never formed.

use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::closed_form::{solve_f, solve_g};
use crate::error::{Error, Result};
use crate::kernel::{drive_a, CorrelationKernel, DriftKernelB, NoisePath};
use crate::params::{Complex, ModelParams};
use crate::propagator::deterministic_coeffs;
use crate::quad::uniform_grid;

#[derive(Debug, Clone)]
pub struct DiscretizedAction {
    pub n: usize,
    pub epsilon: f64,
    /// local terms; tridiagonal
    pub mbar: Mat<Complex>,
    /// memory terms
    pub mtilde: Mat<Complex>,
    pub y_const: Vec<Complex>,
    pub y_a: Vec<Complex>,
    pub y_b: Vec<Complex>,
    /// exponent terms in the endpoints alone
    pub boundary: QuadraticExponent,
}

/// -A x0^2 - At x^2 + B x0 x + C x0 + D x + E, stored as the raw coefficient
/// of each monomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticExponent {
    pub x0x0: Complex,
    pub xx: Complex,
    pub x0x: Complex,
    pub x0: Complex,
    pub x: Complex,
    pub constant: Complex,
    pub n: usize,
}

impl QuadraticExponent {
    pub fn eval(&self, x0: f64, x: f64) -> Complex {
        self.x0x0 * x0 * x0 + self.xx * x * x + self.x0x * x0 * x + self.x0 * x0 + self.x * x + self.constant
    }

    pub fn is_finite(&self) -> bool {
        [self.x0x0, self.xx, self.x0x, self.x0, self.x, self.constant].iter().all(|z| z.is_finite())
    }
}

impl DiscretizedAction {
    pub fn m(&self) -> Mat<Complex> {
        &self.mbar + &self.mtilde
    }

    /// max |M - M^T| / max |M|
    pub fn asymmetry(&self) -> f64 {
        let m = self.m();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                num = num.max((m[(i, j)] - m[(j, i)]).norm());
                den = den.max(m[(i, j)].norm());
            }
        }
        num / den
    }

    pub fn is_tridiagonal(&self) -> bool {
        let m = &self.mbar;
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i.abs_diff(j) <= 1 || m[(i, j)] == Complex::new(0.0, 0.0)))
    }

    fn y(&self, x0: f64, x: f64) -> Vec<Complex> {
        (0..self.y_const.len()).map(|i| self.y_const[i] + self.y_a[i] * x0 + self.y_b[i] * x).collect()
    }
}

/// Accumulates c u v^T symmetrically, u and v sparse.
fn add_sym(q: &mut Mat<Complex>, c: Complex, u: &[(usize, f64)], v: &[(usize, f64)]) {
    for &(i, a) in u {
        for &(j, b) in v {
            let z = c * (0.5 * a * b);
            q[(i, j)] += z;
            q[(j, i)] += z;
        }
    }
}

pub fn build_action(p: &ModelParams, kernel: &CorrelationKernel, t: f64, n: usize, noise: Option<&NoisePath>) -> Result<DiscretizedAction> {
    if n < 4 {
        return Err(Error::InvalidParameter { name: "N", reason: format!("{n} < 4") });
    }
    let grid = uniform_grid(t, n);
    let eps = t / n as f64;
    let (m, lm) = (p.m, p.lm());
    let zero = Complex::new(0.0, 0.0);
    let real = |v: f64| Complex::new(v, 0.0);

    let (w, a_drive) = match noise {
        Some(w) => {
            if !w.same_grid(&grid) {
                return Err(Error::ContractViolation("noise not sampled on the oracle grid".into()));
            }
            (w.values.clone(), drive_a(p, kernel, w)?)
        }
        None => (vec![0.0; n + 1], vec![zero; n + 1]),
    };
    let w2: Vec<f64> = w.iter().map(|v| v * v).collect();

    let mut local = Mat::<Complex>::zeros(n + 1, n + 1);
    let mut memory = Mat::<Complex>::zeros(n + 1, n + 1);
    let mut lin = vec![zero; n + 1];
    let u = |k: usize| [(k, 1.0), (k - 1, 1.0)];
    let v = |k: usize| [(k, 1.0), (k - 1, -1.0)];
    let bk = DriftKernelB::new(*p, kernel);
    let slm = p.lambda.sqrt() * p.mu;

    for k in 1..=n {
        add_sym(&mut local, real(m / (2.0 * eps)), &v(k), &v(k));
        add_sym(&mut local, real(-0.5 * m * lm), &u(k), &v(k));
        add_sym(&mut local, real(-eps * m * p.omega_eff_sq() / 8.0), &u(k), &u(k));
        let drive = real(m * slm * w[k]);
        lin[k] += drive;
        lin[k - 1] -= drive;
        let half = -a_drive[k] * (0.5 * eps);
        lin[k] += half;
        lin[k - 1] += half;
        if p.lambda == 0.0 {
            continue;
        }
        for j in 1..=k {
            let b = bk.eval(grid[j], grid[k])?;
            let d = kernel.eval(grid[j], grid[k])?;
            add_sym(&mut memory, b * (eps * eps / 4.0), &u(k), &u(j));
            // q(s) int D qdot dr: the inner factor is a difference
            add_sym(&mut memory, real(-eps * m * lm * d), &u(k), &v(j));
        }
    }

    let iu = Complex::new(0.0, 1.0 / p.hbar);
    let inner = n - 1;
    let mut mbar = Mat::<Complex>::zeros(inner, inner);
    let mut mtilde = Mat::<Complex>::zeros(inner, inner);
    for i in 0..inner {
        for j in 0..inner {
            mbar[(i, j)] = -iu * local[(i + 1, j + 1)];
            mtilde[(i, j)] = -iu * memory[(i + 1, j + 1)];
        }
    }
    let q = |i: usize, j: usize| iu * (local[(i, j)] + memory[(i, j)]);
    let y_a = (1..n).map(|i| q(i, 0)).collect();
    let y_b = (1..n).map(|i| q(i, n)).collect();
    let y_const = (1..n).map(|i| iu * lin[i] * 0.5).collect();
    let boundary = QuadraticExponent {
        x0x0: q(0, 0),
        xx: q(n, n),
        x0x: q(0, n) * 2.0,
        x0: iu * lin[0],
        x: iu * lin[n],
        // q-independent (m lambda mu^2 / 2) w^2 term of the action
        constant: iu * (0.5 * m * p.lambda * p.mu * p.mu * crate::quad::trapezoid_real(&grid, &w2)),
        n,
    };
    Ok(DiscretizedAction { n, epsilon: eps, mbar, mtilde, y_const, y_a, y_b, boundary })
}

fn dot(a: &[Complex], b: &Mat<Complex>, col: usize) -> Complex {
    a.iter().enumerate().map(|(i, z)| z * b[(i, col)]).sum()
}

/// Gaussian integral over the interior points; returns the exponent.
pub fn integrate(action: &DiscretizedAction) -> Result<QuadraticExponent> {
    let m = action.m();
    let k = m.nrows();
    let lu = m.partial_piv_lu();
    let mut rhs = Mat::<Complex>::zeros(k, 3);
    for i in 0..k {
        rhs[(i, 0)] = action.y_a[i];
        rhs[(i, 1)] = action.y_b[i];
        rhs[(i, 2)] = action.y_const[i];
    }
    let sol = lu.solve(&rhs);
    // residual guards against a singular M slipping through the LU
    let res = &m * &sol - &rhs;
    if !(res.norm_max() <= 1e-8 * (m.norm_max() * sol.norm_max() + rhs.norm_max())) {
        return Err(Error::SingularAction);
    }
    let (ya, yb, yc) = (&action.y_a, &action.y_b, &action.y_const);
    let b = &action.boundary;
    let out = QuadraticExponent {
        x0x0: b.x0x0 + dot(ya, &sol, 0),
        xx: b.xx + dot(yb, &sol, 1),
        x0x: b.x0x + dot(ya, &sol, 1) * 2.0,
        x0: b.x0 + dot(yc, &sol, 0) * 2.0,
        x: b.x + dot(yc, &sol, 1) * 2.0,
        constant: b.constant + dot(yc, &sol, 2),
        n: action.n,
    };
    if !out.is_finite() {
        return Err(Error::SingularAction);
    }
    Ok(out)
}

/// Full exponent Y.M^-1 Y + boundary at one endpoint pair, by a direct solve.
pub fn exponent_at(action: &DiscretizedAction, x0: f64, x: f64) -> Result<Complex> {
    let m = action.m();
    let y = action.y(x0, x);
    let mut rhs = Mat::<Complex>::zeros(y.len(), 1);
    for (i, z) in y.iter().enumerate() {
        rhs[(i, 0)] = *z;
    }
    let sol = m.partial_piv_lu().solve(&rhs);
    let b = &action.boundary;
    Ok(dot(&y, &sol, 0) + b.eval(x0, x))
}

pub fn oracle(p: &ModelParams, kernel: &CorrelationKernel, t: f64, n: usize, noise: Option<&NoisePath>) -> Result<QuadraticExponent> {
    integrate(&build_action(p, kernel, t, n, noise)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub coef_name: &'static str,
    pub err: Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn errors(&self, name: &str) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.coef_name == name).map(|r| (r.n, r.err.norm())).collect()
    }

    pub fn is_monotone(&self) -> bool {
        ["A", "Atilde", "B"].iter().all(|name| self.errors(name).windows(2).all(|w| w[1].1 < w[0].1))
    }

    /// Least-squares slope of -log(err) against log(N).
    pub fn observed_order(&self, name: &str) -> f64 {
        let pts: Vec<(f64, f64)> = self.errors(name).iter().map(|&(n, e)| ((n as f64).ln(), -e.ln())).collect();
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / k, sy / k);
        let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        num / den
    }

    /// `N,coef_name,re_err,im_err`
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["N", "coef_name", "re_err", "im_err"])?;
        for r in &self.rows {
            wtr.write_record(&[r.n.to_string(), r.coef_name.to_string(), format!("{:e}", r.err.re), format!("{:e}", r.err.im)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Oracle minus the closed-form (-A, -Atilde, B) for each N, no noise.
pub fn compare_to_analytic(p: &ModelParams, kernel: &CorrelationKernel, t: f64, ns: &[usize]) -> Result<ConvergenceReport> {
    if !kernel.is_exponential() || p.omega != 0.0 {
        return Err(Error::UnsupportedRegime("analytic comparison needs the exponential kernel and omega = 0".into()));
    }
    let c = deterministic_coeffs(p, &solve_f(p, t)?, &solve_g(p, t)?)?;
    let mut rows = Vec::new();
    for &n in ns {
        let q = oracle(p, kernel, t, n, None)?;
        for (name, got, want) in [("A", q.x0x0, -c.a), ("Atilde", q.xx, -c.atilde), ("B", q.x0x, c.b)] {
            rows.push(ConvergenceRow { n, coef_name: name, err: got - want });
        }
    }
    Ok(ConvergenceReport { rows })
}
