//! The six Green's-function coefficients.
//!
//! Deterministic part, with k = i m / (2 hbar):
//!   A      = k (f'(0) - lm - 2 lm int D(0,s) f)
//!   Atilde = -k (g'(t) - lm)
//!   B      = k (f'(t) - g'(0) + 2 lm int D(0,s) g)
//! where lm = lambda mu. In SI the free-particle part of each is ~1e15 times
//! the part that sets the spread, so everything is carried as anchor value
//! plus deviation and G = 4 Atilde A - B^2 is formed from the deviations.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hp::Hp;
use crate::kernel::{drive_a, CorrelationKernel, NoisePath};
use crate::params::{Complex, ModelParams};
use crate::quad::trapezoid;

/// What the propagator needs from a solved f or g.
pub trait BoundarySolution {
    fn horizon(&self) -> f64;
    /// e0(s) = p + q s, exact part of the solution.
    fn anchor(&self) -> (f64, f64);
    /// Deviation slope e'(s) - q at s = 0 (`at_end = false`) or s = t.
    fn delta_slope(&self, at_end: bool) -> Result<Complex>;
    /// int_0^t D(0,s) e(s) ds
    fn kernel_moment(&self) -> Result<Complex>;
    fn values_on(&self, grid: &[f64]) -> Result<Vec<Complex>>;
    fn delta_slope_hp(&self, at_end: bool) -> Result<Hp> {
        Ok(Hp::from_c(self.delta_slope(at_end)?))
    }
    fn kernel_moment_hp(&self) -> Result<Hp> {
        Ok(Hp::from_c(self.kernel_moment()?))
    }
}

impl BoundarySolution for crate::closed_form::ClosedFormSolution {
    fn horizon(&self) -> f64 {
        self.t
    }
    fn anchor(&self) -> (f64, f64) {
        crate::closed_form::ClosedFormSolution::anchor(self)
    }
    fn delta_slope(&self, at_end: bool) -> Result<Complex> {
        self.delta(if at_end { self.t } else { 0.0 }, 1)
    }
    fn kernel_moment(&self) -> Result<Complex> {
        crate::closed_form::ClosedFormSolution::kernel_moment(self)
    }
    fn values_on(&self, grid: &[f64]) -> Result<Vec<Complex>> {
        crate::closed_form::ClosedFormSolution::values_on(self, grid)
    }
    fn delta_slope_hp(&self, at_end: bool) -> Result<Hp> {
        self.delta_hp(if at_end { self.t } else { 0.0 }, 1)
    }
    fn kernel_moment_hp(&self) -> Result<Hp> {
        crate::closed_form::ClosedFormSolution::kernel_moment_hp(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorCoeffs {
    pub t: f64,
    pub k: Complex,
    pub a: Complex,
    pub atilde: Complex,
    pub b: Complex,
    pub c: Complex,
    pub d: Complex,
    pub e: Complex,
    /// 4 Atilde A - B^2, from deviations
    pub gram: Complex,
}

impl PropagatorCoeffs {
    pub fn with_stochastic(mut self, (c, d, e): (Complex, Complex, Complex)) -> Self {
        self.c = c;
        self.d = d;
        self.e = e;
        self
    }
}

pub fn deterministic_coeffs(
    p: &ModelParams,
    f: &dyn BoundarySolution,
    g: &dyn BoundarySolution,
) -> Result<PropagatorCoeffs> {
    let t = f.horizon();
    if (g.horizon() - t).abs() > 1e-12 * t {
        return Err(Error::ContractViolation(format!("f horizon {t} != g horizon {}", g.horizon())));
    }
    let lm = Hp::real(p.lambda) * p.mu;
    let k = p.k();
    let (_, qf) = f.anchor();
    let (_, qg) = g.anchor();

    let (a0, at0, b0) = (Hp::real(qf), Hp::real(-qg), Hp::real(qf - qg));
    let da = f.delta_slope_hp(false)? - &lm - &lm * f.kernel_moment_hp()? * 2.0;
    let dat = &lm - g.delta_slope_hp(true)?;
    let db = f.delta_slope_hp(true)? - g.delta_slope_hp(false)? + &lm * g.kernel_moment_hp()? * 2.0;

    // 4 a0 at0 - b0^2 = -(qf + qg)^2, zero for the standard anchors
    let delta0 = Hp::real(-(qf + qg) * (qf + qg));
    let delta = delta0 + (&at0 * &da + &dat * &a0) * 4.0 - &db * &b0 * 2.0 + &da * &dat * 4.0 - &db * &db;

    let out = PropagatorCoeffs {
        t,
        k,
        a: k * (a0 + da).to_c(),
        atilde: k * (at0 + dat).to_c(),
        b: k * (b0 + db).to_c(),
        c: Complex::new(0.0, 0.0),
        d: Complex::new(0.0, 0.0),
        e: Complex::new(0.0, 0.0),
        gram: k * k * delta.to_c(),
    };
    for (name, z) in [("A", out.a), ("Atilde", out.atilde), ("B", out.b), ("G", out.gram)] {
        crate::params::check_finite(name, z)?;
    }
    Ok(out)
}

/// Noise-driven coefficients C, D, E on the noise path's grid; `h` must have
/// been solved on the same grid.
pub fn stochastic_coeffs(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    f: &dyn BoundarySolution,
    g: &dyn BoundarySolution,
    h: &crate::grid_bvp::GridSolution,
    w: &NoisePath,
) -> Result<(Complex, Complex, Complex)> {
    let grid = &w.times;
    if !w.same_grid(&h.grid) {
        return Err(Error::ContractViolation("h and noise path on different grids".into()));
    }
    if (f.horizon() - w.horizon()).abs() > 1e-12 * w.horizon() || (g.horizon() - w.horizon()).abs() > 1e-12 * w.horizon() {
        return Err(Error::ContractViolation("f/g horizon differs from the noise path".into()));
    }
    let k = p.k();
    let (lm, sl) = (p.lm(), p.lambda.sqrt());
    let slm = sl * p.mu;
    let fv = f.values_on(grid)?;
    let gv = g.values_on(grid)?;
    let hv = &h.values;
    let wd = w.derivative();
    let a = drive_a(p, kernel, w)?;
    let n = grid.len() - 1;

    let integ = |e: &[Complex], with: &dyn Fn(usize) -> Complex| -> Complex {
        let y: Vec<Complex> = (0..=n).map(|i| with(i) * e[i]).collect();
        trapezoid(grid, &y)
    };
    let wdot = |i: usize| Complex::new(wd[i], 0.0);
    let drive = |i: usize| a[i] / p.m;
    let d0 = kernel_row(kernel, grid)?;
    let dk = |i: usize| Complex::new(d0[i], 0.0);

    let w0 = w.values[0];
    let wt = w.values[n];
    let w2: Vec<Complex> = w.values.iter().map(|v| Complex::new(v * v, 0.0)).collect();

    let c = -k
        * (h.slope_start + 2.0 * slm * w0 + slm * integ(&fv, &wdot) + integ(&fv, &drive)
            - 2.0 * lm * integ(hv, &dk));
    let d = k * (h.slope_end + 2.0 * slm * wt - slm * integ(&gv, &wdot) - integ(&gv, &drive));
    let e = -k * (slm * integ(hv, &wdot) + integ(hv, &drive) - lm * p.mu * trapezoid(grid, &w2));
    Ok((c, d, e))
}

/// Below this ratio of collapse to kinetic operator entries the grid's f64
/// solve cannot carry the parts that set the spread.
pub const MIN_GRID_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// closed form for f, g (exponential kernel, omega = 0); h always on the grid
    Closed,
    Grid,
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Solver::Closed),
            "grid" => Ok(Solver::Grid),
            other => Err(Error::Config(format!("unknown solver {other:?} (closed|grid)"))),
        }
    }
}

/// All six coefficients at the noise path's horizon, h solved on its grid.
pub fn coefficients(p: &ModelParams, kernel: &CorrelationKernel, w: &NoisePath, solver: Solver) -> Result<PropagatorCoeffs> {
    let op = crate::grid_bvp::GridOperator::on_grid(p, kernel, w.times.clone())?;
    let h = op.solve_role(crate::grid_bvp::GridRole::H, Some(w))?;
    let t = w.horizon();
    match solver {
        Solver::Closed => {
            if !kernel.is_exponential() {
                return Err(Error::UnsupportedRegime("closed form needs the exponential kernel".into()));
            }
            let f = crate::closed_form::solve_f(p, t)?;
            let g = crate::closed_form::solve_g(p, t)?;
            let c = deterministic_coeffs(p, &f, &g)?;
            Ok(c.with_stochastic(stochastic_coeffs(p, kernel, &f, &g, &h, w)?))
        }
        Solver::Grid => {
            if p.lambda > 0.0 && op.collapse_resolution() < MIN_GRID_RESOLUTION {
                return Err(Error::UnsupportedRegime(format!(
                    "collapse terms are {:.1e} of the kinetic terms, below what the f64 grid resolves; use the closed form",
                    op.collapse_resolution()
                )));
            }
            let f = op.solve_role(crate::grid_bvp::GridRole::F, None)?;
            let g = op.solve_role(crate::grid_bvp::GridRole::G, None)?;
            let c = deterministic_coeffs(p, &f, &g)?;
            Ok(c.with_stochastic(stochastic_coeffs(p, kernel, &f, &g, &h, w)?))
        }
    }
}

fn kernel_row(kernel: &CorrelationKernel, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&s| kernel.eval(0.0, s)).collect()
}

/// Coefficient dump: `t,re_A,im_A,...,re_E,im_E`.
pub fn write_coeffs_csv<P: AsRef<Path>>(path: P, rows: &[PropagatorCoeffs]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for name in ["A", "Atilde", "B", "C", "D", "E"] {
        header.push(format!("re_{name}"));
        header.push(format!("im_{name}"));
    }
    wtr.write_record(&header)?;
    for c in rows {
        let mut rec = vec![format!("{:e}", c.t)];
        for z in [c.a, c.atilde, c.b, c.c, c.d, c.e] {
            rec.push(format!("{:e}", z.re));
            rec.push(format!("{:e}", z.im));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
