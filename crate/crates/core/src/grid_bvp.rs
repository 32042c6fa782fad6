//! Dense grid discretization of the non-local operator
//!
//!   I[e](s) = (m/2) e'' + (m/2)(Omega^2 + 4 lm D(s,s)) e
//!             - 1/2 int_0^s B(r,s) e(r) dr - 1/2 int_s^t B(s,r) e(r) dr
//!             - m lm int_0^t dD e(r) dr
//!
//! with central differences for e'' and trapezoid weights for the integrals.
//! Works for any kernel and any omega. Solutions are carried as a linear
//! anchor plus a deviation, like the closed form; the second difference of a
//! linear function vanishes exactly, so the deviation solves
//! I_h delta = rhs - K_h anchor with zero boundary values.

use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::kernel::{drive_a, CorrelationKernel, DriftKernelB, NoisePath};
use crate::params::{Complex, ModelParams};
use crate::propagator::BoundarySolution;
use crate::quad::{d1_left, d1_right, trapezoid, uniform_grid};

const C0: Complex = Complex { re: 0.0, im: 0.0 };

pub const MIN_NODES: usize = 16;
pub const MAX_NODES: usize = 4096;
/// Relative residual above which a solve is reported as ill-conditioned.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRole {
    F,
    G,
    H,
    Z,
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub role: GridRole,
    pub grid: Vec<f64>,
    pub values: Vec<Complex>,
    /// e(s) = p + q s + delta(s)
    pub anchor: (f64, f64),
    pub delta: Vec<Complex>,
    pub slope_start: Complex,
    pub slope_end: Complex,
    pub residual: f64,
    kernel_row: Vec<f64>,
}

impl GridSolution {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["s", "re", "im"])?;
        for (s, v) in self.grid.iter().zip(&self.values) {
            wtr.write_record(&[format!("{s:e}"), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl BoundarySolution for GridSolution {
    fn horizon(&self) -> f64 {
        GridSolution::horizon(self)
    }
    fn anchor(&self) -> (f64, f64) {
        self.anchor
    }
    fn delta_slope(&self, at_end: bool) -> Result<Complex> {
        let q = self.anchor.1;
        Ok(if at_end { self.slope_end - q } else { self.slope_start - q })
    }
    fn kernel_moment(&self) -> Result<Complex> {
        let y: Vec<Complex> = self.values.iter().zip(&self.kernel_row).map(|(v, d)| v * d).collect();
        Ok(trapezoid(&self.grid, &y))
    }
    fn values_on(&self, grid: &[f64]) -> Result<Vec<Complex>> {
        let same = grid.len() == self.grid.len()
            && grid.iter().zip(&self.grid).all(|(a, b)| (a - b).abs() <= 1e-12 * self.horizon());
        if !same {
            return Err(Error::ContractViolation("grid solution requested on a different grid".into()));
        }
        Ok(self.values.clone())
    }
}

/// Operator rows 1..N-1; rows 0 and N are left zero for the boundary data.
pub fn assemble_i(p: &ModelParams, kernel: &CorrelationKernel, grid: &[f64]) -> Result<Mat<Complex>> {
    Ok(assemble(p, kernel, grid)?.0)
}

/// Full matrix plus the non-kinetic part applied to 1 and to s.
fn assemble(p: &ModelParams, kernel: &CorrelationKernel, grid: &[f64]) -> Result<(Mat<Complex>, Vec<Complex>, Vec<Complex>)> {
    let n = grid.len() - 1;
    if n < MIN_NODES {
        return Err(Error::ContractViolation(format!("grid needs N >= {MIN_NODES}, got {n}")));
    }
    let h = grid[1] - grid[0];
    if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::ContractViolation("grid must be uniform".into()));
    }
    let m = p.m;
    let lm = p.lm();
    let b = DriftKernelB::new(*p, kernel);
    let kin = m / (2.0 * h * h);

    let mut a = Mat::<Complex>::zeros(n + 1, n + 1);
    let mut k1 = vec![C0; n + 1];
    let mut ks = vec![C0; n + 1];
    if p.lambda == 0.0 {
        for i in 1..n {
            a[(i, i - 1)] = Complex::new(kin, 0.0);
            a[(i, i + 1)] = Complex::new(kin, 0.0);
            a[(i, i)] = Complex::new(-2.0 * kin + 0.5 * m * p.omega_eff_sq(), 0.0);
            k1[i] = Complex::new(0.5 * m * p.omega_eff_sq(), 0.0);
            ks[i] = k1[i] * grid[i];
        }
        return Ok((a, k1, ks));
    }

    let mut row = vec![C0; n + 1];
    for i in 1..n {
        let s = grid[i];
        row.iter_mut().for_each(|z| *z = C0);
        row[i] += 0.5 * m * (p.omega_eff_sq() + 4.0 * lm * kernel.eval(s, s)?);
        for j in 0..=n {
            let r = grid[j];
            // split trapezoid: [0, s] and [s, t] share node i
            let mut add = |wt: f64, bv: Complex| -> Result<()> {
                row[j] += wt * (-0.5 * bv - m * lm * kernel.edge_derivative(r, s)?);
                Ok(())
            };
            if j <= i {
                add(if j == 0 || j == i { 0.5 * h } else { h }, b.eval(r, s)?)?;
            }
            if j >= i {
                add(if j == i || j == n { 0.5 * h } else { h }, b.eval(s, r)?)?;
            }
        }
        for j in 0..=n {
            k1[i] += row[j];
            ks[i] += row[j] * grid[j];
            a[(i, j)] = row[j];
        }
        a[(i, i - 1)] += kin;
        a[(i, i + 1)] += kin;
        a[(i, i)] -= 2.0 * kin;
    }
    Ok((a, k1, ks))
}

/// Assembled operator on one grid, reusable for every role.
pub struct GridOperator {
    pub params: ModelParams,
    pub kernel: CorrelationKernel,
    pub grid: Vec<f64>,
    /// boundary rows set to the identity
    matrix: Mat<Complex>,
    lu: faer::linalg::solvers::PartialPivLu<Complex>,
    k_one: Vec<Complex>,
    k_s: Vec<Complex>,
    kernel_row: Vec<f64>,
}

impl GridOperator {
    pub fn new(p: &ModelParams, kernel: &CorrelationKernel, t: f64, n: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter { name: "t", reason: format!("{t} must be positive") });
        }
        if n > MAX_NODES {
            return Err(Error::ContractViolation(format!("N = {n} exceeds the cap {MAX_NODES}")));
        }
        Self::on_grid(p, kernel, uniform_grid(t, n))
    }

    pub fn on_grid(p: &ModelParams, kernel: &CorrelationKernel, grid: Vec<f64>) -> Result<Self> {
        p.validate()?;
        let (mut matrix, k_one, k_s) = assemble(p, kernel, &grid)?;
        let n = grid.len() - 1;
        for (row, col) in [(0, 0), (n, n)] {
            for j in 0..=n {
                matrix[(row, j)] = C0;
            }
            matrix[(row, col)] = Complex::new(1.0, 0.0);
        }
        let lu = matrix.partial_piv_lu();
        let kernel_row = grid.iter().map(|&s| kernel.eval(0.0, s)).collect::<Result<Vec<_>>>()?;
        Ok(GridOperator { params: *p, kernel: kernel.clone(), grid, matrix, lu, k_one, k_s, kernel_row })
    }

    pub fn n(&self) -> usize {
        self.grid.len() - 1
    }

    /// max |Im| / max |Re| over the interior rows: how far the collapse part
    /// of the operator sits above f64 rounding of the kinetic part.
    pub fn collapse_resolution(&self) -> f64 {
        let n = self.n();
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for i in 1..n {
            for j in 0..=n {
                re = re.max(self.matrix[(i, j)].re.abs());
                im = im.max(self.matrix[(i, j)].im.abs());
            }
        }
        im / re
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// I_h applied to `v` (interior rows; boundary entries are zero).
    pub fn apply(&self, v: &[Complex]) -> Vec<Complex> {
        let n = self.n();
        let mut out = vec![C0; n + 1];
        for i in 1..n {
            out[i] = (0..=n).map(|j| self.matrix[(i, j)] * v[j]).sum();
        }
        out
    }

    fn forcing(&self, role: GridRole, noise: Option<&NoisePath>, x0: f64) -> Result<Vec<Complex>> {
        let p = &self.params;
        let n = self.n();
        let mut rhs = vec![C0; n + 1];
        if matches!(role, GridRole::F | GridRole::Z) {
            for i in 0..=n {
                rhs[i] += p.m * p.lm() * self.kernel_row[i] * x0;
            }
        }
        if matches!(role, GridRole::H | GridRole::Z) {
            let w = noise.ok_or_else(|| Error::ContractViolation("h/z need a noise path".into()))?;
            if !w.same_grid(&self.grid) {
                return Err(Error::ContractViolation("noise path on a different grid".into()));
            }
            let wd = w.derivative();
            let a = drive_a(p, &self.kernel, w)?;
            let c = p.m * p.lambda.sqrt() * p.mu / 2.0;
            for i in 0..=n {
                rhs[i] += -c * wd[i] - 0.5 * a[i];
            }
        }
        Ok(rhs)
    }

    fn solve_anchored(&self, role: GridRole, rhs: Vec<Complex>, anchor: (f64, f64)) -> Result<GridSolution> {
        let n = self.n();
        let (pa, qa) = anchor;
        let mut b = Mat::<Complex>::zeros(n + 1, 1);
        for i in 1..n {
            b[(i, 0)] = rhs[i] - self.k_one[i] * pa - self.k_s[i] * qa;
        }
        let x = self.lu.solve(&b);
        let mut delta: Vec<Complex> = (0..=n).map(|i| x[(i, 0)]).collect();
        delta[0] = C0;
        delta[n] = C0;
        for z in &delta {
            crate::params::check_finite("grid solution", *z)?;
        }

        let ad = self.apply(&delta);
        let norm_a = (1..n).map(|i| (0..=n).map(|j| self.matrix[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
        let xmax = delta.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bmax = (1..n).map(|i| b[(i, 0)].norm()).fold(0.0, f64::max);
        let rmax = (1..n).map(|i| (ad[i] - b[(i, 0)]).norm()).fold(0.0, f64::max);
        let scale = norm_a * xmax + bmax;
        let residual = if scale > 0.0 { rmax / scale } else { 0.0 };
        if residual > RESIDUAL_TOL {
            return Err(Error::IllConditioned(residual));
        }

        let h = self.step();
        let values: Vec<Complex> = self.grid.iter().zip(&delta).map(|(s, d)| d + pa + qa * s).collect();
        Ok(GridSolution {
            role,
            grid: self.grid.clone(),
            values,
            anchor,
            slope_start: d1_left(&delta, h) + qa,
            slope_end: d1_right(&delta, h) + qa,
            delta,
            residual,
            kernel_row: self.kernel_row.clone(),
        })
    }

    /// f: I[f] = m lm D(0,s), f(0)=1, f(t)=0. g: I[g] = 0, g(0)=0, g(t)=1.
    /// h: I[h] = -(m sqrt(lambda) mu/2) w' - A/2, h(0)=h(t)=0.
    pub fn solve_role(&self, role: GridRole, noise: Option<&NoisePath>) -> Result<GridSolution> {
        let t = *self.grid.last().unwrap();
        let anchor = match role {
            GridRole::F => (1.0, -1.0 / t),
            GridRole::G => (0.0, 1.0 / t),
            GridRole::H => (0.0, 0.0),
            GridRole::Z => return Err(Error::ContractViolation("use solve_z for z".into())),
        };
        let rhs = self.forcing(role, noise, 1.0)?;
        self.solve_anchored(role, rhs, anchor)
    }

    /// z(0) = x0, z(t) = x; equals f x0 + g x + h.
    pub fn solve_z(&self, x0: f64, x: f64, noise: &NoisePath) -> Result<GridSolution> {
        let t = *self.grid.last().unwrap();
        let rhs = self.forcing(GridRole::Z, Some(noise), x0)?;
        self.solve_anchored(GridRole::Z, rhs, (x0, (x - x0) / t))
    }
}

pub fn solve_role(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    t: f64,
    n: usize,
    role: GridRole,
    noise: Option<&NoisePath>,
) -> Result<GridSolution> {
    GridOperator::new(p, kernel, t, n)?.solve_role(role, noise)
}

pub fn solve_z(p: &ModelParams, kernel: &CorrelationKernel, t: f64, x0: f64, x: f64, noise: &NoisePath) -> Result<GridSolution> {
    if (noise.horizon() - t).abs() > 1e-12 * t {
        return Err(Error::ContractViolation(format!("noise horizon {} != t = {t}", noise.horizon())));
    }
    GridOperator::on_grid(p, kernel, noise.times.clone())?.solve_z(x0, x, noise)
}
