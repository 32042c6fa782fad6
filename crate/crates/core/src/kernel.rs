//! Noise correlation kernels, the drift kernel B(r,s), colored-noise paths
//! and the noise drive A(s).

use std::path::Path;

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::params::{Complex, ModelParams};
use crate::quad::{gauss_composite, trapezoid_real};

/// Stationary correlation profile c(tau) sampled at tau = k dt.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTable {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl LagTable {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lag table",
                reason: "need dt > 0 and at least two finite values".into(),
            });
        }
        Ok(LagTable { dt, values })
    }

    /// Tabulates another kernel's profile up to `max_lag`.
    pub fn from_kernel(kernel: &CorrelationKernel, dt: f64, max_lag: f64) -> Result<Self> {
        let n = (max_lag / dt).ceil() as usize;
        let values = (0..=n).map(|k| kernel.eval(0.0, k as f64 * dt)).collect::<Result<Vec<_>>>()?;
        LagTable::new(dt, values)
    }

    pub fn max_lag(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    fn segment(&self, tau: f64) -> Result<(usize, f64)> {
        let max = self.max_lag();
        if tau > max * (1.0 + 1e-12) {
            return Err(Error::DomainError { lag: tau });
        }
        let x = (tau / self.dt).min((self.values.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.values.len() - 2);
        Ok((k, x - k as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationKernel {
    /// (gamma/2) exp(-gamma |t-s|)
    Exponential { gamma: f64 },
    /// Gaussian nascent delta (gamma/sqrt(pi)) exp(-gamma^2 (t-s)^2)
    DeltaApprox { gamma: f64 },
    Tabulated(LagTable),
}

impl CorrelationKernel {
    pub fn exponential(gamma: f64) -> Self {
        CorrelationKernel::Exponential { gamma }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, CorrelationKernel::Exponential { .. })
    }

    fn profile(&self, tau: f64) -> Result<f64> {
        match self {
            CorrelationKernel::Exponential { gamma } => Ok(0.5 * gamma * (-gamma * tau).exp()),
            CorrelationKernel::DeltaApprox { gamma } => {
                Ok(gamma / std::f64::consts::PI.sqrt() * (-(gamma * tau).powi(2)).exp())
            }
            CorrelationKernel::Tabulated(tab) => {
                let (k, frac) = tab.segment(tau)?;
                Ok(tab.values[k] * (1.0 - frac) + tab.values[k + 1] * frac)
            }
        }
    }

    /// Right derivative c'(tau+) of the profile.
    fn profile_slope(&self, tau: f64) -> Result<f64> {
        match self {
            CorrelationKernel::Exponential { gamma } => Ok(-gamma * self.profile(tau)?),
            CorrelationKernel::DeltaApprox { gamma } => Ok(-2.0 * gamma * gamma * tau * self.profile(tau)?),
            CorrelationKernel::Tabulated(tab) => {
                let (k, _) = tab.segment(tau)?;
                Ok((tab.values[k + 1] - tab.values[k]) / tab.dt)
            }
        }
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        self.profile((t - s).abs())
    }

    /// The kernel derivative entering the operator: d/dr D(r,s) for r < s and
    /// d/ds D(r,s) for r > s. Both equal -c'(|r-s|); at r = s the one-sided
    /// limit from inside each sub-interval is used.
    pub fn edge_derivative(&self, r: f64, s: f64) -> Result<f64> {
        Ok(-self.profile_slope((r - s).abs())?)
    }

    /// Lag beyond which the kernel vanishes (or is undefined).
    pub fn support(&self) -> f64 {
        match self {
            CorrelationKernel::Exponential { .. } => f64::INFINITY,
            CorrelationKernel::DeltaApprox { gamma } => 6.5 / gamma,
            CorrelationKernel::Tabulated(tab) => tab.max_lag(),
        }
    }

    fn resolution(&self) -> f64 {
        match self {
            CorrelationKernel::Exponential { gamma } | CorrelationKernel::DeltaApprox { gamma } => 0.5 / gamma,
            CorrelationKernel::Tabulated(tab) => tab.dt,
        }
    }

    /// int_0^r D(r,r') D(s,r') dr'.
    pub fn inner_integral(&self, r: f64, s: f64) -> Result<f64> {
        if let CorrelationKernel::Exponential { gamma: g } = *self {
            let mut v = g / 8.0 * ((-g * (r - s).abs()).exp() - (-g * (r + s)).exp());
            if r > s {
                v += 0.25 * g * g * (r - s) * (-g * (r - s)).exp();
            }
            return Ok(v);
        }
        let lo = (r.max(s) - self.support()).max(0.0);
        if lo >= r {
            return Ok(0.0);
        }
        let res = self.resolution();
        let mut pieces = vec![lo, r];
        if s > lo && s < r {
            pieces.insert(1, s);
        }
        let mut acc = 0.0;
        let mut err = None;
        for w in pieces.windows(2) {
            let panels = ((w[1] - w[0]) / res).ceil() as usize;
            acc += gauss_composite(w[0], w[1], panels.clamp(1, 1 << 16), |x| {
                match (self.eval(r, x), self.eval(s, x)) {
                    (Ok(a), Ok(b)) => a * b,
                    (Err(e), _) | (_, Err(e)) => {
                        err = Some(e);
                        0.0
                    }
                }
            });
        }
        if let Some(e) = err {
            return Err(e);
        }
        if !acc.is_finite() {
            return Err(Error::Numerics(format!("inner integral at ({r}, {s}) not finite")));
        }
        Ok(acc)
    }

    /// Covariance matrix D(t_i, t_j), row-major.
    pub fn covariance(&self, grid: &[f64]) -> Result<Mat<f64>> {
        let n = grid.len();
        let mut c = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(grid[i], grid[j])?;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        Ok(c)
    }

    /// Smallest eigenvalue of the covariance matrix and its trace.
    pub fn covariance_spectrum(&self, grid: &[f64]) -> Result<(f64, f64)> {
        let c = self.covariance(grid)?;
        let trace: f64 = (0..grid.len()).map(|i| c[(i, i)]).sum();
        let eig = c
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerics(format!("eigendecomposition failed: {e:?}")))?;
        let min = eig.S().column_vector().iter().cloned().fold(f64::INFINITY, f64::min);
        Ok((min, trace))
    }
}

/// B(r,s) = (2 m lambda^2 mu^2 + 2 i hbar lambda) D(r,s)
///        + 4 m lambda^2 mu^2 int_0^r D(r,r') D(s,r') dr'.
#[derive(Debug, Clone)]
pub struct DriftKernelB<'a> {
    pub params: ModelParams,
    pub kernel: &'a CorrelationKernel,
}

impl<'a> DriftKernelB<'a> {
    pub fn new(params: ModelParams, kernel: &'a CorrelationKernel) -> Self {
        DriftKernelB { params, kernel }
    }

    pub fn eval(&self, r: f64, s: f64) -> Result<Complex> {
        let p = &self.params;
        let lm2 = p.lm() * p.lm();
        let d = self.kernel.eval(r, s)?;
        let front = Complex::new(2.0 * p.m * lm2, 2.0 * p.hbar * p.lambda) * d;
        if lm2 == 0.0 {
            return Ok(front);
        }
        Ok(front + 4.0 * p.m * lm2 * self.kernel.inner_integral(r, s)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
}

impl NoisePath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::ContractViolation("noise path needs matching times/values, >= 2 nodes".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::ContractViolation("noise grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("noise values must be finite".into()));
        }
        Ok(NoisePath { times, values, seed })
    }

    pub fn zeros(times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![0.0; n], None)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        NoisePath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            seed: self.seed,
        }
    }

    /// Central differences inside, one-sided at the ends.
    pub fn derivative(&self) -> Vec<f64> {
        let (t, w) = (&self.times, &self.values);
        let n = t.len() - 1;
        let mut d = vec![0.0; n + 1];
        d[0] = (w[1] - w[0]) / (t[1] - t[0]);
        d[n] = (w[n] - w[n - 1]) / (t[n] - t[n - 1]);
        for k in 1..n {
            d[k] = (w[k + 1] - w[k - 1]) / (t[k + 1] - t[k - 1]);
        }
        d
    }

    pub fn same_grid(&self, grid: &[f64]) -> bool {
        let tol = 1e-12 * self.horizon().abs().max(f64::MIN_POSITIVE);
        self.times.len() == grid.len() && self.times.iter().zip(grid).all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["time", "w"])?;
        for (t, w) in self.times.iter().zip(&self.values) {
            wtr.write_record([format!("{t:e}"), format!("{w:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["time", "w"] {
            return Err(Error::Io(format!("expected header time,w, got {headers:?}")));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].trim().parse().map_err(|_| Error::Io(format!("bad number '{}'", &rec[i])))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        NoisePath::new(times, values, None)
    }
}

/// Factored covariance of a kernel on a fixed grid.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    grid: Vec<f64>,
    factor: Mat<f64>,
}

impl NoiseSampler {
    /// Eigen-factorization with clamping of eigenvalues in [-1e-12 trace, 0).
    pub fn new(kernel: &CorrelationKernel, grid: &[f64]) -> Result<Self> {
        let c = kernel.covariance(grid)?;
        let n = grid.len();
        let trace: f64 = (0..n).map(|i| c[(i, i)]).sum();
        let eig = c
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerics(format!("eigendecomposition failed: {e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 * trace {
            return Err(Error::KernelNotPsd { min_eig: min, trace });
        }
        let factor = Mat::from_fn(n, n, |i, j| u[(i, j)] * s[j].max(0.0).sqrt());
        Ok(NoiseSampler { grid: grid.to_vec(), factor })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.grid.len();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        (0..n).map(|i| (0..n).map(|j| self.factor[(i, j)] * z[j]).sum()).collect()
    }

    pub fn sample(&self, seed: u64) -> NoisePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NoisePath { times: self.grid.clone(), values: self.draw(&mut rng), seed: Some(seed) }
    }

    /// `count` paths from one seeded stream.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }
}

pub fn sample_noise(kernel: &CorrelationKernel, grid: &[f64], seed: u64) -> Result<NoisePath> {
    NoisePath::new(grid.to_vec(), vec![0.0; grid.len()], None)?;
    Ok(NoiseSampler::new(kernel, grid)?.sample(seed))
}

/// One exponential-kernel (Ornstein-Uhlenbeck) path on arbitrary strictly
/// increasing times, sampled exactly by the Markov recursion.
pub fn sample_exponential_path(gamma: f64, times: &[f64], seed: u64) -> Result<NoisePath> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter { name: "gamma", reason: format!("{gamma} must be > 0") });
    }
    let var = 0.5 * gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(times.len());
    let mut prev: Option<(f64, f64)> = None;
    for &t in times {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = match prev {
            None => var.sqrt() * z,
            Some((t0, w0)) => {
                let rho = (-gamma * (t - t0)).exp();
                rho * w0 + (var * (1.0 - rho * rho)).sqrt() * z
            }
        };
        values.push(v);
        prev = Some((t, v));
    }
    NoisePath::new(times.to_vec(), values, Some(seed))
}

/// A(s_k) at every node of the path; memory term by trapezoid on the path grid.
pub fn drive_a(p: &ModelParams, kernel: &CorrelationKernel, w: &NoisePath) -> Result<Vec<Complex>> {
    let sl = p.lambda.sqrt();
    let c_mem = 2.0 * p.m * p.lambda.powf(1.5) * p.mu * p.mu;
    let c_loc = p.m * p.lambda.powf(1.5) * p.mu * p.mu;
    let mut out = Vec::with_capacity(w.times.len());
    let mut buf = Vec::with_capacity(w.times.len());
    for k in 0..w.times.len() {
        let sk = w.times[k];
        let mem = if c_mem == 0.0 || k == 0 {
            0.0
        } else {
            buf.clear();
            for j in 0..=k {
                buf.push(kernel.eval(w.times[j], sk)? * w.values[j]);
            }
            trapezoid_real(&w.times[..=k], &buf)
        };
        out.push(Complex::new(c_loc * w.values[k] + c_mem * mem, p.hbar * sl * w.values[k]));
    }
    Ok(out)
}

/// A(s) at a node of the path grid.
pub fn drive_a_at(p: &ModelParams, kernel: &CorrelationKernel, w: &NoisePath, s: f64) -> Result<Complex> {
    let tol = 1e-12 * w.horizon();
    let k = w
        .times
        .iter()
        .position(|&t| (t - s).abs() <= tol)
        .ok_or(Error::DomainError { lag: s })?;
    let head = NoisePath { times: w.times[..=k.max(1)].to_vec(), values: w.values[..=k.max(1)].to_vec(), seed: w.seed };
    Ok(drive_a(p, kernel, &head)?[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::uniform_grid;
    use rand::Rng;

    fn exp_kernel() -> CorrelationKernel {
        CorrelationKernel::exponential(2.0)
    }

    fn trap_inner(k: &CorrelationKernel, r: f64, s: f64, n: usize) -> f64 {
        // split at the kink r' = s
        let mut acc = 0.0;
        let cut = if s < r { vec![0.0, s, r] } else { vec![0.0, r] };
        for w in cut.windows(2) {
            let x = uniform_grid(w[1] - w[0], n).iter().map(|x| x + w[0]).collect::<Vec<_>>();
            let y: Vec<f64> = x.iter().map(|&x| k.eval(r, x).unwrap() * k.eval(s, x).unwrap()).collect();
            acc += trapezoid_real(&x, &y);
        }
        acc
    }

    #[test]
    fn exponential_values() {
        let k = exp_kernel();
        assert_eq!(k.eval(0.3, 0.3).unwrap(), 1.0);
        assert!((k.eval(1.0, 0.5).unwrap() - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernels = [exp_kernel(), CorrelationKernel::DeltaApprox { gamma: 3.0 }];
        for k in &kernels {
            for _ in 0..1000 {
                let (t, s): (f64, f64) = (rng.gen::<f64>() * 5.0, rng.gen::<f64>() * 5.0);
                assert_eq!(k.eval(t, s).unwrap(), k.eval(s, t).unwrap());
            }
        }
    }

    #[test]
    fn exponential_unit_integral() {
        let k = exp_kernel();
        let v = 2.0 * gauss_composite(0.0, 40.0, 400, |x| k.eval(x, 0.0).unwrap());
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_domain_and_interpolation() {
        let tab = LagTable::from_kernel(&exp_kernel(), 0.01, 2.0).unwrap();
        let k = CorrelationKernel::Tabulated(tab);
        assert!(matches!(k.eval(0.0, 2.5), Err(Error::DomainError { .. })));
        assert!((k.eval(0.0, 0.505).unwrap() - exp_kernel().eval(0.0, 0.505).unwrap()).abs() < 1e-4);
        assert!((k.edge_derivative(0.0, 0.5).unwrap() - 2.0 * exp_kernel().eval(0.0, 0.5).unwrap()).abs() < 1e-2);
    }

    #[test]
    fn inner_integral_closed_vs_trapezoid() {
        let k = CorrelationKernel::exponential(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (r, s): (f64, f64) = (rng.gen::<f64>(), rng.gen::<f64>());
            let closed = k.inner_integral(r, s).unwrap();
            let q = trap_inner(&k, r, s, 10_000);
            assert!((closed - q).abs() <= 1e-8 * closed.abs(), "{r} {s} {closed} {q}");
        }
    }

    #[test]
    fn inner_integral_generic_kernels() {
        let g = CorrelationKernel::DeltaApprox { gamma: 4.0 };
        let tab = CorrelationKernel::Tabulated(LagTable::from_kernel(&exp_kernel(), 1e-3, 8.0).unwrap());
        for (r, s) in [(0.7, 1.3), (1.5, 0.9), (1.0, 1.0)] {
            let a = g.inner_integral(r, s).unwrap();
            let b = trap_inner(&g, r, s, 20_000);
            assert!((a - b).abs() < 1e-7 * b.abs(), "{a} {b}");
            let a = tab.inner_integral(r, s).unwrap();
            let b = exp_kernel().inner_integral(r, s).unwrap();
            assert!((a - b).abs() < 1e-5 * b.abs());
        }
    }

    #[test]
    fn drift_kernel_limits() {
        let k = exp_kernel();
        let p = ModelParams::scaled(1.3, 0.7, 0.0, 0.0, 2.0).unwrap();
        let b = DriftKernelB::new(p, &k);
        for (r, s) in [(0.2, 0.9), (0.9, 0.2), (0.5, 0.5)] {
            let d = k.eval(r, s).unwrap();
            assert_eq!(b.eval(r, s).unwrap(), Complex::new(0.0, 2.0 * 0.7 * d));
        }
        let b0 = DriftKernelB::new(p.with_lambda(0.0).with_mu(0.4), &k);
        assert_eq!(b0.eval(0.3, 0.6).unwrap(), Complex::new(0.0, 0.0));
        let bm = DriftKernelB::new(p.with_mu(0.4), &k);
        assert!((bm.eval(0.3, 0.6).unwrap() - bm.eval(0.6, 0.3).unwrap()).norm() > 1e-6);
    }

    #[test]
    fn delta_approx_moments() {
        // Gaussian nascent delta: int D(s,r) r^2 dr = s^2 + 1/(2 gamma^2) away from the ends
        let s = 0.5;
        let mut prev = None;
        for gamma in [20.0, 40.0, 80.0] {
            let k = CorrelationKernel::DeltaApprox { gamma };
            let m2 = gauss_composite(0.0, 1.0, 2000, |r| k.eval(s, r).unwrap() * r * r);
            let m3 = gauss_composite(0.0, 1.0, 2000, |r| k.eval(s, r).unwrap() * r * r * r);
            let (e2, e3) = (m2 - s * s, m3 - s * s * s);
            assert!((e2 * gamma * gamma - 0.5).abs() < 1e-6);
            assert!((e3 * gamma * gamma - 1.5 * s).abs() < 1e-6);
            if let Some(p) = prev {
                let ratio: f64 = p / e2;
                assert!((ratio - 4.0).abs() < 1e-3);
            }
            prev = Some(e2);
        }
    }

    #[test]
    fn sampling_deterministic() {
        let grid = uniform_grid(2.0, 32);
        let a = sample_noise(&exp_kernel(), &grid, 42).unwrap();
        let b = sample_noise(&exp_kernel(), &grid, 42).unwrap();
        let c = sample_noise(&exp_kernel(), &grid, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn exponential_path_statistics() {
        let g = 2.0;
        let times = [0.0, 0.1, 0.5, 1.5];
        let n = 20_000;
        let mut acc = [0.0; 3];
        for seed in 0..n {
            let w = sample_exponential_path(g, &times, seed).unwrap();
            for (k, j) in [1, 2, 3].into_iter().enumerate() {
                acc[k] += w.values[0] * w.values[j];
            }
        }
        for (k, j) in [1, 2, 3].into_iter().enumerate() {
            let want = exp_kernel_with(g).eval(0.0, times[j]).unwrap();
            // var of a product of unit-correlated normals <= 2 var^2
            let se = (2.0f64).sqrt() * 0.5 * g / (n as f64).sqrt();
            assert!((acc[k] / n as f64 - want).abs() < 5.0 * se, "lag {}", times[j]);
        }
    }

    fn exp_kernel_with(g: f64) -> CorrelationKernel {
        CorrelationKernel::exponential(g)
    }

    #[test]
    fn not_psd_is_rejected() {
        let bad = CorrelationKernel::Tabulated(LagTable::new(1.0, vec![1.0, 2.0, 0.0]).unwrap());
        let err = sample_noise(&bad, &[0.0, 1.0, 2.0], 1).unwrap_err();
        assert!(matches!(err, Error::KernelNotPsd { .. }));
    }

    #[test]
    fn drive_zero_and_white_limits() {
        let k = exp_kernel();
        let grid = uniform_grid(1.0, 50);
        let p = ModelParams::scaled(1.0, 0.5, 0.3, 0.0, 2.0).unwrap();
        let zero = NoisePath::zeros(grid.clone()).unwrap();
        assert!(drive_a(&p, &k, &zero).unwrap().iter().all(|a| a.norm() == 0.0));
        let w = sample_noise(&k, &grid, 5).unwrap();
        let p0 = p.with_mu(0.0);
        for (a, wv) in drive_a(&p0, &k, &w).unwrap().iter().zip(&w.values) {
            assert_eq!(*a, Complex::new(0.0, 0.5f64.sqrt() * wv));
        }
        let full = drive_a(&p, &k, &w).unwrap();
        assert_eq!(drive_a_at(&p, &k, &w, grid[17]).unwrap(), full[17]);
        assert!(drive_a_at(&p, &k, &w, 0.123).is_err());
    }

    #[test]
    fn drive_memory_constant_noise() {
        // w = c: int_0^s D(r,s) c dr = (c/2)(1 - e^{-gamma s})
        let (g, c) = (2.0, 0.8);
        let k = CorrelationKernel::exponential(g);
        let p = ModelParams::scaled(1.0, 0.5, 0.3, 0.0, g).unwrap();
        let grid = uniform_grid(1.5, 10_000);
        let w = NoisePath::new(grid.clone(), vec![c; grid.len()], None).unwrap();
        let a = drive_a(&p, &k, &w).unwrap();
        let cm = p.m * p.lambda.powf(1.5) * p.mu * p.mu;
        for idx in [2500, 5000, 10_000] {
            let s = grid[idx];
            let mem = 0.5 * c * (1.0 - (-g * s).exp());
            let want = cm * c + 2.0 * cm * mem;
            assert!((a[idx].re - want).abs() < 1e-6 * want);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let w = sample_noise(&exp_kernel(), &uniform_grid(1.0, 16), 9).unwrap();
        w.write_csv(&path).unwrap();
        let back = NoisePath::read_csv(&path).unwrap();
        assert_eq!(back.times, w.times);
        for (a, b) in back.values.iter().zip(&w.values) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }
}
