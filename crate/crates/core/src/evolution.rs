//! Gaussian states phi(x) = exp(-alpha x^2 + beta x + gamma) pushed through
//! the propagator.

use std::f64::consts::PI;
use std::path::Path;

use crate::closed_form::{solve_f, solve_g};
use crate::error::{Error, Result};
use crate::params::{Complex, ModelParams};
use crate::propagator::{deterministic_coeffs, PropagatorCoeffs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub alpha: Complex,
    pub beta: Complex,
    pub gamma_phase: Complex,
    pub normalized: bool,
}

impl GaussianState {
    pub fn new(alpha: Complex, beta: Complex, gamma_phase: Complex) -> Result<Self> {
        if !(alpha.re > 0.0) || !alpha.im.is_finite() || !alpha.re.is_finite() {
            return Err(Error::NormalizabilityLost(alpha.re));
        }
        Ok(GaussianState { alpha, beta, gamma_phase, normalized: false })
    }

    /// Real, centred, unit-norm Gaussian of spread sigma0.
    pub fn from_spread(sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter { name: "sigma0", reason: format!("{sigma0} must be positive") });
        }
        let a = 1.0 / (4.0 * sigma0 * sigma0);
        let mut s = Self::new(Complex::new(a, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0))?;
        s = s.normalize();
        Ok(s)
    }

    pub fn spread(&self) -> f64 {
        1.0 / (2.0 * self.alpha.re.sqrt())
    }

    /// ln of int |phi|^2 dx.
    pub fn log_norm(&self) -> f64 {
        let ar = self.alpha.re;
        2.0 * self.gamma_phase.re + self.beta.re * self.beta.re / (2.0 * ar) + 0.5 * (PI / (2.0 * ar)).ln()
    }

    pub fn norm_weight(&self) -> f64 {
        self.log_norm().exp()
    }

    pub fn normalize(&self) -> Self {
        let mut s = *self;
        s.gamma_phase.re -= 0.5 * self.log_norm();
        s.normalized = true;
        s
    }

    /// Overall phase mod 2 pi.
    pub fn phase(&self) -> f64 {
        self.gamma_phase.im.rem_euclid(2.0 * PI)
    }

    pub fn eval(&self, x: f64) -> Complex {
        (-self.alpha * x * x + self.beta * x + self.gamma_phase).exp()
    }
}

pub fn evolve(s0: &GaussianState, c: &PropagatorCoeffs) -> Result<GaussianState> {
    if !(s0.alpha.re > 0.0) {
        return Err(Error::NormalizabilityLost(s0.alpha.re));
    }
    let den = s0.alpha + c.a;
    if den.norm() < 1e-30 {
        return Err(Error::DegeneratePropagation(den.norm()));
    }
    let alpha = (4.0 * c.atilde * s0.alpha + c.gram) / (4.0 * den);
    let cb = c.c + s0.beta;
    let beta = c.d + c.b * cb / (2.0 * den);
    let gamma = s0.gamma_phase + c.e + cb * cb / (4.0 * den);
    for (name, z) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
        crate::params::check_finite(name, z)?;
    }
    if !(alpha.re > 0.0) {
        return Err(Error::NormalizabilityLost(alpha.re));
    }
    Ok(GaussianState { alpha, beta, gamma_phase: gamma, normalized: false })
}

/// Deterministic coefficients from the closed form, then one evolution step.
pub fn closed_form_state(p: &ModelParams, s0: &GaussianState, t: f64) -> Result<GaussianState> {
    let f = solve_f(p, t)?;
    let g = solve_g(p, t)?;
    evolve(s0, &deterministic_coeffs(p, &f, &g)?)
}

/// Free-particle spread sigma0 sqrt(1 + (hbar t / (2 m sigma0^2))^2).
pub fn free_spread(p: &ModelParams, sigma0: f64, t: f64) -> f64 {
    let r = p.hbar * t / (2.0 * p.m * sigma0 * sigma0);
    sigma0 * (1.0 + r * r).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: GaussianState,
}

/// `t,sigma,re_alpha,im_alpha,re_beta,im_beta,log_norm`
pub fn write_trajectory_csv<P: AsRef<Path>>(path: P, points: &[TrajectoryPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["t", "sigma", "re_alpha", "im_alpha", "re_beta", "im_beta", "log_norm"])?;
    for pt in points {
        let s = &pt.state;
        wtr.write_record(&[
            format!("{:e}", pt.t),
            format!("{:e}", s.spread()),
            format!("{:e}", s.alpha.re),
            format!("{:e}", s.alpha.im),
            format!("{:e}", s.beta.re),
            format!("{:e}", s.beta.im),
            format!("{:e}", s.log_norm()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn si(lambda: f64, mu: f64, gamma: f64) -> ModelParams {
        ModelParams::si(1.0, lambda, mu, 0.0, gamma).unwrap()
    }

    #[test]
    fn spread_definition() {
        let s = GaussianState::from_spread(1e-7).unwrap();
        assert!((s.spread() / 1e-7 - 1.0).abs() < 1e-15);
        let mut s4 = s;
        s4.alpha.re *= 4.0;
        assert!((s4.spread() / 0.5e-7 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norm_weight_cases() {
        let s = GaussianState::from_spread(1e-7).unwrap();
        assert!((s.norm_weight() - 1.0).abs() < 1e-12);
        let mut b = s;
        b.gamma_phase.re += 0.3;
        assert!((b.log_norm() - s.log_norm() - 0.6).abs() < 1e-12);
        let n = b.normalize();
        let nn = n.normalize();
        assert!((n.gamma_phase - nn.gamma_phase).norm() < 1e-12);
        assert!(nn.normalized);
    }

    #[test]
    fn norm_matches_quadrature() {
        let s = GaussianState::new(Complex::new(1.3, 0.7), Complex::new(0.4, -1.1), Complex::new(0.2, 0.5)).unwrap();
        let centre = s.beta.re / (2.0 * s.alpha.re);
        let (lo, hi, n) = (centre - 12.0, centre + 12.0, 100_000);
        let dx = (hi - lo) / n as f64;
        let sum: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * s.eval(lo + i as f64 * dx).norm_sqr()
            })
            .sum();
        assert!((sum * dx / s.norm_weight() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_spreading() {
        let s0 = GaussianState::from_spread(1e-7).unwrap();
        for lambda in [0.0, 1e-30] {
            let p = si(lambda, 5e-19, 1e-4);
            for t in [10.0, 1e2, 1e3, 1e4, 1e5] {
                let s = closed_form_state(&p, &s0, t).unwrap();
                let want = free_spread(&p, 1e-7, t);
                assert!((s.spread() / want - 1.0).abs() < 1e-6, "lambda {lambda} t {t}");
                assert_eq!(s.beta, Complex::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn matches_high_precision_references() {
        let s0 = GaussianState::from_spread(1e-7).unwrap();
        // (lambda, mu, gamma, t, sigma) from 80-digit evaluations
        let refs = [
            (1e14, 0.0, 1e-4, 1e2, 5.7799123474777521e-8),
            (1e14, 0.0, 1e-4, 1e5, 1.6666601481928933e-10),
            (1e14, 1e-32, 1e-4, 1e5, 1.6666601481930447e-10),
            (1e14, 1e-22, 1e-4, 1e4, 8.2438462066366915e-10),
            (1e14, 1e-22, 1e-4, 1e5, 1.6681743744797398e-10),
            (1e14, 5e-19, 1e-4, 1e5, 8.660256165977456e-10),
            (1e14, 5e-19, 1e-9, 2e5, 1.118274824720428e-7),
            (1e14, 5e-19, 1e-3, 2e5, 7.2456883730947193e-10),
            (1e14, 0.0, 1e-7, 2e5, 1.1216901888788741e-9),
            (5.98e24, 0.0, 1e-6, 2e5, 2.782370511284675e-15),
            (1e-2, 5e-19, 1e-4, 1e5, 9.9999999998200086e-8),
            (1e14, 5e-19, 1e-4, 1e2, 5.7992898539207269e-8),
            (1e14, 5e-19, 1e-4, 3e2, 2.3234620923294374e-8),
            (1e14, 5e-19, 1e-4, 1e3, 7.3581046454942777e-9),
            (1e14, 5e-19, 1e-4, 3e3, 2.6827974414531864e-9),
            (1e14, 5e-19, 1e-4, 1e4, 1.1145300660333387e-9),
            (1e14, 5e-19, 1e-4, 3e4, 8.6337651322755145e-10),
            (1e14, 5e-19, 1e-4, 5e4, 8.6634778179753343e-10),
            (1e14, 5e-19, 1e-4, 8e4, 8.6602370326393121e-10),
            (1e14, 5e-19, 1e-4, 1.2e5, 8.660254035259801e-10),
            (1e14, 5e-19, 1e-4, 2e5, 8.6602540378451059e-10),
            (1e14, 5e-19, 1e-5, 1e5, 1.6787755507420962e-9),
            (1e14, 5e-19, 3e-5, 1e5, 1.1548754848681284e-9),
            (1e14, 5e-19, 3e-4, 1e5, 7.637626158264688e-10),
        ];
        for (lambda, mu, gamma, t, want) in refs {
            let s = closed_form_state(&si(lambda, mu, gamma), &s0, t).unwrap();
            let rel = (s.spread() / want - 1.0).abs();
            assert!(rel < 1e-6, "lambda {lambda} mu {mu} gamma {gamma} t {t}: {} vs {want} ({rel:e})", s.spread());
        }
    }

    #[test]
    fn degenerate_and_lost() {
        let s0 = GaussianState::from_spread(1.0).unwrap();
        let z = Complex::new(0.0, 0.0);
        let c = PropagatorCoeffs { t: 1.0, k: z, a: -s0.alpha, atilde: z, b: z, c: z, d: z, e: z, gram: z };
        assert!(matches!(evolve(&s0, &c), Err(Error::DegeneratePropagation(_))));
        let c = PropagatorCoeffs { a: z, atilde: Complex::new(-1.0, 0.0), ..c };
        assert!(matches!(evolve(&s0, &c), Err(Error::NormalizabilityLost(_))));
    }
}
