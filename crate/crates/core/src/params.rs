//! Physical parameters and the complex scalar type used throughout.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub use num_complex::Complex64 as Complex;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Rejects NaN/Inf at API boundaries.
pub fn check_finite(name: &'static str, z: Complex) -> Result<Complex> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Numerics(format!("{name} is not finite: {z}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub m: f64,
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
    pub gamma: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl ModelParams {
    pub fn new(m: f64, lambda: f64, mu: f64, omega: f64, gamma: f64, hbar: f64, k_b: f64) -> Result<Self> {
        let p = ModelParams { m, lambda, mu, omega, gamma, hbar, k_b };
        p.validate()?;
        Ok(p)
    }

    /// SI constants for hbar and k_B.
    pub fn si(m: f64, lambda: f64, mu: f64, omega: f64, gamma: f64) -> Result<Self> {
        Self::new(m, lambda, mu, omega, gamma, HBAR, K_B)
    }

    /// Dimensionless units: hbar = k_B = 1.
    pub fn scaled(m: f64, lambda: f64, mu: f64, omega: f64, gamma: f64) -> Result<Self> {
        Self::new(m, lambda, mu, omega, gamma, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, v: f64, rule: &str) -> Error {
            Error::InvalidParameter { name, reason: format!("{v} violates {rule}") }
        }
        let checks: [(&'static str, f64, bool, &str); 7] = [
            ("m", self.m, self.m > 0.0, "m > 0"),
            ("lambda", self.lambda, self.lambda >= 0.0, "lambda >= 0"),
            ("mu", self.mu, self.mu >= 0.0, "mu >= 0"),
            ("omega", self.omega, self.omega >= 0.0, "omega >= 0"),
            ("gamma", self.gamma, self.gamma > 0.0, "gamma > 0"),
            ("hbar", self.hbar, self.hbar > 0.0, "hbar > 0"),
            ("k_B", self.k_b, self.k_b > 0.0, "k_B > 0"),
        ];
        for (name, v, ok, rule) in checks {
            if !v.is_finite() || !ok {
                return Err(bad(name, v, rule));
            }
        }
        if !self.omega_eff_sq().is_finite() {
            return Err(bad("omega", self.omega, "finite omega^2 - lambda^2 mu^2"));
        }
        Ok(())
    }

    /// Omega^2 = omega^2 - lambda^2 mu^2.
    pub fn omega_eff_sq(&self) -> f64 {
        let lm = self.lambda * self.mu;
        self.omega * self.omega - lm * lm
    }

    /// Noise temperature hbar^2 / (4 m k_B mu).
    pub fn noise_temperature(&self) -> Result<f64> {
        if self.mu == 0.0 {
            return Err(Error::DivergentTemperature);
        }
        Ok(self.hbar * self.hbar / (4.0 * self.m * self.k_b * self.mu))
    }

    pub fn lm(&self) -> f64 {
        self.lambda * self.mu
    }

    /// k = i m / (2 hbar).
    pub fn k(&self) -> Complex {
        Complex::new(0.0, self.m / (2.0 * self.hbar))
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        ModelParams { mu, ..*self }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        ModelParams { gamma, ..*self }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ModelParams { lambda, ..*self }
    }

    /// Reads the parameter keys from a parsed key-value map. Missing hbar/k_B
    /// default to SI; m, lambda, mu, gamma are required; omega defaults to 0.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| -> Result<Option<f64>> {
            match map.get(key) {
                None => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}' as a number"))),
            }
        };
        let need = |key: &str| -> Result<f64> {
            get(key)?.ok_or_else(|| Error::Config(format!("missing key '{key}'")))
        };
        Self::new(
            need("m")?,
            need("lambda")?,
            need("mu")?,
            get("omega")?.unwrap_or(0.0),
            need("gamma")?,
            get("hbar")?.unwrap_or(HBAR),
            get("k_B")?.unwrap_or(K_B),
        )
    }
}

/// Flat `key = value` text. `#` starts a comment; quotes around values are
/// stripped; section headers in brackets are ignored.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let v = v.trim().trim_matches('"').to_string();
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams {
        ModelParams::si(1.0, 1e-2, 5e-19, 0.0, 1e-4).unwrap()
    }

    #[test]
    fn temperature_matches_hand_value() {
        // hbar^2/(4 m k_B mu) evaluated at 30 digits
        let t = base().noise_temperature().unwrap();
        assert!((t / 4.027_532_404_002_326e-28 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn temperature_pole_and_scaling() {
        assert_eq!(base().with_mu(0.0).noise_temperature(), Err(Error::DivergentTemperature));
        let t1 = base().noise_temperature().unwrap();
        let t2 = base().with_mu(1e-18).noise_temperature().unwrap();
        assert!((t2 / t1 - 0.5).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for e in [-30, -25, -20, -15] {
            let t = base().with_mu(10f64.powi(e)).noise_temperature().unwrap();
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn omega_eff_cases() {
        let p = ModelParams::scaled(1.0, 0.0, 0.3, 2.0, 1.0).unwrap();
        assert_eq!(p.omega_eff_sq(), 4.0);
        let p = ModelParams::scaled(1.0, 2.0, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(p.omega_eff_sq(), -1.0);
        let p = ModelParams::scaled(1.0, 2.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(p.omega_eff_sq(), 0.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ModelParams::si(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::si(1.0, -1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::si(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::si(1.0, f64::NAN, 0.0, 0.0, 1.0).is_err());
        assert!(check_finite("z", Complex::new(f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn kv_roundtrip() {
        let text = "# fig\nm = 1\nlambda = 1e14\nmu=5e-19\n[extra]\ngamma: 1e-4\nhbar = 1.0 # scaled\n";
        let map = parse_kv(text).unwrap();
        let p = ModelParams::from_map(&map).unwrap();
        assert_eq!(p.lambda, 1e14);
        assert_eq!(p.hbar, 1.0);
        assert_eq!(p.k_b, K_B);
        assert!(parse_kv("novalue").is_err());
        assert!(ModelParams::from_map(&parse_kv("m=1").unwrap()).is_err());
    }
}
