//! Grids and quadrature rules.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::params::Complex;

/// N+1 uniform nodes on [0, t].
pub fn uniform_grid(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t * k as f64 / n as f64).collect()
}

/// Trapezoid weights for possibly non-uniform nodes.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = x[k] - x[k - 1];
        w[k - 1] += 0.5 * h;
        w[k] += 0.5 * h;
    }
    w
}

pub fn trapezoid(x: &[f64], y: &[Complex]) -> Complex {
    let mut acc = Complex::new(0.0, 0.0);
    for k in 1..x.len() {
        acc += (y[k] + y[k - 1]) * (0.5 * (x[k] - x[k - 1]));
    }
    acc
}

pub fn trapezoid_real(x: &[f64], y: &[f64]) -> f64 {
    (1..x.len()).map(|k| 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1])).sum()
}

fn gl8() -> &'static Vec<(f64, f64)> {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let q = GaussLegendre::new(NonZeroUsize::new(8).unwrap());
        q.iter().map(|(x, w)| (*x, *w)).collect()
    })
}

/// Composite 8-point Gauss-Legendre on [a, b] with `panels` equal panels.
pub fn gauss_composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let rule = gl8();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut part = 0.0;
        for &(x, w) in rule {
            part += w * f(mid + 0.5 * h * x);
        }
        acc += 0.5 * h * part;
    }
    acc
}

/// Complex-valued `gauss_composite`.
pub fn gauss_composite_c<F: FnMut(f64) -> Complex>(a: f64, b: f64, panels: usize, mut f: F) -> Complex {
    let rule = gl8();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = Complex::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for &(x, w) in rule {
            acc += f(mid + 0.5 * h * x) * (0.5 * h * w);
        }
    }
    acc
}

/// One-sided fourth-order first derivative at the left end of uniform data.
pub fn d1_left(v: &[Complex], h: f64) -> Complex {
    (v[0] * -25.0 + v[1] * 48.0 - v[2] * 36.0 + v[3] * 16.0 - v[4] * 3.0) / (12.0 * h)
}

/// One-sided fourth-order first derivative at the right end of uniform data.
pub fn d1_right(v: &[Complex], h: f64) -> Complex {
    let n = v.len() - 1;
    (v[n] * 25.0 - v[n - 1] * 48.0 + v[n - 2] * 36.0 - v[n - 3] * 16.0 + v[n - 4] * 3.0) / (12.0 * h)
}
