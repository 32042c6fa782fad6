//! One line per primary criterion: `PASS|FAIL|INFO <name> measured=.. tolerance=..`.
//! Lines go to the raw stdout handle so they survive libtest output capture.

use std::io::Write;
use std::time::Instant;

use collapse_core::closed_form::{solve_f, solve_g, solve_role, Role};
use collapse_core::evolution::{closed_form_state, evolve, free_spread, GaussianState};
use collapse_core::experiments::{first_non_monotone, log_grid, mu_continuity, run_fig1, run_fig2, spread_series, SweepConfig};
use collapse_core::grid_bvp::{GridOperator, GridRole};
use collapse_core::path_integral::{compare_to_analytic, oracle};
use collapse_core::propagator::{coefficients, Solver};
use collapse_core::quad::uniform_grid;
use collapse_core::{sample_exponential_path, Complex, CorrelationKernel, ModelParams, NoiseSampler};

fn report(name: &str, measured: f64, tolerance: f64, pass: bool, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!("{status} {name} measured={measured:e} tolerance={tolerance:e} ({:.1?})\n", started.elapsed());
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn info(name: &str, measured: f64) {
    let line = format!("INFO {name} measured={measured:e}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

/// (lambda, mu, gamma, t) in units m = hbar = 1
const GENERIC: [(f64, f64, f64, f64); 5] =
    [(0.8, 0.4, 1.3, 1.0), (2.0, 0.1, 0.5, 2.5), (0.3, 1.2, 3.0, 0.7), (1.5, 0.0, 1.0, 1.2), (5.0, 0.3, 8.0, 0.4)];

fn scaled(l: f64, mu: f64, g: f64) -> ModelParams {
    ModelParams::scaled(1.0, l, mu, 0.0, g).unwrap()
}

const FIG1: &str = "m = 1\nlambda = 1e14\nmu = 5e-19\ngamma = 1e-4\nsigma0 = 1e-7\naxis = mu\n\
values = 1e-32, 1e-28, 1e-24, 1e-22, 1e-20, 1e-19, 5e-19\nt_log = 1, 1e5, 64\ngrid_n = 32\nseed = 1\n";
const FIG2: &str = "m = 1\nlambda = 1e14\nmu = 5e-19\ngamma = 1e-4\nsigma0 = 1e-7\naxis = gamma\n\
values_log = 1e-10, 1e3, 64\nt = 2e5\ngrid_n = 64\nseed = 1\n";

#[test]
fn free_particle_exactness() {
    let t0 = Instant::now();
    let p = ModelParams::si(1.0, 1e-30, 5e-19, 0.0, 1e-4).unwrap();
    let times = log_grid(10.0, 1e5, 64).unwrap();
    let s = spread_series(&p, 1e-7, &times).unwrap();
    let dev = s.iter().zip(&times).map(|(x, &t)| (x / free_spread(&p, 1e-7, t) - 1.0).abs()).fold(0.0, f64::max);
    let ok = dev < 1e-6 && t0.elapsed().as_secs_f64() < 1.0;
    report("free-particle exactness, t in [10, 1e5] s", dev, 1e-6, ok, t0);
    assert!(ok);
}

#[test]
fn closed_form_vs_grid() {
    let t0 = Instant::now();
    let ns = [512usize, 1024, 2048];
    let per_point: Vec<Vec<f64>> = std::thread::scope(|sc| {
        let hs: Vec<_> = GENERIC
            .iter()
            .map(|&(l, mu, g, t)| {
                sc.spawn(move || {
                    let p = scaled(l, mu, g);
                    let k = CorrelationKernel::exponential(g);
                    let (f, gg) = (solve_f(&p, t).unwrap(), solve_g(&p, t).unwrap());
                    ns.iter()
                        .map(|&n| {
                            let op = GridOperator::new(&p, &k, t, n).unwrap();
                            [(GridRole::F, &f), (GridRole::G, &gg)]
                                .into_iter()
                                .map(|(role, exact)| {
                                    let sol = op.solve_role(role, None).unwrap();
                                    let want = exact.values_on(&op.grid).unwrap();
                                    sol.values.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
                                })
                                .fold(0.0, f64::max)
                        })
                        .collect()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = per_point.iter().map(|e| e[2]).fold(0.0, f64::max);
    let ratios: Vec<f64> = per_point.iter().flat_map(|e| e.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>()).collect();
    let in_band = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    let ok = worst < 1e-4 && in_band && t0.elapsed().as_secs() < 120;
    report("closed form vs grid, max |f|,|g| error at N=2048", worst, 1e-4, ok, t0);
    info("closed form vs grid, min error ratio per doubling", ratios.iter().cloned().fold(f64::INFINITY, f64::min));
    info("closed form vs grid, max error ratio per doubling", ratios.iter().cloned().fold(0.0, f64::max));
    assert!(ok, "{per_point:?}");
}

#[test]
fn path_integral_envelope() {
    let t0 = Instant::now();
    let (l, mu, g, t) = GENERIC[0];
    let p = scaled(l, mu, g);
    let k = CorrelationKernel::exponential(g);
    let r = compare_to_analytic(&p, &k, t, &[64, 128, 256, 512]).unwrap();
    let last = ["A", "Atilde", "B"].iter().map(|n| r.errors(n).last().unwrap().1).fold(0.0, f64::max);
    report("path integral vs analytic, shrinking envelope over N=64..512 (abs error at 512)", last, f64::NAN, r.is_monotone(), t0);

    let t1 = Instant::now();
    let free = scaled(1e-30, mu, g);
    let q = oracle(&free, &k, 2.0, 256, None).unwrap();
    let want = Complex::new(0.0, 1.0 / (2.0 * 2.0));
    let dev = [(q.x0x0, want), (q.xx, want), (q.x0x, -want * 2.0)].iter().map(|(a, b)| (a / b - 1.0).norm()).fold(0.0, f64::max);
    report("path integral free limit at N=256", dev, 1e-3, dev < 1e-3, t1);
    let ok = r.is_monotone() && dev < 1e-3 && t0.elapsed().as_secs() < 300;
    assert!(ok);
}

#[test]
fn residual_substitution() {
    let t0 = Instant::now();
    let worst = std::thread::scope(|sc| {
        let hs: Vec<_> = GENERIC
            .iter()
            .flat_map(|&(l, mu, g, t)| [Role::F, Role::G].map(|role| (l, mu, g, t, role)))
            .map(|(l, mu, g, t, role)| {
                sc.spawn(move || solve_role(&scaled(l, mu, g), t, role).unwrap().equation_residual(200, 8).unwrap())
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).fold(0.0, f64::max)
    });
    report("residual substitution of f, g on 200 nodes", worst, 1e-6, worst < 1e-6, t0);
    assert!(worst < 1e-6);
}

#[test]
fn spread_determinism() {
    let t0 = Instant::now();
    let p = ModelParams::si(1.0, 1e14, 5e-19, 0.0, 1e-4).unwrap();
    let k = CorrelationKernel::exponential(p.gamma);
    let s0 = GaussianState::from_spread(1e-7).unwrap();
    let mut worst = 0.0f64;
    for t in [1e2, 1e4, 1e5] {
        let grid = uniform_grid(t, 128);
        let reference = closed_form_state(&p, &s0, t).unwrap().spread();
        for seed in 0..10 {
            let w = sample_exponential_path(p.gamma, &grid, seed).unwrap();
            let s = evolve(&s0, &coefficients(&p, &k, &w, Solver::Closed).unwrap()).unwrap().spread();
            worst = worst.max((s / reference - 1.0).abs());
        }
    }
    report("spread determinism across 10 seeds", worst, 1e-12, worst < 1e-12, t0);
    assert!(worst < 1e-12);
}

#[test]
fn fig1_qualitative() {
    let t0 = Instant::now();
    let cfg = SweepConfig::parse(FIG1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_fig1(&cfg, dir.path()).unwrap();
    let order = run.checks.iter().find(|c| c.name.contains("ordering")).unwrap();
    let coincide = run.checks.iter().find(|c| c.name.contains("vs mu=0")).unwrap();
    report("fig1 sigma ordered in mu at every t (min relative gap >= 0)", order.measured, 0.0, order.pass, t0);
    report("fig1 mu=1e-32 vs mu=0", coincide.measured, 1e-3, coincide.pass, t0);
    for c in run.checks.iter().filter(|c| c.info) {
        info(&c.name, c.measured);
    }
    assert!(order.pass && coincide.pass && run.finite && t0.elapsed().as_secs() < 60);
}

#[test]
fn fig2_qualitative() {
    let t0 = Instant::now();
    let cfg = SweepConfig::parse(FIG2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = run_fig2(&cfg, dir.path()).unwrap();
    let get = |key: &str| run.checks.iter().find(|c| c.name.contains(key) && !c.name.contains("mu=0")).unwrap();
    let (ends, pair, stable) = (get("endpoint"), get("non-monotone"), get("doubling"));
    report("fig2 endpoint decrease (sigma_last/sigma_first)", ends.measured, 1.0, ends.pass, t0);
    report("fig2 non-monotone adjacent pair in gamma (gamma of the pair)", pair.measured, f64::NAN, pair.pass, t0);
    report("fig2 grid-N doubling", stable.measured, 1e-3, stable.pass, t0);

    // the only regime with a dip found: the mu = 0 curve at large lambda
    let p0 = ModelParams::si(1.0, 5.98e24, 0.0, 0.0, 1e-4).unwrap();
    let gammas = log_grid(1e-8, 1e-4, 41).unwrap();
    let s0 = GaussianState::from_spread(1e-7).unwrap();
    let sig: Vec<f64> = gammas.iter().map(|&g| closed_form_state(&p0.with_gamma(g), &s0, 2e5).unwrap().spread()).collect();
    info(
        "fig2 mu=0, lambda=5.98e24: gamma where sigma first rises",
        first_non_monotone(&sig).map_or(f64::NAN, |i| gammas[i]),
    );

    assert!(ends.pass && stable.pass && run.finite);
    assert!(pair.pass, "sigma(t=2e5) is strictly decreasing in gamma over the scanned grid");
}

#[test]
fn noise_statistics() {
    let t0 = Instant::now();
    let g = 0.7;
    let k = CorrelationKernel::exponential(g);
    let lags = [0.0, 1.0 / g, 3.0 / g];
    let times = [0.0, lags[1], lags[2]];
    let n = 10_000usize;
    let d0 = k.eval(0.0, 0.0).unwrap();
    let sampler = NoiseSampler::new(&k, &times).unwrap();
    let paths = sampler.sample_many(n, 17);
    let ou: Vec<Vec<f64>> = (0..n as u64).map(|s| sample_exponential_path(g, &times, 1_000_000 + s).unwrap().values).collect();
    let mut worst = 0.0f64;
    for set in [&paths, &ou] {
        for (j, &lag) in lags.iter().enumerate() {
            let want = k.eval(0.0, lag).unwrap();
            let est = set.iter().map(|w| w[0] * w[j]).sum::<f64>() / n as f64;
            let se = ((d0 * d0 + want * want) / n as f64).sqrt();
            worst = worst.max((est - want).abs() / se);
        }
    }
    report("noise covariance at lags 0, 1/gamma, 3/gamma, 1e4 samples (in standard errors)", worst, 5.0, worst < 5.0, t0);
    assert!(worst < 5.0);
}

#[test]
fn mu_continuity_limit() {
    let t0 = Instant::now();
    let p = ModelParams::si(1.0, 1e14, 5e-19, 0.0, 1e-4).unwrap();
    let times = log_grid(1.0, 1e5, 64).unwrap();
    let dev = mu_continuity(&p, 1e-35, 1e-7, &times).unwrap();
    report("mu=1e-35 vs mu=0", dev, 1e-6, dev < 1e-6, t0);
    assert!(dev < 1e-6);
}
