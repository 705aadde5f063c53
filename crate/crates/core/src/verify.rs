//! Invariant suites for every module, run against one parameter set.
//!
//! Each check reports a measured residual next to its tolerance. Checks that
//! depend on the dissipation fraction run over `alpha ∈ {0, cfg.alpha, 1}` with
//! the strengths and breaking time of the given configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::eulerian::{
    energy, energy_quadrature, eval_u, kinetic_quadrature, one_peakon_center, peak_positions,
    trajectories,
};
use crate::lagrangian::{adapted_grid, default_grid, peak_labels, profile, sample_profile};
use crate::measures::{eulerian_state, mu_at, nu_at, nu_m_density, total_mass};
use crate::oracle::{
    apply_breaking, compute_pq, initial_state, integrate, richardson_ratio, run_post_leg,
    run_pre_leg, IntegratorSettings,
};
use crate::params::Config;
use crate::quadrature::integrate_with_breaks;
use crate::transforms::{
    label_grid, relabel, squeeze, to_eulerian, to_lagrangian, FnRelabeling, LagrangianProfile,
    PLATEAU_Y_XI,
};
use crate::LagrangianSample;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub module: &'static str,
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the check could not be evaluated.
    pub error: Option<String>,
}

/// Headline quantities, all measured rather than copied from the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    /// Quadrature energy at `t = 0`.
    pub e2: f64,
    /// Mass of the `nu` atom at `t0`.
    pub breaking_atom: f64,
    /// `∫ (h - h_bar) dξ` right after breaking.
    pub removed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub c1: f64,
    pub c2: f64,
    pub t0: f64,
    pub alpha: f64,
    pub summary: Summary,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub oracle_dt: f64,
    pub oracle_nodes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            oracle_dt: 1e-3,
            oracle_nodes: 2000,
        }
    }
}

struct Suite {
    checks: Vec<CheckResult>,
}

impl Suite {
    fn check(&mut self, module: &'static str, name: impl Into<String>, tolerance: f64, f: impl FnOnce() -> Result<f64>) {
        let (residual, error) = match f() {
            Ok(r) => (r, None),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        self.checks.push(CheckResult {
            module,
            check: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            error,
        });
    }
}

fn alphas(cfg: &Config) -> Vec<Config> {
    let mut out = Vec::new();
    for a in [0.0, cfg.alpha(), 1.0] {
        if !out.iter().any(|c: &Config| c.alpha() == a) {
            out.push(cfg.with_alpha(a).expect("strengths already validated"));
        }
    }
    out
}

/// A configuration with `0 < alpha < 1`, where the removed energy has a density.
fn partial(cfg: &Config) -> Config {
    if cfg.alpha() > 0.0 && cfg.alpha() < 1.0 {
        *cfg
    } else {
        cfg.with_alpha(0.5).expect("strengths already validated")
    }
}

fn sup<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn x_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

pub fn verify(cfg: &Config, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut suite = Suite { checks: Vec::new() };
    let t0 = cfg.t0();
    let (a, b) = peak_labels(cfg);
    let family = alphas(cfg);

    params_suite(&mut suite, cfg, &mut rng);
    eulerian_suite(&mut suite, cfg, &family);
    measures_suite(&mut suite, cfg, &family, &mut rng);
    lagrangian_suite(&mut suite, cfg, &family, &mut rng);
    transforms_suite(&mut suite, cfg, &mut rng);
    oracle_suite(&mut suite, cfg, &family, opts);

    let at = sample_profile(cfg, t0, &default_grid(cfg, opts.oracle_nodes)?)?;
    let split = apply_breaking(&at, cfg.alpha())?;
    let removed = split.cell_rule().total(&split.column(|s| s.h - s.h_bar));
    let summary = Summary {
        e2: energy_quadrature(cfg, 0.0, 40.0 + a.abs().max(b.abs())),
        breaking_atom: nu_at(cfg, t0).atom_mass_at(0.0),
        removed,
    };
    Ok(VerifyReport {
        c1: cfg.c1(),
        c2: cfg.c2(),
        t0,
        alpha: cfg.alpha(),
        summary,
        checks: suite.checks,
    })
}

fn params_suite(suite: &mut Suite, cfg: &Config, rng: &mut ChaCha8Rng) {
    let mut configs = vec![*cfg];
    while configs.len() < 1000 {
        let c1 = rng.random_range(0.05..5.0);
        let c2 = rng.random_range(-5.0..-0.05);
        let alpha = rng.random_range(0.0..=1.0);
        if let Ok(c) = Config::new(c1, c2, 1.0, alpha) {
            if (c1 + c2).abs() > 1e-3 {
                configs.push(c);
            }
        }
    }
    suite.check("params", "d1, d2 are the roots of x^2 - (c1+c2)x + (1-alpha)c1c2", 1e-12, || {
        Ok(sup(configs.iter().flat_map(|c| {
            let (m, k) = (c.momentum(), (1.0 - c.alpha()) * c.c1() * c.c2());
            let d = c.derived();
            [d.d1, d.d2].map(|x| (x * x - m * x + k).abs() / (x * x).max((m * x).abs()).max(k.abs()))
        })))
    });
    suite.check("params", "E2tilde - E2 - 4 alpha c1 c2 = 0", 1e-12, || {
        Ok(sup(configs.iter().map(|c| {
            let d = c.derived();
            (d.e2_tilde - d.e2 - 4.0 * c.alpha() * c.c1() * c.c2()).abs() / d.e2
        })))
    });
    suite.check("params", "alpha = 0 gives (d1, d2) = (c1, c2)", 4.0 * f64::EPSILON, || {
        Ok(sup(configs.iter().flat_map(|c| {
            let d = *c.with_alpha(0.0).expect("valid").derived();
            [(d.d1 - c.c1()).abs() / c.c1(), (d.d2 - c.c2()).abs() / c.c2().abs()]
        })))
    });
}

fn eulerian_suite(suite: &mut Suite, cfg: &Config, family: &[Config]) {
    let t0 = cfg.t0();
    suite.check("eulerian", "continuity across breaking, delta = 1e-3", 0.05, || {
        Ok(sup(x_grid(-4.0, 4.0, 800).into_iter().map(|x| (eval_u(cfg, t0 - 1e-3, x) - eval_u(cfg, t0, x)).abs())))
    });
    suite.check("eulerian", "left and right values agree at every peak", 1e-12, || {
        let mut worst: f64 = 0.0;
        for c in family {
            for t in [t0 - 1.5, t0 - 0.2, t0, t0 + 0.3, t0 + 2.0] {
                for q in peak_positions(c, t) {
                    let e = 1e-14 * (1.0 + q.abs());
                    worst = worst.max((eval_u(c, t, q - e) - eval_u(c, t, q + e)).abs());
                }
            }
        }
        Ok(worst)
    });
    for c in family {
        suite.check("eulerian", format!("quadrature energy, alpha = {}", c.alpha()), 1e-6, || {
            Ok(sup([t0 - 1.0, t0 - 0.1, t0 + 0.1, t0 + 1.0].map(|t| (energy_quadrature(c, t, 40.0) - energy(c, t)).abs())))
        });
    }
    suite.check("eulerian", "p1 + p2 constant on each branch, 100 times", 1e-12, || {
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            let s = 0.1 + 2.9 * k as f64 / 99.0;
            let pre = trajectories(cfg, t0 - s)?;
            worst = worst.max((pre.p1 + pre.p2 - cfg.momentum()).abs());
            let post_cfg = partial(cfg);
            let post = trajectories(&post_cfg, t0 + s)?;
            let d = post_cfg.derived();
            worst = worst.max((post.p1 + post.p2 - (d.d1 + d.d2)).abs());
        }
        Ok(worst)
    });
    let dx = 1e-3;
    suite.check("eulerian", "alpha = 1 peak travels at c1 + c2 (one grid cell)", dx, || {
        let c = cfg.with_alpha(1.0)?;
        let mut worst: f64 = 0.0;
        for t in [t0 + 0.5, t0 + 1.0, t0 + 2.0] {
            let center = one_peakon_center(&c, t);
            let grid = x_grid(center - 4.0, center + 4.0, 8000);
            let best = grid
                .iter()
                .copied()
                .max_by(|&x, &y| eval_u(&c, t, x).abs().total_cmp(&eval_u(&c, t, y).abs()))
                .unwrap_or(f64::NAN);
            worst = worst.max((best - center).abs());
        }
        Ok(worst)
    });
}

fn measures_suite(suite: &mut Suite, cfg: &Config, family: &[Config], rng: &mut ChaCha8Rng) {
    let t0 = cfg.t0();
    let samples: Vec<(f64, f64)> = (0..200)
        .map(|_| (rng.random_range(t0 - 3.0..t0 + 3.0), rng.random_range(-6.0..6.0)))
        .chain([(t0, 0.0), (t0, 0.5)])
        .collect();
    for c in family {
        suite.check("measures", format!("mu dominated by nu, alpha = {}", c.alpha()), 1e-12, || {
            let mut worst: f64 = 0.0;
            for &(t, x) in &samples {
                let (mu, nu) = (mu_at(c, t), nu_at(c, t));
                worst = worst.max(mu.density_at(x) - nu.density_at(x));
                for atom in mu.atoms() {
                    worst = worst.max(atom.mass - nu.atom_mass_at(atom.x));
                }
            }
            Ok(worst)
        });
    }
    suite.check("measures", "nu(t0) mass + ∫u^2(t0) = E2", 1e-6, || {
        Ok((nu_at(cfg, t0).total() + kinetic_quadrature(cfg, t0, 40.0) - cfg.derived().e2).abs())
    });
    let mid = partial(cfg);
    suite.check("measures", format!("nu_m mass = -4 alpha c1 c2, alpha = {}", mid.alpha()), 1e-6, || {
        let expected = mid.alpha() * mid.breaking_energy();
        let mut worst: f64 = 0.0;
        for t in [t0 + 0.5, t0 + 1.0, t0 + 2.0] {
            let p = trajectories(&mid, t)?;
            let m = integrate_with_breaks(
                |x| nu_m_density(&mid, t, x).unwrap_or(f64::NAN),
                p.q1,
                p.q2,
                &[],
                1e-13,
                1e-13,
            )
            .value;
            worst = worst.max((m - expected).abs());
        }
        Ok(worst)
    });
    for c in family {
        suite.check(
            "measures",
            format!("nu mass + ∫u^2 constant for t >= t0, alpha = {}", c.alpha()),
            1e-6,
            || {
                let budget = |t: f64| nu_at(c, t).total() + kinetic_quadrature(c, t, 40.0 + 2.0 * (t - t0).abs());
                let base = budget(t0);
                Ok(sup([t0 + 0.2, t0 + 1.0, t0 + 2.5].map(|t| (budget(t) - base).abs())))
            },
        );
    }
}

fn branch_times(cfg: &Config, rng: &mut ChaCha8Rng) -> Vec<(Config, Vec<f64>, &'static str)> {
    let t0 = cfg.t0();
    let mut draw = |lo: f64, hi: f64| (0..500).map(|_| rng.random_range(lo..hi)).collect::<Vec<f64>>();
    vec![
        (*cfg, draw(t0 - 2.0, t0 - 1e-3), "before breaking"),
        (*cfg, vec![t0; 500], "at breaking"),
        (cfg.with_alpha(0.0).expect("valid"), draw(t0 + 1e-3, t0 + 3.0), "after breaking, alpha = 0"),
        (partial(cfg), draw(t0 + 1e-3, t0 + 3.0), "after breaking, 0 < alpha < 1"),
        (cfg.with_alpha(1.0).expect("valid"), draw(t0 + 1e-3, t0 + 3.0), "after breaking, alpha = 1"),
    ]
}

fn lagrangian_suite(suite: &mut Suite, cfg: &Config, family: &[Config], rng: &mut ChaCha8Rng) {
    let t0 = cfg.t0();
    let (a, b) = peak_labels(cfg);
    for (c, times, label) in branch_times(cfg, rng) {
        let points: Vec<(f64, f64)> = times.iter().map(|&t| (t, rng.random_range(a - 5.0..b + 5.0))).collect();
        let eval = |points: &[(f64, f64)]| -> Result<Vec<LagrangianSample>> {
            points.iter().map(|&(t, xi)| profile(&c, t, xi)).collect()
        };
        suite.check("lagrangian", format!("y_xi h_bar = U_xi^2 (relative), {label}"), 1e-9, || {
            Ok(sup(eval(&points)?.iter().map(|s| {
                let scale = (s.y_xi * s.h_bar).max(s.u_xi * s.u_xi).max(1e-300);
                s.compatibility_residual().abs() / scale
            })))
        });
        suite.check("lagrangian", format!("h >= h_bar, {label}"), 1e-12, || {
            Ok(sup(eval(&points)?.iter().map(|s| s.h_bar - s.h)))
        });
        suite.check("lagrangian", format!("y nondecreasing in xi, {label}"), 1e-12, || {
            let grid = x_grid(a - 6.0, b + 6.0, 4000);
            let mut worst: f64 = 0.0;
            for &t in times.iter().take(5) {
                let ys: Vec<f64> = grid.iter().map(|&xi| profile(&c, t, xi).map(|s| s.y)).collect::<Result<_>>()?;
                worst = worst.max(sup(ys.windows(2).map(|w| w[0] - w[1])));
            }
            Ok(worst)
        });
    }
    suite.check("lagrangian", "y_t = U with second-order central differences", 0.1, || {
        let mut worst: f64 = 0.0;
        for c in family {
            for t in [t0 - 0.7, t0 + 0.6] {
                for xi in [a - 1.5, 0.5 * (a + b), b + 0.3, b + 2.0] {
                    let err = |dt: f64| -> Result<f64> {
                        let fd = (profile(c, t + dt, xi)?.y - profile(c, t - dt, xi)?.y) / (2.0 * dt);
                        Ok(fd - profile(c, t, xi)?.u)
                    };
                    let (e1, e2, e3) = (err(1e-3)?, err(5e-4)?, err(2.5e-4)?);
                    if e1.abs() > 1e-10 {
                        worst = worst.max((e1 / e2 - 4.0).abs()).max((e2 / e3 - 4.0).abs());
                    }
                }
            }
        }
        Ok(worst)
    });
    for c in family {
        suite.check("lagrangian", format!("∫(U^2 y_xi + h_bar) dxi = branch energy, alpha = {}", c.alpha()), 1e-5, || {
            let mut worst: f64 = 0.0;
            for t in [t0 - 0.5, t0 + 0.5, t0 + 1.5] {
                let density = |x: f64| {
                    profile(c, t, x).map(|s| s.u * s.u * s.y_xi + s.h_bar).unwrap_or(f64::NAN)
                };
                let e = integrate_with_breaks(density, a - 40.0, b + 40.0, &[a, b], 1e-13, 1e-13).value;
                worst = worst.max((e - energy(c, t)).abs());
            }
            Ok(worst)
        });
    }
}

fn transforms_suite(suite: &mut Suite, cfg: &Config, rng: &mut ChaCha8Rng) {
    let t0 = cfg.t0();
    let (a, b) = peak_labels(cfg);
    let xs = x_grid(-6.0, 6.0, 400);
    let mut u_err: f64 = 0.0;
    let mut mass_err: f64 = 0.0;
    let mut push_err: f64 = 0.0;
    let round_trip = (|| -> Result<()> {
        for t in [0.0, t0, t0 + 1.0] {
            let state = eulerian_state(cfg, t);
            let grid = label_grid(&state.nu, a - 25.0, b + 30.0, 3000)?;
            let p = to_lagrangian(state.velocity.as_ref(), &state.mu, &state.nu, &grid, t)?;
            let image = to_eulerian(&p, &xs)?;
            u_err = u_err.max(sup(image.x.iter().zip(&image.u).map(|(&x, &u)| (u - state.velocity.u(x)).abs())));
            for w in image.x.windows(2).step_by(7) {
                for (orig, back) in [(&state.mu, &image.mu), (&state.nu, &image.nu)] {
                    mass_err = mass_err.max((total_mass(orig, w[0], w[1]) - total_mass(back, w[0], w[1])).abs());
                }
            }
            let rule = p.cell_rule();
            for (image_total, label_total) in [
                (image.nu.total(), rule.total(&p.column(|s| s.h))),
                (image.mu.total(), rule.total(&p.column(|s| s.h_bar))),
            ] {
                push_err = push_err.max((image_total - label_total).abs() / label_total);
            }
        }
        Ok(())
    })();
    let failed = round_trip.as_ref().err().map(ToString::to_string);
    let with = |r: f64| match &failed {
        Some(e) => Err(crate::PeakonError::Grid(e.clone())),
        None => Ok(r),
    };
    suite.check("transforms", "u after Lagrangian round trip", 1e-8, || with(u_err));
    suite.check("transforms", "mu, nu interval masses after round trip", 1e-6, || with(mass_err));
    suite.check("transforms", "pushforward mass = ∫h dxi (relative)", 1e-10, || with(push_err));

    let draws: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.random_range(0.0..0.5), rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0)))
        .collect();
    suite.check("transforms", "Eulerian image invariant under 5 random relabelings", 1e-7, || {
        let p = sample_profile(cfg, t0 - 0.5, &default_grid(cfg, 1500)?)?;
        let base = to_eulerian(&p, &xs)?;
        let mut worst: f64 = 0.0;
        for &(amp, freq, shift) in &draws {
            let amp = amp.min(0.9 / freq);
            let g = FnRelabeling {
                map: move |eta: f64| eta + shift + amp * (freq * eta).sin(),
                derivative: move |eta: f64| 1.0 + amp * freq * (freq * eta).cos(),
            };
            let image = to_eulerian(&relabel(&p, &g)?, &xs)?;
            worst = worst.max(sup(base.u.iter().zip(&image.u).map(|(x, y)| (x - y).abs())));
        }
        Ok(worst)
    });

    let c = cfg.with_alpha(1.0).expect("valid");
    let m = c.momentum();
    suite.check("transforms", "alpha = 1 squeezed profile is one peakon", 1e-8, || {
        let mut worst: f64 = 0.0;
        for t in [t0 + 0.5, t0 + 1.0, t0 + 2.0] {
            let p = sample_profile(&c, t, &adapted_grid(&c, t, 2000)?)?;
            let center = one_peakon_center(&c, t);
            let grid = x_grid(center - 6.0, center + 6.0, 400);
            let image = to_eulerian(&squeeze(&p, a, b)?, &grid)?;
            worst = worst.max(sup(grid.iter().zip(&image.u).map(|(&x, &u)| (u - m * (-(x - center).abs()).exp()).abs())));
        }
        Ok(worst)
    });
    suite.check("transforms", "alpha = 1 nu atom travels with mass -4 c1 c2", 1e-6, || {
        let mut worst: f64 = 0.0;
        for t in [t0 + 0.5, t0 + 1.0, t0 + 2.0] {
            let p = sample_profile(&c, t, &adapted_grid(&c, t, 2000)?)?;
            let center = one_peakon_center(&c, t);
            let image = to_eulerian(&p, &x_grid(center - 6.0, center + 6.0, 400))?;
            let atoms = image.nu.atoms();
            if atoms.len() != 1 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((atoms[0].x - center).abs()).max((atoms[0].mass - c.breaking_energy()).abs());
        }
        Ok(worst)
    });
}

fn oracle_suite(suite: &mut Suite, cfg: &Config, family: &[Config], opts: &VerifyOptions) {
    let t0 = cfg.t0();
    let settings = IntegratorSettings {
        dt: opts.oracle_dt,
        ..Default::default()
    };
    let n = opts.oracle_nodes;
    suite.check("oracle", "alpha = 0 energy constant on [0, t0 - guard] (relative)", 1e-5, || {
        let c = cfg.with_alpha(0.0)?;
        let t_end = t0 - settings.breaking_guard;
        let start = initial_state(&c, &adapted_grid(&c, t_end, n)?)?;
        let e0 = start.energy();
        let mut worst: f64 = 0.0;
        integrate(&start, t_end, settings.dt, false, |p| {
            worst = worst.max((p.energy() - e0).abs() / e0);
            Ok(())
        })?;
        Ok(worst)
    });
    for c in family {
        suite.check("oracle", format!("RK4 vs closed form on [0, t0 - guard], alpha = {}", c.alpha()), 1e-4, || {
            let grid = adapted_grid(c, t0 - settings.breaking_guard, n)?;
            let (r, _) = run_pre_leg(c, &grid, &settings, 10)?;
            Ok(r.max_error_y.max(r.max_error_u))
        });
        suite.check("oracle", format!("RK4 vs closed form on [t0 + guard, t0 + 1], alpha = {}", c.alpha()), 1e-4, || {
            let grid = adapted_grid(c, t0 + 1.0, n)?;
            let (r, _) = run_post_leg(c, &grid, t0 + 1.0, &settings, 10)?;
            Ok(r.max_error_y.max(r.max_error_u))
        });
    }
    suite.check("oracle", "Richardson ratio - 16 (fourth order)", 4.0, || {
        let t_end = (t0 - settings.breaking_guard).min(0.9 * t0);
        let grid = adapted_grid(cfg, t_end, 400)?;
        Ok((richardson_ratio(cfg, &grid, t_end, t_end / 18.0)? - 16.0).abs())
    });
    suite.check("oracle", "P even and Q odd for a symmetric profile", 1e-10, || {
        let xi = x_grid(-10.0, 10.0, 400);
        let samples = xi
            .iter()
            .map(|&x| {
                let u = (-x * x).exp();
                let ux = -2.0 * x * u;
                LagrangianSample {
                    y: x,
                    y_xi: 1.0,
                    u,
                    u_xi: ux,
                    h: ux * ux,
                    h_bar: ux * ux,
                }
            })
            .collect();
        let p = LagrangianProfile::new(0.0, xi, samples, vec![])?;
        let pq = compute_pq(&p, false);
        let n = p.len();
        Ok(sup((0..n).map(|i| (pq.p[i] - pq.p[n - 1 - i]).abs().max((pq.q[i] + pq.q[n - 1 - i]).abs()))))
    });
    suite.check("oracle", "apply_breaking touches h_bar on plateau nodes only", 0.0, || {
        let at = sample_profile(cfg, t0, &default_grid(cfg, n)?)?;
        let mut worst: f64 = 0.0;
        for c in family {
            let split = apply_breaking(&at, c.alpha())?;
            for (s, r) in split.samples().iter().zip(at.samples()) {
                worst = worst.max((s.h - r.h).abs());
                if r.y_xi > PLATEAU_Y_XI {
                    worst = worst.max((s.h_bar - r.h_bar).abs());
                }
            }
        }
        Ok(worst)
    });
    suite.check("oracle", "removed energy ∫(h - h_bar) = -4 alpha c1 c2", 1e-6, || {
        let at = sample_profile(cfg, t0, &default_grid(cfg, n)?)?;
        let mut worst: f64 = 0.0;
        for c in family {
            let split = apply_breaking(&at, c.alpha())?;
            let removed = split.cell_rule().total(&split.column(|s| s.h - s.h_bar));
            worst = worst.max((removed - c.alpha() * c.breaking_energy()).abs());
        }
        Ok(worst)
    });
    suite.check("oracle", "U_t = -Q at t = 0", 2e-4, || {
        let grid = default_grid(cfg, n)?;
        let pq = compute_pq(&sample_profile(cfg, 0.0, &grid)?, false);
        let dt = 1e-4;
        let mut worst: f64 = 0.0;
        for (i, &xi) in grid.iter().enumerate() {
            let ut = (profile(cfg, dt, xi)?.u - profile(cfg, -dt, xi)?.u) / (2.0 * dt);
            worst = worst.max((ut + pq.q[i]).abs());
        }
        Ok(worst)
    });
}
