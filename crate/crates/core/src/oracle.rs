//! Direct integration of the Lagrangian ODE system, independent of the closed
//! forms it is used to validate.
//!
//! The nonlocal terms
//! `P = 1/4 ∫ e^{-|y(ξ)-y(η)|} (2U²y_ξ + h)(η) dη` and
//! `Q = -1/4 ∫ sgn(ξ-η) e^{-|y(ξ)-y(η)|} (2U²y_ξ + h)(η) dη`
//! are split into the parts from the left and from the right of each node.
//! Because `y` is nondecreasing, both parts obey a one-step recursion along the
//! grid, so a full evaluation costs `O(N)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::lagrangian::{initial_profile, profile, LagrangianSample};
use crate::params::Config;
use crate::quadrature::CellRule;
use crate::transforms::{LagrangianProfile, PLATEAU_Y_XI};

/// Magnitude above which a field is considered to have blown up.
pub const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PQField {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub scheme: Scheme,
    /// Half-width of the window around `t0` that the integrator never enters.
    pub breaking_guard: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::Rk4,
            breaking_guard: 0.05,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PeakonError::Range {
                name: "dt",
                value: self.dt,
                expected: "finite and > 0",
            });
        }
        if !(self.breaking_guard >= 0.0) {
            return Err(PeakonError::Range {
                name: "breaking_guard",
                value: self.breaking_guard,
                expected: ">= 0",
            });
        }
        Ok(())
    }
}

/// `P` and `Q` at every node; `use_hbar` takes `h_bar` in place of `h`.
pub fn compute_pq(profile: &LagrangianProfile, use_hbar: bool) -> PQField {
    pq_with_rule(&profile.cell_rule(), profile.samples(), use_hbar)
}

fn pq_with_rule(rule: &CellRule, s: &[LagrangianSample], use_hbar: bool) -> PQField {
    let n = s.len();
    let g: Vec<f64> = s
        .iter()
        .map(|v| 2.0 * v.u * v.u * v.y_xi + if use_hbar { v.h_bar } else { v.h })
        .collect();
    // up[k] = e^{y_k - y_{k-1}}, down[k] = e^{y_{k-1} - y_k}; stencils span at most
    // three cells, so every kernel factor is a short product of these.
    let mut up = vec![1.0; n];
    let mut down = vec![1.0; n];
    for k in 1..n {
        let gap = s[k].y - s[k - 1].y;
        up[k] = gap.exp();
        down[k] = (-gap).exp();
    }
    // e^{y_j - y_i}
    let factor = |j: usize, i: usize| -> f64 {
        if j <= i {
            down[j + 1..=i].iter().product()
        } else {
            up[i + 1..=j].iter().product()
        }
    };
    let sweep_left = || {
        let mut left = vec![0.0; n];
        for i in 1..n {
            let (start, w) = rule.stencil(i - 1);
            let cell: f64 = w.iter().enumerate().map(|(k, wk)| wk * factor(start + k, i) * g[start + k]).sum();
            left[i] = down[i] * left[i - 1] + cell;
        }
        left
    };
    let sweep_right = || {
        let mut right = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            let (start, w) = rule.stencil(i);
            let cell: f64 = w.iter().enumerate().map(|(k, wk)| wk * factor(i, start + k) * g[start + k]).sum();
            right[i] = down[i + 1] * right[i + 1] + cell;
        }
        right
    };
    let (left, right) = (sweep_left(), sweep_right());
    PQField {
        p: left.iter().zip(&right).map(|(l, r)| 0.25 * (l + r)).collect(),
        q: left.iter().zip(&right).map(|(l, r)| -0.25 * (l - r)).collect(),
    }
}

/// `P` and `Q` by direct summation, `O(N^2)`; used to cross-check [`compute_pq`].
pub fn compute_pq_direct(profile: &LagrangianProfile, use_hbar: bool) -> PQField {
    let rule = profile.cell_rule();
    let s = profile.samples();
    let n = s.len();
    let g: Vec<f64> = s
        .iter()
        .map(|v| 2.0 * v.u * v.u * v.y_xi + if use_hbar { v.h_bar } else { v.h })
        .collect();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let yi = s[i].y;
        let (mut lsum, mut rsum) = (0.0, 0.0);
        for j in 0..n - 1 {
            let (start, w) = rule.stencil(j);
            // one-sided kernel per cell so the integrand stays smooth
            let sign = if j < i { 1.0 } else { -1.0 };
            let cell: f64 = w
                .iter()
                .enumerate()
                .map(|(m, wk)| wk * (sign * (s[start + m].y - yi)).exp() * g[start + m])
                .sum();
            if j < i {
                lsum += cell;
            } else {
                rsum += cell;
            }
        }
        p[i] = 0.25 * (lsum + rsum);
        q[i] = -0.25 * (lsum - rsum);
    }
    PQField { p, q }
}

type Fields = [f64; 6];

fn pack(s: &LagrangianSample) -> Fields {
    [s.y, s.u, s.y_xi, s.u_xi, s.h, s.h_bar]
}

fn unpack(f: &Fields) -> LagrangianSample {
    LagrangianSample {
        y: f[0],
        u: f[1],
        y_xi: f[2],
        u_xi: f[3],
        h: f[4],
        h_bar: f[5],
    }
}

const FIELD_NAMES: [&str; 6] = ["y", "U", "y_xi", "U_xi", "h", "h_bar"];

fn rhs(state: &[Fields], pq: &PQField, use_hbar: bool) -> Vec<Fields> {
    state
        .iter()
        .zip(pq.p.iter().zip(&pq.q))
        .map(|(f, (&p, &q))| {
            let [_, u, y_xi, u_xi, h, h_bar] = *f;
            let source = if use_hbar { h_bar } else { h };
            let pressure = u * u - p;
            let dh = 2.0 * pressure * u_xi;
            [u, -q, u_xi, 0.5 * source + pressure * y_xi, dh, dh]
        })
        .collect()
}

fn profile_from(template: &LagrangianProfile, t: f64, state: &[Fields]) -> Result<LagrangianProfile> {
    template.with_samples(t, state.iter().map(unpack).collect())
}

fn check_blowup(t: f64, state: &[Fields]) -> Result<()> {
    for f in state {
        for (k, v) in f.iter().enumerate() {
            if !v.is_finite() || v.abs() > BLOWUP_LIMIT {
                return Err(PeakonError::Blowup {
                    t,
                    field: FIELD_NAMES[k],
                    value: *v,
                });
            }
        }
    }
    Ok(())
}

/// One classical Runge–Kutta step, recomputing `P` and `Q` at every stage.
///
/// `pq` must belong to `profile`; `use_hbar` selects `h_bar` on the right-hand
/// side, as required after breaking.
pub fn step(
    profile: &LagrangianProfile,
    pq: &PQField,
    dt: f64,
    use_hbar: bool,
) -> Result<LagrangianProfile> {
    if dt == 0.0 {
        return Ok(profile.clone());
    }
    let t = profile.t();
    let y0: Vec<Fields> = profile.samples().iter().map(pack).collect();
    let axpy = |base: &[Fields], k: &[Fields], a: f64| -> Vec<Fields> {
        base.iter()
            .zip(k)
            .map(|(b, d)| std::array::from_fn(|m| b[m] + a * d[m]))
            .collect()
    };
    let rule = profile.cell_rule();
    let stage = |state: &[Fields]| -> Vec<Fields> {
        let samples: Vec<LagrangianSample> = state.iter().map(unpack).collect();
        rhs(state, &pq_with_rule(&rule, &samples, use_hbar), use_hbar)
    };
    let k1 = rhs(&y0, pq, use_hbar);
    let k2 = stage(&axpy(&y0, &k1, 0.5 * dt));
    let k3 = stage(&axpy(&y0, &k2, 0.5 * dt));
    let k4 = stage(&axpy(&y0, &k3, dt));
    let next: Vec<Fields> = (0..y0.len())
        .map(|i| {
            std::array::from_fn(|m| {
                y0[i][m] + dt / 6.0 * (k1[i][m] + 2.0 * k2[i][m] + 2.0 * k3[i][m] + k4[i][m])
            })
        })
        .collect();
    check_blowup(t + dt, &next)?;
    profile_from(profile, t + dt, &next)
}

/// Fixed-step integration up to `t_end`; the last step is shortened to land
/// on it. `observe` sees every accepted state, the initial one included.
pub fn integrate<F>(
    start: &LagrangianProfile,
    t_end: f64,
    dt: f64,
    use_hbar: bool,
    mut observe: F,
) -> Result<LagrangianProfile>
where
    F: FnMut(&LagrangianProfile) -> Result<()>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PeakonError::Range {
            name: "dt",
            value: dt,
            expected: "finite and > 0",
        });
    }
    let t0 = start.t();
    let steps = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut current = start.clone();
    observe(&current)?;
    for k in 0..steps {
        let target = if k + 1 == steps { t_end } else { t0 + (k + 1) as f64 * dt };
        let h = target - current.t();
        let pq = compute_pq(&current, use_hbar);
        current = step(&current, &pq, h, use_hbar)?;
        observe(&current)?;
    }
    Ok(current)
}

/// Writes `t,xi,y,U,h,h_bar` rows of every `stride`-th state.
pub struct TraceWriter<W: Write> {
    out: W,
    stride: usize,
    seen: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, stride: usize) -> io::Result<Self> {
        out.write_all(b"t,xi,y,U,h,h_bar\n")?;
        Ok(Self {
            out,
            stride: stride.max(1),
            seen: 0,
        })
    }

    pub fn record(&mut self, p: &LagrangianProfile) -> io::Result<()> {
        if self.seen % self.stride == 0 {
            for (xi, s) in p.xi().iter().zip(p.samples()) {
                writeln!(
                    self.out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    p.t(),
                    xi,
                    s.y,
                    s.u,
                    s.h,
                    s.h_bar
                )?;
            }
        }
        self.seen += 1;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Splits the concentrated energy at breaking: on collapsed nodes
/// `h_bar = (1 - alpha) h`, elsewhere `h_bar = h`. `h` is left untouched.
pub fn apply_breaking(profile: &LagrangianProfile, alpha: f64) -> Result<LagrangianProfile> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PeakonError::Range {
            name: "alpha",
            value: alpha,
            expected: "in [0, 1]",
        });
    }
    let mut out = profile.clone();
    let mut collapsed = 0;
    for s in out.samples_mut() {
        if s.y_xi <= PLATEAU_Y_XI {
            s.h_bar = (1.0 - alpha) * s.h;
            collapsed += 1;
        } else {
            s.h_bar = s.h;
        }
    }
    if collapsed == 0 {
        return Err(PeakonError::NoBreaking);
    }
    Ok(out)
}

/// RK4 for `z_t = V`, `V_t = -sgn(z) V (V + c1 + c2)` from `t0` to `t_end`.
///
/// The sign is frozen over each step at its value at the start of the step,
/// with `sgn(0) = 0`.
pub fn reduced_zv_integrate(cfg: &Config, z0: f64, v0: f64, t_end: f64, dt: f64) -> (f64, f64) {
    let m = cfg.momentum();
    let span = t_end - cfg.t0();
    if !(span > 0.0) || !(dt > 0.0) {
        return (z0, v0);
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let (mut z, mut v) = (z0, v0);
    for _ in 0..steps {
        let sign = if z > 0.0 {
            1.0
        } else if z < 0.0 {
            -1.0
        } else {
            0.0
        };
        let f = |v: f64| -sign * v * (v + m);
        let (a1, b1) = (v, f(v));
        let (a2, b2) = (v + 0.5 * h * b1, f(v + 0.5 * h * b1));
        let (a3, b3) = (v + 0.5 * h * b2, f(v + 0.5 * h * b2));
        let (a4, b4) = (v + h * b3, f(v + h * b3));
        z += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    (z, v)
}

/// Sup-norm distance in `y` and `U` between a profile and the closed form at
/// the same time.
pub fn closed_form_error(cfg: &Config, p: &LagrangianProfile) -> Result<(f64, f64)> {
    let (mut ey, mut eu) = (0.0_f64, 0.0_f64);
    for (&xi, s) in p.xi().iter().zip(p.samples()) {
        let exact = profile(cfg, p.t(), xi)?;
        ey = ey.max((s.y - exact.y).abs());
        eu = eu.max((s.u - exact.u).abs());
    }
    Ok((ey, eu))
}

/// Which side of the breaking time a leg covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    BeforeBreaking,
    AfterBreaking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub leg: Leg,
    pub alpha: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub max_error_y: f64,
    pub max_error_u: f64,
}

/// Profile at `t = 0` in the identity labelling.
pub fn initial_state(cfg: &Config, xi: &[f64]) -> Result<LagrangianProfile> {
    let (a, b) = crate::lagrangian::peak_labels(cfg);
    LagrangianProfile::new(
        0.0,
        xi.to_vec(),
        xi.iter().map(|&x| initial_profile(cfg, x)).collect(),
        vec![a, b],
    )
}

/// Integrates from `t = 0` to `t0 - guard` and records the worst deviation
/// from the closed form every `check_stride` steps and at the end.
pub fn run_pre_leg(
    cfg: &Config,
    xi: &[f64],
    settings: &IntegratorSettings,
    check_stride: usize,
) -> Result<(LegReport, LagrangianProfile)> {
    settings.validate()?;
    let start = initial_state(cfg, xi)?;
    let t_end = cfg.t0() - settings.breaking_guard;
    run_leg(cfg, start, t_end, settings.dt, false, 0.0, check_stride, Leg::BeforeBreaking)
}

/// Restarts from the closed-form breaking profile, applies the energy split,
/// integrates to `t_end` and compares on `[t0 + guard, t_end]`.
pub fn run_post_leg(
    cfg: &Config,
    xi: &[f64],
    t_end: f64,
    settings: &IntegratorSettings,
    check_stride: usize,
) -> Result<(LegReport, LagrangianProfile)> {
    settings.validate()?;
    let at = crate::lagrangian::sample_profile(cfg, cfg.t0(), xi)?;
    let start = apply_breaking(&at, cfg.alpha())?;
    let from = cfg.t0() + settings.breaking_guard;
    run_leg(cfg, start, t_end, settings.dt, true, from, check_stride, Leg::AfterBreaking)
}

#[allow(clippy::too_many_arguments)]
fn run_leg(
    cfg: &Config,
    start: LagrangianProfile,
    t_end: f64,
    dt: f64,
    use_hbar: bool,
    check_from: f64,
    check_stride: usize,
    leg: Leg,
) -> Result<(LegReport, LagrangianProfile)> {
    let t_start = start.t();
    let stride = check_stride.max(1);
    let mut count = 0usize;
    let (mut ey, mut eu) = (0.0_f64, 0.0_f64);
    let last = integrate(&start, t_end, dt, use_hbar, |p| {
        let due = count % stride == 0 || (p.t() - t_end).abs() < 1e-12;
        if due && p.t() >= check_from - 1e-12 {
            let (y, u) = closed_form_error(cfg, p)?;
            ey = ey.max(y);
            eu = eu.max(u);
        }
        count += 1;
        Ok(())
    })?;
    Ok((
        LegReport {
            leg,
            alpha: cfg.alpha(),
            t_start,
            t_end,
            steps: count.saturating_sub(1),
            max_error_y: ey,
            max_error_u: eu,
        },
        last,
    ))
}

/// `(u_dt - u_{dt/2}) / (u_{dt/2} - u_{dt/4})` in the sup norm over `(y, U)`,
/// integrating the pre-breaking system from `t = 0` to `t_end`.
/// Fourth-order schemes give values near 16.
pub fn richardson_ratio(cfg: &Config, xi: &[f64], t_end: f64, dt: f64) -> Result<f64> {
    let start = initial_state(cfg, xi)?;
    let run = |h: f64| integrate(&start, t_end, h, false, |_| Ok(()));
    let (a, b, c) = (run(dt)?, run(0.5 * dt)?, run(0.25 * dt)?);
    let diff = |p: &LagrangianProfile, q: &LagrangianProfile| {
        p.samples()
            .iter()
            .zip(q.samples())
            .map(|(s, r)| (s.y - r.y).abs().max((s.u - r.u).abs()))
            .fold(0.0_f64, f64::max)
    };
    Ok(diff(&a, &b) / diff(&b, &c))
}
