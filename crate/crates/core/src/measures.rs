//! Energy measures `mu` and `nu` at every time.
//!
//! A [`Measure`] is an absolutely continuous part, given either as a closed
//! form or as tabulated values, plus a finite list of atoms. Density kinks are
//! stored as breakpoints so quadrature never straddles them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::eulerian::{
    self, branch, one_peakon_center, trajectories, ClosedFormVelocity, SolutionBranch,
    VelocityField,
};
use crate::params::Config;
use crate::quadrature::{integrate, integrate_with_breaks};

/// Half-width of the window, around the breakpoints, outside which densities are neglected.
pub const TRUNCATION: f64 = 40.0;

const QUAD_ABS_TOL: f64 = 1e-14;
const QUAD_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Piecewise density sampled at increasing nodes, with its running integral.
///
/// Between nodes the running integral is the cubic Hermite interpolant whose
/// slopes are the density values, so interval masses are fourth-order accurate.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TabulatedDensity {
    /// `cumulative[i]` is the mass of `(xs[0], xs[i])`.
    pub fn new(xs: Vec<f64>, values: Vec<f64>, cumulative: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() != cumulative.len() {
            return Err(PeakonError::Grid("tabulated density arrays differ in length".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PeakonError::Grid("tabulated density nodes must increase".into()));
        }
        Ok(Self {
            xs,
            values,
            cumulative,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 0 || x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&v| v <= x).min(n - 1).max(1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let w = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    /// Mass of `(xs[0], x)`.
    fn running(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 0 || x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return self.cumulative[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x).max(1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let (m0, m1) = (self.values[k - 1] * h, self.values[k] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * c0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * c1
            + (s3 - s2) * m1
    }
}

#[derive(Clone, Default)]
pub enum Density {
    #[default]
    Zero,
    Closed(DensityFn),
    Tabulated(TabulatedDensity),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Zero => write!(f, "Zero"),
            Density::Closed(_) => write!(f, "Closed(<fn>)"),
            Density::Tabulated(t) => write!(f, "Tabulated({} nodes)", t.xs.len()),
        }
    }
}

/// Positive finite Radon measure: density plus atoms.
#[derive(Debug, Clone, Default)]
pub struct Measure {
    density: Density,
    breakpoints: Vec<f64>,
    atoms: Vec<Atom>,
    support: (f64, f64),
}

impl Measure {
    pub fn zero() -> Self {
        Self {
            support: (-TRUNCATION, TRUNCATION),
            ..Self::default()
        }
    }

    pub fn closed_form<F>(density: F, breakpoints: Vec<f64>, atoms: Vec<Atom>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut breakpoints = breakpoints;
        breakpoints.sort_by(f64::total_cmp);
        let lo = breakpoints.first().copied().unwrap_or(0.0) - TRUNCATION;
        let hi = breakpoints.last().copied().unwrap_or(0.0) + TRUNCATION;
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        Self {
            density: Density::Closed(Arc::new(density)),
            breakpoints,
            atoms,
            support: (lo, hi),
        }
    }

    pub fn tabulated(table: TabulatedDensity, breakpoints: Vec<f64>, atoms: Vec<Atom>) -> Self {
        let support = match (table.xs.first(), table.xs.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (-TRUNCATION, TRUNCATION),
        };
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut breakpoints = breakpoints;
        breakpoints.sort_by(f64::total_cmp);
        Self {
            density: Density::Tabulated(table),
            breakpoints,
            atoms,
            support,
        }
    }

    pub fn atoms_only(atoms: Vec<Atom>) -> Self {
        let mut m = Self::zero();
        m.breakpoints = atoms.iter().map(|a| a.x).collect();
        m.atoms = atoms;
        m.atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        m
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn density_at(&self, x: f64) -> f64 {
        match &self.density {
            Density::Zero => 0.0,
            Density::Closed(f) => f(x),
            Density::Tabulated(t) => t.value(x),
        }
    }

    /// Mass of the atom at exactly `x`, if any.
    pub fn atom_mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.x == x).map(|a| a.mass).sum()
    }

    /// Absolutely continuous mass of `[a, b]`.
    pub fn density_mass(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support;
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        match &self.density {
            Density::Zero => 0.0,
            Density::Closed(f) => {
                integrate_with_breaks(|x| f(x), a, b, &self.breakpoints, QUAD_ABS_TOL, QUAD_REL_TOL)
                    .value
            }
            Density::Tabulated(t) => t.running(b) - t.running(a),
        }
    }

    /// Mass of `(-∞, x)`; atoms at `x` are excluded.
    pub fn mass_below(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.x < x).map(|a| a.mass).sum();
        atoms + self.density_mass(self.support.0, x)
    }

    pub fn total(&self) -> f64 {
        total_mass(self, self.support.0, self.support.1)
    }

    /// Precomputed running mass for many `mass_below` queries.
    pub fn cdf(&self) -> MeasureCdf<'_> {
        MeasureCdf::new(self)
    }

    /// Samples of the density on `grid` together with breakpoints and atoms.
    pub fn sample(&self, grid: &[f64]) -> MeasureSamples {
        MeasureSamples {
            breakpoints: self.breakpoints.clone(),
            atoms: self.atoms.clone(),
            samples: grid
                .iter()
                .map(|&x| DensitySample {
                    x,
                    density: self.density_at(x),
                })
                .collect(),
        }
    }
}

/// Mass of the closed interval `[a, b]`: density integral plus atoms inside,
/// boundary atoms included.
pub fn total_mass(m: &Measure, a: f64, b: f64) -> f64 {
    if b < a {
        return 0.0;
    }
    let atoms: f64 = m
        .atoms
        .iter()
        .filter(|at| at.x >= a && at.x <= b)
        .map(|at| at.mass)
        .sum();
    atoms + m.density_mass(a, b)
}

/// Running mass of a measure at anchors, refined by local quadrature on query.
pub struct MeasureCdf<'a> {
    measure: &'a Measure,
    anchors: Vec<f64>,
    running: Vec<f64>,
}

impl<'a> MeasureCdf<'a> {
    const SPACING: f64 = 0.25;

    fn new(measure: &'a Measure) -> Self {
        let (lo, hi) = measure.support;
        let mut anchors: Vec<f64> = Vec::new();
        if let Density::Closed(_) = measure.density {
            let steps = ((hi - lo) / Self::SPACING).ceil().max(1.0) as usize;
            anchors.extend((0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64));
            anchors.extend(measure.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
            anchors.sort_by(f64::total_cmp);
            anchors.dedup();
        } else {
            anchors.push(lo);
        }
        let mut running = Vec::with_capacity(anchors.len());
        let mut acc = 0.0;
        running.push(0.0);
        for w in anchors.windows(2) {
            acc += measure.density_mass(w[0], w[1]);
            running.push(acc);
        }
        Self {
            measure,
            anchors,
            running,
        }
    }

    /// `ν((-∞, x))`.
    pub fn mass_below(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .measure
            .atoms
            .iter()
            .take_while(|a| a.x < x)
            .map(|a| a.mass)
            .sum();
        atoms + self.density_below(x)
    }

    pub fn density_below(&self, x: f64) -> f64 {
        match &self.measure.density {
            Density::Zero => 0.0,
            Density::Tabulated(_) => self.measure.density_mass(self.measure.support.0, x),
            Density::Closed(f) => {
                if x <= self.anchors[0] {
                    return 0.0;
                }
                let k = self.anchors.partition_point(|&a| a <= x) - 1;
                let base = self.running[k];
                let a = self.anchors[k];
                if x == a || k + 1 == self.anchors.len() {
                    return base;
                }
                base + integrate(|s| f(s), a, x, QUAD_ABS_TOL, 1e-15).value
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub x: f64,
    pub density: f64,
}

/// JSON shape of a sampled measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSamples {
    pub breakpoints: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub samples: Vec<DensitySample>,
}

/// `(u, mu, nu)` at one time.
#[derive(Clone)]
pub struct EulerianState {
    pub t: f64,
    pub velocity: Arc<dyn VelocityField>,
    pub mu: Measure,
    pub nu: Measure,
}

impl fmt::Debug for EulerianState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EulerianState")
            .field("t", &self.t)
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .finish()
    }
}

pub fn eulerian_state(cfg: &Config, t: f64) -> EulerianState {
    EulerianState {
        t,
        velocity: Arc::new(ClosedFormVelocity { cfg: *cfg, t }),
        mu: mu_at(cfg, t),
        nu: nu_at(cfg, t),
    }
}

/// `u_x(t, ·)^2` with its kinks.
fn ux_squared(cfg: &Config, t: f64) -> Measure {
    let cfg = *cfg;
    let peaks = eulerian::peak_positions(&cfg, t);
    match branch(&cfg, t) {
        SolutionBranch::PreBreaking | SolutionBranch::PostTwoPeakon => {
            let pair = trajectories(&cfg, t).expect("pair exists away from t0");
            Measure::closed_form(move |x| pair.ux(x).powi(2), peaks, Vec::new())
        }
        SolutionBranch::AtBreaking | SolutionBranch::PostOnePeakon => {
            let m2 = cfg.momentum().powi(2);
            let center = peaks[0];
            Measure::closed_form(
                move |x| m2 * (-2.0 * (x - center).abs()).exp(),
                peaks,
                Vec::new(),
            )
        }
    }
}

/// The measure `mu(t)`; at `t0` it keeps the fraction `1 - alpha` of the concentrated energy.
pub fn mu_at(cfg: &Config, t: f64) -> Measure {
    let mut m = ux_squared(cfg, t);
    if branch(cfg, t) == SolutionBranch::AtBreaking {
        m.atoms.push(Atom {
            x: 0.0,
            mass: (1.0 - cfg.alpha()) * cfg.breaking_energy(),
        });
    }
    m
}

/// The measure `nu(t)`, which keeps track of all concentrated or removed energy.
pub fn nu_at(cfg: &Config, t: f64) -> Measure {
    match branch(cfg, t) {
        SolutionBranch::PreBreaking => ux_squared(cfg, t),
        SolutionBranch::AtBreaking => {
            let mut m = ux_squared(cfg, t);
            m.atoms.push(Atom {
                x: 0.0,
                mass: cfg.breaking_energy(),
            });
            m
        }
        SolutionBranch::PostOnePeakon => {
            let mut m = ux_squared(cfg, t);
            m.atoms.push(Atom {
                x: one_peakon_center(cfg, t),
                mass: cfg.breaking_energy(),
            });
            m
        }
        SolutionBranch::PostTwoPeakon => {
            let cfg = *cfg;
            let pair = trajectories(&cfg, t).expect("pair exists after breaking");
            let removed = cfg.alpha() > 0.0;
            Measure::closed_form(
                move |x| {
                    let base = pair.ux(x).powi(2);
                    if removed && x > pair.q1 && x < pair.q2 {
                        base + nu_m_unchecked(&cfg, t, x)
                    } else {
                        base
                    }
                },
                vec![pair.q1, pair.q2],
                Vec::new(),
            )
        }
    }
}

/// Density of the removed energy spread between the peaks after breaking.
pub fn nu_m_density(cfg: &Config, t: f64, x: f64) -> Result<f64> {
    if t <= cfg.t0() {
        return Err(PeakonError::Domain(format!(
            "nu_m is defined after breaking only (t = {t}, t0 = {})",
            cfg.t0()
        )));
    }
    if cfg.alpha() == 0.0 || cfg.alpha() == 1.0 {
        return Ok(0.0);
    }
    let pair = trajectories(cfg, t)?;
    if !(x > pair.q1 && x < pair.q2) {
        return Err(PeakonError::Domain(format!(
            "x = {x} outside ({}, {})",
            pair.q1, pair.q2
        )));
    }
    Ok(nu_m_unchecked(cfg, t, x))
}

fn nu_m_unchecked(cfg: &Config, t: f64, x: f64) -> f64 {
    let d = cfg.derived();
    let (d1, d2, lt) = (d.d1, d.d2, d.l_tilde);
    let alpha = cfg.alpha();
    let s = t - cfg.t0();
    let gap = -(-lt * s).exp_m1();
    let prefactor = 4.0 * alpha * (1.0 - alpha) * (cfg.c1() * cfg.c2()).powi(2) * gap * gap;
    // Denominator e^x a - b, with e^{-d1 s} folded into a so nothing overflows.
    let a = lt * (-d1 * s).exp() + d2 - d1 * (-lt * s).exp();
    let b = d1 - d2 * (-lt * s).exp() - lt * (d2 * s).exp();
    if x.abs() > 300.0 {
        let log_den = if x > 0.0 {
            x + (a - b * (-x).exp()).abs().ln()
        } else {
            (x.exp() * a - b).abs().ln()
        };
        (prefactor.ln() + x - 2.0 * log_den).exp()
    } else {
        let den = x.exp() * a - b;
        prefactor * x.exp() / (den * den)
    }
}
