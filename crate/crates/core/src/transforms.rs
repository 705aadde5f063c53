//! Maps between Eulerian states `(u, mu, nu)` and Lagrangian profiles, plus
//! relabeling and membership checks.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::eulerian::VelocityField;
use crate::lagrangian::{clustered_grid, LagrangianSample};
use crate::measures::{Atom, Measure, TabulatedDensity};
use crate::quadrature::{trapezoid_cumulative, CellRule};
use crate::roots::sup_below;

/// `y_xi` below which a node counts as collapsed.
pub const PLATEAU_Y_XI: f64 = 1e-10;
/// Smallest `h`-mass of a collapsed run that is reported as an atom.
pub const PLATEAU_MASS: f64 = 1e-12;
/// Relative tolerance on `y_xi h_bar = U_xi^2` in membership checks.
pub const COMPATIBILITY_TOL: f64 = 1e-9;
/// Absolute slack on `h >= h_bar` in membership checks.
pub const DOMINATION_TOL: f64 = 1e-12;

const BISECTION_X_TOL: f64 = 1e-15;
const BISECTION_F_TOL: f64 = 1e-13;

/// Lagrangian samples on a strictly increasing label grid at one time.
///
/// `breaks` lists labels where the fields may have kinks; quadrature over the
/// grid never interpolates across them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianProfile {
    t: f64,
    xi: Vec<f64>,
    samples: Vec<LagrangianSample>,
    breaks: Vec<f64>,
}

impl LagrangianProfile {
    pub fn new(
        t: f64,
        xi: Vec<f64>,
        samples: Vec<LagrangianSample>,
        mut breaks: Vec<f64>,
    ) -> Result<Self> {
        if xi.len() != samples.len() {
            return Err(PeakonError::Grid(format!(
                "{} labels but {} samples",
                xi.len(),
                samples.len()
            )));
        }
        if xi.len() < 2 {
            return Err(PeakonError::Grid("a profile needs at least two nodes".into()));
        }
        if let Some(w) = xi.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(PeakonError::Grid(format!(
                "labels must increase strictly, found {} then {}",
                w[0], w[1]
            )));
        }
        breaks.retain(|b| b.is_finite());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(Self {
            t,
            xi,
            samples,
            breaks,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn samples(&self) -> &[LagrangianSample] {
        &self.samples
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Same grid and breaks with new samples at time `t`.
    pub fn with_samples(&self, t: f64, samples: Vec<LagrangianSample>) -> Result<Self> {
        Self::new(t, self.xi.clone(), samples, self.breaks.clone())
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [LagrangianSample] {
        &mut self.samples
    }

    pub fn column(&self, f: impl Fn(&LagrangianSample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    /// Quadrature weights adapted to the grid and its breaks.
    pub fn cell_rule(&self) -> CellRule {
        CellRule::new(&self.xi, &self.breaks)
    }

    /// Running integral of `h` from the first node.
    pub fn cumulative_h(&self) -> Vec<f64> {
        self.cell_rule().cumulative(&self.column(|s| s.h))
    }

    /// `∫ (U^2 y_xi + h_bar) dxi`, the energy carried by `u`.
    pub fn energy(&self) -> f64 {
        self.cell_rule()
            .total(&self.column(|s| s.u * s.u * s.y_xi + s.h_bar))
    }

    /// Writes `t,xi,y,y_xi,U,U_xi,h,h_bar` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> io::Result<()> {
        if header {
            out.write_all(b"t,xi,y,y_xi,U,U_xi,h,h_bar\n")?;
        }
        for (xi, s) in self.xi.iter().zip(&self.samples) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t, xi, s.y, s.y_xi, s.u, s.u_xi, s.h, s.h_bar
            )?;
        }
        Ok(())
    }
}

/// Labels where a profile built from `nu` has kinks: images of the density
/// breakpoints, and both ends of the label interval swallowed by each atom.
pub fn kink_labels(nu: &Measure) -> Vec<f64> {
    let cdf = nu.cdf();
    let mut out = Vec::new();
    for &b in nu.breakpoints() {
        let below = cdf.mass_below(b) + b;
        out.push(below);
        let atom = nu.atom_mass_at(b);
        if atom > 0.0 {
            out.push(below + atom);
        }
    }
    for a in nu.atoms() {
        let below = cdf.mass_below(a.x) + a.x;
        out.push(below);
        out.push(below + nu.atom_mass_at(a.x));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Clustered label grid on `[lo, hi]` resolving the kinks of the profile that
/// [`to_lagrangian`] builds from `nu`.
pub fn label_grid(nu: &Measure, lo: f64, hi: f64, nodes: usize) -> Result<Vec<f64>> {
    let kinks = kink_labels(nu);
    // Kinks closer than a cluster width would overlap; keep the first of each.
    let step = (hi - lo) / nodes.max(2) as f64;
    let mut spaced: Vec<f64> = Vec::new();
    for k in kinks {
        if spaced.last().map_or(true, |&p| k - p > 2.0 * step) {
            spaced.push(k);
        }
    }
    clustered_grid(lo, hi, nodes, &spaced)
}

/// The map from Eulerian to Lagrangian coordinates.
///
/// `y(xi)` is the largest `y` with `nu((-∞, y)) + y < xi`. Labels inside the
/// jump of an atom land exactly on the atom, with `y_xi = 0`, `h = 1` and
/// `h_bar` the ratio of the `mu` and `nu` atoms.
pub fn to_lagrangian(
    velocity: &dyn VelocityField,
    mu: &Measure,
    nu: &Measure,
    xi_grid: &[f64],
    t: f64,
) -> Result<LagrangianProfile> {
    let cdf = nu.cdf();
    let jumps: Vec<(f64, f64, f64, f64)> = nu
        .atoms()
        .iter()
        .filter(|a| a.mass > 0.0)
        .map(|a| {
            let start = cdf.mass_below(a.x) + a.x;
            let mass = nu.atom_mass_at(a.x);
            (start, start + mass, a.x, mu.atom_mass_at(a.x) / mass)
        })
        .collect();
    let map = |y: f64| cdf.mass_below(y) + y;
    let samples = xi_grid
        .par_iter()
        .map(|&xi| {
            if let Some(&(_, _, x, ratio)) =
                jumps.iter().find(|&&(lo, hi, _, _)| xi >= lo && xi <= hi)
            {
                return Ok(LagrangianSample {
                    y: x,
                    y_xi: 0.0,
                    u: velocity.u(x),
                    u_xi: 0.0,
                    h: 1.0,
                    h_bar: ratio,
                });
            }
            let y = sup_below(map, xi, xi - 1.0, xi, BISECTION_X_TOL, BISECTION_F_TOL)?;
            let rho = nu.density_at(y);
            let y_xi = 1.0 / (1.0 + rho);
            Ok(LagrangianSample {
                y,
                y_xi,
                u: velocity.u(y),
                u_xi: velocity.ux(y) * y_xi,
                h: rho * y_xi,
                h_bar: mu.density_at(y) * y_xi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LagrangianProfile::new(t, xi_grid.to_vec(), samples, kink_labels(nu))
}

/// Eulerian image of a profile.
#[derive(Debug, Clone)]
pub struct EulerianImage {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub mu: Measure,
    pub nu: Measure,
}

/// A maximal run of collapsed nodes `first..=last` carrying positive mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub first: usize,
    pub last: usize,
    pub y: f64,
    pub mass: f64,
    pub reduced_mass: f64,
}

/// Runs of at least two collapsed cells whose `h`-integral exceeds [`PLATEAU_MASS`].
pub fn plateaus(profile: &LagrangianProfile) -> Vec<Plateau> {
    let s = profile.samples();
    let rule = profile.cell_rule();
    let big_h = rule.cumulative(&profile.column(|v| v.h));
    let big_hbar = rule.cumulative(&profile.column(|v| v.h_bar));
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        if s[i].y_xi >= PLATEAU_Y_XI {
            i += 1;
            continue;
        }
        let mut k = i;
        while k + 1 < s.len() && s[k + 1].y_xi < PLATEAU_Y_XI {
            k += 1;
        }
        let mass = big_h[k] - big_h[i];
        if k >= i + 2 && mass > PLATEAU_MASS {
            out.push(Plateau {
                first: i,
                last: k,
                y: s[(i + k) / 2].y,
                mass,
                reduced_mass: big_hbar[k] - big_hbar[i],
            });
        }
        i = k + 1;
    }
    out
}

/// The map from Lagrangian to Eulerian coordinates.
///
/// `u` is the cubic Hermite interpolant in `x` through `(y, U)` with slopes
/// `U_xi / y_xi`; beyond the outermost characteristics it continues as a
/// decaying exponential. Collapsed runs become atoms of mass `∫h` (for `nu`)
/// and `∫h_bar` (for `mu`); elsewhere the densities are `h / y_xi` and
/// `h_bar / y_xi`, tabulated at the characteristics together with their running
/// masses.
pub fn to_eulerian(profile: &LagrangianProfile, x_grid: &[f64]) -> Result<EulerianImage> {
    let s = profile.samples();
    let rule = profile.cell_rule();
    let big_h = rule.cumulative(&profile.column(|v| v.h));
    let big_hbar = rule.cumulative(&profile.column(|v| v.h_bar));
    let flats = plateaus(profile);

    let mut knots = Vec::new();
    let mut nu_vals = Vec::new();
    let mut mu_vals = Vec::new();
    let mut nu_cum = Vec::new();
    let mut mu_cum = Vec::new();
    let mut us = Vec::new();
    let mut slopes = Vec::new();
    let (mut nu_removed, mut mu_removed) = (0.0, 0.0);
    let mut next_flat = 0;
    for (i, v) in s.iter().enumerate() {
        while next_flat < flats.len() && flats[next_flat].last <= i {
            nu_removed += flats[next_flat].mass;
            mu_removed += flats[next_flat].reduced_mass;
            next_flat += 1;
        }
        if v.y_xi < PLATEAU_Y_XI || knots.last().is_some_and(|&y| v.y <= y) {
            continue;
        }
        knots.push(v.y);
        nu_vals.push(v.h / v.y_xi);
        mu_vals.push(v.h_bar / v.y_xi);
        nu_cum.push(big_h[i] - nu_removed);
        mu_cum.push(big_hbar[i] - mu_removed);
        us.push(v.u);
        slopes.push(v.u_xi / v.y_xi);
    }
    if knots.len() < 2 {
        return Err(PeakonError::Grid(
            "profile has fewer than two uncollapsed characteristics".into(),
        ));
    }
    let base_nu = nu_cum[0];
    let base_mu = mu_cum[0];
    nu_cum.iter_mut().for_each(|c| *c -= base_nu);
    mu_cum.iter_mut().for_each(|c| *c -= base_mu);

    let u = x_grid
        .iter()
        .map(|&x| hermite_velocity(&knots, &us, &slopes, x))
        .collect();

    let breakpoints: Vec<f64> = profile
        .breaks()
        .iter()
        .filter_map(|&b| label_image(profile, b))
        .chain(flats.iter().map(|f| f.y))
        .collect();
    let nu_atoms = flats
        .iter()
        .map(|f| Atom {
            x: f.y,
            mass: f.mass,
        })
        .collect();
    let mu_atoms = flats
        .iter()
        .filter(|f| f.reduced_mass > PLATEAU_MASS)
        .map(|f| Atom {
            x: f.y,
            mass: f.reduced_mass,
        })
        .collect();
    let nu = Measure::tabulated(
        TabulatedDensity::new(knots.clone(), nu_vals, nu_cum)?,
        breakpoints.clone(),
        nu_atoms,
    );
    let mu = Measure::tabulated(
        TabulatedDensity::new(knots, mu_vals, mu_cum)?,
        breakpoints,
        mu_atoms,
    );
    Ok(EulerianImage {
        x: x_grid.to_vec(),
        u,
        mu,
        nu,
    })
}

/// `y` at a label between nodes, by linear interpolation.
fn label_image(profile: &LagrangianProfile, xi: f64) -> Option<f64> {
    let g = profile.xi();
    if xi < g[0] || xi > g[g.len() - 1] {
        return None;
    }
    let k = g.partition_point(|&v| v <= xi).clamp(1, g.len() - 1);
    let w = (xi - g[k - 1]) / (g[k] - g[k - 1]);
    let s = profile.samples();
    Some(s[k - 1].y * (1.0 - w) + s[k].y * w)
}

fn hermite_velocity(knots: &[f64], us: &[f64], slopes: &[f64], x: f64) -> f64 {
    let n = knots.len();
    if x <= knots[0] {
        return us[0] * (x - knots[0]).exp();
    }
    if x >= knots[n - 1] {
        return us[n - 1] * (knots[n - 1] - x).exp();
    }
    let k = knots.partition_point(|&v| v <= x).clamp(1, n - 1);
    let (x0, x1) = (knots[k - 1], knots[k]);
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * us[k - 1]
        + (s3 - 2.0 * s2 + s) * h * slopes[k - 1]
        + (-2.0 * s3 + 3.0 * s2) * us[k]
        + (s3 - s2) * h * slopes[k]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub xi: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelCheckReport {
    /// Smallest difference quotient of `y + H` over the grid cells.
    pub min_slope: f64,
    /// Largest `1 / (y_xi + h)` over the nodes.
    pub max_inverse: f64,
    pub is_member: bool,
    pub violations: Vec<Violation>,
}

/// Node-wise check of the conditions defining the Lagrangian set.
pub fn check_f_membership(profile: &LagrangianProfile) -> RelabelCheckReport {
    let mut violations = Vec::new();
    let mut max_inverse: f64 = 0.0;
    for (&xi, s) in profile.xi().iter().zip(profile.samples()) {
        let mut flag = |reason: String| violations.push(Violation { xi, reason });
        let fields = [s.y, s.y_xi, s.u, s.u_xi, s.h, s.h_bar];
        if fields.iter().any(|v| !v.is_finite()) {
            flag("non-finite field".into());
            continue;
        }
        if s.y_xi < 0.0 {
            flag(format!("y_xi = {:e} < 0", s.y_xi));
        }
        if s.h < 0.0 {
            flag(format!("h = {:e} < 0", s.h));
        }
        if s.h_bar < 0.0 {
            flag(format!("h_bar = {:e} < 0", s.h_bar));
        }
        let scale = (s.y_xi * s.h_bar).abs().max(s.u_xi * s.u_xi);
        let residual = s.compatibility_residual().abs();
        if residual > COMPATIBILITY_TOL * scale && residual > f64::MIN_POSITIVE {
            flag(format!("y_xi h_bar - U_xi^2 = {residual:e}"));
        }
        if s.h < s.h_bar - DOMINATION_TOL {
            flag(format!("h - h_bar = {:e} < 0", s.h - s.h_bar));
        }
        let sum = s.y_xi + s.h;
        if sum <= 0.0 {
            flag("y_xi + h vanishes".into());
        } else {
            max_inverse = max_inverse.max(1.0 / sum);
        }
    }
    let xi = profile.xi();
    let big_h = trapezoid_cumulative(xi, &profile.column(|s| s.h));
    let s = profile.samples();
    let min_slope = (1..xi.len())
        .map(|i| (s[i].y - s[i - 1].y + big_h[i] - big_h[i - 1]) / (xi[i] - xi[i - 1]))
        .fold(f64::INFINITY, f64::min);
    let is_member = min_slope > 0.0 && violations.is_empty();
    RelabelCheckReport {
        min_slope,
        max_inverse,
        is_member,
        violations,
    }
}

/// A strictly increasing label map `g` with `g - id` bounded.
pub trait Relabeling: Send + Sync {
    fn apply(&self, eta: f64) -> f64;
    fn derivative(&self, eta: f64) -> f64;
    /// The label `eta` with `g(eta) = xi`.
    fn inverse(&self, xi: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Relabeling for Identity {
    fn apply(&self, eta: f64) -> f64 {
        eta
    }
    fn derivative(&self, _eta: f64) -> f64 {
        1.0
    }
    fn inverse(&self, xi: f64) -> Result<f64> {
        Ok(xi)
    }
}

/// `g(eta) = eta + delta`.
#[derive(Debug, Clone, Copy)]
pub struct Shift(pub f64);

impl Relabeling for Shift {
    fn apply(&self, eta: f64) -> f64 {
        eta + self.0
    }
    fn derivative(&self, _eta: f64) -> f64 {
        1.0
    }
    fn inverse(&self, xi: f64) -> Result<f64> {
        Ok(xi - self.0)
    }
}

/// A relabeling given by closures; the inverse is found by bisection.
pub struct FnRelabeling<G, D> {
    pub map: G,
    pub derivative: D,
}

impl<G, D> Relabeling for FnRelabeling<G, D>
where
    G: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn apply(&self, eta: f64) -> f64 {
        (self.map)(eta)
    }
    fn derivative(&self, eta: f64) -> f64 {
        (self.derivative)(eta)
    }
    fn inverse(&self, xi: f64) -> Result<f64> {
        sup_below(&self.map, xi, xi - 1.0, xi + 1.0, 1e-16, 0.0)
    }
}

/// The profile `eta ↦ Θ(g(eta))` on the labels `g^{-1}(xi_i)`.
///
/// Values are carried over exactly; `y_xi`, `U_xi`, `h` and `h_bar` are
/// multiplied by `g'`.
pub fn relabel(profile: &LagrangianProfile, g: &dyn Relabeling) -> Result<LagrangianProfile> {
    let mut etas = Vec::with_capacity(profile.len());
    let mut samples = Vec::with_capacity(profile.len());
    for (&xi, s) in profile.xi().iter().zip(profile.samples()) {
        let eta = g.inverse(xi)?;
        let dg = g.derivative(eta);
        let increasing = match etas.last() {
            Some(&prev) => eta > prev && g.derivative(0.5 * (prev + eta)) > 0.0,
            None => true,
        };
        if !(dg > 0.0) || !increasing {
            return Err(PeakonError::Monotonicity { xi });
        }
        etas.push(eta);
        samples.push(LagrangianSample {
            y: s.y,
            y_xi: s.y_xi * dg,
            u: s.u,
            u_xi: s.u_xi * dg,
            h: s.h * dg,
            h_bar: s.h_bar * dg,
        });
    }
    let breaks = profile
        .breaks()
        .iter()
        .map(|&b| g.inverse(b))
        .collect::<Result<Vec<_>>>()?;
    LagrangianProfile::new(profile.t(), etas, samples, breaks)
}

/// Cuts the labels `[a, b]` out of a profile and closes the gap by shifting the
/// labels above `b` down by `b - a`; the result carries `h = h_bar`.
///
/// Applied to the dissipative profile with `[a, b] = [q1(0), q2(0)]` this
/// removes the labels that hold the dissipated energy.
pub fn squeeze(profile: &LagrangianProfile, a: f64, b: f64) -> Result<LagrangianProfile> {
    if !(a < b) {
        return Err(PeakonError::Grid(format!("empty squeeze interval [{a}, {b}]")));
    }
    let xi = profile.xi();
    let s = profile.samples();
    let keep_left: Vec<usize> = (0..xi.len()).filter(|&i| xi[i] < a).collect();
    let right: Vec<usize> = (0..xi.len()).filter(|&i| xi[i] > b).collect();
    let right_part = LagrangianProfile::new(
        profile.t(),
        right.iter().map(|&i| xi[i]).collect(),
        right.iter().map(|&i| s[i]).collect(),
        profile.breaks().iter().copied().filter(|&x| x > b).collect(),
    )?;
    let shifted = relabel(&right_part, &Shift(b - a))?;
    let mut labels: Vec<f64> = keep_left.iter().map(|&i| xi[i]).collect();
    labels.extend_from_slice(shifted.xi());
    let mut samples: Vec<LagrangianSample> = keep_left.iter().map(|&i| s[i]).collect();
    samples.extend_from_slice(shifted.samples());
    for v in &mut samples {
        v.h = v.h_bar;
    }
    let mut breaks: Vec<f64> = profile.breaks().iter().copied().filter(|&x| x < a).collect();
    breaks.push(a);
    breaks.extend_from_slice(shifted.breaks());
    LagrangianProfile::new(profile.t(), labels, samples, breaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eulerian::{eval_u, ZeroVelocity};
    use crate::lagrangian::{adapted_grid, default_grid, initial_profile, peak_labels, sample_profile};
    use crate::measures::{eulerian_state, total_mass, EulerianState};
    use crate::params::Config;
    use approx::assert_abs_diff_eq;

    fn reference() -> Config {
        Config::reference()
    }

    fn x_grid() -> Vec<f64> {
        (0..=400).map(|k| -6.0 + 12.0 * k as f64 / 400.0).collect()
    }

    fn round_trip(cfg: &Config, t: f64) -> (EulerianState, EulerianImage) {
        let state = eulerian_state(cfg, t);
        let grid = label_grid(&state.nu, -25.0, 30.0, 3000).unwrap();
        let profile = to_lagrangian(state.velocity.as_ref(), &state.mu, &state.nu, &grid, t).unwrap();
        let image = to_eulerian(&profile, &x_grid()).unwrap();
        (state, image)
    }

    #[test]
    fn zero_state_is_transported_identically() {
        let grid: Vec<f64> = (0..50).map(|k| -5.0 + 0.2 * k as f64).collect();
        let p = to_lagrangian(&ZeroVelocity, &Measure::zero(), &Measure::zero(), &grid, 0.0).unwrap();
        for (&xi, s) in grid.iter().zip(p.samples()) {
            assert_abs_diff_eq!(s.y, xi, epsilon = 1e-12 * (1.0 + xi.abs()));
            assert_eq!((s.h, s.u), (0.0, 0.0));
        }
    }

    #[test]
    fn single_atom_becomes_a_plateau() {
        let nu = Measure::atoms_only(vec![Atom { x: 0.5, mass: 2.0 }]);
        let grid: Vec<f64> = (0..=60).map(|k| -1.0 + 0.1 * k as f64).collect();
        let p = to_lagrangian(&ZeroVelocity, &Measure::zero(), &nu, &grid, 0.0).unwrap();
        for (&xi, s) in grid.iter().zip(p.samples()) {
            if (0.5..=2.5).contains(&xi) {
                assert_eq!((s.y, s.y_xi, s.h), (0.5, 0.0, 1.0));
            } else if xi < 0.5 {
                assert_abs_diff_eq!(s.y, xi, epsilon = 1e-12 * (1.0 + xi.abs()));
            } else {
                assert_abs_diff_eq!(s.y, xi - 2.0, epsilon = 1e-12 * (1.0 + xi.abs()));
            }
        }
        let flats = plateaus(&p);
        assert_eq!(flats.len(), 1);
        assert_abs_diff_eq!(flats[0].mass, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn relabeled_image_of_the_initial_state_is_the_identity_profile() {
        let cfg = reference();
        let state = eulerian_state(&cfg, 0.0);
        let grid = label_grid(&state.nu, -20.0, 25.0, 2000).unwrap();
        let p = to_lagrangian(state.velocity.as_ref(), &state.mu, &state.nu, &grid, 0.0).unwrap();
        // Relabeling by F(eta) = eta + nu((-inf, eta)) sends each label to its characteristic.
        let (nu_map, nu_slope) = (state.nu.clone(), state.nu.clone());
        let g = FnRelabeling {
            map: move |eta: f64| eta + nu_map.mass_below(eta),
            derivative: move |eta: f64| 1.0 + nu_slope.density_at(eta),
        };
        let q = relabel(&p, &g).unwrap();
        let (a, b) = peak_labels(&cfg);
        for (&eta, s) in q.xi().iter().zip(q.samples()) {
            if (eta - a).abs() < 1e-8 || (eta - b).abs() < 1e-8 || !(-15.0..15.0).contains(&eta) {
                continue;
            }
            let expected = initial_profile(&cfg, eta);
            assert_abs_diff_eq!(s.y, expected.y, epsilon = 1e-8);
            assert_abs_diff_eq!(s.u, expected.u, epsilon = 1e-8);
            assert_abs_diff_eq!(s.y_xi, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn round_trip_reproduces_velocity_and_masses() {
        let cfg = reference();
        for t in [0.0, 1.0, 2.0] {
            let (state, image) = round_trip(&cfg, t);
            for (&x, &u) in image.x.iter().zip(&image.u) {
                let err = (u - state.velocity.u(x)).abs();
                assert!(err <= 1e-8, "t {t} x {x}: {err}");
            }
            for w in image.x.windows(2).step_by(7) {
                for (orig, back) in [(&state.mu, &image.mu), (&state.nu, &image.nu)] {
                    let err = (total_mass(orig, w[0], w[1]) - total_mass(back, w[0], w[1])).abs();
                    assert!(err <= 1e-6, "t {t} [{}, {}]: {err}", w[0], w[1]);
                }
            }
            let err = (total_mass(&state.nu, -6.0, 6.0) - total_mass(&image.nu, -6.0, 6.0)).abs();
            assert!(err <= 1e-6, "t {t} total: {err}");
        }
    }

    #[test]
    fn dissipative_profile_pushes_the_atom_forward() {
        let cfg = reference().with_alpha(1.0).unwrap();
        let grid = adapted_grid(&cfg, 2.0, 2000).unwrap();
        let p = sample_profile(&cfg, 2.0, &grid).unwrap();
        let image = to_eulerian(&p, &x_grid()).unwrap();
        assert_eq!(image.nu.atoms().len(), 1);
        let atom = image.nu.atoms()[0];
        assert_abs_diff_eq!(atom.x, -1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(atom.mass, 6.4, epsilon = 1e-6);
        assert!(image.mu.atoms().is_empty());
        for (&x, &u) in image.x.iter().zip(&image.u) {
            assert_abs_diff_eq!(u, eval_u(&cfg, 2.0, x), epsilon = 1e-8);
        }
    }

    #[test]
    fn removed_energy_sits_between_the_peaks() {
        let cfg = reference();
        let grid = default_grid(&cfg, 2000).unwrap();
        let p = sample_profile(&cfg, 1.5, &grid).unwrap();
        let image = to_eulerian(&p, &x_grid()).unwrap();
        let pair = crate::eulerian::trajectories(&cfg, 1.5).unwrap();
        let removed = total_mass(&image.nu, pair.q1, pair.q2) - total_mass(&image.mu, pair.q1, pair.q2);
        assert_abs_diff_eq!(removed, 3.2, epsilon = 1e-5);
    }

    #[test]
    fn closed_form_profiles_are_members() {
        for alpha in [0.5, 1.0] {
            let cfg = reference().with_alpha(alpha).unwrap();
            let grid = default_grid(&cfg, 1000).unwrap();
            for t in [0.0, 1.0, 2.0] {
                let report = check_f_membership(&sample_profile(&cfg, t, &grid).unwrap());
                assert!(report.is_member, "alpha {alpha} t {t}: {:?}", report.violations.first());
                assert!(report.min_slope > 0.0);
            }
        }
    }

    #[test]
    fn injected_fault_is_reported() {
        let cfg = reference();
        let grid = default_grid(&cfg, 500).unwrap();
        let mut p = sample_profile(&cfg, 0.0, &grid).unwrap();
        p.samples_mut()[100].h = -1.0;
        let report = check_f_membership(&p);
        assert!(!report.is_member);
        assert!(report.violations.iter().any(|v| v.xi == grid[100]));
    }

    #[test]
    fn identity_relabeling_changes_nothing() {
        let cfg = reference();
        let grid = default_grid(&cfg, 400).unwrap();
        let p = sample_profile(&cfg, 0.5, &grid).unwrap();
        assert_eq!(relabel(&p, &Identity).unwrap(), p);
    }

    #[test]
    fn eulerian_image_is_relabeling_invariant() {
        let cfg = reference();
        let grid = default_grid(&cfg, 1500).unwrap();
        let p = sample_profile(&cfg, 0.5, &grid).unwrap();
        let base = to_eulerian(&p, &x_grid()).unwrap();
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5 {
            let (amp, freq, shift) = (0.5 * next(), 0.5 + next(), 2.0 * next() - 1.0);
            let amp = amp.min(0.9 / freq);
            let g = FnRelabeling {
                map: move |eta: f64| eta + shift + amp * (freq * eta).sin(),
                derivative: move |eta: f64| 1.0 + amp * freq * (freq * eta).cos(),
            };
            let q = relabel(&p, &g).unwrap();
            let image = to_eulerian(&q, &x_grid()).unwrap();
            for (a, b) in base.u.iter().zip(&image.u) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-7);
            }
            let mut ys: Vec<f64> = q.column(|s| s.y);
            ys.sort_by(f64::total_cmp);
            for (a, b) in ys.iter().zip(p.column(|s| s.y)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn decreasing_map_is_rejected() {
        let cfg = reference();
        let grid = default_grid(&cfg, 300).unwrap();
        let p = sample_profile(&cfg, 0.0, &grid).unwrap();
        let g = FnRelabeling {
            map: |eta: f64| eta + 2.0 * eta.sin(),
            derivative: |eta: f64| 1.0 + 2.0 * eta.cos(),
        };
        assert!(matches!(relabel(&p, &g), Err(PeakonError::Monotonicity { .. })));
    }

    #[test]
    fn squeezed_dissipative_profile_is_a_single_peakon() {
        let cfg = reference().with_alpha(1.0).unwrap();
        let (a, b) = peak_labels(&cfg);
        for t in [1.5, 2.0, 3.0] {
            let grid = adapted_grid(&cfg, t, 2000).unwrap();
            let p = sample_profile(&cfg, t, &grid).unwrap();
            let q = squeeze(&p, a, b).unwrap();
            assert!(q.xi().iter().all(|&x| x < a || x > a));
            let image = to_eulerian(&q, &x_grid()).unwrap();
            let center = -1.2 * (t - 1.0);
            for (&x, &u) in image.x.iter().zip(&image.u) {
                assert_abs_diff_eq!(u, -1.2 * (-(x - center).abs()).exp(), epsilon = 1e-8);
            }
            assert!(image.nu.atoms().is_empty());
            assert!(check_f_membership(&q).is_member);
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let cfg = reference();
        let grid = default_grid(&cfg, 300).unwrap();
        let p = sample_profile(&cfg, 0.0, &grid).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,xi,y,y_xi,U,U_xi,h,h_bar"));
        assert_eq!(text.lines().count(), 301);
        assert!(!text.contains('\r'));
    }
}
