//! Closed-form Lagrangian solution `(y, y_xi, U, U_xi, h, h_bar)`.
//!
//! The labelling is fixed by `y(0, xi) = xi`. Every branch splits the label
//! line at `q1(0)` and `q2(0)`, the labels of the two peaks: the left and right
//! pieces are exponential tails, and the middle piece carries the energy that
//! concentrates at the origin at `t0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::eulerian::{post_interaction, pre_interaction, pre_pair};
use crate::params::Config;
use crate::transforms::LagrangianProfile;

/// Half-width of the node pair placed around each kink of the labelling.
pub const KINK_SPLIT: f64 = 1e-10;
/// Ratio of consecutive offsets in the geometric cluster around a kink.
pub const CLUSTER_RATIO: f64 = 0.7;
/// Clustered nodes on each side of a kink.
pub const CLUSTER_POINTS: usize = 40;
/// Distance beyond the peak labels covered by [`default_grid`].
pub const TAIL_LENGTH: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LagrangianSample {
    pub y: f64,
    pub y_xi: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "U_xi")]
    pub u_xi: f64,
    pub h: f64,
    pub h_bar: f64,
}

impl LagrangianSample {
    /// `y_xi h_bar - U_xi^2`, zero for members of the Lagrangian set.
    pub fn compatibility_residual(&self) -> f64 {
        self.y_xi * self.h_bar - self.u_xi * self.u_xi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelperValues {
    pub c: f64,
    pub d: f64,
    pub s: f64,
    pub s_prime: f64,
}

/// Which closed-form piece a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Piece {
    Left,
    Middle,
    Right,
}

/// `(q1(0), q2(0))`, the labels of the two peaks.
pub fn peak_labels(cfg: &Config) -> (f64, f64) {
    let p = pre_pair(cfg, -cfg.t0(), 0.0);
    (p.q1, p.q2)
}

/// The endpoints belong to the middle piece.
pub fn piece(cfg: &Config, xi: f64) -> Piece {
    let (a, b) = peak_labels(cfg);
    if xi < a {
        Piece::Left
    } else if xi > b {
        Piece::Right
    } else {
        Piece::Middle
    }
}

fn c_and_d(cfg: &Config, xi: f64) -> (f64, f64) {
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let e = xi.exp();
    let c = c2 - c1 * (-l * t0).exp() + l * (xi + c2 * t0).exp();
    let d = l * l * (-c1 * t0).exp() - l * c1 * e + l * c2 * (xi - l * t0).exp();
    (c, d)
}

pub fn helpers(cfg: &Config, xi: f64) -> Result<HelperValues> {
    let (a, b) = peak_labels(cfg);
    if !(xi >= a && xi <= b) {
        return Err(PeakonError::Domain(format!(
            "S is defined on [{a}, {b}], got xi = {xi}"
        )));
    }
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let (c, d) = c_and_d(cfg, xi);
    let g = -(-l * t0).exp_m1();
    let e = (-l * t0).exp();
    let k = l * c + d;
    let s = (2.0 * c1 * c2 * l * g * g - (c1 - c2 * e + l * (c2 * t0).exp()) * k)
        / ((-c1 + c2 * e + l * (c2 * t0).exp()) * k);
    let s_prime = -2.0 * c1 * c2 * l * l * g * g * xi.exp() / (k * k);
    Ok(HelperValues { c, d, s, s_prime })
}

/// `h(t0, xi)` on the middle piece, i.e. `-2 c1 c2 S'(xi)`.
fn concentrated_density(cfg: &Config, xi: f64) -> f64 {
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let g = -(-l * t0).exp_m1();
    let den = l * (-c1 * t0).exp() + c2 - c1 * (-l * t0).exp()
        + (-c1 + c2 * (-l * t0).exp() + l * (c2 * t0).exp()) * xi.exp();
    4.0 * (c1 * c2).powi(2) * g * g * xi.exp() / (den * den)
}

/// Sample of an exponential tail, where `U_xi = ±U y_xi` and `h = U^2 y_xi`.
fn tail(y: f64, y_xi: f64, u: f64, sign: f64) -> LagrangianSample {
    let h = u * u * y_xi;
    LagrangianSample {
        y,
        y_xi,
        u,
        u_xi: sign * u * y_xi,
        h,
        h_bar: h,
    }
}

/// Middle-piece sample from `y, y_xi, U` and the constant `u^2 - u_x^2`
/// between the peaks; `slope_sign` is the sign of `u_x` there.
fn between_peaks(y: f64, y_xi: f64, u: f64, interaction: f64, slope_sign: f64) -> LagrangianSample {
    let ux2 = (u * u - interaction).max(0.0);
    let h_bar = ux2 * y_xi;
    LagrangianSample {
        y,
        y_xi,
        u,
        u_xi: slope_sign * ux2.sqrt() * y_xi,
        h: h_bar,
        h_bar,
    }
}

pub fn initial_profile(cfg: &Config, xi: f64) -> LagrangianSample {
    let p = pre_pair(cfg, -cfg.t0(), 0.0);
    let ux = p.ux(xi);
    LagrangianSample {
        y: xi,
        y_xi: 1.0,
        u: p.u(xi),
        u_xi: ux,
        h: ux * ux,
        h_bar: ux * ux,
    }
}

pub fn profile_pre(cfg: &Config, t: f64, xi: f64) -> Result<LagrangianSample> {
    let s = t - cfg.t0();
    if s >= 0.0 {
        return Err(PeakonError::Branch(format!(
            "pre-breaking profile needs t < t0, got t = {t}"
        )));
    }
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    match piece(cfg, xi) {
        Piece::Left => {
            let a = l
                + (c1 * (-c1 * s).exp() - c1 * (c1 * t0).exp() - c2 * (-c2 * s).exp()
                    + c2 * (c2 * t0).exp())
                    * xi.exp();
            let u = (c1 * c1 * (-c1 * s).exp() - c2 * c2 * (-c2 * s).exp()) * xi.exp() / a;
            Ok(tail(xi + l.ln() - a.ln(), l / a, u, 1.0))
        }
        Piece::Right => {
            let a = l
                + (c1 * (c1 * s).exp() - c1 * (-c1 * t0).exp() - c2 * (c2 * s).exp()
                    + c2 * (-c2 * t0).exp())
                    * (-xi).exp();
            let u = (c1 * c1 * (c1 * s).exp() - c2 * c2 * (c2 * s).exp()) * (-xi).exp() / a;
            Ok(tail(xi - l.ln() + a.ln(), l / a, u, -1.0))
        }
        Piece::Middle => {
            let (c, d) = c_and_d(cfg, xi);
            let num = (c1 * (l * s).exp() - c2) * d + l * l * (c1 * s).exp() * c;
            let den = d + (c1 * (c2 * s).exp() - c2 * (c1 * s).exp()) * c;
            if !(num < 0.0 && den < 0.0) {
                return Err(PeakonError::BranchArgument {
                    t,
                    xi,
                    value: num / den,
                });
            }
            let y = c2 * s - l.ln() + ((-num) / (-den)).ln();
            let g0 = -(-l * t0).exp_m1();
            let gap = -(l * s).exp_m1();
            let y_xi = (c1 * c2).powi(2) * l * (c2 * s).exp() * g0 * g0 * gap * gap * xi.exp()
                / (den * num);
            let top = d * d * (c1 * c1 * (l * s).exp() - c2 * c2)
                + 2.0 * c * d * l * l * (c1 * s).exp() * (c1 + c2)
                + c * c * l * l * (c1 * s).exp() * (c1 * c1 * (c2 * s).exp() - c2 * c2 * (c1 * s).exp());
            let u = top / num / den;
            Ok(between_peaks(y, y_xi, u, pre_interaction(cfg, s), -1.0))
        }
    }
}

/// The profile at `t0`, the common limit of both sides.
///
/// The middle piece is collapsed onto the origin and carries the whole
/// concentrated energy in `h`. `h_bar` equals `h` here: the dissipation is
/// applied afterwards (see `oracle::apply_breaking`).
pub fn profile_breaking(cfg: &Config, xi: f64) -> LagrangianSample {
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let m = cfg.momentum();
    match piece(cfg, xi) {
        Piece::Left => {
            let a = l + (c1 - c1 * (c1 * t0).exp() - c2 + c2 * (c2 * t0).exp()) * xi.exp();
            tail(xi + l.ln() - a.ln(), l / a, m * l * xi.exp() / a, 1.0)
        }
        Piece::Right => {
            let a = l + (c1 - c1 * (-c1 * t0).exp() - c2 + c2 * (-c2 * t0).exp()) * (-xi).exp();
            tail(xi - l.ln() + a.ln(), l / a, m * l * (-xi).exp() / a, -1.0)
        }
        Piece::Middle => {
            let h = concentrated_density(cfg, xi);
            LagrangianSample {
                y: 0.0,
                y_xi: 0.0,
                u: m,
                u_xi: 0.0,
                h,
                h_bar: h,
            }
        }
    }
}

/// `alpha = 1`: the concentrated energy is removed and a single peakon leaves
/// the origin along the collapsed characteristics.
pub fn profile_post_dissipative(cfg: &Config, t: f64, xi: f64) -> Result<LagrangianSample> {
    if !cfg.is_dissipative() {
        return Err(PeakonError::Branch(format!(
            "dissipative profile needs alpha = 1, got {}",
            cfg.alpha()
        )));
    }
    let s = post_offset(cfg, t)?;
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let m = cfg.momentum();
    Ok(match piece(cfg, xi) {
        Piece::Left => {
            let a = l + (l * (-m * s).exp() - c1 * (c1 * t0).exp() + c2 * (c2 * t0).exp()) * xi.exp();
            let u = m * l * (-m * s).exp() * xi.exp() / a;
            tail(xi + l.ln() - a.ln(), l / a, u, 1.0)
        }
        Piece::Right => {
            let a = l + (l * (m * s).exp() - c1 * (-c1 * t0).exp() + c2 * (-c2 * t0).exp()) * (-xi).exp();
            let u = m * l * (m * s).exp() * (-xi).exp() / a;
            tail(xi - l.ln() + a.ln(), l / a, u, -1.0)
        }
        Piece::Middle => LagrangianSample {
            y: m * s,
            y_xi: 0.0,
            u: m,
            u_xi: 0.0,
            h: concentrated_density(cfg, xi),
            h_bar: 0.0,
        },
    })
}

/// `alpha < 1`: the pair re-forms with strengths `d1, d2`; the fraction
/// `alpha` of the concentrated energy stays in `h` but not in `h_bar`.
pub fn profile_post_general(cfg: &Config, t: f64, xi: f64) -> Result<LagrangianSample> {
    if cfg.is_dissipative() {
        return Err(PeakonError::Branch(
            "alpha = 1 uses the dissipative profile".into(),
        ));
    }
    let s = post_offset(cfg, t)?;
    let (c1, c2, t0, l) = (cfg.c1(), cfg.c2(), cfg.t0(), cfg.derived().l);
    let dc = cfg.derived();
    let (d1, d2, lt) = (dc.d1, dc.d2, dc.l_tilde);
    let left_right = |sign: f64| {
        let a = l * lt
            + (lt * (-c1 * (sign * c1 * t0).exp() + c2 * (sign * c2 * t0).exp())
                + l * (d1 * (-sign * d1 * s).exp() - d2 * (-sign * d2 * s).exp()))
                * (sign * xi).exp();
        let u = (d1 * d1 * (-sign * d1 * s).exp() - d2 * d2 * (-sign * d2 * s).exp())
            * l
            * (sign * xi).exp()
            / a;
        let y = xi + sign * ((l * lt).ln() - a.ln());
        tail(y, l * lt / a, u, sign)
    };
    match piece(cfg, xi) {
        Piece::Left => Ok(left_right(1.0)),
        Piece::Right => Ok(left_right(-1.0)),
        Piece::Middle => {
            let hv = helpers(cfg, xi)?;
            let sv = hv.s;
            let e = (-lt * s).exp();
            let a = lt * (sv + 1.0) + (d2 * (d1 * s).exp() - d1 * (d2 * s).exp()) * (sv - 1.0);
            let b = (d1 - d2 * e) * (sv + 1.0) - lt * (d2 * s).exp() * (sv - 1.0);
            if !(a > 0.0 && b > 0.0) {
                return Err(PeakonError::BranchArgument {
                    t,
                    xi,
                    value: b / a,
                });
            }
            let y = d1 * s + (b / a).ln();
            let gap = -(-lt * s).exp_m1();
            let y_xi = -2.0 * d1 * d2 * (d1 * s).exp() * gap * gap * hv.s_prime / (a * b);
            let top = lt
                * ((d1 * d1 - d2 * d2 * e) * (sv + 1.0).powi(2)
                    - 2.0 * (d1 * d1 - d2 * d2) * (d2 * s).exp() * (sv * sv - 1.0)
                    + (d2 * s).exp()
                        * (d1 * d1 * (d2 * s).exp() - d2 * d2 * (d1 * s).exp())
                        * (sv - 1.0).powi(2));
            let u = top / a / b;
            let mut sample = between_peaks(y, y_xi, u, post_interaction(cfg, s), 1.0);
            sample.h = sample.h_bar - 2.0 * cfg.alpha() * c1 * c2 * hv.s_prime;
            Ok(sample)
        }
    }
}

fn post_offset(cfg: &Config, t: f64) -> Result<f64> {
    let s = t - cfg.t0();
    if s <= 0.0 {
        return Err(PeakonError::Branch(format!(
            "post-breaking profile needs t > t0, got t = {t}"
        )));
    }
    Ok(s)
}

/// `(Q(t0-, xi), Q(t0+, xi)) = (c1 c2 S, d1 d2 S)` on the middle piece.
pub fn q_jump(cfg: &Config, xi: f64) -> Result<(f64, f64)> {
    let s = helpers(cfg, xi)?.s;
    let d = cfg.derived();
    Ok((cfg.c1() * cfg.c2() * s, d.d1 * d.d2 * s))
}

/// Closed-form sample on whichever branch `t` falls; exactly `t0` gives the
/// breaking profile.
pub fn profile(cfg: &Config, t: f64, xi: f64) -> Result<LagrangianSample> {
    let t0 = cfg.t0();
    if t < t0 {
        profile_pre(cfg, t, xi)
    } else if t == t0 {
        Ok(profile_breaking(cfg, xi))
    } else if cfg.is_dissipative() {
        profile_post_dissipative(cfg, t, xi)
    } else {
        profile_post_general(cfg, t, xi)
    }
}

/// Closed-form profile on `xi`, in parallel over nodes.
pub fn sample_profile(cfg: &Config, t: f64, xi: &[f64]) -> Result<LagrangianProfile> {
    let samples = xi
        .par_iter()
        .map(|&x| profile(cfg, t, x))
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = peak_labels(cfg);
    LagrangianProfile::new(t, xi.to_vec(), samples, vec![a, b])
}

/// Nodes on `[lo, hi]`, uniform away from `kinks` and geometrically clustered
/// towards each of them, with a pair at distance [`KINK_SPLIT`] on both sides.
///
/// The node count is `nodes` whenever the kinks are far enough apart for
/// their clusters not to overlap.
pub fn clustered_grid(lo: f64, hi: f64, nodes: usize, kinks: &[f64]) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(PeakonError::Grid(format!("invalid range [{lo}, {hi}]")));
    }
    let kinks: Vec<f64> = kinks.iter().copied().filter(|&k| k > lo && k < hi).collect();
    let extra = kinks.len() * 2 * (CLUSTER_POINTS + 1);
    if nodes < extra + 2 {
        return Err(PeakonError::Grid(format!(
            "{nodes} nodes cannot resolve {} kinks",
            kinks.len()
        )));
    }
    let build = |base: usize| {
        let step = (hi - lo) / (base - 1) as f64;
        let mut xs: Vec<f64> = (0..base)
            .map(|i| if i + 1 == base { hi } else { lo + step * i as f64 })
            .filter(|&x| kinks.iter().all(|&k| (x - k).abs() >= step))
            .collect();
        for &k in &kinks {
            xs.push(k - KINK_SPLIT);
            xs.push(k + KINK_SPLIT);
            let mut offset = step;
            for _ in 0..CLUSTER_POINTS {
                offset *= CLUSTER_RATIO;
                xs.push(k - offset);
                xs.push(k + offset);
            }
        }
        xs.retain(|&x| x >= lo && x <= hi);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    };
    let mut base = nodes - extra;
    let mut xs = build(base);
    for _ in 0..8 {
        if xs.len() == nodes || base < 2 {
            break;
        }
        base = (base as isize + nodes as isize - xs.len() as isize).max(2) as usize;
        xs = build(base);
    }
    Ok(xs)
}

/// Clustered grid covering both peak labels and [`TAIL_LENGTH`] beyond.
pub fn default_grid(cfg: &Config, nodes: usize) -> Result<Vec<f64>> {
    let (a, b) = peak_labels(cfg);
    clustered_grid(a - TAIL_LENGTH, b + TAIL_LENGTH, nodes, &[a, b])
}

/// Labels spread evenly in `y + ∫h` at time `t`, plus the pairs around the
/// peak labels.
///
/// This is the labelling the Eulerian-to-Lagrangian map produces, so the
/// characteristics are spread evenly in `x` wherever no energy concentrates.
pub fn adapted_grid(cfg: &Config, t: f64, nodes: usize) -> Result<Vec<f64>> {
    if nodes < 8 {
        return Err(PeakonError::Grid(format!("{nodes} nodes are too few")));
    }
    let fine = default_grid(cfg, (8 * nodes).max(4000))?;
    let p = sample_profile(cfg, t, &fine)?;
    let big_h = p.cumulative_h();
    let w: Vec<f64> = p.samples().iter().zip(&big_h).map(|(s, h)| s.y + h).collect();
    let (a, b) = peak_labels(cfg);
    let pairs = [a - KINK_SPLIT, a + KINK_SPLIT, b - KINK_SPLIT, b + KINK_SPLIT];
    let spread = nodes - pairs.len();
    let (w0, w1) = (w[0], w[w.len() - 1]);
    let mut xs: Vec<f64> = (0..spread)
        .map(|k| {
            let target = w0 + (w1 - w0) * k as f64 / (spread - 1) as f64;
            let j = w.partition_point(|&v| v < target).clamp(1, w.len() - 1);
            let (v0, v1) = (w[j - 1], w[j]);
            let r = if v1 > v0 { ((target - v0) / (v1 - v0)).clamp(0.0, 1.0) } else { 0.0 };
            fine[j - 1] + r * (fine[j] - fine[j - 1])
        })
        .collect();
    xs.extend_from_slice(&pairs);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eulerian::{eval_u, trajectories};
    use crate::quadrature::{integrate, integrate_with_breaks};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference() -> Config {
        Config::reference()
    }

    fn labels(cfg: &Config, n: usize) -> Vec<f64> {
        let (a, b) = peak_labels(cfg);
        (0..n)
            .map(|k| a - 3.0 + (b - a + 6.0) * (k as f64 + 0.5) / n as f64)
            .collect()
    }

    #[test]
    fn peak_labels_of_the_reference_configuration() {
        let (a, b) = peak_labels(&reference());
        assert_abs_diff_eq!(a, 0.311_241_569_165_789, epsilon = 1e-13);
        assert_abs_diff_eq!(b, 1.687_560_670_655_440, epsilon = 1e-13);
    }

    #[test]
    fn helper_s_spans_the_unit_interval() {
        let cfg = reference();
        let (a, b) = peak_labels(&cfg);
        assert_abs_diff_eq!(helpers(&cfg, a).unwrap().s, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(helpers(&cfg, b).unwrap().s, 1.0, epsilon = 1e-12);
        for k in 0..100 {
            let xi = a + (b - a) * k as f64 / 99.0;
            let hv = helpers(&cfg, xi).unwrap();
            assert!(hv.s >= -1.0 - 1e-12 && hv.s <= 1.0 + 1e-12);
            assert!(hv.s_prime > 0.0);
        }
        let total = integrate(|x| helpers(&cfg, x).unwrap().s_prime, a, b, 1e-14, 1e-14).value;
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-8);
        assert!(matches!(helpers(&cfg, a - 1e-3), Err(PeakonError::Domain(_))));
        assert!(matches!(helpers(&cfg, b + 1e-3), Err(PeakonError::Domain(_))));
    }

    #[test]
    fn s_prime_is_the_derivative_of_s() {
        let cfg = reference();
        for xi in [0.5, 1.0, 1.5] {
            let h = 1e-6;
            let fd = (helpers(&cfg, xi + h).unwrap().s - helpers(&cfg, xi - h).unwrap().s) / (2.0 * h);
            assert_abs_diff_eq!(helpers(&cfg, xi).unwrap().s_prime, fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn initial_profile_is_the_identity_labelling() {
        let cfg = reference();
        let (a, b) = peak_labels(&cfg);
        let p = trajectories(&cfg, 0.0).unwrap();
        let s = initial_profile(&cfg, a);
        assert_eq!(s.y, a);
        assert_abs_diff_eq!(s.u, p.p1 + p.p2 * (p.q1 - p.q2).exp(), epsilon = 1e-14);
        for xi in labels(&cfg, 50) {
            let s = initial_profile(&cfg, xi);
            assert_eq!(s.y, xi);
            if xi != a && xi != b {
                assert_abs_diff_eq!(s.h - s.u_xi * s.u_xi / s.y_xi, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pre_breaking_starts_from_the_identity() {
        let cfg = reference();
        for xi in labels(&cfg, 200) {
            let s = profile_pre(&cfg, 0.0, xi).unwrap();
            let i = initial_profile(&cfg, xi);
            assert_abs_diff_eq!(s.y, xi, epsilon = 1e-10);
            assert_abs_diff_eq!(s.y_xi, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s.u, i.u, epsilon = 1e-10);
            assert_abs_diff_eq!(s.h, i.h, epsilon = 1e-9);
        }
    }

    #[test]
    fn composition_with_the_eulerian_solution() {
        for alpha in [0.0, 0.5, 1.0] {
            let cfg = reference().with_alpha(alpha).unwrap();
            for t in [-1.0, 0.0, 0.5, 0.99, 1.0, 1.5, 3.0] {
                for xi in labels(&cfg, 100) {
                    let s = profile(&cfg, t, xi).unwrap();
                    let err = (eval_u(&cfg, t, s.y) - s.u).abs();
                    assert!(err <= 1e-10, "alpha {alpha} t {t} xi {xi}: {err}");
                }
            }
        }
    }

    #[test]
    fn characteristics_follow_the_velocity() {
        // Second-order central differences in t shrink by four when the step halves.
        let cfg = reference();
        for t in [0.3, 1.6] {
            for xi in [-1.0, 0.8, 1.2, 3.0] {
                let err = |dt: f64| {
                    let fd = (profile(&cfg, t + dt, xi).unwrap().y - profile(&cfg, t - dt, xi).unwrap().y)
                        / (2.0 * dt);
                    fd - profile(&cfg, t, xi).unwrap().u
                };
                let (e1, e2, e3) = (err(1e-3), err(5e-4), err(2.5e-4));
                assert!(e1.abs() < 1e-5);
                if e1.abs() > 1e-10 {
                    let r1 = e1 / e2;
                    let r2 = e2 / e3;
                    assert!((r1 - 4.0).abs() < 0.1 && (r2 - 4.0).abs() < 0.1, "{r1} {r2}");
                }
            }
        }
    }

    #[test]
    fn derivative_fields_match_finite_differences() {
        for alpha in [0.0, 0.5, 1.0] {
            let cfg = reference().with_alpha(alpha).unwrap();
            for t in [0.0, 0.7, 1.0, 1.4, 2.5] {
                for xi in [-2.0, 0.6, 1.0, 1.3, 2.5] {
                    let h = 1e-6;
                    let (m, p) = (profile(&cfg, t, xi - h).unwrap(), profile(&cfg, t, xi + h).unwrap());
                    let s = profile(&cfg, t, xi).unwrap();
                    assert_abs_diff_eq!(s.y_xi, (p.y - m.y) / (2.0 * h), epsilon = 1e-7);
                    assert_abs_diff_eq!(s.u_xi, (p.u - m.u) / (2.0 * h), epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn middle_collapses_at_breaking() {
        let cfg = reference();
        let (a, b) = peak_labels(&cfg);
        for k in 1..20 {
            let xi = a + (b - a) * k as f64 / 20.0;
            let near = profile_pre(&cfg, 1.0 - 1e-6, xi).unwrap();
            assert!(near.y_xi < 1e-10);
            let at = profile_breaking(&cfg, xi);
            assert_eq!((at.y, at.u), (0.0, -1.2));
        }
    }

    #[test]
    fn concentrated_energy_of_the_breaking_profile() {
        let cfg = reference();
        let (a, b) = peak_labels(&cfg);
        let mass = integrate(|x| profile_breaking(&cfg, x).h, a, b, 1e-15, 1e-15).value;
        assert_abs_diff_eq!(mass, 6.4, epsilon = 1e-8);
        for xi in [b + 0.5, b + 3.0, 10.0] {
            let s = profile_breaking(&cfg, xi);
            let expected = 1.44 * (-2.0 * s.y.abs()).exp() * s.y_xi;
            assert_abs_diff_eq!(s.h, expected, epsilon = 1e-10);
        }
        for xi in [0.5, 1.0, 1.5] {
            let hv = helpers(&cfg, xi).unwrap();
            assert_abs_diff_eq!(profile_breaking(&cfg, xi).h, -2.0 * -1.6 * hv.s_prime, epsilon = 1e-13);
        }
    }

    #[test]
    fn both_sides_converge_to_the_breaking_profile() {
        for alpha in [0.0, 0.5, 1.0] {
            let cfg = reference().with_alpha(alpha).unwrap();
            for xi in labels(&cfg, 60) {
                let at = profile_breaking(&cfg, xi);
                for t in [1.0 - 1e-8, 1.0 + 1e-8] {
                    let s = profile(&cfg, t, xi).unwrap();
                    assert_abs_diff_eq!(s.y, at.y, epsilon = 1e-6);
                    assert_abs_diff_eq!(s.u, at.u, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn dissipative_middle_travels_with_the_peak() {
        let cfg = reference().with_alpha(1.0).unwrap();
        for t in [1.5, 2.0, 4.0] {
            let s = profile_post_dissipative(&cfg, t, 1.0).unwrap();
            assert_abs_diff_eq!(s.y, -1.2 * (t - 1.0), epsilon = 1e-15);
            assert_eq!((s.u, s.h_bar, s.y_xi), (-1.2, 0.0, 0.0));
            assert_eq!(s.h, profile_breaking(&cfg, 1.0).h);
        }
        assert!(profile_post_dissipative(&reference(), 2.0, 1.0).is_err());
        assert!(profile_post_general(&cfg, 2.0, 1.0).is_err());
    }

    #[test]
    fn conservative_continuation_keeps_h_bar() {
        let cfg = reference().with_alpha(0.0).unwrap();
        for xi in labels(&cfg, 40) {
            let s = profile_post_general(&cfg, 1.7, xi).unwrap();
            assert_eq!(s.h, s.h_bar);
        }
    }

    #[test]
    fn q_jump_scales_by_the_retained_fraction() {
        let (a, b) = peak_labels(&reference());
        for alpha in [0.0, 0.5, 1.0] {
            let cfg = reference().with_alpha(alpha).unwrap();
            for k in 0..=10 {
                let xi = a + (b - a) * k as f64 / 10.0;
                let (minus, plus) = q_jump(&cfg, xi).unwrap();
                assert_abs_diff_eq!(plus, (1.0 - alpha) * minus, epsilon = 1e-14);
                if alpha > 0.0 && alpha < 1.0 {
                    let d = cfg.derived();
                    assert!((plus / (d.d1 * d.d2)).abs() <= 1.0 + 1e-12);
                }
            }
        }
        assert!(q_jump(&reference(), a - 0.1).is_err());
    }

    #[test]
    fn energy_in_label_space() {
        for (alpha, t) in [(0.5, 0.5), (0.5, 1.5), (0.0, 2.0), (1.0, 2.0)] {
            let cfg = reference().with_alpha(alpha).unwrap();
            let (a, b) = peak_labels(&cfg);
            let density = |x: f64| {
                let s = profile(&cfg, t, x).unwrap();
                s.u * s.u * s.y_xi + s.h_bar
            };
            let e = integrate_with_breaks(density, a - 40.0, b + 40.0, &[a, b], 1e-13, 1e-13).value;
            let expected = if t < 1.0 {
                cfg.derived().e2
            } else if alpha == 1.0 {
                2.0 * 1.44
            } else {
                cfg.derived().e2_tilde
            };
            assert_abs_diff_eq!(e, expected, epsilon = 1e-5);
        }
    }

    #[test]
    fn clustered_grid_shape() {
        let cfg = reference();
        let xs = default_grid(&cfg, 2000).unwrap();
        assert_eq!(xs.len(), 2000);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        let (a, b) = peak_labels(&cfg);
        for k in [a, b] {
            assert!(xs.contains(&(k - KINK_SPLIT)) && xs.contains(&(k + KINK_SPLIT)));
        }
        assert!(clustered_grid(0.0, 1.0, 10, &[0.5]).is_err());
        assert!(clustered_grid(1.0, 0.0, 100, &[]).is_err());
    }

    #[test]
    fn adapted_grid_spreads_characteristics() {
        let cfg = reference().with_alpha(1.0).unwrap();
        let xs = adapted_grid(&cfg, 2.0, 2000).unwrap();
        assert!(xs.len() >= 1990 && xs.len() <= 2000);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        let p = sample_profile(&cfg, 2.0, &xs).unwrap();
        let widest = p
            .samples()
            .windows(2)
            .map(|w| w[1].y - w[0].y)
            .fold(0.0, f64::max);
        assert!(widest < 0.05, "{widest}");
    }

    #[test]
    fn sampled_profile_carries_the_peak_labels() {
        let cfg = reference();
        let xs = default_grid(&cfg, 600).unwrap();
        let p = sample_profile(&cfg, 0.5, &xs).unwrap();
        assert_eq!(p.len(), 600);
        assert_eq!(p.breaks().len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lagrangian_set_invariants(
            alpha in prop_oneof![Just(0.0), Just(1.0), 0.0..1.0f64],
            t in -1.0..3.0f64,
            xi in -4.0..6.0f64,
        ) {
            let cfg = reference().with_alpha(alpha).unwrap();
            let s = profile(&cfg, t, xi).unwrap();
            prop_assert!(s.y_xi >= 0.0 && s.h >= 0.0 && s.h_bar >= 0.0);
            let scale = (s.y_xi * s.h_bar).max(s.u_xi * s.u_xi).max(1e-300);
            prop_assert!(s.compatibility_residual().abs() <= 1e-9 * scale);
            prop_assert!(s.h >= s.h_bar - 1e-12);
        }

        #[test]
        fn characteristics_are_ordered(
            alpha in 0.0..=1.0f64,
            t in -1.0..3.0f64,
            xi in -4.0..6.0f64,
            dxi in 1e-6..0.5f64,
        ) {
            let cfg = reference().with_alpha(alpha).unwrap();
            let lo = profile(&cfg, t, xi).unwrap().y;
            let hi = profile(&cfg, t, xi + dxi).unwrap().y;
            prop_assert!(lo <= hi + 1e-12);
        }
    }
}
