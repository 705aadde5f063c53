//! Closed-form Eulerian solution `u(t, x)` on every branch.
//!
//! Before breaking the solution is the peakon-antipeakon pair
//! `p1 e^{-|x-q1|} + p2 e^{-|x-q2|}`; at `t0` it is the single peak
//! `(c1+c2) e^{-|x|}`; afterwards it is either a rescaled pair with strengths
//! `d1, d2` (`alpha < 1`) or the one-peakon travelling at speed `c1+c2`
//! (`alpha = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::params::Config;
use crate::quadrature::integrate_with_breaks;

/// `|t - t0|` below which the pair parameters are considered unbounded.
pub const BLOWUP_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakonPair {
    pub p1: f64,
    pub p2: f64,
    pub q1: f64,
    pub q2: f64,
    pub t: f64,
}

impl PeakonPair {
    pub fn u(&self, x: f64) -> f64 {
        self.p1 * (-(x - self.q1).abs()).exp() + self.p2 * (-(x - self.q2).abs()).exp()
    }

    /// Left derivative at the peak positions.
    pub fn ux(&self, x: f64) -> f64 {
        self.p1 * peak_slope(x, self.q1) + self.p2 * peak_slope(x, self.q2)
    }

    /// `4 p1 p2 e^{q1 - q2}`, the constant `u^2 - u_x^2` between the peaks.
    pub fn interaction(&self) -> f64 {
        4.0 * self.p1 * self.p2 * (self.q1 - self.q2).exp()
    }
}

/// Left derivative of `e^{-|x - q|}`.
#[inline]
pub(crate) fn peak_slope(x: f64, q: f64) -> f64 {
    if x <= q {
        (x - q).exp()
    } else {
        -(q - x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolutionBranch {
    PreBreaking,
    AtBreaking,
    PostTwoPeakon,
    PostOnePeakon,
}

pub fn branch(cfg: &Config, t: f64) -> SolutionBranch {
    let s = t - cfg.t0();
    if s.abs() < BLOWUP_GUARD {
        SolutionBranch::AtBreaking
    } else if s < 0.0 {
        SolutionBranch::PreBreaking
    } else if cfg.is_dissipative() {
        SolutionBranch::PostOnePeakon
    } else {
        SolutionBranch::PostTwoPeakon
    }
}

/// Heights and positions of the two peaks at time `t`.
///
/// Before breaking these are the `c`-pair; after breaking (`alpha < 1`) the
/// `d`-pair. Fails near `t0`, where the heights diverge, and after breaking
/// when `alpha = 1`, where only one peak remains.
pub fn trajectories(cfg: &Config, t: f64) -> Result<PeakonPair> {
    let s = t - cfg.t0();
    match branch(cfg, t) {
        SolutionBranch::AtBreaking => Err(PeakonError::AtBreaking {
            t,
            t0: cfg.t0(),
            guard: BLOWUP_GUARD,
        }),
        SolutionBranch::PostOnePeakon => Err(PeakonError::Branch(format!(
            "alpha = 1 leaves a single peakon for t = {t} > t0"
        ))),
        SolutionBranch::PreBreaking => Ok(pre_pair(cfg, s, t)),
        SolutionBranch::PostTwoPeakon => Ok(post_pair(cfg, s, t)),
    }
}

pub(crate) fn pre_pair(cfg: &Config, s: f64, t: f64) -> PeakonPair {
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let l = cfg.derived().l;
    let e = (l * s).exp();
    // 1 - e^{L s} without cancellation near t0.
    let gap = -(l * s).exp_m1();
    PeakonPair {
        p1: (c1 - c2 * e) / gap,
        p2: (c2 - c1 * e) / gap,
        q1: l.ln() + c1 * s - (c1 - c2 * e).ln(),
        q2: -l.ln() + c2 * s + (c1 * e - c2).ln(),
        t,
    }
}

pub(crate) fn post_pair(cfg: &Config, s: f64, t: f64) -> PeakonPair {
    let d = cfg.derived();
    let (d1, d2, lt) = (d.d1, d.d2, d.l_tilde);
    let e = (-lt * s).exp();
    let gap = -(-lt * s).exp_m1();
    PeakonPair {
        p1: (d2 - d1 * e) / gap,
        p2: (d1 - d2 * e) / gap,
        q1: lt.ln() + d2 * s - (d1 * e - d2).ln(),
        q2: -lt.ln() + d1 * s + (d1 - d2 * e).ln(),
        t,
    }
}

/// `4 p1 p2 e^{q1 - q2}` of the pair at offset `s = t - t0 < 0`, in a form
/// that stays finite as the heights diverge.
pub(crate) fn pre_interaction(cfg: &Config, s: f64) -> f64 {
    let l = cfg.derived().l;
    let gap = -(l * s).exp_m1();
    -4.0 * l * l * (l * s).exp() / (gap * gap)
}

/// Same as [`pre_interaction`] for the pair after breaking (`s > 0`).
pub(crate) fn post_interaction(cfg: &Config, s: f64) -> f64 {
    let lt = cfg.derived().l_tilde;
    let gap = -(-lt * s).exp_m1();
    -4.0 * lt * lt * (-lt * s).exp() / (gap * gap)
}

/// Position of the single peak for `alpha = 1` after breaking (and at `t0`).
pub fn one_peakon_center(cfg: &Config, t: f64) -> f64 {
    cfg.momentum() * (t - cfg.t0())
}

pub fn eval_u(cfg: &Config, t: f64, x: f64) -> f64 {
    let m = cfg.momentum();
    match branch(cfg, t) {
        SolutionBranch::AtBreaking => m * (-x.abs()).exp(),
        SolutionBranch::PostOnePeakon => m * (-(x - one_peakon_center(cfg, t)).abs()).exp(),
        SolutionBranch::PreBreaking => pre_pair(cfg, t - cfg.t0(), t).u(x),
        SolutionBranch::PostTwoPeakon => post_pair(cfg, t - cfg.t0(), t).u(x),
    }
}

/// Spatial derivative of `u`; the left derivative at peak positions.
pub fn eval_ux(cfg: &Config, t: f64, x: f64) -> f64 {
    let m = cfg.momentum();
    match branch(cfg, t) {
        SolutionBranch::AtBreaking => m * peak_slope(x, 0.0),
        SolutionBranch::PostOnePeakon => m * peak_slope(x, one_peakon_center(cfg, t)),
        SolutionBranch::PreBreaking => pre_pair(cfg, t - cfg.t0(), t).ux(x),
        SolutionBranch::PostTwoPeakon => post_pair(cfg, t - cfg.t0(), t).ux(x),
    }
}

/// `∫ (u^2 + u_x^2) dx` of the function `u(t, ·)` on the active branch.
///
/// At `t0` this excludes the energy concentrated at the origin.
pub fn energy(cfg: &Config, t: f64) -> f64 {
    match branch(cfg, t) {
        SolutionBranch::PreBreaking => cfg.derived().e2,
        SolutionBranch::PostTwoPeakon => cfg.derived().e2_tilde,
        SolutionBranch::AtBreaking | SolutionBranch::PostOnePeakon => {
            2.0 * cfg.momentum() * cfg.momentum()
        }
    }
}

/// `∫ (u^2 + u_x^2) dx` over `[-half_width, half_width]` by adaptive quadrature
/// split at the peaks.
pub fn energy_quadrature(cfg: &Config, t: f64, half_width: f64) -> f64 {
    let peaks = peak_positions(cfg, t);
    let density = |x: f64| eval_u(cfg, t, x).powi(2) + eval_ux(cfg, t, x).powi(2);
    integrate_with_breaks(density, -half_width, half_width, &peaks, 1e-12, 1e-13).value
}

/// `∫ u^2 dx` over `[-half_width, half_width]`.
pub fn kinetic_quadrature(cfg: &Config, t: f64, half_width: f64) -> f64 {
    let peaks = peak_positions(cfg, t);
    integrate_with_breaks(|x| eval_u(cfg, t, x).powi(2), -half_width, half_width, &peaks, 1e-14, 1e-14)
        .value
}

/// Kink locations of `u(t, ·)`, sorted.
pub fn peak_positions(cfg: &Config, t: f64) -> Vec<f64> {
    match branch(cfg, t) {
        SolutionBranch::AtBreaking => vec![0.0],
        SolutionBranch::PostOnePeakon => vec![one_peakon_center(cfg, t)],
        SolutionBranch::PreBreaking => {
            let p = pre_pair(cfg, t - cfg.t0(), t);
            vec![p.q1, p.q2]
        }
        SolutionBranch::PostTwoPeakon => {
            let p = post_pair(cfg, t - cfg.t0(), t);
            vec![p.q1, p.q2]
        }
    }
}

/// A velocity profile `x ↦ (u, u_x)` at a fixed time.
pub trait VelocityField: Send + Sync {
    fn u(&self, x: f64) -> f64;
    fn ux(&self, x: f64) -> f64;
}

/// The closed-form solution frozen at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormVelocity {
    pub cfg: Config,
    pub t: f64,
}

impl VelocityField for ClosedFormVelocity {
    fn u(&self, x: f64) -> f64 {
        eval_u(&self.cfg, self.t, x)
    }

    fn ux(&self, x: f64) -> f64 {
        eval_ux(&self.cfg, self.t, x)
    }
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroVelocity;

impl VelocityField for ZeroVelocity {
    fn u(&self, _x: f64) -> f64 {
        0.0
    }

    fn ux(&self, _x: f64) -> f64 {
        0.0
    }
}
