//! Problem parameters and the constants derived from them.
//!
//! A [`Config`] holds the peakon strength `c1 > 0`, the antipeakon strength
//! `c2 < 0`, the breaking time `t0 > 0` and the dissipation fraction
//! `alpha ∈ [0, 1]`. Everything downstream reads the post-breaking strengths
//! `d1`, `d2` from the cached [`DerivedConstants`] so the square root is taken
//! exactly once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};

/// Below this, `c1 + c2` is treated as zero.
pub const SYMMETRIC_TOLERANCE: f64 = 1e-12;

/// Parameter set of the figures: `(c1, c2, t0, alpha) = (0.8, -2.0, 1.0, 0.5)`.
pub const REFERENCE: (f64, f64, f64, f64) = (0.8, -2.0, 1.0, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `c1 - c2`
    pub l: f64,
    pub d1: f64,
    pub d2: f64,
    /// `d1 - d2`
    pub l_tilde: f64,
    /// Energy before breaking, `2 c1^2 + 2 c2^2`.
    pub e2: f64,
    /// Energy after breaking, `2 d1^2 + 2 d2^2`.
    pub e2_tilde: f64,
}

/// A validated parameter set. Construct with [`Config::new`] or [`make_config`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    c1: f64,
    c2: f64,
    t0: f64,
    alpha: f64,
    derived: DerivedConstants,
}

pub fn make_config(c1: f64, c2: f64, t0: f64, alpha: f64) -> Result<Config> {
    Config::new(c1, c2, t0, alpha)
}

pub fn derive(cfg: &Config) -> DerivedConstants {
    cfg.derived
}

impl Config {
    pub fn new(c1: f64, c2: f64, t0: f64, alpha: f64) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite() && c1 > 0.0 && c2 < 0.0) {
            return Err(PeakonError::Sign { c1, c2 });
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(PeakonError::Range {
                name: "t0",
                value: t0,
                expected: "t0 > 0",
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(PeakonError::Range {
                name: "alpha",
                value: alpha,
                expected: "0 <= alpha <= 1",
            });
        }
        // alpha = 1 with c1 + c2 = 0 continues as the zero solution; rejected too.
        let sum = c1 + c2;
        if sum.abs() < SYMMETRIC_TOLERANCE {
            return Err(PeakonError::SymmetricCase { sum });
        }
        let derived = compute_derived(c1, c2, alpha);
        Ok(Self {
            c1,
            c2,
            t0,
            alpha,
            derived,
        })
    }

    pub fn reference() -> Self {
        let (c1, c2, t0, alpha) = REFERENCE;
        Self::new(c1, c2, t0, alpha).expect("reference parameters are valid")
    }

    /// Same strengths and breaking time with a different dissipation fraction.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.c1, self.c2, self.t0, alpha)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    /// `c1 + c2`, the height of the solution at breaking.
    pub fn momentum(&self) -> f64 {
        self.c1 + self.c2
    }

    /// Energy concentrated at the origin at breaking, `-4 c1 c2`.
    pub fn breaking_energy(&self) -> f64 {
        -4.0 * self.c1 * self.c2
    }

    pub fn is_dissipative(&self) -> bool {
        self.alpha == 1.0
    }
}

fn compute_derived(c1: f64, c2: f64, alpha: f64) -> DerivedConstants {
    let l = c1 - c2;
    let sum = c1 + c2;
    let product = (1.0 - alpha) * c1 * c2;
    // (c1 + c2)^2 / 4 - (1 - alpha) c1 c2, rewritten without cancellation.
    let disc = 0.25 * l * l + alpha * c1 * c2;
    let root = disc.max(0.0).sqrt();
    // Larger-magnitude root first, the other from the product of the roots.
    let (d1, d2) = if sum >= 0.0 {
        let d1 = 0.5 * sum + root;
        (d1, product / d1)
    } else {
        let d2 = 0.5 * sum - root;
        (product / d2, d2)
    };
    DerivedConstants {
        l,
        d1,
        d2,
        l_tilde: 2.0 * root,
        e2: 2.0 * c1 * c1 + 2.0 * c2 * c2,
        e2_tilde: 2.0 * d1 * d1 + 2.0 * d2 * d2,
    }
}

impl fmt::Display for Config {
    /// Flat `key = value` lines; values use the shortest round-trip representation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c1 = {:?}", self.c1)?;
        writeln!(f, "c2 = {:?}", self.c2)?;
        writeln!(f, "t0 = {:?}", self.t0)?;
        writeln!(f, "alpha = {:?}", self.alpha)
    }
}

impl FromStr for Config {
    type Err = PeakonError;

    fn from_str(text: &str) -> Result<Self> {
        let mut values: [Option<f64>; 4] = [None; 4];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    PeakonError::Parse(format!("line {}: expected `key = value`", lineno + 1))
                })?;
            let slot = match key.trim() {
                "c1" => 0,
                "c2" => 1,
                "t0" => 2,
                "alpha" => 3,
                other => {
                    return Err(PeakonError::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            };
            let parsed: f64 = value.trim().parse().map_err(|_| {
                PeakonError::Parse(format!("line {}: `{}` is not a number", lineno + 1, value.trim()))
            })?;
            if values[slot].replace(parsed).is_some() {
                return Err(PeakonError::Parse(format!(
                    "line {}: duplicate key `{}`",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        let names = ["c1", "c2", "t0", "alpha"];
        let mut out = [0.0; 4];
        for (i, v) in values.iter().enumerate() {
            out[i] = v.ok_or_else(|| PeakonError::Parse(format!("missing key `{}`", names[i])))?;
        }
        Config::new(out[0], out[1], out[2], out[3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn figure_parameters_are_valid() {
        let cfg = make_config(0.8, -2.0, 1.0, 0.5).unwrap();
        assert_eq!(cfg.alpha(), 0.5);
    }

    #[test]
    fn symmetric_collision_is_rejected() {
        assert!(matches!(
            make_config(0.8, -0.8, 1.0, 0.0),
            Err(PeakonError::SymmetricCase { .. })
        ));
        assert!(matches!(
            make_config(0.8, -0.8, 1.0, 1.0),
            Err(PeakonError::SymmetricCase { .. })
        ));
    }

    #[test]
    fn sign_and_range_errors() {
        assert!(matches!(
            make_config(-1.0, 2.0, 1.0, 0.0),
            Err(PeakonError::Sign { .. })
        ));
        assert!(matches!(
            make_config(1.0, -2.0, 0.0, 0.0),
            Err(PeakonError::Range { name: "t0", .. })
        ));
        assert!(matches!(
            make_config(1.0, -2.0, 1.0, 1.5),
            Err(PeakonError::Range { name: "alpha", .. })
        ));
        assert!(matches!(
            make_config(1.0, -2.0, 1.0, f64::NAN),
            Err(PeakonError::Range { name: "alpha", .. })
        ));
    }

    #[test]
    fn conservative_case_keeps_strengths() {
        let d = derive(&make_config(0.8, -2.0, 1.0, 0.0).unwrap());
        assert_relative_eq!(d.d1, 0.8, max_relative = 1e-15);
        assert_relative_eq!(d.d2, -2.0, max_relative = 1e-15);
    }

    #[test]
    fn reference_derived_values() {
        // d1, d2 roots of x^2 + 1.2 x - 0.8 = 0: -0.6 ± sqrt(1.16)
        let d = derive(&Config::reference());
        let root = 1.16f64.sqrt();
        assert_relative_eq!(d.d1, -0.6 + root, max_relative = 1e-14);
        assert_relative_eq!(d.d2, -0.6 - root, max_relative = 1e-14);
        assert!((d.d1 - 0.477033).abs() < 1e-6);
        assert!((d.d2 + 1.677033).abs() < 1e-6);
        assert_relative_eq!(d.d1 * d.d2, -0.8, max_relative = 1e-14);
        assert_relative_eq!(d.e2, 9.28, max_relative = 1e-15);
        assert_relative_eq!(d.e2_tilde, 6.08, max_relative = 1e-14);
        assert_relative_eq!(d.l, 2.8);
        assert_relative_eq!(d.l_tilde, d.d1 - d.d2, max_relative = 1e-15);
    }

    #[test]
    fn text_format_round_trip() {
        let cfg = Config::reference();
        let text = cfg.to_string();
        assert_eq!(text, "c1 = 0.8\nc2 = -2.0\nt0 = 1.0\nalpha = 0.5\n");
        assert_eq!(text.parse::<Config>().unwrap(), cfg);
        let commented = "# reference\nalpha: 0.5\n c1=0.8\nc2 = -2\n\nt0 = 1 # breaking\n";
        assert_eq!(commented.parse::<Config>().unwrap(), cfg);
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!("c1 = 0.8\n".parse::<Config>(), Err(PeakonError::Parse(_))));
        assert!(matches!(
            "c1 = 0.8\nc1 = 0.9\nc2=-1\nt0=1\nalpha=0".parse::<Config>(),
            Err(PeakonError::Parse(_))
        ));
        assert!(matches!(
            "c1 = x\nc2=-1\nt0=1\nalpha=0".parse::<Config>(),
            Err(PeakonError::Parse(_))
        ));
        assert!(matches!(
            "c1 = 1\nc2=-1\nt0=1\nalpha=0".parse::<Config>(),
            Err(PeakonError::SymmetricCase { .. })
        ));
    }

    fn valid_config() -> impl Strategy<Value = Config> {
        (0.05f64..5.0, -5.0f64..-0.05, 0.1f64..5.0, 0.0f64..=1.0)
            .prop_filter("non-symmetric", |(c1, c2, _, _)| (c1 + c2).abs() > 1e-6)
            .prop_map(|(c1, c2, t0, a)| Config::new(c1, c2, t0, a).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn strengths_solve_the_quadratic(cfg in valid_config()) {
            let d = cfg.derived();
            let s = cfg.c1() + cfg.c2();
            let p = (1.0 - cfg.alpha()) * cfg.c1() * cfg.c2();
            let scale = s * s + p.abs() + d.d1 * d.d1 + d.d2 * d.d2;
            for root in [d.d1, d.d2] {
                let residual = root * root - s * root + p;
                prop_assert!(residual.abs() <= 1e-12 * scale);
            }
            prop_assert!((d.d1 + d.d2 - s).abs() <= 1e-12 * (s.abs() + d.l_tilde));
            prop_assert!((d.d1 * d.d2 - p).abs() <= 1e-12 * (p.abs() + 1e-300).max(d.d1.abs() * d.d2.abs()));
        }

        #[test]
        fn post_breaking_energy_drops_by_the_removed_fraction(cfg in valid_config()) {
            let d = cfg.derived();
            let removed = 4.0 * cfg.alpha() * cfg.c1() * cfg.c2();
            prop_assert!((d.e2_tilde - d.e2 - removed).abs() <= 1e-12 * d.e2);
        }

        #[test]
        fn strengths_keep_their_signs(cfg in valid_config()) {
            let d = cfg.derived();
            prop_assert!(d.l > 0.0 && d.l_tilde > 0.0);
            if cfg.alpha() < 1.0 {
                prop_assert!(d.d1 > 0.0 && d.d2 < 0.0);
            }
        }

        #[test]
        fn conservative_strengths_are_exact(c1 in 0.05f64..5.0, c2 in -5.0f64..-0.05, t0 in 0.1f64..5.0) {
            prop_assume!((c1 + c2).abs() > 1e-6);
            let d = *Config::new(c1, c2, t0, 0.0).unwrap().derived();
            prop_assert!((d.d1 - c1).abs() <= 4.0 * f64::EPSILON * c1.abs().max(c2.abs()));
            prop_assert!((d.d2 - c2).abs() <= 4.0 * f64::EPSILON * c1.abs().max(c2.abs()));
        }
    }
}
