//! Closed algebra of rate and coefficient functions of `(x, u)`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::Domain;

/// A coefficient function of position `x` and trait `u`.
///
/// Only a small closed set of shapes is supported: enough to express every
/// built-in scenario and simple custom models without an expression parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFn {
    Const {
        value: f64,
    },
    /// `sum_k coeffs[k] * (x - u)^k` on `|x - u| <= cutoff`, zero outside.
    PolyDiff {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<f64>,
    },
    /// `amplitude * exp(-(x - center)^2 / (2 (var_const + var_per_trait * u)))`.
    Gaussian {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        var_const: f64,
        #[serde(default)]
        var_per_trait: f64,
    },
    /// `c0 + c1 * u`.
    AffineTrait { c0: f64, c1: f64 },
}

impl RateFn {
    pub fn constant(value: f64) -> Self {
        RateFn::Const { value }
    }

    pub fn zero() -> Self {
        RateFn::Const { value: 0.0 }
    }

    #[inline]
    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            RateFn::Const { value } => *value,
            RateFn::PolyDiff { coeffs, cutoff } => {
                let d = x - u;
                if let Some(c) = cutoff {
                    if d.abs() > *c {
                        return 0.0;
                    }
                }
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c)
            }
            RateFn::Gaussian {
                amplitude,
                center,
                var_const,
                var_per_trait,
            } => {
                let var = var_const + var_per_trait * u;
                let d = x - center;
                amplitude * (-d * d / (2.0 * var)).exp()
            }
            RateFn::AffineTrait { c0, c1 } => c0 + c1 * u,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RateFn::Const { value } => *value == 0.0,
            RateFn::PolyDiff { coeffs, .. } => coeffs.iter().all(|&c| c == 0.0),
            RateFn::Gaussian { amplitude, .. } => *amplitude == 0.0,
            RateFn::AffineTrait { c0, c1 } => *c0 == 0.0 && *c1 == 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            RateFn::Const { .. } => true,
            RateFn::AffineTrait { c1, .. } => *c1 == 0.0,
            other => other.is_zero(),
        }
    }

    /// Whether the function ignores `x` (so a reflected diffusion with this
    /// coefficient has frozen-coefficient Euler steps that are exact).
    pub fn independent_of_x(&self) -> bool {
        matches!(self, RateFn::Const { .. } | RateFn::AffineTrait { .. }) || self.is_zero()
    }

    /// Upper bound of `|f|` over the closed box `domain`.
    pub fn sup_abs(&self, domain: &Domain) -> f64 {
        match self {
            RateFn::Const { value } => value.abs(),
            RateFn::AffineTrait { c0, c1 } => {
                (c0 + c1 * domain.u_min).abs().max((c0 + c1 * domain.u_max).abs())
            }
            RateFn::Gaussian {
                amplitude,
                center,
                var_const,
                var_per_trait,
            } => {
                let d = if *center < domain.x_min {
                    domain.x_min - center
                } else if *center > domain.x_max {
                    center - domain.x_max
                } else {
                    0.0
                };
                let var_max = (var_const + var_per_trait * domain.u_min)
                    .max(var_const + var_per_trait * domain.u_max);
                amplitude.abs() * (-d * d / (2.0 * var_max)).exp()
            }
            RateFn::PolyDiff { coeffs, cutoff } => {
                let mut lo = domain.x_min - domain.u_max;
                let mut hi = domain.x_max - domain.u_min;
                if let Some(c) = cutoff {
                    lo = lo.max(-c);
                    hi = hi.min(*c);
                }
                if lo > hi {
                    return 0.0;
                }
                let poly = |d: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c);
                const SAMPLES: usize = 20_000;
                let mut best = poly(lo).abs().max(poly(hi).abs());
                if lo <= 0.0 && 0.0 <= hi {
                    best = best.max(poly(0.0).abs());
                }
                for k in 0..=SAMPLES {
                    let d = lo + (hi - lo) * k as f64 / SAMPLES as f64;
                    best = best.max(poly(d).abs());
                }
                // sampled maximum of a polynomial: pad by a relative hair
                best * (1.0 + 1e-9)
            }
        }
    }

    /// Smallest value on a dense grid of the box; used to reject rates that
    /// go negative.
    pub fn grid_min(&self, domain: &Domain) -> f64 {
        const K: usize = 200;
        let mut min = f64::INFINITY;
        for i in 0..=K {
            let x = domain.x_min + domain.x_len() * i as f64 / K as f64;
            for j in 0..=K {
                let u = domain.u_min + domain.u_len() * j as f64 / K as f64;
                min = min.min(self.eval(x, u));
            }
        }
        min
    }

    pub(crate) fn validate(&self, name: &str, domain: &Domain, nonnegative: bool) -> Result<()> {
        match self {
            RateFn::Gaussian {
                var_const,
                var_per_trait,
                ..
            } => {
                let lo = var_const + var_per_trait * domain.u_min;
                let hi = var_const + var_per_trait * domain.u_max;
                if !(lo > 0.0 && hi > 0.0) {
                    return Err(config_err(format!(
                        "{name}: gaussian variance must be positive on the trait box (got {lo}..{hi})"
                    )));
                }
            }
            RateFn::PolyDiff { coeffs, cutoff } => {
                if coeffs.is_empty() {
                    return Err(config_err(format!("{name}: poly_diff needs at least one coefficient")));
                }
                if let Some(c) = cutoff {
                    if !(*c >= 0.0) {
                        return Err(config_err(format!("{name}: cutoff must be >= 0")));
                    }
                }
            }
            _ => {}
        }
        if nonnegative {
            let min = self.grid_min(domain);
            if min < -1e-12 {
                return Err(config_err(format!(
                    "{name} must be nonnegative on the domain (minimum {min})"
                )));
            }
        }
        Ok(())
    }
}

/// Phenotypic competition weight `W(u - v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompetitionKernel {
    Const { value: f64 },
    /// `amplitude * exp(-v^2 / scale)`.
    Gaussian { amplitude: f64, scale: f64 },
}

impl CompetitionKernel {
    #[inline]
    pub fn eval(&self, dv: f64) -> f64 {
        match self {
            CompetitionKernel::Const { value } => *value,
            CompetitionKernel::Gaussian { amplitude, scale } => amplitude * (-dv * dv / scale).exp(),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            CompetitionKernel::Const { value } => *value,
            CompetitionKernel::Gaussian { amplitude, .. } => *amplitude,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CompetitionKernel::Const { .. })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match self {
            CompetitionKernel::Const { value } => *value >= 0.0 && value.is_finite(),
            CompetitionKernel::Gaussian { amplitude, scale } => *amplitude >= 0.0 && *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(config_err("competition kernel W must be nonnegative and bounded"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn poly_diff_cutoff() {
        let f = RateFn::PolyDiff {
            coeffs: vec![2.0, 0.0, -20.0],
            cutoff: Some(1.0 / 10f64.sqrt()),
        };
        assert_eq!(f.eval(0.3, 0.3), 2.0);
        assert!((f.eval(0.4, 0.3) - 1.8).abs() < 1e-12);
        assert_eq!(f.eval(0.9, 0.1), 0.0);
        assert!((f.sup_abs(&unit()) - 2.0).abs() < 1e-8);
        assert!(f.grid_min(&unit()) > -1e-12);
    }

    #[test]
    fn gaussian_trait_width() {
        let f = RateFn::Gaussian {
            amplitude: 1.0,
            center: 0.0,
            var_const: 0.1,
            var_per_trait: 1.0,
        };
        let expect = (-0.25f64 / (2.0 * 0.6)).exp();
        assert!((f.eval(0.5, 0.5) - expect).abs() < 1e-15);
    }

    #[test]
    fn negative_rate_rejected() {
        let f = RateFn::AffineTrait { c0: 0.5, c1: -1.0 };
        assert!(f.validate("lambda", &unit(), true).is_err());
        assert!(f.validate("drift", &unit(), false).is_ok());
    }
}
