//! Spatial interaction kernel `I^delta`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::math::normal_cdf;
use crate::model::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    Indicator,
    Gaussian,
}

/// How the kernel's normalizing constant is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `C(x)` makes `∫_X I(x - y) dy = 1` for every `x` in the domain.
    BoundaryAware,
    /// Interior constant (`1/(2δ)` or `1/(δ√(2π))`) everywhere.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionKernel {
    pub shape: KernelShape,
    pub delta: f64,
    pub normalization: Normalization,
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

impl InteractionKernel {
    pub fn new(shape: KernelShape, delta: f64, normalization: Normalization) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(config_err(format!("interaction range delta must be > 0 (got {delta})")));
        }
        Ok(Self {
            shape,
            delta,
            normalization,
        })
    }

    /// Unnormalized profile `k(d / δ)`.
    #[inline]
    pub fn profile(&self, d: f64) -> f64 {
        match self.shape {
            KernelShape::Indicator => {
                if d.abs() <= self.delta {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::Gaussian => {
                let z = d / self.delta;
                (-0.5 * z * z).exp()
            }
        }
    }

    /// Integral of the profile over the whole line.
    fn interior_mass(&self) -> f64 {
        match self.shape {
            KernelShape::Indicator => 2.0 * self.delta,
            KernelShape::Gaussian => self.delta * SQRT_2PI,
        }
    }

    /// Integral of the profile `y ↦ k((x - y)/δ)` over `[lo, hi]`.
    pub fn profile_mass(&self, x: f64, lo: f64, hi: f64) -> f64 {
        match self.shape {
            KernelShape::Indicator => {
                let a = (x - self.delta).max(lo);
                let b = (x + self.delta).min(hi);
                (b - a).max(0.0)
            }
            KernelShape::Gaussian => {
                let d = self.delta;
                d * SQRT_2PI * (normal_cdf((hi - x) / d) - normal_cdf((lo - x) / d))
            }
        }
    }

    /// Normalizer `C_δ(x)`; the kernel is `C_δ(x) · k((x - y)/δ)`.
    pub fn normalizer(&self, domain: &Domain, x: f64) -> Result<f64> {
        domain.check_x(x)?;
        if self.delta >= domain.x_len() {
            log::warn!(
                "interaction range {} is not smaller than the domain length {}",
                self.delta,
                domain.x_len()
            );
        }
        Ok(self.normalizer_unchecked(domain, x))
    }

    #[inline]
    pub(crate) fn normalizer_unchecked(&self, domain: &Domain, x: f64) -> f64 {
        match self.normalization {
            Normalization::Constant => 1.0 / self.interior_mass(),
            Normalization::BoundaryAware => 1.0 / self.profile_mass(x, domain.x_min, domain.x_max),
        }
    }

    /// `I^δ(x - y)` with the normalizer taken at the evaluation point `x`.
    #[inline]
    pub fn eval(&self, domain: &Domain, x: f64, y: f64) -> f64 {
        let p = self.profile(x - y);
        if p == 0.0 {
            0.0
        } else {
            p * self.normalizer_unchecked(domain, x)
        }
    }

    /// `sup_{x,y} I^δ(x - y)` over the domain.
    pub fn sup(&self, domain: &Domain) -> f64 {
        match self.normalization {
            Normalization::Constant => 1.0 / self.interior_mass(),
            // the window is smallest at the walls
            Normalization::BoundaryAware => {
                let mid = 0.5 * (domain.x_min + domain.x_max);
                [domain.x_min, domain.x_max, mid]
                    .iter()
                    .map(|&x| self.normalizer_unchecked(domain, x))
                    .fold(0.0, f64::max)
            }
        }
    }
}
