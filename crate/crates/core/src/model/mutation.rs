//! Mutation kernel: Gaussian trait steps conditioned on the trait box.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config_err, Error, Result};
use crate::math::{normal_cdf, normal_pdf};

/// `M(x, u, v) = rate * k_s(u, v)` where `k_s(u, ·)` is the density of a
/// `Normal(u, s²)` variable conditioned on `[u_min, u_max]`.
#[derive(Debug, Clone)]
pub struct MutationKernel {
    rate: f64,
    s: f64,
    u_min: f64,
    u_max: f64,
    envelope: Arc<OnceLock<Envelope>>,
}

/// Piecewise-constant dominating function `M*(v) >= sup_u M(u, v)`.
#[derive(Debug, Clone)]
pub struct Envelope {
    edges: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    l1: f64,
}

const ENVELOPE_SAFETY: f64 = 1.01;
/// Beyond this many standard deviations the Gaussian factor cannot compete
/// with the near-diagonal maximum.
const REACH: f64 = 7.0;
const STRIP: f64 = 10.0;
const MAX_REJECTIONS: usize = 1_000_000;

impl PartialEq for MutationKernel {
    fn eq(&self, other: &Self) -> bool {
        self.rate == other.rate && self.s == other.s && self.u_min == other.u_min && self.u_max == other.u_max
    }
}

impl MutationKernel {
    pub fn new(rate: f64, s: f64, u_min: f64, u_max: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(config_err(format!("mutation rate must be >= 0 (got {rate})")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(config_err(format!("mutation step s must be > 0 (got {s})")));
        }
        if !(u_min < u_max) {
            return Err(config_err("trait box must satisfy u_min < u_max"));
        }
        Ok(Self {
            rate,
            s,
            u_min,
            u_max,
            envelope: Arc::new(OnceLock::new()),
        })
    }

    pub fn none(u_min: f64, u_max: f64) -> Self {
        Self::new(0.0, 1.0, u_min, u_max).expect("valid box")
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Conditioning normalizer `P(u + sξ ∈ box)`.
    #[inline]
    pub fn z(&self, u: f64) -> f64 {
        normal_cdf((self.u_max - u) / self.s) - normal_cdf((self.u_min - u) / self.s)
    }

    /// `k_s(u, v)`: density of a mutant trait `v` from a parent with trait `u`.
    #[inline]
    pub fn density(&self, u: f64, v: f64) -> f64 {
        if v < self.u_min || v > self.u_max {
            return 0.0;
        }
        normal_pdf((v - u) / self.s) / (self.s * self.z(u))
    }

    /// `M(u, v) = rate * k_s(u, v)`.
    #[inline]
    pub fn rate_density(&self, u: f64, v: f64) -> f64 {
        if self.rate == 0.0 {
            0.0
        } else {
            self.rate * self.density(u, v)
        }
    }

    /// Probability that a mutant of a `u`-parent lands in `[lo, hi]`.
    pub fn cell_probability(&self, u: f64, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.u_min);
        let hi = hi.min(self.u_max);
        if hi <= lo {
            return 0.0;
        }
        (normal_cdf((hi - u) / self.s) - normal_cdf((lo - u) / self.s)) / self.z(u)
    }

    pub fn envelope(&self) -> &Envelope {
        self.envelope.get_or_init(|| Envelope::build(self))
    }

    /// `‖M*‖₁`.
    pub fn envelope_l1(&self) -> f64 {
        if self.rate == 0.0 {
            0.0
        } else {
            self.envelope().l1
        }
    }

    /// Draw a mutant trait for a parent with trait `u`.
    pub fn sample_mutant<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let z: f64 = rng.sample(StandardNormal);
            let v = u + self.s * z;
            if v >= self.u_min && v <= self.u_max {
                return Ok(v);
            }
        }
        Err(Error::Numerical(format!(
            "mutant trait sampler stalled after {MAX_REJECTIONS} rejections (u = {u}, s = {})",
            self.s
        )))
    }

    /// Sup over parents of `k_s(u, v)`, maximized on a grid fine relative to `s`.
    fn sup_density(&self, v: f64) -> f64 {
        let lo = self.u_min.max(v - REACH * self.s);
        let hi = self.u_max.min(v + REACH * self.s);
        let step = self.s / 20.0;
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let mut best = self.density(v.clamp(self.u_min, self.u_max), v);
        for k in 0..=n {
            let u = (lo + k as f64 * step).min(hi);
            best = best.max(self.density(u, v));
        }
        best
    }
}

impl Envelope {
    fn build(kernel: &MutationKernel) -> Self {
        let (u_min, u_max, s) = (kernel.u_min, kernel.u_max, kernel.s);
        let strip = STRIP * s;
        let bin = s / 10.0;
        let mut edges = vec![u_min];
        let mut values = Vec::new();

        let fine = |edges: &mut Vec<f64>, values: &mut Vec<f64>, a: f64, b: f64| {
            let n = ((b - a) / bin).ceil().max(1.0) as usize;
            let w = (b - a) / n as f64;
            for k in 0..n {
                let lo = a + k as f64 * w;
                let hi = if k + 1 == n { b } else { lo + w };
                let m = (0..=8)
                    .map(|p| kernel.sup_density(lo + (hi - lo) * p as f64 / 8.0))
                    .fold(0.0, f64::max);
                edges.push(hi);
                values.push(ENVELOPE_SAFETY * kernel.rate * m);
            }
        };

        if u_max - u_min <= 2.0 * strip {
            fine(&mut edges, &mut values, u_min, u_max);
        } else {
            fine(&mut edges, &mut values, u_min, u_min + strip);
            // Interior: every parent within REACH·s of v sits at least
            // (STRIP - REACH)·s from the walls, so Z(u) >= zmin there.
            let inner = (STRIP - REACH) * s;
            let zmin = kernel.z(u_min + inner).min(kernel.z(u_max - inner));
            let far = normal_pdf(REACH) / (s * 0.5);
            let interior = (normal_pdf(0.0) / (s * zmin)).max(far);
            edges.push(u_max - strip);
            values.push(ENVELOPE_SAFETY * kernel.rate * interior);
            fine(&mut edges, &mut values, u_max - strip, u_max);
        }

        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for (k, v) in values.iter().enumerate() {
            acc += v * (edges[k + 1] - edges[k]);
            cumulative.push(acc);
        }
        Envelope {
            edges,
            values,
            cumulative,
            l1: acc,
        }
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// `M*(v)`.
    pub fn value(&self, v: f64) -> f64 {
        if v < self.edges[0] || v > *self.edges.last().unwrap() {
            return 0.0;
        }
        let k = self.edges.partition_point(|&e| e <= v).saturating_sub(1);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Draw `v` with density `M*(v) / ‖M*‖₁`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.l1;
        let k = self.cumulative.partition_point(|&c| c <= target).min(self.values.len() - 1);
        let (lo, hi) = (self.edges[k], self.edges[k + 1]);
        lo + (hi - lo) * rng.random::<f64>()
    }
}
