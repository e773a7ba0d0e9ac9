//! Reflected diffusion of positions: a Lépingle-type Euler scheme whose
//! boundary pushes use Shepp's exact joint law of a Brownian endpoint and
//! the running maximum of a Brownian motion with drift.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{config_err, Error, Result};
use crate::model::{Domain, Individual, ModelSpec};

/// Euler substep and the two interior thresholds `α < ᾱ < β̄ < β` that gate
/// the lower and upper boundary corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectConfig {
    pub h: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
}

impl ReflectConfig {
    /// Thresholds a quarter of the domain in from each wall.
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        let q = 0.25 * domain.x_len();
        Self::with_thresholds(domain, h, domain.x_min + q, domain.x_max - q)
    }

    pub fn with_thresholds(domain: &Domain, h: f64, alpha_bar: f64, beta_bar: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(config_err(format!("Euler substep h must be > 0 (got {h})")));
        }
        if !(domain.x_min < alpha_bar && alpha_bar < beta_bar && beta_bar < domain.x_max) {
            return Err(config_err(format!(
                "need x_min < alpha_bar < beta_bar < x_max (got {alpha_bar}, {beta_bar})"
            )));
        }
        Ok(Self {
            h,
            alpha_bar,
            beta_bar,
        })
    }

    /// Warns when a single substep can cross the whole gated gap.
    pub fn check_step(&self, m_star: f64) -> bool {
        let ok = 6.0 * (2.0 * m_star * self.h).sqrt() < self.beta_bar - self.alpha_bar;
        if !ok {
            log::warn!(
                "Euler substep h = {} is large: 6·sqrt(2 m* h) exceeds the gap beta_bar - alpha_bar",
                self.h
            );
        }
        ok
    }
}

/// Supremum over `[0, t]` of `a B_s + b s` given the endpoint draw
/// `U = B_t ~ N(0, t)` and an independent `V ~ Exp(mean 2t)`.
#[inline]
fn shepp_max(a: f64, b: f64, t: f64, bm: f64, v: f64) -> f64 {
    let end = a * bm + b * t;
    0.5 * (end + (a * a * v + end * end).sqrt())
}

/// Joint draw of `(B_t, sup_{s<=t} (a B_s + b s))`.
pub fn shepp_sample<R: Rng + ?Sized>(a: f64, b: f64, t: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(config_err(format!("shepp_sample needs t > 0 (got {t})")));
    }
    let z: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(Exp1);
    let bm = t.sqrt() * z;
    Ok((bm, shepp_max(a, b, t, bm, 2.0 * t * e)))
}

#[inline]
fn substep<R: Rng + ?Sized>(x: f64, u: f64, spec: &ModelSpec, cfg: &ReflectConfig, dt: f64, rng: &mut R) -> f64 {
    let dom = spec.domain();
    let sigma = (2.0 * spec.diffusion(x, u)).sqrt();
    let b = spec.drift(x, u);
    let z: f64 = rng.sample(StandardNormal);
    let bm = dt.sqrt() * z;
    let mut y = x + b * dt + sigma * bm;
    if x < cfg.alpha_bar {
        let v = 2.0 * dt * rng.sample::<f64, _>(Exp1);
        let a_sup = shepp_max(-sigma, -b, dt, bm, v);
        y += (a_sup - (x - dom.x_min)).max(0.0);
    } else if x > cfg.beta_bar {
        let v = 2.0 * dt * rng.sample::<f64, _>(Exp1);
        let b_sup = shepp_max(sigma, b, dt, bm, v);
        y -= (b_sup + (x - dom.x_max)).max(0.0);
    }
    let y = y.clamp(dom.x_min, dom.x_max);
    assert!(
        y >= dom.x_min && y <= dom.x_max,
        "reflected position {y} escaped the domain"
    );
    y
}

/// One scheme step of length `dt <= h` from `x`.
pub fn euler_substep<R: Rng + ?Sized>(
    x: f64,
    u: f64,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    spec.domain().check_x(x)?;
    if !(dt > 0.0 && dt <= cfg.h) {
        return Err(config_err(format!("substep dt must lie in (0, h = {}] (got {dt})", cfg.h)));
    }
    Ok(substep(x, u, spec, cfg, dt, rng))
}

/// Moves `ind` from its sync time to `t_target` in place.
pub(crate) fn advance_in_place<R: Rng + ?Sized>(
    ind: &mut Individual,
    spec: &ModelSpec,
    t_target: f64,
    cfg: &ReflectConfig,
    rng: &mut R,
) -> Result<()> {
    let span = t_target - ind.t_sync;
    if span < 0.0 {
        return Err(Error::Numerical(format!(
            "cannot move individual {} back from {} to {t_target}",
            ind.id, ind.t_sync
        )));
    }
    if span > 0.0 {
        let n = (span / cfg.h).ceil().max(1.0) as u64;
        let mut x = ind.x;
        for k in 0..n {
            let dt = if k + 1 < n { cfg.h } else { span - (n - 1) as f64 * cfg.h };
            if dt > 0.0 {
                x = substep(x, ind.u, spec, cfg, dt, rng);
            }
        }
        ind.x = x;
    }
    ind.t_sync = t_target;
    Ok(())
}

/// Returns `ind` moved along its reflected diffusion to `t_target`.
pub fn advance_position<R: Rng + ?Sized>(
    ind: &Individual,
    spec: &ModelSpec,
    t_target: f64,
    cfg: &ReflectConfig,
    rng: &mut R,
) -> Result<Individual> {
    spec.domain().check_x(ind.x)?;
    let mut out = *ind;
    advance_in_place(&mut out, spec, t_target, cfg, rng)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(m: f64, b: f64) -> ModelSpec {
        ModelSpec::new(ModelDef {
            domain: Domain::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            birth: RateFn::zero(),
            death: DeathModel::Logistic {
                mu0: RateFn::zero(),
                mu1: RateFn::zero(),
            },
            diffusion: RateFn::constant(m),
            drift: RateFn::constant(b),
            mutation: MutationDef { rate: 0.0, s: 0.1 },
            interaction: InteractionKernel::new(KernelShape::Indicator, 0.1, Normalization::BoundaryAware).unwrap(),
            competition: CompetitionKernel::Const { value: 1.0 },
            n_scale: 1.0,
            c_delta: None,
        })
        .unwrap()
    }

    #[test]
    fn shepp_deterministic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(shepp_sample(0.0, 2.0, 1.0, &mut rng).unwrap().1, 2.0);
            assert_eq!(shepp_sample(0.0, -2.0, 1.0, &mut rng).unwrap().1, 0.0);
        }
        assert!(shepp_sample(1.0, 0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn no_motion_without_coefficients() {
        let s = spec(0.0, 0.0);
        let cfg = ReflectConfig::new(s.domain(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &x in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(euler_substep(x, 0.5, &s, &cfg, 0.1, &mut rng).unwrap(), x);
        }
    }

    #[test]
    fn deterministic_drift() {
        let s = spec(0.0, 1.0);
        let cfg = ReflectConfig::new(s.domain(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = euler_substep(0.5, 0.5, &s, &cfg, 0.1, &mut rng).unwrap();
        assert!((y - 0.6).abs() < 1e-15);
        // upper push: 0.95 + 0.1 - max(0, 0.1 - 0.05) = 1.0
        let y = euler_substep(0.95, 0.5, &s, &cfg, 0.1, &mut rng).unwrap();
        assert!((y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(0.01, 0.0);
        let cfg = ReflectConfig::new(s.domain(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(euler_substep(1.2, 0.5, &s, &cfg, 0.05, &mut rng).is_err());
        assert!(euler_substep(0.5, 0.5, &s, &cfg, 0.2, &mut rng).is_err());
        let ind = Individual {
            x: 0.5,
            u: 0.5,
            t_sync: 1.0,
            id: 0,
            draws: 0,
        };
        assert!(advance_position(&ind, &s, 0.5, &cfg, &mut rng).is_err());
        assert_eq!(advance_position(&ind, &s, 1.0, &cfg, &mut rng).unwrap(), ind);
        assert!(ReflectConfig::with_thresholds(s.domain(), 0.1, 0.6, 0.4).is_err());
    }

    #[test]
    fn advance_aligns_to_target() {
        let s = spec(0.02, 0.0);
        let cfg = ReflectConfig::new(s.domain(), 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ind = Individual {
            x: 0.3,
            u: 0.5,
            t_sync: 0.123,
            id: 0,
            draws: 0,
        };
        let out = advance_position(&ind, &s, 0.5005, &cfg, &mut rng).unwrap();
        assert_eq!(out.t_sync, 0.5005);
        assert_eq!(out.u, 0.5);
        assert!(out.x >= 0.0 && out.x <= 1.0);
    }
}
