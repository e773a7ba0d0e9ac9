//! Domain types, rate functions, kernels and the competition field.

mod kernel;
mod mutation;
mod rates;

pub use kernel::{InteractionKernel, KernelShape, Normalization};
pub use mutation::{Envelope, MutationKernel};
pub use rates::{CompetitionKernel, RateFn};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Spatial interval `[x_min, x_max]` times trait interval `[u_min, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, u_min: f64, u_max: f64) -> Result<Self> {
        let d = Self {
            x_min,
            x_max,
            u_min,
            u_max,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.u_min, self.u_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max) || !(self.u_min < self.u_max) {
            return Err(config_err(format!(
                "domain must be bounded with x_min < x_max and u_min < u_max (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn x_len(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn u_len(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn check_x(&self, x: f64) -> Result<()> {
        if x >= self.x_min && x <= self.x_max {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: "x",
                value: x,
                lo: self.x_min,
                hi: self.x_max,
            })
        }
    }

    pub fn check_u(&self, u: f64) -> Result<()> {
        if u >= self.u_min && u <= self.u_max {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: "u",
                value: u,
                lo: self.u_min,
                hi: self.u_max,
            })
        }
    }
}

/// One atom of the population measure.
///
/// `id` names the individual's private diffusion stream and `draws` is the
/// position reached in it, so positions do not depend on event interleaving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub x: f64,
    pub u: f64,
    pub t_sync: f64,
    pub id: u64,
    pub draws: u64,
}

/// Finite point measure `Σ δ_(x_i, u_i)` plus the global clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub t: f64,
    next_id: u64,
}

impl Population {
    pub fn empty(t: f64) -> Self {
        Self {
            individuals: Vec::new(),
            t,
            next_id: 0,
        }
    }

    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>, t: f64) -> Self {
        let mut pop = Self::empty(t);
        for (x, u) in points {
            pop.push(x, u);
        }
        pop
    }

    /// Adds a newborn synchronized to the current clock; returns its index.
    pub fn push(&mut self, x: f64, u: f64) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.individuals.push(Individual {
            x,
            u,
            t_sync: self.t,
            id,
            draws: 0,
        });
        self.individuals.len() - 1
    }

    /// Removes individual `i` in O(1); the last individual takes its index.
    pub fn remove(&mut self, i: usize) -> Individual {
        self.individuals.swap_remove(i)
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for ind in &self.individuals {
            domain.check_x(ind.x)?;
            domain.check_u(ind.u)?;
            if ind.t_sync > self.t {
                return Err(Error::Numerical(format!(
                    "individual {} synchronized at {} beyond the clock {}",
                    ind.id, ind.t_sync, self.t
                )));
            }
        }
        Ok(())
    }

    /// `⟨ν, f⟩`.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.individuals.iter().map(|i| f(i.x, i.u)).sum()
    }
}

/// Death rate `μ(x, u, r)` as a function of the scaled field `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeathModel {
    /// `μ0(x,u) + μ1(x,u) r`.
    Logistic { mu0: RateFn, mu1: RateFn },
    /// `Σ_k terms[k](x,u) r^k`, with user-supplied bound `μ*` such that
    /// `μ <= μ*(1 + |r|)` and Lipschitz constant in `r`.
    General {
        terms: Vec<RateFn>,
        mu_star: f64,
        lipschitz: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationDef {
    pub rate: f64,
    pub s: f64,
}

/// Serializable description of a model; [`ModelSpec`] is its validated form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDef {
    pub domain: Domain,
    pub birth: RateFn,
    pub death: DeathModel,
    pub diffusion: RateFn,
    pub drift: RateFn,
    pub mutation: MutationDef,
    pub interaction: InteractionKernel,
    pub competition: CompetitionKernel,
    /// Population scale `K`: the death rate sees `field / K`.
    pub n_scale: f64,
    /// Overrides the automatically derived thinning constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_delta: Option<f64>,
}

/// Suprema of the rate functions and the derived thinning constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lambda_star: f64,
    /// `sup μ0` (logistic) or `μ*` (general).
    pub mu0_star: f64,
    /// `sup μ1` (logistic) or `μ*` (general).
    pub mu1_star: f64,
    pub m_star: f64,
    pub b_star: f64,
    /// `‖M*‖₁`.
    pub mutation_l1: f64,
    /// `‖I^δ W‖∞`.
    pub iw_sup: f64,
    /// Upper bound of `μ0 + λ + ‖M*‖₁`; the solo event bands fit below it.
    pub solo: f64,
    pub c_delta: f64,
}

/// Validated model: rate functions, kernels, bounds.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub def: ModelDef,
    pub mutation: MutationKernel,
    pub bounds: Bounds,
}

impl ModelSpec {
    pub fn new(def: ModelDef) -> Result<Self> {
        let d = def.domain;
        d.validate()?;
        def.birth.validate("birth", &d, true)?;
        def.diffusion.validate("diffusion", &d, true)?;
        def.drift.validate("drift", &d, false)?;
        def.competition.validate()?;
        if !(def.n_scale > 0.0 && def.n_scale.is_finite()) {
            return Err(config_err(format!("n_scale must be > 0 (got {})", def.n_scale)));
        }
        let (mu0_star, mu1_star) = match &def.death {
            DeathModel::Logistic { mu0, mu1 } => {
                mu0.validate("mu0", &d, true)?;
                mu1.validate("mu1", &d, true)?;
                (mu0.sup_abs(&d), mu1.sup_abs(&d))
            }
            DeathModel::General {
                terms,
                mu_star,
                lipschitz,
            } => {
                if terms.is_empty() {
                    return Err(config_err("general death model needs at least one term"));
                }
                for (k, t) in terms.iter().enumerate() {
                    t.validate(&format!("death term {k}"), &d, false)?;
                }
                if !(*mu_star > 0.0) || !(*lipschitz >= 0.0) {
                    return Err(config_err("general death model needs mu_star > 0 and lipschitz >= 0"));
                }
                (*mu_star, *mu_star)
            }
        };
        let mutation = MutationKernel::new(def.mutation.rate, def.mutation.s, d.u_min, d.u_max)?;
        let lambda_star = def.birth.sup_abs(&d);
        let mutation_l1 = mutation.envelope_l1();
        let iw_sup = def.interaction.sup(&d) * def.competition.sup();
        let solo = mu0_star + lambda_star + mutation_l1;
        let auto = solo.max(mu1_star * iw_sup / def.n_scale);
        let c_delta = match def.c_delta {
            Some(c) if !(c >= 0.0 && c.is_finite()) => {
                return Err(config_err(format!("c_delta must be >= 0 (got {c})")))
            }
            Some(c) => c,
            None => auto,
        };
        let bounds = Bounds {
            lambda_star,
            mu0_star,
            mu1_star,
            m_star: def.diffusion.sup_abs(&d),
            b_star: def.drift.sup_abs(&d),
            mutation_l1,
            iw_sup,
            solo,
            c_delta,
        };
        Ok(Self { def, mutation, bounds })
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.def.domain
    }

    #[inline]
    pub fn n_scale(&self) -> f64 {
        self.def.n_scale
    }

    #[inline]
    pub fn birth(&self, x: f64, u: f64) -> f64 {
        self.def.birth.eval(x, u)
    }

    #[inline]
    pub fn diffusion(&self, x: f64, u: f64) -> f64 {
        self.def.diffusion.eval(x, u)
    }

    #[inline]
    pub fn drift(&self, x: f64, u: f64) -> f64 {
        self.def.drift.eval(x, u)
    }

    pub fn is_logistic(&self) -> bool {
        matches!(self.def.death, DeathModel::Logistic { .. })
    }

    /// Pairwise weight `I^δ(x_i - x_j) W(u_i - u_j)`.
    #[inline]
    pub fn pair_weight(&self, xi: f64, ui: f64, xj: f64, uj: f64) -> f64 {
        let w = self.def.competition.eval(ui - uj);
        if w == 0.0 {
            return 0.0;
        }
        w * self.def.interaction.eval(&self.def.domain, xi, xj)
    }

    /// `Σ_j I^δ(x - x_j) W(u - u_j)` over the given individuals.
    pub fn field_at(&self, individuals: &[Individual], x: f64, u: f64) -> f64 {
        let k = &self.def.interaction;
        let w = &self.def.competition;
        let sum: f64 = individuals
            .iter()
            .map(|j| {
                let p = k.profile(x - j.x);
                if p == 0.0 {
                    0.0
                } else {
                    p * w.eval(u - j.u)
                }
            })
            .sum();
        sum * k.normalizer_unchecked(&self.def.domain, x)
    }

    /// `μ(x, u, field / K)`.
    pub fn death_rate(&self, x: f64, u: f64, field: f64) -> Result<f64> {
        self.death_at_density(x, u, field / self.def.n_scale)
    }

    /// `μ(x, u, r)` for an already rescaled competition pressure `r`.
    pub fn death_at_density(&self, x: f64, u: f64, r: f64) -> Result<f64> {
        match &self.def.death {
            DeathModel::Logistic { mu0, mu1 } => Ok(mu0.eval(x, u) + mu1.eval(x, u) * r),
            DeathModel::General { terms, .. } => {
                let mut acc = 0.0;
                let mut pow = 1.0;
                for t in terms {
                    acc += t.eval(x, u) * pow;
                    pow *= r;
                }
                if !(acc >= 0.0) {
                    return Err(Error::Numerical(format!(
                        "death rate {acc} at (x={x}, u={u}, r={r}) is negative"
                    )));
                }
                Ok(acc)
            }
        }
    }

    /// Logistic-mode coefficients `(μ0, μ1)` at `(x, u)`.
    #[inline]
    pub(crate) fn logistic_coeffs(&self, x: f64, u: f64) -> Option<(f64, f64)> {
        match &self.def.death {
            DeathModel::Logistic { mu0, mu1 } => Some((mu0.eval(x, u), mu1.eval(x, u))),
            DeathModel::General { .. } => None,
        }
    }

    /// `λ + ∫M dv + μ` for an individual, and the per-event budget
    /// `C_δ (N + 1)` it must fit under.
    pub fn jump_rate_budget(&self, x: f64, u: f64, field: f64, n: usize) -> Result<(f64, f64)> {
        let total = self.birth(x, u) + self.mutation.rate() + self.death_rate(x, u, field)?;
        Ok((total, self.bounds.c_delta * (n as f64 + 1.0)))
    }
}

/// Normalizer `C_δ(x)` of the interaction kernel.
pub fn kernel_normalizer(domain: &Domain, kernel: &InteractionKernel, x: f64) -> Result<f64> {
    kernel.normalizer(domain, x)
}

/// Competition field `(I^δ W ⋆ ν)(x, u)` felt at `(x, u)`.
pub fn interaction_field(pop: &Population, x: f64, u: f64, spec: &ModelSpec) -> f64 {
    spec.field_at(&pop.individuals, x, u)
}

/// Death rate given an unscaled field value.
pub fn death_rate(x: f64, u: f64, field: f64, spec: &ModelSpec) -> Result<f64> {
    spec.death_rate(x, u, field)
}
