//! Exact event-driven simulation by thinning.
//!
//! Candidate event times arrive at the constant majorant rate
//! `C_δ N (N + 1)`. At each candidate an individual `i` is drawn uniformly
//! and a uniform `θ` is compared against consecutive bands whose widths are
//! the true rates divided by `C_δ (N + 1)`. Positions are updated lazily:
//! an individual is only moved when an event needs its position.

mod streams;

pub use streams::SimRng;

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{config_err, Error, Result};
use crate::model::{Individual, ModelSpec, MutationKernel, Population};
use crate::reflect::ReflectConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NaturalDeath,
    CompetitionDeath,
    /// Death in the general engine, where the rate is not split into parts.
    Death,
    ClonalBirth,
    MutantBirth,
    NoOp,
}

impl EventKind {
    pub fn size_change(self) -> i64 {
        match self {
            EventKind::NaturalDeath | EventKind::CompetitionDeath | EventKind::Death => -1,
            EventKind::ClonalBirth | EventKind::MutantBirth => 1,
            EventKind::NoOp => 0,
        }
    }

    pub fn is_death(self) -> bool {
        self.size_change() < 0
    }
}

/// What happened at one candidate event. `actor` and `partner` are indices
/// into the population as it was before the event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventOutcome {
    pub kind: EventKind,
    pub actor: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<usize>,
    #[serde(rename = "trait", skip_serializing_if = "Option::is_none")]
    pub mutant_trait: Option<f64>,
}

impl EventOutcome {
    fn solo(kind: EventKind, actor: usize) -> Self {
        Self {
            kind,
            actor,
            partner: None,
            mutant_trait: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// Reference engine: the full competition field at every candidate.
    General,
    /// Logistic engine with exactly-thinned candidates: proposals that could
    /// only end as no-ops are skipped in one exponential draw.
    Logistic,
    /// Logistic engine stepping through every proposal one at a time.
    LogisticLiteral,
}

/// Waiting time to the next candidate event for `n >= 1` individuals:
/// `τ / (n (n + 1))` with `τ ~ Exp(C_δ)`. Infinite when `C_δ = 0`.
pub fn sample_event_time<R: Rng + ?Sized>(n: usize, c_delta: f64, rng: &mut R) -> f64 {
    debug_assert!(n >= 1);
    if c_delta <= 0.0 {
        return f64::INFINITY;
    }
    let tau: f64 = rng.sample::<f64, _>(Exp1) / c_delta;
    tau / (n as f64 * (n as f64 + 1.0))
}

/// Mutant trait drawn from the conditioned Gaussian around `u`.
pub fn sample_mutant_trait<R: Rng + ?Sized>(u: f64, mk: &MutationKernel, rng: &mut R) -> Result<f64> {
    mk.sample_mutant(u, rng)
}

const BAND_SLACK: f64 = 1e-9;

fn band_overflow(total: f64, budget: f64) -> Error {
    config_err(format!(
        "event bands need {total} but the thinning budget is {budget}: C_delta is too small"
    ))
}

/// Mutant acceptance ratio `M(u, v) / M*(v)` for a candidate trait.
fn mutant_ratio(spec: &ModelSpec, u: f64, v: f64) -> Result<f64> {
    let env = spec.mutation.envelope().value(v);
    let m = spec.mutation.rate_density(u, v);
    if env <= 0.0 {
        return Ok(0.0);
    }
    let ratio = m / env;
    if ratio > 1.0 + 1e-9 {
        return Err(Error::Numerical(format!(
            "mutation envelope violated at u = {u}, v = {v}: M = {m} > M* = {env}"
        )));
    }
    Ok(ratio)
}

/// Applies the general-engine bands for actor `i` at uniform `theta`.
/// All positions must already be synchronized. `draw_mutant` is only called
/// when the mutant band is reachable.
pub fn resolve_general(
    pop: &mut Population,
    spec: &ModelSpec,
    i: usize,
    theta: f64,
    draw_mutant: impl FnOnce() -> f64,
) -> Result<EventOutcome> {
    let n = pop.len();
    let c = spec.bounds.c_delta;
    let me = pop.individuals[i];
    let field = spec.field_at(&pop.individuals, me.x, me.u);
    let mu = spec.death_rate(me.x, me.u, field)?;
    let lambda = spec.birth(me.x, me.u);
    let l1 = spec.mutation.envelope_l1();
    let budget = c * (n as f64 + 1.0);
    if mu + lambda + l1 > budget * (1.0 + BAND_SLACK) {
        return Err(band_overflow(mu + lambda + l1, budget));
    }
    let theta1 = mu / budget;
    let theta2 = theta1 + lambda / budget;
    if theta <= theta1 {
        pop.remove(i);
        return Ok(EventOutcome::solo(EventKind::Death, i));
    }
    if theta <= theta2 {
        pop.push(me.x, me.u);
        return Ok(EventOutcome::solo(EventKind::ClonalBirth, i));
    }
    if l1 > 0.0 && theta <= theta2 + l1 / budget {
        let v = draw_mutant();
        let theta3 = theta2 + mutant_ratio(spec, me.u, v)? * l1 / budget;
        if theta <= theta3 {
            pop.push(me.x, v);
            return Ok(EventOutcome {
                kind: EventKind::MutantBirth,
                actor: i,
                partner: None,
                mutant_trait: Some(v),
            });
        }
    }
    Ok(EventOutcome::solo(EventKind::NoOp, i))
}

/// One candidate event of the reference engine at time `t_event`: every
/// position is synchronized so the full competition field can be evaluated.
pub fn execute_event_general(
    pop: &mut Population,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    t_event: f64,
    rng: &mut SimRng,
) -> Result<EventOutcome> {
    if pop.is_empty() {
        return Err(Error::Numerical("event requested for an empty population".into()));
    }
    rng.sync_all(pop, spec, cfg, t_event)?;
    let n = pop.len();
    let ev = rng.events();
    let i = ev.random_range(0..n);
    let theta: f64 = ev.random();
    resolve_general(pop, spec, i, theta, || spec.mutation.envelope().sample(ev))
}

/// Largest value the competition acceptance threshold can take.
fn competition_cap(spec: &ModelSpec) -> f64 {
    let b = &spec.bounds;
    if b.c_delta <= 0.0 {
        return 0.0;
    }
    (b.mu1_star * b.iw_sup / (spec.n_scale() * b.c_delta)).min(1.0)
}

/// Competition sub-step: `i` dies from competition with `j` when the
/// relative offset `r` of θ inside `j`'s band is below
/// `μ1(i) I^δ(x_i - x_j) W(u_i - u_j) / (K C_δ)`.
fn competition_step(
    pop: &mut Population,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    t: f64,
    i: usize,
    j: usize,
    r: f64,
    rng: &mut SimRng,
) -> Result<EventOutcome> {
    let noop = EventOutcome::solo(EventKind::NoOp, i);
    if r >= competition_cap(spec) {
        return Ok(noop);
    }
    rng.advance(&mut pop.individuals[i], spec, cfg, t)?;
    if j != i {
        rng.advance(&mut pop.individuals[j], spec, cfg, t)?;
    }
    let a = pop.individuals[i];
    let b = pop.individuals[j];
    let (_, mu1) = spec
        .logistic_coeffs(a.x, a.u)
        .ok_or_else(|| config_err("logistic engine needs a logistic death model"))?;
    let threshold = mu1 * spec.pair_weight(a.x, a.u, b.x, b.u) / (spec.n_scale() * spec.bounds.c_delta);
    if threshold > 1.0 + BAND_SLACK {
        return Err(band_overflow(threshold * spec.bounds.c_delta, spec.bounds.c_delta));
    }
    if r < threshold {
        pop.remove(i);
        return Ok(EventOutcome {
            kind: EventKind::CompetitionDeath,
            actor: i,
            partner: Some(j),
            mutant_trait: None,
        });
    }
    Ok(noop)
}

/// Solo sub-steps for actor `i`; `phi` is θ's offset past the competition
/// region expressed in rate units (`φ ∈ [0, C_δ)`).
fn solo_step(
    pop: &mut Population,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    t: f64,
    i: usize,
    phi: f64,
    rng: &mut SimRng,
) -> Result<EventOutcome> {
    if phi > spec.bounds.solo {
        return Ok(EventOutcome::solo(EventKind::NoOp, i));
    }
    rng.advance(&mut pop.individuals[i], spec, cfg, t)?;
    let me = pop.individuals[i];
    let (mu0, _) = spec
        .logistic_coeffs(me.x, me.u)
        .ok_or_else(|| config_err("logistic engine needs a logistic death model"))?;
    let lambda = spec.birth(me.x, me.u);
    let l1 = spec.mutation.envelope_l1();
    let c = spec.bounds.c_delta;
    if mu0 + lambda + l1 > c * (1.0 + BAND_SLACK) {
        return Err(band_overflow(mu0 + lambda + l1, c));
    }
    if phi <= mu0 {
        pop.remove(i);
        return Ok(EventOutcome::solo(EventKind::NaturalDeath, i));
    }
    if phi <= mu0 + lambda {
        pop.push(me.x, me.u);
        return Ok(EventOutcome::solo(EventKind::ClonalBirth, i));
    }
    if l1 > 0.0 && phi <= mu0 + lambda + l1 {
        let v = spec.mutation.envelope().sample(rng.events());
        if phi <= mu0 + lambda + mutant_ratio(spec, me.u, v)? * l1 {
            pop.push(me.x, v);
            return Ok(EventOutcome {
                kind: EventKind::MutantBirth,
                actor: i,
                partner: None,
                mutant_trait: Some(v),
            });
        }
    }
    Ok(EventOutcome::solo(EventKind::NoOp, i))
}

/// One candidate event of the logistic engine, exactly as proposed: at
/// most the actor and its competition partner are moved to `t_event`.
pub fn execute_event_logistic(
    pop: &mut Population,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    t_event: f64,
    rng: &mut SimRng,
) -> Result<EventOutcome> {
    if pop.is_empty() {
        return Err(Error::Numerical("event requested for an empty population".into()));
    }
    let n = pop.len();
    let np1 = n as f64 + 1.0;
    pop.t = t_event;
    let ev = rng.events();
    let i = ev.random_range(0..n);
    let theta: f64 = ev.random();
    let scaled = theta * np1;
    if scaled < n as f64 {
        let j = (scaled.floor() as usize).min(n - 1);
        let r = scaled - j as f64;
        competition_step(pop, spec, cfg, t_event, i, j, r, rng)
    } else {
        let phi = (scaled - n as f64) * spec.bounds.c_delta;
        solo_step(pop, spec, cfg, t_event, i, phi, rng)
    }
}

/// Rate of non-trivial candidates of the logistic engine and the
/// probability that such a candidate falls in the competition region.
fn thinned_rates(spec: &ModelSpec, n: usize) -> (f64, f64) {
    let c = spec.bounds.c_delta;
    if c <= 0.0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let comp = c * nf * nf * competition_cap(spec);
    let solo = nf * spec.bounds.solo.min(c);
    let total = comp + solo;
    (total, if total > 0.0 { comp / total } else { 0.0 })
}

/// Next logistic candidate that is not a certain no-op. Identical in law to
/// stepping [`execute_event_logistic`] through every proposal.
fn thinned_logistic_event(
    pop: &mut Population,
    spec: &ModelSpec,
    cfg: &ReflectConfig,
    t_event: f64,
    comp_share: f64,
    rng: &mut SimRng,
) -> Result<EventOutcome> {
    let n = pop.len();
    pop.t = t_event;
    let ev = rng.events();
    let i = ev.random_range(0..n);
    let pick: f64 = ev.random();
    if pick < comp_share {
        let j = ev.random_range(0..n);
        let r = competition_cap(spec) * ev.random::<f64>();
        competition_step(pop, spec, cfg, t_event, i, j, r, rng)
    } else {
        let phi = spec.bounds.solo.min(spec.bounds.c_delta) * ev.random::<f64>();
        solo_step(pop, spec, cfg, t_event, i, phi, rng)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub reflect: ReflectConfig,
    pub mode: EngineMode,
    /// Abort once this many candidates have been processed.
    pub event_cap: u64,
    pub log_events: bool,
    pub seed: u64,
}

impl RunOptions {
    pub fn new(t_end: f64, snapshot_times: Vec<f64>, reflect: ReflectConfig, mode: EngineMode, seed: u64) -> Self {
        Self {
            t_end,
            snapshot_times,
            reflect,
            mode,
            event_cap: 1_000_000_000,
            log_events: false,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub individuals: Vec<Individual>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    /// Candidates examined (every proposal in the literal engines, only the
    /// non-trivial ones in the thinned logistic engine).
    pub candidates: u64,
    pub births: u64,
    pub mutants: u64,
    pub deaths: u64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub event_log: Option<Vec<(f64, EventOutcome)>>,
    pub seed: u64,
    pub stats: RunStats,
    /// Time of extinction if the population died out before `t_end`.
    pub extinction: Option<f64>,
    pub final_population: Population,
}

/// Simulates from `pop0` until `t_end` or extinction, recording the whole
/// (synchronized) population at each snapshot time.
pub fn run(pop0: Population, spec: &ModelSpec, opts: &RunOptions) -> Result<Trajectory> {
    let mut rng = SimRng::new(opts.seed);
    run_with(pop0, spec, opts, &mut rng)
}

pub fn run_with(mut pop: Population, spec: &ModelSpec, opts: &RunOptions, rng: &mut SimRng) -> Result<Trajectory> {
    pop.validate(spec.domain())?;
    if matches!(opts.mode, EngineMode::Logistic | EngineMode::LogisticLiteral) && !spec.is_logistic() {
        return Err(config_err("logistic engine needs a logistic death model"));
    }
    let t0 = pop.t;
    if !(opts.t_end >= t0) {
        return Err(config_err(format!("t_end {} precedes the start time {t0}", opts.t_end)));
    }
    let times = &opts.snapshot_times;
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(config_err("snapshot times must be strictly increasing"));
    }
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        if first < t0 || last > opts.t_end {
            return Err(config_err(format!(
                "snapshot times must lie in [{t0}, {}]",
                opts.t_end
            )));
        }
    }

    let cfg = &opts.reflect;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut next_snap = 0;
    let mut stats = RunStats::default();
    let mut log = opts.log_events.then(Vec::new);
    let mut extinction = None;

    loop {
        if pop.is_empty() {
            extinction.get_or_insert(pop.t);
            break;
        }
        let n = pop.len();
        let (dt, comp_share) = match opts.mode {
            EngineMode::General | EngineMode::LogisticLiteral => {
                (sample_event_time(n, spec.bounds.c_delta, rng.events()), 0.0)
            }
            EngineMode::Logistic => {
                let (rate, share) = thinned_rates(spec, n);
                let dt = if rate > 0.0 {
                    rng.events().sample::<f64, _>(Exp1) / rate
                } else {
                    f64::INFINITY
                };
                (dt, share)
            }
        };
        let t_next = pop.t + dt;
        while next_snap < times.len() && times[next_snap] < t_next {
            let ts = times[next_snap];
            rng.sync_all(&mut pop, spec, cfg, ts)?;
            snapshots.push(Snapshot {
                t: ts,
                individuals: pop.individuals.clone(),
            });
            next_snap += 1;
        }
        if t_next > opts.t_end {
            break;
        }
        stats.candidates += 1;
        if stats.candidates > opts.event_cap {
            return Err(Error::EventCap(opts.event_cap));
        }
        let out = match opts.mode {
            EngineMode::General => execute_event_general(&mut pop, spec, cfg, t_next, rng)?,
            EngineMode::LogisticLiteral => execute_event_logistic(&mut pop, spec, cfg, t_next, rng)?,
            EngineMode::Logistic => thinned_logistic_event(&mut pop, spec, cfg, t_next, comp_share, rng)?,
        };
        match out.kind {
            EventKind::ClonalBirth => stats.births += 1,
            EventKind::MutantBirth => stats.mutants += 1,
            k if k.is_death() => stats.deaths += 1,
            _ => {}
        }
        if let Some(log) = log.as_mut() {
            if out.kind != EventKind::NoOp {
                log.push((t_next, out));
            }
        }
    }

    // The state is frozen in jumps from here on; positions keep moving.
    while next_snap < times.len() {
        let ts = times[next_snap];
        if !pop.is_empty() {
            rng.sync_all(&mut pop, spec, cfg, ts)?;
        }
        pop.t = pop.t.max(ts);
        snapshots.push(Snapshot {
            t: ts,
            individuals: pop.individuals.clone(),
        });
        next_snap += 1;
    }

    Ok(Trajectory {
        snapshots,
        event_log: log,
        seed: opts.seed,
        stats,
        extinction,
        final_population: pop,
    })
}

#[cfg(test)]
mod tests;

/// Index of an outcome in the per-event law table: `3 i + {0 death,
/// 1 clonal, 2 mutant}` for actor `i`, and `3 N` for a no-op.
pub fn outcome_cell(out: &EventOutcome, n: usize) -> usize {
    match out.kind {
        k if k.is_death() => 3 * out.actor,
        EventKind::ClonalBirth => 3 * out.actor + 1,
        EventKind::MutantBirth => 3 * out.actor + 2,
        _ => 3 * n,
    }
}

/// Empirical per-event outcome frequencies from a frozen state: every trial
/// restarts from `pop` at its own clock, so no position moves.
pub fn event_law(pop: &Population, spec: &ModelSpec, mode: EngineMode, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let n = pop.len();
    let cfg = ReflectConfig::new(spec.domain(), 1e-3)?;
    let mut rng = SimRng::new(seed);
    let mut counts = vec![0u64; 3 * n + 1];
    for ind in &pop.individuals {
        if ind.t_sync != pop.t {
            return Err(config_err("event_law needs a synchronized population"));
        }
    }
    for _ in 0..trials {
        let mut p = pop.clone();
        let out = match mode {
            EngineMode::General => execute_event_general(&mut p, spec, &cfg, pop.t, &mut rng)?,
            EngineMode::LogisticLiteral => execute_event_logistic(&mut p, spec, &cfg, pop.t, &mut rng)?,
            EngineMode::Logistic => {
                return Err(config_err("per-event law is defined for the literal engines only"))
            }
        };
        counts[outcome_cell(&out, n)] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}

/// Exact per-event outcome probabilities for a frozen state.
pub fn exact_event_law(pop: &Population, spec: &ModelSpec) -> Result<Vec<f64>> {
    let n = pop.len();
    let budget = spec.bounds.c_delta * (n as f64 + 1.0) * n as f64;
    let mut p = vec![0.0; 3 * n + 1];
    for (i, ind) in pop.individuals.iter().enumerate() {
        let field = spec.field_at(&pop.individuals, ind.x, ind.u);
        p[3 * i] = spec.death_rate(ind.x, ind.u, field)? / budget;
        p[3 * i + 1] = spec.birth(ind.x, ind.u) / budget;
        p[3 * i + 2] = spec.mutation.rate() / budget;
    }
    p[3 * n] = 1.0 - p.iter().sum::<f64>();
    Ok(p)
}
