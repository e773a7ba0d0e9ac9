//! Invariant and diagnostic suite behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{generator_check_many, TestFunction};
use crate::config::RunConfig;
use crate::engine::{event_law, exact_event_law, EngineMode};
use crate::error::Result;
use crate::math::familywise_z;
use crate::model::{ModelDef, ModelSpec, Population};
use crate::pde::solve;
use crate::reflect::{euler_substep, ReflectConfig};

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: impl Into<String>, value: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub states: usize,
    pub replicates: usize,
    pub law_trials: usize,
    pub substeps: usize,
    pub seed: u64,
}

impl CheckOptions {
    pub fn full() -> Self {
        Self {
            states: 10,
            replicates: 3000,
            law_trials: 100_000,
            substeps: 1_000_000,
            seed: 1,
        }
    }

    pub fn quick() -> Self {
        Self {
            states: 2,
            replicates: 1000,
            law_trials: 20_000,
            substeps: 100_000,
            seed: 1,
        }
    }
}

/// `n` individuals with positions in the middle 60% of the domain and
/// traits uniform on the trait box, all synchronized at time 0.
pub fn frozen_state(spec: &ModelSpec, n: usize, seed: u64) -> Population {
    let d = spec.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (d.x_min + 0.2 * d.x_len(), d.x_max - 0.2 * d.x_len());
    Population::from_points(
        (0..n).map(|_| (rng.random_range(lo..hi), rng.random_range(d.u_min..=d.u_max))),
        0.0,
    )
}

/// Largest `|z|` between the general and literal logistic per-event laws,
/// using binomial standard errors of the exact probabilities, and the
/// number of outcome cells compared.
pub fn law_equivalence_z(spec: &ModelSpec, pop: &Population, trials: usize, seed: u64) -> Result<(f64, usize)> {
    let exact = exact_event_law(pop, spec)?;
    let gen = event_law(pop, spec, EngineMode::General, trials, seed)?;
    let log = event_law(pop, spec, EngineMode::LogisticLiteral, trials, seed.wrapping_add(1))?;
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for k in 0..exact.len() {
        let sd = (exact[k] * (1.0 - exact[k]) / trials as f64).sqrt();
        if sd == 0.0 {
            continue;
        }
        cells += 1;
        worst = worst.max((gen[k] - log[k]).abs() / (sd * 2f64.sqrt()));
    }
    Ok((worst, cells))
}

/// Reflected-diffusion confinement: `substeps` scheme steps from random
/// starts (including the walls) must all land in the closed domain.
pub fn confinement(spec: &ModelSpec, cfg: &ReflectConfig, substeps: usize, seed: u64) -> Result<usize> {
    let d = spec.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outside = 0;
    let mut x = d.x_min;
    for k in 0..substeps {
        if k % 1000 == 0 {
            x = match (k / 1000) % 3 {
                0 => d.x_min,
                1 => d.x_max,
                _ => rng.random_range(d.x_min..=d.x_max),
            };
        }
        let u = rng.random_range(d.u_min..=d.u_max);
        x = euler_substep(x, u, spec, cfg, cfg.h, &mut rng)?;
        if !(d.x_min..=d.x_max).contains(&x) {
            outside += 1;
        }
    }
    Ok(outside)
}

/// The check suite for one configuration.
pub fn run_checks(cfg: &RunConfig, opts: &CheckOptions) -> Result<Vec<CheckRow>> {
    let spec = cfg.spec()?;
    let reflect = cfg.reflect()?;
    let mut rows = Vec::new();

    let outside = confinement(&spec, &reflect, opts.substeps, opts.seed)?;
    rows.push(CheckRow::new("confinement: substeps outside domain", outside as f64, 0.0, outside == 0));

    if spec.is_logistic() {
        let stressed = ModelSpec::new(ModelDef {
            n_scale: 1.0,
            ..spec.def.clone()
        })?;
        for (label, s) in [("scenario K", &spec), ("K = 1", &stressed)] {
            let pop = frozen_state(s, 5, opts.seed);
            let (z, cells) = law_equivalence_z(s, &pop, opts.law_trials, opts.seed)?;
            let thr = familywise_z(3.0, cells);
            rows.push(CheckRow::new(format!("law equivalence ({label}): max |z|"), z, thr, z < thr));
        }
    }

    let n = (cfg.n_scale.round() as usize).clamp(5, 3000);
    let dt = 0.002;
    let fs = [TestFunction::One, TestFunction::X, TestFunction::CosPi];
    let mut worst: [f64; 2] = [0.0, 0.0];
    let gen_reflect = ReflectConfig::new(spec.domain(), dt / 2.0)?;
    for st in 0..opts.states {
        let pop = frozen_state(&spec, n, opts.seed.wrapping_add(100 + st as u64));
        let reps = generator_check_many(&pop, &spec, &fs, dt, opts.replicates, &gen_reflect, opts.seed + st as u64)?;
        for r in reps {
            worst[0] = worst[0].max(r.drift_z.abs());
            worst[1] = worst[1].max(r.qv_z.abs());
        }
    }
    rows.push(CheckRow::new("generator drift: max |z|", worst[0], 4.0, worst[0] < 4.0));
    rows.push(CheckRow::new("generator quadratic variation: max |z|", worst[1], 4.0, worst[1] < 4.0));

    let mut small = cfg.clone();
    small.pde.nx = small.pde.nx.min(51);
    small.pde.nu = small.pde.nu.min(51);
    let g0 = small.initial_density()?;
    let t = 1.0;
    let sol = solve(&g0, &spec, &small.pde_config(), t, &[t])?;
    let c = spec.bounds.lambda_star + spec.bounds.mutation_l1;
    let m0 = g0.mass();
    let ratio = sol
        .mass_trace
        .iter()
        .map(|&(t, m)| m / (m0 * (c * t).exp()))
        .fold(0.0, f64::max);
    rows.push(CheckRow::new("pde mass / Gronwall bound", ratio, 1.0 + 1e-3, ratio <= 1.0 + 1e-3));
    Ok(rows)
}
