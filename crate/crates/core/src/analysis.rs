//! Histograms, cluster detection, distances and the generator diagnostic.

use serde::{Deserialize, Serialize};

use crate::engine::{run_with, EngineMode, RunOptions, SimRng};
use crate::error::{config_err, Result};
use crate::math::{normal_cdf, normal_pdf};
use crate::model::{Domain, Individual, ModelSpec, Population};
use crate::pde::DensityGrid;
use crate::reflect::ReflectConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistNorm {
    Counts,
    /// Counts divided by `N_scale Δx Δu`.
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub edges_x: Vec<f64>,
    pub edges_u: Vec<f64>,
    /// Row-major in `x`: `counts[i * nu + k]`.
    pub counts: Vec<f64>,
    pub normalization: HistNorm,
}

fn edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Equal-width bin of `v` in `[lo, hi]` with `n` bins.
fn bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    (((v - lo) / (hi - lo) * n as f64).floor().max(0.0) as usize).min(n - 1)
}

impl Histogram2D {
    pub fn nx(&self) -> usize {
        self.edges_x.len() - 1
    }

    pub fn nu(&self) -> usize {
        self.edges_u.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Density version comparable with a [`DensityGrid`].
    pub fn to_density(&self, n_scale: f64) -> Histogram2D {
        if self.normalization == HistNorm::Density {
            return self.clone();
        }
        let dx = self.edges_x[1] - self.edges_x[0];
        let du = self.edges_u[1] - self.edges_u[0];
        let w = 1.0 / (n_scale * dx * du);
        Histogram2D {
            counts: self.counts.iter().map(|c| c * w).collect(),
            normalization: HistNorm::Density,
            ..self.clone()
        }
    }

    pub fn to_grid(&self, n_scale: f64, t: f64) -> Result<DensityGrid> {
        let d = self.to_density(n_scale);
        let domain = Domain::new(
            self.edges_x[0],
            *self.edges_x.last().unwrap(),
            self.edges_u[0],
            *self.edges_u.last().unwrap(),
        )?;
        let mut g = DensityGrid::zeros(domain, self.nx(), self.nu())?;
        g.values = d.counts;
        g.t = t;
        Ok(g)
    }

    /// Sums over the other axis.
    pub fn marginal(&self, axis: Axis) -> Vec<f64> {
        let (nx, nu) = (self.nx(), self.nu());
        match axis {
            Axis::X => self.counts.chunks(nu).map(|r| r.iter().sum()).collect(),
            Axis::U => (0..nu).map(|k| (0..nx).map(|i| self.counts[i * nu + k]).sum()).collect(),
        }
    }

    pub fn centers(&self, axis: Axis) -> Vec<f64> {
        let e = match axis {
            Axis::X => &self.edges_x,
            Axis::U => &self.edges_u,
        };
        e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Counts on `nx × nu` equal bins over the domain. Positions are taken as
/// stored, so synchronize first.
pub fn histogram(individuals: &[Individual], domain: &Domain, nx: usize, nu: usize) -> Result<Histogram2D> {
    if nx == 0 || nu == 0 {
        return Err(config_err("histogram needs at least one bin per axis"));
    }
    let mut counts = vec![0.0; nx * nu];
    for ind in individuals {
        let i = bin(ind.x, domain.x_min, domain.x_max, nx);
        let k = bin(ind.u, domain.u_min, domain.u_max, nu);
        counts[i * nu + k] += 1.0;
    }
    Ok(Histogram2D {
        edges_x: edges(domain.x_min, domain.x_max, nx),
        edges_u: edges(domain.u_min, domain.u_max, nu),
        counts,
        normalization: HistNorm::Counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    U,
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Topographic prominence of every local maximum of `v`, as
/// `(index, prominence)`. Plateaus report their middle index.
pub fn prominences(v: &[f64]) -> Vec<(usize, f64)> {
    let n = v.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        let left_lower = i == 0 || v[i - 1] < v[i];
        let right_lower = j + 1 == n || v[j + 1] < v[i];
        if left_lower && right_lower && v[i] > 0.0 {
            let h = v[i];
            let mut left_min = h;
            let mut k = i;
            let mut bounded_left = false;
            while k > 0 {
                k -= 1;
                if v[k] > h {
                    bounded_left = true;
                    break;
                }
                left_min = left_min.min(v[k]);
            }
            let mut right_min = h;
            let mut k = j;
            let mut bounded_right = false;
            while k + 1 < n {
                k += 1;
                if v[k] > h {
                    bounded_right = true;
                    break;
                }
                right_min = right_min.min(v[k]);
            }
            // the highest peak counts at its full height
            let base = if bounded_left || bounded_right { left_min.max(right_min) } else { 0.0 };
            out.push(((i + j) / 2, h - base));
        }
        i = j + 1;
    }
    out
}

/// Positions of the clusters along `axis`: local maxima of the smoothed
/// marginal whose prominence is at least `min_prominence` times the global
/// maximum of the smoothed marginal.
pub fn cluster_peaks(h: &Histogram2D, axis: Axis, smoothing_window: usize, min_prominence: f64) -> Vec<f64> {
    let m = moving_average(&h.marginal(axis), smoothing_window.max(1));
    let top = m.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let centers = h.centers(axis);
    let mut peaks: Vec<f64> = prominences(&m)
        .into_iter()
        .filter(|&(_, p)| p >= min_prominence * top)
        .map(|(i, _)| centers[i])
        .collect();
    peaks.sort_by(|a, b| a.total_cmp(b));
    peaks
}

/// `Σ |a - b| Δx Δu` on matching grids.
pub fn l1_distance(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    a.l1_distance(b)
}

/// Test functions for the generator diagnostic. Spatial ones are expressed
/// in the domain's own coordinates; `CosPi` is `cos(π (x - x_min) / L)`,
/// which has zero normal derivative at both walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    X,
    U,
    X2,
    CosPi,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [Self::One, Self::X, Self::U, Self::X2, Self::CosPi];

    /// `(f, ∂x f, ∂xx f)` at `(x, u)`.
    pub fn eval(self, d: &Domain, x: f64, u: f64) -> (f64, f64, f64) {
        match self {
            Self::One => (1.0, 0.0, 0.0),
            Self::X => (x, 1.0, 0.0),
            Self::U => (u, 0.0, 0.0),
            Self::X2 => (x * x, 2.0 * x, 2.0),
            Self::CosPi => {
                let k = std::f64::consts::PI / d.x_len();
                let z = k * (x - d.x_min);
                (z.cos(), -k * z.sin(), -k * k * z.cos())
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::One => "1",
            Self::X => "x",
            Self::U => "u",
            Self::X2 => "x^2",
            Self::CosPi => "cos(pi x)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub function: &'static str,
    pub empirical_drift: f64,
    pub predicted_drift: f64,
    pub drift_z: f64,
    pub empirical_qv_rate: f64,
    pub predicted_qv_rate: f64,
    pub qv_z: f64,
    /// Set when `dt` is long enough for repeated jumps of one individual
    /// to bias the one-step estimates.
    pub dt_flag: bool,
}

impl GeneratorReport {
    pub fn passes(&self, z_max: f64) -> bool {
        self.drift_z.abs() < z_max && self.qv_z.abs() < z_max
    }
}

/// `(∫ f(x, v) k(u, v) dv, ∫ f(x, v)² k(u, v) dv)` for the conditioned
/// Gaussian mutation law.
fn mutant_moments(tf: TestFunction, spec: &ModelSpec, x: f64, u: f64) -> (f64, f64) {
    let d = spec.domain();
    match tf {
        TestFunction::U => {
            let s = spec.mutation.s();
            let a = (d.u_min - u) / s;
            let b = (d.u_max - u) / s;
            let z = normal_cdf(b) - normal_cdf(a);
            let (pa, pb) = (normal_pdf(a), normal_pdf(b));
            let mean_z = (pa - pb) / z;
            let second_z = 1.0 + (a * pa - b * pb) / z;
            let mean = u + s * mean_z;
            (mean, u * u + 2.0 * u * s * mean_z + s * s * second_z)
        }
        _ => {
            let (f, _, _) = tf.eval(d, x, u);
            (f, f * f)
        }
    }
}

/// Predicted drift and quadratic-variation rate of `⟨ν, f⟩ / K` at a
/// frozen state.
pub fn generator_prediction(pop: &Population, spec: &ModelSpec, tf: TestFunction) -> Result<(f64, f64)> {
    let d = spec.domain();
    let k = spec.n_scale();
    let rate = spec.mutation.rate();
    let (mut drift, mut qv) = (0.0, 0.0);
    for ind in &pop.individuals {
        let (x, u) = (ind.x, ind.u);
        let (f, fx, fxx) = tf.eval(d, x, u);
        let m = spec.diffusion(x, u);
        let b = spec.drift(x, u);
        let lambda = spec.birth(x, u);
        let mu = spec.death_rate(x, u, spec.field_at(&pop.individuals, x, u))?;
        let (mf, mf2) = mutant_moments(tf, spec, x, u);
        drift += m * fxx + b * fx + (lambda - mu) * f + rate * mf;
        qv += 2.0 * m * fx * fx + (lambda + mu) * f * f + rate * mf2;
    }
    Ok((drift / k, qv / (k * k)))
}

/// Generator diagnostic for several test functions, sharing replicates.
pub fn generator_check_many(
    state: &Population,
    spec: &ModelSpec,
    fs: &[TestFunction],
    dt: f64,
    replicates: usize,
    reflect: &ReflectConfig,
    seed: u64,
) -> Result<Vec<GeneratorReport>> {
    if !(dt > 0.0) || replicates < 2 {
        return Err(config_err("generator check needs dt > 0 and at least 2 replicates"));
    }
    let mut state = state.clone();
    for ind in state.individuals.iter_mut() {
        ind.t_sync = state.t;
    }
    let d = *spec.domain();
    let k = spec.n_scale();
    let base: Vec<f64> = fs
        .iter()
        .map(|&tf| state.integrate(|x, u| tf.eval(&d, x, u).0) / k)
        .collect();
    let mode = if spec.is_logistic() {
        EngineMode::Logistic
    } else {
        EngineMode::General
    };
    let t1 = state.t + dt;
    let mut incr = vec![Vec::with_capacity(replicates); fs.len()];
    for r in 0..replicates {
        let opts = RunOptions::new(t1, vec![t1], *reflect, mode, seed);
        let mut rng = SimRng::new(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17));
        let tr = run_with(state.clone(), spec, &opts, &mut rng)?;
        let snap = &tr.snapshots[0];
        for (j, &tf) in fs.iter().enumerate() {
            let v: f64 = snap.individuals.iter().map(|i| tf.eval(&d, i.x, i.u).0).sum::<f64>() / k;
            incr[j].push(v - base[j]);
        }
    }
    let per_event = spec.bounds.lambda_star + spec.bounds.mu0_star + spec.mutation.rate();
    let dt_flag = dt * per_event > 0.1;
    let n = replicates as f64;
    fs.iter()
        .zip(incr)
        .map(|(&tf, xs)| {
            let (pred_drift, pred_qv) = generator_prediction(&state, spec, tf)?;
            let mean = xs.iter().sum::<f64>() / n;
            let c2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let c4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            let emp_drift = mean / dt;
            let emp_qv = c2 / dt;
            let drift_se = (c2 / n).sqrt() / dt;
            let qv_se = ((c4 - c2 * c2).max(0.0) / n).sqrt() / dt;
            let z = |diff: f64, se: f64| {
                if se > 0.0 {
                    diff / se
                } else if diff.abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            };
            Ok(GeneratorReport {
                function: tf.name(),
                empirical_drift: emp_drift,
                predicted_drift: pred_drift,
                drift_z: z(emp_drift - pred_drift, drift_se),
                empirical_qv_rate: emp_qv,
                predicted_qv_rate: pred_qv,
                qv_z: z(emp_qv - pred_qv, qv_se),
                dt_flag,
            })
        })
        .collect()
}

/// Generator diagnostic for one test function: `replicates` independent
/// runs of length `dt` from the frozen `state`, compared with the
/// generator's drift and quadratic-variation integrands.
pub fn generator_check(
    state: &Population,
    spec: &ModelSpec,
    f: TestFunction,
    dt: f64,
    replicates: usize,
    reflect: &ReflectConfig,
    seed: u64,
) -> Result<GeneratorReport> {
    Ok(generator_check_many(state, spec, &[f], dt, replicates, reflect, seed)?[0])
}
