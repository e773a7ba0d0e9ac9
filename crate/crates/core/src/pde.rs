//! Finite-volume solvers for the density equations of the large-population
//! limit, nonlocal (range `δ`) and local (`δ → 0`).
//!
//! ```text
//! ∂t g = ∂xx(m g) - ∂x(b g) + (λ - μ(x, u, F[g])) g + ∫ g(x, v) M(v → u) dv
//! ```
//!
//! with zero flux through the walls in `x`. `F[g]` is the interaction field
//! `(I^δ W ⋆ g)` or, in local mode, `ρ_g = ∫ W(u - v) g(x, v) dv`.
//!
//! Cells are centered: `g[i, k]` is the mean density over cell
//! `[x_i ± Δx/2] × [u_k ± Δu/2]`, so the total mass is `Σ g Δx Δu`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::model::{CompetitionKernel, Domain, InteractionKernel, ModelSpec, Population};

/// Density on a tensor grid of `nx × nu` cells, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub nx: usize,
    pub nu: usize,
    pub domain: Domain,
    pub t: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn zeros(domain: Domain, nx: usize, nu: usize) -> Result<Self> {
        if nx < 2 || nu < 2 {
            return Err(config_err(format!("grid needs at least 2×2 cells (got {nx}×{nu})")));
        }
        domain.validate()?;
        Ok(Self {
            nx,
            nu,
            domain,
            t: 0.0,
            values: vec![0.0; nx * nu],
        })
    }

    /// Grid sampled from `f` at cell centers.
    pub fn from_fn(domain: Domain, nx: usize, nu: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = Self::zeros(domain, nx, nu)?;
        for i in 0..nx {
            for k in 0..nu {
                g.values[i * nu + k] = f(g.x_center(i), g.u_center(k));
            }
        }
        g.validate()?;
        Ok(g)
    }

    /// Empirical measure `ν / K` of a population, cell-averaged.
    pub fn from_population(pop: &Population, n_scale: f64, domain: Domain, nx: usize, nu: usize) -> Result<Self> {
        let mut g = Self::zeros(domain, nx, nu)?;
        let w = 1.0 / (n_scale * g.dx() * g.du());
        for ind in &pop.individuals {
            let (i, k) = g.cell_of(ind.x, ind.u);
            g.values[i * nu + k] += w;
        }
        g.t = pop.t;
        Ok(g)
    }

    /// `mass` concentrated in the cell containing `(x, u)`.
    pub fn point_mass(domain: Domain, nx: usize, nu: usize, x: f64, u: f64, mass: f64) -> Result<Self> {
        let mut g = Self::zeros(domain, nx, nu)?;
        domain.check_x(x)?;
        domain.check_u(u)?;
        let (i, k) = g.cell_of(x, u);
        g.values[i * nu + k] = mass / (g.dx() * g.du());
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        self.domain.x_len() / self.nx as f64
    }

    pub fn du(&self) -> f64 {
        self.domain.u_len() / self.nu as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.domain.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn u_center(&self, k: usize) -> f64 {
        self.domain.u_min + (k as f64 + 0.5) * self.du()
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn u_centers(&self) -> Vec<f64> {
        (0..self.nu).map(|k| self.u_center(k)).collect()
    }

    /// Cell containing `(x, u)`; points on the far walls go to the last cell.
    pub fn cell_of(&self, x: f64, u: f64) -> (usize, usize) {
        let i = ((x - self.domain.x_min) / self.dx()).floor().clamp(0.0, (self.nx - 1) as f64);
        let k = ((u - self.domain.u_min) / self.du()).floor().clamp(0.0, (self.nu - 1) as f64);
        (i as usize, k as usize)
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.nu + k]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.du()
    }

    /// `∫ g(x_i, u) du` for every `x` cell.
    pub fn column_masses(&self) -> Vec<f64> {
        let du = self.du();
        self.values.chunks(self.nu).map(|row| row.iter().sum::<f64>() * du).collect()
    }

    /// `∫ g(x, u) dx` for every `u` cell.
    pub fn trait_marginal(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nu)
            .map(|k| (0..self.nx).map(|i| self.at(i, k)).sum::<f64>() * dx)
            .collect()
    }

    /// `‖g - h‖₁` over the domain; the grids must match.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        if self.nx != other.nx || self.nu != other.nu || self.domain != other.domain {
            return Err(config_err(format!(
                "grid mismatch: {}×{} vs {}×{}",
                self.nx, self.nu, other.nx, other.nu
            )));
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(s * self.dx() * self.du())
    }

    /// Block averages over `fx × fu` cells, for comparing grids of
    /// different resolution.
    pub fn coarsen(&self, fx: usize, fu: usize) -> Result<DensityGrid> {
        if fx == 0 || fu == 0 || self.nx % fx != 0 || self.nu % fu != 0 {
            return Err(config_err(format!(
                "cannot coarsen {}×{} by {fx}×{fu}",
                self.nx, self.nu
            )));
        }
        let mut out = DensityGrid::zeros(self.domain, self.nx / fx, self.nu / fu)?;
        out.t = self.t;
        let w = 1.0 / (fx * fu) as f64;
        for i in 0..self.nx {
            for k in 0..self.nu {
                out.values[(i / fx) * out.nu + k / fu] += w * self.at(i, k);
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.nx * self.nu {
            return Err(config_err("density grid has the wrong number of values"));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(config_err(format!("density values must be finite and >= 0 (found {v})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit transport, semi-implicit death.
    Explicit,
    /// Implicit diffusion (one tridiagonal solve per trait column).
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PdeMode {
    /// Interaction through `I^δ`; `delta` overrides the model's range.
    Nonlocal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    /// Fixed step; chosen from the stability bound when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Cap on the automatic step.
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    pub scheme: Scheme,
    pub mode: PdeMode,
}

fn default_dt_max() -> f64 {
    1e-2
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            dt: None,
            dt_max: default_dt_max(),
            scheme: Scheme::Explicit,
            mode: PdeMode::Nonlocal { delta: None },
        }
    }
}

/// `ρ(x, u) = Σ_v W(u - v) g(x, v) Δu`.
pub fn local_interaction(g: &DensityGrid, w: &CompetitionKernel) -> Vec<f64> {
    let wm = TraitConvolution::new(g, w);
    let mut out = vec![0.0; g.values.len()];
    for (row, dst) in g.values.chunks(g.nu).zip(out.chunks_mut(g.nu)) {
        wm.apply(row, dst);
    }
    out
}

/// `(I^δ W ⋆ g)(x, u) = Σ_y Σ_v I^δ(x - y) W(u - v) g(y, v) Δx Δu`, with
/// `I^δ` integrated exactly over each source cell.
pub fn nonlocal_interaction(g: &DensityGrid, kernel: &InteractionKernel, w: &CompetitionKernel) -> Vec<f64> {
    let band = SpatialBand::new(g, kernel);
    band.apply(&local_interaction(g, w), g.nu)
}

/// `W(u_k - u_l) Δu`, or column sums when `W` is constant.
#[derive(Debug, Clone)]
struct TraitConvolution {
    nu: usize,
    constant: Option<f64>,
    weights: Vec<f64>,
}

impl TraitConvolution {
    fn new(g: &DensityGrid, w: &CompetitionKernel) -> Self {
        let du = g.du();
        if w.is_constant() {
            return Self {
                nu: g.nu,
                constant: Some(w.eval(0.0) * du),
                weights: Vec::new(),
            };
        }
        let mut weights = vec![0.0; g.nu * g.nu];
        for k in 0..g.nu {
            for l in 0..g.nu {
                weights[k * g.nu + l] = w.eval(g.u_center(k) - g.u_center(l)) * du;
            }
        }
        Self {
            nu: g.nu,
            constant: None,
            weights,
        }
    }

    fn apply(&self, row: &[f64], dst: &mut [f64]) {
        match self.constant {
            Some(c) => {
                let s = c * row.iter().sum::<f64>();
                dst.fill(s);
            }
            None => {
                for (k, d) in dst.iter_mut().enumerate() {
                    let w = &self.weights[k * self.nu..(k + 1) * self.nu];
                    *d = w.iter().zip(row).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

/// Banded matrix `A[i][j] = C(x_i) ∫_{cell j} k((x_i - y)/δ) dy`.
#[derive(Debug, Clone)]
struct SpatialBand {
    rows: Vec<(usize, Vec<f64>)>,
}

impl SpatialBand {
    fn new(g: &DensityGrid, kernel: &InteractionKernel) -> Self {
        let dx = g.dx();
        let d = &g.domain;
        let reach = match kernel.shape {
            crate::model::KernelShape::Indicator => kernel.delta,
            crate::model::KernelShape::Gaussian => 9.0 * kernel.delta,
        };
        let rows = (0..g.nx)
            .map(|i| {
                let x = g.x_center(i);
                let c = kernel.normalizer_unchecked(d, x);
                let lo = (((x - reach - d.x_min) / dx).floor().max(0.0)) as usize;
                let hi = ((((x + reach - d.x_min) / dx).ceil()) as usize).min(g.nx);
                let w = (lo..hi)
                    .map(|j| {
                        let a = d.x_min + j as f64 * dx;
                        c * kernel.profile_mass(x, a, a + dx)
                    })
                    .collect();
                (lo, w)
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, rho: &[f64], nu: usize) -> Vec<f64> {
        let mut out = vec![0.0; rho.len()];
        for (i, (lo, w)) in self.rows.iter().enumerate() {
            let dst = &mut out[i * nu..(i + 1) * nu];
            for (off, &a) in w.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = &rho[(lo + off) * nu..(lo + off + 1) * nu];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }
}

/// Mutation redistribution: parent cell `l` sends a share `P[l][k]` of its
/// mutant offspring into child cell `k`.
#[derive(Debug, Clone)]
struct MutationBand {
    rate: f64,
    rows: Vec<(usize, Vec<f64>)>,
}

impl MutationBand {
    fn new(g: &DensityGrid, spec: &ModelSpec) -> Self {
        let mk = &spec.mutation;
        let rate = mk.rate();
        if rate == 0.0 {
            return Self { rate, rows: Vec::new() };
        }
        let du = g.du();
        let reach = 12.0 * mk.s();
        let u_min = g.domain.u_min;
        let rows = (0..g.nu)
            .map(|l| {
                let v = g.u_center(l);
                let lo = (((v - reach - u_min) / du).floor().max(0.0)) as usize;
                let hi = ((((v + reach - u_min) / du).ceil()) as usize).min(g.nu);
                let p = (lo..hi)
                    .map(|k| {
                        let a = u_min + k as f64 * du;
                        mk.cell_probability(v, a, a + du)
                    })
                    .collect();
                (lo, p)
            })
            .collect();
        Self { rate, rows }
    }

    /// Gain density `Σ_l g(v_l) rate P[l][k]` (cells share the same `Δu`).
    fn apply(&self, row: &[f64], dst: &mut [f64]) {
        dst.fill(0.0);
        if self.rate == 0.0 {
            return;
        }
        for (l, (lo, p)) in self.rows.iter().enumerate() {
            let src = self.rate * row[l];
            if src == 0.0 {
                continue;
            }
            for (off, &q) in p.iter().enumerate() {
                dst[lo + off] += src * q;
            }
        }
    }
}

/// Precomputed operators for repeated stepping on one grid shape.
#[derive(Debug, Clone)]
pub struct PdeSolver {
    spec: ModelSpec,
    cfg: PdeConfig,
    nx: usize,
    nu: usize,
    dt: f64,
    /// `m` at cell centers.
    m: Vec<f64>,
    /// `b` at the `nx - 1` interior interfaces.
    b: Vec<f64>,
    lambda: Vec<f64>,
    conv: TraitConvolution,
    band: Option<SpatialBand>,
    mutation: MutationBand,
    /// Total mass removed by clipping negative values.
    pub clipped: f64,
}

impl PdeSolver {
    pub fn new(template: &DensityGrid, spec: &ModelSpec, cfg: &PdeConfig) -> Result<Self> {
        let (nx, nu) = (template.nx, template.nu);
        if template.domain != *spec.domain() {
            return Err(config_err("density grid and model use different domains"));
        }
        let dx = template.dx();
        let mut m = vec![0.0; nx * nu];
        let mut lambda = vec![0.0; nx * nu];
        for i in 0..nx {
            for k in 0..nu {
                let (x, u) = (template.x_center(i), template.u_center(k));
                m[i * nu + k] = spec.diffusion(x, u);
                lambda[i * nu + k] = spec.birth(x, u);
            }
        }
        let mut b = vec![0.0; (nx - 1) * nu];
        for i in 0..nx - 1 {
            let x = template.domain.x_min + (i + 1) as f64 * dx;
            for k in 0..nu {
                b[i * nu + k] = spec.drift(x, template.u_center(k));
            }
        }
        let m_max = m.iter().cloned().fold(0.0, f64::max);
        let b_max = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rate = match cfg.scheme {
            Scheme::Explicit => 2.0 * m_max / (dx * dx) + 2.0 * b_max / dx,
            Scheme::Imex => 2.0 * b_max / dx,
        };
        let bound = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
        let dt = match cfg.dt {
            Some(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(config_err(format!("pde dt must be > 0 (got {dt})")))
            }
            Some(dt) if dt > bound => {
                return Err(config_err(format!(
                    "pde dt {dt} exceeds the stability bound {bound:.3e} (dt · (2 m*/Δx² + 2 b*/Δx) ≤ 1)"
                )))
            }
            Some(dt) => dt,
            None => (0.9 * bound).min(cfg.dt_max),
        };
        let band = match cfg.mode {
            PdeMode::Local => None,
            PdeMode::Nonlocal { delta } => {
                let mut kernel = spec.def.interaction;
                if let Some(d) = delta {
                    kernel = InteractionKernel::new(kernel.shape, d, kernel.normalization)?;
                }
                Some(SpatialBand::new(template, &kernel))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            cfg: *cfg,
            nx,
            nu,
            dt,
            m,
            b,
            lambda,
            conv: TraitConvolution::new(template, &spec.def.competition),
            band,
            mutation: MutationBand::new(template, spec),
            clipped: 0.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Interaction field felt at every cell.
    pub fn field(&self, g: &DensityGrid) -> Vec<f64> {
        let mut rho = vec![0.0; g.values.len()];
        for (row, dst) in g.values.chunks(self.nu).zip(rho.chunks_mut(self.nu)) {
            self.conv.apply(row, dst);
        }
        match &self.band {
            Some(band) => band.apply(&rho, self.nu),
            None => rho,
        }
    }

    /// Advances `g` by `dt` (at most the solver's step).
    pub fn step_by(&mut self, g: &mut DensityGrid, dt: f64) -> Result<()> {
        let (nx, nu) = (self.nx, self.nu);
        let dx = g.dx();
        let field = self.field(g);
        let mut mu = vec![0.0; nx * nu];
        for i in 0..nx {
            let x = g.x_center(i);
            for k in 0..nu {
                mu[i * nu + k] = self.spec.death_at_density(x, g.u_center(k), field[i * nu + k])?;
            }
        }

        // explicit part: drift, births, mutation (and diffusion if explicit)
        let mut rhs = vec![0.0; nx * nu];
        let mut gain = vec![0.0; nu];
        let explicit_diffusion = self.cfg.scheme == Scheme::Explicit;
        let inv_dx2 = 1.0 / (dx * dx);
        for i in 0..nx {
            self.mutation.apply(&g.values[i * nu..(i + 1) * nu], &mut gain);
            for k in 0..nu {
                let c = i * nu + k;
                let gc = g.values[c];
                let mut tr = 0.0;
                if explicit_diffusion {
                    let q = self.m[c] * gc;
                    if i > 0 {
                        tr += (self.m[c - nu] * g.values[c - nu] - q) * inv_dx2;
                    }
                    if i + 1 < nx {
                        tr += (self.m[c + nu] * g.values[c + nu] - q) * inv_dx2;
                    }
                }
                // upwind flux of b g through the interfaces
                if i + 1 < nx {
                    let bf = self.b[i * nu + k];
                    let flux = if bf > 0.0 { bf * gc } else { bf * g.values[c + nu] };
                    tr -= flux / dx;
                }
                if i > 0 {
                    let bf = self.b[(i - 1) * nu + k];
                    let flux = if bf > 0.0 { bf * g.values[c - nu] } else { bf * gc };
                    tr += flux / dx;
                }
                rhs[c] = gc + dt * (tr + self.lambda[c] * gc + gain[k]);
            }
        }

        if explicit_diffusion {
            for c in 0..nx * nu {
                g.values[c] = rhs[c] / (1.0 + dt * mu[c]);
            }
        } else {
            self.implicit_diffusion(g, &rhs, &mu, dt, inv_dx2);
        }

        let mut neg = 0.0;
        for v in g.values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "density blew up at t = {}: check dt · (2 m*/Δx² + 2 b*/Δx) ≤ 1 (dt = {dt})",
                    g.t
                )));
            }
            if *v < 0.0 {
                neg -= *v;
                *v = 0.0;
            }
        }
        let clip = neg * dx * g.du();
        if clip > 0.0 {
            self.clipped += clip;
            let mass = g.mass();
            if clip > 1e-12 * mass.max(f64::MIN_POSITIVE) {
                log::warn!("clipped negative mass {clip:.3e} (total {mass:.3e}) at t = {}", g.t);
            }
        }
        g.t += dt;
        Ok(())
    }

    /// `(1 + dt μ - dt D) g' = rhs` per trait column, `D g = ∂xx(m g)`.
    fn implicit_diffusion(&self, g: &mut DensityGrid, rhs: &[f64], mu: &[f64], dt: f64, inv_dx2: f64) {
        let (nx, nu) = (self.nx, self.nu);
        let mut lower = vec![0.0; nx];
        let mut diag = vec![0.0; nx];
        let mut upper = vec![0.0; nx];
        let mut r = vec![0.0; nx];
        for k in 0..nu {
            for i in 0..nx {
                let c = i * nu + k;
                let links = (i > 0) as u8 as f64 + (i + 1 < nx) as u8 as f64;
                diag[i] = 1.0 + dt * mu[c] + dt * links * self.m[c] * inv_dx2;
                lower[i] = if i > 0 { -dt * self.m[c - nu] * inv_dx2 } else { 0.0 };
                upper[i] = if i + 1 < nx { -dt * self.m[c + nu] * inv_dx2 } else { 0.0 };
                r[i] = rhs[c];
            }
            thomas(&lower, &mut diag, &upper, &mut r);
            for i in 0..nx {
                g.values[i * nu + k] = r[i];
            }
        }
    }

    pub fn step(&mut self, g: &mut DensityGrid) -> Result<()> {
        let dt = self.dt;
        self.step_by(g, dt)
    }
}

/// In-place tridiagonal solve; the solution ends up in `r`.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], r: &mut [f64]) {
    let n = r.len();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        r[i] -= w * r[i - 1];
    }
    r[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        r[i] = (r[i] - upper[i] * r[i + 1]) / diag[i];
    }
}

/// One step of the solver from `g`.
pub fn step(g: &DensityGrid, spec: &ModelSpec, cfg: &PdeConfig) -> Result<DensityGrid> {
    let mut solver = PdeSolver::new(g, spec, cfg)?;
    let mut out = g.clone();
    solver.step(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub snapshots: Vec<DensityGrid>,
    /// `(t, mass)` after every step, starting with the initial state.
    pub mass_trace: Vec<(f64, f64)>,
    pub dt: f64,
    pub clipped: f64,
}

/// Integrates to `t_end`, landing exactly on each snapshot time.
pub fn solve(
    g0: &DensityGrid,
    spec: &ModelSpec,
    cfg: &PdeConfig,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<PdeSolution> {
    g0.validate()?;
    if snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(config_err("snapshot times must be strictly increasing"));
    }
    if snapshot_times.iter().any(|&t| t < g0.t || t > t_end) {
        return Err(config_err(format!("snapshot times must lie in [{}, {t_end}]", g0.t)));
    }
    let mut solver = PdeSolver::new(g0, spec, cfg)?;
    let dt = solver.dt();
    let mut g = g0.clone();
    let mut snaps = Vec::with_capacity(snapshot_times.len());
    let mut trace = vec![(g.t, g.mass())];
    let mut targets = snapshot_times.iter().copied().peekable();
    let eps = 1e-12 * (1.0 + t_end.abs());
    loop {
        while let Some(&ts) = targets.peek() {
            if (ts - g.t).abs() <= eps {
                let mut s = g.clone();
                s.t = ts;
                snaps.push(s);
                targets.next();
            } else {
                break;
            }
        }
        if g.t >= t_end - eps {
            break;
        }
        let next_stop = targets.peek().copied().unwrap_or(t_end).min(t_end);
        let h = dt.min(next_stop - g.t);
        solver.step_by(&mut g, h)?;
        if (g.t - next_stop).abs() <= eps {
            g.t = next_stop;
        }
        trace.push((g.t, g.mass()));
    }
    Ok(PdeSolution {
        snapshots: snaps,
        mass_trace: trace,
        dt,
        clipped: solver.clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeathModel, KernelShape, ModelDef, MutationDef, Normalization, RateFn};

    fn def(lambda: f64, mu0: f64, mu1: f64) -> ModelDef {
        ModelDef {
            domain: Domain::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            birth: RateFn::constant(lambda),
            death: DeathModel::Logistic {
                mu0: RateFn::constant(mu0),
                mu1: RateFn::constant(mu1),
            },
            diffusion: RateFn::constant(0.01),
            drift: RateFn::zero(),
            mutation: MutationDef { rate: 0.0, s: 0.01 },
            interaction: InteractionKernel::new(KernelShape::Indicator, 0.1, Normalization::BoundaryAware).unwrap(),
            competition: CompetitionKernel::Const { value: 1.0 },
            n_scale: 1.0,
            c_delta: None,
        }
    }

    fn unit_box() -> Domain {
        Domain::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn local_interaction_examples() {
        let g = DensityGrid::zeros(unit_box(), 11, 21).unwrap();
        assert!(local_interaction(&g, &CompetitionKernel::Const { value: 1.0 })
            .iter()
            .all(|&v| v == 0.0));

        let mut g = DensityGrid::zeros(unit_box(), 11, 20).unwrap();
        for k in 0..20 {
            g.values[3 * 20 + k] = 1.0;
        }
        let rho = local_interaction(&g, &CompetitionKernel::Const { value: 1.0 });
        for k in 0..20 {
            assert!((rho[3 * 20 + k] - 1.0).abs() < 1e-14);
            assert_eq!(rho[4 * 20 + k], 0.0);
        }

        let w = CompetitionKernel::Gaussian {
            amplitude: 1.0,
            scale: 0.02,
        };
        let mut g = DensityGrid::zeros(unit_box(), 5, 50).unwrap();
        let v0 = g.u_center(17);
        g.values[2 * 50 + 17] = 1.0 / g.du();
        let rho = local_interaction(&g, &w);
        for k in 0..50 {
            let want = (-(g.u_center(k) - v0).powi(2) / 0.02).exp();
            assert!((rho[2 * 50 + k] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn nonlocal_interaction_examples() {
        let w = CompetitionKernel::Gaussian {
            amplitude: 1.0,
            scale: 0.02,
        };
        let g = DensityGrid::from_fn(unit_box(), 41, 30, |x, u| 1.0 + x * u + (3.0 * u).sin().powi(2)).unwrap();
        let narrow = InteractionKernel::new(KernelShape::Indicator, 0.4 / 41.0, Normalization::BoundaryAware).unwrap();
        let a = nonlocal_interaction(&g, &narrow, &w);
        let b = local_interaction(&g, &w);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }

        let uniform = DensityGrid::from_fn(unit_box(), 41, 30, |_, _| 2.0).unwrap();
        for shape in [KernelShape::Indicator, KernelShape::Gaussian] {
            let k = InteractionKernel::new(shape, 0.15, Normalization::BoundaryAware).unwrap();
            let f = nonlocal_interaction(&uniform, &k, &w);
            for i in 0..41 {
                for kk in 0..30 {
                    assert!((f[i * 30 + kk] - f[20 * 30 + kk]).abs() < 1e-8);
                }
            }
        }

        // separable density: the double sum factorizes
        let a_x = |x: f64| 1.0 + (4.0 * x).cos().powi(2);
        let c_u = |u: f64| u * (1.0 - u) + 0.1;
        let g = DensityGrid::from_fn(unit_box(), 41, 30, |x, u| a_x(x) * c_u(u)).unwrap();
        let k = InteractionKernel::new(KernelShape::Gaussian, 0.1, Normalization::Constant).unwrap();
        let f = nonlocal_interaction(&g, &k, &w);
        let col = DensityGrid::from_fn(unit_box(), 41, 30, |x, _| a_x(x)).unwrap();
        let row = DensityGrid::from_fn(unit_box(), 41, 30, |_, u| c_u(u)).unwrap();
        let ia = nonlocal_interaction(&col, &k, &CompetitionKernel::Const { value: 1.0 });
        let wc = local_interaction(&row, &w);
        for i in 0..41 {
            for kk in 0..30 {
                // ia carries ∫du = 1 from the constant kernel
                let want = ia[i * 30 + kk] * wc[i * 30 + kk];
                assert!((f[i * 30 + kk] - want).abs() < 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let spec = ModelSpec::new(def(1.0, 1.0, 0.0)).unwrap();
        let g = DensityGrid::from_fn(unit_box(), 21, 11, |_, _| 3.0).unwrap();
        let out = step(&g, &spec, &PdeConfig::default()).unwrap();
        for (a, b) in g.values.iter().zip(&out.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_conserves_mass() {
        let mut d = def(0.0, 0.0, 0.0);
        d.drift = RateFn::AffineTrait { c0: 0.3, c1: -0.6 };
        d.diffusion = RateFn::Gaussian {
            amplitude: 0.02,
            center: 0.4,
            var_const: 0.1,
            var_per_trait: 0.0,
        };
        let spec = ModelSpec::new(d).unwrap();
        for scheme in [Scheme::Explicit, Scheme::Imex] {
            let cfg = PdeConfig {
                scheme,
                ..PdeConfig::default()
            };
            let mut g = DensityGrid::from_fn(unit_box(), 31, 7, |x, u| (-(x - 0.2 - u * 0.5).powi(2) * 40.0).exp())
                .unwrap();
            let mut solver = PdeSolver::new(&g, &spec, &cfg).unwrap();
            let m0 = g.mass();
            for _ in 0..50 {
                let before = g.mass();
                solver.step(&mut g).unwrap();
                assert!((g.mass() - before).abs() < 1e-12 * m0);
            }
            assert_eq!(solver.clipped, 0.0);
        }
    }

    #[test]
    fn exponential_growth() {
        let spec = ModelSpec::new(def(1.5, 1.0, 0.0)).unwrap();
        let g0 = DensityGrid::from_fn(unit_box(), 11, 5, |x, _| 1.0 + x).unwrap();
        let m0 = g0.mass();
        let want = m0 * 0.5f64.exp();
        let cfg = PdeConfig {
            dt: Some(1e-4),
            ..PdeConfig::default()
        };
        let sol = solve(&g0, &spec, &cfg, 1.0, &[1.0]).unwrap();
        let got = sol.snapshots[0].mass();
        assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn logistic_column_mass() {
        let mut d = def(2.0, 1.0, 1.0);
        d.interaction = InteractionKernel::new(KernelShape::Indicator, 1.0, Normalization::BoundaryAware).unwrap();
        let spec = ModelSpec::new(d).unwrap();
        let g0 = DensityGrid::from_fn(unit_box(), 9, 9, |_, _| 0.1).unwrap();
        let sol = solve(&g0, &spec, &PdeConfig::default(), 20.0, &[1.0, 20.0]).unwrap();
        // n' = n (1 - n), n(0) = 0.1
        let n1 = 0.1 * 1f64.exp() / (1.0 - 0.1 + 0.1 * 1f64.exp());
        for c in sol.snapshots[0].column_masses() {
            assert!((c - n1).abs() < 5e-3, "{c} vs {n1}");
        }
        for c in sol.snapshots[1].column_masses() {
            assert!((c - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_stays_zero_and_mass_is_bounded() {
        let mut d = def(2.0, 1.0, 1.0);
        d.mutation = MutationDef { rate: 0.1, s: 0.05 };
        let spec = ModelSpec::new(d).unwrap();
        let zero = DensityGrid::zeros(unit_box(), 21, 21).unwrap();
        let sol = solve(&zero, &spec, &PdeConfig::default(), 1.0, &[1.0]).unwrap();
        assert!(sol.snapshots[0].values.iter().all(|&v| v == 0.0));

        let g0 = DensityGrid::point_mass(unit_box(), 21, 21, 0.5, 0.5, 0.01).unwrap();
        let sol = solve(&g0, &spec, &PdeConfig::default(), 2.0, &[]).unwrap();
        let c = spec.bounds.lambda_star + spec.bounds.mutation_l1;
        for &(t, m) in &sol.mass_trace {
            assert!(m <= 0.01 * (c * t).exp() * (1.0 + 1e-3));
        }
    }

    #[test]
    fn mutation_gain_adds_rate_times_mass() {
        let mut d = def(0.0, 0.0, 0.0);
        d.diffusion = RateFn::zero();
        d.mutation = MutationDef { rate: 0.1, s: 0.03 };
        let spec = ModelSpec::new(d).unwrap();
        let g0 = DensityGrid::from_fn(unit_box(), 5, 50, |_, u| (-(u - 0.1) * (u - 0.1) * 50.0).exp()).unwrap();
        let dt = 1e-3;
        let cfg = PdeConfig {
            dt: Some(dt),
            ..PdeConfig::default()
        };
        let g1 = step(&g0, &spec, &cfg).unwrap();
        assert!((g1.mass() - g0.mass() * (1.0 + 0.1 * dt)).abs() < 1e-12);
    }

    #[test]
    fn explicit_dt_beyond_bound_is_rejected() {
        let spec = ModelSpec::new(def(1.0, 1.0, 0.0)).unwrap();
        let g = DensityGrid::zeros(unit_box(), 101, 5).unwrap();
        let cfg = PdeConfig {
            dt: Some(0.1),
            ..PdeConfig::default()
        };
        assert_eq!(PdeSolver::new(&g, &spec, &cfg).unwrap_err().exit_code(), 2);
        let imex = PdeConfig {
            scheme: Scheme::Imex,
            ..cfg
        };
        assert!(PdeSolver::new(&g, &spec, &imex).is_ok());
    }
}
