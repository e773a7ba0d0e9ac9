//! Run configuration: TOML files, scenario presets and initial conditions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EngineMode;
use crate::error::{config_err, Error, Result};
use crate::model::{
    CompetitionKernel, DeathModel, Domain, InteractionKernel, KernelShape, ModelDef, ModelSpec, MutationDef,
    Normalization, Population, RateFn,
};
use crate::pde::{DensityGrid, PdeConfig, PdeMode, Scheme};
use crate::reflect::ReflectConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Clustering along the diagonal `x = u` on the unit square.
    Example1,
    /// Gaussian growth window of width `ρ`, trait-neutral.
    Example2Neutral,
    /// Growth window whose width depends on the trait.
    Example2Trait,
    /// Invasion with trait-dependent dispersal.
    Example3,
    /// Model given in full under `[model]`.
    Custom,
}

impl Scenario {
    pub const PRESETS: [Scenario; 4] = [
        Scenario::Example1,
        Scenario::Example2Neutral,
        Scenario::Example2Trait,
        Scenario::Example3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Example1 => "example1",
            Scenario::Example2Neutral => "example2_neutral",
            Scenario::Example2Trait => "example2_trait",
            Scenario::Example3 => "example3",
            Scenario::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::PRESETS
            .into_iter()
            .chain([Scenario::Custom])
            .find(|p| p.name() == s)
            .ok_or_else(|| config_err(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    IbmGeneral,
    IbmLogistic,
    IbmLogisticLiteral,
    PdeNonlocal,
    PdeLocal,
}

impl RunMode {
    pub fn is_pde(self) -> bool {
        matches!(self, RunMode::PdeNonlocal | RunMode::PdeLocal)
    }

    pub fn engine(self) -> Option<EngineMode> {
        match self {
            RunMode::IbmGeneral => Some(EngineMode::General),
            RunMode::IbmLogistic => Some(EngineMode::Logistic),
            RunMode::IbmLogisticLiteral => Some(EngineMode::LogisticLiteral),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// All `n` individuals at `(x, u)`.
    PointMass { x: f64, u: f64 },
    /// `n` individuals at `x` with traits `u_min + i (u_max - u_min) / n`,
    /// `i = 1..=n`.
    TraitLadder { x: f64 },
    /// Density matrix as written in `grid/` output files.
    GridDensity { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub nx: usize,
    pub nu: usize,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub dt_max: f64,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            nx: 101,
            nu: 101,
            scheme: Scheme::Explicit,
            dt: None,
            dt_max: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub mode: RunMode,
    /// Initial number of individuals.
    pub n: usize,
    /// Population scale `K` in the competition term `μ(x, u, field / K)`.
    pub n_scale: f64,
    pub delta: f64,
    /// Mutation step (standard deviation).
    pub s: f64,
    /// Diffusion coefficient.
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub mutation_rate: f64,
    pub normalization: Normalization,
    pub seed: u64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Euler substep for positions.
    pub h: f64,
    pub out_dir: PathBuf,
    pub event_cap: u64,
    pub log_events: bool,
    pub initial: InitialCondition,
    pub pde: PdeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDef>,
}

impl RunConfig {
    /// Preset configuration of a scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let base = RunConfig {
            scenario,
            mode: RunMode::IbmLogistic,
            n: 3000,
            n_scale: 3000.0,
            delta: 0.3,
            s: 0.01,
            m: 0.01,
            rho: None,
            mutation_rate: 0.1,
            normalization: Normalization::Constant,
            seed: 1,
            t_end: 100.0,
            snapshot_times: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            h: 0.01,
            out_dir: PathBuf::from("out"),
            event_cap: 1_000_000_000,
            log_events: false,
            initial: InitialCondition::PointMass { x: 0.5, u: 0.5 },
            pde: PdeSection::default(),
            model: None,
        };
        match scenario {
            Scenario::Example1 => base,
            Scenario::Example2Neutral => RunConfig {
                n: 1000,
                n_scale: 1000.0,
                delta: 0.9,
                s: 0.003,
                m: 0.003,
                rho: Some(1.0),
                initial: InitialCondition::PointMass { x: 0.0, u: 1.0 },
                ..base
            },
            Scenario::Example2Trait => RunConfig {
                n: 1000,
                n_scale: 1000.0,
                delta: 1.0,
                s: 0.003,
                m: 0.003,
                initial: InitialCondition::PointMass { x: 0.0, u: 1.0 },
                ..base
            },
            Scenario::Example3 => RunConfig {
                n: 100,
                n_scale: 100.0,
                delta: 0.1,
                s: 0.03,
                m: 0.003,
                initial: InitialCondition::TraitLadder { x: 0.0 },
                ..base
            },
            Scenario::Custom => RunConfig {
                model: Some(custom_template()),
                ..base
            },
        }
    }

    /// Parses TOML text: the scenario's preset is filled in first and every
    /// key present in the text overrides it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e| config_err(format!("invalid TOML: {e}")))?;
        let scenario = match user.get("scenario") {
            Some(toml::Value::String(s)) => Scenario::parse(s)?,
            Some(_) => return Err(config_err("key 'scenario' must be a string")),
            None => return Err(config_err("missing key 'scenario'")),
        };
        let mut preset = Self::preset(scenario);
        // a new horizon without explicit snapshots keeps the preset grid up to it
        if let (Some(t), false) = (user.get("t_end").and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64))), user.contains_key("snapshot_times")) {
            preset.snapshot_times.retain(|&s| s < t);
            preset.snapshot_times.push(t);
        }
        let mut merged = toml::Table::try_from(preset)
            .map_err(|e| Error::Config(format!("preset serialization failed: {e}")))?;
        for (k, v) in user {
            match (merged.get_mut(&k), v) {
                // sections merge key by key, except tagged ones which replace
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) if k == "pde" => {
                    dst.extend(src);
                }
                (_, v) => {
                    merged.insert(k, v);
                }
            }
        }
        let cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("{}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be > 0 (got {v})")))
            }
        };
        pos("n_scale", self.n_scale)?;
        pos("delta", self.delta)?;
        pos("s", self.s)?;
        pos("h", self.h)?;
        pos("t_end", self.t_end)?;
        if !(self.m >= 0.0) {
            return Err(config_err(format!("m must be >= 0 (got {})", self.m)));
        }
        if !(self.mutation_rate >= 0.0) {
            return Err(config_err(format!("mutation_rate must be >= 0 (got {})", self.mutation_rate)));
        }
        if let Some(r) = self.rho {
            pos("rho", r)?;
        }
        if self.scenario == Scenario::Example2Neutral && self.rho.is_none() {
            return Err(config_err("scenario example2_neutral needs rho"));
        }
        if self.scenario == Scenario::Custom && self.model.is_none() {
            return Err(config_err("scenario custom needs a [model] section"));
        }
        if self.snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(config_err("snapshot_times must be strictly increasing"));
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(config_err(format!("snapshot_times must lie in [0, t_end = {}]", self.t_end)));
        }
        if self.pde.nx < 2 || self.pde.nu < 2 {
            return Err(config_err("pde.nx and pde.nu must be >= 2"));
        }
        self.spec()?;
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        match self.scenario {
            Scenario::Example1 => Domain {
                x_min: 0.0,
                x_max: 1.0,
                u_min: 0.0,
                u_max: 1.0,
            },
            Scenario::Example2Neutral | Scenario::Example2Trait => Domain {
                x_min: -1.0,
                x_max: 1.0,
                u_min: 0.0,
                u_max: 2.0,
            },
            Scenario::Example3 => Domain {
                x_min: -1.0,
                x_max: 1.0,
                u_min: 0.0,
                u_max: 3.0,
            },
            Scenario::Custom => self.model.as_ref().map(|m| m.domain).unwrap_or(Domain {
                x_min: 0.0,
                x_max: 1.0,
                u_min: 0.0,
                u_max: 1.0,
            }),
        }
    }

    /// Model definition of the scenario with this config's parameters.
    pub fn model_def(&self) -> Result<ModelDef> {
        let logistic = DeathModel::Logistic {
            mu0: RateFn::constant(1.0),
            mu1: RateFn::constant(1.0),
        };
        let mutation = MutationDef {
            rate: self.mutation_rate,
            s: self.s,
        };
        let domain = self.domain();
        let def = match self.scenario {
            Scenario::Example1 => ModelDef {
                domain,
                birth: RateFn::PolyDiff {
                    coeffs: vec![2.0, 0.0, -20.0],
                    cutoff: Some(10f64.sqrt().recip()),
                },
                death: logistic,
                diffusion: RateFn::constant(self.m),
                drift: RateFn::zero(),
                mutation,
                interaction: InteractionKernel::new(KernelShape::Indicator, self.delta, self.normalization)?,
                competition: CompetitionKernel::Const { value: 1.0 },
                n_scale: self.n_scale,
                c_delta: None,
            },
            Scenario::Example2Neutral | Scenario::Example2Trait => {
                let birth = match self.scenario {
                    Scenario::Example2Neutral => {
                        let rho = self.rho.ok_or_else(|| config_err("scenario example2_neutral needs rho"))?;
                        RateFn::Gaussian {
                            amplitude: 1.0,
                            center: 0.0,
                            var_const: rho * rho,
                            var_per_trait: 0.0,
                        }
                    }
                    _ => RateFn::Gaussian {
                        amplitude: 1.0,
                        center: 0.0,
                        var_const: 0.1,
                        var_per_trait: 1.0,
                    },
                };
                ModelDef {
                    domain,
                    birth,
                    death: logistic,
                    diffusion: RateFn::constant(self.m),
                    drift: RateFn::zero(),
                    mutation,
                    interaction: InteractionKernel::new(KernelShape::Gaussian, self.delta, self.normalization)?,
                    competition: CompetitionKernel::Gaussian {
                        amplitude: 1.0,
                        scale: 0.02,
                    },
                    n_scale: self.n_scale,
                    c_delta: None,
                }
            }
            Scenario::Example3 => ModelDef {
                domain,
                birth: RateFn::constant(1.0),
                death: logistic,
                diffusion: RateFn::AffineTrait {
                    c0: 0.1 * self.m,
                    c1: self.m,
                },
                drift: RateFn::zero(),
                mutation,
                interaction: InteractionKernel::new(KernelShape::Indicator, self.delta, self.normalization)?,
                competition: CompetitionKernel::Gaussian {
                    amplitude: 1.0,
                    scale: 0.1,
                },
                n_scale: self.n_scale,
                c_delta: None,
            },
            Scenario::Custom => self
                .model
                .clone()
                .ok_or_else(|| config_err("scenario custom needs a [model] section"))?,
        };
        Ok(def)
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.model_def()?)
    }

    pub fn reflect(&self) -> Result<ReflectConfig> {
        ReflectConfig::new(&self.domain(), self.h)
    }

    pub fn pde_config(&self) -> PdeConfig {
        PdeConfig {
            dt: self.pde.dt,
            dt_max: self.pde.dt_max,
            scheme: self.pde.scheme,
            mode: match self.mode {
                RunMode::PdeLocal => PdeMode::Local,
                _ => PdeMode::Nonlocal { delta: None },
            },
        }
    }

    /// Initial population at time 0.
    pub fn initial_population(&self) -> Result<Population> {
        let d = self.domain();
        let pop = match &self.initial {
            InitialCondition::PointMass { x, u } => Population::from_points(std::iter::repeat_n((*x, *u), self.n), 0.0),
            InitialCondition::TraitLadder { x } => {
                let n = self.n.max(1) as f64;
                Population::from_points(
                    (1..=self.n).map(|i| (*x, d.u_min + (d.u_max - d.u_min) * i as f64 / n)),
                    0.0,
                )
            }
            InitialCondition::GridDensity { file } => {
                let g = crate::output::read_grid(file, d)?;
                let (dx, du) = (g.dx(), g.du());
                let mut pts = Vec::new();
                for i in 0..g.nx {
                    for k in 0..g.nu {
                        let count = (g.at(i, k) * self.n_scale * dx * du).round() as usize;
                        pts.extend(std::iter::repeat_n((g.x_center(i), g.u_center(k)), count));
                    }
                }
                Population::from_points(pts, 0.0)
            }
        };
        pop.validate(&d)?;
        Ok(pop)
    }

    /// Initial density `ν_0 / K` on the configured PDE grid.
    pub fn initial_density(&self) -> Result<DensityGrid> {
        let d = self.domain();
        match &self.initial {
            InitialCondition::GridDensity { file } => {
                let g = crate::output::read_grid(file, d)?;
                if g.nx != self.pde.nx || g.nu != self.pde.nu {
                    return Err(config_err(format!(
                        "grid file is {}×{} but pde grid is {}×{}",
                        g.nx, g.nu, self.pde.nx, self.pde.nu
                    )));
                }
                Ok(g)
            }
            _ => {
                let pop = self.initial_population()?;
                DensityGrid::from_population(&pop, self.n_scale, d, self.pde.nx, self.pde.nu)
            }
        }
    }
}

fn custom_template() -> ModelDef {
    ModelDef {
        domain: Domain {
            x_min: 0.0,
            x_max: 1.0,
            u_min: 0.0,
            u_max: 1.0,
        },
        birth: RateFn::constant(2.0),
        death: DeathModel::Logistic {
            mu0: RateFn::constant(1.0),
            mu1: RateFn::constant(1.0),
        },
        diffusion: RateFn::constant(0.01),
        drift: RateFn::zero(),
        mutation: MutationDef { rate: 0.1, s: 0.01 },
        interaction: InteractionKernel {
            shape: KernelShape::Indicator,
            delta: 0.3,
            normalization: Normalization::BoundaryAware,
        },
        competition: CompetitionKernel::Const { value: 1.0 },
        n_scale: 3000.0,
        c_delta: None,
    }
}
