//! Command line front end: `run`, `sweep`, `check`, `compare`, `preset`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{cluster_peaks, histogram, Axis};
use crate::check::{run_checks, CheckOptions};
use crate::config::{RunConfig, RunMode, Scenario};
use crate::engine::{run, RunOptions, RunStats};
use crate::error::{config_err, Error, Result};
use crate::output::{write_grid, write_snapshot, Ndjson};
use crate::pde::{solve, DensityGrid, PdeMode};

#[derive(Debug, Parser)]
#[command(name = "spatial-ibm", version, about = "Spatial individual-based population simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single simulation or PDE solve, written to the output directory.
    Run(ConfigArgs),
    /// Runs a grid of values of one parameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// One of n_scale, delta, h, dt.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Invariant and generator diagnostics; exits with 4 on failure.
    Check {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fewer states and replicates.
        #[arg(long)]
        quick: bool,
    },
    /// Replicate-averaged IBM histogram against the nonlocal PDE.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        /// Comparison time (defaults to t_end).
        #[arg(long)]
        time: Option<f64>,
        /// Histogram bins as nx,nu; must divide the PDE grid.
        #[arg(long, value_delimiter = ',', default_values_t = [25usize, 25])]
        bins: Vec<usize>,
    },
    /// Prints a scenario preset as TOML.
    Preset { scenario: String },
}

#[derive(Debug, Clone, Args, Default)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// ibm_general, ibm_logistic, ibm_logistic_literal, pde_nonlocal, pde_local.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshot_times: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra `key=value` overrides in TOML syntax; `pde.nx=51` is allowed.
    #[arg(long = "set")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut table: toml::Table = match &self.config {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?
                .parse()
                .map_err(|e| config_err(format!("invalid TOML in {}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        let mut put = |k: &str, v: toml::Value| {
            table.insert(k.to_string(), v);
        };
        if let Some(s) = &self.scenario {
            put("scenario", s.clone().into());
        }
        if let Some(s) = &self.mode {
            put("mode", s.clone().into());
        }
        for (k, v) in [
            ("delta", self.delta),
            ("s", self.s),
            ("m", self.m),
            ("rho", self.rho),
            ("n_scale", self.n_scale),
            ("t_end", self.t_end),
            ("h", self.h),
        ] {
            if let Some(v) = v {
                put(k, v.into());
            }
        }
        if let Some(n) = self.n {
            put("n", (n as i64).into());
        }
        if let Some(seed) = self.seed {
            put("seed", (seed as i64).into());
        }
        if let Some(ts) = &self.snapshot_times {
            put("snapshot_times", ts.iter().map(|&t| toml::Value::from(t)).collect::<Vec<_>>().into());
        }
        if let Some(o) = &self.out {
            put("out_dir", o.display().to_string().into());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| config_err(format!("--set expects key=value (got '{kv}')")))?;
            let v: toml::Value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .map(|mut t| t.remove("v").unwrap())
                .unwrap_or_else(|_| toml::Value::String(v.to_string()));
            match k.split_once('.') {
                Some((sec, key)) => {
                    let entry = table
                        .entry(sec.to_string())
                        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                    match entry {
                        toml::Value::Table(t) => {
                            t.insert(key.to_string(), v);
                        }
                        _ => return Err(config_err(format!("'{sec}' is not a section"))),
                    }
                }
                None => {
                    table.insert(k.to_string(), v);
                }
            }
        }
        if !table.contains_key("scenario") {
            return Err(config_err("no scenario given (use --scenario or a config file)"));
        }
        RunConfig::from_toml(&toml::to_string(&table).map_err(|e| config_err(e.to_string()))?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotMetrics {
    pub t: f64,
    pub n: usize,
    pub mass: f64,
    pub peaks_x: Vec<f64>,
    pub peaks_u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub metrics: Vec<SnapshotMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extinction: Option<f64>,
    /// Final PDE grid, for PDE modes.
    #[serde(skip)]
    pub final_grid: Option<DensityGrid>,
}

const PEAK_BINS: usize = 50;

fn grid_peaks(g: &DensityGrid, axis: Axis) -> Vec<f64> {
    let h = crate::analysis::Histogram2D {
        edges_x: (0..=g.nx).map(|i| g.domain.x_min + i as f64 * g.dx()).collect(),
        edges_u: (0..=g.nu).map(|k| g.domain.u_min + k as f64 * g.du()).collect(),
        counts: g.values.clone(),
        normalization: crate::analysis::HistNorm::Density,
    };
    cluster_peaks(&h, axis, 5, 0.2)
}

/// Runs one configuration, writing files under `out_dir` when given.
pub fn execute(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    let spec = cfg.spec()?;
    let domain = cfg.domain();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    }
    let mut meta = out_dir.map(|d| Ndjson::create(&d.join("meta.ndjson"))).transpose()?;
    let mut metrics_out = out_dir.map(|d| Ndjson::create(&d.join("metrics.ndjson"))).transpose()?;
    let mut metrics = Vec::new();

    if cfg.mode.is_pde() {
        let g0 = cfg.initial_density()?;
        let pcfg = cfg.pde_config();
        let sol = solve(&g0, &spec, &pcfg, cfg.t_end, &cfg.snapshot_times)?;
        let (mode, delta) = match pcfg.mode {
            PdeMode::Local => ("local", None),
            PdeMode::Nonlocal { delta } => ("nonlocal", Some(delta.unwrap_or(spec.def.interaction.delta))),
        };
        let mut last = None;
        for g in &sol.snapshots {
            let m = SnapshotMetrics {
                t: g.t,
                n: 0,
                mass: g.mass(),
                peaks_x: grid_peaks(g, Axis::X),
                peaks_u: grid_peaks(g, Axis::U),
            };
            if let Some(dir) = out_dir {
                write_grid(dir, g)?;
            }
            if let Some(w) = meta.as_mut() {
                w.write(&json!({"t": g.t, "mass": m.mass, "dt": sol.dt, "mode": mode, "delta": delta}))?;
            }
            if let Some(w) = metrics_out.as_mut() {
                w.write(&m)?;
            }
            metrics.push(m);
            last = Some(g.clone());
        }
        if let Some(w) = metrics_out.as_mut() {
            w.write(&json!({"clipped_mass": sol.clipped, "steps": sol.mass_trace.len() - 1}))?;
        }
        finish(meta, metrics_out)?;
        return Ok(RunSummary {
            metrics,
            stats: None,
            extinction: None,
            final_grid: last,
        });
    }

    let engine = cfg.mode.engine().ok_or_else(|| config_err("not an IBM mode"))?;
    let pop0 = cfg.initial_population()?;
    let mut opts = RunOptions::new(cfg.t_end, cfg.snapshot_times.clone(), cfg.reflect()?, engine, cfg.seed);
    opts.event_cap = cfg.event_cap;
    opts.log_events = cfg.log_events;
    opts.reflect.check_step(spec.bounds.m_star);
    if let Some(w) = meta.as_mut() {
        w.write(&json!({
            "scenario": cfg.scenario.name(),
            "mode": cfg.mode,
            "seed": cfg.seed,
            "n0": pop0.len(),
            "n_scale": cfg.n_scale,
            "c_delta": spec.bounds.c_delta,
            "mutation_envelope_l1": spec.bounds.mutation_l1,
        }))?;
    }
    let tr = run(pop0, &spec, &opts)?;
    for s in &tr.snapshots {
        let h = histogram(&s.individuals, &domain, PEAK_BINS, PEAK_BINS)?;
        let m = SnapshotMetrics {
            t: s.t,
            n: s.individuals.len(),
            mass: s.individuals.len() as f64 / cfg.n_scale,
            peaks_x: cluster_peaks(&h, Axis::X, 5, 0.2),
            peaks_u: cluster_peaks(&h, Axis::U, 5, 0.2),
        };
        if let Some(dir) = out_dir {
            write_snapshot(dir, s.t, &s.individuals)?;
        }
        if let Some(w) = metrics_out.as_mut() {
            w.write(&m)?;
        }
        metrics.push(m);
    }
    if let (Some(dir), Some(log)) = (out_dir, &tr.event_log) {
        let mut w = Ndjson::create(&dir.join("events.ndjson"))?;
        for (t, e) in log {
            let mut v = serde_json::to_value(e).map_err(std::io::Error::from)?;
            v["t"] = json!(t);
            w.write(&v)?;
        }
        w.finish()?;
    }
    if let Some(w) = meta.as_mut() {
        w.write(&json!({"stats": tr.stats, "extinction": tr.extinction}))?;
    }
    finish(meta, metrics_out)?;
    Ok(RunSummary {
        metrics,
        stats: Some(tr.stats),
        extinction: tr.extinction,
        final_grid: None,
    })
}

fn finish(a: Option<Ndjson>, b: Option<Ndjson>) -> Result<()> {
    if let Some(w) = a {
        w.finish()?;
    }
    if let Some(w) = b {
        w.finish()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub final_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_n: Option<usize>,
    /// `‖g^δ_T - g_T‖₁` against the local solve, for PDE delta sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_to_local: Option<f64>,
    pub peaks_x: usize,
}

/// Runs `cfg` once per value of `param`; cells run in parallel.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[f64], out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let mut cells = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match param {
            "n_scale" => {
                c.n_scale = v;
                c.n = v.round() as usize;
            }
            "delta" => c.delta = v,
            "h" => c.h = v,
            "dt" => c.pde.dt = Some(v),
            _ => return Err(config_err(format!("cannot sweep over '{param}' (use n_scale, delta, h or dt)"))),
        }
        c.snapshot_times = vec![c.t_end];
        c.validate()?;
        cells.push(c);
    }
    let local = if param == "delta" && cfg.mode == RunMode::PdeNonlocal {
        let mut c = cfg.clone();
        c.mode = RunMode::PdeLocal;
        c.snapshot_times = vec![c.t_end];
        execute(&c, None)?.final_grid
    } else {
        None
    };
    let rows: Vec<Result<SweepRow>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let dir = out_dir.map(|d| d.join(format!("cell{k}")));
            let s = execute(c, dir.as_deref())?;
            let last = s.metrics.last().ok_or_else(|| Error::Numerical("no final snapshot".into()))?;
            let l1 = match (&local, &s.final_grid) {
                (Some(a), Some(b)) => Some(a.l1_distance(b)?),
                _ => None,
            };
            Ok(SweepRow {
                param: param.to_string(),
                value: values[k],
                final_mass: last.mass,
                final_n: (!c.mode.is_pde()).then_some(last.n),
                l1_to_local: l1,
                peaks_x: last.peaks_x.len(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        let mut w = Ndjson::create(&dir.join("sweep.ndjson"))?;
        for r in &rows {
            w.write(r)?;
        }
        w.finish()?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub t: f64,
    pub replicates: usize,
    pub bins: (usize, usize),
    pub l1: f64,
    pub pde_mass: f64,
    pub relative_l1: f64,
}

/// Averages the binned IBM density over replicates and compares it with the
/// nonlocal PDE solution aggregated onto the same bins.
pub fn compare(cfg: &RunConfig, replicates: usize, t: f64, bins: (usize, usize)) -> Result<CompareReport> {
    let (bx, bu) = bins;
    if bx == 0 || bu == 0 || cfg.pde.nx % bx != 0 || cfg.pde.nu % bu != 0 {
        return Err(config_err(format!(
            "bins {bx}×{bu} must divide the pde grid {}×{}",
            cfg.pde.nx, cfg.pde.nu
        )));
    }
    if replicates == 0 {
        return Err(config_err("compare needs at least one replicate"));
    }
    let mut c = cfg.clone();
    c.t_end = t;
    c.snapshot_times = vec![t];
    if c.mode.is_pde() {
        c.mode = RunMode::IbmLogistic;
    }
    c.validate()?;
    let spec = c.spec()?;
    let domain = c.domain();
    let grids: Vec<Result<DensityGrid>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut opts = RunOptions::new(t, vec![t], c.reflect()?, c.mode.engine().unwrap(), c.seed + r as u64);
            opts.event_cap = c.event_cap;
            let tr = run(c.initial_population()?, &spec, &opts)?;
            histogram(&tr.snapshots[0].individuals, &domain, bx, bu)?.to_grid(c.n_scale, t)
        })
        .collect();
    let mut avg = DensityGrid::zeros(domain, bx, bu)?;
    for g in grids {
        for (a, v) in avg.values.iter_mut().zip(g?.values) {
            *a += v / replicates as f64;
        }
    }
    let mut p = c.clone();
    p.mode = RunMode::PdeNonlocal;
    let g0 = p.initial_density()?;
    let sol = solve(&g0, &spec, &p.pde_config(), t, &[t])?;
    let pde = sol.snapshots[0].coarsen(cfg.pde.nx / bx, cfg.pde.nu / bu)?;
    let l1 = avg.l1_distance(&pde)?;
    let mass = pde.mass();
    Ok(CompareReport {
        t,
        replicates,
        bins,
        l1,
        pde_mass: mass,
        relative_l1: l1 / mass,
    })
}

fn print_record<T: Serialize>(r: &T) {
    println!("{}", serde_json::to_string(r).unwrap_or_default());
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let s = execute(&cfg, Some(&cfg.out_dir))?;
            if let Some(m) = s.metrics.last() {
                print_record(m);
            }
            Ok(0)
        }
        Command::Sweep { cfg, param, values } => {
            let c = cfg.resolve()?;
            let rows = sweep(&c, &param, &values, Some(&c.out_dir))?;
            for r in &rows {
                print_record(r);
            }
            let l1: Vec<f64> = rows.iter().filter_map(|r| r.l1_to_local).collect();
            if l1.len() == rows.len() && l1.len() > 1 {
                // values are listed in the order given; report monotonicity along it
                let monotone = l1.windows(2).all(|w| w[1] < w[0]);
                print_record(&json!({"l1_to_local_decreasing": monotone}));
            }
            Ok(0)
        }
        Command::Check { cfg, quick } => {
            let c = cfg.resolve()?;
            let mut opts = if quick { CheckOptions::quick() } else { CheckOptions::full() };
            opts.seed = c.seed;
            let rows = run_checks(&c, &opts)?;
            let mut ok = true;
            for r in &rows {
                println!(
                    "{:<5} {:<45} {:>12.4e}  (threshold {:.3e})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.value,
                    r.threshold
                );
                ok &= r.pass;
            }
            if ok {
                Ok(0)
            } else {
                Err(Error::Check(format!("{} of {} checks failed", rows.iter().filter(|r| !r.pass).count(), rows.len())))
            }
        }
        Command::Compare {
            cfg,
            replicates,
            time,
            bins,
        } => {
            let c = cfg.resolve()?;
            if bins.len() != 2 {
                return Err(config_err("--bins expects nx,nu"));
            }
            let t = time.unwrap_or(c.t_end);
            let r = compare(&c, replicates, t, (bins[0], bins[1]))?;
            std::fs::create_dir_all(&c.out_dir)?;
            let mut w = Ndjson::create(&c.out_dir.join("compare.ndjson"))?;
            w.write(&r)?;
            w.finish()?;
            print_record(&r);
            Ok(0)
        }
        Command::Preset { scenario } => {
            print!("{}", RunConfig::preset(Scenario::parse(&scenario)?).to_toml()?);
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
/// Failures print one JSON error record on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.render().to_string();
            eprintln!("{}", json!({"error": "usage", "message": msg.trim(), "exit_code": 2}));
            return 2;
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return 0;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()})
            );
            e.exit_code()
        }
    }
}
