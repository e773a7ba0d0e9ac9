//! Invasion with evolving dispersal speed: how soon the population reaches
//! the edges from a trait ladder and from a single slow point.

use spatial_ibm::config::{InitialCondition, RunConfig, Scenario};
use spatial_ibm::engine::{run, EngineMode, RunOptions};

fn main() -> spatial_ibm::Result<()> {
    let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
    for init in [InitialCondition::TraitLadder { x: 0.0 }, InitialCondition::PointMass { x: 0.0, u: 0.0 }] {
        let mut cfg = RunConfig::preset(Scenario::Example3);
        cfg.initial = init.clone();
        let spec = cfg.spec()?;
        for seed in 1..=3 {
            let opts = RunOptions::new(100.0, times.clone(), cfg.reflect()?, EngineMode::Logistic, seed);
            let tr = run(cfg.initial_population()?, &spec, &opts)?;
            let hit = tr.snapshots.iter().find(|s| s.individuals.iter().any(|i| i.x.abs() > 0.9)).map(|s| s.t);
            let top_u = tr.final_population.individuals.iter().map(|i| i.u).fold(f64::NAN, f64::max);
            println!(
                "{init:?} seed {seed}: reaches |x| > 0.9 at {hit:?}; final N = {}, max trait {top_u:.2}, extinct at {:?}",
                tr.final_population.len(),
                tr.extinction
            );
        }
    }
    Ok(())
}
