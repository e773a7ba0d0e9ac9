//! The three exact engines on the same start: the general reference
//! engine, the literal logistic engine and the thinned logistic engine.

use std::time::Instant;

use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::engine::{run, EngineMode, RunOptions};

fn main() -> spatial_ibm::Result<()> {
    let mut cfg = RunConfig::preset(Scenario::Example1);
    cfg.n = 100;
    cfg.n_scale = 100.0;
    let spec = cfg.spec()?;
    println!("thinning constant C = {:.3}", spec.bounds.c_delta);

    for mode in [EngineMode::General, EngineMode::LogisticLiteral, EngineMode::Logistic] {
        let opts = RunOptions::new(2.0, vec![1.0, 2.0], cfg.reflect()?, mode, 42);
        let t0 = Instant::now();
        let tr = run(cfg.initial_population()?, &spec, &opts)?;
        let sizes: Vec<usize> = tr.snapshots.iter().map(|s| s.individuals.len()).collect();
        println!(
            "{mode:?}: N(1), N(2) = {sizes:?}; {} candidates, {} births ({} mutants), {} deaths in {:.2?}",
            tr.stats.candidates,
            tr.stats.births,
            tr.stats.mutants,
            tr.stats.deaths,
            t0.elapsed()
        );
    }
    Ok(())
}
