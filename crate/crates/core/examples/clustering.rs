//! Spatial clustering: cluster peaks of the marginals for two interaction
//! ranges. Pass a horizon as the first argument (clusters need t in the
//! thousands; the default is short).

use spatial_ibm::analysis::{cluster_peaks, histogram, Axis};
use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::engine::{run, EngineMode, RunOptions};

fn main() -> spatial_ibm::Result<()> {
    let t: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100.0);
    for delta in [0.3, 0.1] {
        let mut cfg = RunConfig::preset(Scenario::Example1);
        cfg.delta = delta;
        let spec = cfg.spec()?;
        let opts = RunOptions::new(t, vec![t], cfg.reflect()?, EngineMode::Logistic, 1);
        let tr = run(cfg.initial_population()?, &spec, &opts)?;
        let pop = &tr.snapshots[0].individuals;
        let h = histogram(pop, &cfg.domain(), 50, 50)?;
        println!(
            "delta {delta}: N = {}, x-peaks {:?}, u-peaks {:?}",
            pop.len(),
            cluster_peaks(&h, Axis::X, 5, 0.2),
            cluster_peaks(&h, Axis::U, 5, 0.2)
        );
    }
    Ok(())
}
