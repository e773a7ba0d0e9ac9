//! Spatial branching as the interaction range crosses the width of the
//! growth region.

use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::cli::execute;

fn main() -> spatial_ibm::Result<()> {
    let t: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200.0);
    for delta in [0.5, 0.9, 1.1] {
        let mut cfg = RunConfig::preset(Scenario::Example2Neutral);
        cfg.delta = delta;
        cfg.t_end = t;
        cfg.snapshot_times = vec![t];
        let m = execute(&cfg, None)?.metrics.remove(0);
        println!("delta {delta}: N = {} at t = {t}, x-peaks {:?}", m.n, m.peaks_x);
    }
    Ok(())
}
