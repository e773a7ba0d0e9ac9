//! Nonlocal PDE against its local limit as the interaction range shrinks.

use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::model::Normalization;
use spatial_ibm::pde::{solve, PdeConfig, PdeMode};

fn main() -> spatial_ibm::Result<()> {
    let mut cfg = RunConfig::preset(Scenario::Example1);
    cfg.normalization = Normalization::BoundaryAware;
    cfg.pde.nx = 61;
    cfg.pde.nu = 61;
    let spec = cfg.spec()?;
    let g0 = cfg.initial_density()?;
    let t = 5.0;

    let local = PdeConfig {
        mode: PdeMode::Local,
        ..cfg.pde_config()
    };
    let limit = solve(&g0, &spec, &local, t, &[t])?;
    println!("local: mass {:.4} at t={t}, dt {:.2e}", limit.snapshots[0].mass(), limit.dt);
    for delta in [0.2, 0.1, 0.05, 0.025] {
        let c = PdeConfig {
            mode: PdeMode::Nonlocal { delta: Some(delta) },
            ..cfg.pde_config()
        };
        let s = solve(&g0, &spec, &c, t, &[t])?;
        println!(
            "delta {delta:<5}: mass {:.4}, L1 to local {:.3e}",
            s.snapshots[0].mass(),
            s.snapshots[0].l1_distance(&limit.snapshots[0])?
        );
    }
    Ok(())
}
