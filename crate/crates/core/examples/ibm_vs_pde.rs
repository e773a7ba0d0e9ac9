//! Replicate-averaged IBM histogram against the nonlocal PDE, at two
//! population scales.

use spatial_ibm::cli::compare;
use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::model::Normalization;

fn main() -> spatial_ibm::Result<()> {
    for n in [1000, 2000, 4000] {
        let mut cfg = RunConfig::preset(Scenario::Example1);
        cfg.n = n;
        cfg.n_scale = n as f64;
        cfg.normalization = Normalization::BoundaryAware;
        cfg.pde.nx = 100;
        cfg.pde.nu = 100;
        let r = compare(&cfg, 10, 2.0, (20, 20))?;
        println!("N = {n}: L1 {:.4} of PDE mass {:.4} -> relative {:.4}", r.l1, r.pde_mass, r.relative_l1);
    }
    Ok(())
}
