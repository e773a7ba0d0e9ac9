//! A model given entirely in TOML: trait-dependent diffusion, a Gaussian
//! interaction kernel and trait competition.

use spatial_ibm::cli::execute;
use spatial_ibm::config::RunConfig;

const CONFIG: &str = r#"
scenario = "custom"
mode = "ibm_logistic"
n = 400
n_scale = 400.0
t_end = 20.0
snapshot_times = [0.0, 10.0, 20.0]

[initial]
kind = "point_mass"
x = 0.5
u = 0.5

[model]
n_scale = 400.0
birth = { kind = "gaussian", amplitude = 2.0, center = 0.5, var_const = 0.05 }
death = { kind = "logistic", mu0 = { kind = "const", value = 1.0 }, mu1 = { kind = "const", value = 1.0 } }
diffusion = { kind = "affine_trait", c0 = 0.001, c1 = 0.01 }
drift = { kind = "const", value = 0.0 }
mutation = { rate = 0.1, s = 0.02 }
interaction = { shape = "gaussian", delta = 0.1, normalization = "boundary_aware" }
competition = { kind = "gaussian", amplitude = 1.0, scale = 0.05 }
domain = { x_min = 0.0, x_max = 1.0, u_min = 0.0, u_max = 1.0 }
"#;

fn main() -> spatial_ibm::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    let s = execute(&cfg, None)?;
    for m in &s.metrics {
        println!("t = {:>4}: N = {:>4}, x-peaks {:?}, u-peaks {:?}", m.t, m.n, m.peaks_x, m.peaks_u);
    }
    Ok(())
}
