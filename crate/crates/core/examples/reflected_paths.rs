//! Reflected diffusion on a bounded interval: one path, the law of the
//! running maximum, and the stationary (uniform) law.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatial_ibm::math::ks_statistic;
use spatial_ibm::model::{Individual, ModelSpec};
use spatial_ibm::reflect::{advance_position, euler_substep, shepp_sample, ReflectConfig};

fn main() -> spatial_ibm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // E sup_{s<=1} B_s = sqrt(2/pi)
    let n = 200_000;
    let mean = (0..n).map(|_| shepp_sample(1.0, 0.0, 1.0, &mut rng).map(|s| s.1)).sum::<Result<f64, _>>()? / n as f64;
    println!("E[sup B] ~ {mean:.4} (exact {:.4})", (2.0 / std::f64::consts::PI).sqrt());

    let mut def = spatial_ibm::config::RunConfig::preset(spatial_ibm::config::Scenario::Custom).model_def()?;
    def.diffusion = spatial_ibm::model::RateFn::constant(0.5);
    let spec = ModelSpec::new(def)?;
    let cfg = ReflectConfig::new(spec.domain(), 0.01)?;

    let mut x = 0.02;
    print!("path:");
    for _ in 0..10 {
        x = euler_substep(x, 0.5, &spec, &cfg, 0.01, &mut rng)?;
        print!(" {x:.3}");
    }
    println!();

    let start = Individual {
        x: 0.02,
        u: 0.5,
        t_sync: 0.0,
        id: 0,
        draws: 0,
    };
    let mut ends: Vec<f64> = (0..5000)
        .map(|_| advance_position(&start, &spec, 3.0, &cfg, &mut rng).map(|i| i.x))
        .collect::<Result<_, _>>()?;
    println!("KS distance to uniform at t=3: {:.4}", ks_statistic(&mut ends, |v| v));
    Ok(())
}
