//! Short-horizon drift and quadratic variation of a frozen state against
//! the generator.

use spatial_ibm::analysis::{generator_check_many, TestFunction};
use spatial_ibm::check::frozen_state;
use spatial_ibm::config::{RunConfig, Scenario};
use spatial_ibm::reflect::ReflectConfig;

fn main() -> spatial_ibm::Result<()> {
    let cfg = RunConfig::preset(Scenario::Example3);
    let spec = cfg.spec()?;
    let pop = frozen_state(&spec, 100, 3);
    let dt = 0.002;
    let fs = [TestFunction::One, TestFunction::X, TestFunction::U, TestFunction::X2, TestFunction::CosPi];
    let reflect = ReflectConfig::new(spec.domain(), dt / 2.0)?;
    for r in generator_check_many(&pop, &spec, &fs, dt, 2000, &reflect, 9)? {
        println!(
            "{:<6} drift {:>9.4} vs {:>9.4} (z {:>5.2})   qv {:>8.4} vs {:>8.4} (z {:>5.2})",
            r.function,
            r.empirical_drift,
            r.predicted_drift,
            r.drift_z,
            r.empirical_qv_rate,
            r.predicted_qv_rate,
            r.qv_z
        );
    }
    Ok(())
}
