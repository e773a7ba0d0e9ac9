use super::*;
use crate::math::{ks_pvalue, ks_statistic, mean_var, normal_pdf};
use crate::model::{
    CompetitionKernel, DeathModel, Domain, InteractionKernel, KernelShape, ModelDef, MutationDef, Normalization,
    RateFn,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_def(lambda: f64, mu0: f64, mu1: f64, n_scale: f64) -> ModelDef {
    ModelDef {
        domain: Domain::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        birth: RateFn::constant(lambda),
        death: DeathModel::Logistic {
            mu0: RateFn::constant(mu0),
            mu1: RateFn::constant(mu1),
        },
        diffusion: RateFn::zero(),
        drift: RateFn::zero(),
        mutation: MutationDef { rate: 0.0, s: 0.01 },
        interaction: InteractionKernel::new(KernelShape::Indicator, 0.3, Normalization::Constant).unwrap(),
        competition: CompetitionKernel::Const { value: 1.0 },
        n_scale,
        c_delta: None,
    }
}

fn clustering_def() -> ModelDef {
    ModelDef {
        birth: RateFn::PolyDiff {
            coeffs: vec![2.0, 0.0, -20.0],
            cutoff: Some(10f64.sqrt().recip()),
        },
        diffusion: RateFn::constant(0.01),
        mutation: MutationDef { rate: 0.1, s: 0.01 },
        ..unit_def(0.0, 1.0, 1.0, 3000.0)
    }
}

fn opts(t_end: f64, snaps: Vec<f64>, spec: &ModelSpec, mode: EngineMode, seed: u64) -> RunOptions {
    RunOptions::new(t_end, snaps, ReflectConfig::new(spec.domain(), 1e-2).unwrap(), mode, seed)
}

#[test]
fn event_time_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..1_000_000).map(|_| sample_event_time(1, 2.0, &mut rng)).collect();
    let (m, v) = mean_var(&draws);
    assert!((m - 0.25).abs() < 3.0 * (v / draws.len() as f64).sqrt());

    let mut draws: Vec<f64> = (0..100_000).map(|_| sample_event_time(100, 10.0, &mut rng)).collect();
    let (m, v) = mean_var(&draws);
    let expected: f64 = 1.0 / (10.0 * 100.0 * 101.0);
    assert!((expected - 9.901e-6).abs() < 1e-9);
    assert!((m - expected).abs() < 3.0 * (v / draws.len() as f64).sqrt());

    let rate = 10.0 * 100.0 * 101.0;
    let d = ks_statistic(&mut draws, |t| 1.0 - (-rate * t).exp());
    assert!(ks_pvalue(d, draws.len()) > 0.01);
}

#[test]
fn mutant_sampler_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mk = MutationKernel::new(0.1, 1e-6, 0.0, 1.0).unwrap();
    for _ in 0..10_000 {
        let v = sample_mutant_trait(0.3, &mk, &mut rng).unwrap();
        assert!((v - 0.3).abs() < 1e-5);
    }

    let mk = MutationKernel::new(0.1, 0.01, 0.0, 1.0).unwrap();
    let n = 1_000_000;
    let vs: Vec<f64> = (0..n).map(|_| sample_mutant_trait(0.5, &mk, &mut rng).unwrap()).collect();
    let (m, v) = mean_var(&vs);
    assert!((m - 0.5).abs() < 3.0 * 0.01 / (n as f64).sqrt());
    // sd of the sample variance of a normal is sqrt(2/n) σ²
    assert!((v - 1e-4).abs() < 3.0 * (2.0 / n as f64).sqrt() * 1e-4);

    let s = 0.03;
    let mk = MutationKernel::new(0.1, s, 0.0, 1.0).unwrap();
    let vs: Vec<f64> = (0..n).map(|_| sample_mutant_trait(0.0, &mk, &mut rng).unwrap()).collect();
    assert!(vs.iter().all(|&v| v >= 0.0));
    // composite Simpson on the conditioned density
    let k = 20_000;
    let h = 1.0 / k as f64;
    let (mut mass, mut first) = (0.0, 0.0);
    for j in 0..=k {
        let v = j as f64 * h;
        let w = if j == 0 || j == k { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
        let dens = normal_pdf(v / s) / s;
        mass += w * dens;
        first += w * v * dens;
    }
    let expected = first / mass;
    let (m, var) = mean_var(&vs);
    assert!((m - expected).abs() < 3.0 * (var / n as f64).sqrt(), "{m} vs {expected}");
}

#[test]
fn yule_process_mean() {
    let spec = ModelSpec::new(unit_def(1.0, 0.0, 0.0, 1.0)).unwrap();
    let reps = 1000;
    let t = 1.0;
    let n0 = 3;
    let mut sizes = Vec::with_capacity(reps);
    for r in 0..reps {
        let pop = Population::from_points((0..n0).map(|k| (0.2 + 0.1 * k as f64, 0.5)), 0.0);
        let tr = run(pop, &spec, &opts(t, vec![t], &spec, EngineMode::General, r as u64)).unwrap();
        sizes.push(tr.snapshots[0].individuals.len() as f64);
    }
    let (m, _) = mean_var(&sizes);
    let e = n0 as f64 * t.exp();
    let sd = (n0 as f64 * (e / n0 as f64) * (e / n0 as f64 - 1.0)).sqrt();
    assert!((m - e).abs() < 3.0 * sd / (reps as f64).sqrt(), "{m} vs {e}");
}

#[test]
fn extinction_time_of_single_lifetime() {
    let spec = ModelSpec::new(unit_def(0.0, 1.0, 0.0, 1.0)).unwrap();
    let reps = 10_000;
    let mut times = Vec::with_capacity(reps);
    for r in 0..reps {
        let pop = Population::from_points([(0.5, 0.5)], 0.0);
        let tr = run(pop, &spec, &opts(1e3, vec![], &spec, EngineMode::General, r as u64)).unwrap();
        times.push(tr.extinction.unwrap());
    }
    let (m, v) = mean_var(&times);
    assert!((m - 1.0).abs() < 3.0 * (v / reps as f64).sqrt());
}

#[test]
fn self_competition_of_a_lone_individual() {
    // I(0) W(0) = 1/0.6 with constant normalization; K = 1
    let spec = ModelSpec::new(unit_def(0.0, 0.0, 1.0, 1.0)).unwrap();
    let reps = 10_000;
    let mut times = Vec::with_capacity(reps);
    for r in 0..reps {
        let pop = Population::from_points([(0.5, 0.5)], 0.0);
        let tr = run(pop, &spec, &opts(1e3, vec![], &spec, EngineMode::LogisticLiteral, r as u64)).unwrap();
        times.push(tr.extinction.unwrap());
    }
    let (m, v) = mean_var(&times);
    assert!((m - 0.6).abs() < 3.0 * (v / reps as f64).sqrt(), "{m}");
}

#[test]
fn only_death_band_active() {
    let spec = ModelSpec::new(ModelDef {
        c_delta: Some(4.0),
        ..unit_def(0.0, 1.5, 0.0, 1.0)
    })
    .unwrap();
    let pop = Population::from_points([(0.2, 0.5), (0.7, 0.5)], 0.0);
    let law = exact_event_law(&pop, &spec).unwrap();
    let deaths: f64 = (0..2).map(|i| law[3 * i]).sum();
    assert!((deaths - 1.5 / (4.0 * 3.0)).abs() < 1e-15);
    let emp = event_law(&pop, &spec, EngineMode::General, 100_000, 5).unwrap();
    let emp_deaths = emp[0] + emp[3];
    let sd = (deaths * (1.0 - deaths) / 1e5).sqrt();
    assert!((emp_deaths - deaths).abs() < 3.0 * sd);
}

#[test]
fn hand_computed_general_bands() {
    let spec = ModelSpec::new(clustering_def()).unwrap();
    let pop0 = Population::from_points([(0.5, 0.5), (0.6, 0.4)], 0.0);
    let c = spec.bounds.c_delta;
    let budget = c * 3.0;
    // both within δ = 0.3 of x = 0.5, constant normalization 1/0.6
    let mu = 1.0 + (2.0 / 0.6) / 3000.0;
    let lambda = 2.0;
    let t1 = mu / budget;
    let t2 = t1 + lambda / budget;
    let l1 = spec.mutation.envelope_l1();
    let v = 0.52;
    let m = 0.1 * normal_pdf(2.0) / 0.01 / spec.mutation.z(0.5);
    let ratio = m / spec.mutation.envelope().value(v);
    assert!(ratio > 0.0 && ratio <= 1.0);
    let t3 = t2 + ratio * l1 / budget;

    let cases = [
        (0.5 * t1, EventKind::Death),
        (t1 + 1e-9, EventKind::ClonalBirth),
        (t2 - 1e-9, EventKind::ClonalBirth),
        (t2 + 1e-9, EventKind::MutantBirth),
        (t3 - 1e-9, EventKind::MutantBirth),
        (t3 + 1e-9, EventKind::NoOp),
        (0.999, EventKind::NoOp),
    ];
    for (theta, want) in cases {
        let mut pop = pop0.clone();
        let out = resolve_general(&mut pop, &spec, 0, theta, || v).unwrap();
        assert_eq!(out.kind, want, "theta = {theta}");
        assert_eq!(pop.len() as i64, 2 + want.size_change());
        if want == EventKind::MutantBirth {
            assert_eq!(out.mutant_trait, Some(v));
            assert_eq!(pop.individuals[2].x, 0.5);
            assert_eq!(pop.individuals[2].u, v);
        }
    }
}

#[test]
fn band_overflow_is_a_config_error() {
    let spec = ModelSpec::new(ModelDef {
        c_delta: Some(0.5),
        ..unit_def(2.0, 1.0, 0.0, 1.0)
    })
    .unwrap();
    let mut pop = Population::from_points([(0.5, 0.5)], 0.0);
    let err = resolve_general(&mut pop, &spec, 0, 0.5, || 0.5).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn logistic_matches_general_per_event() {
    let mut def = clustering_def();
    def.n_scale = 2.0;
    let spec = ModelSpec::new(def).unwrap();
    let pop = Population::from_points(
        [(0.1, 0.2), (0.3, 0.25), (0.35, 0.3), (0.6, 0.5), (0.9, 0.8)],
        0.0,
    );
    let trials = 100_000;
    let exact = exact_event_law(&pop, &spec).unwrap();
    let gen = event_law(&pop, &spec, EngineMode::General, trials, 11).unwrap();
    let log = event_law(&pop, &spec, EngineMode::LogisticLiteral, trials, 12).unwrap();
    for k in 0..exact.len() {
        let sd = (exact[k] * (1.0 - exact[k]) / trials as f64).sqrt();
        assert!((gen[k] - log[k]).abs() < 3.0 * sd * 2f64.sqrt() + 1e-12, "cell {k}");
        assert!((gen[k] - exact[k]).abs() < 4.0 * sd + 1e-12, "cell {k}");
        assert!((log[k] - exact[k]).abs() < 4.0 * sd + 1e-12, "cell {k}");
    }
}

#[test]
fn thinned_logistic_matches_literal_in_law() {
    let mut def = clustering_def();
    def.n_scale = 30.0;
    def.birth = RateFn::constant(2.0);
    let spec = ModelSpec::new(def).unwrap();
    let reps = 300;
    let t = 1.0;
    let mut by_mode = Vec::new();
    for mode in [EngineMode::Logistic, EngineMode::LogisticLiteral] {
        let mut sizes = Vec::new();
        for r in 0..reps {
            let pop = Population::from_points((0..10).map(|k| (0.05 + 0.1 * k as f64, 0.5)), 0.0);
            let tr = run(pop, &spec, &opts(t, vec![t], &spec, mode, 1000 + r)).unwrap();
            sizes.push(tr.snapshots[0].individuals.len() as f64);
        }
        by_mode.push(mean_var(&sizes));
    }
    let ((m1, v1), (m2, v2)) = (by_mode[0], by_mode[1]);
    assert!((m1 - m2).abs() < 4.0 * ((v1 + v2) / reps as f64).sqrt(), "{m1} vs {m2}");
}

#[test]
fn runs_are_reproducible_and_snapshots_synchronized() {
    let spec = ModelSpec::new(ModelDef {
        n_scale: 50.0,
        ..clustering_def()
    })
    .unwrap();
    let pop = Population::from_points((0..20).map(|k| (0.05 * k as f64, 0.5)), 0.0);
    let o = opts(2.0, vec![0.0, 0.5, 1.0, 2.0], &spec, EngineMode::Logistic, 7);
    let a = run(pop.clone(), &spec, &o).unwrap();
    let b = run(pop, &spec, &o).unwrap();
    assert_eq!(a.snapshots, b.snapshots);
    for s in &a.snapshots {
        assert!(s.individuals.iter().all(|i| i.t_sync == s.t));
        assert!(s.individuals.iter().all(|i| (0.0..=1.0).contains(&i.x)));
    }
}

#[test]
fn empty_start_gives_empty_snapshots() {
    let spec = ModelSpec::new(unit_def(1.0, 1.0, 1.0, 1.0)).unwrap();
    let tr = run(
        Population::empty(0.0),
        &spec,
        &opts(1.0, vec![0.5, 1.0], &spec, EngineMode::General, 0),
    )
    .unwrap();
    assert_eq!(tr.snapshots.len(), 2);
    assert!(tr.snapshots.iter().all(|s| s.individuals.is_empty()));
    assert_eq!(tr.extinction, Some(0.0));
}

#[test]
fn event_cap_aborts() {
    let spec = ModelSpec::new(unit_def(1.0, 0.0, 0.0, 1.0)).unwrap();
    let mut o = opts(100.0, vec![], &spec, EngineMode::General, 0);
    o.event_cap = 50;
    let err = run(Population::from_points([(0.5, 0.5)], 0.0), &spec, &o).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn event_log_lines_are_consistent() {
    let spec = ModelSpec::new(ModelDef {
        n_scale: 20.0,
        ..clustering_def()
    })
    .unwrap();
    let mut o = opts(1.0, vec![1.0], &spec, EngineMode::LogisticLiteral, 3);
    o.log_events = true;
    let tr = run(Population::from_points([(0.5, 0.5); 10], 0.0), &spec, &o).unwrap();
    let log = tr.event_log.unwrap();
    let net: i64 = log.iter().map(|(_, e)| e.kind.size_change()).sum();
    assert_eq!(10 + net, tr.snapshots[0].individuals.len() as i64);
    for (_, e) in &log {
        assert_eq!(e.partner.is_some(), e.kind == EventKind::CompetitionDeath);
        assert_eq!(e.mutant_trait.is_some(), e.kind == EventKind::MutantBirth);
    }
    assert!(log.windows(2).all(|w| w[0].0 < w[1].0));
}
