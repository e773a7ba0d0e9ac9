use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatial_ibm::analysis::{cluster_peaks, histogram, Axis, HistNorm};
use spatial_ibm::engine::{run, EngineMode, RunOptions};
use spatial_ibm::model::{
    CompetitionKernel, DeathModel, Domain, InteractionKernel, KernelShape, ModelDef, ModelSpec, MutationDef,
    Normalization, Population, RateFn,
};
use spatial_ibm::pde::DensityGrid;
use spatial_ibm::reflect::{euler_substep, shepp_sample, ReflectConfig};

fn unit() -> Domain {
    Domain::new(0.0, 1.0, 0.0, 1.0).unwrap()
}

fn def(delta: f64, k: f64, mutation: f64) -> ModelDef {
    ModelDef {
        domain: unit(),
        birth: RateFn::PolyDiff {
            coeffs: vec![2.0, 0.0, -20.0],
            cutoff: Some(1.0 / 10f64.sqrt()),
        },
        death: DeathModel::Logistic {
            mu0: RateFn::constant(1.0),
            mu1: RateFn::constant(1.0),
        },
        diffusion: RateFn::constant(0.01),
        drift: RateFn::zero(),
        mutation: MutationDef { rate: mutation, s: 0.05 },
        interaction: InteractionKernel::new(KernelShape::Indicator, delta, Normalization::Constant).unwrap(),
        competition: CompetitionKernel::Const { value: 1.0 },
        n_scale: k,
        c_delta: None,
    }
}

/// Composite Simpson rule on `[a, b]`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_event_changes_size_by_at_most_one(pts in points(), seed in 0u64..1000, k in 1.0..20.0f64) {
        let spec = ModelSpec::new(def(0.3, k, 0.1)).unwrap();
        for mode in [EngineMode::General, EngineMode::Logistic, EngineMode::LogisticLiteral] {
            let mut opts = RunOptions::new(0.5, vec![0.5], ReflectConfig::new(&unit(), 0.01).unwrap(), mode, seed);
            opts.log_events = true;
            let tr = run(Population::from_points(pts.clone(), 0.0), &spec, &opts).unwrap();
            let mut n = pts.len() as i64;
            for (_, e) in tr.event_log.unwrap() {
                prop_assert!(e.kind.size_change().abs() <= 1);
                n += e.kind.size_change();
                prop_assert!(n >= 0);
            }
            prop_assert_eq!(n as usize, tr.final_population.len());
            for ind in &tr.snapshots[0].individuals {
                prop_assert!((0.0..=1.0).contains(&ind.x) && (0.0..=1.0).contains(&ind.u));
            }
        }
    }

    #[test]
    fn boundary_aware_kernel_integrates_to_one(x in 0.0..=1.0f64, delta in 0.01..1.5f64, gaussian in any::<bool>()) {
        let shape = if gaussian { KernelShape::Gaussian } else { KernelShape::Indicator };
        let kern = InteractionKernel::new(shape, delta, Normalization::BoundaryAware).unwrap();
        let d = unit();
        // split at the indicator's jumps and the Gaussian's peak
        let mut cuts = vec![0.0, 1.0, x - delta, x + delta, x];
        cuts.retain(|c| (0.0..=1.0).contains(c));
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            if w[1] - w[0] > 1e-14 {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                total += if gaussian {
                    simpson(|y| kern.eval(&d, x, y), a, b, 2000)
                } else {
                    // constant on each piece; the float cut points may sit a
                    // hair outside the window, so sample the middle
                    (b - a) * kern.eval(&d, x, mid)
                };
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-6, "integral {}", total);
    }

    #[test]
    fn field_is_additive_and_counts_neighbours(a in points(), b in points(), x in 0.0..=1.0f64, u in 0.0..=1.0f64) {
        let spec = ModelSpec::new(def(0.2, 1.0, 0.0)).unwrap();
        let pa = Population::from_points(a.clone(), 0.0);
        let pb = Population::from_points(b.clone(), 0.0);
        let pab = Population::from_points(a.iter().chain(&b).cloned(), 0.0);
        let fa = spec.field_at(&pa.individuals, x, u);
        let fb = spec.field_at(&pb.individuals, x, u);
        let fab = spec.field_at(&pab.individuals, x, u);
        prop_assert!((fab - (fa + fb)).abs() <= 1e-12 * fab.max(1.0));
        let count = pab.individuals.iter().filter(|i| (x - i.x).abs() <= 0.2).count();
        prop_assert!((fab - count as f64 / 0.4).abs() < 1e-9);
    }

    #[test]
    fn logistic_death_is_monotone_in_field(x in 0.0..=1.0f64, u in 0.0..=1.0f64, f1 in 0.0..1e4f64, f2 in 0.0..1e4f64) {
        let spec = ModelSpec::new(def(0.3, 3000.0, 0.1)).unwrap();
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        prop_assert!(spec.death_rate(x, u, lo).unwrap() <= spec.death_rate(x, u, hi).unwrap());
    }

    #[test]
    fn histogram_counts_everyone(pts in points(), nx in 2usize..30, nu in 2usize..30, k in 1.0..100.0f64) {
        let pop = Population::from_points(pts.clone(), 0.0);
        let h = histogram(&pop.individuals, &unit(), nx, nu).unwrap();
        prop_assert_eq!(h.normalization, HistNorm::Counts);
        prop_assert_eq!(h.total(), pts.len() as f64);
        let g = h.to_grid(k, 0.0).unwrap();
        prop_assert!((g.mass() - pts.len() as f64 / k).abs() < 1e-9);
    }

    #[test]
    fn peaks_ignore_uniform_rescaling(pts in prop::collection::vec(0.0..=1.0f64, 1..200), p in -3i32..6) {
        let pop = Population::from_points(pts.iter().map(|&x| (x, 0.5)), 0.0);
        let h = histogram(&pop.individuals, &unit(), 40, 1).unwrap();
        let mut scaled = h.clone();
        let c = 2f64.powi(p);
        scaled.counts.iter_mut().for_each(|v| *v *= c);
        prop_assert_eq!(cluster_peaks(&h, Axis::X, 5, 0.2), cluster_peaks(&scaled, Axis::X, 5, 0.2));
    }

    #[test]
    fn l1_is_homogeneous(seed in 0u64..100, c in 0.1..10.0f64) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DensityGrid::zeros(unit(), 8, 6).unwrap();
        a.values.iter_mut().for_each(|v| *v = rng.random());
        let b = DensityGrid::from_fn(unit(), 8, 6, |x, u| x * u).unwrap();
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        a2.values.iter_mut().for_each(|v| *v *= c);
        b2.values.iter_mut().for_each(|v| *v *= c);
        let l = a.l1_distance(&b).unwrap();
        prop_assert!((a2.l1_distance(&b2).unwrap() - c * l).abs() < 1e-9 * (1.0 + c * l));
        prop_assert_eq!(a.l1_distance(&a).unwrap(), 0.0);
    }

    #[test]
    fn shepp_maximum_dominates_its_endpoints(a in -3.0..3.0f64, b in -3.0..3.0f64, t in 1e-4..4.0f64, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let (bm, sup) = shepp_sample(a, b, t, &mut rng).unwrap();
            prop_assert!(sup >= 0.0 && sup >= a * bm + b * t);
        }
    }

    #[test]
    fn reflected_steps_stay_in_the_domain(x0 in 0.0..=1.0f64, m in 0.0..2.0f64, b in -5.0..5.0f64, h in 1e-4..0.2f64, seed in 0u64..1000) {
        let mut d = def(0.3, 1.0, 0.0);
        d.diffusion = RateFn::constant(m);
        d.drift = RateFn::constant(b);
        let spec = ModelSpec::new(d).unwrap();
        let cfg = ReflectConfig::new(&unit(), h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = x0;
        for _ in 0..200 {
            x = euler_substep(x, 0.5, &spec, &cfg, h, &mut rng).unwrap();
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
