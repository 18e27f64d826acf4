use std::f64::consts::PI;
use std::sync::Arc;

use medflow::domain::{SamplerConfig, Sdf};
use medflow::evolution::{contact_angle, run, threshold, Evolver, Mode, SslConfig};
use medflow::{Domain, EvolutionConfig, KernelSpec, LevelSetField, PointCloud};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus_cloud(n: usize, seed: u64, cell: f64) -> Arc<PointCloud> {
    Arc::new(PointCloud::sample(&Domain::torus(2).unwrap(), &SamplerConfig::iid(n, seed), cell).unwrap())
}

fn box_cloud(n: usize, seed: u64, cell: f64) -> Arc<PointCloud> {
    Arc::new(PointCloud::sample(&Domain::unit_box(2).unwrap(), &SamplerConfig::iid(n, seed), cell).unwrap())
}

fn random_field(cloud: &Arc<PointCloud>, seed: u64) -> LevelSetField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..cloud.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    LevelSetField::new(cloud.clone(), v).unwrap()
}

fn with_values(f: &LevelSetField, v: Vec<f64>) -> LevelSetField {
    LevelSetField::new(f.cloud().clone(), v).unwrap()
}

fn evolver(cloud: &Arc<PointCloud>, kernel: KernelSpec, mode: Mode<f64>) -> Evolver<f64> {
    Evolver::new(cloud.clone(), EvolutionConfig::new(kernel, mode, 1.0).unwrap()).unwrap()
}

fn kernels() -> Vec<KernelSpec> {
    vec![KernelSpec::ball(0.12).unwrap(), KernelSpec::annulus(0.6, 0.12).unwrap()]
}

#[test]
fn constant_field_is_fixed() {
    let c = torus_cloud(2000, 1, 0.12);
    let g = with_values(&random_field(&c, 0), vec![0.7; c.len()]);
    for k in kernels() {
        let (f, stats) = evolver(&c, k, Mode::LevelSet).step(&g);
        assert_eq!(f.values(), g.values());
        assert_eq!(stats.empty_neighborhoods, 0);
    }
}

#[test]
fn clock_counts_whole_steps() {
    let c = torus_cloud(1000, 2, 0.12);
    let g = random_field(&c, 1);
    let ev = evolver(&c, KernelSpec::annulus(0.9, 0.1).unwrap(), Mode::LevelSet);
    let (f, _) = ev.advance(&g, 7);
    assert_eq!(f.step_count(), 7);
    let c_a = medflow::kernels::moments(&KernelSpec::annulus(0.9, 0.1).unwrap(), 2).unwrap().c_a;
    assert!((f.physical_time() - 7.0 * c_a * 0.01).abs() < 1e-15);
    let cfg = EvolutionConfig::new(KernelSpec::ball(0.1).unwrap(), Mode::LevelSet, 0.9 / 600.0).unwrap();
    assert_eq!(run(&g, &cfg, &[]).unwrap().final_field.step_count(), 0);
}

#[test]
fn isolated_point_keeps_its_value() {
    let dom = Domain::unit_box(2).unwrap();
    let c = Arc::new(PointCloud::from_coords(dom, vec![0.1, 0.1, 0.12, 0.1, 0.9, 0.9], 0.1).unwrap());
    let g = LevelSetField::new(c.clone(), vec![1.0, 2.0, 3.0]).unwrap();
    let ev = evolver(&c, KernelSpec::annulus(0.5, 0.1).unwrap(), Mode::LevelSet);
    let (f, stats) = ev.step(&g);
    assert_eq!(f.values()[2], 3.0);
    assert_eq!(stats.empty_neighborhoods, 3);
}

#[test]
fn hard_labels_are_restored() {
    let c = torus_cloud(1500, 3, 0.1);
    let g = random_field(&c, 4);
    let labels = vec![(0, 5.0), (10, -5.0)];
    let ssl = SslConfig { labels: labels.clone(), zeta: 10.0, r0: 0.05, big_r: 0.3, exponent: 1.0, hard_labels: true };
    let ev = evolver(&c, KernelSpec::ball(0.1).unwrap(), Mode::Ssl(ssl));
    let (f, _) = ev.advance(&g, 3);
    for (i, v) in labels {
        assert_eq!(f.values()[i], v);
    }
}

#[test]
fn young_angle_rejects_the_torus_and_bad_angles() {
    let c = torus_cloud(100, 5, 0.1);
    let cfg = EvolutionConfig::new(KernelSpec::ball(0.1).unwrap(), Mode::YoungAngle { alpha: 1.0 }, 1.0).unwrap();
    assert!(Evolver::new(c, cfg).is_err());
    assert!(EvolutionConfig::new(KernelSpec::ball(0.1).unwrap(), Mode::YoungAngle { alpha: 4.0 }, 1.0).is_err());
}

#[test]
fn threshold_conventions() {
    let c = torus_cloud(301, 6, 0.1);
    let g = with_values(&random_field(&c, 0), vec![0.25; c.len()]);
    assert!(threshold(&g, 0.25).iter().all(|&b| b));
    for n in [300usize, 301] {
        let c = torus_cloud(n, 7, 0.1);
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let m = medflow::medians::discrete_median(&v).unwrap();
        let mask = threshold(&LevelSetField::new(c, v.clone()).unwrap(), m);
        // the lower median is the ceil(n/2)-th value, so ceil(n/2) - 1 lie strictly below it
        assert_eq!(v.iter().filter(|&&x| x <= m).count(), n.div_ceil(2));
        assert_eq!(mask.iter().filter(|&&b| !b).count(), n.div_ceil(2) - 1);
    }
}

#[test]
fn incremental_matches_full_for_young_angle() {
    let c = box_cloud(5000, 8, 0.1);
    let half_disk = |x: &[f64]| if (x[0] - 0.5).hypot(x[1]) < 0.3 { 0.0 } else { 1.0 };
    let smooth = |x: &[f64]| (x[0] - 0.5).hypot(x[1]) - 0.3;
    for (alpha, f0) in [(PI / 3.0, half_disk as fn(&[f64]) -> f64), (2.0 * PI / 3.0, half_disk), (1.0, smooth)] {
        let g = LevelSetField::from_fn(c.clone(), f0).unwrap();
        let ev = evolver(&c, KernelSpec::ball(0.1).unwrap(), Mode::YoungAngle { alpha });
        let mut full = g.clone();
        for _ in 0..10 {
            full = ev.step(&full).0;
        }
        let (inc, _) = ev.advance(&g, 10);
        assert_eq!(inc.values(), full.values(), "alpha = {alpha}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let c = box_cloud(6000, 9, 0.08);
    let g = LevelSetField::from_fn(c.clone(), |x| (x[0] - 0.4).hypot(x[1] - 0.5) + 0.1 * x[1]).unwrap();
    let modes = [Mode::LevelSet, Mode::Mbo { threshold: 0.25 }, Mode::YoungAngle { alpha: 2.0 }];
    for mode in modes {
        let ev = evolver(&c, KernelSpec::annulus(0.5, 0.08).unwrap(), mode);
        let reference = ev.advance(&g, 6).0;
        for threads in 1..=4 {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let f = pool.install(|| ev.advance(&g, 6).0);
            assert_eq!(f.values(), reference.values(), "{threads} threads");
        }
    }
}

/// Circular cap over the bottom wall: the circle of radius `rad` centered at
/// `(0.5, -rad cos(theta))` meets the wall at angle `theta` inside the cap.
fn cap_field(c: &Arc<PointCloud>, theta: f64, rad: f64) -> LevelSetField {
    let y0 = -rad * theta.cos();
    LevelSetField::from_fn(c.clone(), move |x| (x[0] - 0.5).hypot(x[1] - y0) - rad).unwrap()
}

#[test]
fn contact_angle_of_synthetic_caps() {
    let c = box_cloud(40_000, 10, 0.05);
    for rad in [0.25, 0.35] {
        for deg in [45.0f64, 60.0, 90.0, 120.0, 150.0] {
            let f = cap_field(&c, deg.to_radians(), rad);
            let a = contact_angle(&f, 0.0, 0.05).unwrap();
            assert_eq!(a.len(), 2, "{deg}: {a:?}");
            for x in a {
                assert!((x.to_degrees() - deg).abs() < 3.0, "{rad} {deg}: {}", x.to_degrees());
            }
        }
    }
}

#[test]
fn contact_angle_needs_a_bounded_planar_domain() {
    let c = torus_cloud(500, 11, 0.1);
    let f = random_field(&c, 1);
    assert!(contact_angle(&f, 0.0, 0.1).is_err());
}

#[test]
fn carved_domain_wall_is_found() {
    // disk obstacle; the line x = 0.5 meets it at a right angle
    let sdf: Sdf<f64> = Arc::new(|x: &[f64]| 0.2 - (x[0] - 0.5).hypot(x[1] - 0.5));
    let dom = Domain::carved(vec![0.0, 0.0], vec![1.0, 1.0], sdf).unwrap();
    let c = Arc::new(PointCloud::sample(&dom, &SamplerConfig::iid(40_000, 12), 0.05).unwrap());
    let f = LevelSetField::from_fn(c, |x| x[0] - 0.5).unwrap();
    let a = contact_angle(&f, 0.0, 0.05).unwrap();
    assert_eq!(a.len(), 4, "{a:?}");
    for x in a {
        assert!((x.to_degrees() - 90.0).abs() < 3.0, "{}", x.to_degrees());
    }
}

fn pair(n: usize, seed: u64) -> (Arc<PointCloud>, Vec<f64>, Vec<f64>) {
    let c = torus_cloud(n, seed, 0.12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = u.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect();
    (c, u, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sup_norm_contraction(seed in any::<u64>(), annulus in any::<bool>()) {
        let (c, u, v) = pair(400, seed);
        let k = if annulus { KernelSpec::annulus(0.6, 0.12).unwrap() } else { KernelSpec::ball(0.12).unwrap() };
        let ev = evolver(&c, k, Mode::LevelSet);
        let fu = ev.step(&LevelSetField::new(c.clone(), u.clone()).unwrap()).0;
        let fv = ev.step(&LevelSetField::new(c.clone(), v.clone()).unwrap()).0;
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(sup(fu.values(), fv.values()) <= sup(&u, &v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn comparison_principle(seed in any::<u64>(), young in any::<bool>()) {
        let c = box_cloud(500, seed, 0.12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.random_range(0.0..0.2)).collect();
        let mode = if young { Mode::YoungAngle { alpha: rng.random_range(0.0..PI) } } else { Mode::LevelSet };
        let ev = evolver(&c, KernelSpec::ball(0.12).unwrap(), mode);
        let fu = ev.advance(&LevelSetField::new(c.clone(), u).unwrap(), 3).0;
        let fv = ev.advance(&LevelSetField::new(c.clone(), v).unwrap(), 3).0;
        prop_assert!(fu.values().iter().zip(fv.values()).all(|(a, b)| a <= b));
    }

    #[test]
    fn relabeling_commutes_with_a_step(seed in any::<u64>(), a in 1e-3f64..1e3, shift in -1e3f64..1e3, annulus in any::<bool>()) {
        let c = torus_cloud(500, seed, 0.12);
        let g = random_field(&c, seed);
        let k = if annulus { KernelSpec::annulus(0.6, 0.12).unwrap() } else { KernelSpec::ball(0.12).unwrap() };
        let ev = evolver(&c, k, Mode::LevelSet);
        let lhs = ev.step(&with_values(&g, g.values().iter().map(|x| a * x + shift).collect())).0;
        let rhs: Vec<f64> = ev.step(&g).0.values().iter().map(|x| a * x + shift).collect();
        prop_assert_eq!(lhs.values(), &rhs[..]);
    }

    #[test]
    fn threshold_commutes_with_a_step(seed in any::<u64>(), qi in any::<prop::sample::Index>(), annulus in any::<bool>()) {
        let c = torus_cloud(500, seed, 0.12);
        let g = random_field(&c, seed);
        let q = g.values()[qi.index(g.len())];
        let k = if annulus { KernelSpec::annulus(0.6, 0.12).unwrap() } else { KernelSpec::ball(0.12).unwrap() };
        let ev = evolver(&c, k, Mode::LevelSet);
        let chi: Vec<f64> = threshold(&g, q).iter().map(|&b| b as u8 as f64).collect();
        let lhs = threshold(&ev.step(&g).0, q);
        let rhs: Vec<bool> = ev.step(&with_values(&g, chi)).0.values().iter().map(|&x| x == 1.0).collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn values_stay_in_range(seed in any::<u64>(), alpha in 0.0f64..PI) {
        let c = box_cloud(500, seed, 0.12);
        let g = random_field(&c, seed);
        let (lo, hi) = (g.min(), g.max());
        for mode in [Mode::LevelSet, Mode::YoungAngle { alpha }] {
            let f = evolver(&c, KernelSpec::ball(0.12).unwrap(), mode).step(&g).0;
            prop_assert!(f.values().iter().all(|&x| lo <= x && x <= hi));
        }
    }
}
