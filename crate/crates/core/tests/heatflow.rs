use std::f64::consts::PI;
use std::sync::Arc;

use medflow::domain::SamplerConfig;
use medflow::heatflow::{
    connected_components, dirichlet_energy, heat_step, l2_distance, minimizing_movement, tl2_distance, tv_energy,
    HeatFlow, LaplacianNorm, Measure, Tl2Mode,
};
use medflow::kernels::moments;
use medflow::{Domain, GraphField, KernelSpec, PointCloud};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, seed: u64, r: f64) -> Arc<PointCloud> {
    Arc::new(PointCloud::sample(&Domain::torus(2).unwrap(), &SamplerConfig::iid(n, seed), r).unwrap())
}

fn random_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Regular `m x m` grid at half offsets in the unit square.
fn grid(dom: Domain, m: usize, cell: f64) -> PointCloud {
    let mut xs = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            xs.push((i as f64 + 0.5) / m as f64);
            xs.push((j as f64 + 0.5) / m as f64);
        }
    }
    PointCloud::from_coords(dom, xs, cell).unwrap()
}

#[test]
fn energy_of_a_constant_is_zero() {
    let c = cloud(500, 1, 0.1);
    assert_eq!(dirichlet_energy(&GraphField::new(c, vec![3.5; 500], 0.1).unwrap()), 0.0);
}

#[test]
fn energy_matches_the_double_loop() {
    let (n, r) = (200, 0.15);
    let c = cloud(n, 2, r);
    let u = random_values(n, 2);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c.domain().distance(c.point(i), c.point(j)) <= r {
                s += ((u[i] - u[j]) / r).powi(2);
            }
        }
    }
    let brute = s / (2.0 * n as f64 * n as f64 * r * r * PI);
    let e = dirichlet_energy(&GraphField::new(c, u, r).unwrap());
    assert!((e - brute).abs() <= 1e-12 * brute, "{e} vs {brute}");
}

#[test]
fn sine_energy_is_close_to_the_limit() {
    let r = 0.05;
    let c = cloud(100_000, 3, r);
    let f = GraphField::from_fn(c, r, |x| (2.0 * PI * x[0]).sin()).unwrap();
    let k2 = moments(&KernelSpec::ball(r).unwrap(), 2).unwrap().k2;
    let target = k2 * PI * PI;
    let e = dirichlet_energy(&f);
    assert!((e - target).abs() < 0.1 * target, "{e} vs {target}");
}

#[test]
fn constant_is_a_fixed_point_of_the_heat_step() {
    let c = cloud(800, 4, 0.1);
    let f = heat_step(&GraphField::new(c, vec![-0.75; 800], 0.1).unwrap(), 1e-3).unwrap();
    assert!(f.values().iter().all(|v| (v + 0.75).abs() < 1e-10));
}

#[test]
fn heat_step_matches_a_dense_solve() {
    let (n, r, tau) = (100, 0.2, 5e-3);
    let c = cloud(n, 5, r);
    let u = random_values(n, 5);
    let scale = 2.0 / (n as f64 * r.powi(4) * PI);
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && c.domain().distance(c.point(i), c.point(j)) <= r {
                a[(i, i)] += tau * scale;
                a[(i, j)] -= tau * scale;
            }
        }
    }
    let exact = a.lu().solve(&DVector::from_vec(u.clone())).unwrap();
    let f = heat_step(&GraphField::new(c, u, r).unwrap(), tau).unwrap();
    for (x, y) in f.values().iter().zip(exact.iter()) {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn minimizing_movement_descends() {
    let r = 0.1;
    let c = cloud(1500, 6, r);
    let g = GraphField::new(c, random_values(1500, 6), r).unwrap();
    let tr = minimizing_movement(&g, 1e-3, 0.1).unwrap();
    assert_eq!(tr.states.len(), 101);
    assert!(tr.energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn discrete_flow_stays_near_the_fine_flow() {
    // sup_n d_N(u^n, u(t_n)) <= 6 sqrt(tau E(g)), with a 32x finer run as u
    let r = 0.08;
    let c = cloud(3000, 7, r);
    let g = GraphField::from_fn(c, r, |x| (2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * x[1]).sin()).unwrap();
    let (tau, t_end) = (2e-3, 0.04);
    let coarse = minimizing_movement(&g, tau, t_end).unwrap();
    let fine = minimizing_movement(&g, tau / 32.0, t_end).unwrap();
    let worst =
        (0..coarse.states.len()).map(|k| l2_distance(&coarse.states[k], &fine.states[32 * k])).fold(0.0, f64::max);
    let bound = 6.0 * (tau * dirichlet_energy(&g)).sqrt();
    assert!(worst > 0.0 && worst <= bound, "{worst} vs {bound}");
}

#[test]
fn degree_normalized_walk_keeps_constants() {
    let c = cloud(600, 8, 0.1);
    let flow = HeatFlow::new(&c, 0.1, LaplacianNorm::DegreeNormalized).unwrap();
    let u = flow.step(&vec![2.0; 600], 1e-3).unwrap();
    assert!(u.iter().all(|v| (v - 2.0).abs() < 1e-10));
}

#[test]
fn connectivity_of_dense_and_sparse_graphs() {
    let c = cloud(2000, 9, 0.1);
    assert_eq!(connected_components(&c, 0.1).unwrap(), 1);
    let far = PointCloud::from_coords(Domain::torus(2).unwrap(), vec![0.1, 0.1, 0.6, 0.6], 0.1).unwrap();
    assert_eq!(connected_components(&far, 0.1).unwrap(), 2);
}

#[test]
fn tv_of_zero_is_zero() {
    let c = cloud(500, 10, 0.1);
    assert_eq!(tv_energy(&c, &vec![0.0; 500], 0.5, 0.01).unwrap(), 0.0);
}

#[test]
fn tv_of_a_strip_on_the_torus() {
    let h: f64 = 0.0025;
    let c = grid(Domain::torus(2).unwrap(), 320, h.sqrt());
    let chi: Vec<f64> = (0..c.len()).map(|i| (c.point(i)[0] < 0.5) as u8 as f64).collect();
    let k1 = moments(&KernelSpec::ball(h.sqrt()).unwrap(), 2).unwrap().k1;
    let e = tv_energy(&c, &chi, 0.5, h).unwrap();
    assert!((e - 2.0 * k1).abs() < 0.1 * 2.0 * k1, "{e} vs {}", 2.0 * k1);
}

#[test]
fn tv_of_a_quarter_disk_with_contact_term() {
    let h: f64 = 0.0025;
    let c = grid(Domain::unit_box(2).unwrap(), 320, h.sqrt());
    let chi: Vec<f64> = (0..c.len()).map(|i| (c.point(i)[0].hypot(c.point(i)[1]) < 0.5) as u8 as f64).collect();
    let k1 = moments(&KernelSpec::ball(h.sqrt()).unwrap(), 2).unwrap().k1;
    for alpha in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let s = (alpha / 2.0).sin().powi(2);
        // arc of length pi/4 inside, two segments of length 1/2 on the walls
        let target = k1 * (PI / 4.0 + alpha.cos());
        let e = tv_energy(&c, &chi, s, h).unwrap();
        assert!((e - target).abs() < 0.1 * target, "alpha {alpha}: {e} vs {target}");
    }
}

#[test]
fn tv_contact_term_vanishes_away_from_the_wall() {
    let h: f64 = 0.01;
    let c = grid(Domain::unit_box(2).unwrap(), 60, h.sqrt());
    let chi: Vec<f64> =
        (0..c.len()).map(|i| ((c.point(i)[0] - 0.5).hypot(c.point(i)[1] - 0.5) < 0.2) as u8 as f64).collect();
    let a = tv_energy(&c, &chi, 0.5, h).unwrap();
    let b = tv_energy(&c, &chi, 0.1, h).unwrap();
    assert_eq!(a, b);
    // the interior double sum directly
    let (n, r) = (c.len(), h.sqrt());
    let w = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c.domain().distance(c.point(i), c.point(j)) <= r {
                s += (chi[i] - chi[j]).abs();
            }
        }
    }
    let brute = w * w / (PI * r * r) * s / r;
    assert!((a - brute).abs() <= 1e-12 * brute, "{a} vs {brute}");
}

#[test]
fn tl2_examples() {
    let a = Measure::new(1, vec![0.0], vec![0.0]).unwrap();
    let b = Measure::new(1, vec![1.0], vec![1.0]).unwrap();
    assert!((tl2_distance(&a, &b, Tl2Mode::ExactAssignment).unwrap().distance - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(tl2_distance(&a, &a, Tl2Mode::ExactAssignment).unwrap().distance, 0.0);
    let big = Measure::new(1, vec![0.0; 65], vec![0.0; 65]).unwrap();
    assert!(tl2_distance(&big, &big, Tl2Mode::ExactAssignment).is_err());
    let nm = tl2_distance(&big, &big, Tl2Mode::NearestMatch).unwrap();
    assert!(nm.bound_only && nm.distance == 0.0);
}

fn measure(n: usize, seed: u64) -> Measure<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    let vals = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Measure::new(2, pts, vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn energy_ignores_shifts_and_scales_quadratically(seed in any::<u64>(), c in -1000i32..1000, k in -6i32..6) {
        let r = 0.12;
        let cl = cloud(400, seed, r);
        // dyadic data keeps every difference exact
        let u: Vec<f64> = random_values(400, seed).iter().map(|v| (v * 1024.0).round() / 1024.0).collect();
        let e = dirichlet_energy(&GraphField::new(cl.clone(), u.clone(), r).unwrap());
        let shifted: Vec<f64> = u.iter().map(|v| v + c as f64 / 8.0).collect();
        prop_assert_eq!(dirichlet_energy(&GraphField::new(cl.clone(), shifted, r).unwrap()), e);
        let a = 2f64.powi(k);
        let scaled: Vec<f64> = u.iter().map(|v| a * v).collect();
        prop_assert_eq!(dirichlet_energy(&GraphField::new(cl, scaled, r).unwrap()), a * a * e);
    }

    #[test]
    fn heat_step_contracts(seed in any::<u64>(), tau in 1e-4f64..1e-1) {
        let r = 0.12;
        let cl = cloud(400, seed, r);
        let u = random_values(400, seed);
        let v = random_values(400, seed ^ 1);
        let fu = heat_step(&GraphField::new(cl.clone(), u.clone(), r).unwrap(), tau).unwrap();
        let fv = heat_step(&GraphField::new(cl, v.clone(), r).unwrap(), tau).unwrap();
        prop_assert!(l2_distance(fu.values(), fv.values()) <= l2_distance(&u, &v) + 1e-8);
    }

    #[test]
    fn tl2_is_a_metric(n in 1usize..=16, seed in any::<u64>()) {
        let (a, b, c) = (measure(n, seed), measure(n, seed ^ 1), measure(n, seed ^ 2));
        let d = |x: &Measure<f64>, y: &Measure<f64>| tl2_distance(x, y, Tl2Mode::ExactAssignment).unwrap().distance;
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &b) > 0.0);
        let nm = tl2_distance(&a, &b, Tl2Mode::NearestMatch).unwrap().distance;
        prop_assert!(nm >= d(&a, &b) - 1e-12);
    }
}
