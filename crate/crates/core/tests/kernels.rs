use std::sync::Arc;

use medflow::kernels::{admissible, moments, RadialProfile};
use medflow::KernelSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c_a(kappa: f64, d: usize) -> f64 {
    moments(&KernelSpec::annulus(kappa, 0.1).unwrap(), d).unwrap().c_a
}

#[test]
fn annulus_at_zero_is_the_ball() {
    for d in 2..6 {
        let ball = moments(&KernelSpec::ball(0.1).unwrap(), d).unwrap().c_a;
        assert_eq!(c_a(0.0, d), ball);
        assert!((ball - 1.0 / (2.0 * (d as f64 + 1.0))).abs() < 1e-14);
    }
}

#[test]
fn thin_annulus_approaches_the_sphere_constant() {
    for d in 2..6 {
        let lim = 1.0 / (2.0 * (d as f64 - 1.0));
        assert!((c_a(0.999, d) - lim).abs() < 1e-2, "d = {d}");
    }
}

#[test]
fn annulus_half_in_the_plane() {
    // (1/6) (1 - 1/8) / (1 - 1/2)
    assert!((c_a(0.5, 2) - 0.291_666_666_666_666_7).abs() < 1e-12);
}

#[test]
fn ball_moments_against_monte_carlo() {
    let m = moments(&KernelSpec::ball(1.0).unwrap(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut n, mut s1, mut s2) = (0usize, 0.0, 0.0);
    while n < 1_000_000 {
        let x: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if x[0] * x[0] + x[1] * x[1] <= 1.0 {
            n += 1;
            s1 += x[0].abs();
            s2 += x[0] * x[0];
        }
    }
    assert!((s2 / n as f64 - m.k2).abs() < 5e-4);
    assert!((s1 / n as f64 - m.k1).abs() < 5e-4);
    assert!((m.k2 - 0.25).abs() < 1e-14);
    assert!((m.k1 - 4.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-14);
}

#[test]
fn admissibility_examples() {
    let unit = 1.0 / std::f64::consts::PI;
    assert!(admissible(|r| if r <= 1.0 { unit } else { 0.0 }, 2).admissible);
    let slow = admissible(|r| 1.0 / (1.0 + r), 2);
    assert!(!slow.admissible);
    assert_eq!(slow.failed, Some("finite second moment"));
    assert_eq!(admissible(|r| r, 2).failed.map(|c| c.contains("positive") || c.contains("increasing")), Some(true));
    assert_eq!(admissible(|r| 1.0 + r.min(1.0), 2).failed, Some("non-increasing"));
}

#[test]
fn moments_are_positive_for_every_stencil() {
    let specs = [
        KernelSpec::ball(0.05).unwrap(),
        KernelSpec::annulus(0.9, 0.05).unwrap(),
        KernelSpec::shrinking(0.05).unwrap(),
        KernelSpec::radial(RadialProfile::gaussian(), 0.05).unwrap(),
    ];
    for s in &specs {
        for d in 2..5 {
            let m = moments(s, d).unwrap();
            for v in [m.c_a, m.k1, m.k2] {
                assert!(v > 0.0 && v.is_finite(), "{s:?} d={d}");
            }
        }
    }
}

#[test]
fn bad_kernels_are_rejected() {
    assert!(KernelSpec::annulus(1.0, 0.1).is_err());
    assert!(KernelSpec::annulus(-0.1, 0.1).is_err());
    assert!(KernelSpec::ball(0.0).is_err());
    assert!(moments(&KernelSpec::ball(0.1).unwrap(), 1).is_err());
}

/// Monte Carlo `k2` of a radial profile in `d` dimensions: uniform points in
/// the support ball weighted by the profile. Returns the ratio estimate and
/// its delta-method standard error.
fn k2_mc(p: &RadialProfile<f64>, d: usize, n: usize, seed: u64) -> (f64, f64) {
    let s = p.support();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut w, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    while w.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-s..s)).collect();
        let rho = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho <= s {
            let k = p.eval(rho);
            w.push(k);
            y.push(k * x[0] * x[0]);
        }
    }
    let nf = n as f64;
    let (mw, my) = (w.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let ratio = my / mw;
    let var = w.iter().zip(&y).map(|(a, b)| (b - ratio * a).powi(2)).sum::<f64>() / (nf - 1.0);
    (ratio, (var / nf).sqrt() / mw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn annulus_constant_is_continuous(d in 2usize..5, k in 0.0f64..0.99) {
        let a = c_a(k, d);
        let b = c_a(k + 1e-7, d);
        prop_assert!((a - b).abs() < 1e-5);
    }

    // profiles (1 - (rho/s)^a)^b on [0, s]; admissible for a, b > 0
    #[test]
    fn k2_quadrature_matches_monte_carlo(a in 0.5f64..4.0, b in 0.0f64..3.0, s in 0.5f64..2.0, d in 2usize..4, seed in any::<u64>()) {
        let f = move |rho: f64| (1.0 - (rho / s).powf(a)).max(0.0).powf(b);
        prop_assume!(admissible(f, d).admissible);
        let p = RadialProfile::Func { f: Arc::new(f), support: s };
        let m = moments(&KernelSpec::radial(p.clone(), 1.0).unwrap(), d).unwrap();
        let (est, se) = k2_mc(&p, d, 200_000, seed);
        prop_assert!((est - m.k2).abs() <= 3.0 * se, "quad {} mc {} se {}", m.k2, est, se);
    }
}
