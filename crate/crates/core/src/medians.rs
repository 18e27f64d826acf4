//! Order statistics: discrete, rank-shifted and weighted medians, plus a
//! Monte Carlo estimate of the continuous median over a stencil.

use std::ops::{Add, Mul};

use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Stencil};
use crate::rng::stream_rng;
use crate::scalar::Real;

/// Partitions below this size are finished by insertion sort.
const SMALL: usize = 16;

fn insertion_sort<T: PartialOrd + Copy>(v: &mut [T]) {
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && x < v[j - 1] {
            v[j] = v[j - 1];
            j -= 1;
        }
        v[j] = x;
    }
}

/// Three-way partition around `pivot`. Returns `(lt, gt)` such that
/// `v[..lt] < pivot`, `v[lt..gt] == pivot`, `v[gt..] > pivot`.
fn partition3<T: PartialOrd + Copy>(v: &mut [T], pivot: T) -> (usize, usize) {
    let (mut lt, mut i, mut gt) = (0, 0, v.len());
    while i < gt {
        if v[i] < pivot {
            v.swap(lt, i);
            lt += 1;
            i += 1;
        } else if pivot < v[i] {
            gt -= 1;
            v.swap(i, gt);
        } else {
            i += 1;
        }
    }
    (lt, gt)
}

fn median_of_medians<T: PartialOrd + Copy>(v: &[T]) -> T {
    let mut meds: Vec<T> = v
        .chunks(5)
        .map(|c| {
            let mut g = [c[0]; 5];
            g[..c.len()].copy_from_slice(c);
            insertion_sort(&mut g[..c.len()]);
            g[(c.len() - 1) / 2]
        })
        .collect();
    let mid = (meds.len() - 1) / 2;
    select_nth(&mut meds, mid)
}

/// The `k`-th smallest element (0-based), reordering `v`.
///
/// Random pivots first; after `2 log2 n` unproductive rounds the pivot
/// switches to median of medians, so the worst case stays linear.
pub fn select_nth<T: PartialOrd + Copy>(v: &mut [T], k: usize) -> T {
    assert!(k < v.len(), "select_nth: rank {k} out of range {}", v.len());
    let (mut lo, mut hi) = (0usize, v.len());
    let budget = 2 * (usize::BITS - v.len().leading_zeros()) as usize;
    let mut rounds = 0;
    // xorshift state; fixed so results are reproducible
    let mut s: u64 = 0x9E37_79B9_7F4A_7C15 ^ v.len() as u64;
    loop {
        let len = hi - lo;
        if len <= SMALL {
            insertion_sort(&mut v[lo..hi]);
            return v[k];
        }
        let pivot = if rounds < budget {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            v[lo + (s % len as u64) as usize]
        } else {
            median_of_medians(&v[lo..hi])
        };
        rounds += 1;
        let (lt, gt) = partition3(&mut v[lo..hi], pivot);
        if k < lo + lt {
            hi = lo + lt;
        } else if k >= lo + gt {
            lo += gt;
        } else {
            return pivot;
        }
    }
}

/// One-based rank `ceil(n (1 + p) / 2)` clamped to `[1, n]`.
pub fn p_median_rank(n: usize, p: f64) -> usize {
    let k = (n as f64 * (1.0 + p) / 2.0).ceil();
    (k.max(1.0) as usize).min(n)
}

fn check_p(p: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [-1, 1]")));
    }
    Ok(())
}

/// Lower median: the `ceil(n/2)`-th order statistic.
pub fn discrete_median<T: PartialOrd + Copy>(values: &[T]) -> Result<T> {
    p_median(values, 0.0)
}

/// Smallest `m` with `p <= mean(sign(m - v))`; `p = -1` gives the minimum.
pub fn p_median<T: PartialOrd + Copy>(values: &[T], p: f64) -> Result<T> {
    check_p(p)?;
    if values.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let mut buf = values.to_vec();
    Ok(select_nth(&mut buf, p_median_rank(values.len(), p) - 1))
}

/// In-place variant for scratch buffers on hot paths.
#[inline]
pub fn p_median_in_place<T: PartialOrd + Copy>(buf: &mut [T], p: f64) -> Option<T> {
    if buf.is_empty() {
        return None;
    }
    let k = p_median_rank(buf.len(), p) - 1;
    Some(select_nth(buf, k))
}

/// Smallest `m` with `p * W <= sum_i w_i sign(m - v_i)`, `W = sum w_i`.
///
/// Generic over the weight type so that exact rational weights work.
pub fn weighted_median<T, W>(values: &[T], weights: &[W], p: W) -> Result<T>
where
    T: PartialOrd + Copy,
    W: Copy + PartialOrd + Zero + One + Add<Output = W> + Mul<Output = W>,
{
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter("values and weights differ in length".into()));
    }
    let one = W::one();
    if !(p + one >= W::zero()) || !(p <= one) {
        return Err(Error::InvalidParameter("p outside [-1, 1]".into()));
    }
    if weights.iter().any(|w| !(*w >= W::zero())) {
        return Err(Error::InvalidParameter("negative weight".into()));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut pairs: Vec<(T, W)> = idx.iter().map(|&i| (values[i], weights[i])).collect();
    weighted_median_sorted(&mut pairs, p)
}

/// Same as [`weighted_median`] on `(value, weight)` pairs already sorted by value.
pub fn weighted_median_sorted<T, W>(pairs: &mut [(T, W)], p: W) -> Result<T>
where
    T: PartialOrd + Copy,
    W: Copy + PartialOrd + Zero + One + Add<Output = W> + Mul<Output = W>,
{
    let mut total = W::zero();
    for &(_, w) in pairs.iter() {
        total = total + w;
    }
    if pairs.is_empty() || !(total > W::zero()) {
        return Err(Error::EmptyNeighborhood);
    }
    let target = total + p * total;
    let mut cum = W::zero();
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let mut j = i;
        while j < pairs.len() && !(v < pairs[j].0) {
            cum = cum + pairs[j].1;
            j += 1;
        }
        if cum + cum >= target {
            return Ok(v);
        }
        i = j;
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// How Monte Carlo nodes are placed in the stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McSampling {
    /// Independent uniform nodes.
    Iid,
    /// One uniform node per cell of an area-preserving grid (jittered sampling).
    Stratified,
}

/// Continuous median estimate with a 95% DKW envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McMedian<T> {
    pub median: T,
    pub lower: T,
    pub upper: T,
    pub nodes: usize,
}

/// Empirical median of `phi` over `mc_nodes` i.i.d. uniform points of the
/// stencil around `center`. Radial kernels use uniform points in the support
/// weighted by the profile.
pub fn continuous_median_mc<T: Real, F>(
    phi: F,
    center: &[T],
    spec: &KernelSpec<T>,
    mc_nodes: usize,
    seed: u64,
) -> Result<McMedian<T>>
where
    F: Fn(&[T]) -> T + Sync,
{
    continuous_median_mc_with(phi, center, spec, mc_nodes, seed, McSampling::Iid)
}

/// [`continuous_median_mc`] with a choice of node placement.
pub fn continuous_median_mc_with<T: Real, F>(
    phi: F,
    center: &[T],
    spec: &KernelSpec<T>,
    mc_nodes: usize,
    seed: u64,
    sampling: McSampling,
) -> Result<McMedian<T>>
where
    F: Fn(&[T]) -> T + Sync,
{
    spec.validate()?;
    if mc_nodes == 0 {
        return Err(Error::InvalidParameter("mc_nodes must be positive".into()));
    }
    let d = center.len();
    let kappa = spec.kappa().as_f64();
    let r = spec.outer_radius();
    let nodes = match sampling {
        McSampling::Iid => iid_shell(d, kappa, mc_nodes, seed),
        McSampling::Stratified => stratified_shell(d, kappa, mc_nodes, seed),
    };
    let n = nodes.len() / d;
    let eval = |z: &[f64]| {
        let x: Vec<T> = (0..d).map(|k| center[k] + r * T::lit(z[k])).collect();
        phi(&x)
    };
    if let Stencil::Radial(prof) = &spec.stencil {
        let pairs: Vec<(T, T)> = nodes
            .par_chunks_exact(d)
            .map(|z| {
                let rho = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                (eval(z), prof.eval(T::lit(rho) * prof.support()))
            })
            .collect();
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let m = weighted_median_sorted(&mut pairs, T::zero())?;
        let eps = dkw_radius(n);
        let lo = weighted_median_sorted(&mut pairs, T::lit(-2.0 * eps))?;
        let hi = weighted_median_sorted(&mut pairs, T::lit(2.0 * eps))?;
        return Ok(McMedian { median: m, lower: lo, upper: hi, nodes: n });
    }
    let mut vals: Vec<T> = nodes.par_chunks_exact(d).map(eval).collect();
    let eps = dkw_radius(n);
    let median = select_nth(&mut vals, p_median_rank(n, 0.0) - 1);
    let lower = select_nth(&mut vals, p_median_rank(n, -2.0 * eps) - 1);
    let upper = select_nth(&mut vals, p_median_rank(n, (2.0 * eps).min(1.0)) - 1);
    Ok(McMedian { median, lower, upper, nodes: n })
}

/// DKW radius at 95% confidence.
fn dkw_radius(n: usize) -> f64 {
    ((2.0f64 / 0.05).ln() / (2.0 * n as f64)).sqrt()
}

const CHUNK: usize = 1 << 14;

/// Uniform nodes in the unit shell `kappa < |z| <= 1`.
fn iid_shell(d: usize, kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    let kd = kappa.powi(d as i32);
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut out = Vec::with_capacity(count * d);
            let mut z = vec![0.0; d];
            for _ in 0..count {
                let norm = loop {
                    for v in z.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let s = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if s > 0.0 {
                        break s;
                    }
                };
                let u: f64 = rng.random();
                let rho = (kd + u * (1.0 - kd)).powf(1.0 / d as f64);
                out.extend(z.iter().map(|v| v / norm * rho));
            }
            out
        })
        .collect()
}

/// Jittered nodes. In the plane the grid lives in `(radius^2, angle)`
/// coordinates, which map area-preservingly onto the shell; in higher
/// dimensions a jittered cube grid is clipped to the shell.
fn stratified_shell(d: usize, kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    if d == 2 {
        let m = (n as f64).sqrt().ceil() as usize;
        let k2 = kappa * kappa;
        return (0..m)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let mut out = Vec::with_capacity(2 * m);
                for j in 0..m {
                    let u = (i as f64 + rng.random::<f64>()) / m as f64;
                    let v = (j as f64 + rng.random::<f64>()) / m as f64;
                    let rho = (k2 + u * (1.0 - k2)).sqrt();
                    let th = std::f64::consts::TAU * v;
                    out.push(rho * th.cos());
                    out.push(rho * th.sin());
                }
                out
            })
            .collect();
    }
    let shell = crate::scalar::unit_ball_volume::<f64>(d) * (1.0 - kappa.powi(d as i32));
    let cube = 2f64.powi(d as i32);
    let target = (n as f64 * cube / shell).ceil();
    let m = target.powf(1.0 / d as f64).ceil() as usize;
    let rows = m.pow(d as u32 - 1);
    (0..rows)
        .into_par_iter()
        .flat_map_iter(|row| {
            let mut rng = stream_rng(seed, row as u64);
            let mut out = Vec::new();
            let mut z = vec![0.0; d];
            for j in 0..m {
                let mut rest = row;
                for (k, zk) in z.iter_mut().enumerate() {
                    let cell = if k == 0 {
                        j
                    } else {
                        let c = rest % m;
                        rest /= m;
                        c
                    };
                    *zk = -1.0 + 2.0 * (cell as f64 + rng.random::<f64>()) / m as f64;
                }
                let r2: f64 = z.iter().map(|v| v * v).sum();
                if r2 <= 1.0 && r2 > kappa * kappa {
                    out.extend_from_slice(&z);
                }
            }
            out
        })
        .collect()
}
