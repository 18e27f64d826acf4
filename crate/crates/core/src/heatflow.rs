//! Graph Dirichlet energy and its implicit-Euler gradient flow, the nonlocal
//! perimeter energy, and the TL2 transport distance.

use std::ops::{Add, Sub};
use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::domain::{PointCloud, StencilQuadrature};
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, unit_ball_volume, Real};

/// Function on a point cloud together with the graph connection radius.
#[derive(Clone, Debug)]
pub struct GraphField<T: Real> {
    cloud: Arc<PointCloud<T>>,
    values: Vec<T>,
    radius: T,
}

impl<T: Real> GraphField<T> {
    pub fn new(cloud: Arc<PointCloud<T>>, values: Vec<T>, radius: T) -> Result<Self> {
        if values.len() != cloud.len() {
            return Err(Error::InvalidParameter("one value per point required".into()));
        }
        if !(radius > T::zero()) || radius > cloud.max_radius() {
            return Err(Error::IndexMisconfiguration { radius: radius.as_f64(), cell: cloud.max_radius().as_f64() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value".into()));
        }
        Ok(GraphField { cloud, values, radius })
    }

    pub fn from_fn<F: Fn(&[T]) -> T + Sync>(cloud: Arc<PointCloud<T>>, radius: T, f: F) -> Result<Self> {
        let v = (0..cloud.len()).into_par_iter().map(|i| f(cloud.point(i))).collect();
        Self::new(cloud, v, radius)
    }

    pub fn cloud(&self) -> &Arc<PointCloud<T>> {
        &self.cloud
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn with_values(&self, values: Vec<T>) -> Self {
        GraphField { cloud: self.cloud.clone(), values, radius: self.radius }
    }
}

/// Number of connected components of the radius graph.
pub fn connected_components<T: Real>(cloud: &PointCloud<T>, r: T) -> Result<usize> {
    let n = cloud.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        let mut nb = Vec::new();
        cloud.try_for_each_neighbor(cloud.point(i), T::zero(), r, |j, _| nb.push(j))?;
        for j in nb {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    Ok((0..n).filter(|&i| find(&mut parent, i) == i).count())
}

/// `E = (1/2N) sum_x (1/(N r^d omega_d)) sum_{|y-x|<=r} ((u(x)-u(y))/r)^2`.
pub fn dirichlet_energy<T: Real>(f: &GraphField<T>) -> T {
    let cloud = &f.cloud;
    let (n, d, r) = (cloud.len(), cloud.dim(), f.radius);
    let u = &f.values;
    let per: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = T::zero();
            cloud.for_each_neighbor(cloud.point(i), T::zero(), r, |j, _| {
                let du = u[i] - u[j];
                s += du * du;
            });
            s
        })
        .collect();
    let nn = T::from_usize_lossy(n);
    pairwise_sum(&per) / (T::lit(2.0) * nn * nn * r.powi(d as i32 + 2) * unit_ball_volume::<T>(d))
}

/// `d_N(u, v) = sqrt((1/N) sum |u - v|^2)`.
pub fn l2_distance<T: Real>(u: &[T], v: &[T]) -> T {
    let sq: Vec<T> = u.iter().zip(v).map(|(a, b)| (*a - *b) * (*a - *b)).collect();
    (pairwise_sum(&sq) / T::from_usize_lossy(u.len().max(1))).sqrt()
}

/// Scaling of the graph Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LaplacianNorm {
    /// `L u(x) = (2 / (N r^{d+2} omega_d)) sum_y (u(x) - u(y))`, the gradient
    /// of the energy in the `d_N` metric.
    #[default]
    Standard,
    /// `L u(x) = (2 / r^2) (u(x) - mean of u over the neighbors of x)`.
    DegreeNormalized,
}

/// Radius graph in CSR form with a prepared implicit-Euler solver.
pub struct HeatFlow<T: Real> {
    n: usize,
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
    degree: Vec<T>,
    scale: T,
    norm: LaplacianNorm,
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> HeatFlow<T> {
    pub fn new(cloud: &PointCloud<T>, r: T, norm: LaplacianNorm) -> Result<Self> {
        if r > cloud.max_radius() {
            return Err(Error::IndexMisconfiguration { radius: r.as_f64(), cell: cloud.max_radius().as_f64() });
        }
        let n = cloud.len();
        let lists: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut v = Vec::new();
                cloud.for_each_neighbor(cloud.point(i), T::zero(), r, |j, _| {
                    if j != i {
                        v.push(j as u32);
                    }
                });
                v.sort_unstable();
                v
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for l in &lists {
            offsets.push(offsets.last().unwrap() + l.len());
        }
        let degree = lists.iter().map(|l| T::from_usize_lossy(l.len())).collect();
        let nbrs = lists.concat();
        let d = cloud.dim();
        let scale = match norm {
            LaplacianNorm::Standard => {
                T::lit(2.0) / (T::from_usize_lossy(n) * r.powi(d as i32 + 2) * unit_ball_volume::<T>(d))
            }
            LaplacianNorm::DegreeNormalized => T::lit(2.0) / (r * r),
        };
        Ok(HeatFlow { n, offsets, nbrs, degree, scale, norm, tolerance: T::lit(1e-10), max_iterations: 10_000 })
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.nbrs[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Symmetric positive definite operator `A` of the implicit step.
    fn apply(&self, tau: T, x: &[T], out: &mut [T]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut s = T::zero();
            for &j in self.row(i) {
                s += x[i] - x[j as usize];
            }
            *o = match self.norm {
                LaplacianNorm::Standard => x[i] + tau * self.scale * s,
                LaplacianNorm::DegreeNormalized => self.mass(i) * x[i] + tau * self.scale * s,
            };
        });
    }

    fn mass(&self, i: usize) -> T {
        self.degree[i].max(T::one())
    }

    fn dot(a: &[T], b: &[T]) -> T {
        let p: Vec<T> = a.par_iter().zip(b).map(|(x, y)| *x * *y).collect();
        pairwise_sum(&p)
    }

    /// Solves `(I + tau L) u = u_prev` by conjugate gradients.
    pub fn step(&self, u_prev: &[T], tau: T) -> Result<Vec<T>> {
        if u_prev.len() != self.n {
            return Err(Error::InvalidParameter("length mismatch".into()));
        }
        if !(tau > T::zero()) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        let b: Vec<T> = match self.norm {
            LaplacianNorm::Standard => u_prev.to_vec(),
            LaplacianNorm::DegreeNormalized => (0..self.n).map(|i| self.mass(i) * u_prev[i]).collect(),
        };
        let mut x = u_prev.to_vec();
        let mut ax = vec![T::zero(); self.n];
        self.apply(tau, &x, &mut ax);
        let mut r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        let mut p = r.clone();
        let mut rr = Self::dot(&r, &r);
        let bnorm = Self::dot(&b, &b).sqrt().max(T::min_positive_value());
        let mut ap = vec![T::zero(); self.n];
        for it in 0..self.max_iterations {
            if rr.sqrt() <= self.tolerance * bnorm {
                return Ok(x);
            }
            self.apply(tau, &p, &mut ap);
            let alpha = rr / Self::dot(&p, &ap);
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * *p);
            r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * *a);
            let rr_new = Self::dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut().zip(&r).for_each(|(p, r)| *p = *r + beta * *p);
            if !rr.is_finite() {
                return Err(Error::SolverFailure { iterations: it, residual: rr.as_f64() });
            }
        }
        Err(Error::SolverFailure { iterations: self.max_iterations, residual: (rr.sqrt() / bnorm).as_f64() })
    }
}

/// One implicit Euler step of the graph heat flow.
pub fn heat_step<T: Real>(f: &GraphField<T>, tau: T) -> Result<GraphField<T>> {
    let flow = HeatFlow::new(&f.cloud, f.radius, LaplacianNorm::Standard)?;
    Ok(f.with_values(flow.step(&f.values, tau)?))
}

/// States and energies of a minimizing movement run.
#[derive(Clone, Debug)]
pub struct HeatTrajectory<T> {
    pub tau: T,
    pub times: Vec<T>,
    pub energies: Vec<T>,
    /// One state per time, starting with the initial data.
    pub states: Vec<Vec<T>>,
}

/// Implicit Euler iterates up to time `t_end` (`floor(t_end / tau)` steps).
/// The energy may not increase beyond round-off; an increase is an error.
pub fn minimizing_movement<T: Real>(g: &GraphField<T>, tau: T, t_end: T) -> Result<HeatTrajectory<T>> {
    let flow = HeatFlow::new(&g.cloud, g.radius, LaplacianNorm::Standard)?;
    let steps = ((t_end / tau).as_f64() * (1.0 + 1e-12)).floor() as usize;
    let mut states = vec![g.values.clone()];
    let mut energies = vec![dirichlet_energy(g)];
    let mut times = vec![T::zero()];
    for k in 1..=steps {
        let next = flow.step(states.last().unwrap(), tau)?;
        let e = dirichlet_energy(&g.with_values(next.clone()));
        let prev = *energies.last().unwrap();
        if e > prev + T::lit(1e-9) * energies[0].max(T::min_positive_value()) {
            return Err(Error::EnergyIncrease { step: k, before: prev.as_f64(), after: e.as_f64() });
        }
        energies.push(e);
        states.push(next);
        times.push(T::from_usize_lossy(k) * tau);
    }
    Ok(HeatTrajectory { tau, times, energies, states })
}

/// Nonlocal perimeter energy with contact term, for `chi` on the cloud
/// (values in `[0, 1]`), kernel the normalized indicator of `B_sqrt(h)`:
///
/// `E = (1/sqrt h) [ int_D int_D K |chi(x) - chi(y)| + 2 (1 - 2s) int_D chi frac_out ]`
///
/// where `frac_out(x)` is the kernel mass outside the domain. With `s = 1/2`
/// only the relative perimeter term remains. Integrals are equal-weight sums
/// over the points, so a regular grid gives a quadrature of the continuum energy.
pub fn tv_energy<T: Real>(cloud: &PointCloud<T>, chi: &[T], s: T, h: T) -> Result<T> {
    if chi.len() != cloud.len() {
        return Err(Error::InvalidParameter("one value per point required".into()));
    }
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter("h must be positive".into()));
    }
    let r = h.sqrt();
    if r > cloud.max_radius() {
        return Err(Error::IndexMisconfiguration { radius: r.as_f64(), cell: cloud.max_radius().as_f64() });
    }
    let d = cloud.dim();
    let n = cloud.len();
    let w = cloud.domain().volume() / T::from_usize_lossy(n);
    let k = T::one() / (unit_ball_volume::<T>(d) * r.powi(d as i32));
    let quad = (!cloud.domain().is_torus()).then(|| StencilQuadrature::new(d, 0.0));
    let per: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = cloud.point(i);
            let mut pair = T::zero();
            cloud.for_each_neighbor(x, T::zero(), r, |j, _| pair += (chi[i] - chi[j]).abs());
            let wall = match &quad {
                Some(q) if chi[i] != T::zero() => chi[i].abs() * q.fractions(cloud.domain(), x, r).1,
                _ => T::zero(),
            };
            (pair, wall)
        })
        .collect();
    let pairs: Vec<T> = per.iter().map(|p| p.0).collect();
    let walls: Vec<T> = per.iter().map(|p| p.1).collect();
    let interior = w * w * k * pairwise_sum(&pairs);
    let contact = w * pairwise_sum(&walls);
    Ok((interior + T::lit(2.0) * (T::one() - T::lit(2.0) * s) * contact) / r)
}

/// Cost matrix minimization by the shortest augmenting path method with
/// potentials, `O(n^3)`. `cost` is row-major `n x n`. Returns the column
/// assigned to each row and the total cost.
pub fn hungarian<C>(cost: &[C], n: usize) -> (Vec<usize>, C)
where
    C: Copy + PartialOrd + Zero + Add<Output = C> + Sub<Output = C>,
{
    assert_eq!(cost.len(), n * n, "hungarian: cost must be n x n");
    let a = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    let mut u = vec![C::zero(); n + 1];
    let mut v = vec![C::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<C>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<C> = None;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if minv[j].is_none_or(|m| cur < m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].unwrap();
                if delta.is_none_or(|d| mj < d) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("hungarian: no free column");
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(m) = minv[j] {
                    minv[j] = Some(m - delta);
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    let mut total = C::zero();
    for (i, &j) in assign.iter().enumerate() {
        total = total + cost[i * n + j];
    }
    (assign, total)
}

/// Empirical measure with a function attached: equal mass on each point.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure<T> {
    pub dim: usize,
    /// Flat coordinates, `dim` per point.
    pub points: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Copy> Measure<T> {
    pub fn new(dim: usize, points: Vec<T>, values: Vec<T>) -> Result<Self> {
        if dim == 0 || points.len() != dim * values.len() || values.is_empty() {
            return Err(Error::InvalidParameter("measure needs dim * n coordinates and n > 0 values".into()));
        }
        Ok(Measure { dim, points, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// `|x - y|^2 + |f - g|^2` for every pair, row-major.
pub fn tl2_costs<C>(a: &Measure<C>, b: &Measure<C>) -> Vec<C>
where
    C: Copy + Zero + Add<Output = C> + Sub<Output = C> + std::ops::Mul<Output = C>,
{
    let mut out = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut c = C::zero();
            for (x, y) in a.point(i).iter().zip(b.point(j)) {
                let dx = *x - *y;
                c = c + dx * dx;
            }
            let df = a.values[i] - b.values[j];
            out.push(c + df * df);
        }
    }
    out
}

/// Exact squared TL2 cost summed over the optimal matching (not divided by
/// `n`), in the arithmetic of `C`. Equal sizes, at most 64 points.
pub fn tl2_cost_exact<C>(a: &Measure<C>, b: &Measure<C>) -> Result<(Vec<usize>, C)>
where
    C: Copy + PartialOrd + Zero + Add<Output = C> + Sub<Output = C> + std::ops::Mul<Output = C>,
{
    if a.len() != b.len() || a.dim != b.dim {
        return Err(Error::InvalidParameter("exact assignment needs equal sizes and dimensions".into()));
    }
    if a.len() > 64 {
        return Err(Error::InvalidParameter("exact assignment is limited to 64 points".into()));
    }
    Ok(hungarian(&tl2_costs(a, b), a.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tl2Mode {
    /// Optimal assignment; equal sizes up to 64 points.
    ExactAssignment,
    /// Greedy nearest matching of masses; an upper bound only.
    NearestMatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tl2Result<T> {
    pub distance: T,
    /// The value is an upper bound, not the distance.
    pub bound_only: bool,
}

/// Transport distance between measure-function pairs with ground cost
/// `|x - y|^2 + |f - g|^2`.
pub fn tl2_distance<T: Real>(a: &Measure<T>, b: &Measure<T>, mode: Tl2Mode) -> Result<Tl2Result<T>> {
    if a.dim != b.dim {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    match mode {
        Tl2Mode::ExactAssignment => {
            let (_, total) = tl2_cost_exact(a, b)?;
            Ok(Tl2Result { distance: (total / T::from_usize_lossy(a.len())).sqrt(), bound_only: false })
        }
        Tl2Mode::NearestMatch => {
            // each source spreads mass 1/n over its nearest targets with room left
            let (n, m) = (a.len(), b.len());
            let costs = tl2_costs(a, b);
            let mut room = vec![T::one() / T::from_usize_lossy(m); m];
            let mut total = T::zero();
            for i in 0..n {
                let mut mass = T::one() / T::from_usize_lossy(n);
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&x, &y| {
                    costs[i * m + x].partial_cmp(&costs[i * m + y]).unwrap_or(std::cmp::Ordering::Equal)
                });
                for j in order {
                    if mass <= T::zero() {
                        break;
                    }
                    let take = mass.min(room[j]);
                    if take > T::zero() {
                        total += take * costs[i * m + j];
                        room[j] -= take;
                        mass -= take;
                    }
                }
            }
            Ok(Tl2Result { distance: total.max(T::zero()).sqrt(), bound_only: true })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_pair_distance() {
        let a = Measure::new(1, vec![0.0], vec![0.0]).unwrap();
        let b = Measure::new(1, vec![1.0], vec![1.0]).unwrap();
        let d = tl2_distance(&a, &b, Tl2Mode::ExactAssignment).unwrap();
        assert!((d.distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hungarian_small() {
        let c = [4i64, 1, 3, 2, 0, 5, 3, 2, 2];
        let (assign, total) = hungarian(&c, 3);
        assert_eq!(total, 5);
        assert_eq!(assign, vec![1, 0, 2]);
    }

    #[test]
    fn nearest_match_bounds_exact() {
        let a = Measure::new(1, vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0]).unwrap();
        let b = Measure::new(1, vec![0.5, 1.5, 2.5], vec![1.0, 0.0, 0.0]).unwrap();
        let ex = tl2_distance(&a, &b, Tl2Mode::ExactAssignment).unwrap();
        let nm = tl2_distance(&a, &b, Tl2Mode::NearestMatch).unwrap();
        assert!(nm.bound_only && nm.distance >= ex.distance - 1e-12);
    }
}
