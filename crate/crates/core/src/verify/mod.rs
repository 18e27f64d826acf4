//! Reference quantities and measurements: the level set curvature operator,
//! consistency of the continuous median, a front-tracking reference for
//! curve shortening, the DKW statistic, and error metrics.

pub mod contour;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{moments, KernelSpec};
use crate::medians::{continuous_median_mc_with, McSampling};
use crate::rng::stream_rng;
use crate::scalar::Real;

/// Value of the level set curvature operator: a number where the gradient
/// is nonzero, an interval of admissible values where it vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FValue<T> {
    Scalar(T),
    Interval(T, T),
}

impl<T: Real> FValue<T> {
    pub fn contains(&self, x: T, tol: T) -> bool {
        match *self {
            FValue::Scalar(v) => (x - v).abs() <= tol,
            FValue::Interval(a, b) => x >= a - tol && x <= b + tol,
        }
    }

    pub fn scale(&self, c: T) -> Self {
        match *self {
            FValue::Scalar(v) => FValue::Scalar(v * c),
            FValue::Interval(a, b) => FValue::Interval(a * c, b * c),
        }
    }
}

/// `F = tr(H) - n.Hn` with `n = grad/|grad|`; at a critical point the
/// interval `[tr(H) - lambda_max, tr(H) - lambda_min]`. `hess` is row-major.
#[allow(non_snake_case)]
pub fn levelset_F<T: Real>(grad: &[T], hess: &[T]) -> Result<FValue<T>> {
    let d = grad.len();
    if hess.len() != d * d || d == 0 {
        return Err(Error::InvalidParameter("hessian must be d x d".into()));
    }
    let h = |i: usize, j: usize| (hess[i * d + j] + hess[j * d + i]) * T::lit(0.5);
    let trace: T = (0..d).map(|i| h(i, i)).sum();
    let g2: T = grad.iter().map(|g| *g * *g).sum();
    if g2 > T::zero() {
        let mut nhn = T::zero();
        for i in 0..d {
            for j in 0..d {
                nhn += grad[i] * h(i, j) * grad[j];
            }
        }
        return Ok(FValue::Scalar(trace - nhn / g2));
    }
    let sym: Vec<T> = (0..d * d).map(|k| h(k / d, k % d)).collect();
    let eig = symmetric_eigenvalues(&sym, d);
    Ok(FValue::Interval(trace - eig[d - 1], trace - eig[0]))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &[T], d: usize) -> Vec<T> {
    let mut m = a.to_vec();
    let off = |m: &[T]| {
        let mut s = T::zero();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[i * d + j] * m[i * d + j];
                }
            }
        }
        s
    };
    let scale: T = a.iter().map(|x| *x * *x).sum::<T>().max(T::min_positive_value());
    for _ in 0..100 {
        if off(&m) <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut e: Vec<T> = (0..d).map(|i| m[i * d + i]).collect();
    e.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    e
}

/// Normal form `sum a_ij x_i x_j + x_d + sum b_i x_i x_d + b_d x_d^2`
/// (`i, j < d`), with unit gradient `e_d` at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticTestField<T> {
    /// Symmetric `(d-1) x (d-1)`, row-major.
    pub a: Vec<T>,
    /// Length `d - 1`.
    pub b: Vec<T>,
    pub b_d: T,
}

impl<T: Real> QuadraticTestField<T> {
    pub fn dim(&self) -> usize {
        self.b.len() + 1
    }

    pub fn eval(&self, x: &[T]) -> T {
        let m = self.b.len();
        let xd = x[m];
        let mut v = xd + self.b_d * xd * xd;
        for i in 0..m {
            v += self.b[i] * x[i] * xd;
            for j in 0..m {
                v += self.a[i * m + j] * x[i] * x[j];
            }
        }
        v
    }

    /// `F` at the origin: twice the trace of `a`.
    pub fn exact_f(&self) -> T {
        let m = self.b.len();
        T::lit(2.0) * (0..m).map(|i| self.a[i * m + i]).sum::<T>()
    }

    /// Gradient and Hessian at the origin.
    pub fn derivatives(&self) -> (Vec<T>, Vec<T>) {
        let m = self.b.len();
        let d = m + 1;
        let mut g = vec![T::zero(); d];
        g[m] = T::one();
        let mut h = vec![T::zero(); d * d];
        for i in 0..m {
            for j in 0..m {
                h[i * d + j] = self.a[i * m + j] + self.a[j * m + i];
            }
            h[i * d + m] = self.b[i];
            h[m * d + i] = self.b[i];
        }
        h[m * d + m] = T::lit(2.0) * self.b_d;
        (g, h)
    }
}

/// Normalized continuous median `(med - phi(center)) / r^2` with its envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedMedian<T> {
    pub r: T,
    pub value: T,
    /// Half-width of the 95% envelope, same normalization.
    pub envelope: T,
}

pub fn normalized_median<T: Real, F: Fn(&[T]) -> T + Sync>(
    phi: F,
    center: &[T],
    kernel: &KernelSpec<T>,
    mc_nodes: usize,
    seed: u64,
    sampling: McSampling,
) -> Result<NormalizedMedian<T>> {
    let base = phi(center);
    let m = continuous_median_mc_with(&phi, center, kernel, mc_nodes, seed, sampling)?;
    let h = kernel.h();
    Ok(NormalizedMedian {
        r: kernel.radius,
        value: (m.median - base) / h,
        envelope: (m.upper - m.lower) / (T::lit(2.0) * h),
    })
}

/// Measured versus predicted normalized medians over a radius sweep.
#[derive(Clone, Debug)]
pub struct ConsistencyReport<T> {
    pub predicted: T,
    pub rows: Vec<NormalizedMedian<T>>,
    /// The finest radius follows the linear trend of the two coarsest within
    /// twice the envelope.
    pub trend_ok: bool,
}

/// Continuous medians of the normal form at the origin for each radius,
/// compared with `c_A F`.
pub fn measure_consistency<T: Real>(
    field: &QuadraticTestField<T>,
    kernel: &KernelSpec<T>,
    radii: &[T],
    mc_nodes: usize,
    seed: u64,
    sampling: McSampling,
) -> Result<ConsistencyReport<T>> {
    let d = field.dim();
    let c_a = moments(kernel, d)?.c_a;
    let predicted = c_a * field.exact_f();
    let origin = vec![T::zero(); d];
    let mut rows = Vec::with_capacity(radii.len());
    for (k, &r) in radii.iter().enumerate() {
        let spec = KernelSpec { stencil: kernel.stencil.clone(), radius: r };
        rows.push(normalized_median(
            |x| field.eval(x),
            &origin,
            &spec,
            mc_nodes,
            seed.wrapping_add(k as u64),
            sampling,
        )?);
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.r.partial_cmp(&a.r).unwrap_or(std::cmp::Ordering::Equal));
    let trend_ok = if sorted.len() >= 3 {
        let (a, b, f) = (sorted[0], sorted[1], sorted[sorted.len() - 1]);
        let (ea, eb) = (a.value - predicted, b.value - predicted);
        let slope = (ea - eb) / (a.r - b.r);
        let line = eb + slope * (f.r - b.r);
        let tol = T::lit(2.0) * (f.envelope + a.envelope.max(b.envelope));
        ((f.value - predicted) - line).abs() <= tol
    } else {
        true
    };
    Ok(ConsistencyReport { predicted, rows, trend_ok })
}

/// Closed polygon, counter-clockwise, for front tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFront<T> {
    pub vertices: Vec<[T; 2]>,
}

impl<T: Real> CurveFront<T> {
    pub fn new(vertices: Vec<[T; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("a front needs at least three vertices".into()));
        }
        let f = CurveFront { vertices };
        if f.signed_area() < T::zero() {
            let mut v = f.vertices;
            v.reverse();
            return Ok(CurveFront { vertices: v });
        }
        Ok(f)
    }

    pub fn ellipse(center: [T; 2], a: T, b: T, n: usize) -> Result<Self> {
        let v = (0..n)
            .map(|k| {
                let th = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                [center[0] + a * th.cos(), center[1] + b * th.sin()]
            })
            .collect();
        let f = Self::new(v)?;
        Ok(f.resampled())
    }

    pub fn circle(center: [T; 2], r: T, n: usize) -> Result<Self> {
        Self::ellipse(center, r, r, n)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn signed_area(&self) -> T {
        let n = self.vertices.len();
        let mut s = T::zero();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            s += a[0] * b[1] - a[1] * b[0];
        }
        s * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> T {
        self.edges().into_iter().sum()
    }

    fn edges(&self) -> Vec<T> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .collect()
    }

    pub fn min_edge(&self) -> T {
        self.edges().into_iter().fold(T::infinity(), |a, b| a.min(b))
    }

    /// `L^2 / (4 pi A)`, equal to 1 for a circle.
    pub fn isoperimetric_ratio(&self) -> T {
        let l = self.perimeter();
        l * l / (T::lit(4.0) * T::PI() * self.area())
    }

    /// Mean distance of the vertices from their centroid.
    pub fn mean_radius(&self) -> T {
        let n = T::from_usize_lossy(self.vertices.len());
        let cx = self.vertices.iter().map(|v| v[0]).sum::<T>() / n;
        let cy = self.vertices.iter().map(|v| v[1]).sum::<T>() / n;
        self.vertices.iter().map(|v| ((v[0] - cx).powi(2) + (v[1] - cy).powi(2)).sqrt()).sum::<T>() / n
    }

    /// Whether any two non-adjacent edges cross.
    pub fn self_intersects(&self) -> bool {
        let n = self.vertices.len();
        let v = &self.vertices;
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return true;
                }
            }
        }
        false
    }

    /// Same number of vertices, equally spaced in arc length from vertex 0,
    /// by uniform Catmull-Rom interpolation.
    pub fn resampled(&self) -> Self {
        let n = self.vertices.len();
        let e = self.edges();
        let total: T = e.iter().copied().sum();
        let v = &self.vertices;
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        let mut acc = T::zero();
        for k in 0..n {
            let s = total * T::from_usize_lossy(k) / T::from_usize_lossy(n);
            while seg < n - 1 && acc + e[seg] < s {
                acc += e[seg];
                seg += 1;
            }
            let t = if e[seg] > T::zero() { ((s - acc) / e[seg]).max(T::zero()).min(T::one()) } else { T::zero() };
            let p0 = v[(seg + n - 1) % n];
            let p1 = v[seg];
            let p2 = v[(seg + 1) % n];
            let p3 = v[(seg + 2) % n];
            out.push(catmull_rom(p0, p1, p2, p3, t));
        }
        CurveFront { vertices: out }
    }
}

fn catmull_rom<T: Real>(p0: [T; 2], p1: [T; 2], p2: [T; 2], p3: [T; 2], t: T) -> [T; 2] {
    let h = T::lit(0.5);
    let t2 = t * t;
    let t3 = t2 * t;
    let mut out = [T::zero(); 2];
    for k in 0..2 {
        out[k] = h
            * (T::lit(2.0) * p1[k]
                + (p2[k] - p0[k]) * t
                + (T::lit(2.0) * p0[k] - T::lit(5.0) * p1[k] + T::lit(4.0) * p2[k] - p3[k]) * t2
                + (T::lit(3.0) * p1[k] - p0[k] - T::lit(3.0) * p2[k] + p3[k]) * t3);
    }
    out
}

fn segments_cross<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2], d: [T; 2]) -> bool {
    let orient = |p: [T; 2], q: [T; 2], r: [T; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    (o1 > T::zero()) != (o2 > T::zero()) && (o3 > T::zero()) != (o4 > T::zero()) && o1 != T::zero() && o2 != T::zero()
}

/// One explicit curve-shortening step: each vertex moves toward the center of
/// the circle through it and its two neighbors by `dt / R`, then the polygon
/// is resampled. Requires `dt <= 0.1 * min_edge^2`.
pub fn front_tracking_step<T: Real>(front: &CurveFront<T>, dt: T) -> Result<CurveFront<T>> {
    let h = front.min_edge();
    if !(dt > T::zero()) || dt > T::lit(0.1) * h * h {
        return Err(Error::InvalidParameter(format!("dt {dt} exceeds 0.1 * min_edge^2 = {}", T::lit(0.1) * h * h)));
    }
    let v = &front.vertices;
    let n = v.len();
    let moved: Vec<[T; 2]> = (0..n)
        .map(|i| {
            let (a, b, c) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
            // curvature vector of the circumcircle: (center - b) / R^2
            let (ax, ay) = (a[0] - b[0], a[1] - b[1]);
            let (cx, cy) = (c[0] - b[0], c[1] - b[1]);
            let det = T::lit(2.0) * (ax * cy - ay * cx);
            if det == T::zero() {
                return b;
            }
            let a2 = ax * ax + ay * ay;
            let c2 = cx * cx + cy * cy;
            let ux = (cy * a2 - ay * c2) / det;
            let uy = (ax * c2 - cx * a2) / det;
            let r2 = ux * ux + uy * uy;
            [b[0] + dt * ux / r2, b[1] + dt * uy / r2]
        })
        .collect();
    let next = CurveFront { vertices: moved };
    if next.signed_area() <= T::zero() || next.self_intersects() {
        return Err(Error::TopologyChange { step: 0 });
    }
    Ok(next.resampled())
}

/// Runs `steps` front-tracking steps, reporting the failing step on a topology change.
pub fn front_tracking<T: Real>(front: &CurveFront<T>, dt: T, steps: usize) -> Result<CurveFront<T>> {
    let mut f = front.clone();
    for k in 0..steps {
        f = front_tracking_step(&f, dt).map_err(|e| match e {
            Error::TopologyChange { .. } => Error::TopologyChange { step: k },
            other => other,
        })?;
    }
    Ok(f)
}

/// One-dimensional law with a known distribution function.
pub trait Distribution1d: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64;
    fn cdf(&self, x: f64) -> f64;
}

/// Uniform law on `[0, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Uniform01;

impl Distribution1d for Uniform01 {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random()
    }

    fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DkwReport {
    /// `2 exp(-2 N eps^2)`.
    pub bound: f64,
    /// Fraction of trials with `sup |F_N - F| > eps`.
    pub violation_rate: f64,
    /// Binomial standard deviation of the rate at the bound.
    pub sigma: f64,
    pub trials: usize,
    /// The bound is at least 1, so there is nothing to test.
    pub vacuous: bool,
    pub pass: bool,
}

/// Kolmogorov statistic `sup |F_N - F|` of a sample.
pub fn ks_statistic<D: Distribution1d>(dist: &D, xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = xs.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = dist.cdf(x);
        dmax = dmax.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    dmax
}

/// Repeats `trials` samples of size `n` and checks that the rate of
/// deviations beyond `eps` stays within the DKW bound plus three sigma.
pub fn dkw_envelope_test<D: Distribution1d>(dist: &D, n: usize, eps: f64, trials: usize, seed: u64) -> DkwReport {
    let bound = 2.0 * (-2.0 * n as f64 * eps * eps).exp();
    let sigma = (bound.min(1.0) * (1.0 - bound.min(1.0)) / trials as f64).sqrt();
    if bound >= 1.0 || n == 0 || trials == 0 {
        return DkwReport { bound, violation_rate: 0.0, sigma, trials, vacuous: true, pass: true };
    }
    let violations: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let mut xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            (ks_statistic(dist, &mut xs) > eps) as usize
        })
        .sum();
    let rate = violations as f64 / trials as f64;
    DkwReport { bound, violation_rate: rate, sigma, trials, vacuous: false, pass: rate <= bound + 3.0 * sigma }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics<T> {
    pub sup: T,
    /// Root mean square over the common probes.
    pub l2: T,
}

/// Sup and root-mean-square differences of two fields on the same probes.
pub fn error_metrics<T: Real>(a: &[T], b: &[T]) -> Result<ErrorMetrics<T>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter("fields must share a nonempty probe set".into()));
    }
    let diffs: Vec<T> = a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).collect();
    let sup = a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), |m, v| m.max(v));
    let l2 = (crate::scalar::pairwise_sum(&diffs) / T::from_usize_lossy(a.len())).sqrt();
    Ok(ErrorMetrics { sup, l2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_examples() {
        let f = levelset_F(&[0.0, 1.0], &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, FValue::Scalar(2.0));
        let f = levelset_F(&[0.0, 0.0], &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, FValue::Interval(0.0, 2.0));
        // gradient along the only curved direction: no curvature of the level set
        let f = levelset_F(&[1.0, 0.0], &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f, FValue::Scalar(0.0));
    }

    #[test]
    fn shrinking_circle_front() {
        let r0: f64 = 0.3;
        let mut f = CurveFront::circle([0.5, 0.5], r0, 64).unwrap();
        let dt = 1e-5;
        for _ in 0..2000 {
            f = front_tracking_step(&f, dt).unwrap();
        }
        let exact = (r0 * r0 - 2.0 * 2000.0 * dt).sqrt();
        assert!((f.mean_radius() - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn dkw_vacuous_when_bound_exceeds_one() {
        let rep = dkw_envelope_test(&Uniform01, 10, 0.05, 20, 1);
        assert!(rep.vacuous && rep.pass);
        let rep = dkw_envelope_test(&Uniform01, 100, 1.0, 50, 1);
        assert_eq!(rep.violation_rate, 0.0);
    }
}
