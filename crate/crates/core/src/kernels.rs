//! Stencils and radial kernels, their moments and admissibility checks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{unit_ball_volume, Real};

/// Inner radius ratio as a function of the outer radius.
pub type KappaSchedule<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Radial kernel profile `rho -> K(rho)`, zero beyond its support.
#[derive(Clone)]
pub enum RadialProfile<T: Real> {
    /// Piecewise-linear interpolation of `(rho, K)` samples, sorted by `rho`.
    Table(Vec<(T, T)>),
    /// Closed-form profile truncated at `support`.
    Func { f: Arc<dyn Fn(T) -> T + Send + Sync>, support: T },
}

impl<T: Real> fmt::Debug for RadialProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Table(t) => write!(f, "Table({} samples)", t.len()),
            RadialProfile::Func { support, .. } => write!(f, "Func(support={support})"),
        }
    }
}

impl<T: Real> RadialProfile<T> {
    pub fn table(mut samples: Vec<(T, T)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidKernel("radial table needs at least two samples".into()));
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if samples[0].0 != T::zero() {
            return Err(Error::InvalidKernel("radial table must start at rho = 0".into()));
        }
        if samples.iter().any(|(r, k)| !r.is_finite() || !k.is_finite() || *k < T::zero()) {
            return Err(Error::InvalidKernel("radial table has negative or non-finite entries".into()));
        }
        Ok(RadialProfile::Table(samples))
    }

    /// `exp(-rho^2)` cut at `rho = 4`.
    pub fn gaussian() -> Self {
        RadialProfile::Func { f: Arc::new(|r: T| (-r * r).exp()), support: T::lit(4.0) }
    }

    pub fn support(&self) -> T {
        match self {
            RadialProfile::Table(t) => t[t.len() - 1].0,
            RadialProfile::Func { support, .. } => *support,
        }
    }

    pub fn eval(&self, rho: T) -> T {
        match self {
            RadialProfile::Table(t) => {
                if rho < T::zero() || rho > t[t.len() - 1].0 {
                    return T::zero();
                }
                let j = t.partition_point(|(r, _)| *r <= rho);
                if j == 0 {
                    return t[0].1;
                }
                if j >= t.len() {
                    return t[t.len() - 1].1;
                }
                let (r0, k0) = t[j - 1];
                let (r1, k1) = t[j];
                k0 + (k1 - k0) * (rho - r0) / (r1 - r0)
            }
            RadialProfile::Func { f, support } => {
                if rho > *support {
                    T::zero()
                } else {
                    f(rho)
                }
            }
        }
    }

    /// Break points for piecewise quadrature.
    fn knots(&self) -> Vec<T> {
        match self {
            RadialProfile::Table(t) => t.iter().map(|p| p.0).collect(),
            RadialProfile::Func { support, .. } => {
                let n = 256;
                (0..=n).map(|i| *support * T::from_usize_lossy(i) / T::from_usize_lossy(n)).collect()
            }
        }
    }
}

/// Neighborhood shape of the median step.
#[derive(Clone)]
pub enum Stencil<T: Real> {
    Ball,
    Annulus {
        kappa: T,
    },
    /// Annulus whose inner ratio follows a schedule in the radius.
    ShrinkingAnnulus {
        schedule: KappaSchedule<T>,
    },
    /// Weighted median with weights `K(|x - y| / r)`.
    Radial(RadialProfile<T>),
}

impl<T: Real> fmt::Debug for Stencil<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stencil::Ball => write!(f, "Ball"),
            Stencil::Annulus { kappa } => write!(f, "Annulus(kappa={kappa})"),
            Stencil::ShrinkingAnnulus { .. } => write!(f, "ShrinkingAnnulus"),
            Stencil::Radial(p) => write!(f, "Radial({p:?})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec<T: Real> {
    pub stencil: Stencil<T>,
    pub radius: T,
}

/// Default shrinking schedule `kappa(r) = 1 - sqrt(r)`.
pub fn default_schedule<T: Real>() -> KappaSchedule<T> {
    Arc::new(|r: T| T::one() - r.sqrt())
}

impl<T: Real> KernelSpec<T> {
    pub fn ball(radius: T) -> Result<Self> {
        Self::new(Stencil::Ball, radius)
    }

    pub fn annulus(kappa: T, radius: T) -> Result<Self> {
        Self::new(Stencil::Annulus { kappa }, radius)
    }

    pub fn shrinking(radius: T) -> Result<Self> {
        Self::new(Stencil::ShrinkingAnnulus { schedule: default_schedule() }, radius)
    }

    pub fn radial(profile: RadialProfile<T>, radius: T) -> Result<Self> {
        Self::new(Stencil::Radial(profile), radius)
    }

    pub fn new(stencil: Stencil<T>, radius: T) -> Result<Self> {
        let k = KernelSpec { stencil, radius };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return Err(Error::InvalidKernel("radius must be positive".into()));
        }
        let kappa = self.kappa();
        if !(kappa >= T::zero() && kappa < T::one()) {
            return Err(Error::InvalidKernel(format!("inner ratio {kappa} outside [0, 1)")));
        }
        if let Stencil::Radial(p) = &self.stencil {
            if !(p.eval(T::zero()) > T::zero()) {
                return Err(Error::InvalidKernel("radial profile must be positive at 0".into()));
            }
        }
        Ok(())
    }

    /// Inner radius ratio actually in use.
    pub fn kappa(&self) -> T {
        match &self.stencil {
            Stencil::Ball | Stencil::Radial(_) => T::zero(),
            Stencil::Annulus { kappa } => *kappa,
            Stencil::ShrinkingAnnulus { schedule } => schedule(self.radius),
        }
    }

    pub fn inner_radius(&self) -> T {
        self.kappa() * self.radius
    }

    /// Radius of the neighbor search.
    pub fn outer_radius(&self) -> T {
        match &self.stencil {
            Stencil::Radial(p) => self.radius * p.support(),
            _ => self.radius,
        }
    }

    /// Time step size `h = r^2`.
    pub fn h(&self) -> T {
        self.radius * self.radius
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self.stencil, Stencil::Radial(_))
    }

    /// Unnormalized median weight at distance `dist`.
    #[inline]
    pub fn weight(&self, dist: T) -> T {
        match &self.stencil {
            Stencil::Radial(p) => p.eval(dist / self.radius),
            _ => T::one(),
        }
    }

    /// Profile of the unit-radius kernel (indicator for stencils).
    pub fn profile_at(&self, rho: T) -> T {
        match &self.stencil {
            Stencil::Radial(p) => p.eval(rho),
            _ => {
                if rho <= T::one() && rho >= self.kappa() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Constants of a kernel in dimension `d`, for the kernel normalized to unit mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelMoments<T> {
    /// Time rescaling: one step of size `h` is physical time `c_a * h`.
    pub c_a: T,
    /// First absolute moment in one coordinate.
    pub k1: T,
    /// Second moment in one coordinate.
    pub k2: T,
}

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Gauss-Legendre on `[a, b]` with 8 nodes.
pub(crate) fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..8 {
        s += GL8_W[i] * f(m + h * GL8_X[i]);
    }
    s * h
}

/// `I_m = int_0^inf K(rho) rho^m drho` for each requested `m`.
fn radial_integrals<T: Real>(spec: &KernelSpec<T>, ms: &[i32]) -> Vec<f64> {
    match &spec.stencil {
        Stencil::Radial(p) => {
            let knots: Vec<f64> = p.knots().iter().map(|k| k.as_f64()).collect();
            ms.iter()
                .map(|&m| {
                    let f = |rho: f64| p.eval(T::lit(rho)).as_f64() * rho.powi(m);
                    knots.windows(2).map(|w| gauss8(&f, w[0], w[1])).sum()
                })
                .collect()
        }
        _ => {
            let k = spec.kappa().as_f64();
            ms.iter().map(|&m| (1.0 - k.powi(m + 1)) / (m + 1) as f64).collect()
        }
    }
}

/// Moments of the kernel in dimension `d >= 2`.
pub fn moments<T: Real>(spec: &KernelSpec<T>, d: usize) -> Result<KernelMoments<T>> {
    spec.validate()?;
    if d < 2 {
        return Err(Error::InvalidParameter("dimension must be at least 2".into()));
    }
    let di = d as i32;
    let i = radial_integrals(spec, &[di - 2, di - 1, di, di + 1]);
    let (i_dm2, i_dm1, i_d, i_dp1) = (i[0], i[1], i[2], i[3]);
    let w_dm1: f64 = unit_ball_volume(d - 1);
    let w_d: f64 = unit_ball_volume(d);
    let mass = d as f64 * w_d * i_dm1;
    let k2 = i_dp1 / (d as f64 * i_dm1);
    let k1 = 2.0 * w_dm1 * i_d / mass;
    let c_a = i_d / (2.0 * (d as f64 - 1.0) * i_dm2);
    Ok(KernelMoments { c_a: T::lit(c_a), k1: T::lit(k1), k2: T::lit(k2) })
}

/// Outcome of [`admissible`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Admissibility {
    pub admissible: bool,
    /// Name of the first clause that failed.
    pub failed: Option<&'static str>,
}

/// Checks a radial profile for the conditions under which the nonlocal
/// energies converge: nonnegative, positive and continuous at zero,
/// non-increasing, and a finite `rho^{d+1}` moment.
pub fn admissible<F: Fn(f64) -> f64>(k: F, d: usize) -> Admissibility {
    let fail = |c| Admissibility { admissible: false, failed: Some(c) };
    let k0 = k(0.0);
    if !(k0 > 0.0) || !k0.is_finite() {
        return fail("positive at zero");
    }
    if (k(1e-9) - k0).abs() > 1e-6 * k0 {
        return fail("continuous at zero");
    }
    // monotonicity on a mixed linear/geometric grid
    let mut grid: Vec<f64> = (0..=4000).map(|i| i as f64 * 1e-3).collect();
    grid.extend((1..=400).map(|i| 4.0 * 1.05f64.powi(i)));
    let mut prev = k0;
    for &rho in &grid[1..] {
        let v = k(rho);
        if v < 0.0 || !v.is_finite() {
            return fail("nonnegative");
        }
        if v > prev * (1.0 + 1e-12) + 1e-300 {
            return fail("non-increasing");
        }
        prev = v;
    }
    let f = |rho: f64| k(rho) * rho.powi(d as i32 + 1);
    let mut total = gauss8(&f, 0.0, 1.0);
    let mut last = f64::INFINITY;
    for j in 0..64 {
        let a = 2f64.powi(j);
        let block: f64 = (0..8).map(|s| gauss8(&f, a * (1.0 + s as f64 / 8.0), a * (1.0 + (s + 1) as f64 / 8.0))).sum();
        total += block;
        last = block;
        if j >= 4 && block <= 1e-8 * total {
            break;
        }
    }
    if !(last <= 1e-8 * total) || !total.is_finite() {
        return fail("finite second moment");
    }
    Admissibility { admissible: true, failed: None }
}
