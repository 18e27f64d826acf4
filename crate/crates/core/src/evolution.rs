//! Median-filter time stepping for level set mean curvature flow.
//!
//! One step replaces every value by the median of its neighbors' values,
//! all points at once from the previous state. Variants: thresholding after
//! each step (MBO), rank-shifted medians near the boundary (prescribed
//! contact angle), and label-weighted medians (semi-supervised learning).

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{header_field, parse_header, read_table, write_row, PointCloud, StencilQuadrature};
use crate::error::{Error, Result};
use crate::kernels::{moments, KernelSpec};
use crate::medians::{p_median_in_place, p_median_rank, weighted_median_sorted};
use crate::scalar::Real;
use crate::verify::contour::{self, ProbeGrid};

/// Values of a level set function on a point cloud, with its clock.
#[derive(Clone, Debug)]
pub struct LevelSetField<T: Real> {
    cloud: Arc<PointCloud<T>>,
    values: Vec<T>,
    step_count: u64,
    physical_time: T,
}

impl<T: Real> LevelSetField<T> {
    pub fn new(cloud: Arc<PointCloud<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != cloud.len() {
            return Err(Error::InvalidParameter(format!("{} values for {} points", values.len(), cloud.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite field value".into()));
        }
        Ok(LevelSetField { cloud, values, step_count: 0, physical_time: T::zero() })
    }

    pub fn from_fn<F: Fn(&[T]) -> T + Sync>(cloud: Arc<PointCloud<T>>, f: F) -> Result<Self> {
        let values = (0..cloud.len()).into_par_iter().map(|i| f(cloud.point(i))).collect();
        Self::new(cloud, values)
    }

    pub fn cloud(&self) -> &Arc<PointCloud<T>> {
        &self.cloud
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn physical_time(&self) -> T {
        self.physical_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    fn with_values(&self, values: Vec<T>, steps: u64, dt: T) -> Self {
        LevelSetField {
            cloud: self.cloud.clone(),
            values,
            step_count: steps,
            physical_time: T::from_u64(steps).unwrap_or(T::zero()) * dt,
        }
    }
}

/// Parameters of the label-weighted median.
#[derive(Clone, Debug, PartialEq)]
pub struct SslConfig<T> {
    /// `(point index, label value)`.
    pub labels: Vec<(usize, T)>,
    /// Cap of the weight near labels, `> 1`.
    pub zeta: T,
    /// Length scale of the weight.
    pub r0: T,
    /// Radius beyond which the weight is 1.
    pub big_r: T,
    /// Decay exponent, `> d - 2`.
    pub exponent: T,
    /// Reset labeled points after every step.
    pub hard_labels: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode<T> {
    LevelSet,
    /// Threshold at `threshold` after each median.
    Mbo {
        threshold: T,
    },
    /// Rank-shifted median near the boundary encoding contact angle `alpha` (radians).
    YoungAngle {
        alpha: T,
    },
    Ssl(SslConfig<T>),
}

impl<T> Mode<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::LevelSet => "levelset",
            Mode::Mbo { .. } => "mbo",
            Mode::YoungAngle { .. } => "youngangle",
            Mode::Ssl(_) => "ssl",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig<T: Real> {
    pub kernel: KernelSpec<T>,
    pub mode: Mode<T>,
    /// Physical end time.
    pub final_time: T,
}

impl<T: Real> EvolutionConfig<T> {
    pub fn new(kernel: KernelSpec<T>, mode: Mode<T>, final_time: T) -> Result<Self> {
        let c = EvolutionConfig { kernel, mode, final_time };
        c.kernel.validate()?;
        if !(final_time >= T::zero()) {
            return Err(Error::InvalidParameter("final time must be nonnegative".into()));
        }
        if let Mode::YoungAngle { alpha } = c.mode {
            if !(alpha >= T::zero() && alpha <= T::PI()) {
                return Err(Error::InvalidParameter("contact angle outside [0, pi]".into()));
            }
        }
        Ok(c)
    }

    /// Time step `h = r^2`.
    pub fn h(&self) -> T {
        self.kernel.h()
    }

    /// Physical time advanced by one step, `c_A h`.
    pub fn dt(&self, d: usize) -> Result<T> {
        Ok(moments(&self.kernel, d)?.c_a * self.h())
    }

    /// Number of whole steps that fit in `t`.
    pub fn steps_until(&self, t: T, d: usize) -> Result<u64> {
        let dt = self.dt(d)?;
        let q = (t / dt).as_f64();
        Ok((q * (1.0 + 1e-12)).floor().max(0.0) as u64)
    }

    fn validate_for(&self, cloud: &PointCloud<T>) -> Result<()> {
        if self.kernel.outer_radius() > cloud.max_radius() {
            return Err(Error::IndexMisconfiguration {
                radius: self.kernel.outer_radius().as_f64(),
                cell: cloud.max_radius().as_f64(),
            });
        }
        match &self.mode {
            Mode::YoungAngle { .. } if cloud.domain().is_torus() => {
                Err(Error::InvalidParameter("YoungAngle requires a bounded domain".into()))
            }
            Mode::Ssl(s) => {
                let d = T::from_usize_lossy(cloud.dim());
                if s.labels.is_empty() {
                    return Err(Error::InvalidParameter("ssl needs at least one label".into()));
                }
                if s.labels.iter().any(|(i, v)| *i >= cloud.len() || !v.is_finite()) {
                    return Err(Error::InvalidParameter("ssl label index out of range".into()));
                }
                if !(s.zeta > T::one()) || !(s.r0 > T::zero()) || !(s.r0 < s.big_r) {
                    return Err(Error::InvalidParameter("ssl needs zeta > 1 and 0 < r0 < R".into()));
                }
                if !(s.exponent > d - T::lit(2.0)) {
                    return Err(Error::InvalidParameter("ssl exponent must exceed d - 2".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Counters from one or more steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub steps: u64,
    /// Point updates that found no neighbor and kept their value.
    pub empty_neighborhoods: u64,
}

/// Per-run precomputation: rank shifts, label weights, time step.
pub struct Evolver<T: Real> {
    cloud: Arc<PointCloud<T>>,
    cfg: EvolutionConfig<T>,
    dt: T,
    r_in: T,
    r_out: T,
    /// Rank shift per point (contact angle mode).
    shift: Option<Vec<f64>>,
    /// Label weight per point (ssl mode).
    gamma: Option<Vec<T>>,
}

impl<T: Real> Evolver<T> {
    pub fn new(cloud: Arc<PointCloud<T>>, cfg: EvolutionConfig<T>) -> Result<Self> {
        cfg.validate_for(&cloud)?;
        let d = cloud.dim();
        let dt = cfg.dt(d)?;
        let r_in = cfg.kernel.inner_radius();
        let r_out = cfg.kernel.outer_radius();
        let shift = match cfg.mode {
            Mode::YoungAngle { alpha } => Some(young_shifts(&cloud, &cfg.kernel, alpha)),
            _ => None,
        };
        let gamma = match &cfg.mode {
            Mode::Ssl(s) => Some(label_weights(&cloud, s)),
            _ => None,
        };
        Ok(Evolver { cloud, cfg, dt, r_in, r_out, shift, gamma })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn config(&self) -> &EvolutionConfig<T> {
        &self.cfg
    }

    /// Rank shift `p` at each point, if the mode uses one.
    pub fn shifts(&self) -> Option<&[f64]> {
        self.shift.as_deref()
    }

    fn p_at(&self, i: usize) -> f64 {
        self.shift.as_ref().map_or(0.0, |s| s[i])
    }

    fn mbo_threshold(&self) -> Option<T> {
        match self.cfg.mode {
            Mode::Mbo { threshold } => Some(threshold),
            _ => None,
        }
    }

    /// New value at point `i` from `u`; `None` if the neighborhood is empty.
    fn update_point(&self, i: usize, u: &[T], vals: &mut Vec<T>, pairs: &mut Vec<(T, T)>) -> Option<T> {
        let x = self.cloud.point(i);
        let p = self.p_at(i);
        let weighted = self.cfg.kernel.is_weighted() || self.gamma.is_some();
        let m = if weighted {
            pairs.clear();
            let g_i = self.gamma.as_ref().map(|g| g[i]);
            self.cloud.for_each_neighbor(x, self.r_in, self.r_out, |j, d2| {
                let mut w = self.cfg.kernel.weight(d2.sqrt());
                if let (Some(gi), Some(g)) = (g_i, self.gamma.as_ref()) {
                    w = w * (gi + g[j]) * T::lit(0.5);
                }
                pairs.push((u[j], w));
            });
            pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            weighted_median_sorted(pairs, T::lit(p)).ok()?
        } else {
            vals.clear();
            self.cloud.for_each_neighbor(x, self.r_in, self.r_out, |j, _| vals.push(u[j]));
            p_median_in_place(vals, p)?
        };
        Some(match self.mbo_threshold() {
            Some(q) => indicator(m, q),
            None => m,
        })
    }

    /// Recomputes the listed points (or all), returning `(index, value)` for
    /// those that changed and the number of empty neighborhoods.
    fn sweep(&self, u: &[T], subset: Option<&[u32]>) -> (Vec<(u32, T)>, u64) {
        let work = |i: usize, vals: &mut Vec<T>, pairs: &mut Vec<(T, T)>| -> (Option<(u32, T)>, u64) {
            let (v, empty) = match self.update_point(i, u, vals, pairs) {
                None => (u[i], 1),
                Some(v) => (v, 0),
            };
            let v = self.label_override(i).unwrap_or(v);
            ((v != u[i]).then_some((i as u32, v)), empty)
        };
        let init = || (Vec::with_capacity(256), Vec::with_capacity(256));
        let results: Vec<(Option<(u32, T)>, u64)> = match subset {
            None => (0..u.len()).into_par_iter().map_init(init, |(a, b), i| work(i, a, b)).collect(),
            Some(s) => s.par_iter().map_init(init, |(a, b), &i| work(i as usize, a, b)).collect(),
        };
        let empty = results.iter().map(|r| r.1).sum();
        (results.into_iter().filter_map(|r| r.0).collect(), empty)
    }

    fn label_override(&self, i: usize) -> Option<T> {
        match &self.cfg.mode {
            Mode::Ssl(s) if s.hard_labels => s.labels.iter().find(|(j, _)| *j == i).map(|(_, v)| *v),
            _ => None,
        }
    }

    /// One Jacobi step over all points.
    pub fn step(&self, field: &LevelSetField<T>) -> (LevelSetField<T>, StepStats) {
        let (changes, empty) = self.sweep(&field.values, None);
        let mut v = field.values.clone();
        for (i, x) in changes {
            v[i as usize] = x;
        }
        let next = field.with_values(v, field.step_count + 1, self.dt);
        (next, StepStats { steps: 1, empty_neighborhoods: empty })
    }

    /// Applies `steps` steps. After the first full sweep only points with a
    /// neighbor that changed are recomputed, which gives the same result.
    pub fn advance(&self, field: &LevelSetField<T>, steps: u64) -> (LevelSetField<T>, StepStats) {
        let mut state = Stepper::new(self, field);
        for _ in 0..steps {
            state.step();
        }
        state.finish()
    }

    /// Runs to the configured final time, recording snapshots.
    pub fn run(&self, g: &LevelSetField<T>, opts: &RunOptions<T>) -> Result<Trajectory<T>> {
        let d = self.cloud.dim();
        let total = self.cfg.steps_until(self.cfg.final_time, d)?;
        let mut marks = Vec::with_capacity(opts.snapshot_times.len());
        for &t in &opts.snapshot_times {
            if !(t >= T::zero()) {
                return Err(Error::InvalidParameter("negative snapshot time".into()));
            }
            marks.push(self.cfg.steps_until(t, d)?.min(total));
        }
        let mut order: Vec<usize> = (0..marks.len()).collect();
        order.sort_by_key(|&k| marks[k]);
        let mut snaps: Vec<Option<LevelSetField<T>>> = vec![None; marks.len()];
        let mut state = Stepper::new(self, g);
        let mut next = 0;
        let mut stopped_early = false;
        loop {
            while next < order.len() && marks[order[next]] == state.steps {
                snaps[order[next]] = Some(state.snapshot());
                next += 1;
            }
            if state.steps >= total {
                break;
            }
            if let Some((q, dist)) = opts.stop_near_extremum {
                if state.steps > 0 && level_to_extremum_distance(&state.values, &self.cloud, q) < dist {
                    stopped_early = true;
                    break;
                }
            }
            state.step();
        }
        let (last, stats) = state.finish();
        let snapshots = snaps.into_iter().map(|s| s.unwrap_or_else(|| last.clone())).collect();
        Ok(Trajectory { snapshots, final_field: last, stats, stopped_early })
    }
}

/// Incremental stepping state.
struct Stepper<'a, T: Real> {
    ev: &'a Evolver<T>,
    base: LevelSetField<T>,
    values: Vec<T>,
    steps: u64,
    stats: StepStats,
    /// Points changed in the last step; `None` forces a full sweep.
    changed: Option<Vec<u32>>,
    /// Counting state for indicator fields in MBO mode.
    counts: Option<Counts>,
    mark: Vec<bool>,
    /// Points without neighbors, known after the first full sweep. They never
    /// enter an incremental sweep but still count once per step.
    n_empty: Option<u64>,
    /// Points to re-evaluate from the counts in the next step.
    recount: Vec<u32>,
}

/// Neighbor counts for `{0,1}` fields: `n[i]` neighbors, `ones[i]` of them equal to 1.
struct Counts {
    n: Vec<u32>,
    ones: Vec<u32>,
    rank: Vec<u32>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(ev: &'a Evolver<T>, field: &LevelSetField<T>) -> Self {
        Stepper {
            ev,
            base: field.clone(),
            values: field.values.clone(),
            steps: field.step_count,
            stats: StepStats::default(),
            changed: None,
            counts: None,
            mark: vec![false; field.len()],
            n_empty: None,
            recount: Vec::new(),
        }
    }

    fn snapshot(&self) -> LevelSetField<T> {
        self.base.with_values(self.values.clone(), self.steps, self.ev.dt)
    }

    fn finish(self) -> (LevelSetField<T>, StepStats) {
        (self.base.with_values(self.values, self.steps, self.ev.dt), self.stats)
    }

    fn counting_applies(&self) -> bool {
        match self.ev.cfg.mode {
            Mode::Mbo { threshold } => {
                !self.ev.cfg.kernel.is_weighted() && threshold > T::zero() && threshold <= T::one()
            }
            // the per-point rank carries the contact-angle shift
            Mode::YoungAngle { .. } => !self.ev.cfg.kernel.is_weighted(),
            _ => false,
        }
    }

    fn step(&mut self) {
        let n = self.values.len();
        // indicator input counts from the start; MBO from smooth data is an
        // indicator after one step
        if self.counts.is_none() && self.stats.steps <= 1 && self.counting_applies() {
            self.init_counts();
        }
        let changes = if let Some(c) = self.counts.take() {
            let ch = self.count_sweep(&c);
            self.counts = Some(c);
            ch
        } else {
            let subset = match self.changed.take() {
                Some(ch) if ch.len() <= n / 8 => Some(self.dirty_set(&ch)),
                _ => None,
            };
            let full = subset.is_none();
            let (changes, empty) = self.ev.sweep(&self.values, subset.as_deref());
            if full {
                self.n_empty = Some(empty);
            }
            self.stats.empty_neighborhoods += self.n_empty.unwrap_or(empty);
            changes
        };
        let mut changed = Vec::with_capacity(changes.len());
        for (i, v) in changes {
            self.values[i as usize] = v;
            changed.push(i);
        }
        if let Some(mut c) = self.counts.take() {
            self.apply_flips(&mut c, &changed);
            self.counts = Some(c);
        }
        self.changed = Some(changed);
        self.steps += 1;
        self.stats.steps += 1;
    }

    fn dirty_set(&mut self, changed: &[u32]) -> Vec<u32> {
        let cloud = &self.ev.cloud;
        let mut out = Vec::new();
        for &j in changed {
            cloud.for_each_neighbor(cloud.point(j as usize), self.ev.r_in, self.ev.r_out, |i, _| {
                if !self.mark[i] {
                    self.mark[i] = true;
                    out.push(i as u32);
                }
            });
        }
        for &i in &out {
            self.mark[i as usize] = false;
        }
        out.sort_unstable();
        out
    }

    fn init_counts(&mut self) {
        if !self.values.iter().all(|&v| v == T::zero() || v == T::one()) {
            return;
        }
        let ev = self.ev;
        let u = &self.values;
        let per: Vec<(u32, u32)> = (0..u.len())
            .into_par_iter()
            .map(|i| {
                let (mut n, mut ones) = (0u32, 0u32);
                ev.cloud.for_each_neighbor(ev.cloud.point(i), ev.r_in, ev.r_out, |j, _| {
                    n += 1;
                    if u[j] == T::one() {
                        ones += 1;
                    }
                });
                (n, ones)
            })
            .collect();
        let rank = per
            .iter()
            .enumerate()
            .map(|(i, &(n, _))| if n == 0 { 0 } else { p_median_rank(n as usize, ev.p_at(i)) as u32 })
            .collect();
        self.counts =
            Some(Counts { n: per.iter().map(|p| p.0).collect(), ones: per.iter().map(|p| p.1).collect(), rank });
        // every point must be evaluated once from the counts
        self.changed = None;
    }

    /// Evaluates points whose counts may have changed. The median of a 0/1
    /// list is 1 exactly when fewer than `rank` entries are 0.
    fn count_sweep(&mut self, c: &Counts) -> Vec<(u32, T)> {
        self.stats.empty_neighborhoods += c.n.iter().filter(|&&n| n == 0).count() as u64;
        // points whose counts moved, gathered while applying the last flips
        let dirty = self.changed.take().map(|_| std::mem::take(&mut self.recount));
        let q = self.ev.mbo_threshold().unwrap_or(T::one());
        let values = &self.values;
        let eval = |i: usize| -> Option<(u32, T)> {
            if c.n[i] == 0 {
                return None;
            }
            let zeros = c.n[i] - c.ones[i];
            let m = if zeros < c.rank[i] { T::one() } else { T::zero() };
            let v = indicator(m, q);
            (v != values[i]).then_some((i as u32, v))
        };
        match dirty {
            None => (0..values.len()).into_par_iter().filter_map(eval).collect(),
            Some(d) => d.par_iter().filter_map(|&i| eval(i as usize)).collect(),
        }
    }

    /// Updates the counts for flipped points and records the affected points.
    fn apply_flips(&mut self, c: &mut Counts, flipped: &[u32]) {
        let cloud = &self.ev.cloud;
        let mut touched = Vec::new();
        for &j in flipped {
            let up = self.values[j as usize] == T::one();
            cloud.for_each_neighbor(cloud.point(j as usize), self.ev.r_in, self.ev.r_out, |i, _| {
                if up {
                    c.ones[i] += 1;
                } else {
                    c.ones[i] -= 1;
                }
                if !self.mark[i] {
                    self.mark[i] = true;
                    touched.push(i as u32);
                }
            });
        }
        for &i in &touched {
            self.mark[i as usize] = false;
        }
        touched.sort_unstable();
        self.recount = touched;
    }
}

#[inline]
fn indicator<T: Real>(v: T, q: T) -> T {
    if v >= q {
        T::one()
    } else {
        T::zero()
    }
}

/// `p = clamp(-cos(alpha) * frac_out / frac_in, -1, 1)` per point.
fn young_shifts<T: Real>(cloud: &PointCloud<T>, kernel: &KernelSpec<T>, alpha: T) -> Vec<f64> {
    let r = kernel.outer_radius();
    let kappa = (kernel.inner_radius() / r).as_f64();
    let quad = StencilQuadrature::new(cloud.dim(), kappa);
    let s = (alpha.as_f64() / 2.0).sin().powi(2);
    let c = 1.0 - 2.0 * s;
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let (fin, fout) = quad.fractions(cloud.domain(), cloud.point(i), r);
            if fout == T::zero() {
                return 0.0;
            }
            (-c * fout.as_f64() / fin.as_f64().max(1e-300)).clamp(-1.0, 1.0)
        })
        .collect()
}

/// `gamma(x) = min(zeta, 1 + (r0 / dist(x, labels))^a)` within `R`, else 1.
fn label_weights<T: Real>(cloud: &PointCloud<T>, s: &SslConfig<T>) -> Vec<T> {
    let dom = cloud.domain();
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let x = cloud.point(i);
            let dist =
                s.labels.iter().map(|(j, _)| dom.distance(x, cloud.point(*j))).fold(T::infinity(), |a, b| a.min(b));
            if dist > s.big_r {
                T::one()
            } else if dist == T::zero() {
                s.zeta
            } else {
                s.zeta.min(T::one() + (s.r0 / dist).powf(s.exponent))
            }
        })
        .collect()
}

/// Smallest distance from a field extremum to a point on the other side of `q`.
fn level_to_extremum_distance<T: Real>(u: &[T], cloud: &PointCloud<T>, q: T) -> T {
    let (mut imin, mut imax) = (0, 0);
    for i in 0..u.len() {
        if u[i] < u[imin] {
            imin = i;
        }
        if u[i] > u[imax] {
            imax = i;
        }
    }
    let mut best = T::infinity();
    for e in [imin, imax] {
        let above = u[e] >= q;
        let xe = cloud.point(e);
        let d = (0..u.len())
            .into_par_iter()
            .filter(|&j| (u[j] >= q) != above)
            .map(|j| cloud.domain().dist2(xe, cloud.point(j)))
            .reduce(T::infinity, |a, b| a.min(b));
        best = best.min(d.sqrt());
    }
    best
}

/// Options for [`run`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions<T> {
    /// Physical times at which to record the field (rounded down to steps).
    pub snapshot_times: Vec<T>,
    /// `(level, distance)`: stop once the level comes within `distance` of a
    /// field extremum. Used with the ball stencil, which is unreliable there.
    pub stop_near_extremum: Option<(T, T)>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    /// One field per requested time, in request order.
    pub snapshots: Vec<LevelSetField<T>>,
    pub final_field: LevelSetField<T>,
    pub stats: StepStats,
    pub stopped_early: bool,
}

/// One step of the scheme.
pub fn step<T: Real>(field: &LevelSetField<T>, cfg: &EvolutionConfig<T>) -> Result<(LevelSetField<T>, StepStats)> {
    let ev = Evolver::new(field.cloud.clone(), cfg.clone())?;
    Ok(ev.step(field))
}

/// Steps from `g` until the final time, `floor(T / (c_A h))` steps in all.
pub fn run<T: Real>(g: &LevelSetField<T>, cfg: &EvolutionConfig<T>, snapshot_times: &[T]) -> Result<Trajectory<T>> {
    let ev = Evolver::new(g.cloud.clone(), cfg.clone())?;
    ev.run(g, &RunOptions { snapshot_times: snapshot_times.to_vec(), stop_near_extremum: None })
}

/// Superlevel set `{u >= q}` as a mask.
pub fn threshold<T: Real>(field: &LevelSetField<T>, q: T) -> Vec<bool> {
    field.values.iter().map(|&v| v >= q).collect()
}

/// Contact angles of the level `{u = q}` with the domain boundary, in
/// radians, one per branch that meets the wall. The angle is measured inside
/// the sublevel set `{u < q}`. `r` sets the resolution: probes every `r/4`,
/// local linear fits over radius `r`, and a quadratic fit of the level line
/// within `4r` of the wall, whose slope at the wall gives the angle. The fit
/// is taken relative to the chord of that piece of line, so it stays a graph
/// even where the line bends back over the wall.
pub fn contact_angle<T: Real>(field: &LevelSetField<T>, q: T, r: T) -> Result<Vec<T>> {
    let dom = field.cloud.domain();
    if dom.is_torus() || field.cloud.dim() != 2 {
        return Err(Error::InvalidParameter("contact angles need a bounded planar domain".into()));
    }
    let spacing = r / T::lit(4.0);
    let grid = ProbeGrid::sample(field, spacing, r, contour::Interp::LocalLinear)?;
    let branches = contour::extract(&grid, q);
    let window = T::lit(4.0) * r;
    let mut out = Vec::new();
    for br in branches {
        // ends that touch the wall
        for end in [true, false] {
            let pts: Vec<[T; 2]> = if end { br.clone() } else { br.iter().rev().cloned().collect() };
            if pts.len() < 3 {
                continue;
            }
            let tip = pts[0];
            if -dom.sdf(&tip) > T::lit(2.0) * spacing {
                continue;
            }
            // stop where the branch turns back to the wall; a low cap is
            // fitted only over the lower half of its height
            let mut top = T::zero();
            let rise = pts
                .iter()
                .take_while(|p| {
                    let n = -dom.sdf(&p[..]);
                    top = top.max(n);
                    n >= top - spacing
                })
                .count();
            let reach = window.min(top * T::lit(0.5));
            let near: Vec<[T; 2]> = pts[..rise].iter().take_while(|p| -dom.sdf(&p[..]) <= reach).cloned().collect();
            if near.len() < 4 {
                continue;
            }
            let nu = outward_normal(dom, &tip, spacing);
            let mut tau = [-nu[1], nu[0]];
            // offset from the chord as a quadratic in the position along it
            let far = near[near.len() - 1];
            let (cx, cy) = (far[0] - tip[0], far[1] - tip[1]);
            let clen = (cx * cx + cy * cy).sqrt();
            if !(clen > spacing) {
                continue;
            }
            let (cx, cy) = (cx / clen, cy / clen);
            let rows: Vec<(T, T)> = near
                .iter()
                .map(|p| {
                    let (dx, dy) = (p[0] - tip[0], p[1] - tip[1]);
                    (dx * cx + dy * cy, dy * cx - dx * cy)
                })
                .collect();
            let Some(slope) = quadratic_slope(&rows) else { continue };
            // direction of the level line leaving the wall
            let len = (T::one() + slope * slope).sqrt();
            let dir = [(cx - slope * cy) / len, (cy + slope * cx) / len];
            // gradient points into {u > q}; the sublevel side is opposite
            let g = mean_gradient(field, &near, r)?;
            if g[0] * tau[0] + g[1] * tau[1] > T::zero() {
                tau = [-tau[0], -tau[1]];
            }
            let c = (dir[0] * tau[0] + dir[1] * tau[1]).max(-T::one()).min(T::one());
            out.push(c.acos());
        }
    }
    Ok(out)
}

/// Least-squares fit `s = a + b n + c n^2` to `(n, s)` rows; returns `b`, the slope at `n = 0`.
fn quadratic_slope<T: Real>(rows: &[(T, T)]) -> Option<T> {
    // normal equations on the monomials 1, n, n^2
    let mut m = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for &(n, s) in rows {
        let phi = [T::one(), n, n * n];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            rhs[i] += phi[i] * s;
        }
    }
    let det3 = |m: &[[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(&m);
    if !(det.abs() > T::min_positive_value()) {
        return None;
    }
    // Cramer's rule for the middle coefficient
    let mut mb = m;
    for i in 0..3 {
        mb[i][1] = rhs[i];
    }
    Some(det3(&mb) / det)
}

fn outward_normal<T: Real>(dom: &crate::domain::Domain<T>, x: &[T; 2], h: T) -> [T; 2] {
    let gx = dom.sdf(&[x[0] + h, x[1]]) - dom.sdf(&[x[0] - h, x[1]]);
    let gy = dom.sdf(&[x[0], x[1] + h]) - dom.sdf(&[x[0], x[1] - h]);
    let n = (gx * gx + gy * gy).sqrt();
    [gx / n, gy / n]
}

fn mean_gradient<T: Real>(field: &LevelSetField<T>, pts: &[[T; 2]], r: T) -> Result<[T; 2]> {
    let mut g = [T::zero(), T::zero()];
    for p in pts {
        if let Some((_, gr)) = contour::local_linear_fit(field, &p[..], r)? {
            g[0] += gr[0];
            g[1] += gr[1];
        }
    }
    Ok(g)
}

/// Writes a snapshot: the cloud format with a `u` column and a second
/// header line carrying `t`, `n` (steps) and `mode`.
pub fn write_snapshot<T: Real, W: Write>(field: &LevelSetField<T>, mode: &str, w: &mut W) -> Result<()> {
    writeln!(w, "{}", field.cloud.header())?;
    writeln!(w, "# t={:.16e} n={} mode={}", field.physical_time, field.step_count, mode)?;
    for i in 0..field.len() {
        write_row(w, field.cloud.point(i), Some(field.values[i]))?;
    }
    Ok(())
}

/// Parsed snapshot contents.
#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub dim: usize,
    pub coords: Vec<T>,
    pub values: Vec<T>,
    pub time: T,
    pub steps: u64,
    pub mode: String,
}

pub fn read_snapshot<T: Real, R: BufRead>(r: R) -> Result<Snapshot<T>> {
    let text: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let first = text.first().ok_or(Error::Parse { line: 1, msg: "empty snapshot".into() })?;
    let h = parse_header(first, "medflow-cloud")?;
    let dim: usize = header_field(&h, "d")?;
    let second = text.get(1).ok_or(Error::Parse { line: 2, msg: "missing time header".into() })?;
    let kv: Vec<(String, String)> = second
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|s| s.split_once('=').map(|(a, b)| (a.into(), b.into())))
        .collect();
    let time: f64 = header_field(&kv, "t")?;
    let steps: u64 = header_field(&kv, "n")?;
    let mode: String = header_field(&kv, "mode")?;
    let joined = text.join("\n");
    let (_, nums) = read_table::<T, _>(joined.as_bytes(), dim + 1)?;
    let mut coords = Vec::with_capacity(nums.len() / (dim + 1) * dim);
    let mut values = Vec::with_capacity(nums.len() / (dim + 1));
    for row in nums.chunks_exact(dim + 1) {
        coords.extend_from_slice(&row[..dim]);
        values.push(row[dim]);
    }
    Ok(Snapshot { dim, coords, values, time: T::lit(time), steps, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, SamplerConfig};

    fn cloud(n: usize, seed: u64) -> Arc<PointCloud<f64>> {
        Arc::new(PointCloud::sample(&Domain::torus(2).unwrap(), &SamplerConfig::iid(n, seed), 0.1).unwrap())
    }

    #[test]
    fn short_final_time_takes_no_steps() {
        let c = cloud(500, 1);
        let g = LevelSetField::from_fn(c, |x| x[0]).unwrap();
        let cfg = EvolutionConfig::new(KernelSpec::ball(0.1).unwrap(), Mode::LevelSet, 0.001).unwrap();
        let tr = run(&g, &cfg, &[]).unwrap();
        assert_eq!(tr.final_field.step_count(), 0);
        assert_eq!(tr.final_field.values(), g.values());
    }

    #[test]
    fn incremental_matches_full_steps() {
        let c = cloud(3000, 2);
        let g = LevelSetField::from_fn(c, |x| ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt()).unwrap();
        for mode in [Mode::LevelSet, Mode::Mbo { threshold: 0.3 }] {
            let cfg = EvolutionConfig::new(KernelSpec::annulus(0.5, 0.08).unwrap(), mode, 1.0).unwrap();
            let ev = Evolver::new(g.cloud().clone(), cfg).unwrap();
            let mut f = g.clone();
            for _ in 0..12 {
                f = ev.step(&f).0;
            }
            let (inc, _) = ev.advance(&g, 12);
            assert_eq!(inc.values(), f.values());
            assert_eq!(inc.step_count(), 12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let c = cloud(40, 3);
        let g = LevelSetField::from_fn(c, |x| x[1]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&g, "levelset", &mut buf).unwrap();
        let s: Snapshot<f64> = read_snapshot(&buf[..]).unwrap();
        assert_eq!(s.values, g.values());
        assert_eq!(s.coords, g.cloud().coords());
        assert_eq!(s.mode, "levelset");
    }
}
