//! Probe grids over a planar cloud field, marching squares, and Hausdorff
//! distances between polylines.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::domain::wrap_delta;
use crate::error::{Error, Result};
use crate::evolution::LevelSetField;
use crate::scalar::Real;

/// How a probe value is read off the cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    /// Mean over the points within the radius.
    LocalMean,
    /// Least-squares plane over the points within the radius.
    LocalLinear,
}

/// Values on a regular grid; `NaN` marks probes outside the domain.
#[derive(Clone, Debug)]
pub struct ProbeGrid<T> {
    pub lo: [T; 2],
    pub spacing: T,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<T>,
}

impl<T: Real> ProbeGrid<T> {
    /// Grid spanning `[lo, hi]` with the given spacing, filled by `f`.
    pub fn from_fn<F: Fn([T; 2]) -> T + Sync>(lo: [T; 2], hi: [T; 2], spacing: T, f: F) -> Self {
        let nx = ((hi[0] - lo[0]) / spacing).floor().to_usize().unwrap_or(0) + 1;
        let ny = ((hi[1] - lo[1]) / spacing).floor().to_usize().unwrap_or(0) + 1;
        let values = (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                f([lo[0] + spacing * T::from_usize_lossy(i), lo[1] + spacing * T::from_usize_lossy(j)])
            })
            .collect();
        ProbeGrid { lo, spacing, nx, ny, values }
    }

    /// Samples a planar field over its domain's bounding box.
    pub fn sample(field: &LevelSetField<T>, spacing: T, radius: T, interp: Interp) -> Result<Self> {
        let cloud = field.cloud();
        if cloud.dim() != 2 {
            return Err(Error::InvalidParameter("probe grids are planar".into()));
        }
        if radius > cloud.max_radius() {
            return Err(Error::IndexMisconfiguration { radius: radius.as_f64(), cell: cloud.max_radius().as_f64() });
        }
        let dom = cloud.domain();
        let lo = dom.lower();
        let ext = dom.extent();
        let hi = [lo[0] + ext[0], lo[1] + ext[1]];
        let periodic = dom.is_torus();
        // the torus grid stops one spacing short of the period
        let hi = if periodic { [hi[0] - spacing * T::lit(0.5), hi[1] - spacing * T::lit(0.5)] } else { hi };
        Ok(Self::from_fn([lo[0], lo[1]], hi, spacing, |x| {
            let mut x = x;
            if !periodic {
                // keep boundary probes a hair inside so they are evaluated
                let eps = spacing * T::lit(1e-6);
                for k in 0..2 {
                    x[k] = x[k].max(lo[k] + eps).min(lo[k] + ext[k] - eps);
                }
                if !dom.contains(&x) {
                    return T::nan();
                }
            }
            probe(field, &x, radius, interp)
        }))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    pub fn node(&self, i: usize, j: usize) -> [T; 2] {
        [self.lo[0] + self.spacing * T::from_usize_lossy(i), self.lo[1] + self.spacing * T::from_usize_lossy(j)]
    }
}

fn probe<T: Real>(field: &LevelSetField<T>, x: &[T], r: T, interp: Interp) -> T {
    match interp {
        Interp::Nearest => field.values()[field.cloud().nearest(x)],
        Interp::LocalMean => {
            let (mut s, mut n) = (T::zero(), 0usize);
            field.cloud().for_each_neighbor(x, T::zero(), r, |j, _| {
                s += field.values()[j];
                n += 1;
            });
            if n == 0 {
                field.values()[field.cloud().nearest(x)]
            } else {
                s / T::from_usize_lossy(n)
            }
        }
        Interp::LocalLinear => match local_linear_fit(field, x, r) {
            Ok(Some((v, _))) => v,
            _ => field.values()[field.cloud().nearest(x)],
        },
    }
}

/// Least-squares plane `u ~ a + g . (y - x)` over the points within `r` of
/// `x`. Returns `(a, g)`, or `None` with too few or collinear points.
pub fn local_linear_fit<T: Real>(field: &LevelSetField<T>, x: &[T], r: T) -> Result<Option<(T, [T; 2])>> {
    let cloud = field.cloud();
    let periodic = cloud.domain().is_torus();
    // normal equations, accumulated in f64 for conditioning
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    let mut n = 0usize;
    cloud.try_for_each_neighbor(x, T::zero(), r, |j, _| {
        let p = cloud.point(j);
        let mut dx = p[0] - x[0];
        let mut dy = p[1] - x[1];
        if periodic {
            dx = wrap_delta(dx);
            dy = wrap_delta(dy);
        }
        let row = [1.0, (dx / r).as_f64(), (dy / r).as_f64()];
        let u = field.values()[j].as_f64();
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
            rhs[a] += row[a] * u;
        }
        n += 1;
    })?;
    if n < 4 {
        return Ok(None);
    }
    let Some(sol) = solve3(m, rhs) else { return Ok(None) };
    Ok(Some((T::lit(sol[0]), [T::lit(sol[1]) / r, T::lit(sol[2]) / r])))
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    let scale = m[0][0] * m[1][1] * m[2][2];
    if !(d.abs() > 1e-10 * scale.abs()) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for r in 0..3 {
            a[r][k] = b[r];
        }
        *o = det(&a) / d;
    }
    Some(out)
}

/// Level `q` polylines by marching squares. Open branches end where the grid
/// ends or meets undefined probes; closed loops repeat their first point.
pub fn extract<T: Real>(grid: &ProbeGrid<T>, q: T) -> Vec<Vec<[T; 2]>> {
    let (nx, ny) = (grid.nx, grid.ny);
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    // edge ids: 2*node for the edge to the right, 2*node+1 for the edge up
    let hedge = |i: usize, j: usize| 2 * (j * nx + i);
    let vedge = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let cross = |e: usize| -> [T; 2] {
        let node = e / 2;
        let (i, j) = (node % nx, node / nx);
        let (i2, j2) = if e % 2 == 0 { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (grid.at(i, j), grid.at(i2, j2));
        let t = ((q - a) / (b - a)).max(T::zero()).min(T::one());
        let p = grid.node(i, j);
        let p2 = grid.node(i2, j2);
        [p[0] + t * (p2[0] - p[0]), p[1] + t * (p2[1] - p[1])]
    };
    let mut segs: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [grid.at(i, j), grid.at(i + 1, j), grid.at(i + 1, j + 1), grid.at(i, j + 1)];
            if v.iter().any(|x| x.is_nan()) {
                continue;
            }
            let bits: usize = v.iter().enumerate().map(|(k, &x)| ((x >= q) as usize) << k).sum();
            // sides: 0 bottom, 1 right, 2 top, 3 left
            let side = [hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j)];
            let pairs: &[(usize, usize)] = match bits {
                0 | 15 => &[],
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 | 10 => {
                    let center = (v[0] + v[1] + v[2] + v[3]) / T::lit(4.0);
                    let joined = (center >= q) == (bits == 5);
                    if joined {
                        &[(3, 2), (0, 1)]
                    } else {
                        &[(3, 0), (1, 2)]
                    }
                }
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                segs.push((side[a], side[b]));
            }
        }
    }
    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| -> Vec<[T; 2]> {
        let mut line = vec![cross(start_edge)];
        let (mut seg, mut edge) = (start_seg, start_edge);
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            let next_edge = if a == edge { b } else { a };
            line.push(cross(next_edge));
            let next = by_edge[&next_edge].iter().copied().find(|&s| !used[s]);
            match next {
                Some(s) => {
                    seg = s;
                    edge = next_edge;
                }
                None => break,
            }
        }
        line
    };
    // open branches first, starting from edges used once
    let mut ends: Vec<(usize, usize)> = by_edge.iter().filter(|(_, v)| v.len() == 1).map(|(&e, v)| (e, v[0])).collect();
    ends.sort_unstable();
    for (e, s) in ends {
        if !used[s] {
            out.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            out.push(walk(s, segs[s].0, &mut used));
        }
    }
    out
}

fn point_segment_dist2<T: Real>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let l2 = ux * ux + uy * uy;
    let t = if l2 > T::zero() { ((wx * ux + wy * uy) / l2).max(T::zero()).min(T::one()) } else { T::zero() };
    let (dx, dy) = (wx - t * ux, wy - t * uy);
    dx * dx + dy * dy
}

fn directed<T: Real>(a: &[Vec<[T; 2]>], b: &[Vec<[T; 2]>]) -> T {
    let pts: Vec<[T; 2]> = a.iter().flatten().copied().collect();
    pts.par_iter()
        .map(|&p| {
            let mut best = T::infinity();
            for line in b {
                if line.len() == 1 {
                    best = best.min(point_segment_dist2(p, line[0], line[0]));
                }
                for w in line.windows(2) {
                    best = best.min(point_segment_dist2(p, w[0], w[1]));
                }
            }
            best
        })
        .reduce(T::zero, |x, y| x.max(y))
        .sqrt()
}

/// Symmetric Hausdorff distance between two sets of polylines, taking the
/// vertices of each side against the segments of the other.
pub fn hausdorff<T: Real>(a: &[Vec<[T; 2]>], b: &[Vec<[T; 2]>]) -> T {
    if a.iter().all(|l| l.is_empty()) || b.iter().all(|l| l.is_empty()) {
        return T::infinity();
    }
    directed(a, b).max(directed(b, a))
}

/// Closed polygon approximating a circle.
pub fn circle<T: Real>(center: [T; 2], radius: T, n: usize) -> Vec<[T; 2]> {
    (0..=n)
        .map(|k| {
            let th = T::TAU() * T::from_usize_lossy(k % n) / T::from_usize_lossy(n);
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_contour_is_close_to_circle() {
        let g = ProbeGrid::from_fn([0.0, 0.0], [1.0, 1.0], 0.01, |x: [f64; 2]| {
            ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt()
        });
        let lines = extract(&g, 0.3);
        assert_eq!(lines.len(), 1);
        let d = hausdorff(&lines, &[circle([0.5, 0.5], 0.3, 720)]);
        assert!(d < 2e-4, "{d}");
    }

    #[test]
    fn concentric_circles_distance() {
        let a = vec![circle([0.5f64, 0.5], 0.3, 2000)];
        let b = vec![circle([0.5, 0.5], 0.32, 2000)];
        assert!((hausdorff(&a, &b) - 0.02).abs() < 1e-5);
    }

    #[test]
    fn open_branch_ends_on_grid_border() {
        let g = ProbeGrid::from_fn([0.0, 0.0], [1.0, 1.0], 0.05, |x| x[0] + 0.1 * x[1]);
        let lines = extract(&g, 0.5);
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        let ys: [f64; 2] = [l[0][1], l[l.len() - 1][1]];
        assert!(ys.iter().any(|&y| y.abs() < 1e-12) && ys.iter().any(|&y| (y - 1.0).abs() < 1e-12));
    }
}
