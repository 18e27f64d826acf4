//! Domains, point sampling and the fixed-radius neighbor index.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::qmc;
use crate::scalar::Real;

/// Signed distance style function: negative inside, positive outside.
pub type Sdf<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Either the flat unit torus or a bounded region inside an axis-aligned box.
#[derive(Clone)]
pub enum Domain<T: Real> {
    Torus {
        dim: usize,
    },
    Bounded {
        lo: Vec<T>,
        hi: Vec<T>,
        /// Extra carving function. The domain is the box intersected with
        /// `{sdf < 0}`. `None` means the box itself.
        carve: Option<Sdf<T>>,
    },
}

impl<T: Real> fmt::Debug for Domain<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Torus { dim } => write!(f, "Torus(d={dim})"),
            Domain::Bounded { lo, hi, carve } => {
                f.debug_struct("Bounded").field("lo", lo).field("hi", hi).field("carved", &carve.is_some()).finish()
            }
        }
    }
}

impl<T: Real> Domain<T> {
    pub fn torus(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDomain(format!("dimension {dim} < 2")));
        }
        Ok(Domain::Torus { dim })
    }

    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::rect(vec![T::zero(); dim], vec![T::one(); dim])
    }

    pub fn rect(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidDomain("corner dimensions differ".into()));
        }
        if lo.len() < 2 {
            return Err(Error::InvalidDomain(format!("dimension {} < 2", lo.len())));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("box has zero volume".into()));
        }
        Ok(Domain::Bounded { lo, hi, carve: None })
    }

    /// Box intersected with `{sdf < 0}`. Fails if the result has no volume.
    pub fn carved(lo: Vec<T>, hi: Vec<T>, sdf: Sdf<T>) -> Result<Self> {
        Self::rect(lo.clone(), hi.clone())?;
        let dom = Domain::Bounded { lo, hi, carve: Some(sdf) };
        if dom.volume() <= T::zero() {
            return Err(Error::InvalidDomain("carved region has zero volume".into()));
        }
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus { dim } => *dim,
            Domain::Bounded { lo, .. } => lo.len(),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }

    /// Lower corner of the bounding box.
    pub fn lower(&self) -> Vec<T> {
        match self {
            Domain::Torus { dim } => vec![T::zero(); *dim],
            Domain::Bounded { lo, .. } => lo.clone(),
        }
    }

    /// Side lengths of the bounding box (or the period).
    pub fn extent(&self) -> Vec<T> {
        match self {
            Domain::Torus { dim } => vec![T::one(); *dim],
            Domain::Bounded { lo, hi, .. } => lo.iter().zip(hi).map(|(a, b)| *b - *a).collect(),
        }
    }

    /// Signed distance to the boundary, negative inside. `-inf` on the torus.
    pub fn sdf(&self, x: &[T]) -> T {
        match self {
            Domain::Torus { .. } => T::neg_infinity(),
            Domain::Bounded { lo, hi, carve } => {
                let b = box_sdf(lo, hi, x);
                match carve {
                    Some(f) => b.max(f(x)),
                    None => b,
                }
            }
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match self {
            Domain::Torus { .. } => x.iter().all(|v| v.is_finite()),
            Domain::Bounded { .. } => self.sdf(x) < T::zero(),
        }
    }

    /// Squared distance; minimal image on the torus.
    #[inline]
    pub fn dist2(&self, a: &[T], b: &[T]) -> T {
        let periodic = self.is_torus();
        let mut s = T::zero();
        for k in 0..a.len() {
            let mut dx = a[k] - b[k];
            if periodic {
                dx = wrap_delta(dx);
            }
            s += dx * dx;
        }
        s
    }

    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        self.dist2(a, b).sqrt()
    }

    /// Lebesgue measure. Exact for the torus and plain boxes, a Halton
    /// estimate with 2^16 nodes for carved boxes.
    pub fn volume(&self) -> T {
        match self {
            Domain::Torus { .. } => T::one(),
            Domain::Bounded { lo, hi, carve } => {
                let boxvol = lo.iter().zip(hi).fold(T::one(), |acc, (a, b)| acc * (*b - *a));
                if carve.is_none() {
                    return boxvol;
                }
                let d = lo.len();
                let n = 1u64 << 16;
                let mut z = vec![0.0; d];
                let mut x = vec![T::zero(); d];
                let mut inside = 0u64;
                for i in 1..=n {
                    qmc::halton(i, &mut z);
                    for k in 0..d {
                        x[k] = lo[k] + (hi[k] - lo[k]) * T::lit(z[k]);
                    }
                    if self.contains(&x) {
                        inside += 1;
                    }
                }
                boxvol * T::lit(inside as f64 / n as f64)
            }
        }
    }

    /// Maps a point into the canonical cell `[0,1)^d` on the torus; identity otherwise.
    pub fn canonicalize(&self, x: &mut [T]) {
        if self.is_torus() {
            for v in x.iter_mut() {
                *v -= v.floor();
                if *v >= T::one() {
                    *v = T::zero();
                }
            }
        }
    }

    /// Fractions of the stencil `{r_in < |z| <= r_out}` around `center` that
    /// lie inside and outside the domain, by symmetric Halton quadrature with
    /// at least 4096 nodes.
    pub fn stencil_fractions(&self, center: &[T], r_in: T, r_out: T) -> (T, T) {
        StencilQuadrature::new(self.dim(), (r_in / r_out).as_f64()).fractions(self, center, r_out)
    }
}

/// Minimal-image displacement on the unit period.
#[inline]
pub(crate) fn wrap_delta<T: Real>(dx: T) -> T {
    let half = T::lit(0.5);
    if dx.abs() > T::lit(1.5) {
        // points off the fundamental cell
        dx - dx.round()
    } else if dx > half {
        dx - T::one()
    } else if dx < -half {
        dx + T::one()
    } else {
        dx
    }
}

fn box_sdf<T: Real>(lo: &[T], hi: &[T], x: &[T]) -> T {
    let mut inside = T::neg_infinity();
    let mut outside2 = T::zero();
    for k in 0..x.len() {
        let a = lo[k] - x[k];
        let b = x[k] - hi[k];
        let m = a.max(b);
        inside = inside.max(m);
        if m > T::zero() {
            outside2 += m * m;
        }
    }
    if outside2 > T::zero() {
        outside2.sqrt()
    } else {
        inside
    }
}

/// Reusable quadrature rule for stencil volume fractions.
#[derive(Clone, Debug)]
pub struct StencilQuadrature {
    dim: usize,
    nodes: Vec<f64>,
}

impl StencilQuadrature {
    pub const MIN_NODES: usize = 8192;

    pub fn new(dim: usize, kappa: f64) -> Self {
        StencilQuadrature { dim, nodes: qmc::symmetric_shell_nodes(dim, kappa, Self::MIN_NODES) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(frac_in, frac_out)` of the scaled stencil at `center`.
    pub fn fractions<T: Real>(&self, domain: &Domain<T>, center: &[T], r: T) -> (T, T) {
        if domain.is_torus() || domain.sdf(center) <= -r {
            return (T::one(), T::zero());
        }
        let d = self.dim;
        let mut x = vec![T::zero(); d];
        let mut inside = 0usize;
        for z in self.nodes.chunks_exact(d) {
            for k in 0..d {
                x[k] = center[k] + r * T::lit(z[k]);
            }
            if domain.contains(&x) {
                inside += 1;
            }
        }
        let f = T::lit(inside as f64 / self.len() as f64);
        (f, T::one() - f)
    }
}

/// How points are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Process {
    /// Exactly `n` i.i.d. uniform points.
    Iid { n: usize },
    /// Homogeneous Poisson process with the given intensity per unit volume.
    Poisson { intensity: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub process: Process,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn iid(n: usize, seed: u64) -> Self {
        SamplerConfig { process: Process::Iid { n }, seed }
    }

    pub fn poisson(intensity: f64, seed: u64) -> Self {
        SamplerConfig { process: Process::Poisson { intensity }, seed }
    }
}

/// Uniform bucket grid with CSR storage. Cells are at least as wide as the
/// largest radius the index will be asked about.
#[derive(Clone, Debug)]
struct GridIndex<T: Real> {
    periodic: bool,
    origin: Vec<T>,
    width: Vec<T>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    start: Vec<u32>,
    order: Vec<u32>,
    packed: Vec<T>,
}

impl<T: Real> GridIndex<T> {
    fn build(domain: &Domain<T>, coords: &[T], cell: T) -> Self {
        let d = domain.dim();
        let origin = domain.lower();
        let extent = domain.extent();
        let mut counts = Vec::with_capacity(d);
        let mut width = Vec::with_capacity(d);
        for &e in &extent {
            let m = (e / cell).floor().to_usize().unwrap_or(1).clamp(1, 1 << 20);
            counts.push(m);
            width.push(e / T::from_usize_lossy(m));
        }
        let mut strides = vec![1usize; d];
        for k in 1..d {
            strides[k] = strides[k - 1] * counts[k - 1];
        }
        let ncell = strides[d - 1] * counts[d - 1];
        let n = coords.len() / d;
        let mut cell_of = Vec::with_capacity(n);
        let mut start = vec![0u32; ncell + 1];
        for p in coords.chunks_exact(d) {
            let mut c = 0;
            for k in 0..d {
                c += axis_cell(p[k], origin[k], width[k], counts[k]) * strides[k];
            }
            cell_of.push(c);
            start[c + 1] += 1;
        }
        for c in 0..ncell {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; n];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        let mut packed = Vec::with_capacity(coords.len());
        for &i in &order {
            let i = i as usize;
            packed.extend_from_slice(&coords[i * d..(i + 1) * d]);
        }
        GridIndex { periodic: domain.is_torus(), origin, width, counts, strides, start, order, packed }
    }

    fn min_width(&self) -> T {
        self.width.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    /// Cells touched by a query around `center`, per axis, deduplicated,
    /// with the periodic shift to apply to the center for each cell.
    #[allow(clippy::needless_range_loop)]
    fn axis_ranges(&self, center: &[T]) -> Vec<AxisCells<T>> {
        let d = self.counts.len();
        let mut out = Vec::with_capacity(d);
        for k in 0..d {
            let m = self.counts[k];
            let c = axis_cell(center[k], self.origin[k], self.width[k], m);
            let mut a = AxisCells { cells: [0; 3], shift: [T::zero(); 3], len: 0 };
            if self.periodic {
                if m >= 3 {
                    a.cells = [(c + m - 1) % m, c, (c + 1) % m];
                    if c == 0 {
                        a.shift[0] = -T::one();
                    }
                    if c == m - 1 {
                        a.shift[2] = T::one();
                    }
                    a.len = 3;
                } else {
                    for j in 0..m {
                        a.cells[j] = j;
                    }
                    a.len = m;
                }
            } else {
                for off in [-1isize, 0, 1] {
                    let j = c as isize + off;
                    if j >= 0 && (j as usize) < m {
                        a.cells[a.len] = j as usize;
                        a.len += 1;
                    }
                }
            }
            out.push(a);
        }
        out
    }

    #[inline]
    fn visit<F: FnMut(usize, T)>(&self, center: &[T], r_in: T, r_out: T, mut f: F) {
        let d = self.counts.len();
        let ranges = self.axis_ranges(center);
        let lo2 = r_in * r_in;
        let hi2 = r_out * r_out;
        let inner_empty = r_in <= T::zero();
        // with at least 4 cells per axis a per-cell shift gives the minimal image
        let wrap = self.periodic && self.counts.iter().any(|&m| m < 4);
        let mut idx = vec![0usize; d];
        let mut cen = center.to_vec();
        loop {
            let mut c = 0;
            for k in 0..d {
                let a = &ranges[k];
                c += a.cells[idx[k]] * self.strides[k];
                cen[k] = if wrap { center[k] } else { center[k] - a.shift[idx[k]] };
            }
            let (s, e) = (self.start[c] as usize, self.start[c + 1] as usize);
            if d == 2 && !wrap {
                let (cx, cy) = (cen[0], cen[1]);
                for (slot, p) in self.packed[2 * s..2 * e].chunks_exact(2).enumerate() {
                    let (dx, dy) = (p[0] - cx, p[1] - cy);
                    let d2 = dx * dx + dy * dy;
                    if d2 <= hi2 && (inner_empty || d2 > lo2) {
                        f(self.order[s + slot] as usize, d2);
                    }
                }
            } else {
                for slot in s..e {
                    let p = &self.packed[slot * d..(slot + 1) * d];
                    let mut d2 = T::zero();
                    for k in 0..d {
                        let mut dx = p[k] - cen[k];
                        if wrap {
                            dx = wrap_delta(dx);
                        }
                        d2 += dx * dx;
                    }
                    if d2 <= hi2 && (inner_empty || d2 > lo2) {
                        f(self.order[slot] as usize, d2);
                    }
                }
            }
            // odometer over the per-axis cell lists
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                idx[k] += 1;
                if idx[k] < ranges[k].len {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// Up to three neighboring cells along one axis.
struct AxisCells<T> {
    cells: [usize; 3],
    /// Added to `p - center` for points of the cell.
    shift: [T; 3],
    len: usize,
}

#[inline]
fn axis_cell<T: Real>(x: T, origin: T, width: T, m: usize) -> usize {
    let c = ((x - origin) / width).floor();
    if c <= T::zero() {
        0
    } else {
        c.to_usize().unwrap_or(m - 1).min(m - 1)
    }
}

/// Finite sample of a domain with a neighbor index attached.
#[derive(Clone, Debug)]
pub struct PointCloud<T: Real> {
    domain: Domain<T>,
    coords: Vec<T>,
    seed: Option<u64>,
    cell: T,
    index: GridIndex<T>,
}

impl<T: Real> PointCloud<T> {
    /// Builds a cloud from flat coordinates (`dim` per point). `cell` is the
    /// largest query radius the index must support.
    pub fn from_coords(domain: Domain<T>, mut coords: Vec<T>, cell: T) -> Result<Self> {
        let d = domain.dim();
        if coords.len() % d != 0 {
            return Err(Error::InvalidParameter("coordinate count not a multiple of dimension".into()));
        }
        if !(cell > T::zero()) {
            return Err(Error::InvalidParameter("index cell size must be positive".into()));
        }
        for p in coords.chunks_exact_mut(d) {
            domain.canonicalize(p);
            if !domain.contains(p) {
                return Err(Error::InvalidParameter(format!("point {:?} outside domain", p)));
            }
        }
        let index = GridIndex::build(&domain, &coords, cell);
        Ok(PointCloud { domain, coords, seed: None, cell, index })
    }

    /// Draws a cloud. `cell` is the largest query radius that will be used.
    /// Points are numbered in index-bucket order, not in drawing order.
    pub fn sample(domain: &Domain<T>, cfg: &SamplerConfig, cell: T) -> Result<Self> {
        let d = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = match cfg.process {
            Process::Iid { n } => {
                if n == 0 {
                    return Err(Error::InvalidSampler("N must be positive".into()));
                }
                n
            }
            Process::Poisson { intensity } => {
                if !(intensity > 0.0) || !intensity.is_finite() {
                    return Err(Error::InvalidSampler("intensity must be positive".into()));
                }
                let mean = intensity * domain.volume().as_f64();
                let pois = Poisson::new(mean).map_err(|e| Error::InvalidSampler(e.to_string()))?;
                pois.sample(&mut rng) as usize
            }
        };
        let lo = domain.lower();
        let ext = domain.extent();
        let mut coords = Vec::with_capacity(n * d);
        let mut x = vec![T::zero(); d];
        let mut accepted = 0;
        while accepted < n {
            for k in 0..d {
                x[k] = lo[k] + ext[k] * T::lit(rng.random::<f64>());
            }
            if domain.is_torus() || domain.contains(&x) {
                coords.extend_from_slice(&x);
                accepted += 1;
            }
        }
        let mut cloud = Self::from_coords(domain.clone(), coords, cell)?;
        // renumber in bucket order so neighbors sit close in memory
        cloud.coords = cloud.index.packed.clone();
        for (k, o) in cloud.index.order.iter_mut().enumerate() {
            *o = k as u32;
        }
        cloud.seed = Some(cfg.seed);
        Ok(cloud)
    }

    /// Same points, index rebuilt for a different maximal radius.
    pub fn reindexed(&self, cell: T) -> Self {
        let index = GridIndex::build(&self.domain, &self.coords, cell);
        PointCloud { domain: self.domain.clone(), coords: self.coords.clone(), seed: self.seed, cell, index }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Largest radius the index supports.
    pub fn max_radius(&self) -> T {
        self.index.min_width()
    }

    /// Requested cell size at construction.
    pub fn cell_size(&self) -> T {
        self.cell
    }

    fn check_radii(&self, r_in: T, r_out: T) -> Result<()> {
        if !(r_in >= T::zero()) || !(r_out >= r_in) {
            return Err(Error::InvalidParameter("need 0 <= r_inner <= r_outer".into()));
        }
        if r_out > self.max_radius() {
            return Err(Error::IndexMisconfiguration { radius: r_out.as_f64(), cell: self.max_radius().as_f64() });
        }
        Ok(())
    }

    /// Indices with `r_inner < dist <= r_outer`, ascending. With
    /// `r_inner = 0` the inner ball is empty and the center itself counts.
    pub fn neighbors(&self, center: &[T], r_inner: T, r_outer: T) -> Result<Vec<usize>> {
        self.check_radii(r_inner, r_outer)?;
        let mut out = Vec::new();
        if r_inner == r_outer && r_inner > T::zero() {
            return Ok(out);
        }
        self.index.visit(center, r_inner, r_outer, |i, _| out.push(i));
        out.sort_unstable();
        Ok(out)
    }

    /// Calls `f(index, squared_distance)` for each point of the shell, in
    /// index-bucket order. Radii must already be valid for the index.
    #[inline]
    pub fn for_each_neighbor<F: FnMut(usize, T)>(&self, center: &[T], r_inner: T, r_outer: T, f: F) {
        debug_assert!(r_outer <= self.max_radius());
        if r_inner == r_outer && r_inner > T::zero() {
            return;
        }
        self.index.visit(center, r_inner, r_outer, f)
    }

    /// Checked variant of [`for_each_neighbor`](Self::for_each_neighbor).
    pub fn try_for_each_neighbor<F: FnMut(usize, T)>(&self, center: &[T], r_inner: T, r_outer: T, f: F) -> Result<()> {
        self.check_radii(r_inner, r_outer)?;
        self.for_each_neighbor(center, r_inner, r_outer, f);
        Ok(())
    }

    /// Index of the cloud point closest to `x`, searching outward ring by ring.
    pub fn nearest(&self, x: &[T]) -> usize {
        let w = self.max_radius();
        let mut best = (T::infinity(), 0usize);
        self.index.visit(x, T::zero(), w, |i, d2| {
            if d2 < best.0 || (d2 == best.0 && i < best.1) {
                best = (d2, i);
            }
        });
        if best.0.is_finite() {
            return best.1;
        }
        for i in 0..self.len() {
            let d2 = self.domain.dist2(self.point(i), x);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        best.1
    }

    /// Writes the plain-text cloud format: one header line, then one point per
    /// line with 17 significant digits.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        for p in self.coords.chunks_exact(self.dim()) {
            write_row(w, p, None)?;
        }
        Ok(())
    }

    pub fn header(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        format!("# medflow-cloud v1 d={} n={} seed={}", self.dim(), self.len(), seed)
    }

    /// Reads the format produced by [`write_to`](Self::write_to).
    pub fn read_from<R: BufRead>(r: R, domain: Domain<T>, cell: T) -> Result<Self> {
        let (header, rows) = read_table(r, domain.dim())?;
        let h = parse_header(&header, "medflow-cloud")?;
        let d: usize = header_field(&h, "d")?;
        let n: usize = header_field(&h, "n")?;
        if d != domain.dim() {
            return Err(Error::Parse { line: 1, msg: format!("dimension {d} does not match domain") });
        }
        if rows.len() != n * d {
            return Err(Error::Parse { line: 1, msg: format!("expected {n} points") });
        }
        let seed = h.iter().find(|(k, _)| k == "seed").and_then(|(_, v)| v.parse().ok());
        let mut c = Self::from_coords(domain, rows, cell)?;
        c.seed = seed;
        Ok(c)
    }
}

pub(crate) fn write_row<T: Real, W: Write>(w: &mut W, p: &[T], extra: Option<T>) -> Result<()> {
    let mut line = String::with_capacity(32 * (p.len() + 1));
    for (k, v) in p.iter().chain(extra.iter()).enumerate() {
        if k > 0 {
            line.push(' ');
        }
        line.push_str(&format!("{:.16e}", v));
    }
    writeln!(w, "{line}")?;
    Ok(())
}

/// Header line plus all numbers, checking a fixed column count.
pub(crate) fn read_table<T: Real, R: BufRead>(r: R, cols: usize) -> Result<(String, Vec<T>)> {
    let mut header = None;
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            if header.is_none() {
                header = Some(t.to_string());
            }
            continue;
        }
        let mut count = 0;
        for tok in t.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse { line: ln + 1, msg: format!("bad number {tok:?}") })?;
            out.push(T::lit(v));
            count += 1;
        }
        if count != cols {
            return Err(Error::Parse { line: ln + 1, msg: format!("expected {cols} columns, found {count}") });
        }
    }
    let header = header.ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    Ok((header, out))
}

pub(crate) fn parse_header(line: &str, tag: &str) -> Result<Vec<(String, String)>> {
    let mut it = line.trim_start_matches('#').split_whitespace();
    if it.next() != Some(tag) || it.next() != Some("v1") {
        return Err(Error::Parse { line: 1, msg: format!("expected '# {tag} v1' header") });
    }
    Ok(it.filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string()))).collect())
}

pub(crate) fn header_field<V: std::str::FromStr>(h: &[(String, String)], key: &str) -> Result<V> {
    h.iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or(Error::Parse { line: 1, msg: format!("header field {key} missing or malformed") })
}

/// Volume fractions of `B_r(center)` inside and outside the cloud's domain.
pub fn volume_fractions<T: Real>(cloud: &PointCloud<T>, center: &[T], r: T) -> (T, T) {
    cloud.domain().stencil_fractions(center, T::zero(), r)
}

/// Cloud-count estimate of the inside fraction, for comparison with the
/// quadrature: points found in the ball over the count expected for a ball
/// fully inside the domain.
pub fn volume_fractions_empirical<T: Real>(cloud: &PointCloud<T>, center: &[T], r: T) -> Result<(T, T)> {
    let mut count = 0usize;
    cloud.try_for_each_neighbor(center, T::zero(), r, |_, _| count += 1)?;
    let d = cloud.dim();
    let density = T::from_usize_lossy(cloud.len()) / cloud.domain().volume();
    let expected = density * crate::scalar::unit_ball_volume::<T>(d) * r.powi(d as i32);
    let f = (T::from_usize_lossy(count) / expected).min(T::one());
    Ok((f, T::one() - f))
}
