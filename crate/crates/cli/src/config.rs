//! Run configuration: a sectioned `key = value` text format.
//!
//! ```text
//! [domain]
//! kind = torus          # torus | box
//! dim = 2
//!
//! [sampler]
//! n = 100000            # or: intensity = 1e5 (Poisson)
//! seed = 0
//!
//! [kernel]
//! kernel = annulus:0.9  # ball | annulus:<kappa> | shrinking | radial:<file>
//! r = 0.02
//!
//! [evolution]
//! T = 0.03
//! ```
//!
//! Every other key has a default; unknown keys are errors.

use std::fmt::{self, Write as _};
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use medflow::evolution::Mode;
use medflow::kernels::{RadialProfile, Stencil};
use medflow::KernelSpec;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Torus,
    UnitBox,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProcessChoice {
    Iid { n: usize },
    Poisson { intensity: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelChoice {
    Ball,
    Annulus(f64),
    Shrinking,
    /// Table of `(rho, K)` pairs, one pair per line.
    Radial(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    LevelSet,
    Mbo,
    YoungAngle,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Center (one coordinate per dimension) and radius.
    Disk { center: Vec<f64>, radius: f64 },
    /// Planar ellipse: center and semi-axes.
    Ellipse { center: [f64; 2], a: f64, b: f64 },
    /// `{x : n . x < c}` with `n` normalized.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// Signed distance, negative inside the shape.
    Sdf,
    /// 0 inside the shape, 1 outside.
    Indicator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub dim: usize,
    pub process: ProcessChoice,
    pub seed: u64,
    /// Bucket size of the neighbor index; defaults to the kernel's search radius.
    pub cell: Option<f64>,
    pub kernel: KernelChoice,
    pub r: f64,
    pub mode: ModeChoice,
    /// MBO threshold.
    pub threshold: f64,
    /// Contact angle in radians.
    pub alpha: f64,
    pub final_time: f64,
    pub snapshots: Vec<f64>,
    pub initial: Shape,
    pub profile: Profile,
    pub heat: bool,
    pub tau: f64,
    pub heat_time: f64,
    pub out: Option<PathBuf>,
    pub raster: usize,
    /// Level drawn over the rasters and used for area measurements.
    pub level: Option<f64>,
    pub verify: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainKind::Torus,
            dim: 2,
            process: ProcessChoice::Iid { n: 100_000 },
            seed: 0,
            cell: None,
            kernel: KernelChoice::Annulus(0.9),
            r: 0.03,
            mode: ModeChoice::LevelSet,
            threshold: 0.5,
            alpha: std::f64::consts::FRAC_PI_2,
            final_time: 0.02,
            snapshots: Vec::new(),
            initial: Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 },
            profile: Profile::Sdf,
            heat: false,
            tau: 1e-3,
            heat_time: 0.02,
            out: None,
            raster: 256,
            level: None,
            verify: Vec::new(),
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("domain", &["kind", "dim"]),
    ("sampler", &["n", "intensity", "seed", "cell"]),
    ("kernel", &["kernel", "r", "h"]),
    ("evolution", &["mode", "threshold", "alpha", "T", "snapshots", "initial", "profile"]),
    ("heatflow", &["enabled", "tau", "T"]),
    ("output", &["dir", "raster", "level"]),
    ("verify", &["suites"]),
];

pub const SUITES: &[&str] = &["consistency", "dkw", "sphere", "heat", "energy", "tv", "front", "tl2"];

fn err(line: usize, key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config { line, key: key.to_string(), msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| err(line, key, format!("cannot parse {v:?}")))
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|s| num(line, key, s.trim())).collect()
}

fn parse_kernel(line: usize, v: &str) -> Result<KernelChoice, CliError> {
    let (name, arg) = v.split_once(':').map_or((v, None), |(a, b)| (a, Some(b)));
    match (name, arg) {
        ("ball", None) => Ok(KernelChoice::Ball),
        ("shrinking", None) => Ok(KernelChoice::Shrinking),
        ("annulus", Some(k)) => Ok(KernelChoice::Annulus(num(line, "kernel.kernel", k)?)),
        ("radial", Some(p)) => Ok(KernelChoice::Radial(PathBuf::from(p))),
        _ => Err(err(line, "kernel.kernel", format!("unknown kernel {v:?}"))),
    }
}

pub fn parse_mode(v: &str) -> Option<ModeChoice> {
    match v {
        "levelset" => Some(ModeChoice::LevelSet),
        "mbo" => Some(ModeChoice::Mbo),
        "youngangle" => Some(ModeChoice::YoungAngle),
        _ => None,
    }
}

fn parse_shape(line: usize, v: &str) -> Result<Shape, CliError> {
    let key = "evolution.initial";
    let (name, args) = v.split_once(':').ok_or_else(|| err(line, key, "expected <shape>:<numbers>"))?;
    let a = list(line, key, args)?;
    match name {
        "disk" if a.len() >= 2 => Ok(Shape::Disk { center: a[..a.len() - 1].to_vec(), radius: a[a.len() - 1] }),
        "ellipse" if a.len() == 4 => Ok(Shape::Ellipse { center: [a[0], a[1]], a: a[2], b: a[3] }),
        "halfspace" if a.len() >= 2 => {
            let n = &a[..a.len() - 1];
            let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 || !len.is_finite() {
                return Err(err(line, key, "half-space normal is zero"));
            }
            Ok(Shape::HalfSpace { normal: n.iter().map(|x| x / len).collect(), offset: a[a.len() - 1] / len })
        }
        _ => Err(err(line, key, format!("unknown or malformed shape {v:?}"))),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelChoice::Ball => write!(f, "ball"),
            KernelChoice::Annulus(k) => write!(f, "annulus:{k:?}"),
            KernelChoice::Shrinking => write!(f, "shrinking"),
            KernelChoice::Radial(p) => write!(f, "radial:{}", p.display()),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Disk { center, radius } => write!(f, "disk:{},{radius:?}", fmt_list(center)),
            Shape::Ellipse { center, a, b } => write!(f, "ellipse:{},{a:?},{b:?}", fmt_list(center)),
            Shape::HalfSpace { normal, offset } => write!(f, "halfspace:{},{offset:?}", fmt_list(normal)),
        }
    }
}

impl ModeChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModeChoice::LevelSet => "levelset",
            ModeChoice::Mbo => "mbo",
            ModeChoice::YoungAngle => "youngangle",
        }
    }
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        let mut section: Option<&str> = None;
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let t = raw.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                section = Some(
                    KEYS.iter()
                        .find(|(s, _)| *s == name)
                        .map(|(s, _)| *s)
                        .ok_or_else(|| err(line, name, "unknown section"))?,
                );
                continue;
            }
            let (key, value) = t.split_once('=').ok_or_else(|| err(line, t, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| err(line, key, "key outside of a section"))?;
            let full = format!("{sec}.{key}");
            if !KEYS.iter().any(|(s, ks)| *s == sec && ks.contains(&key)) {
                return Err(err(line, &full, "unknown key"));
            }
            if seen.iter().any(|(k, _)| *k == full) {
                return Err(err(line, &full, "duplicate key"));
            }
            seen.push((full.clone(), line));
            let f = full.as_str();
            match f {
                "domain.kind" => {
                    c.domain = match value {
                        "torus" => DomainKind::Torus,
                        "box" => DomainKind::UnitBox,
                        _ => return Err(err(line, f, format!("unknown domain {value:?}"))),
                    }
                }
                "domain.dim" => c.dim = num(line, f, value)?,
                "sampler.n" => c.process = ProcessChoice::Iid { n: num(line, f, value)? },
                "sampler.intensity" => c.process = ProcessChoice::Poisson { intensity: num(line, f, value)? },
                "sampler.seed" => c.seed = num(line, f, value)?,
                "sampler.cell" => c.cell = Some(num(line, f, value)?),
                "kernel.kernel" => c.kernel = parse_kernel(line, value)?,
                "kernel.r" => c.r = num(line, f, value)?,
                "kernel.h" => {} // checked below, once r is known
                "evolution.mode" => {
                    c.mode = parse_mode(value).ok_or_else(|| err(line, f, format!("unknown mode {value:?}")))?
                }
                "evolution.threshold" => c.threshold = num(line, f, value)?,
                "evolution.alpha" => c.alpha = num(line, f, value)?,
                "evolution.T" => c.final_time = num(line, f, value)?,
                "evolution.snapshots" => {
                    c.snapshots = if value.is_empty() { Vec::new() } else { list(line, f, value)? }
                }
                "evolution.initial" => c.initial = parse_shape(line, value)?,
                "evolution.profile" => {
                    c.profile = match value {
                        "sdf" => Profile::Sdf,
                        "indicator" => Profile::Indicator,
                        _ => return Err(err(line, f, format!("unknown profile {value:?}"))),
                    }
                }
                "heatflow.enabled" => c.heat = num(line, f, value)?,
                "heatflow.tau" => c.tau = num(line, f, value)?,
                "heatflow.T" => c.heat_time = num(line, f, value)?,
                "output.dir" => c.out = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
                "output.raster" => c.raster = num(line, f, value)?,
                "output.level" => c.level = if value.is_empty() { None } else { Some(num(line, f, value)?) },
                "verify.suites" => {
                    c.verify = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                _ => unreachable!("key table and match arms disagree on {f}"),
            }
        }
        let line_of = |key: &str| seen.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l);
        for key in ["domain.kind", "kernel.r", "evolution.T"] {
            if line_of(key) == 0 {
                return Err(err(0, key, "required key missing"));
            }
        }
        if line_of("sampler.n") == 0 && line_of("sampler.intensity") == 0 {
            return Err(err(0, "sampler.n", "one of sampler.n or sampler.intensity is required"));
        }
        if line_of("sampler.n") != 0 && line_of("sampler.intensity") != 0 {
            return Err(err(line_of("sampler.intensity"), "sampler.intensity", "conflicts with sampler.n"));
        }
        if let Some(l) = seen.iter().find(|(k, _)| k == "kernel.h").map(|(_, l)| *l) {
            let h: f64 = text
                .lines()
                .nth(l - 1)
                .and_then(|s| s.split('#').next())
                .and_then(|s| s.split_once('='))
                .map(|(_, v)| v.trim())
                .ok_or_else(|| err(l, "kernel.h", "malformed"))
                .and_then(|v| num(l, "kernel.h", v))?;
            if (h - c.r * c.r).abs() > 1e-12 * h.abs().max(c.r * c.r) {
                return Err(err(
                    l,
                    "kernel.h",
                    format!("h = {h} must equal r^2 = {} (kernel.r at line {})", c.r * c.r, line_of("kernel.r")),
                ));
            }
        }
        c.validate(&line_of)?;
        Ok(c)
    }

    /// Cross-field checks; `line_of` maps a key to its line (0 if absent).
    fn validate(&self, line_of: &dyn Fn(&str) -> usize) -> Result<(), CliError> {
        let e = |key: &str, msg: String| err(line_of(key), key, msg);
        if !(2..=6).contains(&self.dim) {
            return Err(e("domain.dim", format!("dimension {} outside 2..=6", self.dim)));
        }
        match self.process {
            ProcessChoice::Iid { n: 0 } => return Err(e("sampler.n", "need at least one point".into())),
            ProcessChoice::Poisson { intensity } if !(intensity > 0.0 && intensity.is_finite()) => {
                return Err(e("sampler.intensity", "intensity must be positive".into()))
            }
            _ => {}
        }
        let spec = self.kernel_spec().map_err(|m| e("kernel.kernel", m))?;
        let reach = spec.outer_radius();
        if reach.is_nan() || reach >= 0.5 {
            return Err(e("kernel.r", format!("search radius {reach} must stay below half the unit period")));
        }
        if let Some(cell) = self.cell {
            if cell < reach {
                return Err(e("sampler.cell", format!("index cell {cell} is smaller than the search radius {reach}")));
            }
        }
        if self.mode == ModeChoice::YoungAngle && self.domain == DomainKind::Torus {
            return Err(e("evolution.mode", "YoungAngle requires Box domain".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.alpha) {
            return Err(e("evolution.alpha", format!("contact angle {} outside [0, pi]", self.alpha)));
        }
        if !self.threshold.is_finite() {
            return Err(e("evolution.threshold", "threshold must be finite".into()));
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(e("evolution.T", "final time must be nonnegative".into()));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= self.final_time)) {
            return Err(e("evolution.snapshots", format!("snapshot time {t} outside [0, T]")));
        }
        let shape_dim = match &self.initial {
            Shape::Disk { center, .. } => center.len(),
            Shape::Ellipse { .. } => 2,
            Shape::HalfSpace { normal, .. } => normal.len(),
        };
        if shape_dim != self.dim {
            return Err(e("evolution.initial", format!("shape is {shape_dim}-dimensional, domain is {}", self.dim)));
        }
        if self.heat && !(self.tau > 0.0 && self.heat_time >= 0.0) {
            return Err(e("heatflow.tau", "need tau > 0 and T >= 0".into()));
        }
        if self.raster < 16 {
            return Err(e("output.raster", format!("raster resolution {} below 16", self.raster)));
        }
        for s in &self.verify {
            if s != "all" && !SUITES.contains(&s.as_str()) {
                return Err(e("verify.suites", format!("unknown suite {s:?}")));
            }
        }
        Ok(())
    }

    /// Re-runs the cross-field checks after command-line overrides.
    pub fn revalidate(&self) -> Result<(), CliError> {
        self.validate(&|_| 0)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, String> {
        let stencil = match &self.kernel {
            KernelChoice::Ball => Stencil::Ball,
            KernelChoice::Annulus(k) => Stencil::Annulus { kappa: *k },
            KernelChoice::Shrinking => Stencil::ShrinkingAnnulus { schedule: medflow::kernels::default_schedule() },
            KernelChoice::Radial(p) => Stencil::Radial(read_profile(p)?),
        };
        KernelSpec::new(stencil, self.r).map_err(|e| e.to_string())
    }

    pub fn core_mode(&self) -> Mode<f64> {
        match self.mode {
            ModeChoice::LevelSet => Mode::LevelSet,
            ModeChoice::Mbo => Mode::Mbo { threshold: self.threshold },
            ModeChoice::YoungAngle => Mode::YoungAngle { alpha: self.alpha },
        }
    }

    /// Level used for overlays and areas: the configured one, else the
    /// natural level of the initial profile.
    pub fn level(&self) -> f64 {
        self.level.unwrap_or(match (self.mode, self.profile) {
            (ModeChoice::Mbo, _) => self.threshold,
            (_, Profile::Indicator) => 0.5,
            (_, Profile::Sdf) => 0.0,
        })
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.domain {
            DomainKind::Torus => "torus",
            DomainKind::UnitBox => "box",
        };
        let _ = writeln!(s, "[domain]\nkind = {kind}\ndim = {}\n", self.dim);
        let _ = writeln!(s, "[sampler]");
        match self.process {
            ProcessChoice::Iid { n } => {
                let _ = writeln!(s, "n = {n}");
            }
            ProcessChoice::Poisson { intensity } => {
                let _ = writeln!(s, "intensity = {intensity:?}");
            }
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(cell) = self.cell {
            let _ = writeln!(s, "cell = {cell:?}");
        }
        let _ = writeln!(s, "\n[kernel]\nkernel = {}\nr = {:?}\n", self.kernel, self.r);
        let _ = writeln!(
            s,
            "[evolution]\nmode = {}\nthreshold = {:?}\nalpha = {:?}\nT = {:?}\nsnapshots = {}\ninitial = {}\nprofile = {}\n",
            self.mode.name(),
            self.threshold,
            self.alpha,
            self.final_time,
            fmt_list(&self.snapshots),
            self.initial,
            match self.profile {
                Profile::Sdf => "sdf",
                Profile::Indicator => "indicator",
            }
        );
        let _ = writeln!(s, "[heatflow]\nenabled = {}\ntau = {:?}\nT = {:?}\n", self.heat, self.tau, self.heat_time);
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "dir = {}", self.out.as_ref().map_or(String::new(), |p| p.display().to_string()));
        let _ = writeln!(s, "raster = {}", self.raster);
        let _ = writeln!(s, "level = {}", self.level.map_or(String::new(), |l| format!("{l:?}")));
        let _ = writeln!(s, "\n[verify]\nsuites = {}", self.verify.join(","));
        s
    }

    /// FNV-1a hash of the canonical text, as 16 hex digits. The output
    /// directory is left out so that moving a run does not change it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        fnv_hex(&c.to_text())
    }

    /// Suites to run, with `all` expanded.
    pub fn suites(&self) -> Vec<&'static str> {
        if self.verify.iter().any(|s| s == "all") {
            return SUITES.to_vec();
        }
        SUITES.iter().copied().filter(|s| self.verify.iter().any(|v| v == s)).collect()
    }
}

/// FNV-1a hash of `text` as 16 hex digits.
pub fn fnv_hex(text: &str) -> String {
    let mut h = fnv::FnvHasher::default();
    h.write(text.as_bytes());
    format!("{:016x}", h.finish())
}

/// Reads `(rho, K)` pairs separated by whitespace or a comma; `#` starts a comment.
fn read_profile(path: &Path) -> Result<RadialProfile<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut pts = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let v: Vec<f64> = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| format!("{}:{}: bad number {s:?}", path.display(), k + 1)))
            .collect::<Result<_, _>>()?;
        if v.len() != 2 {
            return Err(format!("{}:{}: expected two columns", path.display(), k + 1));
        }
        pts.push((v[0], v[1]));
    }
    RadialProfile::table(pts).map_err(|e| e.to_string())
}
