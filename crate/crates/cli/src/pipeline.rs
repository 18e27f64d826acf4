//! The run pipeline: sample, evolve, heat flow, verify. Stages run in order
//! and each writes its artifacts before the next starts, so a failed run
//! leaves everything up to the failing stage plus a MANIFEST saying where it
//! stopped.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use medflow::domain::{Domain, PointCloud, SamplerConfig};
use medflow::evolution::{contact_angle, write_snapshot, EvolutionConfig, Evolver, RunOptions};
use medflow::heatflow::{minimizing_movement, GraphField};
use medflow::LevelSetField;

use crate::config::{DomainKind, ModeChoice, ProcessChoice, Profile, RunConfig, Shape};
use crate::error::CliError;
use crate::output::{fmt_f64, Artifacts};
use crate::raster::{rasterize, write_pgm};
use crate::suites::{run_suite, COLUMNS};

/// Scalar results of a run, in a fixed order, for seed sweeps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub values: Vec<(String, f64)>,
    /// Checks that failed, as `test(parameter)`.
    pub failed_checks: Vec<String>,
}

pub fn build_domain(cfg: &RunConfig) -> Result<Domain<f64>, CliError> {
    Ok(match cfg.domain {
        DomainKind::Torus => Domain::torus(cfg.dim)?,
        DomainKind::UnitBox => Domain::unit_box(cfg.dim)?,
    })
}

/// Level set function of the configured initial shape at `x`: negative inside.
pub fn shape_value(cfg: &RunConfig, x: &[f64]) -> f64 {
    let delta = |a: f64, c: f64| {
        let d = a - c;
        if cfg.domain == DomainKind::Torus {
            d - d.round()
        } else {
            d
        }
    };
    let s = match &cfg.initial {
        Shape::Disk { center, radius } => {
            x.iter().zip(center).map(|(a, c)| delta(*a, *c).powi(2)).sum::<f64>().sqrt() - radius
        }
        Shape::Ellipse { center, a, b } => {
            let (u, v) = (delta(x[0], center[0]) / a, delta(x[1], center[1]) / b);
            ((u * u + v * v).sqrt() - 1.0) * a.min(*b)
        }
        Shape::HalfSpace { normal, offset } => x.iter().zip(normal).map(|(a, n)| a * n).sum::<f64>() - offset,
    };
    match cfg.profile {
        Profile::Sdf => s,
        Profile::Indicator => {
            if s < 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Runs every stage into `out` and writes the MANIFEST.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let mut art = Artifacts::new(out, &cfg.hash(), cfg.seed)?;
    let mut summary = Summary::default();
    let mut stage = "config";
    let res = stages(cfg, &mut art, &mut summary, &mut stage);
    let verdict = match res {
        Ok(()) if summary.failed_checks.is_empty() => Ok(()),
        Ok(()) => {
            stage = "verify";
            Err(CliError::Verification(summary.failed_checks.join(", ")))
        }
        Err(e) => Err(e),
    };
    match verdict {
        Ok(()) => {
            art.finish(None)?;
            Ok(summary)
        }
        Err(e) => {
            // keep the original error even if the manifest cannot be written
            if let Err(m) = art.finish(Some((stage, &e))) {
                warn!("could not write MANIFEST: {m}");
            }
            Err(e)
        }
    }
}

fn stages(
    cfg: &RunConfig,
    art: &mut Artifacts,
    summary: &mut Summary,
    stage: &mut &'static str,
) -> Result<(), CliError> {
    {
        let mut w = art.create("config.txt")?;
        writeln!(w, "{}", art.header())?;
        w.write_all(cfg.to_text().as_bytes())?;
        w.flush()?;
    }

    *stage = "sample";
    let spec = cfg.kernel_spec().map_err(CliError::InvalidParameter)?;
    let domain = build_domain(cfg)?;
    let sampler = match cfg.process {
        ProcessChoice::Iid { n } => SamplerConfig::iid(n, cfg.seed),
        ProcessChoice::Poisson { intensity } => SamplerConfig::poisson(intensity, cfg.seed),
    };
    let cell = cfg.cell.unwrap_or(spec.outer_radius());
    let cloud = Arc::new(PointCloud::sample(&domain, &sampler, cell)?);
    info!("sampled {} points", cloud.len());

    *stage = "evolve";
    let g = LevelSetField::from_fn(cloud.clone(), |x| shape_value(cfg, x))?;
    let ecfg = EvolutionConfig::new(spec.clone(), cfg.core_mode(), cfg.final_time)?;
    let ev = Evolver::new(cloud.clone(), ecfg)?;
    let mut times = cfg.snapshots.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let traj = ev.run(&g, &RunOptions { snapshot_times: times, stop_near_extremum: None })?;
    if traj.stats.empty_neighborhoods > 0 {
        warn!("{} point updates found no neighbor", traj.stats.empty_neighborhoods);
    }
    let level = cfg.level();
    let mut rows = Vec::new();
    let fields: Vec<(String, &LevelSetField)> = traj
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| (format!("snap_{k:03}"), s))
        .chain(std::iter::once(("final".to_string(), &traj.final_field)))
        .collect();
    for (name, f) in &fields {
        write_field(art, cfg, name, f, level)?;
        rows.push(metrics_row(cfg, name, f, level, spec.radius));
    }
    art.write_csv(
        "metrics.csv",
        &["snapshot", "t", "steps", "min", "max", "volume_below_level", "contact_angle_deg"],
        &rows,
    )?;
    let last = rows.last().expect("final row");
    let names = ["t", "steps", "min", "max", "volume_below_level", "contact_angle_deg"];
    for (k, n) in names.iter().enumerate() {
        if let Ok(v) = last[k + 1].parse::<f64>() {
            summary.values.push((format!("final_{n}"), v));
        }
    }

    if cfg.heat {
        *stage = "heatflow";
        let gf = GraphField::new(cloud.clone(), g.values().to_vec(), spec.radius)?;
        let ht = minimizing_movement(&gf, cfg.tau, cfg.heat_time)?;
        let rows: Vec<Vec<String>> = ht
            .times
            .iter()
            .zip(&ht.energies)
            .enumerate()
            .map(|(k, (t, e))| vec![k.to_string(), fmt_f64(*t), fmt_f64(*e)])
            .collect();
        art.write_csv("energy.csv", &["step", "t", "energy"], &rows)?;
        summary.values.push(("final_energy".into(), *ht.energies.last().expect("initial energy")));
    }

    let suites = cfg.suites();
    if !suites.is_empty() {
        *stage = "verify";
        let mut checks = Vec::new();
        for s in suites {
            checks.extend(run_suite(s, cfg)?);
        }
        let rows: Vec<Vec<String>> = checks.iter().map(|c| c.record()).collect();
        art.write_csv("verify.csv", COLUMNS, &rows)?;
        for c in &checks {
            summary.values.push((format!("{}({})", c.test, c.parameter), c.measured));
            if !c.pass {
                summary.failed_checks.push(format!("{}({})", c.test, c.parameter));
            }
        }
    }
    Ok(())
}

/// Snapshot text plus, for planar runs, a raster with the level overlaid.
fn write_field(
    art: &mut Artifacts,
    cfg: &RunConfig,
    name: &str,
    f: &LevelSetField,
    level: f64,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_snapshot(f, cfg.mode.name(), &mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?;
    let mut lines = text.splitn(3, '\n');
    let (a, b, rest) = (lines.next().unwrap_or(""), lines.next().unwrap_or(""), lines.next().unwrap_or(""));
    let mut w = art.create(&format!("{name}.txt"))?;
    write!(w, "{a}\n{b}\n{}\n{rest}", art.header())?;
    w.flush()?;
    if cfg.dim == 2 {
        let img = rasterize(f, cfg.raster, Some(level))?;
        let mut w = art.create(&format!("{name}.pgm"))?;
        write_pgm(&mut w, &img, art.header())?;
    }
    Ok(())
}

fn metrics_row(cfg: &RunConfig, name: &str, f: &LevelSetField, level: f64, r: f64) -> Vec<String> {
    let below = f.values().iter().filter(|&&v| v < level).count() as f64 / f.len() as f64;
    let volume = below * f.cloud().domain().volume();
    let angle = if cfg.mode == ModeChoice::YoungAngle && cfg.dim == 2 {
        match contact_angle(f, level, r) {
            Ok(a) if !a.is_empty() => fmt_f64(a.iter().sum::<f64>() / a.len() as f64 * 180.0 / std::f64::consts::PI),
            Ok(_) => String::new(),
            Err(e) => {
                warn!("{name}: no contact angle: {e}");
                String::new()
            }
        }
    } else {
        String::new()
    };
    vec![
        name.to_string(),
        fmt_f64(f.physical_time()),
        f.step_count().to_string(),
        fmt_f64(f.min()),
        fmt_f64(f.max()),
        fmt_f64(volume),
        angle,
    ]
}

/// Repeats the run for `count` consecutive seeds into `seed_<s>/` and writes
/// `sweep.csv` with the mean and standard deviation of every summary value.
pub fn run_sweep(cfg: &RunConfig, out: &Path, count: u64) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::InvalidParameter("seed sweep needs at least one seed".into()));
    }
    let mut art = Artifacts::new(out, &cfg.hash(), cfg.seed)?;
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for s in cfg.seed..cfg.seed + count {
        let mut c = cfg.clone();
        c.seed = s;
        match run(&c, &out.join(format!("seed_{s}"))) {
            Ok(sum) => summaries.push(sum),
            Err(CliError::Verification(m)) => {
                failed.push(format!("seed {s}: {m}"));
            }
            Err(e) => {
                art.finish(Some(("sweep", &e)))?;
                return Err(e);
            }
        }
    }
    let rows = aggregate(&summaries);
    art.write_csv("sweep.csv", &["metric", "runs", "mean", "std"], &rows)?;
    if failed.is_empty() {
        art.finish(None)
    } else {
        let e = CliError::Verification(failed.join("; "));
        art.finish(Some(("verify", &e)))?;
        Err(e)
    }
}

/// Mean and sample standard deviation per metric name, first-seen order.
pub fn aggregate(summaries: &[Summary]) -> Vec<Vec<String>> {
    let mut names: Vec<&str> = Vec::new();
    for s in summaries {
        for (n, _) in &s.values {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    names
        .iter()
        .map(|n| {
            let v: Vec<f64> =
                summaries.iter().filter_map(|s| s.values.iter().find(|(m, _)| m == n).map(|(_, x)| *x)).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
            } else {
                0.0
            };
            vec![n.to_string(), v.len().to_string(), fmt_f64(mean), fmt_f64(var.sqrt())]
        })
        .collect()
}
