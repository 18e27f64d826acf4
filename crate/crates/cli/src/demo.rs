//! Classification demo: three round clusters joined by thin bars, two
//! labels, MBO with the ball stencil. The interface leaves the middle cluster
//! and settles in a bar, where it is shortest.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use log::info;
use medflow::domain::{Domain, PointCloud, SamplerConfig};
use medflow::evolution::{EvolutionConfig, Evolver, Mode, RunOptions};
use medflow::{KernelSpec, LevelSetField};

use crate::config::fnv_hex;
use crate::error::CliError;
use crate::output::{fmt_f64, Artifacts};
use crate::raster::{sample_nearest, to_gray, write_pgm};

pub const CENTERS: [[f64; 2]; 3] = [[0.2, 0.5], [0.5, 0.5], [0.8, 0.5]];
pub const RADIUS: f64 = 0.12;
const BAR_HALF_WIDTH: f64 = 0.025;
/// Gray level of pixels outside the domain.
const BACKGROUND: u8 = 64;

fn carve(x: &[f64]) -> f64 {
    let disks = CENTERS.iter().map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - RADIUS);
    let bar = (x[1] - 0.5).abs() - BAR_HALF_WIDTH;
    let bar = bar.max(CENTERS[0][0] - x[0]).max(x[0] - CENTERS[2][0]);
    disks.fold(bar, f64::min)
}

/// Share of label 1 in each cluster.
pub fn cluster_shares(f: &LevelSetField) -> [f64; 3] {
    let mut ones = [0.0; 3];
    let mut all = [0.0; 3];
    for i in 0..f.len() {
        let x = f.cloud().point(i);
        for (k, c) in CENTERS.iter().enumerate() {
            if (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) < RADIUS * RADIUS {
                all[k] += 1.0;
                if f.values()[i] >= 0.5 {
                    ones[k] += 1.0;
                }
            }
        }
    }
    [ones[0] / all[0], ones[1] / all[1], ones[2] / all[2]]
}

/// Runs the demo into `out`. The partition counts as stable when every
/// cluster has the same majority label over the last two snapshots.
pub fn run(out: &Path, n: usize, seed: u64, raster: usize) -> Result<bool, CliError> {
    let (r, t_end) = (0.03, 0.02);
    let mut art = Artifacts::new(out, &fnv_hex(&format!("demo n={n} r={r} T={t_end}")), seed)?;
    let dom = Domain::carved(vec![0.0, 0.0], vec![1.0, 1.0], Arc::new(carve))?;
    let cloud = Arc::new(PointCloud::sample(&dom, &SamplerConfig::iid(n, seed), r)?);
    let g = LevelSetField::from_fn(cloud.clone(), |x| if x[0] > 0.45 { 1.0 } else { 0.0 })?;
    let cfg = EvolutionConfig::new(KernelSpec::ball(r)?, Mode::Mbo { threshold: 0.5 }, t_end)?;
    let ev = Evolver::new(cloud, cfg)?;
    let times: Vec<f64> = (1..=4).map(|k| t_end * k as f64 / 4.0).collect();
    let traj = ev.run(&g, &RunOptions { snapshot_times: times, stop_near_extremum: None })?;
    let mut rows = Vec::new();
    for f in std::iter::once(&g).chain(&traj.snapshots) {
        let s = cluster_shares(f);
        rows.push(vec![fmt_f64(f.physical_time()), fmt_f64(s[0]), fmt_f64(s[1]), fmt_f64(s[2])]);
    }
    art.write_csv("demo.csv", &["t", "share_left", "share_middle", "share_right"], &rows)?;
    let k = traj.snapshots.len();
    let majority = |f: &LevelSetField| cluster_shares(f).map(|s| s >= 0.5);
    let stable = k >= 2 && majority(&traj.snapshots[k - 1]) == majority(&traj.snapshots[k - 2]);
    info!("demo shares {:?}, stable {stable}", cluster_shares(&traj.final_field));

    let values = sample_nearest(&traj.final_field, raster)?;
    let mut img = to_gray(&values, raster);
    for j in 0..raster {
        let y = 1.0 - (j as f64 + 0.5) / raster as f64;
        for i in 0..raster {
            if carve(&[(i as f64 + 0.5) / raster as f64, y]) >= 0.0 {
                img.pixels[j * raster + i] = BACKGROUND;
            }
        }
    }
    let mut w = art.create("demo.pgm")?;
    write_pgm(&mut w, &img, art.header())?;
    w.flush()?;
    art.finish(None)?;
    Ok(stable)
}
