use std::f64::consts::PI;
use std::sync::Arc;

use medflow::domain::{Domain, PointCloud, SamplerConfig};
use medflow::LevelSetField;
use medflow_cli::raster::{rasterize, sample_nearest, to_gray, write_pgm, OVERLAY};

fn field(n: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> LevelSetField {
    let dom = Domain::torus(2).unwrap();
    let cloud = Arc::new(PointCloud::sample(&dom, &SamplerConfig::iid(n, 3), 0.05).unwrap());
    LevelSetField::from_fn(cloud, f).unwrap()
}

#[test]
fn constant_field_gives_a_uniform_image() {
    let img = rasterize(&field(2000, |_| 0.7), 32, None).unwrap();
    assert_eq!((img.width, img.height, img.pixels.len()), (32, 32, 1024));
    assert!(img.pixels.iter().all(|&p| p == img.pixels[0]));
}

#[test]
fn disk_indicator_has_the_disk_area() {
    let (rad, res) = (0.3, 256);
    let f = field(100_000, |x| if (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) < rad * rad { 1.0 } else { 0.0 });
    let img = rasterize(&f, res, None).unwrap();
    assert!(img.pixels.iter().all(|&p| p == 0 || p == 255));
    let lit = img.pixels.iter().filter(|&&p| p == 255).count() as f64;
    let expect = PI * rad * rad * (res * res) as f64;
    assert!((lit - expect).abs() <= 0.02 * expect, "{lit} vs {expect}");
}

#[test]
fn image_rows_run_top_down() {
    let f = field(20_000, |x| x[1]);
    let v = sample_nearest(&f, 16).unwrap();
    assert!(v[0] > 0.8 && v[16 * 15] < 0.2);
    let img = to_gray(&v, 16);
    assert!(img.pixels[0] > img.pixels[16 * 15]);
}

#[test]
fn overlay_marks_the_level_line() {
    let f = field(50_000, |x| x[0]);
    let res = 64;
    let img = rasterize(&f, res, Some(0.5)).unwrap();
    for row in img.pixels.chunks(res) {
        let marked: Vec<usize> = (0..res).filter(|&i| row[i] == OVERLAY).collect();
        assert!(!marked.is_empty() && marked.iter().all(|&i| (i as i64 - 31).abs() <= 2), "{marked:?}");
    }
}

#[test]
fn low_resolution_and_3d_are_rejected() {
    assert!(rasterize(&field(1000, |_| 0.0), 15, None).is_err());
    let dom = Domain::torus(3).unwrap();
    let cloud = Arc::new(PointCloud::sample(&dom, &SamplerConfig::iid(100, 1), 0.2).unwrap());
    assert!(rasterize(&LevelSetField::from_fn(cloud, |_| 0.0).unwrap(), 16, None).is_err());
}

#[test]
fn pgm_has_a_p5_header_and_raw_pixels() {
    let img = to_gray(&(0..256).map(|k| k as f64).collect::<Vec<_>>(), 16);
    let mut buf = Vec::new();
    write_pgm(&mut buf, &img, "# config=abc seed=4").unwrap();
    let head = b"P5\n# config=abc seed=4\n16 16\n255\n";
    assert_eq!(&buf[..head.len()], head);
    assert_eq!(&buf[head.len()..], &img.pixels[..]);
    assert_eq!((img.pixels[0], img.pixels[255]), (0, 255));
}

#[test]
fn rasters_are_deterministic() {
    let f = field(5000, |x| (6.0 * x[0]).sin() * x[1]);
    assert_eq!(rasterize(&f, 48, Some(0.0)).unwrap(), rasterize(&f, 48, Some(0.0)).unwrap());
}
