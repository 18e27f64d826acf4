use std::path::PathBuf;

use medflow_cli::config::{DomainKind, KernelChoice, ModeChoice, ProcessChoice, Profile, Shape};
use medflow_cli::{CliError, RunConfig};
use proptest::prelude::*;

const MINIMAL: &str = "[domain]\nkind = torus\n[sampler]\nn = 5000\n[kernel]\nr = 0.05\n[evolution]\nT = 0.01\n";

fn config_err(text: &str) -> (usize, String, String) {
    match RunConfig::parse(text) {
        Err(CliError::Config { line, key, msg }) => (line, key, msg),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_gets_documented_defaults() {
    let c = RunConfig::parse(MINIMAL).unwrap();
    assert_eq!(c.kernel, KernelChoice::Annulus(0.9));
    assert_eq!(c.mode, ModeChoice::LevelSet);
    assert_eq!(c.seed, 0);
    assert_eq!(c.process, ProcessChoice::Iid { n: 5000 });
    assert_eq!((c.r, c.final_time, c.dim), (0.05, 0.01, 2));
    assert_eq!(c.domain, DomainKind::Torus);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = format!("# run\n\n{}  # trailing\n", MINIMAL.replace("n = 5000", "n = 5000   # points"));
    assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::parse(MINIMAL).unwrap());
}

#[test]
fn unknown_key_names_line_and_key() {
    let (line, key, msg) = config_err(&format!("{MINIMAL}[kernel]\nradius = 0.1\n"));
    assert_eq!((line, key.as_str()), (10, "kernel.radius"));
    assert!(msg.contains("unknown key"));
}

#[test]
fn unknown_section_is_an_error() {
    let (line, key, _) = config_err(&format!("{MINIMAL}[plots]\n"));
    assert_eq!((line, key.as_str()), (9, "plots"));
}

#[test]
fn h_must_equal_r_squared() {
    let (line, key, msg) = config_err(&MINIMAL.replace("r = 0.05", "r = 0.05\nh = 0.01"));
    assert_eq!((line, key.as_str()), (7, "kernel.h"));
    assert!(msg.contains("kernel.r"), "{msg}");
    assert!(RunConfig::parse(&MINIMAL.replace("r = 0.05", "r = 0.05\nh = 0.0025")).is_ok());
}

#[test]
fn young_angle_needs_a_box() {
    let (_, key, msg) = config_err(&MINIMAL.replace("T = 0.01", "T = 0.01\nmode = youngangle"));
    assert_eq!(key, "evolution.mode");
    assert!(msg.contains("YoungAngle requires Box"), "{msg}");
    let boxed = MINIMAL.replace("torus", "box").replace("T = 0.01", "T = 0.01\nmode = youngangle");
    assert_eq!(RunConfig::parse(&boxed).unwrap().mode, ModeChoice::YoungAngle);
}

#[test]
fn index_cell_must_cover_the_stencil() {
    let (_, key, _) = config_err(&MINIMAL.replace("n = 5000", "n = 5000\ncell = 0.02"));
    assert_eq!(key, "sampler.cell");
    assert!(RunConfig::parse(&MINIMAL.replace("n = 5000", "n = 5000\ncell = 0.05")).is_ok());
}

#[test]
fn other_violations_are_reported() {
    for (text, key) in [
        (MINIMAL.replace("n = 5000", "n = 5000\nn = 10"), "sampler.n"),
        (MINIMAL.replace("n = 5000", "n = 5000\nintensity = 10"), "sampler.intensity"),
        (MINIMAL.replace("r = 0.05", "r = 0.05\nkernel = gauss"), "kernel.kernel"),
        (MINIMAL.replace("r = 0.05", "r = 0.7"), "kernel.r"),
        (MINIMAL.replace("T = 0.01", "T = 0.01\nsnapshots = 0.005,0.02"), "evolution.snapshots"),
        (MINIMAL.replace("T = 0.01", "T = 0.01\nalpha = 4"), "evolution.alpha"),
        (MINIMAL.replace("T = 0.01", "T = 0.01\ninitial = disk:0.5,0.5,0.5,0.2"), "evolution.initial"),
        (format!("{MINIMAL}[output]\nraster = 8\n"), "output.raster"),
        (format!("{MINIMAL}[verify]\nsuites = dkw,spheres\n"), "verify.suites"),
        (MINIMAL.replace("kind = torus\n", ""), "domain.kind"),
        (MINIMAL.replace("n = 5000\n", ""), "sampler.n"),
        (MINIMAL.replace("n = 5000", "n = many"), "sampler.n"),
    ] {
        let (_, k, _) = config_err(&text);
        assert_eq!(k, key, "{text}");
    }
}

#[test]
fn radial_kernel_reads_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.txt");
    std::fs::write(&path, "# rho K\n0 1\n0.5, 1\n1 0\n").unwrap();
    let text = MINIMAL.replace("r = 0.05", &format!("r = 0.05\nkernel = radial:{}", path.display()));
    let c = RunConfig::parse(&text).unwrap();
    assert_eq!(c.kernel, KernelChoice::Radial(path));
    assert!(c.kernel_spec().unwrap().is_weighted());
    std::fs::write(dir.path().join("bad.txt"), "0 1 2\n").unwrap();
    let bad =
        MINIMAL.replace("r = 0.05", &format!("r = 0.05\nkernel = radial:{}", dir.path().join("bad.txt").display()));
    assert!(RunConfig::parse(&bad).is_err());
}

#[test]
fn hash_ignores_the_output_directory_only() {
    let a = RunConfig::parse(MINIMAL).unwrap();
    let mut b = a.clone();
    b.out = Some(PathBuf::from("elsewhere"));
    assert_eq!(a.hash(), b.hash());
    b.seed = 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let kernel = prop_oneof![
        Just(KernelChoice::Ball),
        (0.0f64..0.99).prop_map(KernelChoice::Annulus),
        Just(KernelChoice::Shrinking),
    ];
    let mode = prop_oneof![Just(ModeChoice::LevelSet), Just(ModeChoice::Mbo), Just(ModeChoice::YoungAngle)];
    (
        (
            2usize..4,
            any::<bool>(),
            prop_oneof![
                (1usize..1_000_000).prop_map(|n| ProcessChoice::Iid { n }),
                (1.0f64..1e6).prop_map(|intensity| ProcessChoice::Poisson { intensity })
            ],
        ),
        (any::<u64>(), kernel, 0.001f64..0.2, proptest::option::of(0.0f64..0.1)),
        (mode, -1.0f64..2.0, 0.0f64..std::f64::consts::PI, 0.0f64..1.0, 0usize..4),
        (any::<bool>(), 1e-5f64..1.0, 0.0f64..1.0, 16usize..2048, proptest::option::of(-1.0f64..1.0)),
        (proptest::sample::subsequence(vec!["consistency", "dkw", "sphere", "tl2"], 0..4), any::<bool>(), 0usize..3),
    )
        .prop_map(|(dom, ker, evo, rest, extra)| {
            let (dim, boxed, process) = dom;
            let (seed, kernel, r, cell_pad) = ker;
            let (mut mode, threshold, alpha, final_time, nsnap) = evo;
            let (heat, tau, heat_time, raster, level) = rest;
            let (suites, indicator, shape) = extra;
            if !boxed && mode == ModeChoice::YoungAngle {
                mode = ModeChoice::Mbo;
            }
            let reach = r; // every kernel here has outer radius r
            let initial = match shape {
                0 => Shape::Disk { center: vec![0.5; dim], radius: 0.25 },
                1 if dim == 2 => Shape::Ellipse { center: [0.4, 0.6], a: 0.3, b: 0.1 },
                _ => {
                    let mut n = vec![0.0; dim];
                    n[0] = 1.0;
                    Shape::HalfSpace { normal: n, offset: 0.5 }
                }
            };
            RunConfig {
                domain: if boxed { DomainKind::UnitBox } else { DomainKind::Torus },
                dim,
                process,
                seed,
                cell: cell_pad.map(|p| reach + p),
                kernel,
                r,
                mode,
                threshold,
                alpha,
                final_time,
                snapshots: (0..nsnap).map(|k| final_time * k as f64 / 4.0).collect(),
                initial,
                profile: if indicator { Profile::Indicator } else { Profile::Sdf },
                heat,
                tau,
                heat_time,
                out: if heat { Some(PathBuf::from("runs/a")) } else { None },
                raster,
                level,
                verify: suites.into_iter().map(String::from).collect(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_text_round_trips(c in arb_config()) {
        let text = c.to_text();
        let back = RunConfig::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text(), text);
    }
}

#[test]
fn readme_example_config_parses() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let block = readme.split("```ini\n").nth(1).unwrap().split("```").next().unwrap();
    let c = RunConfig::parse(block).unwrap();
    assert_eq!((c.mode, c.domain, c.heat), (ModeChoice::YoungAngle, DomainKind::UnitBox, true));
}
