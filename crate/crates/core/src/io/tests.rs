use super::*;
use crate::flow::{DtPolicy, Scheme};
use crate::grid::{Field, Grid};
use crate::init::Shape;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_vec(grid, (0..grid.len()).map(|_| rng.gen_range(-1e3..1e3)).collect()).unwrap()
}

#[test]
fn snapshot_roundtrip_is_bitwise() {
    let grids = [
        Grid::new(&[16, 24], &[(-1.0, 1.0), (0.1, 0.7)]).unwrap(),
        Grid::cube(8, -1.1, 2.2).unwrap(),
    ];
    for (k, g) in grids.iter().enumerate() {
        let mut u = random_field(g, k as u64);
        u.values_mut()[0] = -0.0;
        u.values_mut()[1] = f64::MIN_POSITIVE / 4.0;
        let bytes = encode_snapshot(&u, 0.1 + 0.2);
        let (v, t) = decode_snapshot(&bytes).unwrap();
        assert_eq!(t.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(v.grid(), u.grid());
        assert!(u.values().iter().zip(v.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn snapshot_header_and_length() {
    let g = Grid::square(256, -1.0, 1.0).unwrap();
    let bytes = encode_snapshot(&Field::zeros(&g), 0.0);
    let text = String::from_utf8_lossy(&bytes[..64]).to_string();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("wfgrid v1"));
    assert_eq!(lines.next(), Some("ndim 2"));
    assert_eq!(lines.next(), Some("dims 256 256"));
    let header_len = bytes.windows(2).position(|w| w == b"\n\n").unwrap() + 2;
    assert_eq!(bytes.len() - header_len, 256 * 256 * 8);
}

#[test]
fn corrupt_snapshots_are_rejected() {
    let g = Grid::square(8, 0.0, 1.0).unwrap();
    let good = encode_snapshot(&Field::zeros(&g), 1.0);
    let mut bad_magic = good.clone();
    bad_magic[0] = b'x';
    assert!(matches!(decode_snapshot(&bad_magic), Err(IoError::Format(_))));
    let bumped = String::from_utf8_lossy(&good).replacen("wfgrid v1", "wfgrid v2", 1).into_bytes();
    assert!(decode_snapshot(&bumped).unwrap_err().to_string().contains("version"));
    assert!(decode_snapshot(&good[..good.len() - 1]).is_err());
    let mut long = good.clone();
    long.push(0);
    assert!(decode_snapshot(&long).is_err());
    assert!(decode_snapshot(b"wfgrid v1\nndim 2\n").is_err());
}

#[test]
fn snapshot_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::square(8, 0.0, 1.0).unwrap();
    let u = random_field(&g, 9);
    let path = dir.path().join("u.wfg");
    write_snapshot(&u, 2.5, &path).unwrap();
    let (v, t) = read_snapshot(&path).unwrap();
    assert_eq!((v, t), (u, 2.5));
}

fn row(step: u64) -> EnergyRow {
    EnergyRow {
        step,
        t: 1.0 / 3.0,
        dt: 1e-7,
        h_eps: std::f64::consts::PI,
        w_eps: 12.566370614359172,
        pen_a_tilde: 1e-300,
        bellettini_discrete: -0.0,
        bulk: -15.0,
        total: 0.1 + 0.2,
        max_rate: 4.9e-324,
        ncomp4: 9,
        ncomp8: 8,
    }
}

#[test]
fn energy_csv_roundtrip() {
    assert_eq!(energy_csv(&[]), format!("{ENERGY_CSV_HEADER}\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("energy.csv");
    let rows = vec![row(0), row(10)];
    write_energy_csv(&rows, &path).unwrap();
    let back = read_energy_csv(&path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.to_csv_line(), b.to_csv_line());
        assert_eq!(a.total.to_bits(), b.total.to_bits());
        assert_eq!(a.max_rate.to_bits(), b.max_rate.to_bits());
    }
    assert!(EnergyRow::parse_csv_line("1,2,3").is_err());
}

proptest! {
    #[test]
    fn energy_values_roundtrip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let mut r = row(1);
        r.w_eps = v;
        let back = EnergyRow::parse_csv_line(&r.to_csv_line()).unwrap();
        prop_assert_eq!(back.w_eps.to_bits(), v.to_bits());
    }
}

#[test]
fn pgm_black_white_and_disk() {
    let g = Grid::new(&[8, 12], &[(0.0, 1.0), (0.0, 1.5)]).unwrap();
    let black = encode_pgm(&Field::zeros(&g)).unwrap();
    let header = b"P5\n12 8\n255\n";
    assert_eq!(&black[..header.len()], header);
    assert_eq!(black.len(), header.len() + 96);
    assert!(black[header.len()..].iter().all(|&b| b == 0));
    let white = encode_pgm(&Field::constant(&g, 3.0)).unwrap();
    assert!(white[header.len()..].iter().all(|&b| b == 255));

    let g = Grid::square(64, -1.0, 1.0).unwrap();
    let scene = crate::init::Scene::new(vec![Shape::Disk { center: [0.0, 0.0], radius: 0.5 }]);
    let u = crate::init::phase_from_scene(&scene, &g, 0.05).unwrap();
    let img = encode_pgm(&u).unwrap();
    let px = &img[b"P5\n64 64\n255\n".len()..];
    assert_eq!(px[32 * 64 + 32], 255);
    assert_eq!(px[0], 0);
}

#[test]
fn pgm_of_3d_fields_writes_mid_planes() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(&[8, 10, 12], &[(0.0, 1.0); 3]).unwrap();
    // u = 1 only on the plane x-index 4
    let u = Field::from_fn(&g, |x| if (x[0] * 8.0) as usize == 4 { 1.0 } else { 0.0 });
    let files = write_pgm(&u, &dir.path().join("u.pgm")).unwrap();
    assert_eq!(files.len(), 3);
    let x_slice = std::fs::read(&files[0]).unwrap();
    assert!(x_slice.starts_with(b"P5\n12 10\n255\n"));
    assert!(x_slice[b"P5\n12 10\n255\n".len()..].iter().all(|&b| b == 255));
    let z = mid_plane(&u, 2).unwrap();
    assert_eq!(z.grid().dims(), &[8, 10]);
    assert_eq!(z.values()[4 * 10], 1.0);
    assert_eq!(z.values()[3 * 10], 0.0);
}

const MINIMAL: &str = "scheme = standard-semiimplicit\n[grid]\ndims = 32 32\n[params]\neps = 0.05\n";

#[test]
fn minimal_config_gets_defaults() {
    let c = SimConfig::parse(MINIMAL, &[]).unwrap();
    assert_eq!(c.scheme, Scheme::StandardSemiImplicit);
    assert_eq!(c.grid.dims(), &[32, 32]);
    assert_eq!((c.grid.lo()[0], c.grid.hi()[1]), (0.0, 1.0));
    assert_eq!(c.params.eps, 0.05);
    assert_eq!((c.params.gamma, c.params.delta, c.params.delta_w), (0.0, 0.1, 0.01));
    assert_eq!(c.time.tol_stationary, 1e-3);
    assert_eq!(c.output.energy_every, 10);
    assert!(c.output.formats.csv && c.output.formats.snapshot && !c.output.formats.pgm);
    assert!(c.scene.shapes.is_empty());
    assert_eq!(c.dt_policy(), DtPolicy::Fixed(5e-6));
}

#[test]
fn unknown_keys_name_the_line() {
    let text = "scheme = modified\n[grid]\ndims = 32 32\n\n[params]\nepz = 0.1\n";
    let err = SimConfig::parse(text, &[]).unwrap_err();
    assert_eq!(
        err,
        ConfigError::UnknownKey { at: "line 6".into(), section: "[params]".into(), key: "epz".into() }
    );
    assert!(err.to_string().contains("line 6") && err.to_string().contains("epz"));
    let err = SimConfig::parse("[grids]\n", &[]).unwrap_err();
    assert!(matches!(err, ConfigError::UnknownSection { .. }));
    let err = SimConfig::parse("scheme modified\n", &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Syntax { ref at, .. } if at == "line 1"));
}

#[test]
fn invalid_values_name_the_field() {
    let text = format!("{MINIMAL}[time]\ndt = fast\n");
    let err = SimConfig::parse(&text, &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { ref at, ref field, .. } if at == "line 7" && field == "time.dt"));
    let err = SimConfig::parse("scheme = modified\n[grid]\ndims = 32 32\n", &[]).unwrap_err();
    assert_eq!(err, ConfigError::Missing("params.eps".into()));
    let err = SimConfig::parse(&format!("{MINIMAL}[ic]\nshape = sphere 0 0 0 0.1\n"), &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "ic.shape"));
    let err = SimConfig::parse("scheme = implicit\n", &[]).unwrap_err();
    assert!(err.to_string().contains("scheme"));
}

#[test]
fn presets_fill_in_the_rest() {
    let c = SimConfig::parse("[ic]\npreset = two_circles\n", &[]).unwrap();
    let radii: Vec<f64> = c
        .scene
        .shapes
        .iter()
        .map(|s| match s {
            Shape::Disk { radius, .. } => *radius,
            _ => 0.0,
        })
        .collect();
    assert_eq!(radii, vec![0.2, 0.3]);
    assert_eq!((c.grid.lo()[0], c.grid.hi()[0]), (-1.0, 1.0));
    assert_eq!(c.params.alpha_bulk, 15.0);
    assert_eq!(c.preset.as_deref(), Some("two_circles"));

    let c = SimConfig::parse("scheme = bellettini\n[ic]\npreset = two_circles\n[params]\neps = 0.05\n", &[]).unwrap();
    assert_eq!(c.scheme, Scheme::BellettiniExplicit);
    assert_eq!((c.params.eps, c.params.alpha_bulk), (0.05, 15.0));
    assert!(matches!(c.dt_policy(), DtPolicy::Probed { safety, .. } if safety == 0.5));
}

#[test]
fn overrides_replace_file_values() {
    let overrides = vec![
        "params.eps=0.02".to_string(),
        "scheme = bellettini".to_string(),
        "ic.shape=disk 0.5 0.5 0.2".to_string(),
        "time.c_dt=1e-3".to_string(),
        "time.dt_max=1e-5".to_string(),
    ];
    let c = SimConfig::parse(MINIMAL, &overrides).unwrap();
    assert_eq!(c.params.eps, 0.02);
    assert_eq!(c.scheme, Scheme::BellettiniExplicit);
    assert_eq!(c.scene.shapes.len(), 1);
    assert_eq!(c.dt_policy(), DtPolicy::Adaptive { c_dt: 1e-3, dt_min: 1e-14, dt_max: 1e-5 });
    let err = SimConfig::parse(MINIMAL, &["params.epz=1".to_string()]).unwrap_err();
    assert!(err.to_string().contains("override 'params.epz=1'"));
}

#[test]
fn full_config() {
    let text = "\
# two disks on the unit square
scheme = modified
[grid]
dims = 64 48
extent = 0 1 0 0.75
[params]
eps = 0.05   # interface width
gamma = 0.25
alpha_pen = 0.5
delta = 0.01
delta_w = 0.001
bellettini_factor = literal
[time]
t_end = 1e-2
dt = 1e-6
max_steps = 100
stationary_steps = 3
[solver]
rel_tol = 1e-10
max_iters = 500
preconditioner = ilu0
[ic]
shape = disk 0.3 0.4 0.1
shape = ellipse 0.7 0.4 0.1 0.2
[output]
directory = runs/a
snapshot_every = 50
energy_every = 5
formats = csv, pgm contour
";
    let c = SimConfig::parse(text, &[]).unwrap();
    assert_eq!(c.grid.dims(), &[64, 48]);
    assert_eq!(c.grid.hi()[1], 0.75);
    assert_eq!((c.params.gamma, c.params.alpha_pen, c.params.delta, c.params.delta_w), (0.25, 0.5, 0.01, 0.001));
    assert_eq!(c.bellettini_factor, crate::flow::BellettiniFactor::Literal);
    assert_eq!(c.time.max_steps, Some(100));
    assert_eq!(c.linear.preconditioner, crate::linsolve::Preconditioner::Ilu0);
    assert_eq!(c.scene.shapes.len(), 2);
    assert_eq!(c.output.directory, std::path::PathBuf::from("runs/a"));
    assert_eq!(c.output.formats, Formats { csv: true, snapshot: false, pgm: true, contour: true });
    let s = c.run_settings();
    assert_eq!((s.t_end, s.stationary_steps, s.max_steps), (1e-2, 3, Some(100)));
    let u = c.initial_field();
    assert_eq!(u.len(), 64 * 48);
}
