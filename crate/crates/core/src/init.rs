//! Initial phase fields built from simple shapes as `u = q(d/ε)`, with `d`
//! the signed distance (positive inside) and `q` the optimal profile.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::energy::ModelParams;
use crate::flow::Scheme;
use crate::grid::{Field, Grid, GridError, MAX_DIM};
use crate::potential::profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("cannot parse shape '{line}': {reason}")]
    Shape { line: String, reason: String },
    #[error("shape '{shape}' needs a {needed}-dimensional grid, got {ndim}")]
    Dimension { shape: String, needed: usize, ndim: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Infinite cylinder along `axis`; `center` gives the remaining two
    /// coordinates in increasing axis order.
    Cylinder { axis: usize, center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
}

impl Shape {
    pub fn ndim(&self) -> usize {
        match self {
            Shape::Disk { .. } | Shape::Ellipse { .. } => 2,
            Shape::Sphere { .. } | Shape::Cylinder { .. } => 3,
        }
    }

    pub fn center(&self) -> [f64; MAX_DIM] {
        match *self {
            Shape::Disk { center, .. } | Shape::Ellipse { center, .. } => [center[0], center[1], 0.0],
            Shape::Sphere { center, .. } => center,
            Shape::Cylinder { axis, center, .. } => {
                let mut c = [0.0; MAX_DIM];
                for (slot, v) in other_axes(axis).into_iter().zip(center) {
                    c[slot] = v;
                }
                c
            }
        }
    }

    /// Signed distance from the displacement `x - center`. Exact except for
    /// ellipses, which use `(1 - √Σ(x_a/r_a)²) min r_a`.
    fn distance_from_offset(&self, dx: &[f64; MAX_DIM]) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => radius - dx[0].hypot(dx[1]),
            Shape::Sphere { radius, .. } => radius - (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt(),
            Shape::Cylinder { axis, radius, .. } => {
                let [a, b] = other_axes(axis);
                radius - dx[a].hypot(dx[b])
            }
            Shape::Ellipse { semi_axes, .. } => {
                let r = (dx[0] / semi_axes[0]).hypot(dx[1] / semi_axes[1]);
                (1.0 - r) * semi_axes[0].min(semi_axes[1])
            }
        }
    }

    /// Signed distance in free space.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        let c = self.center();
        let mut dx = [0.0; MAX_DIM];
        for a in 0..self.ndim().min(x.len()) {
            dx[a] = x[a] - c[a];
        }
        self.distance_from_offset(&dx)
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok = match self {
            Shape::Disk { radius, .. } | Shape::Sphere { radius, .. } => positive(*radius),
            Shape::Cylinder { axis, radius, .. } => *axis < 3 && positive(*radius),
            Shape::Ellipse { semi_axes, .. } => semi_axes.iter().all(|&r| positive(r)),
        };
        if ok {
            Ok(())
        } else {
            Err("radii must be positive and the cylinder axis one of x, y, z".into())
        }
    }
}

fn other_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Parses `disk cx cy r`, `sphere cx cy cz r`, `cylinder <x|y|z> c1 c2 r`
/// and `ellipse cx cy a b`.
impl FromStr for Shape {
    type Err = InitError;

    fn from_str(line: &str) -> Result<Self, InitError> {
        let err = |reason: &str| InitError::Shape {
            line: line.trim().to_string(),
            reason: reason.to_string(),
        };
        let mut words = line.split_whitespace();
        let kind = words.next().ok_or_else(|| err("empty shape"))?;
        let rest: Vec<&str> = words.collect();
        let numbers = |skip: usize, count: usize| -> Result<Vec<f64>, InitError> {
            if rest.len() != skip + count {
                return Err(err(&format!("expected {} values after '{kind}'", skip + count)));
            }
            rest[skip..]
                .iter()
                .map(|w| w.parse::<f64>().map_err(|_| err(&format!("'{w}' is not a number"))))
                .collect()
        };
        let shape = match kind {
            "disk" | "circle" => {
                let v = numbers(0, 3)?;
                Shape::Disk { center: [v[0], v[1]], radius: v[2] }
            }
            "sphere" => {
                let v = numbers(0, 4)?;
                Shape::Sphere { center: [v[0], v[1], v[2]], radius: v[3] }
            }
            "cylinder" => {
                let v = numbers(1, 3)?;
                let axis = match rest[0] {
                    "x" | "0" => 0,
                    "y" | "1" => 1,
                    "z" | "2" => 2,
                    other => return Err(err(&format!("unknown axis '{other}'"))),
                };
                Shape::Cylinder { axis, center: [v[0], v[1]], radius: v[2] }
            }
            "ellipse" => {
                let v = numbers(0, 4)?;
                Shape::Ellipse { center: [v[0], v[1]], semi_axes: [v[2], v[3]] }
            }
            other => return Err(err(&format!("unknown shape kind '{other}'"))),
        };
        shape.validate().map_err(|r| err(&r))?;
        Ok(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Disk { center, radius } => write!(f, "disk {} {} {}", center[0], center[1], radius),
            Shape::Sphere { center, radius } => {
                write!(f, "sphere {} {} {} {}", center[0], center[1], center[2], radius)
            }
            Shape::Cylinder { axis, center, radius } => {
                let name = ["x", "y", "z"][*axis];
                write!(f, "cylinder {name} {} {} {}", center[0], center[1], radius)
            }
            Shape::Ellipse { center, semi_axes } => {
                write!(f, "ellipse {} {} {} {}", center[0], center[1], semi_axes[0], semi_axes[1])
            }
        }
    }
}

/// A union of shapes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub shapes: Vec<Shape>,
}

impl Scene {
    pub fn new(shapes: Vec<Shape>) -> Self {
        Scene { shapes }
    }

    /// Largest per-shape signed distance; `-inf` for an empty scene.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        self.shapes
            .iter()
            .map(|s| s.signed_distance(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Like [`Scene::signed_distance`], measuring each shape from its nearest
    /// periodic image on `grid`.
    pub fn signed_distance_periodic(&self, grid: &Grid, x: &[f64]) -> f64 {
        self.shapes
            .iter()
            .map(|s| s.distance_from_offset(&grid.periodic_delta(x, &s.center())))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_dimension(&self, ndim: usize) -> Result<(), InitError> {
        match self.shapes.iter().find(|s| s.ndim() != ndim) {
            Some(s) => Err(InitError::Dimension {
                shape: s.to_string(),
                needed: s.ndim(),
                ndim,
            }),
            None => Ok(()),
        }
    }
}

/// `q(d/ε)` at every cell center. Values are kept strictly inside `(0, 1)`;
/// an empty scene is treated as lying one domain diagonal away.
pub fn phase_from_scene(scene: &Scene, grid: &Grid, eps: f64) -> Result<Field, InitError> {
    scene.check_dimension(grid.ndim())?;
    let far = -(0..grid.ndim()).map(|a| grid.length(a).powi(2)).sum::<f64>().sqrt();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.center(i);
            let d = scene.signed_distance_periodic(grid, &x[..grid.ndim()]).max(far);
            profile(d / eps).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        })
        .collect();
    Ok(Field::from_vec(grid, values)?)
}

/// A named initial condition with the domain and parameters it was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub scene: Scene,
    pub extent: Vec<(f64, f64)>,
    /// Suggested resolution.
    pub dims: Vec<usize>,
    pub params: ModelParams,
    pub scheme: Scheme,
}

impl Preset {
    pub fn grid(&self) -> Result<Grid, InitError> {
        Ok(Grid::new(&self.dims, &self.extent)?)
    }

    /// The preset scene on its suggested grid.
    pub fn field(&self) -> Result<Field, InitError> {
        phase_from_scene(&self.scene, &self.grid()?, self.params.eps)
    }

    pub fn field_on(&self, grid: &Grid) -> Result<Field, InitError> {
        phase_from_scene(&self.scene, grid, self.params.eps)
    }
}

pub const PRESET_NAMES: [&str; 8] = [
    "nine_circles",
    "nonsymmetric_circles",
    "two_circles",
    "two_disks_unit",
    "two_spheres",
    "two_cylinders",
    "ellipse_rect",
    "single_circle_r01",
];

fn disk(x: f64, y: f64, r: f64) -> Shape {
    Shape::Disk { center: [x, y], radius: r }
}

pub fn preset(name: &str) -> Result<Preset, InitError> {
    let square = vec![(-1.0, 1.0); 2];
    let cube = vec![(-1.0, 1.0); 3];
    let p = match name {
        "nine_circles" => {
            let mut shapes = Vec::new();
            for &x in &[-2.0 / 3.0, 0.0, 2.0 / 3.0] {
                for &y in &[-2.0 / 3.0, 0.0, 2.0 / 3.0] {
                    shapes.push(disk(x, y, 0.1));
                }
            }
            Preset {
                name: "nine_circles",
                description: "nine equal disks of radius 0.1 on a 3x3 lattice; symmetric collisions",
                scene: Scene::new(shapes),
                extent: square,
                dims: vec![128, 128],
                params: ModelParams::new(0.1),
                scheme: Scheme::ModifiedSplit,
            }
        }
        "nonsymmetric_circles" => Preset {
            name: "nonsymmetric_circles",
            description: "five disjoint disks of radii 0.10 to 0.20 at fixed irregular positions",
            scene: Scene::new(vec![
                disk(-0.55, -0.50, 0.10),
                disk(0.10, -0.55, 0.12),
                disk(0.60, -0.15, 0.15),
                disk(-0.45, 0.35, 0.18),
                disk(0.30, 0.50, 0.20),
            ]),
            extent: square,
            dims: vec![128, 128],
            params: ModelParams::new(0.1),
            scheme: Scheme::ModifiedSplit,
        },
        "two_circles" => Preset {
            name: "two_circles",
            description: "disks of radii 0.2 and 0.3, gap 0.15, expanding under a bulk force",
            scene: Scene::new(vec![disk(-0.4, 0.0, 0.2), disk(0.25, 0.05, 0.3)]),
            extent: square,
            dims: vec![128, 128],
            params: ModelParams::new(0.1).with_alpha_bulk(15.0),
            scheme: Scheme::StandardSemiImplicit,
        },
        "two_disks_unit" => Preset {
            name: "two_disks_unit",
            description: "the two-circle layout scaled to the unit square (radii 0.1 and 0.15)",
            scene: Scene::new(vec![disk(0.3, 0.5, 0.1), disk(0.625, 0.525, 0.15)]),
            extent: vec![(0.0, 1.0); 2],
            dims: vec![256, 256],
            params: ModelParams::new(0.03).with_gamma(0.25),
            scheme: Scheme::StandardSemiImplicit,
        },
        "two_spheres" => Preset {
            name: "two_spheres",
            description: "two equal spheres of radius 0.3 with a gap of 0.1, expanding under a bulk force",
            scene: Scene::new(vec![
                Shape::Sphere { center: [-0.35, 0.0, 0.0], radius: 0.3 },
                Shape::Sphere { center: [0.35, 0.0, 0.0], radius: 0.3 },
            ]),
            extent: cube.clone(),
            dims: vec![48, 48, 48],
            params: ModelParams::new(0.12).with_gamma(0.25).with_alpha_bulk(15.0),
            scheme: Scheme::StandardSemiImplicit,
        },
        "two_cylinders" => Preset {
            name: "two_cylinders",
            description: "two parallel cylinders along z of radius 0.3 with a gap of 0.1",
            scene: Scene::new(vec![
                Shape::Cylinder { axis: 2, center: [-0.35, 0.0], radius: 0.3 },
                Shape::Cylinder { axis: 2, center: [0.35, 0.0], radius: 0.3 },
            ]),
            extent: cube,
            dims: vec![32, 32, 32],
            params: ModelParams::new(0.12)
                .with_gamma(0.25)
                .with_delta(0.01)
                .with_alpha_bulk(15.0),
            scheme: Scheme::BellettiniExplicit,
        },
        "ellipse_rect" => Preset {
            name: "ellipse_rect",
            description: "an ellipse with semi-axes 0.5 and 1.5 in the periodic box (-1.1,1.1)x(-2.2,2.2)",
            scene: Scene::new(vec![Shape::Ellipse { center: [0.0, 0.0], semi_axes: [0.5, 1.5] }]),
            extent: vec![(-1.1, 1.1), (-2.2, 2.2)],
            dims: vec![88, 176],
            params: ModelParams::new(0.1),
            scheme: Scheme::ModifiedSplit,
        },
        "single_circle_r01" => Preset {
            name: "single_circle_r01",
            description: "one disk of radius 0.1 at the origin; grows like (R0^4 + 2t)^(1/4)",
            scene: Scene::new(vec![disk(0.0, 0.0, 0.1)]),
            extent: square,
            dims: vec![128, 128],
            params: ModelParams::new(0.1),
            scheme: Scheme::ModifiedSplit,
        },
        other => return Err(InitError::UnknownPreset(other.to_string())),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{discrepancy, surface_energy};
    use crate::grid::integrate;
    use proptest::prelude::*;

    #[test]
    fn disk_distance_is_radial() {
        let s = disk(0.1, -0.2, 0.3);
        assert!((s.signed_distance(&[0.1, -0.2]) - 0.3).abs() < 1e-15);
        assert!((s.signed_distance(&[0.1 + 0.5, -0.2]) + 0.2).abs() < 1e-15);
        assert!(s.signed_distance(&[0.1, 0.1]).abs() < 1e-12);
    }

    #[test]
    fn union_takes_the_larger_distance() {
        let scene = Scene::new(vec![disk(-0.5, 0.0, 0.2), disk(0.5, 0.0, 0.1)]);
        // midpoint: -0.3 to the first, -0.4 to the second
        assert!((scene.signed_distance(&[0.0, 0.0]) + 0.3).abs() < 1e-15);
        assert_eq!(Scene::default().signed_distance(&[0.0, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn boundary_points_have_zero_distance() {
        let sphere = Shape::Sphere { center: [0.1, 0.2, 0.3], radius: 0.25 };
        let cyl = Shape::Cylinder { axis: 1, center: [0.1, -0.1], radius: 0.2 };
        for k in 0..16 {
            let th = k as f64 * 0.4;
            let p = [0.1 + 0.25 * th.cos(), 0.2 + 0.25 * th.sin(), 0.3];
            assert!(sphere.signed_distance(&p).abs() < 1e-12);
            let q = [0.1 + 0.2 * th.cos(), 7.0 * th, -0.1 + 0.2 * th.sin()];
            assert!(cyl.signed_distance(&q).abs() < 1e-12);
        }
        let e = Shape::Ellipse { center: [0.0, 0.0], semi_axes: [0.5, 1.5] };
        assert!(e.signed_distance(&[0.5, 0.0]).abs() < 1e-15);
        assert!(e.signed_distance(&[0.0, -1.5]).abs() < 1e-15);
        assert!((e.signed_distance(&[0.0, 0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shapes_parse_and_print() {
        for line in ["disk 0.5 0.5 0.2", "sphere 0 0.1 0.2 0.3", "cylinder z -0.35 0 0.3", "ellipse 0 0 0.5 1.5"] {
            let s: Shape = line.parse().unwrap();
            assert_eq!(s.to_string().parse::<Shape>().unwrap(), s);
        }
        assert!("disk 0.5 0.5".parse::<Shape>().is_err());
        assert!("disk 0.5 0.5 -1".parse::<Shape>().is_err());
        assert!("square 1 1 1".parse::<Shape>().is_err());
        assert!("cylinder w 0 0 1".parse::<Shape>().is_err());
    }

    #[test]
    fn empty_scene_is_nearly_zero() {
        let g = Grid::square(16, -1.0, 1.0).unwrap();
        let u = phase_from_scene(&Scene::default(), &g, 0.1).unwrap();
        assert!(u.values().iter().all(|&v| v > 0.0 && v < 1e-30));
    }

    #[test]
    fn phase_field_stays_inside_the_unit_interval() {
        let g = Grid::square(64, -1.0, 1.0).unwrap();
        let big = Scene::new(vec![disk(0.0, 0.0, 0.8)]);
        let u = phase_from_scene(&big, &g, 0.01).unwrap();
        assert!(u.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = Grid::cube(8, -1.0, 1.0).unwrap();
        let err = phase_from_scene(&Scene::new(vec![disk(0.0, 0.0, 0.1)]), &g, 0.1).unwrap_err();
        assert!(matches!(err, InitError::Dimension { needed: 2, ndim: 3, .. }));
    }

    #[test]
    fn periodic_images_wrap() {
        let g = Grid::square(32, 0.0, 1.0).unwrap();
        // a disk centered on the corner shows up in all four corners
        let u = phase_from_scene(&Scene::new(vec![disk(0.0, 0.0, 0.2)]), &g, 0.02).unwrap();
        let n = 32;
        for &(i, j) in &[(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
            assert!(u.values()[i * n + j] > 0.99);
        }
        assert!(u.values()[(n / 2) * n + n / 2] < 1e-6);
    }

    #[test]
    fn single_disk_perimeter() {
        // R=0.4, ε=0.08 keeps the layer resolved on 512² over (-1,1)²
        let g = Grid::square(512, -1.0, 1.0).unwrap();
        let r = 0.4;
        let u = phase_from_scene(&Scene::new(vec![disk(0.0, 0.0, r)]), &g, 0.08).unwrap();
        let h = surface_energy(&u, &ModelParams::new(0.08));
        let perimeter = 2.0 * std::f64::consts::PI * r;
        assert!((h / perimeter - 1.0).abs() < 0.02, "H/(2πR) = {}", h / perimeter);
    }

    #[test]
    fn discrepancy_vanishes_under_refinement() {
        let scene = Scene::new(vec![disk(-0.4, 0.0, 0.3), disk(0.45, 0.1, 0.25)]);
        let eps = 0.08;
        let p = ModelParams::new(eps);
        let l1 = |n: usize| {
            let g = Grid::square(n, -1.0, 1.0).unwrap();
            let u = phase_from_scene(&scene, &g, eps).unwrap();
            integrate(&discrepancy(&u, &p).map(f64::abs))
        };
        let (coarse, fine) = (l1(128), l1(512));
        assert!(fine < 0.2 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn presets_match_their_descriptions() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(p.extent.len(), p.dims.len());
            p.scene.check_dimension(p.extent.len()).unwrap();
            p.params.validate().unwrap();
            for s in &p.scene.shapes {
                let c = s.center();
                for (a, &(lo, hi)) in p.extent.iter().enumerate() {
                    assert!(c[a] > lo && c[a] < hi, "{name}: center outside the domain");
                }
            }
        }
        let radii = |name: &str| -> Vec<f64> {
            preset(name)
                .unwrap()
                .scene
                .shapes
                .iter()
                .map(|s| match s {
                    Shape::Disk { radius, .. } => *radius,
                    _ => f64::NAN,
                })
                .collect()
        };
        assert_eq!(radii("two_circles"), vec![0.2, 0.3]);
        assert_eq!(radii("single_circle_r01"), vec![0.1]);
        assert_eq!(radii("nine_circles"), vec![0.1; 9]);
        assert_eq!(preset("nine_circles").unwrap().params.eps, 0.1);
        assert_eq!(preset("ellipse_rect").unwrap().extent, vec![(-1.1, 1.1), (-2.2, 2.2)]);
        assert_eq!(preset("two_circles").unwrap().extent, vec![(-1.0, 1.0); 2]);
        assert!(matches!(preset("three_circles"), Err(InitError::UnknownPreset(_))));
    }

    #[test]
    fn preset_shapes_are_disjoint() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            let g = p.grid().unwrap();
            let shapes = &p.scene.shapes;
            for (i, a) in shapes.iter().enumerate() {
                for b in &shapes[i + 1..] {
                    // centers must lie well outside the other shape
                    let inside_other = b.distance_from_offset(&g.periodic_delta(&a.center(), &b.center()));
                    assert!(inside_other < -0.1, "{name}: overlapping shapes");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn exact_distances_are_one_lipschitz(
            x in prop::array::uniform3(-2.0f64..2.0),
            y in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let scene = Scene::new(vec![
                Shape::Sphere { center: [0.2, -0.1, 0.3], radius: 0.4 },
                Shape::Cylinder { axis: 0, center: [0.5, 0.5], radius: 0.2 },
            ]);
            let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
            let diff = (scene.signed_distance(&x) - scene.signed_distance(&y)).abs();
            prop_assert!(diff <= dist + 1e-12);
        }
    }
}
