//! Observables of a phase field: the radius of `{u > 1/2}`, connected
//! components and their collision classification, and `{u = level}` contours.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{Field, Grid};

/// Level that separates the two phases.
pub const PHASE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("the phase {{u > {threshold}}} is empty")]
    EmptyPhase { threshold: f64 },
    #[error("contours need a 2-dimensional field, got {0} dimensions")]
    Dimension(usize),
    #[error("a radius trajectory needs at least one sample with R(0) > 0")]
    Trajectory,
}

/// Radius of the disk (2D) or ball (3D) with the volume of `{u > 1/2}`.
pub fn measure_radius(u: &Field) -> Result<f64, AnalysisError> {
    let grid = u.grid();
    let count = u.values().iter().filter(|&&v| v > PHASE_THRESHOLD).count();
    if count == 0 {
        return Err(AnalysisError::EmptyPhase { threshold: PHASE_THRESHOLD });
    }
    let volume = count as f64 * grid.cell_volume();
    Ok(match grid.ndim() {
        2 => (volume / std::f64::consts::PI).sqrt(),
        _ => (3.0 * volume / (4.0 * std::f64::consts::PI)).cbrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Neighbors share a face (4 in 2D, 6 in 3D).
    Face,
    /// Neighbors share a face, edge or corner (8 in 2D, 26 in 3D).
    Full,
}

fn neighbor_offsets(ndim: usize, conn: Connectivity) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    let range = |a: usize| if a < ndim { -1..=1 } else { 0..=0 };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let nonzero = [i, j, k].iter().filter(|&&v| v != 0).count();
                let keep = match conn {
                    Connectivity::Face => nonzero == 1,
                    Connectivity::Full => nonzero > 0,
                };
                if keep {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Number of connected components of `{u > threshold}` (or of
/// `{u <= threshold}` when `above` is false) on the periodic grid.
pub fn count_components(u: &Field, threshold: f64, above: bool, conn: Connectivity) -> usize {
    let grid = u.grid();
    let member: Vec<bool> = u.values().iter().map(|&v| (v > threshold) == above).collect();
    let offsets = neighbor_offsets(grid.ndim(), conn);
    let mut seen = vec![false; grid.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..grid.len() {
        if !member[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            let c = grid.coords(cell);
            for off in &offsets {
                let nb = grid.index(&[
                    c[0] as isize + off[0],
                    c[1] as isize + off[1],
                    c[2] as isize + off[2],
                ]);
                if member[nb] && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// The components are as many as at the start, and apart.
    Separate,
    /// Components touch only across corners: the crossing pattern.
    TouchingCross,
    /// Fewer face-connected components than at the start.
    Merged,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Separate => "separate",
            Classification::TouchingCross => "touching/cross",
            Classification::Merged => "merged",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyReport {
    pub inside_face: usize,
    pub inside_full: usize,
    pub outside_face: usize,
    pub outside_full: usize,
    pub classification: Classification,
}

impl TopologyReport {
    /// Counts components of both phases at threshold 1/2. `initial` is the
    /// component count to compare against; without it the current
    /// face-connected count is used, so the result is never `Merged`.
    pub fn of(u: &Field, initial: Option<usize>) -> Self {
        let t = PHASE_THRESHOLD;
        let inside_face = count_components(u, t, true, Connectivity::Face);
        let inside_full = count_components(u, t, true, Connectivity::Full);
        let outside_face = count_components(u, t, false, Connectivity::Face);
        let outside_full = count_components(u, t, false, Connectivity::Full);
        TopologyReport {
            inside_face,
            inside_full,
            outside_face,
            outside_full,
            classification: classify(inside_face, inside_full, initial.unwrap_or(inside_face)),
        }
    }
}

/// A drop in the face-connected count is a merger; otherwise a gap between
/// the two connectivities means two phases meet only at a corner.
pub fn classify(face: usize, full: usize, initial: usize) -> Classification {
    if face < initial {
        Classification::Merged
    } else if full < face {
        Classification::TouchingCross
    } else {
        Classification::Separate
    }
}

/// A chain of contour points. Coordinates are unwrapped so consecutive
/// points are geometric neighbors even across the periodic boundary; a
/// contour that winds around the torus is open and ends one period away
/// from its start.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    /// Absolute shoelace area; zero for open polylines.
    pub fn area(&self) -> f64 {
        if !self.closed {
            return 0.0;
        }
        let n = self.points.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (p, q) = (self.points[i], self.points[(i + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        0.5 * twice.abs()
    }
}

/// Marching squares on the periodic dual grid of cell centers, with linear
/// interpolation along cell-center edges and saddles resolved by the
/// average of the four corners.
pub fn extract_contour(u: &Field, level: f64) -> Result<Vec<Polyline>, AnalysisError> {
    let grid = *u.grid();
    if grid.ndim() != 2 {
        return Err(AnalysisError::Dimension(grid.ndim()));
    }
    let (n0, n1) = (grid.dims()[0], grid.dims()[1]);
    let v = u.values();
    let at = |i: usize, j: usize| v[(i % n0) * n1 + (j % n1)];
    let inside = |i: usize, j: usize| at(i, j) > level;
    // edge id: 2·(cell index) + axis, joining (i,j) to its +axis neighbor
    let edge = |i: usize, j: usize, axis: usize| 2 * ((i % n0) * n1 + (j % n1)) + axis;

    let mut links: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut link = |a: usize, b: usize| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..n0 {
        for j in 0..n1 {
            // corners counter-clockwise: c0=(i,j), c1=(i+1,j), c2=(i+1,j+1), c3=(i,j+1)
            let s = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let e = [edge(i, j, 0), edge(i + 1, j, 1), edge(i, j + 1, 0), edge(i, j, 1)];
            let crossed: Vec<usize> = (0..4).filter(|&k| s[k] != s[(k + 1) % 4]).collect();
            match crossed.len() {
                2 => link(e[crossed[0]], e[crossed[1]]),
                4 => {
                    let mean = 0.25 * (at(i, j) + at(i + 1, j) + at(i + 1, j + 1) + at(i, j + 1));
                    if (mean > level) == s[0] {
                        // c0 and c2 joined through the middle: cut off c1 and c3
                        link(e[0], e[1]);
                        link(e[2], e[3]);
                    } else {
                        link(e[3], e[0]);
                        link(e[1], e[2]);
                    }
                }
                _ => {}
            }
        }
    }

    let point = |id: usize| -> [f64; 2] {
        let (cell, axis) = (id / 2, id % 2);
        let (i, j) = (cell / n1, cell % n1);
        let a = at(i, j);
        let b = if axis == 0 { at(i + 1, j) } else { at(i, j + 1) };
        let t = (level - a) / (b - a);
        let x = grid.center(cell);
        let mut p = [x[0], x[1]];
        p[axis] += t * grid.spacing(axis);
        p
    };
    let lengths = [grid.length(0), grid.length(1)];
    let unwrap = |p: [f64; 2], prev: [f64; 2]| -> [f64; 2] {
        let mut q = p;
        for a in 0..2 {
            q[a] -= lengths[a] * ((q[a] - prev[a]) / lengths[a]).round();
        }
        q
    };

    let mut starts: Vec<usize> = links.keys().copied().collect();
    starts.sort_unstable();
    let mut visited = vec![false; 2 * grid.len()];
    let mut out = Vec::new();
    for start in starts {
        if visited[start] {
            continue;
        }
        let mut points = vec![point(start)];
        visited[start] = true;
        let (mut prev, mut cur) = (usize::MAX, start);
        loop {
            let next = links[&cur].iter().copied().find(|&nb| nb != prev && !visited[nb]);
            match next {
                Some(nb) => {
                    visited[nb] = true;
                    let p = unwrap(point(nb), *points.last().unwrap());
                    points.push(p);
                    prev = cur;
                    cur = nb;
                }
                None => break,
            }
        }
        let back = unwrap(points[0], *points.last().unwrap());
        let tol = 1e-9 * lengths[0].max(lengths[1]);
        let closed = (back[0] - points[0][0]).abs() < tol && (back[1] - points[0][1]).abs() < tol;
        if !closed {
            points.push(back);
        }
        out.push(Polyline { points, closed });
    }
    Ok(out)
}

/// `x,y` rows with a blank line between polylines.
pub fn contours_to_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("x,y\n");
    for (k, line) in lines.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        for p in &line.points {
            let _ = writeln!(s, "{:.10e},{:.10e}", p[0], p[1]);
        }
        if line.closed {
            let p = line.points[0];
            let _ = writeln!(s, "{:.10e},{:.10e}", p[0], p[1]);
        }
    }
    s
}

/// `(R₀⁴ + 2t)^{1/4}`: a circle moving with normal speed `κ³/2`.
pub fn analytic_radius(r0: f64, t: f64) -> f64 {
    (r0.powi(4) + 2.0 * t).powf(0.25)
}

/// Largest relative deviation of `(t, R)` samples from the growth law,
/// started from the first sample.
pub fn radius_law_error(samples: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    let &(t0, r0) = samples.first().ok_or(AnalysisError::Trajectory)?;
    if !(r0 > 0.0) {
        return Err(AnalysisError::Trajectory);
    }
    Ok(samples
        .iter()
        .map(|&(t, r)| {
            let exact = analytic_radius(r0, t - t0);
            (r - exact).abs() / exact
        })
        .fold(0.0, f64::max))
}

/// Indicator of `{u > threshold}` as 0/1 values, mostly for tests and images.
pub fn phase_indicator(u: &Field, threshold: f64) -> Field {
    u.map(|v| if v > threshold { 1.0 } else { 0.0 })
}

/// Count of cells in `{u > 1/2}` times the cell volume.
pub fn phase_volume(u: &Field) -> f64 {
    let g: &Grid = u.grid();
    u.values().iter().filter(|&&v| v > PHASE_THRESHOLD).count() as f64 * g.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{phase_from_scene, preset, Scene, Shape};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn disk_indicator(n: usize, r: f64) -> Field {
        let g = Grid::square(n, -1.0, 1.0).unwrap();
        Field::from_fn(&g, |x| if x[0].hypot(x[1]) < r { 1.0 } else { 0.0 })
    }

    #[test]
    fn radius_of_rasterized_disk() {
        let r = measure_radius(&disk_indicator(256, 0.25)).unwrap();
        assert!((r / 0.25 - 1.0).abs() < 0.015, "{r}");
    }

    #[test]
    fn radius_of_full_and_empty_domains() {
        let g = Grid::square(16, 0.0, 1.0).unwrap();
        let r = measure_radius(&Field::constant(&g, 1.0)).unwrap();
        assert!((r - (1.0 / PI).sqrt()).abs() < 1e-14);
        assert!(matches!(
            measure_radius(&Field::zeros(&g)),
            Err(AnalysisError::EmptyPhase { .. })
        ));
        let c = Grid::cube(16, 0.0, 1.0).unwrap();
        let r3 = measure_radius(&Field::constant(&c, 1.0)).unwrap();
        assert!((r3 - (3.0 / (4.0 * PI)).cbrt()).abs() < 1e-14);
    }

    #[test]
    fn smoothed_disk_has_the_indicator_radius() {
        let n = 256;
        let g = Grid::square(n, -1.0, 1.0).unwrap();
        let u = phase_from_scene(&Scene::new(vec![Shape::Disk { center: [0.0, 0.0], radius: 0.25 }]), &g, 0.05).unwrap();
        let smooth = measure_radius(&u).unwrap();
        let sharp = measure_radius(&disk_indicator(n, 0.25)).unwrap();
        assert!((smooth - sharp).abs() < g.spacing(0));
    }

    #[test]
    fn nine_circles_start_separate() {
        let u = preset("nine_circles").unwrap().field().unwrap();
        let rep = TopologyReport::of(&u, Some(9));
        assert_eq!((rep.inside_face, rep.inside_full), (9, 9));
        assert_eq!((rep.outside_face, rep.outside_full), (1, 1));
        assert_eq!(rep.classification, Classification::Separate);
    }

    #[test]
    fn diagonal_blocks_touch_at_a_corner() {
        // 2x2 blocks of side 4 on an 8x8 torus: blocks (0,0) and (1,1) are on
        let g = Grid::square(8, 0.0, 1.0).unwrap();
        let u = Field::from_fn(&g, |x| {
            let (a, b) = ((x[0] * 2.0) as usize, (x[1] * 2.0) as usize);
            if a == b { 1.0 } else { 0.0 }
        });
        let rep = TopologyReport::of(&u, Some(2));
        assert_eq!((rep.inside_face, rep.inside_full), (2, 1));
        assert_eq!((rep.outside_face, rep.outside_full), (2, 1));
        assert_eq!(rep.classification, Classification::TouchingCross);
    }

    #[test]
    fn full_phase_counts_as_merged() {
        let g = Grid::square(8, 0.0, 1.0).unwrap();
        let rep = TopologyReport::of(&Field::constant(&g, 1.0), Some(2));
        assert_eq!((rep.inside_face, rep.inside_full, rep.outside_face), (1, 1, 0));
        assert_eq!(rep.classification, Classification::Merged);
        assert_eq!(TopologyReport::of(&Field::constant(&g, 1.0), None).classification, Classification::Separate);
    }

    #[test]
    fn connectivity_in_three_dimensions() {
        // two cells sharing only a corner
        let g = Grid::cube(8, 0.0, 1.0).unwrap();
        let mut u = Field::zeros(&g);
        u.values_mut()[g.index(&[2, 2, 2])] = 1.0;
        u.values_mut()[g.index(&[3, 3, 3])] = 1.0;
        assert_eq!(count_components(&u, 0.5, true, Connectivity::Face), 2);
        assert_eq!(count_components(&u, 0.5, true, Connectivity::Full), 1);
        assert_eq!(neighbor_offsets(3, Connectivity::Full).len(), 26);
        assert_eq!(neighbor_offsets(3, Connectivity::Face).len(), 6);
        assert_eq!(neighbor_offsets(2, Connectivity::Full).len(), 8);
    }

    #[test]
    fn components_wrap_around_the_boundary() {
        let g = Grid::square(16, 0.0, 1.0).unwrap();
        // a band touching both x-edges is one component
        let u = Field::from_fn(&g, |x| if x[0] < 0.2 || x[0] > 0.8 { 1.0 } else { 0.0 });
        assert_eq!(count_components(&u, 0.5, true, Connectivity::Face), 1);
        assert_eq!(count_components(&u, 0.5, false, Connectivity::Face), 1);
    }

    #[test]
    fn disk_contour_is_one_closed_loop() {
        let n = 128;
        let g = Grid::square(n, -1.0, 1.0).unwrap();
        let r = 0.4;
        let u = phase_from_scene(&Scene::new(vec![Shape::Disk { center: [0.1, -0.2], radius: r }]), &g, 0.08).unwrap();
        let lines = extract_contour(&u, 0.5).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        assert!((lines[0].area() / (PI * r * r) - 1.0).abs() < 0.02);
    }

    #[test]
    fn contour_across_the_boundary_stays_closed() {
        let g = Grid::square(64, 0.0, 1.0).unwrap();
        let r = 0.3;
        let u = phase_from_scene(&Scene::new(vec![Shape::Disk { center: [0.95, 0.02], radius: r }]), &g, 0.04).unwrap();
        let lines = extract_contour(&u, 0.5).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        assert!((lines[0].area() / (PI * r * r) - 1.0).abs() < 0.02);
    }

    #[test]
    fn constant_field_has_no_contour() {
        let g = Grid::square(16, 0.0, 1.0).unwrap();
        assert!(extract_contour(&Field::zeros(&g), 0.5).unwrap().is_empty());
        let c = Grid::cube(8, 0.0, 1.0).unwrap();
        assert_eq!(extract_contour(&Field::zeros(&c), 0.5), Err(AnalysisError::Dimension(3)));
    }

    #[test]
    fn stripe_gives_two_straight_lines() {
        let g = Grid::square(32, 0.0, 1.0).unwrap();
        let u = Field::from_fn(&g, |x| if (x[0] - 0.5).abs() < 0.2 { 0.9 } else { 0.1 });
        let lines = extract_contour(&u, 0.5).unwrap();
        assert_eq!(lines.len(), 2);
        let mut xs: Vec<f64> = Vec::new();
        for line in &lines {
            assert!(!line.closed);
            let x0 = line.points[0][0];
            assert!(line.points.iter().all(|p| (p[0] - x0).abs() < 1e-12));
            let span = (line.points.last().unwrap()[1] - line.points[0][1]).abs();
            assert!((span - 1.0).abs() < 1e-12);
            xs.push(x0.rem_euclid(1.0));
        }
        xs.sort_by(f64::total_cmp);
        // the jump sits between the centers 0.296875/0.328125 and 0.671875/0.703125
        assert!((xs[0] - 0.3125).abs() < 1e-12 && (xs[1] - 0.6875).abs() < 1e-12, "{xs:?}");
    }

    #[test]
    fn contour_area_converges_to_phase_area() {
        let scene = Scene::new(vec![Shape::Ellipse { center: [0.0, 0.0], semi_axes: [0.6, 0.3] }]);
        let gap = |n: usize| {
            let g = Grid::square(n, -1.0, 1.0).unwrap();
            let u = phase_from_scene(&scene, &g, 0.05).unwrap();
            let area: f64 = extract_contour(&u, 0.5).unwrap().iter().map(Polyline::area).sum();
            (area - phase_volume(&u)).abs()
        };
        let (coarse, fine) = (gap(64), gap(256));
        assert!(fine < 0.5 * coarse, "{coarse} {fine}");
    }

    #[test]
    fn csv_separates_polylines() {
        let a = Polyline { points: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], closed: true };
        let b = Polyline { points: vec![[0.0, 0.0], [0.0, 1.0]], closed: false };
        let csv = contours_to_csv(&[a, b]);
        let blocks: Vec<&str> = csv.trim_end().split("\n\n").collect();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].lines().count(), 5);
        assert_eq!(blocks[1].lines().count(), 2);
    }

    #[test]
    fn growth_law_matches_the_ode() {
        // dR/dt = 1/(2R³) by classical RK4
        let f = |r: f64| 0.5 / (r * r * r);
        let (mut r, dt) = (0.1f64, 1e-6);
        for _ in 0..2000 {
            let k1 = f(r);
            let k2 = f(r + 0.5 * dt * k1);
            let k3 = f(r + 0.5 * dt * k2);
            let k4 = f(r + dt * k3);
            r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((r - analytic_radius(0.1, 2e-3)).abs() < 1e-10);
    }

    #[test]
    fn radius_law_error_examples() {
        let exact: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 * 1e-4, analytic_radius(0.1, k as f64 * 1e-4))).collect();
        assert!(radius_law_error(&exact).unwrap() < 1e-15);
        let mut shifted = exact.clone();
        for s in shifted.iter_mut().skip(1) {
            s.1 *= 1.05;
        }
        assert!((radius_law_error(&shifted).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(radius_law_error(&[]), Err(AnalysisError::Trajectory));
        assert_eq!(radius_law_error(&[(0.0, 0.0)]), Err(AnalysisError::Trajectory));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn counts_are_translation_invariant(seed in 0u64..1000, si in 0isize..16, sj in 0isize..16) {
            let g = Grid::square(16, 0.0, 1.0).unwrap();
            let vals: Vec<f64> = (0..g.len())
                .map(|i| (((i as u64 + 1) * (seed + 7919)) % 101) as f64 / 101.0)
                .collect();
            let u = Field::from_vec(&g, vals).unwrap();
            let moved = u.shifted(0, si).shifted(1, sj);
            for conn in [Connectivity::Face, Connectivity::Full] {
                for above in [true, false] {
                    prop_assert_eq!(count_components(&u, 0.5, above, conn), count_components(&moved, 0.5, above, conn));
                }
            }
            let rep = TopologyReport::of(&u, None);
            prop_assert!(rep.inside_full <= rep.inside_face);
            prop_assert!(rep.outside_full <= rep.outside_face);
        }
    }
}
