//! Urban-canyon world: base-station placement, user drops and ray tracing.
//!
//! Coordinates: `x` runs along the street, `y` across it (walls at `y = 0`
//! and `y = W`), `z` is height above the ground plane.

use nalgebra::{Point3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{CanyonScenario, UserAssignment};

pub type Position3D = Point3<f64>;

const PLANE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Facing {
    East,
    West,
}

impl Facing {
    /// Outward normal of a face pointing this way.
    pub fn normal(self) -> Vector3<f64> {
        match self {
            Facing::East => Vector3::x(),
            Facing::West => -Vector3::x(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseStation {
    pub index: usize,
    pub position: Position3D,
}

impl BaseStation {
    pub fn face(&self, facing: Facing) -> Face {
        Face {
            bs_index: self.index,
            position: self.position,
            facing,
        }
    }

    /// Both faces. The `K` subarrays of a face share its position.
    pub fn faces(&self) -> [Face; 2] {
        [self.face(Facing::East), self.face(Facing::West)]
    }
}

/// One sector of a base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub bs_index: usize,
    pub position: Position3D,
    pub facing: Facing,
}

impl Face {
    /// Index of the picocell this face covers, if it lies on the street.
    pub fn served_cell(&self, num_cells: usize) -> Option<usize> {
        let cell = match self.facing {
            Facing::East => Some(self.bs_index),
            Facing::West => self.bs_index.checked_sub(1),
        }?;
        (cell < num_cells).then_some(cell)
    }
}

/// Base stations at `x = 0, d, 2d, ...`, alternating between the two walls.
pub fn place_base_stations(scenario: &CanyonScenario) -> Vec<BaseStation> {
    let count = num_base_stations(scenario);
    (0..count)
        .map(|i| BaseStation {
            index: i,
            position: Position3D::new(
                i as f64 * scenario.cell_width,
                if i % 2 == 0 { 0.0 } else { scenario.street_width },
                scenario.bs_height,
            ),
        })
        .collect()
}

pub fn num_base_stations(scenario: &CanyonScenario) -> usize {
    (scenario.street_length / scenario.cell_width + 1e-9).floor() as usize + 1
}

pub fn num_cells(scenario: &CanyonScenario) -> usize {
    num_base_stations(scenario) - 1
}

/// The picocell in the middle of the street; its west base station is `BS_0`.
pub fn center_cell(scenario: &CanyonScenario) -> usize {
    num_cells(scenario) / 2
}

/// Draws one user uniformly over the picocell volume.
pub fn sample_user<R: Rng + ?Sized>(scenario: &CanyonScenario, cell: usize, rng: &mut R) -> Position3D {
    let x0 = cell as f64 * scenario.cell_width;
    let x = x0 + rng.random::<f64>() * scenario.cell_width;
    let y = rng.random::<f64>() * scenario.street_width;
    let z = scenario.user_height_min + rng.random::<f64>() * (scenario.user_height_max - scenario.user_height_min);
    Position3D::new(x, y, z)
}

/// `Q` users uniform over the picocell.
pub fn drop_users<R: Rng + ?Sized>(
    scenario: &CanyonScenario,
    cell: usize,
    rng: &mut R,
) -> Result<Vec<Position3D>> {
    if cell >= num_cells(scenario) {
        return Err(Error::InvalidScenario(format!(
            "picocell {cell} out of range (street has {})",
            num_cells(scenario)
        )));
    }
    Ok((0..scenario.users_per_face)
        .map(|_| sample_user(scenario, cell, rng))
        .collect())
}

/// Face of the picocell's two base stations with the shorter line of sight
/// to `user`. Ties go to the lower base-station index.
pub fn assign_face(scenario: &CanyonScenario, cell: usize, user: &Position3D) -> Face {
    let bss = place_base_stations(scenario);
    let west = bss[cell];
    let east = bss[cell + 1];
    let dw = (user - west.position).norm();
    let de = (user - east.position).norm();
    if dw <= de {
        west.face(Facing::East)
    } else {
        east.face(Facing::West)
    }
}

/// Draws `count` users for `face`. Under [`UserAssignment::WholeCell`] they
/// are uniform over the face's picocell; under
/// [`UserAssignment::NearestFace`] the uniform drop is rejection-sampled
/// down to users the face would serve by the shortest-link rule.
pub fn drop_face_users<R: Rng + ?Sized>(
    scenario: &CanyonScenario,
    face: &Face,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Position3D>> {
    let cell = face
        .served_cell(num_cells(scenario))
        .ok_or_else(|| Error::InvalidScenario(format!("face {face:?} covers no picocell")))?;
    let mut users = Vec::with_capacity(count);
    while users.len() < count {
        let u = sample_user(scenario, cell, rng);
        let keep = match scenario.user_assignment {
            UserAssignment::WholeCell => true,
            UserAssignment::NearestFace => {
                let f = assign_face(scenario, cell, &u);
                f.bs_index == face.bs_index && f.facing == face.facing
            }
        };
        if keep {
            users.push(u);
        }
    }
    Ok(users)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    LoS,
    WallBounce,
    GroundBounce,
}

/// One propagation ray between a transmitter and a receiver.
///
/// `departure_dir` points from the transmitter toward the first hop;
/// `arrival_dir` points from the receiver back toward the last hop (the
/// direction the energy arrives from).
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    pub total_length: f64,
    pub bounce_point: Option<Position3D>,
    pub departure_dir: Vector3<f64>,
    pub arrival_dir: Vector3<f64>,
    pub num_reflections: usize,
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    axis: usize,
    offset: f64,
    kind: PathKind,
}

fn reflecting_planes(scenario: &CanyonScenario) -> [Plane; 3] {
    [
        Plane {
            axis: 1,
            offset: 0.0,
            kind: PathKind::WallBounce,
        },
        Plane {
            axis: 1,
            offset: scenario.street_width,
            kind: PathKind::WallBounce,
        },
        Plane {
            axis: 2,
            offset: 0.0,
            kind: PathKind::GroundBounce,
        },
    ]
}

/// Line-of-sight path plus the single-bounce paths off both walls and the
/// ground, found with the image method. A reflection is skipped when an
/// endpoint lies on the reflecting plane (it would coincide with the
/// line of sight) or when its bounce point falls off the street.
pub fn trace_paths(tx: &Position3D, rx: &Position3D, scenario: &CanyonScenario) -> Vec<PropagationPath> {
    let los = rx - tx;
    let los_len = los.norm();
    let mut paths = vec![PropagationPath {
        kind: PathKind::LoS,
        total_length: los_len,
        bounce_point: None,
        departure_dir: los / los_len,
        arrival_dir: -los / los_len,
        num_reflections: 0,
    }];

    for plane in reflecting_planes(scenario) {
        let a = plane.axis;
        let dt = tx[a] - plane.offset;
        let dr = rx[a] - plane.offset;
        if dt.abs() < PLANE_EPS || dr.abs() < PLANE_EPS || dt.signum() != dr.signum() {
            continue;
        }
        let mut image = *rx;
        image[a] = 2.0 * plane.offset - rx[a];
        let t = dt / (dt + dr);
        let bounce = tx + (image - tx) * t;
        let on_street = (0.0..=scenario.street_length).contains(&bounce.x);
        let in_canyon = match plane.kind {
            PathKind::WallBounce => bounce.z <= scenario.building_height,
            _ => (0.0..=scenario.street_width).contains(&bounce.y),
        };
        if !(on_street && in_canyon) {
            continue;
        }
        let out = bounce - tx;
        let back = bounce - rx;
        paths.push(PropagationPath {
            kind: plane.kind,
            total_length: (image - tx).norm(),
            bounce_point: Some(bounce),
            departure_dir: out.normalize(),
            arrival_dir: back.normalize(),
            num_reflections: 1,
        });
    }
    paths
}

/// Furthest along-street distance at which a face's main beam can still
/// reach user height, and the number of neighbouring base stations that
/// distance spans: `d (H + h) / (H - h)` and its ceiling in cells.
pub fn main_beam_escape_range(bs_height: f64, user_height_max: f64, cell_width: f64) -> Result<(f64, u32)> {
    if !(bs_height > user_height_max) {
        return Err(Error::InvalidScenario(format!(
            "bs_height ({bs_height}) must exceed user_height_max ({user_height_max})"
        )));
    }
    let ratio = (bs_height + user_height_max) / (bs_height - user_height_max);
    let n_max = (ratio - 1e-12).ceil().max(1.0) as u32;
    Ok((ratio * cell_width, n_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamExit {
    /// Rose above the canyon walls.
    EscapedTop,
    /// Crossed either end of the street segment.
    LeftStreet,
    MaxBounces,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamTrace {
    pub bounces: Vec<Position3D>,
    pub exit: BeamExit,
    /// Along-street distance from the transmitter to the last point where
    /// the ray was at or below user height. Zero if it never got that low.
    pub max_forward_range: f64,
}

impl BeamTrace {
    pub fn escaped(&self) -> bool {
        self.exit == BeamExit::EscapedTop
    }
}

/// Follows a ray off walls and ground (specular, no loss) until it leaves
/// the canyon or `max_bounces` reflections have happened.
pub fn trace_beam_forward(
    tx: &Position3D,
    direction: &Vector3<f64>,
    scenario: &CanyonScenario,
    max_bounces: usize,
) -> BeamTrace {
    let h_max = scenario.user_height_max;
    let mut pos = *tx;
    let mut dir = direction.normalize();
    let mut bounces = Vec::new();
    let mut last_low_x: Option<f64> = (pos.z <= h_max).then_some(pos.x);

    let exit = loop {
        // (distance, axis, is_reflector)
        let mut hits: Vec<(f64, usize, bool)> = Vec::with_capacity(4);
        if dir.y < 0.0 {
            hits.push((-pos.y / dir.y, 1, true));
        } else if dir.y > 0.0 {
            hits.push(((scenario.street_width - pos.y) / dir.y, 1, true));
        }
        if dir.z < 0.0 {
            hits.push((-pos.z / dir.z, 2, true));
        } else if dir.z > 0.0 {
            hits.push(((scenario.building_height - pos.z) / dir.z, 2, false));
        }
        if dir.x < 0.0 {
            hits.push((-pos.x / dir.x, 0, false));
        } else if dir.x > 0.0 {
            hits.push(((scenario.street_length - pos.x) / dir.x, 0, false));
        }
        let t = hits
            .iter()
            .map(|h| h.0.max(0.0))
            .fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            // Zero direction vector: nothing to trace.
            break BeamExit::LeftStreet;
        }
        let next = pos + dir * t;

        // Track the low (user-height) portion of this straight segment.
        let z0 = pos.z;
        let z1 = next.z;
        if z0.min(z1) <= h_max {
            let x_end = if z1 <= h_max {
                next.x
            } else {
                // Rising through h_max: low part ends at the crossing.
                let s = (h_max - z0) / (z1 - z0);
                pos.x + s * (next.x - pos.x)
            };
            last_low_x = Some(x_end);
        }

        let tol = 1e-12 * t.max(1.0);
        let active: Vec<_> = hits.iter().filter(|h| (h.0.max(0.0) - t).abs() <= tol).collect();
        if let Some(h) = active.iter().find(|h| !h.2) {
            break if h.1 == 2 { BeamExit::EscapedTop } else { BeamExit::LeftStreet };
        }
        pos = next;
        for h in &active {
            dir[h.1] = -dir[h.1];
        }
        // Snap onto the plane to avoid drift.
        for h in &active {
            pos[h.1] = if h.1 == 1 && dir.y < 0.0 { scenario.street_width } else { 0.0 };
        }
        bounces.push(pos);
        if bounces.len() >= max_bounces {
            break BeamExit::MaxBounces;
        }
    };

    BeamTrace {
        bounces,
        exit,
        max_forward_range: last_low_x.map_or(0.0, |x| (x - tx.x).abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(len: f64, d: f64) -> CanyonScenario {
        CanyonScenario {
            street_length: len,
            cell_width: d,
            ..Default::default()
        }
    }

    #[test]
    fn placement_counts_and_zigzag() {
        let s = scenario(1000.0, 100.0);
        let bss = place_base_stations(&s);
        assert_eq!(bss.len(), 11);
        for (i, bs) in bss.iter().enumerate() {
            assert_eq!(bs.position.x, 100.0 * i as f64);
            assert_eq!(bs.position.z, 6.0);
            let expect_y = if i % 2 == 0 { 0.0 } else { s.street_width };
            assert_eq!(bs.position.y, expect_y);
        }
        assert_eq!(place_base_stations(&scenario(1000.0, 20.0)).len(), 51);
    }

    #[test]
    fn each_base_station_has_two_colocated_faces() {
        let bss = place_base_stations(&scenario(1000.0, 50.0));
        let [e, w] = bss[3].faces();
        assert_eq!(e.facing, Facing::East);
        assert_eq!(w.facing, Facing::West);
        assert_eq!(e.position, w.position);
    }

    #[test]
    fn users_respect_height_band_and_seed() {
        let s = CanyonScenario {
            users_per_face: 4,
            ..Default::default()
        };
        let a = drop_users(&s, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = drop_users(&s, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for u in &a {
            assert!(u.z <= 2.0 && u.z >= 1.0);
            assert!(u.x >= 60.0 && u.x <= 80.0);
            assert!(u.y >= 0.0 && u.y <= s.street_width);
        }
    }

    #[test]
    fn drop_users_rejects_bad_cell() {
        let s = scenario(100.0, 20.0);
        assert!(drop_users(&s, 5, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn nearest_face_users_are_closer_to_their_face() {
        let s = CanyonScenario {
            user_assignment: UserAssignment::NearestFace,
            ..Default::default()
        };
        let bss = place_base_stations(&s);
        let face = bss[10].face(Facing::East);
        let users = drop_face_users(&s, &face, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for u in users {
            let own = (u - bss[10].position).norm();
            let other = (u - bss[11].position).norm();
            assert!(own <= other);
        }
    }

    #[test]
    fn whole_cell_users_span_the_picocell() {
        let s = CanyonScenario::default();
        let bss = place_base_stations(&s);
        let face = bss[10].face(Facing::West);
        let users = drop_face_users(&s, &face, 200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(users.iter().all(|u| (180.0..=200.0).contains(&u.x)));
        assert!(users.iter().any(|u| u.x < 185.0) && users.iter().any(|u| u.x > 195.0));
    }

    #[test]
    fn ground_bounce_image_geometry() {
        let s = CanyonScenario::default();
        let tx = Position3D::new(0.0, 0.0, 6.0);
        let rx = Position3D::new(30.0, 0.0, 1.5);
        let paths = trace_paths(&tx, &rx, &s);
        let g = paths.iter().find(|p| p.kind == PathKind::GroundBounce).unwrap();
        let b = g.bounce_point.unwrap();
        assert!((b.x - 24.0).abs() < 1e-12);
        assert!(b.z.abs() < 1e-12);
        assert!((g.total_length - (30f64.powi(2) + 7.5f64.powi(2)).sqrt()).abs() < 1e-12);
        let los = &paths[0];
        assert_eq!(los.kind, PathKind::LoS);
        assert!((los.total_length - (rx - tx).norm()).abs() < 1e-15);
        // Both endpoints sit on the y = 0 wall: that reflection collapses.
        let walls: Vec<_> = paths.iter().filter(|p| p.kind == PathKind::WallBounce).collect();
        assert_eq!(walls.len(), 1);
        assert!((walls[0].bounce_point.unwrap().y - s.street_width).abs() < 1e-12);
    }

    #[test]
    fn opposite_sides_see_both_walls() {
        let s = CanyonScenario::default();
        let tx = Position3D::new(0.0, 1.0, 6.0);
        let rx = Position3D::new(15.0, 19.0, 1.5);
        let paths = trace_paths(&tx, &rx, &s);
        let walls: Vec<_> = paths
            .iter()
            .filter_map(|p| (p.kind == PathKind::WallBounce).then(|| p.bounce_point.unwrap().y))
            .collect();
        assert_eq!(walls.len(), 2);
        assert!(walls.contains(&0.0) && walls.contains(&s.street_width));
    }

    #[test]
    fn bounce_outside_street_is_dropped() {
        let s = scenario(100.0, 20.0);
        // Ground bounce for these endpoints would land at x < 0.
        let tx = Position3D::new(1.0, 5.0, 6.0);
        let rx = Position3D::new(0.5, 5.0, 0.01);
        let paths = trace_paths(&tx, &rx, &s);
        assert!(paths.iter().all(|p| p
            .bounce_point
            .map_or(true, |b| (0.0..=s.street_length).contains(&b.x))));
    }

    #[test]
    fn escape_range_formula() {
        let (range, n) = main_beam_escape_range(6.0, 2.0, 50.0).unwrap();
        assert!((range - 100.0).abs() < 1e-12);
        assert_eq!(n, 2);
        let (range, n) = main_beam_escape_range(6.0, 0.0, 30.0).unwrap();
        assert!((range - 30.0).abs() < 1e-12);
        assert_eq!(n, 1);
        assert!(main_beam_escape_range(2.0, 2.0, 10.0).is_err());
    }

    #[test]
    fn vertical_beam_escapes_without_forward_range() {
        let s = CanyonScenario::default();
        let tx = Position3D::new(500.0, 0.0, 6.0);
        let t = trace_beam_forward(&tx, &-Vector3::z(), &s, 10);
        assert!(t.escaped());
        assert_eq!(t.bounces.len(), 1);
        assert!(t.max_forward_range.abs() < 1e-12);
    }

    #[test]
    fn horizontal_beam_above_users_never_counts() {
        let s = CanyonScenario::default();
        let tx = Position3D::new(500.0, 0.0, 6.0);
        let t = trace_beam_forward(&tx, &Vector3::x(), &s, 10);
        assert_eq!(t.exit, BeamExit::LeftStreet);
        assert!(t.bounces.is_empty());
        assert_eq!(t.max_forward_range, 0.0);
    }

    #[test]
    fn aimed_beam_reaches_escape_range_at_extreme_user() {
        // User at the far edge of the cell and at h_max: the bound is tight.
        let s = CanyonScenario {
            cell_width: 50.0,
            ..Default::default()
        };
        let tx = Position3D::new(500.0, 0.0, 6.0);
        let user = Position3D::new(550.0, 0.0, 2.0);
        let t = trace_beam_forward(&tx, &(user - tx), &s, 50);
        assert!(t.escaped());
        assert!((t.max_forward_range - 100.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_angles_match() {
        let s = CanyonScenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let tx = sample_user(&s, 5, &mut rng) + Vector3::new(0.0, 0.0, 3.0);
            let rx = sample_user(&s, 7, &mut rng);
            for p in trace_paths(&tx, &rx, &s).iter().skip(1) {
                let b = p.bounce_point.unwrap();
                let n = match p.kind {
                    PathKind::GroundBounce => Vector3::z(),
                    _ => Vector3::y(),
                };
                let inc = (b - tx).normalize();
                let out = (rx - b).normalize();
                assert!((inc.dot(&n).abs() - out.dot(&n).abs()).abs() < 1e-9);
                // Tangential components are preserved.
                let ti = inc - n * inc.dot(&n);
                let to = out - n * out.dot(&n);
                assert!((ti - to).norm() < 1e-9);
            }
        }
    }
}
