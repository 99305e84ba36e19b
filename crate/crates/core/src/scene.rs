//! Static world description: materials, obstacles, base stations, points of
//! interest and moving obstacles.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, OrientedBox, Polygon, PolygonDefect, Vec2, Vec3};

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Faces must be planar within this many metres.
pub const PLANARITY_TOL: f64 = 1e-9;

/// Electrical properties of a building material.
///
/// Conductivity follows the frequency law `sigma(f) = conductivity * f_GHz^conductivity_exponent`;
/// with a zero exponent it is frequency independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub relative_permittivity: f64,
    /// S/m at 1 GHz.
    pub conductivity: f64,
    #[serde(default)]
    pub conductivity_exponent: f64,
    #[serde(default)]
    pub transmissive: bool,
}

impl Material {
    pub fn conductivity_at(&self, freq_hz: f64) -> f64 {
        self.conductivity * libm::pow(freq_hz / 1e9, self.conductivity_exponent)
    }

    /// Complex relative permittivity `eps_r - j sigma / (omega eps_0)`.
    pub fn complex_permittivity(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * core::f64::consts::PI * freq_hz;
        Complex64::new(self.relative_permittivity, -self.conductivity_at(freq_hz) / (omega * EPSILON_0))
    }
}

/// Default catalog: the five material classes found in the production hall.
///
/// Concrete, wood and glass use the ITU-R P.2040 frequency laws. Metal is
/// modelled as a near-perfect conductor. Plastic is a low-loss polymer.
pub fn default_materials() -> Vec<Material> {
    let m = |name: &str, eps: f64, sigma: f64, exp: f64, transmissive: bool| Material {
        name: name.into(),
        relative_permittivity: eps,
        conductivity: sigma,
        conductivity_exponent: exp,
        transmissive,
    };
    alloc::vec![
        m("metal", 1.01, 1e7, 0.0, false),
        m("concrete", 5.24, 0.0462, 0.7822, false),
        m("plastic", 2.3, 0.0005, 1.0, false),
        m("wood", 1.99, 0.0047, 1.0718, false),
        m("glass", 6.31, 0.0036, 1.3394, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    /// Convex planar polygons, counter-clockwise seen from outside.
    pub faces: Vec<Vec<Vec3>>,
    pub material: String,
    /// Open surfaces (walls, floor, ceiling, panes) need not be watertight.
    #[serde(default)]
    pub open: bool,
}

impl Obstacle {
    /// Closed axis-aligned box with outward-facing faces.
    pub fn cuboid(id: impl Into<String>, min: Vec3, max: Vec3, material: impl Into<String>) -> Self {
        let (a, b) = (min, max);
        let p = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let faces = alloc::vec![
            alloc::vec![p(a.x, a.y, a.z), p(a.x, b.y, a.z), p(b.x, b.y, a.z), p(b.x, a.y, a.z)],
            alloc::vec![p(a.x, a.y, b.z), p(b.x, a.y, b.z), p(b.x, b.y, b.z), p(a.x, b.y, b.z)],
            alloc::vec![p(a.x, a.y, a.z), p(b.x, a.y, a.z), p(b.x, a.y, b.z), p(a.x, a.y, b.z)],
            alloc::vec![p(a.x, b.y, a.z), p(a.x, b.y, b.z), p(b.x, b.y, b.z), p(b.x, b.y, a.z)],
            alloc::vec![p(a.x, a.y, a.z), p(a.x, a.y, b.z), p(a.x, b.y, b.z), p(a.x, b.y, a.z)],
            alloc::vec![p(b.x, a.y, a.z), p(b.x, b.y, a.z), p(b.x, b.y, b.z), p(b.x, a.y, b.z)],
        ];
        Self { id: id.into(), faces, material: material.into(), open: false }
    }

    /// Single open rectangle given by a corner and two edge vectors.
    pub fn panel(id: impl Into<String>, corner: Vec3, u: Vec3, v: Vec3, material: impl Into<String>) -> Self {
        let face = alloc::vec![corner, corner + u, corner + u + v, corner + v];
        Self { id: id.into(), faces: alloc::vec![face], material: material.into(), open: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    pub position: Vec3,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOfInterest {
    pub id: u32,
    pub ground_truth: Vec3,
}

/// A box (forklift) that travels a closed waypoint loop at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingObstacle {
    pub id: String,
    /// (length, width, height), length along the direction of travel.
    pub box_dimensions: [f64; 3],
    pub waypoints: Vec<Vec2>,
    pub speed: f64,
    pub material: String,
}

impl MovingObstacle {
    fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.waypoints.len();
        (0..n).map(move |i| (self.waypoints[i], self.waypoints[(i + 1) % n]))
    }

    /// Length of the closed loop, including the return leg to the first waypoint.
    pub fn loop_length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    pub fn period(&self) -> f64 {
        self.loop_length() / self.speed
    }

    /// Ground-plane position and unit heading at time `t`.
    pub fn pose_at(&self, t: f64) -> (Vec2, Vec2) {
        let total = self.loop_length();
        let mut s = libm::fmod(self.speed * t.max(0.0), total);
        if s < 0.0 {
            s += total;
        }
        let mut last = None;
        for (a, b) in self.segments() {
            let len = a.distance(b);
            let heading = (b - a) / len;
            if s < len {
                return (a + heading * s, heading);
            }
            s -= len;
            last = Some((b, heading));
        }
        // Rounding left us at the very end of the loop.
        let (_, heading) = last.expect("validated mover has waypoints");
        (self.waypoints[0], heading)
    }

    pub fn box_at(&self, t: f64, floor_z: f64) -> OrientedBox {
        let (c, heading) = self.pose_at(t);
        let [l, w, h] = self.box_dimensions;
        OrientedBox { center: c.extend(floor_z + 0.5 * h), half_extents: Vec3::new(0.5 * l, 0.5 * w, 0.5 * h), heading }
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x >= self.min.x - tol && p.x <= self.max.x + tol && p.y >= self.min.y - tol && p.y <= self.max.y + tol
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Bounding rectangle of a point set.
    pub fn enclosing(points: impl IntoIterator<Item = Vec2>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Rect { min: first, max: first }, |r, p| Rect {
            min: Vec2::new(r.min.x.min(p.x), r.min.y.min(p.y)),
            max: Vec2::new(r.max.x.max(p.x), r.max.y.max(p.y)),
        }))
    }

    /// Same centre, sides multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Rect {
        let c = self.center();
        let half = Vec2::new(self.width(), self.height()) * (0.5 * factor);
        Rect { min: c - half, max: c + half }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: Aabb,
    /// Area of interest; defaults to the bounding rectangle of the base stations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aoi: Option<Rect>,
    pub materials: Vec<Material>,
    pub obstacles: Vec<Obstacle>,
    pub base_stations: Vec<BaseStation>,
    pub pois: Vec<PointOfInterest>,
    #[serde(default)]
    pub movers: Vec<MovingObstacle>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("K < 3: positioning needs at least three base stations, scene has {0}")]
    TooFewBaseStations(usize),
    #[error("base station ids must be exactly 1..={expected}, found {found:?}")]
    BaseStationIds { expected: usize, found: Vec<u32> },
    #[error("material `{0}`: relative permittivity must exceed 1 and conductivity be non-negative")]
    InvalidMaterial(String),
    #[error("material `{0}` is defined more than once")]
    DuplicateMaterial(String),
    #[error("`{owner}` references unknown material `{material}`")]
    UnknownMaterial { owner: String, material: String },
    #[error("obstacle `{obstacle}` face {face} is non-planar")]
    NonPlanarFace { obstacle: String, face: usize },
    #[error("obstacle `{obstacle}` face {face} is not convex")]
    NonConvexFace { obstacle: String, face: usize },
    #[error("obstacle `{obstacle}` face {face} is degenerate")]
    DegenerateFace { obstacle: String, face: usize },
    #[error("obstacle `{0}` is not watertight and not flagged open")]
    NotWatertight(String),
    #[error("obstacle `{0}` has no faces")]
    EmptyObstacle(String),
    #[error("`{0}` lies outside the scene bounds")]
    OutOfBounds(String),
    #[error("point of interest {0} lies outside the area of interest")]
    PoiOutsideAoi(u32),
    #[error("point of interest id {0} is duplicated")]
    DuplicatePoi(u32),
    #[error("mover `{0}`: speed and box dimensions must be positive")]
    InvalidMover(String),
    #[error("mover `{0}`: needs at least two distinct consecutive waypoints")]
    InvalidWaypoints(String),
    #[error("scene bounds are empty or inverted")]
    InvalidBounds,
}

impl Scene {
    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn aoi(&self) -> Rect {
        self.aoi.unwrap_or_else(|| {
            Rect::enclosing(self.base_stations.iter().map(|b| b.position.xy()))
                .unwrap_or(Rect { min: self.bounds.min.xy(), max: self.bounds.max.xy() })
        })
    }

    pub fn base_station(&self, id: u32) -> Option<&BaseStation> {
        self.base_stations.iter().find(|b| b.id == id)
    }

    pub fn floor_z(&self) -> f64 {
        self.bounds.min.z
    }

    /// Boxes occupied by the moving obstacles at time `t`.
    pub fn mover_boxes_at(&self, t: f64) -> Vec<OrientedBox> {
        let floor = self.floor_z();
        self.movers.iter().map(|m| m.box_at(t, floor)).collect()
    }

    /// Checks every structural invariant of the scene.
    pub fn validate(&self) -> Result<(), SceneError> {
        let b = &self.bounds;
        if !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z) {
            return Err(SceneError::InvalidBounds);
        }

        let mut names = BTreeSet::new();
        for m in &self.materials {
            if !(m.relative_permittivity > 1.0) || !(m.conductivity >= 0.0) || !m.conductivity_exponent.is_finite() {
                return Err(SceneError::InvalidMaterial(m.name.clone()));
            }
            if !names.insert(m.name.as_str()) {
                return Err(SceneError::DuplicateMaterial(m.name.clone()));
            }
        }
        let known = |owner: &str, material: &str| {
            if names.contains(material) {
                Ok(())
            } else {
                Err(SceneError::UnknownMaterial { owner: owner.into(), material: material.into() })
            }
        };

        let tol = 1e-6;
        for o in &self.obstacles {
            known(&o.id, &o.material)?;
            if o.faces.is_empty() {
                return Err(SceneError::EmptyObstacle(o.id.clone()));
            }
            for (i, f) in o.faces.iter().enumerate() {
                Polygon::new(f.clone(), PLANARITY_TOL).map_err(|e| {
                    let (obstacle, face) = (o.id.clone(), i);
                    match e {
                        PolygonDefect::NonPlanar => SceneError::NonPlanarFace { obstacle, face },
                        PolygonDefect::NonConvex => SceneError::NonConvexFace { obstacle, face },
                        _ => SceneError::DegenerateFace { obstacle, face },
                    }
                })?;
                if f.iter().any(|v| !b.contains(*v, tol)) {
                    return Err(SceneError::OutOfBounds(o.id.clone()));
                }
            }
            if !o.open && !is_watertight(&o.faces) {
                return Err(SceneError::NotWatertight(o.id.clone()));
            }
        }

        let k = self.base_stations.len();
        if k < 3 {
            return Err(SceneError::TooFewBaseStations(k));
        }
        let mut ids: Vec<u32> = self.base_stations.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, id)| *id as usize != i + 1) {
            return Err(SceneError::BaseStationIds { expected: k, found: ids });
        }
        for bs in &self.base_stations {
            if !b.contains(bs.position, tol) {
                return Err(SceneError::OutOfBounds(alloc::format!("base station {}", bs.id)));
            }
        }

        let aoi = self.aoi();
        let mut poi_ids = BTreeSet::new();
        for p in &self.pois {
            if !poi_ids.insert(p.id) {
                return Err(SceneError::DuplicatePoi(p.id));
            }
            if !aoi.contains(p.ground_truth.xy(), 1e-9) {
                return Err(SceneError::PoiOutsideAoi(p.id));
            }
            if !b.contains(p.ground_truth, tol) {
                return Err(SceneError::OutOfBounds(alloc::format!("point of interest {}", p.id)));
            }
        }

        for m in &self.movers {
            known(&m.id, &m.material)?;
            if !(m.speed > 0.0) || m.box_dimensions.iter().any(|d| !(*d > 0.0)) {
                return Err(SceneError::InvalidMover(m.id.clone()));
            }
            if m.waypoints.len() < 2 || m.segments().any(|(a, b)| !(a.distance(b) > 0.0)) {
                return Err(SceneError::InvalidWaypoints(m.id.clone()));
            }
        }
        Ok(())
    }
}

/// Every undirected edge is shared by exactly two faces.
fn is_watertight(faces: &[Vec<Vec3>]) -> bool {
    let mut edges: Vec<(Vec3, Vec3)> = Vec::new();
    for f in faces {
        for i in 0..f.len() {
            edges.push((f[i], f[(i + 1) % f.len()]));
        }
    }
    let same = |a: Vec3, b: Vec3| a.distance(b) < 1e-9;
    edges.iter().all(|(a, b)| {
        edges.iter().filter(|(c, d)| (same(*a, *c) && same(*b, *d)) || (same(*a, *d) && same(*b, *c))).count() == 2
    })
}
