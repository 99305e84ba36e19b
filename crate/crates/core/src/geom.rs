//! Small vector and polygon toolkit used by the scene model and the tracer.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tolerance used when testing whether a point lies on a face.
pub const ON_FACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-300 {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// Points are written as `[x, y, z]` in scenario files.
impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2::new(0.0, 0.0);

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn extend(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Serialize for Vec2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Vec2::new(x, y))
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.min(*p), hi.max(*p)));
        Some(Self { min, max })
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
            && p.z >= self.min.z - tol
            && p.z <= self.max.z + tol
    }

    /// Slab test for the segment `a + t (b - a)`, `t` in `[0, 1]`.
    pub fn hits_segment(&self, a: Vec3, b: Vec3, pad: f64) -> bool {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (o, dd, lo, hi) in [
            (a.x, d.x, self.min.x - pad, self.max.x + pad),
            (a.y, d.y, self.min.y - pad, self.max.y + pad),
            (a.z, d.z, self.min.z - pad, self.max.z + pad),
        ] {
            if dd.abs() < 1e-300 {
                if o < lo || o > hi {
                    return false;
                }
            } else {
                let inv = 1.0 / dd;
                let (mut ta, mut tb) = ((lo - o) * inv, (hi - o) * inv);
                if ta > tb {
                    core::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Plane `normal · p = offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn mirror(&self, p: Vec3) -> Vec3 {
        p - self.normal * (2.0 * self.signed_distance(p))
    }

    /// Parameter `t` in `(0, 1)` at which the segment `a -> b` crosses the plane.
    pub fn segment_crossing(&self, a: Vec3, b: Vec3) -> Option<f64> {
        let da = self.signed_distance(a);
        let db = self.signed_distance(b);
        if (da > 0.0 && db > 0.0) || (da < 0.0 && db < 0.0) || da == db {
            return None;
        }
        let t = da / (da - db);
        (t > 0.0 && t < 1.0).then_some(t)
    }
}

/// A planar convex polygon. Vertices are counter-clockwise seen from the side
/// the normal points to.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vec3>,
    pub plane: Plane,
    pub bbox: Aabb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonDefect {
    TooFewVertices,
    Degenerate,
    NonPlanar,
    NonConvex,
}

impl Polygon {
    /// Builds a polygon, checking planarity within `planar_tol` metres and convexity.
    pub fn new(vertices: Vec<Vec3>, planar_tol: f64) -> Result<Self, PolygonDefect> {
        if vertices.len() < 3 {
            return Err(PolygonDefect::TooFewVertices);
        }
        // Newell's method is robust for slightly non-planar input.
        let mut n = Vec3::ZERO;
        for (i, a) in vertices.iter().enumerate() {
            let b = vertices[(i + 1) % vertices.len()];
            n += Vec3::new((a.y - b.y) * (a.z + b.z), (a.z - b.z) * (a.x + b.x), (a.x - b.x) * (a.y + b.y));
        }
        let normal = n.normalized().ok_or(PolygonDefect::Degenerate)?;
        let centroid = vertices.iter().fold(Vec3::ZERO, |acc, v| acc + *v) / vertices.len() as f64;
        let plane = Plane { normal, offset: normal.dot(centroid) };
        if vertices.iter().any(|v| plane.signed_distance(*v).abs() > planar_tol) {
            return Err(PolygonDefect::NonPlanar);
        }
        let count = vertices.len();
        for i in 0..count {
            let a = vertices[i];
            let b = vertices[(i + 1) % count];
            let c = vertices[(i + 2) % count];
            if (b - a).cross(c - b).dot(normal) < -1e-12 {
                return Err(PolygonDefect::NonConvex);
            }
        }
        let bbox = Aabb::from_points(vertices.iter()).ok_or(PolygonDefect::TooFewVertices)?;
        Ok(Self { vertices, plane, bbox })
    }

    /// Whether `p` (assumed on the plane) lies inside the polygon, with `tol` metres slack.
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let n = self.plane.normal;
        let count = self.vertices.len();
        for i in 0..count {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % count];
            let edge = b - a;
            let len = edge.norm();
            if len == 0.0 {
                continue;
            }
            // Signed distance of p from the edge line, positive inside.
            if n.cross(edge).dot(p - a) / len < -tol {
                return false;
            }
        }
        true
    }

    /// Crossing parameter of segment `a -> b` through the polygon interior.
    pub fn segment_hit(&self, a: Vec3, b: Vec3) -> Option<f64> {
        if !self.bbox.hits_segment(a, b, 1e-9) {
            return None;
        }
        let t = self.plane.segment_crossing(a, b)?;
        self.contains(a.lerp(b, t), 1e-12).then_some(t)
    }

    pub fn area(&self) -> f64 {
        let v0 = self.vertices[0];
        let mut acc = Vec3::ZERO;
        for w in self.vertices[1..].windows(2) {
            acc += (w[0] - v0).cross(w[1] - v0);
        }
        0.5 * acc.dot(self.plane.normal).abs()
    }
}

/// Box rotated about the vertical axis. Used for moving obstacles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    /// Half extents along (heading, lateral, vertical).
    pub half_extents: Vec3,
    /// Unit heading in the horizontal plane.
    pub heading: Vec2,
}

impl OrientedBox {
    fn to_local(self, p: Vec3) -> Vec3 {
        let d = p - self.center;
        let h = self.heading;
        Vec3::new(d.x * h.x + d.y * h.y, -d.x * h.y + d.y * h.x, d.z)
    }

    /// Whether the open segment `a -> b` passes through the box interior.
    pub fn hits_segment(&self, a: Vec3, b: Vec3) -> bool {
        let la = self.to_local(a);
        let lb = self.to_local(b);
        let local = Aabb::new(-self.half_extents, self.half_extents);
        local.hits_segment(la, lb, 0.0)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y && l.z.abs() <= self.half_extents.z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square(z: f64) -> Polygon {
        Polygon::new(
            vec![Vec3::new(0.0, 0.0, z), Vec3::new(1.0, 0.0, z), Vec3::new(1.0, 1.0, z), Vec3::new(0.0, 1.0, z)],
            1e-9,
        )
        .unwrap()
    }

    #[test]
    fn square_normal_points_up() {
        let sq = square(2.0);
        assert!((sq.plane.normal.z - 1.0).abs() < 1e-15);
        assert!((sq.plane.offset - 2.0).abs() < 1e-15);
        assert!((sq.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bent_quad() {
        let err = Polygon::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.01),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            1e-9,
        );
        assert_eq!(err, Err(PolygonDefect::NonPlanar));
    }

    #[test]
    fn rejects_dart() {
        let err = Polygon::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(1.0, 0.3, 0.0),
                Vec3::new(1.0, 2.0, 0.0),
            ],
            1e-9,
        );
        assert_eq!(err, Err(PolygonDefect::NonConvex));
    }

    #[test]
    fn segment_hits_inside_only() {
        let sq = square(0.0);
        let t = sq.segment_hit(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.5, 0.5, 3.0)).unwrap();
        assert!((t - 0.25).abs() < 1e-15);
        assert!(sq.segment_hit(Vec3::new(1.5, 0.5, -1.0), Vec3::new(1.5, 0.5, 1.0)).is_none());
        // Ends before reaching the plane.
        assert!(sq.segment_hit(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.5, 0.5, -0.1)).is_none());
    }

    #[test]
    fn mirror_is_involution() {
        let sq = square(3.0);
        let p = Vec3::new(0.2, -4.0, 1.0);
        let m = sq.plane.mirror(p);
        assert_eq!(m, Vec3::new(0.2, -4.0, 5.0));
        assert_eq!(sq.plane.mirror(m), p);
    }

    #[test]
    fn oriented_box_blocks_diagonal() {
        let b = OrientedBox {
            center: Vec3::new(0.0, 0.0, 1.0),
            half_extents: Vec3::new(1.5, 0.6, 1.0),
            heading: Vec2::new(libm::sqrt(0.5), libm::sqrt(0.5)),
        };
        assert!(b.contains(Vec3::new(0.9, 0.9, 1.0)));
        assert!(!b.contains(Vec3::new(0.9, -0.9, 1.0)));
        assert!(b.hits_segment(Vec3::new(-5.0, 0.0, 1.0), Vec3::new(5.0, 0.0, 1.0)));
        assert!(!b.hits_segment(Vec3::new(-5.0, 0.0, 2.5), Vec3::new(5.0, 0.0, 2.5)));
    }
}
