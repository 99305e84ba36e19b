//! Deterministic multipath tracer.
//!
//! Mechanisms: the direct ray, specular reflections up to second order
//! (image method), first-order edge diffraction and up to two penetrations
//! through transmissive obstacles. A path never carries more than two
//! interactions in total. Moving obstacles only ever block rays.

mod catalog;
pub mod power;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{OrientedBox, Polygon, Vec3};
use crate::scene::{Material, MovingObstacle, Scene, PLANARITY_TOL};

pub use catalog::LinkCatalog;
pub use power::{Band, BandConfig};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Arrival times closer than this are treated as simultaneous.
pub const TOA_TIE_S: f64 = 1e-15;

/// Interaction budget per path.
pub const MAX_INTERACTIONS: usize = 2;

/// Ignore crossings this close (metres) to the end of a leg; the leg starts or
/// ends on the surface it interacts with.
const LEG_END_SLACK_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionKind {
    Reflection,
    Diffraction,
    Penetration,
}

/// Index into the tracer's face or edge table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeometryRef {
    Face(u32),
    Edge(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub target: GeometryRef,
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    LoS,
    Penetration,
    Diffraction,
    Reflection,
    SecondOrder,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::LoS, Category::Penetration, Category::Diffraction, Category::Reflection, Category::SecondOrder];

    pub fn of(interactions: &[Interaction]) -> Category {
        match interactions {
            [] => Category::LoS,
            [one] => match one.kind {
                InteractionKind::Reflection => Category::Reflection,
                InteractionKind::Diffraction => Category::Diffraction,
                InteractionKind::Penetration => Category::Penetration,
            },
            _ => Category::SecondOrder,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::LoS => "LoS",
            Category::Penetration => "Penetration",
            Category::Diffraction => "Diffraction",
            Category::Reflection => "Reflection",
            Category::SecondOrder => "SecondOrder",
        }
    }
}

/// One multipath component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub tx: Vec3,
    pub rx: Vec3,
    pub interactions: Vec<Interaction>,
    pub total_length: f64,
    pub toa: f64,
    /// `-inf` until evaluated by [`Tracer::path_power`].
    pub rx_power_dbm: f64,
    pub category: Category,
}

impl PropagationPath {
    fn new(tx: Vec3, rx: Vec3, interactions: Vec<Interaction>) -> Self {
        let total_length = polyline_length(tx, rx, &interactions);
        Self {
            tx,
            rx,
            category: Category::of(&interactions),
            interactions,
            total_length,
            toa: total_length / SPEED_OF_LIGHT,
            rx_power_dbm: f64::NEG_INFINITY,
        }
    }

    /// Vertices of the path from transmitter to receiver.
    pub fn vertices(&self) -> impl Iterator<Item = Vec3> + '_ {
        core::iter::once(self.tx).chain(self.interactions.iter().map(|i| i.point)).chain(core::iter::once(self.rx))
    }

    /// Consecutive vertex pairs.
    pub fn legs(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.vertices().zip(self.vertices().skip(1))
    }

    /// Extra distance over the straight transmitter-receiver line.
    pub fn excess_length(&self) -> f64 {
        self.total_length - self.tx.distance(self.rx)
    }

    /// Identity used for de-duplication and band comparisons.
    pub fn signature(&self) -> Vec<(InteractionKind, GeometryRef)> {
        self.interactions.iter().map(|i| (i.kind, i.target)).collect()
    }

    pub fn count_of(&self, kind: InteractionKind) -> usize {
        self.interactions.iter().filter(|i| i.kind == kind).count()
    }
}

fn polyline_length(tx: Vec3, rx: Vec3, interactions: &[Interaction]) -> f64 {
    let mut prev = tx;
    let mut len = 0.0;
    for p in interactions.iter().map(|i| i.point).chain(core::iter::once(rx)) {
        len += prev.distance(p);
        prev = p;
    }
    len
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("no path between BS and PoI")]
    NoPath,
    #[error("degenerate geometry: zero-length path")]
    ZeroLength,
    #[error("obstacle `{obstacle}` references unknown material `{material}`")]
    UnknownMaterial { obstacle: String, material: String },
    #[error("obstacle `{0}` has an invalid face")]
    InvalidFace(String),
}

/// A face of a static obstacle, ready for intersection tests.
#[derive(Debug, Clone)]
pub struct Face {
    pub polygon: Polygon,
    pub obstacle: u32,
    pub material: u32,
    pub transmissive: bool,
}

/// A convex edge of a closed obstacle, eligible for diffraction.
#[derive(Debug, Clone)]
pub struct Edge {
    pub a: Vec3,
    pub b: Vec3,
    pub obstacle: u32,
    pub faces: [u32; 2],
}

/// Prepared static geometry plus the moving occluders of a scene.
#[derive(Debug, Clone)]
pub struct Tracer {
    faces: Vec<Face>,
    edges: Vec<Edge>,
    /// Face index range for every obstacle.
    obstacle_faces: Vec<core::ops::Range<u32>>,
    materials: Vec<Material>,
    movers: Vec<MovingObstacle>,
    floor_z: f64,
}

impl Tracer {
    pub fn new(scene: &Scene) -> Result<Self, TraceError> {
        let mut faces = Vec::new();
        let mut edges = Vec::new();
        let mut obstacle_faces = Vec::new();
        for (oi, o) in scene.obstacles.iter().enumerate() {
            let material =
                scene.materials.iter().position(|m| m.name == o.material).ok_or_else(|| {
                    TraceError::UnknownMaterial { obstacle: o.id.clone(), material: o.material.clone() }
                })?;
            let first = faces.len() as u32;
            for f in &o.faces {
                let polygon =
                    Polygon::new(f.clone(), PLANARITY_TOL).map_err(|_| TraceError::InvalidFace(o.id.clone()))?;
                faces.push(Face {
                    polygon,
                    obstacle: oi as u32,
                    material: material as u32,
                    transmissive: scene.materials[material].transmissive,
                });
            }
            let range = first..faces.len() as u32;
            if !o.open {
                collect_convex_edges(&faces, range.clone(), oi as u32, &mut edges);
            }
            obstacle_faces.push(range);
        }
        Ok(Self {
            faces,
            edges,
            obstacle_faces,
            materials: scene.materials.clone(),
            movers: scene.movers.clone(),
            floor_z: scene.floor_z(),
        })
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn mover_boxes_at(&self, t: f64) -> Vec<OrientedBox> {
        self.movers.iter().map(|m| m.box_at(t, self.floor_z)).collect()
    }

    /// Straight ray, possibly through up to two transmissive obstacles.
    pub fn trace_direct(&self, tx: Vec3, rx: Vec3, t: f64) -> Option<PropagationPath> {
        self.direct_with(tx, rx, &self.mover_boxes_at(t))
    }

    /// Image-method specular paths of order `1..=max_order`.
    pub fn trace_reflections(&self, tx: Vec3, rx: Vec3, t: f64, max_order: u8) -> Vec<PropagationPath> {
        let boxes = self.mover_boxes_at(t);
        let mut out = Vec::new();
        self.reflections_with(tx, rx, &boxes, max_order, &mut out);
        out
    }

    /// First-order diffraction paths. Empty when the direct ray is clear
    /// line-of-sight, since the bent ray would only duplicate it.
    pub fn trace_diffractions(&self, tx: Vec3, rx: Vec3, t: f64) -> Vec<PropagationPath> {
        let boxes = self.mover_boxes_at(t);
        let mut out = Vec::new();
        if !self.clear_los(tx, rx, &boxes) {
            self.diffractions_with(tx, rx, &boxes, &mut out);
        }
        out
    }

    /// Every mechanism, powered, filtered by receiver sensitivity, sorted by
    /// arrival time and de-duplicated.
    pub fn trace_all(&self, tx: Vec3, rx: Vec3, t: f64, band: &BandConfig, tx_power_dbm: f64) -> Vec<PropagationPath> {
        let boxes = self.mover_boxes_at(t);
        let mut paths = Vec::new();
        let los_clear = match self.direct_with(tx, rx, &boxes) {
            Some(p) => {
                let clear = p.interactions.is_empty();
                paths.push(p);
                clear
            }
            None => false,
        };
        self.reflections_with(tx, rx, &boxes, 2, &mut paths);
        if !los_clear {
            self.diffractions_with(tx, rx, &boxes, &mut paths);
        }
        self.finish(paths, band, tx_power_dbm)
    }

    /// Powers, filters, sorts and de-duplicates a raw candidate list.
    fn finish(&self, mut paths: Vec<PropagationPath>, band: &BandConfig, tx_power_dbm: f64) -> Vec<PropagationPath> {
        paths.retain_mut(|p| match self.path_power(p, tx_power_dbm, band) {
            Ok(pw) if pw >= band.rx_sensitivity_dbm => {
                p.rx_power_dbm = pw;
                true
            }
            _ => false,
        });
        sort_paths(&mut paths);
        let mut seen = BTreeSet::new();
        paths.retain(|p| seen.insert(p.signature()));
        paths
    }

    /// Received power in dBm for `path` under `band`.
    pub fn path_power(&self, path: &PropagationPath, tx_power_dbm: f64, band: &BandConfig) -> Result<f64, TraceError> {
        if !(path.total_length > 0.0) {
            return Err(TraceError::ZeroLength);
        }
        let f = band.center_frequency_hz;
        let mut loss = power::fspl_db(path.total_length, f);
        let verts: Vec<Vec3> = path.vertices().collect();
        for (i, it) in path.interactions.iter().enumerate() {
            let prev = verts[i];
            let next = verts[i + 2];
            match (it.kind, it.target) {
                (InteractionKind::Reflection | InteractionKind::Penetration, GeometryRef::Face(fi)) => {
                    let face = &self.faces[fi as usize];
                    let dir = (it.point - prev).normalized().or((next - it.point).normalized());
                    let cos_i = dir.map_or(1.0, |d| d.dot(face.polygon.plane.normal).abs());
                    let eps = self.materials[face.material as usize].complex_permittivity(f);
                    loss += if it.kind == InteractionKind::Reflection {
                        power::reflection_loss_db(eps, cos_i)
                    } else {
                        power::penetration_loss_db(eps, cos_i)
                    };
                }
                (InteractionKind::Diffraction, GeometryRef::Edge(ei)) => {
                    let edge = &self.edges[ei as usize];
                    let excess = prev.distance(it.point) + it.point.distance(next) - prev.distance(next);
                    let obstructing = self.obstacle_blocks(edge.obstacle, prev, next);
                    let v = power::fresnel_kirchhoff_v(excess, band.wavelength(), obstructing);
                    loss += power::knife_edge_loss_db(v);
                }
                _ => unreachable!("interaction kind and target disagree"),
            }
        }
        Ok(tx_power_dbm - loss)
    }

    /// Unobstructed straight ray with no interactions.
    fn clear_los(&self, tx: Vec3, rx: Vec3, boxes: &[OrientedBox]) -> bool {
        self.direct_with(tx, rx, boxes).is_some_and(|p| p.interactions.is_empty())
    }

    fn direct_with(&self, tx: Vec3, rx: Vec3, boxes: &[OrientedBox]) -> Option<PropagationPath> {
        let interactions = self.assemble(tx, rx, &[], boxes)?;
        Some(PropagationPath::new(tx, rx, interactions))
    }

    fn reflections_with(
        &self,
        tx: Vec3,
        rx: Vec3,
        boxes: &[OrientedBox],
        max_order: u8,
        out: &mut Vec<PropagationPath>,
    ) {
        let reflect = |face: u32, point: Vec3| Interaction {
            kind: InteractionKind::Reflection,
            target: GeometryRef::Face(face),
            point,
        };
        for (i, f1) in self.faces.iter().enumerate() {
            let plane1 = f1.polygon.plane;
            let side_tx = plane1.signed_distance(tx);
            if side_tx == 0.0 {
                continue;
            }
            let img1 = plane1.mirror(tx);
            if let Some(p1) = self.reflection_point(i, rx, img1) {
                if let Some(its) = self.assemble(tx, rx, &[reflect(i as u32, p1)], boxes) {
                    out.push(PropagationPath::new(tx, rx, its));
                }
            }
            if max_order < 2 {
                continue;
            }
            for (j, f2) in self.faces.iter().enumerate() {
                if i == j {
                    continue;
                }
                let plane2 = f2.polygon.plane;
                let s_rx = plane2.signed_distance(rx);
                let s_img = plane2.signed_distance(img1);
                // rx and the first image must sit on the same side of the second plane.
                if s_rx == 0.0 || s_img == 0.0 || (s_rx > 0.0) != (s_img > 0.0) {
                    continue;
                }
                let img2 = plane2.mirror(img1);
                let Some(p2) = self.reflection_point(j, rx, img2) else { continue };
                let Some(p1) = self.reflection_point(i, p2, img1) else { continue };
                if plane1.signed_distance(p2).signum() != side_tx.signum() {
                    continue;
                }
                let anchors = [reflect(i as u32, p1), reflect(j as u32, p2)];
                if let Some(its) = self.assemble(tx, rx, &anchors, boxes) {
                    out.push(PropagationPath::new(tx, rx, its));
                }
            }
        }
    }

    /// Where the segment `from -> image` meets face `face`, if inside the polygon.
    fn reflection_point(&self, face: usize, from: Vec3, image: Vec3) -> Option<Vec3> {
        let poly = &self.faces[face].polygon;
        let t = poly.plane.segment_crossing(from, image)?;
        let p = from.lerp(image, t);
        poly.contains(p, 1e-12).then_some(p)
    }

    fn diffractions_with(&self, tx: Vec3, rx: Vec3, boxes: &[OrientedBox], out: &mut Vec<PropagationPath>) {
        for (ei, edge) in self.edges.iter().enumerate() {
            if !self.is_silhouette(edge, tx) && !self.is_silhouette(edge, rx) {
                continue;
            }
            let p = edge_diffraction_point(edge.a, edge.b, tx, rx);
            if p.distance(tx) < LEG_END_SLACK_M || p.distance(rx) < LEG_END_SLACK_M {
                continue;
            }
            let anchor =
                Interaction { kind: InteractionKind::Diffraction, target: GeometryRef::Edge(ei as u32), point: p };
            if let Some(its) = self.assemble(tx, rx, &[anchor], boxes) {
                out.push(PropagationPath::new(tx, rx, its));
            }
        }
    }

    /// One adjacent face looks towards `p`, the other away from it.
    fn is_silhouette(&self, edge: &Edge, p: Vec3) -> bool {
        let [f1, f2] = edge.faces;
        let front = |f: u32| self.faces[f as usize].polygon.plane.signed_distance(p) > 0.0;
        front(f1) != front(f2)
    }

    /// Whether any face of `obstacle` cuts the open segment `a -> b`.
    fn obstacle_blocks(&self, obstacle: u32, a: Vec3, b: Vec3) -> bool {
        let range = self.obstacle_faces[obstacle as usize].clone();
        range.into_iter().any(|fi| self.faces[fi as usize].polygon.segment_hit(a, b).is_some())
    }

    /// Walks the legs between `anchors`, inserting penetrations of
    /// transmissive obstacles. `None` when a leg is blocked or the interaction
    /// budget is exceeded.
    fn assemble(&self, tx: Vec3, rx: Vec3, anchors: &[Interaction], boxes: &[OrientedBox]) -> Option<Vec<Interaction>> {
        let mut out = Vec::with_capacity(MAX_INTERACTIONS);
        let mut budget = MAX_INTERACTIONS.checked_sub(anchors.len())?;
        let mut start = tx;
        let mut prev_anchor: Option<&Interaction> = None;
        for k in 0..=anchors.len() {
            let next_anchor = anchors.get(k);
            let end = next_anchor.map_or(rx, |a| a.point);
            let mut skip: [Option<u32>; 4] = [None; 4];
            let mut fill = |slot: usize, a: Option<&Interaction>| match a.map(|a| a.target) {
                Some(GeometryRef::Face(f)) => skip[slot] = Some(f),
                Some(GeometryRef::Edge(e)) => {
                    let [f1, f2] = self.edges[e as usize].faces;
                    skip[slot] = Some(f1);
                    skip[slot + 1] = Some(f2);
                }
                None => {}
            };
            fill(0, prev_anchor);
            fill(2, next_anchor);
            let crossings = self.leg_crossings(start, end, &skip, boxes, budget)?;
            budget -= crossings.len();
            out.extend(crossings);
            if let Some(a) = next_anchor {
                out.push(*a);
            }
            start = end;
            prev_anchor = next_anchor;
        }
        Some(out)
    }

    /// Transmissive obstacles crossed by the leg `a -> b`, one interaction per
    /// obstacle at its entry face, in travel order.
    fn leg_crossings(
        &self,
        a: Vec3,
        b: Vec3,
        skip: &[Option<u32>],
        boxes: &[OrientedBox],
        budget: usize,
    ) -> Option<Vec<Interaction>> {
        if boxes.iter().any(|bx| bx.hits_segment(a, b)) {
            return None;
        }
        let len = a.distance(b);
        if len == 0.0 {
            return Some(Vec::new());
        }
        let slack = LEG_END_SLACK_M / len;
        // (t, obstacle, face)
        let mut hits: Vec<(f64, u32, u32)> = Vec::new();
        for (fi, face) in self.faces.iter().enumerate() {
            if skip.contains(&Some(fi as u32)) {
                continue;
            }
            let Some(t) = face.polygon.segment_hit(a, b) else { continue };
            if t < slack || t > 1.0 - slack {
                continue;
            }
            if !face.transmissive {
                return None;
            }
            match hits.iter_mut().find(|h| h.1 == face.obstacle) {
                Some(h) if t < h.0 => *h = (t, face.obstacle, fi as u32),
                Some(_) => {}
                None => hits.push((t, face.obstacle, fi as u32)),
            }
            if hits.len() > budget {
                return None;
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
        Some(
            hits.into_iter()
                .map(|(t, _, fi)| Interaction {
                    kind: InteractionKind::Penetration,
                    target: GeometryRef::Face(fi),
                    point: a.lerp(b, t),
                })
                .collect(),
        )
    }
}

/// Point on segment `a..b` minimising `|tx - p| + |p - rx|`.
///
/// Unfolds the two endpoints into a half-plane around the edge line; the
/// straight line between them crosses the edge at the optimum. The objective
/// is convex along the edge, so clamping to the segment is exact.
pub fn edge_diffraction_point(a: Vec3, b: Vec3, tx: Vec3, rx: Vec3) -> Vec3 {
    let d = b - a;
    let len = d.norm();
    let Some(u) = d.normalized() else { return a };
    let s1 = (tx - a).dot(u);
    let s2 = (rx - a).dot(u);
    let h1 = (tx - (a + u * s1)).norm();
    let h2 = (rx - (a + u * s2)).norm();
    let s = if h1 + h2 > 0.0 { s1 + (s2 - s1) * h1 / (h1 + h2) } else { 0.5 * (s1 + s2) };
    a + u * s.clamp(0.0, len)
}

/// Sort by arrival time, then stronger first, then fewer interactions.
pub fn sort_paths(paths: &mut [PropagationPath]) {
    paths.sort_by(|x, y| {
        x.toa
            .total_cmp(&y.toa)
            .then(y.rx_power_dbm.total_cmp(&x.rx_power_dbm))
            .then(x.interactions.len().cmp(&y.interactions.len()))
            .then_with(|| x.signature().cmp(&y.signature()))
    });
}

/// The first-arriving component plus every path tied with it.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstArrival {
    pub path: PropagationPath,
    /// All paths within [`TOA_TIE_S`] of the earliest, including `path`.
    pub tied: Vec<PropagationPath>,
}

pub fn first_arriving(paths: &[PropagationPath]) -> Result<FirstArrival, TraceError> {
    let min_toa = paths.iter().map(|p| p.toa).min_by(f64::total_cmp).ok_or(TraceError::NoPath)?;
    let mut tied: Vec<PropagationPath> = paths.iter().filter(|p| p.toa - min_toa < TOA_TIE_S).cloned().collect();
    tied.sort_by(|x, y| {
        y.rx_power_dbm
            .total_cmp(&x.rx_power_dbm)
            .then(x.interactions.len().cmp(&y.interactions.len()))
            .then(x.toa.partial_cmp(&y.toa).unwrap_or(Ordering::Equal))
    });
    Ok(FirstArrival { path: tied[0].clone(), tied })
}

/// Edges shared by two faces of one closed obstacle whose dihedral is convex.
fn collect_convex_edges(faces: &[Face], range: core::ops::Range<u32>, obstacle: u32, out: &mut Vec<Edge>) {
    let same = |p: Vec3, q: Vec3| p.distance(q) < 1e-9;
    for i in range.clone() {
        let fi = &faces[i as usize].polygon;
        let n = fi.vertices.len();
        for k in 0..n {
            let (a, b) = (fi.vertices[k], fi.vertices[(k + 1) % n]);
            for j in (i + 1)..range.end {
                let fj = &faces[j as usize].polygon;
                let m = fj.vertices.len();
                let shared = (0..m).any(|l| {
                    let (c, d) = (fj.vertices[l], fj.vertices[(l + 1) % m]);
                    (same(a, d) && same(b, c)) || (same(a, c) && same(b, d))
                });
                if !shared {
                    continue;
                }
                // Convex when the far vertices of each face lie behind the other's plane.
                let convex = fj.vertices.iter().all(|v| fi.plane.signed_distance(*v) <= 1e-9)
                    && fi.vertices.iter().all(|v| fj.plane.signed_distance(*v) <= 1e-9);
                let coplanar = fi.plane.normal.dot(fj.plane.normal) > 1.0 - 1e-12;
                if convex && !coplanar {
                    out.push(Edge { a, b, obstacle, faces: [i, j] });
                }
            }
        }
    }
}
