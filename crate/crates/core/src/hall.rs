//! Parametric production hall used as the canonical test scene.
//!
//! Envelope 42 m x 46 m x 8.8 m. The area of interest is a 29 m x 25 m
//! rectangle with a 4 m high base station at each corner. Three rows of
//! metal machines (with robot arms on top) cross the area along x, with
//! concrete pillars standing in gaps of each row. Points of interest sit at
//! 1 m height in the aisles and in the pillar gaps; they are fixed, while the
//! seed only changes how each row is split into machines. Two forklifts loop
//! through the aisles in opposite directions.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Uniform};

use crate::geom::{Aabb, Vec2, Vec3};
use crate::scene::{default_materials, BaseStation, MovingObstacle, Obstacle, PointOfInterest, Rect, Scene};

pub const HALL_SIZE: Vec3 = Vec3::new(42.0, 46.0, 8.8);
pub const AOI_MIN: Vec2 = Vec2::new(6.5, 10.5);
pub const AOI_MAX: Vec2 = Vec2::new(35.5, 35.5);
pub const BS_HEIGHT: f64 = 4.0;
pub const POI_HEIGHT: f64 = 1.0;
pub const BS_TX_POWER_DBM: f64 = 20.0;

pub const FORKLIFT_SIZE: [f64; 3] = [3.0, 1.2, 2.5];
pub const FORKLIFT_SPEED: f64 = 1.0;

const ROW_CENTERS: [f64; 3] = [16.5, 23.0, 29.5];
const ROW_DEPTH: f64 = 2.0;
/// Stretches of each row available for machines; pillars stand in between.
const ROW_SEGMENTS: [(f64, f64); 3] = [(8.5, 13.5), (15.5, 26.5), (28.5, 34.0)];
const PILLAR_X: [f64; 2] = [14.5, 27.5];
const PILLAR_SIDE: f64 = 0.6;

/// Aisle rows of points of interest: (y, xs).
const AISLE_POIS: [(f64, [f64; 5]); 4] = [
    (14.6, [9.0, 15.0, 21.0, 27.0, 33.0]),
    (21.0, [10.0, 16.0, 21.5, 27.0, 32.5]),
    (25.3, [9.5, 15.5, 21.0, 26.5, 32.0]),
    (31.6, [9.0, 15.0, 21.0, 27.0, 33.0]),
];
/// Points of interest squeezed between a machine and a pillar.
const GAP_POIS: [(f64, f64); 3] = [(13.85, 16.5), (28.15, 23.0), (13.85, 29.5)];

/// Builds the hall. Deterministic in `seed`; only machine layout depends on it.
pub fn generate_synthetic_hall(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = HALL_SIZE;
    let mut obstacles = Vec::new();

    // Envelope: open slabs.
    let (x1, y1, z1) = (size.x, size.y, size.z);
    let o = Vec3::ZERO;
    obstacles.push(Obstacle::panel("floor", o, Vec3::new(0.0, y1, 0.0), Vec3::new(x1, 0.0, 0.0), "concrete"));
    obstacles.push(Obstacle::panel(
        "ceiling",
        Vec3::new(0.0, 0.0, z1),
        Vec3::new(x1, 0.0, 0.0),
        Vec3::new(0.0, y1, 0.0),
        "concrete",
    ));
    obstacles.push(Obstacle::panel("wall_south", o, Vec3::new(x1, 0.0, 0.0), Vec3::new(0.0, 0.0, z1), "concrete"));
    obstacles.push(Obstacle::panel(
        "wall_north",
        Vec3::new(0.0, y1, 0.0),
        Vec3::new(0.0, 0.0, z1),
        Vec3::new(x1, 0.0, 0.0),
        "concrete",
    ));
    obstacles.push(Obstacle::panel("wall_west", o, Vec3::new(0.0, 0.0, z1), Vec3::new(0.0, y1, 0.0), "concrete"));
    obstacles.push(Obstacle::panel(
        "wall_east",
        Vec3::new(x1, 0.0, 0.0),
        Vec3::new(0.0, y1, 0.0),
        Vec3::new(0.0, 0.0, z1),
        "concrete",
    ));

    // Machine rows.
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * unit.sample(&mut rng);
    for (r, yc) in ROW_CENTERS.iter().enumerate() {
        for (s, (x0, x1)) in ROW_SEGMENTS.iter().enumerate() {
            let length = x1 - x0;
            let count =
                if length > 8.0 { 2 + (draw(0.0, 2.0) as usize).min(1) } else { 1 + (draw(0.0, 2.0) as usize).min(1) };
            let gaps: Vec<f64> = (1..count).map(|_| draw(0.8, 1.5)).collect();
            let weights: Vec<f64> = (0..count).map(|_| draw(0.7, 1.3)).collect();
            let lead = draw(0.0, 0.3);
            let tail = draw(0.0, 0.3);
            let usable = length - lead - tail - gaps.iter().sum::<f64>();
            let wsum: f64 = weights.iter().sum();
            let mut x = x0 + lead;
            for (m, w) in weights.iter().enumerate() {
                let len = usable * w / wsum;
                let depth = draw(1.6, ROW_DEPTH);
                let height = draw(1.6, 2.6);
                let id = format!("machine_r{r}_s{s}_m{m}");
                let (ya, yb) = (yc - 0.5 * depth, yc + 0.5 * depth);
                obstacles.push(Obstacle::cuboid(&*id, Vec3::new(x, ya, 0.0), Vec3::new(x + len, yb, height), "metal"));
                if draw(0.0, 1.0) < 0.6 {
                    let ax = draw(x + 0.1, x + len - 0.7);
                    let arm_h = draw(0.6, 1.0);
                    obstacles.push(Obstacle::cuboid(
                        format!("{id}_arm"),
                        Vec3::new(ax, yc - 0.3, height),
                        Vec3::new(ax + 0.6, yc + 0.3, height + arm_h),
                        "metal",
                    ));
                }
                x += len + gaps.get(m).copied().unwrap_or(0.0);
            }
        }
    }

    // Floor-to-ceiling pillars in the row gaps.
    let half = 0.5 * PILLAR_SIDE;
    for (r, yc) in ROW_CENTERS.iter().enumerate() {
        for (p, xc) in PILLAR_X.iter().enumerate() {
            obstacles.push(Obstacle::cuboid(
                format!("pillar_r{r}_{p}"),
                Vec3::new(xc - half, yc - half, 0.0),
                Vec3::new(xc + half, yc + half, z1),
                "concrete",
            ));
        }
    }

    // Glass partition along the middle aisle, and a glazed booth by the north wall.
    obstacles.push(Obstacle::panel(
        "glass_aisle",
        Vec3::new(17.5, 24.4, 0.0),
        Vec3::new(7.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 2.2),
        "glass",
    ));
    obstacles.push(Obstacle::panel(
        "glass_north",
        Vec3::new(16.0, 34.7, 0.0),
        Vec3::new(10.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 3.0),
        "glass",
    ));
    obstacles.push(Obstacle::panel(
        "glass_north_return",
        Vec3::new(16.0, 34.7, 0.0),
        Vec3::new(0.0, 1.5, 0.0),
        Vec3::new(0.0, 0.0, 3.0),
        "glass",
    ));

    // Plastic container storage east of the area, wooden pallets to the west.
    for (i, y0) in [14.0, 17.0, 20.0].iter().enumerate() {
        obstacles.push(Obstacle::cuboid(
            format!("containers_{i}"),
            Vec3::new(37.5, *y0, 0.0),
            Vec3::new(40.0, y0 + 2.0, 1.8),
            "plastic",
        ));
    }
    for (i, y0) in [16.0, 24.0].iter().enumerate() {
        obstacles.push(Obstacle::cuboid(
            format!("pallets_{i}"),
            Vec3::new(1.5, *y0, 0.0),
            Vec3::new(4.5, y0 + 3.0, 1.2),
            "wood",
        ));
    }

    // Overhead steel pipes.
    for (i, y0) in [20.0, 26.5].iter().enumerate() {
        obstacles.push(Obstacle::cuboid(
            format!("pipe_{i}"),
            Vec3::new(1.0, *y0, 6.0),
            Vec3::new(41.0, y0 + 0.3, 6.3),
            "metal",
        ));
    }

    let corners = [
        Vec2::new(AOI_MIN.x, AOI_MIN.y),
        Vec2::new(AOI_MAX.x, AOI_MIN.y),
        Vec2::new(AOI_MIN.x, AOI_MAX.y),
        Vec2::new(AOI_MAX.x, AOI_MAX.y),
    ];
    let base_stations = corners
        .iter()
        .enumerate()
        .map(|(i, c)| BaseStation { id: i as u32 + 1, position: c.extend(BS_HEIGHT), tx_power_dbm: BS_TX_POWER_DBM })
        .collect();

    let pois = AISLE_POIS
        .iter()
        .flat_map(|(y, xs)| xs.iter().map(move |x| Vec2::new(*x, *y)))
        .chain(GAP_POIS.iter().map(|(x, y)| Vec2::new(*x, *y)))
        .enumerate()
        .map(|(i, p)| PointOfInterest { id: i as u32 + 1, ground_truth: p.extend(POI_HEIGHT) })
        .collect();

    let movers = alloc::vec![
        MovingObstacle {
            id: "forklift_1".into(),
            box_dimensions: FORKLIFT_SIZE,
            waypoints: alloc::vec![
                Vec2::new(7.5, 12.3),
                Vec2::new(35.0, 12.3),
                Vec2::new(35.0, 18.8),
                Vec2::new(7.5, 18.8),
            ],
            speed: FORKLIFT_SPEED,
            material: "metal".into(),
        },
        MovingObstacle {
            id: "forklift_2".into(),
            box_dimensions: FORKLIFT_SIZE,
            waypoints: alloc::vec![
                Vec2::new(35.0, 33.6),
                Vec2::new(35.0, 27.0),
                Vec2::new(7.5, 27.0),
                Vec2::new(7.5, 33.6),
            ],
            speed: FORKLIFT_SPEED,
            material: "metal".into(),
        },
    ];

    Scene {
        bounds: Aabb::new(Vec3::ZERO, size),
        aoi: Some(Rect { min: AOI_MIN, max: AOI_MAX }),
        materials: default_materials(),
        obstacles,
        base_stations,
        pois,
        movers,
    }
}
