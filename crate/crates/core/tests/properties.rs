use approx::assert_abs_diff_eq;
use otdoa_core::geom::{Aabb, Vec2, Vec3};
use otdoa_core::locate::{self, InitStrategy, SolverConfig};
use otdoa_core::measure::{compute_tdoa, measurement_from_path, Snapshot, SyncModel, TransmissionSchedule};
use otdoa_core::raytrace::{BandConfig, Category, PropagationPath, Tracer, SPEED_OF_LIGHT};
use otdoa_core::scene::{default_materials, BaseStation, MovingObstacle, Obstacle, PointOfInterest, Scene};
use proptest::prelude::*;

fn room() -> Scene {
    Scene {
        bounds: Aabb::new(Vec3::ZERO, Vec3::new(20.0, 20.0, 6.0)),
        aoi: None,
        materials: default_materials(),
        obstacles: vec![
            Obstacle::panel("floor", Vec3::ZERO, Vec3::new(0.0, 20.0, 0.0), Vec3::new(20.0, 0.0, 0.0), "concrete"),
            Obstacle::panel(
                "wall",
                Vec3::new(0.0, 20.0, 0.0),
                Vec3::new(0.0, 0.0, 6.0),
                Vec3::new(20.0, 0.0, 0.0),
                "concrete",
            ),
            Obstacle::cuboid("machine", Vec3::new(8.0, 8.0, 0.0), Vec3::new(11.0, 10.0, 2.2), "metal"),
            Obstacle::panel(
                "pane",
                Vec3::new(3.0, 14.0, 0.0),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(0.0, 0.0, 3.0),
                "glass",
            ),
        ],
        base_stations: (1..=3)
            .map(|id| BaseStation { id, position: Vec3::new(1.0 + 8.0 * id as f64, 1.0, 4.0), tx_power_dbm: 20.0 })
            .collect(),
        pois: vec![PointOfInterest { id: 1, ground_truth: Vec3::new(5.0, 5.0, 1.0) }],
        movers: vec![MovingObstacle {
            id: "fork".into(),
            box_dimensions: [3.0, 1.2, 2.5],
            waypoints: vec![Vec2::new(2.0, 12.0), Vec2::new(16.0, 12.0), Vec2::new(16.0, 17.0)],
            speed: 1.0,
            material: "metal".into(),
        }],
    }
}

fn translated(s: &Scene, d: Vec3) -> Scene {
    let mut s = s.clone();
    s.bounds = Aabb::new(s.bounds.min + d, s.bounds.max + d);
    for o in &mut s.obstacles {
        for f in &mut o.faces {
            for v in f.iter_mut() {
                *v += d;
            }
        }
    }
    for m in &mut s.movers {
        for w in &mut m.waypoints {
            *w = *w + d.xy();
        }
    }
    s
}

/// Free-space point away from the machine.
fn point() -> impl Strategy<Value = Vec3> {
    (0.5f64..19.5, 0.5f64..19.5, 0.3f64..4.5)
        .prop_filter("outside machine", |(x, y, _)| !((7.5..11.5).contains(x) && (7.5..10.5).contains(y)))
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn lengths(paths: &[PropagationPath]) -> Vec<f64> {
    let mut l: Vec<f64> = paths.iter().map(|p| p.total_length).collect();
    l.sort_by(f64::total_cmp);
    l
}

fn categories(paths: &[PropagationPath]) -> Vec<Category> {
    let mut c: Vec<Category> = paths.iter().map(|p| p.category).collect();
    c.sort();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_reciprocity(a in point(), b in point(), t in 0.0f64..40.0) {
        prop_assume!(a.distance(b) > 0.5);
        let scene = room();
        let tracer = Tracer::new(&scene).unwrap();
        let band = BandConfig::c_band();
        let ab = tracer.trace_all(a, b, t, &band, 20.0);
        let ba = tracer.trace_all(b, a, t, &band, 20.0);
        prop_assert_eq!(categories(&ab), categories(&ba));
        for (x, y) in lengths(&ab).iter().zip(lengths(&ba)) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn translation_keeps_path_lengths(a in point(), b in point(), dx in -50.0f64..50.0, dy in -50.0f64..50.0, dz in -5.0f64..5.0) {
        let d = Vec3::new(dx, dy, dz);
        let band = BandConfig::mm_wave();
        let base = room();
        let moved = translated(&base, d);
        let p0 = Tracer::new(&base).unwrap().trace_all(a, b, 3.0, &band, 20.0);
        let p1 = Tracer::new(&moved).unwrap().trace_all(a + d, b + d, 3.0, &band, 20.0);
        prop_assert_eq!(categories(&p0), categories(&p1));
        for (x, y) in lengths(&p0).iter().zip(lengths(&p1)) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn mover_pose_is_periodic(t in 0.0f64..500.0) {
        let m = &room().movers[0];
        let (p0, h0) = m.pose_at(t);
        let (p1, h1) = m.pose_at(t + m.period());
        prop_assert!(p0.distance(p1) < 1e-9);
        prop_assert!(h0.distance(h1) < 1e-9);
    }

    #[test]
    fn exact_recovery_in_random_rectangles(w in 8.0f64..40.0, h in 8.0f64..40.0, u in 0.05f64..0.95, v in 0.05f64..0.95) {
        let bs = [Vec2::new(0.0, 0.0), Vec2::new(w, 0.0), Vec2::new(0.0, h), Vec2::new(w, h)];
        let truth = Vec2::new(u * w, v * h);
        let obs = noiseless(&bs, 0, truth);
        let e = locate::solve(&obs, &bs, 0, &SolverConfig::default()).unwrap();
        prop_assert!(e.converged);
        prop_assert!(locate::error_2d(e.position, truth) < 1e-6);
    }

    #[test]
    fn solve_is_translation_equivariant(u in 0.1f64..0.9, v in 0.1f64..0.9, dx in -1000.0f64..1000.0, dy in -1000.0f64..1000.0, bias in -2.0f64..2.0) {
        let bs = [Vec2::new(0.0, 0.0), Vec2::new(29.0, 0.0), Vec2::new(0.0, 25.0), Vec2::new(29.0, 25.0)];
        let d = Vec2::new(dx, dy);
        let moved: Vec<Vec2> = bs.iter().map(|b| *b + d).collect();
        let truth = Vec2::new(29.0 * u, 25.0 * v);
        let mut obs = noiseless(&bs, 0, truth);
        obs[1] += bias;
        let cfg = SolverConfig { init: InitStrategy::BsCentroid, ..Default::default() };
        let e0 = locate::solve(&obs, &bs, 0, &cfg).unwrap();
        let e1 = locate::solve(&obs, &moved, 0, &cfg).unwrap();
        prop_assert!((e1.position - d).distance(e0.position) < 1e-6);
    }

    #[test]
    fn reference_choice_does_not_matter_without_noise(u in 0.05f64..0.95, v in 0.05f64..0.95) {
        let bs = [Vec2::new(0.0, 0.0), Vec2::new(29.0, 0.0), Vec2::new(0.0, 25.0), Vec2::new(29.0, 25.0)];
        let truth = Vec2::new(29.0 * u, 25.0 * v);
        let estimates: Vec<Vec2> = (0..4)
            .map(|e| locate::solve(&noiseless(&bs, e, truth), &bs, e, &SolverConfig::default()).unwrap().position)
            .collect();
        for p in &estimates[1..] {
            prop_assert!(p.distance(estimates[0]) < 1e-9);
        }
    }

    #[test]
    fn schedule_offsets_cancel(delta_a in 0.0f64..50.0, delta_b in 0.0f64..50.0, seed in any::<u64>()) {
        let scene = room();
        let poi = &scene.pois[0];
        let paths: Vec<PropagationPath> = scene
            .base_stations
            .iter()
            .map(|b| {
                let len = b.position.distance(poi.ground_truth);
                PropagationPath {
                    tx: b.position,
                    rx: poi.ground_truth,
                    interactions: vec![],
                    total_length: len,
                    toa: len / SPEED_OF_LIGHT,
                    rx_power_dbm: -60.0,
                    category: Category::LoS,
                }
            })
            .collect();
        let tdoa = |delta_ms: f64| {
            let sched = TransmissionSchedule { delta_ms };
            let ms: Vec<_> = paths
                .iter()
                .zip(&scene.base_stations)
                .map(|(p, b)| measurement_from_path(p, b, poi, Snapshot { index: 3, time_s: 0.3 }, &SyncModel::default(), &sched, seed))
                .collect();
            compute_tdoa(&ms, 1, &sched).unwrap()
        };
        for (x, y) in tdoa(delta_a).iter().zip(tdoa(delta_b)) {
            assert_abs_diff_eq!(x.signed_m, y.signed_m, epsilon = 1e-6);
        }
    }
}

fn noiseless(bs: &[Vec2], reference: usize, truth: Vec2) -> Vec<f64> {
    let de = truth.distance(bs[reference]);
    bs.iter().enumerate().filter(|(i, _)| *i != reference).map(|(_, b)| truth.distance(*b) - de).collect()
}
