//! Full runs: step through the emulation window, take the first arrival of
//! every base station at every point of interest, solve, and aggregate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{OrientedBox, Vec2};
use crate::locate::{self, SolverConfig};
use crate::measure::{compute_tdoa, measurement_from_path, Snapshot, SyncModel, ToAMeasurement, TransmissionSchedule};
use crate::raytrace::{BandConfig, Category, LinkCatalog, PropagationPath, TraceError, Tracer};
use crate::scene::{BaseStation, Scene, SceneError};

/// Slack for the snapshot count so that 60 / 0.1 counts 600.
const SNAPSHOT_COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Movers ignored.
    Static,
    /// Movers occlude according to their pose at each snapshot.
    Dynamic,
}

impl Setup {
    pub fn label(self) -> &'static str {
        match self {
            Setup::Static => "static",
            Setup::Dynamic => "dynamic",
        }
    }
}

/// How snapshots are turned into one position per point of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionMode {
    /// Solve every snapshot and average the converged positions.
    SnapshotAverage,
    /// Average the range differences over snapshots and solve once.
    AveragedTdoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub band: BandConfig,
    pub setup: Setup,
    pub duration_s: f64,
    pub snapshot_interval_s: f64,
    pub run_seed: u64,
    pub sync: SyncModel,
    pub sched: TransmissionSchedule,
    pub solver: SolverConfig,
    /// Preferred reference; the lowest reachable id stands in when it is unreachable.
    pub reference_bs: u32,
    pub position_mode: PositionMode,
}

impl RunConfig {
    pub fn new(band: BandConfig, setup: Setup, run_seed: u64) -> Self {
        Self {
            band,
            setup,
            duration_s: 60.0,
            snapshot_interval_s: 0.1,
            run_seed,
            sync: SyncModel::default(),
            sched: TransmissionSchedule::default(),
            solver: SolverConfig::default(),
            reference_bs: 1,
            position_mode: PositionMode::SnapshotAverage,
        }
    }

    pub fn snapshot_count(&self) -> u32 {
        libm::floor(self.duration_s / self.snapshot_interval_s + SNAPSHOT_COUNT_SLACK) as u32
    }

    pub fn snapshot(&self, index: u32) -> Snapshot {
        Snapshot { index, time_s: index as f64 * self.snapshot_interval_s }
    }

    pub fn validate(&self) -> Result<(), EmulateError> {
        let bad = |what: &str| Err(EmulateError::InvalidConfig(what.into()));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad("duration_s must be positive");
        }
        if !(self.snapshot_interval_s > 0.0) || !self.snapshot_interval_s.is_finite() {
            return bad("snapshot_interval_s must be positive");
        }
        if self.snapshot_count() < 1 {
            return bad("duration shorter than one snapshot interval");
        }
        if !(self.sync.precision_ns >= 0.0) || !self.sync.precision_ns.is_finite() {
            return bad("sync precision must be non-negative");
        }
        if !(self.sched.delta_ms >= 0.0) || !self.sched.delta_ms.is_finite() {
            return bad("schedule delta must be non-negative");
        }
        if self.solver.max_iterations < 1
            || !(self.solver.step_tolerance_m > 0.0)
            || !(self.solver.initial_damping > 0.0)
        {
            return bad("solver needs max_iterations >= 1 and positive tolerances");
        }
        if !(self.band.center_frequency_hz > 0.0) {
            return bad("band centre frequency must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmulateError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("reference BS {0} is not in the scene")]
    UnknownReference(u32),
}

/// First-arrival counts per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcCounts {
    pub los: u64,
    pub penetration: u64,
    pub diffraction: u64,
    pub reflection: u64,
    pub second_order: u64,
}

impl MpcCounts {
    fn slot(&mut self, c: Category) -> &mut u64 {
        match c {
            Category::LoS => &mut self.los,
            Category::Penetration => &mut self.penetration,
            Category::Diffraction => &mut self.diffraction,
            Category::Reflection => &mut self.reflection,
            Category::SecondOrder => &mut self.second_order,
        }
    }

    pub fn add(&mut self, c: Category) {
        *self.slot(c) += 1;
    }

    pub fn get(&self, c: Category) -> u64 {
        match c {
            Category::LoS => self.los,
            Category::Penetration => self.penetration,
            Category::Diffraction => self.diffraction,
            Category::Reflection => self.reflection,
            Category::SecondOrder => self.second_order,
        }
    }

    pub fn merge(&mut self, other: &MpcCounts) {
        for c in Category::ALL {
            *self.slot(c) += other.get(c);
        }
    }

    pub fn total(&self) -> u64 {
        Category::ALL.iter().map(|c| self.get(*c)).sum()
    }

    /// `(category, count)` in the fixed category order.
    pub fn entries(&self) -> [(Category, u64); 5] {
        Category::ALL.map(|c| (c, self.get(c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsMpcCounts {
    pub bs_id: u32,
    pub counts: MpcCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiResult {
    pub poi_id: u32,
    pub ground_truth: Vec2,
    /// `None` when no snapshot produced a usable estimate.
    pub mean_position: Option<Vec2>,
    pub mean_error_m: Option<f64>,
    /// Error of every converged per-snapshot solve, in snapshot order.
    pub per_snapshot_errors: Vec<f64>,
    pub first_mpc_counts: Vec<BsMpcCounts>,
    /// Snapshots with fewer than three reachable base stations.
    pub unreachable_snapshots: u32,
    /// Snapshots whose solve failed or did not converge.
    pub unconverged_snapshots: u32,
}

impl PoiResult {
    pub fn mpc_totals(&self) -> MpcCounts {
        let mut total = MpcCounts::default();
        for b in &self.first_mpc_counts {
            total.merge(&b.counts);
        }
        total
    }
}

/// A surviving path of one link at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub bs_id: u32,
    pub poi_id: u32,
    pub snapshot_t: f64,
    pub path: PropagationPath,
}

/// Optional per-snapshot detail collected alongside a [`PoiResult`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Recording {
    /// Surviving path sets; a link's set is recorded at the first snapshot
    /// and again whenever it changes.
    pub paths: bool,
    pub measurements: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiTrace {
    pub result: PoiResult,
    pub paths: Vec<PathRecord>,
    pub measurements: Vec<ToAMeasurement>,
}

/// Reachable station ids and the reference used with them.
type StationSet = (Vec<u32>, u32);
/// Summed range differences and snapshot count per station set.
type TdoaSums = BTreeMap<StationSet, (Vec<f64>, u32)>;

/// Validated scene, tracer and configuration, ready to run any point of interest.
pub struct Emulator<'a> {
    scene: &'a Scene,
    tracer: Tracer,
    config: RunConfig,
    stations: Vec<BaseStation>,
}

impl<'a> Emulator<'a> {
    pub fn new(scene: &'a Scene, config: RunConfig) -> Result<Self, EmulateError> {
        scene.validate()?;
        config.validate()?;
        if scene.base_station(config.reference_bs).is_none() {
            return Err(EmulateError::UnknownReference(config.reference_bs));
        }
        let mut stations = scene.base_stations.clone();
        stations.sort_by_key(|b| b.id);
        Ok(Self { scene, tracer: Tracer::new(scene)?, config, stations })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn poi_count(&self) -> usize {
        self.scene.pois.len()
    }

    fn boxes_at(&self, t: f64) -> Vec<OrientedBox> {
        match self.config.setup {
            Setup::Static => Vec::new(),
            Setup::Dynamic => self.scene.mover_boxes_at(t),
        }
    }

    /// Runs one point of interest (by index into the scene's list).
    pub fn run_poi(&self, index: usize, recording: Recording) -> PoiTrace {
        let cfg = &self.config;
        let poi = &self.scene.pois[index];
        let catalogs: Vec<LinkCatalog> = self
            .stations
            .iter()
            .map(|b| LinkCatalog::build(&self.tracer, b.position, poi.ground_truth, &cfg.band, b.tx_power_dbm))
            .collect();

        let truth = poi.ground_truth.xy();
        let mut counts: Vec<MpcCounts> = alloc::vec![MpcCounts::default(); self.stations.len()];
        let mut per_snapshot_errors = Vec::new();
        let mut sum = Vec2::ZERO;
        let mut converged = 0u32;
        let mut unreachable = 0u32;
        let mut unconverged = 0u32;
        let mut tdoa_sums: TdoaSums = BTreeMap::new();
        let mut paths = Vec::new();
        let mut measurements_out = Vec::new();
        let mut last_sets: Vec<Option<Vec<PropagationPath>>> = alloc::vec![None; self.stations.len()];

        for k in 0..cfg.snapshot_count() {
            let snap = cfg.snapshot(k);
            let boxes = self.boxes_at(snap.time_s);

            let mut measurements = Vec::with_capacity(self.stations.len());
            for (i, (bs, cat)) in self.stations.iter().zip(&catalogs).enumerate() {
                if recording.paths {
                    let set = cat.at(&boxes);
                    if last_sets[i].as_ref() != Some(&set) {
                        paths.extend(set.iter().map(|p| PathRecord {
                            bs_id: bs.id,
                            poi_id: poi.id,
                            snapshot_t: snap.time_s,
                            path: p.clone(),
                        }));
                        last_sets[i] = Some(set);
                    }
                }
                let tied = cat.first_at(&boxes);
                let Some(first) = tied.first() else { continue };
                for p in &tied {
                    counts[i].add(p.category);
                }
                measurements.push(measurement_from_path(first, bs, poi, snap, &cfg.sync, &cfg.sched, cfg.run_seed));
            }
            if recording.measurements {
                measurements_out.extend(measurements.iter().cloned());
            }

            if measurements.len() < 3 {
                unreachable += 1;
                continue;
            }
            let reference = if measurements.iter().any(|m| m.bs_id == cfg.reference_bs) {
                cfg.reference_bs
            } else {
                measurements[0].bs_id
            };
            let Ok(tdoa) = compute_tdoa(&measurements, reference, &cfg.sched) else {
                unconverged += 1;
                continue;
            };
            let ids: Vec<u32> = measurements.iter().map(|m| m.bs_id).collect();
            let observed: Vec<f64> = tdoa.iter().map(|d| d.signed_m).collect();
            let (positions, ref_index) = self.layout(&ids, reference);

            match locate::solve(&observed, &positions, ref_index, &cfg.solver) {
                Ok(e) if e.converged => {
                    per_snapshot_errors.push(locate::error_2d(e.position, truth));
                    sum = sum + e.position;
                    converged += 1;
                }
                _ => unconverged += 1,
            }
            if cfg.position_mode == PositionMode::AveragedTdoa {
                let entry = tdoa_sums.entry((ids, reference)).or_insert_with(|| (alloc::vec![0.0; observed.len()], 0));
                for (acc, d) in entry.0.iter_mut().zip(&observed) {
                    *acc += d;
                }
                entry.1 += 1;
            }
        }

        let mean_position = match cfg.position_mode {
            PositionMode::SnapshotAverage => (converged > 0).then(|| sum / converged as f64),
            PositionMode::AveragedTdoa => self.solve_averaged(&tdoa_sums),
        };
        let result = PoiResult {
            poi_id: poi.id,
            ground_truth: truth,
            mean_position,
            mean_error_m: mean_position.map(|p| locate::error_2d(p, truth)),
            per_snapshot_errors,
            first_mpc_counts: self
                .stations
                .iter()
                .zip(counts)
                .map(|(b, counts)| BsMpcCounts { bs_id: b.id, counts })
                .collect(),
            unreachable_snapshots: unreachable,
            unconverged_snapshots: unconverged,
        };
        PoiTrace { result, paths, measurements: measurements_out }
    }

    /// 2D positions of the listed stations (ascending ids) and the reference's index.
    fn layout(&self, ids: &[u32], reference: u32) -> (Vec<Vec2>, usize) {
        let positions =
            ids.iter().map(|id| self.stations.iter().find(|b| b.id == *id).expect("known id").position.xy()).collect();
        let ref_index = ids.iter().position(|id| *id == reference).expect("reference among ids");
        (positions, ref_index)
    }

    /// Solves the averaged range differences of the most frequent station set.
    fn solve_averaged(&self, sums: &TdoaSums) -> Option<Vec2> {
        let mut best: Option<(&StationSet, &(Vec<f64>, u32))> = None;
        for entry in sums {
            if best.is_none_or(|b| entry.1 .1 > b.1 .1) {
                best = Some(entry);
            }
        }
        let ((ids, reference), (acc, n)) = best?;
        let observed: Vec<f64> = acc.iter().map(|s| s / *n as f64).collect();
        let (positions, ref_index) = self.layout(ids, *reference);
        match locate::solve(&observed, &positions, ref_index, &self.config.solver) {
            Ok(e) if e.converged => Some(e.position),
            _ => None,
        }
    }

    /// Runs every point of interest in scene order.
    pub fn run(&self) -> Vec<PoiResult> {
        (0..self.poi_count()).map(|i| self.run_poi(i, Recording::default()).result).collect()
    }
}

/// Validates and runs every point of interest serially.
pub fn run(scene: &Scene, config: &RunConfig) -> Result<Vec<PoiResult>, EmulateError> {
    Ok(Emulator::new(scene, *config)?.run())
}

/// First-arrival counts summed over points of interest and base stations.
pub fn mpc_distribution(results: &[PoiResult]) -> MpcCounts {
    let mut total = MpcCounts::default();
    for r in results {
        total.merge(&r.mpc_totals());
    }
    total
}
