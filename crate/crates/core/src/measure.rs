//! OTDoA observables: scheduled and jittered arrival times, and range
//! differences against a reference base station.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::raytrace::{first_arriving, BandConfig, Category, PropagationPath, Tracer, SPEED_OF_LIGHT};
use crate::scene::{BaseStation, PointOfInterest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JitterDistribution {
    /// Uniform over `[-precision/2, +precision/2]`.
    Uniform,
    /// Zero-mean normal with standard deviation `precision/2`.
    Gaussian,
}

/// Synchronisation error between base stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncModel {
    pub precision_ns: f64,
    pub distribution: JitterDistribution,
}

impl Default for SyncModel {
    fn default() -> Self {
        Self { precision_ns: 10.0, distribution: JitterDistribution::Uniform }
    }
}

/// Identifies one jitter draw; draws depend only on this key, never on
/// evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JitterKey {
    pub run_seed: u64,
    pub bs_id: u32,
    pub poi_id: u32,
    pub snapshot: u32,
}

impl JitterKey {
    fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"otdoa-jitter");
        h.update(self.run_seed.to_le_bytes());
        h.update(self.bs_id.to_le_bytes());
        h.update(self.poi_id.to_le_bytes());
        h.update(self.snapshot.to_le_bytes());
        let seed: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(seed)
    }
}

impl SyncModel {
    pub const OFF: SyncModel = SyncModel { precision_ns: 0.0, distribution: JitterDistribution::Uniform };

    /// Clock offset in seconds for one (base station, snapshot) pair.
    pub fn draw_s(&self, key: JitterKey) -> f64 {
        if !(self.precision_ns > 0.0) {
            return 0.0;
        }
        let half = 0.5 * self.precision_ns * 1e-9;
        let mut rng = key.rng();
        match self.distribution {
            JitterDistribution::Uniform => {
                Uniform::new_inclusive(-half, half).expect("finite non-empty range").sample(&mut rng)
            }
            JitterDistribution::Gaussian => Normal::new(0.0, half).expect("positive sigma").sample(&mut rng),
        }
    }
}

/// Sequential transmission slots, one every `delta_ms`, in ascending id order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSchedule {
    pub delta_ms: f64,
}

impl Default for TransmissionSchedule {
    fn default() -> Self {
        Self { delta_ms: 10.0 }
    }
}

impl TransmissionSchedule {
    /// Transmission start of base station `bs_id` (ids start at 1).
    pub fn offset_s(&self, bs_id: u32) -> f64 {
        f64::from(bs_id.saturating_sub(1)) * self.delta_ms * 1e-3
    }

    /// Slot gap `delta_ke` between base stations `k` and `e`.
    pub fn gap_s(&self, k: u32, e: u32) -> f64 {
        self.offset_s(k) - self.offset_s(e)
    }
}

/// Snapshot index and time within a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: u32,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToAMeasurement {
    pub bs_id: u32,
    pub poi_id: u32,
    pub snapshot_t: f64,
    /// Geometric first arrival + schedule offset + jitter, seconds.
    pub toa: f64,
    pub first_mpc_category: Category,
    /// First-arrival length minus the straight 3D distance, metres.
    pub excess_length_m: f64,
    pub schedule_offset_s: f64,
    pub jitter_s: f64,
}

impl ToAMeasurement {
    /// Arrival time with the schedule offset and jitter removed.
    pub fn geometric_toa(&self) -> f64 {
        (self.toa - self.schedule_offset_s) - self.jitter_s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("unreachable BS {bs} from PoI {poi} at t = {t} s")]
    UnreachableBs { bs: u32, poi: u32, t: f64 },
    #[error("no measurement from reference BS {0}")]
    MissingReference(u32),
    #[error("K < 3: need at least three base stations, have {0}")]
    TooFewBaseStations(usize),
}

/// Turns a first-arriving path into a scheduled, jittered measurement.
pub fn measurement_from_path(
    path: &PropagationPath,
    bs: &BaseStation,
    poi: &PointOfInterest,
    snapshot: Snapshot,
    sync: &SyncModel,
    sched: &TransmissionSchedule,
    run_seed: u64,
) -> ToAMeasurement {
    let offset = sched.offset_s(bs.id);
    let jitter = sync.draw_s(JitterKey { run_seed, bs_id: bs.id, poi_id: poi.id, snapshot: snapshot.index });
    let straight = bs.position.distance(poi.ground_truth);
    ToAMeasurement {
        bs_id: bs.id,
        poi_id: poi.id,
        snapshot_t: snapshot.time_s,
        toa: path.total_length / SPEED_OF_LIGHT + offset + jitter,
        first_mpc_category: path.category,
        excess_length_m: (path.total_length - straight).max(0.0),
        schedule_offset_s: offset,
        jitter_s: jitter,
    }
}

/// Traces the link, picks the first arrival and forms its measurement.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_toa(
    tracer: &Tracer,
    band: &BandConfig,
    bs: &BaseStation,
    poi: &PointOfInterest,
    snapshot: Snapshot,
    sync: &SyncModel,
    sched: &TransmissionSchedule,
    run_seed: u64,
) -> Result<ToAMeasurement, MeasureError> {
    let paths = tracer.trace_all(bs.position, poi.ground_truth, snapshot.time_s, band, bs.tx_power_dbm);
    let first = first_arriving(&paths).map_err(|_| MeasureError::UnreachableBs {
        bs: bs.id,
        poi: poi.id,
        t: snapshot.time_s,
    })?;
    Ok(measurement_from_path(&first.path, bs, poi, snapshot, sync, sched, run_seed))
}

/// Range difference of one base station against the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeDifference {
    pub bs_id: u32,
    pub reference_id: u32,
    /// `c ((tau_k - tau_e) - delta_ke)`, metres.
    pub signed_m: f64,
    /// Magnitude, as conventionally reported.
    pub abs_m: f64,
}

/// Range differences for every non-reference base station, in ascending id order.
pub fn compute_tdoa(
    measurements: &[ToAMeasurement],
    reference_bs: u32,
    sched: &TransmissionSchedule,
) -> Result<Vec<RangeDifference>, MeasureError> {
    if measurements.len() < 3 {
        return Err(MeasureError::TooFewBaseStations(measurements.len()));
    }
    let reference =
        measurements.iter().find(|m| m.bs_id == reference_bs).ok_or(MeasureError::MissingReference(reference_bs))?;
    // Removing each slot offset first keeps the subtraction exact; the
    // result equals (tau_k - tau_e) - delta_ke.
    let unscheduled = |m: &ToAMeasurement| m.toa - sched.offset_s(m.bs_id);
    let tau_e = unscheduled(reference);
    let mut out: Vec<RangeDifference> = measurements
        .iter()
        .filter(|m| m.bs_id != reference_bs)
        .map(|m| {
            let signed = SPEED_OF_LIGHT * (unscheduled(m) - tau_e);
            RangeDifference { bs_id: m.bs_id, reference_id: reference_bs, signed_m: signed, abs_m: signed.abs() }
        })
        .collect();
    out.sort_by_key(|d| d.bs_id);
    Ok(out)
}
