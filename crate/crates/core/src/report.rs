//! Evaluation artefacts: per-PoI error CDF, percentiles, averages and the
//! first-arrival histogram.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::emulate::{mpc_distribution, MpcCounts, PoiResult, RunConfig, Setup};
use crate::raytrace::Band;

pub const REPORTED_PERCENTILES: [f64; 4] = [50.0, 80.0, 90.0, 95.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub band: Band,
    pub center_frequency_hz: f64,
    pub setup: Setup,
    pub run_seed: u64,
    pub duration_s: f64,
    pub snapshot_interval_s: f64,
    pub snapshots: u32,
    pub sync_precision_ns: f64,
    /// SHA-256 of the full run configuration, hex.
    pub config_digest: String,
    /// Points of interest left out of the statistics for lack of an estimate.
    pub pois_without_estimate: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_m: f64,
    pub cumulative_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationReport {
    pub metadata: RunMetadata,
    pub per_poi: Vec<PoiResult>,
    pub cdf: Vec<CdfPoint>,
    pub percentiles: Percentiles,
    pub average_error_m: f64,
    pub mpc_histogram: MpcCounts,
    /// CDF over every converged snapshot of every point of interest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_cdf: Option<Vec<CdfPoint>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no point of interest has a usable position estimate")]
    NoEstimates,
}

/// Linear interpolation between order statistics at rank `p/100 * (n-1)`.
/// `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "percentile of an empty sample");
    let rank = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Empirical CDF: the i-th smallest error gets fraction i/n.
pub fn empirical_cdf(errors: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| CdfPoint {
            error_m: e,
            cumulative_fraction: if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 },
        })
        .collect()
}

pub fn config_digest(config: &RunConfig) -> String {
    let mut text = String::new();
    let _ = write!(text, "{config:?}");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Summarises one run. `with_snapshot_cdf` adds the per-snapshot CDF.
pub fn build_report(
    results: &[PoiResult],
    config: &RunConfig,
    with_snapshot_cdf: bool,
) -> Result<EmulationReport, ReportError> {
    let errors: Vec<f64> = results.iter().filter_map(|r| r.mean_error_m).collect();
    if errors.is_empty() {
        return Err(ReportError::NoEstimates);
    }
    let cdf = empirical_cdf(&errors);
    let sorted: Vec<f64> = cdf.iter().map(|c| c.error_m).collect();
    let [p50, p80, p90, p95] = REPORTED_PERCENTILES.map(|p| percentile(&sorted, p));
    let average_error_m = errors.iter().sum::<f64>() / errors.len() as f64;

    let snapshot_cdf = with_snapshot_cdf.then(|| {
        let all: Vec<f64> = results.iter().flat_map(|r| r.per_snapshot_errors.iter().copied()).collect();
        empirical_cdf(&all)
    });

    let metadata = RunMetadata {
        band: config.band.name,
        center_frequency_hz: config.band.center_frequency_hz,
        setup: config.setup,
        run_seed: config.run_seed,
        duration_s: config.duration_s,
        snapshot_interval_s: config.snapshot_interval_s,
        snapshots: config.snapshot_count(),
        sync_precision_ns: config.sync.precision_ns,
        config_digest: config_digest(config),
        pois_without_estimate: results.iter().filter(|r| r.mean_error_m.is_none()).map(|r| r.poi_id).collect(),
    };
    Ok(EmulationReport {
        metadata,
        per_poi: results.to_vec(),
        cdf,
        percentiles: Percentiles { p50, p80, p90, p95 },
        average_error_m,
        mpc_histogram: mpc_distribution(results),
        snapshot_cdf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::raytrace::BandConfig;
    use alloc::vec;

    fn poi(id: u32, err: Option<f64>) -> PoiResult {
        PoiResult {
            poi_id: id,
            ground_truth: Vec2::ZERO,
            mean_position: err.map(|e| Vec2::new(e, 0.0)),
            mean_error_m: err,
            per_snapshot_errors: err.into_iter().collect(),
            first_mpc_counts: vec![],
            unreachable_snapshots: 0,
            unconverged_snapshots: 0,
        }
    }

    fn cfg() -> RunConfig {
        RunConfig::new(BandConfig::c_band(), Setup::Static, 0)
    }

    #[test]
    fn single_poi() {
        let r = build_report(&[poi(1, Some(0.5))], &cfg(), false).unwrap();
        assert_eq!(r.percentiles, Percentiles { p50: 0.5, p80: 0.5, p90: 0.5, p95: 0.5 });
        assert_eq!(r.average_error_m, 0.5);
        assert_eq!(r.cdf, vec![CdfPoint { error_m: 0.5, cumulative_fraction: 1.0 }]);
    }

    #[test]
    fn median_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0), 2.5);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.0), 1.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 100.0), 4.0);
        assert!((percentile(&[1.0, 2.0, 3.0, 4.0], 90.0) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn cdf_ends_at_one_and_skips_missing() {
        let rs = [poi(1, Some(3.0)), poi(2, None), poi(3, Some(1.0)), poi(4, Some(2.0))];
        let r = build_report(&rs, &cfg(), true).unwrap();
        let e: Vec<f64> = r.cdf.iter().map(|c| c.error_m).collect();
        assert_eq!(e, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.cdf.last().unwrap().cumulative_fraction, 1.0);
        assert!(r.cdf.windows(2).all(|w| w[0].cumulative_fraction < w[1].cumulative_fraction));
        assert_eq!(r.average_error_m, 2.0);
        assert_eq!(r.metadata.pois_without_estimate, vec![2]);
        assert_eq!(r.snapshot_cdf.unwrap().len(), 3);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(build_report(&[], &cfg(), false), Err(ReportError::NoEstimates));
        assert_eq!(build_report(&[poi(1, None)], &cfg(), false), Err(ReportError::NoEstimates));
    }

    #[test]
    fn digest_tracks_config() {
        let a = cfg();
        let mut b = cfg();
        b.run_seed = 1;
        assert_eq!(config_digest(&a), config_digest(&cfg()));
        assert_ne!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }
}
