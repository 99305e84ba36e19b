//! Run artefacts on disk: `summary.json`, `errors.csv`, `cdf.csv`, `mpc.csv`,
//! and optionally `paths.csv` / `measurements.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use otdoa_core::emulate::PathRecord;
use otdoa_core::measure::ToAMeasurement;
use otdoa_core::raytrace::InteractionKind;
use otdoa_core::report::EmulationReport;
use thiserror::Error;

pub const SUMMARY_FILE: &str = "summary.json";
pub const ERRORS_FILE: &str = "errors.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const MPC_FILE: &str = "mpc.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Shortest text that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn kind_label(k: InteractionKind) -> &'static str {
    match k {
        InteractionKind::Reflection => "Reflection",
        InteractionKind::Diffraction => "Diffraction",
        InteractionKind::Penetration => "Penetration",
    }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Optional per-snapshot detail to write next to the report.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dumps<'a> {
    pub paths: Option<&'a [PathRecord]>,
    pub measurements: Option<&'a [ToAMeasurement]>,
}

pub fn write_outputs(report: &EmulationReport, out_dir: &Path, dumps: Dumps<'_>) -> Result<(), OutputError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let summary = out_dir.join(SUMMARY_FILE);
    let mut json =
        serde_json::to_string_pretty(report).map_err(|source| OutputError::Json { path: summary.clone(), source })?;
    json.push('\n');
    fs::write(&summary, json).map_err(io_err(&summary))?;

    write_csv(
        &out_dir.join(ERRORS_FILE),
        &["poi_id", "x_true", "y_true", "x_est", "y_est", "mean_error_m", "unreachable_snapshots"],
        report.per_poi.iter().map(|r| {
            vec![
                r.poi_id.to_string(),
                num(r.ground_truth.x),
                num(r.ground_truth.y),
                opt(r.mean_position.map(|p| p.x)),
                opt(r.mean_position.map(|p| p.y)),
                opt(r.mean_error_m),
                r.unreachable_snapshots.to_string(),
            ]
        }),
    )?;

    write_csv(
        &out_dir.join(CDF_FILE),
        &["error_m", "cumulative_fraction"],
        report.cdf.iter().map(|c| vec![num(c.error_m), num(c.cumulative_fraction)]),
    )?;

    write_csv(
        &out_dir.join(MPC_FILE),
        &["category", "count"],
        report.mpc_histogram.entries().iter().map(|(c, n)| vec![c.label().to_string(), n.to_string()]),
    )?;

    if let Some(paths) = dumps.paths {
        write_csv(
            &out_dir.join(PATHS_FILE),
            &[
                "bs_id",
                "poi_id",
                "snapshot_t",
                "category",
                "n_interactions",
                "total_length_m",
                "toa_ns",
                "rx_power_dbm",
                "interaction_kinds",
            ],
            paths.iter().map(|r| {
                let p = &r.path;
                vec![
                    r.bs_id.to_string(),
                    r.poi_id.to_string(),
                    num(r.snapshot_t),
                    p.category.label().to_string(),
                    p.interactions.len().to_string(),
                    num(p.total_length),
                    num(p.toa * 1e9),
                    num(p.rx_power_dbm),
                    p.interactions.iter().map(|i| kind_label(i.kind)).collect::<Vec<_>>().join(";"),
                ]
            }),
        )?;
    }

    if let Some(ms) = dumps.measurements {
        write_csv(
            &out_dir.join(MEASUREMENTS_FILE),
            &["bs_id", "poi_id", "snapshot_t", "toa_ns", "excess_length_m", "category"],
            ms.iter().map(|m| {
                vec![
                    m.bs_id.to_string(),
                    m.poi_id.to_string(),
                    num(m.snapshot_t),
                    num(m.toa * 1e9),
                    num(m.excess_length_m),
                    m.first_mpc_category.label().to_string(),
                ]
            }),
        )?;
    }
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<EmulationReport, OutputError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json { path, source })
}

/// Table of average and percentile errors for two runs side by side.
pub fn comparison_table(a: &EmulationReport, b: &EmulationReport) -> String {
    let title = |r: &EmulationReport| format!("{}/{}", r.metadata.band.label(), r.metadata.setup.label());
    type Column = (&'static str, fn(&EmulationReport) -> f64);
    let rows: [Column; 5] = [
        ("Average positioning error [m]", |r| r.average_error_m),
        ("50th percentile [m]", |r| r.percentiles.p50),
        ("80th percentile [m]", |r| r.percentiles.p80),
        ("90th percentile [m]", |r| r.percentiles.p90),
        ("95th percentile [m]", |r| r.percentiles.p95),
    ];
    let mut out = format!("{:<32}{:>18}{:>18}\n", "", title(a), title(b));
    for (name, f) in rows {
        out.push_str(&format!("{:<32}{:>18.3}{:>18.3}\n", name, f(a), f(b)));
    }
    let share = |r: &EmulationReport| {
        let h = r.mpc_histogram;
        100.0 * (h.los + h.diffraction) as f64 / h.total().max(1) as f64
    };
    out.push_str(&format!("{:<32}{:>17.1}%{:>17.1}%\n", "LoS + Diffraction first MPCs", share(a), share(b)));
    out
}
