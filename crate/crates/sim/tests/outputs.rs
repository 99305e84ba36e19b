use std::fs;
use std::path::Path;

use otdoa_core::emulate::{Recording, RunConfig, Setup};
use otdoa_core::hall::generate_synthetic_hall;
use otdoa_core::raytrace::BandConfig;
use otdoa_core::report::build_report;
use otdoa_sim::output::{self, Dumps};
use otdoa_sim::runner;

fn short_config(band: BandConfig, setup: Setup) -> RunConfig {
    let mut c = RunConfig::new(band, setup, 11);
    c.duration_s = 3.0;
    c
}

fn write_run(dir: &Path, band: BandConfig, setup: Setup, serial: bool) {
    let scene = generate_synthetic_hall(0);
    let cfg = short_config(band, setup);
    let rec = Recording { paths: true, measurements: true };
    let run = runner::run(&scene, &cfg, rec, serial).unwrap();
    let report = build_report(&run.results, &cfg, false).unwrap();
    let dumps = Dumps { paths: Some(&run.paths), measurements: Some(&run.measurements) };
    output::write_outputs(&report, dir, dumps).unwrap();
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

/// Sort-and-interpolate at rank p/100 * (n - 1).
fn oracle_percentile(mut xs: Vec<f64>, p: f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (xs.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    xs[lo] + (rank - lo as f64) * (xs[hi] - xs[lo])
}

#[test]
fn summary_round_trips_and_matches_csvs() {
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), BandConfig::c_band(), Setup::Dynamic, false);

    let report = output::read_summary(dir.path()).unwrap();
    let again = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", again);

    let (header, rows) = read_csv(&dir.path().join("errors.csv"));
    assert_eq!(header, ["poi_id", "x_true", "y_true", "x_est", "y_est", "mean_error_m", "unreachable_snapshots"]);
    assert_eq!(rows.len(), 23);
    let errors: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    let p = report.percentiles;
    for (got, q) in [(p.p50, 50.0), (p.p80, 80.0), (p.p90, 90.0), (p.p95, 95.0)] {
        assert!((got - oracle_percentile(errors.clone(), q)).abs() < 1e-12, "P{q}");
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!((report.average_error_m - mean).abs() < 1e-12);

    let (header, rows) = read_csv(&dir.path().join("cdf.csv"));
    assert_eq!(header, ["error_m", "cumulative_fraction"]);
    let cdf: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
    assert!(cdf[0].1 > 0.0);
    assert_eq!(cdf.last().unwrap().1, 1.0);

    let (header, rows) = read_csv(&dir.path().join("mpc.csv"));
    assert_eq!(header, ["category", "count"]);
    let cats: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(cats, ["LoS", "Penetration", "Diffraction", "Reflection", "SecondOrder"]);
    let total: u64 = rows.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert!(total >= 30 * 92);

    let (header, rows) = read_csv(&dir.path().join("paths.csv"));
    assert_eq!(header.len(), 9);
    assert!(rows.iter().all(|r| r[8].split(';').filter(|s| !s.is_empty()).count() == r[4].parse::<usize>().unwrap()));
    let (header, rows) = read_csv(&dir.path().join("measurements.csv"));
    assert_eq!(header, ["bs_id", "poi_id", "snapshot_t", "toa_ns", "excess_length_m", "category"]);
    assert_eq!(rows.len(), 30 * 92);
}

#[test]
fn reruns_and_parallelism_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    write_run(a.path(), BandConfig::mm_wave(), Setup::Dynamic, false);
    write_run(b.path(), BandConfig::mm_wave(), Setup::Dynamic, false);
    write_run(c.path(), BandConfig::mm_wave(), Setup::Dynamic, true);
    for f in ["summary.json", "errors.csv", "cdf.csv", "mpc.csv", "paths.csv", "measurements.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} rerun");
        assert_eq!(x, fs::read(c.path().join(f)).unwrap(), "{f} serial");
    }
}

#[test]
fn band_pair_has_identical_schemas() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_run(a.path(), BandConfig::c_band(), Setup::Static, false);
    write_run(b.path(), BandConfig::mm_wave(), Setup::Static, false);
    for f in ["errors.csv", "cdf.csv", "mpc.csv", "paths.csv", "measurements.csv"] {
        assert_eq!(read_csv(&a.path().join(f)).0, read_csv(&b.path().join(f)).0, "{f}");
    }
    let keys = |d: &Path| {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
        v.as_object().unwrap().keys().cloned().collect::<Vec<_>>()
    };
    assert_eq!(keys(a.path()), keys(b.path()));
    let table =
        output::comparison_table(&output::read_summary(a.path()).unwrap(), &output::read_summary(b.path()).unwrap());
    assert!(table.contains("cband/static") && table.contains("mmwave/static"));
    assert!(table.contains("90th percentile [m]"));
}

#[test]
fn static_path_dump_holds_each_link_once() {
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), BandConfig::c_band(), Setup::Static, false);
    let (_, rows) = read_csv(&dir.path().join("paths.csv"));
    assert!(rows.iter().all(|r| r[2] == "0"));
    let mut links: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    links.dedup();
    assert_eq!(links.len(), 92);
}

#[test]
fn unwritable_output_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let scene = generate_synthetic_hall(0);
    let cfg = short_config(BandConfig::c_band(), Setup::Static);
    let run = runner::run(&scene, &cfg, Recording::default(), false).unwrap();
    let report = build_report(&run.results, &cfg, false).unwrap();
    let err = output::write_outputs(&report, &blocker.join("out"), Dumps::default()).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
