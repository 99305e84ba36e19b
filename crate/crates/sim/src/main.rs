use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use otdoa_core::emulate::{Recording, RunConfig, Setup};
use otdoa_core::hall::generate_synthetic_hall;
use otdoa_core::raytrace::{Band, BandConfig};
use otdoa_core::report::build_report;
use otdoa_sim::output::{self, Dumps};
use otdoa_sim::{runner, scenario};

#[derive(Parser)]
#[command(name = "otdoa-sim", version, about = "Indoor ray-tracing OTDoA positioning emulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    Cband,
    Mmwave,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetupArg {
    Static,
    Dynamic,
}

#[derive(Subcommand)]
enum Command {
    /// Run one band/setup emulation and write its report files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        band: BandArg,
        #[arg(long, value_enum)]
        setup: SetupArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        duration_s: f64,
        #[arg(long, default_value_t = 0.1)]
        interval_s: f64,
        /// Base-station synchronisation precision; 0 disables jitter.
        #[arg(long, default_value_t = 10.0)]
        sync_ns: f64,
        #[arg(long)]
        dump_paths: bool,
        #[arg(long)]
        dump_measurements: bool,
        /// Also store the per-snapshot error CDF in summary.json.
        #[arg(long)]
        snapshot_cdf: bool,
        /// Run points of interest one after another instead of in parallel.
        #[arg(long)]
        serial: bool,
    },
    /// Write the synthetic production hall as a scenario file.
    GenHall {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a side-by-side error summary of two run directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            band,
            setup,
            seed,
            out,
            duration_s,
            interval_s,
            sync_ns,
            dump_paths,
            dump_measurements,
            snapshot_cdf,
            serial,
        } => {
            let scene = scenario::load_scene(&scenario)?;
            let band = BandConfig::for_band(match band {
                BandArg::Cband => Band::CBand,
                BandArg::Mmwave => Band::MmWave,
            });
            let setup = match setup {
                SetupArg::Static => Setup::Static,
                SetupArg::Dynamic => Setup::Dynamic,
            };
            let mut config = RunConfig::new(band, setup, seed);
            config.duration_s = duration_s;
            config.snapshot_interval_s = interval_s;
            config.sync.precision_ns = sync_ns;
            let recording = Recording { paths: dump_paths, measurements: dump_measurements };
            let run = runner::run(&scene, &config, recording, serial)?;
            let report = build_report(&run.results, &config, snapshot_cdf)?;
            let dumps = Dumps {
                paths: dump_paths.then_some(run.paths.as_slice()),
                measurements: dump_measurements.then_some(run.measurements.as_slice()),
            };
            output::write_outputs(&report, &out, dumps)?;
            println!(
                "{} {}: average {:.3} m, P90 {:.3} m over {} PoIs -> {}",
                band.name.label(),
                setup.label(),
                report.average_error_m,
                report.percentiles.p90,
                report.cdf.len(),
                out.display()
            );
            if !report.metadata.pois_without_estimate.is_empty() {
                eprintln!("warning: no estimate for PoIs {:?}", report.metadata.pois_without_estimate);
            }
        }
        Command::GenHall { seed, out } => {
            let scene = generate_synthetic_hall(seed);
            scenario::save_scene(&scene, &out)?;
            println!("synthetic hall (seed {seed}) -> {}", out.display());
        }
        Command::Compare { a, b } => {
            let ra = output::read_summary(&a).with_context(|| format!("reading run {}", a.display()))?;
            let rb = output::read_summary(&b).with_context(|| format!("reading run {}", b.display()))?;
            print!("{}", output::comparison_table(&ra, &rb));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
