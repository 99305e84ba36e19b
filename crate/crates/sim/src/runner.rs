use otdoa_core::emulate::{EmulateError, Emulator, PathRecord, PoiResult, PoiTrace, Recording, RunConfig};
use otdoa_core::measure::ToAMeasurement;
use otdoa_core::scene::Scene;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub results: Vec<PoiResult>,
    pub paths: Vec<PathRecord>,
    pub measurements: Vec<ToAMeasurement>,
}

/// Runs every point of interest, in parallel unless `serial`. Output order is
/// scene order either way, so both modes produce identical results.
pub fn run(scene: &Scene, config: &RunConfig, recording: Recording, serial: bool) -> Result<RunOutput, EmulateError> {
    let emu = Emulator::new(scene, *config)?;
    let traces: Vec<PoiTrace> = if serial {
        (0..emu.poi_count()).map(|i| emu.run_poi(i, recording)).collect()
    } else {
        (0..emu.poi_count()).into_par_iter().map(|i| emu.run_poi(i, recording)).collect()
    };
    let mut out = RunOutput { results: Vec::with_capacity(traces.len()), paths: Vec::new(), measurements: Vec::new() };
    for t in traces {
        out.results.push(t.result);
        out.paths.extend(t.paths);
        out.measurements.extend(t.measurements);
    }
    Ok(out)
}
