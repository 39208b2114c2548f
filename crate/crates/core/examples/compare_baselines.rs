//! Image-source room with first-order reflections; every estimator reports
//! its top bearings, scored against the geometric truth.

use subaoa::frontend::StftConfig;
use subaoa::geometry::{MicArray, DEFAULT_CIRCULAR_RADIUS};
use subaoa::harness::{match_and_score, Pipeline};
use subaoa::sim::{image_source_paths, synthesize, Room, Scenario, SourceKind};
use subaoa::subaoa::SubAoaConfig;
use subaoa::Algorithm;

fn main() -> subaoa::Result<()> {
    let room = Room {
        width: 5.0,
        height: 5.0,
        source_pos: [2.0, 2.0],
        array_pos: [1.0, 2.0],
        reflection_coeff: 0.7,
        max_order: 1,
    };
    let mut paths = image_source_paths(&room)?;
    paths.truncate(3);
    for p in &paths {
        println!("path {:6.1} deg  {:6.2} ms  gain {:.3}", p.aoa, p.delay * 1e3, p.gain);
    }
    let sc = Scenario {
        paths,
        source: SourceKind::White,
        duration: 1.0,
        rate: 16000.0,
        snr_db: Some(15.0),
        seed: 3,
    };
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    let pipeline = Pipeline::new(array, StftConfig::default(), SubAoaConfig::default(), 10.0)?;
    let tensor = pipeline.tensor(&synthesize(&sc, &pipeline.array)?)?;
    for alg in Algorithm::ALL {
        let est = pipeline.estimate(&tensor, alg, 3)?;
        let errs: Vec<String> = match_and_score(&sc.truth_angles(), &est.angles)
            .iter()
            .map(|m| format!("{:.0}", m.error))
            .collect();
        println!("{:<7} {:?}  errors [{}] deg", alg.name(), est.angles, errs.join(", "));
    }
    Ok(())
}
