//! Recovers path bearings and delays from a chirp recording by channel
//! deconvolution, the way ground truth is measured in a real room.

use subaoa::geometry::{AngleGrid, MicArray, DEFAULT_CIRCULAR_RADIUS};
use subaoa::sim::{chirp_ground_truth, default_chirp, synthesize, PathSpec, Scenario, SourceKind};

fn main() -> subaoa::Result<()> {
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    let sc = Scenario {
        paths: vec![
            PathSpec::new(25.0, 0.004, 1.0),
            PathSpec::new(205.0, 0.0105, 0.6),
            PathSpec::new(300.0, 0.016, 0.45),
        ],
        source: SourceKind::Chirp,
        duration: 0.5,
        rate: 16000.0,
        snr_db: Some(10.0),
        seed: 4,
    };
    let rec = synthesize(&sc, &array)?;
    let grid = AngleGrid::full_circle(1.0)?;
    let found = chirp_ground_truth(&rec, &default_chirp(sc.rate), &array, &grid)?;
    for (truth, est) in sc.paths.iter().zip(&found) {
        println!(
            "truth {:5.1} deg {:6.3} ms | estimate {:6.2} deg {:6.3} ms ({} mics)",
            truth.aoa,
            truth.delay * 1e3,
            est.aoa_deg,
            est.delay_s * 1e3,
            est.mics
        );
    }
    Ok(())
}
