//! STFT snapshots, band selection and per-bin covariance spectra.

use subaoa::frontend::{sample_covariance, select_band, stft, FrequencyBand, StftConfig};
use subaoa::geometry::{MicArray, DEFAULT_CIRCULAR_RADIUS};
use subaoa::linalg::hermitian_eig;
use subaoa::sim::{synthesize, PathSpec, Scenario, SourceKind};

fn main() -> subaoa::Result<()> {
    let array = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS)?;
    let sc = Scenario {
        paths: vec![PathSpec::new(30.0, 0.002, 1.0), PathSpec::new(200.0, 0.009, 0.6)],
        source: SourceKind::SpeechLike,
        duration: 1.0,
        rate: 16000.0,
        snr_db: Some(20.0),
        seed: 7,
    };
    let rec = synthesize(&sc, &array)?;
    let full = stft(&rec, &StftConfig::default())?;
    let band = select_band(&full, &FrequencyBand::default())?;
    println!(
        "{} frames, {} bins in total, {} in 300-4000 Hz",
        full.frames(),
        full.bin_count(),
        band.bin_count()
    );

    for i in [0, band.bin_count() / 4, band.bin_count() / 2, band.bin_count() - 1] {
        let eig = hermitian_eig(&sample_covariance(band.bin(i))?)?;
        let ev: Vec<String> = eig.eigenvalues.iter().rev().map(|v| format!("{v:.2e}")).collect();
        println!("{:7.1} Hz  eigenvalues {}", band.bins()[i], ev.join(" "));
    }
    Ok(())
}
