//! Reference estimators: delay-and-sum steered power, steered-response
//! GCC-PHAT over all microphone pairs, and wideband MUSIC.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frontend::SnapshotTensor;
use crate::geometry::{AngleGrid, MicArray};
use crate::spectrum::{Algorithm, Spectrum};
use crate::subaoa::{bin_likelihoods, check_tensor, steering_per_bin, DEFAULT_LIKELIHOOD_FLOOR};

pub use crate::spectrum::{peak_pick, PeakSet, DEFAULT_MIN_SEPARATION};

/// Cross-spectra below this magnitude are dropped by the PHAT weighting.
const PHAT_GUARD: f64 = 1e-15;

/// Steered power `Σ_f Σ_t |a_{f,θ}ᴴ x_{f,t}|²`.
pub fn delay_and_sum(tensor: &SnapshotTensor, array: &MicArray, grid: &Arc<AngleGrid>) -> Result<Spectrum> {
    check_tensor(tensor, array)?;
    let steering = steering_per_bin(tensor, array, grid)?;
    let mut scores = vec![0.0; grid.len()];
    for (x, a) in tensor.data().iter().zip(&steering) {
        let gram = x * x.adjoint();
        let ra = &gram * a.columns();
        for (g, acc) in scores.iter_mut().enumerate() {
            *acc += a.columns().column(g).dotc(&ra.column(g)).re;
        }
    }
    Spectrum::new(Arc::clone(grid), scores, Algorithm::DelayAndSum)
}

/// Steered-response PHAT:
/// `Σ_{i<j} Σ_f Re[ Σ_t (X_i X_j*)/|X_i X_j*| · e^{jω(δ_i(θ) − δ_j(θ))} ]`.
pub fn gcc_phat(tensor: &SnapshotTensor, array: &MicArray, grid: &Arc<AngleGrid>) -> Result<Spectrum> {
    check_tensor(tensor, array)?;
    let m = array.len();
    let steering = steering_per_bin(tensor, array, grid)?;
    let mut scores = vec![0.0; grid.len()];
    for (x, a) in tensor.data().iter().zip(&steering) {
        // conj(a_i) a_j = e^{jω(δ_i − δ_j)} / M
        let cols = a.columns();
        for i in 0..m {
            for j in i + 1..m {
                let mut cross = Complex64::new(0.0, 0.0);
                for t in 0..x.ncols() {
                    let c = x[(i, t)] * x[(j, t)].conj();
                    let mag = c.norm();
                    if mag >= PHAT_GUARD {
                        cross += c / mag;
                    }
                }
                if cross.norm() == 0.0 {
                    continue;
                }
                for (g, acc) in scores.iter_mut().enumerate() {
                    let steer = cols[(i, g)].conj() * cols[(j, g)] * m as f64;
                    *acc += (cross * steer).re;
                }
            }
        }
    }
    Spectrum::new(Arc::clone(grid), scores, Algorithm::GccPhat)
}

/// Wideband MUSIC with the fused negative-log score
/// `Σ_f −log max(ε, ‖N_fᴴ a_{f,θ}‖²)`, noise space of size `M − signal_dim`.
pub fn music(
    tensor: &SnapshotTensor,
    array: &MicArray,
    grid: &Arc<AngleGrid>,
    signal_dim: usize,
) -> Result<Spectrum> {
    music_with_floor(tensor, array, grid, signal_dim, DEFAULT_LIKELIHOOD_FLOOR)
}

pub fn music_with_floor(
    tensor: &SnapshotTensor,
    array: &MicArray,
    grid: &Arc<AngleGrid>,
    signal_dim: usize,
    floor: f64,
) -> Result<Spectrum> {
    check_tensor(tensor, array)?;
    if signal_dim == 0 || signal_dim >= array.len() {
        return Err(Error::Config(format!(
            "MUSIC signal dimension must lie in 1..{}, got {signal_dim}",
            array.len()
        )));
    }
    let steering = steering_per_bin(tensor, array, grid)?;
    let mut scores = vec![0.0; grid.len()];
    for (x, a) in tensor.data().iter().zip(&steering) {
        let lik = bin_likelihoods(x, a, signal_dim, floor)?;
        for (acc, l) in scores.iter_mut().zip(lik) {
            *acc += l;
        }
    }
    Spectrum::new(Arc::clone(grid), scores, Algorithm::Music)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{select_band, stft, FrequencyBand, StftConfig};
    use crate::geometry::DEFAULT_CIRCULAR_RADIUS;
    use crate::linalg::CMatrix;
    use crate::sim::{synthesize, PathSpec, Scenario, SourceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn banded(sc: &Scenario, array: &MicArray) -> SnapshotTensor {
        let rec = synthesize(sc, array).unwrap();
        let t = stft(&rec, &StftConfig::default()).unwrap();
        select_band(&t, &FrequencyBand::default()).unwrap()
    }

    fn single(theta: f64, snr_db: Option<f64>, seed: u64) -> Scenario {
        Scenario {
            paths: vec![PathSpec::new(theta, 0.001, 1.0)],
            source: SourceKind::White,
            duration: 1.0,
            rate: 16000.0,
            snr_db,
            seed,
        }
    }

    #[test]
    fn single_path_peaks() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        let t = banded(&single(222.0, None, 1), &arr);
        assert_eq!(delay_and_sum(&t, &arr, &grid).unwrap().peak_angle(), 222.0);
        assert_eq!(gcc_phat(&t, &arr, &grid).unwrap().peak_angle(), 222.0);
        let m = music(&t, &arr, &grid, 1).unwrap();
        assert_eq!(m.peak_angle(), 222.0);
        let peak = m.score_at(222.0);
        let elsewhere = m
            .grid
            .angles()
            .iter()
            .zip(&m.scores)
            .filter(|(a, _)| crate::spectrum::angular_distance(**a, 222.0) > 10.0)
            .map(|(_, s)| *s)
            .fold(f64::MIN, f64::max);
        assert!(peak >= elsewhere + 3.0);
    }

    #[test]
    fn broadside_pair() {
        let arr = MicArray::uniform_linear(2, 0.1).unwrap();
        let grid = Arc::new(AngleGrid::for_array(&arr, 1.0).unwrap());
        let t = banded(&single(90.0, None, 2), &arr);
        assert_eq!(gcc_phat(&t, &arr, &grid).unwrap().peak_angle(), 90.0);
    }

    #[test]
    fn pair_at_sixty_degrees_with_noise() {
        let arr = MicArray::uniform_linear(2, 0.1).unwrap();
        let grid = Arc::new(AngleGrid::for_array(&arr, 1.0).unwrap());
        let t = banded(&single(60.0, Some(10.0), 3), &arr);
        let est = gcc_phat(&t, &arr, &grid).unwrap().peak_angle();
        assert!((est - 60.0).abs() <= 1.0, "{est}");
    }

    #[test]
    fn zero_tensor_gives_zero_spectra() {
        let arr = MicArray::circular(4, 0.05).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(5.0).unwrap());
        let t = SnapshotTensor::from_parts(
            vec![500.0, 1000.0],
            vec![CMatrix::zeros(4, 5), CMatrix::zeros(4, 5)],
            16000.0,
            StftConfig::default(),
        )
        .unwrap();
        assert!(delay_and_sum(&t, &arr, &grid).unwrap().scores.iter().all(|&s| s == 0.0));
        assert!(gcc_phat(&t, &arr, &grid).unwrap().scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn isotropic_noise_gives_flat_steered_power() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bins: Vec<f64> = (20..120).map(|k| k as f64 * 15.625).collect();
        let data = bins
            .iter()
            .map(|_| {
                CMatrix::from_fn(6, 400, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
            })
            .collect();
        let t = SnapshotTensor::from_parts(bins, data, 16000.0, StftConfig::default()).unwrap();
        let s = delay_and_sum(&t, &arr, &grid).unwrap();
        let mean = s.scores.iter().sum::<f64>() / s.len() as f64;
        assert!(s.scores.iter().all(|&v| (v - mean).abs() <= 0.1 * mean));
    }

    #[test]
    fn two_uncorrelated_sources() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        let a = synthesize(&single(40.0, None, 10), &arr).unwrap();
        let b = synthesize(&single(120.0, None, 11), &arr).unwrap();
        let t = stft(&a.mix(&b).unwrap(), &StftConfig::default()).unwrap();
        let t = select_band(&t, &FrequencyBand::default()).unwrap();
        let s = music(&t, &arr, &grid, 2).unwrap();
        let mut peaks = peak_pick(&s, 2, DEFAULT_MIN_SEPARATION).angles;
        peaks.sort_by(f64::total_cmp);
        assert_eq!(peaks, vec![40.0, 120.0]);
        assert!(music(&t, &arr, &grid, 6).is_err());
        assert!(music(&t, &arr, &grid, 0).is_err());
    }

    #[test]
    fn phat_ignores_per_bin_channel_gains() {
        let arr = MicArray::circular(4, 0.05).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bins: Vec<f64> = (1..30).map(|k| k as f64 * 100.0).collect();
        let data: Vec<CMatrix> = bins
            .iter()
            .map(|_| {
                CMatrix::from_fn(4, 8, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
            })
            .collect();
        let t = SnapshotTensor::from_parts(bins.clone(), data.clone(), 16000.0, StftConfig::default()).unwrap();
        let mut scaled = data;
        for m in scaled.iter_mut() {
            let g: f64 = rng.gen_range(0.1..10.0);
            m.row_mut(2).scale_mut(g);
        }
        let u = SnapshotTensor::from_parts(bins, scaled, 16000.0, StftConfig::default()).unwrap();
        let s1 = gcc_phat(&t, &arr, &grid).unwrap();
        let s2 = gcc_phat(&u, &arr, &grid).unwrap();
        for (a, b) in s1.scores.iter().zip(&s2.scores) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn global_scaling_keeps_argmax() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        let t = banded(&single(300.0, Some(5.0), 12), &arr);
        let u = t.scaled(Complex64::new(0.0, 250.0));
        for f in [delay_and_sum, gcc_phat] {
            assert_eq!(f(&t, &arr, &grid).unwrap().argmax(), f(&u, &arr, &grid).unwrap().argmax());
        }
        assert_eq!(
            music(&t, &arr, &grid, 1).unwrap().argmax(),
            music(&u, &arr, &grid, 1).unwrap().argmax()
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let arr = MicArray::circular(6, 0.05).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        let t = SnapshotTensor::from_parts(vec![1000.0], vec![CMatrix::zeros(4, 3)], 16000.0, StftConfig::default()).unwrap();
        assert!(matches!(delay_and_sum(&t, &arr, &grid), Err(Error::DimensionMismatch { .. })));
    }
}
