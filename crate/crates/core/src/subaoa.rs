//! Iterative AoA-subspace cancellation.
//!
//! Each iteration estimates the noise subspace of the current residual in
//! every frequency bin, scores each candidate angle by
//! `-log ‖Nᴴ a_θ‖²` summed over bins, and takes the best angle as the next
//! path. The residual snapshots and the steering matrices are then both
//! mapped onto the orthogonal complement of the detected steering vector,
//! bin by bin, so the detected direction can no longer contribute and the
//! ambient dimension drops by one.
//!
//! With one iteration this is exactly the fused MUSIC spectrum of
//! [`crate::baselines::music`]; both share [`bin_likelihoods`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{sample_covariance, select_band, FrequencyBand, SnapshotTensor};
use crate::geometry::{AngleGrid, MicArray, SteeringMatrix};
use crate::linalg::{hermitian_eig, noise_subspace, null_space_of_vector, CMatrix, NoiseSubspace};
use crate::spectrum::{Algorithm, Spectrum};

pub const DEFAULT_LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Attenuation reported where the projection removes a direction entirely.
pub const ATTENUATION_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubAoaConfig {
    /// Number of paths `K` to extract.
    pub max_paths: usize,
    /// Grid step in degrees; the grid spans the array's sector.
    pub resolution_deg: f64,
    /// Bins kept before estimation; `None` uses the tensor as given.
    pub band: Option<FrequencyBand>,
    /// Signal-subspace size at iteration 0; defaults to `max_paths`.
    pub signal_dim_per_bin: Option<usize>,
    pub likelihood_floor: f64,
    pub auto_stop: bool,
    pub stop_ratio: f64,
}

impl Default for SubAoaConfig {
    fn default() -> Self {
        SubAoaConfig {
            max_paths: 4,
            resolution_deg: 1.0,
            band: Some(FrequencyBand::default()),
            signal_dim_per_bin: None,
            likelihood_floor: DEFAULT_LIKELIHOOD_FLOOR,
            auto_stop: false,
            stop_ratio: 0.2,
        }
    }
}

impl SubAoaConfig {
    pub fn with_paths(max_paths: usize) -> Self {
        SubAoaConfig {
            max_paths,
            ..Self::default()
        }
    }

    pub fn signal_dim(&self) -> usize {
        self.signal_dim_per_bin.unwrap_or(self.max_paths)
    }

    pub fn validate(&self, mics: usize) -> Result<()> {
        if self.max_paths == 0 {
            return Err(Error::Config("max_paths must be at least 1".into()));
        }
        if self.max_paths >= mics {
            return Err(Error::Config(format!(
                "max_paths {} needs at least {} microphones, array has {mics}",
                self.max_paths,
                self.max_paths + 1
            )));
        }
        if !(self.likelihood_floor > 0.0 && self.likelihood_floor.is_finite()) {
            return Err(Error::Config("likelihood_floor must be positive".into()));
        }
        if !(self.stop_ratio > 0.0 && self.stop_ratio < 1.0) {
            return Err(Error::Config("stop_ratio must lie in (0, 1)".into()));
        }
        if !(self.resolution_deg > 0.0 && self.resolution_deg.is_finite()) {
            return Err(Error::Config("resolution_deg must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterationResult {
    pub angle: f64,
    pub grid_index: usize,
    pub spectrum: Spectrum,
    pub peak_value: f64,
    pub iteration_index: usize,
}

#[derive(Debug, Clone)]
pub struct SubAoaOutput {
    /// In detection order, which follows path strength.
    pub detections: Vec<IterationResult>,
    pub stopped_early: bool,
}

impl SubAoaOutput {
    pub fn angles(&self) -> Vec<f64> {
        self.detections.iter().map(|d| d.angle).collect()
    }
}

/// `-log max(ε, ‖Nᴴ a_g‖²)` for every column `a_g` of the steering matrix.
pub fn aoa_likelihood(a: &SteeringMatrix, noise: &NoiseSubspace, floor: f64) -> Result<Vec<f64>> {
    if a.ambient_dim() != noise.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            found: noise.ambient_dim(),
        });
    }
    let proj = noise.basis().adjoint() * a.columns();
    Ok(proj
        .column_iter()
        .map(|c| -c.norm_squared().max(floor).ln())
        .collect())
}

/// Noise-subspace likelihood of one bin's snapshots against its steering
/// matrix.
pub(crate) fn bin_likelihoods(
    snapshots: &CMatrix,
    steering: &SteeringMatrix,
    signal_dim: usize,
    floor: f64,
) -> Result<Vec<f64>> {
    let r = sample_covariance(snapshots)?;
    let eig = hermitian_eig(&r)?;
    let noise = noise_subspace(&eig, signal_dim)?;
    aoa_likelihood(steering, &noise, floor)
}

pub(crate) fn steering_per_bin(
    tensor: &SnapshotTensor,
    array: &MicArray,
    grid: &Arc<AngleGrid>,
) -> Result<Vec<SteeringMatrix>> {
    tensor
        .bins()
        .iter()
        .map(|&f| array.steering_matrix(f, grid))
        .collect()
}

pub(crate) fn check_tensor(tensor: &SnapshotTensor, array: &MicArray) -> Result<()> {
    if tensor.is_empty() {
        return Err(Error::Degenerate("snapshot tensor is empty".into()));
    }
    if tensor.ambient_dim() != array.len() {
        return Err(Error::DimensionMismatch {
            expected: array.len(),
            found: tensor.ambient_dim(),
        });
    }
    Ok(())
}

/// Runs the estimator on a frequency-domain tensor whose channels match the
/// array.
pub fn run(tensor: &SnapshotTensor, array: &MicArray, cfg: &SubAoaConfig) -> Result<SubAoaOutput> {
    cfg.validate(array.len())?;
    let grid = Arc::new(AngleGrid::for_array(array, cfg.resolution_deg)?);
    run_on_grid(tensor, array, &grid, cfg)
}

/// As [`run`] with an explicit candidate grid.
pub fn run_on_grid(
    tensor: &SnapshotTensor,
    array: &MicArray,
    grid: &Arc<AngleGrid>,
    cfg: &SubAoaConfig,
) -> Result<SubAoaOutput> {
    cfg.validate(array.len())?;
    check_tensor(tensor, array)?;
    let banded;
    let tensor = match &cfg.band {
        Some(band) => {
            banded = select_band(tensor, band)?;
            &banded
        }
        None => tensor,
    };

    let mut steering = steering_per_bin(tensor, array, grid)?;
    let mut residual: Vec<CMatrix> = tensor.data().to_vec();
    let mut detections: Vec<IterationResult> = Vec::with_capacity(cfg.max_paths);
    let mut stopped_early = false;
    let m = array.len();

    for k in 0..cfg.max_paths {
        let ambient = m - k;
        let signal_dim = cfg.signal_dim().saturating_sub(k).min(ambient - 1);

        let mut scores = vec![0.0; grid.len()];
        for (x, a) in residual.iter().zip(&steering) {
            let lik = bin_likelihoods(x, a, signal_dim, cfg.likelihood_floor)?;
            for (acc, l) in scores.iter_mut().zip(lik) {
                *acc += l;
            }
        }
        mask_detected(&mut scores, &detections, grid.is_circular());

        let best = (0..scores.len())
            .filter(|i| detections.iter().all(|d| d.grid_index != *i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if scores[b] >= scores[i] => Some(b),
                _ => Some(i),
            });
        let Some(best) = best else { break };
        let peak_value = scores[best];

        if cfg.auto_stop {
            if let Some(first) = detections.first() {
                if peak_value < cfg.stop_ratio * first.peak_value {
                    stopped_early = true;
                    break;
                }
            }
        }

        detections.push(IterationResult {
            angle: grid.angles()[best],
            grid_index: best,
            spectrum: Spectrum::new(Arc::clone(grid), scores, Algorithm::SubAoa)?,
            peak_value,
            iteration_index: k,
        });

        if k + 1 < cfg.max_paths {
            for (x, a) in residual.iter_mut().zip(steering.iter_mut()) {
                let col = a.column(best);
                if col.norm() < 1e-12 {
                    return Err(Error::Degenerate(format!(
                        "steering column at {}° already cancelled at {} Hz",
                        grid.angles()[best],
                        a.frequency()
                    )));
                }
                let basis = null_space_of_vector(&col)?;
                *x = basis.apply(x)?;
                *a = a.project(&basis)?;
            }
        }
    }

    Ok(SubAoaOutput {
        detections,
        stopped_early,
    })
}

/// Previously detected angles have an all-zero steering column after
/// projection, which the log floor would score as a perfect match. Their
/// entries are replaced by the lower of the neighbouring scores.
fn mask_detected(scores: &mut [f64], detections: &[IterationResult], circular: bool) {
    let n = scores.len();
    let masked: Vec<usize> = detections.iter().map(|d| d.grid_index).collect();
    for &i in &masked {
        let neighbour = |j: Option<usize>| j.filter(|j| !masked.contains(j)).map(|j| scores[j]);
        let (l, r) = if circular {
            (Some((i + n - 1) % n), Some((i + 1) % n))
        } else {
            (i.checked_sub(1), (i + 1 < n).then_some(i + 1))
        };
        let fill = match (neighbour(l), neighbour(r)) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        };
        scores[i] = fill;
    }
}

/// `20 log10 ‖B₀ a_θ‖` for every grid angle, where `B₀` spans the
/// complement of the steering vector at `theta0`. Directions the projection
/// removes entirely report [`ATTENUATION_FLOOR_DB`].
pub fn projection_attenuation(
    array: &MicArray,
    f: f64,
    theta0: f64,
    grid: &Arc<AngleGrid>,
) -> Result<Vec<f64>> {
    let a0 = array.steering_vector(f, theta0)?;
    let basis = null_space_of_vector(&a0.entries)?;
    let a = array.steering_matrix(f, grid)?;
    let projected = basis.apply(a.columns())?;
    let floor = 10f64.powf(ATTENUATION_FLOOR_DB / 20.0);
    Ok(projected
        .column_iter()
        .map(|c| 20.0 * c.norm().max(floor).log10())
        .collect())
}
