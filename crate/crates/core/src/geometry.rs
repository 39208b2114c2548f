//! Microphone array layouts and far-field steering vectors.
//!
//! Angles are azimuths in degrees measured counter-clockwise from the +x
//! axis and name the bearing *towards* the source: a wave arriving from
//! θ travels along `-u(θ)` with `u(θ) = (cos θ, sin θ)`. Microphone `m`
//! at position `p_m` therefore hears the wave with a delay of
//! `δ_m(θ) = -(p_m · u(θ)) / c` relative to the array origin, and with the
//! `e^{-jωt}` transform convention its steering entry is
//! `exp(-j 2π f δ_m(θ)) / √M`. The simulator, the estimators and the chirp
//! ground-truth solver all go through [`MicArray::relative_delay`].

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::NullSpaceBasis;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Radius of the six-microphone circular array used by the examples and
/// the acceptance scenarios (meters).
pub const DEFAULT_CIRCULAR_RADIUS: f64 = 0.0463;

/// Resolvable azimuth range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub lo: f64,
    pub hi: f64,
}

impl Sector {
    pub const FULL: Sector = Sector { lo: 0.0, hi: 360.0 };
    pub const HALF: Sector = Sector { lo: 0.0, hi: 180.0 };

    pub fn is_full_circle(&self) -> bool {
        (self.hi - self.lo - 360.0).abs() < 1e-9
    }

    /// Maps `theta` into the sector, wrapping modulo 360 for full-circle
    /// sectors. Returns `None` when the angle is not resolvable.
    pub fn normalize(&self, theta: f64) -> Option<f64> {
        if !theta.is_finite() {
            return None;
        }
        if self.is_full_circle() {
            let wrapped = (theta - self.lo).rem_euclid(360.0) + self.lo;
            // rem_euclid can return exactly 360 for tiny negative inputs
            return Some(if wrapped >= self.hi { self.lo } else { wrapped });
        }
        let eps = 1e-9;
        (theta >= self.lo - eps && theta <= self.hi + eps).then(|| theta.clamp(self.lo, self.hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicArray {
    positions: Vec<[f64; 2]>,
    speed_of_sound: f64,
    sector: Sector,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayFile {
    positions_m: Vec<[f64; 2]>,
    #[serde(default = "default_speed")]
    speed_of_sound: f64,
    #[serde(default = "default_sector")]
    sector_deg: [f64; 2],
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

fn default_sector() -> [f64; 2] {
    [0.0, 360.0]
}

impl MicArray {
    pub fn new(positions: Vec<[f64; 2]>, speed_of_sound: f64, sector: Sector) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 microphones, got {}",
                positions.len()
            )));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::Geometry(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        if !(sector.lo.is_finite() && sector.hi.is_finite() && sector.lo < sector.hi)
            || sector.hi - sector.lo > 360.0 + 1e-9
        {
            return Err(Error::Geometry(format!(
                "invalid sector [{}, {}]",
                sector.lo, sector.hi
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::Geometry(format!("position {i} is not finite")));
            }
            for q in &positions[..i] {
                if (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-12 {
                    return Err(Error::Geometry(format!("microphone {i} duplicates another")));
                }
            }
        }
        Ok(MicArray {
            positions,
            speed_of_sound,
            sector,
        })
    }

    /// `count` microphones evenly spaced on a circle, the first on the +x axis.
    pub fn circular(count: usize, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Geometry(format!("radius must be positive, got {radius}")));
        }
        if count < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 microphones, got {count}"
            )));
        }
        let positions = (0..count)
            .map(|m| {
                let phi = 2.0 * PI * m as f64 / count as f64;
                [radius * phi.cos(), radius * phi.sin()]
            })
            .collect();
        Self::new(positions, DEFAULT_SPEED_OF_SOUND, Sector::FULL)
    }

    /// `count` collinear microphones on the +x axis starting at the origin.
    pub fn uniform_linear(count: usize, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Geometry(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        if count < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 microphones, got {count}"
            )));
        }
        let positions = (0..count).map(|m| [m as f64 * spacing, 0.0]).collect();
        Self::new(positions, DEFAULT_SPEED_OF_SOUND, Sector::HALF)
    }

    pub fn with_speed_of_sound(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Geometry(format!("speed of sound must be positive, got {c}")));
        }
        self.speed_of_sound = c;
        Ok(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ArrayFile = serde_json::from_str(s)?;
        Self::new(
            raw.positions_m,
            raw.speed_of_sound,
            Sector {
                lo: raw.sector_deg[0],
                hi: raw.sector_deg[1],
            },
        )
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        let raw = ArrayFile {
            positions_m: self.positions.clone(),
            speed_of_sound: self.speed_of_sound,
            sector_deg: [self.sector.lo, self.sector.hi],
        };
        serde_json::to_string_pretty(&raw).expect("array geometry serializes")
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Largest distance between any two microphones.
    pub fn aperture(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, p) in self.positions.iter().enumerate() {
            for q in &self.positions[i + 1..] {
                best = best.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        best
    }

    /// Arrival delay (seconds) at microphone `mic` relative to the array
    /// origin for a plane wave from bearing `theta_deg`.
    pub fn relative_delay(&self, mic: usize, theta_deg: f64) -> f64 {
        let (s, c) = theta_deg.to_radians().sin_cos();
        let p = self.positions[mic];
        -(p[0] * c + p[1] * s) / self.speed_of_sound
    }

    fn checked_angle(&self, theta: f64) -> Result<f64> {
        self.sector.normalize(theta).ok_or(Error::OutsideSector {
            angle: theta,
            lo: self.sector.lo,
            hi: self.sector.hi,
        })
    }

    fn fill_steering(&self, f: f64, theta: f64, out: &mut [Complex64]) {
        let norm = 1.0 / (self.len() as f64).sqrt();
        for (m, slot) in out.iter_mut().enumerate() {
            let phase = -2.0 * PI * f * self.relative_delay(m, theta);
            *slot = Complex64::from_polar(norm, phase);
        }
    }

    pub fn steering_vector(&self, f: f64, theta: f64) -> Result<SteeringVector> {
        let theta = self.checked_angle(theta)?;
        let mut entries = DVector::zeros(self.len());
        self.fill_steering(f, theta, entries.as_mut_slice());
        Ok(SteeringVector {
            entries,
            frequency: f,
            angle: theta,
        })
    }

    pub fn steering_matrix(&self, f: f64, grid: &Arc<AngleGrid>) -> Result<SteeringMatrix> {
        let m = self.len();
        let mut columns = DMatrix::zeros(m, grid.len());
        for (g, &theta) in grid.angles().iter().enumerate() {
            let theta = self.checked_angle(theta)?;
            self.fill_steering(f, theta, columns.column_mut(g).as_mut_slice());
        }
        Ok(SteeringMatrix {
            frequency: f,
            grid: Arc::clone(grid),
            columns,
        })
    }
}

/// Ordered candidate azimuths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    angles: Vec<f64>,
    resolution: f64,
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>, resolution: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Config("angle grid is empty".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Config(format!("invalid grid resolution {resolution}")));
        }
        if angles.iter().any(|a| !a.is_finite()) || angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid angles must be finite and strictly increasing".into()));
        }
        Ok(AngleGrid { angles, resolution })
    }

    /// `[0, 360)` in steps of `resolution`; 1° gives the 360-column grid.
    pub fn full_circle(resolution: f64) -> Result<Self> {
        Self::span(0.0, 360.0 - resolution * 0.5, resolution)
    }

    /// `lo, lo + step, ...` up to and including `hi` (within rounding).
    pub fn span(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || !(lo <= hi) {
            return Err(Error::Config(format!("invalid grid span [{lo}, {hi}] step {step}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| lo + i as f64 * step).collect(), step)
    }

    /// Grid covering the array's sector.
    pub fn for_array(array: &MicArray, resolution: f64) -> Result<Self> {
        let s = array.sector();
        if s.is_full_circle() {
            let g = Self::full_circle(resolution)?;
            Self::new(g.angles.iter().map(|a| a + s.lo).collect(), resolution)
        } else {
            Self::span(s.lo, s.hi, resolution)
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// True when the grid spans the whole circle, so neighbourhoods wrap.
    pub fn is_circular(&self) -> bool {
        let (first, last) = (self.angles[0], self.angles[self.len() - 1]);
        (last + self.resolution - first - 360.0).abs() < 1e-6
    }

    /// Index of the grid angle closest to `theta` (circular distance).
    pub fn nearest_index(&self, theta: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, &a) in self.angles.iter().enumerate() {
            let d = (a - theta).rem_euclid(360.0);
            let d = d.min(360.0 - d);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: DVector<Complex64>,
    pub frequency: f64,
    pub angle: f64,
}

/// Candidate steering vectors for one frequency, one unit-norm column per
/// grid angle. The ambient dimension starts at the microphone count and
/// shrinks by one with every null-space projection.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    frequency: f64,
    grid: Arc<AngleGrid>,
    columns: DMatrix<Complex64>,
}

impl SteeringMatrix {
    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn grid(&self) -> &Arc<AngleGrid> {
        &self.grid
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn column(&self, g: usize) -> DVector<Complex64> {
        self.columns.column(g).into_owned()
    }

    /// Maps every column through `basis` and renormalizes. Columns that the
    /// projection annihilates stay exactly zero.
    pub fn project(&self, basis: &NullSpaceBasis) -> Result<SteeringMatrix> {
        let mut columns = basis.apply(&self.columns)?;
        for mut col in columns.column_iter_mut() {
            let n = col.norm();
            if n > 1e-12 {
                col.unscale_mut(n);
            } else {
                col.fill(Complex64::new(0.0, 0.0));
            }
        }
        Ok(SteeringMatrix {
            frequency: self.frequency,
            grid: Arc::clone(&self.grid),
            columns,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    #[test]
    fn circular_layout() {
        let arr = MicArray::circular(6, 0.05).unwrap();
        assert_eq!(arr.len(), 6);
        assert_abs_diff_eq!(arr.positions()[0][0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(arr.positions()[0][1], 0.0, epsilon = 1e-15);
        for p in arr.positions() {
            assert_abs_diff_eq!(p[0].hypot(p[1]), 0.05, epsilon = 1e-15);
        }
        // chord length 2 r sin(pi / 6)
        let chord = 2.0 * 0.05 * (PI / 6.0).sin();
        for m in 0..6 {
            let d = dist(arr.positions()[m], arr.positions()[(m + 1) % 6]);
            assert_abs_diff_eq!(d, chord, epsilon = 1e-12);
            assert_abs_diff_eq!(d, 0.05, epsilon = 1e-12);
        }
        assert!(arr.sector().is_full_circle());

        let pair = MicArray::circular(2, 0.01).unwrap();
        assert_abs_diff_eq!(dist(pair.positions()[0], pair.positions()[1]), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn circular_rejects_bad_input() {
        assert!(MicArray::circular(6, 0.0).is_err());
        assert!(MicArray::circular(6, -1.0).is_err());
        assert!(MicArray::circular(1, 0.05).is_err());
    }

    #[test]
    fn linear_layout() {
        let arr = MicArray::uniform_linear(2, 0.1).unwrap();
        assert_eq!(arr.positions(), &[[0.0, 0.0], [0.1, 0.0]]);
        assert_eq!(arr.sector(), Sector::HALF);
        let arr = MicArray::uniform_linear(4, 0.05).unwrap();
        assert_abs_diff_eq!(arr.aperture(), 0.15, epsilon = 1e-15);
        let arr = MicArray::uniform_linear(3, 0.02).unwrap();
        let p = arr.positions();
        assert_abs_diff_eq!(dist(p[0], p[1]), dist(p[1], p[2]), epsilon = 1e-15);
        assert!(MicArray::uniform_linear(3, 0.0).is_err());
    }

    #[test]
    fn duplicate_positions_rejected() {
        let r = MicArray::new(vec![[0.0, 0.0], [0.0, 0.0]], 343.0, Sector::FULL);
        assert!(matches!(r, Err(Error::Geometry(_))));
    }

    #[test]
    fn zero_frequency_is_flat() {
        let arr = MicArray::circular(6, 0.05).unwrap();
        let a = arr.steering_vector(0.0, 37.0).unwrap();
        for z in a.entries.iter() {
            assert_abs_diff_eq!(z.re, 1.0 / 6f64.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    fn phase_diff(a: &SteeringVector) -> f64 {
        (a.entries[1] * a.entries[0].conj()).arg()
    }

    #[test]
    fn half_wavelength_pair_phases() {
        let f = 1000.0;
        let lambda = DEFAULT_SPEED_OF_SOUND / f;
        let arr = MicArray::uniform_linear(2, lambda / 2.0).unwrap();
        let endfire = arr.steering_vector(f, 0.0).unwrap();
        assert_abs_diff_eq!(phase_diff(&endfire).abs(), PI, epsilon = 1e-9);
        let broadside = arr.steering_vector(f, 90.0).unwrap();
        assert_abs_diff_eq!(phase_diff(&broadside), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn outside_sector_is_rejected() {
        let arr = MicArray::uniform_linear(2, 0.1).unwrap();
        assert!(matches!(
            arr.steering_vector(1000.0, 200.0),
            Err(Error::OutsideSector { .. })
        ));
        // full circle wraps
        let circ = MicArray::circular(4, 0.05).unwrap();
        let a = circ.steering_vector(1000.0, -90.0).unwrap();
        let b = circ.steering_vector(1000.0, 270.0).unwrap();
        assert_abs_diff_eq!((a.entries - b.entries).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn steering_matrix_shapes() {
        let arr = MicArray::uniform_linear(2, 0.05).unwrap();
        let grid = Arc::new(AngleGrid::for_array(&arr, 1.0).unwrap());
        assert_eq!(grid.len(), 181);
        let a = arr.steering_matrix(2000.0, &grid).unwrap();
        assert_eq!(a.columns().shape(), (2, 181));
        for col in a.columns().column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
        }

        let dc = arr.steering_matrix(0.0, &grid).unwrap();
        let first = dc.column(0);
        for g in 1..grid.len() {
            assert_abs_diff_eq!((dc.column(g) - &first).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn circular_beam_pattern_separates_angles() {
        let arr = MicArray::circular(6, 0.05).unwrap();
        let grid = Arc::new(AngleGrid::full_circle(1.0).unwrap());
        assert_eq!(grid.len(), 360);
        let a = arr.steering_matrix(1000.0, &grid).unwrap();
        let gram = a.columns().adjoint() * a.columns();
        for i in 0..360 {
            assert_abs_diff_eq!(gram[(i, i)].re, 1.0, epsilon = 1e-12);
            for j in (0..360).step_by(7) {
                let sep = ((i as i64 - j as i64).rem_euclid(360)).min((j as i64 - i as i64).rem_euclid(360));
                if sep >= 30 {
                    assert!(gram[(i, j)].norm() < 1.0 - 1e-6, "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn grid_construction() {
        let g = AngleGrid::full_circle(1.0).unwrap();
        assert_eq!(g.len(), 360);
        assert_eq!(g.angles()[359], 359.0);
        assert!(g.is_circular());
        assert_eq!(g.nearest_index(359.7), 0);
        let half = AngleGrid::span(0.0, 180.0, 1.0).unwrap();
        assert_eq!(half.len(), 181);
        assert!(!half.is_circular());
        assert!(AngleGrid::new(vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"positions_m": [[0,0],[0.1,0],[0,0.1]], "speed_of_sound": 340.0, "sector_deg": [0,360]}"#;
        let arr = MicArray::from_json_str(json).unwrap();
        assert_eq!(arr.len(), 3);
        assert_eq!(arr.speed_of_sound(), 340.0);
        let again = MicArray::from_json_str(&arr.to_json_string()).unwrap();
        assert_eq!(arr, again);
        assert!(MicArray::from_json_str(r#"{"positions_m": [[0,0]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn unit_norm_and_conjugate_symmetry(f in 0.0f64..8000.0, theta in 0.0f64..360.0, m in 2usize..9) {
            let arr = MicArray::circular(m, 0.046).unwrap();
            let a = arr.steering_vector(f, theta).unwrap();
            prop_assert!((a.entries.norm() - 1.0).abs() < 1e-12);
            let neg = arr.steering_vector(-f, theta).unwrap();
            prop_assert!((neg.entries - a.entries.conjugate()).norm() < 1e-12);
        }

        #[test]
        fn pair_phase_matches_path_difference(f in 1.0f64..4000.0, theta in 0.0f64..180.0, d in 0.01f64..0.04) {
            let arr = MicArray::uniform_linear(2, d).unwrap();
            let a = arr.steering_vector(f, theta).unwrap();
            let expected = 2.0 * PI * f * d * theta.to_radians().cos() / DEFAULT_SPEED_OF_SOUND;
            // |expected| < pi here, so no wrapping
            prop_assert!((phase_diff(&a) - expected).abs() < 1e-9);
        }

        #[test]
        fn translation_keeps_inner_product_magnitudes(
            dx in -1.0f64..1.0, dy in -1.0f64..1.0,
            t1 in 0.0f64..360.0, t2 in 0.0f64..360.0, f in 100.0f64..4000.0,
        ) {
            let arr = MicArray::circular(5, 0.05).unwrap();
            let shifted: Vec<_> = arr.positions().iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
            let moved = MicArray::new(shifted, arr.speed_of_sound(), arr.sector()).unwrap();
            let ip = |a: &MicArray| {
                let x = a.steering_vector(f, t1).unwrap().entries;
                let y = a.steering_vector(f, t2).unwrap().entries;
                x.dotc(&y).norm()
            };
            prop_assert!((ip(&arr) - ip(&moved)).abs() < 1e-10);
        }
    }
}
