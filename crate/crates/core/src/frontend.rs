//! Multichannel recordings, WAV I/O and the short-time transform that turns
//! them into per-frequency snapshot matrices.
//!
//! Snapshot matrices are channels-as-rows: bin `f` holds a `D × T` matrix
//! whose column `t` is the array snapshot of frame `t`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    channels: Vec<Vec<f64>>,
    rate: f64,
}

impl MultichannelRecording {
    pub fn new(channels: Vec<Vec<f64>>, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Config(format!("sample rate must be positive, got {rate}")));
        }
        if channels.is_empty() {
            return Err(Error::Config("recording has no channels".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Config("channels differ in length".into()));
        }
        Ok(MultichannelRecording { channels, rate })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }

    /// Sample-wise sum of two recordings with identical shape and rate.
    pub fn mix(&self, other: &MultichannelRecording) -> Result<MultichannelRecording> {
        if self.channel_count() != other.channel_count() {
            return Err(Error::DimensionMismatch {
                expected: self.channel_count(),
                found: other.channel_count(),
            });
        }
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        if self.rate != other.rate {
            return Err(Error::Config("cannot mix recordings with different rates".into()));
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(MultichannelRecording {
            channels,
            rate: self.rate,
        })
    }

    pub fn scaled(&self, gain: f64) -> MultichannelRecording {
        MultichannelRecording {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|x| x * gain).collect())
                .collect(),
            rate: self.rate,
        }
    }
}

/// Sample format used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads a WAV file; integer PCM is scaled by `2^-(bits-1)` into `[-1, 1)`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<MultichannelRecording> {
    let path = path.as_ref();
    let (channels, rate) = read_wav(path)?;
    if channels.len() < 2 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: need at least 2 channels, found {}",
            path.display(),
            channels.len()
        )));
    }
    MultichannelRecording::new(channels, rate)
}

/// One channel of a WAV file of any channel count, with its sample rate.
pub fn load_wav_channel(path: impl AsRef<Path>, channel: usize) -> Result<(Vec<f64>, f64)> {
    let path = path.as_ref();
    let (mut channels, rate) = read_wav(path)?;
    if channel >= channels.len() {
        return Err(Error::UnsupportedAudio(format!(
            "{}: no channel {channel}",
            path.display()
        )));
    }
    Ok((channels.swap_remove(channel), rate))
}

fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let m = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedAudio(format!(
                    "{}-bit float samples",
                    spec.bits_per_sample
                )));
            }
            reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Int => {
            let bits = spec.bits_per_sample;
            if !(8..=32).contains(&bits) {
                return Err(Error::UnsupportedAudio(format!("{bits}-bit integer samples")));
            }
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let frames = interleaved.len() / m.max(1);
    let mut channels = vec![Vec::with_capacity(frames); m];
    for frame in interleaved.chunks_exact(m) {
        for (ch, &x) in channels.iter_mut().zip(frame) {
            ch.push(x);
        }
    }
    Ok((channels, f64::from(spec.sample_rate)))
}

pub fn write_wav(
    rec: &MultichannelRecording,
    path: impl AsRef<Path>,
    format: WavFormat,
) -> Result<()> {
    let rate = rec.rate().round();
    if (rate - rec.rate()).abs() > 1e-9 || rate > f64::from(u32::MAX) {
        return Err(Error::UnsupportedAudio(format!(
            "WAV needs an integral sample rate, got {}",
            rec.rate()
        )));
    }
    let spec = hound::WavSpec {
        channels: rec.channel_count() as u16,
        sample_rate: rate as u32,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for n in 0..rec.len() {
        for ch in rec.channels() {
            match format {
                WavFormat::Pcm16 => {
                    let v = (ch[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                WavFormat::Float32 => writer.write_sample(ch[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic taper of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 1024,
            hop: 512,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.window_len.is_power_of_two() {
            return Err(Error::Config(format!(
                "window length {} is not a power of two",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::Config(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for FrequencyBand {
    /// Speech band used by default for likelihood fusion.
    fn default() -> Self {
        FrequencyBand {
            lo: 300.0,
            hi: 4000.0,
        }
    }
}

impl FrequencyBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid band [{lo}, {hi}]")));
        }
        Ok(FrequencyBand { lo, hi })
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

/// Per-frequency snapshot matrices of a multichannel recording.
#[derive(Debug, Clone)]
pub struct SnapshotTensor {
    bins: Vec<f64>,
    data: Vec<CMatrix>,
    rate: f64,
    config: StftConfig,
}

impl SnapshotTensor {
    /// Builds a tensor from explicit per-bin matrices, all `D × T` with the
    /// same `D` and `T`.
    pub fn from_parts(bins: Vec<f64>, data: Vec<CMatrix>, rate: f64, config: StftConfig) -> Result<Self> {
        if bins.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: bins.len(),
                found: data.len(),
            });
        }
        if let Some(first) = data.first() {
            let shape = first.shape();
            if let Some(bad) = data.iter().find(|m| m.shape() != shape) {
                return Err(Error::DimensionMismatch {
                    expected: shape.1,
                    found: bad.ncols(),
                });
            }
        }
        Ok(SnapshotTensor {
            bins,
            data,
            rate,
            config,
        })
    }

    /// Frequencies (Hz) of the retained bins.
    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn data(&self) -> &[CMatrix] {
        &self.data
    }

    pub fn bin(&self, i: usize) -> &CMatrix {
        &self.data[i]
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty() || self.frames() == 0
    }

    /// Ambient (channel) dimension `D`.
    pub fn ambient_dim(&self) -> usize {
        self.data.first().map_or(0, |m| m.nrows())
    }

    /// Frame count `T`.
    pub fn frames(&self) -> usize {
        self.data.first().map_or(0, |m| m.ncols())
    }

    /// Multiplies every coefficient by `gain`.
    pub fn scaled(&self, gain: Complex64) -> SnapshotTensor {
        SnapshotTensor {
            bins: self.bins.clone(),
            data: self.data.iter().map(|m| m * gain).collect(),
            rate: self.rate,
            config: self.config,
        }
    }
}

/// Short-time transform of every channel. Bin `k` sits at `k·rate/N`; the
/// tensor keeps all `N/2 + 1` non-negative frequencies.
pub fn stft(rec: &MultichannelRecording, cfg: &StftConfig) -> Result<SnapshotTensor> {
    cfg.validate()?;
    let n = cfg.window_len;
    let len = rec.len();
    if len < n {
        return Err(Error::TooShort { len, window: n });
    }
    let frames = (len - n) / cfg.hop + 1;
    let nbins = n / 2 + 1;
    let m = rec.channel_count();
    let taper = cfg.window.coefficients(n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut data = vec![CMatrix::zeros(m, frames); nbins];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (ch, samples) in rec.channels().iter().enumerate() {
        for t in 0..frames {
            let start = t * cfg.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(samples[start + i] * taper[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, mat) in data.iter_mut().enumerate() {
                mat[(ch, t)] = buf[k];
            }
        }
    }
    let bins = (0..nbins).map(|k| k as f64 * rec.rate() / n as f64).collect();
    Ok(SnapshotTensor {
        bins,
        data,
        rate: rec.rate(),
        config: *cfg,
    })
}

/// Keeps the bins with `lo <= f <= hi`.
pub fn select_band(t: &SnapshotTensor, band: &FrequencyBand) -> Result<SnapshotTensor> {
    let keep: Vec<usize> = (0..t.bins.len()).filter(|&i| band.contains(t.bins[i])).collect();
    if keep.is_empty() {
        return Err(Error::EmptyBand {
            lo: band.lo,
            hi: band.hi,
        });
    }
    Ok(SnapshotTensor {
        bins: keep.iter().map(|&i| t.bins[i]).collect(),
        data: keep.iter().map(|&i| t.data[i].clone()).collect(),
        rate: t.rate,
        config: t.config,
    })
}

/// `R = X Xᴴ / T`.
pub fn sample_covariance(x: &CMatrix) -> Result<CMatrix> {
    let t = x.ncols();
    if t == 0 {
        return Err(Error::Degenerate("covariance of zero snapshots".into()));
    }
    let mut r = x * x.adjoint();
    r.unscale_mut(t as f64);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rec_from(channels: Vec<Vec<f64>>, rate: f64) -> MultichannelRecording {
        MultichannelRecording::new(channels, rate).unwrap()
    }

    #[test]
    fn recording_validation() {
        assert!(MultichannelRecording::new(vec![vec![0.0; 3], vec![0.0; 4]], 16000.0).is_err());
        assert!(MultichannelRecording::new(vec![vec![0.0; 3]], 0.0).is_err());
    }

    #[test]
    fn wav_round_trip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("six.wav");
        let square: Vec<f64> = (0..800).map(|n| if (n / 20) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut channels = vec![vec![0.0; 800]; 6];
        channels[2] = square;
        let rec = rec_from(channels, 16000.0);
        write_wav(&rec, &path, WavFormat::Pcm16).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.channel_count(), 6);
        assert_eq!(back.rate(), 16000.0);
        assert!(back.channels()[0].iter().all(|&x| x == 0.0));
        let peak = back.channels()[2].iter().cloned().fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(peak, 32767.0 / 32768.0, epsilon = 1e-15);
        assert_eq!(back.channels()[2].iter().cloned().fold(f64::MAX, f64::min), -1.0);

        let fpath = dir.path().join("f.wav");
        let rec = rec_from(vec![vec![0.25, -0.5], vec![0.125, 0.0]], 8000.0);
        write_wav(&rec, &fpath, WavFormat::Float32).unwrap();
        assert_eq!(load_wav(&fpath).unwrap(), rec);
    }

    #[test]
    fn wav_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mono = dir.path().join("mono.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&mono, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&mono), Err(Error::UnsupportedAudio(_))));

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"RIFF not really a wav").unwrap();
        assert!(load_wav(&junk).is_err());
    }

    #[test]
    fn stft_shapes_and_zero_input() {
        let rec = rec_from(vec![vec![0.0; 5000]; 3], 16000.0);
        let t = stft(&rec, &StftConfig::default()).unwrap();
        assert_eq!(t.bin_count(), 513);
        assert_eq!(t.frames(), (5000 - 1024) / 512 + 1);
        assert_eq!(t.ambient_dim(), 3);
        assert!(t.data().iter().all(|m| m.iter().all(|z| z.norm() == 0.0)));

        let short = rec_from(vec![vec![0.0; 100]; 2], 16000.0);
        assert!(matches!(stft(&short, &StftConfig::default()), Err(Error::TooShort { .. })));
        let bad = StftConfig {
            window_len: 1000,
            ..StftConfig::default()
        };
        assert!(stft(&rec, &bad).is_err());
    }

    #[test]
    fn bin_centred_tone_stays_in_its_bin() {
        let n = 256;
        let k0 = 19;
        let tone: Vec<f64> = (0..n * 4)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let rec = rec_from(vec![tone.clone(), tone], 8000.0);
        let cfg = StftConfig {
            window_len: n,
            hop: n / 2,
            window: Window::Rectangular,
        };
        let t = stft(&rec, &cfg).unwrap();
        let peak = t.bin(k0).norm();
        for k in 0..t.bin_count() {
            if k != k0 {
                assert!(t.bin(k).norm() <= 1e-10 * peak, "bin {k}");
            }
        }
    }

    #[test]
    fn parseval_per_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 512;
        let x: Vec<f64> = (0..n * 3).map(|_| rng.sample(StandardNormal)).collect();
        let cfg = StftConfig {
            window_len: n,
            hop: 300,
            window: Window::Hann,
        };
        let rec = rec_from(vec![x.clone(), x.clone()], 16000.0);
        let t = stft(&rec, &cfg).unwrap();
        let w = Window::Hann.coefficients(n);
        for frame in 0..t.frames() {
            let start = frame * cfg.hop;
            let energy: f64 = (0..n).map(|i| (x[start + i] * w[i]).powi(2)).sum();
            let mut spec = 0.0;
            for k in 0..t.bin_count() {
                let e = t.bin(k)[(0, frame)].norm_sqr();
                spec += if k == 0 || k == n / 2 { e } else { 2.0 * e };
            }
            assert_abs_diff_eq!(spec / n as f64, energy, epsilon = 1e-9 * energy);
        }
    }

    #[test]
    fn band_selection() {
        let rec = rec_from(vec![vec![0.0; 2048]; 2], 16000.0);
        let t = stft(&rec, &StftConfig::default()).unwrap();
        let all = select_band(&t, &FrequencyBand::new(0.0, 8000.0).unwrap()).unwrap();
        assert_eq!(all.bins(), t.bins());

        let speech = select_band(&t, &FrequencyBand::default()).unwrap();
        // 300 / 15.625 = 19.2 -> 20; 4000 / 15.625 = 256
        assert_eq!(speech.bin_count(), 256 - 20 + 1);
        assert_eq!(speech.bins()[0], 20.0 * 15.625);
        assert_eq!(*speech.bins().last().unwrap(), 4000.0);

        let top = select_band(&t, &FrequencyBand::new(7990.0, 8000.0).unwrap()).unwrap();
        assert_eq!(top.bin_count(), 1);

        let gap = FrequencyBand::new(301.0, 305.0).unwrap();
        assert!(matches!(select_band(&t, &gap), Err(Error::EmptyBand { .. })));
    }

    #[test]
    fn nested_band_selection_composes() {
        let rec = rec_from(vec![vec![0.0; 2048]; 2], 16000.0);
        let t = stft(&rec, &StftConfig::default()).unwrap();
        let outer = FrequencyBand::new(200.0, 5000.0).unwrap();
        let inner = FrequencyBand::new(1000.0, 2000.0).unwrap();
        let twice = select_band(&select_band(&t, &outer).unwrap(), &inner).unwrap();
        let once = select_band(&t, &inner).unwrap();
        assert_eq!(twice.bins(), once.bins());
    }

    #[test]
    fn covariance_cases() {
        let x = CMatrix::from_column_slice(3, 1, &[Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0), Complex64::new(3.0, 0.5)]);
        let r = sample_covariance(&x).unwrap();
        assert_abs_diff_eq!((r - &x * x.adjoint()).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(sample_covariance(&CMatrix::zeros(4, 6)).unwrap().norm(), 0.0);
        assert!(sample_covariance(&CMatrix::zeros(4, 0)).is_err());
    }

    #[test]
    fn white_noise_covariance_is_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x = CMatrix::from_fn(4, 10_000, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
        });
        let r = sample_covariance(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert!((r[(i, i)].re - 1.0).abs() < 0.05);
                } else {
                    assert!(r[(i, j)].norm() < 0.05);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn covariance_is_hermitian_psd(seed in 0u64..1000, d in 1usize..7, t in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = crate::linalg::testutil::random_cmatrix(&mut rng, d, t);
            let r = sample_covariance(&x).unwrap();
            prop_assert!((&r - r.adjoint()).norm() <= 1e-12 * (1.0 + r.norm()));
            let eig = hermitian_eig(&r).unwrap();
            prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * (1.0 + r.norm())));
        }

        #[test]
        fn stft_is_linear(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut noise = |n| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
            let x = rec_from(vec![noise(600), noise(600)], 8000.0);
            let y = rec_from(vec![noise(600), noise(600)], 8000.0);
            let cfg = StftConfig { window_len: 128, hop: 64, window: Window::Hann };
            let combo = x.scaled(a).mix(&y.scaled(b)).unwrap();
            let lhs = stft(&combo, &cfg).unwrap();
            let sx = stft(&x, &cfg).unwrap();
            let sy = stft(&y, &cfg).unwrap();
            for k in 0..lhs.bin_count() {
                let rhs = sx.bin(k) * Complex64::new(a, 0.0) + sy.bin(k) * Complex64::new(b, 0.0);
                prop_assert!((lhs.bin(k) - rhs).norm() <= 1e-10 * (1.0 + lhs.bin(k).norm()));
            }
        }
    }
}
