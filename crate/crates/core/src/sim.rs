//! Multipath recordings with known ground truth.
//!
//! Every path is a far-field plane wave reaching the array from `aoa` after
//! `delay` seconds with amplitude `gain`. Microphone `m` receives
//! `Y_m(f) = Σ_k g_k e^{-j2πf(τ_k + δ_m(θ_k))} S(f) + N_m(f)`, synthesized in
//! the frequency domain so fractional delays are exact, with `δ_m` taken
//! from [`MicArray::relative_delay`].

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frontend::{load_wav_channel, MultichannelRecording};
use crate::geometry::{AngleGrid, MicArray};

/// Sweep of the default chirp source.
pub const CHIRP_BAND_HZ: (f64, f64) = (0.0, 8000.0);
pub const CHIRP_DURATION_S: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    #[serde(rename = "aoa_deg")]
    pub aoa: f64,
    #[serde(rename = "delay_s")]
    pub delay: f64,
    pub gain: f64,
}

impl PathSpec {
    pub fn new(aoa: f64, delay: f64, gain: f64) -> Self {
        PathSpec { aoa, delay, gain }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    White,
    SpeechLike,
    Chirp,
    WavFile(PathBuf),
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::White => f.write_str("white"),
            SourceKind::SpeechLike => f.write_str("speech_like"),
            SourceKind::Chirp => f.write_str("chirp"),
            SourceKind::WavFile(p) => write!(f, "wav:{}", p.display()),
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(SourceKind::White),
            "speech_like" => Ok(SourceKind::SpeechLike),
            "chirp" => Ok(SourceKind::Chirp),
            other => match other.strip_prefix("wav:") {
                Some(p) if !p.is_empty() => Ok(SourceKind::WavFile(PathBuf::from(p))),
                _ => Err(Error::Config(format!("unknown source {other:?}"))),
            },
        }
    }
}

impl Serialize for SourceKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub paths: Vec<PathSpec>,
    pub source: SourceKind,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(rename = "rate_hz")]
    pub rate: f64,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Scenario document whose paths may instead come from a room.
#[derive(Debug, Deserialize)]
struct ScenarioDoc {
    #[serde(default)]
    paths: Option<Vec<PathSpec>>,
    #[serde(default)]
    room: Option<Room>,
    source: SourceKind,
    duration_s: f64,
    rate_hz: f64,
    #[serde(default)]
    snr_db: Option<f64>,
    #[serde(default)]
    seed: u64,
}

impl Scenario {
    /// Parses a scenario document. Paths are given directly under
    /// `"paths"` or derived from a `"room"` by the image-source method.
    pub fn from_json_value(v: serde_json::Value) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_value(v)?;
        let paths = match (doc.paths, doc.room) {
            (Some(p), None) => p,
            (None, Some(room)) => image_source_paths(&room)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config("scenario gives both paths and room".into()))
            }
            (None, None) => return Err(Error::Config("scenario needs paths or room".into())),
        };
        let sc = Scenario {
            paths,
            source: doc.source,
            duration: doc.duration_s,
            rate: doc.rate_hz,
            snr_db: doc.snr_db,
            seed: doc.seed,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json_value(serde_json::from_str(s)?)
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    pub fn truth_angles(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.aoa).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("scenario has no paths".into()));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Config(format!("invalid rate {}", self.rate)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) || self.samples() == 0 {
            return Err(Error::Config(format!("invalid duration {}", self.duration)));
        }
        for p in &self.paths {
            if !(p.aoa.is_finite() && p.gain.is_finite() && p.delay.is_finite()) {
                return Err(Error::Config("path parameters must be finite".into()));
            }
            if p.delay < 0.0 {
                return Err(Error::Config(format!("negative path delay {}", p.delay)));
            }
            if p.delay >= self.duration {
                return Err(Error::Config(format!(
                    "path delay {} s exceeds duration {} s",
                    p.delay, self.duration
                )));
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::Config("snr_db must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Rectangular room for the 2-D image-source method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
    pub source_pos: [f64; 2],
    pub array_pos: [f64; 2],
    pub reflection_coeff: f64,
    pub max_order: usize,
}

impl Room {
    fn inside(&self, p: [f64; 2]) -> bool {
        p[0] > 0.0 && p[0] < self.width && p[1] > 0.0 && p[1] < self.height
    }
}

/// Direct path plus one path per image source up to `max_order` wall
/// reflections, sorted by delay. Gains follow `β^order / distance`.
pub fn image_source_paths(room: &Room) -> Result<Vec<PathSpec>> {
    image_source_paths_with_speed(room, crate::geometry::DEFAULT_SPEED_OF_SOUND)
}

pub fn image_source_paths_with_speed(room: &Room, speed_of_sound: f64) -> Result<Vec<PathSpec>> {
    if !(room.width > 0.0 && room.height > 0.0) {
        return Err(Error::Config("room dimensions must be positive".into()));
    }
    if !(0.0..1.0).contains(&room.reflection_coeff) {
        return Err(Error::Config(format!(
            "reflection coefficient {} outside [0, 1)",
            room.reflection_coeff
        )));
    }
    if room.max_order > 2 {
        return Err(Error::Config(format!(
            "image order {} not supported (max 2)",
            room.max_order
        )));
    }
    if !room.inside(room.source_pos) || !room.inside(room.array_pos) {
        return Err(Error::Config("source and array must lie inside the room".into()));
    }
    let [sx, sy] = room.source_pos;
    let [ax, ay] = room.array_pos;
    if (sx - ax).hypot(sy - ay) < 1e-9 {
        return Err(Error::Degenerate("source coincides with the array".into()));
    }

    // (coordinate, reflection count) along one axis
    let axis = |s: f64, len: f64| -> Vec<(f64, usize)> {
        vec![
            (s, 0),
            (-s, 1),
            (2.0 * len - s, 1),
            (s + 2.0 * len, 2),
            (s - 2.0 * len, 2),
        ]
    };
    let mut paths = Vec::new();
    for &(ix, ox) in &axis(sx, room.width) {
        for &(iy, oy) in &axis(sy, room.height) {
            let order = ox + oy;
            if order > room.max_order {
                continue;
            }
            let (dx, dy) = (ix - ax, iy - ay);
            let dist = dx.hypot(dy);
            let aoa = dy.atan2(dx).to_degrees().rem_euclid(360.0);
            paths.push(PathSpec {
                aoa,
                delay: dist / speed_of_sound,
                gain: room.reflection_coeff.powi(order as i32) / dist,
            });
        }
    }
    paths.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(paths)
}

/// Unit-variance white Gaussian noise.
pub fn white_source(samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| rng.sample(StandardNormal)).collect()
}

/// Strongly auto-correlated stand-in for speech: Gaussian noise through a
/// two-pole resonator at 500 Hz (pole radius 0.97), modulated by a 4 Hz
/// raised-cosine envelope, scaled to unit RMS.
pub fn speech_like_source(duration: f64, rate: f64, seed: u64) -> Vec<f64> {
    speech_like_samples((duration * rate).round() as usize, rate, seed)
}

fn speech_like_samples(samples: usize, rate: f64, seed: u64) -> Vec<f64> {
    const BURN_IN: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r: f64 = 0.97;
    let w = 2.0 * PI * 500.0 / rate;
    let (a1, a2) = (2.0 * r * w.cos(), -r * r);
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(samples);
    for n in 0..samples + BURN_IN {
        let e: f64 = rng.sample(StandardNormal);
        let y = a1 * y1 + a2 * y2 + e;
        y2 = y1;
        y1 = y;
        if n >= BURN_IN {
            let t = (n - BURN_IN) as f64 / rate;
            let env = 0.5 - 0.5 * (2.0 * PI * 4.0 * t).cos();
            out.push(y * env);
        }
    }
    normalize_rms(&mut out);
    out
}

fn normalize_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
}

/// Linear sweep from `f0` to `f1` Hz with 2 ms raised-cosine fades.
pub fn linear_chirp(f0: f64, f1: f64, duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate).round() as usize;
    let k = (f1 - f0) / duration;
    let fade = ((0.002 * rate) as usize).min(n / 2).max(1);
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let x = (2.0 * PI * (f0 * t + 0.5 * k * t * t)).sin();
            let edge = i.min(n - 1 - i);
            let g = if edge < fade {
                0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
            } else {
                1.0
            };
            x * g
        })
        .collect()
}

/// The chirp emitted by [`SourceKind::Chirp`] at `rate`.
pub fn default_chirp(rate: f64) -> Vec<f64> {
    linear_chirp(
        CHIRP_BAND_HZ.0,
        CHIRP_BAND_HZ.1.min(rate / 2.0),
        CHIRP_DURATION_S,
        rate,
    )
}

/// Normalized autocorrelation at lag 1.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Dry source over sample times `[-pre_roll, len)`; transient sources start
/// at time zero.
fn source_signal(sc: &Scenario, pre_roll: usize, len: usize) -> Result<Vec<f64>> {
    let total = pre_roll + len;
    match &sc.source {
        SourceKind::White => Ok(white_source(total, sc.seed)),
        SourceKind::SpeechLike => Ok(speech_like_samples(total, sc.rate, sc.seed)),
        SourceKind::Chirp => {
            let mut s = vec![0.0; total];
            for (slot, v) in s[pre_roll..].iter_mut().zip(default_chirp(sc.rate)) {
                *slot = v;
            }
            Ok(s)
        }
        SourceKind::WavFile(path) => {
            let (samples, rate) = load_wav_channel(path, 0)?;
            if (rate - sc.rate).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "source file rate {rate} differs from scenario rate {}",
                    sc.rate
                )));
            }
            let mut s = vec![0.0; total];
            for (slot, v) in s[pre_roll..].iter_mut().zip(samples) {
                *slot = v;
            }
            Ok(s)
        }
    }
}

/// Renders a scenario at the array, adding white Gaussian noise when
/// `snr_db` is set. The noise variance is the mean per-microphone signal
/// power divided by `10^(snr/10)`; with a silent signal the unit-power
/// source is the reference instead.
pub fn synthesize(sc: &Scenario, array: &MicArray) -> Result<MultichannelRecording> {
    sc.validate()?;
    let rate = sc.rate;
    let len = sc.samples();
    let spread = (array.aperture() / array.speed_of_sound() * rate).ceil() as usize;
    let max_delay = sc.paths.iter().map(|p| p.delay).fold(0.0, f64::max);
    let pre_roll = (max_delay * rate).ceil() as usize + spread + 128;
    let tail = spread + 128;
    let n = pre_roll + len + tail;

    let mut src: Vec<Complex64> = source_signal(sc, pre_roll, len)?
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    src.resize(n, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut src);
    let inverse = planner.plan_fft_inverse(n);

    let freqs: Vec<f64> = (0..n)
        .map(|k| {
            let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            k * rate / n as f64
        })
        .collect();

    let mut channels = Vec::with_capacity(array.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..array.len() {
        let delays: Vec<(f64, f64)> = sc
            .paths
            .iter()
            .map(|p| (p.gain, p.delay + array.relative_delay(m, p.aoa)))
            .collect();
        for (k, slot) in buf.iter_mut().enumerate() {
            let w = -2.0 * PI * freqs[k];
            let h: Complex64 = delays
                .iter()
                .map(|&(g, tau)| Complex64::from_polar(g, w * tau))
                .sum();
            *slot = src[k] * h;
        }
        inverse.process(&mut buf);
        channels.push(
            buf[pre_roll..pre_roll + len]
                .iter()
                .map(|z| z.re / n as f64)
                .collect::<Vec<f64>>(),
        );
    }

    if let Some(snr_db) = sc.snr_db {
        let power = channels
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / len as f64)
            .sum::<f64>()
            / channels.len() as f64;
        let reference = if power > 0.0 { power } else { 1.0 };
        let sigma = (reference / 10f64.powf(snr_db / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        rng.set_stream(1);
        for c in channels.iter_mut() {
            for v in c.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    MultichannelRecording::new(channels, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChirpOptions {
    /// Minimum spacing between channel taps on one microphone (seconds).
    pub min_spacing_s: f64,
    /// Tap threshold relative to the strongest tap over all microphones.
    pub threshold: f64,
    /// Microphones that must see a tap for an echo to be solved.
    pub min_mics: usize,
}

impl Default for ChirpOptions {
    fn default() -> Self {
        ChirpOptions {
            min_spacing_s: 1e-3,
            threshold: 0.2,
            min_mics: 2,
        }
    }
}

/// One echo recovered from a chirp recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpPath {
    pub aoa_deg: f64,
    pub delay_s: f64,
    pub amplitude: f64,
    pub mics: usize,
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    mic: usize,
    time: f64,
    amplitude: f64,
}

/// Estimates `(aoa, delay)` of each echo in a recording of a known chirp:
/// regularized deconvolution per microphone, tap picking with band-limited
/// sub-sample refinement, cross-microphone association by delay, and a
/// least-squares fit of the bearing to the pairwise delay differences.
pub fn chirp_ground_truth(
    rec: &MultichannelRecording,
    chirp: &[f64],
    array: &MicArray,
    grid: &AngleGrid,
) -> Result<Vec<ChirpPath>> {
    chirp_ground_truth_with(rec, chirp, array, grid, &ChirpOptions::default())
}

pub fn chirp_ground_truth_with(
    rec: &MultichannelRecording,
    chirp: &[f64],
    array: &MicArray,
    grid: &AngleGrid,
    opts: &ChirpOptions,
) -> Result<Vec<ChirpPath>> {
    if rec.channel_count() != array.len() {
        return Err(Error::DimensionMismatch {
            expected: array.len(),
            found: rec.channel_count(),
        });
    }
    if chirp.is_empty() || chirp.len() > rec.len() {
        return Err(Error::Config(format!(
            "chirp of {} samples does not fit a recording of {}",
            chirp.len(),
            rec.len()
        )));
    }
    let rate = rec.rate();
    let n = (rec.len() + chirp.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut c: Vec<Complex64> = chirp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    c.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut c);
    let cmax = c.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if cmax == 0.0 {
        return Err(Error::Degenerate("chirp is silent".into()));
    }
    let reg = 1e-3 * cmax;

    let mut spectra = Vec::with_capacity(array.len());
    let mut impulses = Vec::with_capacity(array.len());
    for ch in rec.channels() {
        let mut y: Vec<Complex64> = ch.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        y.resize(n, Complex64::new(0.0, 0.0));
        fwd.process(&mut y);
        let h: Vec<Complex64> = y
            .iter()
            .zip(&c)
            .map(|(yk, ck)| yk * ck.conj() / (ck.norm_sqr() + reg))
            .collect();
        let mut t = h.clone();
        inv.process(&mut t);
        impulses.push(t[..rec.len()].iter().map(|z| z.re / n as f64).collect::<Vec<f64>>());
        spectra.push(h);
    }

    let global = impulses
        .iter()
        .flat_map(|h| h.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    if global == 0.0 {
        return Err(Error::Degenerate("no channel taps above threshold".into()));
    }
    let spacing = (opts.min_spacing_s * rate).round().max(1.0) as usize;
    let mut taps = Vec::new();
    for (mic, h) in impulses.iter().enumerate() {
        for idx in pick_taps(h, opts.threshold * global, spacing) {
            let time = refine_tap(&spectra[mic], idx as f64);
            taps.push(Tap {
                mic,
                time: time / rate,
                amplitude: interpolate(&spectra[mic], time).abs(),
            });
        }
    }
    if taps.is_empty() {
        return Err(Error::Degenerate("no channel taps above threshold".into()));
    }

    taps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let window = array.aperture() / array.speed_of_sound() + 2.0 / rate;
    let mut clusters: Vec<Vec<Tap>> = Vec::new();
    for tap in taps {
        match clusters.last_mut() {
            Some(cl) if tap.time - cl[0].time <= window => cl.push(tap),
            _ => clusters.push(vec![tap]),
        }
    }

    let mut out = Vec::new();
    for cluster in clusters {
        let mut per_mic: Vec<Option<Tap>> = vec![None; array.len()];
        for tap in cluster {
            let slot = &mut per_mic[tap.mic];
            if slot.map_or(true, |s| tap.amplitude > s.amplitude) {
                *slot = Some(tap);
            }
        }
        let used: Vec<Tap> = per_mic.into_iter().flatten().collect();
        if used.len() < opts.min_mics.max(2) {
            continue;
        }
        let aoa = fit_bearing(&used, array, grid);
        let delay = used
            .iter()
            .map(|t| t.time - array.relative_delay(t.mic, aoa))
            .sum::<f64>()
            / used.len() as f64;
        let amplitude = used.iter().map(|t| t.amplitude).sum::<f64>() / used.len() as f64;
        out.push(ChirpPath {
            aoa_deg: aoa,
            delay_s: delay,
            amplitude,
            mics: used.len(),
        });
    }
    if out.is_empty() {
        return Err(Error::Degenerate("no echo seen on enough microphones".into()));
    }
    out.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
    Ok(out)
}

fn pick_taps(h: &[f64], threshold: f64, spacing: usize) -> Vec<usize> {
    let mag: Vec<f64> = h.iter().map(|v| v.abs()).collect();
    let mut cands: Vec<usize> = (0..mag.len())
        .filter(|&i| {
            mag[i] >= threshold
                && (i == 0 || mag[i] >= mag[i - 1])
                && (i + 1 == mag.len() || mag[i] >= mag[i + 1])
        })
        .collect();
    cands.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in cands {
        if kept.iter().all(|&k| k.abs_diff(i) >= spacing) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Band-limited value of the impulse response at fractional sample `t`.
fn interpolate(spectrum: &[Complex64], t: f64) -> f64 {
    let n = spectrum.len();
    let step = Complex64::from_polar(1.0, 2.0 * PI * t / n as f64);
    let mut phasor = step;
    let mut acc = spectrum[0].re;
    for k in 1..n / 2 {
        acc += 2.0 * (spectrum[k] * phasor).re;
        phasor *= step;
        if k % 256 == 0 {
            // re-anchor the recurrence
            phasor = Complex64::from_polar(1.0, 2.0 * PI * t * (k + 1) as f64 / n as f64);
        }
    }
    acc += spectrum[n / 2].re * (PI * t).cos();
    acc / n as f64
}

/// Golden-section search for the magnitude peak within one sample of `t0`.
fn refine_tap(spectrum: &[Complex64], t0: f64) -> f64 {
    let f = |t: f64| interpolate(spectrum, t).abs();
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (t0 - 1.0, t0 + 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-4 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bearing minimizing the squared mismatch between measured and modelled
/// pairwise delay differences: grid search, then golden-section refinement
/// within one grid step.
fn fit_bearing(taps: &[Tap], array: &MicArray, grid: &AngleGrid) -> f64 {
    let cost = |theta: f64| -> f64 {
        let mut acc = 0.0;
        for (i, a) in taps.iter().enumerate() {
            for b in &taps[i + 1..] {
                let measured = a.time - b.time;
                let model = array.relative_delay(a.mic, theta) - array.relative_delay(b.mic, theta);
                acc += (measured - model).powi(2);
            }
        }
        acc
    };
    let best = grid
        .angles()
        .iter()
        .copied()
        .min_by(|&x, &y| cost(x).total_cmp(&cost(y)))
        .expect("grid is non-empty");
    let step = grid.resolution();
    let sector = array.sector();
    let (mut lo, mut hi) = (best - step, best + step);
    if !sector.is_full_circle() {
        lo = lo.max(sector.lo);
        hi = hi.min(sector.hi);
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    while hi - lo > 1e-6 {
        if cost(c) < cost(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    let theta = 0.5 * (lo + hi);
    sector.normalize(theta).unwrap_or(best)
}

/// Grid used by chirp ground truth when none is given.
pub fn default_grid(array: &MicArray) -> Result<Arc<AngleGrid>> {
    Ok(Arc::new(AngleGrid::for_array(array, 1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_CIRCULAR_RADIUS;
    use crate::spectrum::angular_distance;
    use approx::assert_abs_diff_eq;

    fn scenario(paths: Vec<PathSpec>, source: SourceKind, snr_db: Option<f64>, seed: u64) -> Scenario {
        Scenario {
            paths,
            source,
            duration: 0.5,
            rate: 16000.0,
            snr_db,
            seed,
        }
    }

    fn power(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn pair_delay_matches_geometry() {
        let arr = MicArray::uniform_linear(2, 0.1).unwrap();
        // θ = 0°: the wave reaches the mic at x = 0.1 first
        let sc = scenario(vec![PathSpec::new(0.0, 0.0, 1.0)], SourceKind::White, None, 1);
        let rec = synthesize(&sc, &arr).unwrap();
        let tdoa: f64 = 0.1 / 343.0;
        assert_abs_diff_eq!(tdoa, 2.915e-4, epsilon = 1e-7);
        let (a, b) = (&rec.channels()[0], &rec.channels()[1]);
        let best = (-10i64..=10)
            .max_by(|&x, &y| xcorr(a, b, x).total_cmp(&xcorr(a, b, y)))
            .unwrap();
        assert_eq!(best, (tdoa * 16000.0).round() as i64);
    }

    /// Σ a[n] b[n - lag]
    fn xcorr(a: &[f64], b: &[f64], lag: i64) -> f64 {
        (0..a.len() as i64)
            .filter(|n| n - lag >= 0 && n - lag < b.len() as i64)
            .map(|n| a[n as usize] * b[(n - lag) as usize])
            .sum()
    }

    #[test]
    fn silent_paths_leave_calibrated_noise() {
        let arr = MicArray::circular(4, 0.05).unwrap();
        let sc = scenario(vec![PathSpec::new(10.0, 0.0, 0.0)], SourceKind::White, Some(6.0), 2);
        let rec = synthesize(&sc, &arr).unwrap();
        let expected = 10f64.powf(-0.6);
        for ch in rec.channels() {
            let p = power(ch);
            assert!((p / expected - 1.0).abs() < 0.05, "{p} vs {expected}");
        }
    }

    #[test]
    fn measured_snr_matches_request() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let paths = vec![PathSpec::new(0.0, 0.002, 1.0), PathSpec::new(120.0, 0.006, 0.5)];
        let clean = synthesize(&scenario(paths.clone(), SourceKind::SpeechLike, None, 3), &arr).unwrap();
        let noisy = synthesize(&scenario(paths, SourceKind::SpeechLike, Some(10.0), 3), &arr).unwrap();
        let sig: f64 = clean.channels().iter().map(|c| power(c)).sum::<f64>() / 6.0;
        let noise: f64 = clean
            .channels()
            .iter()
            .zip(noisy.channels())
            .map(|(c, n)| power(&c.iter().zip(n).map(|(a, b)| b - a).collect::<Vec<_>>()))
            .sum::<f64>()
            / 6.0;
        let snr = 10.0 * (sig / noise).log10();
        assert!((snr - 10.0).abs() <= 0.5, "{snr}");
    }

    #[test]
    fn noise_free_power_adds_over_paths() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let gains = [1.0, 0.7, 0.5];
        let paths = vec![
            PathSpec::new(0.0, 0.003, gains[0]),
            PathSpec::new(100.0, 0.009, gains[1]),
            PathSpec::new(250.0, 0.014, gains[2]),
        ];
        let sc = Scenario {
            duration: 2.0,
            ..scenario(paths, SourceKind::White, None, 4)
        };
        let rec = synthesize(&sc, &arr).unwrap();
        let expected: f64 = gains.iter().map(|g| g * g).sum();
        let got = rec.channels().iter().map(|c| power(c)).sum::<f64>() / 6.0;
        assert!((got / expected - 1.0).abs() < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn delay_beyond_duration_is_rejected() {
        let arr = MicArray::circular(4, 0.05).unwrap();
        let sc = scenario(vec![PathSpec::new(0.0, 0.6, 1.0)], SourceKind::White, None, 1);
        assert!(synthesize(&sc, &arr).is_err());
    }

    #[test]
    fn direct_path_from_room() {
        let room = Room {
            width: 5.0,
            height: 5.0,
            source_pos: [2.0, 3.0],
            array_pos: [2.0, 2.0],
            reflection_coeff: 0.5,
            max_order: 0,
        };
        let paths = image_source_paths(&room).unwrap();
        assert_eq!(paths.len(), 1);
        assert_abs_diff_eq!(paths[0].delay, 1.0 / 343.0, epsilon = 1e-15);
        assert_abs_diff_eq!(paths[0].gain, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(paths[0].aoa, 90.0, epsilon = 1e-12);
    }

    #[test]
    fn first_order_images_in_five_metre_room() {
        let room = Room {
            width: 5.0,
            height: 5.0,
            source_pos: [2.0, 2.0],
            array_pos: [1.0, 2.0],
            reflection_coeff: 0.7,
            max_order: 1,
        };
        let paths = image_source_paths(&room).unwrap();
        assert_eq!(paths.len(), 5);
        assert_abs_diff_eq!(paths[0].aoa, 0.0, epsilon = 1e-12);
        // image across x = 0 sits at (-2, 2): 3 m away, due west
        let west = paths.iter().find(|p| (p.delay - 3.0 / 343.0).abs() < 1e-12).unwrap();
        assert_abs_diff_eq!(west.aoa, 180.0, epsilon = 1e-12);
        assert_abs_diff_eq!(west.gain, 0.7 / 3.0, epsilon = 1e-15);
        assert!(paths.windows(2).all(|w| w[0].delay <= w[1].delay));

        let second = Room { max_order: 2, ..room.clone() };
        assert_eq!(image_source_paths(&second).unwrap().len(), 1 + 4 + 8);
        assert!(image_source_paths(&Room { max_order: 3, ..room.clone() }).is_err());
        assert!(image_source_paths(&Room { source_pos: [1.0, 2.0], ..room }).is_err());
    }

    #[test]
    fn image_delays_grow_with_order_per_wall() {
        let room = Room {
            width: 4.0,
            height: 3.0,
            source_pos: [1.5, 1.0],
            array_pos: [2.5, 2.0],
            reflection_coeff: 0.6,
            max_order: 2,
        };
        let paths = image_source_paths(&room).unwrap();
        let d = |x: f64, y: f64| ((x - 2.5f64).hypot(y - 2.0)) / 343.0;
        let find = |x: f64, y: f64| paths.iter().any(|p| (p.delay - d(x, y)).abs() < 1e-12);
        // x = 0 wall: order 1 at -1.5, order 2 (then x = 4 wall) at 9.5
        assert!(find(-1.5, 1.0) && find(9.5, 1.0));
        assert!(d(-1.5, 1.0) < d(9.5, 1.0));
        assert!(d(6.5, 1.0) < d(-6.5, 1.0));
    }

    #[test]
    fn speech_like_is_correlated_and_reproducible() {
        for seed in 0..5 {
            let x = speech_like_source(1.0, 16000.0, seed);
            assert!(lag1_autocorrelation(&x) >= 0.9);
            assert_abs_diff_eq!(power(&x), 1.0, epsilon = 1e-9);
        }
        assert_eq!(speech_like_source(0.5, 16000.0, 7), speech_like_source(0.5, 16000.0, 7));
        let w = white_source(16000, 1);
        assert!(lag1_autocorrelation(&w).abs() <= 0.05);
    }

    #[test]
    fn scenario_json() {
        let json = r#"{"paths":[{"aoa_deg":30,"delay_s":0.001,"gain":1}],
            "source":"speech_like","duration_s":1.0,"rate_hz":16000,"snr_db":10,"seed":4}"#;
        let sc = Scenario::from_json_str(json).unwrap();
        assert_eq!(sc.source, SourceKind::SpeechLike);
        assert_eq!(sc.paths[0], PathSpec::new(30.0, 0.001, 1.0));
        let again: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(again, sc);

        let room = r#"{"room":{"width_m":5,"height_m":5,"source_pos":[2,2],"array_pos":[1,2],
            "reflection_coeff":0.6,"max_order":1},"source":"wav:voice.wav","duration_s":1,"rate_hz":16000}"#;
        let sc = Scenario::from_json_str(room).unwrap();
        assert_eq!(sc.paths.len(), 5);
        assert_eq!(sc.source, SourceKind::WavFile("voice.wav".into()));
        assert!(Scenario::from_json_str(r#"{"source":"white","duration_s":1,"rate_hz":8000}"#).is_err());
        assert!("pink".parse::<SourceKind>().is_err());
    }

    #[test]
    fn wav_source_is_used() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("src.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for v in white_source(8000, 3) {
            w.write_sample(v as f32 * 0.25).unwrap();
        }
        w.finalize().unwrap();
        let arr = MicArray::circular(4, 0.05).unwrap();
        let sc = scenario(vec![PathSpec::new(45.0, 0.0, 1.0)], SourceKind::WavFile(path), None, 0);
        let rec = synthesize(&sc, &arr).unwrap();
        assert!(power(&rec.channels()[0]) > 0.01);
    }

    #[test]
    fn chirp_single_path() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = AngleGrid::full_circle(1.0).unwrap();
        let truth = PathSpec::new(77.0, 0.0123, 1.0);
        let rec = synthesize(&scenario(vec![truth], SourceKind::Chirp, None, 0), &arr).unwrap();
        let found = chirp_ground_truth(&rec, &default_chirp(16000.0), &arr, &grid).unwrap();
        assert_eq!(found.len(), 1);
        assert!(angular_distance(found[0].aoa_deg, 77.0) <= 2.0, "{:?}", found);
        assert!((found[0].delay_s - truth.delay).abs() * 16000.0 <= 1.0);
    }

    #[test]
    fn chirp_two_paths() {
        let arr = MicArray::circular(6, DEFAULT_CIRCULAR_RADIUS).unwrap();
        let grid = AngleGrid::full_circle(1.0).unwrap();
        let paths = vec![PathSpec::new(20.0, 0.004, 1.0), PathSpec::new(140.0, 0.009, 0.6)];
        let rec = synthesize(&scenario(paths.clone(), SourceKind::Chirp, None, 0), &arr).unwrap();
        let found = chirp_ground_truth(&rec, &default_chirp(16000.0), &arr, &grid).unwrap();
        assert_eq!(found.len(), 2, "{found:?}");
        for (f, p) in found.iter().zip(&paths) {
            assert!(angular_distance(f.aoa_deg, p.aoa) <= 2.0, "{found:?}");
        }
    }

    #[test]
    fn chirp_errors() {
        let arr = MicArray::circular(4, 0.05).unwrap();
        let grid = AngleGrid::full_circle(1.0).unwrap();
        let rec = MultichannelRecording::new(vec![vec![0.0; 100]; 4], 16000.0).unwrap();
        assert!(chirp_ground_truth(&rec, &[1.0; 200], &arr, &grid).is_err());
        assert!(chirp_ground_truth(&rec, &[1.0; 50], &arr, &grid).is_err());
    }
}
