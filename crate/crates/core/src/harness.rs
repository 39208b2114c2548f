//! Experiment harness: scenario execution, error metrics, SNR and
//! separation sweeps, timing benchmarks and CSV/JSON persistence.
//!
//! Each `cmd_*` function backs one subcommand of the `subaoa` binary and
//! can be called directly. Failures are split into configuration errors
//! (bad or missing inputs, exit code 1) and runtime errors (exit code 2).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{delay_and_sum, gcc_phat, music, peak_pick, DEFAULT_MIN_SEPARATION};
use crate::error::{Error, Result};
use crate::frontend::{load_wav, select_band, stft, write_wav, FrequencyBand, MultichannelRecording, SnapshotTensor, StftConfig, WavFormat};
use crate::geometry::{AngleGrid, MicArray, DEFAULT_CIRCULAR_RADIUS};
use crate::sim::{synthesize, Scenario, SourceKind};
use crate::spectrum::{Algorithm, Spectrum};
use crate::subaoa::{self, SubAoaConfig};

/// Smallest number of repetitions behind a reported median time.
pub const MIN_TIMING_RUNS: usize = 11;

/// Exhaustive matching is used up to this many items per side.
const EXHAUSTIVE_LIMIT: usize = 8;

/// Shortest angular distance between two bearings, in `[0, 180]`.
pub fn circular_error(truth: f64, estimate: f64) -> f64 {
    let d = (truth - estimate).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub truth: f64,
    pub estimate: Option<f64>,
    pub error: f64,
}

/// Pairs each true bearing with at most one estimate so that the summed
/// circular error is minimal; truths left without an estimate score 180.
/// Results follow the order of `truth`.
pub fn match_and_score(truth: &[f64], estimates: &[f64]) -> Vec<Match> {
    let n = truth.len().max(estimates.len());
    let cost = |t: usize, e: usize| -> f64 {
        if e < estimates.len() {
            circular_error(truth[t], estimates[e])
        } else {
            180.0
        }
    };
    let assignment = if n <= EXHAUSTIVE_LIMIT {
        best_permutation(truth.len(), n, cost)
    } else {
        greedy_assignment(truth.len(), n, cost)
    };
    truth
        .iter()
        .zip(assignment)
        .map(|(&t, e)| {
            let estimate = estimates.get(e).copied();
            Match {
                truth: t,
                estimate,
                error: estimate.map_or(180.0, |e| circular_error(t, e)),
            }
        })
        .collect()
}

/// Columns (out of `n`) assigned to rows `0..rows`, trying every
/// permutation in lexicographic order and keeping the first optimum.
fn best_permutation(rows: usize, n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| (0..rows).map(|r| cost(r, p[r])).sum::<f64>();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    while next_permutation(&mut perm) {
        let c = total(&perm);
        if c < best_cost - 1e-12 {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    best.truncate(rows);
    best
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn greedy_assignment(rows: usize, n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = (0..rows)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| (cost(r, c), r, c))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; rows];
    let mut used = vec![false; n];
    for (_, r, c) in pairs {
        if out[r] == usize::MAX && !used[c] {
            out[r] = c;
            used[c] = true;
        }
    }
    out
}

/// One scored path of one algorithm on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub truth_deg: f64,
    pub estimate_deg: Option<f64>,
    pub error_deg: f64,
    pub runtime_ms: Option<f64>,
}

/// Long-format row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub variable_value: f64,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub k: usize,
    pub error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub algorithm: Algorithm,
    #[serde(rename = "M")]
    pub mics: usize,
    #[serde(rename = "T")]
    pub frames: usize,
    #[serde(rename = "K")]
    pub paths: usize,
    pub median_ms: f64,
}

/// Writes records as CSV with a header row, preceded by `# comment`.
pub fn write_records<T: Serialize, W: Write>(out: W, comment: &str, records: &[T]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {comment}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads records written by [`write_records`], skipping `#` lines.
pub fn read_records<T: for<'de> Deserialize<'de>, R: std::io::Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Where a failure happened, which decides the exit code.
#[derive(Debug)]
pub enum CliError {
    Config(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            CliError::Config(e) | CliError::Runtime(e) => e,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

trait Phase<T> {
    fn config(self) -> std::result::Result<T, CliError>;
    fn runtime(self) -> std::result::Result<T, CliError>;
}

impl<T> Phase<T> for Result<T> {
    fn config(self) -> std::result::Result<T, CliError> {
        self.map_err(CliError::Config)
    }
    fn runtime(self) -> std::result::Result<T, CliError> {
        self.map_err(CliError::Runtime)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct CommonArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub algorithms: Option<Vec<Algorithm>>,
}

/// Parses a comma-separated algorithm list such as `subaoa,music`.
pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>> {
    let algs: Vec<Algorithm> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if algs.is_empty() {
        return Err(Error::Config("empty algorithm list".into()));
    }
    Ok(algs)
}

/// Microphone array description inside a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArraySpec {
    Circular {
        count: usize,
        #[serde(default = "default_radius")]
        radius_m: f64,
    },
    Linear {
        count: usize,
        spacing_m: f64,
    },
    /// Path to an array geometry JSON file.
    File(PathBuf),
    /// Array geometry JSON given inline.
    Inline(serde_json::Value),
}

fn default_radius() -> f64 {
    DEFAULT_CIRCULAR_RADIUS
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec::Circular {
            count: 6,
            radius_m: DEFAULT_CIRCULAR_RADIUS,
        }
    }
}

impl ArraySpec {
    pub fn build(&self, base: &Path) -> Result<MicArray> {
        match self {
            ArraySpec::Circular { count, radius_m } => MicArray::circular(*count, *radius_m),
            ArraySpec::Linear { count, spacing_m } => MicArray::uniform_linear(*count, *spacing_m),
            ArraySpec::File(p) => MicArray::from_json_file(base.join(p)),
            ArraySpec::Inline(v) => MicArray::from_json_str(&v.to_string()),
        }
    }
}

/// Input of one run entry: a synthesized scenario, a scenario file, or a
/// recorded WAV with known bearings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Scenario(serde_json::Value),
    ScenarioFile(PathBuf),
    Recording { wav: PathBuf, truth_deg: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    #[serde(flatten)]
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub array: ArraySpec,
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub subaoa: SubAoaConfig,
    #[serde(default)]
    pub stft: StftConfig,
    /// Paths to report per scenario; defaults to the number of true paths.
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default = "default_separation")]
    pub min_separation_deg: f64,
    #[serde(default = "yes")]
    pub write_spectra: bool,
    /// Fill `runtime_ms`; off by default so result files are reproducible.
    #[serde(default)]
    pub record_runtime: bool,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_separation() -> f64 {
    DEFAULT_MIN_SEPARATION
}

fn yes() -> bool {
    true
}

/// Estimation settings shared by all algorithms in one experiment.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub array: MicArray,
    pub grid: Arc<AngleGrid>,
    pub stft: StftConfig,
    pub band: FrequencyBand,
    pub subaoa: SubAoaConfig,
    pub min_separation_deg: f64,
}

/// Bearings and spectra produced by one algorithm on one recording.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub algorithm: Algorithm,
    pub angles: Vec<f64>,
    /// One spectrum per SubAoA iteration; a single spectrum otherwise.
    pub spectra: Vec<Spectrum>,
    pub runtime_ms: f64,
}

impl Pipeline {
    pub fn new(array: MicArray, stft: StftConfig, subaoa: SubAoaConfig, min_separation_deg: f64) -> Result<Self> {
        stft.validate()?;
        let grid = Arc::new(AngleGrid::for_array(&array, subaoa.resolution_deg)?);
        let band = subaoa.band.unwrap_or_default();
        if !(min_separation_deg.is_finite() && min_separation_deg >= 0.0) {
            return Err(Error::Config(format!("invalid min separation {min_separation_deg}")));
        }
        Ok(Pipeline {
            array,
            grid,
            stft,
            band,
            subaoa: SubAoaConfig { band: None, ..subaoa },
            min_separation_deg,
        })
    }

    /// STFT and band selection.
    pub fn tensor(&self, rec: &MultichannelRecording) -> Result<SnapshotTensor> {
        if rec.channel_count() != self.array.len() {
            return Err(Error::DimensionMismatch {
                expected: self.array.len(),
                found: rec.channel_count(),
            });
        }
        select_band(&stft(rec, &self.stft)?, &self.band)
    }

    /// Runs one algorithm on a prepared tensor, reporting `paths` bearings.
    pub fn estimate(&self, tensor: &SnapshotTensor, algorithm: Algorithm, paths: usize) -> Result<Estimate> {
        let start = Instant::now();
        let (angles, spectra) = match algorithm {
            Algorithm::SubAoa => {
                let cfg = SubAoaConfig {
                    max_paths: paths,
                    ..self.subaoa.clone()
                };
                let out = subaoa::run_on_grid(tensor, &self.array, &self.grid, &cfg)?;
                let angles = out.angles();
                (angles, out.detections.into_iter().map(|d| d.spectrum).collect())
            }
            other => {
                let s = match other {
                    Algorithm::Music => music(tensor, &self.array, &self.grid, self.signal_dim(paths)?)?,
                    Algorithm::GccPhat => gcc_phat(tensor, &self.array, &self.grid)?,
                    _ => delay_and_sum(tensor, &self.array, &self.grid)?,
                };
                let peaks = peak_pick(&s, paths, self.min_separation_deg);
                (peaks.angles, vec![s])
            }
        };
        Ok(Estimate {
            algorithm,
            angles,
            spectra,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn signal_dim(&self, paths: usize) -> Result<usize> {
        let d = self.subaoa.signal_dim_per_bin.unwrap_or(paths);
        if d == 0 || d >= self.array.len() {
            return Err(Error::Config(format!(
                "signal dimension {d} needs 1..{} for {} microphones",
                self.array.len(),
                self.array.len()
            )));
        }
        Ok(d)
    }
}

/// A scenario ready to run: recording plus true bearings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub truth: Vec<f64>,
    pub recording: MultichannelRecording,
}

fn read_json(path: &Path) -> Result<(serde_json::Value, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let v = serde_json::from_slice(&bytes)?;
    Ok((v, bytes))
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn provenance(bytes: &[u8], seed: Option<u64>) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    match seed {
        Some(s) => format!("config_sha256={hex}, seed={s}"),
        None => format!("config_sha256={hex}, seed=config"),
    }
}

/// Makes a relative `wav:` source path relative to the config file.
fn resolve_source(mut sc: Scenario, base: &Path) -> Scenario {
    if let SourceKind::WavFile(p) = &sc.source {
        if p.is_relative() {
            sc.source = SourceKind::WavFile(base.join(p));
        }
    }
    sc
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::Config(format!("scenario id {id:?} must be non-empty [A-Za-z0-9_-]")));
    }
    Ok(())
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config(Error::Config("--jobs must be at least 1".into())));
        }
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| CliError::Runtime(Error::Degenerate(format!("thread pool: {e}"))))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn create_file(path: &Path) -> CliResult<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::Runtime(Error::io(path, e)))
}

/// Loaded run configuration with everything resolved relative to its file.
struct LoadedRun {
    cfg: RunConfig,
    pipeline: Pipeline,
    scenarios: Vec<(String, Source, Option<Scenario>)>,
    base: PathBuf,
    provenance: String,
}

fn load_run(args: &CommonArgs) -> Result<LoadedRun> {
    let (value, bytes) = read_json(&args.config)?;
    let mut cfg: RunConfig = serde_json::from_value(value)?;
    if let Some(a) = &args.algorithms {
        cfg.algorithms = a.clone();
    }
    if cfg.algorithms.is_empty() {
        return Err(Error::Config("no algorithms selected".into()));
    }
    if cfg.scenarios.is_empty() {
        return Err(Error::Config("no scenarios given".into()));
    }
    let base = base_dir(&args.config);
    let array = cfg.array.build(&base)?;
    let pipeline = Pipeline::new(array, cfg.stft, cfg.subaoa.clone(), cfg.min_separation_deg)?;
    let mut scenarios = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, entry) in cfg.scenarios.iter().enumerate() {
        check_id(&entry.id)?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::Config(format!("duplicate scenario id {:?}", entry.id)));
        }
        let scenario = match &entry.source {
            Source::Scenario(v) => Some(Scenario::from_json_value(v.clone())?),
            Source::ScenarioFile(p) => Some(Scenario::from_json_value(read_json(&base.join(p))?.0)?),
            Source::Recording { wav, truth_deg } => {
                if truth_deg.is_empty() {
                    return Err(Error::Config(format!("{}: empty truth_deg", entry.id)));
                }
                let path = base.join(wav);
                if !path.is_file() {
                    return Err(Error::Config(format!("recording {} not found", path.display())));
                }
                None
            }
        };
        let scenario = scenario.map(|s| resolve_source(s, &base)).map(|mut s| {
            if let Some(seed) = args.seed {
                s.seed = seed.wrapping_add(i as u64);
            }
            s
        });
        scenarios.push((entry.id.clone(), entry.source.clone(), scenario));
    }
    for (id, source, sc) in &scenarios {
        let truth = match (source, sc) {
            (_, Some(s)) => s.paths.len(),
            (Source::Recording { truth_deg, .. }, None) => truth_deg.len(),
            _ => 0,
        };
        let k = cfg.paths.unwrap_or(truth);
        if cfg.algorithms.contains(&Algorithm::SubAoa) || cfg.algorithms.contains(&Algorithm::Music) {
            if k == 0 || k >= pipeline.array.len() {
                return Err(Error::Config(format!(
                    "{id}: {k} paths cannot be resolved with {} microphones",
                    pipeline.array.len()
                )));
            }
        }
    }
    Ok(LoadedRun {
        provenance: provenance(&bytes, args.seed),
        cfg,
        pipeline,
        scenarios,
        base,
    })
}

fn prepare(run: &LoadedRun, idx: usize) -> Result<Prepared> {
    let (id, source, scenario) = &run.scenarios[idx];
    let (truth, recording) = match (source, scenario) {
        (_, Some(sc)) => (sc.truth_angles(), synthesize(sc, &run.pipeline.array)?),
        (Source::Recording { wav, truth_deg }, None) => (truth_deg.clone(), load_wav(run.base.join(wav))?),
        _ => unreachable!("scenario sources are parsed at load time"),
    };
    Ok(Prepared {
        id: id.clone(),
        truth,
        recording,
    })
}

struct ScenarioOutput {
    records: Vec<ResultRecord>,
    estimates: Vec<Estimate>,
}

fn run_scenario(run: &LoadedRun, idx: usize) -> Result<(String, ScenarioOutput)> {
    let p = prepare(run, idx)?;
    let tensor = run.pipeline.tensor(&p.recording)?;
    let k = run.cfg.paths.unwrap_or(p.truth.len());
    let mut records = Vec::new();
    let mut estimates = Vec::new();
    for &alg in &run.cfg.algorithms {
        let est = run.pipeline.estimate(&tensor, alg, k)?;
        for (i, m) in match_and_score(&p.truth, &est.angles).into_iter().enumerate() {
            records.push(ResultRecord {
                scenario_id: p.id.clone(),
                algorithm: alg,
                k: i,
                truth_deg: m.truth,
                estimate_deg: m.estimate,
                error_deg: m.error,
                runtime_ms: run.cfg.record_runtime.then_some(est.runtime_ms),
            });
        }
        estimates.push(est);
    }
    Ok((p.id, ScenarioOutput { records, estimates }))
}

fn write_spectra(dir: &Path, id: &str, estimates: &[Estimate], comment: &str) -> CliResult<()> {
    let dir = dir.join("spectra").join(id);
    create_dir(&dir)?;
    for est in estimates {
        for (i, s) in est.spectra.iter().enumerate() {
            let name = if est.algorithm == Algorithm::SubAoa {
                format!("{}_k{i}.csv", est.algorithm)
            } else {
                format!("{}.csv", est.algorithm)
            };
            let f = create_file(&dir.join(name))?;
            s.write_csv(f, Some(comment)).runtime()?;
        }
    }
    Ok(())
}

/// Runs every scenario through every algorithm, writing `results.csv` and
/// (unless disabled) per-iteration spectra under `spectra/<id>/`.
pub fn cmd_run(args: &CommonArgs) -> CliResult<Vec<ResultRecord>> {
    let run = load_run(args).config()?;
    let pool = thread_pool(args.jobs)?;
    let outputs: Vec<Result<(String, ScenarioOutput)>> =
        pool.install(|| (0..run.scenarios.len()).into_par_iter().map(|i| run_scenario(&run, i)).collect());
    create_dir(&args.out)?;
    let mut records = Vec::new();
    for out in outputs {
        let (id, out) = out.runtime()?;
        if run.cfg.write_spectra {
            write_spectra(&args.out, &id, &out.estimates, &run.provenance)?;
        }
        records.extend(out.records);
    }
    let f = create_file(&args.out.join("results.csv"))?;
    write_records(f, &run.provenance, &records).runtime()?;
    Ok(records)
}

/// Writes only the spectra of a run configuration.
pub fn cmd_spectrum(args: &CommonArgs) -> CliResult<usize> {
    let run = load_run(args).config()?;
    let pool = thread_pool(args.jobs)?;
    let outputs: Vec<Result<(String, ScenarioOutput)>> =
        pool.install(|| (0..run.scenarios.len()).into_par_iter().map(|i| run_scenario(&run, i)).collect());
    create_dir(&args.out)?;
    let mut written = 0;
    for out in outputs {
        let (id, out) = out.runtime()?;
        write_spectra(&args.out, &id, &out.estimates, &run.provenance)?;
        written += out.estimates.iter().map(|e| e.spectra.len()).sum::<usize>();
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    /// Bearing of path 1 relative to path 0, in degrees.
    AngularSeparation,
    /// Recording duration in seconds.
    SignalLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials_per_value: usize,
    pub base_scenario: serde_json::Value,
    #[serde(default)]
    pub array: ArraySpec,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub subaoa: SubAoaConfig,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default = "default_separation")]
    pub min_separation_deg: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_value == 0 {
            return Err(Error::Config("trials_per_value must be at least 1".into()));
        }
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite and non-empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        Ok(())
    }

    /// The base scenario with the swept variable set and the trial's seed.
    pub fn cell(&self, base: &Scenario, value: f64, seed: u64) -> Result<Scenario> {
        let mut sc = base.clone();
        sc.seed = seed;
        match self.variable {
            SweepVariable::SnrDb => sc.snr_db = Some(value),
            SweepVariable::AngularSeparation => {
                if sc.paths.len() < 2 {
                    return Err(Error::Config("separation sweep needs two paths".into()));
                }
                sc.paths[1].aoa = (sc.paths[0].aoa + value).rem_euclid(360.0);
            }
            SweepVariable::SignalLength => sc.duration = value,
        }
        sc.validate()?;
        Ok(sc)
    }
}

/// Runs every (value, trial) cell of a sweep. Trial `t` of every value
/// uses seed `base + t`, where the base comes from `--seed` or the base
/// scenario.
pub fn cmd_sweep(args: &CommonArgs) -> CliResult<Vec<SweepRecord>> {
    let (value, bytes) = read_json(&args.config).config()?;
    let mut spec: SweepSpec = serde_json::from_value(value).map_err(Error::from).config()?;
    if let Some(a) = &args.algorithms {
        spec.algorithms = a.clone();
    }
    spec.validate().config()?;
    let dir = base_dir(&args.config);
    let base = resolve_source(Scenario::from_json_value(spec.base_scenario.clone()).config()?, &dir);
    let base_seed = args.seed.unwrap_or(base.seed);
    let pipeline = Pipeline::new(
        spec.array.build(&dir).config()?,
        spec.stft,
        spec.subaoa.clone(),
        spec.min_separation_deg,
    )
    .config()?;
    let mut cells = Vec::new();
    for &v in &spec.values {
        for t in 0..spec.trials_per_value {
            cells.push((v, t, spec.cell(&base, v, base_seed.wrapping_add(t as u64)).config()?));
        }
    }
    let k = spec.paths.unwrap_or(base.paths.len());
    pipeline.signal_dim(k).config()?;

    let pool = thread_pool(args.jobs)?;
    let rows: Vec<Result<Vec<SweepRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(v, t, sc)| {
                let rec = synthesize(sc, &pipeline.array)?;
                let tensor = pipeline.tensor(&rec)?;
                let mut rows = Vec::new();
                for &alg in &spec.algorithms {
                    let est = pipeline.estimate(&tensor, alg, k)?;
                    for (i, m) in match_and_score(&sc.truth_angles(), &est.angles).into_iter().enumerate() {
                        rows.push(SweepRecord {
                            variable_value: *v,
                            trial: *t,
                            algorithm: alg,
                            k: i,
                            error_deg: m.error,
                        });
                    }
                }
                Ok(rows)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in rows {
        records.extend(r.runtime()?);
    }
    create_dir(&args.out)?;
    let f = create_file(&args.out.join("sweep.csv"))?;
    write_records(f, &provenance(&bytes, args.seed), &records).runtime()?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Microphone counts; each uses a circular array of `radius_m`.
    #[serde(default = "default_mics")]
    pub mics: Vec<usize>,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default = "default_durations")]
    pub durations_s: Vec<f64>,
    #[serde(default = "default_bench_paths")]
    pub paths: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Source and propagation; `duration_s` is overridden per cell.
    pub scenario: serde_json::Value,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub subaoa: SubAoaConfig,
    #[serde(default)]
    pub stft: StftConfig,
}

fn default_mics() -> Vec<usize> {
    vec![6]
}

fn default_durations() -> Vec<f64> {
    vec![1.0, 2.0]
}

fn default_bench_paths() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_runs() -> usize {
    MIN_TIMING_RUNS
}

/// Median wall time in milliseconds of `runs` calls of `f` after one
/// warm-up call.
pub fn median_ms<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    Ok(if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    })
}

/// Times each algorithm over the (M, duration, K) grid of the config,
/// sequentially, writing `timing.csv`.
pub fn cmd_bench(args: &CommonArgs) -> CliResult<Vec<TimingRecord>> {
    let (value, bytes) = read_json(&args.config).config()?;
    let mut cfg: BenchConfig = serde_json::from_value(value).map_err(Error::from).config()?;
    if let Some(a) = &args.algorithms {
        cfg.algorithms = a.clone();
    }
    if cfg.algorithms.is_empty() || cfg.mics.is_empty() || cfg.durations_s.is_empty() || cfg.paths.is_empty() {
        return Err(CliError::Config(Error::Config("bench grid has an empty axis".into())));
    }
    let runs = cfg.runs.max(MIN_TIMING_RUNS);
    let base = resolve_source(
        Scenario::from_json_value(cfg.scenario.clone()).config()?,
        &base_dir(&args.config),
    );
    let mut cells = Vec::new();
    for &m in &cfg.mics {
        let array = MicArray::circular(m, cfg.radius_m).config()?;
        let pipeline = Pipeline::new(array, cfg.stft, cfg.subaoa.clone(), DEFAULT_MIN_SEPARATION).config()?;
        for &k in &cfg.paths {
            pipeline.signal_dim(k).config()?;
        }
        for &d in &cfg.durations_s {
            let mut sc = base.clone();
            sc.duration = d;
            if let Some(s) = args.seed {
                sc.seed = s;
            }
            sc.validate().config()?;
            cells.push((pipeline.clone(), sc));
        }
    }

    let mut records = Vec::new();
    for (pipeline, sc) in &cells {
        let rec = synthesize(sc, &pipeline.array).runtime()?;
        let tensor = pipeline.tensor(&rec).runtime()?;
        for &k in &cfg.paths {
            for &alg in &cfg.algorithms {
                let ms = median_ms(runs, || pipeline.estimate(&tensor, alg, k)).runtime()?;
                records.push(TimingRecord {
                    algorithm: alg,
                    mics: pipeline.array.len(),
                    frames: tensor.frames(),
                    paths: k,
                    median_ms: ms,
                });
            }
        }
    }
    create_dir(&args.out)?;
    let f = create_file(&args.out.join("timing.csv"))?;
    write_records(f, &provenance(&bytes, args.seed), &records).runtime()?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(default)]
    pub array: ArraySpec,
    pub scenario: serde_json::Value,
    #[serde(default)]
    pub pcm16: bool,
}

/// Truth sidecar written next to a simulated recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub scenario: Scenario,
    pub array: serde_json::Value,
    pub wav: String,
}

/// Renders a scenario to `recording.wav` plus `truth.json`. The config is
/// either `{"array":…, "scenario":…}` or a bare scenario document.
pub fn cmd_simulate(args: &CommonArgs) -> CliResult<Truth> {
    let (value, _) = read_json(&args.config).config()?;
    let cfg: SimulateConfig = if value.get("scenario").is_some() {
        serde_json::from_value(value).map_err(Error::from).config()?
    } else {
        SimulateConfig {
            array: ArraySpec::default(),
            scenario: value,
            pcm16: false,
        }
    };
    let dir = base_dir(&args.config);
    let array = cfg.array.build(&dir).config()?;
    let mut sc = resolve_source(Scenario::from_json_value(cfg.scenario).config()?, &dir);
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    let rec = synthesize(&sc, &array).runtime()?;
    create_dir(&args.out)?;
    let wav = args.out.join("recording.wav");
    let format = if cfg.pcm16 { WavFormat::Pcm16 } else { WavFormat::Float32 };
    write_wav(&rec, &wav, format).runtime()?;
    let truth = Truth {
        scenario: sc,
        array: serde_json::from_str(&array.to_json_string()).expect("array JSON parses"),
        wav: "recording.wav".into(),
    };
    let path = args.out.join("truth.json");
    let mut f = create_file(&path)?;
    serde_json::to_writer_pretty(&mut f, &truth).map_err(Error::from).runtime()?;
    f.flush().map_err(|e| CliError::Runtime(Error::io(&path, e)))?;
    Ok(truth)
}
