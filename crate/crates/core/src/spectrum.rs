//! Angular spectra, greedy peak picking and peak prominence.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "subaoa")]
    SubAoa,
    Music,
    #[serde(rename = "gcc")]
    GccPhat,
    #[serde(rename = "das")]
    DelayAndSum,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::SubAoa,
        Algorithm::Music,
        Algorithm::GccPhat,
        Algorithm::DelayAndSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SubAoa => "subaoa",
            Algorithm::Music => "music",
            Algorithm::GccPhat => "gcc",
            Algorithm::DelayAndSum => "das",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "subaoa" => Ok(Algorithm::SubAoa),
            "music" => Ok(Algorithm::Music),
            "gcc" | "gcc_phat" | "gcc-phat" => Ok(Algorithm::GccPhat),
            "das" | "delay_and_sum" => Ok(Algorithm::DelayAndSum),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Real score per candidate angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Arc<AngleGrid>,
    pub scores: Vec<f64>,
    pub algorithm: Algorithm,
}

impl Spectrum {
    pub fn new(grid: Arc<AngleGrid>, scores: Vec<f64>, algorithm: Algorithm) -> Result<Self> {
        if scores.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Spectrum {
            grid,
            scores,
            algorithm,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the largest score; ties go to the lower angle.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak_angle(&self) -> f64 {
        self.grid.angles()[self.argmax()]
    }

    pub fn score_at(&self, angle: f64) -> f64 {
        self.scores[self.grid.nearest_index(angle)]
    }

    /// Indices of local maxima. A flat run of equal scores counts once, at
    /// its middle, and only if both neighbours of the run are lower.
    pub fn local_maxima(&self) -> Vec<usize> {
        let n = self.len();
        let v = &self.scores;
        let mut out = Vec::new();
        if self.grid.is_circular() {
            let Some(start) = (0..n).find(|&i| v[i] != v[(i + n - 1) % n]) else {
                return vec![0];
            };
            let mut k = 0;
            while k < n {
                let a = (start + k) % n;
                let mut len = 1;
                while len < n && v[(a + len) % n] == v[a] {
                    len += 1;
                }
                let left = v[(a + n - 1) % n];
                let right = v[(a + len) % n];
                if left < v[a] && right < v[a] {
                    out.push((a + (len - 1) / 2) % n);
                }
                k += len;
            }
            out.sort_unstable();
        } else {
            let mut a = 0;
            while a < n {
                let mut b = a;
                while b + 1 < n && v[b + 1] == v[a] {
                    b += 1;
                }
                let left_ok = a == 0 || v[a - 1] < v[a];
                let right_ok = b + 1 == n || v[b + 1] < v[a];
                if left_ok && right_ok {
                    out.push((a + b) / 2);
                }
                a = b + 1;
            }
        }
        out
    }

    /// Height of the peak at `i` above the higher of the two bases found by
    /// walking left and right until a strictly higher sample (or the end of
    /// the spectrum; once round the circle for circular grids).
    pub fn prominence(&self, i: usize) -> f64 {
        let n = self.len();
        let h = self.scores[i];
        let circular = self.grid.is_circular();
        let walk = |step: isize| -> f64 {
            let mut lowest = h;
            let mut j = i as isize;
            for _ in 1..n {
                j += step;
                if circular {
                    j = j.rem_euclid(n as isize);
                } else if j < 0 || j >= n as isize {
                    break;
                }
                let s = self.scores[j as usize];
                if s > h {
                    break;
                }
                lowest = lowest.min(s);
            }
            lowest
        };
        h - walk(-1).max(walk(1))
    }

    /// Prominence of the highest local maximum within `window` degrees of
    /// `angle`, or 0 when there is none.
    pub fn prominence_near(&self, angle: f64, window: f64) -> f64 {
        self.local_maxima()
            .into_iter()
            .filter(|&i| angular_distance(self.grid.angles()[i], angle) <= window + 1e-9)
            .max_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(b.cmp(&a)))
            .map_or(0.0, |i| self.prominence(i))
    }

    /// Two-column CSV (`angle_deg,likelihood`).
    pub fn write_csv<W: Write>(&self, out: W, comment: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(c) = comment {
            writeln!(out, "# {c}").map_err(|e| Error::io("<spectrum>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["angle_deg", "likelihood"])?;
        for (a, s) in self.grid.angles().iter().zip(&self.scores) {
            w.write_record([a.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<spectrum>", e))?;
        Ok(())
    }
}

/// Shortest angular distance in degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub angles: Vec<f64>,
    pub scores: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

pub const DEFAULT_MIN_SEPARATION: f64 = 10.0;

/// Greedy top-`k` local maxima, highest first, each at least
/// `min_separation` degrees from those already taken. Equal scores are
/// taken in ascending angle order.
pub fn peak_pick(s: &Spectrum, k: usize, min_separation: f64) -> PeakSet {
    let mut cands = s.local_maxima();
    cands.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]).then(a.cmp(&b)));
    let mut out = PeakSet::default();
    for i in cands {
        if out.len() >= k {
            break;
        }
        let angle = s.grid.angles()[i];
        if out
            .angles
            .iter()
            .all(|&a| angular_distance(a, angle) >= min_separation)
        {
            out.angles.push(angle);
            out.scores.push(s.scores[i]);
        }
    }
    out
}
