//! Cache-boundary detection on a latency curve.
//!
//! The curve is differentiated window by window, the three largest slopes are
//! taken as the L1/L2/L3 boundaries and each is scored by its share of the
//! summed slope. Capacities are then reported defensively: the size just
//! before each jump, i.e. the largest working set still seen to fit.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::probe::{LatencyData, PatternKind};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("sizes must strictly increase (index {0})")]
    Unsorted(usize),
    #[error("invalid sample at index {0}: size must be positive and latency positive and finite")]
    InvalidSample(usize),
    #[error("latency curve is flat: no boundary to detect")]
    FlatCurve,
    #[error("selected peak at {size} bytes has a negative slope; smooth the curve and retry")]
    NegativePeak { size: usize },
    #[error("peak {size} bytes is not a sample of the curve")]
    UnknownPeak { size: usize },
    #[error("cyclic peaks {cyclic:?} and sawtooth peaks {sawtooth:?} overlap across levels")]
    Conflict {
        cyclic: (usize, usize, usize),
        sawtooth: (usize, usize, usize),
    },
}

/// Slope of the latency curve over one window, tagged with the window's
/// right-hand size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativePoint {
    pub size: usize,
    /// ns per byte.
    pub deriv: f64,
}

fn check_curve(data: &[LatencyData]) -> Result<(), AnalysisError> {
    for (i, d) in data.iter().enumerate() {
        if !d.is_valid() {
            return Err(AnalysisError::InvalidSample(i));
        }
    }
    for (i, w) in data.windows(2).enumerate() {
        if w[1].size <= w[0].size {
            return Err(AnalysisError::Unsorted(i + 1));
        }
    }
    Ok(())
}

/// `(t[i+1] - t[i]) / (s[i+1] - s[i])` for every adjacent pair. Windows with a
/// non-finite slope are dropped.
pub fn differentiate(data: &[LatencyData]) -> Result<Vec<DerivativePoint>, AnalysisError> {
    if data.len() < 2 {
        return Err(AnalysisError::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    check_curve(data)?;
    Ok(data
        .windows(2)
        .filter_map(|w| {
            let dsize = (w[1].size - w[0].size) as f64;
            let dtime = w[1].avg_time - w[0].avg_time;
            let deriv = dtime / dsize;
            deriv.is_finite().then_some(DerivativePoint { size: w[1].size, deriv })
        })
        .collect())
}

/// Each slope's share of the three-slope total.
pub fn confidence_scores(selected: &[DerivativePoint; 3]) -> Result<[f64; 3], AnalysisError> {
    if let Some(p) = selected.iter().find(|p| p.deriv < 0.0) {
        return Err(AnalysisError::NegativePeak { size: p.size });
    }
    let total: f64 = selected.iter().map(|p| p.deriv).sum();
    if total <= 0.0 {
        return Err(AnalysisError::FlatCurve);
    }
    Ok([
        selected[0].deriv / total,
        selected[1].deriv / total,
        selected[2].deriv / total,
    ])
}

/// Detected boundaries: three peak sizes ascending, with matching scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundaries {
    pub peaks: [DerivativePoint; 3],
    pub confidences: [f64; 3],
}

impl Boundaries {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.peaks[0].size, self.peaks[1].size, self.peaks[2].size)
    }
}

/// Picks the three steepest windows and returns them by ascending size.
///
/// Ranking is a stable descending sort on slope, so equal slopes keep the
/// smaller size first.
pub fn find_boundaries(data: &[LatencyData]) -> Result<Boundaries, AnalysisError> {
    if data.len() < 4 {
        return Err(AnalysisError::TooFewPoints {
            needed: 4,
            got: data.len(),
        });
    }
    let mut diffs = differentiate(data)?;
    if diffs.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            needed: 4,
            got: diffs.len() + 1,
        });
    }
    if diffs.iter().all(|d| d.deriv == 0.0) {
        return Err(AnalysisError::FlatCurve);
    }
    diffs.sort_by(|a, b| b.deriv.total_cmp(&a.deriv));
    let mut peaks = [diffs[0], diffs[1], diffs[2]];
    peaks.sort_by_key(|p| p.size);
    let confidences = confidence_scores(&peaks)?;
    Ok(Boundaries { peaks, confidences })
}

/// Three-point running median of latency; the end points are kept.
pub fn median3(data: &[LatencyData]) -> Vec<LatencyData> {
    let mut out: Vec<LatencyData> = data.to_vec();
    for i in 1..data.len().saturating_sub(1) {
        let mut t = [data[i - 1].avg_time, data[i].avg_time, data[i + 1].avg_time];
        t.sort_by(f64::total_cmp);
        out[i].avg_time = t[1];
    }
    out
}

/// Full sweep for one pattern together with its detected boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternResults {
    pub pattern: PatternKind,
    pub peaks: (usize, usize, usize),
    pub confidences: (f64, f64, f64),
    pub data: Vec<LatencyData>,
}

impl PatternResults {
    /// Runs boundary detection on `data`, optionally on a median-smoothed
    /// copy. `data` is stored unsmoothed.
    pub fn analyze(pattern: PatternKind, data: Vec<LatencyData>, smooth: bool) -> Result<Self, AnalysisError> {
        let b = if smooth {
            find_boundaries(&median3(&data))?
        } else {
            find_boundaries(&data)?
        };
        let c = b.confidences;
        Ok(PatternResults {
            pattern,
            peaks: b.sizes(),
            confidences: (c[0], c[1], c[2]),
            data,
        })
    }

    fn peak_array(&self) -> [usize; 3] {
        [self.peaks.0, self.peaks.1, self.peaks.2]
    }

    /// Size sampled immediately before each peak.
    pub fn defensive_estimates(&self) -> Result<[usize; 3], AnalysisError> {
        let mut out = [0usize; 3];
        for (slot, &peak) in out.iter_mut().zip(self.peak_array().iter()) {
            let idx = self
                .data
                .iter()
                .position(|d| d.size == peak)
                .filter(|&i| i > 0)
                .ok_or(AnalysisError::UnknownPeak { size: peak })?;
            *slot = self.data[idx - 1].size;
        }
        Ok(out)
    }
}

/// Per-level capacity estimates for one machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheProfile {
    pub l1_bytes: usize,
    pub l2_bytes: usize,
    pub l3_bytes: usize,
    pub confidences: [f64; 3],
    pub source_pattern: PatternKind,
    /// Seconds since the Unix epoch; 0 when unknown.
    pub created_at: u64,
    pub host_label: String,
}

impl CacheProfile {
    pub fn capacities(&self) -> [usize; 3] {
        [self.l1_bytes, self.l2_bytes, self.l3_bytes]
    }

    /// Capacity of level 1, 2 or 3.
    pub fn level(&self, level: usize) -> Option<usize> {
        self.capacities().get(level.checked_sub(1)?).copied()
    }

    pub fn is_ordered(&self) -> bool {
        self.l1_bytes > 0 && self.l1_bytes < self.l2_bytes && self.l2_bytes < self.l3_bytes
    }

    pub fn with_metadata(mut self, created_at: u64, host_label: impl Into<String>) -> Self {
        self.created_at = created_at;
        self.host_label = host_label.into();
        self
    }
}

/// Merges both patterns into one profile.
///
/// Each level takes the smaller of the two defensive estimates, and scores are
/// averaged. If the two patterns' level ranges interleave the merge is refused.
/// `source_pattern` records which pattern supplied the L1 estimate.
pub fn build_profile(cyclic: &PatternResults, sawtooth: &PatternResults) -> Result<CacheProfile, AnalysisError> {
    let c = cyclic.defensive_estimates()?;
    let s = sawtooth.defensive_estimates()?;
    for i in 0..2 {
        let hi = c[i].max(s[i]);
        let lo_next = c[i + 1].min(s[i + 1]);
        if hi >= lo_next {
            return Err(AnalysisError::Conflict {
                cyclic: cyclic.peaks,
                sawtooth: sawtooth.peaks,
            });
        }
    }
    let cc = [cyclic.confidences.0, cyclic.confidences.1, cyclic.confidences.2];
    let sc = [sawtooth.confidences.0, sawtooth.confidences.1, sawtooth.confidences.2];
    let confidences = [(cc[0] + sc[0]) / 2.0, (cc[1] + sc[1]) / 2.0, (cc[2] + sc[2]) / 2.0];
    Ok(CacheProfile {
        l1_bytes: c[0].min(s[0]),
        l2_bytes: c[1].min(s[1]),
        l3_bytes: c[2].min(s[2]),
        confidences,
        source_pattern: if s[0] < c[0] {
            PatternKind::Sawtooth
        } else {
            PatternKind::Cyclic
        },
        created_at: 0,
        host_label: String::new(),
    })
}
