//! Pointwise statistics of cumulative-regret curves across repetitions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

/// Per-episode statistics of `Delta(k)` over runs, with the normalised
/// curve `Delta(k) / V*(s0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub algorithm: String,
    pub v_star: f64,
    pub n_runs: usize,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Standard error of the mean, `sd / sqrt(n)` with the unbiased `sd`.
    pub stderr: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    k: u64,
    mean: f64,
    min: f64,
    max: f64,
    stderr: f64,
    normalized_mean: f64,
    normalized_stderr: f64,
}

impl AggregateSeries {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `mean / V*`; NaN when `V*` is not positive and finite.
    pub fn normalized_mean(&self) -> Vec<f64> {
        self.mean.iter().map(|m| self.normalize(*m)).collect()
    }

    pub fn normalized_stderr(&self) -> Vec<f64> {
        self.stderr.iter().map(|m| self.normalize(*m)).collect()
    }

    fn normalize(&self, x: f64) -> f64 {
        if self.v_star > 0.0 && self.v_star.is_finite() {
            x / self.v_star
        } else {
            f64::NAN
        }
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let (nm, ns) = (self.normalized_mean(), self.normalized_stderr());
        for i in 0..self.len() {
            out.serialize(Row {
                k: i as u64 + 1,
                mean: self.mean[i],
                min: self.min[i],
                max: self.max[i],
                stderr: self.stderr[i],
                normalized_mean: nm[i],
                normalized_stderr: ns[i],
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Pointwise mean, extremes and standard error of equally long runs.
pub fn aggregate(algorithm: &str, v_star: f64, runs: &[Vec<f64>]) -> Result<AggregateSeries> {
    let first = runs
        .first()
        .ok_or_else(|| BenchError::Empty(format!("no runs for {algorithm}")))?;
    let k = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != k) {
        return Err(BenchError::MismatchedLength(k, bad.len()));
    }
    let n = runs.len() as f64;
    let mut out = AggregateSeries {
        algorithm: algorithm.to_string(),
        v_star,
        n_runs: runs.len(),
        mean: Vec::with_capacity(k),
        min: Vec::with_capacity(k),
        max: Vec::with_capacity(k),
        stderr: Vec::with_capacity(k),
    };
    for i in 0..k {
        let col = runs.iter().map(|r| r[i]);
        let mean = col.clone().sum::<f64>() / n;
        let lo = col.clone().fold(f64::INFINITY, f64::min);
        let hi = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let se = if runs.len() > 1 {
            let var = col.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        // Rounding can push the mean a hair outside [min, max].
        out.mean.push(mean.clamp(lo, hi));
        out.min.push(lo);
        out.max.push(hi);
        out.stderr.push(se);
    }
    Ok(out)
}

/// Mean per-episode regret over the first and last windows of a
/// cumulative-regret curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublinearityVerdict {
    pub early_rate: f64,
    pub late_rate: f64,
    /// `late_rate < early_rate`.
    pub sublinear: bool,
}

/// Compares the average increment of `series` over its first
/// `ceil(early_frac K)` and last `ceil(late_frac K)` episodes.
pub fn sublinearity_check(series: &[f64], early_frac: f64, late_frac: f64) -> Result<SublinearityVerdict> {
    for f in [early_frac, late_frac] {
        if !(f > 0.0 && f <= 0.5) {
            return Err(BenchError::Fraction(f));
        }
    }
    if series.is_empty() {
        return Err(BenchError::Empty("empty regret series".into()));
    }
    let k = series.len();
    let at = |i: usize| if i == 0 { 0.0 } else { series[i - 1] };
    let early = ((early_frac * k as f64).ceil() as usize).clamp(1, k);
    let late = ((late_frac * k as f64).ceil() as usize).clamp(1, k);
    let early_rate = (at(early) - at(0)) / early as f64;
    let late_rate = (at(k) - at(k - late)) / late as f64;
    Ok(SublinearityVerdict {
        early_rate,
        late_rate,
        sublinear: late_rate < early_rate,
    })
}

/// Reads the `cum_regret` column of a per-run episode CSV.
pub fn read_regret_series(path: &Path) -> Result<Vec<f64>> {
    read_column(path, "cum_regret")
}

/// Reads one numeric column of a CSV with headers.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| BenchError::Layout {
            path: path.display().to_string(),
            reason: format!("missing column {column}"),
        })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = rec.get(idx).unwrap_or_default();
        let x = field.parse::<f64>().map_err(|e| BenchError::Layout {
            path: path.display().to_string(),
            reason: format!("bad {column} value {field:?}: {e}"),
        })?;
        out.push(x);
    }
    Ok(out)
}
