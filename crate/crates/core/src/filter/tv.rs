//! Total-variation series, their export, and decay-rate fits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linear_fit;

/// The norm reported everywhere: `sup_A |phi(A) - phi'(A)|`, i.e. half the L1 distance.
pub const TV_CONVENTION: &str = "sup_A |phi(A) - phi'(A)| (half L1)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvPoint {
    pub n: usize,
    pub log_tv: f64,
    pub bound_log: Option<f64>,
}

impl TvPoint {
    pub fn tv(&self) -> f64 {
        self.log_tv.exp().clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub seed: u64,
    pub model_id: String,
    pub priors: Vec<String>,
    pub representation: String,
    pub tv_convention: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TvSeries {
    pub points: Vec<TvPoint>,
    pub meta: SeriesMeta,
}

impl TvSeries {
    pub fn new(meta: SeriesMeta) -> Self {
        TvSeries { points: Vec::new(), meta: SeriesMeta { tv_convention: TV_CONVENTION.into(), ..meta } }
    }

    pub fn from_log_tv(log_tv: &[f64]) -> Self {
        let mut s = TvSeries::new(SeriesMeta::default());
        for (n, &l) in log_tv.iter().enumerate() {
            s.push(n, l, None);
        }
        s
    }

    pub fn push(&mut self, n: usize, log_tv: f64, bound_log: Option<f64>) {
        self.points.push(TvPoint { n, log_tv: log_tv.min(0.0), bound_log });
    }

    pub fn tvs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tv()).collect()
    }

    /// `n,tv,log_tv[,bound_log]`; the bound column appears when any point carries one.
    pub fn to_csv(&self) -> String {
        let with_bound = self.points.iter().any(|p| p.bound_log.is_some());
        let mut out = String::from(if with_bound { "n,tv,log_tv,bound_log\n" } else { "n,tv,log_tv\n" });
        for p in &self.points {
            let _ = write!(out, "{},{:e},{:e}", p.n, p.tv(), p.log_tv);
            if with_bound {
                match p.bound_log {
                    Some(b) => {
                        let _ = write!(out, ",{b:e}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and the `<stem>.meta.json` sidecar into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, extra: serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        let meta = serde_json::json!({ "meta": self.meta, "extra": extra });
        std::fs::write(dir.join(format!("{stem}.meta.json")), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub points: usize,
    /// Zero distances replaced by the smallest positive value in range.
    pub clipped: usize,
}

/// Least-squares slope of `log tv_n` on `n` over `n_min..=n_max`.
pub fn decay_rate(series: &TvSeries, fit_range: (usize, usize)) -> Result<DecayFit> {
    let (n_min, n_max) = fit_range;
    let pts: Vec<&TvPoint> = series.points.iter().filter(|p| p.n >= n_min && p.n <= n_max).collect();
    let floor = pts.iter().map(|p| p.log_tv).filter(|l| l.is_finite()).fold(f64::INFINITY, f64::min);
    let usable = if floor.is_finite() { pts.len() } else { 0 };
    if usable < 3 {
        return Err(Error::InsufficientData { usable });
    }
    let mut clipped = 0;
    let x: Vec<f64> = pts.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = pts
        .iter()
        .map(|p| {
            if p.log_tv.is_finite() {
                p.log_tv
            } else {
                clipped += 1;
                floor
            }
        })
        .collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    Ok(DecayFit { slope, intercept, r2, n_min, n_max, points: pts.len(), clipped })
}

/// Default fit window `[n/5, n]`, skipping the transient.
pub fn default_fit_range(n: usize) -> (usize, usize) {
    (n / 5, n)
}
