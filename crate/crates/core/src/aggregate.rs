//! Globalizing per-cell metrics via stationary weighting, and quantizing
//! heavy-tailed per-cell weights into [0, 1] for map display.
//!
//! Quantization clips a pooled per-vessel-type weight distribution to
//! configurable percentiles (1st/98th by default, pooled across all windows)
//! and pushes the clipped value through a shape-preserving monotone cubic
//! spline that expands low/mid contrast.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stationary-distribution-weighted spatial average of a per-cell metric.
/// `phi` and `pi` are aligned to the same state index; the sum runs in
/// index order so results are bit-reproducible.
pub fn globalize(phi: &[f64], pi: &[f64]) -> Result<f64> {
    assert_eq!(phi.len(), pi.len());
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "stationary distribution sums to {total}, not 1"
        )));
    }
    Ok(phi.iter().zip(pi.iter()).map(|(&f, &p)| p * f).sum())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizationConfig {
    pub low_percentile: f64,
    pub high_percentile: f64,
    /// Monotone knots from (0, 0) to (1, 1).
    pub knots: Vec<(f64, f64)>,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        QuantizationConfig {
            low_percentile: 1.0,
            high_percentile: 98.0,
            knots: default_knots(),
        }
    }
}

pub fn default_knots() -> Vec<(f64, f64)> {
    vec![
        (0.0, 0.0),
        (0.25, 0.45),
        (0.5, 0.70),
        (0.75, 0.88),
        (1.0, 1.0),
    ]
}

impl QuantizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low_percentile && self.low_percentile < self.high_percentile
            && self.high_percentile <= 100.0)
        {
            return Err(Error::Config(format!(
                "clip percentiles must satisfy 0 <= low < high <= 100, got ({}, {})",
                self.low_percentile, self.high_percentile
            )));
        }
        if self.knots.len() < 2 {
            return Err(Error::Config("spline needs at least two knots".into()));
        }
        if self.knots.first() != Some(&(0.0, 0.0)) || self.knots.last() != Some(&(1.0, 1.0)) {
            return Err(Error::Config("spline knots must run from (0,0) to (1,1)".into()));
        }
        for pair in self.knots.windows(2) {
            if !(pair[1].0 > pair[0].0 && pair[1].1 > pair[0].1) {
                return Err(Error::Config(
                    "spline knots must be strictly increasing in both coordinates".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Clip thresholds for one (vessel type, metric) pair, fitted over the
/// pooled distribution across all windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Thresholds {
    pub fn is_degenerate(&self) -> bool {
        !(self.high > self.low)
    }
}

/// Linear-interpolated order statistic (the `(n-1) * p / 100` rank
/// convention), fixed so thresholds are deterministic across platforms.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=100.0).contains(&p));
    let rank = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Fits clip thresholds on a pooled weight distribution. The pool is sorted
/// internally, so window order never affects the result. An all-equal pool
/// yields degenerate thresholds (quantize maps everything to 0).
pub fn fit_thresholds(pooled: &[f64], cfg: &QuantizationConfig) -> Result<Thresholds> {
    if pooled.is_empty() {
        return Err(Error::Domain("cannot fit thresholds on an empty pool".into()));
    }
    let mut sorted: Vec<f64> = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Thresholds {
        low: percentile(&sorted, cfg.low_percentile),
        high: percentile(&sorted, cfg.high_percentile),
    })
}

/// Shape-preserving (Fritsch-Carlson) monotone cubic interpolant through
/// strictly increasing knots. Monotone by construction and exact at knots.
#[derive(Debug, Clone)]
pub struct MonotoneSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneSpline {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Config("spline needs at least two knots".into()));
        }
        for pair in knots.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::Config("spline knots must have increasing x".into()));
            }
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = knots.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut tangents = vec![0.0f64; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            if secants[i - 1] * secants[i] <= 0.0 {
                tangents[i] = 0.0;
            } else {
                tangents[i] = 0.5 * (secants[i - 1] + secants[i]);
            }
        }
        // Fritsch-Carlson limiter keeps each interval monotone.
        for i in 0..n - 1 {
            if secants[i] == 0.0 {
                tangents[i] = 0.0;
                tangents[i + 1] = 0.0;
                continue;
            }
            let alpha = tangents[i] / secants[i];
            let beta = tangents[i + 1] / secants[i];
            let norm2 = alpha * alpha + beta * beta;
            if norm2 > 9.0 {
                let tau = 3.0 / norm2.sqrt();
                tangents[i] = tau * alpha * secants[i];
                tangents[i + 1] = tau * beta * secants[i];
            }
        }
        Ok(MonotoneSpline { xs, ys, tangents })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // Knot arrays are tiny; a linear scan is the fastest search.
        let mut i = 0;
        while self.xs[i + 1] < x {
            i += 1;
        }
        if self.xs[i + 1] == x {
            return self.ys[i + 1];
        }
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.tangents[i] + h01 * self.ys[i + 1]
            + h11 * h * self.tangents[i + 1]
    }
}

/// Clip-and-transform: project `(w - low) / (high - low)` onto [0, 1], then
/// apply the spline. Degenerate thresholds map every weight to 0.
pub fn quantize(w: f64, thresholds: &Thresholds, spline: &MonotoneSpline) -> f64 {
    if thresholds.is_degenerate() {
        return 0.0;
    }
    let z = ((w - thresholds.low) / (thresholds.high - thresholds.low)).clamp(0.0, 1.0);
    spline.eval(z)
}

/// Report-ready global summary for one (category x window) model.
/// Field names and order are a stable external schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub window: String,
    pub category: String,
    pub n_states: usize,
    pub n_transitions: u64,
    pub avg_path_length: Option<f64>,
    pub modularity: Option<f64>,
    pub phi: PhiSummary,
    pub excluded_pairs: u64,
}

/// Stationary-weighted global averages; `None` when the window's model has
/// no stationary distribution to weight by.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSummary {
    #[serde(rename = "MM")]
    pub mm: Option<f64>,
    #[serde(rename = "DTM")]
    pub dtm: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
}
