//! Segmentation and uniform resampling of per-vessel position streams.
//!
//! Raw AIS reports arrive at irregular intervals. Each vessel's stream is
//! split into wall-clock-aligned windows (3 hours by default, aligned to UTC
//! midnight) and additionally wherever the gap between consecutive reports
//! exceeds the interpolation cap, then resampled at a fixed cadence by
//! linear interpolation in latitude and longitude independently.

use serde::{Deserialize, Serialize};

use crate::ingest::AisRecord;

/// One raw position report inside a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub ts: i64,
    pub lat: f64,
    pub lon: f64,
}

impl From<&AisRecord> for RawPoint {
    fn from(r: &AisRecord) -> Self {
        RawPoint {
            ts: r.ts,
            lat: r.lat,
            lon: r.lon,
        }
    }
}

/// A vessel's reports confined to one segmentation window, strictly
/// time-ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSegment {
    pub vessel_id: u64,
    pub points: Vec<RawPoint>,
}

/// Uniformly sampled positions at `start_ts + k * dt_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledTrajectory {
    pub vessel_id: u64,
    pub start_ts: i64,
    pub dt_s: i64,
    pub positions: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// Wall-clock window length in seconds, aligned to UTC midnight.
    pub window_s: i64,
    /// Maximum gap between consecutive raw reports that linear
    /// interpolation is allowed to bridge.
    pub max_gap_s: i64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            window_s: 3 * 3600,
            max_gap_s: 15 * 60,
        }
    }
}

pub const DEFAULT_DT_S: i64 = 60;

/// Splits one vessel's time-sorted reports into segments. A new segment
/// starts at every aligned window boundary, after any gap longer than
/// `max_gap_s`, and at antimeridian crossings (interpolating across the
/// lon=±180 seam would fabricate a track around the globe).
pub fn segment_stream(
    vessel_id: u64,
    points: &[RawPoint],
    params: &SegmentationParams,
) -> Vec<RawSegment> {
    assert!(params.window_s > 0 && params.max_gap_s > 0);
    let mut segments = Vec::new();
    let mut current: Vec<RawPoint> = Vec::new();
    for &p in points {
        if let Some(prev) = current.last() {
            debug_assert!(p.ts > prev.ts, "records must be strictly time-sorted");
            let window_changed =
                p.ts.div_euclid(params.window_s) != prev.ts.div_euclid(params.window_s);
            let gap_exceeded = p.ts - prev.ts > params.max_gap_s;
            let antimeridian = (p.lon - prev.lon).abs() > 180.0;
            if window_changed || gap_exceeded || antimeridian {
                segments.push(RawSegment {
                    vessel_id,
                    points: std::mem::take(&mut current),
                });
            }
        }
        current.push(p);
    }
    if !current.is_empty() {
        segments.push(RawSegment {
            vessel_id,
            points: current,
        });
    }
    segments
}

fn ceil_to_multiple(t: i64, step: i64) -> i64 {
    let r = t.rem_euclid(step);
    if r == 0 {
        t
    } else {
        t - r + step
    }
}

/// Resamples a segment at cadence `dt_s`, starting from the first multiple
/// of `dt_s` at or after the first raw point and never extrapolating past
/// the last one. Segments with fewer than two points (or too short to hold
/// an aligned sample) yield `None`; they still contribute residence time
/// through [`singleton_trajectory`].
pub fn resample_segment(seg: &RawSegment, dt_s: i64) -> Option<ResampledTrajectory> {
    assert!(dt_s > 0);
    if seg.points.len() < 2 {
        return None;
    }
    let first = seg.points.first().unwrap().ts;
    let last = seg.points.last().unwrap().ts;
    let start = ceil_to_multiple(first, dt_s);
    if start > last {
        return None;
    }
    let n = ((last - start) / dt_s + 1) as usize;
    let mut positions = Vec::with_capacity(n);
    let mut seg_idx = 0usize;
    for k in 0..n {
        let t = start + dt_s * k as i64;
        while seg.points[seg_idx + 1].ts < t {
            seg_idx += 1;
        }
        let a = seg.points[seg_idx];
        let b = seg.points[seg_idx + 1];
        debug_assert!(a.ts <= t && t <= b.ts);
        let frac = (t - a.ts) as f64 / (b.ts - a.ts) as f64;
        positions.push((
            a.lat + frac * (b.lat - a.lat),
            a.lon + frac * (b.lon - a.lon),
        ));
    }
    Some(ResampledTrajectory {
        vessel_id: seg.vessel_id,
        start_ts: start,
        dt_s,
        positions,
    })
}

/// Fallback for segments that cannot be resampled: a one-sample trajectory
/// at the first raw point, so the visit still registers as residence in its
/// cell.
pub fn singleton_trajectory(seg: &RawSegment, dt_s: i64) -> Option<ResampledTrajectory> {
    seg.points.first().map(|p| ResampledTrajectory {
        vessel_id: seg.vessel_id,
        start_ts: p.ts,
        dt_s,
        positions: vec![(p.lat, p.lon)],
    })
}

/// Resample, falling back to a singleton when no aligned sample fits.
pub fn resample_or_singleton(seg: &RawSegment, dt_s: i64) -> Option<ResampledTrajectory> {
    resample_segment(seg, dt_s).or_else(|| singleton_trajectory(seg, dt_s))
}
