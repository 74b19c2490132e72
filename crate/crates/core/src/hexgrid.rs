//! Hexagonal state space: maps WGS-84 coordinates to flat-top hexagonal
//! cells on a local equirectangular projection and discretizes resampled
//! trajectories into state sequences.
//!
//! The lattice uses axial coordinates `(q, r)`. Cell `(0, 0)` is centred on
//! the projection origin. The projection is equirectangular with
//! `cos(lat0)` longitude scaling; over a study region spanning a few degrees
//! of latitude the induced east-west distortion stays within a bound that is
//! asserted by tests, and it keeps cell geometry exactly analytic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::ResampledTrajectory;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Geographic bounding box, degrees, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat <= self.max_lat && lon >= self.min_lon && lon <= self.max_lon
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_lat < self.max_lat && self.min_lon < self.max_lon) {
            return Err(Error::Config(format!(
                "degenerate bounding box: lat [{}, {}], lon [{}, {}]",
                self.min_lat, self.max_lat, self.min_lon, self.max_lon
            )));
        }
        if self.min_lat < -90.0 || self.max_lat > 90.0 || self.min_lon < -180.0 || self.max_lon > 180.0
        {
            return Err(Error::Config("bounding box exceeds WGS-84 range".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_lat + self.max_lat),
            0.5 * (self.min_lon + self.max_lon),
        )
    }
}

/// Axial cell identifier. Ordering is lexicographic on `(q, r)`, which is the
/// deterministic row order used by every serialized artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub q: i32,
    pub r: i32,
}

impl CellId {
    pub fn new(q: i32, r: i32) -> Self {
        CellId { q, r }
    }
}

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.q, self.r)
    }
}

impl std::str::FromStr for CellId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (q, r) = s
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("malformed cell id `{s}`")))?;
        Ok(CellId {
            q: q.parse()
                .map_err(|_| Error::Domain(format!("malformed cell id `{s}`")))?,
            r: r.parse()
                .map_err(|_| Error::Domain(format!("malformed cell id `{s}`")))?,
        })
    }
}

/// Immutable grid definition: projection origin, flat-top hexagon edge
/// length in meters, and the study bounding box.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub edge_len_m: f64,
    pub bbox: BoundingBox,
    m_per_deg_lat: f64,
    m_per_deg_lon: f64,
}

impl GridConfig {
    pub fn new(origin_lat: f64, origin_lon: f64, edge_len_m: f64, bbox: BoundingBox) -> Result<Self> {
        bbox.validate()?;
        if !(edge_len_m > 0.0) {
            return Err(Error::Config(format!(
                "hexagon edge length must be positive, got {edge_len_m}"
            )));
        }
        let deg = std::f64::consts::PI / 180.0;
        Ok(GridConfig {
            origin_lat,
            origin_lon,
            edge_len_m,
            bbox,
            m_per_deg_lat: EARTH_RADIUS_M * deg,
            m_per_deg_lon: EARTH_RADIUS_M * deg * origin_lat.to_radians().cos(),
        })
    }

    /// Builds a grid whose hexagon area equals `area_km2` exactly:
    /// `(3*sqrt(3)/2) * a^2 = area`.
    pub fn from_target_area(
        origin_lat: f64,
        origin_lon: f64,
        area_km2: f64,
        bbox: BoundingBox,
    ) -> Result<Self> {
        if !(area_km2 > 0.0) {
            return Err(Error::Config(format!(
                "target cell area must be positive, got {area_km2}"
            )));
        }
        let a = (2.0 * area_km2 * 1e6 / (3.0 * SQRT3)).sqrt();
        GridConfig::new(origin_lat, origin_lon, a, bbox)
    }

    pub fn cell_area_m2(&self) -> f64 {
        1.5 * SQRT3 * self.edge_len_m * self.edge_len_m
    }

    /// Checks the configured edge length against a target cell area,
    /// at 0.1% relative tolerance.
    pub fn check_target_area(&self, area_km2: f64) -> Result<()> {
        let actual = self.cell_area_m2();
        let target = area_km2 * 1e6;
        if (actual - target).abs() > 1e-3 * target {
            return Err(Error::Config(format!(
                "hexagon area {:.1} m^2 deviates more than 0.1% from target {:.1} m^2",
                actual, target
            )));
        }
        Ok(())
    }

    /// Equirectangular projection to local meters about the origin.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        (
            (lon - self.origin_lon) * self.m_per_deg_lon,
            (lat - self.origin_lat) * self.m_per_deg_lat,
        )
    }

    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.origin_lat + y / self.m_per_deg_lat,
            self.origin_lon + x / self.m_per_deg_lon,
        )
    }

    /// Maps a coordinate to its containing cell. Boundary points resolve by
    /// cube rounding, which is deterministic.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Result<CellId> {
        if !self.bbox.contains(lat, lon) {
            return Err(Error::OutOfDomain { lat, lon });
        }
        let (x, y) = self.project(lat, lon);
        Ok(self.cell_at_xy(x, y))
    }

    fn cell_at_xy(&self, x: f64, y: f64) -> CellId {
        // Flat-top axial fractional coordinates.
        let a = self.edge_len_m;
        let qf = (2.0 / 3.0) * x / a;
        let rf = (-x / 3.0 + SQRT3 / 3.0 * y) / a;
        cube_round(qf, rf)
    }

    /// Cell center in projected meters.
    pub fn center_xy(&self, c: CellId) -> (f64, f64) {
        let a = self.edge_len_m;
        let x = a * 1.5 * f64::from(c.q);
        let y = a * (SQRT3 / 2.0 * f64::from(c.q) + SQRT3 * f64::from(c.r));
        (x, y)
    }

    /// Cell center as (lat, lon).
    pub fn center_of(&self, c: CellId) -> (f64, f64) {
        let (x, y) = self.center_xy(c);
        self.unproject(x, y)
    }

    /// The six hexagon corners in projected meters, counter-clockwise
    /// starting from the eastern corner.
    pub fn corners_xy(&self, c: CellId) -> [(f64, f64); 6] {
        let (cx, cy) = self.center_xy(c);
        let a = self.edge_len_m;
        let mut out = [(0.0, 0.0); 6];
        for (k, slot) in out.iter_mut().enumerate() {
            let ang = std::f64::consts::PI / 3.0 * k as f64;
            *slot = (cx + a * ang.cos(), cy + a * ang.sin());
        }
        out
    }

    /// Closed GeoJSON ring for a cell: 7 positions in (lon, lat) order.
    pub fn cell_ring_lonlat(&self, c: CellId) -> Vec<[f64; 2]> {
        let mut ring: Vec<[f64; 2]> = self
            .corners_xy(c)
            .iter()
            .map(|&(x, y)| {
                let (lat, lon) = self.unproject(x, y);
                [lon, lat]
            })
            .collect();
        ring.push(ring[0]);
        ring
    }

    /// Point-in-hexagon test in projected meters with a small tolerance so
    /// boundary points count as inside.
    pub fn cell_contains_xy(&self, c: CellId, x: f64, y: f64) -> bool {
        let corners = self.corners_xy(c);
        let eps = 1e-9 * self.edge_len_m;
        for k in 0..6 {
            let (x1, y1) = corners[k];
            let (x2, y2) = corners[(k + 1) % 6];
            // CCW ring: inside points have non-negative cross products.
            let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
            if cross < -eps {
                return false;
            }
        }
        true
    }

    pub fn cell_contains(&self, c: CellId, lat: f64, lon: f64) -> bool {
        let (x, y) = self.project(lat, lon);
        self.cell_contains_xy(c, x, y)
    }

    /// Whether the cell's hexagon intersects the study bounding box
    /// (separating-axis test between two convex shapes).
    pub fn in_bounds(&self, c: CellId) -> bool {
        let (rx0, ry0) = self.project(self.bbox.min_lat, self.bbox.min_lon);
        let (rx1, ry1) = self.project(self.bbox.max_lat, self.bbox.max_lon);
        let rect = [(rx0, ry0), (rx1, ry0), (rx1, ry1), (rx0, ry1)];
        let hex = self.corners_xy(c);
        // Axes: rect normals plus the three distinct flat-top edge normals.
        let deg30 = std::f64::consts::PI / 6.0;
        let axes = [
            (1.0, 0.0),
            (0.0, 1.0),
            (deg30.cos(), deg30.sin()),
            ((3.0 * deg30).cos(), (3.0 * deg30).sin()),
            ((5.0 * deg30).cos(), (5.0 * deg30).sin()),
        ];
        for (ax, ay) in axes {
            let (mut hlo, mut hhi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in &hex {
                let p = x * ax + y * ay;
                hlo = hlo.min(p);
                hhi = hhi.max(p);
            }
            let (mut rlo, mut rhi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in &rect {
                let p = x * ax + y * ay;
                rlo = rlo.min(p);
                rhi = rhi.max(p);
            }
            if hhi < rlo || rhi < hlo {
                return false;
            }
        }
        true
    }

    /// Geometric lattice neighbors clipped to the bounding box.
    pub fn neighbors(&self, c: CellId) -> Vec<CellId> {
        AXIAL_OFFSETS
            .iter()
            .map(|&(dq, dr)| CellId::new(c.q + dq, c.r + dr))
            .filter(|&n| self.in_bounds(n))
            .collect()
    }
}

pub const AXIAL_OFFSETS: [(i32, i32); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

/// Standard cube rounding of fractional axial coordinates.
fn cube_round(qf: f64, rf: f64) -> CellId {
    let sf = -qf - rf;
    let mut q = qf.round();
    let mut r = rf.round();
    let s = sf.round();
    let dq = (q - qf).abs();
    let dr = (r - rf).abs();
    let ds = (s - sf).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    // else: the discarded third coordinate absorbs the rounding error.
    CellId::new(q as i32, r as i32)
}

/// One discrete chain realization: cells visited at the resampling cadence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence {
    pub vessel_id: u64,
    pub dt_s: i64,
    /// (cell, timestamp) pairs; timestamps strictly increase by `dt_s`.
    pub steps: Vec<(CellId, i64)>,
}

impl StateSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Result of discretizing one resampled trajectory. Samples that fall
/// outside the bounding box are dropped and split the sequence at the gap.
#[derive(Debug, Clone, Default)]
pub struct Discretized {
    pub sequences: Vec<StateSequence>,
    pub dropped_samples: u64,
}

pub fn discretize(rt: &ResampledTrajectory, cfg: &GridConfig) -> Discretized {
    let mut out = Discretized::default();
    let mut current: Vec<(CellId, i64)> = Vec::new();
    for (k, &(lat, lon)) in rt.positions.iter().enumerate() {
        let ts = rt.start_ts + rt.dt_s * k as i64;
        match cfg.cell_of(lat, lon) {
            Ok(cell) => current.push((cell, ts)),
            Err(_) => {
                out.dropped_samples += 1;
                if !current.is_empty() {
                    out.sequences.push(StateSequence {
                        vessel_id: rt.vessel_id,
                        dt_s: rt.dt_s,
                        steps: std::mem::take(&mut current),
                    });
                }
            }
        }
    }
    if !current.is_empty() {
        out.sequences.push(StateSequence {
            vessel_id: rt.vessel_id,
            dt_s: rt.dt_s,
            steps: current,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gulf_grid() -> GridConfig {
        GridConfig::new(
            48.25,
            -61.5,
            3722.0,
            BoundingBox {
                min_lat: 46.0,
                min_lon: -66.0,
                max_lat: 50.5,
                max_lon: -57.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn origin_maps_to_origin_cell() {
        let g = gulf_grid();
        assert_eq!(g.cell_of(48.25, -61.5).unwrap(), CellId::new(0, 0));
    }

    #[test]
    fn center_round_trips() {
        let g = gulf_grid();
        for &c in &[
            CellId::new(3, -2),
            CellId::new(0, 0),
            CellId::new(-5, 7),
            CellId::new(12, -4),
        ] {
            let (lat, lon) = g.center_of(c);
            assert_eq!(g.cell_of(lat, lon).unwrap(), c, "round trip failed for {c}");
        }
    }

    #[test]
    fn point_off_center_stays_in_origin_cell() {
        let g = gulf_grid();
        // 0.4 * a east of the origin is interior to cell (0, 0).
        let (lat, lon) = g.unproject(0.4 * g.edge_len_m, 0.0);
        assert_eq!(g.cell_of(lat, lon).unwrap(), CellId::new(0, 0));
    }

    #[test]
    fn interior_cell_has_six_neighbors() {
        let g = gulf_grid();
        assert_eq!(g.neighbors(CellId::new(0, 0)).len(), 6);
    }

    #[test]
    fn corner_cell_is_clipped() {
        let g = gulf_grid();
        let corner = g.cell_of(g.bbox.min_lat, g.bbox.min_lon).unwrap();
        let n = g.neighbors(corner).len();
        assert!(n < 6, "corner cell should lose neighbors, got {n}");
    }

    #[test]
    fn neighbor_relation_is_symmetric() {
        let g = gulf_grid();
        let cells = [CellId::new(0, 0), CellId::new(4, -1), CellId::new(-3, 6)];
        for &c in &cells {
            for n in g.neighbors(c) {
                assert!(
                    g.neighbors(n).contains(&c),
                    "{c} -> {n} not symmetric"
                );
            }
        }
    }

    #[test]
    fn cell_area_matches_target_within_tolerance() {
        let g = gulf_grid();
        g.check_target_area(36.0).unwrap();
        let from_area =
            GridConfig::from_target_area(48.25, -61.5, 36.0, g.bbox).unwrap();
        assert!((from_area.edge_len_m - 3722.0).abs() < 1.0);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let g = gulf_grid();
        assert!(matches!(
            g.cell_of(30.0, -61.5),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn partition_random_points_land_in_exactly_one_cell() {
        let g = gulf_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let lat = rng.random_range(g.bbox.min_lat..g.bbox.max_lat);
            let lon = rng.random_range(g.bbox.min_lon..g.bbox.max_lon);
            let c = g.cell_of(lat, lon).unwrap();
            assert!(g.cell_contains(c, lat, lon), "{lat},{lon} not in {c}");
            let (x, y) = g.project(lat, lon);
            // No other cell in the neighborhood strictly contains the point.
            let strict = |cell: CellId| {
                let corners = g.corners_xy(cell);
                let margin = 1e-7 * g.edge_len_m;
                (0..6).all(|k| {
                    let (x1, y1) = corners[k];
                    let (x2, y2) = corners[(k + 1) % 6];
                    (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) > margin
                })
            };
            if strict(c) {
                for (dq, dr) in AXIAL_OFFSETS {
                    let n = CellId::new(c.q + dq, c.r + dr);
                    assert!(!strict(n), "point strictly inside two cells");
                }
            }
        }
    }

    #[test]
    fn equirectangular_distortion_stays_bounded() {
        // East-west scale error relative to the local parallel is bounded by
        // cos(lat)/cos(lat0) - 1 over the box; assert an 8% envelope for the
        // default study region.
        let g = gulf_grid();
        // Projected east-west length scales by cos(lat0); the true parallel
        // scales by cos(lat), so the relative error is cos(lat0)/cos(lat)-1.
        let worst = |lat: f64| {
            (g.origin_lat.to_radians().cos() / lat.to_radians().cos() - 1.0).abs()
        };
        let bound = worst(g.bbox.min_lat).max(worst(g.bbox.max_lat));
        assert!(bound < 0.08, "distortion bound {bound} exceeds 8%");
        // Spot-check against the true cos(lat) scale at a few latitudes.
        for lat in [46.0, 47.5, 48.25, 49.0, 50.5] {
            let (x1, _) = g.project(lat, -61.0);
            let (x2, _) = g.project(lat, -60.0);
            let projected = x2 - x1;
            let true_len = EARTH_RADIUS_M * lat.to_radians().cos() * std::f64::consts::PI / 180.0;
            let rel = ((projected - true_len) / true_len).abs();
            assert!(rel <= bound + 1e-12, "lat {lat}: rel error {rel} > {bound}");
        }
    }

    #[test]
    fn discretize_constant_track_is_constant() {
        let g = gulf_grid();
        let rt = ResampledTrajectory {
            vessel_id: 1,
            start_ts: 0,
            dt_s: 60,
            positions: vec![(48.25, -61.5); 5],
        };
        let d = discretize(&rt, &g);
        assert_eq!(d.dropped_samples, 0);
        assert_eq!(d.sequences.len(), 1);
        let seq = &d.sequences[0];
        assert_eq!(seq.len(), 5);
        assert!(seq.steps.iter().all(|&(c, _)| c == CellId::new(0, 0)));
        assert_eq!(seq.steps[1].1 - seq.steps[0].1, 60);
    }

    #[test]
    fn discretize_straight_track_crosses_adjacent_cells_once() {
        let g = gulf_grid();
        // March due north from the origin cell center; the first cell change
        // crosses exactly one edge into a lattice neighbor.
        let step_m = 300.0;
        let positions: Vec<(f64, f64)> = (0..30)
            .map(|k| g.unproject(0.0, step_m * k as f64))
            .collect();
        let rt = ResampledTrajectory {
            vessel_id: 1,
            start_ts: 0,
            dt_s: 60,
            positions,
        };
        let d = discretize(&rt, &g);
        assert_eq!(d.sequences.len(), 1);
        let cells: Vec<CellId> = d.sequences[0].steps.iter().map(|&(c, _)| c).collect();
        let changes = cells.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "track of 8.7 km north should change cell once");
        assert_eq!(cells[0], CellId::new(0, 0));
    }

    #[test]
    fn discretize_empty_is_empty() {
        let g = gulf_grid();
        let rt = ResampledTrajectory {
            vessel_id: 1,
            start_ts: 0,
            dt_s: 60,
            positions: vec![],
        };
        let d = discretize(&rt, &g);
        assert!(d.sequences.is_empty());
        assert_eq!(d.dropped_samples, 0);
    }

    #[test]
    fn discretize_splits_at_out_of_bounds_samples() {
        let g = gulf_grid();
        let rt = ResampledTrajectory {
            vessel_id: 1,
            start_ts: 0,
            dt_s: 60,
            positions: vec![(48.25, -61.5), (20.0, -61.5), (48.25, -61.5)],
        };
        let d = discretize(&rt, &g);
        assert_eq!(d.dropped_samples, 1);
        assert_eq!(d.sequences.len(), 2);
    }

    #[test]
    fn slow_tracks_only_step_to_lattice_neighbors() {
        let g = gulf_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dt = 60.0;
        let max_step = 0.9 * g.edge_len_m / dt * dt;
        for _ in 0..200 {
            let x0 = rng.random_range(-20_000.0..20_000.0);
            let y0 = rng.random_range(-20_000.0..20_000.0);
            let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(0.1..1.0) * max_step;
            let positions: Vec<(f64, f64)> = (0..40)
                .map(|k| {
                    let x = x0 + speed * heading.cos() * k as f64;
                    let y = y0 + speed * heading.sin() * k as f64;
                    g.unproject(x, y)
                })
                .collect();
            let rt = ResampledTrajectory {
                vessel_id: 1,
                start_ts: 0,
                dt_s: 60,
                positions,
            };
            for seq in discretize(&rt, &g).sequences {
                for w in seq.steps.windows(2) {
                    let (a, b) = (w[0].0, w[1].0);
                    if a != b {
                        assert!(
                            g.neighbors(a).contains(&b),
                            "jumped from {a} to non-neighbor {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn geojson_ring_is_closed_with_seven_points() {
        let g = gulf_grid();
        let ring = g.cell_ring_lonlat(CellId::new(2, -1));
        assert_eq!(ring.len(), 7);
        assert_eq!(ring[0], ring[6]);
        // Ring is (lon, lat): longitudes in the Gulf are negative.
        assert!(ring.iter().all(|p| p[0] < 0.0 && p[1] > 0.0));
    }

    #[test]
    fn cell_id_display_round_trips() {
        let c = CellId::new(-4, 17);
        let s = c.to_string();
        assert_eq!(s, "-4:17");
        assert_eq!(s.parse::<CellId>().unwrap(), c);
    }
}
