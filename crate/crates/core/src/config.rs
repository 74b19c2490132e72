//! Pipeline and scenario configuration: one versioned TOML format family,
//! deserialized into file structs and validated into domain types.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::aggregate::QuantizationConfig;
use crate::error::{Error, Result};
use crate::hexgrid::{BoundingBox, GridConfig};
use crate::ingest::{pandemic_window_preset, validate_windows, CategoryKey, SchemaConfig, TimeWindow};
use crate::synthgen;
use crate::trajectory::SegmentationParams;

pub const CONFIG_VERSION: u32 = 1;

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::Config(format!("bad date `{s}`, expected YYYY-MM-DD")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    #[serde(default)]
    pub workers: usize,
    pub input: InputSection,
    pub grid: GridSection,
    #[serde(default)]
    pub resample: ResampleSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub categories: CategoriesSection,
    #[serde(default)]
    pub quantization: QuantizationConfig,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub paths: Vec<PathBuf>,
    /// Fatal when the rejected fraction of parsed rows exceeds this.
    #[serde(default = "default_reject_fraction")]
    pub max_reject_fraction: f64,
    #[serde(default)]
    pub schema: SchemaConfig,
    /// Optional ship-type category table (TSV); bundled table when absent.
    #[serde(default)]
    pub category_table: Option<PathBuf>,
}

fn default_reject_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub origin_lat: f64,
    pub origin_lon: f64,
    #[serde(default = "default_edge_len")]
    pub edge_len_m: f64,
    /// When set, the edge length is cross-checked against this area.
    #[serde(default)]
    pub target_cell_area_km2: Option<f64>,
    pub bbox: BoundingBox,
}

fn default_edge_len() -> f64 {
    3722.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResampleSection {
    pub dt_s: i64,
    pub segment_window_s: i64,
    pub max_gap_s: i64,
}

impl Default for ResampleSection {
    fn default() -> Self {
        ResampleSection {
            dt_s: crate::trajectory::DEFAULT_DT_S,
            segment_window_s: 3 * 3600,
            max_gap_s: 15 * 60,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsSection {
    /// Named preset; `pandemic_2019_2022` is the bundled four-phase split.
    pub preset: Option<String>,
    pub custom: Vec<WindowSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub label: String,
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CategoriesSection {
    pub emit: Vec<String>,
}

impl Default for CategoriesSection {
    fn default() -> Self {
        CategoriesSection {
            emit: vec![
                "all".into(),
                "commercial".into(),
                "fishing".into(),
                "passenger".into(),
                "other".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub dump_resampled: bool,
    #[serde(default)]
    pub include_terminal_in_dtm: bool,
    /// Experimental: symmetrized transition counts instead of probabilities
    /// as modularity edge weights.
    #[serde(default)]
    pub count_weighted_modularity: bool,
}

/// Validated, ready-to-run pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub input_paths: Vec<PathBuf>,
    pub max_reject_fraction: f64,
    pub schema: SchemaConfig,
    pub category_table_path: Option<PathBuf>,
    pub grid: GridConfig,
    pub dt_s: i64,
    pub segmentation: SegmentationParams,
    pub windows: Vec<TimeWindow>,
    pub emit: Vec<CategoryKey>,
    pub quantization: QuantizationConfig,
    pub out_dir: PathBuf,
    pub dump_resampled: bool,
    pub include_terminal_in_dtm: bool,
    pub count_weighted_modularity: bool,
    /// SHA-256 of the raw config text, recorded in the run manifest.
    pub config_sha256: String,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Input paths are resolved relative to the config file's directory.
        if let Some(dir) = path.parent() {
            cfg.input_paths = cfg
                .input_paths
                .iter()
                .map(|p| if p.is_absolute() { p.clone() } else { dir.join(p) })
                .collect();
            if !cfg.out_dir.is_absolute() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
            if let Some(t) = &cfg.category_table_path {
                if !t.is_absolute() {
                    cfg.category_table_path = Some(dir.join(t));
                }
            }
        }
        cfg.validate_paths()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PipelineFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        Self::from_file(file, text)
    }

    fn from_file(file: PipelineFile, raw: &str) -> Result<Self> {
        if file.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                file.config_version
            )));
        }
        if file.input.paths.is_empty() {
            return Err(Error::Config("input.paths is empty".into()));
        }
        if !(0.0..=1.0).contains(&file.input.max_reject_fraction) {
            return Err(Error::Config(
                "input.max_reject_fraction must be within [0, 1]".into(),
            ));
        }

        let grid = GridConfig::new(
            file.grid.origin_lat,
            file.grid.origin_lon,
            file.grid.edge_len_m,
            file.grid.bbox,
        )?;
        if let Some(area) = file.grid.target_cell_area_km2 {
            grid.check_target_area(area)?;
        }

        let r = &file.resample;
        if r.dt_s <= 0 || r.segment_window_s <= 0 || r.max_gap_s <= 0 {
            return Err(Error::Config("resample intervals must be positive".into()));
        }
        if r.segment_window_s % r.dt_s != 0 {
            return Err(Error::Config(format!(
                "dt_s ({}) must divide segment_window_s ({})",
                r.dt_s, r.segment_window_s
            )));
        }

        let windows = match (&file.windows.preset, file.windows.custom.is_empty()) {
            (Some(name), true) => match name.as_str() {
                "pandemic_2019_2022" => pandemic_window_preset(),
                other => {
                    return Err(Error::Config(format!("unknown windows preset `{other}`")))
                }
            },
            (None, false) => file
                .windows
                .custom
                .iter()
                .map(|w| {
                    Ok(TimeWindow::new(
                        w.label.clone(),
                        parse_date(&w.start)?,
                        parse_date(&w.end)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            (None, true) => pandemic_window_preset(),
            (Some(_), false) => {
                return Err(Error::Config(
                    "set either windows.preset or windows.custom, not both".into(),
                ))
            }
        };
        validate_windows(&windows)?;

        let mut emit: Vec<CategoryKey> = file
            .categories
            .emit
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?;
        emit.sort_unstable();
        emit.dedup();
        if emit.is_empty() {
            return Err(Error::Config("categories.emit is empty".into()));
        }

        file.quantization.validate()?;

        let digest = sha2::Sha256::digest(raw.as_bytes());
        let config_sha256 = hex_string(&digest);

        Ok(PipelineConfig {
            seed: file.seed,
            workers: file.workers,
            input_paths: file.input.paths,
            max_reject_fraction: file.input.max_reject_fraction,
            schema: file.input.schema,
            category_table_path: file.input.category_table,
            grid,
            dt_s: r.dt_s,
            segmentation: SegmentationParams {
                window_s: r.segment_window_s,
                max_gap_s: r.max_gap_s,
            },
            windows,
            emit,
            quantization: file.quantization,
            out_dir: file.output.dir,
            dump_resampled: file.output.dump_resampled,
            include_terminal_in_dtm: file.output.include_terminal_in_dtm,
            count_weighted_modularity: file.output.count_weighted_modularity,
            config_sha256,
        })
    }

    pub fn validate_paths(&self) -> Result<()> {
        for p in &self.input_paths {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input path does not exist: {}",
                    p.display()
                )));
            }
        }
        if let Some(t) = &self.category_table_path {
            if !t.exists() {
                return Err(Error::Config(format!(
                    "category table does not exist: {}",
                    t.display()
                )));
            }
        }
        Ok(())
    }
}

use sha2::Digest;

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

// ---------------------------------------------------------------------------
// Scenario files

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub bbox: BoundingBox,
    #[serde(default)]
    pub noise: NoiseSection,
    pub periods: Vec<PeriodSpec>,
    #[serde(default)]
    pub corridors: Vec<CorridorSpec>,
    #[serde(default)]
    pub loiters: Vec<LoiterSpec>,
    #[serde(default)]
    pub shuttles: Vec<ShuttleSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub jitter_m: f64,
    pub dropout_p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSpec {
    pub start: String,
    pub days: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSpec {
    pub polyline: Vec<[f64; 2]>,
    pub vessels: u32,
    #[serde(default = "default_corridor_speed")]
    pub speed_kn: f64,
    #[serde(default = "default_report_interval")]
    pub report_interval_s: u32,
    pub category: String,
    #[serde(default)]
    pub daily_start_min: u32,
    #[serde(default = "default_corridor_duration")]
    pub daily_duration_min: u32,
}

fn default_corridor_speed() -> f64 {
    10.0
}

fn default_report_interval() -> u32 {
    60
}

fn default_corridor_duration() -> u32 {
    360
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoiterSpec {
    pub center: [f64; 2],
    pub dwell_min: u32,
    pub vessels: u32,
    pub category: String,
    #[serde(default)]
    pub daily_start_min: u32,
    #[serde(default)]
    pub exit_and_return: bool,
    #[serde(default = "default_excursion_m")]
    pub excursion_m: f64,
    #[serde(default = "default_corridor_speed")]
    pub excursion_speed_kn: f64,
    #[serde(default = "default_report_interval")]
    pub report_interval_s: u32,
}

fn default_excursion_m() -> f64 {
    4500.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuttleSpec {
    pub endpoints: [[f64; 2]; 2],
    pub vessels: u32,
    #[serde(default = "default_round_trips")]
    pub round_trips_per_day: u32,
    #[serde(default = "default_shuttle_speed")]
    pub speed_kn: f64,
    pub category: String,
    /// Inclusive [start, end] dates.
    pub active: [String; 2],
    #[serde(default)]
    pub daily_start_min: u32,
    #[serde(default = "default_layover")]
    pub layover_min: u32,
    #[serde(default = "default_report_interval")]
    pub report_interval_s: u32,
}

fn default_round_trips() -> u32 {
    1
}

fn default_shuttle_speed() -> f64 {
    15.0
}

fn default_layover() -> u32 {
    45
}

pub fn scenario_from_toml_str(text: &str) -> Result<synthgen::Scenario> {
    let file: ScenarioFile = toml::from_str(text)
        .map_err(|e| Error::Config(format!("scenario parse error: {e}")))?;
    if file.config_version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "unsupported config_version {} (expected {CONFIG_VERSION})",
            file.config_version
        )));
    }
    let mut primitives = Vec::new();
    for c in &file.corridors {
        primitives.push(synthgen::Primitive::Corridor(synthgen::Corridor {
            polyline: c.polyline.iter().map(|p| (p[0], p[1])).collect(),
            vessels: c.vessels,
            speed_kn: c.speed_kn,
            report_interval_s: c.report_interval_s,
            category: c.category.parse()?,
            daily_start_min: c.daily_start_min,
            daily_duration_min: c.daily_duration_min,
        }));
    }
    for l in &file.loiters {
        primitives.push(synthgen::Primitive::Loiter(synthgen::LoiterZone {
            center: (l.center[0], l.center[1]),
            dwell_min: l.dwell_min,
            vessels: l.vessels,
            category: l.category.parse()?,
            daily_start_min: l.daily_start_min,
            exit_and_return: l.exit_and_return,
            excursion_m: l.excursion_m,
            excursion_speed_kn: l.excursion_speed_kn,
            report_interval_s: l.report_interval_s,
        }));
    }
    for s in &file.shuttles {
        primitives.push(synthgen::Primitive::Shuttle(synthgen::Shuttle {
            endpoints: (
                (s.endpoints[0][0], s.endpoints[0][1]),
                (s.endpoints[1][0], s.endpoints[1][1]),
            ),
            vessels: s.vessels,
            round_trips_per_day: s.round_trips_per_day,
            speed_kn: s.speed_kn,
            category: s.category.parse()?,
            active_start: parse_date(&s.active[0])?,
            active_end: parse_date(&s.active[1])?,
            daily_start_min: s.daily_start_min,
            layover_min: s.layover_min,
            report_interval_s: s.report_interval_s,
        }));
    }
    let scenario = synthgen::Scenario {
        seed: file.seed,
        bbox: file.bbox,
        periods: file
            .periods
            .iter()
            .map(|p| {
                Ok(synthgen::Period {
                    start: parse_date(&p.start)?,
                    days: p.days,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        noise: synthgen::Noise {
            jitter_m: file.noise.jitter_m,
            dropout_p: file.noise.dropout_p,
        },
        primitives,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<synthgen::Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scenario_from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
config_version = 1
seed = 7

[input]
paths = ["fleet.csv"]

[grid]
origin_lat = 48.25
origin_lon = -61.5

[grid.bbox]
min_lat = 46.0
min_lon = -66.0
max_lat = 50.5
max_lon = -57.0

[output]
dir = "out"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.dt_s, 60);
        assert_eq!(cfg.segmentation.window_s, 10800);
        assert_eq!(cfg.segmentation.max_gap_s, 900);
        assert_eq!(cfg.windows.len(), 4);
        assert_eq!(cfg.windows[0].label, "pre");
        assert_eq!(cfg.emit.len(), 5);
        assert_eq!(cfg.grid.edge_len_m, 3722.0);
        assert_eq!(cfg.quantization.low_percentile, 1.0);
        assert_eq!(cfg.config_sha256.len(), 64);
    }

    #[test]
    fn dt_must_divide_segment_window() {
        let text = MINIMAL.replace(
            "[output]",
            "[resample]\ndt_s = 70\n\n[output]",
        );
        let err = PipelineConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("divide"));
    }

    #[test]
    fn custom_windows_must_not_overlap() {
        let text = MINIMAL.replace(
            "[output]",
            "[[windows.custom]]\nlabel = \"a\"\nstart = \"2020-01-01\"\nend = \"2020-06-30\"\n\n\
             [[windows.custom]]\nlabel = \"b\"\nstart = \"2020-06-30\"\nend = \"2020-12-31\"\n\n[output]",
        );
        assert!(PipelineConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = MINIMAL.replace("config_version = 1", "config_version = 9");
        assert!(PipelineConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nmystery_knob = true");
        assert!(PipelineConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn target_area_cross_check() {
        let text = MINIMAL.replace(
            "origin_lon = -61.5",
            "origin_lon = -61.5\nedge_len_m = 3722.0\ntarget_cell_area_km2 = 36.0",
        );
        PipelineConfig::from_toml_str(&text).unwrap();
        let bad = MINIMAL.replace(
            "origin_lon = -61.5",
            "origin_lon = -61.5\nedge_len_m = 5000.0\ntarget_cell_area_km2 = 36.0",
        );
        assert!(PipelineConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn scenario_round_trip() {
        let text = r#"
config_version = 1
seed = 11

[bbox]
min_lat = 46.0
min_lon = -66.0
max_lat = 50.5
max_lon = -57.0

[noise]
jitter_m = 20.0
dropout_p = 0.01

[[periods]]
start = "2019-06-01"
days = 3

[[corridors]]
polyline = [[47.9, -63.0], [47.9, -62.2]]
vessels = 4
category = "commercial"
daily_start_min = 360
daily_duration_min = 120

[[loiters]]
center = [49.3, -61.2]
dwell_min = 120
vessels = 2
category = "fishing"
daily_start_min = 545
exit_and_return = true

[[shuttles]]
endpoints = [[47.3, -60.0], [47.65, -60.45]]
vessels = 1
category = "passenger"
active = ["2019-01-01", "2019-12-31"]
daily_start_min = 510
"#;
        let scenario = scenario_from_toml_str(text).unwrap();
        assert_eq!(scenario.primitives.len(), 3);
        assert_eq!(scenario.periods[0].days, 3);
        assert_eq!(scenario.noise.dropout_p, 0.01);
    }
}
