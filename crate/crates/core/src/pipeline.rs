//! End-to-end pipeline: ingest -> segment/resample -> discretize -> fit
//! models -> metrics -> aggregate -> export, with a run manifest.
//!
//! Determinism contract: identical (config, inputs, seed) produce
//! byte-identical artifacts for any worker count. Integer accumulators
//! merge exactly in any order; every floating-point reduction runs in a
//! fixed state-index order; parallel betweenness sums fixed source blocks
//! in block order. The manifest's timing block is the only
//! run-to-run-variable output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::aggregate::{
    fit_thresholds, globalize, GlobalSummary, MonotoneSpline, PhiSummary, Thresholds,
};
use crate::config::{hex_string, PipelineConfig, CONFIG_VERSION};
use crate::error::{Error, Result};
use crate::hexgrid::discretize;
use crate::ingest::{
    self, AisRecord, CategoryKey, CategoryTable, Rejection, TimeWindow,
};
use crate::markov::{write_model_csv, write_pi_csv, MarkovModel, TransitionStats};
use crate::metrics::{
    average_path_length, betweenness, betweenness_normalized, detect_communities,
    dwell_time_magnitude, mobility_magnitude, modularity, MobilityGraph, PathLengthSummary,
    WeightMode,
};
use crate::trajectory::{resample_or_singleton, segment_stream, RawPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub rows_read: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamInfo {
    pub category: String,
    pub window: String,
    pub records: u64,
    pub n_states: usize,
    pub n_transitions: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_version: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub inputs: Vec<InputInfo>,
    pub rows_read: u64,
    pub records_emitted: u64,
    pub rows_rejected: u64,
    pub records_used: u64,
    pub records_unassigned: u64,
    pub samples_dropped_out_of_bounds: u64,
    pub streams: Vec<StreamInfo>,
    pub artifacts: Vec<ArtifactInfo>,
    pub timings_ms: BTreeMap<String, u64>,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

struct StreamOutput {
    category: CategoryKey,
    window: String,
    records: u64,
    dropped_samples: u64,
    model: MarkovModel,
    mm: Vec<u64>,
    dtm: Vec<u64>,
    c_raw: Vec<f64>,
    c_norm: Vec<f64>,
    communities: Vec<usize>,
    apl: Option<PathLengthSummary>,
    modularity: Option<f64>,
    phi: PhiSummary,
    resampled_dump: Option<Vec<u8>>,
}

pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    let t_start = Instant::now();
    let mut timings: BTreeMap<String, u64> = BTreeMap::new();

    let table = match &cfg.category_table_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            CategoryTable::from_tsv(&text)?
        }
        None => CategoryTable::default(),
    };

    // Ingest all inputs with a cumulative row counter so the shared
    // rejection log stays unambiguous.
    let t_ingest = Instant::now();
    let mut inputs = Vec::new();
    let mut parsed = Vec::new();
    let mut rejections: Vec<Rejection> = Vec::new();
    let mut rows_read = 0u64;
    let mut row_offset = 0u64;
    for path in &cfg.input_paths {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let sha256 = hex_string(&sha2::Sha256::digest(&bytes));
        let out = ingest::parse_ais_csv(bytes.as_slice(), &cfg.schema, row_offset)?;
        rows_read += out.rows_read;
        row_offset += out.rows_read + 1; // header line
        inputs.push(InputInfo {
            path: path.display().to_string(),
            sha256,
            rows_read: out.rows_read,
        });
        parsed.extend(out.records);
        rejections.extend(out.rejections);
    }
    let records_emitted = parsed.len() as u64;

    let streams_by_vessel = ingest::group_by_vessel(&parsed);
    rejections.extend(streams_by_vessel.duplicate_rejections.iter().cloned());
    let records_used: u64 = streams_by_vessel
        .by_vessel
        .values()
        .map(|v| v.len() as u64)
        .sum();
    let rows_rejected = rejections.len() as u64;
    timings.insert("ingest_ms".into(), t_ingest.elapsed().as_millis() as u64);

    if records_used == 0 {
        return Err(Error::NoUsableRecords);
    }
    if rows_read > 0 {
        let rate = rows_rejected as f64 / rows_read as f64;
        if rate > cfg.max_reject_fraction {
            return Err(Error::RejectionTolerance {
                rate,
                tolerance: cfg.max_reject_fraction,
            });
        }
    }

    // Partition per (category x window), keeping per-vessel grouping.
    let t_partition = Instant::now();
    let window_bounds: Vec<(i64, i64)> = cfg
        .windows
        .iter()
        .map(|w| (w.start_ts(), w.end_ts_exclusive()))
        .collect();
    let mut streams: BTreeMap<(CategoryKey, String), BTreeMap<u64, Vec<AisRecord>>> = cfg
        .emit
        .iter()
        .flat_map(|&key| {
            cfg.windows
                .iter()
                .map(move |w| ((key, w.label.clone()), BTreeMap::new()))
        })
        .collect();
    let mut records_unassigned = 0u64;
    for (&vessel, records) in &streams_by_vessel.by_vessel {
        for rec in records {
            let Some(win) = window_bounds
                .iter()
                .position(|&(s, e)| rec.ts >= s && rec.ts < e)
            else {
                records_unassigned += 1;
                continue;
            };
            let label = &cfg.windows[win].label;
            let cat = table.categorize(rec.ship_type);
            for key in [CategoryKey::All, CategoryKey::Cat(cat)] {
                if let Some(stream) = streams.get_mut(&(key, label.clone())) {
                    stream.entry(vessel).or_default().push(*rec);
                }
            }
        }
    }
    timings.insert(
        "partition_ms".into(),
        t_partition.elapsed().as_millis() as u64,
    );

    // Heavy, embarrassingly parallel stage.
    let t_process = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let stream_list: Vec<(&(CategoryKey, String), &BTreeMap<u64, Vec<AisRecord>>)> =
        streams.iter().collect();
    let outputs: Vec<Result<StreamOutput>> = pool.install(|| {
        stream_list
            .par_iter()
            .map(|((key, label), vessels)| process_stream(cfg, *key, label, vessels))
            .collect()
    });
    let mut outputs: Vec<StreamOutput> = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    timings.insert("process_ms".into(), t_process.elapsed().as_millis() as u64);

    // Clip thresholds: pooled per vessel type over all windows, one pair per
    // metric.
    let t_write = Instant::now();
    let spline = MonotoneSpline::new(&cfg.quantization.knots)?;
    let mut thresholds: BTreeMap<(CategoryKey, &'static str), Thresholds> = BTreeMap::new();
    for key in &cfg.emit {
        for metric in ["MM", "DTM", "C"] {
            let pool: Vec<f64> = outputs
                .iter()
                .filter(|o| o.category == *key)
                .flat_map(|o| match metric {
                    "MM" => o.mm.iter().map(|&v| v as f64).collect::<Vec<_>>(),
                    "DTM" => o.dtm.iter().map(|&v| v as f64).collect::<Vec<_>>(),
                    _ => o.c_raw.clone(),
                })
                .collect();
            if !pool.is_empty() {
                thresholds.insert((*key, metric), fit_thresholds(&pool, &cfg.quantization)?);
            }
        }
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut artifacts: Vec<ArtifactInfo> = Vec::new();
    let mut stream_infos = Vec::new();
    let mut samples_dropped = 0u64;
    for out in &mut outputs {
        let rel_dir = PathBuf::from(out.category.as_str()).join(&out.window);
        let dir = cfg.out_dir.join(&rel_dir);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        samples_dropped += out.dropped_samples;

        let mut model_csv = Vec::new();
        write_model_csv(&mut model_csv, &out.model).expect("write to vec");
        artifacts.push(write_artifact(&cfg.out_dir, &rel_dir.join("model.csv"), &model_csv)?);

        let mut pi_csv = Vec::new();
        write_pi_csv(&mut pi_csv, &out.model).expect("write to vec");
        artifacts.push(write_artifact(&cfg.out_dir, &rel_dir.join("pi.csv"), &pi_csv)?);

        let metrics_csv = render_metrics_csv(out);
        artifacts.push(write_artifact(
            &cfg.out_dir,
            &rel_dir.join("metrics.csv"),
            metrics_csv.as_bytes(),
        )?);

        let q = |metric: &'static str, value: f64| -> f64 {
            thresholds
                .get(&(out.category, metric))
                .map(|t| crate::aggregate::quantize(value, t, &spline))
                .unwrap_or(0.0)
        };
        let heatmap = render_heatmap_geojson(cfg, out, &q)?;
        artifacts.push(write_artifact(
            &cfg.out_dir,
            &rel_dir.join("heatmap.geojson"),
            heatmap.as_bytes(),
        )?);

        let summary = GlobalSummary {
            window: out.window.clone(),
            category: out.category.as_str().to_string(),
            n_states: out.model.n_states(),
            n_transitions: out.model.total_transitions,
            avg_path_length: out.apl.map(|s| s.mean),
            modularity: out.modularity,
            phi: out.phi.clone(),
            excluded_pairs: out.apl.map(|s| s.unreachable_pairs).unwrap_or(0),
        };
        let summary_json = serde_json::to_vec_pretty(&summary)?;
        artifacts.push(write_artifact(
            &cfg.out_dir,
            &rel_dir.join("summary.json"),
            &summary_json,
        )?);

        if let Some(dump) = out.resampled_dump.take() {
            artifacts.push(write_artifact(
                &cfg.out_dir,
                &rel_dir.join("resampled.csv"),
                &dump,
            )?);
        }

        stream_infos.push(StreamInfo {
            category: out.category.as_str().to_string(),
            window: out.window.clone(),
            records: out.records,
            n_states: out.model.n_states(),
            n_transitions: out.model.total_transitions,
        });
    }

    // Rejection log, ordered by row number.
    rejections.sort_by(|a, b| a.row.cmp(&b.row).then_with(|| a.reason.cmp(&b.reason)));
    let mut log = String::new();
    for r in &rejections {
        log.push_str(&r.log_line());
        log.push('\n');
    }
    artifacts.push(write_artifact(
        &cfg.out_dir,
        Path::new("rejections.log"),
        log.as_bytes(),
    )?);
    timings.insert("write_ms".into(), t_write.elapsed().as_millis() as u64);
    timings.insert("total_ms".into(), t_start.elapsed().as_millis() as u64);

    let manifest = Manifest {
        config_version: CONFIG_VERSION,
        config_sha256: cfg.config_sha256.clone(),
        seed: cfg.seed,
        workers: cfg.workers,
        inputs,
        rows_read,
        records_emitted,
        rows_rejected,
        records_used,
        records_unassigned,
        samples_dropped_out_of_bounds: samples_dropped,
        streams: stream_infos,
        artifacts,
        timings_ms: timings,
    };
    let manifest_json = serde_json::to_vec_pretty(&manifest)?;
    atomic_write(&cfg.out_dir.join("manifest.json"), &manifest_json)?;

    Ok(RunReport {
        out_dir: cfg.out_dir.clone(),
        manifest,
    })
}

fn process_stream(
    cfg: &PipelineConfig,
    category: CategoryKey,
    window: &str,
    vessels: &BTreeMap<u64, Vec<AisRecord>>,
) -> Result<StreamOutput> {
    let records: u64 = vessels.values().map(|v| v.len() as u64).sum();

    // Vessels are independent; integer merge makes the order irrelevant.
    let per_vessel: Vec<(TransitionStats, u64, Option<Vec<u8>>)> = vessels
        .par_iter()
        .map(|(&vessel_id, recs)| {
            let points: Vec<RawPoint> = recs.iter().map(RawPoint::from).collect();
            let mut stats = TransitionStats::new();
            let mut dropped = 0u64;
            let mut dump: Option<Vec<u8>> = cfg.dump_resampled.then(Vec::new);
            for seg in segment_stream(vessel_id, &points, &cfg.segmentation) {
                let Some(rt) = resample_or_singleton(&seg, cfg.dt_s) else {
                    continue;
                };
                if let Some(buf) = &mut dump {
                    for (k, &(lat, lon)) in rt.positions.iter().enumerate() {
                        let ts = rt.start_ts + rt.dt_s * k as i64;
                        writeln!(buf, "{},{},{},{}", vessel_id, ingest::format_ts(ts), lat, lon)
                            .expect("write to vec");
                    }
                }
                let disc = discretize(&rt, &cfg.grid);
                dropped += disc.dropped_samples;
                for seq in &disc.sequences {
                    stats.accumulate(seq);
                }
            }
            (stats, dropped, dump)
        })
        .collect();

    let mut stats = TransitionStats::new();
    let mut dropped_samples = 0u64;
    let mut resampled_dump: Option<Vec<u8>> = cfg.dump_resampled.then(|| {
        let mut header = Vec::new();
        writeln!(header, "vessel_id,timestamp,lat,lon").expect("write to vec");
        header
    });
    for (vessel_stats, dropped, dump) in per_vessel {
        stats.merge(vessel_stats);
        dropped_samples += dropped;
        if let (Some(all), Some(mine)) = (&mut resampled_dump, dump) {
            all.extend(mine);
        }
    }

    let model = MarkovModel::fit(&stats)?;
    let mm_map = mobility_magnitude(&stats);
    let dtm_map = dwell_time_magnitude(&stats, cfg.include_terminal_in_dtm);
    let mm: Vec<u64> = model.states.iter().map(|c| mm_map[c]).collect();
    let dtm: Vec<u64> = model.states.iter().map(|c| dtm_map[c]).collect();

    let mode = if cfg.count_weighted_modularity {
        WeightMode::TransitionCounts
    } else {
        WeightMode::Probability
    };
    let graph = MobilityGraph::from_model(&model, mode);
    let c_raw = betweenness(&graph);
    let c_norm = betweenness_normalized(&c_raw);
    let apl = average_path_length(&graph).ok();
    let communities = detect_communities(&graph, cfg.seed);
    let q = modularity(&graph, &communities).ok();

    let phi = match &model.pi {
        Some(pi) => {
            let as_f64 = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
            PhiSummary {
                mm: Some(globalize(&as_f64(&mm), pi)?),
                dtm: Some(globalize(&as_f64(&dtm), pi)?),
                c: Some(globalize(&c_raw, pi)?),
            }
        }
        None => PhiSummary {
            mm: None,
            dtm: None,
            c: None,
        },
    };

    Ok(StreamOutput {
        category,
        window: window.to_string(),
        records,
        dropped_samples,
        model,
        mm,
        dtm,
        c_raw,
        c_norm,
        communities,
        apl,
        modularity: q,
        phi,
        resampled_dump,
    })
}

fn render_metrics_csv(out: &StreamOutput) -> String {
    let mut text = String::from("cell_q,cell_r,MM,DTM_seconds,C_raw,C_normalized,community\n");
    for (i, cell) in out.model.states.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.q, cell.r, out.mm[i], out.dtm[i], out.c_raw[i], out.c_norm[i], out.communities[i]
        ));
    }
    text
}

#[derive(Serialize)]
struct FeatureCollection<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<Feature<'a>>,
}

#[derive(Serialize)]
struct Feature<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: Geometry,
    properties: CellProperties<'a>,
}

#[derive(Serialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: &'static str,
    /// One closed ring of [lon, lat] positions (RFC 7946 order).
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct CellProperties<'a> {
    cell_q: i32,
    cell_r: i32,
    #[serde(rename = "MM")]
    mm: u64,
    #[serde(rename = "DTM_s")]
    dtm_s: u64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "MM_q")]
    mm_q: f64,
    #[serde(rename = "DTM_q")]
    dtm_q: f64,
    #[serde(rename = "C_q")]
    c_q: f64,
    community: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
}

fn render_heatmap_geojson(
    cfg: &PipelineConfig,
    out: &StreamOutput,
    quantized: &dyn Fn(&'static str, f64) -> f64,
) -> Result<String> {
    let features: Vec<Feature> = out
        .model
        .states
        .iter()
        .enumerate()
        .map(|(i, &cell)| Feature {
            kind: "Feature",
            geometry: Geometry {
                kind: "Polygon",
                coordinates: vec![cfg.grid.cell_ring_lonlat(cell)],
            },
            properties: CellProperties {
                cell_q: cell.q,
                cell_r: cell.r,
                mm: out.mm[i],
                dtm_s: out.dtm[i],
                c: out.c_raw[i],
                mm_q: quantized("MM", out.mm[i] as f64),
                dtm_q: quantized("DTM", out.dtm[i] as f64),
                c_q: quantized("C", out.c_raw[i]),
                community: out.communities[i],
                label: None,
            },
        })
        .collect();
    let fc = FeatureCollection {
        kind: "FeatureCollection",
        features,
    };
    Ok(serde_json::to_string_pretty(&fc)?)
}

fn write_artifact(out_root: &Path, rel: &Path, bytes: &[u8]) -> Result<ArtifactInfo> {
    let path = out_root.join(rel);
    atomic_write(&path, bytes)?;
    Ok(ArtifactInfo {
        path: rel.to_string_lossy().replace('\\', "/"),
        sha256: hex_string(&sha2::Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Write-temp-then-rename so readers never observe partial files.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Window lookup helper shared by `run` and tests.
pub fn window_label_for(windows: &[TimeWindow], ts: i64) -> Option<&str> {
    windows
        .iter()
        .find(|w| w.contains_ts(ts))
        .map(|w| w.label.as_str())
}
