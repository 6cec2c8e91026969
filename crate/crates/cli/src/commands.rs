//! The `measure`, `evaluate` and `synth` commands.
//!
//! Files are paired by stem: `images/<stem>.{pgm,png}`, `<gt>/<stem>.json`,
//! `<pred>/<stem>.json`. Images are independent work units; with more than
//! one job they are processed on a thread pool, and results are always
//! merged in lexicographic stem order.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use neurometry_core::accuracy::measurement_accuracy;
use neurometry_core::annotations::{
    parse_document, rings_from_mask, serialize_annotations, serialize_rle_instances, AnnotationSet,
    LoadedInstances, PolygonInstance,
};
use neurometry_core::image_io::{load_grayscale, normalize_to_u8, resize, GrayImage, ResizeMode};
use neurometry_core::masks::{union_mask, Connectivity};
use neurometry_core::matching::match_instances;
use neurometry_core::metrics::{SegMetrics, Tally};
use neurometry_core::morphometry::{measure_all, Measurements};
use neurometry_core::synth::{generate_scene, perturb, PerturbSpec, SceneConfig};

use crate::overlay::render_overlay;
use crate::report::{
    standard_notes, write_accuracy_csv, write_measurements_csv, write_metrics_csv,
    write_report_json, Aggregation, Failure, ImageReport, MeasurementRecord, ReportBundle,
    Settings, Source,
};

pub const DEFAULT_RESIZE: (usize, usize) = (640, 640);

#[derive(Debug, Clone)]
pub struct MeasureOptions {
    pub images: PathBuf,
    pub annotations: PathBuf,
    pub out: PathBuf,
    pub resize: Option<(usize, usize)>,
    pub connectivity: Connectivity,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub images: PathBuf,
    pub out: PathBuf,
    pub threshold: f64,
    pub connectivity: Connectivity,
    pub resize: Option<(usize, usize)>,
    pub aggregation: Aggregation,
    pub jobs: usize,
}

/// Parses `WxH` or `none`.
pub fn parse_resize(s: &str) -> Result<Option<(usize, usize)>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("resize must be WxH or none, got {s:?}"))?;
    let (w, h): (usize, usize) = (w.trim().parse()?, h.trim().parse()?);
    if w == 0 || h == 0 {
        bail!("resize dimensions must be positive, got {s:?}");
    }
    Ok(Some((w, h)))
}

fn stems_with_ext(dir: &Path, exts: &[&str]) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

fn find_image(dir: &Path, stem: &str) -> Result<PathBuf> {
    for ext in ["pgm", "png", "PGM", "PNG"] {
        let p = dir.join(format!("{stem}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    bail!(
        "{stem}: no image {stem}.pgm or {stem}.png in {}",
        dir.display()
    )
}

/// Loads, normalizes and resizes one image. Returns the working image and
/// the native dimensions.
fn load_image(path: &Path, target: Option<(usize, usize)>) -> Result<(GrayImage, (usize, usize))> {
    let raw = load_grayscale(path)?;
    let native = (raw.width, raw.height);
    let img = normalize_to_u8(&raw)?;
    let img = match target {
        Some((w, h)) => resize(&img, w, h, ResizeMode::Bilinear)?,
        None => img,
    };
    Ok((img, native))
}

fn load_instances(
    path: &Path,
    native: (usize, usize),
    target: Option<(usize, usize)>,
    connectivity: Connectivity,
) -> Result<LoadedInstances> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = parse_document(&text).with_context(|| format!("parsing {}", path.display()))?;
    if doc.dims() != native {
        bail!(
            "{}: annotation canvas {}x{} does not match image {}x{}",
            path.display(),
            doc.dims().0,
            doc.dims().1,
            native.0,
            native.1
        );
    }
    doc.to_instances(Some(target.unwrap_or(native)), connectivity)
        .with_context(|| format!("decoding {}", path.display()))
}

fn records(image_id: &str, source: Source, ms: Vec<(u32, Measurements)>) -> Vec<MeasurementRecord> {
    ms.into_iter()
        .map(|(instance_id, measurements)| MeasurementRecord {
            image_id: image_id.to_string(),
            instance_id,
            source,
            measurements,
        })
        .collect()
}

fn run_jobs<T: Send>(
    jobs: usize,
    stems: &[String],
    f: impl Fn(&str) -> T + Sync + Send,
) -> Result<Vec<T>> {
    if jobs <= 1 {
        return Ok(stems.iter().map(|s| f(s)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| stems.par_iter().map(|s| f(s)).collect()))
}

/// Measures every annotated instance. Writes `measurements.csv`.
pub fn measure(opts: &MeasureOptions) -> Result<PathBuf> {
    let ann = stems_with_ext(&opts.annotations, &["json"])?;
    let imgs = stems_with_ext(&opts.images, &["pgm", "png"])?;
    if let Some(stem) = imgs.symmetric_difference(&ann).next() {
        bail!("{stem}: image and annotation files do not pair up by stem");
    }
    let stems: Vec<String> = ann.into_iter().collect();
    let results = run_jobs(
        opts.jobs,
        &stems,
        |stem| -> Result<Vec<MeasurementRecord>> {
            let (img, native) = load_image(&find_image(&opts.images, stem)?, opts.resize)?;
            let path = opts.annotations.join(format!("{stem}.json"));
            let loaded = load_instances(&path, native, opts.resize, opts.connectivity)?;
            let ms = measure_all(&loaded.instances, &img)
                .with_context(|| format!("{stem}: measuring"))?;
            Ok(records(stem, Source::Gt, ms))
        },
    )?;
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    std::fs::create_dir_all(&opts.out)?;
    let path = opts.out.join("measurements.csv");
    write_measurements_csv(&path, &all)?;
    Ok(path)
}

struct ImageOutcome {
    report: ImageReport,
    records: Vec<MeasurementRecord>,
    pairs: Vec<(Measurements, Measurements)>,
    overlay: Vec<u8>,
}

fn evaluate_image(opts: &EvaluateOptions, stem: &str) -> Result<ImageOutcome> {
    let (img, native) = load_image(&find_image(&opts.images, stem)?, opts.resize)?;
    let gt_path = opts.gt.join(format!("{stem}.json"));
    let pred_path = opts.pred.join(format!("{stem}.json"));
    let gt = load_instances(&gt_path, native, opts.resize, opts.connectivity)?;
    let pred = load_instances(&pred_path, native, opts.resize, opts.connectivity)?;

    let matches = match_instances(&gt.instances, &pred.instances, opts.threshold)?;
    let (w, h) = img.dims();
    let tally = Tally::from_match(&matches).with_pixels(
        &union_mask(&gt.instances, w, h)?,
        &union_mask(&pred.instances, w, h)?,
    )?;

    let gt_ms = measure_all(&gt.instances, &img)?;
    let pred_ms = measure_all(&pred.instances, &img)?;
    let lookup = |list: &[(u32, Measurements)], id: u32| {
        list.iter().find(|(i, _)| *i == id).map(|(_, m)| *m)
    };
    let pairs = matches
        .pairs
        .iter()
        .filter_map(|p| Some((lookup(&gt_ms, p.gt_id)?, lookup(&pred_ms, p.pred_id)?)))
        .collect();
    let overlay = render_overlay(&img, &matches, &gt.instances, &pred.instances)?.to_png();

    let mut recs = records(stem, Source::Gt, gt_ms);
    recs.extend(records(stem, Source::Pred, pred_ms));
    Ok(ImageOutcome {
        report: ImageReport {
            image_id: stem.to_string(),
            metrics: SegMetrics::from_tally(&tally),
            tally,
            matches,
            dropped_gt: gt.dropped,
            dropped_pred: pred.dropped,
        },
        records: recs,
        pairs,
        overlay,
    })
}

/// Runs the full evaluation and writes `metrics.csv`, `accuracy.csv`,
/// `report.json` and `overlays/<stem>.png`. Per-image failures are
/// collected in the returned bundle rather than aborting the run.
pub fn evaluate(opts: &EvaluateOptions) -> Result<ReportBundle> {
    if !(0.0..1.0).contains(&opts.threshold) {
        bail!("threshold must lie in [0, 1), got {}", opts.threshold);
    }
    let gt_stems = stems_with_ext(&opts.gt, &["json"])?;
    let pred_stems = stems_with_ext(&opts.pred, &["json"])?;
    let stems: Vec<String> = gt_stems.union(&pred_stems).cloned().collect();

    let outcomes = run_jobs(opts.jobs, &stems, |stem| {
        if !gt_stems.contains(stem) {
            return Err(anyhow!("no ground-truth file {stem}.json"));
        }
        if !pred_stems.contains(stem) {
            return Err(anyhow!("no prediction file {stem}.json"));
        }
        evaluate_image(opts, stem)
    })?;

    let overlay_dir = opts.out.join("overlays");
    std::fs::create_dir_all(&overlay_dir)?;
    let mut per_image = Vec::new();
    let mut measurements = Vec::new();
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (stem, outcome) in stems.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                std::fs::write(overlay_dir.join(format!("{stem}.png")), &o.overlay)?;
                per_image.push(o.report);
                measurements.extend(o.records);
                pairs.extend(o.pairs);
            }
            Err(e) => failures.push(Failure {
                image_id: stem.clone(),
                error: format!("{e:#}"),
            }),
        }
    }

    let dataset = match opts.aggregation {
        Aggregation::Micro => {
            let pooled = per_image
                .iter()
                .fold(Tally::default(), |acc, r| acc.merge(&r.tally));
            SegMetrics::from_tally(&pooled)
        }
        Aggregation::PerImage => {
            let items: Vec<SegMetrics> = per_image.iter().map(|r| r.metrics.clone()).collect();
            SegMetrics::mean_of(&items)
        }
    };
    let accuracy = if pairs.is_empty() {
        None
    } else {
        Some(measurement_accuracy(&pairs)?)
    };
    let bundle = ReportBundle {
        settings: Settings {
            threshold: opts.threshold,
            connectivity: match opts.connectivity {
                Connectivity::Four => 4,
                Connectivity::Eight => 8,
            },
            resize: opts.resize,
            aggregation: opts.aggregation,
        },
        per_image,
        dataset,
        measurements,
        accuracy,
        failures,
        notes: standard_notes(opts.aggregation),
    };
    write_metrics_csv(&opts.out.join("metrics.csv"), &bundle.dataset)?;
    write_accuracy_csv(&opts.out.join("accuracy.csv"), bundle.accuracy.as_ref())?;
    write_measurements_csv(&opts.out.join("measurements.csv"), &bundle.measurements)?;
    write_report_json(&opts.out.join("report.json"), &bundle)?;
    Ok(bundle)
}

/// Synthetic corpus description: `scenes` scenes drawn from `scene`, scene
/// `i` using seed `scene.seed + i` (and `perturb.seed + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub scene: SceneConfig,
    #[serde(default)]
    pub perturb: Option<PerturbSpec>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.scenes == 0 {
            errs.push("scenes: must be at least 1".to_string());
        }
        if let Err(neurometry_core::Error::Config(e)) = self.scene.validate() {
            errs.extend(e.into_iter().map(|m| format!("scene.{m}")));
        }
        if let Some(Err(neurometry_core::Error::Config(e))) =
            self.perturb.as_ref().map(PerturbSpec::validate)
        {
            errs.extend(e.into_iter().map(|m| format!("perturb.{m}")));
        }
        if !errs.is_empty() {
            bail!("invalid config: {}", errs.join("; "));
        }
        Ok(())
    }
}

pub fn scene_stem(i: usize) -> String {
    format!("scene_{i:03}")
}

/// Writes `images/`, `gt/` and `pred/` for every scene of the config.
pub fn synth(config: &SynthConfig, out_dir: &Path) -> Result<Vec<String>> {
    config.validate()?;
    for sub in ["images", "gt", "pred"] {
        std::fs::create_dir_all(out_dir.join(sub))?;
    }
    let mut stems = Vec::with_capacity(config.scenes);
    for i in 0..config.scenes {
        let stem = scene_stem(i);
        let cfg = SceneConfig {
            seed: config.scene.seed.wrapping_add(i as u64),
            ..config.scene.clone()
        };
        let (img, cells) =
            generate_scene(&cfg).with_context(|| format!("{stem}: generating scene"))?;
        let pred = match &config.perturb {
            Some(spec) => {
                let spec = PerturbSpec {
                    seed: spec.seed.wrapping_add(i as u64),
                    ..spec.clone()
                };
                perturb(&cells, &spec, (cfg.width, cfg.height))?
            }
            None => cells.clone(),
        };
        let gt = AnnotationSet {
            image_width: cfg.width,
            image_height: cfg.height,
            instances: cells
                .iter()
                .map(|c| PolygonInstance {
                    id: c.id(),
                    class_name: "neuron".into(),
                    rings: rings_from_mask(c.mask()),
                })
                .collect(),
        };
        std::fs::write(
            out_dir.join("images").join(format!("{stem}.pgm")),
            img.to_pgm(),
        )?;
        std::fs::write(
            out_dir.join("gt").join(format!("{stem}.json")),
            serialize_annotations(&gt) + "\n",
        )?;
        std::fs::write(
            out_dir.join("pred").join(format!("{stem}.json")),
            serialize_rle_instances(cfg.width, cfg.height, &pred) + "\n",
        )?;
        stems.push(stem);
    }
    Ok(stems)
}

pub fn read_synth_config(path: &Path) -> Result<SynthConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: SynthConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(cfg)
}
