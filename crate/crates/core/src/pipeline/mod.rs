//! Batch orchestration: segment, describe, decompose, refine, write maps and
//! evaluate against ground truth.

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use image::{GrayImage, RgbImage};
use log::{info, warn};
use rayon::prelude::*;

pub use config::{PipelineConfig, Stage};

use crate::error::{Error, Result};
use crate::features::{apply_priors, compute_priors, extract_features_with, FeatureMatrix, FilterBank, PriorVector};
use crate::graph::build_laplacian;
use crate::metrics::{self, BinaryMask, EvaluationReport, ImageScores, ScoreMap};
use crate::refinement::refine;
use crate::saliency::{saliency_from_sparse, SaliencyMap};
use crate::solver::{decompose, DecompositionResult};
use crate::superpixel::{segment, SuperpixelMap};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];
const GT_EXTENSIONS: [&str; 2] = ["png", "bmp"];

/// Wall-clock per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub segment: Duration,
    pub features: Duration,
    pub graph: Duration,
    pub decompose: Duration,
    pub refine: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.segment + self.features + self.graph + self.decompose + self.refine
    }
}

/// Every intermediate product of one detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub map: SuperpixelMap,
    pub features: FeatureMatrix,
    pub priors: PriorVector,
    pub decomposition: DecompositionResult,
    pub coarse: SaliencyMap,
    pub refined: Option<SaliencyMap>,
    pub timings: StageTimings,
}

impl Detection {
    /// The refined map when present, otherwise the coarse one.
    pub fn final_map(&self) -> &SaliencyMap {
        self.refined.as_ref().unwrap_or(&self.coarse)
    }
}

/// Runs the full per-image pipeline with a shared, read-only filter bank.
#[derive(Debug)]
pub struct Detector {
    config: PipelineConfig,
    bank: FilterBank,
}

impl Detector {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Detector {
            config,
            bank: FilterBank::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn detect(&self, image: &RgbImage) -> Result<Detection> {
        let cfg = &self.config;
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let map = segment(image, cfg.target_regions)?;
        timings.segment = t.elapsed();

        let t = Instant::now();
        let features = extract_features_with(image, &map, &self.bank)?;
        let priors = compute_priors(image, &map, &features)?;
        let weighted = apply_priors(&features, &priors)?;
        timings.features = t.elapsed();

        let t = Instant::now();
        let laplacian = build_laplacian(&features, &map, cfg.sigma_sq_graph)?;
        timings.graph = t.elapsed();

        let t = Instant::now();
        let decomposition = decompose(&weighted, &laplacian, &cfg.solver)?;
        let coarse = saliency_from_sparse(&decomposition.sparse);
        timings.decompose = t.elapsed();

        let refined = match cfg.stage {
            Stage::Coarse => None,
            Stage::Refined => {
                let t = Instant::now();
                let r = refine(&coarse, &features, &map, cfg.lambda, cfg.tau2_factor)?;
                timings.refine = t.elapsed();
                Some(r)
            }
        };

        Ok(Detection {
            map,
            features,
            priors,
            decomposition,
            coarse,
            refined,
            timings,
        })
    }
}

/// Outcome of [`run_image`].
#[derive(Debug, Clone)]
pub struct ImageRun {
    pub stem: String,
    pub coarse: GrayImage,
    pub refined: Option<GrayImage>,
    pub saliency: SaliencyMap,
    pub region_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub timings: StageTimings,
}

impl ImageRun {
    pub fn final_map(&self) -> &GrayImage {
        self.refined.as_ref().unwrap_or(&self.coarse)
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_owned())
}

fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Detect saliency in one image file and write `<stem>_coarse.png` (and
/// `<stem>_refined.png` for the refined stage) into `output`.
pub fn run_image(detector: &Detector, path: &Path, output: &Path) -> Result<ImageRun> {
    let image = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let stem = stem_of(path);
    let detection = detector.detect(&image)?;

    let coarse = detection.coarse.render(&detection.map)?;
    save_png(&coarse, &output.join(format!("{stem}_coarse.png")))?;
    let refined = match &detection.refined {
        Some(r) => {
            let img = r.render(&detection.map)?;
            save_png(&img, &output.join(format!("{stem}_refined.png")))?;
            Some(img)
        }
        None => None,
    };
    if detector.config().trace {
        let trace_path = output.join(format!("{stem}_trace.csv"));
        let file = fs::File::create(&trace_path).map_err(|source| Error::Io {
            path: trace_path.clone(),
            source,
        })?;
        detection
            .decomposition
            .write_trace_csv(BufWriter::new(file))
            .map_err(|source| Error::Io {
                path: trace_path,
                source,
            })?;
    }

    Ok(ImageRun {
        stem,
        coarse,
        refined,
        saliency: detection.final_map().clone(),
        region_count: detection.map.region_count(),
        iterations: detection.decomposition.iterations,
        converged: detection.decomposition.converged,
        timings: detection.timings,
    })
}

/// Result of a dataset run. `outcomes` is sorted by image path.
#[derive(Debug)]
pub struct DatasetRun {
    pub outcomes: Vec<(PathBuf, Result<ImageRun>)>,
    pub report: Option<EvaluationReport>,
    pub log: Vec<String>,
}

impl DatasetRun {
    pub fn succeeded(&self) -> usize {
        self.outcomes.iter().filter(|(_, r)| r.is_ok()).count()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.len() - self.succeeded()
    }
}

fn has_extension(path: &Path, allowed: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| allowed.contains(&e.to_ascii_lowercase().as_str()))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut images: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_extension(p, &IMAGE_EXTENSIONS))
        .collect();
    images.sort();
    Ok(images)
}

/// Ground-truth mask for `stem`, matched by file stem.
pub fn find_ground_truth(gt_dir: &Path, stem: &str) -> Option<PathBuf> {
    GT_EXTENSIONS
        .iter()
        .flat_map(|ext| [ext.to_string(), ext.to_ascii_uppercase()])
        .map(|ext| gt_dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BinaryMask::from_gray(&img.to_luma8()))
}

fn format_timings(t: &StageTimings) -> String {
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    format!(
        "segment={:.1}ms features={:.1}ms graph={:.1}ms decompose={:.1}ms refine={:.1}ms total={:.1}ms",
        ms(t.segment),
        ms(t.features),
        ms(t.graph),
        ms(t.decompose),
        ms(t.refine),
        ms(t.total())
    )
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    fill(&mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Process every image in `config.input`, writing maps, `run.log` and, when
/// ground truth is configured, `metrics.csv`, `pr.csv` and `roc.csv` into
/// `config.output`.
///
/// Per-image failures are recorded and do not stop the batch. Errors are
/// returned only for configuration or output I/O problems, or an empty input.
pub fn run_dataset(config: &PipelineConfig) -> Result<DatasetRun> {
    let input = config
        .input
        .as_deref()
        .ok_or_else(|| Error::invalid("no input directory configured"))?;
    let output = config
        .output
        .as_deref()
        .ok_or_else(|| Error::invalid("no output directory configured"))?;
    let images = list_images(input)?;
    if images.is_empty() {
        return Err(Error::invalid(format!("no images found in {}", input.display())));
    }
    fs::create_dir_all(output).map_err(|source| Error::Io {
        path: output.to_path_buf(),
        source,
    })?;

    let detector = Detector::new(config.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<(PathBuf, Result<ImageRun>)> = pool.install(|| {
        images
            .par_iter()
            .map(|p| (p.clone(), run_image(&detector, p, output)))
            .collect()
    });

    let mut log = Vec::new();
    let mut scores: Vec<ImageScores> = Vec::new();
    for (path, outcome) in &outcomes {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let run = match outcome {
            Ok(run) => run,
            Err(e) => {
                warn!("{name}: {e}");
                log.push(format!("error {name}: {e}"));
                continue;
            }
        };
        log.push(format!(
            "ok {name} regions={} iterations={} converged={} {}",
            run.region_count,
            run.iterations,
            run.converged,
            format_timings(&run.timings)
        ));
        let Some(gt_dir) = &config.gt else { continue };
        let Some(gt_path) = find_ground_truth(gt_dir, &run.stem) else {
            warn!("{name}: no ground truth, excluded from metrics");
            log.push(format!("warn {name}: no ground truth, excluded from metrics"));
            continue;
        };
        let evaluated = load_mask(&gt_path)
            .and_then(|gt| metrics::evaluate(run.stem.clone(), &ScoreMap::from_gray(run.final_map()), &gt));
        match evaluated {
            Ok(s) => scores.push(s),
            Err(e) => log.push(format!("warn {name}: ground truth unusable: {e}")),
        }
    }

    let report = if scores.is_empty() {
        None
    } else {
        let report = EvaluationReport::from_images(scores)?;
        write_file(&output.join("metrics.csv"), |w| report.write_metrics_csv(w))?;
        write_file(&output.join("pr.csv"), |w| report.write_pr_csv(w))?;
        write_file(&output.join("roc.csv"), |w| report.write_roc_csv(w))?;
        info!(
            "{} images evaluated: wf={:.4} or={:.4} auc={:.4} mae={:.4}",
            report.per_image.len(),
            report.wf,
            report.or_score,
            report.auc,
            report.mae
        );
        Some(report)
    };
    write_file(&output.join("run.log"), |w| {
        log.iter().try_for_each(|line| writeln!(w, "{line}"))
    })?;

    Ok(DatasetRun {
        outcomes,
        report,
        log,
    })
}
