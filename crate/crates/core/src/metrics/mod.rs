//! Evaluation of saliency maps against binary ground truth: PR and ROC
//! curves over 256 thresholds, AUC, weighted F-measure, overlap ratio and MAE.

mod wf;

use std::io::Write;

use image::GrayImage;

use crate::error::{Error, Result};

pub use wf::{weighted_f, BETA_SQ};

pub const THRESHOLD_COUNT: usize = 256;
/// Cap on the adaptive binarization threshold used by the overlap ratio.
const OVERLAP_THRESHOLD_CAP: f64 = 0.98;

/// Continuous map with values in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScoreMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "{} values for a {width}x{height} map",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("score map values must lie in [0, 1]"));
        }
        Ok(ScoreMap { width, height, data })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        ScoreMap {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    /// From values that must be exactly 0 or 1.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "{} values for a {width}x{height} mask",
                values.len()
            )));
        }
        let data = values
            .iter()
            .map(|&v| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                v => Err(Error::invalid(format!("ground truth value {v} is not binary"))),
            })
            .collect::<Result<_>>()?;
        Ok(BinaryMask { width, height, data })
    }

    pub fn from_bools(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("mask size mismatch"));
        }
        Ok(BinaryMask { width, height, data })
    }

    /// Grayscale ground truth binarized at 128.
    pub fn from_gray(img: &GrayImage) -> Self {
        BinaryMask {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.pixels().map(|p| p.0[0] >= 128).collect(),
        }
    }

    pub fn to_scores(&self) -> ScoreMap {
        ScoreMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

fn check_dims(width: usize, height: usize, gt: &BinaryMask) -> Result<()> {
    if width != gt.width || height != gt.height {
        return Err(Error::invalid(format!(
            "prediction is {width}x{height} but ground truth is {}x{}",
            gt.width, gt.height
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    /// Ordered by threshold `k / 255`, `k = 0..=255`.
    pub pr: Vec<PrPoint>,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
}

fn threshold(k: usize) -> f64 {
    k as f64 / (THRESHOLD_COUNT - 1) as f64
}

/// Number of grid thresholds `k / 255` that `v` reaches, minus one.
fn threshold_bin(v: f64) -> usize {
    let top = THRESHOLD_COUNT - 1;
    let mut k = ((v * top as f64).floor().max(0.0) as usize).min(top);
    while k < top && threshold(k + 1) <= v {
        k += 1;
    }
    while k > 0 && threshold(k) > v {
        k -= 1;
    }
    k
}

fn ratio_or(num: usize, den: usize, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

/// PR and ROC curves with the prediction binarized at `pred >= k/255`.
/// Precision of an empty prediction is 1. The AUC is the exact area under
/// the ROC curve swept over every distinct prediction value, which agrees
/// with the 256-point curve for 8-bit maps and is invariant under strictly
/// monotone rescaling of the prediction.
pub fn pr_roc(pred: &ScoreMap, gt: &BinaryMask) -> Result<Curves> {
    check_dims(pred.width, pred.height, gt)?;
    let mut pos_hist = [0usize; THRESHOLD_COUNT];
    let mut neg_hist = [0usize; THRESHOLD_COUNT];
    for (&v, &g) in pred.data.iter().zip(&gt.data) {
        let b = threshold_bin(v);
        if g {
            pos_hist[b] += 1;
        } else {
            neg_hist[b] += 1;
        }
    }
    let positives: usize = pos_hist.iter().sum();
    let negatives: usize = neg_hist.iter().sum();

    let mut pr = Vec::with_capacity(THRESHOLD_COUNT);
    let mut roc = Vec::with_capacity(THRESHOLD_COUNT);
    // tp(k) = #{positives with bin >= k}
    let mut tp = positives;
    let mut fp = negatives;
    for k in 0..THRESHOLD_COUNT {
        pr.push(PrPoint {
            threshold: threshold(k),
            recall: ratio_or(tp, positives, 1.0),
            precision: ratio_or(tp, tp + fp, 1.0),
        });
        roc.push(RocPoint {
            threshold: threshold(k),
            false_positive_rate: ratio_or(fp, negatives, 0.0),
            true_positive_rate: ratio_or(tp, positives, 1.0),
        });
        tp -= pos_hist[k];
        fp -= neg_hist[k];
    }

    Ok(Curves {
        pr,
        roc,
        auc: exact_auc(&pred.data, &gt.data),
    })
}

fn exact_auc(pred: &[f64], gt: &[bool]) -> f64 {
    let positives = gt.iter().filter(|&&g| g).count();
    let negatives = gt.len() - positives;
    if positives == 0 || negatives == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let v = pred[order[i]];
        while i < order.len() && pred[order[i]] == v {
            if gt[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / positives as f64;
        let fpr = fp as f64 / negatives as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        (prev_tpr, prev_fpr) = (tpr, fpr);
    }
    area
}

/// Jaccard index of the prediction binarized at `min(2 mean, 0.98)` and the
/// ground truth. Two empty masks overlap perfectly.
pub fn overlap_ratio(pred: &ScoreMap, gt: &BinaryMask) -> Result<f64> {
    check_dims(pred.width, pred.height, gt)?;
    let mean = pred.data.iter().sum::<f64>() / pred.data.len().max(1) as f64;
    let thr = (2.0 * mean).min(OVERLAP_THRESHOLD_CAP);
    let (mut inter, mut union) = (0usize, 0usize);
    for (&v, &g) in pred.data.iter().zip(&gt.data) {
        let s = v > 0.0 && v >= thr;
        inter += (s && g) as usize;
        union += (s || g) as usize;
    }
    Ok(ratio_or(inter, union, 1.0))
}

/// Mean absolute difference between two maps.
pub fn mae(a: &ScoreMap, b: &ScoreMap) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::invalid(format!(
            "maps are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.data.len() as f64)
}

/// All metrics for one prediction / ground truth pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageScores {
    pub name: String,
    pub wf: f64,
    pub or_score: f64,
    pub auc: f64,
    pub mae: f64,
    pub curves: Curves,
}

pub fn evaluate(name: impl Into<String>, pred: &ScoreMap, gt: &BinaryMask) -> Result<ImageScores> {
    let curves = pr_roc(pred, gt)?;
    Ok(ImageScores {
        name: name.into(),
        wf: weighted_f(pred, gt)?,
        or_score: overlap_ratio(pred, gt)?,
        auc: curves.auc,
        mae: mae(pred, &gt.to_scores())?,
        curves,
    })
}

/// Dataset-level report: scalar metrics and curves averaged over images.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub pr_points: Vec<PrPoint>,
    pub roc_points: Vec<RocPoint>,
    pub auc: f64,
    pub wf: f64,
    pub or_score: f64,
    pub mae: f64,
    pub per_image: Vec<ImageScores>,
}

impl EvaluationReport {
    pub fn from_images(mut per_image: Vec<ImageScores>) -> Result<Self> {
        if per_image.is_empty() {
            return Err(Error::invalid("no images to aggregate"));
        }
        per_image.sort_by(|a, b| a.name.cmp(&b.name));
        let n = per_image.len() as f64;
        let mean = |f: fn(&ImageScores) -> f64| per_image.iter().map(f).sum::<f64>() / n;

        let pr_points = (0..THRESHOLD_COUNT)
            .map(|k| PrPoint {
                threshold: threshold(k),
                recall: per_image.iter().map(|s| s.curves.pr[k].recall).sum::<f64>() / n,
                precision: per_image.iter().map(|s| s.curves.pr[k].precision).sum::<f64>() / n,
            })
            .collect();
        let roc_points = (0..THRESHOLD_COUNT)
            .map(|k| RocPoint {
                threshold: threshold(k),
                false_positive_rate: per_image
                    .iter()
                    .map(|s| s.curves.roc[k].false_positive_rate)
                    .sum::<f64>()
                    / n,
                true_positive_rate: per_image
                    .iter()
                    .map(|s| s.curves.roc[k].true_positive_rate)
                    .sum::<f64>()
                    / n,
            })
            .collect();

        Ok(EvaluationReport {
            auc: mean(|s| s.auc),
            wf: mean(|s| s.wf),
            or_score: mean(|s| s.or_score),
            mae: mean(|s| s.mae),
            pr_points,
            roc_points,
            per_image,
        })
    }

    /// `image,wf,or,auc,mae`, one row per image then a `mean` row.
    pub fn write_metrics_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "image,wf,or,auc,mae")?;
        for s in &self.per_image {
            writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", s.name, s.wf, s.or_score, s.auc, s.mae)?;
        }
        writeln!(
            out,
            "mean,{:.6},{:.6},{:.6},{:.6}",
            self.wf, self.or_score, self.auc, self.mae
        )
    }

    pub fn write_pr_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "threshold,recall,precision")?;
        for p in &self.pr_points {
            writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.recall, p.precision)?;
        }
        Ok(())
    }

    pub fn write_roc_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "threshold,fpr,tpr")?;
        for p in &self.roc_points {
            writeln!(
                out,
                "{:.6},{:.6},{:.6}",
                p.threshold, p.false_positive_rate, p.true_positive_rate
            )?;
        }
        Ok(())
    }
}
