//! Ranking evaluation (AUROC, average-precision AUPRC, FPR@95) and the
//! distance/misclassification correlation analysis.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dna_dist::TaxonDistanceMatrix;
use crate::error::{Error, Result};
use crate::ranker::RankedList;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub auprc: f64,
    pub fpr_at_95tpr: f64,
    pub n_outliers: usize,
    pub n_inliers: usize,
}

/// One threshold: the top `rank` items are flagged as outliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rank: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurvePoints(pub Vec<CurvePoint>);

impl CurvePoints {
    pub fn points(&self) -> &[CurvePoint] {
        &self.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,tpr,fpr,precision,recall\n");
        for p in &self.0 {
            let _ = writeln!(out, "{},{},{},{},{}", p.rank, p.tpr, p.fpr, p.precision, p.recall);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub curve: CurvePoints,
}

/// Shared core: `groups` lists (outliers, inliers) per tie group from the top
/// of the ranking down.
fn evaluate_groups(groups: &[(usize, usize)]) -> Result<Evaluation> {
    let n_out: usize = groups.iter().map(|g| g.0).sum();
    let n_in: usize = groups.iter().map(|g| g.1).sum();
    if n_out == 0 {
        return Err(Error::NoOutliers);
    }
    if n_in == 0 {
        return Err(Error::NoInliers);
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut pair_wins = 0.0f64;
    let mut ap = 0.0f64;
    let mut fpr95: Option<f64> = None;
    let mut curve = Vec::with_capacity(groups.len());

    for &(g_out, g_in) in groups {
        // inliers strictly below this group, plus half credit for ties within it
        let below = n_in - fp - g_in;
        pair_wins += g_out as f64 * below as f64 + 0.5 * (g_out as f64 * g_in as f64);

        tp += g_out;
        fp += g_in;
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_out as f64;
        ap += g_out as f64 * precision;
        let fpr = fp as f64 / n_in as f64;
        if fpr95.is_none() && tp * 100 >= 95 * n_out {
            fpr95 = Some(fpr);
        }
        curve.push(CurvePoint {
            rank: tp + fp,
            tpr: recall,
            fpr,
            precision,
            recall,
        });
    }

    Ok(Evaluation {
        report: MetricReport {
            auroc: pair_wins / (n_out as f64 * n_in as f64),
            auprc: ap / n_out as f64,
            fpr_at_95tpr: fpr95.expect("final threshold has TPR 1"),
            n_outliers: n_out,
            n_inliers: n_in,
        },
        curve: CurvePoints(curve),
    })
}

/// Evaluates outlier flags listed in rank order (position 0 is the strongest candidate).
pub fn evaluate_labels(labels: &[bool]) -> Result<Evaluation> {
    let groups: Vec<(usize, usize)> = labels.iter().map(|&o| if o { (1, 0) } else { (0, 1) }).collect();
    evaluate_groups(&groups)
}

pub fn evaluate_ranking(ranked: &RankedList) -> Result<Evaluation> {
    evaluate_labels(&ranked.labels())
}

/// Evaluates raw scores (higher = more outlier-like); tied scores form one threshold.
pub fn evaluate_scores(labels: &[bool], scores: &[f64]) -> Result<Evaluation> {
    if labels.len() != scores.len() {
        return Err(Error::LabelScoreMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore {
            image_id: format!("#{i}"),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut last: Option<f64> = None;
    for i in order {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().expect("group pushed");
        if labels[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    evaluate_groups(&groups)
}

/// Predicted classes for the outlier images of one leave-one-taxon-out experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierPredictions {
    pub outlier: String,
    pub inlier_classes: Vec<String>,
    pub predicted: Vec<String>,
}

/// Share of each experiment's outlier images predicted as each inlier class.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionProportionMatrix {
    outlier_taxa: Vec<String>,
    inlier_taxa: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl PredictionProportionMatrix {
    pub fn outlier_taxa(&self) -> &[String] {
        &self.outlier_taxa
    }

    pub fn inlier_taxa(&self) -> &[String] {
        &self.inlier_taxa
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn get(&self, outlier: &str, inlier: &str) -> Option<f64> {
        let i = self.outlier_taxa.iter().position(|t| t == outlier)?;
        let j = self.inlier_taxa.iter().position(|t| t == inlier)?;
        Some(self.values[i][j])
    }
}

pub fn prediction_proportions(experiments: &[OutlierPredictions]) -> Result<PredictionProportionMatrix> {
    let mut inlier_taxa: Vec<String> = Vec::new();
    let mut column: HashMap<String, usize> = HashMap::new();
    let mut seen_outliers = HashSet::new();
    for exp in experiments {
        if !seen_outliers.insert(exp.outlier.as_str()) {
            return Err(Error::DuplicateExperiment {
                outlier: exp.outlier.clone(),
            });
        }
        for c in &exp.inlier_classes {
            if !column.contains_key(c) {
                column.insert(c.clone(), inlier_taxa.len());
                inlier_taxa.push(c.clone());
            }
        }
    }

    let mut values = Vec::with_capacity(experiments.len());
    for exp in experiments {
        if exp.predicted.is_empty() {
            return Err(Error::EmptyExperiment {
                outlier: exp.outlier.clone(),
            });
        }
        let allowed: HashSet<&str> = exp.inlier_classes.iter().map(String::as_str).collect();
        let mut counts = vec![0usize; inlier_taxa.len()];
        for p in &exp.predicted {
            if !allowed.contains(p.as_str()) {
                return Err(Error::UnknownPrediction {
                    outlier: exp.outlier.clone(),
                    class: p.clone(),
                });
            }
            counts[column[p]] += 1;
        }
        let n = exp.predicted.len() as f64;
        values.push(counts.into_iter().map(|c| c as f64 / n).collect());
    }

    Ok(PredictionProportionMatrix {
        outlier_taxa: experiments.iter().map(|e| e.outlier.clone()).collect(),
        inlier_taxa,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrelationOptions {
    pub permutations: usize,
    pub seed: u64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            permutations: DEFAULT_PERMUTATIONS,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub outlier: String,
    pub inlier: String,
    pub distance: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    pub permutations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub points: Vec<ScatterPoint>,
}

impl CorrelationReport {
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("outlier,inlier,distance,proportion\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{}", p.outlier, p.inlier, p.distance, p.proportion);
        }
        out
    }
}

/// Centered copy of `v`, or an error if every value is identical.
fn centered(v: &[f64], which: &'static str) -> Result<(Vec<f64>, f64)> {
    if v.iter().all(|&x| x == v[0]) {
        return Err(Error::DegenerateVariance { which });
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((c, norm))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LabelScoreMismatch {
            labels: x.len(),
            scores: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPairs { found: x.len() });
    }
    let (cx, nx) = centered(x, "distance")?;
    let (cy, ny) = centered(y, "proportion")?;
    Ok((dot(&cx, &cy) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Two-sided permutation p-value for the Pearson correlation of `x` and `y`.
///
/// Permutation `i` shuffles `y` with ChaCha8 stream `i` of `seed`, so the
/// result does not depend on how the work is split across threads.
pub fn permutation_p_value(x: &[f64], y: &[f64], options: CorrelationOptions) -> Result<f64> {
    if options.permutations == 0 {
        return Err(Error::InvalidPermutations);
    }
    let observed = pearson(x, y)?;
    let (cx, nx) = centered(x, "distance")?;
    let (cy, ny) = centered(y, "proportion")?;
    let threshold = observed.abs() - 1e-12;
    let denom = nx * ny;

    let extreme = (0..options.permutations as u64)
        .into_par_iter()
        .map_init(
            || cy.clone(),
            |buf, i| {
                buf.copy_from_slice(&cy);
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(i);
                buf.shuffle(&mut rng);
                (dot(&cx, buf) / denom).abs() >= threshold
            },
        )
        .filter(|&hit| hit)
        .count();
    Ok((extreme + 1) as f64 / (options.permutations + 1) as f64)
}

/// Correlates DNA distance with prediction proportion over outlier/inlier pairs,
/// skipping pairs with zero proportion or non-finite distance.
pub fn correlate(
    proportions: &PredictionProportionMatrix,
    distances: &TaxonDistanceMatrix,
    options: CorrelationOptions,
) -> Result<CorrelationReport> {
    let mut points = Vec::new();
    for (i, outlier) in proportions.outlier_taxa.iter().enumerate() {
        for (j, inlier) in proportions.inlier_taxa.iter().enumerate() {
            let r = proportions.values[i][j];
            if r == 0.0 || outlier == inlier {
                continue;
            }
            let d = distances.get(outlier, inlier).ok_or_else(|| Error::UnknownTaxon {
                taxon: if distances.index_of(outlier).is_none() {
                    outlier.clone()
                } else {
                    inlier.clone()
                },
            })?;
            if !d.is_finite() {
                continue;
            }
            points.push(ScatterPoint {
                outlier: outlier.clone(),
                inlier: inlier.clone(),
                distance: d,
                proportion: r,
            });
        }
    }
    if points.len() < 3 {
        return Err(Error::TooFewPairs { found: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.distance).collect();
    let y: Vec<f64> = points.iter().map(|p| p.proportion).collect();
    let pearson_r = pearson(&x, &y)?;
    let p_value = permutation_p_value(&x, &y, options)?;
    Ok(CorrelationReport {
        pearson_r,
        p_value,
        n_pairs: points.len(),
        permutations: options.permutations,
        seed: options.seed,
        points,
    })
}
