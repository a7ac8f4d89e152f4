//! End-to-end experiment runner: logits and barcodes in, metrics out.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::dna_dist::{distance_matrix, rank_inliers, DistanceMethod, DnaRanking};
use crate::error::{Error, Result};
use crate::metrics::{
    correlate, evaluate_ranking, prediction_proportions, CorrelationOptions, CorrelationReport, CurvePoints,
    MetricReport, OutlierPredictions,
};
use crate::ranker::{baseline_order, dna_order, dna_quantile_order, RankedList, ScoredRecord};
use crate::scoring::{predict, score_with_diagnostics, OodMethod};
use crate::seqio::{validate_against_classes, Alignment};
use crate::table::LogitTable;

pub const DEFAULT_Q: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reordering {
    Baseline,
    Dna,
    DnaQuantile { q: f64 },
}

impl Reordering {
    pub fn quantile(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidQuantile { q });
        }
        Ok(Reordering::DnaQuantile { q })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Reordering::Baseline => "baseline",
            Reordering::Dna => "dna",
            Reordering::DnaQuantile { .. } => "dna-quantile",
        }
    }

    pub fn q(&self) -> Option<f64> {
        match *self {
            Reordering::DnaQuantile { q } => Some(q),
            _ => None,
        }
    }

    /// Parses `baseline`, `dna` or `dna-quantile`; `q` applies only to the last.
    pub fn parse(name: &str, q: Option<f64>) -> Result<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "baseline" | "ood" => Ok(Reordering::Baseline),
            "dna" => Ok(Reordering::Dna),
            "dnaquantile" | "quantile" => Reordering::quantile(q.unwrap_or(DEFAULT_Q)),
            _ => Err(Error::InvalidConfig(format!(
                "unknown reordering '{name}' (expected baseline, dna or dna-quantile)"
            ))),
        }
    }
}

impl fmt::Display for Reordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reordering::DnaQuantile { q } => write!(f, "dna-quantile(q={q})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub outlier_taxon: String,
    pub ood_method: OodMethod,
    pub distance_method: DistanceMethod,
    pub reordering: Reordering,
}

impl ExperimentConfig {
    /// Entropy scoring, K80 distances and quantile re-ordering at q = 0.4.
    pub fn new(outlier_taxon: impl Into<String>) -> Self {
        Self {
            outlier_taxon: outlier_taxon.into(),
            ood_method: OodMethod::Entropy,
            distance_method: DistanceMethod::K80,
            reordering: Reordering::DnaQuantile { q: DEFAULT_Q },
        }
    }
}

/// A validated, scored experiment, ready to be ordered any number of ways.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    table: &'a LogitTable,
    alignment: &'a Alignment,
    outlier: String,
    records: Vec<ScoredRecord>,
    warnings: usize,
}

impl<'a> Experiment<'a> {
    pub fn new(table: &'a LogitTable, alignment: &'a Alignment, outlier: &str, method: OodMethod) -> Result<Self> {
        check_experiment(table, alignment, outlier)?;
        let classes = table.class_names();
        let mut warnings = 0;
        let records: Vec<ScoredRecord> = table
            .rows()
            .iter()
            .enumerate()
            .map(|(input_index, row)| {
                let outcome = score_with_diagnostics(method, &row.logits);
                warnings += usize::from(outcome.warning.is_some());
                ScoredRecord {
                    image_id: row.image_id.clone(),
                    specimen_id: row.specimen_id.clone(),
                    true_class: row.true_class.clone(),
                    predicted_class: classes[predict(&row.logits)].clone(),
                    score: outcome.score,
                    input_index,
                    is_outlier: row.true_class == outlier,
                }
            })
            .collect();
        Ok(Self {
            table,
            alignment,
            outlier: outlier.to_string(),
            records,
            warnings,
        })
    }

    pub fn records(&self) -> &[ScoredRecord] {
        &self.records
    }

    /// Rows scored with a non-positive maximum logit under ratio-of-logits scoring.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    pub fn dna_ranking(&self, method: DistanceMethod) -> Result<DnaRanking> {
        let mut taxa = vec![self.outlier.clone()];
        taxa.extend(self.table.class_names().iter().cloned());
        let sub = self.alignment.select(&taxa)?;
        let matrix = distance_matrix(&sub, method)?;
        rank_inliers(&matrix, &self.outlier, self.table.class_names())
    }

    pub fn order(&self, reordering: Reordering, ranking: Option<&DnaRanking>) -> Result<RankedList> {
        let need = || ranking.ok_or_else(|| Error::InvalidConfig("DNA re-ordering requires a DNA ranking".to_string()));
        match reordering {
            Reordering::Baseline => baseline_order(&self.records),
            Reordering::Dna => dna_order(&self.records, need()?),
            Reordering::DnaQuantile { q } => dna_quantile_order(&self.records, need()?, q),
        }
    }
}

fn check_experiment(table: &LogitTable, alignment: &Alignment, outlier: &str) -> Result<()> {
    let classes = table.class_names();
    if classes.iter().any(|c| c == outlier) {
        return Err(Error::OutlierIsInlier {
            taxon: outlier.to_string(),
        });
    }
    let mut wanted: Vec<&str> = classes.iter().map(String::as_str).collect();
    wanted.push(outlier);
    if let Some(taxon) = validate_against_classes(alignment, &wanted).into_iter().next() {
        return Err(Error::MissingBarcode { taxon });
    }
    let inliers: HashSet<&str> = classes.iter().map(String::as_str).collect();
    let (mut n_out, mut n_in) = (0, 0);
    for row in table.rows() {
        if row.true_class == outlier {
            n_out += 1;
        } else if inliers.contains(row.true_class.as_str()) {
            n_in += 1;
        } else {
            return Err(Error::UnknownTrueClass {
                image_id: row.image_id.clone(),
                class: row.true_class.clone(),
            });
        }
    }
    if n_out == 0 {
        return Err(Error::NoOutlierImages {
            taxon: outlier.to_string(),
        });
    }
    if n_in == 0 {
        return Err(Error::NoInlierImages);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricReport,
    pub curve: CurvePoints,
    pub ranked: RankedList,
    /// Present for the DNA-based orderings.
    pub dna_ranking: Option<DnaRanking>,
    pub warnings: usize,
}

pub fn run_experiment(
    table: &LogitTable,
    alignment: &Alignment,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    let exp = Experiment::new(table, alignment, &config.outlier_taxon, config.ood_method)?;
    let dna_ranking = match config.reordering {
        Reordering::Baseline => None,
        _ => Some(exp.dna_ranking(config.distance_method)?),
    };
    let ranked = exp.order(config.reordering, dna_ranking.as_ref())?;
    let eval = evaluate_ranking(&ranked)?;
    Ok(ExperimentOutcome {
        report: eval.report,
        curve: eval.curve,
        ranked,
        dna_ranking,
        warnings: exp.warnings(),
    })
}

/// `0.00, 0.05, ..., 1.00`.
pub fn default_q_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Quantile re-ordering evaluated at each `q`; `config.reordering` is ignored.
pub fn sweep_q(
    table: &LogitTable,
    alignment: &Alignment,
    config: &ExperimentConfig,
    q_grid: &[f64],
) -> Result<Vec<(f64, MetricReport)>> {
    if let Some(&q) = q_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::InvalidQuantile { q });
    }
    let exp = Experiment::new(table, alignment, &config.outlier_taxon, config.ood_method)?;
    let ranking = exp.dna_ranking(config.distance_method)?;
    q_grid
        .par_iter()
        .map(|&q| {
            let ranked = exp.order(Reordering::DnaQuantile { q }, Some(&ranking))?;
            Ok((q, evaluate_ranking(&ranked)?.report))
        })
        .collect()
}

/// One leave-one-taxon-out experiment for the correlation analysis.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentInput<'a> {
    pub outlier: &'a str,
    pub table: &'a LogitTable,
}

/// Builds the prediction-proportion matrix across experiments and correlates it
/// with pairwise DNA distances.
pub fn correlate_experiments(
    experiments: &[ExperimentInput<'_>],
    alignment: &Alignment,
    distance_method: DistanceMethod,
    options: CorrelationOptions,
) -> Result<CorrelationReport> {
    let mut taxa: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for exp in experiments {
        for t in std::iter::once(exp.outlier).chain(exp.table.class_names().iter().map(String::as_str)) {
            if seen.insert(t.to_string()) {
                taxa.push(t.to_string());
            }
        }
    }

    let predictions = experiments
        .par_iter()
        .map(|exp| {
            check_experiment(exp.table, alignment, exp.outlier)?;
            let classes = exp.table.class_names();
            let predicted = exp
                .table
                .rows()
                .iter()
                .filter(|r| r.true_class == exp.outlier)
                .map(|r| classes[predict(&r.logits)].clone())
                .collect();
            Ok(OutlierPredictions {
                outlier: exp.outlier.to_string(),
                inlier_classes: classes.to_vec(),
                predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let proportions = prediction_proportions(&predictions)?;
    let distances = distance_matrix(&alignment.select(&taxa)?, distance_method)?;
    correlate(&proportions, &distances, options)
}
