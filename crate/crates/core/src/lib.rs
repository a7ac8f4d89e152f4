//! DNA-barcode-assisted out-of-distribution detection for taxonomic image
//! classifiers.
//!
//! The crate scores classifier logits with common OOD metrics, re-orders the
//! resulting outlier ranking by the DNA proximity between each image's
//! predicted class and a known outlier taxon, and evaluates the orderings.
//!
//! Modules, bottom up:
//! - [`seqio`]: aligned FASTA barcodes
//! - [`dna_dist`]: raw and K80 distances, inlier ranking by proximity
//! - [`scoring`]: softmax, predictions and the six OOD scores
//! - [`ranker`]: baseline, DNA and DNA-quantile orderings
//! - [`metrics`]: AUROC / AUPRC / FPR@95 and the distance correlation analysis
//! - [`table`], [`pipeline`], [`synth`]: logit tables, experiment runner and
//!   synthetic data

pub mod dna_dist;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod ranker;
pub mod scoring;
pub mod seqio;
pub mod synth;
pub mod table;

pub use dna_dist::{
    distance_matrix, k80_distance, rank_inliers, raw_distance, DistanceMethod, DnaRanking, TaxonDistanceMatrix,
};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{
    correlate, evaluate_labels, evaluate_ranking, evaluate_scores, prediction_proportions, CorrelationOptions,
    CorrelationReport, CurvePoints, Evaluation, MetricReport, PredictionProportionMatrix,
};
pub use pipeline::{
    correlate_experiments, run_experiment, sweep_q, ExperimentConfig, ExperimentInput, ExperimentOutcome, Reordering,
};
pub use ranker::{baseline_order, dna_order, dna_quantile_order, RankedList, ScoredRecord};
pub use scoring::{ood_score, predict, softmax, LogitVector, OodMethod, ProbabilityVector};
pub use seqio::{parse_fasta, read_fasta, AlignedSequence, Alignment};
pub use synth::{synth, SynthConfig, SynthWorld};
pub use table::{load_logit_table, LogitRow, LogitTable};
