//! Seeded synthetic worlds: one barcode per taxon plus leave-one-taxon-out
//! logit tables whose outlier misclassifications can be tied to DNA proximity.
//!
//! Barcodes come from a two-level mutation process (taxa cluster into groups,
//! as species do within a genus), so distances to any outlier vary widely.
//! Outlier images are assigned a predicted class `c` with weight
//! `exp(-coupling * beta * (d_c - d_min))`, where `beta` makes the nearest to
//! farthest odds ratio exactly [`NEAR_FAR_ODDS`] at `coupling = 1`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};

use crate::dna_dist::{distance_matrix, DistanceMethod, TaxonDistanceMatrix};
use crate::error::{Error, Result};
use crate::scoring::LogitVector;
use crate::seqio::{AlignedSequence, Alignment};
use crate::table::{LogitRow, LogitTable};

/// Nearest/farthest assignment odds at full coupling.
pub const NEAR_FAR_ODDS: f64 = 10.0;
/// Mean logit boost of the true class for inlier images.
pub const INLIER_MARGIN: f64 = 5.5;
/// Mean logit boost of the assigned class for outlier images.
pub const OUTLIER_MARGIN: f64 = 2.5;
/// Share of inlier images drawn with the outlier margin: fine-grained
/// confusions that the score alone cannot separate from outliers.
pub const HARD_INLIER_SHARE: f64 = 0.3;
/// Spread of the per-image margins.
pub const MARGIN_SD: f64 = 1.2;
pub const IMAGES_PER_SPECIMEN: usize = 5;

const GROUP_SIZE: usize = 4;
const GROUP_RATE: (f64, f64) = (0.10, 0.12);
const TAXON_RATE: (f64, f64) = (0.01, 0.05);
const TRANSITION_SHARE: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub images_per_class: usize,
    pub outlier_index: usize,
    /// 0 spreads outlier predictions uniformly; 1 applies the full distance decay.
    pub coupling: f64,
    /// Standard deviation of per-class logit noise.
    pub logit_noise: f64,
    pub barcode_length: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 39,
            images_per_class: 50,
            outlier_index: 0,
            coupling: 1.0,
            logit_noise: 1.0,
            barcode_length: 658,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_classes < 3 {
            return bad(format!("n_classes must be at least 3, got {}", self.n_classes));
        }
        if self.images_per_class == 0 {
            return bad("images_per_class must be positive".into());
        }
        if self.barcode_length == 0 {
            return bad("barcode_length must be positive".into());
        }
        if self.outlier_index >= self.n_classes {
            return bad(format!(
                "outlier index {} is out of range for {} classes",
                self.outlier_index, self.n_classes
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling must be in [0, 1], got {}", self.coupling));
        }
        if !(self.logit_noise.is_finite() && self.logit_noise > 0.0) {
            return bad(format!("logit_noise must be positive, got {}", self.logit_noise));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    config: SynthConfig,
    taxa: Vec<String>,
    alignment: Alignment,
    distances: TaxonDistanceMatrix,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn substitute(base: u8, rng: &mut impl Rng) -> u8 {
    if rng.gen_bool(TRANSITION_SHARE) {
        match base {
            b'A' => b'G',
            b'G' => b'A',
            b'C' => b'T',
            _ => b'C',
        }
    } else {
        let options: &[u8] = if matches!(base, b'A' | b'G') { b"CT" } else { b"AG" };
        *options.choose(rng).expect("two options")
    }
}

fn mutate(seq: &[u8], rate: f64, rng: &mut impl Rng) -> Vec<u8> {
    seq.iter()
        .map(|&b| if rng.gen_bool(rate) { substitute(b, rng) } else { b })
        .collect()
}

impl SynthWorld {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(config.seed, 0);
        let width = (config.n_classes - 1).to_string().len();
        let taxa: Vec<String> = (0..config.n_classes).map(|i| format!("taxon_{i:0width$}")).collect();

        let root: Vec<u8> = (0..config.barcode_length)
            .map(|_| *b"ACGT".choose(&mut rng).expect("non-empty"))
            .collect();
        let n_groups = config.n_classes.div_ceil(GROUP_SIZE);
        let groups: Vec<Vec<u8>> = (0..n_groups)
            .map(|_| {
                let rate = rng.gen_range(GROUP_RATE.0..GROUP_RATE.1);
                mutate(&root, rate, &mut rng)
            })
            .collect();
        let sequences = taxa
            .iter()
            .map(|t| {
                let g = &groups[rng.gen_range(0..n_groups)];
                let rate = rng.gen_range(TAXON_RATE.0..TAXON_RATE.1);
                let bases = String::from_utf8(mutate(g, rate, &mut rng)).expect("ascii");
                AlignedSequence::new(t.clone(), &bases)
            })
            .collect::<Result<Vec<_>>>()?;
        let alignment = Alignment::new(sequences)?;
        let distances = distance_matrix(&alignment, DistanceMethod::K80)?;
        Ok(Self {
            config: config.clone(),
            taxa,
            alignment,
            distances,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn alignment(&self) -> &Alignment {
        &self.alignment
    }

    /// K80 distances between the generated barcodes.
    pub fn distances(&self) -> &TaxonDistanceMatrix {
        &self.distances
    }

    /// Probability that an outlier image of `outlier` is predicted as each
    /// inlier, in inlier (taxon) order.
    pub fn assignment_probabilities(&self, outlier: usize) -> Vec<f64> {
        let d: Vec<f64> = (0..self.taxa.len())
            .filter(|&j| j != outlier)
            .map(|j| self.distances.at(outlier, j))
            .collect();
        let finite = d.iter().copied().filter(|v| v.is_finite());
        let d_min = finite.clone().fold(f64::INFINITY, f64::min);
        let d_max = finite.fold(f64::NEG_INFINITY, f64::max);
        let beta = if d_max > d_min {
            NEAR_FAR_ODDS.ln() / (d_max - d_min)
        } else {
            0.0
        };
        let weights: Vec<f64> = d
            .iter()
            .map(|&v| {
                let v = if v.is_finite() { v } else { d_max.max(d_min) };
                if beta == 0.0 {
                    1.0
                } else {
                    (-self.config.coupling * beta * (v - d_min)).exp()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// The logit table of the experiment holding out taxon `outlier`.
    pub fn experiment(&self, outlier: usize) -> Result<LogitTable> {
        let cfg = &self.config;
        if outlier >= self.taxa.len() {
            return Err(Error::InvalidConfig(format!("outlier index {outlier} out of range")));
        }
        let mut rng = rng_for(cfg.seed, 1 + outlier as u64);
        let inliers: Vec<String> = self
            .taxa
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != outlier)
            .map(|(_, t)| t.clone())
            .collect();
        let c = inliers.len();
        let noise = Normal::new(0.0, cfg.logit_noise).expect("validated sd");
        let inlier_margin = Normal::new(INLIER_MARGIN, MARGIN_SD).expect("constant sd");
        let outlier_margin = Normal::new(OUTLIER_MARGIN, MARGIN_SD).expect("constant sd");
        let assign = WeightedIndex::new(self.assignment_probabilities(outlier))
            .map_err(|e| Error::InvalidConfig(format!("assignment weights: {e}")))?;

        let mut rows = Vec::with_capacity((c + 1) * cfg.images_per_class);
        let mut push = |true_class: &str, k: usize, logits: Vec<f64>| {
            rows.push(LogitRow {
                image_id: format!("{true_class}_i{k:03}"),
                specimen_id: format!("{true_class}_s{:02}", k / IMAGES_PER_SPECIMEN),
                true_class: true_class.to_string(),
                logits: LogitVector::new(logits).expect("finite synthetic logits"),
            });
        };

        for (ci, class) in inliers.iter().enumerate() {
            for k in 0..cfg.images_per_class {
                let mut logits: Vec<f64> = (0..c).map(|_| noise.sample(&mut rng)).collect();
                let margin = if rng.gen_bool(HARD_INLIER_SHARE) {
                    outlier_margin.sample(&mut rng)
                } else {
                    inlier_margin.sample(&mut rng)
                };
                logits[ci] += margin;
                push(class, k, logits);
            }
        }
        for k in 0..cfg.images_per_class {
            let target = assign.sample(&mut rng);
            let mut logits: Vec<f64> = (0..c).map(|_| noise.sample(&mut rng)).collect();
            logits[target] += outlier_margin.sample(&mut rng);
            // the sampled class must be the prediction
            let top = logits
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > logits[b] { i } else { b });
            if top != target {
                logits.swap(top, target);
                if logits[target] == logits[top] {
                    logits[target] += 1e-6;
                }
            }
            push(&self.taxa[outlier], k, logits);
        }
        LogitTable::new(inliers, rows)
    }
}

/// Generates the world and the experiment for `config.outlier_index`.
pub fn synth(config: &SynthConfig) -> Result<(LogitTable, Alignment)> {
    let world = SynthWorld::generate(config)?;
    let table = world.experiment(config.outlier_index)?;
    Ok((table, world.alignment))
}
