//! Orderings of outlier candidates: plain OOD score, DNA, and DNA quantile.

use std::cmp::Ordering;
use std::fmt::Write;

use serde::Serialize;

use crate::dna_dist::DnaRanking;
use crate::error::{Error, Result};

/// Tolerance applied before rounding `q * N` up to a block size.
const BLOCK_ROUNDING_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredRecord {
    pub image_id: String,
    pub specimen_id: String,
    pub true_class: String,
    pub predicted_class: String,
    /// Canonical OOD score, higher is more outlier-like.
    pub score: f64,
    pub input_index: usize,
    pub is_outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    entries: Vec<ScoredRecord>,
}

impl RankedList {
    /// Wraps records that are already in rank order.
    pub fn from_ordered(entries: Vec<ScoredRecord>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[ScoredRecord] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Outlier flags in rank order.
    pub fn labels(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.is_outlier).collect()
    }

    pub fn input_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.input_index).collect()
    }

    /// One row per entry, `position` counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,image_id,specimen_id,true_class,predicted_class,score,is_outlier\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i + 1,
                e.image_id,
                e.specimen_id,
                e.true_class,
                e.predicted_class,
                e.score,
                e.is_outlier
            );
        }
        out
    }
}

/// How the records outside the top quantile block are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BottomBlock {
    /// DNA-ordered, like the top block.
    #[default]
    Dna,
    /// Left in baseline score order.
    Baseline,
}

fn check_records(records: &[ScoredRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if let Some(r) = records.iter().find(|r| !r.score.is_finite()) {
        return Err(Error::NonFiniteScore {
            image_id: r.image_id.clone(),
        });
    }
    Ok(())
}

fn by_score(a: &ScoredRecord, b: &ScoredRecord) -> Ordering {
    b.score.total_cmp(&a.score).then(a.input_index.cmp(&b.input_index))
}

fn sort_baseline(mut records: Vec<ScoredRecord>) -> Vec<ScoredRecord> {
    records.sort_by(by_score);
    records
}

/// Pairs each record with the DNA rank of its predicted class.
fn dna_keyed(records: Vec<ScoredRecord>, ranking: &DnaRanking) -> Result<Vec<(usize, ScoredRecord)>> {
    records
        .into_iter()
        .map(|r| match ranking.rank_of(&r.predicted_class) {
            Some(rank) => Ok((rank, r)),
            None => Err(Error::UnrankedClass {
                image_id: r.image_id,
                class: r.predicted_class,
            }),
        })
        .collect()
}

fn sort_dna(records: Vec<ScoredRecord>, ranking: &DnaRanking) -> Result<Vec<ScoredRecord>> {
    let mut keyed = dna_keyed(records, ranking)?;
    keyed.sort_by(|(ra, a), (rb, b)| ra.cmp(rb).then_with(|| by_score(a, b)));
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Score descending, ties by input position.
pub fn baseline_order(records: &[ScoredRecord]) -> Result<RankedList> {
    check_records(records)?;
    Ok(RankedList::from_ordered(sort_baseline(records.to_vec())))
}

/// Groups by the DNA rank of the predicted class, nearest first; score order
/// inside each group.
pub fn dna_order(records: &[ScoredRecord], ranking: &DnaRanking) -> Result<RankedList> {
    check_records(records)?;
    Ok(RankedList::from_ordered(sort_dna(records.to_vec(), ranking)?))
}

/// Number of records in the top block for quantile `q` over `n` records.
pub fn quantile_block_size(q: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidQuantile { q });
    }
    let k = (q * n as f64 - BLOCK_ROUNDING_EPS).ceil().max(0.0) as usize;
    Ok(k.min(n))
}

/// DNA-orders the top `ceil(q·N)` records by score, then the remainder.
pub fn dna_quantile_order(records: &[ScoredRecord], ranking: &DnaRanking, q: f64) -> Result<RankedList> {
    dna_quantile_order_with(records, ranking, q, BottomBlock::Dna)
}

pub fn dna_quantile_order_with(
    records: &[ScoredRecord],
    ranking: &DnaRanking,
    q: f64,
    bottom: BottomBlock,
) -> Result<RankedList> {
    check_records(records)?;
    let k = quantile_block_size(q, records.len())?;
    // every record must be rankable, not just those in the DNA-ordered blocks
    if let Some(r) = records.iter().find(|r| ranking.rank_of(&r.predicted_class).is_none()) {
        return Err(Error::UnrankedClass {
            image_id: r.image_id.clone(),
            class: r.predicted_class.clone(),
        });
    }
    let mut baseline = sort_baseline(records.to_vec());
    let rest = baseline.split_off(k);
    let mut out = sort_dna(baseline, ranking)?;
    match bottom {
        BottomBlock::Dna => out.extend(sort_dna(rest, ranking)?),
        BottomBlock::Baseline => out.extend(rest),
    }
    Ok(RankedList::from_ordered(out))
}
