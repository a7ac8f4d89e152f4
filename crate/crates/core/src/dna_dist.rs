//! Pairwise barcode distances and the DNA-proximity ranking of inlier taxa.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::{AlignedSequence, Alignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMethod {
    /// Proportion of comparable sites that differ.
    Raw,
    /// Kimura two-parameter distance.
    #[default]
    K80,
}

impl DistanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            DistanceMethod::Raw => "raw",
            DistanceMethod::K80 => "k80",
        }
    }

    pub fn distance(self, a: &AlignedSequence, b: &AlignedSequence) -> Result<f64> {
        match self {
            DistanceMethod::Raw => raw_distance(a, b),
            DistanceMethod::K80 => k80_distance(a, b),
        }
    }
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" | "p" => Ok(DistanceMethod::Raw),
            "k80" | "k2p" | "kimura" => Ok(DistanceMethod::K80),
            other => Err(Error::InvalidConfig(format!(
                "unknown distance method '{other}' (expected raw or k80)"
            ))),
        }
    }
}

/// Per-pair site tallies under pairwise deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SiteCounts {
    pub comparable: usize,
    pub transitions: usize,
    pub transversions: usize,
}

impl SiteCounts {
    /// Transition proportion.
    pub fn p(&self) -> f64 {
        self.transitions as f64 / self.comparable as f64
    }

    /// Transversion proportion.
    pub fn q(&self) -> f64 {
        self.transversions as f64 / self.comparable as f64
    }
}

fn is_purine(b: u8) -> bool {
    matches!(b, b'A' | b'G')
}

fn is_unambiguous(b: u8) -> bool {
    matches!(b, b'A' | b'C' | b'G' | b'T')
}

/// Classifies every site of two aligned sequences.
///
/// A site counts only when both characters are one of A, C, G, T.
pub fn site_counts(a: &AlignedSequence, b: &AlignedSequence) -> Result<SiteCounts> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut counts = SiteCounts::default();
    for (&x, &y) in a.bases().as_bytes().iter().zip(b.bases().as_bytes()) {
        if !(is_unambiguous(x) && is_unambiguous(y)) {
            continue;
        }
        counts.comparable += 1;
        if x != y {
            if is_purine(x) == is_purine(y) {
                counts.transitions += 1;
            } else {
                counts.transversions += 1;
            }
        }
    }
    if counts.comparable == 0 {
        return Err(Error::NoComparableSites);
    }
    Ok(counts)
}

pub fn raw_distance(a: &AlignedSequence, b: &AlignedSequence) -> Result<f64> {
    let c = site_counts(a, b)?;
    Ok((c.transitions + c.transversions) as f64 / c.comparable as f64)
}

/// Kimura two-parameter distance; `+inf` once either log argument is non-positive.
pub fn k80_distance(a: &AlignedSequence, b: &AlignedSequence) -> Result<f64> {
    Ok(k80_from_counts(&site_counts(a, b)?))
}

pub fn k80_from_counts(counts: &SiteCounts) -> f64 {
    let (p, q) = (counts.p(), counts.q());
    let w1 = 1.0 - 2.0 * p - q;
    let w2 = 1.0 - 2.0 * q;
    if w1 <= 0.0 || w2 <= 0.0 {
        return f64::INFINITY;
    }
    -0.5 * w1.ln() - 0.25 * w2.ln()
}

/// Square symmetric matrix of distances between taxa.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonDistanceMatrix {
    taxa: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl TaxonDistanceMatrix {
    /// Builds from a row-major square `values`; checks symmetry, zero diagonal, non-negativity.
    pub fn from_rows(taxa: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = taxa.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig(format!("distance matrix must be {n}x{n}")));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, t) in taxa.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::DuplicateTaxon { taxon: t.clone() });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = rows[i][j];
                if v.is_nan() || v < 0.0 || (i == j && v != 0.0) || v != rows[j][i] {
                    return Err(Error::InvalidConfig(format!(
                        "distance matrix entry ({}, {}) = {v} breaks symmetry/zero-diagonal/non-negativity",
                        taxa[i], taxa[j]
                    )));
                }
            }
        }
        Ok(Self {
            taxa,
            index,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn len(&self) -> usize {
        self.taxa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxa.is_empty()
    }

    pub fn index_of(&self, taxon: &str) -> Option<usize> {
        self.index.get(taxon).copied()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.taxa.len() + j]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.at(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.taxa.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// CSV with a header row of taxa; infinite entries are written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("taxon");
        for t in &self.taxa {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (i, t) in self.taxa.iter().enumerate() {
            out.push_str(t);
            for &v in self.row(i) {
                out.push(',');
                if v.is_infinite() {
                    out.push_str("inf");
                } else {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// All pairwise distances over the alignment's taxa, in record order.
///
/// Each entry is computed independently, so the parallel fill is bit-identical
/// to a sequential one.
pub fn distance_matrix(alignment: &Alignment, method: DistanceMethod) -> Result<TaxonDistanceMatrix> {
    let seqs = alignment.sequences();
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let upper = pairs
        .par_iter()
        .map(|&(i, j)| {
            method.distance(&seqs[i], &seqs[j]).map_err(|e| Error::PairDistance {
                a: seqs[i].taxon_id().to_string(),
                b: seqs[j].taxon_id().to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>();

    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(upper) {
        let d = d?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    let taxa: Vec<String> = alignment.taxa().map(str::to_string).collect();
    let index = taxa.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    Ok(TaxonDistanceMatrix { taxa, index, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedTaxon {
    pub taxon: String,
    pub distance: f64,
    pub rank: usize,
}

/// Inlier taxa ordered by DNA distance to one outlier taxon, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DnaRanking {
    outlier: String,
    ranked: Vec<RankedTaxon>,
    rank_of: HashMap<String, usize>,
}

impl DnaRanking {
    pub fn outlier(&self) -> &str {
        &self.outlier
    }

    pub fn ranked_inliers(&self) -> &[RankedTaxon] {
        &self.ranked
    }

    pub fn rank_of(&self, taxon: &str) -> Option<usize> {
        self.rank_of.get(taxon).copied()
    }
}

/// Sorts `inliers` by distance to `outlier`; ties keep the caller's order and
/// infinite distances go last.
pub fn rank_inliers<S: AsRef<str>>(matrix: &TaxonDistanceMatrix, outlier: &str, inliers: &[S]) -> Result<DnaRanking> {
    let oi = matrix.index_of(outlier).ok_or_else(|| Error::UnknownTaxon {
        taxon: outlier.to_string(),
    })?;
    let mut seen = HashSet::with_capacity(inliers.len());
    let mut entries = Vec::with_capacity(inliers.len());
    for name in inliers.iter().map(AsRef::as_ref) {
        if name == outlier {
            return Err(Error::OutlierAmongInliers {
                taxon: name.to_string(),
            });
        }
        if !seen.insert(name) {
            return Err(Error::DuplicateInlier {
                taxon: name.to_string(),
            });
        }
        let j = matrix.index_of(name).ok_or_else(|| Error::UnknownTaxon {
            taxon: name.to_string(),
        })?;
        entries.push((name.to_string(), matrix.at(oi, j)));
    }
    entries.sort_by(|a, b| a.1.total_cmp(&b.1));

    let ranked: Vec<RankedTaxon> = entries
        .into_iter()
        .enumerate()
        .map(|(rank, (taxon, distance))| RankedTaxon { taxon, distance, rank })
        .collect();
    let rank_of = ranked.iter().map(|r| (r.taxon.clone(), r.rank)).collect();
    Ok(DnaRanking {
        outlier: outlier.to_string(),
        ranked,
        rank_of,
    })
}
