//! Aligned DNA barcode input.
//!
//! Reads pre-aligned FASTA where every record is one taxon's representative
//! barcode. Bases are normalized to uppercase; IUPAC ambiguity codes and the
//! gap character are kept as-is and only resolved when distances are computed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const FASTA_LINE_WIDTH: usize = 70;

/// Returns true for characters accepted in an aligned sequence (uppercase).
pub fn is_alignment_symbol(c: u8) -> bool {
    matches!(
        c,
        b'A' | b'C' | b'G' | b'T' | b'R' | b'Y' | b'S' | b'W' | b'K' | b'M' | b'B' | b'D' | b'H' | b'V' | b'N' | b'-'
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSequence {
    taxon_id: String,
    description: String,
    bases: String,
}

impl AlignedSequence {
    /// Builds a sequence, uppercasing and validating `bases`.
    pub fn new(taxon_id: impl Into<String>, bases: &str) -> Result<Self> {
        let taxon_id = taxon_id.into();
        if taxon_id.is_empty() || taxon_id.chars().any(char::is_whitespace) {
            return Err(Error::EmptyTaxonId { line: 0 });
        }
        let bases = normalize_bases(&taxon_id, bases, 0)?;
        if bases.is_empty() {
            return Err(Error::EmptySequence { taxon: taxon_id });
        }
        Ok(Self {
            taxon_id,
            description: String::new(),
            bases,
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn taxon_id(&self) -> &str {
        &self.taxon_id
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn bases(&self) -> &str {
        &self.bases
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

/// Validates characters of one sequence chunk starting at `offset`.
fn normalize_bases(taxon: &str, raw: &str, offset: usize) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    for (i, ch) in raw.chars().enumerate() {
        let upper = ch.to_ascii_uppercase();
        if !upper.is_ascii() || !is_alignment_symbol(upper as u8) {
            return Err(Error::InvalidBase {
                character: ch,
                taxon: taxon.to_string(),
                site: offset + i,
            });
        }
        out.push(upper);
    }
    Ok(out)
}

/// A set of equal-length aligned sequences with unique taxon ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    sequences: Vec<AlignedSequence>,
    length: usize,
}

impl Alignment {
    pub fn new(sequences: Vec<AlignedSequence>) -> Result<Self> {
        let first = sequences.first().ok_or(Error::EmptyFasta)?;
        let length = first.len();
        let mut seen = HashSet::with_capacity(sequences.len());
        for seq in &sequences {
            if !seen.insert(seq.taxon_id()) {
                return Err(Error::DuplicateTaxon {
                    taxon: seq.taxon_id.clone(),
                });
            }
            if seq.len() != length {
                return Err(Error::UnequalLength {
                    taxon: seq.taxon_id.clone(),
                    expected: length,
                    found: seq.len(),
                });
            }
        }
        Ok(Self { sequences, length })
    }

    pub fn sequences(&self) -> &[AlignedSequence] {
        &self.sequences
    }

    /// Number of alignment sites.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn taxa(&self) -> impl Iterator<Item = &str> {
        self.sequences.iter().map(AlignedSequence::taxon_id)
    }

    pub fn get(&self, taxon_id: &str) -> Option<&AlignedSequence> {
        self.sequences.iter().find(|s| s.taxon_id == taxon_id)
    }

    /// Sub-alignment over `taxa`, in the order given.
    pub fn select<S: AsRef<str>>(&self, taxa: &[S]) -> Result<Alignment> {
        let index: HashMap<&str, &AlignedSequence> = self.sequences.iter().map(|s| (s.taxon_id(), s)).collect();
        let picked = taxa
            .iter()
            .map(|t| {
                index
                    .get(t.as_ref())
                    .map(|s| (*s).clone())
                    .ok_or_else(|| Error::MissingBarcode {
                        taxon: t.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Alignment::new(picked)
    }

    /// Serializes to FASTA, wrapping sequence lines at 70 columns.
    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for seq in &self.sequences {
            if seq.description.is_empty() {
                let _ = writeln!(out, ">{}", seq.taxon_id);
            } else {
                let _ = writeln!(out, ">{} {}", seq.taxon_id, seq.description);
            }
            for chunk in seq.bases.as_bytes().chunks(FASTA_LINE_WIDTH) {
                out.push_str(std::str::from_utf8(chunk).expect("ascii bases"));
                out.push('\n');
            }
        }
        out
    }
}

/// Parses FASTA text into an [`Alignment`].
///
/// The taxon id is the header up to the first whitespace; anything after it is
/// kept as the description. Blank lines, trailing whitespace and `\r\n` line
/// endings are tolerated.
pub fn parse_fasta(text: &str) -> Result<Alignment> {
    struct Pending {
        taxon_id: String,
        description: String,
        bases: String,
    }

    let mut records: Vec<Pending> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim_start().is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let header = header.trim_start();
            let (id, desc) = match header.find(char::is_whitespace) {
                Some(pos) => (&header[..pos], header[pos..].trim()),
                None => (header, ""),
            };
            if id.is_empty() {
                return Err(Error::EmptyTaxonId { line: lineno + 1 });
            }
            records.push(Pending {
                taxon_id: id.to_string(),
                description: desc.to_string(),
                bases: String::new(),
            });
        } else {
            let current = records
                .last_mut()
                .ok_or(Error::SequenceBeforeHeader { line: lineno + 1 })?;
            let chunk = normalize_bases(&current.taxon_id, line.trim_start(), current.bases.len())?;
            current.bases.push_str(&chunk);
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyFasta);
    }
    let sequences = records
        .into_iter()
        .map(|r| {
            if r.bases.is_empty() {
                return Err(Error::EmptySequence { taxon: r.taxon_id });
            }
            Ok(AlignedSequence {
                taxon_id: r.taxon_id,
                description: r.description,
                bases: r.bases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Alignment::new(sequences)
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Alignment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fasta(&text)
}

/// Class names that have no barcode in `alignment`. Extra sequences are fine.
pub fn validate_against_classes<S: AsRef<str>>(alignment: &Alignment, class_names: &[S]) -> BTreeSet<String> {
    let have: HashSet<&str> = alignment.taxa().collect();
    class_names
        .iter()
        .map(AsRef::as_ref)
        .filter(|c| !have.contains(c))
        .map(str::to_string)
        .collect()
}
