//! Exhaustive Hamming-space retrieval over packed codes.

use crate::codes::{words_for, BinaryCodeSet};
use crate::error::{Error, Result};

/// A borrowed single code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeRef<'a> {
    pub words: &'a [u64],
    pub bits: usize,
}

impl<'a> CodeRef<'a> {
    pub fn new(words: &'a [u64], bits: usize) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(Error::shape("CodeRef::new", format!("{bits} bits"), format!("{} words", words.len())));
        }
        Ok(CodeRef { words, bits })
    }
}

impl BinaryCodeSet {
    pub fn code_ref(&self, i: usize) -> CodeRef<'_> {
        CodeRef {
            words: self.code(i),
            bits: self.bits(),
        }
    }
}

#[inline]
fn xor_popcount(a: &[u64], b: &[u64]) -> u32 {
    match (a, b) {
        ([x], [y]) => (x ^ y).count_ones(),
        _ => a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum(),
    }
}

pub fn hamming_distance(a: CodeRef<'_>, b: CodeRef<'_>) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::shape("hamming_distance", format!("{} bits", a.bits), format!("{} bits", b.bits)));
    }
    Ok(xor_popcount(a.words, b.words))
}

/// Database indices ordered by (distance, index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub indices: Vec<usize>,
    pub distances: Vec<u32>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_query(query: CodeRef<'_>, db: &BinaryCodeSet) -> Result<()> {
    if query.bits != db.bits() {
        return Err(Error::shape("hamming query", format!("query has {} bits", query.bits), format!("database has {} bits", db.bits())));
    }
    Ok(())
}

/// Distances from `query` to every database code, in database order.
pub fn distances(query: CodeRef<'_>, db: &BinaryCodeSet) -> Result<Vec<u32>> {
    check_query(query, db)?;
    let wpc = db.words_per_code();
    if db.is_empty() {
        return Ok(Vec::new());
    }
    Ok(db.words().chunks_exact(wpc).map(|c| xor_popcount(query.words, c)).collect())
}

/// Full ranking of the database. Distances are bounded by the code length,
/// so a counting sort yields the (distance, index) order in linear time.
pub fn rank_all(query: CodeRef<'_>, db: &BinaryCodeSet) -> Result<RankedList> {
    let dist = distances(query, db)?;
    Ok(rank_distances(&dist, db.bits()))
}

pub(crate) fn rank_distances(dist: &[u32], bits: usize) -> RankedList {
    let mut starts = vec![0usize; bits + 2];
    for &d in dist {
        starts[d as usize + 1] += 1;
    }
    for k in 1..starts.len() {
        starts[k] += starts[k - 1];
    }
    let mut indices = vec![0usize; dist.len()];
    let mut distances = vec![0u32; dist.len()];
    for (i, &d) in dist.iter().enumerate() {
        let slot = &mut starts[d as usize];
        indices[*slot] = i;
        distances[*slot] = d;
        *slot += 1;
    }
    RankedList { indices, distances }
}

/// Ascending indices of every database code within distance `r`.
pub fn radius_search(query: CodeRef<'_>, db: &BinaryCodeSet, r: usize) -> Result<Vec<usize>> {
    if r > db.bits() {
        return Err(Error::invalid(format!("radius {r} exceeds code length {}", db.bits())));
    }
    let dist = distances(query, db)?;
    Ok(dist.iter().enumerate().filter(|(_, &d)| d as usize <= r).map(|(i, _)| i).collect())
}
