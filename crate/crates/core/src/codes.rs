//! Packed binary codes, the two-stage encoder contract, and diagnostics for
//! the balance and independence constraints of the spectral objective.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAX_BITS: usize = 256;
pub const CODE_MAGIC: &[u8; 4] = b"HLBC";
const CODE_VERSION: u8 = 1;

/// `n` codes of `bits` bits each. Bit `k` of a code lives in bit `k % 64` of
/// word `k / 64`; padding bits past `bits` are always zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryCodeSet {
    n: usize,
    bits: usize,
    words: Vec<u64>,
}

#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn check_bits(bits: usize) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::invalid(format!("code length {bits} outside 1..={MAX_BITS}")));
    }
    Ok(())
}

impl BinaryCodeSet {
    pub fn zeros(n: usize, bits: usize) -> Result<Self> {
        check_bits(bits)?;
        Ok(BinaryCodeSet {
            n,
            bits,
            words: vec![0; n * words_for(bits)],
        })
    }

    /// Wraps packed words, rejecting wrong lengths and set padding bits.
    pub fn from_words(n: usize, bits: usize, words: Vec<u64>) -> Result<Self> {
        check_bits(bits)?;
        let wpc = words_for(bits);
        if words.len() != n * wpc {
            return Err(Error::shape(
                "BinaryCodeSet::from_words",
                format!("{n} codes x {wpc} words"),
                format!("{} words", words.len()),
            ));
        }
        let set = BinaryCodeSet { n, bits, words };
        if !bits.is_multiple_of(64) {
            let mask = !0u64 << (bits % 64);
            if (0..n).any(|i| set.code(i)[wpc - 1] & mask != 0) {
                return Err(Error::invalid("padding bits beyond code length are set"));
            }
        }
        Ok(set)
    }

    pub fn from_bools<R: AsRef<[bool]>>(bits: usize, rows: &[R]) -> Result<Self> {
        let mut set = BinaryCodeSet::zeros(rows.len(), bits)?;
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != bits {
                return Err(Error::shape("BinaryCodeSet::from_bools", format!("{bits} bits"), format!("row {i} has {}", r.len())));
            }
            for (k, &b) in r.iter().enumerate() {
                set.set(i, k, b);
            }
        }
        Ok(set)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn bits(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn words_per_code(&self) -> usize {
        words_for(self.bits)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn code(&self, i: usize) -> &[u64] {
        let w = self.words_per_code();
        &self.words[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> bool {
        (self.code(i)[k / 64] >> (k % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, value: bool) {
        debug_assert!(k < self.bits);
        let w = self.words_per_code();
        let word = &mut self.words[i * w + k / 64];
        let mask = 1u64 << (k % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn unpack(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|i| (0..self.bits).map(|k| self.get(i, k)).collect()).collect()
    }

    pub fn select(&self, indices: &[usize]) -> BinaryCodeSet {
        let mut words = Vec::with_capacity(indices.len() * self.words_per_code());
        for &i in indices {
            words.extend_from_slice(self.code(i));
        }
        BinaryCodeSet {
            n: indices.len(),
            bits: self.bits,
            words,
        }
    }

    pub fn concat(&self, other: &BinaryCodeSet) -> Result<BinaryCodeSet> {
        if self.bits != other.bits {
            return Err(Error::shape("BinaryCodeSet::concat", format!("{} bits", self.bits), format!("{} bits", other.bits)));
        }
        let mut words = self.words.clone();
        words.extend_from_slice(&other.words);
        Ok(BinaryCodeSet {
            n: self.n + other.n,
            bits: self.bits,
            words,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + 8 * self.words.len());
        out.extend_from_slice(CODE_MAGIC);
        out.push(CODE_VERSION);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.bits as u32).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 17 || &bytes[..4] != CODE_MAGIC {
            return Err(Error::format("code", path, "missing HLBC header"));
        }
        if bytes[4] != CODE_VERSION {
            return Err(Error::format("code", path, format!("unsupported version {}", bytes[4])));
        }
        let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
        let bits = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
        check_bits(bits).map_err(|e| Error::format("code", path, e.to_string()))?;
        let payload = &bytes[17..];
        let expected = n * words_for(bits) * 8;
        if payload.len() != expected {
            return Err(Error::format(
                "code",
                path,
                format!("{n} codes of {bits} bits need {expected} bytes, found {}", payload.len()),
            ));
        }
        let words = payload.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        BinaryCodeSet::from_words(n, bits, words).map_err(|e| Error::format("code", path, e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        BinaryCodeSet::from_bytes(&bytes, path)
    }
}

/// Bit = 1 iff value > 0. Exact zeros map to 0.
pub fn quantize_sign(real: &Matrix) -> Result<BinaryCodeSet> {
    quantize_threshold(real, 0.0)
}

/// Bit = 1 iff value > `tau` (strict).
pub fn quantize_threshold(activations: &Matrix, tau: f64) -> Result<BinaryCodeSet> {
    let mut codes = BinaryCodeSet::zeros(activations.rows(), activations.cols())?;
    let wpc = codes.words_per_code();
    for (i, row) in activations.iter_rows().enumerate() {
        let out = &mut codes.words[i * wpc..(i + 1) * wpc];
        for (k, &v) in row.iter().enumerate() {
            out[k / 64] |= u64::from(v > tau) << (k % 64);
        }
    }
    Ok(codes)
}

/// Two-stage hash function: a real-valued projection followed by
/// thresholding each coordinate.
pub trait HashEncoder {
    /// Output bits per code.
    fn bits(&self) -> usize;

    /// Expected input feature dimension.
    fn input_dim(&self) -> usize;

    /// Real-valued projection stage, `n x bits`.
    fn project(&self, x: &Matrix) -> Result<Matrix>;

    /// Quantization threshold applied to `project`.
    fn threshold(&self) -> f64 {
        0.0
    }

    fn encode(&self, x: &Matrix) -> Result<BinaryCodeSet> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("encode", format!("model expects d={}", self.input_dim()), format!("data has d={}", x.cols())));
        }
        let real = if x.rows() == 0 { Matrix::zeros(0, self.bits()) } else { self.project(x)? };
        quantize_threshold(&real, self.threshold())
    }
}

/// Symmetric, non-negative pair weights with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    weights: Matrix,
}

impl AffinityMatrix {
    pub fn new(weights: Matrix) -> Result<Self> {
        let n = weights.rows();
        if weights.cols() != n {
            return Err(Error::shape("AffinityMatrix::new", weights.shape_str(), "square"));
        }
        for i in 0..n {
            if weights.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("affinity diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let w = weights.get(i, j);
                if w < 0.0 || w != weights.get(j, i) {
                    return Err(Error::invalid(format!("affinity entry ({i}, {j}) is negative or asymmetric")));
                }
            }
        }
        Ok(AffinityMatrix { weights })
    }

    /// Weight 1 between every pair sharing a label.
    pub fn from_labels(labels: &[u8]) -> Self {
        let n = labels.len();
        let weights = Matrix::from_fn(n, n, |i, j| if i != j && labels[i] == labels[j] { 1.0 } else { 0.0 });
        AffinityMatrix { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(i, j)
    }
}

fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// `Σ_ij W_ij ||y_i − y_j||²` over ordered pairs; for 0/1 codes the squared
/// distance is the Hamming distance.
pub fn spectral_objective(codes: &BinaryCodeSet, w: &AffinityMatrix) -> Result<f64> {
    if codes.len() != w.len() {
        return Err(Error::shape("spectral_objective", format!("{} codes", codes.len()), format!("{}x{} affinity", w.len(), w.len())));
    }
    let mut total = 0.0;
    for i in 0..codes.len() {
        for j in 0..codes.len() {
            let wij = w.weight(i, j);
            if wij != 0.0 {
                total += wij * f64::from(hamming_words(codes.code(i), codes.code(j)));
            }
        }
    }
    Ok(total)
}

/// Fraction of codes with each bit set.
pub fn code_balance(codes: &BinaryCodeSet) -> Result<Vec<f64>> {
    if codes.is_empty() {
        return Err(Error::invalid("code_balance needs at least one code"));
    }
    let mut counts = vec![0usize; codes.bits()];
    for i in 0..codes.len() {
        for (k, c) in counts.iter_mut().enumerate() {
            *c += usize::from(codes.get(i, k));
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / codes.len() as f64).collect())
}

/// `(1/n) Σ_i b_ij b_ik` with bits mapped to ±1. Diagonal is exactly 1 and
/// the matrix is exactly symmetric.
pub fn code_correlation(codes: &BinaryCodeSet) -> Result<Matrix> {
    let n = codes.len();
    if n < 2 {
        return Err(Error::invalid("code_correlation needs at least two codes"));
    }
    let m = codes.bits();
    let mut corr = Matrix::identity(m);
    for j in 0..m {
        for k in (j + 1)..m {
            let agree = (0..n).filter(|&i| codes.get(i, j) == codes.get(i, k)).count() as f64;
            let v = (2.0 * agree - n as f64) / n as f64;
            corr.set(j, k, v);
            corr.set(k, j, v);
        }
    }
    Ok(corr)
}

/// Largest |off-diagonal| entry of a correlation matrix.
pub fn max_off_diagonal(corr: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..corr.rows() {
        for j in 0..corr.cols() {
            if i != j {
                worst = worst.max(corr.get(i, j).abs());
            }
        }
    }
    worst
}
