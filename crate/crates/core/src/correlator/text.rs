use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIMENSION: u32 = 4096;

/// Sparse storage of a fixed-dimension, non-negative, L2-normalised vector.
/// The all-zero vector stands for empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextVector {
    dim: u32,
    /// `(bucket, weight)` sorted by bucket, weights > 0.
    entries: Vec<(u32, f64)>,
}

impl TextVector {
    pub fn zero(dim: u32) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds a normalised vector from raw bucket counts.
    pub fn from_counts(dim: u32, counts: &BTreeMap<u32, f64>) -> Self {
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::zero(dim);
        }
        let entries = counts.iter().filter(|(_, c)| **c > 0.0).map(|(b, c)| (*b, c / norm)).collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for (b, w) in &self.entries {
            out[*b as usize] = *w;
        }
        out
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &TextVector) -> f64 {
        if self.is_zero() || other.is_zero() {
            return 0.0;
        }
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot / (self.norm() * other.norm())
    }
}

/// Turns descriptive text into a [`TextVector`]. Swap in an embedding
/// provider by implementing this trait.
pub trait Vectorizer: Send + Sync {
    fn vectorize(&self, text: &str) -> TextVector;
}

/// Hashed term-frequency vectorizer: lowercase alphanumeric tokens, FNV-1a
/// bucket per token, raw counts, L2 normalisation.
#[derive(Debug, Clone, Copy)]
pub struct HashedTfVectorizer {
    pub dim: u32,
}

impl Default for HashedTfVectorizer {
    fn default() -> Self {
        Self { dim: DEFAULT_DIMENSION }
    }
}

impl HashedTfVectorizer {
    pub fn new(dim: u32) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, token: &str) -> u32 {
        let mut h = FnvHasher::default();
        h.write(token.as_bytes());
        (h.finish() % self.dim as u64) as u32
    }
}

impl Vectorizer for HashedTfVectorizer {
    fn vectorize(&self, text: &str) -> TextVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for tok in tokenize(text) {
            *counts.entry(self.bucket(&tok)).or_default() += 1.0;
        }
        TextVector::from_counts(self.dim, &counts)
    }
}

/// Maximal runs of alphanumeric characters, lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}
