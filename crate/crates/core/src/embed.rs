//! Document vectors: signed feature hashing over terms, a loader for
//! externally computed embeddings, and cosine distance.

use std::collections::BTreeMap;

use thiserror::Error;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("row {row}: expected {expected} values, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("vector dimensions differ: {0} vs {1}")]
    Incompatible(usize, usize),
}

/// A fixed-length vector, unit length unless it is the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    values: Vec<f64>,
    norm: f64,
}

impl DocVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            norm: 0.0,
        }
    }

    /// Scales `values` to unit length; an all-zero input stays zero.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let len = l2(&values);
        if len > 0.0 {
            values.iter_mut().for_each(|v| *v /= len);
            let norm = l2(&values);
            Self { values, norm }
        } else {
            Self { values, norm: 0.0 }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Signed feature hashing: bucket `hash % dim`, sign from the hash's top
/// bit, counts accumulated then L2-normalized.
///
/// If signed collisions cancel every bucket of a non-empty document the
/// unsigned counts are used instead, so any document with a term has unit
/// length.
pub fn embed_hashed<'a, I>(terms: I, dim: usize) -> DocVector
where
    I: IntoIterator<Item = &'a str>,
{
    assert!(dim >= 2, "embedding dimension must be at least 2");
    let mut signed = vec![0.0; dim];
    let mut unsigned = vec![0.0; dim];
    for term in terms {
        let h = fnv1a64(term.as_bytes());
        let idx = (h % dim as u64) as usize;
        signed[idx] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        unsigned[idx] += 1.0;
    }
    if signed.iter().all(|v| *v == 0.0) {
        DocVector::normalized(unsigned)
    } else {
        DocVector::normalized(signed)
    }
}

/// Parses `id<TAB>v1,v2,...` rows. With `dim = None` the first row fixes the
/// dimension. Rows are re-normalized on load.
pub fn load_precomputed(
    text: &str,
    dim: Option<usize>,
) -> Result<BTreeMap<String, DocVector>, EmbedError> {
    let mut expected = dim;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| EmbedError::BadRow {
            row,
            reason: reason.to_string(),
        };
        let (id, vector) = line.split_once('\t').ok_or_else(|| bad("missing tab separator"))?;
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(bad("id must be non-empty and contain no whitespace"));
        }
        let values = vector
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(&format!("bad number: {e}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value"));
        }
        let want = *expected.get_or_insert(values.len());
        if values.len() != want {
            return Err(EmbedError::DimensionMismatch {
                row,
                expected: want,
                found: values.len(),
            });
        }
        if out.insert(id.to_string(), DocVector::normalized(values)).is_some() {
            return Err(bad("duplicate id"));
        }
    }
    Ok(out)
}

/// `1 - cos(u, v)` clamped to `[0, 2]`; 1.0 when either vector is zero.
pub fn cosine_distance(u: &DocVector, v: &DocVector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::Incompatible(u.dim(), v.dim()));
    }
    Ok(cosine_distance_raw(u.values(), v.values()))
}

pub(crate) fn cosine_distance_raw(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (l2(u), l2(v));
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    (1.0 - dot(u, v) / (nu * nv)).clamp(0.0, 2.0)
}

/// Cosine similarity, 0.0 when either vector is zero.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (l2(u), l2(v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot(u, v) / (nu * nv)
}
