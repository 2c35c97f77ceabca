use crate::embed::{Embedder, EmbeddingVector, MIN_DIM};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

fn add_feature(acc: &mut [f64], namespace: u8, feature: &str) {
    let mut h = FNV_OFFSET;
    for b in std::iter::once(namespace).chain(feature.bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    let bucket = (h % acc.len() as u64) as usize;
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    acc[bucket] += sign;
}

/// Signed feature hashing of word unigrams and character trigrams.
///
/// Words are the alphanumeric runs of the lowercased text. Trigrams are taken
/// over the lowercased text with whitespace collapsed and padded by one space
/// on each side. The bucket is the FNV-1a hash modulo `dim`, the sign is the
/// hash's top bit. The result is L2-normalized; text without features maps to
/// the zero vector.
pub fn hash_embed(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= 1, "dim must be positive");
    let mut acc = vec![0.0f64; dim];
    let lower = text.to_lowercase();

    for word in lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        add_feature(&mut acc, b'w', word);
    }

    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    if !collapsed.is_empty() {
        let padded: Vec<char> = format!(" {collapsed} ").chars().collect();
        let mut buf = String::with_capacity(12);
        for window in padded.windows(3) {
            buf.clear();
            buf.extend(window);
            add_feature(&mut acc, b'c', &buf);
        }
    }

    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut acc {
            *v /= norm;
        }
    }
    EmbeddingVector::new(acc).expect("finite by construction")
}

/// [`hash_embed`] as an [`Embedder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::Config(format!(
                "hash embedder dim must be at least {MIN_DIM}"
            )));
        }
        Ok(HashEmbedder { dim })
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| hash_embed(t, self.dim)).collect())
    }
}
