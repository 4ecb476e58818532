use std::hash::Hasher;

use fnv::FnvHasher;

use crate::scalar::Scalar;

pub const DEFAULT_EMBED_DIM: usize = 256;

/// Text to fixed-length vector.
pub trait Embedder<T: Scalar> {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<T>;
}

/// Lowercased alphanumeric tokens, FNV-1a hashed into `dim` count buckets,
/// then L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfTokens {
    pub dim: usize,
}

impl Default for HashedBagOfTokens {
    fn default() -> Self {
        Self {
            dim: DEFAULT_EMBED_DIM,
        }
    }
}

impl<T: Scalar> Embedder<T> for HashedBagOfTokens {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<T> {
        embed(text, self.dim)
    }
}

pub(crate) fn bucket(token: &str, dim: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(token.as_bytes());
    (h.finish() % dim as u64) as usize
}

pub fn embed<T: Scalar>(text: &str, dim: usize) -> Vec<T> {
    let mut v = vec![T::zero(); dim];
    let lower = text.to_lowercase();
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        v[bucket(token, dim)] += T::one();
    }
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm > T::zero() {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_reference_values() {
        // Published FNV-1a 64 test vectors.
        let mut h = FnvHasher::default();
        h.write(b"a");
        assert_eq!(h.finish(), 0xaf63dc4c8601ec8c);
        let mut h = FnvHasher::default();
        h.write(b"foobar");
        assert_eq!(h.finish(), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_is_zero() {
        let v: Vec<f64> = embed("", 256);
        assert!(v.iter().all(|&x| x == 0.0));
        let v: Vec<f64> = embed(" ,;() ", 256);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let a: Vec<f64> = embed("tree at (+1,0)\nwood: 2", 256);
        let b: Vec<f64> = embed("tree at (+1,0)\nwood: 2", 256);
        assert_eq!(a, b);
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shared_tokens_score_higher() {
        let goal: Vec<f64> = embed("collect wood", 256);
        let near: Vec<f64> = embed("wood: 1 ... tree at (+1,0)", 256);
        let far: Vec<f64> = embed("stone at (+1,0)", 256);
        assert!(cosine(&goal, &near) > cosine(&goal, &far));
    }

    #[test]
    fn counts_by_hand() {
        // "wood wood tree": bucket(wood) gets 2, bucket(tree) gets 1 (if distinct).
        let v: Vec<f64> = embed("Wood wood TREE", 256);
        let (w, t) = (bucket("wood", 256), bucket("tree", 256));
        assert_ne!(w, t);
        let n = 5f64.sqrt();
        assert!((v[w] - 2.0 / n).abs() < 1e-15);
        assert!((v[t] - 1.0 / n).abs() < 1e-15);
    }

    #[test]
    fn works_in_f32() {
        let a: Vec<f32> = embed("place table", 64);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-6);
    }
}
