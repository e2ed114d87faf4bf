use serde::{Deserialize, Serialize};

use super::ProviderError;

const UNIT_TOLERANCE: f64 = 1e-6;

/// A fixed-dimension, L2-normalized vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalize arbitrary values; fails on empty, non-finite or zero vectors.
    pub fn normalized(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::Response("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Response("non-finite embedding component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ProviderError::Response("zero-norm embedding".into()));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_unit(&self) -> bool {
        let n = self.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        (n - 1.0).abs() <= UNIT_TOLERANCE
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = ProviderError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::normalized(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of two unit vectors, clamped into [-1, 1].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, ProviderError> {
    if a.dim() != b.dim() {
        return Err(ProviderError::Dimension(a.dim(), b.dim()));
    }
    Ok(dot(&a.0, &b.0).clamp(-1.0, 1.0))
}

/// `1 - cosine`, clamped into [0, 2].
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> Result<f64, ProviderError> {
    Ok((1.0 - cosine_similarity(a, b)?).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_and_orthogonal() {
        assert_eq!(cosine_similarity(&e(&[1.0, 0.0]), &e(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&e(&[1.0, 0.0]), &e(&[0.0, 3.0])).unwrap(), 0.0);
    }

    #[test]
    fn forty_five_degrees() {
        let s = cosine_similarity(&e(&[1.0, 0.0]), &e(&[3.0, 3.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert_eq!(
            cosine_similarity(&e(&[1.0, 0.0]), &e(&[1.0, 0.0, 0.0])),
            Err(ProviderError::Dimension(2, 3))
        );
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(Embedding::normalized(vec![0.0, 0.0]).is_err());
        assert!(Embedding::normalized(vec![]).is_err());
        assert!(Embedding::normalized(vec![f64::NAN]).is_err());
    }

    #[test]
    fn serde_normalizes() {
        let v: Embedding = serde_json::from_str("[3.0, 4.0]").unwrap();
        assert_eq!(v.as_slice(), &[0.6, 0.8]);
        assert!(v.is_unit());
    }
}
