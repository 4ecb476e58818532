use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no success rates to score")]
    EmptyList,
    #[error("success rate {0} outside [0, 100]")]
    OutOfRange(f64),
}

/// Geometric-mean style score over per-achievement success rates in percent:
/// `exp(mean(ln(1 + s_i))) - 1`.
pub fn score<T: Scalar>(success_rates: &[T]) -> Result<T, ScoreError> {
    if success_rates.is_empty() {
        return Err(ScoreError::EmptyList);
    }
    let hundred = T::of(100.0);
    let mut acc = T::zero();
    for &s in success_rates {
        if !(s >= T::zero() && s <= hundred) {
            return Err(ScoreError::OutOfRange(s.to_f64_lossy()));
        }
        acc += s.ln_1p();
    }
    let n = T::of(success_rates.len() as f64);
    Ok((acc / n).exp() - T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_cases() {
        assert_eq!(score(&[0.0f64; 5]).unwrap(), 0.0);
        assert!((score(&[100.0f64; 3]).unwrap() - 100.0).abs() < 1e-12);
        let want = (11.0f64 * 21.0).sqrt() - 1.0;
        assert!((score(&[10.0f64, 20.0]).unwrap() - want).abs() < 1e-12);
        assert!((want - 14.19868).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        assert_eq!(score::<f64>(&[]), Err(ScoreError::EmptyList));
        assert!(matches!(score(&[10.0f64, 101.0]), Err(ScoreError::OutOfRange(_))));
        assert!(matches!(score(&[f64::NAN]), Err(ScoreError::OutOfRange(_))));
    }

    #[test]
    fn f32_agrees() {
        let a = score(&[3.0f32, 40.0, 0.5]).unwrap() as f64;
        let b = score(&[3.0f64, 40.0, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-4);
    }
}
