use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{check_shape, Tensor};

/// He-normal initialization: i.i.d. `N(0, 2 / fan_in)` from a ChaCha8 stream keyed by `seed`.
pub fn he_init(shape: &[usize], fan_in: usize, seed: u64) -> Result<Tensor> {
    let n = check_shape(shape)?;
    if fan_in == 0 {
        return Err(Error::InvalidParameter("fan-in must be at least 1".into()));
    }
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = he_init(&[4], 2, 7).unwrap();
        let b = he_init(&[4], 2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, he_init(&[4], 2, 8).unwrap());
    }

    #[test]
    fn variance_matches_two_over_fan_in() {
        let t = he_init(&[100_000], 50, 1).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.04).abs() / 0.04 < 0.05, "sample variance {var}");
    }

    #[test]
    fn rejects_empty_shape_and_zero_fan_in() {
        assert!(matches!(he_init(&[], 3, 0), Err(Error::InvalidShape(_))));
        assert!(matches!(he_init(&[3], 0, 0), Err(Error::InvalidParameter(_))));
    }
}
