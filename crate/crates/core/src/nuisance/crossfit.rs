use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Assigns each of `n` units to one of `folds` folds. A seeded shuffle is
/// dealt round-robin, so fold sizes differ by at most one. One fold puts
/// every unit in fold 0.
pub fn crossfit_assign(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds == 0 || folds > n {
        return Err(Error::InvalidFoldCount { folds, n });
    }
    if folds == 1 {
        return Ok(vec![0; n]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &unit) in order.iter().enumerate() {
        fold[unit] = pos % folds;
    }
    Ok(fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(f: &[usize], k: usize) -> Vec<usize> {
        let mut s = vec![0; k];
        for &i in f {
            s[i] += 1;
        }
        s
    }

    #[test]
    fn fold_sizes() {
        assert_eq!(crossfit_assign(10, 1, 3).unwrap(), vec![0; 10]);
        assert_eq!(sizes(&crossfit_assign(10, 5, 3).unwrap(), 5), vec![2; 5]);
        let mut s = sizes(&crossfit_assign(7, 3, 3).unwrap(), 3);
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 3]);
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(crossfit_assign(50, 4, 9).unwrap(), crossfit_assign(50, 4, 9).unwrap());
        assert_ne!(crossfit_assign(50, 4, 9).unwrap(), crossfit_assign(50, 4, 10).unwrap());
        assert!(matches!(crossfit_assign(3, 4, 0), Err(Error::InvalidFoldCount { .. })));
        assert!(matches!(crossfit_assign(3, 0, 0), Err(Error::InvalidFoldCount { .. })));
    }
}
