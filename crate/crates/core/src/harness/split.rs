use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::symbol::Sym;

use super::HarnessError;

/// Train/validation/test ratios; must be non-negative and sum to 1.
pub fn validate_ratios(ratios: [f64; 3]) -> Result<(), HarnessError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(HarnessError::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

/// Shuffles `items` with a seeded generator and slices it by `ratios`.
///
/// Train and validation sizes are `round(n * r)`; the test set takes the
/// rest.
pub fn split<T: Clone>(items: &[T], ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>), HarnessError> {
    validate_ratios(ratios)?;
    if items.len() < 3 {
        return Err(HarnessError::TooSmall(items.len()));
    }
    let n = items.len();
    let mut order: Vec<T> = items.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let n_val = ((n as f64 * ratios[1]).round() as usize).min(n - n_train);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok((order, val, test))
}

/// Downsamples every class to the size of the rarest one. The kept items
/// retain their input order.
pub fn undersample(items: &[usize], labels: &[Sym], seed: u64) -> Result<Vec<usize>, HarnessError> {
    let mut by_class: BTreeMap<Sym, Vec<usize>> = BTreeMap::new();
    for &i in items {
        by_class.entry(labels[i]).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(HarnessError::SingleClass);
    }
    let min = by_class.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; labels.len()];
    for members in by_class.values() {
        if members.len() == min {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            members.choose_multiple(&mut rng, min).for_each(|&i| keep[i] = true);
        }
    }
    Ok(items.iter().copied().filter(|&i| keep[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_ratios() {
        let (a, b, c) = split(&[1, 2, 3, 4], [0.5, 0.25, 0.25], 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (2, 1, 1));
        let (a, b, c) = split(&(0..3500).collect::<Vec<_>>(), [5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0], 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (2500, 500, 500));
    }

    #[test]
    fn deterministic_and_exhaustive() {
        let items: Vec<usize> = (0..50).collect();
        let first = split(&items, [0.6, 0.2, 0.2], 11).unwrap();
        assert_eq!(first, split(&items, [0.6, 0.2, 0.2], 11).unwrap());
        let mut all: Vec<usize> = first.0.iter().chain(&first.1).chain(&first.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
    }

    #[test]
    fn all_train() {
        let (a, b, c) = split(&[1, 2, 3], [1.0, 0.0, 0.0], 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (3, 0, 0));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split(&[1, 2], [1.0, 0.0, 0.0], 0), Err(HarnessError::TooSmall(2))));
        assert!(split(&[1, 2, 3], [0.5, 0.5, 0.5], 0).is_err());
    }

    fn labels(pos: usize, neg: usize) -> Vec<Sym> {
        let mut v = vec![Sym::new("pos"); pos];
        v.extend(vec![Sym::new("neg"); neg]);
        v
    }

    #[test]
    fn undersample_balances() {
        let l = labels(10, 4);
        let items: Vec<usize> = (0..14).collect();
        let kept = undersample(&items, &l, 5).unwrap();
        assert_eq!(kept.iter().filter(|&&i| l[i] == Sym::new("pos")).count(), 4);
        assert!((10..14).all(|i| kept.contains(&i)));
        assert_eq!(kept, undersample(&items, &l, 5).unwrap());
    }

    #[test]
    fn undersample_balanced_or_single() {
        let l = labels(3, 3);
        let items: Vec<usize> = (0..6).collect();
        assert_eq!(undersample(&items, &l, 1).unwrap(), items);
        assert!(matches!(undersample(&[0, 1], &l, 1), Err(HarnessError::SingleClass)));
    }
}
