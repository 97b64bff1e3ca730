//! 0/1 knapsack solvers used for placement and for the clairvoyant oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::catalog::ContentId;
use crate::policy::Placement;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackItem {
    pub id: ContentId,
    pub value: f64,
    pub size: f64,
}

fn validate(items: &[KnapsackItem], capacity: f64) -> Result<()> {
    if !(capacity.is_finite() && capacity >= 0.0) {
        return Err(Error::BadInput("capacity must be finite and non-negative"));
    }
    for item in items {
        if !(item.value.is_finite() && item.value >= 0.0) {
            return Err(Error::BadInput("values must be finite and non-negative"));
        }
        if !(item.size.is_finite() && item.size > 0.0) {
            return Err(Error::BadInput("sizes must be finite and positive"));
        }
    }
    let mut ids: Vec<ContentId> = items.iter().map(|i| i.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::BadInput("duplicate item id"));
    }
    Ok(())
}

/// Sum of the values of the placed items.
pub fn objective(items: &[KnapsackItem], placement: &Placement) -> f64 {
    items
        .iter()
        .filter(|i| placement.contains(i.id))
        .map(|i| i.value)
        .sum()
}

/// Admits items by decreasing value density, lower id first on ties,
/// skipping any item that no longer fits.
pub fn greedy_knapsack(items: &[KnapsackItem], capacity: f64) -> Result<Placement> {
    validate(items, capacity)?;
    let mut order: Vec<&KnapsackItem> = items.iter().collect();
    order.sort_by(|a, b| {
        (b.value / b.size)
            .total_cmp(&(a.value / a.size))
            .then(a.id.cmp(&b.id))
    });
    let mut placement = Placement::empty(capacity);
    for item in order {
        placement.insert(item.id, item.size);
    }
    Ok(placement)
}

/// Optimal placement by dynamic programming over integer capacity.
///
/// Among optimal sets the lexicographically smallest id set is returned;
/// zero-valued items are never admitted.
pub fn exact_knapsack(items: &[KnapsackItem], capacity: f64) -> Result<Placement> {
    validate(items, capacity)?;
    if items.iter().any(|i| libm::trunc(i.size) != i.size) {
        return Err(Error::NeedsIntegerSizes);
    }
    let mut sorted: Vec<KnapsackItem> = items.iter().copied().filter(|i| i.value > 0.0).collect();
    sorted.sort_by_key(|i| i.id);

    let total: f64 = sorted.iter().map(|i| i.size).sum();
    let cap = libm::floor(capacity).min(total) as usize;
    let n = sorted.len();
    let width = cap + 1;

    // best[i * width + c]: optimum over items i.. with capacity c
    let mut best = vec![0.0f64; (n + 1) * width];
    for i in (0..n).rev() {
        let size = sorted[i].size as usize;
        let value = sorted[i].value;
        for c in 0..width {
            let skip = best[(i + 1) * width + c];
            best[i * width + c] = if size <= c {
                let take = value + best[(i + 1) * width + c - size];
                if take >= skip {
                    take
                } else {
                    skip
                }
            } else {
                skip
            };
        }
    }

    let mut placement = Placement::empty(capacity);
    let mut c = cap;
    for (i, item) in sorted.iter().enumerate() {
        let size = item.size as usize;
        if size <= c && item.value + best[(i + 1) * width + c - size] >= best[i * width + c] {
            placement.insert(item.id, item.size);
            c -= size;
        }
    }
    Ok(placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn items(values: &[f64], sizes: &[f64]) -> Vec<KnapsackItem> {
        values
            .iter()
            .zip(sizes)
            .enumerate()
            .map(|(i, (&value, &size))| KnapsackItem {
                id: ContentId::from_index(i),
                value,
                size,
            })
            .collect()
    }

    fn ids(p: &Placement) -> Vec<u32> {
        p.ids().map(|i| i.0).collect()
    }

    /// Enumerates all 2^n subsets; returns the best objective.
    fn brute_force(items: &[KnapsackItem], capacity: f64) -> f64 {
        let n = items.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let (mut v, mut s) = (0.0, 0.0);
            for (i, item) in items.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    v += item.value;
                    s += item.size;
                }
            }
            if s <= capacity && v > best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn greedy_examples() {
        let p = greedy_knapsack(&items(&[0.5, 0.4, 0.3], &[1.0; 3]), 2.0).unwrap();
        assert_eq!(ids(&p), [1, 2]);
        assert!((objective(&items(&[0.5, 0.4, 0.3], &[1.0; 3]), &p) - 0.9).abs() < 1e-12);

        let inst = items(&[0.6, 0.5], &[3.0, 1.0]);
        let p = greedy_knapsack(&inst, 3.0).unwrap();
        assert_eq!(ids(&p), [2]);
        assert_eq!(objective(&inst, &p), 0.5);

        assert!(greedy_knapsack(&inst, 0.0).unwrap().is_empty());
    }

    #[test]
    fn exact_examples() {
        let inst = items(&[0.6, 0.5], &[3.0, 1.0]);
        let p = exact_knapsack(&inst, 3.0).unwrap();
        assert_eq!(ids(&p), [1]);
        assert_eq!(objective(&inst, &p), 0.6);
        assert_eq!(brute_force(&inst, 3.0), 0.6);

        let single = items(&[0.2], &[2.0]);
        assert_eq!(ids(&exact_knapsack(&single, 2.0).unwrap()), [1]);
        assert!(exact_knapsack(&single, 1.0).unwrap().is_empty());
    }

    #[test]
    fn exact_breaks_ties_lexicographically() {
        // {1,4} and {2,3} both reach 3.0 under capacity 2
        let inst = items(&[1.0, 2.0, 1.0, 2.0], &[1.0; 4]);
        assert_eq!(ids(&exact_knapsack(&inst, 2.0).unwrap()), [2, 4]);
        let inst = items(&[1.0, 1.0, 1.0], &[1.0; 3]);
        assert_eq!(ids(&exact_knapsack(&inst, 2.0).unwrap()), [1, 2]);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            greedy_knapsack(&items(&[-1.0], &[1.0]), 1.0),
            Err(Error::BadInput(_))
        ));
        assert!(matches!(
            greedy_knapsack(&items(&[1.0], &[0.0]), 1.0),
            Err(Error::BadInput(_))
        ));
        assert_eq!(
            exact_knapsack(&items(&[1.0], &[1.5]), 3.0),
            Err(Error::NeedsIntegerSizes)
        );
    }

    fn instance() -> impl Strategy<Value = (Vec<KnapsackItem>, f64)> {
        (1usize..=15).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u32..100, n),
                proptest::collection::vec(1u32..10, n),
                0u32..60,
            )
                .prop_map(|(v, s, c)| {
                    let v: Vec<f64> = v.into_iter().map(f64::from).collect();
                    let s: Vec<f64> = s.into_iter().map(f64::from).collect();
                    (items(&v, &s), f64::from(c))
                })
        })
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force((inst, cap) in instance()) {
            let p = exact_knapsack(&inst, cap).unwrap();
            prop_assert!(p.used_capacity() <= cap);
            prop_assert_eq!(objective(&inst, &p), brute_force(&inst, cap));
        }

        #[test]
        fn greedy_is_feasible_and_bounded((inst, cap) in instance()) {
            let g = greedy_knapsack(&inst, cap).unwrap();
            prop_assert!(g.used_capacity() <= cap);
            prop_assert!(objective(&inst, &g) <= brute_force(&inst, cap));
        }

        #[test]
        fn greedy_equals_exact_for_uniform_sizes(
            values in proptest::collection::vec(0.0f64..1.0, 1..30),
            size in 1u32..4,
            cap in 0u32..40,
        ) {
            let inst = items(&values, &alloc::vec![f64::from(size); values.len()]);
            let g = greedy_knapsack(&inst, f64::from(cap)).unwrap();
            let e = exact_knapsack(&inst, f64::from(cap)).unwrap();
            prop_assert!((objective(&inst, &g) - objective(&inst, &e)).abs() < 1e-12);
        }
    }
}
