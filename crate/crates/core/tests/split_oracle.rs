mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ynote_provenance::eval::{stratified_allocation, stratified_kfold, stratified_split};
use ynote_provenance::resample::class_counts;
use ynote_provenance::SplitSpec;

fn random_labels(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n_classes = rng.random_range(1..=5);
    let mut y = Vec::new();
    for c in 0..n_classes {
        for _ in 0..rng.random_range(3..=150) {
            y.push(c);
        }
    }
    for i in (1..y.len()).rev() {
        y.swap(i, rng.random_range(0..=i));
    }
    y
}

#[test]
fn allocation_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = SplitSpec::default();
    for _ in 0..300 {
        let counts = class_counts(&random_labels(&mut rng));
        assert_eq!(
            stratified_allocation(&counts, &spec).unwrap(),
            common::allocation_oracle(&counts, spec.ratios()),
            "{counts:?}"
        );
    }
}

#[test]
fn allocation_matches_oracle_for_other_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let a = rng.random_range(0.2..0.7);
        let b = rng.random_range(0.05..(0.95 - a));
        let spec = SplitSpec { train: a, val: b, test: 1.0 - a - b, ..Default::default() };
        let counts = class_counts(&random_labels(&mut rng));
        assert_eq!(stratified_allocation(&counts, &spec).unwrap(), common::allocation_oracle(&counts, spec.ratios()));
    }
}

#[test]
fn hand_worked_example() {
    let counts = BTreeMap::from([(0, 50), (1, 30), (2, 20)]);
    let got = stratified_allocation(&counts, &SplitSpec::default()).unwrap();
    assert_eq!(got[&0], [33, 7, 10]);
    assert_eq!(got[&1], [19, 5, 6]);
    assert_eq!(got[&2], [13, 3, 4]);
}

#[test]
fn split_indices_are_a_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..30 {
        let y = random_labels(&mut rng);
        let spec = SplitSpec { seed, ..Default::default() };
        let s = stratified_split(&y, &spec).unwrap();
        let mut all: Vec<usize> = [s.train.clone(), s.val.clone(), s.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        let alloc = stratified_allocation(&class_counts(&y), &spec).unwrap();
        for (part, slot) in [(&s.train, 0), (&s.val, 1), (&s.test, 2)] {
            let got = class_counts(&part.iter().map(|&i| y[i]).collect::<Vec<_>>());
            for (label, a) in &alloc {
                assert_eq!(got.get(label).copied().unwrap_or(0), a[slot]);
            }
        }
    }
}

#[test]
fn kfold_partitions_with_level_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for seed in 0..30 {
        let y = random_labels(&mut rng);
        let k = rng.random_range(2..=3);
        let folds = stratified_kfold(&y, k, seed).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        let per_fold: Vec<BTreeMap<usize, usize>> = folds
            .iter()
            .map(|f| class_counts(&f.iter().map(|&i| y[i]).collect::<Vec<_>>()))
            .collect();
        for label in class_counts(&y).keys() {
            let c: Vec<usize> = per_fold.iter().map(|m| m.get(label).copied().unwrap_or(0)).collect();
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1, "{c:?}");
        }
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
