mod common;

use common::*;
use dpc_core::metrics::ConfusionMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pairs(rng: &mut ChaCha8Rng, classes: usize) -> Vec<(usize, usize)> {
    let n = rng.gen_range(1..400);
    // skewed draws so that some classes go missing
    let skew = |rng: &mut ChaCha8Rng| {
        let c: usize = rng.gen_range(0..classes);
        if rng.gen_bool(0.3) {
            c / 2
        } else {
            c
        }
    };
    (0..n)
        .map(|_| {
            let g = skew(rng);
            let p = if rng.gen_bool(0.6) { g } else { skew(rng) };
            (g, p)
        })
        .collect()
}

fn matrix_from(pairs: &[(usize, usize)], classes: usize) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(classes);
    let labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    cm.update(&preds, &labels, &vec![true; pairs.len()]).unwrap();
    cm
}

#[test]
fn hand_example() {
    let cm = ConfusionMatrix::from_counts(&[vec![1, 1], vec![0, 2]]).unwrap();
    assert!((cm.oacc().unwrap() - 0.75).abs() < 1e-12);
    assert!((cm.miou().unwrap() - 7.0 / 12.0).abs() < 1e-12);
    assert!((cm.macc().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn matches_brute_force_on_random_matrices() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = rng.gen_range(1..14);
        let pairs = random_pairs(&mut rng, classes);
        let cm = matrix_from(&pairs, classes);
        let brute = brute_metrics(&pairs, classes);
        assert!((cm.oacc().unwrap() - brute.oacc).abs() <= 1e-12, "seed {seed}");
        assert!((cm.miou().unwrap() - brute.miou).abs() <= 1e-12, "seed {seed}");
        assert!((cm.macc().unwrap() - brute.macc).abs() <= 1e-12, "seed {seed}");
    }
}

#[test]
fn merge_is_sum_of_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = random_pairs(&mut rng, 6);
    let (a, b) = pairs.split_at(pairs.len() / 2);
    let mut merged = matrix_from(a, 6);
    merged.merge(&matrix_from(b, 6)).unwrap();
    assert_eq!(merged, matrix_from(&pairs, 6));
}

proptest! {
    #[test]
    fn metrics_in_unit_interval_and_permutation_invariant(seed in any::<u64>(), classes in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, classes);
        let cm = matrix_from(&pairs, classes);
        let report = cm.report().unwrap();
        for v in [report.miou, report.macc, report.oacc] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let mut perm: Vec<usize> = (0..classes).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<(usize, usize)> = pairs.iter().map(|&(g, p)| (perm[g], perm[p])).collect();
        let other = matrix_from(&permuted, classes).report().unwrap();
        prop_assert!((report.miou - other.miou).abs() < 1e-12);
        prop_assert!((report.macc - other.macc).abs() < 1e-12);
        prop_assert!((report.oacc - other.oacc).abs() < 1e-12);
    }

    #[test]
    fn perfect_miou_iff_diagonal(seed in any::<u64>(), classes in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, classes);
        let cm = matrix_from(&pairs, classes);
        let diagonal = pairs.iter().all(|(g, p)| g == p);
        prop_assert_eq!(cm.miou().unwrap() == 1.0, diagonal);
        let exact: Vec<(usize, usize)> = pairs.iter().map(|&(g, _)| (g, g)).collect();
        prop_assert_eq!(matrix_from(&exact, classes).miou().unwrap(), 1.0);
    }
}
