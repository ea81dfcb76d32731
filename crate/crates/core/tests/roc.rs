mod common;

use common::{brute_auc, brute_roc, rng};
use njcr_core::evaluation::{percentile_sorted, roc, separability, trapezoid};
use njcr_core::{normalize_scores, GroundTruthMask, ScoreMap};
use proptest::prelude::*;
use rand::Rng;

fn case(scores: Vec<f64>, truth: Vec<bool>) -> (ScoreMap, GroundTruthMask) {
    let n = scores.len();
    (
        ScoreMap::new(n, 1, scores).unwrap(),
        GroundTruthMask::new(n, 1, truth).unwrap(),
    )
}

fn check_against_enumeration(scores: &[f64], truth: &[bool]) {
    let (s, m) = case(scores.to_vec(), truth.to_vec());
    let report = roc(&s, &m).unwrap();
    let oracle = brute_roc(scores, truth);
    let rows: Vec<_> = report.rows().collect();
    assert_eq!(rows, oracle);
    assert_eq!((report.pf[0], report.pd[0]), (0.0, 0.0));
    assert_eq!(report.auc_pd_pf, brute_auc(&oracle));
}

#[test]
fn six_pixel_staircase() {
    let scores = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let truth = vec![false, false, false, false, true, true];
    check_against_enumeration(&scores, &truth);
    let (s, m) = case(scores, truth);
    let r = roc(&s, &m).unwrap();
    assert_eq!(r.pd, vec![0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0]);
    assert_eq!(r.pf, vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(r.auc_pd_pf, 1.0);
    // pf over normalized tau: 0.75, 0.5, 0.25 at 1/5, 2/5, 3/5, then zero.
    let pf_tau = trapezoid(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0], &[1.0, 0.75, 0.5, 0.25, 0.0, 0.0]);
    assert!((r.auc_pf_tau - pf_tau).abs() < 1e-15);
    assert!((pf_tau - 0.4).abs() < 1e-15);
}

#[test]
fn ties_and_interleaving_match_enumeration() {
    check_against_enumeration(&[3.0, 1.0, 3.0, 2.0, 2.0, 5.0], &[true, false, false, true, false, true]);
    check_against_enumeration(&[1.0, 1.0, 1.0], &[true, false, false]);
    check_against_enumeration(&[0.1, 0.9, 0.4, 0.35, 0.8], &[false, true, false, true, false]);
}

#[test]
fn uniform_grid_median_is_central() {
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    assert!((percentile_sorted(&grid, 50.0) - 0.5).abs() <= 0.01);
    let mut truth = vec![false; 101];
    truth[100] = true;
    let (s, m) = case(grid, truth);
    let stats = separability(&s, &m).unwrap();
    assert!((stats.background.p50 - 0.495).abs() <= 0.01);
}

fn labelled(seed: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let mut truth: Vec<bool> = (0..n).map(|_| r.gen_bool(0.3)).collect();
    truth[0] = true;
    truth[1] = false;
    let scores = (0..n).map(|_| (r.gen_range(0..20) as f64) / 4.0).collect();
    (scores, truth)
}

proptest! {
    #[test]
    fn random_cases_match_enumeration(seed in 0u64..100_000, n in 2usize..40) {
        let (scores, truth) = labelled(seed, n);
        check_against_enumeration(&scores, &truth);
    }

    #[test]
    fn strictly_increasing_maps_leave_roc_unchanged(seed in 0u64..100_000, n in 2usize..40) {
        let (scores, truth) = labelled(seed, n);
        let mapped: Vec<f64> = scores.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
        let (a, m) = case(scores, truth.clone());
        let (b, _) = case(mapped, truth);
        let ra = roc(&a, &m).unwrap();
        let rb = roc(&b, &m).unwrap();
        prop_assert_eq!(&ra.pd, &rb.pd);
        prop_assert_eq!(&ra.pf, &rb.pf);
        prop_assert_eq!(ra.auc_pd_pf, rb.auc_pd_pf);
    }

    #[test]
    fn negated_scores_mirror_the_auc(seed in 0u64..100_000, n in 2usize..40) {
        let (scores, truth) = labelled(seed, n);
        let negated: Vec<f64> = scores.iter().map(|v| -v).collect();
        let (a, m) = case(scores, truth.clone());
        let (b, _) = case(negated, truth);
        let sum = roc(&a, &m).unwrap().auc_pd_pf + roc(&b, &m).unwrap().auc_pd_pf;
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_order(values in proptest::collection::vec(-1e6f64..1e6, 2..50)) {
        let s = ScoreMap::new(values.len(), 1, values.clone()).unwrap();
        let t = normalize_scores(&s);
        prop_assert!(t.scores().iter().all(|v| (0.0..=1.0).contains(v)));
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(t.scores()[i] <= t.scores()[j]);
                }
            }
        }
    }
}
