mod common;

use common::{brute_density, rng};
use nalgebra::DMatrix;
use njcr_core::density::{density_profile, local_density, min_higher_density_distance, pairwise_distances, select_representatives};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn profile_matches_double_loops() {
    for (seed, n) in [(0u64, 2usize), (1, 7), (2, 25), (3, 50)] {
        let mut r = rng(seed);
        let p = DMatrix::from_fn(4, n, |_, _| r.gen_range(0.0..1.0));
        let profile = density_profile(&p, 0.1).unwrap();
        let (gamma, delta) = brute_density(&p, profile.cutoff);
        for i in 0..n {
            assert!((profile.gamma[i] - gamma[i]).abs() <= 1e-12, "gamma {i}");
            assert!((profile.delta[i] - delta[i]).abs() <= 1e-12, "delta {i}");
        }
    }
}

#[test]
fn planted_clusters_get_one_representative_each() {
    let mut r = rng(9);
    let centres = [[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]];
    let p = DMatrix::from_fn(3, 40, |i, j| centres[j / 20][i] + r.gen_range(-0.3..0.3));
    let picks = select_representatives(&p, 2, 0.1).unwrap();
    let clusters: Vec<usize> = picks.iter().map(|&j| j / 20).collect();
    assert!(clusters.contains(&0) && clusters.contains(&1), "{picks:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_follow_point_permutations(seed in 0u64..10_000, n in 3usize..20, shift in 1usize..19) {
        let mut r = rng(seed);
        let p = DMatrix::from_fn(3, n, |_, _| r.gen_range(0.0..1.0));
        let perm: Vec<usize> = (0..n).map(|j| (j + shift) % n).collect();
        let q = p.select_columns(&perm);
        let d = pairwise_distances(&p);
        let g = local_density(&d, 0.3).unwrap();
        let gq = local_density(&pairwise_distances(&q), 0.3).unwrap();
        for (j, &src) in perm.iter().enumerate() {
            prop_assert!((gq[j] - g[src]).abs() < 1e-12);
        }
        // With distinct densities delta does not depend on index order.
        let mut sorted = g.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9));
        let delta = min_higher_density_distance(&d, &g).unwrap();
        let dq = min_higher_density_distance(&pairwise_distances(&q), &gq).unwrap();
        for (j, &src) in perm.iter().enumerate() {
            prop_assert!((dq[j] - delta[src]).abs() < 1e-12);
        }
    }
}
