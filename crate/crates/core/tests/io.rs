mod common;

use common::rng;
use njcr_core::raster::{load_cube, load_labels, load_mask, load_scores, save_cube, save_labels, save_mask, save_scores};
use njcr_core::{GroundTruthMask, HsiCube, ScoreMap, SuperpixelMap};
use proptest::prelude::*;
use rand::Rng;

fn random_cube(seed: u64, w: usize, h: usize, l: usize) -> HsiCube {
    let mut r = rng(seed);
    let values = (0..w * h * l)
        .map(|_| f64::from(r.gen_range(-5.0f32..5.0)))
        .collect();
    HsiCube::from_bsq(w, h, l, values).unwrap()
}

#[test]
fn cube_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.cube");
    let cube = random_cube(1, 8, 8, 16);
    save_cube(&cube, &path).unwrap();
    let back = load_cube(&path).unwrap();
    assert_eq!(back, cube);
    let bits = |c: &HsiCube| c.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&cube));
    let again = dir.path().join("d.cube");
    save_cube(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn mask_scores_and_labels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mask = GroundTruthMask::new(3, 2, vec![true, false, false, true, true, false]).unwrap();
    save_mask(&mask, dir.path().join("m")).unwrap();
    assert_eq!(load_mask(dir.path().join("m")).unwrap(), mask);
    let scores = ScoreMap::new(3, 2, vec![0.5, 1.25, -2.0, 0.0, 7.0, 3.5]).unwrap();
    save_scores(&scores, dir.path().join("s")).unwrap();
    assert_eq!(load_scores(dir.path().join("s")).unwrap(), scores);
    let labels = SuperpixelMap::new(3, 2, vec![0, 0, 1, 0, 1, 1]).unwrap();
    save_labels(&labels, dir.path().join("l")).unwrap();
    assert_eq!(load_labels(dir.path().join("l")).unwrap(), labels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flatten_then_unflatten_is_identity(seed in 0u64..10_000, w in 1usize..6, h in 1usize..6, l in 1usize..5) {
        let cube = random_cube(seed, w, h, l);
        let x = cube.flatten();
        prop_assert_eq!(x.unflatten().unwrap(), cube.clone());
        for p in 0..w * h {
            let col: Vec<f64> = x.matrix().column(p).iter().copied().collect();
            prop_assert_eq!(col, cube.spectrum_at(p));
        }
    }
}
