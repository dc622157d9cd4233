mod common;

use common::*;
use dpc_core::nn::Matrix;
use dpc_core::pointcloud::{
    beacon_quadrant, find_beacon, gen_synthetic_scene, gen_synthetic_scene_with, load_cloud, sample_crop,
    save_cloud, CloudFormat, CropSpec, PointCloud, SceneKind, SceneOptions, BEACON_COLOR,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_labelled(rng: &mut ChaCha8Rng, features: usize) -> PointCloud {
    let n = rng.gen_range(1..60);
    let padding = rng.gen_range(0..4);
    let positions: Vec<[f64; 3]> = (0..n + padding)
        .map(|i| {
            if i < n {
                [
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-5.0..5.0),
                ]
            } else {
                [0.0; 3]
            }
        })
        .collect();
    let mut f = Matrix::zeros(n + padding, features);
    for i in 0..n {
        for c in 0..features {
            f.set(i, c, rng.gen_range(0.0..1.0));
        }
    }
    let labels = (0..n + padding)
        .map(|i| if i < n { rng.gen_range(0..13) } else { 0 })
        .collect();
    let valid = (0..n + padding).map(|i| i < n).collect();
    PointCloud::new(positions, f, Some(labels), valid).unwrap()
}

#[test]
fn xyz_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_labelled(&mut rng, if seed % 2 == 0 { 3 } else { 6 });
        let path = dir.path().join(format!("{seed}.xyz"));
        save_cloud(&cloud, &path).unwrap();
        let loaded = load_cloud(&path, CloudFormat::XyzText).unwrap();
        let valid: Vec<usize> = cloud.valid_indices().collect();
        assert_eq!(loaded.len(), valid.len());
        assert_eq!(loaded.feature_dim(), cloud.feature_dim());
        for (r, &i) in valid.iter().enumerate() {
            let (a, b) = (loaded.positions()[r], cloud.positions()[i]);
            assert!((0..3).all(|c| (a[c] - b[c]).abs() <= 1e-6), "seed {seed}");
            let fa = loaded.features().row(r);
            let fb = cloud.features().row(i);
            assert!(fa.iter().zip(fb).all(|(x, y)| (x - y).abs() <= 1e-6));
            assert_eq!(loaded.labels().unwrap()[r], cloud.labels().unwrap()[i]);
        }
    }
}

#[test]
fn xyz_without_features_gets_constant_channel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.xyz");
    std::fs::write(&path, "# x y z\n0 0 0\n1 2 3\n\n4.5 5 6\n").unwrap();
    let cloud = load_cloud(&path, CloudFormat::XyzText).unwrap();
    assert_eq!(cloud.len(), 3);
    assert_eq!(cloud.features().data(), &[1.0, 1.0, 1.0]);
    assert!(cloud.labels().is_none());
}

#[test]
fn malformed_rows_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.xyz");
    std::fs::write(&path, "0 0 0 1\n1 2 x 1\n").unwrap();
    let err = load_cloud(&path, CloudFormat::XyzText).unwrap_err().to_string();
    assert!(err.contains(":2"), "{err}");
    std::fs::write(&path, "0 0 0 1\n1 2 3\n").unwrap();
    assert!(load_cloud(&path, CloudFormat::XyzText).is_err());
    std::fs::write(&path, "# nothing\n").unwrap();
    assert!(load_cloud(&path, CloudFormat::XyzText).is_err());
}

#[test]
fn ply_with_normals_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.ply");
    std::fs::write(
        &path,
        "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\n\
         property float z\nproperty float nx\nproperty float ny\nproperty float nz\nproperty int label\n\
         element face 0\nproperty list uchar int vertex_indices\nend_header\n\
         0 0 0 0 0 1 2\n1 1 1 1 0 0 0\n",
    )
    .unwrap();
    let cloud = load_cloud(&path, CloudFormat::PlyAscii).unwrap();
    assert_eq!(cloud.len(), 2);
    assert_eq!(cloud.features().row(0), &[0.0, 0.0, 1.0]);
    assert_eq!(cloud.labels().unwrap(), &[2, 0]);

    std::fs::write(&path, "ply\nformat binary_little_endian 1.0\nend_header\n").unwrap();
    assert!(load_cloud(&path, CloudFormat::PlyAscii).is_err());
}

#[test]
fn beacon_labels_follow_quadrant_rule() {
    for seed in 0..20 {
        let cloud = gen_synthetic_scene(seed, SceneKind::Beacon);
        let b = find_beacon(&cloud).unwrap();
        assert_eq!(cloud.features().row(b), BEACON_COLOR);
        let beacon = cloud.positions()[b];
        let labels = cloud.labels().unwrap();
        for i in cloud.valid_indices() {
            let p = cloud.positions()[i];
            let east = beacon[0] >= p[0];
            let north = beacon[1] >= p[1];
            let expected = [[2, 3], [1, 0]][north as usize][east as usize];
            assert_eq!(labels[i], expected);
            assert_eq!(beacon_quadrant(p, beacon), expected);
        }
    }
}

#[test]
fn scenes_are_deterministic() {
    for kind in [SceneKind::Rooms, SceneKind::Beacon, SceneKind::Shapes] {
        assert_eq!(gen_synthetic_scene(7, kind), gen_synthetic_scene(7, kind));
        assert_ne!(gen_synthetic_scene(7, kind), gen_synthetic_scene(8, kind));
    }
}

#[test]
fn shape_normals_are_unit() {
    for seed in 0..25 {
        let cloud = gen_synthetic_scene(seed, SceneKind::Shapes);
        assert!(cloud.class_label().is_some());
        for row in cloud.features().row_iter() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn room_class_count_is_configurable() {
    let opts = SceneOptions {
        points: 64,
        room_classes: 2,
        ..SceneOptions::for_kind(SceneKind::Rooms)
    };
    let cloud = gen_synthetic_scene_with(3, SceneKind::Rooms, &opts).unwrap();
    assert_eq!(cloud.len(), 64);
    let labels = cloud.labels().unwrap();
    assert!(labels.contains(&0) && labels.contains(&1));
    assert!(labels.iter().all(|&l| l < 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crop_has_budget_rows_and_stays_inside(
        seed in any::<u64>(),
        n in 1usize..300,
        budget in 1usize..200,
        side in 0.05f64..1.5,
        cx in 0.0f64..1.0,
        cy in 0.0f64..1.0,
        cz in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, n, 0, 2, false);
        let labels = random_labels(&mut rng, &cloud, 4);
        let cloud = cloud.with_labels(labels).unwrap();
        let center = [cx, cy, cz];
        let spec = CropSpec { side_length: side, point_budget: budget, seed };
        let crop = sample_crop(&cloud, center, &spec).unwrap();
        let inside = cloud
            .positions()
            .iter()
            .filter(|p| (0..3).all(|a| (p[a] - center[a]).abs() <= side / 2.0))
            .count();
        prop_assert_eq!(crop.len(), budget);
        prop_assert_eq!(crop.valid_count(), inside.min(budget));
        for i in crop.valid_indices() {
            let p = crop.positions()[i];
            prop_assert!((0..3).all(|a| (p[a] - center[a]).abs() <= side / 2.0 + 1e-9));
        }
        for i in (0..budget).filter(|&i| !crop.valid()[i]) {
            prop_assert!(crop.features().row(i).iter().all(|&v| v == 0.0));
            prop_assert_eq!(crop.labels().unwrap()[i], 0);
        }
        prop_assert_eq!(sample_crop(&cloud, center, &spec).unwrap(), crop);
    }
}
