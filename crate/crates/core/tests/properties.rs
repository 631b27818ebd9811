//! Property tests for invariants that cut across modules.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use nalgebra::{UnitQuaternion, Vector3};
use terrec::augment::{augment_frame, augment_frame_traced, AugmentConfig};
use terrec::eval::{icp_align, occupancy_metrics, ElevationMap, KdTree};
use terrec::geometry::{compose, Frame, PointCloud, Pose, Vec3};
use terrec::io::{decode_checkpoint, decode_trajectory, encode_checkpoint, encode_trajectory};
use terrec::model::{Model, ModelSpec};
use terrec::nn::{occupancy_bce_loss, offset_loss, BatchNormState, Mode, Occupancy};
use terrec::simgen::{
    default_cameras, generate_scene, generate_trajectory, render_measurement, CameraModel,
    SceneParams, SimConfig, TrajectoryParams,
};
use terrec::sparse::{build_kernel_map, prune, sparse_conv, Coord, ConvWeights, SparseTensor};
use terrec::voxel::GridConfig;

fn tensor_from(seed: u64, n: usize, channels: usize, span: i32) -> SparseTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = FxHashSet::default();
    while set.len() < n {
        set.insert([
            rng.random_range(0..span),
            rng.random_range(0..span),
            rng.random_range(0..span),
            rng.random_range(0..2),
        ]);
    }
    let mut coords: Vec<Coord> = set.into_iter().collect();
    coords.sort();
    let feats = (0..n * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    SparseTensor::new(coords, feats, channels, [1; 4]).unwrap()
}

fn weights_from(seed: u64, kernel: [usize; 4], c_in: usize, c_out: usize) -> ConvWeights<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ConvWeights::zeros(kernel, c_in, c_out, false);
    for v in &mut w.weights {
        *v = rng.random_range(-1.0..1.0);
    }
    w
}

fn cloud(pts: &[[f64; 3]], frame: Frame) -> PointCloud {
    PointCloud::new(pts.iter().map(|p| Vec3::from(*p)).collect(), frame)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, n in 1usize..40) {
        let x = tensor_from(seed, n, 2, 5);
        // same coordinate set as x, other features
        let y = x.with_features(tensor_from(seed ^ 1, n, 2, 5).features().to_vec(), 2).unwrap();
        let w = weights_from(seed, [3, 3, 3, 2], 2, 3);
        let mix: Vec<f64> = x.features().iter().zip(y.features()).map(|(p, q)| a * p + b * q).collect();
        let (lhs, _) = sparse_conv(&x.with_features(mix, 2).unwrap(), &w, [1; 4]).unwrap();
        let (cx, _) = sparse_conv(&x, &w, [1; 4]).unwrap();
        let (cy, _) = sparse_conv(&y, &w, [1; 4]).unwrap();
        for ((l, p), q) in lhs.features().iter().zip(cx.features()).zip(cy.features()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-5);
        }
    }

    #[test]
    fn conv_is_bitwise_deterministic(seed in any::<u64>(), n in 1usize..60) {
        let x = tensor_from(seed, n, 2, 6).cast::<f32>();
        let w = ConvWeights {
            kernel_size: [2, 2, 2, 2],
            c_in: 2,
            c_out: 4,
            weights: weights_from(seed, [2, 2, 2, 2], 2, 4).weights.iter().map(|&v| v as f32).collect(),
            bias: None,
        };
        let (a, _) = sparse_conv(&x, &w, [2, 2, 2, 1]).unwrap();
        let (b, _) = sparse_conv(&x, &w, [2, 2, 2, 1]).unwrap();
        prop_assert_eq!(a.coords(), b.coords());
        prop_assert!(a.features().iter().zip(b.features()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn strided_conv_keeps_coords_unique_and_on_lattice(seed in any::<u64>(), n in 1usize..80) {
        let x = tensor_from(seed, n, 1, 9);
        let w = weights_from(seed, [2, 2, 2, 2], 1, 1);
        let (y, rec) = sparse_conv(&x, &w, [2, 2, 2, 1]).unwrap();
        prop_assert_eq!(y.stride(), [2, 2, 2, 1]);
        let unique: FxHashSet<_> = y.coords().iter().collect();
        prop_assert_eq!(unique.len(), y.len());
        prop_assert!(y.coords().iter().all(|c| c[..3].iter().all(|v| v % 2 == 0)));
        prop_assert!(y.len() <= x.len());

        let mut triples = FxHashSet::default();
        for (d, pairs) in rec.kmap.pairs.iter().enumerate() {
            for &(i, o) in pairs {
                prop_assert!((i as usize) < rec.kmap.n_in && (o as usize) < rec.kmap.n_out);
                prop_assert!(triples.insert((d, i, o)));
            }
        }
    }

    #[test]
    fn kernel_map_pairs_match_offsets(seed in any::<u64>(), n in 1usize..40) {
        let x = tensor_from(seed, n, 1, 5);
        let km = build_kernel_map(x.index(), x.coords(), [3, 3, 3, 2], [1; 4], [1; 4]);
        prop_assert_eq!(km.num_offsets(), 54);
        let mut count = 0;
        for (off, pairs) in km.offsets.iter().zip(&km.pairs) {
            for &(i, o) in pairs {
                let (ci, co) = (x.coords()[i as usize], x.coords()[o as usize]);
                prop_assert_eq!([co[0] + off[0], co[1] + off[1], co[2] + off[2], co[3] + off[3]], ci);
                count += 1;
            }
        }
        // brute force pair count
        let mut expect = 0;
        for a in x.coords() {
            for b in x.coords() {
                let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2], b[3] - a[3]];
                if d[..3].iter().all(|v| v.abs() <= 1) && (0..2).contains(&d[3]) {
                    expect += 1;
                }
            }
        }
        prop_assert_eq!(count, expect);
    }

    #[test]
    fn prune_count_non_increasing_in_alpha(seed in any::<u64>(), n in 1usize..80, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let x = tensor_from(seed, n, 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lik = x.with_features((0..n).map(|_| rng.random_range(0.0..1.0)).collect(), 1).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, _) = prune(&x, &lik, lo).unwrap();
        let (p_hi, _) = prune(&x, &lik, hi).unwrap();
        prop_assert!(p_hi.len() <= p_lo.len());
        let kept: FxHashSet<_> = p_lo.coords().iter().collect();
        prop_assert!(p_hi.coords().iter().all(|c| kept.contains(c)));
    }

    #[test]
    fn batch_norm_eval_is_affine_and_pure(seed in any::<u64>(), rows in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bn = BatchNormState::<f64>::new(2);
        bn.mode = Mode::Eval;
        bn.gamma = vec![rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        bn.beta = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        bn.running_mean = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        bn.running_var = vec![rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
        let before = bn.clone();
        let x: Vec<f64> = (0..rows * 2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (y1, _) = bn.forward(&x).unwrap();
        let (y2, _) = bn.forward(&x).unwrap();
        prop_assert_eq!(&y1, &y2);
        prop_assert_eq!(&bn, &before);
        for (i, (xi, yi)) in x.iter().zip(&y1).enumerate() {
            let c = i % 2;
            let want = bn.gamma[c] * (xi - bn.running_mean[c]) / (bn.running_var[c] + bn.epsilon).sqrt() + bn.beta[c];
            prop_assert!((yi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn losses_are_nonnegative(seed in any::<u64>(), n in 1usize..40) {
        let x = tensor_from(seed, n, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lik = x.with_features((0..n).map(|_| rng.random_range(0.0..1.0)).collect(), 1).unwrap();
        let target: Occupancy = x.coords().iter().filter(|c| c[3] == 0).map(|c| [c[0], c[1], c[2]]).collect();
        prop_assert!(occupancy_bce_loss(&lik, &target).value >= 0.0);
        let other = tensor_from(seed ^ 7, n, 3, 5);
        prop_assert!(offset_loss(&x, &other).value >= 0.0);
    }

    #[test]
    fn metrics_swap_precision_and_recall(
        pred in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..40),
        gt in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..40),
    ) {
        let cfg = GridConfig::new(5, 0.2);
        let (p, g) = (cloud(&pred, Frame::World), cloud(&gt, Frame::World));
        let ab = occupancy_metrics(&p, &g, &cfg).unwrap();
        let ba = occupancy_metrics(&g, &p, &cfg).unwrap();
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert_eq!(ab.f1, terrec::eval::harmonic(ab.precision, ab.recall));
    }

    #[test]
    fn elevation_variance_never_grows(zs in prop::collection::vec(-1.0f64..1.0, 1..30), var in 1e-6f64..1.0) {
        let mut map = ElevationMap::new(0.1);
        let mut last = f64::INFINITY;
        for z in zs {
            map.fuse([0, 0], z, var);
            let v = map.cells[&[0, 0]].variance;
            prop_assert!(v <= last && v > 0.0);
            last = v;
        }
    }

    #[test]
    fn augmentation_is_pure_and_deterministic(
        pts in prop::collection::vec(prop::array::uniform3(-1.6f64..1.6), 1..200),
        seed in any::<u64>(),
    ) {
        let c = cloud(&pts, Frame::Robot);
        let copy = c.clone();
        let pose = Pose::from_translation(0.3, -0.2, 0.5);
        let cfg = AugmentConfig::default();
        let a = augment_frame(&c, &pose, &cfg, seed);
        let b = augment_frame(&c, &pose, &cfg, seed);
        prop_assert_eq!(&c, &copy);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn patch_prune_only_removes_patch_points(
        pts in prop::collection::vec(prop::array::uniform3(-1.6f64..1.6), 1..300),
        seed in any::<u64>(),
    ) {
        let c = cloud(&pts, Frame::Robot);
        let cfg = AugmentConfig { patch_prune: true, ..AugmentConfig::none() };
        let (out, _, trace) = augment_frame_traced(&c, &Pose::identity(), &cfg, seed);
        let outside: Vec<_> = c.points.iter().filter(|p| !trace.prune_patches.iter().any(|q| q.contains(p))).copied().collect();
        prop_assert_eq!(out.points, outside);
    }

    #[test]
    fn dataset_encoding_round_trips(seed in 0u64..1000) {
        let sim = SimConfig {
            trajectory: TrajectoryParams { num_steps: 2, ..Default::default() },
            grid: GridConfig::new(16, 0.1),
            gt_density: 200.0,
            ..Default::default()
        };
        let t = generate_trajectory(&sim, seed);
        let bytes = encode_trajectory(&t);
        let back = decode_trajectory(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(encode_trajectory(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn icp_never_raises_rmse(seed in any::<u64>(), max_iter in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..200)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..0.5)))
            .collect();
        let src = PointCloud::new(pts.clone(), Frame::World);
        let motion = Pose::new(
            Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 0.0),
            UnitQuaternion::from_euler_angles(0.0, 0.0, rng.random_range(-0.3..0.3)),
        );
        let tgt = PointCloud::new(pts.iter().map(|p| motion.transform_point(p) + Vec3::new(0.0, 0.0, rng.random_range(-0.01..0.01))).collect(), Frame::World);
        let tree = KdTree::new(&tgt.points);
        let init_rmse = (src.points.iter().map(|p| tree.nearest(p).unwrap().1).sum::<f64>() / 200.0).sqrt();
        let r = icp_align(&src, &tgt, &Pose::identity(), max_iter, 1e-12).unwrap();
        prop_assert!(r.rmse <= init_rmse);
        prop_assert!(r.iterations <= max_iter);
    }

    #[test]
    fn measurements_lie_on_scene_surfaces(seed in 0u64..10_000) {
        let scene = generate_scene(&SceneParams::default(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let robot = Pose::new(
            Vec3::new(x, y, scene.terrain_height(x, y).unwrap() + 0.5),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.random_range(-3.0..3.0)),
        );
        let cams: Vec<CameraModel> = default_cameras()
            .into_iter()
            .map(|c| CameraModel { width: 16, height: 12, ..c })
            .collect();
        let m = render_measurement(&scene, &robot, &cams);
        let h = 1e-6;
        for p in &m.points {
            let on_face = (0..3).any(|a| {
                let mut e = Vec3::zeros();
                e[a] = h;
                scene.is_solid(&(p + e)) != scene.is_solid(&(p - e))
            });
            prop_assert!(on_face, "{:?} is not on a surface", p);
        }
    }

    #[test]
    fn ground_truth_ignores_cameras(seed in 0u64..1000) {
        let base = SimConfig {
            trajectory: TrajectoryParams { num_steps: 2, ..Default::default() },
            grid: GridConfig::new(16, 0.1),
            gt_density: 200.0,
            ..Default::default()
        };
        let moved = SimConfig {
            cameras: default_cameras()
                .into_iter()
                .map(|c| CameraModel { mount: compose(&Pose::from_translation(0.05, 0.0, 0.1), &c.mount), ..c })
                .collect(),
            ..base.clone()
        };
        let a = generate_trajectory(&base, seed);
        let b = generate_trajectory(&moved, seed);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            prop_assert_eq!(&fa.ground_truth, &fb.ground_truth);
        }
        prop_assert_eq!(generate_trajectory(&base, seed), a);
    }
}

#[test]
fn quaternion_norm_survives_many_compositions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = Pose::identity();
    for _ in 0..10_000 {
        let step = Pose::new(
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            UnitQuaternion::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0)),
        );
        p = compose(&p, &step);
        assert!((p.rotation.quaternion().norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn eval_forward_is_deterministic_and_checkpoints_round_trip() {
    let model = Model::new(ModelSpec::desk(), 5).unwrap();
    let x = tensor_from(5, 300, 3, 32).cast::<f32>();
    let x = x.with_features(x.features().iter().map(|v| v.abs() * 0.99).collect(), 3).unwrap();
    let a = model.forward(&x, 0.5, Mode::Eval).unwrap();
    let b = model.forward(&x, 0.5, Mode::Eval).unwrap();
    assert_eq!(a.estimate, b.estimate);

    let bytes = encode_checkpoint(&model.to_checkpoint(None, 3));
    let ck = decode_checkpoint(&bytes, std::path::Path::new("mem")).unwrap();
    let (back, adam, epoch) = Model::from_checkpoint(&ck).unwrap();
    assert!(adam.is_none());
    assert_eq!(epoch, 3);
    for (p, q) in model.params.iter().zip(&back.params) {
        assert!(p.data.iter().zip(&q.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.forward(&x, 0.5, Mode::Eval).unwrap().estimate, a.estimate);
}
