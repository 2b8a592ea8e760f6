use std::sync::OnceLock;

use mo_ransac::dpc::{train, NetConfig, TrainConfig, VotingNet};
use mo_ransac::metrics::evaluate;
use mo_ransac::pipeline::{baseline, segment, PipelineConfig};
use mo_ransac::rng;
use mo_ransac::synth::{gen_scene, read_scene, write_scene, ObjectKind, ObjectSpec, SceneSpec};
use mo_ransac::{PointCloud, RansacParams, Vec3, UNASSIGNED};
use rand::Rng;

/// A toy net trained once (same recipe as the acceptance suite) and shared
/// by the tests in this file.
fn toy_net() -> &'static VotingNet {
    static NET: OnceLock<VotingNet> = OnceLock::new();
    NET.get_or_init(|| {
        let data: Vec<PointCloud> = (0..20)
            .map(|s| {
                gen_scene(&SceneSpec {
                    seed: 1000 + s,
                    ..SceneSpec::default()
                })
                .unwrap()
                .cloud
            })
            .collect();
        let config = TrainConfig {
            epochs: 30,
            learning_rate: 0.1,
            points_per_cloud: 2048,
            ..TrainConfig::default()
        };
        train(VotingNet::new(&NetConfig::default()).unwrap(), &data, &config)
            .unwrap()
            .0
    })
}

#[test]
fn three_plane_scene_gives_three_clusters() {
    let spec = SceneSpec {
        objects: vec![ObjectSpec {
            kind: ObjectKind::Box { visible_faces: 2 },
            center: [0.0, 0.0],
            size: [0.2, 0.2, 0.15],
            yaw: 0.0,
            base: 0.0,
        }],
        ..SceneSpec::default()
    };
    let scene = gen_scene(&spec).unwrap();
    assert_eq!(scene.gt.cluster_count(), 3);
    let out = segment(Some(toy_net()), &scene.cloud, &PipelineConfig::default()).unwrap();
    assert_eq!(out.segmentation.cluster_count(), 3);
    let report = evaluate(&scene.cloud, &scene.gt, &out.segmentation, 0.005).unwrap();
    assert!(report.sc > 0.95, "{report}");
}

#[test]
fn full_pipeline_rand_index_at_least_baseline_over_ten_scenes() {
    let (mut full, mut base) = (0.0, 0.0);
    for s in 0..10 {
        let scene = gen_scene(&SceneSpec {
            seed: 300 + s,
            ..SceneSpec::default()
        })
        .unwrap();
        let seg = segment(Some(toy_net()), &scene.cloud, &PipelineConfig::default()).unwrap();
        let b = baseline(&scene.cloud, &RansacParams::for_cloud_size(scene.cloud.len()), 20).unwrap();
        full += evaluate(&scene.cloud, &scene.gt, &seg.segmentation, 0.005).unwrap().ri;
        base += evaluate(&scene.cloud, &scene.gt, &b, 0.005).unwrap().ri;
    }
    assert!(full >= base, "full {full} vs baseline {base}");
}

#[test]
fn baseline_on_pure_noise_assigns_nothing() {
    // 400 points uniform in a 1 m cube: a 1 cm slab holds about 4 of them,
    // far below the 50-point minimum
    let mut r = rng::rng(4);
    let pts: Vec<Vec3> = (0..400)
        .map(|_| Vec3::new(r.random(), r.random(), r.random()))
        .collect();
    let cloud = PointCloud::new(pts).unwrap();
    let seg = baseline(&cloud, &RansacParams::for_cloud_size(cloud.len()), 10).unwrap();
    assert!(seg.labels().iter().all(|&l| l == UNASSIGNED));
}

#[test]
fn archived_scene_segments_like_the_original() {
    let spec = SceneSpec {
        object_count: 3,
        seed: 12,
        ..SceneSpec::default()
    };
    let scene = gen_scene(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scene(dir.path(), &spec, &scene).unwrap();
    let archive = read_scene(dir.path()).unwrap();
    assert_eq!(archive.gt.as_ref(), Some(&scene.gt));
    assert_eq!(archive.spec.as_ref(), Some(&spec));
    let a = segment(None, &scene.cloud, &PipelineConfig::default()).unwrap();
    let b = segment(None, &archive.cloud, &PipelineConfig::default()).unwrap();
    let ra = evaluate(&scene.cloud, &scene.gt, &a.segmentation, 0.005).unwrap();
    let rb = evaluate(&archive.cloud, &scene.gt, &b.segmentation, 0.005).unwrap();
    // positions pass through f32 in the archive, so compare quality only
    assert!((ra.sc - rb.sc).abs() < 0.05, "{ra} vs {rb}");
}

#[test]
fn segmentation_is_deterministic() {
    let scene = gen_scene(&SceneSpec {
        seed: 21,
        ..SceneSpec::default()
    })
    .unwrap();
    let config = PipelineConfig::default();
    let a = segment(Some(toy_net()), &scene.cloud, &config).unwrap();
    let b = segment(Some(toy_net()), &scene.cloud, &config).unwrap();
    assert_eq!(a.segmentation, b.segmentation);
    assert_eq!(a.merge_stats, b.merge_stats);
}
