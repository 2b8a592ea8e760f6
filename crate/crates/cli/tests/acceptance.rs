//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs as a plain binary (`harness = false`) so the lines
//! are visible in `cargo test` output.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mo_ransac::dpc::train::{cluster_cloud, vote_frame};
use mo_ransac::dpc::{
    assign_clusters, contrastive_loss, inlier_spread, loss_gradients, train, Activation, ClusterPseudoLabel,
    InferConfig, Mode, NetConfig, PseudoLabels, SubplaneClustering, TrainConfig, VoteNorm, VotingNet,
};
use mo_ransac::grasp::{grasp_point, DEFAULT_FLOOR_CONE_DEG};
use mo_ransac::merge::{member_count, merge_process, Cluster, ClusterDict, MergeParams};
use mo_ransac::metrics::{evaluate, rand_index, segmentation_covering, variation_of_information};
use mo_ransac::pipeline::{baseline, segment, PipelineConfig};
use mo_ransac::plane::{fit_plane_lsq, ransac_plane};
use mo_ransac::rng;
use mo_ransac::synth::{gen_scene, ObjectKind, ObjectSpec, SceneSpec};
use mo_ransac::{Error, PointCloud, RansacParams, Vec3};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// 1. RANSAC recovery ------------------------------------------------------

fn ransac_recovery() -> Outcome {
    let mut r = rng::rng(1);
    let normal = Vec3::new(0.3, -0.5, 0.8).normalize();
    let u = normal.cross(&Vec3::x()).normalize();
    let v = normal.cross(&u);
    let offset = 0.4;
    let noise = Normal::new(0.0, 0.002).unwrap();
    let mut points = Vec::new();
    for _ in 0..1000 {
        let (s, t) = (r.random_range(-0.5..0.5), r.random_range(-0.5..0.5));
        points.push(normal * offset + u * s + v * t + normal * noise.sample(&mut r));
    }
    for _ in 0..300 {
        points.push(Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        ));
    }
    let params = RansacParams {
        inlier_threshold: 0.01,
        ..RansacParams::default()
    };
    let t = Instant::now();
    let fit = match ransac_plane(&points, &params) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("ransac failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    let angle = fit.plane.normal().dot(&normal).abs().min(1.0).acos().to_degrees();
    let recalled = fit.inliers.iter().filter(|&&i| i < 1000).count();
    let recall = recalled as f64 / 1000.0;
    outcome(
        angle <= 1.0 && recall >= 0.95 && secs < 1.0,
        format!("normal error {angle:.3} deg (<= 1), recall {recall:.3} (>= 0.95), {secs:.3} s (< 1)"),
    )
}

// 2. Sequential baseline --------------------------------------------------

fn sequential_baseline() -> Outcome {
    let spec = SceneSpec {
        floor_points: 0,
        points_per_face: 1000,
        outlier_fraction: 0.05,
        noise_sigma: 0.001,
        objects: vec![ObjectSpec {
            kind: ObjectKind::Box { visible_faces: 3 },
            center: [0.0, 0.0],
            size: [0.3, 0.3, 0.3],
            // turned 45 degrees so two sides face the camera
            yaw: std::f64::consts::FRAC_PI_4,
            base: 0.0,
        }],
        seed: 2,
        ..SceneSpec::default()
    };
    let scene = gen_scene(&spec).unwrap();
    let seg = baseline(&scene.cloud, &RansacParams::for_cloud_size(scene.cloud.len()), 20).unwrap();
    let report = evaluate(&scene.cloud, &scene.gt, &seg, 0.005).unwrap();
    let clusters = seg.cluster_count();
    let faces = scene.gt.cluster_count();
    outcome(
        faces == 3 && clusters == 3 && report.ri >= 0.95,
        format!(
            "{faces} gt faces, {clusters} clusters (== 3), RI {:.4} (>= 0.95) at 0.5 cm voxels",
            report.ri
        ),
    )
}

// 3. Nearest-representative assignment -----------------------------------

fn assignment_oracle() -> Outcome {
    let mut r = rng::rng(3);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = r.random_range(1..=500);
        let k = r.random_range(1..=32usize.min(n));
        let voted: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                    r.random_range(-1.0..1.0),
                )
            })
            .collect();
        let mut samples: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = r.random_range(i..n);
            samples.swap(i, j);
        }
        samples.truncate(k);
        let got = assign_clusters(&voted, &samples).unwrap();
        for (i, p) in voted.iter().enumerate() {
            let mut best = 0;
            for kk in 1..k {
                if (p - voted[samples[kk]]).norm_squared() < (p - voted[samples[best]]).norm_squared() {
                    best = kk;
                }
            }
            if got.labels[i] != best {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over 100 instances (N <= 500, K <= 32)"),
    )
}

// 4. Contrastive loss -----------------------------------------------------

fn one_cluster(voted: Vec<Vec3>, inliers: Vec<usize>, outliers: Vec<usize>) -> (SubplaneClustering, PseudoLabels) {
    let clustering = SubplaneClustering {
        labels: vec![0; voted.len()],
        sample_indices: vec![0],
        representatives: vec![voted[0]],
        voted,
    };
    let labels = PseudoLabels {
        clusters: vec![ClusterPseudoLabel {
            inliers,
            outliers,
            plane: None,
            skipped: false,
        }],
    };
    (clustering, labels)
}

fn loss_cases() -> Outcome {
    // representative at the origin, one inlier and one outlier at L1 distance 1
    let (c, l) = one_cluster(
        vec![Vec3::zeros(), Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.0, 0.0, -1.0)],
        vec![1],
        vec![2],
    );
    let hand = contrastive_loss(&c, &l, 3.0, VoteNorm::L1).per_cluster[0];
    // outliers at L1 distance 3.5 and exactly alpha leave only the inlier term
    let (c, l) = one_cluster(
        vec![
            Vec3::zeros(),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.5),
            Vec3::new(-3.0, 0.0, 0.0),
        ],
        vec![1],
        vec![2, 3],
    );
    let far = contrastive_loss(&c, &l, 3.0, VoteNorm::L1).per_cluster[0];
    outcome(
        (hand - 3.0).abs() <= 1e-12 && far == 0.1,
        format!(
            "hand case L_k = {hand} (3 within 1e-12); outliers at >= alpha give L_k = {far} (inlier term 0.1 only)"
        ),
    )
}

// 5. Gradient check -------------------------------------------------------

/// Sign of every L1 component and hinge activity; finite differences are
/// only meaningful when this pattern does not change across the stencil.
fn kink_pattern(
    net: &VotingNet,
    framed: &Array2<f64>,
    samples: &[usize],
    labels: &PseudoLabels,
    alpha: f64,
) -> Vec<i8> {
    let votes = net.forward(framed.view(), Mode::Train).unwrap();
    let voted: Vec<Vec3> = (0..framed.nrows())
        .map(|i| {
            Vec3::new(framed[[i, 0]], framed[[i, 1]], framed[[i, 2]])
                + Vec3::new(votes[[i, 0]], votes[[i, 1]], votes[[i, 2]])
        })
        .collect();
    let mut pattern = Vec::new();
    for (k, c) in labels.clusters.iter().enumerate() {
        if c.skipped {
            continue;
        }
        let rep = voted[samples[k]];
        for &i in c.inliers.iter().chain(&c.outliers) {
            let d = voted[i] - rep;
            pattern.extend(d.iter().map(|v| v.signum() as i8));
        }
        for &i in &c.outliers {
            pattern.push(((voted[i] - rep).abs().sum() < alpha) as i8);
        }
    }
    pattern
}

fn gradient_check() -> Outcome {
    let scene = gen_scene(&SceneSpec {
        object_count: 2,
        seed: 5,
        ..SceneSpec::default()
    })
    .unwrap();
    let step = scene.cloud.len() / 64;
    let idx: Vec<usize> = (0..64).map(|i| i * step).collect();
    let cloud = scene.cloud.select(&idx);
    let features = cloud.features9();
    let net = VotingNet::new(&NetConfig {
        backbone: vec![16],
        backbone_activation: Activation::Tanh,
        head_activation: Activation::Tanh,
        seed: 5,
        ..NetConfig::default()
    })
    .unwrap();
    let layers = net.layers.len();
    let ransac = RansacParams {
        min_inliers: 3,
        ..RansacParams::default()
    };
    let clustered = cluster_cloud(Some(&net), features.view(), 4, Mode::Train, &ransac, 5).unwrap();
    let samples = clustered.clustering.sample_indices.clone();
    let labels = clustered.labels;
    let framed = vote_frame(features.view());
    let alpha = 3.0;
    let loss_of = |n: &VotingNet| {
        loss_gradients(n, framed.view(), &samples, &labels, alpha, VoteNorm::L1)
            .unwrap()
            .0
            .total
    };
    let (_, grads, _) = loss_gradients(&net, framed.view(), &samples, &labels, alpha, VoteNorm::L1).unwrap();
    let analytic = grads.flat();
    let base = net.flat_params();
    let h = 1e-4;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for (i, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[i] += h;
        let mut plus = net.clone();
        plus.set_flat_params(&p).unwrap();
        p[i] -= 2.0 * h;
        let mut minus = net.clone();
        minus.set_flat_params(&p).unwrap();
        if kink_pattern(&plus, &framed, &samples, &labels, alpha)
            != kink_pattern(&minus, &framed, &samples, &labels, alpha)
        {
            skipped += 1;
            continue;
        }
        let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        let scale = fd.abs().max(g.abs());
        if scale < 1e-7 {
            continue;
        }
        checked += 1;
        worst = worst.max((fd - g).abs() / scale);
    }
    outcome(
        worst < 1e-3 && checked > analytic.len() / 2,
        format!(
            "{layers}-layer net, 64 points, h = 1e-4: max relative error {worst:.2e} (< 1e-3) over {checked} \
             parameters, {skipped} skipped at kinks"
        ),
    )
}

// 6. Training effect ------------------------------------------------------

const TRAIN_SEEDS: [u64; 3] = [0, 1, 2];

fn training_dataset() -> Vec<PointCloud> {
    (0..20)
        .map(|s| {
            gen_scene(&SceneSpec {
                seed: 1000 + s,
                ..SceneSpec::default()
            })
            .unwrap()
            .cloud
        })
        .collect()
}

fn acceptance_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        learning_rate: 0.1,
        points_per_cloud: 2048,
        seed,
        ..TrainConfig::default()
    }
}

fn training_effect(trained: &mut Vec<VotingNet>) -> Outcome {
    let t = Instant::now();
    let data = training_dataset();
    let held = gen_scene(&SceneSpec {
        seed: 5000,
        ..SceneSpec::default()
    })
    .unwrap();
    let infer = InferConfig::default();
    let mut good = 0;
    let mut details = Vec::new();
    for seed in TRAIN_SEEDS {
        let net = VotingNet::new(&NetConfig {
            seed,
            ..NetConfig::default()
        })
        .unwrap();
        let before = inlier_spread(Some(&net), &held.cloud, &infer).unwrap();
        let (net, report) = train(net, &data, &acceptance_train_config(seed)).unwrap();
        let after = inlier_spread(Some(&net), &held.cloud, &infer).unwrap();
        let means = report.epoch_means();
        let (first, last) = (means[0].1, means[means.len() - 1].1);
        let drop = 1.0 - after / before;
        let ok = last < first && drop >= 0.30;
        good += ok as usize;
        details.push(format!(
            "seed {seed}: loss {first:.3} -> {last:.3}, spread drop {:.1}%",
            100.0 * drop
        ));
        trained.push(net);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        good >= 2 && secs < 600.0,
        format!(
            "{good}/3 seeds pass (>= 2), {secs:.0} s (< 600); {}",
            details.join("; ")
        ),
    )
}

// 7. Merge ----------------------------------------------------------------

fn grid(origin: Vec3, a: Vec3, b: Vec3, n: usize) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            pts.push(origin + a * (i as f64 * 0.01) + b * (j as f64 * 0.01));
        }
    }
    pts
}

fn dict_of(patches: Vec<Vec<Vec3>>) -> (PointCloud, ClusterDict) {
    let mut all = Vec::new();
    let mut dict = ClusterDict::new();
    for (id, p) in patches.into_iter().enumerate() {
        let start = all.len();
        let plane = fit_plane_lsq(&p).ok();
        all.extend(p);
        dict.insert(
            id,
            Cluster {
                indices: (start..all.len()).collect(),
                plane,
            },
        );
    }
    (PointCloud::new(all).unwrap(), dict)
}

fn merge_checks() -> Outcome {
    let params = MergeParams::default();
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    let (cloud, dict) = dict_of(vec![
        grid(Vec3::new(0.0, 0.0, 0.0), x, y, 10),
        grid(Vec3::new(0.1, 0.0, 0.0), x, y, 10),
        grid(Vec3::new(0.0, 0.1, 0.0), x, y, 10),
        grid(Vec3::new(0.1, 0.1, 0.0), x, y, 10),
    ]);
    let (coplanar, stats) = merge_process(&dict, &cloud, &params).unwrap();
    let (again, _) = merge_process(&coplanar, &cloud, &params).unwrap();
    let n = cloud.len() as u64;
    let bound = params.neighbors as u64 * dict.len() as u64 * n * n;
    let (cloud2, dict2) = dict_of(vec![
        grid(Vec3::new(0.0, 0.0, 0.0), x, y, 10),
        grid(Vec3::new(0.0, 0.0, 0.01), x, z, 10),
    ]);
    let (perp, stats2) = merge_process(&dict2, &cloud2, &params).unwrap();
    let (perp_again, _) = merge_process(&perp, &cloud2, &params).unwrap();
    let n2 = cloud2.len() as u64;
    let bound2 = params.neighbors as u64 * dict2.len() as u64 * n2 * n2;
    let ok = coplanar.len() == 1
        && perp.len() == 2
        && member_count(&coplanar) == cloud.len()
        && member_count(&perp) == cloud2.len()
        && again == coplanar
        && perp_again == perp
        && stats.distance_evaluations <= bound
        && stats2.distance_evaluations <= bound2;
    outcome(
        ok,
        format!(
            "coplanar patches -> {} cluster(s), perpendicular -> {}, members {}/{} and {}/{}, fixed point {}, \
             distance evaluations {} <= {} and {} <= {}",
            coplanar.len(),
            perp.len(),
            member_count(&coplanar),
            cloud.len(),
            member_count(&perp),
            cloud2.len(),
            again == coplanar && perp_again == perp,
            stats.distance_evaluations,
            bound,
            stats2.distance_evaluations,
            bound2
        ),
    )
}

// 8. Metrics --------------------------------------------------------------

fn metric_checks() -> Outcome {
    let mut r = rng::rng(8);
    let a: Vec<i64> = (0..200).map(|_| r.random_range(0..7)).collect();
    let voi_self = variation_of_information(&a, &a).unwrap();
    let ri_self = rand_index(&a, &a).unwrap();
    let sc_self = segmentation_covering(&a, &a).unwrap();
    let n = 50;
    let one = vec![0i64; n];
    let singletons: Vec<i64> = (0..n as i64).collect();
    let voi_split = variation_of_information(&one, &singletons).unwrap();
    let mut worst_ri = 0.0f64;
    for _ in 0..100 {
        let len = r.random_range(2..=200);
        let ka = r.random_range(1..8);
        let kb = r.random_range(1..8);
        let x: Vec<i64> = (0..len).map(|_| r.random_range(0..ka)).collect();
        let y: Vec<i64> = (0..len).map(|_| r.random_range(0..kb)).collect();
        let (mut agree, mut total) = (0u64, 0u64);
        for i in 0..len {
            for j in i + 1..len {
                total += 1;
                agree += ((x[i] == x[j]) == (y[i] == y[j])) as u64;
            }
        }
        let oracle = agree as f64 / total as f64;
        worst_ri = worst_ri.max((rand_index(&x, &y).unwrap() - oracle).abs());
    }
    let ok = voi_self.abs() <= 1e-12
        && ri_self == 1.0
        && sc_self == 1.0
        && (voi_split - (n as f64).ln()).abs() <= 1e-9
        && worst_ri <= 1e-12;
    outcome(
        ok,
        format!(
            "identical: VOI {voi_self:.1e}, RI {ri_self}, SC {sc_self}; one vs {n} singletons: VOI - ln n = {:.1e}; \
             RI vs pair scan max error {worst_ri:.1e}",
            voi_split - (n as f64).ln()
        ),
    )
}

// 9. End to end -----------------------------------------------------------

fn end_to_end(net: &VotingNet) -> Outcome {
    let config = PipelineConfig::default();
    let mut wins = 0;
    let mut scs = Vec::new();
    for s in 0..10 {
        let scene = gen_scene(&SceneSpec {
            seed: 9000 + s,
            object_count: 5,
            cylinder_fraction: 0.0,
            ..SceneSpec::default()
        })
        .unwrap();
        let full = segment(Some(net), &scene.cloud, &config).unwrap();
        let ablation = segment(None, &scene.cloud, &config).unwrap();
        let sc_full = evaluate(&scene.cloud, &scene.gt, &full.segmentation, 0.005).unwrap().sc;
        let sc_ablation = evaluate(&scene.cloud, &scene.gt, &ablation.segmentation, 0.005)
            .unwrap()
            .sc;
        wins += (sc_full >= sc_ablation) as usize;
        scs.push(sc_full);
    }
    let mean = scs.iter().sum::<f64>() / scs.len() as f64;
    let min = scs.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        mean >= 0.7 && wins >= 8,
        format!("mean SC {mean:.3} (>= 0.7, min {min:.3}), full >= ablation on {wins}/10 scenes (>= 8)"),
    )
}

// 10. Grasp rule ----------------------------------------------------------

fn grasp_checks(net: &VotingNet) -> Outcome {
    let boxed = |center: [f64; 2], size: [f64; 3], base: f64| ObjectSpec {
        kind: ObjectKind::Box { visible_faces: 3 },
        center,
        size,
        yaw: 0.2,
        base,
    };
    let spec = SceneSpec {
        objects: vec![
            boxed([-0.15, 0.05], [0.16, 0.16, 0.1], 0.0),
            boxed([0.12, -0.05], [0.18, 0.18, 0.12], 0.0),
            boxed([0.12, -0.05], [0.12, 0.12, 0.1], 0.12),
        ],
        seed: 10,
        ..SceneSpec::default()
    };
    let scene = gen_scene(&spec).unwrap();
    // gt top face of the tallest stack: the label whose points sit highest
    let mut best: Option<(f64, Vec3)> = None;
    for (&label, members) in &scene.gt.clusters() {
        if label < 0 {
            continue;
        }
        let c = scene.cloud.centroid_of(members);
        let h = c.dot(&scene.up);
        if best.is_none_or(|(bh, _)| h > bh) {
            best = Some((h, c));
        }
    }
    let target = best.unwrap().1;
    let out = segment(Some(net), &scene.cloud, &PipelineConfig::default()).unwrap();
    let picked = grasp_point(
        &out.segmentation,
        &scene.cloud,
        &out.clusters,
        &scene.up,
        DEFAULT_FLOOR_CONE_DEG,
    );
    let err = picked
        .as_ref()
        .map(|g| (g.point - target).norm())
        .unwrap_or(f64::INFINITY);

    let floor_only = gen_scene(&SceneSpec {
        object_count: 0,
        seed: 11,
        ..SceneSpec::default()
    })
    .unwrap();
    let out = segment(Some(net), &floor_only.cloud, &PipelineConfig::default()).unwrap();
    let floor_err = grasp_point(
        &out.segmentation,
        &floor_only.cloud,
        &out.clusters,
        &floor_only.up,
        DEFAULT_FLOOR_CONE_DEG,
    );
    let nothing = matches!(floor_err, Err(Error::NothingToGrasp));
    outcome(
        err <= 0.01 && nothing,
        format!(
            "stacked scene: {} m from the top-face centroid (<= 0.01); floor only: {}",
            if err.is_finite() {
                format!("{err:.4}")
            } else {
                format!("{:?}", picked.err())
            },
            match floor_err {
                Err(Error::NothingToGrasp) => "nothing-to-grasp".to_string(),
                other => format!("{other:?}"),
            }
        ),
    )
}

// 11. Determinism ---------------------------------------------------------

fn run(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_moransac"))
        .current_dir(dir)
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn files_of(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = "synth.object_count = 3\nsynth.scenes = 3\nsynth.frames = true\n\
                  train.epochs = 2\ntrain.points = 1024\ntrain.learning_rate = 0.1\n";
    let mut runs = Vec::new();
    let mut all_ok = true;
    for r in 0..2 {
        let dir = root.path().join(format!("run{r}"));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("run.conf"), config).unwrap();
        let steps: [&[&str]; 8] = [
            &["--config", "run.conf", "--seed", "7", "--out", "data", "synth"],
            &["--config", "run.conf", "--seed", "7", "--out", "model", "train", "data"],
            &[
                "--config",
                "run.conf",
                "--seed",
                "7",
                "--model",
                "model/model.morn",
                "--out",
                "seg",
                "segment",
                "data/scene_0000",
            ],
            &[
                "--config",
                "run.conf",
                "--seed",
                "7",
                "--no-net",
                "--out",
                "ablation",
                "segment",
                "data/scene_0001/frame",
            ],
            &[
                "--config",
                "run.conf",
                "--seed",
                "7",
                "--out",
                "base",
                "baseline",
                "data/scene_0000",
            ],
            &[
                "--config",
                "run.conf",
                "--voxel",
                "0.005,0.01",
                "--out",
                "eval",
                "eval",
                "seg",
                "data/scene_0000",
            ],
            &[
                "--config",
                "run.conf",
                "--seed",
                "7",
                "--model",
                "model/model.morn",
                "--out",
                "grasp",
                "grasp",
                "data/scene_0002",
            ],
            &[
                "--config",
                "run.conf",
                "--seed",
                "7",
                "--model",
                "model/model.morn",
                "--out",
                "model",
                "train",
                "data",
            ],
        ];
        for args in steps {
            all_ok &= run(&dir, args);
        }
        std::fs::remove_file(dir.join("run.conf")).unwrap();
        runs.push(files_of(&dir));
    }
    let identical = runs[0] == runs[1];
    let labels = runs[0]
        .keys()
        .filter(|k| k.ends_with("labels.txt") || k.ends_with("gt_labels"))
        .count();
    outcome(
        all_ok && identical && labels >= 5,
        format!(
            "commands succeeded: {all_ok}; {} output files, {labels} label files, byte-identical across two runs: {identical}",
            runs[0].len()
        ),
    )
}

type Criterion = Box<dyn FnOnce(&mut Vec<VotingNet>) -> Outcome>;

fn main() {
    // `cargo test -- --list` and filters probe test binaries; stay quiet then.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut trained = Vec::new();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("RANSAC plane recovery", Box::new(|_| ransac_recovery())),
        (
            "sequential baseline on a box scene",
            Box::new(|_| sequential_baseline()),
        ),
        ("assignment equals brute force", Box::new(|_| assignment_oracle())),
        ("contrastive loss values", Box::new(|_| loss_cases())),
        (
            "analytic vs finite-difference gradients",
            Box::new(|_| gradient_check()),
        ),
        ("training effect", Box::new(training_effect)),
        ("merge process", Box::new(|_| merge_checks())),
        ("partition metrics", Box::new(|_| metric_checks())),
        (
            "end-to-end segmentation",
            Box::new(|nets: &mut Vec<VotingNet>| match nets.first() {
                Some(net) => end_to_end(net),
                None => outcome(false, "no trained network"),
            }),
        ),
        (
            "grasp rule",
            Box::new(|nets: &mut Vec<VotingNet>| match nets.first() {
                Some(net) => grasp_checks(net),
                None => outcome(false, "no trained network"),
            }),
        ),
        ("determinism of every command", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let o = check(&mut trained);
        failed += !o.pass as usize;
        println!(
            "criterion {:>2} {}: {} ({:.1} s) {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
