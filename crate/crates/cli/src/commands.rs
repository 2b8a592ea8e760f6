use std::fmt::Write as _;
use std::path::Path;

use mo_ransac::dpc::{load_model, save_model, train as train_net, VotingNet};
use mo_ransac::grasp::grasp_point;
use mo_ransac::io::{load_ply, save_ply_colored, PlyFormat};
use mo_ransac::merge::trace_csv;
use mo_ransac::metrics::{evaluate_sweep, MetricsReport};
use mo_ransac::pipeline::{
    baseline as run_baseline, colorize_label_image, label_colors, project_labels, segment_traced,
};
use mo_ransac::synth::{default_intrinsics, gen_scene, render_frame, write_frame, write_scene, SceneSpec};
use mo_ransac::{Error, PointCloud, Result, Segmentation};

use crate::config::RunConfig;
use crate::input::{self, Input};
use crate::Common;

pub const LABELS: &str = "labels.txt";
pub const SEGMENTED_PLY: &str = "segmented.ply";
pub const PROJECTION: &str = "projection.png";
pub const METRICS: &str = "metrics.csv";
pub const MERGE_TRACE: &str = "merge_trace.csv";
pub const MODEL: &str = "model.morn";
pub const LOSS: &str = "loss.csv";
pub const GRASP: &str = "grasp.txt";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Label file, colored PLY, frame projection and, with ground truth, metrics.
fn export(config: &RunConfig, out: &Path, input: &Input, seg: &Segmentation) -> Result<()> {
    seg.write(&out.join(LABELS))?;
    let colors: Vec<[u8; 3]> = label_colors(seg)
        .iter()
        .map(|c| c.map(|v| (v * 255.0).round() as u8))
        .collect();
    save_ply_colored(
        &out.join(SEGMENTED_PLY),
        &input.cloud,
        PlyFormat::BinaryLittleEndian,
        Some(&colors),
    )?;
    if let Some(frame) = &input.frame {
        let img = project_labels(seg, &frame.pixels, frame.width, frame.height)?;
        mo_ransac::io::image::write_rgb(&out.join(PROJECTION), &colorize_label_image(&img))?;
    }
    if let Some(gt) = &input.gt {
        let reports = evaluate_sweep(&input.cloud, gt, seg, &config.voxels)?;
        write(&out.join(METRICS), &MetricsReport::to_csv(&reports))?;
        print!("{}", MetricsReport::table(&reports));
    }
    Ok(())
}

fn network(common: &Common) -> Result<Option<VotingNet>> {
    if common.no_net {
        return Ok(None);
    }
    match &common.model {
        Some(path) => load_model(path).map(Some),
        None => Err(Error::Input(
            "a model file is required (--model), or pass --no-net".into(),
        )),
    }
}

pub fn segment(config: &RunConfig, common: &Common, path: &Path) -> Result<()> {
    let net = network(common)?;
    let input = input::load(path)?;
    let mut trace = Vec::new();
    let out = segment_traced(net.as_ref(), &input.cloud, &config.pipeline(), Some(&mut trace))?;
    println!(
        "{} points, {} subplane clusters, {} planes after merging",
        input.cloud.len(),
        out.subplanes,
        out.segmentation.cluster_count()
    );
    write(&common.out.join(MERGE_TRACE), &trace_csv(&trace))?;
    export(config, &common.out, &input, &out.segmentation)
}

pub fn baseline(config: &RunConfig, common: &Common, path: &Path) -> Result<()> {
    let input = input::load(path)?;
    let seg = run_baseline(
        &input.cloud,
        &config.baseline_ransac(input.cloud.len()),
        config.max_planes,
    )?;
    println!("{} points, {} planes", input.cloud.len(), seg.cluster_count());
    export(config, &common.out, &input, &seg)
}

/// Highest epoch and step count recorded in an existing loss log.
fn previous_progress(path: &Path) -> Result<Option<(usize, usize)>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut last = None;
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let mut fields = line.split(',');
        let mut next = || -> Result<usize> {
            fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::Format {
                    what: "loss log",
                    msg: format!("bad row `{line}`"),
                })
        };
        last = Some((next()?, next()?));
    }
    Ok(last)
}

pub fn train(config: &RunConfig, common: &Common, dataset: &Path) -> Result<()> {
    let paths = input::dataset(dataset)?;
    let clouds: Vec<PointCloud> = paths
        .iter()
        .map(|p| input::load(p).map(|i| i.cloud))
        .collect::<Result<_>>()?;
    let loss_path = common.out.join(LOSS);
    let mut train_config = config.train.clone();
    let (net, offset) = match &common.model {
        Some(model) if model.is_file() => {
            let net = load_model(model)?;
            let progress = previous_progress(&loss_path)?;
            if let Some((epoch, _)) = progress {
                train_config.start_epoch = epoch + 1;
            }
            (net, progress.map_or(0, |(_, step)| step + 1))
        }
        Some(model) => {
            return Err(Error::Input(format!("{}: model file not found", model.display())));
        }
        None => (VotingNet::new(&config.net)?, 0),
    };
    let (net, report) = train_net(net, &clouds, &train_config)?;
    let mut log = if offset > 0 {
        std::fs::read_to_string(&loss_path).map_err(|e| Error::Io {
            path: loss_path.clone(),
            source: e,
        })?
    } else {
        format!("{}\n", mo_ransac::dpc::TrainReport::CSV_HEADER)
    };
    for r in &report.log {
        let _ = writeln!(log, "{},{},{},{}", r.epoch, r.step + offset, r.k, r.loss);
    }
    write(&loss_path, &log)?;
    save_model(&common.out.join(MODEL), &net)?;
    for (epoch, mean) in report.epoch_means() {
        println!("epoch {epoch}: mean loss {mean:.6}");
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Segmentation> {
    if path.is_dir() {
        Segmentation::read(&path.join(LABELS))
    } else {
        Segmentation::read(path)
    }
}

pub fn eval(config: &RunConfig, common: &Common, pred: &Path, gt: &Path, cloud: Option<&Path>) -> Result<()> {
    let pred = read_labels(pred)?;
    let (cloud, gt) = if gt.is_dir() {
        let input = input::load(gt)?;
        let gt = input
            .gt
            .ok_or_else(|| Error::Input(format!("{}: no ground-truth labels", gt.display())))?;
        let cloud = match cloud {
            Some(p) => load_ply(p)?,
            None => input.cloud,
        };
        (cloud, gt)
    } else {
        let cloud = cloud.ok_or_else(|| Error::Input("a bare gt label file needs --cloud".into()))?;
        (load_ply(cloud)?, Segmentation::read(gt)?)
    };
    if pred.len() != cloud.len() || gt.len() != cloud.len() {
        return Err(Error::Dimension(format!(
            "{} predicted labels, {} gt labels, {} points",
            pred.len(),
            gt.len(),
            cloud.len()
        )));
    }
    let reports = evaluate_sweep(&cloud, &gt, &pred, &config.voxels)?;
    write(&common.out.join(METRICS), &MetricsReport::to_csv(&reports))?;
    print!("{}", MetricsReport::table(&reports));
    Ok(())
}

fn synth_one(config: &RunConfig, dir: &Path, spec: &SceneSpec) -> Result<()> {
    let scene = gen_scene(spec)?;
    write_scene(dir, spec, &scene)?;
    if config.render_frames {
        let intr = default_intrinsics();
        let frame = render_frame(&scene.cloud, &scene.gt, &intr, 640, 480);
        write_frame(&dir.join("frame"), &frame, &intr)?;
    }
    println!(
        "{}: {} points, {} planes",
        dir.display(),
        scene.cloud.len(),
        scene.gt.cluster_count()
    );
    Ok(())
}

pub fn synth(config: &RunConfig, common: &Common) -> Result<()> {
    if config.scenes == 1 {
        return synth_one(config, &common.out, &config.scene);
    }
    for i in 0..config.scenes {
        let spec = SceneSpec {
            seed: config.seed.wrapping_add(i as u64),
            ..config.scene.clone()
        };
        synth_one(config, &common.out.join(format!("scene_{i:04}")), &spec)?;
    }
    Ok(())
}

pub fn grasp(config: &RunConfig, common: &Common, path: &Path) -> Result<()> {
    let net = network(common)?;
    let input = input::load(path)?;
    let out = segment_traced(net.as_ref(), &input.cloud, &config.pipeline(), None)?;
    out.segmentation.write(&common.out.join(LABELS))?;
    let up = input.up.unwrap_or(config.up);
    let g = grasp_point(
        &out.segmentation,
        &input.cloud,
        &out.clusters,
        &up,
        config.floor_cone_deg,
    )?;
    let text = format!(
        "point = {},{},{}\ncluster = {}\nfloor = {}\nheight = {}\n",
        g.point.x, g.point.y, g.point.z, g.cluster, g.floor, g.height
    );
    write(&common.out.join(GRASP), &text)?;
    print!("{text}");
    Ok(())
}
