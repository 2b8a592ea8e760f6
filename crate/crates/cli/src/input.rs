//! Input sources: PLY files, scene archives and RGB-D frame directories.

use std::path::{Path, PathBuf};

use mo_ransac::io::load_ply;
use mo_ransac::synth::{self, LoadedFrame};
use mo_ransac::{Error, PointCloud, Result, Segmentation, Vec3};

pub struct Input {
    pub cloud: PointCloud,
    pub gt: Option<Segmentation>,
    pub up: Option<Vec3>,
    /// Present for frames, for the 2D label projection.
    pub frame: Option<LoadedFrame>,
}

pub fn load(path: &Path) -> Result<Input> {
    if path.is_file() {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
            return Ok(Input {
                cloud: load_ply(path)?,
                gt: None,
                up: None,
                frame: None,
            });
        }
        return Err(Error::Input(format!(
            "{}: expected a .ply file or a directory",
            path.display()
        )));
    }
    if path.join(synth::CLOUD_FILE).is_file() {
        let archive = synth::read_scene(path)?;
        return Ok(Input {
            cloud: archive.cloud,
            gt: archive.gt,
            up: archive.up,
            frame: None,
        });
    }
    if synth::is_frame_dir(path) {
        let frame = synth::read_frame_dir(path)?;
        return Ok(Input {
            cloud: frame.cloud.clone(),
            gt: frame.gt.clone(),
            up: None,
            frame: Some(frame),
        });
    }
    if !path.exists() {
        return Err(Error::Input(format!("{}: no such file or directory", path.display())));
    }
    Err(Error::Input(format!(
        "{}: not a PLY file, scene archive or frame directory",
        path.display()
    )))
}

fn is_input(path: &Path) -> bool {
    (path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")))
        || path.join(synth::CLOUD_FILE).is_file()
        || synth::is_frame_dir(path)
}

/// Every input inside `dir`, sorted by name. `dir` itself counts when it is
/// a single input.
pub fn dataset(dir: &Path) -> Result<Vec<PathBuf>> {
    if is_input(dir) {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_input(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Input(format!("{}: dataset is empty", dir.display())));
    }
    Ok(paths)
}
