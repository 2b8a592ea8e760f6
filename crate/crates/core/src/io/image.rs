//! 16-bit depth and 8-bit RGB images in portable formats.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Raw depth units indexed `[v, u]`.
pub fn read_depth(path: &Path) -> Result<Array2<u16>> {
    let img = open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    Array2::from_shape_vec((h as usize, w as usize), img.into_raw())
        .map_err(|e| Error::format("depth image", e.to_string()))
}

/// RGB indexed `[v, u, channel]`.
pub fn read_rgb(path: &Path) -> Result<Array3<u8>> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Array3::from_shape_vec((h as usize, w as usize, 3), img.into_raw())
        .map_err(|e| Error::format("rgb image", e.to_string()))
}

/// Per-pixel integer labels stored as 16-bit grayscale; 0 means unlabeled
/// and `k > 0` maps to label `k - 1`.
pub fn read_label_image(path: &Path) -> Result<Array2<i64>> {
    Ok(read_depth(path)?.mapv(|v| v as i64 - 1))
}

fn save<P: image::Pixel<Subpixel = S> + image::PixelWithColorType, S: image::Primitive>(
    path: &Path,
    img: ImageBuffer<P, Vec<S>>,
) -> Result<()>
where
    [S]: image::EncodableLayout,
{
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_depth(path: &Path, depth: &Array2<u16>) -> Result<()> {
    let (h, w) = depth.dim();
    let buf =
        ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(w as u32, h as u32, |u, v| Luma([depth[[v as usize, u as usize]]]));
    save(path, buf)
}

pub fn write_rgb(path: &Path, rgb: &Array3<u8>) -> Result<()> {
    let (h, w, _) = rgb.dim();
    let buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::from_fn(w as u32, h as u32, |u, v| {
        let (u, v) = (u as usize, v as usize);
        Rgb([rgb[[v, u, 0]], rgb[[v, u, 1]], rgb[[v, u, 2]]])
    });
    save(path, buf)
}

pub fn write_label_image(path: &Path, labels: &Array2<i64>) -> Result<()> {
    write_depth(path, &labels.mapv(|l| (l + 1).clamp(0, u16::MAX as i64) as u16))
}
