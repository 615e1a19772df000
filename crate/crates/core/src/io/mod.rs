//! File formats: PFM and 16-bit PNG depth, 8-bit PNG/PPM images, 1-bit PNG
//! masks, ASCII PLY clouds, KITTI pose text and JSON.
//!
//! Every error names the offending path.

mod json;
mod pfm;
mod ply;
mod png;
mod poses;
mod ppm;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

pub use self::json::{from_json_file, to_json_pretty, write_json};
pub use self::pfm::{read_pfm, read_pfm_depth, write_pfm, write_pfm_depth, Pfm};
pub use self::ply::{read_ply, write_ply, PlyCloud};
pub use self::png::{
    read_depth_png16, read_image_png, read_mask_png, write_depth_png16, write_image_png,
    write_mask_png, PNG16_SCALE,
};
pub use self::poses::{read_kitti_poses, write_kitti_poses};
pub use self::ppm::{read_ppm, write_ppm};

use crate::camera::DepthMap;
use crate::image::Image;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads a depth map, choosing PFM or 16-bit PNG by extension.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    match extension(path).as_str() {
        "pfm" => read_pfm_depth(path),
        "png" => read_depth_png16(path),
        other => Err(format_err(
            path,
            format!("unsupported depth extension '{other}'"),
        )),
    }
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    match extension(path).as_str() {
        "pfm" => write_pfm_depth(path, depth, 1.0),
        "png" => write_depth_png16(path, depth),
        other => Err(format_err(
            path,
            format!("unsupported depth extension '{other}'"),
        )),
    }
}

/// Reads an image, choosing PNG or PPM/PGM by extension.
pub fn read_image(path: &Path) -> Result<Image> {
    match extension(path).as_str() {
        "png" => read_image_png(path),
        "ppm" | "pgm" => read_ppm(path),
        other => Err(format_err(
            path,
            format!("unsupported image extension '{other}'"),
        )),
    }
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    match extension(path).as_str() {
        "png" => write_image_png(path, image),
        "ppm" | "pgm" => write_ppm(path, image),
        other => Err(format_err(
            path,
            format!("unsupported image extension '{other}'"),
        )),
    }
}

/// Maps `[0, 1]` to `0..=255`, clamping.
pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
