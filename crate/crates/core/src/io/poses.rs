//! KITTI odometry pose files: one row-major 3x4 `[R | t]` per line.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{create, format_err, io_err, open};
use crate::error::Result;
use crate::se3::Pose;

pub fn read_kitti_poses(path: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(path, format!("line {}: not a number", n + 1)))?;
        let rows: [f64; 12] = vals.try_into().map_err(|v: Vec<f64>| {
            format_err(
                path,
                format!("line {}: {} values, expected 12", n + 1, v.len()),
            )
        })?;
        poses.push(
            Pose::from_rows(&rows).map_err(|e| format_err(path, format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(poses)
}

pub fn write_kitti_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut out = String::new();
    for p in poses {
        let row: Vec<String> = p.to_rows().iter().map(|v| format!("{v:.16e}")).collect();
        out += &row.join(" ");
        out.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(out.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
