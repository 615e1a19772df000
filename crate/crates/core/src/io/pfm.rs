//! Portable float map. Rows are stored bottom to top; a negative scale
//! means little-endian samples. Depth maps are written with invalid pixels
//! as 0, and non-positive or non-finite samples read back as invalid.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use super::{create, format_err, io_err, open};
use crate::camera::DepthMap;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Magnitude of the header scale field.
    pub scale: f64,
    /// Top row first, channels interleaved.
    pub data: Vec<f32>,
}

fn header_line(r: &mut impl BufRead, path: &Path) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err(path))?;
    if line.is_empty() {
        return Err(format_err(path, "truncated header"));
    }
    Ok(line.trim().to_string())
}

pub fn read_pfm(path: &Path) -> Result<Pfm> {
    let mut r = open(path)?;
    let channels = match header_line(&mut r, path)?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(format_err(path, format!("bad magic '{m}'"))),
    };
    let dims = header_line(&mut r, path)?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (width, height) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
        _ => return Err(format_err(path, format!("bad dimensions '{dims}'"))),
    };
    let scale_line = header_line(&mut r, path)?;
    let scale: f64 = scale_line
        .parse()
        .ok()
        .filter(|s: &f64| *s != 0.0 && s.is_finite())
        .ok_or_else(|| format_err(path, format!("bad scale '{scale_line}'")))?;
    let little = scale < 0.0;

    let n = width * height * channels;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| format_err(path, format!("expected {n} samples")))?;
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let row = width * channels;
    let data = samples.chunks_exact(row).rev().flatten().copied().collect();
    Ok(Pfm {
        width,
        height,
        channels,
        scale: scale.abs(),
        data,
    })
}

pub fn write_pfm(path: &Path, pfm: &Pfm) -> Result<()> {
    let magic = match pfm.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(format_err(
                path,
                format!("PFM holds 1 or 3 channels, not {c}"),
            ))
        }
    };
    let mut w = create(path)?;
    let scale = -pfm.scale.abs();
    let mut out = format!("{magic}\n{} {}\n{scale}\n", pfm.width, pfm.height).into_bytes();
    let row = pfm.width * pfm.channels;
    for r in pfm.data.chunks_exact(row).rev() {
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&out).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_pfm_depth(path: &Path) -> Result<DepthMap> {
    let pfm = read_pfm(path)?;
    if pfm.channels != 1 {
        return Err(format_err(path, "depth PFM must have one channel"));
    }
    let valid: Vec<bool> = pfm.data.iter().map(|v| v.is_finite() && *v > 0.0).collect();
    let values = pfm
        .data
        .iter()
        .zip(&valid)
        .map(|(v, ok)| if *ok { *v as f64 } else { 0.0 })
        .collect();
    DepthMap::with_validity(pfm.width, pfm.height, values, valid)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Samples are stored as `f32`, so depths round to single precision.
pub fn write_pfm_depth(path: &Path, depth: &DepthMap, scale: f64) -> Result<()> {
    let data = depth
        .values()
        .iter()
        .zip(depth.validity())
        .map(|(v, ok)| if *ok { *v as f32 } else { 0.0 })
        .collect();
    write_pfm(
        path,
        &Pfm {
            width: depth.width(),
            height: depth.height(),
            channels: 1,
            scale,
            data,
        },
    )
}
