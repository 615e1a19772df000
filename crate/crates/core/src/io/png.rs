use std::io::Write;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{create, format_err, open, to_u8};
use crate::camera::DepthMap;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};

/// 16-bit depth PNGs hold `metres * PNG16_SCALE`; 0 marks an invalid pixel.
pub const PNG16_SCALE: f64 = 256.0;

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    bytes: Vec<u8>,
}

fn decode(path: &Path, transforms: Transformations) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(open(path)?);
    decoder.set_transformations(transforms);
    let fmt = |e: png::DecodingError| format_err(path, e.to_string());
    let mut reader = decoder.read_info().map_err(fmt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(path, "image too large"))?;
    let mut bytes = vec![0u8; size];
    let info = reader.next_frame(&mut bytes).map_err(fmt)?;
    bytes.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        bytes,
    })
}

fn encode(
    path: &Path,
    (w, h): (usize, usize),
    color: ColorType,
    depth: BitDepth,
    bytes: &[u8],
) -> Result<()> {
    let mut file = create(path)?;
    let mut enc = png::Encoder::new(&mut file, w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let fmt = |e: png::EncodingError| format_err(path, e.to_string());
    let mut writer = enc.write_header().map_err(fmt)?;
    writer.write_image_data(bytes).map_err(fmt)?;
    writer.finish().map_err(fmt)?;
    file.flush().map_err(super::io_err(path))
}

/// Reads an 8-bit (or lower) PNG as gray or RGB in `[0, 1]`. Alpha is dropped
/// and palettes are expanded.
pub fn read_image_png(path: &Path) -> Result<Image> {
    let d = decode(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let (src, dst) = match d.color {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        ColorType::Indexed => return Err(format_err(path, "unexpanded palette")),
    };
    let data = d
        .bytes
        .chunks_exact(src)
        .flat_map(|px| px[..dst].iter().map(|b| *b as f64 / 255.0))
        .collect();
    Image::new(d.width, d.height, dst, data).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_image_png(path: &Path, image: &Image) -> Result<()> {
    let color = match image.channels() {
        1 => ColorType::Grayscale,
        3 => ColorType::Rgb,
        c => {
            return Err(format_err(
                path,
                format!("PNG export needs 1 or 3 channels, not {c}"),
            ))
        }
    };
    let bytes: Vec<u8> = image.data().iter().map(|v| to_u8(*v)).collect();
    encode(path, image.dims(), color, BitDepth::Eight, &bytes)
}

pub fn read_depth_png16(path: &Path) -> Result<DepthMap> {
    let d = decode(path, Transformations::IDENTITY)?;
    if d.color != ColorType::Grayscale || d.depth != BitDepth::Sixteen {
        return Err(format_err(path, "depth PNG must be 16-bit grayscale"));
    }
    let raw: Vec<u16> = d
        .bytes
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    let valid: Vec<bool> = raw.iter().map(|v| *v > 0).collect();
    let values = raw.iter().map(|v| *v as f64 / PNG16_SCALE).collect();
    DepthMap::with_validity(d.width, d.height, values, valid)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Depths round to the nearest 1/256 m; anything above 255.99 m is rejected.
pub fn write_depth_png16(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut bytes = Vec::with_capacity(depth.values().len() * 2);
    for (v, ok) in depth.values().iter().zip(depth.validity()) {
        let q = if *ok { (v * PNG16_SCALE).round() } else { 0.0 };
        if q > u16::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "depth {v} does not fit a 16-bit PNG at 1/{PNG16_SCALE} m"
            )));
        }
        // A valid depth below half a step would read back as invalid.
        let q = if *ok { q.max(1.0) } else { q } as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    encode(
        path,
        depth.dims(),
        ColorType::Grayscale,
        BitDepth::Sixteen,
        &bytes,
    )
}

/// Any non-zero gray level reads as set.
pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let d = decode(path, Transformations::EXPAND | Transformations::STRIP_16)?;
    let stride = match d.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        _ => return Err(format_err(path, "mask PNG must be grayscale")),
    };
    let data = d.bytes.chunks_exact(stride).map(|px| px[0] != 0).collect();
    Mask::new(d.width, d.height, data).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    let (w, h) = mask.dims();
    let row_bytes = w.div_ceil(8);
    let mut bytes = vec![0u8; row_bytes * h];
    for j in 0..h {
        for i in 0..w {
            if mask.get(i, j) {
                bytes[j * row_bytes + i / 8] |= 0x80 >> (i % 8);
            }
        }
    }
    encode(path, (w, h), ColorType::Grayscale, BitDepth::One, &bytes)
}
