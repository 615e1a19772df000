//! Binary PPM (P6) and PGM (P5).

use std::io::{Read, Write};
use std::path::Path;

use super::{create, format_err, io_err, open, to_u8};
use crate::error::Result;
use crate::image::Image;

pub fn read_ppm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(io_err(path))?;

    // Header: magic, width, height, maxval, separated by whitespace and
    // comments, then exactly one whitespace byte before the samples.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;

    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(format_err(path, format!("unsupported magic '{m}'"))),
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad header field '{s}'")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if !(1..=65535).contains(&maxval) {
        return Err(format_err(path, format!("bad maxval {maxval}")));
    }
    let wide = maxval > 255;
    let n = w * h * channels;
    let need = n * if wide { 2 } else { 1 };
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format_err(path, "truncated samples"))?;
    let data = if wide {
        body.chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / maxval as f64)
            .collect()
    } else {
        body.iter().map(|b| *b as f64 / maxval as f64).collect()
    };
    Image::new(w, h, channels, data).map_err(|e| format_err(path, e.to_string()))
}

/// Writes P6 for RGB and P5 for gray, 8 bits per sample.
pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(format_err(
                path,
                format!("PPM export needs 1 or 3 channels, not {c}"),
            ))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| to_u8(*v)));
    let mut w = create(path)?;
    w.write_all(&out).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
