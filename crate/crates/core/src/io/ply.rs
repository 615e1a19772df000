//! ASCII PLY vertex lists with optional normals. Other elements (faces and
//! so on) are skipped on read.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{create, format_err, io_err, open};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

struct Element {
    name: String,
    count: usize,
    props: Vec<String>,
}

pub fn read_ply(path: &Path) -> Result<PlyCloud> {
    let mut lines = open(path)?.lines();
    let mut next = || -> Result<Option<String>> { lines.next().transpose().map_err(io_err(path)) };
    if next()?.as_deref().map(str::trim) != Some("ply") {
        return Err(format_err(path, "missing 'ply' magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next()?.ok_or_else(|| format_err(path, "header has no end_header"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", f, ..] => {
                return Err(format_err(
                    path,
                    format!("only ASCII PLY is supported, got {f}"),
                ))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| format_err(path, format!("bad count in '{line}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", ..] => match elements.last_mut() {
                Some(e) => e.props.push(String::from("<list>")),
                None => return Err(format_err(path, "property before element")),
            },
            ["property", _, name] => match elements.last_mut() {
                Some(e) => e.props.push(name.to_string()),
                None => return Err(format_err(path, "property before element")),
            },
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(format_err(path, format!("unexpected header line '{line}'"))),
        }
    }

    let mut cloud = PlyCloud::default();
    for e in &elements {
        if e.name != "vertex" {
            for _ in 0..e.count {
                next()?.ok_or_else(|| format_err(path, "truncated body"))?;
            }
            continue;
        }
        let col = |n: &str| e.props.iter().position(|p| p == n);
        let xyz = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => return Err(format_err(path, "vertex element lacks x/y/z")),
        };
        let nrm = match (col("nx"), col("ny"), col("nz")) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            _ => None,
        };
        if e.props.iter().any(|p| p == "<list>") {
            return Err(format_err(
                path,
                "list properties on vertices are not supported",
            ));
        }
        let mut normals = Vec::new();
        for _ in 0..e.count {
            let line = next()?.ok_or_else(|| format_err(path, "truncated vertex list"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| format_err(path, format!("bad vertex line '{line}'")))?;
            if vals.len() != e.props.len() {
                return Err(format_err(
                    path,
                    format!("vertex line '{line}' has {} values", vals.len()),
                ));
            }
            cloud
                .points
                .push(Vector3::new(vals[xyz[0]], vals[xyz[1]], vals[xyz[2]]));
            if let Some(n) = nrm {
                normals.push(Vector3::new(vals[n[0]], vals[n[1]], vals[n[2]]));
            }
        }
        if nrm.is_some() {
            cloud.normals = Some(normals);
        }
    }
    Ok(cloud)
}

/// Coordinates are written in shortest round-trip form, so reading back is exact.
pub fn write_ply(path: &Path, cloud: &PlyCloud) -> Result<()> {
    if let Some(n) = &cloud.normals {
        if n.len() != cloud.points.len() {
            return Err(format_err(path, "normal count differs from point count"));
        }
    }
    let mut out = String::from("ply\nformat ascii 1.0\n");
    out += &format!("element vertex {}\n", cloud.points.len());
    out += "property double x\nproperty double y\nproperty double z\n";
    if cloud.normals.is_some() {
        out += "property double nx\nproperty double ny\nproperty double nz\n";
    }
    out += "end_header\n";
    for (k, p) in cloud.points.iter().enumerate() {
        out += &format!("{} {} {}", p.x, p.y, p.z);
        if let Some(n) = &cloud.normals {
            let n = n[k];
            out += &format!(" {} {} {}", n.x, n.y, n.z);
        }
        out.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(out.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
