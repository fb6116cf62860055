//! PLY point-cloud subset: `ascii 1.0` and `binary_little_endian 1.0`
//! files holding a `vertex` element with float `x, y, z` properties.
//! Extra scalar properties are skipped; list properties on the vertex
//! element are not supported. Elements declared after `vertex` are ignored
//! when reading points.

use crate::error::{Error, Result};
use crate::Vec3;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy)]
struct Property {
    size: usize,
    kind: ScalarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    F32,
    F64,
    Other,
}

fn scalar_type(name: &str) -> Option<Property> {
    let (size, kind) = match name {
        "char" | "int8" | "uchar" | "uint8" => (1, ScalarKind::Other),
        "short" | "int16" | "ushort" | "uint16" => (2, ScalarKind::Other),
        "int" | "int32" | "uint" | "uint32" => (4, ScalarKind::Other),
        "float" | "float32" => (4, ScalarKind::F32),
        "double" | "float64" => (8, ScalarKind::F64),
        _ => return None,
    };
    Some(Property { size, kind })
}

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    /// Scalar properties of the vertex element, in declaration order.
    properties: Vec<(String, Property)>,
    /// Byte offset where the body starts.
    body_offset: usize,
    /// 1-based line number after `end_header`.
    end_line: usize,
}

fn read_header_line(data: &[u8], pos: &mut usize, line_no: &mut usize) -> Result<String> {
    if *pos >= data.len() {
        return Err(Error::parse(*line_no + 1, "unexpected end of PLY header"));
    }
    let start = *pos;
    while *pos < data.len() && data[*pos] != b'\n' {
        *pos += 1;
    }
    let mut end = *pos;
    if end > start && data[end - 1] == b'\r' {
        end -= 1;
    }
    *pos += 1; // consume newline
    *line_no += 1;
    String::from_utf8(data[start..end].to_vec())
        .map_err(|_| Error::parse(*line_no, "PLY header is not valid UTF-8"))
}

fn parse_header(data: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut line_no = 0usize;

    let magic = read_header_line(data, &mut pos, &mut line_no)?;
    if magic.trim() != "ply" {
        return Err(Error::parse(1, format!("expected `ply` magic, got `{}`", magic.trim())));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex_element = false;
    let mut past_vertex_element = false;
    loop {
        let line = read_header_line(data, &mut pos, &mut line_no)?;
        let line = line.trim();
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first().copied() {
            Some("comment") | None => continue,
            Some("format") => {
                if fields.len() != 3 || fields[2] != "1.0" {
                    return Err(Error::parse(line_no, format!("unsupported format line `{line}`")));
                }
                format = Some(match fields[1] {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::parse(
                            line_no,
                            format!("unsupported PLY format `{other}`"),
                        ))
                    }
                });
            }
            Some("element") => {
                if fields.len() != 3 {
                    return Err(Error::parse(line_no, format!("malformed element line `{line}`")));
                }
                if fields[1] == "vertex" {
                    if vertex_count.is_some() {
                        return Err(Error::parse(line_no, "duplicate vertex element"));
                    }
                    vertex_count = Some(fields[2].parse::<usize>().map_err(|_| {
                        Error::parse(line_no, format!("bad vertex count `{}`", fields[2]))
                    })?);
                    in_vertex_element = true;
                } else {
                    if vertex_count.is_none() {
                        return Err(Error::parse(
                            line_no,
                            "vertex must be the first element in this PLY subset",
                        ));
                    }
                    in_vertex_element = false;
                    past_vertex_element = true;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue; // properties of trailing elements are ignored
                }
                if fields.len() == 3 {
                    let prop = scalar_type(fields[1]).ok_or_else(|| {
                        Error::parse(line_no, format!("unknown property type `{}`", fields[1]))
                    })?;
                    properties.push((fields[2].to_string(), prop));
                } else if fields.get(1) == Some(&"list") {
                    return Err(Error::parse(
                        line_no,
                        "list properties on the vertex element are not supported",
                    ));
                } else {
                    return Err(Error::parse(line_no, format!("malformed property line `{line}`")));
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::parse(line_no, format!("unknown header keyword `{other}`")))
            }
        }
    }
    let format =
        format.ok_or_else(|| Error::parse(line_no, "missing `format` line in PLY header"))?;
    let vertex_count =
        vertex_count.ok_or_else(|| Error::parse(line_no, "missing `element vertex` in header"))?;
    let _ = past_vertex_element;
    Ok(Header { format, vertex_count, properties, body_offset: pos, end_line: line_no })
}

fn xyz_indices(header: &Header) -> Result<[usize; 3]> {
    let mut idx = [usize::MAX; 3];
    for (i, (name, prop)) in header.properties.iter().enumerate() {
        let slot = match name.as_str() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => continue,
        };
        if prop.kind == ScalarKind::Other {
            return Err(Error::parse(
                header.end_line,
                format!("vertex property `{name}` must be float typed"),
            ));
        }
        idx[slot] = i;
    }
    if idx.contains(&usize::MAX) {
        return Err(Error::parse(header.end_line, "vertex element lacks x, y, z properties"));
    }
    Ok(idx)
}

/// Reads all vertices as points, preserving file order.
pub fn read_ply(path: &Path) -> Result<Vec<Vec3>> {
    let data = std::fs::read(path)?;
    let header = parse_header(&data)?;
    let xyz = xyz_indices(&header)?;
    let mut points = Vec::with_capacity(header.vertex_count);
    match header.format {
        PlyFormat::Ascii => {
            let body = std::str::from_utf8(&data[header.body_offset..])
                .map_err(|_| Error::Format("ascii PLY body is not UTF-8".into()))?;
            let mut lines = body.lines();
            for v in 0..header.vertex_count {
                let line = lines.next().ok_or_else(|| {
                    Error::Format(format!(
                        "vertex count mismatch: header declares {} vertices, body has {v}",
                        header.vertex_count
                    ))
                })?;
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() < header.properties.len() {
                    return Err(Error::Format(format!(
                        "vertex {v} has {} fields, expected {}",
                        fields.len(),
                        header.properties.len()
                    )));
                }
                let mut p = [0.0f64; 3];
                for (slot, &col) in xyz.iter().enumerate() {
                    // Parse at the declared width so ascii and binary files
                    // decode to identical values.
                    p[slot] = match header.properties[col].1.kind {
                        ScalarKind::F32 => fields[col].parse::<f32>().map(f64::from),
                        _ => fields[col].parse::<f64>(),
                    }
                    .map_err(|_| {
                        Error::Format(format!("vertex {v}: bad float `{}`", fields[col]))
                    })?;
                }
                points.push(Vec3::new(p[0], p[1], p[2]));
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|(_, p)| p.size).sum();
            let body = &data[header.body_offset..];
            if body.len() < stride * header.vertex_count {
                return Err(Error::Format(format!(
                    "vertex count mismatch: header declares {} vertices, body holds {}",
                    header.vertex_count,
                    body.len() / stride.max(1)
                )));
            }
            let mut offsets = Vec::with_capacity(header.properties.len());
            let mut acc = 0usize;
            for (_, p) in &header.properties {
                offsets.push(acc);
                acc += p.size;
            }
            for v in 0..header.vertex_count {
                let row = &body[v * stride..(v + 1) * stride];
                let mut p = [0.0f64; 3];
                for (slot, &col) in xyz.iter().enumerate() {
                    let off = offsets[col];
                    p[slot] = match header.properties[col].1.kind {
                        ScalarKind::F32 => {
                            f32::from_le_bytes(row[off..off + 4].try_into().unwrap()) as f64
                        }
                        ScalarKind::F64 => {
                            f64::from_le_bytes(row[off..off + 8].try_into().unwrap())
                        }
                        ScalarKind::Other => unreachable!("checked in xyz_indices"),
                    };
                }
                points.push(Vec3::new(p[0], p[1], p[2]));
            }
        }
    }
    Ok(points)
}

/// Writes points as a minimal float-xyz vertex cloud.
pub fn write_ply(path: &Path, points: &[Vec3], format: PlyFormat) -> Result<()> {
    let mut buf = Vec::with_capacity(128 + points.len() * 16);
    let format_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        buf,
        "ply\nformat {format_name} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )?;
    match format {
        PlyFormat::Ascii => {
            for p in points {
                writeln!(buf, "{} {} {}", p.x as f32, p.y as f32, p.z as f32)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for p in points {
                buf.extend_from_slice(&(p.x as f32).to_le_bytes());
                buf.extend_from_slice(&(p.y as f32).to_le_bytes());
                buf.extend_from_slice(&(p.z as f32).to_le_bytes());
            }
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}
