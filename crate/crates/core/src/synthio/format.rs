//! On-disk volume and mask format.
//!
//! A file is a text header followed by a raw little-endian payload:
//!
//! ```text
//! CTPVOL 1            (or CTPMSK 1 for masks)
//! dims <w> <h> <d>
//! spacing <sx> <sy> <sz>      (mm per voxel; volumes only)
//! anatomy <name>              (masks only)
//! encoding i16le              (volumes; u8 for masks)
//! end
//! <payload bytes>
//! ```
//!
//! Volume payload: w*h*d signed 16-bit little-endian HU values, x-fastest.
//! Mask payload: w*h*d bytes, each 0 or 1, x-fastest.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Anatomy, AnatomyMask, Volume};

const VOL_MAGIC: &str = "CTPVOL 1";
const MSK_MAGIC: &str = "CTPMSK 1";

pub fn write_volume(volume: &Volume, path: &Path) -> Result<()> {
    let (w, h, d) = volume.dims();
    let (sx, sy, sz) = volume.spacing();
    let mut out = Vec::with_capacity(96 + volume.len() * 2);
    write!(
        out,
        "{VOL_MAGIC}\ndims {w} {h} {d}\nspacing {sx} {sy} {sz}\nencoding i16le\nend\n"
    )
    .expect("write to Vec");
    for v in volume.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_mask(mask: &AnatomyMask, path: &Path) -> Result<()> {
    let (w, h, d) = mask.dims();
    let mut out = Vec::with_capacity(96 + mask.bits().len());
    write!(
        out,
        "{MSK_MAGIC}\ndims {w} {h} {d}\nanatomy {}\nencoding u8\nend\n",
        mask.anatomy().name()
    )
    .expect("write to Vec");
    out.extend_from_slice(mask.bits());
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Header {
    dims: (usize, usize, usize),
    spacing: Option<(f64, f64, f64)>,
    anatomy: Option<String>,
    encoding: String,
    payload_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8], magic: &str) -> Result<Header> {
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    // Header is ASCII lines up to and including "end\n".
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("missing 'end' line".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| bad("non-UTF8 header line".into()))?
            .to_string();
        offset += nl + 1;
        if line == "end" {
            break;
        }
        lines.push(line);
        if lines.len() > 16 {
            return Err(bad("header too long".into()));
        }
    }
    if lines.first().map(String::as_str) != Some(magic) {
        return Err(bad(format!("bad magic, expected '{magic}'")));
    }
    let mut dims = None;
    let mut spacing = None;
    let mut anatomy = None;
    let mut encoding = None;
    for line in &lines[1..] {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("dims") => {
                let vals: Vec<usize> = parts
                    .map(|p| p.parse().map_err(|_| bad(format!("bad dims line '{line}'"))))
                    .collect::<Result<_>>()?;
                if vals.len() != 3 {
                    return Err(bad(format!("dims needs 3 values: '{line}'")));
                }
                dims = Some((vals[0], vals[1], vals[2]));
            }
            Some("spacing") => {
                let vals: Vec<f64> = parts
                    .map(|p| {
                        p.parse()
                            .map_err(|_| bad(format!("bad spacing line '{line}'")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != 3 {
                    return Err(bad(format!("spacing needs 3 values: '{line}'")));
                }
                spacing = Some((vals[0], vals[1], vals[2]));
            }
            Some("anatomy") => {
                anatomy = Some(
                    parts
                        .next()
                        .ok_or_else(|| bad("empty anatomy line".into()))?
                        .to_string(),
                );
            }
            Some("encoding") => {
                encoding = Some(
                    parts
                        .next()
                        .ok_or_else(|| bad("empty encoding line".into()))?
                        .to_string(),
                );
            }
            _ => return Err(bad(format!("unknown header line '{line}'"))),
        }
    }
    Ok(Header {
        dims: dims.ok_or_else(|| bad("missing dims".into()))?,
        spacing,
        anatomy,
        encoding: encoding.ok_or_else(|| bad("missing encoding".into()))?,
        payload_offset: offset,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(buf)
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let bytes = read_bytes(path)?;
    let header = parse_header(path, &bytes, VOL_MAGIC)?;
    if header.encoding != "i16le" {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("unsupported volume encoding '{}'", header.encoding),
        });
    }
    let spacing = header.spacing.ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: "missing spacing".into(),
    })?;
    let (w, h, d) = header.dims;
    let expected = w * h * d * 2;
    let payload = &bytes[header.payload_offset..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::PayloadMismatch {
            path: path.to_path_buf(),
            expected,
            got: payload.len(),
        });
    }
    let data: Vec<i16> = payload
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(header.dims, spacing, data)
}

pub fn read_mask(path: &Path) -> Result<AnatomyMask> {
    let bytes = read_bytes(path)?;
    let header = parse_header(path, &bytes, MSK_MAGIC)?;
    if header.encoding != "u8" {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("unsupported mask encoding '{}'", header.encoding),
        });
    }
    let name = header.anatomy.ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: "missing anatomy".into(),
    })?;
    let anatomy = Anatomy::from_name(&name).ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: format!("unknown anatomy '{name}'"),
    })?;
    let (w, h, d) = header.dims;
    let expected = w * h * d;
    let payload = &bytes[header.payload_offset..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::PayloadMismatch {
            path: path.to_path_buf(),
            expected,
            got: payload.len(),
        });
    }
    AnatomyMask::new(anatomy, header.dims, payload.to_vec())
}
