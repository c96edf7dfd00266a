//! File formats: NFVG voxel grids, ASCII PLY point clouds, binary PPM
//! images and JSON documents.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::math::{Aabb, Rgb, Vec3};
use crate::octree::SurfaceSample;

fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(with_path(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(with_path(path))
}

pub const NFVG_MAGIC: [u8; 4] = *b"NFVG";
pub const NFVG_VERSION: u32 = 1;
const NFVG_HEADER_LEN: usize = 4 + 4 + 4 * 4 + 6 * 8;

/// Serializes a grid; values are stored as little-endian f32.
pub fn encode_nfvg(g: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(NFVG_HEADER_LEN + 4 * g.data().len());
    out.extend_from_slice(&NFVG_MAGIC);
    out.extend_from_slice(&NFVG_VERSION.to_le_bytes());
    for d in g.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(g.channels() as u32).to_le_bytes());
    let b = g.bounds();
    for v in b.min.to_array().into_iter().chain(b.max.to_array()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in g.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_nfvg(bytes: &[u8]) -> Result<VoxelGrid> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile { expected: NFVG_HEADER_LEN, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
    if magic != NFVG_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("length checked"));
    let version = u32_at(4);
    if version != NFVG_VERSION {
        return Err(Error::BadVersion(version));
    }
    if bytes.len() < NFVG_HEADER_LEN {
        return Err(Error::TruncatedFile { expected: NFVG_HEADER_LEN, found: bytes.len() });
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let channels = u32_at(20) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("length checked"));
    let b: Vec<f64> = (0..6).map(|i| f64_at(24 + 8 * i)).collect();
    let bounds = Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5]));
    let n = dims
        .iter()
        .try_fold(channels, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parse("NFVG dims overflow".into()))?;
    let expected = n
        .checked_mul(4)
        .and_then(|p| p.checked_add(NFVG_HEADER_LEN))
        .ok_or_else(|| Error::Parse("NFVG dims overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::Parse(format!("{} trailing bytes after NFVG payload", bytes.len() - expected)));
    }
    let data = bytes[NFVG_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
        .collect();
    VoxelGrid::from_data(dims, channels, bounds, data)
}

pub fn write_nfvg(path: &Path, g: &VoxelGrid) -> Result<()> {
    write_bytes(path, &encode_nfvg(g))
}

pub fn read_nfvg(path: &Path) -> Result<VoxelGrid> {
    decode_nfvg(&read_bytes(path)?)
}

/// Points with normals as stored in a PLY file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl From<&[SurfaceSample]> for PointCloud {
    fn from(s: &[SurfaceSample]) -> Self {
        Self { positions: s.iter().map(|p| p.position).collect(), normals: s.iter().map(|p| p.normal).collect() }
    }
}

/// ASCII PLY with `float` x y z nx ny nz per vertex. Values are rounded to
/// f32 and printed in shortest round-trip form.
pub fn encode_ply(cloud: &PointCloud) -> Result<String> {
    if cloud.positions.len() != cloud.normals.len() {
        return Err(Error::LengthMismatch(format!(
            "{} positions, {} normals",
            cloud.positions.len(),
            cloud.normals.len()
        )));
    }
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    s.push_str(&format!("element vertex {}\n", cloud.positions.len()));
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        s.push_str(&format!("property float {p}\n"));
    }
    s.push_str("end_header\n");
    for (p, n) in cloud.positions.iter().zip(&cloud.normals) {
        let v = [p.x, p.y, p.z, n.x, n.y, n.z].map(|c| (c as f32).to_string());
        s.push_str(&v.join(" "));
        s.push('\n');
    }
    Ok(s)
}

pub fn decode_ply(text: &str) -> Result<PointCloud> {
    let bad = |m: &str| Error::Parse(format!("PLY: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing 'ply' magic line"));
    }
    if lines.next() != Some("format ascii 1.0") {
        return Err(bad("only 'format ascii 1.0' is supported"));
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["comment", ..] => {}
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?),
            ["element", ..] => return Err(bad("only vertex elements are supported")),
            ["property", "float", name] => props.push(name.to_string()),
            _ => return Err(bad(&format!("unexpected header line '{line}'"))),
        }
    }
    if props != ["x", "y", "z", "nx", "ny", "nz"] {
        return Err(bad("expected float properties x y z nx ny nz"));
    }
    let count = count.ok_or_else(|| bad("missing vertex element"))?;
    let mut cloud = PointCloud::default();
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| bad("fewer vertices than declared"))?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse::<f32>().map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(&format!("bad vertex line '{line}'")))?;
        if v.len() != 6 {
            return Err(bad(&format!("expected 6 values, got {}", v.len())));
        }
        cloud.positions.push(Vec3::new(v[0], v[1], v[2]));
        cloud.normals.push(Vec3::new(v[3], v[4], v[5]));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("more vertices than declared"));
    }
    Ok(cloud)
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_bytes(path, encode_ply(cloud)?.as_bytes())
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = read_bytes(path)?;
    decode_ply(std::str::from_utf8(&bytes).map_err(|_| Error::Parse("PLY: file is not UTF-8".into()))?)
}

/// Binary 8-bit PPM; components are clamped to `[0, 1]` and rounded.
pub fn encode_ppm(width: u32, height: u32, pixels: &[Rgb]) -> Result<Vec<u8>> {
    if pixels.len() != width as usize * height as usize {
        return Err(Error::LengthMismatch(format!("{} pixels for {width}x{height}", pixels.len())));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for p in pixels {
        for c in p {
            let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
            out.push((c * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn write_ppm(path: &Path, width: u32, height: u32, pixels: &[Rgb]) -> Result<()> {
    write_bytes(path, &encode_ppm(width, height, pixels)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json_string(value)?.as_bytes())
}
