//! File formats: the text scene format, OBJ and PLY meshes, PLY point
//! clouds, PNG and raw float maps, CSV tables and the TOML run config.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Quaternion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{PinholeCamera, Pose};
use crate::evalkit::{EvalConfig, PointCloud};
use crate::fields::{FieldConfig, FieldSample};
use crate::gaussian::{OrientedGaussian, ALPHA_MAX, DEFAULT_SUPPORT_SIGMA};
use crate::math::{Mat3, Vec3};
use crate::mesh::TriangleMesh;
use crate::meshing::{MtetConfig, PamConfig};
use crate::render::{Image, RenderConfig};
use crate::rng::derive_seed;
use crate::scene::GaussianScene;
use crate::wrap::{WrapConfig, WrapReport};

pub const SCENE_MAGIC: &str = "gwrap-scene";
pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}{}: {message}", record.map(|r| format!(", record {r}")).unwrap_or_default())]
    Parse {
        line: usize,
        record: Option<usize>,
        message: String,
    },
    #[error("scene format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("unsupported file: {0}")]
    Unsupported(String),
    #[error("config: {0}")]
    Config(String),
    #[error("image: {0}")]
    Image(String),
}

fn parse_err(line: usize, record: Option<usize>, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        record,
        message: message.into(),
    }
}

/// Seventeen significant digits: every `f64` survives a text round trip.
fn num(out: &mut String, v: f64) {
    let _ = write!(out, " {v:.16e}");
}

pub fn write_scene(scene: &GaussianScene, mut w: impl Write) -> Result<(), IoError> {
    let mut s = String::new();
    let _ = writeln!(s, "{SCENE_MAGIC} {SCENE_VERSION}");
    s.push_str("support_sigma");
    num(&mut s, scene.support_sigma());
    s.push('\n');
    s.push_str("# mean[3] scales[3] rotation_wxyz[4] opacity normal_sign normal_dir[3] color[3]\n");
    let _ = writeln!(s, "gaussians {}", scene.len());
    for g in scene.gaussians() {
        s.push('g');
        let q = g.rotation().quaternion();
        let fields = [
            g.mean.x, g.mean.y, g.mean.z,
            g.scales().x, g.scales().y, g.scales().z,
            q.w, q.i, q.j, q.k,
            g.opacity(), g.normal_sign,
            g.normal_dir.x, g.normal_dir.y, g.normal_dir.z,
            g.color.x, g.color.y, g.color.z,
        ];
        for v in fields {
            num(&mut s, v);
        }
        s.push('\n');
    }
    s.push_str("# fx fy cx cy width height world_from_camera[3x4 row-major]\n");
    let _ = writeln!(s, "cameras {}", scene.cameras.len());
    for c in &scene.cameras {
        s.push('c');
        for v in [c.fx, c.fy, c.cx, c.cy] {
            num(&mut s, v);
        }
        let _ = write!(s, " {} {}", c.width, c.height);
        let (r, t) = (&c.pose.rotation, &c.pose.translation);
        for i in 0..3 {
            for j in 0..3 {
                num(&mut s, r[(i, j)]);
            }
            num(&mut s, t[i]);
        }
        s.push('\n');
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn save_scene(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<(), IoError> {
    let f = BufWriter::new(fs::File::create(path)?);
    write_scene(scene, f)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<GaussianScene, IoError> {
    load_scene_with(path, ALPHA_MAX)
}

/// As [`load_scene`], validating opacities against `alpha_max`.
pub fn load_scene_with(path: impl AsRef<Path>, alpha_max: f64) -> Result<GaussianScene, IoError> {
    read_scene_with(BufReader::new(fs::File::open(path)?), alpha_max)
}

fn floats(tokens: &[&str], line: usize, record: Option<usize>) -> Result<Vec<f64>, IoError> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, record, format!("bad number {t:?}")))
        })
        .collect()
}

pub fn read_scene(r: impl BufRead) -> Result<GaussianScene, IoError> {
    read_scene_with(r, ALPHA_MAX)
}

pub fn read_scene_with(r: impl BufRead, alpha_max: f64) -> Result<GaussianScene, IoError> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|l| match l {
            Ok((_, l)) => !l.trim().is_empty() && !l.trim_start().starts_with('#'),
            Err(_) => true,
        });
    let mut next = || lines.next().transpose();

    let (ln, header) = next()?.ok_or_else(|| parse_err(0, None, "empty file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 || head[0] != SCENE_MAGIC {
        return Err(parse_err(ln, None, "missing scene header"));
    }
    let version: u32 = head[1]
        .parse()
        .map_err(|_| parse_err(ln, None, "bad version"))?;
    if version != SCENE_VERSION {
        return Err(IoError::VersionMismatch {
            found: version,
            expected: SCENE_VERSION,
        });
    }

    let mut support_sigma = DEFAULT_SUPPORT_SIGMA;
    let mut gaussians = Vec::new();
    let mut cameras = Vec::new();
    let mut saw_cameras = false;
    let mut pending: Option<(usize, String)> = next()?;
    while let Some((ln, line)) = pending.take() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "support_sigma" if tok.len() == 2 => {
                support_sigma = floats(&tok[1..], ln, None)?[0];
                if !(support_sigma > 0.0) {
                    return Err(parse_err(ln, None, "support_sigma must be positive"));
                }
            }
            "gaussians" | "cameras" if tok.len() == 2 => {
                let n: usize = tok[1]
                    .parse()
                    .map_err(|_| parse_err(ln, None, "bad record count"))?;
                let is_g = tok[0] == "gaussians";
                saw_cameras |= !is_g;
                for rec in 0..n {
                    let (ln, line) = next()?.ok_or_else(|| {
                        parse_err(ln, Some(rec), format!("expected {n} {} records", tok[0]))
                    })?;
                    let t: Vec<&str> = line.split_whitespace().collect();
                    if is_g {
                        gaussians.push(parse_gaussian(&t, ln, rec, alpha_max)?);
                    } else {
                        cameras.push(parse_camera(&t, ln, rec)?);
                    }
                }
            }
            other => return Err(parse_err(ln, None, format!("unexpected {other:?}"))),
        }
        pending = next()?;
    }
    if !saw_cameras {
        log::warn!("scene file has no camera block; vacancy queries will fail");
    }
    Ok(GaussianScene::with_support_sigma(gaussians, cameras, support_sigma))
}

fn parse_gaussian(t: &[&str], ln: usize, rec: usize, alpha_max: f64) -> Result<OrientedGaussian, IoError> {
    if t.len() != 19 || t[0] != "g" {
        return Err(parse_err(ln, Some(rec), "gaussian record needs `g` and 18 numbers"));
    }
    let v = floats(&t[1..], ln, Some(rec))?;
    let q = Quaternion::new(v[6], v[7], v[8], v[9]);
    if !(q.norm() > 1e-12) {
        return Err(parse_err(ln, Some(rec), "rotation quaternion has zero norm"));
    }
    OrientedGaussian::new(
        Vec3::new(v[0], v[1], v[2]),
        Vec3::new(v[3], v[4], v[5]),
        q,
        v[10],
        v[11],
        Vec3::new(v[12], v[13], v[14]),
        Vec3::new(v[15], v[16], v[17]),
        alpha_max,
    )
    .map_err(|e| parse_err(ln, Some(rec), e.to_string()))
}

fn parse_camera(t: &[&str], ln: usize, rec: usize) -> Result<PinholeCamera, IoError> {
    if t.len() != 19 || t[0] != "c" {
        return Err(parse_err(ln, Some(rec), "camera record needs `c` and 18 values"));
    }
    let intr = floats(&t[1..5], ln, Some(rec))?;
    let dim = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| parse_err(ln, Some(rec), format!("bad image size {s:?}")))
    };
    let (w, h) = (dim(t[5])?, dim(t[6])?);
    let m = floats(&t[7..], ln, Some(rec))?;
    let rotation = Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
    let translation = Vec3::new(m[3], m[7], m[11]);
    let pose = Pose::new(rotation, translation).map_err(|e| parse_err(ln, Some(rec), e.to_string()))?;
    PinholeCamera::new(intr[0], intr[1], intr[2], intr[3], w, h, pose)
        .map_err(|e| parse_err(ln, Some(rec), e.to_string()))
}

// ---- meshes and point clouds ----

pub fn write_obj(mesh: &TriangleMesh, mut w: impl Write) -> Result<(), IoError> {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Triangulated OBJ reader; polygons are fanned, normals and texture
/// coordinates ignored.
pub fn read_obj(r: impl BufRead) -> Result<TriangleMesh, IoError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let t: Vec<&str> = tok.take(3).collect();
                if t.len() != 3 {
                    return Err(parse_err(i + 1, None, "vertex needs 3 coordinates"));
                }
                let v = floats(&t, i + 1, None)?;
                vertices.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let k: i64 = head
                            .parse()
                            .map_err(|_| parse_err(i + 1, None, format!("bad face index {t:?}")))?;
                        let resolved = if k < 0 { vertices.len() as i64 + k } else { k - 1 };
                        if resolved < 0 {
                            return Err(parse_err(i + 1, None, "face index out of range"));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(i + 1, None, "face needs 3 indices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| parse_err(0, None, e.to_string()))
}

fn ply_header(vertices: usize, faces: Option<usize>) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(h, "element vertex {vertices}");
    h.push_str("property double x\nproperty double y\nproperty double z\n");
    if let Some(f) = faces {
        let _ = writeln!(h, "element face {f}");
        h.push_str("property list uchar int vertex_indices\n");
    }
    h.push_str("end_header\n");
    h
}

pub fn write_ply_mesh(mesh: &TriangleMesh, w: impl Write) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    w.write_all(ply_header(mesh.vertices.len(), Some(mesh.faces.len())).as_bytes())?;
    for v in &mesh.vertices {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for f in &mesh.faces {
        w.write_all(&[3u8])?;
        for &i in f {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ply_points(points: &[Vec3], w: impl Write) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    w.write_all(ply_header(points.len(), None).as_bytes())?;
    for p in points {
        for c in p.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8], big: bool) -> f64 {
        macro_rules! get {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if big { <$t>::from_be_bytes(a) } else { <$t>::from_le_bytes(a) }) as f64
            }};
        }
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => get!(i16, 2),
            Self::U16 => get!(u16, 2),
            Self::I32 => get!(i32, 4),
            Self::U32 => get!(u32, 4),
            Self::F32 => get!(f32, 4),
            Self::F64 => get!(f64, 8),
        }
    }
}

enum Prop {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Prop>,
}

/// Reads vertices (x, y, z) and triangulated faces from ASCII or binary
/// PLY. Other properties and elements are skipped.
pub fn read_ply(mut r: impl BufRead) -> Result<TriangleMesh, IoError> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut read_line = |r: &mut dyn BufRead, line: &mut String| -> Result<usize, IoError> {
        line.clear();
        lineno += 1;
        if r.read_line(line)? == 0 {
            return Err(parse_err(lineno, None, "unexpected end of PLY header"));
        }
        Ok(lineno)
    };
    read_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err(1, None, "not a PLY file"));
    }
    let mut format = String::new();
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let ln = read_line(&mut r, &mut line)?;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", f, _] => format = f.to_string(),
            ["element", name, n] => elements.push(Element {
                name: name.to_string(),
                count: n.parse().map_err(|_| parse_err(ln, None, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let (c, i) = Scalar::parse(c)
                    .zip(Scalar::parse(i))
                    .ok_or_else(|| parse_err(ln, None, "bad list type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(ln, None, "property before element"))?
                    .props
                    .push(Prop::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| parse_err(ln, None, "bad property type"))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(ln, None, "property before element"))?
                    .props
                    .push(Prop::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let ascii = match format.as_str() {
        "ascii" => true,
        "binary_little_endian" | "binary_big_endian" => false,
        other => return Err(IoError::Unsupported(format!("PLY format {other:?}"))),
    };
    let big = format == "binary_big_endian";
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let mut cursor = 0usize;
    let mut words = if ascii {
        Some(std::str::from_utf8(&body).map_err(|_| parse_err(0, None, "PLY body is not text"))?.split_whitespace())
    } else {
        None
    };
    let mut value = |ty: Scalar| -> Result<f64, IoError> {
        if let Some(w) = words.as_mut() {
            let s = w.next().ok_or_else(|| parse_err(0, None, "PLY body too short"))?;
            s.parse().map_err(|_| parse_err(0, None, format!("bad PLY value {s:?}")))
        } else {
            let n = ty.size();
            if cursor + n > body.len() {
                return Err(parse_err(0, None, "PLY body too short"));
            }
            let v = ty.read(&body[cursor..], big);
            cursor += n;
            Ok(v)
        }
    };
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for p in &el.props {
                match p {
                    Prop::Scalar(name, ty) => {
                        let v = value(*ty)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Prop::List(name, cty, ity) => {
                        let n = value(*cty)? as usize;
                        let idx: Vec<usize> = (0..n).map(|_| value(*ity).map(|v| v as usize)).collect::<Result<_, _>>()?;
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            for k in 1..n.saturating_sub(1) {
                                faces.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e| parse_err(0, None, e.to_string()))
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads `.obj` or `.ply` by extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, IoError> {
    let path = path.as_ref();
    let r = BufReader::new(fs::File::open(path)?);
    match extension(path).as_str() {
        "obj" => read_obj(r),
        "ply" => read_ply(r),
        e => Err(IoError::Unsupported(format!("mesh extension {e:?}"))),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let w = BufWriter::new(fs::File::create(path)?);
    match extension(path).as_str() {
        "obj" => write_obj(mesh, w),
        "ply" => write_ply_mesh(mesh, w),
        e => Err(IoError::Unsupported(format!("mesh extension {e:?}"))),
    }
}

/// Vertices of a PLY or OBJ file as a point cloud.
pub fn load_points(path: impl AsRef<Path>) -> Result<PointCloud, IoError> {
    Ok(PointCloud::cropped(load_mesh(path)?.vertices, None))
}

pub fn save_points(points: &[Vec3], path: impl AsRef<Path>) -> Result<(), IoError> {
    write_ply_points(points, fs::File::create(path)?)
}

// ---- images ----

const MAP_MAGIC: &[u8; 4] = b"GWMP";

/// Raw float map: `GWMP`, then width, height, channels as little-endian
/// `u32`, then row-major interleaved little-endian `f32` values.
pub fn write_raw_map(img: &Image, w: impl Write) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    w.write_all(MAP_MAGIC)?;
    for d in [img.width, img.height, img.channels] {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in &img.data {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_map(mut r: impl Read) -> Result<Image, IoError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..4] != MAP_MAGIC {
        return Err(parse_err(0, None, "not a raw float map"));
    }
    let dim = |i: usize| u32::from_le_bytes(head[4 * i..4 * i + 4].try_into().unwrap());
    let (width, height, channels) = (dim(1), dim(2), dim(3));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let n = width as usize * height as usize * channels as usize;
    if body.len() != 4 * n {
        return Err(parse_err(0, None, "raw float map has the wrong size"));
    }
    let mut img = Image::new(width, height, channels);
    for (k, c) in body.chunks_exact(4).enumerate() {
        img.data[k] = f32::from_le_bytes(c.try_into().unwrap()) as f64;
    }
    Ok(img)
}

/// 8-bit PNG. One- and three-channel images are written as gray or RGB;
/// values are mapped through `lo..hi` to `0..255`, NaN to 0.
pub fn write_png(img: &Image, lo: f64, hi: f64, path: impl AsRef<Path>) -> Result<(), IoError> {
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| if v.is_nan() { 0 } else { ((v - lo) * scale).round().clamp(0.0, 255.0) as u8 })
        .collect();
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(IoError::Image(format!("{c} channels"))),
    };
    image::save_buffer(path.as_ref(), &bytes, img.width, img.height, color)
        .map_err(|e| IoError::Image(e.to_string()))
}

// ---- CSV ----

pub fn write_wrap_report_csv(report: &WrapReport, mut w: impl Write) -> Result<(), IoError> {
    let mut s = String::from("iteration,loss,clones_added\n");
    let _ = writeln!(s, "0,{},0", report.initial_loss);
    for (i, l) in report.loss_trace.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, l, report.clones_at(i + 1));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_field_samples_csv(points: &[Vec3], samples: &[FieldSample], mut w: impl Write) -> Result<(), IoError> {
    let mut s = String::from("x,y,z,vacancy,occupancy,vx,vy,vz,nx,ny,nz,support_count\n");
    for (p, f) in points.iter().zip(samples) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.x, p.y, p.z, f.vacancy, f.occupancy, f.vector.x, f.vector.y, f.vector.z, f.normal.x, f.normal.y,
            f.normal.z, f.support_count
        );
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Raw float table: per point the 11 `f32` values of the CSV columns
/// before `support_count`.
pub fn write_field_samples_raw(points: &[Vec3], samples: &[FieldSample], w: impl Write) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    for (p, f) in points.iter().zip(samples) {
        let row = [
            p.x, p.y, p.z, f.vacancy, f.occupancy, f.vector.x, f.vector.y, f.vector.z, f.normal.x, f.normal.y,
            f.normal.z,
        ];
        for v in row {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Whitespace or comma separated `x y z` rows; `#` starts a comment.
pub fn read_points_text(r: impl BufRead) -> Result<Vec<Vec3>, IoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        let t: Vec<&str> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if t.is_empty() {
            continue;
        }
        if t.len() != 3 {
            return Err(parse_err(i + 1, Some(out.len()), "expected 3 coordinates"));
        }
        let v = floats(&t, i + 1, Some(out.len()))?;
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

// ---- run configuration ----

/// Every tunable of every stage, with defaults. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; see [`RunConfig::reseeded`].
    pub seed: u64,
    pub alpha_max: f64,
    pub support_sigma: f64,
    pub field: FieldConfig,
    pub render: RenderConfig,
    pub wrap: WrapConfig,
    pub mtet: MtetConfig,
    pub pam: PamConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha_max: ALPHA_MAX,
            support_sigma: DEFAULT_SUPPORT_SIGMA,
            field: FieldConfig::default(),
            render: RenderConfig::default(),
            wrap: WrapConfig::default(),
            mtet: MtetConfig::default(),
            pam: PamConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, IoError> {
        toml::to_string(self).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Replaces every stage seed with an independent stream of `seed`.
    pub fn reseeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.field.seed = derive_seed(seed, 1);
        self.wrap.seed = derive_seed(seed, 2);
        self.mtet.field.seed = self.field.seed;
        self.pam.seed = derive_seed(seed, 3);
        self.pam.mtet.field.seed = self.field.seed;
        self.eval.seed = derive_seed(seed, 4);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{make_fixture, FixtureKind, FixtureParams};
    use crate::mesh::icosphere;

    fn small_scene() -> GaussianScene {
        make_fixture(
            FixtureKind::SphereShell,
            &FixtureParams {
                count: 30,
                cameras: 3,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn scene_round_trip_is_exact() {
        let scene = small_scene();
        let mut buf = Vec::new();
        write_scene(&scene, &mut buf).unwrap();
        let back = read_scene(&buf[..]).unwrap();
        assert_eq!(back.gaussians(), scene.gaussians());
        assert_eq!(back.cameras, scene.cameras);
        let mut again = Vec::new();
        write_scene(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn zero_quaternion_names_record() {
        let scene = small_scene();
        let mut buf = Vec::new();
        write_scene(&scene, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let i = lines.iter().position(|l| l.starts_with("g ")).unwrap() + 2;
        let mut t: Vec<String> = lines[i].split_whitespace().map(str::to_string).collect();
        for v in &mut t[7..11] {
            *v = "0".into();
        }
        lines[i] = t.join(" ");
        match read_scene(lines.join("\n").as_bytes()) {
            Err(IoError::Parse { record: Some(2), message, .. }) => assert!(message.contains("zero norm")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_cameras_and_bad_version() {
        let text = "gwrap-scene 1\ngaussians 0\n";
        assert!(read_scene(text.as_bytes()).unwrap().cameras.is_empty());
        assert!(matches!(
            read_scene("gwrap-scene 7\n".as_bytes()),
            Err(IoError::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn mesh_formats_round_trip() {
        let m = icosphere(Vec3::new(0.1, 0.2, 0.3), 1.5, 1);
        let mut ply = Vec::new();
        write_ply_mesh(&m, &mut ply).unwrap();
        assert_eq!(read_ply(&ply[..]).unwrap(), m);
        let mut obj = Vec::new();
        write_obj(&m, &mut obj).unwrap();
        assert_eq!(read_obj(&obj[..]).unwrap(), m);
    }

    #[test]
    fn ascii_ply_with_quads() {
        let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                    property uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0 9\n1 0 0 9\n1 1 0 9\n0 1 0 9\n4 0 1 2 3\n";
        let m = read_ply(text.as_bytes()).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn raw_map_round_trip() {
        let mut img = Image::new(3, 2, 3);
        for (k, v) in img.data.iter_mut().enumerate() {
            *v = k as f64 * 0.25;
        }
        let mut buf = Vec::new();
        write_raw_map(&img, &mut buf).unwrap();
        assert_eq!(read_raw_map(&buf[..]).unwrap(), img);
    }

    #[test]
    fn config_dump_is_idempotent() {
        let a = RunConfig::default().to_toml().unwrap();
        let b = RunConfig::from_toml(&a).unwrap().to_toml().unwrap();
        assert_eq!(a, b);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[wrap]\nlearning_rat = 0.1").is_err());
        assert_eq!(RunConfig::default().wrap.loss_weight, 0.05);
    }

    #[test]
    fn points_text() {
        let p = read_points_text("# header\n1 2 3\n4,5,6\n\n".as_bytes()).unwrap();
        assert_eq!(p, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }
}
