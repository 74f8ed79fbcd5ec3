//! Point cloud files: whitespace-separated `.xyz` and PLY, plus OBJ meshes.
//!
//! `.xyz` holds `x y z` or `x y z nx ny nz` per line; `#` starts a comment.
//! PLY input may be ascii or binary (either endianness) with a `vertex`
//! element carrying `x y z` and optionally `nx ny nz`. Output PLY is ascii
//! unless binary is requested.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::cloud::PointCloud;
use super::surface::TriangleMesh;
use super::vec3::{self, Vec3};
use crate::error::{Error, Result};

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Normals read from files are renormalized when they are close to unit
/// length but off by more than the stored tolerance (single precision).
fn clean_normals(normals: Vec<Vec3>) -> Result<Vec<Vec3>> {
    normals
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            vec3::normalized(n, 1e-12)
                .ok_or_else(|| Error::Format(format!("normal {i} has zero length")))
        })
        .collect()
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut pos = Vec::new();
    let mut nrm = Vec::new();
    let mut width = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Format(format!("line {}: not a number", ln + 1)))?;
        if vals.len() != 3 && vals.len() != 6 {
            return fmt_err(format!("line {}: expected 3 or 6 values, got {}", ln + 1, vals.len()));
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return fmt_err(format!("line {}: inconsistent column count", ln + 1));
        }
        pos.push([vals[0], vals[1], vals[2]]);
        if vals.len() == 6 {
            nrm.push([vals[3], vals[4], vals[5]]);
        }
    }
    let mut cloud = PointCloud::new(pos).map_err(|e| Error::Format(e.to_string()))?;
    if !nrm.is_empty() {
        cloud.set_normals(clean_normals(nrm)?)?;
    }
    Ok(cloud)
}

/// `x y z [nx ny nz]` per line with round-trip precision.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 64);
    for (i, p) in cloud.positions().iter().enumerate() {
        out.push_str(&format!("{:e} {:e} {:e}", p[0], p[1], p[2]));
        if let Some(n) = cloud.normals() {
            out.push_str(&format!(" {:e} {:e} {:e}", n[i][0], n[i][1], n[i][2]));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Clone, Copy, Debug)]
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
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], big: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().expect("sized");
                (if big { <$t>::from_be_bytes(arr) } else { <$t>::from_le_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
    has_list: bool,
}

pub fn read_ply<R: Read>(reader: R) -> Result<PointCloud> {
    let mut r = BufReader::new(reader);
    let mut line = String::new();
    let next_line = |r: &mut BufReader<R>, line: &mut String| -> Result<()> {
        line.clear();
        if r.read_line(line)? == 0 {
            return fmt_err("unexpected end of PLY header");
        }
        Ok(())
    };
    next_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return fmt_err("missing 'ply' magic");
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLe,
                    "binary_big_endian" => PlyFormat::BinaryBe,
                    other => return fmt_err(format!("unknown PLY format {other}")),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Format(format!("bad element count '{count}'")))?,
                props: Vec::new(),
                has_list: false,
            }),
            ["property", "list", ..] => match elements.last_mut() {
                Some(e) => e.has_list = true,
                None => return fmt_err("property before element"),
            },
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::Format(format!("unknown property type {ty}")))?;
                match elements.last_mut() {
                    Some(e) => e.props.push((name.to_string(), ty)),
                    None => return fmt_err("property before element"),
                }
            }
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return fmt_err(format!("unrecognized header line '{}'", line.trim())),
        }
    }
    let format = format.ok_or_else(|| Error::Format("PLY header lacks a format line".into()))?;
    let Some(first) = elements.first() else {
        return fmt_err("PLY has no elements");
    };
    if first.name != "vertex" {
        return fmt_err("the vertex element must come first");
    }
    if first.has_list {
        return fmt_err("list properties on vertices are not supported");
    }
    let col = |name: &str| first.props.iter().position(|(n, _)| n == name);
    let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
        return fmt_err("vertex element lacks x, y, z");
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(first.count);
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            r.read_to_string(&mut body)?;
            let mut tokens = body.split_whitespace();
            for i in 0..first.count {
                let row = (0..first.props.len())
                    .map(|_| {
                        tokens
                            .next()
                            .ok_or_else(|| Error::Format(format!("vertex {i}: truncated")))?
                            .parse::<f64>()
                            .map_err(|_| Error::Format(format!("vertex {i}: not a number")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
        }
        PlyFormat::BinaryLe | PlyFormat::BinaryBe => {
            let big = format == PlyFormat::BinaryBe;
            let stride: usize = first.props.iter().map(|(_, t)| t.size()).sum();
            let mut buf = vec![0u8; stride];
            for _ in 0..first.count {
                r.read_exact(&mut buf)
                    .map_err(|_| Error::Format("truncated binary PLY".into()))?;
                let mut off = 0;
                let row = first
                    .props
                    .iter()
                    .map(|(_, t)| {
                        let v = t.decode(&buf[off..], big);
                        off += t.size();
                        v
                    })
                    .collect();
                rows.push(row);
            }
        }
    }
    let pos = rows.iter().map(|r| [r[ix], r[iy], r[iz]]).collect();
    let mut cloud = PointCloud::new(pos).map_err(|e| Error::Format(e.to_string()))?;
    if let Some([a, b, c]) = normal_cols {
        let n = rows.iter().map(|r| [r[a], r[b], r[c]]).collect();
        cloud.set_normals(clean_normals(n)?)?;
    }
    Ok(cloud)
}

/// Writes `x y z [nx ny nz]` vertices as double-precision PLY.
pub fn write_ply<W: Write>(w: &mut W, cloud: &PointCloud, binary: bool) -> Result<()> {
    let fmt = if binary { "binary_little_endian" } else { "ascii" };
    let mut header = format!("ply\nformat {fmt} 1.0\nelement vertex {}\n", cloud.len());
    for p in ["x", "y", "z"] {
        header.push_str(&format!("property double {p}\n"));
    }
    if cloud.normals().is_some() {
        for p in ["nx", "ny", "nz"] {
            header.push_str(&format!("property double {p}\n"));
        }
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    if binary {
        let mut buf = Vec::with_capacity(cloud.len() * 48);
        for (i, p) in cloud.positions().iter().enumerate() {
            let n = cloud.normals().map(|n| n[i]);
            for v in p.iter().chain(n.iter().flatten()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    } else {
        let mut body = String::with_capacity(cloud.len() * 64);
        for (i, p) in cloud.positions().iter().enumerate() {
            body.push_str(&format!("{:e} {:e} {:e}", p[0], p[1], p[2]));
            if let Some(n) = cloud.normals() {
                body.push_str(&format!(" {:e} {:e} {:e}", n[i][0], n[i][1], n[i][2]));
            }
            body.push('\n');
        }
        w.write_all(body.as_bytes())?;
    }
    Ok(())
}

/// Reads `.xyz`/`.txt` or `.ply` by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "ply" => read_ply(fs::File::open(path)?),
        "xyz" | "txt" | "pts" => parse_xyz(&fs::read_to_string(path)?),
        other => fmt_err(format!("unsupported point cloud extension '{other}'")),
    }
}

/// Writes by extension; PLY output is ascii.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match extension(path).as_str() {
        "ply" => {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            write_ply(&mut f, cloud, false)?;
            f.flush()?;
            Ok(())
        }
        "xyz" | "txt" | "pts" => Ok(fs::write(path, format_xyz(cloud))?),
        other => fmt_err(format!("unsupported point cloud extension '{other}'")),
    }
}

/// Vertices and faces of a Wavefront OBJ file. Polygons are fanned into
/// triangles; texture and normal indices are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Format(format!("line {}: bad vertex", line_no + 1)))?;
                if c.len() != 3 {
                    return fmt_err(format!("line {}: vertex needs three coordinates", line_no + 1));
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|_| Error::Format(format!("line {}: bad face index", line_no + 1)))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return fmt_err(format!("line {}: face index out of range", line_no + 1));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return fmt_err(format!("line {}: face needs three vertices", line_no + 1));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    parse_obj(&fs::read_to_string(path)?)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}
