//! PLY point clouds: `x y z` as float32, optional `red green blue` as uint8
//! and `nx ny nz` as float32. Writes ASCII or binary little-endian; reads
//! ASCII and both binary byte orders with any scalar property types.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `cloud`; `colors`, when given, replaces the cloud's own colors.
pub fn write_ply<W: Write>(
    mut w: W,
    cloud: &PointCloud,
    format: PlyFormat,
    colors: Option<&[[u8; 3]]>,
) -> std::io::Result<()> {
    let owned: Option<Vec<[u8; 3]>> = match colors {
        Some(_) => None,
        None => cloud.colors().map(|cs| cs.iter().map(|c| c.map(to_u8)).collect()),
    };
    let colors = colors.or(owned.as_deref());
    let normals = cloud.normals();

    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property float {axis}")?;
    }
    if colors.is_some() {
        for ch in ["red", "green", "blue"] {
            writeln!(w, "property uchar {ch}")?;
        }
    }
    if normals.is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(w, "property float {axis}")?;
        }
    }
    writeln!(w, "end_header")?;

    for (i, p) in cloud.positions().iter().enumerate() {
        let p32 = [p.x as f32, p.y as f32, p.z as f32];
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", p32[0], p32[1], p32[2])?;
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                if let Some(n) = normals {
                    write!(w, " {} {} {}", n[i].x as f32, n[i].y as f32, n[i].z as f32)?;
                }
                writeln!(w)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in p32 {
                    w.write_f32::<LittleEndian>(v)?;
                }
                if let Some(c) = colors {
                    w.write_all(&c[i])?;
                }
                if let Some(n) = normals {
                    for v in [n[i].x, n[i].y, n[i].z] {
                        w.write_f32::<LittleEndian>(v as f32)?;
                    }
                }
            }
        }
    }
    w.flush()
}

pub fn save_ply(path: &Path, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    save_ply_colored(path, cloud, format, None)
}

pub fn save_ply_colored(path: &Path, cloud: &PointCloud, format: PlyFormat, colors: Option<&[[u8; 3]]>) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::Dimension(format!(
                "{} colors for {} points",
                c.len(),
                cloud.len()
            )));
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(BufWriter::new(file), cloud, format, colors).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn read<R: Read>(self, r: &mut R, enc: Encoding) -> std::io::Result<f64> {
        macro_rules! rd {
            ($m:ident) => {
                match enc {
                    Encoding::Big => r.$m::<BigEndian>()? as f64,
                    _ => r.$m::<LittleEndian>()? as f64,
                }
            };
        }
        Ok(match self {
            Scalar::I8 => r.read_i8()? as f64,
            Scalar::U8 => r.read_u8()? as f64,
            Scalar::I16 => rd!(read_i16),
            Scalar::U16 => rd!(read_u16),
            Scalar::I32 => rd!(read_i32),
            Scalar::U32 => rd!(read_u32),
            Scalar::F32 => rd!(read_f32),
            Scalar::F64 => rd!(read_f64),
        })
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::format("PLY", msg)
}

fn read_header<R: BufRead>(r: &mut R) -> Result<(Encoding, Vec<Element>)> {
    let mut line = String::new();
    let mut next_line = |r: &mut R| -> Result<String> {
        line.clear();
        let n = r.read_line(&mut line).map_err(|e| bad(format!("header: {e}")))?;
        if n == 0 {
            return Err(bad("unexpected end of header"));
        }
        Ok(line.trim().to_string())
    };
    if next_line(r)? != "ply" {
        return Err(bad("missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(bad(format!("unknown format `{other}`"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", ..] => {
                let el = elements.last().ok_or_else(|| bad("property before element"))?;
                if el.name == "vertex" || elements.iter().all(|e| e.name != "vertex") {
                    return Err(bad("list properties before or within vertex data are unsupported"));
                }
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown type `{ty}`")))?;
                el.props.push((name.to_string(), ty));
            }
            _ => return Err(bad(format!("unrecognized header line `{l}`"))),
        }
    }
    Ok((encoding.ok_or_else(|| bad("missing format line"))?, elements))
}

pub fn read_ply<R: BufRead>(mut r: R) -> Result<PointCloud> {
    let (enc, elements) = read_header(&mut r)?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| bad("no vertex element"))?;

    let mut tokens: Vec<String> = Vec::new();
    if enc == Encoding::Ascii {
        let mut text = String::new();
        r.read_to_string(&mut text).map_err(|e| bad(e.to_string()))?;
        tokens = text.split_whitespace().map(str::to_string).collect();
    }
    let mut cursor = 0usize;
    let mut read_value = |r: &mut R, ty: Scalar| -> Result<f64> {
        if enc == Encoding::Ascii {
            let t = tokens.get(cursor).ok_or_else(|| bad("truncated ascii body"))?;
            cursor += 1;
            t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`")))
        } else {
            ty.read(r, enc).map_err(|_| bad("truncated binary body"))
        }
    };

    // skip elements preceding the vertices
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            for &(_, ty) in &el.props {
                read_value(&mut r, ty)?;
            }
        }
    }
    let el = &elements[vertex_pos];
    let find = |n: &str| el.props.iter().position(|(p, _)| p == n);
    let [xi, yi, zi] = ["x", "y", "z"].map(find);
    let (Some(xi), Some(yi), Some(zi)) = (xi, yi, zi) else {
        return Err(bad("vertex element lacks x/y/z"));
    };
    let color_idx = ["red", "green", "blue"].map(find);
    let normal_idx = ["nx", "ny", "nz"].map(find);
    let has_colors = color_idx.iter().all(Option::is_some);
    let has_normals = normal_idx.iter().all(Option::is_some);
    let color_is_int = has_colors && !matches!(el.props[color_idx[0].unwrap()].1, Scalar::F32 | Scalar::F64);

    let mut positions = Vec::with_capacity(el.count);
    let mut colors = Vec::new();
    let mut normals = Vec::new();
    let mut row = vec![0.0; el.props.len()];
    for _ in 0..el.count {
        for (slot, &(_, ty)) in row.iter_mut().zip(&el.props) {
            *slot = read_value(&mut r, ty)?;
        }
        positions.push(Vec3::new(row[xi], row[yi], row[zi]));
        if has_colors {
            let scale = if color_is_int { 255.0 } else { 1.0 };
            colors.push(color_idx.map(|i| row[i.unwrap()] / scale));
        }
        if has_normals {
            let n = Vec3::new(
                row[normal_idx[0].unwrap()],
                row[normal_idx[1].unwrap()],
                row[normal_idx[2].unwrap()],
            );
            normals.push(n.try_normalize(1e-12).ok_or_else(|| bad("zero-length normal"))?);
        }
    }
    let mut cloud = PointCloud::new(positions)?;
    if has_colors {
        cloud = cloud.with_colors(colors)?;
    }
    if has_normals {
        cloud = cloud.with_normals(normals)?;
    }
    Ok(cloud)
}

pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(BufReader::new(file))
}
