//! Versioned binary model files.
//!
//! Layout, little-endian: `b"MORN"`, `u32` version, `u32` layer count, one
//! `(u32 in, u32 out, u32 activation)` row per layer, `u32` normalization
//! width, then an `f32` blob with every layer's weights (row-major) and
//! bias, the normalization scale and shift, and finally the running mean,
//! running variance, momentum and epsilon.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::net::{Activation, BatchNorm, Linear, VotingNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MORN";
pub const VERSION: u32 = 1;
const MAX_WIDTH: u32 = 1 << 16;

fn model_err(msg: impl Into<String>) -> Error {
    Error::format("model file", msg)
}

pub fn write_model<W: Write>(mut w: W, net: &VotingNet) -> Result<()> {
    let io = |e: std::io::Error| model_err(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_u32::<LE>(VERSION).map_err(io)?;
    w.write_u32::<LE>(net.layers.len() as u32).map_err(io)?;
    for l in &net.layers {
        w.write_u32::<LE>(l.inputs() as u32).map_err(io)?;
        w.write_u32::<LE>(l.outputs() as u32).map_err(io)?;
        w.write_u32::<LE>(l.activation.code()).map_err(io)?;
    }
    w.write_u32::<LE>(net.norm.gamma.len() as u32).map_err(io)?;
    let bn = &net.norm;
    let blob = net
        .flat_params()
        .into_iter()
        .chain(bn.running_mean.iter().copied())
        .chain(bn.running_var.iter().copied());
    for v in blob.chain([bn.momentum, bn.eps]) {
        w.write_f32::<LE>(v as f32).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_model<R: Read>(mut r: R) -> Result<VotingNet> {
    let short = |_: std::io::Error| model_err("truncated");
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != MAGIC {
        return Err(model_err("bad magic bytes"));
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != VERSION {
        return Err(model_err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = r.read_u32::<LE>().map_err(short)?;
    if count > 64 {
        return Err(model_err(format!("implausible layer count {count}")));
    }
    let mut shapes = Vec::new();
    for _ in 0..count {
        let inputs = r.read_u32::<LE>().map_err(short)?;
        let outputs = r.read_u32::<LE>().map_err(short)?;
        let act = r.read_u32::<LE>().map_err(short)?;
        if inputs == 0 || outputs == 0 || inputs > MAX_WIDTH || outputs > MAX_WIDTH {
            return Err(model_err("bad layer shape"));
        }
        let act = Activation::from_code(act).ok_or_else(|| model_err(format!("unknown activation code {act}")))?;
        shapes.push((inputs as usize, outputs as usize, act));
    }
    let dim = r.read_u32::<LE>().map_err(short)? as usize;
    if dim > MAX_WIDTH as usize {
        return Err(model_err("bad normalization width"));
    }
    let mut next = || r.read_f32::<LE>().map(f64::from).map_err(short);
    let mut layers = Vec::new();
    for (inputs, outputs, activation) in shapes {
        let w: Vec<f64> = (0..inputs * outputs).map(|_| next()).collect::<Result<_>>()?;
        let b: Vec<f64> = (0..outputs).map(|_| next()).collect::<Result<_>>()?;
        layers.push(Linear {
            weight: Array2::from_shape_vec((outputs, inputs), w).expect("sized"),
            bias: Array1::from(b),
            activation,
        });
    }
    let mut vec_of =
        |n: usize| -> Result<Array1<f64>> { (0..n).map(|_| next()).collect::<Result<Vec<_>>>().map(Array1::from) };
    let gamma = vec_of(dim)?;
    let beta = vec_of(dim)?;
    let running_mean = vec_of(dim)?;
    let running_var = vec_of(dim)?;
    let tail = vec_of(2)?;
    let norm = BatchNorm {
        gamma,
        beta,
        running_mean,
        running_var,
        momentum: tail[0],
        eps: tail[1],
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| model_err(e.to_string()))? != 0 {
        return Err(model_err("trailing bytes"));
    }
    VotingNet::from_parts(layers, norm).map_err(|e| model_err(e.to_string()))
}

pub fn save_model(path: &Path, net: &VotingNet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(std::io::BufWriter::new(file), net)
}

pub fn load_model(path: &Path) -> Result<VotingNet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(file))
}
