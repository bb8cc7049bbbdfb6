//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! "CTDR"                      magic
//! u16                         version
//! u32 n_enc, n_enc × spec     encoder layer specs
//! spec                        classifier layer spec
//! u8 has_gen [u32 n_gen, n_gen × spec]
//! u32 n_tensors, n_tensors × (u16 name_len, name, u32 rows, u32 cols)
//! f64 × Σ rows·cols           tensor data in ParamSet order (θ then φ)
//! ```
//!
//! A layer spec is `u32 in_dim, u32 out_dim, u8 activation` with activation
//! 0 = none, 1 = relu.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Activation, Architecture, LayerSpec, Model, ParamSet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CTDR";
pub const CHECKPOINT_VERSION: u16 = 1;

fn put_spec(out: &mut Vec<u8>, l: &LayerSpec) {
    out.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
    out.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
    out.push(match l.activation {
        Activation::None => 0,
        Activation::Relu => 1,
    });
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.arch.encoder.len() as u32).to_le_bytes());
    for l in &model.arch.encoder {
        put_spec(&mut out, l);
    }
    put_spec(&mut out, &model.arch.classifier);
    match &model.arch.generator {
        Some(g) => {
            out.push(1);
            out.extend_from_slice(&(g.len() as u32).to_le_bytes());
            for l in g {
                put_spec(&mut out, l);
            }
        }
        None => out.push(0),
    }
    let tensors: Vec<_> = model
        .theta
        .entries()
        .iter()
        .chain(model.phi.iter().flat_map(|p| p.entries()))
        .collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.value.cols() as u32).to_le_bytes());
    }
    for t in &tensors {
        for &x in t.value.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn spec(&mut self) -> Result<LayerSpec> {
        let in_dim = self.u32()?;
        let out_dim = self.u32()?;
        let activation = match self.u8()? {
            0 => Activation::None,
            1 => Activation::Relu,
            other => {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "unknown activation tag {other}"
                )))
            }
        };
        Ok(LayerSpec::new(in_dim, out_dim, activation))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_enc = r.u32()?;
    let encoder = (0..n_enc).map(|_| r.spec()).collect::<Result<Vec<_>>>()?;
    let classifier = r.spec()?;
    let generator = match r.u8()? {
        0 => None,
        _ => {
            let n = r.u32()?;
            Some((0..n).map(|_| r.spec()).collect::<Result<Vec<_>>>()?)
        }
    };
    let arch = Architecture {
        encoder,
        classifier,
        generator,
    };
    arch.validate()
        .map_err(|e| Error::ShapeMismatch(alloc::format!("invalid layer table: {e}")))?;

    let n_tensors = r.u32()?;
    let mut table: Vec<(String, usize, usize)> = Vec::new();
    for _ in 0..n_tensors {
        let len = r.u16()? as usize;
        let name = core::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::ShapeMismatch("tensor name is not UTF-8".into()))?
            .into();
        let rows = r.u32()?;
        let cols = r.u32()?;
        table.push((name, rows, cols));
    }
    let n_theta = 2 * arch.network_layers().len();
    let mut theta = ParamSet::default();
    let mut phi = ParamSet::default();
    for (i, (name, rows, cols)) in table.into_iter().enumerate() {
        let count = rows.checked_mul(cols).ok_or(Error::Truncated)?;
        let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let m = Matrix::from_vec(rows, cols, data).expect("length matches by construction");
        if i < n_theta {
            theta.push(name, m);
        } else {
            phi.push(name, m);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} trailing bytes after tensor data",
            bytes.len() - r.pos
        )));
    }
    let phi = (arch.generator.is_some() || !phi.is_empty()).then_some(phi);
    Model::from_parts(arch, theta, phi)
}
