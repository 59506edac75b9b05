//! A minimal named-tensor container used to persist models and factors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "JRT1" | u32 version | u32 tensor count
//! per tensor: u32 name length | name (UTF-8) | u8 dtype | u32 ndim | u64 dims[ndim] | data
//! ```
//!
//! dtype 0 = f32, 1 = f64, 2 = u32; data is row-major.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MAGIC: &[u8; 4] = b"JRT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U32(Vec<u32>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U32(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Tensor {
            shape,
            data: TensorData::F64(data),
        }
    }

    pub fn u32(data: Vec<u32>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data: TensorData::U32(data),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::f64(vec![1], vec![v])
    }

    pub fn vector(v: &[f64]) -> Self {
        Tensor::f64(vec![v.len()], v.to_vec())
    }

    pub fn matrix(m: &DenseMatrix) -> Self {
        Tensor::f64(vec![m.rows(), m.cols()], m.as_slice().to_vec())
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Ok(v),
            _ => Err(Error::Format("expected an f64 tensor".into())),
        }
    }

    pub fn as_u32(&self) -> Result<&[u32]> {
        match &self.data {
            TensorData::U32(v) => Ok(v),
            _ => Err(Error::Format("expected a u32 tensor".into())),
        }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        match self.shape[..] {
            [r, c] => DenseMatrix::from_vec(r, c, self.as_f64()?.to_vec()),
            _ => Err(Error::Format(format!("expected a 2-D tensor, shape {:?}", self.shape))),
        }
    }
}

/// Ordered collection of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorFile {
    pub tensors: Vec<(String, Tensor)>,
}

impl TensorFile {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            let dtype: u8 = match t.data {
                TensorData::F32(_) => 0,
                TensorData::F64(_) => 1,
                TensorData::U32(_) => 2,
            };
            w.write_all(&[dtype])?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            match &t.data {
                TensorData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
                TensorData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
                TensorData::U32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()))?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        let mut out = TensorFile::default();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name not UTF-8".into()))?;
            let mut dtype = [0u8; 1];
            r.read_exact(&mut dtype)?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let data = match dtype[0] {
                0 => TensorData::F32((0..n).map(|_| read_u32(&mut r).map(f32::from_bits)).collect::<Result<_>>()?),
                1 => TensorData::F64(
                    (0..n)
                        .map(|_| {
                            let mut b = [0u8; 8];
                            r.read_exact(&mut b)?;
                            Ok(f64::from_le_bytes(b))
                        })
                        .collect::<Result<_>>()?,
                ),
                2 => TensorData::U32((0..n).map(|_| read_u32(&mut r)).collect::<Result<_>>()?),
                d => return Err(Error::Format(format!("unknown dtype {d}"))),
            };
            debug_assert_eq!(data.len(), n);
            out.push(name, Tensor { shape, data });
        }
        Ok(out)
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
