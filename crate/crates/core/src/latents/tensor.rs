//! SEQL tensor files.
//!
//! All integers are little-endian.
//!
//! ```text
//! tensor    := "SEQL" version:u16(=1) dtype:u8(=0, binary32) ndim:u8 shape:u32×ndim payload
//! payload   := binary32 × prod(shape), row-major
//! pilot set := section*          section := tag:u8 tensor
//!              tag 1 = X (N×d or N×C×H×W), 2 = Y (N×m or N×C×H×W), 3 = H (N×2, re/im)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Layout, PilotSet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAGIC: [u8; 4] = *b"SEQL";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const MAX_DIMS: usize = 8;

pub const TAG_X: u8 = 1;
pub const TAG_Y: u8 = 2;
pub const TAG_H: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.len() > MAX_DIMS {
            return Err(Error::Format(format!("{} dimensions, at most {MAX_DIMS} supported", shape.len())));
        }
        if shape.iter().any(|&s| s > u32::MAX as usize) {
            return Err(Error::Format("dimension exceeds u32".into()));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!("shape {shape:?} holds {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self { shape: vec![m.rows(), m.cols()], data: m.as_slice().iter().map(|&v| v as f32).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flattens every dimension after the first into columns.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let rows = self.shape.first().copied().unwrap_or(1);
        let cols = self.data.len().checked_div(rows).unwrap_or(0);
        Matrix::new(rows, cols, self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[DTYPE_F32, self.shape.len() as u8])?;
        for &s in &self.shape {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        let got = read_up_to(r, &mut magic)?;
        if got < 4 || magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let mut head = [0u8; 4];
        read_exact(r, &mut head)?;
        let version = u16::from_le_bytes([head[0], head[1]]);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if head[2] != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype code {}", head[2])));
        }
        let ndim = head[3] as usize;
        if ndim > MAX_DIMS {
            return Err(Error::Format(format!("{ndim} dimensions, at most {MAX_DIMS} supported")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 4];
            read_exact(r, &mut b)?;
            shape.push(u32::from_le_bytes(b) as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::Format("shape overflows".into()))?;
        let mut data = Vec::with_capacity(len.min(1 << 24));
        let mut chunk = [0u8; 4];
        for _ in 0..len {
            read_exact(r, &mut chunk)?;
            let v = f32::from_le_bytes(chunk);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue);
            }
            data.push(v);
        }
        Ok(Self { shape, data })
    }
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| if e.kind() == ErrorKind::UnexpectedEof { Error::TruncatedFile } else { e.into() })
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    tensor.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::read_from(&mut BufReader::new(File::open(path)?))
}

fn latent_tensor(m: &Matrix, layout: Option<Layout>) -> Tensor {
    let mut t = Tensor::from_matrix(m);
    if let Some(l) = layout {
        t.shape = vec![m.rows(), l.channels, l.height, l.width];
    }
    t
}

fn layout_of(t: &Tensor) -> Option<Layout> {
    match t.shape() {
        [_, c, h, w] => Some(Layout::new(*c, *h, *w)),
        _ => None,
    }
}

pub fn write_pilot_set_to<W: Write>(w: &mut W, pilots: &PilotSet) -> Result<()> {
    w.write_all(&[TAG_X])?;
    latent_tensor(pilots.x(), pilots.x_layout()).write_to(w)?;
    w.write_all(&[TAG_Y])?;
    latent_tensor(pilots.y(), pilots.y_layout()).write_to(w)?;
    if let Some(h) = pilots.fading() {
        let data = h.iter().flat_map(|z| [z.re as f32, z.im as f32]).collect();
        w.write_all(&[TAG_H])?;
        Tensor::new(vec![h.len(), 2], data)?.write_to(w)?;
    }
    Ok(())
}

pub fn read_pilot_set_from<R: Read>(r: &mut R) -> Result<PilotSet> {
    let (mut x, mut y, mut h) = (None, None, None);
    loop {
        let mut tag = [0u8; 1];
        if read_up_to(r, &mut tag)? == 0 {
            break;
        }
        let t = Tensor::read_from(r)?;
        match tag[0] {
            TAG_X => x = Some(t),
            TAG_Y => y = Some(t),
            TAG_H => h = Some(t),
            other => return Err(Error::Format(format!("unknown section tag {other}"))),
        }
    }
    let x = x.ok_or_else(|| Error::Format("missing X section".into()))?;
    let y = y.ok_or_else(|| Error::Format("missing Y section".into()))?;
    let mut set = PilotSet::new(x.to_matrix()?, y.to_matrix()?)?.with_layouts(layout_of(&x), layout_of(&y))?;
    if let Some(h) = h {
        if h.shape() != [set.len(), 2] {
            return Err(Error::Format(format!("fading section has shape {:?}", h.shape())));
        }
        let fading = h.data().chunks_exact(2).map(|p| Complex64::new(p[0] as f64, p[1] as f64)).collect();
        set = set.with_fading(fading)?;
    }
    Ok(set)
}

pub fn write_pilot_set(path: impl AsRef<Path>, pilots: &PilotSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pilot_set_to(&mut w, pilots)?;
    w.flush()?;
    Ok(())
}

pub fn read_pilot_set(path: impl AsRef<Path>) -> Result<PilotSet> {
    read_pilot_set_from(&mut BufReader::new(File::open(path)?))
}
