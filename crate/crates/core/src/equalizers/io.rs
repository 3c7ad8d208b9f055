//! Equalizer files: a manifest section followed by SEQL parameter tensors.
//!
//! ```text
//! file      := manifest param*
//! manifest  := 0x10 arch:u8 ndim:u8 dims:u32×ndim kv_len:u32 kv:utf8[kv_len]
//! param     := 0x11 tensor
//! arch      := 0 linear | 1 mlp | 2 cnn1 | 3 cnn2 | 4 pfe
//! kv        := ("key=value\n")*
//! ```
//!
//! Linear files hold `F` (m×d); neural files hold one flat tensor per
//! parameter group; PFE files hold the raw TX and RX references, and the
//! frame operators are rebuilt on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{build_pfe, Equalizer, LinearEqualizer, NeuralEqualizer};
use crate::channel::stream_rng;
use crate::error::{Error, Result};
use crate::latents::tensor::Tensor;
use crate::numerics::Matrix;

pub const TAG_MANIFEST: u8 = 0x10;
pub const TAG_PARAM: u8 = 0x11;

pub const ARCH_LINEAR: u8 = 0;
pub const ARCH_MLP: u8 = 1;
pub const ARCH_CNN1: u8 = 2;
pub const ARCH_CNN2: u8 = 3;
pub const ARCH_PFE: u8 = 4;

/// Free-form `key=value` metadata stored next to the parameters.
pub type Metadata = Vec<(String, String)>;

fn arch_and_dims(eq: &Equalizer) -> Result<(u8, Vec<usize>)> {
    Ok(match eq {
        Equalizer::None => return Err(Error::Format("the unaligned baseline has no parameters to save".into())),
        Equalizer::Linear(l) => (ARCH_LINEAR, vec![l.d(), l.m()]),
        Equalizer::Neural(n) => {
            let tag = match n.arch() {
                super::NeuralArch::Mlp => ARCH_MLP,
                super::NeuralArch::Cnn1 => ARCH_CNN1,
                super::NeuralArch::Cnn2 => ARCH_CNN2,
            };
            (tag, n.dims().to_vec())
        }
        Equalizer::Pfe(p) => (ARCH_PFE, vec![p.frame_size(), p.d(), p.m()]),
    })
}

pub fn write_equalizer_to<W: Write>(w: &mut W, eq: &Equalizer, meta: &[(String, String)]) -> Result<()> {
    let (arch, dims) = arch_and_dims(eq)?;
    let mut kv = String::new();
    if let Equalizer::Linear(l) = eq {
        kv.push_str(&format!("rank_deficient={}\n", l.rank_deficient()));
    }
    for (k, v) in meta {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Format(format!("metadata entry `{k}` cannot be encoded")));
        }
        kv.push_str(&format!("{k}={v}\n"));
    }
    w.write_all(&[TAG_MANIFEST, arch, dims.len() as u8])?;
    for d in &dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    w.write_all(&(kv.len() as u32).to_le_bytes())?;
    w.write_all(kv.as_bytes())?;

    let tensors: Vec<Tensor> = match eq {
        Equalizer::None => unreachable!(),
        Equalizer::Linear(l) => vec![Tensor::from_matrix(l.matrix())],
        Equalizer::Neural(n) => {
            let p = n.params();
            n.param_groups()
                .into_iter()
                .map(|(_, r)| Tensor::new(vec![r.len()], p[r].iter().map(|&v| v as f32).collect()))
                .collect::<Result<_>>()?
        }
        Equalizer::Pfe(p) => vec![Tensor::from_matrix(p.tx_refs()), Tensor::from_matrix(p.rx_refs())],
    };
    for t in tensors {
        w.write_all(&[TAG_PARAM])?;
        t.write_to(w)?;
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<Option<u8>> {
    let mut b = [0u8; 1];
    match r.read_exact(&mut b) {
        Ok(()) => Ok(Some(b[0])),
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| if e.kind() == ErrorKind::UnexpectedEof { Error::TruncatedFile } else { e.into() })?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_equalizer_from<R: Read>(r: &mut R) -> Result<(Equalizer, Metadata)> {
    if read_u8(r)? != Some(TAG_MANIFEST) {
        return Err(Error::BadMagic);
    }
    let arch = read_u8(r)?.ok_or(Error::TruncatedFile)?;
    let ndim = read_u8(r)?.ok_or(Error::TruncatedFile)? as usize;
    let dims = (0..ndim).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let kv_len = read_u32(r)? as usize;
    let mut kv = vec![0u8; kv_len];
    r.read_exact(&mut kv).map_err(|_| Error::TruncatedFile)?;
    let kv = String::from_utf8(kv).map_err(|_| Error::Format("manifest is not UTF-8".into()))?;
    let mut meta: Metadata =
        kv.lines().filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string()))).collect();

    let mut tensors = Vec::new();
    while let Some(tag) = read_u8(r)? {
        if tag != TAG_PARAM {
            return Err(Error::Format(format!("unknown section tag {tag}")));
        }
        tensors.push(Tensor::read_from(r)?);
    }
    let want = |n: usize| {
        if tensors.len() == n {
            Ok(())
        } else {
            Err(Error::Format(format!("expected {n} parameter tensors, found {}", tensors.len())))
        }
    };
    let bad_dims = || Error::Format(format!("architecture {arch} with dims {dims:?}"));

    let eq = match arch {
        ARCH_LINEAR => {
            want(1)?;
            let f = tensors[0].to_matrix()?;
            if dims != [f.cols(), f.rows()] {
                return Err(bad_dims());
            }
            let mut l = LinearEqualizer::from_matrix(f);
            if let Some(pos) = meta.iter().position(|(k, _)| k == "rank_deficient") {
                let (_, v) = meta.remove(pos);
                l = l.with_rank_deficient(v == "true");
            }
            Equalizer::Linear(l)
        }
        ARCH_MLP | ARCH_CNN1 | ARCH_CNN2 => {
            if dims.len() != 3 {
                return Err(bad_dims());
            }
            let mut rng = stream_rng(0, 0, 0);
            let mut net = match arch {
                ARCH_MLP if dims[0] == dims[1] => NeuralEqualizer::mlp(dims[0], dims[2], &mut rng),
                ARCH_CNN1 if dims[2] == super::KERNEL => NeuralEqualizer::cnn1(dims[0], dims[1], &mut rng),
                ARCH_CNN2 if dims[2] == super::KERNEL => NeuralEqualizer::cnn2(dims[0], dims[1], &mut rng),
                _ => return Err(bad_dims()),
            };
            want(net.param_groups().len())?;
            for (t, (_, range)) in tensors.iter().zip(net.param_groups()) {
                if t.len() != range.len() {
                    return Err(bad_dims());
                }
            }
            let flat: Vec<f64> = tensors.iter().flat_map(|t| t.data().iter().map(|&v| v as f64)).collect();
            net.set_params(&flat)?;
            Equalizer::Neural(net)
        }
        ARCH_PFE => {
            want(2)?;
            let (tx, rx) = (tensors[0].to_matrix()?, tensors[1].to_matrix()?);
            if dims != [tx.rows(), tx.cols(), rx.cols()] {
                return Err(bad_dims());
            }
            Equalizer::Pfe(build_pfe(&tx, &rx)?)
        }
        other => return Err(Error::Format(format!("unknown architecture tag {other}"))),
    };
    Ok((eq, meta))
}

pub fn save_equalizer(path: impl AsRef<Path>, eq: &Equalizer, meta: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_equalizer_to(&mut w, eq, meta)?;
    w.flush()?;
    Ok(())
}

pub fn load_equalizer(path: impl AsRef<Path>) -> Result<(Equalizer, Metadata)> {
    read_equalizer_from(&mut BufReader::new(File::open(path)?))
}

/// Rounds every parameter through binary32, matching what a saved file holds.
pub fn to_wire_precision(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] as f32 as f64)
}
