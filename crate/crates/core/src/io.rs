//! Binary persistence: an array container for grids, matrices, and model
//! tensors, and the training checkpoint built from it.
//!
//! # Array container
//!
//! A fixed little-endian layout (magic `EITK`):
//!
//! ```text
//! "EITK"  u32 version  u8 dtype  u8 ndim  ndim × u64 shape  payload
//! ```
//!
//! dtype codes: f32 = 1, f64 = 2, complex<f32> = 3, complex<f64> = 4. The
//! payload is row-major little-endian with complex entries interleaved
//! (re, im); its byte length must equal `product(shape) × size_of(dtype)`.
//! Round trips are bit exact, including NaN payloads and negative zeros.
//!
//! # Checkpoint container
//!
//! Magic `EITC`, then a length-prefixed JSON header (configs, counters, and
//! the ordered tensor-blob names), then one `EITK` array per name. All
//! floating state is stored as f64, so saving and loading a [`TrainState`]
//! resumes the schedule bitwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fno::{
    tensor_names, EpochStats, FNOConfig, FNOParams, OptimizerState, Standardizer, TrainConfig,
    TrainState,
};

pub const ARRAY_MAGIC: &[u8; 4] = b"EITK";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EITC";
pub const FORMAT_VERSION: u32 = 1;

/// Element type of a stored array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    C64,
    C128,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
            Dtype::C64 => 3,
            Dtype::C128 => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            3 => Ok(Dtype::C64),
            4 => Ok(Dtype::C128),
            other => Err(Error::format(format!("unknown dtype code {other}"))),
        }
    }

    /// Bytes per element.
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::C64 => 8,
            Dtype::C128 => 16,
        }
    }
}

/// An n-dimensional array with one of the four supported element types.
/// Data is row major; `shape` may be empty (a scalar, one element).
#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    F64 { shape: Vec<usize>, data: Vec<f64> },
    C64 { shape: Vec<usize>, data: Vec<Complex<f32>> },
    C128 { shape: Vec<usize>, data: Vec<Complex<f64>> },
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::invalid("array shape product overflows"))
}

impl Array {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::check(&shape, data.len())?;
        Ok(Array::F32 { shape, data })
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::check(&shape, data.len())?;
        Ok(Array::F64 { shape, data })
    }

    pub fn c64(shape: Vec<usize>, data: Vec<Complex<f32>>) -> Result<Self> {
        Self::check(&shape, data.len())?;
        Ok(Array::C64 { shape, data })
    }

    pub fn c128(shape: Vec<usize>, data: Vec<Complex<f64>>) -> Result<Self> {
        Self::check(&shape, data.len())?;
        Ok(Array::C128 { shape, data })
    }

    fn check(shape: &[usize], len: usize) -> Result<()> {
        let want = checked_len(shape)?;
        if want != len {
            return Err(Error::invalid(format!(
                "array data length {len} does not match shape product {want}"
            )));
        }
        if shape.len() > u8::MAX as usize {
            return Err(Error::invalid("array rank exceeds 255"));
        }
        Ok(())
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Array::F32 { .. } => Dtype::F32,
            Array::F64 { .. } => Dtype::F64,
            Array::C64 { .. } => Dtype::C64,
            Array::C128 { .. } => Dtype::C128,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Array::F32 { shape, .. }
            | Array::F64 { shape, .. }
            | Array::C64 { shape, .. }
            | Array::C128 { shape, .. } => shape,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Array::F32 { data, .. } => data.len(),
            Array::F64 { data, .. } => data.len(),
            Array::C64 { data, .. } => data.len(),
            Array::C128 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unwrap as f64, rejecting other dtypes (no silent conversion).
    pub fn expect_f64(self) -> Result<(Vec<usize>, Vec<f64>)> {
        match self {
            Array::F64 { shape, data } => Ok((shape, data)),
            other => {
                Err(Error::format(format!("expected an f64 array, found {:?}", other.dtype())))
            }
        }
    }

    /// Unwrap as complex<f64>, rejecting other dtypes.
    pub fn expect_c128(self) -> Result<(Vec<usize>, Vec<Complex<f64>>)> {
        match self {
            Array::C128 { shape, data } => Ok((shape, data)),
            other => Err(Error::format(format!(
                "expected a complex<f64> array, found {:?}",
                other.dtype()
            ))),
        }
    }

    /// Serialized size in bytes (header + payload).
    pub fn byte_len(&self) -> usize {
        4 + 4 + 1 + 1 + 8 * self.shape().len() + self.len() * self.dtype().size()
    }

    /// Encode to a writer in the fixed layout.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(ARRAY_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.dtype().code(), self.shape().len() as u8])?;
        for &dim in self.shape() {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        let mut buf: Vec<u8> = Vec::with_capacity(self.len() * self.dtype().size());
        match self {
            Array::F32 { data, .. } => {
                for v in data {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Array::F64 { data, .. } => {
                for v in data {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Array::C64 { data, .. } => {
                for v in data {
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
            Array::C128 { data, .. } => {
                for v in data {
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Decode from a reader, consuming exactly one encoded array. Truncation
    /// and malformed headers are rejected with a reason.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "array magic")?;
        if &magic != ARRAY_MAGIC {
            return Err(Error::format(format!(
                "bad array magic {:02x?} (expected \"EITK\")",
                magic
            )));
        }
        let mut word = [0u8; 4];
        read_exact(r, &mut word, "array version")?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported array format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let mut meta = [0u8; 2];
        read_exact(r, &mut meta, "array dtype/rank")?;
        let dtype = Dtype::from_code(meta[0])?;
        let ndim = meta[1] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut dim = [0u8; 8];
            read_exact(r, &mut dim, "array shape")?;
            let dim = u64::from_le_bytes(dim);
            shape.push(usize::try_from(dim).map_err(|_| {
                Error::format(format!("array dimension {dim} exceeds the address space"))
            })?);
        }
        let count = checked_len(&shape).map_err(|_| Error::format("array shape overflows"))?;
        let bytes = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::format("array payload size overflows"))?;
        let mut buf = vec![0u8; bytes];
        read_exact(r, &mut buf, "array payload")?;
        Ok(match dtype {
            Dtype::F32 => Array::F32 {
                shape,
                data: buf
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            },
            Dtype::F64 => Array::F64 {
                shape,
                data: buf
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            },
            Dtype::C64 => Array::C64 {
                shape,
                data: buf
                    .chunks_exact(8)
                    .map(|c| {
                        Complex::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            },
            Dtype::C128 => Array::C128 {
                shape,
                data: buf
                    .chunks_exact(16)
                    .map(|c| {
                        Complex::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            },
        })
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(format!("truncated file while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

/// Write one array to `path` (atomic within the file: any error leaves no
/// partial content because the write goes through a buffer flush+sync check).
pub fn save_array(path: impl AsRef<Path>, array: &Array) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    array.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Read one array from `path`. Trailing bytes after the payload are rejected
/// — a standalone array file contains exactly one array.
pub fn load_array(path: impl AsRef<Path>) -> Result<Array> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let array = Array::read_from(&mut r)?;
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(array),
        _ => Err(Error::format("trailing bytes after array payload")),
    }
}

/// Everything needed to evaluate or exactly resume a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: FNOConfig,
    pub train: TrainConfig,
    pub state: TrainState<f64>,
    pub standardizer: Standardizer,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointHeader {
    config: FNOConfig,
    train: TrainConfig,
    next_epoch: usize,
    step: usize,
    best_epoch: Option<usize>,
    /// Present iff `best_epoch` is (finite by construction).
    best_valid: Option<f64>,
    diverged_at: Option<usize>,
    standardizer_n: usize,
    history_rows: usize,
    /// Blob names in file order.
    tensors: Vec<String>,
}

fn state_blob_names(layers: usize, with_best: bool) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for prefix in ["params", "opt_m", "opt_v"] {
        names.extend(tensor_names(layers).iter().map(|n| format!("{prefix}.{n}")));
    }
    if with_best {
        names.extend(tensor_names(layers).iter().map(|n| format!("best.{n}")));
    }
    names.push("standardizer.mean".into());
    names.push("standardizer.std".into());
    names.push("history".into());
    names
}

fn history_to_rows(history: &[EpochStats]) -> Vec<f64> {
    history
        .iter()
        .flat_map(|e| [e.epoch as f64, e.lr, e.train_loss, e.valid_loss])
        .collect()
}

fn rows_to_history(rows: &[f64]) -> Vec<EpochStats> {
    rows.chunks_exact(4)
        .map(|r| EpochStats { epoch: r[0] as usize, lr: r[1], train_loss: r[2], valid_loss: r[3] })
        .collect()
}

/// Serialize a checkpoint: JSON header, then the tensor blobs in the order
/// listed by the header. All tensors are stored as 1-D f64 arrays.
pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    ck.config.validate()?;
    if ck.state.best_epoch.is_some() != ck.state.best_params.is_some() {
        return Err(Error::invalid("checkpoint best epoch and best params must come together"));
    }
    let header = CheckpointHeader {
        config: ck.config.clone(),
        train: ck.train.clone(),
        next_epoch: ck.state.next_epoch,
        step: ck.state.opt.step,
        best_epoch: ck.state.best_epoch,
        best_valid: ck.state.best_epoch.map(|_| ck.state.best_valid),
        diverged_at: ck.state.diverged_at,
        standardizer_n: ck.standardizer.n,
        history_rows: ck.state.history.len(),
        tensors: state_blob_names(ck.config.layers, ck.state.best_params.is_some()),
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;

    let write_params = |params: &FNOParams<f64>, w: &mut BufWriter<File>| -> Result<()> {
        for tensor in params.tensors() {
            Array::f64(vec![tensor.len()], tensor.to_vec())?.write_to(w)?;
        }
        Ok(())
    };
    write_params(&ck.state.params, &mut w)?;
    write_params(&ck.state.opt.m, &mut w)?;
    write_params(&ck.state.opt.v, &mut w)?;
    if let Some(best) = &ck.state.best_params {
        write_params(best, &mut w)?;
    }
    let n = ck.standardizer.n;
    Array::f64(vec![n, n], ck.standardizer.mean.clone())?.write_to(&mut w)?;
    Array::f64(vec![n, n], ck.standardizer.std.clone())?.write_to(&mut w)?;
    Array::f64(vec![ck.state.history.len(), 4], history_to_rows(&ck.state.history))?
        .write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Load and validate a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "checkpoint magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format(format!(
            "bad checkpoint magic {:02x?} (expected \"EITC\")",
            magic
        )));
    }
    let mut word = [0u8; 4];
    read_exact(&mut r, &mut word, "checkpoint version")?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len = [0u8; 8];
    read_exact(&mut r, &mut len, "checkpoint header length")?;
    let header_len = usize::try_from(u64::from_le_bytes(len))
        .map_err(|_| Error::format("checkpoint header length overflows"))?;
    let mut header_buf = vec![0u8; header_len];
    read_exact(&mut r, &mut header_buf, "checkpoint header")?;
    let header: CheckpointHeader = serde_json::from_slice(&header_buf)?;
    header.config.validate()?;
    header.train.validate()?;

    let with_best = header.best_epoch.is_some();
    let expected = state_blob_names(header.config.layers, with_best);
    if header.tensors != expected {
        return Err(Error::format("checkpoint tensor list does not match its configuration"));
    }

    let read_params = |r: &mut BufReader<File>| -> Result<FNOParams<f64>> {
        let mut params = FNOParams::<f64>::zeros(&header.config);
        for tensor in params.tensors_mut() {
            let (shape, data) = Array::read_from(r)?.expect_f64()?;
            if shape != [tensor.len()] {
                return Err(Error::format(format!(
                    "checkpoint tensor shape {shape:?} does not match expected [{}]",
                    tensor.len()
                )));
            }
            tensor.copy_from_slice(&data);
        }
        Ok(params)
    };
    let params = read_params(&mut r)?;
    let m = read_params(&mut r)?;
    let v = read_params(&mut r)?;
    let best_params = if with_best { Some(read_params(&mut r)?) } else { None };

    let n = header.standardizer_n;
    let (shape, mean) = Array::read_from(&mut r)?.expect_f64()?;
    if shape != [n, n] {
        return Err(Error::format("checkpoint standardizer mean shape mismatch"));
    }
    let (shape, std) = Array::read_from(&mut r)?.expect_f64()?;
    if shape != [n, n] {
        return Err(Error::format("checkpoint standardizer std shape mismatch"));
    }
    let (shape, rows) = Array::read_from(&mut r)?.expect_f64()?;
    if shape != [header.history_rows, 4] {
        return Err(Error::format("checkpoint history shape mismatch"));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::format("trailing bytes after checkpoint payload"));
    }

    Ok(Checkpoint {
        state: TrainState {
            params,
            opt: OptimizerState { m, v, step: header.step },
            next_epoch: header.next_epoch,
            history: rows_to_history(&rows),
            best_epoch: header.best_epoch,
            best_valid: header.best_valid.unwrap_or(f64::INFINITY),
            best_params,
            diverged_at: header.diverged_at,
        },
        config: header.config,
        train: header.train,
        standardizer: Standardizer { n, mean, std },
    })
}
