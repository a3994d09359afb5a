//! Checkpoint persistence.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! "LTCK"  magic, 4 bytes
//! u16     format version (currently 1)
//! u8      stage (0 = pretrained, 1 = finetuned)
//! config  epochs u64, batch_size u64, hidden_dim u64, initial_lr f64,
//!         lr_decay_factor f64, lr_decay_epoch u64, momentum f64,
//!         weight_decay f64, seed u64, loss_kind u8, sampler u8,
//!         freeze_backbone u8
//! counts  num_classes u64, then one u64 per class
//! bundle  passthrough u8, input_dim u64, has_old_head u8,
//!         then a tensor table
//! ```
//!
//! The tensor table is a u32 tensor count followed by, per tensor, a u8 rank,
//! u64 dimensions, and the payload as f64 values. Tensors appear in a fixed
//! order: backbone weight and bias (hidden-layer backbones only), old head
//! weight and bias (fine-tuned bundles only), new head weight and bias.
//! Storing f64 bits keeps round trips exact, which is what makes the
//! frozen-backbone byte comparison meaningful.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::{BatchStrategy, ClassCounts};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{LinearHead, MlpBackbone, ModelBundle};
use crate::scalar::Scalar;

use super::{Checkpoint, LossKind, Stage, TrainConfig};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LTCK";
pub const CHECKPOINT_FORMAT_VERSION: u16 = 1;

pub fn save_checkpoint<S: Scalar>(path: &Path, checkpoint: &Checkpoint<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, checkpoint)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}

/// Serialize to an in-memory buffer, e.g. for byte-identity comparisons.
pub fn checkpoint_bytes<S: Scalar>(checkpoint: &Checkpoint<S>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, checkpoint)?;
    Ok(buf)
}

fn write_checkpoint<S: Scalar>(w: &mut impl Write, checkpoint: &Checkpoint<S>) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_u16::<LittleEndian>(CHECKPOINT_FORMAT_VERSION)?;
    w.write_u8(match checkpoint.stage {
        Stage::Pretrained => 0,
        Stage::Finetuned => 1,
    })?;

    let config = &checkpoint.config;
    w.write_u64::<LittleEndian>(config.epochs as u64)?;
    w.write_u64::<LittleEndian>(config.batch_size as u64)?;
    w.write_u64::<LittleEndian>(config.hidden_dim as u64)?;
    w.write_f64::<LittleEndian>(config.initial_lr)?;
    w.write_f64::<LittleEndian>(config.lr_decay_factor)?;
    w.write_u64::<LittleEndian>(config.lr_decay_epoch as u64)?;
    w.write_f64::<LittleEndian>(config.momentum)?;
    w.write_f64::<LittleEndian>(config.weight_decay)?;
    w.write_u64::<LittleEndian>(config.seed)?;
    w.write_u8(match config.loss_kind {
        LossKind::Ce => 0,
        LossKind::Bsce => 1,
        LossKind::Gml => 2,
        LossKind::GmlUnweighted => 3,
    })?;
    w.write_u8(match config.sampler {
        BatchStrategy::Shuffled => 0,
        BatchStrategy::ClassBalanced => 1,
    })?;
    w.write_u8(config.freeze_backbone as u8)?;

    let counts = checkpoint.bundle.class_counts();
    w.write_u64::<LittleEndian>(counts.num_classes() as u64)?;
    for &c in counts.counts() {
        w.write_u64::<LittleEndian>(c as u64)?;
    }

    let bundle = &checkpoint.bundle;
    let backbone = bundle.backbone();
    w.write_u8(backbone.is_passthrough() as u8)?;
    w.write_u64::<LittleEndian>(backbone.input_dim() as u64)?;
    w.write_u8(bundle.has_old_head() as u8)?;

    let mut tensors: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    if let (Some(weight), Some(bias)) = (backbone.weight(), backbone.bias()) {
        tensors.push(matrix_tensor(weight));
        tensors.push(vector_tensor(bias));
    }
    if let Some(old) = bundle.old_head() {
        tensors.push(matrix_tensor(old.weight()));
        tensors.push(vector_tensor(old.bias()));
    }
    tensors.push(matrix_tensor(bundle.new_head().weight()));
    tensors.push(vector_tensor(bundle.new_head().bias()));

    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (shape, payload) in &tensors {
        w.write_u8(shape.len() as u8)?;
        for &dim in shape {
            w.write_u64::<LittleEndian>(dim as u64)?;
        }
        for &v in payload {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn matrix_tensor<S: Scalar>(m: &Matrix<S>) -> (Vec<usize>, Vec<f64>) {
    (
        vec![m.rows(), m.cols()],
        m.as_slice().iter().map(|&v| v.as_f64()).collect(),
    )
}

fn vector_tensor<S: Scalar>(v: &[S]) -> (Vec<usize>, Vec<f64>) {
    (vec![v.len()], v.iter().map(|&x| x.as_f64()).collect())
}

fn read_checkpoint<S: Scalar>(r: &mut impl Read) -> Result<Checkpoint<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| eof_as_truncated(e, "magic bytes"))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = read_u16(r, "format version")?;
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let stage = match read_u8(r, "stage tag")? {
        0 => Stage::Pretrained,
        1 => Stage::Finetuned,
        other => return Err(Error::malformed(format!("unknown stage tag {other}"))),
    };

    let epochs = read_u64(r, "epochs")? as usize;
    let batch_size = read_u64(r, "batch_size")? as usize;
    let hidden_dim = read_u64(r, "hidden_dim")? as usize;
    let initial_lr = read_f64(r, "initial_lr")?;
    let lr_decay_factor = read_f64(r, "lr_decay_factor")?;
    let lr_decay_epoch = read_u64(r, "lr_decay_epoch")? as usize;
    let momentum = read_f64(r, "momentum")?;
    let weight_decay = read_f64(r, "weight_decay")?;
    let seed = read_u64(r, "seed")?;
    let loss_kind = match read_u8(r, "loss kind")? {
        0 => LossKind::Ce,
        1 => LossKind::Bsce,
        2 => LossKind::Gml,
        3 => LossKind::GmlUnweighted,
        other => return Err(Error::malformed(format!("unknown loss kind {other}"))),
    };
    let sampler = match read_u8(r, "sampler")? {
        0 => BatchStrategy::Shuffled,
        1 => BatchStrategy::ClassBalanced,
        other => return Err(Error::malformed(format!("unknown sampler {other}"))),
    };
    let freeze_backbone = read_u8(r, "freeze flag")? != 0;
    let config = TrainConfig {
        epochs,
        batch_size,
        hidden_dim,
        initial_lr,
        lr_decay_factor,
        lr_decay_epoch,
        momentum,
        weight_decay,
        seed,
        loss_kind,
        sampler,
        freeze_backbone,
    };

    let num_classes = read_u64(r, "class count")? as usize;
    let mut counts = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        counts.push(read_u64(r, "class counts")? as usize);
    }
    let counts = ClassCounts::new(counts);

    let passthrough = read_u8(r, "passthrough flag")? != 0;
    let input_dim = read_u64(r, "input dimension")? as usize;
    let has_old_head = read_u8(r, "old-head flag")? != 0;

    let expected_tensors = 2 + if passthrough { 0 } else { 2 } + if has_old_head { 2 } else { 0 };
    let tensor_count = read_u32(r, "tensor count")? as usize;
    if tensor_count != expected_tensors {
        return Err(Error::malformed(format!(
            "checkpoint declares {tensor_count} tensors, expected {expected_tensors}"
        )));
    }
    let mut tensors: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let rank = read_u8(r, "tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r, "tensor shape")? as usize);
        }
        let len: usize = shape.iter().product();
        let mut payload = Vec::with_capacity(len);
        for _ in 0..len {
            payload.push(read_f64(r, "tensor payload")?);
        }
        tensors.push((shape, payload));
    }
    let mut tensors = tensors.into_iter();

    let backbone = if passthrough {
        MlpBackbone::passthrough(input_dim)
    } else {
        let weight = take_matrix(&mut tensors, "backbone weight")?;
        let bias = take_vector(&mut tensors, "backbone bias")?;
        MlpBackbone::from_parts(weight, bias)?
    };
    let old_head = if has_old_head {
        let weight = take_matrix(&mut tensors, "old head weight")?;
        let bias = take_vector(&mut tensors, "old head bias")?;
        Some(LinearHead::from_parts(weight, bias)?)
    } else {
        None
    };
    let new_weight = take_matrix(&mut tensors, "new head weight")?;
    let new_bias = take_vector(&mut tensors, "new head bias")?;
    let new_head = LinearHead::from_parts(new_weight, new_bias)?;

    if !passthrough && backbone.input_dim() != input_dim {
        return Err(Error::malformed(format!(
            "backbone weight implies input dimension {} but header says {input_dim}",
            backbone.input_dim()
        )));
    }

    Ok(Checkpoint {
        bundle: ModelBundle::new(backbone, old_head, new_head, counts)?,
        config,
        stage,
    })
}

type TensorIter = std::vec::IntoIter<(Vec<usize>, Vec<f64>)>;

fn take_matrix<S: Scalar>(tensors: &mut TensorIter, what: &str) -> Result<Matrix<S>> {
    let (shape, payload) = tensors
        .next()
        .ok_or_else(|| Error::malformed(format!("missing tensor: {what}")))?;
    if shape.len() != 2 {
        return Err(Error::malformed(format!(
            "{what} has rank {}, expected 2",
            shape.len()
        )));
    }
    let data = payload.into_iter().map(S::of).collect();
    Ok(Matrix::from_vec(shape[0], shape[1], data))
}

fn take_vector<S: Scalar>(tensors: &mut TensorIter, what: &str) -> Result<Vec<S>> {
    let (shape, payload) = tensors
        .next()
        .ok_or_else(|| Error::malformed(format!("missing tensor: {what}")))?;
    if shape.len() != 1 {
        return Err(Error::malformed(format!(
            "{what} has rank {}, expected 1",
            shape.len()
        )));
    }
    Ok(payload.into_iter().map(S::of).collect())
}

fn read_u8(r: &mut impl Read, what: &str) -> Result<u8> {
    r.read_u8().map_err(|e| eof_as_truncated(e, what))
}

fn read_u16(r: &mut impl Read, what: &str) -> Result<u16> {
    r.read_u16::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, what))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, what))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, what))
}

fn read_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    r.read_f64::<LittleEndian>()
        .map_err(|e| eof_as_truncated(e, what))
}

fn eof_as_truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Truncated(what.to_string())
    } else {
        Error::Io(e)
    }
}
