//! Model file: a magic line, one JSON header line (architecture, duration
//! scaling, seed, parameter names and shapes), then every parameter value as
//! a little-endian f64 in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{param_shapes, CvaeModel};
use super::{CvaeArchitecture, EpochLoss};
use crate::error::{Error, Result};
use crate::ndcompute::{ParamSet, Tensor};

const MAGIC: &str = "causens-cvae 1";

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: CvaeArchitecture,
    ds_scale: Option<[f64; 2]>,
    seed: u64,
    epochs_run: usize,
    /// Bit pattern of the last epoch's total loss.
    final_loss_bits: Option<u64>,
    params: Vec<(String, Vec<usize>)>,
}

impl CvaeModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            architecture: self.arch.clone(),
            ds_scale: self.ds_scale,
            seed: self.seed,
            epochs_run: self.history.len(),
            final_loss_bits: self.history.last().map(|e| e.total.to_bits()),
            params: self.params.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect(),
        };
        let mut out = format!("{MAGIC}\n").into_bytes();
        out.extend(serde_json::to_string(&header).expect("header serializes").into_bytes());
        out.push(b'\n');
        for (_, t) in self.params.iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Restores a model; the stored shapes must match those implied by the
    /// stored architecture. Per-epoch history is not persisted.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let perr = |m: String| Error::Persistence(m);
        let line_end = |from: usize| {
            bytes[from..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|p| from + p)
                .ok_or_else(|| perr("truncated header".into()))
        };
        let first = line_end(0)?;
        if &bytes[..first] != MAGIC.as_bytes() {
            return Err(perr("not a model file (bad magic line)".into()));
        }
        let second = line_end(first + 1)?;
        let header: Header = serde_json::from_slice(&bytes[first + 1..second])
            .map_err(|e| perr(format!("header: {e}")))?;
        let mut model = CvaeModel::init(&header.architecture, header.seed)?;
        let (expected, _) = param_shapes(&header.architecture);
        if expected != header.params {
            return Err(perr("parameter shapes do not match the architecture".into()));
        }
        let mut body = &bytes[second + 1..];
        let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if body.len() != total * 8 {
            return Err(perr(format!("expected {} parameter bytes, found {}", total * 8, body.len())));
        }
        let mut params = ParamSet::new();
        for (name, shape) in expected {
            let count: usize = shape.iter().product();
            let data = body[..count * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            body = &body[count * 8..];
            params.push(name, Tensor::new(shape, data)?);
        }
        model.set_params(params)?;
        model.ds_scale = header.ds_scale;
        if let Some(bits) = header.final_loss_bits {
            let total = f64::from_bits(bits);
            model.history = vec![
                EpochLoss {
                    reconstruction: f64::NAN,
                    kl: f64::NAN,
                    kl_weight: f64::NAN,
                    total,
                };
                header.epochs_run
            ];
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
