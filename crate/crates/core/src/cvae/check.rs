//! Finite-difference validation of the CVAE objective on random miniature
//! instances, plus per-op checks of the tape primitives it uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CvaeArchitecture, CvaeModel};
use crate::data::{Dataset, TabularData};
use crate::error::Result;
use crate::ndcompute::{glorot_uniform, grad_check_with_fault, Fault, GradCheckReport, NodeId, ParamSet, Tape, Tensor};
use crate::seqdata::{SequenceData, TrajectoryRecord, SEQUENCE_FEATURES};

/// Relative-error tolerance of the suite.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    /// Op or head under test.
    pub name: String,
    pub instances: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub entries: Vec<CheckEntry>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::matrix(rows, cols, data).expect("shape matches data")
}

/// A random binary-head instance: data, model and KL weight.
pub fn binary_instance(rng: &mut ChaCha8Rng) -> Result<(Dataset, CvaeModel, f64)> {
    let k = rng.random_range(1..=3);
    let rows = rng.random_range(3..=6);
    let mut names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    names.push("y".into());
    let columns = (0..=k).map(|_| (0..rows).map(|_| rng.random_range(0..2u32)).collect()).collect();
    let data = TabularData::new(names.clone(), columns)?;
    let cond: Vec<&str> = names[..k].iter().map(String::as_str).collect();
    let mut arch = CvaeArchitecture::binary("y", &cond);
    arch.encoder_hidden = vec![rng.random_range(2..=4)];
    arch.decoder_hidden = vec![rng.random_range(2..=4)];
    arch.latent_dim = rng.random_range(1..=3);
    let model = CvaeModel::init(&arch, rng.random())?;
    Ok((data.into(), model, rng.random_range(0.0..1.0)))
}

/// A random sequence-head instance with short, partly padded records.
pub fn sequence_instance(rng: &mut ChaCha8Rng) -> Result<(Dataset, CvaeModel, f64)> {
    let c_max = rng.random_range(2..=4);
    let max_len = rng.random_range(1..=3);
    let mut cond = vec!["ls"];
    for f in &SEQUENCE_FEATURES[1..] {
        if rng.random_bool(0.5) {
            cond.push(f);
        }
    }
    let records = (0..rng.random_range(2..=4))
        .map(|uid| {
            let len = rng.random_range(1..=max_len);
            TrajectoryRecord {
                uid,
                ls: (0..len).map(|_| rng.random_range(0..c_max as u32)).collect(),
                ds: (0..len).map(|_| rng.random_range(5..240)).collect(),
                smin: (0..len).map(|_| rng.random_range(0..1440)).collect(),
                w: (0..len).map(|_| rng.random_range(0..7)).collect(),
                y: rng.random_range(0..c_max as u32),
            }
        })
        .collect();
    let data = SequenceData::new(records)?;
    let mut arch = CvaeArchitecture::sequence(&cond, c_max, max_len);
    arch.encoder_hidden = vec![3];
    arch.decoder_hidden = vec![3];
    arch.recurrent_hidden = rng.random_range(2..=4);
    arch.latent_dim = 2;
    let model = CvaeModel::init(&arch, rng.random())?;
    Ok((data.into(), model, rng.random_range(0.0..1.0)))
}

type Builder = Box<dyn Fn(&mut Tape, &ParamSet) -> Result<NodeId>>;

/// Scalar reduction with fixed weights so each entry gets its own gradient.
fn weighted_sum(t: &mut Tape, node: NodeId, w: &Tensor) -> Result<NodeId> {
    let c = t.constant(w.clone());
    let m = t.mul(node, c)?;
    Ok(t.sum(m))
}

fn op_instance(op: &str, rng: &mut ChaCha8Rng) -> (ParamSet, Builder) {
    let mut p = ParamSet::new();
    let a = p.push("a", random_matrix(rng, 3, 4, 1.5));
    let w_out = random_matrix(rng, 3, 4, 1.0);
    let build: Builder = match op {
        "affine" => {
            let w = p.push("w", glorot_uniform(4, 4, rng));
            let b = p.push("b", Tensor::vector((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()));
            Box::new(move |t, p| {
                let (x, w, b) = (t.param(p, a), t.param(p, w), t.param(p, b));
                let y = t.affine(x, w, Some(b))?;
                weighted_sum(t, y, &w_out)
            })
        }
        "rnn_cell" => {
            let h = p.push("h", random_matrix(rng, 3, 4, 1.0));
            let wx = p.push("wx", glorot_uniform(4, 4, rng));
            let wh = p.push("wh", glorot_uniform(4, 4, rng));
            let b = p.push("b", Tensor::zeros(&[4]));
            Box::new(move |t, p| {
                let (x, h) = (t.param(p, a), t.param(p, h));
                let (wx, wh, b) = (t.param(p, wx), t.param(p, wh), t.param(p, b));
                let h1 = t.rnn_cell(x, h, wx, wh, b)?;
                let h2 = t.rnn_cell(x, h1, wx, wh, b)?;
                weighted_sum(t, h2, &w_out)
            })
        }
        "sigmoid_bce" => {
            let y: Vec<f64> = (0..12).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            Box::new(move |t, p| {
                let x = t.param(p, a);
                t.sigmoid_bce(x, &y, None)
            })
        }
        "softmax_xent" => {
            let y: Vec<usize> = (0..3).map(|_| rng.random_range(0..4)).collect();
            Box::new(move |t, p| {
                let x = t.param(p, a);
                t.softmax_xent(x, &y, None)
            })
        }
        "gaussian_kl" => {
            let lv = p.push("logvar", random_matrix(rng, 3, 4, 1.5));
            Box::new(move |t, p| {
                let (mu, lv) = (t.param(p, a), t.param(p, lv));
                t.gaussian_kl(mu, lv)
            })
        }
        "reparameterize" => {
            let lv = p.push("logvar", random_matrix(rng, 3, 4, 1.5));
            let eps = random_matrix(rng, 3, 4, 2.0);
            Box::new(move |t, p| {
                let (mu, lv) = (t.param(p, a), t.param(p, lv));
                let e = t.constant(eps.clone());
                let half = t.scale(lv, 0.5);
                let std = t.exp(half);
                let noise = t.mul(std, e)?;
                let z = t.add(mu, noise)?;
                weighted_sum(t, z, &w_out)
            })
        }
        "concat" => {
            let b = p.push("b", random_matrix(rng, 3, 2, 1.0));
            let w = random_matrix(rng, 3, 6, 1.0);
            Box::new(move |t, p| {
                let (x, y) = (t.param(p, a), t.param(p, b));
                let c = t.concat(&[x, y])?;
                weighted_sum(t, c, &w)
            })
        }
        "tanh" => Box::new(move |t, p| {
            let x = t.param(p, a);
            let y = t.tanh(x);
            weighted_sum(t, y, &w_out)
        }),
        "sigmoid" => Box::new(move |t, p| {
            let x = t.param(p, a);
            let y = t.sigmoid(x);
            weighted_sum(t, y, &w_out)
        }),
        "softmax" => Box::new(move |t, p| {
            let x = t.param(p, a);
            let y = t.softmax(x)?;
            weighted_sum(t, y, &w_out)
        }),
        _ => unreachable!("unknown op `{op}`"),
    };
    (p, build)
}

pub const CHECKED_OPS: [&str; 10] = [
    "affine",
    "tanh",
    "sigmoid",
    "softmax",
    "concat",
    "rnn_cell",
    "reparameterize",
    "sigmoid_bce",
    "softmax_xent",
    "gaussian_kl",
];

fn entry(name: &str, reports: &[GradCheckReport]) -> CheckEntry {
    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    CheckEntry {
        name: name.to_string(),
        instances: reports.len(),
        max_rel_error,
        passed: reports.iter().all(GradCheckReport::passed),
    }
}

/// Per-op checks followed by the full objective of both heads, each on
/// `instances` random instances. A `fault` corrupts the analytic pass.
pub fn gradcheck_suite(instances: usize, seed: u64, fault: Fault) -> Result<SuiteReport> {
    let mut entries = Vec::new();
    for (i, op) in CHECKED_OPS.iter().enumerate() {
        let mut reports = Vec::with_capacity(instances);
        for k in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 32 | k as u64));
            let (params, build) = op_instance(op, &mut rng);
            reports.push(grad_check_with_fault(&params, build, GRADCHECK_TOLERANCE, fault)?);
        }
        entries.push(entry(op, &reports));
    }
    type Maker = fn(&mut ChaCha8Rng) -> Result<(Dataset, CvaeModel, f64)>;
    let heads: [(&str, Maker); 2] = [("cvae_binary", binary_instance), ("cvae_sequence", sequence_instance)];
    for (h, (name, make)) in heads.iter().enumerate() {
        let mut reports = Vec::with_capacity(instances);
        for k in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((100 + h as u64) << 32 | k as u64));
            let (data, model, kl_weight) = make(&mut rng)?;
            let probe = model.loss_probe(&data, rng.random(), kl_weight)?;
            reports.push(grad_check_with_fault(
                probe.params(),
                |t, p| probe.build(t, p),
                GRADCHECK_TOLERANCE,
                fault,
            )?);
        }
        entries.push(entry(name, &reports));
    }
    Ok(SuiteReport {
        tolerance: GRADCHECK_TOLERANCE,
        entries,
    })
}
