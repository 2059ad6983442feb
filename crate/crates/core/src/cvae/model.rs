use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::encoding::{ds_range, encode, input_width, Encoded, Features};
use super::{
    CvaeArchitecture, EpochLoss, LatentBatch, LatentMode, LatentProvenance, Predictions, Scorer, TaskKind,
    TrainConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::argmax;
use crate::ndcompute::{adam_step, glorot_uniform, AdamConfig, AdamState, NodeId, ParamSet, Tape, Tensor};
use crate::rng::SeedStream;

/// Positions of each parameter in the declaration order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    enc_rnn: Option<[usize; 3]>,
    enc_layers: Vec<[usize; 2]>,
    enc_mu: [usize; 2],
    enc_logvar: [usize; 2],
    dec_rnn: Option<[usize; 3]>,
    dec_layers: Vec<[usize; 2]>,
    dec_out: [usize; 2],
}

/// Parameter names and shapes for an architecture, in declaration order.
pub(crate) fn param_shapes(arch: &CvaeArchitecture) -> (Vec<(String, Vec<usize>)>, Layout) {
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    let mut push = |name: String, shape: Vec<usize>| {
        specs.push((name, shape));
        specs.len() - 1
    };
    let x_width = input_width(arch);
    let l = arch.latent_dim;
    let sequence = arch.task == TaskKind::CategoricalSequence;
    let r = arch.recurrent_hidden;

    let enc_rnn = sequence.then(|| {
        [
            push("enc.rnn.wx".into(), vec![x_width, r]),
            push("enc.rnn.wh".into(), vec![r, r]),
            push("enc.rnn.b".into(), vec![r]),
        ]
    });
    let mut width = match arch.task {
        TaskKind::Binary => 1 + x_width,
        TaskKind::CategoricalSequence => arch.c_max + r,
    };
    let mut enc_layers = Vec::new();
    for (i, &h) in arch.encoder_hidden.iter().enumerate() {
        enc_layers.push([push(format!("enc.h{i}.w"), vec![width, h]), push(format!("enc.h{i}.b"), vec![h])]);
        width = h;
    }
    let enc_mu = [push("enc.mu.w".into(), vec![width, l]), push("enc.mu.b".into(), vec![l])];
    let enc_logvar = [push("enc.logvar.w".into(), vec![width, l]), push("enc.logvar.b".into(), vec![l])];

    let dec_rnn = sequence.then(|| {
        [
            push("dec.rnn.wx".into(), vec![l + x_width, r]),
            push("dec.rnn.wh".into(), vec![r, r]),
            push("dec.rnn.b".into(), vec![r]),
        ]
    });
    let mut width = if sequence { r } else { l + x_width };
    let mut dec_layers = Vec::new();
    for (i, &h) in arch.decoder_hidden.iter().enumerate() {
        dec_layers.push([push(format!("dec.h{i}.w"), vec![width, h]), push(format!("dec.h{i}.b"), vec![h])]);
        width = h;
    }
    let out = if sequence { arch.c_max } else { 1 };
    let dec_out = [push("dec.out.w".into(), vec![width, out]), push("dec.out.b".into(), vec![out])];
    let layout = Layout {
        enc_rnn,
        enc_layers,
        enc_mu,
        enc_logvar,
        dec_rnn,
        dec_layers,
        dec_out,
    };
    (specs, layout)
}

/// Loss nodes of one forward pass.
pub(crate) struct LossNodes {
    pub total: NodeId,
    pub reconstruction: NodeId,
    pub kl: NodeId,
}

/// A trained (or freshly initialized) CVAE.
#[derive(Debug, Clone, PartialEq)]
pub struct CvaeModel {
    pub(crate) arch: CvaeArchitecture,
    pub(crate) params: ParamSet,
    pub(crate) layout: Layout,
    /// Min-max scaling of durations, fixed from the training data.
    pub(crate) ds_scale: Option<[f64; 2]>,
    pub(crate) history: Vec<EpochLoss>,
    pub(crate) seed: u64,
}

fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::matrix(rows, cols, data).expect("shape matches data")
}

impl CvaeModel {
    /// Glorot-uniform weights and zero biases from the `init` seed stream.
    pub fn init(arch: &CvaeArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (specs, layout) = param_shapes(arch);
        let mut rng = SeedStream::new(seed).rng("init");
        let mut params = ParamSet::new();
        for (name, shape) in specs {
            let t = if shape.len() == 2 {
                glorot_uniform(shape[0], shape[1], &mut rng)
            } else {
                Tensor::zeros(&shape)
            };
            params.push(name, t);
        }
        Ok(Self {
            arch: arch.clone(),
            params,
            layout,
            ds_scale: None,
            history: Vec::new(),
            seed,
        })
    }

    pub fn architecture(&self) -> &CvaeArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Replaces all parameters; names and shapes must match.
    pub fn set_params(&mut self, params: ParamSet) -> Result<()> {
        let same = params.len() == self.params.len()
            && params
                .iter()
                .zip(self.params.iter())
                .all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape());
        if !same {
            return Err(Error::InvalidArgument("parameter names or shapes differ from the architecture".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn history(&self) -> &[EpochLoss] {
        &self.history
    }

    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ds_scale(&self) -> Option<[f64; 2]> {
        self.ds_scale
    }

    pub(crate) fn encode_data(&self, data: &Dataset) -> Result<Encoded> {
        encode(&self.arch, data, self.ds_scale)
    }

    fn check_targets(&self, targets: &[u32]) -> Result<()> {
        let classes = self.arch.classes();
        match targets.iter().find(|&&y| y as usize >= classes) {
            Some(&y) => Err(Error::LabelOutOfRange { label: y as usize, classes }),
            None => Ok(()),
        }
    }

    fn param_nodes(tape: &mut Tape, params: &ParamSet) -> Vec<NodeId> {
        params.ids().map(|id| tape.param(params, id)).collect()
    }

    fn concat_nonempty(tape: &mut Tape, parts: &[NodeId]) -> Result<NodeId> {
        let parts: Vec<NodeId> = parts.iter().copied().filter(|&p| tape.value(p).cols() > 0).collect();
        match parts.as_slice() {
            [only] => Ok(*only),
            _ => tape.concat(&parts),
        }
    }

    fn mlp(tape: &mut Tape, p: &[NodeId], layers: &[[usize; 2]], mut h: NodeId) -> Result<NodeId> {
        for &[w, b] in layers {
            let a = tape.affine(h, p[w], Some(p[b]))?;
            h = tape.tanh(a);
        }
        Ok(h)
    }

    fn run_rnn(tape: &mut Tape, p: &[NodeId], rnn: [usize; 3], inputs: &[NodeId], rows: usize, width: usize) -> Result<NodeId> {
        let mut h = tape.constant(Tensor::zeros(&[rows, width]));
        for &x in inputs {
            h = tape.rnn_cell(x, h, p[rnn[0]], p[rnn[1]], p[rnn[2]])?;
        }
        Ok(h)
    }

    fn target_input(&self, targets: &[u32]) -> Result<Tensor> {
        let n = targets.len();
        match self.arch.task {
            TaskKind::Binary => Tensor::matrix(n, 1, targets.iter().map(|&y| f64::from(y)).collect()),
            TaskKind::CategoricalSequence => {
                let c = self.arch.c_max;
                let mut data = vec![0.0; n * c];
                // Targets outside the training vocabulary have no slot.
                for (i, &y) in targets.iter().enumerate().filter(|(_, &y)| (y as usize) < c) {
                    data[i * c + y as usize] = 1.0;
                }
                Tensor::matrix(n, c, data)
            }
        }
    }

    /// Encoder graph: `(mu, logvar)` nodes.
    fn encoder_graph(&self, tape: &mut Tape, p: &[NodeId], batch: &Encoded, targets: &[u32]) -> Result<(NodeId, NodeId)> {
        let y = tape.input("target", self.target_input(targets)?);
        let context = match &batch.features {
            Features::Tabular(x) => tape.input("x", x.clone()),
            Features::Sequence(steps) => {
                let inputs: Vec<NodeId> = steps.iter().map(|s| tape.input("x_t", s.clone())).collect();
                let rnn = self.layout.enc_rnn.expect("sequence layout has an encoder rnn");
                Self::run_rnn(tape, p, rnn, &inputs, batch.rows, self.arch.recurrent_hidden)?
            }
        };
        let input = Self::concat_nonempty(tape, &[y, context])?;
        let h = Self::mlp(tape, p, &self.layout.enc_layers, input)?;
        let [wm, bm] = self.layout.enc_mu;
        let [wl, bl] = self.layout.enc_logvar;
        let mu = tape.affine(h, p[wm], Some(p[bm]))?;
        let logvar = tape.affine(h, p[wl], Some(p[bl]))?;
        Ok((mu, logvar))
    }

    /// Decoder graph: logits (`N x 1` binary, `N x c_max` sequence).
    fn decoder_graph(&self, tape: &mut Tape, p: &[NodeId], z: NodeId, batch: &Encoded) -> Result<NodeId> {
        let zr = tape.value(z).rows();
        if zr != batch.rows {
            return Err(Error::InvalidArgument(format!("{zr} latent rows for {} inputs", batch.rows)));
        }
        let h = match &batch.features {
            Features::Tabular(x) => {
                let x = tape.input("x", x.clone());
                Self::concat_nonempty(tape, &[z, x])?
            }
            Features::Sequence(steps) => {
                // The latent is repeated at every time step.
                let mut inputs = Vec::with_capacity(steps.len());
                for s in steps {
                    let x = tape.input("x_t", s.clone());
                    inputs.push(Self::concat_nonempty(tape, &[z, x])?);
                }
                let rnn = self.layout.dec_rnn.expect("sequence layout has a decoder rnn");
                Self::run_rnn(tape, p, rnn, &inputs, batch.rows, self.arch.recurrent_hidden)?
            }
        };
        let h = Self::mlp(tape, p, &self.layout.dec_layers, h)?;
        let [w, b] = self.layout.dec_out;
        tape.affine(h, p[w], Some(p[b]))
    }

    /// Full objective `reconstruction + kl_weight * KL` with fixed noise.
    pub(crate) fn loss_graph(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        batch: &Encoded,
        eps: &Tensor,
        kl_weight: f64,
    ) -> Result<LossNodes> {
        let targets = batch.require_targets()?;
        let p = Self::param_nodes(tape, params);
        let (mu, logvar) = self.encoder_graph(tape, &p, batch, targets)?;
        let e = tape.constant(eps.clone());
        let half = tape.scale(logvar, 0.5);
        let std = tape.exp(half);
        let noise = tape.mul(std, e)?;
        let z = tape.add(mu, noise)?;
        let logits = self.decoder_graph(tape, &p, z, batch)?;
        let reconstruction = match self.arch.task {
            TaskKind::Binary => {
                let y: Vec<f64> = targets.iter().map(|&v| f64::from(v)).collect();
                tape.sigmoid_bce(logits, &y, None)?
            }
            TaskKind::CategoricalSequence => {
                let y: Vec<usize> = targets.iter().map(|&v| v as usize).collect();
                tape.softmax_xent(logits, &y, None)?
            }
        };
        let kl = tape.gaussian_kl(mu, logvar)?;
        // With a zero weight the objective is the reconstruction node itself.
        let total = if kl_weight == 0.0 {
            reconstruction
        } else {
            let weighted = tape.scale(kl, kl_weight);
            tape.add(reconstruction, weighted)?
        };
        Ok(LossNodes {
            total,
            reconstruction,
            kl,
        })
    }

    /// Trains a fresh model. Identical inputs give bit-identical models.
    pub fn train(data: &Dataset, arch: &CvaeArchitecture, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut model = Self::init(arch, config.seed)?;
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        model.ds_scale = data.as_sequence().and_then(ds_range);
        let enc = model.encode_data(data)?;
        model.check_targets(enc.require_targets()?)?;

        let seeds = SeedStream::new(config.seed);
        let mut shuffle_rng = seeds.rng("shuffle");
        let mut noise_rng = seeds.rng("noise");
        let mut adam = AdamState::new(&model.params, AdamConfig::with_learning_rate(config.learning_rate));
        let n = enc.rows;
        let bs = if config.batch_size == 0 { n } else { config.batch_size.min(n) };
        let mut order: Vec<usize> = (0..n).collect();
        let latent = arch.latent_dim;

        for epoch in 0..config.epochs {
            let w = config.kl_weight(epoch);
            if bs < n {
                order.shuffle(&mut shuffle_rng);
            }
            let (mut rec_sum, mut kl_sum) = (0.0, 0.0);
            for chunk in order.chunks(bs) {
                let selected;
                let batch = if bs == n {
                    &enc
                } else {
                    selected = enc.select(chunk);
                    &selected
                };
                let eps = standard_normal(chunk.len(), latent, &mut noise_rng);
                let mut tape = Tape::new();
                let nodes = model.loss_graph(&mut tape, &model.params, batch, &eps, w)?;
                let rec = tape.value(nodes.reconstruction).item();
                let kl = tape.value(nodes.kl).item();
                if !(rec.is_finite() && kl.is_finite()) {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                let grads = tape.backward(nodes.total)?.for_params(&tape, &model.params);
                adam_step(&mut model.params, &grads, &mut adam)?;
                rec_sum += rec * chunk.len() as f64;
                kl_sum += kl * chunk.len() as f64;
            }
            let reconstruction = rec_sum / n as f64;
            let kl = kl_sum / n as f64;
            let total = if w == 0.0 { reconstruction } else { reconstruction + w * kl };
            model.history.push(EpochLoss {
                reconstruction,
                kl,
                kl_weight: w,
                total,
            });
        }
        Ok(model)
    }

    /// Posterior `(mu, logvar)` given features and observed targets.
    pub fn encode(&self, data: &Dataset) -> Result<(Tensor, Tensor)> {
        let enc = self.encode_data(data)?;
        self.encode_encoded(&enc)
    }

    fn encode_encoded(&self, enc: &Encoded) -> Result<(Tensor, Tensor)> {
        let targets = enc.require_targets()?;
        let mut tape = Tape::new();
        let p = Self::param_nodes(&mut tape, &self.params);
        let (mu, logvar) = self.encoder_graph(&mut tape, &p, enc, targets)?;
        Ok((tape.value(mu).clone(), tape.value(logvar).clone()))
    }

    /// Class distributions (`N x classes`) for latents `z` and features.
    pub fn decode(&self, z: &Tensor, data: &Dataset) -> Result<Tensor> {
        let enc = self.encode_data(data)?;
        self.decode_encoded(z, &enc)
    }

    fn decode_encoded(&self, z: &Tensor, enc: &Encoded) -> Result<Tensor> {
        if z.rank() != 2 || z.cols() != self.arch.latent_dim {
            return Err(Error::InvalidTensor(format!(
                "latent of shape {:?}, expected N x {}",
                z.shape(),
                self.arch.latent_dim
            )));
        }
        let mut tape = Tape::new();
        let p = Self::param_nodes(&mut tape, &self.params);
        let zn = tape.input("z", z.clone());
        let logits = self.decoder_graph(&mut tape, &p, zn, enc)?;
        match self.arch.task {
            TaskKind::Binary => {
                let s = tape.sigmoid(logits);
                let probs: Vec<f64> = tape.value(s).data().iter().flat_map(|&p| [1.0 - p, p]).collect();
                Tensor::matrix(enc.rows, 2, probs)
            }
            TaskKind::CategoricalSequence => {
                let s = tape.softmax(logits)?;
                Ok(tape.value(s).clone())
            }
        }
    }

    fn finish(probs: Tensor, latent: LatentBatch, targets: Option<Vec<u32>>) -> Predictions {
        let labels = (0..probs.rows()).map(|i| argmax(probs.row(i)) as u32).collect();
        Predictions {
            probs,
            labels,
            latent,
            targets,
        }
    }

    pub fn predict(&self, data: &Dataset, mode: &LatentMode) -> Result<Predictions> {
        let enc = self.encode_data(data)?;
        let latent = match mode {
            LatentMode::EncodeWithTarget => {
                let (mu, _) = self.encode_encoded(&enc)?;
                LatentBatch::new(mu, LatentProvenance::Factual)?
            }
            LatentMode::PriorSample { seed } => {
                let mut rng = SeedStream::new(*seed).rng("prior");
                LatentBatch::new(standard_normal(enc.rows, self.arch.latent_dim, &mut rng), LatentProvenance::Prior)?
            }
            LatentMode::Provided(b) => {
                if b.width() != self.arch.latent_dim || b.len() != enc.rows {
                    return Err(Error::InvalidTensor(format!(
                        "provided latent is {}x{}, expected {}x{}",
                        b.len(),
                        b.width(),
                        enc.rows,
                        self.arch.latent_dim
                    )));
                }
                b.clone()
            }
        };
        let probs = self.decode_encoded(&latent.z, &enc)?;
        Ok(Self::finish(probs, latent, enc.targets))
    }

    /// Decodes `n` prior draws per instance and keeps the best one under
    /// `scorer`. The first draw equals `predict` with the same prior seed.
    pub fn generate_best_of_n(&self, data: &Dataset, n: usize, scorer: Scorer, seed: u64) -> Result<Predictions> {
        if n == 0 {
            return Err(Error::InvalidArgument("best-of-n needs n >= 1".into()));
        }
        let enc = self.encode_data(data)?;
        let targets = match scorer {
            Scorer::RealizedLabel => Some(enc.require_targets()?),
            Scorer::MaxConfidence => None,
        };
        let rows = enc.rows;
        let d = self.arch.latent_dim;
        let mut rng = SeedStream::new(seed).rng("prior");
        let mut best_probs: Option<Tensor> = None;
        let mut best_z = Tensor::zeros(&[rows, d]);
        let mut best_score = vec![f64::NEG_INFINITY; rows];
        for _ in 0..n {
            let z = standard_normal(rows, d, &mut rng);
            let probs = self.decode_encoded(&z, &enc)?;
            let bp = best_probs.get_or_insert_with(|| Tensor::zeros(probs.shape()));
            let c = probs.cols();
            for i in 0..rows {
                let row = probs.row(i);
                let score = match targets {
                    Some(t) => row[t[i] as usize],
                    None => row.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                };
                if score > best_score[i] {
                    best_score[i] = score;
                    bp.data_mut()[i * c..(i + 1) * c].copy_from_slice(row);
                    best_z.data_mut()[i * d..(i + 1) * d].copy_from_slice(z.row(i));
                }
            }
        }
        let latent = LatentBatch::new(best_z, LatentProvenance::Prior)?;
        Ok(Self::finish(best_probs.expect("n >= 1"), latent, enc.targets))
    }

    /// The full training objective at fixed noise, for gradient checking.
    pub fn loss_probe(&self, data: &Dataset, noise_seed: u64, kl_weight: f64) -> Result<LossProbe> {
        let batch = self.encode_data(data)?;
        self.check_targets(batch.require_targets()?)?;
        let mut rng = SeedStream::new(noise_seed).rng("noise");
        let eps = standard_normal(batch.rows, self.arch.latent_dim, &mut rng);
        Ok(LossProbe {
            model: self.clone(),
            batch,
            eps,
            kl_weight,
        })
    }
}

/// A frozen batch and noise draw whose loss can be rebuilt for any
/// parameter values.
#[derive(Debug, Clone)]
pub struct LossProbe {
    model: CvaeModel,
    batch: Encoded,
    eps: Tensor,
    kl_weight: f64,
}

impl LossProbe {
    pub fn params(&self) -> &ParamSet {
        &self.model.params
    }

    pub fn build(&self, tape: &mut Tape, params: &ParamSet) -> Result<NodeId> {
        Ok(self.model.loss_graph(tape, params, &self.batch, &self.eps, self.kl_weight)?.total)
    }

    /// `(total, reconstruction, kl)` at the given parameters.
    pub fn evaluate(&self, params: &ParamSet) -> Result<(f64, f64, f64)> {
        let mut tape = Tape::new();
        let n = self.model.loss_graph(&mut tape, params, &self.batch, &self.eps, self.kl_weight)?;
        Ok((tape.value(n.total).item(), tape.value(n.reconstruction).item(), tape.value(n.kl).item()))
    }
}
