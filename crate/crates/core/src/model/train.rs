use rand::seq::SliceRandom;

use super::{build_model, Model, ModelConfig, ModelError};
use crate::nn::{adam_step, NnError, OptimState, ParamStore, Tape, Tensor};
use crate::rng::SeedStream;
use crate::scalar::Real;

/// Windows `[n × channels × len]` and their class indices.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub raw: &'a [f32],
    pub labels: &'a [usize],
}

impl TrainData<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean pre-update minibatch loss.
    pub loss: f64,
    /// Training accuracy of the pre-update predictions.
    pub accuracy: f64,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    pub model: Model<T>,
    pub optim: OptimState<T>,
    /// Completed epochs.
    pub epoch: usize,
    pub seed: u64,
}

impl<T: Real> TrainState<T> {
    /// Fresh model whose input normalisation is fitted on `data`.
    pub fn new(cfg: &ModelConfig, seed: u64, data: TrainData<'_>) -> Result<Self, ModelError> {
        let mut model = build_model(&ModelConfig { seed, ..cfg.clone() }, seed)?;
        model.fit_normalization(data.raw, data.len());
        let optim = OptimState::new(&model.params, cfg.lr);
        Ok(Self { model, optim, epoch: 0, seed })
    }

    /// Loss of one minibatch and the gradients of every parameter.
    pub fn loss_and_grads(&self, raw: &[f32], labels: &[usize]) -> Result<(f64, usize, Vec<Vec<T>>), ModelError> {
        let m = &self.model;
        let cfg = &m.config;
        let mut tape = Tape::new();
        let vars = m.param_vars(&mut tape);
        let x = tape.leaf(m.prepare_input(raw, labels.len())?, false);
        let f = m.forward(&mut tape, &vars, x)?;
        let ce = tape.cross_entropy(f.logits, labels)?;
        let loss = if cfg.loss_lambda > 0.0 {
            match tape.supcon(f.embedding, labels, cfg.tau) {
                Ok(sc) => tape.add_scaled(ce, sc, T::lit(cfg.loss_lambda))?,
                Err(NnError::NoPositives) => ce,
                Err(e) => return Err(e.into()),
            }
        } else {
            ce
        };
        let value = tape.value(loss).item().as_f64();
        if !value.is_finite() {
            return Err(ModelError::NonFinite(format!("loss at epoch {}", self.epoch + 1)));
        }
        let correct = tape
            .value(f.logits)
            .data()
            .chunks_exact(cfg.num_classes)
            .zip(labels)
            .filter(|(row, &y)| {
                let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                best == y
            })
            .count();
        let mut grads = tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(m.params.iter())
            .map(|(&v, (_, t))| grads.take(v).unwrap_or_else(|| vec![T::zero(); t.len()]))
            .collect();
        Ok((value, correct, g))
    }

    /// Order in which epoch `epoch` (0-based) visits the training windows.
    pub fn epoch_order(&self, epoch: usize, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut SeedStream::new(self.seed).named("epoch").split(epoch as u64).rng());
        order
    }

    pub fn train_epoch(&mut self, data: TrainData<'_>) -> Result<EpochStats, ModelError> {
        let n = data.len();
        let per = self.model.config.in_channels * self.model.config.input_len;
        if data.raw.len() != n * per {
            return Err(ModelError::Shape(format!("{} values for {n} windows of {per}", data.raw.len())));
        }
        let order = self.epoch_order(self.epoch, n);
        let bs = self.model.config.batch_size;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        let mut raw = Vec::with_capacity(bs * per);
        let mut labels = Vec::with_capacity(bs);
        for chunk in order.chunks(bs) {
            raw.clear();
            labels.clear();
            for &i in chunk {
                raw.extend_from_slice(&data.raw[i * per..(i + 1) * per]);
                labels.push(data.labels[i]);
            }
            let (l, c, g) = self.loss_and_grads(&raw, &labels)?;
            adam_step(&mut self.model.params, &g, &mut self.optim)?;
            loss_sum += l * chunk.len() as f64;
            correct += c;
        }
        self.epoch += 1;
        Ok(EpochStats { epoch: self.epoch, loss: loss_sum / n as f64, accuracy: correct as f64 / n as f64 })
    }

    /// Trains until `epochs` epochs have been completed in total.
    pub fn train_until(&mut self, data: TrainData<'_>, epochs: usize) -> Result<Vec<EpochStats>, ModelError> {
        if data.is_empty() {
            return Err(ModelError::InvalidConfig("no training windows".into()));
        }
        for c in 0..2 {
            if !data.labels.contains(&c) {
                return Err(ModelError::InvalidConfig(format!("training data has no class {c}")));
            }
        }
        let mut out = Vec::new();
        while self.epoch < epochs {
            out.push(self.train_epoch(data)?);
        }
        Ok(out)
    }

    /// Parameters, normalisation, Adam moments and counters as one store.
    /// `channels` records which recording channels the model consumes.
    pub fn to_checkpoint(&self, channels: &[usize]) -> ParamStore<f32> {
        let m = &self.model;
        let mut s: ParamStore<f32> = m.params.cast();
        let vec_of = |v: Vec<f32>| Tensor::new(vec![v.len()], v).expect("rank-1");
        let ints = |v: &[usize]| vec_of(v.iter().map(|&x| x as f32).collect());
        let extra = [
            ("norm.mean", vec_of(m.norm_mean.iter().map(|v| v.as_f64() as f32).collect())),
            ("norm.std", vec_of(m.norm_std.iter().map(|v| v.as_f64() as f32).collect())),
            ("meta.arch", ints(&m.config.arch_vector())),
            ("meta.channels", ints(channels)),
            ("train.epoch", ints(&[self.epoch])),
            ("train.step", ints(&[self.optim.step as usize])),
        ];
        for (name, t) in extra {
            s.insert(name, t).expect("reserved names are unique");
        }
        for (i, (name, t)) in m.params.iter().enumerate() {
            let shape = t.shape().to_vec();
            let cast = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<f32>>();
            s.insert(format!("adam.m.{name}"), Tensor::new(shape.clone(), cast(&self.optim.m[i])).expect("shape"))
                .expect("unique");
            s.insert(format!("adam.v.{name}"), Tensor::new(shape, cast(&self.optim.v[i])).expect("shape"))
                .expect("unique");
        }
        s
    }

    /// Restores a state written by [`Self::to_checkpoint`]. Training
    /// hyperparameters (lr, epochs, batch size, λ, τ) come from `train_cfg`;
    /// the architecture comes from the checkpoint.
    pub fn from_checkpoint(store: &ParamStore<f32>, train_cfg: &ModelConfig, seed: u64) -> Result<(Self, Vec<usize>), ModelError> {
        let get = |name: &str| store.get(name).ok_or_else(|| ModelError::Checkpoint(format!("missing tensor '{name}'")));
        let ints = |name: &str| -> Result<Vec<usize>, ModelError> {
            Ok(get(name)?.data().iter().map(|&v| v as usize).collect())
        };
        let arch = ModelConfig::from_arch_vector(&ints("meta.arch")?)?;
        let config = ModelConfig {
            loss_lambda: train_cfg.loss_lambda,
            tau: train_cfg.tau,
            lr: train_cfg.lr,
            epochs: train_cfg.epochs,
            batch_size: train_cfg.batch_size,
            seed,
            ..arch
        };
        let lit = |v: &[f32]| v.iter().map(|&x| T::lit(x as f64)).collect::<Vec<T>>();
        let mut params = ParamStore::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, shape) in config.param_shapes() {
            let t = get(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Checkpoint(format!("'{name}' has shape {:?}, expected {shape:?}", t.shape())));
            }
            params.insert(name.clone(), Tensor::new(shape, lit(t.data()))?)?;
            m.push(lit(get(&format!("adam.m.{name}"))?.data()));
            v.push(lit(get(&format!("adam.v.{name}"))?.data()));
        }
        let norm_mean = lit(get("norm.mean")?.data());
        let norm_std = lit(get("norm.std")?.data());
        if norm_mean.len() != config.in_channels || norm_std.len() != config.in_channels {
            return Err(ModelError::Checkpoint("normalisation size does not match input channels".into()));
        }
        let epoch = *ints("train.epoch")?.first().unwrap_or(&0);
        let step = *ints("train.step")?.first().unwrap_or(&0) as u64;
        let mut optim = OptimState::new(&params, config.lr);
        optim.step = step;
        optim.m = m;
        optim.v = v;
        let channels = ints("meta.channels")?;
        let model = Model { config, params, norm_mean, norm_std };
        Ok((Self { model, optim, epoch, seed }, channels))
    }
}
