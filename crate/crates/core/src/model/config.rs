use super::ModelError;
use crate::nn::MambaConfig;

/// Upper bound on trainable parameters.
pub const PARAM_BUDGET: usize = 25_000;

/// Architecture and training hyperparameters.
///
/// Layout: conv(in → trunk, `front_kernel`) + ReLU + maxpool, two residual
/// bottleneck blocks (trunk → mid → mid → trunk, identity skip) separated by
/// a maxpool, a Mamba block over time, global average pooling and a linear
/// head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub in_channels: usize,
    /// Samples per input window.
    pub input_len: usize,
    pub front_kernel: usize,
    pub trunk_channels: usize,
    pub res_mid_channels: usize,
    pub res_kernels: [[usize; 3]; 2],
    /// (window, stride) after the front conv and after the first block.
    pub pools: [(usize, usize); 2],
    pub mamba: MambaConfig,
    pub num_classes: usize,
    /// Weight of the contrastive term: loss = CE + λ·SupCon.
    pub loss_lambda: f64,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 8,
            input_len: 512,
            front_kernel: 21,
            trunk_channels: 32,
            res_mid_channels: 12,
            res_kernels: [[5, 3, 3], [5, 3, 3]],
            pools: [(4, 4), (4, 4)],
            mamba: MambaConfig::default(),
            num_classes: 2,
            loss_lambda: 1.0,
            tau: 0.07,
            lr: 1e-3,
            epochs: 50,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small network used by gradient checks.
    pub fn tiny() -> Self {
        Self {
            in_channels: 2,
            input_len: 64,
            front_kernel: 5,
            trunk_channels: 8,
            res_mid_channels: 4,
            res_kernels: [[3, 3, 1], [3, 1, 3]],
            pools: [(2, 2), (2, 2)],
            mamba: MambaConfig { d_model: 8, d_inner: 16, d_state: 2, dt_rank: 2, conv_kernel: 3, gate: true },
            ..Self::default()
        }
    }

    /// Time steps seen by the Mamba block.
    pub fn sequence_len(&self) -> Option<usize> {
        let mut l = self.input_len;
        for (w, s) in self.pools {
            if w == 0 || s == 0 || l < w {
                return None;
            }
            l = (l - w) / s + 1;
        }
        Some(l)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.in_channels == 0 || self.trunk_channels == 0 || self.res_mid_channels == 0 {
            return bad("channel counts must be >= 1".into());
        }
        if self.front_kernel == 0 || self.res_kernels.iter().flatten().any(|&k| k == 0) {
            return bad("kernel sizes must be >= 1".into());
        }
        if self.front_kernel % 2 == 0 || self.res_kernels.iter().flatten().any(|&k| k % 2 == 0) {
            return bad("kernel sizes must be odd for same-length padding".into());
        }
        if self.mamba.d_model != self.trunk_channels {
            return bad(format!(
                "Mamba width {} must equal trunk width {}",
                self.mamba.d_model, self.trunk_channels
            ));
        }
        let m = &self.mamba;
        if m.d_inner == 0 || m.d_state == 0 || m.dt_rank == 0 || m.conv_kernel == 0 {
            return bad("Mamba sizes must be >= 1".into());
        }
        if self.sequence_len().is_none() {
            return bad(format!("pools {:?} do not fit input length {}", self.pools, self.input_len));
        }
        if self.num_classes != 2 {
            return bad("only binary classification is supported".into());
        }
        if !(self.tau > 0.0) || !(self.loss_lambda >= 0.0) || !(self.lr > 0.0) {
            return bad("tau and lr must be positive, lambda non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        Ok(())
    }

    /// Every trainable tensor's name and shape, in creation order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (c, t, mid, k) = (self.in_channels, self.trunk_channels, self.res_mid_channels, self.front_kernel);
        let mut v = vec![("front.w".to_string(), vec![t, c, k]), ("front.b".to_string(), vec![t])];
        for (bi, ks) in self.res_kernels.iter().enumerate() {
            let widths = [(t, mid), (mid, mid), (mid, t)];
            for (li, (&kk, (ci, co))) in ks.iter().zip(widths).enumerate() {
                v.push((format!("res{bi}.conv{li}.w"), vec![co, ci, kk]));
                v.push((format!("res{bi}.conv{li}.b"), vec![co]));
            }
        }
        for (name, shape) in self.mamba.param_shapes() {
            v.push((format!("mamba.{name}"), shape));
        }
        v.push(("head.w".to_string(), vec![self.num_classes, t]));
        v.push(("head.b".to_string(), vec![self.num_classes]));
        v
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    /// Integer architecture fields, stored in checkpoints.
    pub fn arch_vector(&self) -> Vec<usize> {
        let m = &self.mamba;
        let mut v = vec![self.in_channels, self.input_len, self.front_kernel, self.trunk_channels, self.res_mid_channels];
        v.extend(self.res_kernels.iter().flatten());
        v.extend(self.pools.iter().flat_map(|&(w, s)| [w, s]));
        v.extend([m.d_inner, m.d_state, m.dt_rank, m.conv_kernel, usize::from(m.gate), self.num_classes]);
        v
    }

    /// Inverse of [`Self::arch_vector`]; training fields keep their defaults.
    pub fn from_arch_vector(v: &[usize]) -> Result<Self, ModelError> {
        if v.len() != 21 {
            return Err(ModelError::InvalidConfig(format!("architecture record has {} fields, expected 21", v.len())));
        }
        let cfg = Self {
            in_channels: v[0],
            input_len: v[1],
            front_kernel: v[2],
            trunk_channels: v[3],
            res_mid_channels: v[4],
            res_kernels: [[v[5], v[6], v[7]], [v[8], v[9], v[10]]],
            pools: [(v[11], v[12]), (v[13], v[14])],
            mamba: MambaConfig {
                d_model: v[3],
                d_inner: v[15],
                d_state: v[16],
                dt_rank: v[17],
                conv_kernel: v[18],
                gate: v[19] != 0,
            },
            num_classes: v[20],
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
