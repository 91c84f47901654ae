use super::{NnError, Tape, Var};
use crate::scalar::Real;

/// Sizes of a Mamba block. `d_model` is the width at the block boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MambaConfig {
    pub d_model: usize,
    pub d_inner: usize,
    pub d_state: usize,
    pub dt_rank: usize,
    pub conv_kernel: usize,
    /// SiLU gate branch multiplied into the scan output.
    pub gate: bool,
}

impl Default for MambaConfig {
    fn default() -> Self {
        Self { d_model: 32, d_inner: 64, d_state: 8, dt_rank: 4, conv_kernel: 4, gate: true }
    }
}

impl MambaConfig {
    /// Parameter names (relative to a prefix) and shapes, in creation order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (dm, di, n, r, k) = (self.d_model, self.d_inner, self.d_state, self.dt_rank, self.conv_kernel);
        let mut v = vec![("in_x.w", vec![di, dm])];
        if self.gate {
            v.push(("in_z.w", vec![di, dm]));
        }
        v.extend([
            ("conv.w", vec![di, k]),
            ("conv.b", vec![di]),
            ("dt_down.w", vec![r, di]),
            ("proj_b.w", vec![n, di]),
            ("proj_c.w", vec![n, di]),
            ("dt_proj.w", vec![di, r]),
            ("dt_proj.b", vec![di]),
            ("a_log", vec![di, n]),
            ("d", vec![di]),
            ("out.w", vec![dm, di]),
        ]);
        v
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// Tape handles of the selective-scan parameters.
#[derive(Debug, Clone, Copy)]
pub struct SsmVars {
    pub dt_down: Var,
    pub dt_proj_w: Var,
    pub dt_proj_b: Var,
    pub proj_b: Var,
    pub proj_c: Var,
    pub a_log: Var,
    pub d: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct MambaVars {
    pub in_x: Var,
    pub in_z: Option<Var>,
    pub conv_w: Var,
    pub conv_b: Var,
    pub ssm: SsmVars,
    pub out: Var,
}

impl MambaVars {
    /// Resolves handles by relative parameter name.
    pub fn resolve(cfg: &MambaConfig, mut lookup: impl FnMut(&str) -> Var) -> Self {
        let mut get = |n: &str| lookup(n);
        Self {
            in_x: get("in_x.w"),
            in_z: if cfg.gate { Some(get("in_z.w")) } else { None },
            conv_w: get("conv.w"),
            conv_b: get("conv.b"),
            ssm: SsmVars {
                dt_down: get("dt_down.w"),
                dt_proj_w: get("dt_proj.w"),
                dt_proj_b: get("dt_proj.b"),
                proj_b: get("proj_b.w"),
                proj_c: get("proj_c.w"),
                a_log: get("a_log"),
                d: get("d"),
            },
            out: get("out.w"),
        }
    }
}

/// Input-dependent SSM over `x [B×L×D]`:
/// `Δ = softplus(W_dt · W_down · x + b)`, `B = W_B x`, `C = W_C x`, then the
/// selective scan.
pub fn ssm_scan<T: Real>(tape: &mut Tape<T>, x: Var, p: &SsmVars) -> Result<Var, NnError> {
    let low = tape.linear(x, p.dt_down, None)?;
    let pre = tape.linear(low, p.dt_proj_w, Some(p.dt_proj_b))?;
    let delta = tape.softplus(pre);
    let b = tape.linear(x, p.proj_b, None)?;
    let c = tape.linear(x, p.proj_c, None)?;
    tape.selective_scan(x, delta, p.a_log, b, c, p.d)
}

/// Mamba block with residual, `x [B×L×d_model]` → same shape.
pub fn mamba_block<T: Real>(tape: &mut Tape<T>, x: Var, p: &MambaVars) -> Result<Var, NnError> {
    let xi = tape.linear(x, p.in_x, None)?;
    let conv = tape.dw_causal_conv(xi, p.conv_w, p.conv_b)?;
    let u = tape.silu(conv);
    let mut y = ssm_scan(tape, u, &p.ssm)?;
    if let Some(wz) = p.in_z {
        let z = tape.linear(x, wz, None)?;
        let gate = tape.silu(z);
        y = tape.mul(y, gate)?;
    }
    let out = tape.linear(y, p.out, None)?;
    tape.add(out, x)
}
