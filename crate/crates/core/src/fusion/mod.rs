//! The three image–text fusion operators, each with an analytic backward pass.
//!
//! * element-wise product: `f_i = v_i · q_i`, no parameters;
//! * compact bilinear pooling (MCB): sketch both inputs with fixed Count
//!   Sketches and circularly convolve the results, no learnable parameters;
//! * Tucker fusion (MUTAN): `tanh` projections of each modality combined
//!   through a core tensor constrained to a sum of `R` rank terms.

mod mcb;
mod mutan;

pub use mcb::{fuse_mcb, mcb_vjp, McbConfig};
pub use mutan::{fuse_mutan, init_mutan, mutan_vjp, Activation, MutanDims, MutanParams};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numtensor::{hadamard, ConvMode, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionKind {
    Elementwise,
    Mcb,
    Mutan,
}

impl FusionKind {
    pub const ALL: [FusionKind; 3] = [FusionKind::Elementwise, FusionKind::Mcb, FusionKind::Mutan];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionKind::Elementwise => "elementwise",
            FusionKind::Mcb => "mcb",
            FusionKind::Mutan => "mutan",
        }
    }
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elementwise" => Ok(FusionKind::Elementwise),
            "mcb" => Ok(FusionKind::Mcb),
            "mutan" => Ok(FusionKind::Mutan),
            other => Err(Error::Parameter(format!(
                "unknown fusion `{other}` (expected elementwise|mcb|mutan)"
            ))),
        }
    }
}

/// A fusion operator together with whatever state it carries.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionParams {
    Elementwise,
    Mcb(McbConfig),
    Mutan(MutanParams),
}

/// Result of a vector–Jacobian product through a fusion.
#[derive(Debug, Clone)]
pub struct FusionGrads {
    pub grad_q: Tensor,
    pub grad_v: Tensor,
    /// One gradient per learnable tensor, in [`FusionParams::tensors`] order.
    pub params: Vec<Tensor>,
}

impl FusionParams {
    pub fn kind(&self) -> FusionKind {
        match self {
            FusionParams::Elementwise => FusionKind::Elementwise,
            FusionParams::Mcb(_) => FusionKind::Mcb,
            FusionParams::Mutan(_) => FusionKind::Mutan,
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            FusionParams::Mutan(p) => p.tensors(),
            _ => Vec::new(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            FusionParams::Mutan(p) => p.tensors_mut(),
            _ => Vec::new(),
        }
    }

    pub fn tensor_names(&self) -> Vec<String> {
        match self {
            FusionParams::Mutan(p) => p.tensor_names(),
            _ => Vec::new(),
        }
    }

    /// Forward pass; MCB uses [`ConvMode::for_len`].
    pub fn forward(&self, q: &Tensor, v: &Tensor) -> Result<Tensor> {
        match self {
            FusionParams::Elementwise => fuse_elementwise(q, v),
            FusionParams::Mcb(cfg) => fuse_mcb(cfg, q, v, ConvMode::for_len(cfg.d())),
            FusionParams::Mutan(p) => fuse_mutan(p, q, v),
        }
    }

    pub fn vjp(&self, q: &Tensor, v: &Tensor, upstream: &Tensor) -> Result<FusionGrads> {
        fusion_vjp(self, q, v, upstream)
    }
}

pub fn fuse_elementwise(q: &Tensor, v: &Tensor) -> Result<Tensor> {
    hadamard(q, v)
}

/// Exact gradients of `⟨upstream, forward(q, v)⟩` with respect to `q`, `v` and
/// every learnable tensor.
pub fn fusion_vjp(
    params: &FusionParams,
    q: &Tensor,
    v: &Tensor,
    upstream: &Tensor,
) -> Result<FusionGrads> {
    match params {
        FusionParams::Elementwise => {
            if q.shape() != v.shape() {
                return Err(Error::dim("fusion_vjp", q.shape(), v.shape()));
            }
            Ok(FusionGrads {
                grad_q: hadamard(upstream, v)?,
                grad_v: hadamard(upstream, q)?,
                params: Vec::new(),
            })
        }
        FusionParams::Mcb(cfg) => {
            let (grad_q, grad_v) = mcb_vjp(cfg, q, v, upstream, ConvMode::for_len(cfg.d()))?;
            Ok(FusionGrads {
                grad_q,
                grad_v,
                params: Vec::new(),
            })
        }
        FusionParams::Mutan(p) => {
            let (grad_q, grad_v, params) = mutan_vjp(p, q, v, upstream)?;
            Ok(FusionGrads {
                grad_q,
                grad_v,
                params,
            })
        }
    }
}

/// The full bilinear operator `T: [t_q, t_v, t_o]` reconstructed from a
/// rank-constrained core. Reference implementation for tests; it stores
/// every entry and contracts with a triple loop.
#[derive(Debug, Clone)]
pub struct FullBilinearOracle {
    core: Tensor,
}

impl FullBilinearOracle {
    /// `T[a, b, c] = Σ_r M_r[a, c] · N_r[b, c]`.
    pub fn from_mutan(p: &MutanParams) -> Self {
        let d = p.dims();
        let mut core = vec![0.0; d.t_q * d.t_v * d.t_o];
        for (mr, nr) in p.m().iter().zip(p.n()) {
            for a in 0..d.t_q {
                for b in 0..d.t_v {
                    for c in 0..d.t_o {
                        core[(a * d.t_v + b) * d.t_o + c] +=
                            mr.data()[a * d.t_o + c] * nr.data()[b * d.t_o + c];
                    }
                }
            }
        }
        Self {
            core: Tensor::new(vec![d.t_q, d.t_v, d.t_o], core).expect("core shape"),
        }
    }

    pub fn core(&self) -> &Tensor {
        &self.core
    }

    /// `z[c] = Σ_{a,b} qt[a] · vt[b] · T[a, b, c]`.
    pub fn contract(&self, qt: &Tensor, vt: &Tensor) -> Result<Tensor> {
        let (t_q, t_v, t_o) = (self.core.shape()[0], self.core.shape()[1], self.core.shape()[2]);
        if qt.shape() != [t_q] || vt.shape() != [t_v] {
            return Err(Error::dim("FullBilinearOracle::contract", qt.shape(), vt.shape()));
        }
        let t = self.core.data();
        let mut z = vec![0.0; t_o];
        for a in 0..t_q {
            for b in 0..t_v {
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc += qt.data()[a] * vt.data()[b] * t[(a * t_v + b) * t_o + c];
                }
            }
        }
        Ok(Tensor::vector(z))
    }
}
