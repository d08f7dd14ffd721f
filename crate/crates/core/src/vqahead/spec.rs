use std::fmt;

use crate::error::{Error, Result};
use crate::fusion::{Activation, FusionKind, MutanDims};

/// Fusion choice and its size hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionSpec {
    Elementwise,
    Mcb { d: usize, normalize: bool },
    Mutan { t_q: usize, t_v: usize, t_o: usize, rank: usize },
}

impl FusionSpec {
    pub fn kind(&self) -> FusionKind {
        match self {
            FusionSpec::Elementwise => FusionKind::Elementwise,
            FusionSpec::Mcb { .. } => FusionKind::Mcb,
            FusionSpec::Mutan { .. } => FusionKind::Mutan,
        }
    }
}

impl fmt::Display for FusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FusionSpec::Elementwise => write!(f, "elementwise"),
            FusionSpec::Mcb { d, normalize } => write!(f, "mcb {d} {}", u8::from(normalize)),
            FusionSpec::Mutan { t_q, t_v, t_o, rank } => write!(f, "mutan {t_q} {t_v} {t_o} {rank}"),
        }
    }
}

/// Geometry of a VQA head: question/image feature sizes, optional
/// pre-fusion projection, fusion, classifier hidden width and answer count.
///
/// With `proj = Some(p)` both modalities are mapped to `p` dimensions by
/// affine layers before fusion; with `None` the raw features are fused
/// directly (this is how the Tucker fusion is wired, its own `W_q`/`W_v`
/// taking the place of the projections).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub n_img: usize,
    pub n_txt: usize,
    pub proj: Option<usize>,
    pub fusion: FusionSpec,
    pub hidden: usize,
    pub classes: usize,
    pub hidden_activation: Activation,
}

impl ModelSpec {
    pub fn new(n_img: usize, n_txt: usize, proj: Option<usize>, fusion: FusionSpec, hidden: usize, classes: usize) -> Self {
        Self {
            n_img,
            n_txt,
            proj,
            fusion,
            hidden,
            classes,
            hidden_activation: Activation::Tanh,
        }
    }

    /// Question-side fusion input size.
    pub fn fusion_q_dim(&self) -> usize {
        self.proj.unwrap_or(self.n_txt)
    }

    /// Image-side fusion input size.
    pub fn fusion_v_dim(&self) -> usize {
        self.proj.unwrap_or(self.n_img)
    }

    pub fn fusion_out_dim(&self) -> usize {
        match self.fusion {
            FusionSpec::Elementwise => self.fusion_q_dim(),
            FusionSpec::Mcb { d, .. } => d,
            FusionSpec::Mutan { t_o, .. } => t_o,
        }
    }

    pub(crate) fn mutan_dims(&self) -> Option<MutanDims> {
        match self.fusion {
            FusionSpec::Mutan { t_q, t_v, t_o, rank } => Some(MutanDims {
                n_q: self.fusion_q_dim(),
                n_v: self.fusion_v_dim(),
                t_q,
                t_v,
                t_o,
                rank,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut dims = vec![
            ("n_img", self.n_img),
            ("n_txt", self.n_txt),
            ("hidden", self.hidden),
            ("classes", self.classes),
        ];
        if let Some(p) = self.proj {
            dims.push(("proj", p));
        }
        match self.fusion {
            FusionSpec::Elementwise => {}
            FusionSpec::Mcb { d, .. } => dims.push(("mcb_d", d)),
            FusionSpec::Mutan { t_q, t_v, t_o, rank } => {
                dims.extend([("t_q", t_q), ("t_v", t_v), ("t_o", t_o), ("rank", rank)]);
            }
        }
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        let (q, v) = (self.fusion_q_dim(), self.fusion_v_dim());
        if matches!(self.fusion, FusionSpec::Elementwise | FusionSpec::Mcb { .. }) && q != v {
            return Err(Error::Config(format!(
                "{} fusion needs equal input sizes, got n_txt={q} vs n_img={v} (set a projection)",
                self.fusion.kind()
            )));
        }
        Ok(())
    }
}
