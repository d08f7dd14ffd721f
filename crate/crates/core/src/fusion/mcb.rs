use crate::error::{Error, Result};
use crate::numtensor::{circular_convolve, circular_correlate, ConvMode, Tensor};
use crate::sketch::SketchSpec;

/// Compact bilinear pooling: two fixed Count Sketches and a circular
/// convolution. Holds no learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct McbConfig {
    spec_q: SketchSpec,
    spec_v: SketchSpec,
    normalize: bool,
}

impl McbConfig {
    pub fn new(spec_q: SketchSpec, spec_v: SketchSpec) -> Result<Self> {
        if spec_q.n() != spec_v.n() || spec_q.d() != spec_v.d() {
            return Err(Error::Config(format!(
                "MCB sketches disagree: q is {}→{}, v is {}→{}",
                spec_q.n(),
                spec_q.d(),
                spec_v.n(),
                spec_v.d()
            )));
        }
        Ok(Self {
            spec_q,
            spec_v,
            normalize: false,
        })
    }

    /// Question sketch from `master`, visual sketch from `master + 1`.
    pub fn from_master_seed(n: usize, d: usize, master: u64) -> Result<Self> {
        Self::new(
            SketchSpec::from_seed(n, d, master)?,
            SketchSpec::from_seed(n, d, master.wrapping_add(1))?,
        )
    }

    /// Enables signed square root followed by ℓ2 normalization of the output.
    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }

    pub fn n(&self) -> usize {
        self.spec_q.n()
    }

    pub fn d(&self) -> usize {
        self.spec_q.d()
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn spec_q(&self) -> &SketchSpec {
        &self.spec_q
    }

    pub fn spec_v(&self) -> &SketchSpec {
        &self.spec_v
    }
}

pub fn fuse_mcb(cfg: &McbConfig, q: &Tensor, v: &Tensor, mode: ConvMode) -> Result<Tensor> {
    let sq = cfg.spec_q.apply(q)?;
    let sv = cfg.spec_v.apply(v)?;
    let conv = circular_convolve(&sq, &sv, mode)?;
    if cfg.normalize {
        Ok(normalize_forward(&conv).0)
    } else {
        Ok(conv)
    }
}

/// Returns `(grad_q, grad_v)` of `⟨upstream, fuse_mcb(q, v)⟩`.
pub fn mcb_vjp(
    cfg: &McbConfig,
    q: &Tensor,
    v: &Tensor,
    upstream: &Tensor,
    mode: ConvMode,
) -> Result<(Tensor, Tensor)> {
    if upstream.shape() != [cfg.d()] {
        return Err(Error::dim("mcb_vjp upstream", &[cfg.d()], upstream.shape()));
    }
    let sq = cfg.spec_q.apply(q)?;
    let sv = cfg.spec_v.apply(v)?;
    let g = if cfg.normalize {
        let conv = circular_convolve(&sq, &sv, mode)?;
        normalize_backward(&conv, upstream)
    } else {
        upstream.clone()
    };
    // y = sq ⊛ sv, so ∂⟨g,y⟩/∂sq = g ⋆ sv and ∂⟨g,y⟩/∂sv = g ⋆ sq.
    let grad_sq = circular_correlate(&g, &sv, mode)?;
    let grad_sv = circular_correlate(&g, &sq, mode)?;
    Ok((
        cfg.spec_q.apply_transpose(&grad_sq)?,
        cfg.spec_v.apply_transpose(&grad_sv)?,
    ))
}

/// `y = ssqrt(c) / ‖ssqrt(c)‖`, returning `(y, ‖ssqrt(c)‖)`. A zero input maps to zero.
fn normalize_forward(c: &Tensor) -> (Tensor, f64) {
    let s = c.map(|x| x.signum() * x.abs().sqrt());
    let norm = s.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        (Tensor::zeros(c.shape()), 0.0)
    } else {
        (s.scale(1.0 / norm), norm)
    }
}

fn normalize_backward(c: &Tensor, g: &Tensor) -> Tensor {
    let (y, norm) = normalize_forward(c);
    if norm == 0.0 {
        return Tensor::zeros(c.shape());
    }
    let yg: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
    let data = c
        .data()
        .iter()
        .zip(y.data())
        .zip(g.data())
        .map(|((&ci, &yi), &gi)| {
            let gs = (gi - yi * yg) / norm;
            if ci == 0.0 {
                0.0
            } else {
                gs / (2.0 * ci.abs().sqrt())
            }
        })
        .collect();
    Tensor::new(c.shape().to_vec(), data).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtensor::Rng;

    #[test]
    fn single_term_hand_value() {
        let sq = SketchSpec::from_parts(4, vec![1], vec![1], 0).unwrap();
        let sv = SketchSpec::from_parts(4, vec![-1], vec![3], 1).unwrap();
        let cfg = McbConfig::new(sq, sv).unwrap();
        for mode in [ConvMode::Direct, ConvMode::Frequency] {
            let y = fuse_mcb(&cfg, &Tensor::vector(vec![2.0]), &Tensor::vector(vec![5.0]), mode).unwrap();
            let expect = [0.0, 0.0, -10.0, 0.0];
            for (a, b) in y.data().iter().zip(expect) {
                assert!((a - b).abs() < 1e-12, "{mode}: {y:?}");
            }
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let cfg = McbConfig::from_master_seed(5, 9, 3).unwrap();
        let q = Rng::new(1).gaussian(5, 1.0).unwrap();
        let y = fuse_mcb(&cfg, &q, &Tensor::zeros(&[5]), ConvMode::Direct).unwrap();
        assert!(y.data().iter().all(|&x| x == 0.0));
        let y = fuse_mcb(&cfg.clone().with_normalization(true), &Tensor::zeros(&[5]), &q, ConvMode::Direct).unwrap();
        assert!(y.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mismatched_sketches_rejected() {
        let a = SketchSpec::from_seed(4, 8, 0).unwrap();
        let b = SketchSpec::from_seed(4, 9, 1).unwrap();
        assert!(McbConfig::new(a, b).is_err());
    }

    #[test]
    fn normalized_output_is_unit_length() {
        let cfg = McbConfig::from_master_seed(6, 16, 8).unwrap().with_normalization(true);
        let mut rng = Rng::new(2);
        let q = rng.gaussian(6, 1.0).unwrap();
        let v = rng.gaussian(6, 1.0).unwrap();
        let y = fuse_mcb(&cfg, &q, &v, ConvMode::Direct).unwrap();
        let norm: f64 = y.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
