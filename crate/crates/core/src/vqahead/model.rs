use crate::error::{Error, Result};
use crate::fusion::{init_mutan, Activation, FusionParams, McbConfig};
use crate::numtensor::{matvec, outer, vecmat, Rng, Tensor};

use super::spec::{FusionSpec, ModelSpec};

/// Affine layer `y = W x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// σ = 1/√in Gaussian weights, zero bias.
    pub fn init(rng: &mut Rng, inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Self {
            weight: rng.gaussian_tensor(&[outputs, inputs], 1.0 / (inputs as f64).sqrt())?,
            bias: Tensor::zeros(&[outputs]),
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        matvec(&self.weight, x, Some(&self.bias))
    }

    /// Returns `(grad_x, grad_weight, grad_bias)`.
    fn backward(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        Ok((vecmat(g, &self.weight, None)?, outer(g, x)?, g.clone()))
    }
}

/// Trainable state of a VQA head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub(crate) spec: ModelSpec,
    pub(crate) seed: u64,
    pub(crate) proj_q: Option<Linear>,
    pub(crate) proj_v: Option<Linear>,
    pub(crate) fusion: FusionParams,
    pub(crate) hidden: Linear,
    pub(crate) output: Linear,
}

/// Builds a head with σ = 1/√fan_in Gaussian weights and zero biases.
///
/// Draw order: question projection, image projection, fusion, hidden,
/// output. MCB sketches come from a master seed drawn from `rng`.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelParams> {
    spec.validate()?;
    let (mut proj_q, mut proj_v) = (None, None);
    if let Some(p) = spec.proj {
        proj_q = Some(Linear::init(rng, spec.n_txt, p)?);
        proj_v = Some(Linear::init(rng, spec.n_img, p)?);
    }
    let fusion = match spec.fusion {
        FusionSpec::Elementwise => FusionParams::Elementwise,
        FusionSpec::Mcb { d, normalize } => {
            let master = rng.next_u64();
            FusionParams::Mcb(
                McbConfig::from_master_seed(spec.fusion_q_dim(), d, master)?.with_normalization(normalize),
            )
        }
        FusionSpec::Mutan { .. } => {
            let dims = spec.mutan_dims().expect("mutan spec");
            FusionParams::Mutan(init_mutan(rng, dims)?)
        }
    };
    let hidden = Linear::init(rng, spec.fusion_out_dim(), spec.hidden)?;
    let output = Linear::init(rng, spec.hidden, spec.classes)?;
    Ok(ModelParams {
        spec: *spec,
        seed: rng.seed(),
        proj_q,
        proj_v,
        fusion,
        hidden,
        output,
    })
}

/// Intermediate activations of one forward pass.
struct Trace {
    q: Tensor,
    v: Tensor,
    fused: Tensor,
    hidden: Tensor,
    logits: Tensor,
}

impl ModelParams {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fusion(&self) -> &FusionParams {
        &self.fusion
    }

    pub fn fusion_mut(&mut self) -> &mut FusionParams {
        &mut self.fusion
    }

    /// Every learnable tensor with its checkpoint name, in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, layer) in [("proj_q", &self.proj_q), ("proj_v", &self.proj_v)] {
            if let Some(l) = layer {
                out.push((format!("{name}.weight"), &l.weight));
                out.push((format!("{name}.bias"), &l.bias));
            }
        }
        for (name, t) in self.fusion.tensor_names().into_iter().zip(self.fusion.tensors()) {
            out.push((format!("fusion.{name}"), t));
        }
        out.push(("hidden.weight".into(), &self.hidden.weight));
        out.push(("hidden.bias".into(), &self.hidden.bias));
        out.push(("output.weight".into(), &self.output.weight));
        out.push(("output.bias".into(), &self.output.bias));
        out
    }

    /// Mutable view in the same order as [`named_tensors`](Self::named_tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in [&mut self.proj_q, &mut self.proj_v].into_iter().flatten() {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.extend(self.fusion.tensors_mut());
        out.push(&mut self.hidden.weight);
        out.push(&mut self.hidden.bias);
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    /// Number of stored learnable scalars, counted by walking the tensors.
    pub fn enumerate_scalars(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_inputs(&self, img: &Tensor, txt: &Tensor) -> Result<()> {
        if img.shape() != [self.spec.n_img] {
            return Err(Error::dim("forward image features", &[self.spec.n_img], img.shape()));
        }
        if txt.shape() != [self.spec.n_txt] {
            return Err(Error::dim("forward question features", &[self.spec.n_txt], txt.shape()));
        }
        if !img.is_finite() || !txt.is_finite() {
            return Err(Error::Validation("non-finite feature value at forward entry".into()));
        }
        Ok(())
    }

    fn activate(&self, x: &Tensor) -> Tensor {
        match self.spec.hidden_activation {
            Activation::Tanh => x.map(f64::tanh),
            Activation::Identity => x.clone(),
        }
    }

    fn trace(&self, img: &Tensor, txt: &Tensor) -> Result<Trace> {
        self.check_inputs(img, txt)?;
        let q = match &self.proj_q {
            Some(l) => l.forward(txt)?,
            None => txt.clone(),
        };
        let v = match &self.proj_v {
            Some(l) => l.forward(img)?,
            None => img.clone(),
        };
        let fused = self.fusion.forward(&q, &v)?;
        let hidden_pre = self.hidden.forward(&fused)?;
        let hidden = self.activate(&hidden_pre);
        let logits = self.output.forward(&hidden)?;
        Ok(Trace {
            q,
            v,
            fused,
            hidden,
            logits,
        })
    }

    /// Answer logits `output(act(hidden(fuse(proj_q(txt), proj_v(img)))))`.
    ///
    /// For Tucker fusion the hidden layer plays the role of the output factor
    /// `W_o` applied to the latent pair representation.
    pub fn forward(&self, img: &Tensor, txt: &Tensor) -> Result<Tensor> {
        Ok(self.trace(img, txt)?.logits)
    }

    /// Gradients of `⟨grad_logits, forward(img, txt)⟩` for every learnable
    /// tensor, aligned with [`named_tensors`](Self::named_tensors).
    pub fn backward(&self, img: &Tensor, txt: &Tensor, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let tr = self.trace(img, txt)?;
        self.backward_from(&tr, img, txt, grad_logits)
    }

    fn backward_from(&self, tr: &Trace, img: &Tensor, txt: &Tensor, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        if grad_logits.shape() != tr.logits.shape() {
            return Err(Error::dim("backward", tr.logits.shape(), grad_logits.shape()));
        }
        let (g_hidden, g_out_w, g_out_b) = self.output.backward(&tr.hidden, grad_logits)?;
        let g_pre = match self.spec.hidden_activation {
            Activation::Tanh => g_hidden.zip_with(&tr.hidden, "backward", |g, h| g * (1.0 - h * h))?,
            Activation::Identity => g_hidden,
        };
        let (g_fused, g_hid_w, g_hid_b) = self.hidden.backward(&tr.fused, &g_pre)?;
        let fg = self.fusion.vjp(&tr.q, &tr.v, &g_fused)?;

        let mut grads = Vec::new();
        if let (Some(pq), Some(pv)) = (&self.proj_q, &self.proj_v) {
            let (_, wq, bq) = pq.backward(txt, &fg.grad_q)?;
            let (_, wv, bv) = pv.backward(img, &fg.grad_v)?;
            grads.extend([wq, bq, wv, bv]);
        }
        grads.extend(fg.params);
        grads.extend([g_hid_w, g_hid_b, g_out_w, g_out_b]);
        Ok(grads)
    }

    /// Cross-entropy of the logits against `label`, its value and gradients.
    pub fn loss_and_grad(&self, img: &Tensor, txt: &Tensor, label: usize) -> Result<(f64, Vec<Tensor>)> {
        let tr = self.trace(img, txt)?;
        let (loss, g) = cross_entropy(&tr.logits, label)?;
        let grads = self.backward_from(&tr, img, txt, &g)?;
        Ok((loss, grads))
    }
}

/// `-log softmax(logits)[label]` with a max-shifted log-sum-exp, and its
/// gradient `softmax(logits) - onehot(label)`.
pub fn cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let z = logits.data();
    if label >= z.len() {
        return Err(Error::Parameter(format!(
            "label {label} out of range for {} classes",
            z.len()
        )));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&x| (x - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - z[label];
    let mut grad: Vec<f64> = z.iter().map(|&x| (x - lse).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, Tensor::vector(grad)))
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
