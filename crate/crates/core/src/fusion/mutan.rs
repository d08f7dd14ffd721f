use crate::error::{Error, Result};
use crate::numtensor::{matvec, outer, tanh_map, vecmat, Rng, Tensor};

/// Sizes of a Tucker fusion: inputs `n_q`, `n_v`, projected `t_q`, `t_v`,
/// output `t_o` and the number of rank terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutanDims {
    pub n_q: usize,
    pub n_v: usize,
    pub t_q: usize,
    pub t_v: usize,
    pub t_o: usize,
    pub rank: usize,
}

impl MutanDims {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("n_q", self.n_q),
            ("n_v", self.n_v),
            ("t_q", self.t_q),
            ("t_v", self.t_v),
            ("t_o", self.t_o),
            ("rank", self.rank),
        ];
        if let Some((name, _)) = named.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("MUTAN dimension {name} must be >= 1")));
        }
        Ok(())
    }

    /// `n_q·t_q + t_q + n_v·t_v + t_v + R·(t_q·t_o + t_v·t_o)`.
    pub fn param_count(&self) -> usize {
        self.n_q * self.t_q
            + self.t_q
            + self.n_v * self.t_v
            + self.t_v
            + self.rank * (self.t_q * self.t_o + self.t_v * self.t_o)
    }
}

/// Nonlinearity applied to the two modality projections.
///
/// `Identity` turns the fusion into a plain bilinear map and exists for
/// verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

/// Learnable parameters of the Tucker fusion with a rank-constrained core.
///
/// `w_q: [n_q, t_q]`, `w_v: [n_v, t_v]`, each `m[r]: [t_q, t_o]`, each
/// `n[r]: [t_v, t_o]`. The core tensor is never stored: it is
/// `T_c[a, b, c] = Σ_r m[r][a, c] · n[r][b, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MutanParams {
    pub(crate) w_q: Tensor,
    pub(crate) b_q: Tensor,
    pub(crate) w_v: Tensor,
    pub(crate) b_v: Tensor,
    pub(crate) m: Vec<Tensor>,
    pub(crate) n: Vec<Tensor>,
    activation: Activation,
}

impl MutanParams {
    pub fn new(
        w_q: Tensor,
        b_q: Tensor,
        w_v: Tensor,
        b_v: Tensor,
        m: Vec<Tensor>,
        n: Vec<Tensor>,
    ) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Parameter("MUTAN rank must be >= 1".into()));
        }
        if m.len() != n.len() {
            return Err(Error::Parameter(format!(
                "MUTAN needs as many M as N slices ({} vs {})",
                m.len(),
                n.len()
            )));
        }
        let (_, t_q) = w_q.dims2()?;
        let (_, t_v) = w_v.dims2()?;
        let (_, t_o) = m[0].dims2()?;
        if b_q.shape() != [t_q] {
            return Err(Error::dim("MutanParams b_q", w_q.shape(), b_q.shape()));
        }
        if b_v.shape() != [t_v] {
            return Err(Error::dim("MutanParams b_v", w_v.shape(), b_v.shape()));
        }
        for mr in &m {
            if mr.shape() != [t_q, t_o] {
                return Err(Error::dim("MutanParams M", &[t_q, t_o], mr.shape()));
            }
        }
        for nr in &n {
            if nr.shape() != [t_v, t_o] {
                return Err(Error::dim("MutanParams N", &[t_v, t_o], nr.shape()));
            }
        }
        Ok(Self {
            w_q,
            b_q,
            w_v,
            b_v,
            m,
            n,
            activation: Activation::Tanh,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dims(&self) -> MutanDims {
        MutanDims {
            n_q: self.w_q.shape()[0],
            n_v: self.w_v.shape()[0],
            t_q: self.w_q.shape()[1],
            t_v: self.w_v.shape()[1],
            t_o: self.m[0].shape()[1],
            rank: self.m.len(),
        }
    }

    pub fn m(&self) -> &[Tensor] {
        &self.m
    }

    pub fn n(&self) -> &[Tensor] {
        &self.n
    }

    /// Tensors in canonical order: `w_q, b_q, w_v, b_v, m.0.., n.0..`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.w_q, &self.b_q, &self.w_v, &self.b_v];
        out.extend(self.m.iter());
        out.extend(self.n.iter());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.w_q, &mut self.b_q, &mut self.w_v, &mut self.b_v];
        out.extend(self.m.iter_mut());
        out.extend(self.n.iter_mut());
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = ["w_q", "b_q", "w_v", "b_v"].map(String::from).to_vec();
        out.extend((0..self.m.len()).map(|r| format!("m.{r}")));
        out.extend((0..self.n.len()).map(|r| format!("n.{r}")));
        out
    }

    /// Projected, activated modalities `(q̃, ṽ)`.
    pub fn project(&self, q: &Tensor, v: &Tensor) -> Result<(Tensor, Tensor)> {
        let aq = vecmat(q, &self.w_q, Some(&self.b_q))?;
        let av = vecmat(v, &self.w_v, Some(&self.b_v))?;
        Ok(match self.activation {
            Activation::Tanh => (tanh_map(&aq), tanh_map(&av)),
            Activation::Identity => (aq, av),
        })
    }
}

/// Gaussian weights with σ = 1/√fan_in per matrix, zero biases.
///
/// Fan-in is `n_q`/`n_v` for the projections and `t_q`/`t_v` for the core slices.
pub fn init_mutan(rng: &mut Rng, dims: MutanDims) -> Result<MutanParams> {
    dims.validate()?;
    let gauss = |rng: &mut Rng, rows: usize, cols: usize| {
        rng.gaussian_tensor(&[rows, cols], 1.0 / (rows as f64).sqrt())
    };
    let w_q = gauss(rng, dims.n_q, dims.t_q)?;
    let w_v = gauss(rng, dims.n_v, dims.t_v)?;
    let m = (0..dims.rank)
        .map(|_| gauss(rng, dims.t_q, dims.t_o))
        .collect::<Result<Vec<_>>>()?;
    let n = (0..dims.rank)
        .map(|_| gauss(rng, dims.t_v, dims.t_o))
        .collect::<Result<Vec<_>>>()?;
    MutanParams::new(
        w_q,
        Tensor::zeros(&[dims.t_q]),
        w_v,
        Tensor::zeros(&[dims.t_v]),
        m,
        n,
    )
}

/// Latent pair representation `z[c] = Σ_r (q̃ᵀ M_r)[c] · (ṽᵀ N_r)[c]`.
pub fn fuse_mutan(p: &MutanParams, q: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (qt, vt) = p.project(q, v)?;
    let t_o = p.dims().t_o;
    let mut z = vec![0.0; t_o];
    for (mr, nr) in p.m.iter().zip(&p.n) {
        let u = vecmat(&qt, mr, None)?;
        let w = vecmat(&vt, nr, None)?;
        for ((zc, uc), wc) in z.iter_mut().zip(u.data()).zip(w.data()) {
            *zc += uc * wc;
        }
    }
    Ok(Tensor::vector(z))
}

/// Gradients of `⟨upstream, fuse_mutan(p, q, v)⟩`; parameter gradients are in
/// [`MutanParams::tensors`] order.
pub fn mutan_vjp(
    p: &MutanParams,
    q: &Tensor,
    v: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Vec<Tensor>)> {
    let dims = p.dims();
    if upstream.shape() != [dims.t_o] {
        return Err(Error::dim("mutan_vjp upstream", &[dims.t_o], upstream.shape()));
    }
    let (qt, vt) = p.project(q, v)?;
    let mut grad_qt = Tensor::zeros(&[dims.t_q]);
    let mut grad_vt = Tensor::zeros(&[dims.t_v]);
    let mut grad_m = Vec::with_capacity(dims.rank);
    let mut grad_n = Vec::with_capacity(dims.rank);
    for (mr, nr) in p.m.iter().zip(&p.n) {
        let u = vecmat(&qt, mr, None)?;
        let w = vecmat(&vt, nr, None)?;
        let gu = upstream.zip_with(&w, "mutan_vjp", |g, w| g * w)?;
        let gw = upstream.zip_with(&u, "mutan_vjp", |g, u| g * u)?;
        grad_m.push(outer(&qt, &gu)?);
        grad_n.push(outer(&vt, &gw)?);
        // Σ_c M_r[a, c] · gu[c]
        grad_qt.add_scaled(1.0, &matvec(mr, &gu, None)?)?;
        grad_vt.add_scaled(1.0, &matvec(nr, &gw, None)?)?;
    }
    let (grad_aq, grad_av) = match p.activation {
        Activation::Tanh => (
            grad_qt.zip_with(&qt, "mutan_vjp", |g, t| g * (1.0 - t * t))?,
            grad_vt.zip_with(&vt, "mutan_vjp", |g, t| g * (1.0 - t * t))?,
        ),
        Activation::Identity => (grad_qt, grad_vt),
    };
    let grad_q = matvec(&p.w_q, &grad_aq, None)?;
    let grad_v = matvec(&p.w_v, &grad_av, None)?;
    let mut grads = vec![outer(q, &grad_aq)?, grad_aq, outer(v, &grad_av)?, grad_av];
    grads.extend(grad_m);
    grads.extend(grad_n);
    Ok((grad_q, grad_v, grads))
}
