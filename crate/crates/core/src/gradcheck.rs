//! Central finite differences against the analytic fusion VJPs.

use crate::error::Result;
use crate::fusion::{fusion_vjp, init_mutan, FusionKind, FusionParams, McbConfig, MutanDims};
use crate::numtensor::{Rng, Tensor};

/// Step used by every finite-difference comparison.
pub const FD_STEP: f64 = 1e-6;

/// Pass threshold on the maximum relative error.
pub const MAX_REL_ERR: f64 = 1e-5;

/// Magnitudes below this are compared absolutely (see [`rel_err`]).
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
///
/// Central differences at step `h` carry roughly `ε·|f|/h ≈ 1e-10` of
/// absolute rounding noise, so entries that are themselves near zero are
/// measured against the floor instead of their own size.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(REL_ERR_FLOOR);
    (a - b).abs() / scale
}

/// Central-difference gradient of `f` at `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let plus = f(&probe);
            probe[i] = x[i] - step;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOutcome {
    pub max_rel_err: f64,
    /// Number of scalar derivatives compared.
    pub entries: usize,
    /// False if any analytic or numeric derivative was NaN/Inf.
    pub finite: bool,
}

/// A random fusion instance: operator, inputs and upstream gradient.
pub struct Instance {
    pub params: FusionParams,
    pub q: Tensor,
    pub v: Tensor,
    pub upstream: Tensor,
}

/// Random small instance for `kind`, fully determined by `seed`.
///
/// Elementwise: n ≤ 8. MCB: n ≤ 8, d ≤ 16. MUTAN: every dimension ≤ 4.
pub fn random_instance(kind: FusionKind, seed: u64) -> Result<Instance> {
    let mut rng = Rng::new(seed);
    let (params, n_q, n_v, out) = match kind {
        FusionKind::Elementwise => {
            let n = rng.index(8);
            (FusionParams::Elementwise, n, n, n)
        }
        FusionKind::Mcb => {
            let n = rng.index(8);
            let d = rng.index(16);
            let master = rng.next_u64();
            let cfg = McbConfig::from_master_seed(n, d, master)?;
            (FusionParams::Mcb(cfg), n, n, d)
        }
        FusionKind::Mutan => {
            let dims = MutanDims {
                n_q: rng.index(4),
                n_v: rng.index(4),
                t_q: rng.index(4),
                t_v: rng.index(4),
                t_o: rng.index(4),
                rank: rng.index(4),
            };
            let mut p = init_mutan(&mut rng, dims)?;
            // non-zero biases so their gradients are exercised
            let bq = rng.gaussian(dims.t_q, 0.5)?;
            let bv = rng.gaussian(dims.t_v, 0.5)?;
            *p.tensors_mut()[1] = bq;
            *p.tensors_mut()[3] = bv;
            (FusionParams::Mutan(p), dims.n_q, dims.n_v, dims.t_o)
        }
    };
    Ok(Instance {
        params,
        q: rng.gaussian(n_q, 1.0)?,
        v: rng.gaussian(n_v, 1.0)?,
        upstream: rng.gaussian(out, 1.0)?,
    })
}

/// Compares `fusion_vjp` with central differences of `⟨upstream, forward⟩`
/// over every input coordinate and every learnable scalar.
pub fn check_instance(inst: &Instance) -> Result<GradCheckOutcome> {
    let analytic = fusion_vjp(&inst.params, &inst.q, &inst.v, &inst.upstream)?;

    // Flatten (q, v, params...) into one vector and rebuild on each probe.
    let mut flat: Vec<f64> = inst.q.data().to_vec();
    flat.extend_from_slice(inst.v.data());
    for t in inst.params.tensors() {
        flat.extend_from_slice(t.data());
    }
    let mut expected: Vec<f64> = analytic.grad_q.data().to_vec();
    expected.extend_from_slice(analytic.grad_v.data());
    for g in &analytic.params {
        expected.extend_from_slice(g.data());
    }

    let objective = |x: &[f64]| -> f64 {
        let (q, v, params) = unflatten(inst, x);
        params
            .forward(&q, &v)
            .and_then(|y| y.dot(&inst.upstream))
            .unwrap_or(f64::NAN)
    };
    let numeric = central_diff(objective, &flat, FD_STEP);

    let finite = expected.iter().chain(&numeric).all(|x| x.is_finite());
    let max_rel_err = expected
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max);
    Ok(GradCheckOutcome {
        max_rel_err,
        entries: expected.len(),
        finite,
    })
}

fn unflatten(inst: &Instance, x: &[f64]) -> (Tensor, Tensor, FusionParams) {
    let (nq, nv) = (inst.q.len(), inst.v.len());
    let q = Tensor::vector(x[..nq].to_vec());
    let v = Tensor::vector(x[nq..nq + nv].to_vec());
    let mut params = inst.params.clone();
    let mut offset = nq + nv;
    for t in params.tensors_mut() {
        let len = t.len();
        t.data_mut().copy_from_slice(&x[offset..offset + len]);
        offset += len;
    }
    (q, v, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_on_quadratic() {
        let g = central_diff(|x| x[0] * x[0] + 3.0 * x[0] * x[1], &[2.0, -1.0], FD_STEP);
        assert!((g[0] - 1.0).abs() < 1e-8);
        assert!((g[1] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn rel_err_uses_floor_near_zero() {
        assert_eq!(rel_err(1e-9, 0.0), 1e-9 / REL_ERR_FLOOR);
        assert!((rel_err(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn a_few_instances_pass() {
        for kind in FusionKind::ALL {
            for seed in 0..5 {
                let out = check_instance(&random_instance(kind, seed).unwrap()).unwrap();
                assert!(out.finite);
                assert!(out.max_rel_err < MAX_REL_ERR, "{kind} seed {seed}: {out:?}");
            }
        }
    }
}
