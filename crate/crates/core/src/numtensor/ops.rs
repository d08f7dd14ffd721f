use super::Tensor;
use crate::error::{Error, Result};

/// Affine map `W x + b` for `W: [m, n]`, `x: [n]`, `b: [m]`.
pub fn matvec(w: &Tensor, x: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (m, n) = w.dims2()?;
    if x.shape() != [n] {
        return Err(Error::dim("matvec", w.shape(), x.shape()));
    }
    if let Some(b) = b {
        if b.shape() != [m] {
            return Err(Error::dim("matvec bias", w.shape(), b.shape()));
        }
    }
    let xs = x.data();
    let out = (0..m)
        .map(|i| {
            let acc: f64 = w.row(i).iter().zip(xs).map(|(a, b)| a * b).sum();
            acc + b.map_or(0.0, |b| b.data()[i])
        })
        .collect();
    Ok(Tensor::vector(out))
}

/// Row-vector product `xᵀ W` for `x: [m]`, `W: [m, n]`, optionally plus `b: [n]`.
pub fn vecmat(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (m, n) = w.dims2()?;
    if x.shape() != [m] {
        return Err(Error::dim("vecmat", x.shape(), w.shape()));
    }
    let mut out = match b {
        Some(b) if b.shape() == [n] => b.data().to_vec(),
        Some(b) => return Err(Error::dim("vecmat bias", w.shape(), b.shape())),
        None => vec![0.0; n],
    };
    for (i, &xi) in x.data().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (o, wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
    Ok(Tensor::vector(out))
}

/// Outer product `a bᵀ` as an `[len(a), len(b)]` matrix.
pub fn outer(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 1 || b.rank() != 1 {
        return Err(Error::dim("outer", a.shape(), b.shape()));
    }
    let data = a
        .data()
        .iter()
        .flat_map(|&x| b.data().iter().map(move |&y| x * y))
        .collect();
    Tensor::matrix(a.len(), b.len(), data)
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_with(b, "hadamard", |x, y| x * y)
}

pub fn tanh_map(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}
