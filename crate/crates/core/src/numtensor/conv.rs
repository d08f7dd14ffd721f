use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Tensor;
use crate::error::{Error, Result};

/// Evaluation path for circular convolution.
///
/// `Direct` is the O(d²) definition and serves as the reference; `Frequency`
/// multiplies spectra and is exact up to floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvMode {
    Direct,
    Frequency,
}

impl ConvMode {
    /// Below this length the direct sum is used by default.
    pub const FREQUENCY_THRESHOLD: usize = 64;

    pub fn for_len(d: usize) -> Self {
        if d < Self::FREQUENCY_THRESHOLD {
            ConvMode::Direct
        } else {
            ConvMode::Frequency
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConvMode::Direct => "direct",
            ConvMode::Frequency => "frequency",
        }
    }
}

impl fmt::Display for ConvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ConvMode::Direct),
            "frequency" => Ok(ConvMode::Frequency),
            other => Err(Error::Parameter(format!(
                "unknown convolution mode `{other}` (expected direct|frequency)"
            ))),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// `out[k] = Σ_j a[j] · b[(k - j) mod d]`.
pub fn circular_convolve(a: &Tensor, b: &Tensor, mode: ConvMode) -> Result<Tensor> {
    check_pair("circular_convolve", a, b)?;
    let out = match mode {
        ConvMode::Direct => direct(a.data(), b.data(), false),
        ConvMode::Frequency => spectral(a.data(), b.data(), false),
    };
    Ok(Tensor::vector(out))
}

/// `out[j] = Σ_k a[k] · b[(k - j) mod d]`, the adjoint of convolving with `b`.
pub fn circular_correlate(a: &Tensor, b: &Tensor, mode: ConvMode) -> Result<Tensor> {
    check_pair("circular_correlate", a, b)?;
    let out = match mode {
        ConvMode::Direct => direct(a.data(), b.data(), true),
        ConvMode::Frequency => spectral(a.data(), b.data(), true),
    };
    Ok(Tensor::vector(out))
}

fn check_pair(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rank() != 1 || a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn direct(a: &[f64], b: &[f64], correlate: bool) -> Vec<f64> {
    let d = a.len();
    let mut out = vec![0.0; d];
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        for (m, &bm) in b.iter().enumerate() {
            // convolution: k = j + m; correlation: out index = j - m
            let k = if correlate { (j + d - m) % d } else { (j + m) % d };
            out[k] += aj * bm;
        }
    }
    out
}

fn spectral(a: &[f64], b: &[f64], correlate: bool) -> Vec<f64> {
    let d = a.len();
    let to_complex = |xs: &[f64]| -> Vec<Complex<f64>> {
        xs.iter().map(|&x| Complex::new(x, 0.0)).collect()
    };
    let mut fa = to_complex(a);
    let mut fb = to_complex(b);
    let (forward, inverse) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(d), p.plan_fft_inverse(d))
    });
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= if correlate { y.conj() } else { *y };
    }
    inverse.process(&mut fa);
    let norm = 1.0 / d as f64;
    fa.iter().map(|c| c.re * norm).collect()
}
