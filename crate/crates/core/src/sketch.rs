//! Count Sketch projections and the explicit outer-product sketch used to
//! verify compact bilinear pooling.
//!
//! A sketch maps `x ∈ ℝⁿ` to `y ∈ ℝᵈ` with `y[k] = Σ_{i : h_i = k} s_i·x_i`,
//! where `s ∈ {-1, +1}ⁿ` and `h ∈ [1, d]ⁿ` are drawn once and never change.
//! Buckets are stored 1-based and shifted only inside the kernels.
//!
//! Text format (see `docs/formats.md`):
//!
//! ```text
//! <n> <d> <seed>
//! <s_1> ... <s_n>      each +1 or -1, written as `1` / `-1`
//! <h_1> ... <h_n>      each in 1..=d
//! ```

use std::fmt::Write as _;

use crate::container::LineReader;
use crate::error::{Error, Result};
use crate::numtensor::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchSpec {
    n: usize,
    d: usize,
    signs: Vec<i8>,
    buckets: Vec<usize>,
    seed: u64,
}

impl SketchSpec {
    /// Draws signs then buckets from `rng`; the sketch records `rng.seed()`.
    pub fn generate(n: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Parameter(format!(
                "sketch dimensions must be >= 1, got n={n} d={d}"
            )));
        }
        let signs = rng.uniform_signs(n)?;
        let buckets = rng.uniform_indices(n, d)?;
        Ok(Self {
            n,
            d,
            signs,
            buckets,
            seed: rng.seed(),
        })
    }

    /// Sketch drawn from a fresh stream, so `seed` alone reproduces it.
    pub fn from_seed(n: usize, d: usize, seed: u64) -> Result<Self> {
        Self::generate(n, d, &mut Rng::new(seed))
    }

    pub fn from_parts(d: usize, signs: Vec<i8>, buckets: Vec<usize>, seed: u64) -> Result<Self> {
        let n = signs.len();
        if n == 0 || d == 0 {
            return Err(Error::Parameter("sketch dimensions must be >= 1".into()));
        }
        if buckets.len() != n {
            return Err(Error::dim("SketchSpec", &[n], &[buckets.len()]));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Parameter(format!("sketch sign {s} is not +1/-1")));
        }
        if let Some(h) = buckets.iter().find(|&&h| h == 0 || h > d) {
            return Err(Error::Parameter(format!("sketch bucket {h} outside [1, {d}]")));
        }
        Ok(Self {
            n,
            d,
            signs,
            buckets,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// 1-based bucket of each input coordinate.
    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != [self.n] {
            return Err(Error::dim("apply_sketch", &[self.n], x.shape()));
        }
        let mut y = vec![0.0; self.d];
        for ((&xi, &s), &h) in x.data().iter().zip(&self.signs).zip(&self.buckets) {
            y[h - 1] += f64::from(s) * xi;
        }
        Ok(Tensor::vector(y))
    }

    /// Adjoint map `ℝᵈ → ℝⁿ`: `x[i] = s_i · y[h_i]`.
    pub fn apply_transpose(&self, y: &Tensor) -> Result<Tensor> {
        if y.shape() != [self.d] {
            return Err(Error::dim("apply_sketch_transpose", &[self.d], y.shape()));
        }
        let yd = y.data();
        Ok(Tensor::vector(
            self.signs
                .iter()
                .zip(&self.buckets)
                .map(|(&s, &h)| f64::from(s) * yd[h - 1])
                .collect(),
        ))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.d, self.seed);
        write_ints(&mut out, self.signs.iter());
        write_ints(&mut out, self.buckets.iter());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        let spec = Self::read(&mut r)?;
        if let Some((line, _)) = r.peek() {
            return Err(Error::parse(line, "trailing content after sketch"));
        }
        Ok(spec)
    }

    pub(crate) fn read(r: &mut LineReader<'_>) -> Result<Self> {
        let (line_no, header) = r.next_line()?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::parse(line_no, format!("expected `n d seed`, found `{header}`"));
        if toks.len() != 3 {
            return Err(bad());
        }
        let n: usize = toks[0].parse().map_err(|_| bad())?;
        let d: usize = toks[1].parse().map_err(|_| bad())?;
        let seed: u64 = toks[2].parse().map_err(|_| bad())?;
        if n == 0 || d == 0 {
            return Err(Error::parse(line_no, "sketch dimensions must be >= 1"));
        }
        let sign_line = r.peek().map_or(line_no + 1, |(l, _)| l);
        let signs = r.read_values::<i8>(n)?;
        let buckets = r.read_values::<usize>(n)?;
        Self::from_parts(d, signs, buckets, seed).map_err(|e| Error::parse(sign_line, e.to_string()))
    }
}

fn write_ints<T: std::fmt::Display>(out: &mut String, xs: impl Iterator<Item = T>) {
    let mut first = true;
    for x in xs {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

/// Sketch of the explicit outer product `q vᵀ` under the product sketch
/// `s(i,j) = s_q[i]·s_v[j]`, `h(i,j) = ((h_q[i]-1 + h_v[j]-1) mod d) + 1`.
///
/// This materializes all n_q·n_v products and is only meant as a reference.
pub fn outer_sketch_oracle(
    spec_q: &SketchSpec,
    spec_v: &SketchSpec,
    q: &Tensor,
    v: &Tensor,
) -> Result<Tensor> {
    if spec_q.d != spec_v.d {
        return Err(Error::Parameter(format!(
            "sketch output dims differ: {} vs {}",
            spec_q.d, spec_v.d
        )));
    }
    if q.shape() != [spec_q.n] {
        return Err(Error::dim("outer_sketch_oracle q", &[spec_q.n], q.shape()));
    }
    if v.shape() != [spec_v.n] {
        return Err(Error::dim("outer_sketch_oracle v", &[spec_v.n], v.shape()));
    }
    let d = spec_q.d;
    let mut out = vec![0.0; d];
    for i in 0..spec_q.n {
        for j in 0..spec_v.n {
            let sign = f64::from(spec_q.signs[i] * spec_v.signs[j]);
            let bucket = (spec_q.buckets[i] - 1 + spec_v.buckets[j] - 1) % d;
            out[bucket] += sign * q.data()[i] * v.data()[j];
        }
    }
    Ok(Tensor::vector(out))
}
