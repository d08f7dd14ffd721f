//! Seeded, platform-independent random streams.
//!
//! The raw stream is ChaCha8 (`rand_chacha::ChaCha8Rng`) keyed by the 64-bit
//! seed written little-endian into the first 8 bytes of a 32-byte key, the
//! remaining 24 bytes zero. ChaCha is a counter-based cipher, so the stream is
//! a pure function of `(seed, word position)`. All derived draws are defined
//! here rather than through `rand` distributions so their bit patterns cannot
//! change with a dependency upgrade:
//!
//! * uniform `f64` in `[0, 1)`: `(next_u64 >> 11) · 2⁻⁵³`
//! * sign: `+1` if the top bit of `next_u64` is clear, else `-1`
//! * index in `[1, d]`: Lemire's multiply-shift with rejection (unbiased)
//! * Gaussian: Box–Muller on `u1 = 1 - uniform` (so `u1 ∈ (0, 1]`) and `u2 = uniform`,
//!   consuming two words per sample and using the cosine branch only.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            seed,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sign(&mut self) -> i8 {
        if self.next_u64() >> 63 == 0 {
            1
        } else {
            -1
        }
    }

    /// Uniform integer in `[1, d]`.
    pub fn index(&mut self, d: usize) -> usize {
        let range = d as u64;
        let threshold = range.wrapping_neg() % range;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(range);
            if (m as u64) >= threshold {
                return (m >> 64) as usize + 1;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn uniform_signs(&mut self, n: usize) -> Result<Vec<i8>> {
        check_count(n)?;
        Ok((0..n).map(|_| self.sign()).collect())
    }

    pub fn uniform_indices(&mut self, n: usize, d: usize) -> Result<Vec<usize>> {
        check_count(n)?;
        if d == 0 {
            return Err(Error::Parameter("index bound d must be >= 1".into()));
        }
        Ok((0..n).map(|_| self.index(d)).collect())
    }

    pub fn gaussian(&mut self, n: usize, sigma: f64) -> Result<Tensor> {
        check_count(n)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Tensor::vector(
            (0..n).map(|_| sigma * self.standard_normal()).collect(),
        ))
    }

    /// Gaussian tensor of arbitrary shape.
    pub fn gaussian_tensor(&mut self, shape: &[usize], sigma: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let flat = self.gaussian(n, sigma)?;
        Tensor::new(shape.to_vec(), flat.into_data())
    }

    /// Fisher–Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1) - 1;
            p.swap(i, j);
        }
        p
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("sample count n must be >= 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        assert_eq!(a.uniform_signs(64).unwrap(), b.uniform_signs(64).unwrap());
        assert_eq!(
            a.uniform_indices(64, 17).unwrap(),
            b.uniform_indices(64, 17).unwrap()
        );
        let ga = a.gaussian(32, 0.5).unwrap();
        let gb = b.gaussian(32, 0.5).unwrap();
        assert!(ga.data().iter().zip(gb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(Rng::new(1).next_u64(), Rng::new(2).next_u64());
    }

    #[test]
    fn degenerate_bound_yields_ones() {
        let mut rng = Rng::new(5);
        assert!(rng.uniform_indices(100, 1).unwrap().iter().all(|&i| i == 1));
    }

    #[test]
    fn invalid_bounds_rejected() {
        let mut rng = Rng::new(5);
        assert!(rng.uniform_signs(0).is_err());
        assert!(rng.uniform_indices(3, 0).is_err());
        assert!(rng.gaussian(3, 0.0).is_err());
        assert!(rng.gaussian(3, f64::NAN).is_err());
    }

    #[test]
    fn sign_mean_is_near_zero() {
        // 3 binomial standard errors at n = 1e5 is 0.0095; the bound doubles it.
        let signs = Rng::new(2024).uniform_signs(100_000).unwrap();
        let mean = signs.iter().map(|&s| f64::from(s)).sum::<f64>() / signs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn index_histogram_is_flat() {
        let d = 10;
        let n = 100_000;
        let mut hist = vec![0usize; d];
        for i in Rng::new(8).uniform_indices(n, d).unwrap() {
            assert!((1..=d).contains(&i));
            hist[i - 1] += 1;
        }
        let expect = (n / d) as f64;
        for h in hist {
            assert!((h as f64 - expect).abs() < 5.0 * expect.sqrt(), "{h}");
        }
    }

    #[test]
    fn gaussian_moments() {
        let g = Rng::new(3).gaussian(200_000, 2.0).unwrap();
        let n = g.len() as f64;
        let mean = g.data().iter().sum::<f64>() / n;
        let var = g.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = Rng::new(4).permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
