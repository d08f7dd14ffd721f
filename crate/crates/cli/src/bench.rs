//! `bench`: median wall time of one fusion forward call.
//!
//! Each configuration gets `max(1, iters / 10)` untimed warm-up calls, then
//! `iters` calls timed one by one with a monotonic clock; the median is
//! reported. MCB is timed in both convolution modes after checking that the
//! two agree.

use std::hint::black_box;
use std::time::Instant;

use fusionbench_core::fusion::{fuse_elementwise, fuse_mcb, fuse_mutan, init_mutan, FusionKind, McbConfig, MutanDims};
use fusionbench_core::numtensor::{ConvMode, Rng, Tensor};

use crate::error::{CliError, CliResult};

pub const BENCH_CSV_HEADER: [&str; 4] = ["fusion", "dim", "mode", "ns_per_call"];

/// Largest allowed disagreement between the MCB convolution modes, relative
/// to the output's magnitude.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub kinds: Vec<FusionKind>,
    pub dims: Vec<usize>,
    pub iters: usize,
    /// Sketch size; defaults to the input dimension.
    pub mcb_d: Option<usize>,
    pub mutan_t: usize,
    pub mutan_t_o: usize,
    pub mutan_rank: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub fusion: FusionKind,
    pub dim: usize,
    pub mode: &'static str,
    pub ns_per_call: u128,
}

pub fn median_ns(iters: usize, mut f: impl FnMut()) -> u128 {
    for _ in 0..(iters / 10).max(1) {
        f();
    }
    let mut samples: Vec<u128> = (0..iters)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_nanos()
        })
        .collect();
    samples.sort_unstable();
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    }
}

/// Errors unless `a` and `b` agree to [`CROSS_CHECK_TOL`].
pub fn cross_check(what: &str, a: &Tensor, b: &Tensor) -> CliResult<()> {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    let diff = a.sub(b)?.max_abs();
    if diff.is_nan() || diff > CROSS_CHECK_TOL * scale {
        return Err(CliError::Failure(format!(
            "{what}: modes disagree by {diff:e} (scale {scale:e}), refusing to time"
        )));
    }
    Ok(())
}

pub fn run(opts: &BenchOptions) -> CliResult<Vec<BenchRow>> {
    if opts.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    if opts.dims.is_empty() || opts.dims.contains(&0) {
        return Err(CliError::Usage("--dims must list sizes >= 1".into()));
    }
    let mut rng = Rng::new(opts.seed);
    let mut rows = Vec::new();
    for &kind in &opts.kinds {
        for &dim in &opts.dims {
            let q = rng.gaussian(dim, 1.0)?;
            let v = rng.gaussian(dim, 1.0)?;
            match kind {
                FusionKind::Elementwise => {
                    let ns = median_ns(opts.iters, || {
                        black_box(fuse_elementwise(black_box(&q), black_box(&v)).ok());
                    });
                    rows.push(BenchRow { fusion: kind, dim, mode: "default", ns_per_call: ns });
                }
                FusionKind::Mcb => {
                    let d = opts.mcb_d.unwrap_or(dim);
                    let cfg = McbConfig::from_master_seed(dim, d, rng.next_u64())?;
                    let direct = fuse_mcb(&cfg, &q, &v, ConvMode::Direct)?;
                    let freq = fuse_mcb(&cfg, &q, &v, ConvMode::Frequency)?;
                    cross_check(&format!("mcb dim {dim} d {d}"), &direct, &freq)?;
                    for mode in [ConvMode::Direct, ConvMode::Frequency] {
                        let ns = median_ns(opts.iters, || {
                            black_box(fuse_mcb(&cfg, black_box(&q), black_box(&v), mode).ok());
                        });
                        rows.push(BenchRow { fusion: kind, dim, mode: mode.as_str(), ns_per_call: ns });
                    }
                }
                FusionKind::Mutan => {
                    let dims = MutanDims {
                        n_q: dim,
                        n_v: dim,
                        t_q: opts.mutan_t,
                        t_v: opts.mutan_t,
                        t_o: opts.mutan_t_o,
                        rank: opts.mutan_rank,
                    };
                    let p = init_mutan(&mut rng, dims)?;
                    let ns = median_ns(opts.iters, || {
                        black_box(fuse_mutan(&p, black_box(&q), black_box(&v)).ok());
                    });
                    rows.push(BenchRow { fusion: kind, dim, mode: "default", ns_per_call: ns });
                }
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_CSV_HEADER)?;
    for r in rows {
        w.write_record([r.fusion.as_str(), &r.dim.to_string(), r.mode, &r.ns_per_call.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disagreement_refuses_to_time() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![1.0, 2.0 + 1e-6]);
        assert_eq!(cross_check("x", &a, &b).unwrap_err().exit_code(), 1);
        assert!(cross_check("x", &a, &a).is_ok());
    }

    #[test]
    fn median_of_odd_and_even_counts() {
        let mut calls = 0;
        median_ns(5, || calls += 1);
        assert_eq!(calls, 6);
    }
}
