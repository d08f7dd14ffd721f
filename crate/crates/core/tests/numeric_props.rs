use fusionbench_core::numtensor::{circular_convolve, circular_correlate, hadamard, matvec, ConvMode, Rng, Tensor};
use fusionbench_core::sketch::{outer_sketch_oracle, SketchSpec};
use proptest::prelude::*;

fn close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
    a.shape() == b.shape()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matvec_is_linear(
        (rows, cols, w, x, y) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), vec_of(r * c), vec_of(c), vec_of(c))
        }),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let w = Tensor::matrix(rows, cols, w).unwrap();
        let (x, y) = (Tensor::vector(x), Tensor::vector(y));
        let mut combo = x.scale(alpha);
        combo.add_scaled(beta, &y).unwrap();
        let lhs = matvec(&w, &combo, None).unwrap();
        let mut rhs = matvec(&w, &x, None).unwrap().scale(alpha);
        rhs.add_scaled(beta, &matvec(&w, &y, None).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn hadamard_commutes_and_associates(
        (a, b, c) in (1usize..10).prop_flat_map(|n| (vec_of(n), vec_of(n), vec_of(n)))
    ) {
        let (a, b, c) = (Tensor::vector(a), Tensor::vector(b), Tensor::vector(c));
        prop_assert_eq!(hadamard(&a, &b).unwrap(), hadamard(&b, &a).unwrap());
        let left = hadamard(&hadamard(&a, &b).unwrap(), &c).unwrap();
        let right = hadamard(&a, &hadamard(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-14));
    }

    #[test]
    fn sketch_is_linear(
        (n, x, y) in (1usize..12).prop_flat_map(|n| (Just(n), vec_of(n), vec_of(n))),
        d in 1usize..20,
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
    ) {
        let s = SketchSpec::from_seed(n, d, seed).unwrap();
        let (x, y) = (Tensor::vector(x), Tensor::vector(y));
        let mut combo = x.scale(alpha);
        combo.add_scaled(1.0, &y).unwrap();
        let mut rhs = s.apply(&x).unwrap().scale(alpha);
        rhs.add_scaled(1.0, &s.apply(&y).unwrap()).unwrap();
        prop_assert!(close(&s.apply(&combo).unwrap(), &rhs, 1e-12));
    }

    #[test]
    fn sketch_transpose_is_adjoint(
        (n, x) in (1usize..12).prop_flat_map(|n| (Just(n), vec_of(n))),
        (d, y) in (1usize..20).prop_flat_map(|d| (Just(d), vec_of(d))),
        seed in any::<u64>(),
    ) {
        let s = SketchSpec::from_seed(n, d, seed).unwrap();
        let (x, y) = (Tensor::vector(x), Tensor::vector(y));
        let lhs = s.apply(&x).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&s.apply_transpose(&y).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}

#[test]
fn direct_and_frequency_convolution_agree() {
    let mut rng = Rng::new(11);
    for trial in 0..200 {
        let d = rng.index(200);
        let a = rng.gaussian(d, 1.0).unwrap();
        let b = rng.gaussian(d, 1.0).unwrap();
        let direct = circular_convolve(&a, &b, ConvMode::Direct).unwrap();
        let freq = circular_convolve(&a, &b, ConvMode::Frequency).unwrap();
        assert!(close(&direct, &freq, 1e-10), "trial {trial}, d = {d}");
        let cd = circular_correlate(&a, &b, ConvMode::Direct).unwrap();
        let cf = circular_correlate(&a, &b, ConvMode::Frequency).unwrap();
        assert!(close(&cd, &cf, 1e-10), "correlation trial {trial}, d = {d}");
    }
}

#[test]
fn convolution_of_sketches_is_sketch_of_outer_product() {
    let mut rng = Rng::new(5);
    for trial in 0..500 {
        let n = rng.index(16);
        let d = rng.index(32);
        let sq = SketchSpec::generate(n, d, &mut rng).unwrap();
        let sv = SketchSpec::generate(n, d, &mut rng).unwrap();
        let q = rng.gaussian(n, 1.0).unwrap();
        let v = rng.gaussian(n, 1.0).unwrap();
        let oracle = outer_sketch_oracle(&sq, &sv, &q, &v).unwrap();
        for mode in [ConvMode::Direct, ConvMode::Frequency] {
            let fast = circular_convolve(&sq.apply(&q).unwrap(), &sv.apply(&v).unwrap(), mode).unwrap();
            assert!(close(&fast, &oracle, 1e-10), "trial {trial} n={n} d={d} {mode}");
        }
    }
}

#[test]
fn mismatched_lengths_are_errors() {
    let a = Tensor::vector(vec![1.0, 2.0]);
    let b = Tensor::vector(vec![1.0, 2.0, 3.0]);
    assert!(hadamard(&a, &b).is_err());
    assert!(circular_convolve(&a, &b, ConvMode::Direct).is_err());
    assert!(circular_convolve(&a, &b, ConvMode::Frequency).is_err());
}
