use fusionbench_core::numtensor::{Rng, Tensor};
use fusionbench_core::vqahead::{
    build_model, checkpoint_to_string, count_params, cross_entropy, load_model, save_model, FusionSpec, ModelSpec,
};
use fusionbench_core::Error;

fn random_spec(rng: &mut Rng) -> ModelSpec {
    let n_img = rng.index(9);
    let n_txt = rng.index(9);
    let proj = if rng.sign() > 0 { Some(rng.index(6)) } else { None };
    let equal = proj.is_some() || n_img == n_txt;
    let fusion = match rng.index(3) {
        1 if equal => FusionSpec::Elementwise,
        2 if equal => FusionSpec::Mcb { d: rng.index(20), normalize: rng.sign() > 0 },
        _ => FusionSpec::Mutan { t_q: rng.index(5), t_v: rng.index(5), t_o: rng.index(5), rank: rng.index(4) },
    };
    ModelSpec::new(n_img, n_txt, proj, fusion, rng.index(7), 1 + rng.index(5))
}

#[test]
fn analytic_count_equals_enumerated_tensors() {
    let mut rng = Rng::new(404);
    for trial in 0..50 {
        let spec = random_spec(&mut rng);
        let model = build_model(&spec, &mut Rng::new(trial)).unwrap();
        assert_eq!(
            count_params(&spec).unwrap().total(),
            model.enumerate_scalars(),
            "trial {trial}: {spec:?}"
        );
    }
}

#[test]
fn mcb_sweep_increments_are_exact() {
    let sweep = [1200, 4000, 8000, 16_000, 32_000];
    let totals: Vec<usize> = sweep
        .iter()
        .map(|&d| {
            let spec = ModelSpec::new(2048, 2400, Some(1200), FusionSpec::Mcb { d, normalize: false }, 256, 9);
            count_params(&spec).unwrap().total()
        })
        .collect();
    assert_eq!(totals, [5_649_769, 6_366_569, 7_390_569, 9_438_569, 13_534_569]);
    for (w, d) in totals.windows(2).zip(sweep.windows(2)) {
        assert_eq!(w[1] - w[0], (d[1] - d[0]) * 256);
    }
}

#[test]
fn mutan_low_resolution_total() {
    let spec = ModelSpec::new(2048, 2400, None, FusionSpec::Mutan { t_q: 310, t_v: 310, t_o: 360, rank: 13 }, 256, 9);
    let total = count_params(&spec).unwrap().total();
    assert_eq!(total, 4_375_829);
    assert!((total as f64 / 4.4e6 - 1.0).abs() < 0.03);
}

#[test]
fn invalid_specs_are_rejected() {
    let zero = ModelSpec::new(0, 4, Some(3), FusionSpec::Elementwise, 2, 2);
    assert!(matches!(count_params(&zero), Err(Error::Config(_))));
    let unequal = ModelSpec::new(3, 4, None, FusionSpec::Elementwise, 2, 2);
    assert!(matches!(build_model(&unequal, &mut Rng::new(0)), Err(Error::Config(_))));
}

// Cross-entropy gradient of the whole head against central differences over
// every learnable scalar.
#[test]
fn head_gradient_matches_finite_differences() {
    let specs = [
        ModelSpec::new(5, 4, Some(3), FusionSpec::Elementwise, 4, 3),
        ModelSpec::new(5, 4, Some(3), FusionSpec::Mcb { d: 7, normalize: false }, 4, 3),
        ModelSpec::new(5, 4, Some(3), FusionSpec::Mcb { d: 7, normalize: true }, 4, 3),
        ModelSpec::new(5, 4, None, FusionSpec::Mutan { t_q: 3, t_v: 2, t_o: 3, rank: 2 }, 4, 3),
    ];
    for (i, spec) in specs.iter().enumerate() {
        let mut rng = Rng::new(i as u64 + 10);
        let mut model = build_model(spec, &mut rng).unwrap();
        let img = rng.gaussian(5, 1.0).unwrap();
        let txt = rng.gaussian(4, 1.0).unwrap();
        let label = 1;
        let (_, grads) = model.loss_and_grad(&img, &txt, label).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (ti, g) in grads.iter().enumerate() {
            for k in 0..g.len() {
                let orig = model.tensors_mut()[ti].data()[k];
                let mut eval = |x: f64| {
                    model.tensors_mut()[ti].data_mut()[k] = x;
                    let logits = model.forward(&img, &txt).unwrap();
                    cross_entropy(&logits, label).unwrap().0
                };
                let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                eval(orig);
                let a = g.data()[k];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
            }
        }
        assert!(worst < 1e-4, "spec {i}: worst rel err {worst}");
    }
}

#[test]
fn cross_entropy_is_stable_for_large_logits() {
    let logits = Tensor::vector(vec![1000.0, 0.0, -1000.0]);
    let (loss, grad) = cross_entropy(&logits, 0).unwrap();
    assert!(loss.abs() < 1e-12);
    assert!(grad.is_finite());
    let (loss, _) = cross_entropy(&logits, 2).unwrap();
    assert!((loss - 2000.0).abs() < 1e-9);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (i, fusion) in [
        FusionSpec::Elementwise,
        FusionSpec::Mcb { d: 11, normalize: false },
        FusionSpec::Mutan { t_q: 2, t_v: 3, t_o: 4, rank: 3 },
    ]
    .into_iter()
    .enumerate()
    {
        let proj = if i == 2 { None } else { Some(5) };
        let spec = ModelSpec::new(6, 7, proj, fusion, 3, 4);
        let model = build_model(&spec, &mut Rng::new(31 + i as u64)).unwrap();
        let path = dir.path().join(format!("m{i}.ckpt"));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let img = Tensor::vector(vec![0.3; 6]);
        let txt = Tensor::vector(vec![-0.2; 7]);
        assert_eq!(back.forward(&img, &txt).unwrap(), model.forward(&img, &txt).unwrap());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), checkpoint_to_string(&model));
    }
}

#[test]
fn missing_checkpoint_names_the_path() {
    let err = load_model("/nonexistent/model.ckpt").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/model.ckpt"), "{err}");
}
