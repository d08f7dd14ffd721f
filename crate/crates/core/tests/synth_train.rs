use fusionbench_core::numtensor::{Rng, Tensor};
use fusionbench_core::synth::{
    class_scores, elementwise_loss_floor, evaluate, gen_task, train, Classifier, SynthDataset, SynthTaskSpec,
    TaskKind, TrainConfig,
};
use fusionbench_core::vqahead::{build_model, FusionSpec, ModelSpec};
use fusionbench_core::{Error, Result};

fn task(kind: TaskKind, n: usize, classes: usize, rank: usize, seed: u64) -> SynthDataset {
    gen_task(&SynthTaskSpec {
        kind,
        n_q: n,
        n_v: n,
        classes,
        rank,
        n_train: 200,
        n_test: 100,
        noise_sigma: 0.0,
        margin: 0.0,
        seed,
    })
    .unwrap()
}

struct Constant(usize);

impl Classifier for Constant {
    fn logits(&self, _q: &Tensor, _v: &Tensor) -> Result<Tensor> {
        let mut l = vec![0.0; self.0];
        l[0] = 1.0;
        Ok(Tensor::vector(l))
    }
}

struct Oracle(Vec<Tensor>);

impl Classifier for Oracle {
    fn logits(&self, q: &Tensor, v: &Tensor) -> Result<Tensor> {
        Ok(Tensor::vector(class_scores(&self.0, q, v)?))
    }
}

#[test]
fn constant_predictor_scores_class_frequency() {
    let data = task(TaskKind::Random, 4, 3, 2, 1);
    let ev = evaluate(&Constant(3), &data.test, 3).unwrap();
    let zeros = data.test.iter().filter(|s| s.label == 0).count();
    assert_eq!(ev.accuracy, zeros as f64 / data.test.len() as f64);
    for row in &ev.confusion {
        assert_eq!(row[1] + row[2], 0);
    }
}

#[test]
fn oracle_predictor_is_perfect_on_clean_data() {
    let data = task(TaskKind::Random, 5, 4, 3, 2);
    let ev = evaluate(&Oracle(data.scorers.clone()), &data.train, 4).unwrap();
    assert_eq!(ev.accuracy, 1.0);
}

#[test]
fn accuracy_is_confusion_trace_over_total() {
    let data = task(TaskKind::Random, 4, 3, 1, 3);
    let model = build_model(
        &ModelSpec::new(4, 4, Some(3), FusionSpec::Elementwise, 5, 3),
        &mut Rng::new(0),
    )
    .unwrap();
    let ev = evaluate(&model, &data.test, 3).unwrap();
    let total: usize = ev.confusion.iter().flatten().sum();
    let trace: usize = (0..3).map(|k| ev.confusion[k][k]).sum();
    assert_eq!(total, data.test.len());
    assert_eq!(ev.accuracy, trace as f64 / total as f64);
    for k in 0..3 {
        let row: usize = ev.confusion[k].iter().sum();
        assert_eq!(row, data.test.iter().filter(|s| s.label == k).count());
    }
}

#[test]
fn empty_partition_is_a_parameter_error() {
    assert!(matches!(evaluate(&Constant(2), &[], 2), Err(Error::Parameter(_))));
}

#[test]
fn zero_learning_rate_leaves_model_untouched() {
    let data = task(TaskKind::Random, 3, 2, 1, 4);
    let spec = ModelSpec::new(3, 3, None, FusionSpec::Mutan { t_q: 2, t_v: 2, t_o: 3, rank: 2 }, 4, 2);
    let mut model = build_model(&spec, &mut Rng::new(1)).unwrap();
    let before = model.clone();
    let cfg = TrainConfig { lr: 0.0, epochs: 3, batch: 16, ..TrainConfig::default() };
    let report = train(&mut model, &data, &cfg).unwrap();
    assert_eq!(model, before);
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn training_is_deterministic() {
    let data = task(TaskKind::Random, 4, 3, 2, 5);
    let spec = ModelSpec::new(4, 4, Some(3), FusionSpec::Mcb { d: 8, normalize: false }, 5, 3);
    let run = || {
        let mut model = build_model(&spec, &mut Rng::new(9)).unwrap();
        let cfg = TrainConfig { epochs: 5, seed: 42, ..TrainConfig::default() };
        let report = train(&mut model, &data, &cfg).unwrap();
        (model, report)
    };
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(m1, m2);
    assert!(r1.same_outcome(&r2));
    assert_eq!(r1.epochs_csv(), r2.epochs_csv());
    assert_eq!(r1.confusion_csv(), r2.confusion_csv());
    assert_eq!(r1.epochs.len(), 6);
}

#[test]
fn mismatched_model_is_a_config_error() {
    let data = task(TaskKind::Random, 4, 3, 2, 6);
    let spec = ModelSpec::new(5, 4, Some(3), FusionSpec::Elementwise, 5, 3);
    let mut model = build_model(&spec, &mut Rng::new(0)).unwrap();
    let err = train(&mut model, &data, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn exploding_updates_report_divergence() {
    let data = task(TaskKind::Random, 3, 2, 1, 7);
    let spec = ModelSpec::new(3, 3, Some(3), FusionSpec::Elementwise, 4, 2);
    let mut model = build_model(&spec, &mut Rng::new(0)).unwrap();
    let cfg = TrainConfig { lr: 1e300, epochs: 5, ..TrainConfig::default() };
    let err = train(&mut model, &data, &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch } if epoch >= 1), "{err}");
}

#[test]
fn mutan_fits_rank_two_task() {
    let data = task(TaskKind::Random, 6, 3, 2, 8);
    let spec = ModelSpec::new(6, 6, None, FusionSpec::Mutan { t_q: 6, t_v: 6, t_o: 8, rank: 4 }, 16, 3);
    let mut model = build_model(&spec, &mut Rng::new(3)).unwrap();
    let cfg = TrainConfig { lr: 1e-2, batch: 20, epochs: 200, seed: 1, ..TrainConfig::default() };
    let report = train(&mut model, &data, &cfg).unwrap();
    let last = report.final_epoch();
    assert!(last.train_acc >= 0.95, "train acc {}", last.train_acc);
}

#[test]
fn elementwise_head_cannot_cross_the_floor_but_mutan_can() {
    let data = gen_task(&SynthTaskSpec {
        kind: TaskKind::CrossIndex,
        n_q: 4,
        n_v: 4,
        classes: 2,
        rank: 1,
        n_train: 64,
        n_test: 64,
        noise_sigma: 0.0,
        margin: 0.5,
        seed: 7,
    })
    .unwrap();
    let floor = elementwise_loss_floor(&data.train).unwrap();
    assert!((floor - std::f64::consts::LN_2).abs() < 1e-12);
    let cfg = TrainConfig { lr: 1e-2, batch: 16, epochs: 200, seed: 0, ..TrainConfig::default() };

    let ew = ModelSpec::new(4, 4, None, FusionSpec::Elementwise, 8, 2);
    let mut model = build_model(&ew, &mut Rng::new(0)).unwrap();
    let report = train(&mut model, &data, &cfg).unwrap();
    for e in &report.epochs {
        assert!(e.train_loss >= floor - 1e-12, "epoch {}: {} < {floor}", e.epoch, e.train_loss);
    }

    let mutan = ModelSpec::new(4, 4, None, FusionSpec::Mutan { t_q: 4, t_v: 4, t_o: 8, rank: 2 }, 8, 2);
    let mut model = build_model(&mutan, &mut Rng::new(0)).unwrap();
    let report = train(&mut model, &data, &cfg).unwrap();
    assert!(report.final_epoch().train_loss < 1e-2, "{}", report.final_epoch().train_loss);
}
