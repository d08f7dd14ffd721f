use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::numtensor::{Rng, Tensor};
use crate::vqahead::{argmax, cross_entropy, ModelParams};

use super::task::{Sample, SynthDataset};

/// Minibatch optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seeds the shuffling stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: lr 1e-3, batch 32, 100 epochs.
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 32,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-size schedule: lr 1e-5, batch 70, 150 epochs.
    pub fn paper_defaults() -> Self {
        Self {
            lr: 1e-5,
            batch: 70,
            epochs: 150,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("batch and epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Tensor>,
    u: Vec<Tensor>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            step: 0,
            m: Vec::new(),
            u: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// One update of every parameter from its gradient.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::dim("Adam::step", &[params.len()], &[grads.len()]));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
            self.u = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), u) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.u) {
            if p.shape() != g.shape() || m.shape() != g.shape() {
                return Err(Error::dim("Adam::step", p.shape(), g.shape()));
            }
            let (m, u) = (m.data_mut(), u.data_mut());
            for (i, (theta, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                u[i] = self.beta2 * u[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let u_hat = u[i] / c2;
                *theta -= self.lr * m_hat / (u_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Anything that maps a (question, image) pair to class logits.
pub trait Classifier {
    fn logits(&self, q: &Tensor, v: &Tensor) -> Result<Tensor>;
}

impl Classifier for ModelParams {
    fn logits(&self, q: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.forward(v, q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy, mean cross-entropy and confusion counts; predictions are the
/// argmax of the logits with ties going to the lowest class.
pub fn evaluate(model: &impl Classifier, samples: &[Sample], classes: usize) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Parameter("cannot evaluate an empty partition".into()));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut loss = 0.0;
    for s in samples {
        let logits = model.logits(&s.q, &s.v)?;
        if logits.len() != classes {
            return Err(Error::dim("evaluate", &[classes], logits.shape()));
        }
        loss += cross_entropy(&logits, s.label)?.0;
        confusion[s.label][argmax(logits.data())] += 1;
    }
    let correct: usize = (0..classes).map(|k| confusion[k][k]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / samples.len() as f64,
        mean_loss: loss / samples.len() as f64,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Epoch 0 is the untrained model; epoch `e` is measured after `e` passes.
    pub epochs: Vec<EpochStats>,
    /// Test-set confusion after the last epoch.
    pub confusion: Vec<Vec<usize>>,
    pub wall_time: Duration,
    pub seed: u64,
    pub spec_echo: String,
}

pub const EPOCHS_CSV_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc";

impl TrainReport {
    pub fn final_epoch(&self) -> &EpochStats {
        self.epochs.last().expect("at least epoch 0")
    }

    /// Per-epoch CSV. Floats use shortest round-trip formatting.
    pub fn epochs_csv(&self) -> String {
        let mut out = format!("{EPOCHS_CSV_HEADER}\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.train_loss, e.train_acc, e.test_loss, e.test_acc
            );
        }
        out
    }

    /// `true\predicted` header then one row per true class.
    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.len();
        let mut out = String::from("true");
        for j in 0..k {
            let _ = write!(out, ",pred_{j}");
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{i}");
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    /// True when everything except wall time matches.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        self.epochs == other.epochs
            && self.confusion == other.confusion
            && self.seed == other.seed
            && self.spec_echo == other.spec_echo
    }
}

fn check_dims(model: &ModelParams, data: &SynthDataset) -> Result<()> {
    let (m, t) = (model.spec(), &data.spec);
    if m.n_txt != t.n_q || m.n_img != t.n_v || m.classes != t.classes {
        return Err(Error::Config(format!(
            "model (n_txt={}, n_img={}, classes={}) does not fit task (n_q={}, n_v={}, classes={})",
            m.n_txt, m.n_img, m.classes, t.n_q, t.n_v, t.classes
        )));
    }
    Ok(())
}

fn measure(model: &ModelParams, data: &SynthDataset, epoch: usize) -> Result<(EpochStats, Vec<Vec<usize>>)> {
    let k = data.spec.classes;
    let train = evaluate(model, &data.train, k)?;
    let test = evaluate(model, &data.test, k)?;
    if !train.mean_loss.is_finite() || !test.mean_loss.is_finite() {
        return Err(Error::Divergence { epoch });
    }
    Ok((
        EpochStats {
            epoch,
            train_loss: train.mean_loss,
            train_acc: train.accuracy,
            test_loss: test.mean_loss,
            test_acc: test.accuracy,
        },
        test.confusion,
    ))
}

/// Minibatch Adam on mean cross-entropy. Batches follow a fresh permutation
/// of the training set each epoch, drawn from `cfg.seed`; gradients within a
/// batch are summed in sample order.
pub fn train(model: &mut ModelParams, data: &SynthDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_dims(model, data)?;
    let start = Instant::now();
    let mut shuffle = Rng::new(cfg.seed);
    let mut adam = Adam::new(cfg);
    let (first, mut confusion) = measure(model, data, 0)?;
    let mut epochs = vec![first];
    for epoch in 1..=cfg.epochs {
        let order = shuffle.permutation(data.train.len());
        for batch in order.chunks(cfg.batch) {
            let mut acc: Option<Vec<Tensor>> = None;
            for &i in batch {
                let s = &data.train[i];
                let (loss, grads) = model.loss_and_grad(&s.v, &s.q, s.label)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(sum) => {
                        for (a, g) in sum.iter_mut().zip(&grads) {
                            a.add_scaled(1.0, g)?;
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<Tensor> = acc.expect("non-empty batch").iter().map(|g| g.scale(scale)).collect();
            adam.step(model.tensors_mut(), &grads)?;
        }
        let (stats, conf) = measure(model, data, epoch)?;
        epochs.push(stats);
        confusion = conf;
    }
    Ok(TrainReport {
        epochs,
        confusion,
        wall_time: start.elapsed(),
        seed: cfg.seed,
        spec_echo: format!("{:?}", model.spec()),
    })
}
