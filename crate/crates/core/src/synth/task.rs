use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::container::{write_tensor, write_values, LineReader};
use crate::error::{Error, Result};
use crate::numtensor::{matvec, Rng, Tensor};
use crate::vqahead::argmax;

/// How the class scorers `B_k` are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Each `B_k` is a sum of `rank` outer products of standard Gaussian vectors.
    Random,
    /// Two classes scored by `±q[0]·v[1]`. Samples come in mirrored pairs
    /// `(q, v)` / `(q', v')` that differ only in the sign of `q[0]` and `v[0]`:
    /// both pairs have the same element-wise product `q ⊙ v` but opposite
    /// labels.
    CrossIndex,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Random => "random",
            TaskKind::CrossIndex => "cross-index",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TaskKind::Random),
            "cross-index" => Ok(TaskKind::CrossIndex),
            other => Err(Error::Parameter(format!(
                "unknown task kind `{other}` (expected random|cross-index)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthTaskSpec {
    pub kind: TaskKind,
    pub n_q: usize,
    pub n_v: usize,
    pub classes: usize,
    pub rank: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of Gaussian noise added to each class score before the argmax.
    pub noise_sigma: f64,
    /// Samples whose two best clean scores differ by less than this are redrawn.
    pub margin: f64,
    pub seed: u64,
}

impl SynthTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_q == 0 || self.n_v == 0 {
            return Err(Error::Parameter("task dimensions must be >= 1".into()));
        }
        if self.classes < 2 {
            return Err(Error::Parameter(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Parameter("sample counts must be >= 1".into()));
        }
        if self.rank == 0 || self.rank > self.n_q.min(self.n_v) {
            return Err(Error::Parameter(format!(
                "rank {} must be in [1, min(n_q, n_v) = {}]",
                self.rank,
                self.n_q.min(self.n_v)
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Parameter("noise_sigma must be finite and >= 0".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Parameter("margin must be finite and >= 0".into()));
        }
        if self.kind == TaskKind::CrossIndex {
            if self.classes != 2 || self.rank != 1 {
                return Err(Error::Parameter("cross-index task has exactly 2 classes and rank 1".into()));
            }
            if self.n_v < 2 {
                return Err(Error::Parameter("cross-index task needs n_v >= 2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub q: Tensor,
    pub v: Tensor,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub spec: SynthTaskSpec,
    /// Ground-truth scorers `B_k: [n_q, n_v]`, one per class.
    pub scorers: Vec<Tensor>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Clean class scores `qᵀ B_k v`.
pub fn class_scores(scorers: &[Tensor], q: &Tensor, v: &Tensor) -> Result<Vec<f64>> {
    scorers
        .iter()
        .map(|b| q.dot(&matvec(b, v, None)?))
        .collect()
}

const MAX_REDRAWS: usize = 100_000;

pub fn gen_task(spec: &SynthTaskSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let scorers = match spec.kind {
        TaskKind::Random => (0..spec.classes)
            .map(|_| {
                let mut b = Tensor::zeros(&[spec.n_q, spec.n_v]);
                for _ in 0..spec.rank {
                    let a = rng.gaussian(spec.n_q, 1.0)?;
                    let c = rng.gaussian(spec.n_v, 1.0)?;
                    b.add_scaled(1.0, &crate::numtensor::outer(&a, &c)?)?;
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?,
        TaskKind::CrossIndex => {
            let mut b = Tensor::zeros(&[spec.n_q, spec.n_v]);
            b.data_mut()[1] = 1.0;
            vec![b.clone(), b.scale(-1.0)]
        }
    };
    let train = draw_samples(spec, &scorers, spec.n_train, &mut rng)?;
    let test = draw_samples(spec, &scorers, spec.n_test, &mut rng)?;
    Ok(SynthDataset {
        spec: *spec,
        scorers,
        train,
        test,
    })
}

fn draw_samples(spec: &SynthTaskSpec, scorers: &[Tensor], count: usize, rng: &mut Rng) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (q, v) = draw_pair(spec, scorers, rng)?;
        let label = noisy_label(spec, scorers, &q, &v, rng)?;
        if spec.kind == TaskKind::CrossIndex {
            let mut qm = q.clone();
            let mut vm = v.clone();
            qm.data_mut()[0] = -qm.data()[0];
            vm.data_mut()[0] = -vm.data()[0];
            out.push(Sample { q, v, label });
            if out.len() < count {
                let label = noisy_label(spec, scorers, &qm, &vm, rng)?;
                out.push(Sample { q: qm, v: vm, label });
            }
        } else {
            out.push(Sample { q, v, label });
        }
    }
    Ok(out)
}

fn draw_pair(spec: &SynthTaskSpec, scorers: &[Tensor], rng: &mut Rng) -> Result<(Tensor, Tensor)> {
    for _ in 0..MAX_REDRAWS {
        let q = rng.gaussian(spec.n_q, 1.0)?;
        let v = rng.gaussian(spec.n_v, 1.0)?;
        if spec.margin == 0.0 || top_two_gap(&class_scores(scorers, &q, &v)?) >= spec.margin {
            return Ok((q, v));
        }
    }
    Err(Error::Parameter(format!(
        "no sample met margin {} after {MAX_REDRAWS} draws",
        spec.margin
    )))
}

fn top_two_gap(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[0] - sorted[1]
}

fn noisy_label(spec: &SynthTaskSpec, scorers: &[Tensor], q: &Tensor, v: &Tensor, rng: &mut Rng) -> Result<usize> {
    let mut scores = class_scores(scorers, q, v)?;
    if spec.noise_sigma > 0.0 {
        for s in &mut scores {
            *s += spec.noise_sigma * rng.standard_normal();
        }
    }
    Ok(argmax(&scores))
}

/// Smallest mean cross-entropy any classifier that sees only `q ⊙ v` can
/// reach on `samples`.
///
/// Samples are grouped by the exact bit pattern of `q ⊙ v`; within a group
/// every such classifier emits one distribution, and the best one is the
/// group's empirical label frequency. The result is the conditional entropy
/// of the label given the element-wise features.
pub fn elementwise_loss_floor(samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Parameter("empty sample set".into()));
    }
    let mut groups: HashMap<Vec<u64>, HashMap<usize, usize>> = HashMap::new();
    for s in samples {
        let key = crate::numtensor::hadamard(&s.q, &s.v)?
            .data()
            .iter()
            .map(|x| x.to_bits())
            .collect();
        *groups.entry(key).or_default().entry(s.label).or_default() += 1;
    }
    // Sum in a fixed order so the value is reproducible bit for bit.
    let mut terms: Vec<(usize, usize)> = groups
        .values()
        .flat_map(|labels| {
            let n: usize = labels.values().sum();
            labels.values().map(move |&c| (c, n))
        })
        .collect();
    terms.sort_unstable();
    let total: f64 = terms
        .iter()
        .map(|&(c, n)| -(c as f64) * (c as f64 / n as f64).ln())
        .sum();
    Ok(total / samples.len() as f64)
}

const DATASET_MAGIC: &str = "fusionbench-dataset 1";

impl SynthDataset {
    /// Text snapshot: a header, the task spec, then scorers and samples as
    /// container tensors (`scorer.k`, `train.q`, `train.v`, `test.q`, `test.v`)
    /// with label lines.
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!("{DATASET_MAGIC}\n");
        let _ = writeln!(
            out,
            "task {} {} {} {} {} {} {} {:e} {:e} {}",
            s.kind.as_str(),
            s.n_q,
            s.n_v,
            s.classes,
            s.rank,
            s.n_train,
            s.n_test,
            s.noise_sigma,
            s.margin,
            s.seed
        );
        for (k, b) in self.scorers.iter().enumerate() {
            write_tensor(&mut out, &format!("scorer.{k}"), b);
        }
        for (name, part) in [("train", &self.train), ("test", &self.test)] {
            let stack = |f: fn(&Sample) -> &Tensor, dim: usize| {
                let data = part.iter().flat_map(|x| f(x).data().to_vec()).collect();
                Tensor::matrix(part.len(), dim, data).expect("sample dims")
            };
            write_tensor(&mut out, &format!("{name}.q"), &stack(|x| &x.q, s.n_q));
            write_tensor(&mut out, &format!("{name}.v"), &stack(|x| &x.v, s.n_v));
            let _ = writeln!(out, "labels {name}");
            let mut line = String::new();
            write_values(&mut line, part.iter().map(|x| x.label as f64));
            out.push_str(&line);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        let (line, magic) = r.next_line()?;
        if magic != DATASET_MAGIC {
            return Err(Error::parse(line, "not a fusionbench dataset snapshot"));
        }
        let (line, task) = r.next_line()?;
        let t: Vec<&str> = task.split_whitespace().collect();
        if t.len() != 11 || t[0] != "task" {
            return Err(Error::parse(line, "malformed task line"));
        }
        let bad = |what: &str| Error::parse(line, format!("invalid {what}"));
        let int = |i: usize, what: &str| t[i].parse::<usize>().map_err(|_| bad(what));
        let float = |i: usize, what: &str| t[i].parse::<f64>().map_err(|_| bad(what));
        let spec = SynthTaskSpec {
            kind: t[1].parse().map_err(|_| bad("kind"))?,
            n_q: int(2, "n_q")?,
            n_v: int(3, "n_v")?,
            classes: int(4, "classes")?,
            rank: int(5, "rank")?,
            n_train: int(6, "n_train")?,
            n_test: int(7, "n_test")?,
            noise_sigma: float(8, "noise_sigma")?,
            margin: float(9, "margin")?,
            seed: t[10].parse().map_err(|_| bad("seed"))?,
        };
        spec.validate().map_err(|e| Error::parse(line, e.to_string()))?;
        let scorers = (0..spec.classes)
            .map(|k| {
                let b = r.expect_tensor(&format!("scorer.{k}"))?;
                if b.shape() != [spec.n_q, spec.n_v] {
                    return Err(Error::Validation(format!("scorer.{k} has shape {:?}", b.shape())));
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut parts = Vec::new();
        for (name, count) in [("train", spec.n_train), ("test", spec.n_test)] {
            let q = r.expect_tensor(&format!("{name}.q"))?;
            let v = r.expect_tensor(&format!("{name}.v"))?;
            if q.shape() != [count, spec.n_q] || v.shape() != [count, spec.n_v] {
                return Err(Error::Validation(format!("{name} features disagree with the task line")));
            }
            let (line, header) = r.next_line()?;
            if header != format!("labels {name}") {
                return Err(Error::parse(line, format!("expected `labels {name}`")));
            }
            let label_line = r.peek().map_or(line + 1, |(l, _)| l);
            let labels = r.read_values::<f64>(count)?;
            let samples = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    if l.fract() != 0.0 || l < 0.0 || l as usize >= spec.classes {
                        return Err(Error::parse(label_line, format!("invalid label {l}")));
                    }
                    Ok(Sample {
                        q: Tensor::vector(q.row(i).to_vec()),
                        v: Tensor::vector(v.row(i).to_vec()),
                        label: l as usize,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            parts.push(samples);
        }
        if let Some((line, _)) = r.peek() {
            return Err(Error::parse(line, "unexpected trailing content"));
        }
        let test = parts.pop().expect("two partitions");
        let train = parts.pop().expect("two partitions");
        Ok(Self {
            spec,
            scorers,
            train,
            test,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
