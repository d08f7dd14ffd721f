//! Run configuration files.
//!
//! Flat INI: `key = value` lines, `[section]` headers, `#` or `;` comments.
//! Keys before the first header belong to the top-level section. Lists are
//! comma separated. Every key is validated and unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fusionbench_core::fusion::{Activation, FusionKind};
use fusionbench_core::synth::{SynthTaskSpec, TaskKind, TrainConfig};
use fusionbench_core::vqahead::{FusionSpec, ModelSpec};
use fusionbench_core::{Error, Result};

const SECTIONS: [&str; 6] = ["", "model", "fusion", "task", "train", "reference"];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub n_img: usize,
    pub n_txt: usize,
    pub proj: Option<usize>,
    pub hidden: usize,
    pub classes: usize,
    pub hidden_activation: Activation,
}

/// Reference figures a run is compared against.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reference {
    /// One reference parameter total per expanded fusion.
    pub totals: Vec<f64>,
    pub tolerance: f64,
    /// Elementwise cross-entropy floor of the frozen training set.
    pub elementwise_floor: Option<f64>,
    /// Largest final train loss the MUTAN head may end on.
    pub mutan_max_train_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub model: Option<ModelSection>,
    /// Fusion kinds in file order, MCB expanded once per sketch size.
    pub fusions: Vec<FusionSpec>,
    pub task: Option<SynthTaskSpec>,
    pub train: Option<TrainConfig>,
    pub reference: Reference,
}

/// Short, file-name safe label for a fusion choice.
pub fn fusion_label(f: &FusionSpec) -> String {
    match f {
        FusionSpec::Elementwise => "elementwise".into(),
        FusionSpec::Mcb { d, .. } => format!("mcb-d{d}"),
        FusionSpec::Mutan { .. } => "mutan".into(),
    }
}

struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Raw {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        raw.sections.insert(String::new(), BTreeMap::new());
        let mut current = String::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line: lineno, msg: "unterminated section header".into() })?
                    .trim();
                if name.is_empty() || !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line: lineno, msg: format!("unknown section [{name}]") });
                }
                if raw.sections.contains_key(name) {
                    return Err(Error::Parse { line: lineno, msg: format!("duplicate section [{name}]") });
                }
                current = name.to_string();
                raw.sections.insert(current.clone(), BTreeMap::new());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: lineno, msg: format!("expected `key = value`, found `{line}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse { line: lineno, msg: "empty key or value".into() });
            }
            let section = raw.sections.get_mut(&current).expect("section registered");
            if section.contains_key(key) {
                return Err(Error::Parse { line: lineno, msg: format!("duplicate key `{key}`") });
            }
            section.insert(key.to_string(), Entry { line: lineno, value: value.to_string() });
        }
        Ok(raw)
    }

    fn section(&mut self, name: &str) -> Option<Section> {
        self.sections.remove(name).map(|entries| Section { name: name.to_string(), entries })
    }
}

struct Section {
    name: String,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn display(&self) -> String {
        if self.name.is_empty() {
            "top level".into()
        } else {
            format!("[{}]", self.name)
        }
    }

    fn take_raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some(e) => parse_value(&e.value.replace('_', ""), e.line, key).map(Some),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let where_ = self.display();
        self.take(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}` in {where_}")))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|item| parse_value(&item.trim().replace('_', ""), e.line, key))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, e)) = self.entries.iter().next() {
            return Err(Error::Parse {
                line: e.line,
                msg: format!("unknown key `{key}` in {}", self.display()),
            });
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(text: &str, line: usize, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    text.parse()
        .map_err(|e| Error::Parse { line, msg: format!("invalid value `{text}` for `{key}`: {e}") })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".into());
        Self::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut raw = Raw::parse(text)?;
        let mut top = raw.section("").expect("top level always present");
        let seed = top.take::<u64>("seed")?.unwrap_or(0);
        let output = top.take_raw("output").map(|e| PathBuf::from(e.value));
        top.finish()?;

        let model = raw.section("model").map(parse_model).transpose()?;
        let fusions = match raw.section("fusion") {
            Some(s) => parse_fusions(s)?,
            None => Vec::new(),
        };
        let task = raw.section("task").map(|s| parse_task(s, seed)).transpose()?;
        let train = raw.section("train").map(|s| parse_train(s, seed)).transpose()?;
        let reference = match raw.section("reference") {
            Some(s) => parse_reference(s)?,
            None => Reference { tolerance: 0.03, ..Reference::default() },
        };

        let cfg = RunConfig {
            name: name.to_string(),
            seed,
            output,
            model,
            fusions,
            task,
            train,
            reference,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the seed everywhere it was propagated.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(t) = self.task.as_mut() {
            t.seed = seed;
        }
        if let Some(t) = self.train.as_mut() {
            t.seed = shuffle_seed(seed);
        }
        self
    }

    /// Seed of the parameter initialization stream.
    pub fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    /// One labelled model spec per expanded fusion.
    pub fn model_specs(&self) -> Result<Vec<(String, ModelSpec)>> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{}: missing [model] section", self.name)))?;
        if self.fusions.is_empty() {
            return Err(Error::Config(format!("{}: missing [fusion] section", self.name)));
        }
        Ok(self
            .fusions
            .iter()
            .map(|f| {
                let label = if self.fusions.len() == 1 {
                    self.name.clone()
                } else {
                    format!("{}-{}", self.name, fusion_label(f))
                };
                let mut spec = ModelSpec::new(m.n_img, m.n_txt, m.proj, *f, m.hidden, m.classes);
                spec.hidden_activation = m.hidden_activation;
                (label, spec)
            })
            .collect())
    }

    fn validate(&self) -> Result<()> {
        let mut labels: Vec<String> = self.fusions.iter().map(fusion_label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("{}: a fusion is listed twice", self.name)));
        }
        if self.model.is_some() && !self.fusions.is_empty() {
            for (label, spec) in self.model_specs()? {
                spec.validate()
                    .map_err(|e| Error::Config(format!("{label}: {e}")))?;
            }
        }
        if let Some(task) = &self.task {
            task.validate()
                .map_err(|e| Error::Config(format!("[task]: {e}")))?;
            if let Some(m) = &self.model {
                if m.n_txt != task.n_q || m.n_img != task.n_v || m.classes != task.classes {
                    return Err(Error::Config(format!(
                        "[model] n_txt/n_img/classes = {}/{}/{} do not match [task] n_q/n_v/classes = {}/{}/{}",
                        m.n_txt, m.n_img, m.classes, task.n_q, task.n_v, task.classes
                    )));
                }
            }
        }
        if let Some(train) = &self.train {
            train.validate()
                .map_err(|e| Error::Config(format!("[train]: {e}")))?;
        }
        let r = &self.reference;
        if !r.totals.is_empty() && r.totals.len() != self.fusions.len() {
            return Err(Error::Config(format!(
                "[reference] lists {} totals for {} fusion configurations",
                r.totals.len(),
                self.fusions.len()
            )));
        }
        if !(r.tolerance >= 0.0 && r.tolerance < 1.0) {
            return Err(Error::Config("[reference] tolerance must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn shuffle_seed(seed: u64) -> u64 {
    seed.wrapping_add(2)
}

fn parse_model(mut s: Section) -> Result<ModelSection> {
    let proj = match s.take_raw("proj") {
        None => return Err(Error::Config("missing key `proj` in [model] (use `none` for no projection)".into())),
        Some(e) if e.value == "none" => None,
        Some(e) => Some(parse_value::<usize>(&e.value.replace('_', ""), e.line, "proj")?),
    };
    let hidden_activation = match s.take_raw("hidden_activation") {
        None => Activation::Tanh,
        Some(e) => match e.value.as_str() {
            "tanh" => Activation::Tanh,
            "identity" => Activation::Identity,
            other => {
                return Err(Error::Parse {
                    line: e.line,
                    msg: format!("hidden_activation must be tanh or identity, got `{other}`"),
                })
            }
        },
    };
    let m = ModelSection {
        n_img: s.require("n_img")?,
        n_txt: s.require("n_txt")?,
        proj,
        hidden: s.require("hidden")?,
        classes: s.require("classes")?,
        hidden_activation,
    };
    s.finish()?;
    Ok(m)
}

fn parse_fusions(mut s: Section) -> Result<Vec<FusionSpec>> {
    let kinds: Vec<FusionKind> = s
        .take_list("kind")?
        .ok_or_else(|| Error::Config("missing key `kind` in [fusion]".into()))?;
    let mcb_d: Option<Vec<usize>> = s.take_list("mcb_d")?;
    let normalize = s.take::<bool>("mcb_normalize")?.unwrap_or(false);
    let has_mutan = kinds.contains(&FusionKind::Mutan);
    let mutan = if has_mutan {
        Some(FusionSpec::Mutan {
            t_q: s.require("t_q")?,
            t_v: s.require("t_v")?,
            t_o: s.require("t_o")?,
            rank: s.require("rank")?,
        })
    } else {
        None
    };
    s.finish()?;
    if mcb_d.is_some() && !kinds.contains(&FusionKind::Mcb) {
        return Err(Error::Config("`mcb_d` given but no mcb fusion listed".into()));
    }
    let mut out = Vec::new();
    for kind in kinds {
        match kind {
            FusionKind::Elementwise => out.push(FusionSpec::Elementwise),
            FusionKind::Mcb => {
                let ds = mcb_d
                    .as_ref()
                    .ok_or_else(|| Error::Config("mcb fusion needs `mcb_d`".into()))?;
                out.extend(ds.iter().map(|&d| FusionSpec::Mcb { d, normalize }));
            }
            FusionKind::Mutan => out.push(mutan.expect("parsed above")),
        }
    }
    Ok(out)
}

fn parse_task(mut s: Section, seed: u64) -> Result<SynthTaskSpec> {
    let kind: TaskKind = s.take("kind")?.unwrap_or(TaskKind::Random);
    let t = SynthTaskSpec {
        kind,
        n_q: s.require("n_q")?,
        n_v: s.require("n_v")?,
        classes: s.require("classes")?,
        rank: s.require("rank")?,
        n_train: s.require("n_train")?,
        n_test: s.require("n_test")?,
        noise_sigma: s.take("noise_sigma")?.unwrap_or(0.0),
        margin: s.take("margin")?.unwrap_or(0.0),
        seed,
    };
    s.finish()?;
    Ok(t)
}

fn parse_train(mut s: Section, seed: u64) -> Result<TrainConfig> {
    let base = match s.take_raw("preset") {
        None => TrainConfig::default(),
        Some(e) => match e.value.as_str() {
            "desk" => TrainConfig::default(),
            "paper-defaults" => TrainConfig::paper_defaults(),
            other => {
                return Err(Error::Parse {
                    line: e.line,
                    msg: format!("unknown preset `{other}` (expected desk or paper-defaults)"),
                })
            }
        },
    };
    let t = TrainConfig {
        lr: s.take("lr")?.unwrap_or(base.lr),
        batch: s.take("batch")?.unwrap_or(base.batch),
        epochs: s.take("epochs")?.unwrap_or(base.epochs),
        beta1: s.take("beta1")?.unwrap_or(base.beta1),
        beta2: s.take("beta2")?.unwrap_or(base.beta2),
        eps: s.take("eps")?.unwrap_or(base.eps),
        seed: shuffle_seed(seed),
    };
    s.finish()?;
    Ok(t)
}

fn parse_reference(mut s: Section) -> Result<Reference> {
    let r = Reference {
        totals: s.take_list("total")?.unwrap_or_default(),
        tolerance: s.take("tolerance")?.unwrap_or(0.03),
        elementwise_floor: s.take("elementwise_floor")?,
        mutan_max_train_loss: s.take("mutan_max_train_loss")?,
    };
    s.finish()?;
    Ok(r)
}
