//! Checkpoint files: a manifest followed by the tensor container.
//!
//! ```text
//! fusionbench-checkpoint 1
//! n_img <int>
//! n_txt <int>
//! proj <int>|none
//! fusion elementwise | mcb <d> <normalize 0|1> | mutan <t_q> <t_v> <t_o> <rank>
//! hidden <int>
//! classes <int>
//! hidden_activation tanh|identity
//! seed <u64>
//! [sketch q / <sketch record> / sketch v / <sketch record>]   MCB only
//! tensor <name> ...                                          every learnable tensor
//! ```
//!
//! Tensors appear in [`ModelParams::named_tensors`] order.

use std::fmt::Write as _;
use std::path::Path;

use crate::container::{write_tensor, LineReader};
use crate::error::{Error, Result};
use crate::fusion::{Activation, FusionParams, McbConfig};
use crate::numtensor::Rng;
use crate::sketch::SketchSpec;

use super::model::{build_model, ModelParams};
use super::spec::{FusionSpec, ModelSpec};

pub const CHECKPOINT_MAGIC: &str = "fusionbench-checkpoint";
pub const CHECKPOINT_VERSION: &str = "1";

pub fn checkpoint_to_string(params: &ModelParams) -> String {
    let s = params.spec();
    let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
    let _ = writeln!(out, "n_img {}", s.n_img);
    let _ = writeln!(out, "n_txt {}", s.n_txt);
    match s.proj {
        Some(p) => {
            let _ = writeln!(out, "proj {p}");
        }
        None => out.push_str("proj none\n"),
    }
    let _ = writeln!(out, "fusion {}", s.fusion);
    let _ = writeln!(out, "hidden {}", s.hidden);
    let _ = writeln!(out, "classes {}", s.classes);
    let _ = writeln!(out, "hidden_activation {}", activation_name(s.hidden_activation));
    let _ = writeln!(out, "seed {}", params.seed());
    if let FusionParams::Mcb(cfg) = params.fusion() {
        out.push_str("sketch q\n");
        out.push_str(&cfg.spec_q().to_text());
        out.push_str("sketch v\n");
        out.push_str(&cfg.spec_v().to_text());
    }
    for (name, t) in params.named_tensors() {
        write_tensor(&mut out, &name, t);
    }
    out
}

pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(params)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

pub fn checkpoint_from_str(text: &str) -> Result<ModelParams> {
    let mut r = LineReader::new(text);
    let (line, header) = r.next_line()?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::parse(line, "not a fusionbench checkpoint"));
    }
    let version = toks.next().unwrap_or("");
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    let (spec, seed) = read_manifest(&mut r)?;
    spec.validate()
        .map_err(|e| Error::Validation(format!("checkpoint manifest: {e}")))?;

    let mut params = build_model(&spec, &mut Rng::new(seed))?;
    if let FusionSpec::Mcb { d, normalize } = spec.fusion {
        let spec_q = read_sketch(&mut r, "q")?;
        let spec_v = read_sketch(&mut r, "v")?;
        for sk in [&spec_q, &spec_v] {
            if sk.n() != spec.fusion_q_dim() || sk.d() != d {
                return Err(Error::Validation(format!(
                    "sketch is {}→{} but manifest expects {}→{d}",
                    sk.n(),
                    sk.d(),
                    spec.fusion_q_dim()
                )));
            }
        }
        *params.fusion_mut() = FusionParams::Mcb(McbConfig::new(spec_q, spec_v)?.with_normalization(normalize));
    }

    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let (found, t) = r.read_tensor()?;
        if &found != name {
            return Err(Error::Validation(format!("expected tensor `{name}`, found `{found}`")));
        }
        if t.shape() != slot.shape() {
            return Err(Error::Validation(format!(
                "tensor `{name}` has shape {:?} but the manifest implies {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    if let Some((line, _)) = r.peek() {
        return Err(Error::parse(line, "unexpected content after last tensor"));
    }
    Ok(params)
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn read_sketch(r: &mut LineReader<'_>, which: &str) -> Result<SketchSpec> {
    let (line, text) = r.next_line()?;
    if text != format!("sketch {which}") {
        return Err(Error::parse(line, format!("expected `sketch {which}`, found `{text}`")));
    }
    SketchSpec::read(r)
}

fn read_manifest(r: &mut LineReader<'_>) -> Result<(ModelSpec, u64)> {
    const KEYS: [&str; 8] = ["n_img", "n_txt", "proj", "fusion", "hidden", "classes", "hidden_activation", "seed"];
    let mut values: Vec<(usize, Vec<&str>)> = Vec::with_capacity(KEYS.len());
    for key in KEYS {
        let (line, text) = r.next_line()?;
        let mut toks = text.split_whitespace();
        if toks.next() != Some(key) {
            return Err(Error::parse(line, format!("expected manifest key `{key}`, found `{text}`")));
        }
        values.push((line, toks.collect()));
    }
    let int = |i: usize| -> Result<usize> {
        let (line, toks) = &values[i];
        match toks.as_slice() {
            [v] => v.parse().map_err(|_| Error::parse(*line, format!("`{}` is not an integer", v))),
            _ => Err(Error::parse(*line, format!("`{}` takes one value", KEYS[i]))),
        }
    };
    let ints = |line: usize, toks: &[&str]| -> Result<Vec<usize>> {
        toks.iter()
            .map(|t| t.parse().map_err(|_| Error::parse(line, format!("`{t}` is not an integer"))))
            .collect()
    };

    let proj = match values[2].1.as_slice() {
        ["none"] => None,
        _ => Some(int(2)?),
    };
    let (fline, ftoks) = &values[3];
    let fusion = match ftoks.split_first() {
        Some((&"elementwise", [])) => FusionSpec::Elementwise,
        Some((&"mcb", rest)) if rest.len() == 2 => {
            let v = ints(*fline, rest)?;
            if v[1] > 1 {
                return Err(Error::parse(*fline, "mcb normalize flag must be 0 or 1"));
            }
            FusionSpec::Mcb { d: v[0], normalize: v[1] == 1 }
        }
        Some((&"mutan", rest)) if rest.len() == 4 => {
            let v = ints(*fline, rest)?;
            FusionSpec::Mutan { t_q: v[0], t_v: v[1], t_o: v[2], rank: v[3] }
        }
        _ => return Err(Error::parse(*fline, "malformed fusion line")),
    };
    let hidden_activation = match values[6].1.as_slice() {
        ["tanh"] => Activation::Tanh,
        ["identity"] => Activation::Identity,
        _ => return Err(Error::parse(values[6].0, "hidden_activation must be tanh or identity")),
    };
    let seed = match values[7].1.as_slice() {
        [v] => v.parse::<u64>().map_err(|_| Error::parse(values[7].0, "invalid seed"))?,
        _ => return Err(Error::parse(values[7].0, "`seed` takes one value")),
    };
    let spec = ModelSpec {
        n_img: int(0)?,
        n_txt: int(1)?,
        proj,
        fusion,
        hidden: int(4)?,
        classes: int(5)?,
        hidden_activation,
    };
    Ok((spec, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(fusion: FusionSpec) -> ModelParams {
        let spec = ModelSpec::new(5, 6, Some(4), fusion, 3, 2);
        build_model(&spec, &mut Rng::new(17)).unwrap()
    }

    #[test]
    fn round_trip_all_kinds() {
        for fusion in [
            FusionSpec::Elementwise,
            FusionSpec::Mcb { d: 9, normalize: true },
            FusionSpec::Mutan { t_q: 2, t_v: 3, t_o: 2, rank: 2 },
        ] {
            let p = small(fusion);
            let text = checkpoint_to_string(&p);
            let back = checkpoint_from_str(&text).unwrap();
            assert_eq!(back, p);
            assert_eq!(checkpoint_to_string(&back), text);
        }
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let text = checkpoint_to_string(&small(FusionSpec::Elementwise));
        let cut: String = text.lines().take(14).map(|l| format!("{l}\n")).collect();
        assert!(matches!(checkpoint_from_str(&cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_mismatch() {
        let text = checkpoint_to_string(&small(FusionSpec::Elementwise)).replacen(" 1\n", " 2\n", 1);
        assert!(matches!(checkpoint_from_str(&text), Err(Error::Version { .. })));
    }

    #[test]
    fn manifest_shape_disagreement_is_a_validation_error() {
        let text = checkpoint_to_string(&small(FusionSpec::Elementwise)).replacen("hidden 3", "hidden 4", 1);
        assert!(matches!(checkpoint_from_str(&text), Err(Error::Validation(_))));
    }
}
