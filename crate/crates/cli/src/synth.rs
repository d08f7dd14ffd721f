//! `synth`: generate the configured task, train one head per fusion and
//! write the reports.
//!
//! Output directory layout:
//!
//! ```text
//! dataset.txt               task snapshot
//! <fusion>-epochs.csv       per-epoch loss and accuracy
//! <fusion>-confusion.csv    final test confusion counts
//! <fusion>.ckpt             trained parameters
//! summary.csv               one row per fusion
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use fusionbench_core::numtensor::Rng;
use fusionbench_core::synth::{elementwise_loss_floor, gen_task, train, TrainReport};
use fusionbench_core::vqahead::{build_model, checkpoint_to_string, FusionSpec};
use fusionbench_core::Error;

use crate::config::{fusion_label, RunConfig};
use crate::error::{CliError, CliResult};

pub const SUMMARY_CSV_HEADER: [&str; 8] = [
    "fusion",
    "epochs",
    "final_train_loss",
    "final_train_acc",
    "final_test_loss",
    "final_test_acc",
    "min_train_loss",
    "elementwise_floor",
];

/// Slack when comparing a trained loss with the exact floor.
const FLOOR_SLACK: f64 = 1e-12;

pub struct FusionRun {
    pub label: String,
    pub fusion: FusionSpec,
    pub report: TrainReport,
}

impl FusionRun {
    pub fn min_train_loss(&self) -> f64 {
        self.report.epochs.iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min)
    }
}

pub struct SynthOutcome {
    pub dir: PathBuf,
    pub runs: Vec<FusionRun>,
    pub floor: Option<f64>,
    /// Property violations; written files are kept for inspection.
    pub failures: Vec<String>,
}

fn planned_files(cfg: &RunConfig) -> Vec<String> {
    let mut files = vec!["dataset.txt".to_string(), "summary.csv".to_string()];
    for f in &cfg.fusions {
        let l = fusion_label(f);
        files.push(format!("{l}-epochs.csv"));
        files.push(format!("{l}-confusion.csv"));
        files.push(format!("{l}.ckpt"));
    }
    files
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

pub fn run(cfg: &RunConfig, out_dir: &Path, force: bool) -> CliResult<SynthOutcome> {
    let task = cfg
        .task
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{}: synth needs a [task] section", cfg.name)))?;
    let train_cfg = cfg
        .train
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{}: synth needs a [train] section", cfg.name)))?;
    let specs = cfg.model_specs()?;

    if !force {
        let existing: Vec<String> = planned_files(cfg)
            .into_iter()
            .filter(|f| out_dir.join(f).exists())
            .collect();
        if !existing.is_empty() {
            return Err(CliError::Usage(format!(
                "{} already holds {}; pass --force to overwrite",
                out_dir.display(),
                existing.join(", ")
            )));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| {
        CliError::Core(Error::Io {
            path: out_dir.to_path_buf(),
            source: e,
        })
    })?;

    let data = gen_task(task)?;
    write(out_dir, "dataset.txt", &data.to_text())?;
    let floor = if task.n_q == task.n_v {
        Some(elementwise_loss_floor(&data.train)?)
    } else {
        None
    };

    let mut runs = Vec::new();
    for (_, spec) in specs {
        let label = fusion_label(&spec.fusion);
        let mut model = build_model(&spec, &mut Rng::new(cfg.init_seed()))?;
        let report = train(&mut model, &data, train_cfg).map_err(|e| match e {
            Error::Divergence { epoch } => CliError::Failure(format!("{label}: training diverged at epoch {epoch}")),
            other => CliError::Core(other),
        })?;
        write(out_dir, &format!("{label}-epochs.csv"), &report.epochs_csv())?;
        write(out_dir, &format!("{label}-confusion.csv"), &report.confusion_csv())?;
        write(out_dir, &format!("{label}.ckpt"), &checkpoint_to_string(&model))?;
        runs.push(FusionRun { label, fusion: spec.fusion, report });
    }
    write(out_dir, "summary.csv", &summary_csv(&runs, floor)?)?;

    let failures = check_reference(cfg, &runs, floor);
    Ok(SynthOutcome {
        dir: out_dir.to_path_buf(),
        runs,
        floor,
        failures,
    })
}

fn check_reference(cfg: &RunConfig, runs: &[FusionRun], floor: Option<f64>) -> Vec<String> {
    let r = &cfg.reference;
    let mut failures = Vec::new();
    if let Some(recorded) = r.elementwise_floor {
        match floor {
            Some(f) if (f - recorded).abs() <= 1e-9 => {}
            Some(f) => failures.push(format!("elementwise floor is {f} but the config records {recorded}")),
            None => failures.push("elementwise floor recorded but n_q != n_v".into()),
        }
    }
    for run in runs {
        match run.fusion {
            FusionSpec::Elementwise if cfg.model.as_ref().is_some_and(|m| m.proj.is_none()) => {
                if let Some(f) = floor {
                    let min = run.min_train_loss();
                    if min < f - FLOOR_SLACK {
                        failures.push(format!("{}: train loss {min} went below the floor {f}", run.label));
                    }
                }
            }
            FusionSpec::Mutan { .. } => {
                if let Some(max) = r.mutan_max_train_loss {
                    let last = run.report.final_epoch().train_loss;
                    if last.is_nan() || last >= max {
                        failures.push(format!("{}: final train loss {last} is not below {max}", run.label));
                    }
                }
            }
            _ => {}
        }
    }
    failures
}

pub fn summary_csv(runs: &[FusionRun], floor: Option<f64>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER)?;
    let floor = floor.map_or_else(|| "NA".to_string(), |f| f.to_string());
    for run in runs {
        let e = run.report.final_epoch();
        w.write_record([
            run.label.clone(),
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.train_acc.to_string(),
            e.test_loss.to_string(),
            e.test_acc.to_string(),
            run.min_train_loss().to_string(),
            floor.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Human-readable lines for standard output; wall time appears only here.
pub fn summary_lines(outcome: &SynthOutcome) -> Vec<String> {
    let mut lines: Vec<String> = outcome
        .runs
        .iter()
        .map(|r| {
            let e = r.report.final_epoch();
            format!(
                "{}: {} epochs, train loss {:.3e}, train acc {:.3}, test acc {:.3}, {:.2} s",
                r.label,
                e.epoch,
                e.train_loss,
                e.train_acc,
                e.test_acc,
                secs(r.report.wall_time)
            )
        })
        .collect();
    if let Some(f) = outcome.floor {
        lines.push(format!("elementwise floor (train set): {f:.6}"));
    }
    lines.push(format!("reports written to {}", outcome.dir.display()));
    lines
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
