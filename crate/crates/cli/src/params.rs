//! `params`: learned-parameter breakdowns as `config,block,count` CSV.

use fusionbench_core::vqahead::{count_params, load_model, ModelSpec};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const PARAMS_CSV_HEADER: [&str; 3] = ["config", "block", "count"];

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub config: String,
    pub total: usize,
    pub reference: Option<f64>,
    pub tolerance: f64,
}

impl Comparison {
    pub fn rel_diff(&self) -> Option<f64> {
        self.reference.map(|p| (self.total as f64 - p) / p)
    }

    pub fn within_tolerance(&self) -> bool {
        self.rel_diff().is_none_or(|d| d.abs() <= self.tolerance)
    }

    pub fn describe(&self) -> String {
        match (self.reference, self.rel_diff()) {
            (Some(p), Some(d)) => format!(
                "{}: {} learned parameters, reference {:.1}M ({:+.2}%{})",
                self.config,
                self.total,
                p / 1e6,
                d * 100.0,
                if self.within_tolerance() { "" } else { ", outside tolerance" }
            ),
            _ => format!("{}: {} learned parameters", self.config, self.total),
        }
    }
}

pub struct ParamsReport {
    pub csv: String,
    pub comparisons: Vec<Comparison>,
}

/// Breakdown for every model described by `configs`, one `total` row per model.
pub fn params_report(configs: &[RunConfig]) -> CliResult<ParamsReport> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PARAMS_CSV_HEADER)?;
    let mut comparisons = Vec::new();
    for cfg in configs {
        for (i, (label, spec)) in cfg.model_specs()?.into_iter().enumerate() {
            let total = write_breakdown(&mut w, &label, &spec)?;
            comparisons.push(Comparison {
                config: label,
                total,
                reference: cfg.reference.totals.get(i).copied(),
                tolerance: cfg.reference.tolerance,
            });
        }
    }
    Ok(ParamsReport {
        csv: finish(w)?,
        comparisons,
    })
}

/// Breakdown of a saved checkpoint. Fails if the analytic count and the
/// stored tensors disagree.
pub fn checkpoint_report(path: &std::path::Path) -> CliResult<ParamsReport> {
    let model = load_model(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PARAMS_CSV_HEADER)?;
    let total = write_breakdown(&mut w, &label, model.spec())?;
    let stored = model.enumerate_scalars();
    if stored != total {
        return Err(CliError::Failure(format!(
            "{label}: analytic count {total} but the checkpoint stores {stored} scalars"
        )));
    }
    Ok(ParamsReport {
        csv: finish(w)?,
        comparisons: vec![Comparison { config: label, total, reference: None, tolerance: 0.0 }],
    })
}

fn write_breakdown(w: &mut csv::Writer<Vec<u8>>, label: &str, spec: &ModelSpec) -> CliResult<usize> {
    let b = count_params(spec)?;
    for (block, count) in b.blocks() {
        w.write_record([label, block.as_str(), &count.to_string()])?;
    }
    w.write_record([label, "total", &b.total().to_string()])?;
    Ok(b.total())
}

fn finish(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::table;

    #[test]
    fn low_resolution_table() {
        let report = params_report(&table("lr").unwrap().unwrap()).unwrap();
        let totals: Vec<usize> = report.comparisons.iter().map(|c| c.total).collect();
        assert_eq!(totals, [5_649_769, 7_390_569, 4_375_829]);
        assert!(report.comparisons.iter().all(Comparison::within_tolerance));
        assert!(report.csv.starts_with("config,block,count\nlr-baseline,proj_q,2881200\n"));
        assert!(report.csv.contains("lr-mutan,total,4375829\n"));
    }
}
