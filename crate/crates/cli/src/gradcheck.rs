//! `gradcheck`: analytic fusion VJPs against central differences.

use fusionbench_core::fusion::FusionKind;
use fusionbench_core::gradcheck::{check_instance, random_instance, MAX_REL_ERR};

use crate::error::{CliError, CliResult};

pub const GRADCHECK_CSV_HEADER: [&str; 6] = ["fusion", "trials", "entries", "max_rel_err", "worst_seed", "pass"];

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub fusion: FusionKind,
    pub trials: usize,
    pub entries: usize,
    pub max_rel_err: f64,
    /// Instance seed with the largest error; rerun it with `--trials 1 --seed`.
    pub worst_seed: u64,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_err < MAX_REL_ERR
    }
}

/// Trial `i` uses instance seed `seed + i`.
pub fn run(kinds: &[FusionKind], trials: usize, seed: u64) -> CliResult<Vec<GradcheckRow>> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    kinds
        .iter()
        .map(|&kind| {
            let mut row = GradcheckRow { fusion: kind, trials, entries: 0, max_rel_err: 0.0, worst_seed: seed };
            for i in 0..trials as u64 {
                let s = seed.wrapping_add(i);
                let out = check_instance(&random_instance(kind, s)?)?;
                if !out.finite {
                    return Err(CliError::Failure(format!(
                        "{}: non-finite gradient for instance seed {s} (replay with --fusion {} --trials 1 --seed {s})",
                        kind.as_str(),
                        kind.as_str()
                    )));
                }
                row.entries += out.entries;
                if out.max_rel_err > row.max_rel_err {
                    row.max_rel_err = out.max_rel_err;
                    row.worst_seed = s;
                }
            }
            Ok(row)
        })
        .collect()
}

pub fn to_csv(rows: &[GradcheckRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRADCHECK_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.fusion.as_str().to_string(),
            r.trials.to_string(),
            r.entries.to_string(),
            format!("{:e}", r.max_rel_err),
            r.worst_seed.to_string(),
            r.passed().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_is_usage_error() {
        let err = run(&FusionKind::ALL, 0, 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn small_run_passes() {
        let rows = run(&FusionKind::ALL, 5, 7).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(GradcheckRow::passed));
        assert!(to_csv(&rows).unwrap().starts_with("fusion,trials,entries,max_rel_err,worst_seed,pass\nelementwise,5,"));
    }
}
