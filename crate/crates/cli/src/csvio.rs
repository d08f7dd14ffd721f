//! Readers for every CSV the binary writes.

use std::str::FromStr;

use fusionbench_core::synth::{EpochStats, EPOCHS_CSV_HEADER};

use crate::bench::BENCH_CSV_HEADER;
use crate::error::{CliError, CliResult};
use crate::params::PARAMS_CSV_HEADER;

/// Rows of `text`, after checking the header matches `expected`.
pub fn read_records(text: &str, expected: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::Usage(format!(
            "unexpected CSV header `{}`, wanted `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> CliResult<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        CliError::Usage(format!("line {line}: cannot parse field {} `{raw}`", i + 1))
    })
}

/// `(config, block, count)` triples.
pub fn read_params_csv(text: &str) -> CliResult<Vec<(String, String, usize)>> {
    read_records(text, &PARAMS_CSV_HEADER)?
        .iter()
        .map(|r| Ok((field(r, 0)?, field(r, 1)?, field(r, 2)?)))
        .collect()
}

pub fn read_epochs_csv(text: &str) -> CliResult<Vec<EpochStats>> {
    let header: Vec<&str> = EPOCHS_CSV_HEADER.split(',').collect();
    read_records(text, &header)?
        .iter()
        .map(|r| {
            Ok(EpochStats {
                epoch: field(r, 0)?,
                train_loss: field(r, 1)?,
                train_acc: field(r, 2)?,
                test_loss: field(r, 3)?,
                test_acc: field(r, 4)?,
            })
        })
        .collect()
}

/// Square confusion matrix, `[true][predicted]`.
pub fn read_confusion_csv(text: &str) -> CliResult<Vec<Vec<usize>>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let k = r.headers()?.len().saturating_sub(1);
    let rows: Vec<Vec<usize>> = r
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            if field::<usize>(&rec, 0)? != i {
                return Err(CliError::Usage(format!("confusion row {i} is out of order")));
            }
            (1..=k).map(|j| field(&rec, j)).collect()
        })
        .collect::<CliResult<_>>()?;
    if rows.len() != k {
        return Err(CliError::Usage(format!("confusion matrix has {} rows for {k} classes", rows.len())));
    }
    Ok(rows)
}

/// `(fusion, dim, mode, ns_per_call)` rows.
pub fn read_bench_csv(text: &str) -> CliResult<Vec<(String, usize, String, u128)>> {
    read_records(text, &BENCH_CSV_HEADER)?
        .iter()
        .map(|r| Ok((field(r, 0)?, field(r, 1)?, field(r, 2)?, field(r, 3)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_mismatch_is_rejected() {
        assert!(read_params_csv("config,count\nx,1\n").is_err());
        assert!(read_params_csv("config,block,count\nx,total,12\n").unwrap()[0].2 == 12);
    }

    #[test]
    fn confusion_round_trip() {
        let text = "true,pred_0,pred_1\n0,3,1\n1,0,4\n";
        assert_eq!(read_confusion_csv(text).unwrap(), vec![vec![3, 1], vec![0, 4]]);
        assert!(read_confusion_csv("true,pred_0,pred_1\n0,3,1\n").is_err());
    }
}
