//! Configs compiled into the binary so `params --table` needs no files.

use fusionbench_core::Result;

use crate::config::RunConfig;

pub const BUNDLED: [(&str, &str); 8] = [
    ("lr-baseline", include_str!("../../../configs/lr-baseline.cfg")),
    ("lr-mcb-8000", include_str!("../../../configs/lr-mcb-8000.cfg")),
    ("lr-mutan", include_str!("../../../configs/lr-mutan.cfg")),
    ("hr-baseline", include_str!("../../../configs/hr-baseline.cfg")),
    ("hr-mcb-8000", include_str!("../../../configs/hr-mcb-8000.cfg")),
    ("hr-mutan", include_str!("../../../configs/hr-mutan.cfg")),
    ("ablation", include_str!("../../../configs/ablation.cfg")),
    ("repr-gap", include_str!("../../../configs/repr-gap.cfg")),
];

pub fn bundled(name: &str) -> Option<Result<RunConfig>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| RunConfig::parse(n, text))
}

/// Table names accepted by `params --table`.
pub const TABLES: [&str; 3] = ["lr", "hr", "ablation"];

pub fn table(name: &str) -> Option<Result<Vec<RunConfig>>> {
    let members: &[&str] = match name {
        "lr" => &["lr-baseline", "lr-mcb-8000", "lr-mutan"],
        "hr" => &["hr-baseline", "hr-mcb-8000", "hr-mutan"],
        "ablation" => &["ablation"],
        _ => return None,
    };
    Some(members.iter().map(|m| bundled(m).expect("bundled member")).collect())
}
