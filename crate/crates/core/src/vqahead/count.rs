use std::fmt::Write as _;

use crate::error::Result;

use super::spec::{FusionSpec, ModelSpec};

/// Learned-parameter count per block of a head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBreakdown {
    blocks: Vec<(String, usize)>,
}

/// Blocks holding the Tucker projection biases, which a strict count drops.
pub const MUTAN_BIAS_BLOCKS: [&str; 2] = ["mutan.b_q", "mutan.b_v"];

impl ParamBreakdown {
    pub fn blocks(&self) -> &[(String, usize)] {
        &self.blocks
    }

    pub fn get(&self, block: &str) -> Option<usize> {
        self.blocks.iter().find(|(b, _)| b == block).map(|&(_, c)| c)
    }

    pub fn total(&self) -> usize {
        self.blocks.iter().map(|(_, c)| c).sum()
    }

    /// Total without the Tucker projection biases.
    pub fn strict_total(&self) -> usize {
        self.blocks
            .iter()
            .filter(|(b, _)| !MUTAN_BIAS_BLOCKS.contains(&b.as_str()))
            .map(|(_, c)| c)
            .sum()
    }

    /// `block,count` rows and a final `total,<n>` row, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,count\n");
        for (b, c) in &self.blocks {
            let _ = writeln!(out, "{b},{c}");
        }
        let _ = writeln!(out, "total,{}", self.total());
        out
    }
}

fn affine(inputs: usize, outputs: usize) -> usize {
    inputs * outputs + outputs
}

/// Exact analytic count of every learnable scalar [`build_model`](super::build_model)
/// would allocate for `spec`.
pub fn count_params(spec: &ModelSpec) -> Result<ParamBreakdown> {
    spec.validate()?;
    let mut blocks = Vec::new();
    if let Some(p) = spec.proj {
        blocks.push(("proj_q".to_string(), affine(spec.n_txt, p)));
        blocks.push(("proj_v".to_string(), affine(spec.n_img, p)));
    }
    match spec.fusion {
        FusionSpec::Elementwise | FusionSpec::Mcb { .. } => blocks.push(("fusion".to_string(), 0)),
        FusionSpec::Mutan { t_q, t_v, t_o, rank } => {
            let (n_q, n_v) = (spec.fusion_q_dim(), spec.fusion_v_dim());
            blocks.push(("mutan.w_q".to_string(), n_q * t_q));
            blocks.push(("mutan.b_q".to_string(), t_q));
            blocks.push(("mutan.w_v".to_string(), n_v * t_v));
            blocks.push(("mutan.b_v".to_string(), t_v));
            blocks.push(("mutan.core".to_string(), rank * (t_q * t_o + t_v * t_o)));
        }
    }
    blocks.push(("hidden".to_string(), affine(spec.fusion_out_dim(), spec.hidden)));
    blocks.push(("output".to_string(), affine(spec.hidden, spec.classes)));
    Ok(ParamBreakdown { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_low_resolution_total() {
        let spec = ModelSpec::new(2048, 2400, Some(1200), FusionSpec::Elementwise, 256, 9);
        let b = count_params(&spec).unwrap();
        // 2048·1200+1200 + 2400·1200+1200 + 1200·256+256 + 256·9+9
        assert_eq!(b.total(), 5_649_769);
        assert_eq!(b.get("fusion"), Some(0));
    }

    #[test]
    fn mcb_16000_total() {
        let spec = ModelSpec::new(2048, 2400, Some(1200), FusionSpec::Mcb { d: 16_000, normalize: false }, 256, 9);
        assert_eq!(count_params(&spec).unwrap().total(), 9_438_569);
    }

    #[test]
    fn unit_config_counts_eight() {
        let spec = ModelSpec::new(1, 1, Some(1), FusionSpec::Elementwise, 1, 1);
        assert_eq!(count_params(&spec).unwrap().total(), 8);
    }

    #[test]
    fn strict_total_drops_mutan_biases() {
        let spec = ModelSpec::new(2048, 2400, None, FusionSpec::Mutan { t_q: 310, t_v: 310, t_o: 360, rank: 13 }, 256, 9);
        let b = count_params(&spec).unwrap();
        assert_eq!(b.total() - b.strict_total(), 620);
    }

    #[test]
    fn csv_layout() {
        let spec = ModelSpec::new(1, 1, Some(1), FusionSpec::Elementwise, 1, 1);
        let csv = count_params(&spec).unwrap().to_csv();
        assert_eq!(csv, "block,count\nproj_q,2\nproj_v,2\nfusion,0\nhidden,2\noutput,2\ntotal,8\n");
    }
}
