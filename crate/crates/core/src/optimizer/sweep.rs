//! Threshold sweeps: one outer-loop run per common per-UE rate threshold.

use super::fpp::{fpp_sca, FppConfig, FppError, FppOutcome};
use crate::channel::ChannelSet;
use crate::scene::RadioConfig;

#[derive(Debug)]
pub struct SweepEntry {
    pub threshold_bps: f64,
    pub result: Result<FppOutcome, FppError>,
}

impl SweepEntry {
    pub fn num_ris(&self) -> Option<usize> {
        self.result.as_ref().ok().map(|o| o.solution.num_selected())
    }
}

/// Runs [`fpp_sca`] for every threshold (applied to all UEs). A failing
/// threshold is recorded and the sweep continues.
pub fn run_threshold_sweep(
    set: &ChannelSet,
    thresholds_bps: &[f64],
    radio: &RadioConfig,
    config: &FppConfig,
) -> Result<Vec<SweepEntry>, FppError> {
    if thresholds_bps.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(FppError::Invalid("sweep thresholds must be sorted ascending".into()));
    }
    let k = set.dims().k;
    Ok(thresholds_bps
        .iter()
        .map(|&t| SweepEntry {
            threshold_bps: t,
            result: fpp_sca(set, &vec![t; k], radio, config),
        })
        .collect())
}
