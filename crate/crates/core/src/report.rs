//! CSV and JSON emitters for per-UE reports, convergence traces, sweep tables
//! and solution documents. Every emitter has a matching reader.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::optimizer::{ScaState, SweepEntry};
use crate::radio::{DeploymentSolution, PhaseConfig, RadioError, UeReport};
use crate::scene::RadioConfig;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv")]
    Csv(#[from] csv::Error),
    #[error("json")]
    Json(#[from] serde_json::Error),
    #[error("bad selected_indices field {0:?}")]
    Indices(String),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub sum_slack: f64,
    pub objective: f64,
    pub min_rate_bps: f64,
    pub num_selected_ris: usize,
}

/// One row per outer iteration, 1-based.
pub fn convergence_rows(state: &ScaState) -> Vec<ConvergenceRow> {
    (0..state.r)
        .map(|i| ConvergenceRow {
            iter: i + 1,
            sum_slack: state.slack_trace[i],
            objective: state.objective_trace[i],
            min_rate_bps: state.min_rate(i),
            num_selected_ris: state.selected_trace[i],
        })
        .collect()
}

/// A sweep table row. `num_ris` is empty when the threshold failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold_bps: f64,
    pub num_ris: Option<usize>,
    /// Candidate indices joined by `;`.
    pub selected_indices: String,
    pub min_rate_bps: f64,
    pub iters: usize,
}

impl SweepRow {
    pub fn from_entry(e: &SweepEntry) -> Self {
        match &e.result {
            Ok(o) => Self {
                threshold_bps: e.threshold_bps,
                num_ris: Some(o.solution.num_selected()),
                selected_indices: join_indices(&o.solution.selected_indices()),
                min_rate_bps: o.solution.min_rate(),
                iters: o.state.r,
            },
            Err(err) => {
                let state = err.state();
                Self {
                    threshold_bps: e.threshold_bps,
                    num_ris: None,
                    selected_indices: String::new(),
                    min_rate_bps: state.filter(|s| s.r > 0).map_or(f64::NAN, |s| s.min_rate(s.r - 1)),
                    iters: state.map_or(0, |s| s.r),
                }
            }
        }
    }

    pub fn indices(&self) -> Result<Vec<usize>, ReportError> {
        split_indices(&self.selected_indices)
    }
}

pub fn join_indices(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn split_indices(s: &str) -> Result<Vec<usize>, ReportError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| t.trim().parse().map_err(|_| ReportError::Indices(s.to_string())))
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<(), ReportError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>, ReportError> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

/// Serialisable form of a deployment: the selection, time shares and phase
/// angles `ϑ` with `φ = e^{−jϑ}` (empty vectors for unselected RIS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub num_candidates: usize,
    pub num_ues: usize,
    pub selected_indices: Vec<usize>,
    pub tau: Vec<f64>,
    /// `phases_rad[l][k]`.
    pub phases_rad: Vec<Vec<Vec<f64>>>,
    pub certified_rates_bps: Vec<f64>,
    pub thresholds_bps: Vec<f64>,
}

impl SolutionDocument {
    pub fn new(sol: &DeploymentSolution, thresholds: &[f64]) -> Self {
        let (l, k) = (sol.phases.num_ris(), sol.phases.num_ues());
        Self {
            num_candidates: l,
            num_ues: k,
            selected_indices: sol.selected_indices(),
            tau: sol.tau.clone(),
            phases_rad: (0..l)
                .map(|li| {
                    (0..k)
                        .map(|ki| if sol.alpha[li] { sol.phases.radians(li, ki) } else { Vec::new() })
                        .collect()
                })
                .collect(),
            certified_rates_bps: sol.certified_rates.clone(),
            thresholds_bps: thresholds.to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the deployment on `set`, recomputing rates from the channels.
    pub fn to_solution(&self, set: &ChannelSet, radio: &RadioConfig) -> Result<DeploymentSolution, ReportError> {
        let d = set.dims();
        if self.num_candidates != d.l || self.num_ues != d.k || self.phases_rad.len() != d.l {
            return Err(RadioError::Dimension(format!(
                "solution is for L={} K={}, channels have L={} K={}",
                self.num_candidates, self.num_ues, d.l, d.k
            ))
            .into());
        }
        let mut alpha = vec![false; d.l];
        for &i in &self.selected_indices {
            *alpha.get_mut(i).ok_or_else(|| RadioError::Dimension(format!("selected index {i} out of range")))? = true;
        }
        let mut angles = Vec::with_capacity(d.l);
        for (l, per_ue) in self.phases_rad.iter().enumerate() {
            if per_ue.len() != d.k {
                return Err(RadioError::Dimension(format!("phases for RIS {l} cover {} UEs", per_ue.len())).into());
            }
            angles.push(
                per_ue
                    .iter()
                    .map(|v| if v.is_empty() { vec![0.0; d.m] } else { v.clone() })
                    .collect::<Vec<_>>(),
            );
        }
        let phases = PhaseConfig::from_radians(&angles);
        Ok(DeploymentSolution::certify(set, radio, alpha, phases, self.tau.clone())?)
    }
}

pub fn ue_report_csv<W: Write>(rows: &[UeReport], w: W) -> Result<(), ReportError> {
    write_csv(rows, w)
}
