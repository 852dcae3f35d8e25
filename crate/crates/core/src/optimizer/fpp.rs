//! Feasible point pursuit with successive convex approximation.
//!
//! Each outer iteration linearises the received-power constraints at the
//! previous RIS vectors, solves the mixed-integer subproblem exactly by
//! branch-and-bound, then projects the selected RIS entries onto the unit
//! circle. Slack variables keep every subproblem feasible; they are driven
//! to zero by the penalty `Ω`.

use ndarray::{s, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::bnb::{branch_and_bound, BnbConfig};
use super::p3::{build_p3, P3Error, P3Form, P3};
use super::quad::{surrogate_lhs, QuadModel};
use crate::channel::{ChannelSet, Dims};
use crate::conic::{ConicError, SolveStatus, SolverSettings};
use crate::radio::{DeploymentSolution, PhaseConfig, RadioError};
use crate::scene::RadioConfig;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct FppConfig {
    /// Slack penalty `Ω`.
    pub omega: f64,
    /// Stop when `Σ_k ‖z_k^{(r)} − z_k^{(r−1)}‖² ≤ epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Seed of the random unit-modulus starting point.
    pub seed: u64,
    /// Entries at or below this modulus are zeroed by normalisation.
    pub delta: f64,
    /// Also stop once `Σ s_k` is at most this and the objective repeats to
    /// within the subproblem gap tolerance.
    pub slack_tol: f64,
    pub form: P3Form,
    pub bnb: BnbConfig,
}

impl Default for FppConfig {
    fn default() -> Self {
        Self {
            omega: 100.0,
            epsilon: 1e-3,
            max_iters: 50,
            seed: 0,
            delta: 1e-8,
            slack_tol: 1e-6,
            form: P3Form::Compact,
            // Every iterate is re-certified from the channels, so the
            // subproblems only need to be accurate enough to steer.
            bnb: BnbConfig {
                solver: SolverSettings {
                    feas_tol: 1e-7,
                    gap_tol: 1e-5,
                    ..SolverSettings::default()
                },
                ..BnbConfig::default()
            },
        }
    }
}

/// Iteration state and per-iteration traces (all traces have length `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub r: usize,
    /// Current linearisation points, one stacked vector of length `L·M` per UE.
    pub z: Vec<Array1<C64>>,
    /// `Σ_k s_k` in SNR units.
    pub slack_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    /// Rates of the normalised iterate with the subproblem's time shares.
    pub rate_trace: Vec<Vec<f64>>,
    pub selected_trace: Vec<usize>,
    /// Largest scaled amount by which the true constraint exceeded its
    /// linearisation at the subproblem solution (should be zero).
    pub majorization_trace: Vec<f64>,
    pub omega: f64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl ScaState {
    pub fn min_rate(&self, iter: usize) -> f64 {
        self.rate_trace[iter].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Error)]
pub enum FppError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("iteration limit of {max_iters} reached without a certified deployment; slack trace {slack_trace:?}")]
    IterationLimit { max_iters: usize, slack_trace: Vec<f64>, state: Box<ScaState> },
    #[error("no certified deployment: final slack {final_slack:.3e}, slack trace {:?}", state.slack_trace)]
    Uncertified { final_slack: f64, state: Box<ScaState> },
    #[error("subproblem at iteration {iter} ended with status {status:?}")]
    Solver { iter: usize, status: SolveStatus, state: Box<ScaState> },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Subproblem(#[from] P3Error),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

impl FppError {
    /// State at the point of failure, when the loop had started.
    pub fn state(&self) -> Option<&ScaState> {
        match self {
            FppError::IterationLimit { state, .. }
            | FppError::Uncertified { state, .. }
            | FppError::Solver { state, .. } => Some(state),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FppOutcome {
    pub solution: DeploymentSolution,
    pub state: ScaState,
    pub converged: bool,
    /// The subproblem's time shares failed certification and were replaced.
    pub tau_repaired: bool,
    /// The final iterate failed certification and an earlier certified
    /// iterate was returned.
    pub from_earlier_iterate: bool,
}

/// Projects selected entries onto the unit circle and zeroes the rest.
pub fn normalize_z(z: &[Array1<C64>], alpha: &[bool], m: usize, delta: f64) -> Vec<Array1<C64>> {
    z.iter()
        .map(|zk| {
            zk.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let n = v.norm();
                    if alpha[i / m] && n > delta {
                        v / n
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Phase vectors from normalised `z`; zero entries become `1`.
pub fn phases_from_z(z: &[Array1<C64>], dims: Dims) -> PhaseConfig {
    let mut phases = PhaseConfig::identity(dims.l, dims.k, dims.m);
    for (k, zk) in z.iter().enumerate() {
        for l in 0..dims.l {
            let v: Array1<C64> = zk
                .slice(s![l * dims.m..(l + 1) * dims.m])
                .iter()
                .map(|&c| if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) })
                .collect();
            phases.set(l, k, v);
        }
    }
    phases
}

/// Smallest time shares meeting every threshold at the given SNRs,
/// `τ_k = R̄_k / (B log₂(1 + SNR_k))`, scaled up to fill the frame. `None`
/// if they do not fit in one frame.
pub fn repair_time_allocation(snr: &[f64], thresholds: &[f64], bandwidth_hz: f64) -> Option<Vec<f64>> {
    let need: Vec<f64> = snr
        .iter()
        .zip(thresholds)
        .map(|(&s, &t)| {
            if t <= 0.0 {
                0.0
            } else {
                t / (bandwidth_hz * (1.0 + s).log2())
            }
        })
        .collect();
    let total: f64 = need.iter().sum();
    if !(total <= 1.0) {
        return None;
    }
    if total == 0.0 {
        return Some(need);
    }
    Some(need.iter().map(|t| t / total).collect())
}

pub(crate) fn random_unit_start(dims: Dims, seed: u64) -> Vec<Array1<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..dims.k)
        .map(|_| (0..dims.l * dims.m).map(|_| C64::from_polar(1.0, rng.gen_range(0.0..two_pi))).collect())
        .collect()
}

struct Certified {
    solution: DeploymentSolution,
    repaired: bool,
}

fn certify(
    set: &ChannelSet,
    radio: &RadioConfig,
    thresholds: &[f64],
    alpha: &[bool],
    phases: &PhaseConfig,
    tau: &[f64],
) -> Result<(DeploymentSolution, Option<Certified>), RadioError> {
    let tau: Vec<f64> = tau.iter().map(|t| t.max(0.0)).collect();
    let sol = DeploymentSolution::certify(set, radio, alpha.to_vec(), phases.clone(), tau.clone())?;
    if sol.meets(thresholds) {
        // Hand out the unused part of the frame proportionally; rates only grow.
        let total: f64 = tau.iter().sum();
        let filled = if total > 0.0 && total < 1.0 {
            let scaled = tau.iter().map(|t| t / total).collect();
            DeploymentSolution::certify(set, radio, alpha.to_vec(), phases.clone(), scaled)?
        } else {
            sol.clone()
        };
        return Ok((sol, Some(Certified { solution: filled, repaired: false })));
    }
    let snr: Vec<f64> = sol.certified_snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let repaired = repair_time_allocation(&snr, thresholds, radio.bandwidth_hz)
        .map(|tau| DeploymentSolution::certify(set, radio, alpha.to_vec(), phases.clone(), tau))
        .transpose()?
        .filter(|s| s.meets(thresholds))
        .map(|solution| Certified { solution, repaired: true });
    Ok((sol, repaired))
}

fn majorization_gap(p3: &P3, set: &ChannelSet, z: &[Array1<C64>], thresholds: &[f64]) -> f64 {
    let gamma = p3.snr_scale;
    (0..z.len())
        .filter(|&k| thresholds[k] > 0.0)
        .map(|k| {
            let lin = &p3.linearizations[k];
            let truth = -gamma * (set.value(k, z[k].view()) - lin.c);
            let surrogate = gamma * surrogate_lhs(lin, z[k].view());
            (truth - surrogate).max(0.0) / (1.0 + truth.abs())
        })
        .fold(0.0, f64::max)
}

/// Runs the outer loop from a seeded random unit-modulus start.
pub fn fpp_sca(
    set: &ChannelSet,
    thresholds: &[f64],
    radio: &RadioConfig,
    config: &FppConfig,
) -> Result<FppOutcome, FppError> {
    let z0 = random_unit_start(set.dims(), config.seed);
    fpp_sca_from(set, thresholds, radio, config, z0)
}

/// Runs the outer loop from the given starting point.
pub fn fpp_sca_from(
    set: &ChannelSet,
    thresholds: &[f64],
    radio: &RadioConfig,
    config: &FppConfig,
    z0: Vec<Array1<C64>>,
) -> Result<FppOutcome, FppError> {
    let dims = set.dims();
    if thresholds.len() != dims.k {
        return Err(FppError::Invalid(format!("{} thresholds for {} UEs", thresholds.len(), dims.k)));
    }
    if !(config.epsilon >= 0.0) || !(config.omega > 0.0) {
        return Err(FppError::Invalid("epsilon must be nonnegative and omega positive".into()));
    }
    let mut state = ScaState {
        r: 0,
        z: z0,
        slack_trace: Vec::new(),
        objective_trace: Vec::new(),
        rate_trace: Vec::new(),
        selected_trace: Vec::new(),
        majorization_trace: Vec::new(),
        omega: config.omega,
        epsilon: config.epsilon,
        max_iters: config.max_iters,
    };
    let mut best: Option<(usize, Certified)> = None;
    let mut last: Option<(Vec<bool>, PhaseConfig, Vec<f64>)> = None;
    let mut converged = false;

    while state.r < config.max_iters {
        let p3 = build_p3(set, &state.z, thresholds, radio, config.omega, config.form)?;
        let out = branch_and_bound(&p3.program, &config.bnb)?;
        let sol = out.solution;
        let usable = sol.status == SolveStatus::Optimal || (sol.status == SolveStatus::IterLimit && sol.primal.iter().all(|v| v.is_finite()));
        if !usable {
            return Err(FppError::Solver {
                iter: state.r + 1,
                status: sol.status,
                state: Box::new(state),
            });
        }
        let alpha: Vec<bool> = p3.alpha_values(&sol.primal).iter().map(|&a| a > 0.5).collect();
        let raw_z = p3.recover_z(&sol.primal);
        let z = normalize_z(&raw_z, &alpha, dims.m, config.delta);
        let phases = phases_from_z(&z, dims);
        let tau = p3.tau_values(&sol.primal);
        let (iterate, certified) = certify(set, radio, thresholds, &alpha, &phases, &tau)?;

        let diff: f64 = z
            .iter()
            .zip(&state.z)
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
            .sum();
        let slack = p3.slack_sum(&sol.primal);
        state.majorization_trace.push(majorization_gap(&p3, set, &raw_z, thresholds));
        state.slack_trace.push(slack);
        state.objective_trace.push(sol.objective_value);
        state.rate_trace.push(iterate.certified_rates.clone());
        state.selected_trace.push(iterate.num_selected());
        state.r += 1;
        state.z = z;

        if let Some(c) = certified {
            let n = c.solution.num_selected();
            if best.as_ref().map_or(true, |(bn, _)| n <= *bn) {
                best = Some((n, c));
            }
        }
        last = Some((alpha, phases, tau));

        let objective_repeats = state.r >= 2 && {
            let o = &state.objective_trace;
            let (a, b) = (o[o.len() - 1], o[o.len() - 2]);
            (a - b).abs() <= config.bnb.solver.gap_tol * a.abs().max(1.0)
        };
        if diff <= config.epsilon || (slack <= config.slack_tol && objective_repeats) {
            converged = true;
            break;
        }
    }

    let Some((alpha, phases, tau)) = last else {
        return Err(FppError::IterationLimit {
            max_iters: config.max_iters,
            slack_trace: Vec::new(),
            state: Box::new(state),
        });
    };

    if converged {
        let (_, certified) = certify(set, radio, thresholds, &alpha, &phases, &tau)?;
        if let Some(c) = certified {
            return Ok(FppOutcome {
                solution: c.solution,
                state,
                converged,
                tau_repaired: c.repaired,
                from_earlier_iterate: false,
            });
        }
    }
    match best {
        Some((_, c)) => Ok(FppOutcome {
            solution: c.solution,
            state,
            converged,
            tau_repaired: c.repaired,
            from_earlier_iterate: true,
        }),
        None if converged => Err(FppError::Uncertified {
            final_slack: *state.slack_trace.last().unwrap_or(&f64::NAN),
            state: Box::new(state),
        }),
        None => Err(FppError::IterationLimit {
            max_iters: config.max_iters,
            slack_trace: state.slack_trace.clone(),
            state: Box::new(state),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use ndarray::{array, Array2};

    fn radio() -> RadioConfig {
        RadioConfig::default()
    }

    #[test]
    fn normalization_examples() {
        let theta = 0.7;
        let z = vec![array![
            C64::from_polar(0.5, theta),
            C64::new(1e-12, 0.0),
            C64::new(0.3, 0.4),
            C64::new(0.6, 0.0)
        ]];
        let out = normalize_z(&z, &[true, false], 2, 1e-8);
        assert!((out[0][0] - C64::from_polar(1.0, theta)).norm() < 1e-15);
        assert_eq!(out[0][1], C64::new(0.0, 0.0));
        assert_eq!(out[0][2], C64::new(0.0, 0.0));
        assert_eq!(out[0][3], C64::new(0.0, 0.0));
    }

    #[test]
    fn repair_examples() {
        // SNR 3 gives log2(4) = 2 bit/s/Hz; 0.5 Gbit/s needs a quarter frame.
        let t = repair_time_allocation(&[3.0, 3.0], &[5e8, 5e8], 1e9).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-12 && (t[1] - 0.5).abs() < 1e-12);
        assert!(repair_time_allocation(&[3.0, 3.0], &[2e9, 1e9], 1e9).is_none());
        assert!(repair_time_allocation(&[0.0], &[1.0], 1e9).is_none());
        assert_eq!(repair_time_allocation(&[0.0], &[0.0], 1e9), Some(vec![0.0]));
    }

    fn single_ue(direct: f64) -> ChannelSet {
        ChannelSet::new(
            vec![array![C64::new(direct, 0.0)]],
            vec![Array2::from_elem((2, 1), C64::new(1.0, 0.0)), Array2::from_elem((2, 1), C64::new(1.0, 0.0))],
            vec![vec![array![C64::new(1e-6, 0.0), C64::new(0.0, 1e-6)]], vec![array![C64::new(2e-6, 0.0), C64::new(0.0, -1e-6)]]],
        )
        .unwrap()
    }

    #[test]
    fn strong_direct_link_needs_no_ris() {
        let set = single_ue(1e-4);
        let out = fpp_sca(&set, &[1e9], &radio(), &FppConfig::default()).unwrap();
        assert_eq!(out.solution.num_selected(), 0);
        assert!((out.solution.tau[0] - 1.0).abs() < 1e-6);
        assert!(out.solution.meets(&[1e9]));
    }

    #[test]
    fn zero_thresholds_select_nothing() {
        let set = single_ue(0.0);
        let out = fpp_sca(&set, &[0.0], &radio(), &FppConfig::default()).unwrap();
        assert_eq!(out.solution.num_selected(), 0);
        assert_eq!(out.state.slack_trace[0], 0.0);
        assert!(out.converged);
    }

    #[test]
    fn blocked_ue_is_served_by_a_ris() {
        let set = single_ue(0.0);
        let out = fpp_sca(&set, &[1e8], &radio(), &FppConfig::default()).unwrap();
        assert!(out.solution.num_selected() >= 1);
        assert!(out.solution.meets(&[1e8]));
        assert!(out.state.majorization_trace.iter().all(|&g| g <= 1e-8));
    }

    #[test]
    fn zero_iterations_fail() {
        let set = single_ue(1e-4);
        let cfg = FppConfig {
            max_iters: 0,
            ..FppConfig::default()
        };
        assert!(matches!(
            fpp_sca(&set, &[1e9], &radio(), &cfg),
            Err(FppError::IterationLimit { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let set = single_ue(0.0);
        let a = fpp_sca(&set, &[1e8], &radio(), &FppConfig::default()).unwrap();
        let b = fpp_sca(&set, &[1e8], &radio(), &FppConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
