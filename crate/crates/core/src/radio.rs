//! Link evaluation for a deployment: effective channel, MRT, SNR and rate.
//!
//! With RIS selection `α`, phase vectors `φ_{l,k}` and time shares `τ_k`, UE
//! `k` sees the effective channel `h_k + Σ_l α_l H_{l,k} φ_{l,k}`. MRT on that
//! channel gives `SNR_k = ‖·‖² P / (B N0)` and `R_k = τ_k B log₂(1 + SNR_k)`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelSet, Dims};
use crate::scene::RadioConfig;
use crate::{linear_to_db, C64};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("UE in outage: effective channel is zero")]
    Outage,
    #[error("closed-form phase alignment needs a single BS antenna (N = {0})")]
    MultiAntenna(usize),
}

/// RIS phase vectors `φ_{l,k}` with entries `e^{-jϑ}`, indexed `[l][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    phi: Vec<Vec<Array1<C64>>>,
}

impl PhaseConfig {
    pub fn new(phi: Vec<Vec<Array1<C64>>>) -> Self {
        Self { phi }
    }

    /// All-zero phase shifts (every entry `1`).
    pub fn identity(l: usize, k: usize, m: usize) -> Self {
        Self {
            phi: vec![vec![Array1::from_elem(m, C64::new(1.0, 0.0)); k]; l],
        }
    }

    /// Builds a configuration from phase shifts `ϑ` in radians.
    pub fn from_radians(angles: &[Vec<Vec<f64>>]) -> Self {
        Self {
            phi: angles
                .iter()
                .map(|per_ue| {
                    per_ue
                        .iter()
                        .map(|a| a.iter().map(|&t| C64::from_polar(1.0, -t)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn get(&self, l: usize, k: usize) -> &Array1<C64> {
        &self.phi[l][k]
    }

    pub fn set(&mut self, l: usize, k: usize, v: Array1<C64>) {
        self.phi[l][k] = v;
    }

    pub fn num_ris(&self) -> usize {
        self.phi.len()
    }

    pub fn num_ues(&self) -> usize {
        self.phi.first().map_or(0, Vec::len)
    }

    /// Phase shifts `ϑ ∈ [0, 2π)` with `φ = e^{-jϑ}`.
    pub fn radians(&self, l: usize, k: usize) -> Vec<f64> {
        self.phi[l][k]
            .iter()
            .map(|c| (-c.arg()).rem_euclid(2.0 * std::f64::consts::PI))
            .collect()
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.phi
            .iter()
            .flatten()
            .flat_map(|v| v.iter())
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_dims(&self, dims: Dims) -> Result<(), RadioError> {
        let ok = self.phi.len() == dims.l
            && self
                .phi
                .iter()
                .all(|per_ue| per_ue.len() == dims.k && per_ue.iter().all(|v| v.len() == dims.m));
        if ok {
            Ok(())
        } else {
            Err(RadioError::Dimension(format!(
                "phase configuration does not match L={} K={} M={}",
                dims.l, dims.k, dims.m
            )))
        }
    }
}

/// `h + Σ_l α_l H_l φ_l` from explicit cascaded matrices.
pub fn effective_channel(
    direct: &Array1<C64>,
    cascaded: &[Array2<C64>],
    phases: &[Array1<C64>],
    alpha: &[bool],
) -> Result<Array1<C64>, RadioError> {
    if cascaded.len() != alpha.len() || phases.len() != alpha.len() {
        return Err(RadioError::Dimension(format!(
            "{} cascaded channels, {} phase vectors, {} selections",
            cascaded.len(),
            phases.len(),
            alpha.len()
        )));
    }
    let mut out = direct.clone();
    for ((h, phi), &a) in cascaded.iter().zip(phases).zip(alpha) {
        if !a {
            continue;
        }
        if h.nrows() != direct.len() || h.ncols() != phi.len() {
            return Err(RadioError::Dimension(format!(
                "cascaded channel {:?} vs direct {} and phase {}",
                h.dim(),
                direct.len(),
                phi.len()
            )));
        }
        out = out + h.dot(phi);
    }
    Ok(out)
}

/// Effective channel of UE `k` computed directly from a [`ChannelSet`].
pub fn effective_channel_of(set: &ChannelSet, k: usize, alpha: &[bool], phases: &PhaseConfig) -> Array1<C64> {
    let mut out = set.direct(k).clone();
    for (l, _) in alpha.iter().enumerate().filter(|(_, &a)| a) {
        out = out + set.cascaded_apply(l, k, phases.get(l, k).view());
    }
    out
}

/// Conjugate of the effective channel normalised to unit norm.
pub fn mrt_precoder(effective: &Array1<C64>) -> Result<Array1<C64>, RadioError> {
    let norm = effective.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(RadioError::Outage);
    }
    Ok(effective.mapv(|c| c.conj() / norm))
}

/// `‖effective‖² P / (B N0)`.
pub fn snr(effective: &Array1<C64>, radio: &RadioConfig) -> f64 {
    effective.iter().map(|c| c.norm_sqr()).sum::<f64>() * radio.snr_scale()
}

/// `τ B log₂(1 + SNR)` in bit/s.
pub fn rate(tau: f64, snr: f64, radio: &RadioConfig) -> f64 {
    tau * radio.bandwidth_hz * (1.0 + snr).log2()
}

/// Phases that co-phase every selected RIS element with the direct path,
/// valid for a single-antenna BS: `φ_m = e^{j(arg h − arg H_m)}`. With `h = 0`
/// the reference phase is zero.
pub fn aligned_phases_single_antenna(
    direct: C64,
    cascaded: &[Array2<C64>],
    alpha: &[bool],
) -> Result<Vec<Array1<C64>>, RadioError> {
    if let Some(h) = cascaded.iter().find(|h| h.nrows() != 1) {
        return Err(RadioError::MultiAntenna(h.nrows()));
    }
    if cascaded.len() != alpha.len() {
        return Err(RadioError::Dimension(format!(
            "{} cascaded channels, {} selections",
            cascaded.len(),
            alpha.len()
        )));
    }
    let reference = if direct == C64::new(0.0, 0.0) { 0.0 } else { direct.arg() };
    Ok(cascaded
        .iter()
        .zip(alpha)
        .map(|(h, &a)| {
            h.row(0)
                .iter()
                .map(|c| {
                    if a {
                        C64::from_polar(1.0, reference - c.arg())
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect()
        })
        .collect())
}

/// Independent uniform phase shifts per element, reproducible from `seed`.
pub fn random_phases(seed: u64, dims: Dims) -> PhaseConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let phi = (0..dims.l)
        .map(|_| {
            (0..dims.k)
                .map(|_| (0..dims.m).map(|_| C64::from_polar(1.0, -rng.gen_range(0.0..two_pi))).collect())
                .collect()
        })
        .collect();
    PhaseConfig { phi }
}

/// A deployment with per-UE rates recomputed from the channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentSolution {
    pub alpha: Vec<bool>,
    pub phases: PhaseConfig,
    pub tau: Vec<f64>,
    pub certified_rates: Vec<f64>,
    pub certified_snr_db: Vec<f64>,
}

impl DeploymentSolution {
    /// Evaluates `(alpha, phases, tau)` on `set` and stores the resulting rates.
    pub fn certify(
        set: &ChannelSet,
        radio: &RadioConfig,
        alpha: Vec<bool>,
        phases: PhaseConfig,
        tau: Vec<f64>,
    ) -> Result<Self, RadioError> {
        let dims = set.dims();
        check_lengths(dims, &alpha, &tau)?;
        phases.check_dims(dims)?;
        let snrs: Vec<f64> = (0..dims.k)
            .map(|k| snr(&effective_channel_of(set, k, &alpha, &phases), radio))
            .collect();
        Ok(Self {
            certified_rates: snrs.iter().zip(&tau).map(|(&s, &t)| rate(t, s, radio)).collect(),
            certified_snr_db: snrs.iter().map(|&s| linear_to_db(s)).collect(),
            alpha,
            phases,
            tau,
        })
    }

    pub fn num_selected(&self) -> usize {
        self.alpha.iter().filter(|&&a| a).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.alpha.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect()
    }

    pub fn min_rate(&self) -> f64 {
        self.certified_rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether every stored rate meets its threshold (relative slack 1e-6),
    /// the time shares fit in one frame, the selected phases are unit-modulus.
    pub fn meets(&self, thresholds: &[f64]) -> bool {
        let rates_ok = self
            .certified_rates
            .iter()
            .zip(thresholds)
            .all(|(&r, &t)| rate_meets(r, t));
        let tau_ok = self.tau.iter().all(|&t| t >= 0.0) && self.tau.iter().sum::<f64>() <= 1.0 + 1e-9;
        rates_ok && tau_ok && self.phases.max_modulus_error() <= 1e-9
    }
}

pub(crate) fn rate_meets(rate: f64, threshold: f64) -> bool {
    rate >= threshold - 1e-6 * threshold
}

fn check_lengths(dims: Dims, alpha: &[bool], tau: &[f64]) -> Result<(), RadioError> {
    if alpha.len() != dims.l || tau.len() != dims.k {
        return Err(RadioError::Dimension(format!(
            "alpha has {} entries (L={}), tau has {} entries (K={})",
            alpha.len(),
            dims.l,
            tau.len(),
            dims.k
        )));
    }
    Ok(())
}

/// One row of the per-UE report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeReport {
    pub ue_index: usize,
    /// `-inf` for a UE in outage.
    pub snr_db: f64,
    pub rate_bps: f64,
    pub tau: f64,
    pub feasible: bool,
}

/// Recomputes SNR and rate of every UE from the channels and flags each UE
/// against its threshold.
pub fn evaluate_solution(
    set: &ChannelSet,
    sol: &DeploymentSolution,
    radio: &RadioConfig,
    thresholds: &[f64],
) -> Result<Vec<UeReport>, RadioError> {
    let dims = set.dims();
    check_lengths(dims, &sol.alpha, &sol.tau)?;
    sol.phases.check_dims(dims)?;
    if thresholds.len() != dims.k {
        return Err(RadioError::Dimension(format!(
            "{} thresholds for {} UEs",
            thresholds.len(),
            dims.k
        )));
    }
    Ok((0..dims.k)
        .map(|k| {
            let s = snr(&effective_channel_of(set, k, &sol.alpha, &sol.phases), radio);
            let r = rate(sol.tau[k], s, radio);
            UeReport {
                ue_index: k,
                snr_db: linear_to_db(s),
                rate_bps: r,
                tau: sol.tau[k],
                feasible: rate_meets(r, thresholds[k]),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn rand_c(rng: &mut impl Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn unit_radio() -> RadioConfig {
        RadioConfig::default()
    }

    #[test]
    fn no_selection_returns_direct() {
        let h = array![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)];
        let cas = vec![Array2::from_elem((2, 3), C64::new(1.0, 1.0))];
        let ph = vec![Array1::from_elem(3, C64::new(1.0, 0.0))];
        assert_eq!(effective_channel(&h, &cas, &ph, &[false]).unwrap(), h);
    }

    #[test]
    fn single_term_returns_column() {
        let h = Array1::<C64>::zeros(2);
        let cas = vec![array![[C64::new(0.3, 0.1)], [C64::new(-2.0, 1.0)]]];
        let ph = vec![array![C64::new(1.0, 0.0)]];
        let e = effective_channel(&h, &cas, &ph, &[true]).unwrap();
        assert_eq!(e, cas[0].column(0).to_owned());
    }

    #[test]
    fn two_terms_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, m) = (3, 4);
        let h = Array1::from_shape_fn(n, |_| rand_c(&mut rng));
        let cas: Vec<Array2<C64>> = (0..2).map(|_| Array2::from_shape_fn((n, m), |_| rand_c(&mut rng))).collect();
        let ph: Vec<Array1<C64>> = (0..2).map(|_| Array1::from_shape_fn(m, |_| rand_c(&mut rng))).collect();
        let e = effective_channel(&h, &cas, &ph, &[true, true]).unwrap();
        for i in 0..n {
            let mut acc = h[i];
            for l in 0..2 {
                for j in 0..m {
                    acc += cas[l][[i, j]] * ph[l][j];
                }
            }
            assert!((acc - e[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn mrt_basics() {
        let e = array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(mrt_precoder(&e).unwrap(), e);
        assert_eq!(mrt_precoder(&Array1::zeros(3)), Err(RadioError::Outage));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let e = Array1::from_shape_fn(5, |_| rand_c(&mut rng) * 1e-4);
            let w = mrt_precoder(&e).unwrap();
            let norm: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mrt_beats_random_precoders() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = Array1::from_shape_fn(6, |_| rand_c(&mut rng));
        let w = mrt_precoder(&e).unwrap();
        let gain = |w: &Array1<C64>| e.iter().zip(w).map(|(a, b)| a * b).sum::<C64>().norm_sqr();
        let best = gain(&w);
        for _ in 0..1000 {
            let v = Array1::from_shape_fn(6, |_| rand_c(&mut rng));
            let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let v = v / C64::new(n, 0.0);
            assert!(best >= gain(&v));
        }
    }

    #[test]
    fn snr_values() {
        let radio = unit_radio();
        assert_eq!(snr(&Array1::zeros(4), &radio), 0.0);
        let unit_power = (radio.bandwidth_hz * radio.noise_psd_w_per_hz() / radio.tx_power_w()).sqrt();
        let e = array![C64::new(unit_power, 0.0)];
        assert!((snr(&e, &radio) - 1.0).abs() < 1e-12);
        let louder = RadioConfig {
            tx_power_dbm: radio.tx_power_dbm + 10.0 * 2f64.log10(),
            ..radio.clone()
        };
        assert!((snr(&e, &louder) / snr(&e, &radio) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_values() {
        let radio = unit_radio();
        assert_eq!(rate(0.0, 10.0, &radio), 0.0);
        assert_eq!(rate(1.0, 1.0, &radio), 1e9);
        assert_eq!(rate(0.5, 3.0, &radio), 1e9);
    }

    #[test]
    fn aligned_phases_trivial_case() {
        let cas = vec![array![[C64::new(0.5, 0.0), C64::new(2.0, 0.0)]]];
        let ph = aligned_phases_single_antenna(C64::new(1.0, 0.0), &cas, &[true]).unwrap();
        for c in ph[0].iter() {
            assert!((c - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn aligned_phases_reach_modulus_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let h = rand_c(&mut rng);
            let cas: Vec<Array2<C64>> = (0..3).map(|_| Array2::from_shape_fn((1, 4), |_| rand_c(&mut rng))).collect();
            let alpha = [true, false, true];
            let ph = aligned_phases_single_antenna(h, &cas, &alpha).unwrap();
            let e = effective_channel(&array![h], &cas, &ph, &alpha).unwrap();
            let bound = h.norm()
                + cas
                    .iter()
                    .zip(alpha)
                    .filter(|(_, a)| *a)
                    .map(|(c, _)| c.iter().map(|v| v.norm()).sum::<f64>())
                    .sum::<f64>();
            assert!((e[0].norm() - bound).abs() < 1e-9);
        }
    }

    #[test]
    fn aligned_phases_reject_multi_antenna() {
        let cas = vec![Array2::<C64>::zeros((2, 3))];
        assert_eq!(
            aligned_phases_single_antenna(C64::new(1.0, 0.0), &cas, &[true]),
            Err(RadioError::MultiAntenna(2))
        );
    }

    #[test]
    fn random_phases_contract() {
        let dims = Dims { k: 3, l: 2, m: 5, n: 1 };
        let a = random_phases(11, dims);
        assert_eq!(a, random_phases(11, dims));
        assert_ne!(a, random_phases(12, dims));
        assert!(a.max_modulus_error() < 1e-12);
        for l in 0..2 {
            for k in 0..3 {
                assert!(a.radians(l, k).iter().all(|&t| (0.0..2.0 * std::f64::consts::PI).contains(&t)));
            }
        }
    }

    #[test]
    fn random_phase_mean_vanishes() {
        let dims = Dims { k: 1, l: 1, m: 100_000, n: 1 };
        let p = random_phases(3, dims);
        let mean = p.get(0, 0).sum() / C64::new(100_000.0, 0.0);
        assert!(mean.norm() < 0.02);
    }

    #[test]
    fn radians_round_trip() {
        let dims = Dims { k: 2, l: 2, m: 3, n: 1 };
        let p = random_phases(1, dims);
        let angles: Vec<Vec<Vec<f64>>> = (0..2).map(|l| (0..2).map(|k| p.radians(l, k)).collect()).collect();
        let q = PhaseConfig::from_radians(&angles);
        for l in 0..2 {
            for k in 0..2 {
                for (a, b) in p.get(l, k).iter().zip(q.get(l, k).iter()) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn snr_invariant_to_global_phase(seed in 0u64..1000, theta in 0.0f64..6.283) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = Array1::from_shape_fn(4, |_| rand_c(&mut rng) * 1e-4);
            let rotated = e.mapv(|c| c * C64::from_polar(1.0, theta));
            let radio = unit_radio();
            let (a, b) = (snr(&e, &radio), snr(&rotated, &radio));
            proptest::prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn rate_monotone(tau in 0.0f64..1.0, s in 0.0f64..1e4, dt in 0.0f64..0.5, ds in 0.0f64..100.0) {
            let radio = unit_radio();
            let wider = RadioConfig { bandwidth_hz: radio.bandwidth_hz * 2.0, ..radio.clone() };
            let r = rate(tau, s, &radio);
            proptest::prop_assert!(rate((tau + dt).min(1.0), s, &radio) >= r);
            proptest::prop_assert!(rate(tau, s + ds, &radio) >= r);
            proptest::prop_assert!(rate(tau, s, &wider) >= r);
        }
    }
}
