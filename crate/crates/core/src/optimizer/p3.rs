//! The convexified deployment subproblem solved at every outer iteration.
//!
//! Variables: `α_l ∈ {0,1}`, `τ_k`, `τ̃_k`, `d_k`, slack `s_k`, and (full form)
//! the stacked RIS vectors `z_k`. For every UE with a positive threshold
//!
//! ```text
//! s_k + 1 − d_k + γ(c_k − ζᴴA_kζ) + 2γ Re(z_kᴴ(A_kζ + b_k)) ≥ 0,   γ = P/(B N0)
//! ```
//!
//! which is the linearised SNR constraint `SNR_k ≥ d_k − 1` with the slack
//! expressed in SNR units. The compact form eliminates `z_k` exactly: under
//! `|z_{k,l,m}| ≤ α_l` the largest value of `Re(z_kᴴ v)` is
//! `Σ_l α_l Σ_m |v_{l,m}|`, attained at `z_{k,l,m} = α_l v_{l,m}/|v_{l,m}|`.

use ndarray::{s, Array1};
use thiserror::Error;

use super::quad::{Linearization, QuadModel};
use crate::channel::Dims;
use crate::conic::{add_rate_expcone, add_time_allocation_soc, AffineExpr, ComplexAffine, ComplexVar, ConicProgram};
use crate::scene::RadioConfig;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum P3Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P3Form {
    /// `z_k` eliminated in closed form; `L + 4K` variables.
    #[default]
    Compact,
    /// Explicit realified `z_k` with `K·L·M` modulus cones.
    Full,
}

/// Variable indices of an assembled subproblem. UEs with a zero threshold
/// carry only `τ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct P3Layout {
    pub alpha: Vec<usize>,
    pub tau: Vec<usize>,
    pub tau_tilde: Vec<Option<usize>>,
    pub d: Vec<Option<usize>>,
    pub s: Vec<Option<usize>>,
    /// `z[k][l·M + m]`, full form only.
    pub z: Option<Vec<Vec<ComplexVar>>>,
}

#[derive(Debug, Clone)]
pub struct P3 {
    pub program: ConicProgram,
    pub layout: P3Layout,
    pub linearizations: Vec<Linearization>,
    pub snr_scale: f64,
    dims: Dims,
}

/// Assembles the subproblem linearised at `zeta` (one stacked vector per UE).
pub fn build_p3<Q: QuadModel + ?Sized>(
    model: &Q,
    zeta: &[Array1<C64>],
    thresholds: &[f64],
    radio: &RadioConfig,
    omega: f64,
    form: P3Form,
) -> Result<P3, P3Error> {
    let dims = model.dims();
    let lm = dims.l * dims.m;
    if zeta.len() != dims.k || zeta.iter().any(|z| z.len() != lm) {
        return Err(P3Error::Dimension(format!(
            "need {} linearisation points of length {lm}",
            dims.k
        )));
    }
    if thresholds.len() != dims.k {
        return Err(P3Error::Dimension(format!("{} thresholds for {} UEs", thresholds.len(), dims.k)));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(P3Error::Invalid(format!("threshold {t} is not a finite nonnegative rate")));
    }
    if !(omega > 0.0) {
        return Err(P3Error::Invalid(format!("penalty {omega} must be positive")));
    }
    let gamma = radio.snr_scale();
    let bandwidth = radio.bandwidth_hz;

    let mut prog = ConicProgram::new();
    let alpha: Vec<usize> = (0..dims.l).map(|_| prog.add_var()).collect();
    for &a in &alpha {
        prog.mark_binary(a);
        prog.add_objective(a, 1.0);
    }
    let tau: Vec<usize> = (0..dims.k).map(|_| prog.add_var()).collect();
    let z = match form {
        P3Form::Full => Some(
            (0..dims.k)
                .map(|_| ComplexVar::declare_many(&mut prog, lm))
                .collect::<Vec<_>>(),
        ),
        P3Form::Compact => None,
    };

    let mut layout = P3Layout {
        alpha: alpha.clone(),
        tau: tau.clone(),
        tau_tilde: vec![None; dims.k],
        d: vec![None; dims.k],
        s: vec![None; dims.k],
        z,
    };
    let mut linearizations = Vec::with_capacity(dims.k);
    let mut nonneg = Vec::new();

    for k in 0..dims.k {
        let lin = model.linearize(k, zeta[k].view());
        nonneg.push(AffineExpr::var(tau[k]));
        if thresholds[k] > 0.0 {
            let tt = prog.add_var();
            let d = prog.add_var();
            let sk = prog.add_var();
            prog.add_objective(sk, omega);
            add_time_allocation_soc(&mut prog, tau[k], tt);
            add_rate_expcone(&mut prog, d, tt, thresholds[k], bandwidth);
            nonneg.push(AffineExpr::var(sk));

            let mut row = AffineExpr::var(sk)
                .with(d, -1.0)
                .plus(1.0 + gamma * (lin.c - lin.quad));
            match &layout.z {
                Some(zv) => row.add_expr(&ComplexAffine::re_conj_inner(lin.grad.as_slice().unwrap(), &zv[k]), 2.0 * gamma),
                None => {
                    for (l, &a) in alpha.iter().enumerate() {
                        let w: f64 = lin.grad.slice(s![l * dims.m..(l + 1) * dims.m]).iter().map(|c| c.norm()).sum();
                        if w > 0.0 {
                            row.add_term(a, 2.0 * gamma * w);
                        }
                    }
                }
            }
            // The constant can reach 1e6 for strong links; a positive rescale
            // leaves the half-space unchanged and keeps the solver's residuals
            // comparable across UEs.
            let sigma = row.constant.abs().max(1.0);
            let mut scaled = AffineExpr::default();
            scaled.add_expr(&row, 1.0 / sigma);
            nonneg.push(scaled);
            layout.tau_tilde[k] = Some(tt);
            layout.d[k] = Some(d);
            layout.s[k] = Some(sk);
        }
        linearizations.push(lin);
    }

    let mut budget = AffineExpr::constant(1.0);
    for &t in &tau {
        budget.add_term(t, -1.0);
    }
    nonneg.push(budget);
    prog.add_nonneg(nonneg);

    if let Some(zv) = &layout.z {
        for zk in zv {
            for (l, &a) in alpha.iter().enumerate() {
                for zm in &zk[l * dims.m..(l + 1) * dims.m] {
                    ComplexAffine::var(*zm).add_modulus_bound(&mut prog, AffineExpr::var(a));
                }
            }
        }
    }

    Ok(P3 {
        program: prog,
        layout,
        linearizations,
        snr_scale: gamma,
        dims,
    })
}

impl P3 {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn alpha_values(&self, x: &[f64]) -> Vec<f64> {
        self.layout.alpha.iter().map(|&i| x[i]).collect()
    }

    pub fn tau_values(&self, x: &[f64]) -> Vec<f64> {
        self.layout.tau.iter().map(|&i| x[i]).collect()
    }

    /// `Σ s_k` in SNR units.
    pub fn slack_sum(&self, x: &[f64]) -> f64 {
        self.layout.s.iter().flatten().map(|&i| x[i].max(0.0)).sum()
    }

    /// The stacked RIS vectors at a solution. In compact form these are the
    /// maximisers `α_l v/|v|` of the eliminated inner problem (`α_l` where
    /// `v = 0`).
    pub fn recover_z(&self, x: &[f64]) -> Vec<Array1<C64>> {
        let m = self.dims.m;
        match &self.layout.z {
            Some(zv) => zv.iter().map(|zk| zk.iter().map(|v| v.value(x)).collect()).collect(),
            None => self
                .linearizations
                .iter()
                .map(|lin| {
                    lin.grad
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let a = x[self.layout.alpha[i / m]].clamp(0.0, 1.0);
                            let n = v.norm();
                            if n > 0.0 {
                                v * (a / n)
                            } else {
                                C64::new(a, 0.0)
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSet;
    use crate::conic::{solve, ConeKind, SolveStatus, SolverSettings};
    use crate::optimizer::quad::surrogate_lhs;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut impl Rng, scale: f64) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    }

    pub(crate) fn random_set(rng: &mut impl Rng, d: Dims, scale: f64) -> ChannelSet {
        ChannelSet::new(
            (0..d.k).map(|_| Array1::from_shape_fn(d.n, |_| rand_c(rng, scale))).collect(),
            (0..d.l).map(|_| Array2::from_shape_fn((d.m, d.n), |_| rand_c(rng, 1.0))).collect(),
            (0..d.l)
                .map(|_| (0..d.k).map(|_| Array1::from_shape_fn(d.m, |_| rand_c(rng, scale))).collect())
                .collect(),
        )
        .unwrap()
    }

    fn radio() -> RadioConfig {
        RadioConfig::default()
    }

    fn unit_zeta(rng: &mut impl Rng, d: Dims) -> Vec<Array1<C64>> {
        (0..d.k)
            .map(|_| Array1::from_shape_fn(d.l * d.m, |_| C64::from_polar(1.0, rng.gen_range(0.0..6.28))))
            .collect()
    }

    #[test]
    fn counting_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dims { k: 3, l: 2, m: 4, n: 2 };
        let set = random_set(&mut rng, d, 1e-5);
        let zeta = unit_zeta(&mut rng, d);
        let p = build_p3(&set, &zeta, &[1e8; 3], &radio(), 100.0, P3Form::Full).unwrap();
        assert_eq!(p.program.count_cones(ConeKind::Exponential), 3);
        let socs = p.program.cones().iter().filter(|c| c.kind == ConeKind::SecondOrder);
        assert_eq!(socs.clone().filter(|c| c.rows.len() == 3).count(), 3 * 2 * 4);
        assert_eq!(socs.filter(|c| c.rows.len() == 4).count(), 3);
        assert_eq!(p.program.num_binaries(), 2);
    }

    #[test]
    fn row_at_zeta_matches_exact_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Dims { k: 2, l: 2, m: 3, n: 2 };
        let set = random_set(&mut rng, d, 1.0);
        let zeta = unit_zeta(&mut rng, d);
        let p = build_p3(&set, &zeta, &[1.0; 2], &radio(), 100.0, P3Form::Compact).unwrap();
        for k in 0..2 {
            let lin = &p.linearizations[k];
            let exact = set.value(k, zeta[k].view()) - lin.c;
            assert!((surrogate_lhs(lin, zeta[k].view()) + exact).abs() < 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn compact_and_full_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..5 {
            let d = Dims { k: 2, l: 3, m: 2, n: 1 };
            let set = random_set(&mut rng, d, 1e-5);
            let zeta = unit_zeta(&mut rng, d);
            let thresholds = [2e8, 1e8 * (trial + 1) as f64];
            let settings = SolverSettings { feas_tol: 1e-10, gap_tol: 1e-10, ..SolverSettings::default() };
            let a = build_p3(&set, &zeta, &thresholds, &radio(), 100.0, P3Form::Compact).unwrap();
            let b = build_p3(&set, &zeta, &thresholds, &radio(), 100.0, P3Form::Full).unwrap();
            let sa = solve(&a.program, &settings).unwrap();
            let sb = solve(&b.program, &settings).unwrap();
            assert_eq!(sa.status, SolveStatus::Optimal);
            assert_eq!(sb.status, SolveStatus::Optimal);
            let tol = 1e-6 * sa.objective_value.abs().max(1.0);
            assert!(
                (sa.objective_value - sb.objective_value).abs() < tol,
                "{} vs {}",
                sa.objective_value,
                sb.objective_value
            );
        }
    }

    #[test]
    fn zero_thresholds_need_no_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Dims { k: 3, l: 2, m: 2, n: 2 };
        let set = random_set(&mut rng, d, 1e-5);
        let zeta = unit_zeta(&mut rng, d);
        let p = build_p3(&set, &zeta, &[0.0; 3], &radio(), 100.0, P3Form::Compact).unwrap();
        assert_eq!(p.program.count_cones(ConeKind::Exponential), 0);
        let s = solve(&p.program, &SolverSettings::default()).unwrap();
        assert!(s.objective_value.abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dims { k: 2, l: 2, m: 2, n: 1 };
        let set = random_set(&mut rng, d, 1.0);
        let zeta = unit_zeta(&mut rng, d);
        assert!(matches!(
            build_p3(&set, &zeta[..1], &[1.0; 2], &radio(), 100.0, P3Form::Compact),
            Err(P3Error::Dimension(_))
        ));
        assert!(matches!(
            build_p3(&set, &zeta, &[1.0, -1.0], &radio(), 100.0, P3Form::Compact),
            Err(P3Error::Invalid(_))
        ));
        assert!(matches!(
            build_p3(&set, &zeta, &[1.0; 2], &radio(), 0.0, P3Form::Compact),
            Err(P3Error::Invalid(_))
        ));
    }

    #[test]
    fn recovered_z_respects_modulus_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = Dims { k: 2, l: 3, m: 2, n: 2 };
        let set = random_set(&mut rng, d, 1e-5);
        let zeta = unit_zeta(&mut rng, d);
        let p = build_p3(&set, &zeta, &[3e8; 2], &radio(), 100.0, P3Form::Compact).unwrap();
        let s = solve(&p.program, &SolverSettings::default()).unwrap();
        let alpha = p.alpha_values(&s.primal);
        for zk in p.recover_z(&s.primal) {
            for (i, v) in zk.iter().enumerate() {
                assert!(v.norm() <= alpha[i / 2].clamp(0.0, 1.0) + 1e-12);
            }
        }
    }
}
