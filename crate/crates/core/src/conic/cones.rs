use super::program::{AffineExpr, ConicProgram};

/// `τ·τ̃ ≥ 1, τ, τ̃ ≥ 0` as `‖(τ, τ̃, √2)‖ ≤ τ + τ̃`.
pub fn add_time_allocation_soc(prog: &mut ConicProgram, tau: usize, tau_tilde: usize) {
    prog.add_soc(
        AffineExpr::var(tau).with(tau_tilde, 1.0),
        vec![
            AffineExpr::var(tau),
            AffineExpr::var(tau_tilde),
            AffineExpr::constant(std::f64::consts::SQRT_2),
        ],
    );
}

/// `d ≥ 2^{R̄·τ̃/B}` as the exponential-cone membership
/// `(ln2·R̄·τ̃/B, 1, d)`.
pub fn add_rate_expcone(prog: &mut ConicProgram, d: usize, tau_tilde: usize, threshold_bps: f64, bandwidth_hz: f64) {
    prog.add_exp(
        AffineExpr::term(tau_tilde, std::f64::consts::LN_2 * threshold_bps / bandwidth_hz),
        AffineExpr::constant(1.0),
        AffineExpr::var(d),
    );
}

/// `max(0, ‖x‖ − t)`.
pub fn soc_violation(t: f64, x: &[f64]) -> f64 {
    let norm = x.iter().fold(0.0f64, |acc, &v| acc.hypot(v));
    (norm - t).max(0.0)
}

/// Violation of `c ≥ b·e^{a/b}, b > 0`, using the closure
/// `{a ≤ 0, b = 0, c ≥ 0}` when `b ≤ 0`.
pub fn exp_cone_violation(a: f64, b: f64, c: f64) -> f64 {
    if b > 0.0 {
        (b * (a / b).exp() - c).max(0.0)
    } else {
        (-b) + a.max(0.0) + (-c).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn time_rows_violation(tau: f64, tt: f64) -> f64 {
        let mut p = ConicProgram::new();
        let a = p.add_var();
        let b = p.add_var();
        add_time_allocation_soc(&mut p, a, b);
        p.cones()[0].violation(&[tau, tt])
    }

    #[test]
    fn time_allocation_examples() {
        assert!(time_rows_violation(1.0, 1.0) < 1e-15);
        assert!(time_rows_violation(0.5, 2.0) < 1e-15);
        assert!(time_rows_violation(0.5, 1.0) > 1e-3);
        assert!(time_rows_violation(4.0, 1.0) == 0.0);
    }

    #[test]
    fn rate_expcone_boundary() {
        let mut p = ConicProgram::new();
        let d = p.add_var();
        let t = p.add_var();
        add_rate_expcone(&mut p, d, t, 1.0, 1.0);
        let block = &p.cones()[0];
        assert_eq!(block.violation(&[1.0, 0.0]), 0.0);
        assert!(block.violation(&[2.0, 1.0]) < 1e-15);
        assert!(block.violation(&[1.99, 1.0]) > 1e-4);
        let x = 3.3219f64;
        assert!((2f64.powf(x) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn closure_of_exp_cone() {
        assert_eq!(exp_cone_violation(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(exp_cone_violation(1.0, 0.0, 0.0), 1.0);
        assert_eq!(exp_cone_violation(0.0, 1.0, 1.0), 0.0);
    }
}
