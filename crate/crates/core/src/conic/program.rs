use std::collections::BTreeSet;
use std::fmt::Write;

use super::cones::{exp_cone_violation, soc_violation};
use super::ConicError;

/// `constant + Σ coef·x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, coef: f64) -> Self {
        Self {
            terms: vec![(i, coef)],
            constant: 0.0,
        }
    }

    pub fn with(mut self, i: usize, coef: f64) -> Self {
        self.terms.push((i, coef));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, i: usize, coef: f64) {
        self.terms.push((i, coef));
    }

    pub fn add_expr(&mut self, other: &AffineExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Terms sorted by variable with repeated variables merged and zeros dropped.
    pub fn merged(&self) -> Vec<(usize, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Nonnegative,
    SecondOrder,
    Exponential,
}

impl ConeKind {
    fn name(self) -> &'static str {
        match self {
            ConeKind::Nonnegative => "nonnegative",
            ConeKind::SecondOrder => "second-order",
            ConeKind::Exponential => "exponential",
        }
    }
}

/// Membership of a list of affine rows in one cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<AffineExpr>,
}

impl ConeBlock {
    /// Distance-like violation at `x`, scaled by `1 + max |row|`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        let raw = match self.kind {
            ConeKind::Nonnegative => vals.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max),
            ConeKind::SecondOrder => soc_violation(vals[0], &vals[1..]),
            ConeKind::Exponential => exp_cone_violation(vals[0], vals[1], vals[2]),
        };
        raw / (1.0 + vals.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }
}

/// Minimise `objective·x + objective_constant` subject to `equalities = 0`
/// and cone memberships. Variables marked binary are relaxed to `[0, 1]`
/// when solved directly.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    pub objective_constant: f64,
    equalities: Vec<AffineExpr>,
    cones: Vec<ConeBlock>,
    binaries: BTreeSet<usize>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    /// Declares `n` consecutive variables and returns the first index.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += n;
        self.objective.resize(self.num_vars, 0.0);
        first
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// `expr = 0`.
    pub fn add_equality(&mut self, expr: AffineExpr) {
        self.equalities.push(expr);
    }

    /// Every row `≥ 0`.
    pub fn add_nonneg(&mut self, rows: Vec<AffineExpr>) {
        self.cones.push(ConeBlock {
            kind: ConeKind::Nonnegative,
            rows,
        });
    }

    /// `‖x‖₂ ≤ t`.
    pub fn add_soc(&mut self, t: AffineExpr, x: Vec<AffineExpr>) {
        let mut rows = Vec::with_capacity(x.len() + 1);
        rows.push(t);
        rows.extend(x);
        self.cones.push(ConeBlock {
            kind: ConeKind::SecondOrder,
            rows,
        });
    }

    /// `c ≥ b·e^{a/b}`.
    pub fn add_exp(&mut self, a: AffineExpr, b: AffineExpr, c: AffineExpr) {
        self.cones.push(ConeBlock {
            kind: ConeKind::Exponential,
            rows: vec![a, b, c],
        });
    }

    pub fn mark_binary(&mut self, var: usize) {
        self.binaries.insert(var);
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.binaries.iter().copied()
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries.len()
    }

    pub fn cones(&self) -> &[ConeBlock] {
        &self.cones
    }

    pub fn equalities(&self) -> &[AffineExpr] {
        &self.equalities
    }

    pub fn count_cones(&self, kind: ConeKind) -> usize {
        self.cones.iter().filter(|c| c.kind == kind).count()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(ConicError::NonFinite("objective".into()));
        }
        for (i, eq) in self.equalities.iter().enumerate() {
            self.check_expr(eq, usize::MAX, &format!("equality {i}"))?;
        }
        for (b, block) in self.cones.iter().enumerate() {
            let n = block.rows.len();
            let (ok, expected) = match block.kind {
                ConeKind::Nonnegative => (n >= 1, "at least 1"),
                ConeKind::SecondOrder => (n >= 2, "at least 2"),
                ConeKind::Exponential => (n == 3, "exactly 3"),
            };
            if !ok {
                return Err(ConicError::BadBlockSize {
                    block: b,
                    kind: block.kind.name(),
                    expected,
                    got: n,
                });
            }
            for row in &block.rows {
                self.check_expr(row, b, &format!("cone block {b}"))?;
            }
        }
        if let Some(&v) = self.binaries.iter().find(|&&v| v >= self.num_vars) {
            return Err(ConicError::UnknownVariable {
                block: usize::MAX,
                var: v,
                num_vars: self.num_vars,
            });
        }
        Ok(())
    }

    fn check_expr(&self, e: &AffineExpr, block: usize, what: &str) -> Result<(), ConicError> {
        if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) {
            return Err(ConicError::NonFinite(what.to_string()));
        }
        if let Some(&(var, _)) = e.terms.iter().find(|t| t.0 >= self.num_vars) {
            return Err(ConicError::UnknownVariable {
                block,
                var,
                num_vars: self.num_vars,
            });
        }
        Ok(())
    }

    /// Largest scaled violation over all cone blocks and equalities, plus the
    /// `[0, 1]` box of binary variables.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let cones = self.cones.iter().map(|c| c.violation(x));
        let eqs = self.equalities.iter().map(|e| {
            let v = e.eval(x);
            v.abs() / (1.0 + v.abs())
        });
        let boxes = self.binaries.iter().map(|&i| (-x[i]).max(x[i] - 1.0).max(0.0));
        cones.chain(eqs).chain(boxes).fold(0.0, f64::max)
    }

    /// Text listing for regression snapshots: a header, the objective, then
    /// one line per cone block followed by its rows as `row var coef`
    /// triplets (`row const value` for nonzero constants).
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "VARS {}", self.num_vars).unwrap();
        let bins: Vec<String> = self.binaries.iter().map(|b| b.to_string()).collect();
        writeln!(out, "BINARY {}", bins.join(" ")).unwrap();
        write!(out, "OBJ const {}", self.objective_constant).unwrap();
        for (i, &c) in self.objective.iter().enumerate().filter(|(_, &c)| c != 0.0) {
            write!(out, " {i}:{c}").unwrap();
        }
        out.push('\n');
        let dump_rows = |out: &mut String, rows: &[AffineExpr]| {
            for (r, row) in rows.iter().enumerate() {
                for (i, c) in row.merged() {
                    writeln!(out, "{r} {i} {c}").unwrap();
                }
                if row.constant != 0.0 {
                    writeln!(out, "{r} const {}", row.constant).unwrap();
                }
            }
        };
        if !self.equalities.is_empty() {
            writeln!(out, "ZERO dim={}", self.equalities.len()).unwrap();
            dump_rows(&mut out, &self.equalities);
        }
        for block in &self.cones {
            match block.kind {
                ConeKind::Nonnegative => writeln!(out, "NONNEG dim={}", block.rows.len()),
                ConeKind::SecondOrder => writeln!(out, "SOC dim={}", block.rows.len()),
                ConeKind::Exponential => writeln!(out, "EXP"),
            }
            .unwrap();
            dump_rows(&mut out, &block.rows);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_combines_repeats() {
        let e = AffineExpr::var(3).with(1, 2.0).with(3, -1.0).with(1, 0.5);
        assert_eq!(e.merged(), vec![(1, 2.5)]);
        assert_eq!(e.eval(&[0.0, 2.0, 0.0, 7.0]), 5.0);
    }

    #[test]
    fn validate_rejects_unknown_variable() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_nonneg(vec![AffineExpr::var(x + 1)]);
        assert!(matches!(p.validate(), Err(ConicError::UnknownVariable { var: 1, .. })));
    }

    #[test]
    fn validate_checks_block_sizes() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_soc(AffineExpr::var(x), vec![]);
        assert!(matches!(p.validate(), Err(ConicError::BadBlockSize { .. })));
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.cones.push(ConeBlock {
            kind: ConeKind::Exponential,
            rows: vec![AffineExpr::var(x); 2],
        });
        assert!(matches!(p.validate(), Err(ConicError::BadBlockSize { got: 2, .. })));
    }

    #[test]
    fn dump_format() {
        let mut p = ConicProgram::new();
        let t = p.add_var();
        let x = p.add_var();
        p.add_objective(t, 1.0);
        p.add_soc(AffineExpr::var(t), vec![AffineExpr::var(x).plus(-1.0)]);
        p.add_exp(AffineExpr::var(x), AffineExpr::constant(1.0), AffineExpr::var(t));
        p.add_nonneg(vec![AffineExpr::var(x), AffineExpr::var(t)]);
        let d = p.debug_dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(
            lines,
            [
                "VARS 2",
                "BINARY ",
                "OBJ const 0 0:1",
                "SOC dim=2",
                "0 0 1",
                "1 1 1",
                "1 const -1",
                "EXP",
                "0 1 1",
                "1 const 1",
                "2 0 1",
                "NONNEG dim=2",
                "0 1 1",
                "1 0 1",
            ]
        );
    }

    #[test]
    fn violation_measures() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.add_nonneg(vec![AffineExpr::var(x)]);
        assert_eq!(p.max_violation(&[1.0]), 0.0);
        assert!((p.max_violation(&[-1.0]) - 0.5).abs() < 1e-15);
        p.mark_binary(x);
        assert!(p.max_violation(&[1.5]) >= 0.5);
    }
}
