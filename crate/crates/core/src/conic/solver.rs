use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::{AffineExpr, ConeKind, ConicProgram};
use super::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    /// Largest scaled cone/equality violation of `primal`, recomputed here.
    pub max_cone_violation: f64,
    /// `|primal obj − dual obj| / max(1, |primal obj|)`.
    pub rel_gap: f64,
    pub iterations: u32,
}

/// Solves the continuous relaxation (binary marks relaxed to `[0, 1]`).
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    solve_with_fixings(prog, &[], settings)
}

/// Solves the relaxation with the listed variables fixed to the given values.
///
/// `Optimal` is reported only when the recomputed violation and gap meet the
/// tolerances in `settings`; a solve that the backend accepts but that fails
/// the recomputed check is retried once with tightened backend tolerances.
pub fn solve_with_fixings(
    prog: &ConicProgram,
    fixings: &[(usize, f64)],
    settings: &SolverSettings,
) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    if let Some(&(v, _)) = fixings.iter().find(|&&(v, val)| v >= prog.num_vars() || !val.is_finite()) {
        return Err(ConicError::BadFixing(v));
    }
    let first = run_backend(prog, fixings, settings, 1.0);
    if first.status == SolveStatus::NumericalFailure && first.max_cone_violation.is_finite() {
        let second = run_backend(prog, fixings, settings, 1e-2);
        if second.status == SolveStatus::Optimal {
            return Ok(second);
        }
    }
    Ok(first)
}

struct Assembly {
    rows: usize,
    ii: Vec<usize>,
    jj: Vec<usize>,
    vv: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Assembly {
    // Row `r(x) = a·x + c` enters as `-a·x + s = c`, `s ∈ K`.
    fn push_row(&mut self, e: &AffineExpr) {
        for (j, c) in e.merged() {
            self.ii.push(self.rows);
            self.jj.push(j);
            self.vv.push(-c);
        }
        self.b.push(e.constant);
        self.rows += 1;
    }

    fn push_nonneg(&mut self, n: usize) {
        match self.cones.last_mut() {
            Some(SupportedConeT::NonnegativeConeT(d)) => *d += n,
            _ => self.cones.push(SupportedConeT::NonnegativeConeT(n)),
        }
    }
}

fn assemble(prog: &ConicProgram, fixings: &[(usize, f64)]) -> Assembly {
    let mut asm = Assembly {
        rows: 0,
        ii: Vec::new(),
        jj: Vec::new(),
        vv: Vec::new(),
        b: Vec::new(),
        cones: Vec::new(),
    };
    let zero_rows = prog.equalities().len() + fixings.len();
    for e in prog.equalities() {
        asm.push_row(e);
    }
    for &(v, val) in fixings {
        asm.push_row(&AffineExpr::var(v).plus(-val));
    }
    if zero_rows > 0 {
        asm.cones.push(SupportedConeT::ZeroConeT(zero_rows));
    }
    for block in prog.cones() {
        for r in &block.rows {
            asm.push_row(r);
        }
        match block.kind {
            ConeKind::Nonnegative => asm.push_nonneg(block.rows.len()),
            ConeKind::SecondOrder => asm.cones.push(SupportedConeT::SecondOrderConeT(block.rows.len())),
            ConeKind::Exponential => asm.cones.push(SupportedConeT::ExponentialConeT()),
        }
    }
    let fixed: Vec<usize> = fixings.iter().map(|f| f.0).collect();
    let mut boxes = 0;
    for v in prog.binaries().filter(|v| !fixed.contains(v)) {
        asm.push_row(&AffineExpr::var(v));
        asm.push_row(&AffineExpr::term(v, -1.0).plus(1.0));
        boxes += 2;
    }
    if boxes > 0 {
        asm.push_nonneg(boxes);
    }
    asm
}

fn run_backend(prog: &ConicProgram, fixings: &[(usize, f64)], settings: &SolverSettings, tighten: f64) -> ConicSolution {
    let n = prog.num_vars();
    let asm = assemble(prog, fixings);
    let a = CscMatrix::new_from_triplets(asm.rows, n, asm.ii, asm.jj, asm.vv);
    let p = CscMatrix::<f64>::zeros((n, n));
    let backend_settings = DefaultSettings {
        verbose: settings.verbose,
        max_iter: settings.max_iter,
        tol_feas: settings.feas_tol * tighten,
        tol_gap_abs: settings.gap_tol * tighten,
        tol_gap_rel: settings.gap_tol * tighten,
        // The default 1e-8 perturbs the KKT system enough to stall short of
        // 1e-8 residuals on the deployment subproblems.
        static_regularization_constant: 1e-12,
        ..DefaultSettings::default()
    };
    let failure = |status| ConicSolution {
        status,
        primal: vec![f64::NAN; n],
        objective_value: f64::NAN,
        max_cone_violation: f64::INFINITY,
        rel_gap: f64::INFINITY,
        iterations: 0,
    };
    let mut solver = match DefaultSolver::new(&p, prog.objective(), &a, &asm.b, &asm.cones, backend_settings) {
        Ok(s) => s,
        Err(_) => return failure(SolveStatus::NumericalFailure),
    };
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterLimit,
        _ => SolveStatus::NumericalFailure,
    };
    if status != SolveStatus::Optimal {
        return ConicSolution {
            iterations: sol.iterations,
            ..failure(status)
        };
    }
    let x = sol.x.clone();
    let fix_violation = fixings
        .iter()
        .map(|&(v, val)| (x[v] - val).abs() / (1.0 + val.abs()))
        .fold(0.0, f64::max);
    let max_cone_violation = prog.max_violation(&x).max(fix_violation);
    let objective_value = prog.objective_value(&x);
    let rel_gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
    let ok = max_cone_violation <= settings.feas_tol && rel_gap <= settings.gap_tol;
    ConicSolution {
        status: if ok { SolveStatus::Optimal } else { SolveStatus::NumericalFailure },
        primal: x,
        objective_value,
        max_cone_violation,
        rel_gap,
        iterations: sol.iterations,
    }
}
