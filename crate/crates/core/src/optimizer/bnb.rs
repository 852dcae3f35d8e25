//! Best-first branch-and-bound over the binary marks of a conic program.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::conic::{solve_with_fixings, ConicError, ConicProgram, ConicSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    /// Absolute optimality gap used for pruning.
    pub gap_tol: f64,
    pub node_limit: usize,
    /// Distance to `{0, 1}` below which a relaxed binary counts as integral.
    pub integrality_tol: f64,
    pub solver: SolverSettings,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            node_limit: 100_000,
            integrality_tol: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub fixed_zero: Vec<usize>,
    pub fixed_one: Vec<usize>,
    pub relaxation_bound: f64,
    pub depth: usize,
}

impl BnbNode {
    fn fixings(&self) -> Vec<(usize, f64)> {
        self.fixed_zero
            .iter()
            .map(|&v| (v, 0.0))
            .chain(self.fixed_one.iter().map(|&v| (v, 1.0)))
            .collect()
    }

    fn is_fixed(&self, v: usize) -> bool {
        self.fixed_zero.contains(&v) || self.fixed_one.contains(&v)
    }

    fn child(&self, var: usize, one: bool, bound: f64) -> Self {
        let mut c = self.clone();
        if one {
            c.fixed_one.push(var);
        } else {
            c.fixed_zero.push(var);
        }
        c.relaxation_bound = bound;
        c.depth += 1;
        c
    }
}

struct Queued {
    node: BnbNode,
    seq: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // BinaryHeap is a max-heap: reverse so the lowest bound, then the
    // earliest insertion, is popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .node
            .relaxation_bound
            .total_cmp(&self.node.relaxation_bound)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOutcome {
    /// `Optimal` with integral binaries, `IterLimit` with the incumbent (if
    /// any) when the node limit is hit, `Infeasible` when no node is feasible.
    pub solution: ConicSolution,
    pub nodes: usize,
}

fn most_fractional(prog: &ConicProgram, node: &BnbNode, x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for v in prog.binaries().filter(|&v| !node.is_fixed(v)) {
        let frac = (x[v] - x[v].round()).abs();
        if frac > tol && best.map_or(true, |(_, f)| frac > f) {
            best = Some((v, frac));
        }
    }
    best.map(|b| b.0)
}

fn empty_solution(status: SolveStatus, n: usize) -> ConicSolution {
    ConicSolution {
        status,
        primal: vec![f64::NAN; n],
        objective_value: f64::INFINITY,
        max_cone_violation: f64::INFINITY,
        rel_gap: f64::INFINITY,
        iterations: 0,
    }
}

/// Minimises `prog` with every binary mark restricted to `{0, 1}`.
///
/// Nodes are explored lowest bound first; branching picks the most
/// fractional binary, lowest index on ties. When a node's relaxation is
/// integral the program is re-solved with all binaries fixed at the rounded
/// values, so incumbents are exactly integral.
pub fn branch_and_bound(prog: &ConicProgram, config: &BnbConfig) -> Result<BnbOutcome, ConicError> {
    prog.validate()?;
    let n = prog.num_vars();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Queued {
        node: BnbNode {
            fixed_zero: Vec::new(),
            fixed_one: Vec::new(),
            relaxation_bound: f64::NEG_INFINITY,
            depth: 0,
        },
        seq,
    });
    let mut incumbent: Option<ConicSolution> = None;
    let mut nodes = 0;
    let mut hit_limit = false;

    while let Some(Queued { node, .. }) = heap.pop() {
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |s| s.objective_value - config.gap_tol);
        if node.relaxation_bound >= cutoff {
            continue;
        }
        if nodes >= config.node_limit {
            hit_limit = true;
            break;
        }
        nodes += 1;
        let sol = solve_with_fixings(prog, &node.fixings(), &config.solver)?;
        let (bound, branch_var, x) = match sol.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Optimal => {
                let bound = sol.objective_value.max(node.relaxation_bound);
                if bound >= cutoff {
                    continue;
                }
                match most_fractional(prog, &node, &sol.primal, config.integrality_tol) {
                    Some(v) => (bound, v, Some(sol.primal)),
                    None => {
                        let mut fixings = node.fixings();
                        fixings.extend(
                            prog.binaries()
                                .filter(|&v| !node.is_fixed(v))
                                .map(|v| (v, sol.primal[v].round().clamp(0.0, 1.0))),
                        );
                        let leaf = if fixings.len() == node.fixings().len() {
                            sol
                        } else {
                            solve_with_fixings(prog, &fixings, &config.solver)?
                        };
                        if leaf.status == SolveStatus::Optimal && leaf.objective_value < cutoff + config.gap_tol {
                            let better = incumbent.as_ref().map_or(true, |s| leaf.objective_value < s.objective_value);
                            if better {
                                incumbent = Some(leaf);
                            }
                        }
                        continue;
                    }
                }
            }
            // Unreliable relaxation: keep the parent bound and split on the
            // first free binary.
            _ => match prog.binaries().find(|&v| !node.is_fixed(v)) {
                Some(v) => (node.relaxation_bound, v, None),
                None => continue,
            },
        };
        // Explore the rounding direction first among equal bounds.
        let up_first = x.as_ref().map_or(false, |x| x[branch_var] >= 0.5);
        for one in [up_first, !up_first] {
            seq += 1;
            heap.push(Queued {
                node: node.child(branch_var, one, bound),
                seq,
            });
        }
    }

    let solution = match incumbent {
        Some(mut s) => {
            if hit_limit {
                s.status = SolveStatus::IterLimit;
            }
            s
        }
        None if hit_limit => empty_solution(SolveStatus::IterLimit, n),
        None => empty_solution(SolveStatus::Infeasible, n),
    };
    Ok(BnbOutcome { solution, nodes })
}

/// Solves the program once per binary pattern (`2^B` solves) and keeps the
/// best. Only meant for small `B`; used as a reference for
/// [`branch_and_bound`].
pub fn exhaustive_enumeration(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    let bins: Vec<usize> = prog.binaries().collect();
    assert!(bins.len() < 24, "exhaustive enumeration over {} binaries", bins.len());
    let mut best = empty_solution(SolveStatus::Infeasible, prog.num_vars());
    for pattern in 0u32..(1 << bins.len()) {
        let fixings: Vec<(usize, f64)> = bins
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, f64::from((pattern >> i) & 1)))
            .collect();
        let s = solve_with_fixings(prog, &fixings, settings)?;
        if s.status == SolveStatus::Optimal && (best.status != SolveStatus::Optimal || s.objective_value < best.objective_value) {
            best = s;
        }
    }
    Ok(best)
}
