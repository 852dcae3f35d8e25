use ndarray::{Array1, Array2};

use super::program::{AffineExpr, ConicProgram};
use crate::C64;

/// A complex variable stored as a pair of real variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexVar {
    pub re: usize,
    pub im: usize,
}

impl ComplexVar {
    pub fn declare(prog: &mut ConicProgram) -> Self {
        let re = prog.add_vars(2);
        Self { re, im: re + 1 }
    }

    /// Declares `n` complex variables laid out `re, im, re, im, …`.
    pub fn declare_many(prog: &mut ConicProgram, n: usize) -> Vec<Self> {
        let first = prog.add_vars(2 * n);
        (0..n)
            .map(|i| Self {
                re: first + 2 * i,
                im: first + 2 * i + 1,
            })
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> C64 {
        C64::new(x[self.re], x[self.im])
    }
}

/// Complex affine expression kept as its real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexAffine {
    pub re: AffineExpr,
    pub im: AffineExpr,
}

impl ComplexAffine {
    pub fn constant(c: C64) -> Self {
        Self {
            re: AffineExpr::constant(c.re),
            im: AffineExpr::constant(c.im),
        }
    }

    pub fn var(z: ComplexVar) -> Self {
        Self {
            re: AffineExpr::var(z.re),
            im: AffineExpr::var(z.im),
        }
    }

    /// Adds `a·z`.
    pub fn add_scaled(&mut self, a: C64, z: ComplexVar) {
        self.re.add_term(z.re, a.re);
        self.re.add_term(z.im, -a.im);
        self.im.add_term(z.re, a.im);
        self.im.add_term(z.im, a.re);
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    /// `Re(ūᵀz) = Σ Re u_i·Re z_i + Im u_i·Im z_i`.
    pub fn re_conj_inner(u: &[C64], z: &[ComplexVar]) -> AffineExpr {
        let mut e = AffineExpr::default();
        for (c, v) in u.iter().zip(z) {
            e.add_term(v.re, c.re);
            e.add_term(v.im, c.im);
        }
        e
    }

    /// `|self| ≤ bound` as the 3-row cone `(bound, Re, Im)`.
    pub fn add_modulus_bound(&self, prog: &mut ConicProgram, bound: AffineExpr) {
        prog.add_soc(bound, vec![self.re.clone(), self.im.clone()]);
    }
}

/// Lifts `A z = b` over `ℂⁿ` to the real system
/// `[[Re A, −Im A], [Im A, Re A]]·[Re z; Im z] = [Re b; Im b]`.
pub fn realify_system(a: &Array2<C64>, b: &Array1<C64>) -> (Array2<f64>, Array1<f64>) {
    let (m, n) = a.dim();
    let mut ar = Array2::zeros((2 * m, 2 * n));
    for i in 0..m {
        for j in 0..n {
            let c = a[[i, j]];
            ar[[i, j]] = c.re;
            ar[[i, j + n]] = -c.im;
            ar[[i + m, j]] = c.im;
            ar[[i + m, j + n]] = c.re;
        }
    }
    let br = b.iter().map(|c| c.re).chain(b.iter().map(|c| c.im)).collect();
    (ar, br)
}
