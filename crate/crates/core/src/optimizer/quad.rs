//! Quadratic form of the received power in the stacked RIS variable.
//!
//! With `H_k = [H_{1,k}, …, H_{L,k}]` and `z_k` stacking `α_l φ_{l,k}`,
//! `‖h_k + H_k z_k‖² = z_kᴴ A_k z_k + 2 Re(z_kᴴ b_k) + c_k` where
//! `A_k = H_kᴴ H_k`, `b_k = H_kᴴ h_k`, `c_k = ‖h_k‖²`.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::channel::{ChannelSet, Dims};
use crate::C64;

/// Quantities needed to linearise `z ↦ zᴴ A_k z` at `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    /// `ζᴴ A_k ζ`.
    pub quad: f64,
    /// `A_k ζ + b_k`.
    pub grad: Array1<C64>,
    /// `c_k`.
    pub c: f64,
}

/// Access to the per-UE quadratic forms, either dense or matrix-free.
pub trait QuadModel {
    fn dims(&self) -> Dims;

    fn linearize(&self, k: usize, zeta: ArrayView1<C64>) -> Linearization;

    /// `‖h_k + H_k z‖²`.
    fn value(&self, k: usize, z: ArrayView1<C64>) -> f64;
}

/// Dense `A_k`, `b_k`, `c_k` for every UE.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadData {
    dims: Dims,
    pub a: Vec<Array2<C64>>,
    pub b: Vec<Array1<C64>>,
    pub c: Vec<f64>,
}

/// `H_k = [H_{1,k}, …, H_{L,k}]`, shape `N×LM`.
pub fn stacked_cascade(set: &ChannelSet, k: usize) -> Array2<C64> {
    let d = set.dims();
    let mut out = Array2::zeros((d.n, d.l * d.m));
    for l in 0..d.l {
        out.slice_mut(s![.., l * d.m..(l + 1) * d.m]).assign(&set.cascaded(l, k));
    }
    out
}

fn hermitian_transpose(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|c| c.conj())
}

pub fn build_quad_data(set: &ChannelSet) -> QuadData {
    let dims = set.dims();
    let mut a = Vec::with_capacity(dims.k);
    let mut b = Vec::with_capacity(dims.k);
    let mut c = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let h = stacked_cascade(set, k);
        let hh = hermitian_transpose(&h);
        let direct = set.direct(k);
        a.push(hh.dot(&h));
        b.push(hh.dot(direct));
        c.push(direct.iter().map(|v| v.norm_sqr()).sum());
    }
    QuadData { dims, a, b, c }
}

fn herm_form(a: &Array2<C64>, z: ArrayView1<C64>) -> f64 {
    z.iter().zip(a.dot(&z).iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn re_inner(x: ArrayView1<C64>, y: ArrayView1<C64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

impl QuadData {
    /// Whether `A_k` equals its conjugate transpose within `tol` relative to
    /// its largest entry.
    pub fn is_hermitian(&self, k: usize, tol: f64) -> bool {
        let a = &self.a[k];
        let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        a.indexed_iter().all(|((i, j), v)| (v - a[[j, i]].conj()).norm() <= tol * scale)
    }
}

impl QuadModel for QuadData {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn linearize(&self, k: usize, zeta: ArrayView1<C64>) -> Linearization {
        Linearization {
            quad: herm_form(&self.a[k], zeta),
            grad: self.a[k].dot(&zeta) + &self.b[k],
            c: self.c[k],
        }
    }

    fn value(&self, k: usize, z: ArrayView1<C64>) -> f64 {
        herm_form(&self.a[k], z) + 2.0 * re_inner(z, self.b[k].view()) + self.c[k]
    }
}

fn stacked_apply(set: &ChannelSet, k: usize, z: ArrayView1<C64>) -> Array1<C64> {
    let d = set.dims();
    let mut out = Array1::zeros(d.n);
    for l in 0..d.l {
        let zl = z.slice(s![l * d.m..(l + 1) * d.m]);
        if zl.iter().any(|c| *c != C64::new(0.0, 0.0)) {
            out += &set.cascaded_apply(l, k, zl);
        }
    }
    out
}

/// Matrix-free evaluation straight from the channels.
impl QuadModel for ChannelSet {
    fn dims(&self) -> Dims {
        ChannelSet::dims(self)
    }

    fn linearize(&self, k: usize, zeta: ArrayView1<C64>) -> Linearization {
        let d = ChannelSet::dims(self);
        let hz = stacked_apply(self, k, zeta);
        let direct = self.direct(k);
        let e = &hz + direct;
        let mut grad = Array1::zeros(d.l * d.m);
        for l in 0..d.l {
            grad.slice_mut(s![l * d.m..(l + 1) * d.m])
                .assign(&self.cascaded_adjoint_apply(l, k, e.view()));
        }
        Linearization {
            quad: hz.iter().map(|c| c.norm_sqr()).sum(),
            grad,
            c: direct.iter().map(|c| c.norm_sqr()).sum(),
        }
    }

    fn value(&self, k: usize, z: ArrayView1<C64>) -> f64 {
        (stacked_apply(self, k, z) + self.direct(k)).iter().map(|c| c.norm_sqr()).sum()
    }
}

/// `ζᴴAζ − 2 Re(zᴴ(Aζ + b))`, the affine upper bound of `−zᴴAz − 2 Re(zᴴb)`
/// obtained by linearising the concave part at `ζ`.
pub fn surrogate_lhs(lin: &Linearization, z: ArrayView1<C64>) -> f64 {
    lin.quad - 2.0 * re_inner(z, lin.grad.view())
}
