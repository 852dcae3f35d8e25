//! Deterministic channels of one scenario.
//!
//! For `K` UEs, `L` candidate RIS locations with `M` elements each and a BS
//! with `N` antennas a [`ChannelSet`] holds the direct channels `h_k`
//! (length `N`), the BS→RIS matrices `G_l` (`M×N`) and the RIS→UE vectors
//! `g_{l,k}` (length `M`). The cascaded BS→RIS→UE channel is
//! `H_{l,k} = G_lᵀ diag(g_{l,k})` (`N×M`); it is formed on demand since it
//! is fully determined by `G_l` and `g_{l,k}`.

mod cir;
mod steering;
mod synth;

pub use cir::{export_cir, import_cir, read_cir, write_cir, CirError};
pub use steering::{steering_vector, ArrayFrame};
pub use synth::{synth_channel_set, RisScaling, SynthModel};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Dimension};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite channel entry in {0}")]
    NonFinite(String),
    #[error("direction must be a unit vector (norm {0})")]
    NotUnitDirection(f64),
    #[error("element spacing and wavelength must be positive")]
    BadSpacing,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Power scale of an isotropic RIS element: element area `(λ/4)²` over the
/// isotropic effective area `λ²/(4π)`.
pub fn ris_area_power_factor(wavelength: f64) -> f64 {
    let element_area = (wavelength / 4.0).powi(2);
    let isotropic_area = wavelength * wavelength / (4.0 * std::f64::consts::PI);
    element_area / isotropic_area
}

/// `π/4`, the wavelength-independent value of [`ris_area_power_factor`].
pub const RIS_AREA_POWER_FACTOR: f64 = std::f64::consts::FRAC_PI_4;

/// Scales a BS→RIS or RIS→UE channel by the RIS element area factor
/// (power × π/4, amplitude × √(π/4)).
pub fn apply_ris_area_scaling<D: Dimension>(
    channel: &ndarray::Array<C64, D>,
) -> ndarray::Array<C64, D> {
    channel * RIS_AREA_POWER_FACTOR.sqrt()
}

/// `Gᵀ diag(g)`: column `m` is `g[m]` times row `m` of `G`.
pub fn cascade(g_bs_ris: ArrayView2<C64>, g_ris_ue: ArrayView1<C64>) -> Result<Array2<C64>, ChannelError> {
    let (m, n) = g_bs_ris.dim();
    if g_ris_ue.len() != m {
        return Err(ChannelError::Dimension(format!(
            "G has {m} rows but g has {} entries",
            g_ris_ue.len()
        )));
    }
    let mut out = Array2::zeros((n, m));
    for (mi, row) in g_bs_ris.outer_iter().enumerate() {
        let gm = g_ris_ue[mi];
        for (ni, &v) in row.iter().enumerate() {
            out[[ni, mi]] = v * gm;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    /// UEs.
    pub k: usize,
    /// Candidate RIS locations.
    pub l: usize,
    /// Elements per RIS.
    pub m: usize,
    /// BS antennas.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    dims: Dims,
    direct: Vec<Array1<C64>>,
    bs_ris: Vec<Array2<C64>>,
    ris_ue: Vec<Vec<Array1<C64>>>,
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a C64>, what: impl FnOnce() -> String) -> Result<(), ChannelError> {
    if values.into_iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(ChannelError::NonFinite(what()))
    }
}

impl ChannelSet {
    /// `direct[k]`, `bs_ris[l]` and `ris_ue[l][k]`.
    pub fn new(
        direct: Vec<Array1<C64>>,
        bs_ris: Vec<Array2<C64>>,
        ris_ue: Vec<Vec<Array1<C64>>>,
    ) -> Result<Self, ChannelError> {
        let k = direct.len();
        let l = bs_ris.len();
        let n = direct
            .first()
            .map(|h| h.len())
            .or_else(|| bs_ris.first().map(|g| g.ncols()))
            .unwrap_or(0);
        let m = bs_ris.first().map(|g| g.nrows()).unwrap_or(0);
        let dims = Dims { k, l, m, n };

        for (ki, h) in direct.iter().enumerate() {
            if h.len() != n {
                return Err(ChannelError::Dimension(format!("h[{ki}] has length {} (expected {n})", h.len())));
            }
            check_finite(h.iter(), || format!("h[{ki}]"))?;
        }
        for (li, g) in bs_ris.iter().enumerate() {
            if g.dim() != (m, n) {
                return Err(ChannelError::Dimension(format!(
                    "G[{li}] is {:?} (expected ({m}, {n}))",
                    g.dim()
                )));
            }
            check_finite(g.iter(), || format!("G[{li}]"))?;
        }
        if ris_ue.len() != l {
            return Err(ChannelError::Dimension(format!("g has {} RIS entries (expected {l})", ris_ue.len())));
        }
        for (li, per_ue) in ris_ue.iter().enumerate() {
            if per_ue.len() != k {
                return Err(ChannelError::Dimension(format!(
                    "g[{li}] has {} UE entries (expected {k})",
                    per_ue.len()
                )));
            }
            for (ki, g) in per_ue.iter().enumerate() {
                if g.len() != m {
                    return Err(ChannelError::Dimension(format!(
                        "g[{li}][{ki}] has length {} (expected {m})",
                        g.len()
                    )));
                }
                check_finite(g.iter(), || format!("g[{li}][{ki}]"))?;
            }
        }
        Ok(Self {
            dims,
            direct,
            bs_ris,
            ris_ue,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn direct(&self, k: usize) -> &Array1<C64> {
        &self.direct[k]
    }

    pub fn bs_ris(&self, l: usize) -> &Array2<C64> {
        &self.bs_ris[l]
    }

    pub fn ris_ue(&self, l: usize, k: usize) -> &Array1<C64> {
        &self.ris_ue[l][k]
    }

    /// `H_{l,k} = G_lᵀ diag(g_{l,k})`, shape `N×M`.
    pub fn cascaded(&self, l: usize, k: usize) -> Array2<C64> {
        cascade(self.bs_ris[l].view(), self.ris_ue[l][k].view()).expect("dimensions checked on construction")
    }

    /// `H_{l,k} φ` without forming `H_{l,k}`.
    pub fn cascaded_apply(&self, l: usize, k: usize, phi: ArrayView1<C64>) -> Array1<C64> {
        let g = &self.ris_ue[l][k];
        let weighted: Array1<C64> = g.iter().zip(phi.iter()).map(|(a, b)| a * b).collect();
        self.bs_ris[l].t().dot(&weighted)
    }

    /// `H_{l,k}ᴴ e`, length `M`.
    pub fn cascaded_adjoint_apply(&self, l: usize, k: usize, e: ArrayView1<C64>) -> Array1<C64> {
        let g = &self.ris_ue[l][k];
        let ge = self.bs_ris[l].dot(&e.mapv(|c| c.conj()));
        // (diag(conj g) conj(G) e) = conj(diag(g) G conj(e))
        ge.iter().zip(g.iter()).map(|(v, gm)| (v * gm).conj()).collect()
    }
}
