//! Zero-forcing transmit beamformers for a given functionality selection.
//!
//! For DFR `i` the rows of the ZF system are the conjugated channels that
//! must be controlled: in sensing mode the echo channel `g_ii` first, then
//! the `K` channels toward the other DFRs with `f_i` in slot `i`; in
//! communication mode the same `K` rows without the echo. The beam is the
//! normalized pseudo-inverse column selecting the wanted row (row 0 for
//! sensing, row `i` for communication), so every other row is nulled.

use std::fmt;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{CVector, ChannelSet};

/// Largest accepted condition number of a ZF system.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformError {
    #[error("zero-forcing system of DFR {dfr} is rank deficient (condition number {condition:e})")]
    RankDeficientChannels { dfr: usize, condition: f64 },
    #[error("DFR {dfr} has no effective channel toward the receiver")]
    ZeroEffectiveChannel { dfr: usize },
}

/// Per-DFR mode flags; `true` means sensing. Serialized as a bit string
/// such as `"100110"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SelectionVector(pub Vec<bool>);

impl From<SelectionVector> for String {
    fn from(x: SelectionVector) -> String {
        x.to_string()
    }
}

impl TryFrom<String> for SelectionVector {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl SelectionVector {
    pub fn all_sensing(k: usize) -> Self {
        SelectionVector(vec![true; k])
    }

    pub fn all_comm(k: usize) -> Self {
        SelectionVector(vec![false; k])
    }

    /// Only `dfr` senses.
    pub fn singleton(k: usize, dfr: usize) -> Self {
        let mut x = vec![false; k];
        x[dfr] = true;
        SelectionVector(x)
    }

    /// Bit `b` of `bits` (least significant first) is the flag of DFR `b`.
    pub fn from_mask(k: usize, bits: u64) -> Self {
        SelectionVector((0..k).map(|b| bits >> b & 1 == 1).collect())
    }

    pub fn mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &s)| acc | (u64::from(s) << b))
    }

    /// Binary value of the bit string `x_1 x_2 ... x_K` read with `x_1` as
    /// the most significant digit. Used for deterministic tie-breaking.
    pub fn binary_value(&self) -> u64 {
        self.0.iter().fold(0, |acc, &s| acc << 1 | u64::from(s))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_sensing(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn sensing_set(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }

    pub fn sensing_count(&self) -> usize {
        self.0.iter().filter(|&&s| s).count()
    }

    pub fn hamming(&self, other: &SelectionVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for SelectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SelectionVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(format!("selection bits must be 0 or 1, got `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SelectionVector)
    }
}

/// The ZF system of DFR `i`: `F_i` (K+1 rows) when sensing, `H_i` (K rows)
/// otherwise. Rows are conjugated channels, so `matrix * w` evaluates the
/// inner products `c^H w`.
pub fn zf_matrix(i: usize, sensing: bool, ch: &ChannelSet) -> DMatrix<Complex64> {
    let k = ch.dfr_count();
    let m = ch.antennas();
    let offset = usize::from(sensing);
    let mut out = DMatrix::zeros(k + offset, m);
    let mut put_row = |r: usize, v: &CVector| {
        for (c, z) in v.iter().enumerate() {
            out[(r, c)] = z.conj();
        }
    };
    if sensing {
        put_row(0, &ch.g[i]);
    }
    for j in 0..k {
        let row = if j == i { &ch.f[i] } else { ch.h(i, j) };
        put_row(offset + j, row);
    }
    out
}

/// Column `col` of the Moore-Penrose pseudo-inverse of a full-row-rank
/// matrix, via SVD. Returns the column and the condition number.
pub fn pinv_column(matrix: &DMatrix<Complex64>, col: usize) -> (CVector, f64) {
    let svd = SVD::new(matrix.clone(), true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^H requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    // pinv = V S^-1 U^H, and U^H e_col = conj(row `col` of U)
    let mut coeffs = CVector::zeros(sv.len());
    for r in 0..sv.len() {
        if sv[r] > 0.0 {
            coeffs[r] = u[(col, r)].conj() / sv[r];
        }
    }
    (v_t.adjoint() * coeffs, condition)
}

/// Unit-norm ZF direction of DFR `i`.
pub fn zf_beamformer(i: usize, sensing: bool, ch: &ChannelSet) -> Result<CVector, BeamformError> {
    let f = zf_matrix(i, sensing, ch);
    let col = if sensing { 0 } else { i };
    let (w, condition) = pinv_column(&f, col);
    let norm = w.norm();
    if condition.is_nan() || condition > MAX_CONDITION || norm == 0.0 || !norm.is_finite() {
        return Err(BeamformError::RankDeficientChannels { dfr: i, condition });
    }
    Ok(w / Complex64::from(norm))
}

/// Phase that rotates `f_i^H w` onto the nonnegative real axis.
pub fn alignment_phase(i: usize, w: &CVector, ch: &ChannelSet) -> Result<f64, BeamformError> {
    let inner = ch.f[i].dotc(w);
    if inner == Complex64::new(0.0, 0.0) {
        return Err(BeamformError::ZeroEffectiveChannel { dfr: i });
    }
    Ok(-inner.arg())
}

/// ZF directions, phases and scalar gains for every DFR under `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub w_zf: Vec<CVector>,
    pub phi: Vec<f64>,
    /// `|f_i^H w_i|`: communication amplitude gain.
    pub a: Vec<f64>,
    /// `|g_ii^H w_i|^2`: sensing power gain.
    pub b: Vec<f64>,
}

impl BeamformerSet {
    /// Full beamformers `sqrt(p_i) e^{j phi_i} w_i`.
    pub fn scaled(&self, powers: &[f64]) -> Vec<CVector> {
        self.w_zf
            .iter()
            .zip(&self.phi)
            .zip(powers)
            .map(|((w, &phi), &p)| w * Complex64::from_polar(p.max(0.0).sqrt(), phi))
            .collect()
    }
}

pub fn build_beamformers(
    x: &SelectionVector,
    ch: &ChannelSet,
) -> Result<BeamformerSet, BeamformError> {
    let k = ch.dfr_count();
    let mut set = BeamformerSet {
        w_zf: Vec::with_capacity(k),
        phi: Vec::with_capacity(k),
        a: Vec::with_capacity(k),
        b: Vec::with_capacity(k),
    };
    for i in 0..k {
        let sensing = x.is_sensing(i);
        let w = zf_beamformer(i, sensing, ch)?;
        let phi = if sensing {
            0.0
        } else {
            alignment_phase(i, &w, ch)?
        };
        set.a.push(ch.f[i].dotc(&w).norm());
        set.b.push(ch.g[i].dotc(&w).norm_sqr());
        set.w_zf.push(w);
        set.phi.push(phi);
    }
    Ok(set)
}
