//! Sensing SINR, communication SINR and spectral efficiency.
//!
//! The `*_exact` functions evaluate the full interference model for
//! arbitrary beamformers. The optimizer works with the ZF-simplified
//! expressions; the exact ones are kept as a cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamform::{BeamformerSet, SelectionVector};
use crate::channel::{CVector, ChannelSet};

/// Transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation(pub Vec<f64>);

impl PowerAllocation {
    pub fn zeros(k: usize) -> Self {
        PowerAllocation(vec![0.0; k])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub sensing_sinr: Vec<f64>,
    pub comm_sinr: f64,
    pub rate: f64,
    pub effective_set: Vec<usize>,
}

/// Sensing SINR at DFR `i` for full beamformers `w`.
///
/// Communication interferers all carry the same symbol, so their
/// contributions add in amplitude before squaring.
pub fn sensing_sinr_exact(
    i: usize,
    x: &SelectionVector,
    w: &[CVector],
    ch: &ChannelSet,
    noise_power: f64,
) -> f64 {
    if !x.is_sensing(i) {
        return 0.0;
    }
    let signal = ch.g[i].dotc(&w[i]).norm_sqr();
    let mut sensing_interference = 0.0;
    let mut comm_interference = Complex64::new(0.0, 0.0);
    for j in (0..w.len()).filter(|&j| j != i) {
        let leak = ch.h(j, i).dotc(&w[j]);
        if x.is_sensing(j) {
            sensing_interference += leak.norm_sqr();
        } else {
            comm_interference += leak;
        }
    }
    signal / (noise_power + sensing_interference + comm_interference.norm_sqr())
}

pub fn comm_sinr_exact(
    x: &SelectionVector,
    w: &[CVector],
    ch: &ChannelSet,
    noise_power: f64,
) -> f64 {
    let mut coherent = Complex64::new(0.0, 0.0);
    let mut interference = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let inner = ch.f[j].dotc(wj);
        if x.is_sensing(j) {
            interference += inner.norm_sqr();
        } else {
            coherent += inner;
        }
    }
    coherent.norm_sqr() / (noise_power + interference)
}

/// Spectral efficiency in bps/Hz under the full model.
pub fn comm_rate_exact(
    x: &SelectionVector,
    w: &[CVector],
    ch: &ChannelSet,
    noise_power: f64,
) -> f64 {
    (1.0 + comm_sinr_exact(x, w, ch, noise_power)).log2()
}

/// ZF-simplified spectral efficiency `log2(1 + (sum a_i sqrt(p_i))^2 / sigma^2)`
/// over communication DFRs.
pub fn comm_rate_zf(
    x: &SelectionVector,
    p: &PowerAllocation,
    beams: &BeamformerSet,
    noise_power: f64,
) -> f64 {
    let amplitude: f64 = (0..x.len())
        .filter(|&i| !x.is_sensing(i))
        .map(|i| beams.a[i] * p.0[i].max(0.0).sqrt())
        .sum();
    (1.0 + amplitude * amplitude / noise_power).log2()
}

/// ZF-simplified sensing SINR `p_i b_i / sigma^2` (zero for comm DFRs).
pub fn sensing_sinr_zf(
    i: usize,
    x: &SelectionVector,
    p: &PowerAllocation,
    beams: &BeamformerSet,
    noise_power: f64,
) -> f64 {
    if x.is_sensing(i) {
        p.0[i] * beams.b[i] / noise_power
    } else {
        0.0
    }
}

/// Sensing DFRs whose SINR reaches `gamma`.
pub fn effective_set(x: &SelectionVector, sensing_sinrs: &[f64], gamma: f64) -> Vec<usize> {
    (0..x.len())
        .filter(|&i| x.is_sensing(i) && sensing_sinrs[i] >= gamma)
        .collect()
}

/// Evaluate the full model for ZF beams scaled by `p`.
pub fn link_report(
    x: &SelectionVector,
    p: &PowerAllocation,
    beams: &BeamformerSet,
    ch: &ChannelSet,
    noise_power: f64,
    gamma: f64,
) -> LinkReport {
    let w = beams.scaled(&p.0);
    let sensing_sinr: Vec<f64> = (0..x.len())
        .map(|i| sensing_sinr_exact(i, x, &w, ch, noise_power))
        .collect();
    let comm_sinr = comm_sinr_exact(x, &w, ch, noise_power);
    LinkReport {
        effective_set: effective_set(x, &sensing_sinr, gamma),
        rate: (1.0 + comm_sinr).log2(),
        comm_sinr,
        sensing_sinr,
    }
}
