//! Line-of-sight channel synthesis from scenario geometry.
//!
//! Every DFR carries a uniform linear array with half-wavelength spacing,
//! mounted horizontally with its broadside facing away from the nearest
//! wall. All channel vectors are transmit-side responses of the sending DFR.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Scenario, SystemParams};

pub type CVector = DVector<Complex64>;

/// Seeded stream used for every random draw in the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// Distance-dependent path loss `ref_loss * (d / ref_distance)^-exponent`.
pub fn path_loss(d: f64, params: &SystemParams) -> Result<f64, ChannelError> {
    if !d.is_finite() || d <= 0.0 {
        return Err(ChannelError::DegenerateGeometry(format!(
            "path loss needs a positive distance, got {d}"
        )));
    }
    Ok(params.ref_loss * (d / params.ref_distance).powf(-params.pathloss_exponent))
}

/// ULA response `exp(j 2 pi (lambda/2) / lambda * m * sin(az) cos(el))`,
/// `m = 0..M-1`.
pub fn steering_vector(azimuth: f64, elevation: f64, antennas: usize, wavelength: f64) -> CVector {
    let spacing = wavelength / 2.0;
    let k = 2.0 * PI * spacing / wavelength;
    let u = azimuth.sin() * elevation.cos();
    CVector::from_iterator(
        antennas,
        (0..antennas).map(|m| Complex64::from_polar(1.0, k * m as f64 * u)),
    )
}

/// Array orientation of one DFR in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayFrame {
    /// Unit broadside direction.
    pub broadside: [f64; 2],
    /// Unit direction of the array axis (broadside rotated by +90 degrees).
    pub axis: [f64; 2],
}

impl ArrayFrame {
    fn from_broadside(b: [f64; 2]) -> Self {
        ArrayFrame {
            broadside: b,
            axis: [-b[1], b[0]],
        }
    }

    /// Facing away from the nearest vertical wall of the room.
    pub fn for_position(pos: &[f64; 3], scenario: &Scenario) -> Self {
        let r = &scenario.geometry.room_bounds;
        let walls = [
            (pos[0] - r.min[0], [1.0, 0.0]),
            (r.max[0] - pos[0], [-1.0, 0.0]),
            (pos[1] - r.min[1], [0.0, 1.0]),
            (r.max[1] - pos[1], [0.0, -1.0]),
        ];
        let (_, normal) = walls
            .iter()
            .copied()
            .fold((f64::INFINITY, [1.0, 0.0]), |best, w| {
                if w.0 < best.0 {
                    w
                } else {
                    best
                }
            });
        ArrayFrame::from_broadside(normal)
    }

    /// Azimuth (from broadside, in the horizontal plane) and elevation of
    /// `to` as seen from `from`.
    pub fn angles(&self, from: &[f64; 3], to: &[f64; 3]) -> (f64, f64) {
        let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        let along = d[0] * self.broadside[0] + d[1] * self.broadside[1];
        let across = d[0] * self.axis[0] + d[1] * self.axis[1];
        let horizontal = (d[0] * d[0] + d[1] * d[1]).sqrt();
        (across.atan2(along), d[2].atan2(horizontal))
    }
}

/// All channel vectors for one scenario draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Two-hop echo channel `g_ii` per DFR.
    pub g: Vec<CVector>,
    /// Inter-DFR channels; `h[j][i]` is from DFR `j` to DFR `i`, `None` on
    /// the diagonal.
    pub h: Vec<Vec<Option<CVector>>>,
    /// DFR-to-receiver channel `f_i`.
    pub f: Vec<CVector>,
    /// Reflection coefficient used for the echo channels.
    pub reflection: Complex64,
}

impl ChannelSet {
    pub fn dfr_count(&self) -> usize {
        self.g.len()
    }

    pub fn antennas(&self) -> usize {
        self.g.first().map_or(0, |v| v.len())
    }

    /// Channel from DFR `from` to DFR `to`.
    ///
    /// Panics on `from == to`; the diagonal has no meaning.
    pub fn h(&self, from: usize, to: usize) -> &CVector {
        self.h[from][to]
            .as_ref()
            .expect("inter-DFR channel requested for a DFR and itself")
    }

    pub fn to_dump(&self) -> ChannelDump {
        ChannelDump {
            reflection: ComplexDump::from_slice(&[self.reflection]),
            g: self.g.iter().map(ComplexDump::from_vector).collect(),
            h: self
                .h
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| c.as_ref().map(ComplexDump::from_vector))
                        .collect()
                })
                .collect(),
            f: self.f.iter().map(ComplexDump::from_vector).collect(),
        }
    }
}

/// Synthesize the LOS channel set. The only random draw is the echo phase.
pub fn synthesize_channels(
    scenario: &Scenario,
    rng: &mut impl Rng,
) -> Result<ChannelSet, ChannelError> {
    let p = &scenario.params;
    let geo = &scenario.geometry;
    let k = p.dfr_count;
    let m = p.antennas;

    let psi = rng.gen_range(0.0..2.0 * PI);
    let reflection = Complex64::from_polar(p.echo_gain, psi);

    let frames: Vec<ArrayFrame> = geo
        .dfr_positions
        .iter()
        .map(|pos| ArrayFrame::for_position(pos, scenario))
        .collect();

    let response = |i: usize, to: &[f64; 3]| -> Result<(f64, CVector), ChannelError> {
        let from = &geo.dfr_positions[i];
        let d = dist(from, to);
        if d <= 0.0 {
            return Err(ChannelError::DegenerateGeometry(format!(
                "DFR {i} coincides with a point it must illuminate"
            )));
        }
        let (az, el) = frames[i].angles(from, to);
        Ok((path_loss(d, p)?, steering_vector(az, el, m, p.wavelength)))
    };

    let mut g = Vec::with_capacity(k);
    let mut f = Vec::with_capacity(k);
    let mut h = vec![vec![None; k]; k];
    #[allow(clippy::needless_range_loop)]
    for i in 0..k {
        let (pl, a) = response(i, &geo.target_position)?;
        g.push(a * (reflection * pl));
        let (pl, a) = response(i, &geo.receiver_position)?;
        f.push(a * Complex64::from(pl.sqrt()));
        for j in 0..k {
            if j != i {
                let (pl, a) = response(i, &geo.dfr_positions[j])?;
                h[i][j] = Some(a * Complex64::from(pl.sqrt()));
            }
        }
    }
    Ok(ChannelSet {
        g,
        h,
        f,
        reflection,
    })
}

/// Convenience wrapper: channel draw for `seed`.
pub fn synthesize_channels_seeded(
    scenario: &Scenario,
    seed: u64,
) -> Result<ChannelSet, ChannelError> {
    synthesize_channels(scenario, &mut seeded_rng(seed))
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Regression dump

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexDump {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexDump {
    fn from_slice(v: &[Complex64]) -> Self {
        ComplexDump {
            re: v.iter().map(|c| c.re).collect(),
            im: v.iter().map(|c| c.im).collect(),
        }
    }

    fn from_vector(v: &CVector) -> Self {
        Self::from_slice(v.as_slice())
    }

    fn to_vector(&self) -> CVector {
        CVector::from_iterator(
            self.re.len(),
            self.re
                .iter()
                .zip(&self.im)
                .map(|(&re, &im)| Complex64::new(re, im)),
        )
    }
}

/// Serializable form of a [`ChannelSet`]: real and imaginary arrays per
/// vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub reflection: ComplexDump,
    pub g: Vec<ComplexDump>,
    pub h: Vec<Vec<Option<ComplexDump>>>,
    pub f: Vec<ComplexDump>,
}

impl ChannelDump {
    pub fn into_channels(self) -> ChannelSet {
        ChannelSet {
            reflection: Complex64::new(self.reflection.re[0], self.reflection.im[0]),
            g: self.g.iter().map(ComplexDump::to_vector).collect(),
            h: self
                .h
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| c.as_ref().map(ComplexDump::to_vector))
                        .collect()
                })
                .collect(),
            f: self.f.iter().map(ComplexDump::to_vector).collect(),
        }
    }
}
