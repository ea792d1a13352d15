//! Plane-wave transmit/receive delay math, delay-profile compression and the
//! derived buffer-sizing quantities (dependent range, MDR, MTD).
//!
//! The delay model exists in two algebraically identical forms. The
//! traditional form depends on the pixel position, the element position and
//! the steering angle. The compressed form depends only on the relative
//! lateral distance between pixel and element, which is what makes one
//! profile row reusable for every A-line at the same depth:
//!
//! ```text
//! tau_tx + tau_rx  ==  tau_total(theta, dx, z) + x_n * sin(theta) / c
//! ```
//!
//! The per-channel term on the right is constant over the whole frame and is
//! removed up front by dropping the first `N_n` samples of each channel. For
//! negative steering angles that count would be negative, so a per-angle
//! alignment constant `C_theta = min_n x_n * sin(theta) / c` is folded into
//! both the removal counts and the profile indices, preserving the absolute
//! delay while keeping every removal non-negative.
//!
//! Every function that quantizes a delay to a sample index routes through
//! [`delay_index`] and rounds half-to-even. The quantized reference
//! beamformer calls the same helpers, so an engine-vs-reference mismatch is a
//! structural defect, never rounding noise.

use std::fmt;

use crate::config::{AcqConfig, EngineParams, ProbeConfig};

/// Profile entry marking a masked (F-number or out-of-range) tap.
pub const SENTINEL: u16 = 0xFFFF;

/// Fast-time upsampling factor applied before beamforming.
pub const INTERP_FACTOR: usize = 2;

/// Transmit delay of a plane wave steered by `theta` to reach `(x, z)`.
pub fn tx_delay(theta: f64, x: f64, z: f64, c: f64) -> f64 {
    (z * theta.cos() + x * theta.sin()) / c
}

/// Echo travel time from `(x, z)` back to an element at `x_n`.
pub fn rx_delay(x_n: f64, x: f64, z: f64, c: f64) -> f64 {
    let dx = x_n - x;
    (z * z + dx * dx).sqrt() / c
}

/// Receive delay in the compressed form: depends only on the relative
/// lateral distance `dx = x_n - x`.
pub fn rx_delay_rel(dx: f64, z: f64, c: f64) -> f64 {
    (z * z + dx * dx).sqrt() / c
}

/// Round-trip delay in the compressed form, after the per-channel
/// `x_n * sin(theta) / c` term has been removed.
pub fn total_delay_rel(theta: f64, dx: f64, z: f64, c: f64) -> f64 {
    (z * theta.cos() - dx * theta.sin()) / c + (z * z + dx * dx).sqrt() / c
}

/// Lateral derivative of the round-trip delay (seconds per meter). Flattens
/// with depth, which is why deeper profile rows span fewer samples.
pub fn delay_slope(theta: f64, dx: f64, z: f64, c: f64) -> Result<f64, DelayError> {
    let denom = (dx * dx + z * z).sqrt();
    if denom == 0.0 {
        return Err(DelayError::SingularSlope);
    }
    Ok(dx / (c * denom) - theta.sin() / c)
}

/// Per-angle alignment constant `C_theta = min_n x_n * sin(theta) / c`
/// (seconds). Zero for non-negative steering angles.
pub fn tx_alignment_shift(cfg: &ProbeConfig, theta: f64) -> f64 {
    let s = theta.sin();
    if s >= 0.0 {
        0.0
    } else {
        cfg.element_x(cfg.num_elements - 1) * s / cfg.sound_speed
    }
}

/// Samples to drop from the start of channel `n` (0-based) on the
/// `interp`-times oversampled grid, plus the alignment constant used.
pub fn tx_removal_samples(cfg: &ProbeConfig, theta: f64, n: usize, interp: usize) -> (u32, f64) {
    let shift = tx_alignment_shift(cfg, theta);
    let seconds = cfg.element_x(n) * theta.sin() / cfg.sound_speed - shift;
    let count = (seconds * cfg.sample_rate * interp as f64).round_ties_even();
    debug_assert!(count >= 0.0);
    (count as u32, shift)
}

/// Removal counts for all channels at once.
pub fn tx_removal_counts(cfg: &ProbeConfig, theta: f64, interp: usize) -> Vec<u32> {
    (0..cfg.num_elements)
        .map(|n| tx_removal_samples(cfg, theta, n, interp).0)
        .collect()
}

/// Maximum transmit delay over all channels and steering angles; sizes the
/// transmit-compensation buffers.
pub fn max_transmit_delay(cfg: &ProbeConfig, angles: &[f64], interp: usize) -> u32 {
    assert!(!angles.is_empty(), "angle list must not be empty");
    angles
        .iter()
        .flat_map(|&theta| (0..cfg.num_elements).map(move |n| (theta, n)))
        .map(|(theta, n)| tx_removal_samples(cfg, theta, n, interp).0)
        .max()
        .unwrap()
}

/// Effective subaperture at depth `z` under the fixed-F-number rule:
/// `min(F, 2 * floor(z / (2 * f_number * d)))`, clamped to at least 2 once
/// `z` exceeds one F-number-scaled pitch. An infinite F-number disables the
/// reduction. The returned count is always even; 0 means the row is fully
/// masked.
pub fn effective_subaperture(z: f64, params: &EngineParams, cfg: &ProbeConfig) -> usize {
    let f = params.subaperture;
    if params.f_number.is_infinite() {
        return f;
    }
    let half_apertures = (z / (2.0 * params.f_number * cfg.pitch)).floor();
    let mut eff = if 2.0 * half_apertures >= f as f64 {
        f
    } else {
        2 * half_apertures as usize
    };
    if z > params.f_number * cfg.pitch {
        eff = eff.max(2);
    }
    eff
}

/// True when a tap at relative lateral distance `dx` falls inside the
/// effective aperture. A zero aperture admits nothing.
pub fn within_aperture(dx: f64, f_eff: usize, pitch: f64) -> bool {
    f_eff > 0 && dx.abs() <= f_eff as f64 * pitch / 2.0
}

/// Depth of output row `r` on the interpolated fast-time grid,
/// `z_r = r * c / (4 f_s) + t0 * c / 2`.
pub fn depth_at_row(row: usize, cfg: &ProbeConfig, start_time: f64) -> f64 {
    row as f64 * cfg.sound_speed / (4.0 * cfg.sample_rate) + start_time * cfg.sound_speed / 2.0
}

/// Quantized interpolated-grid sample index for a tap, before range checks.
///
/// This is the single rounding site shared by the profile builder and the
/// quantized reference beamformer.
pub fn delay_index(
    cfg: &ProbeConfig,
    theta: f64,
    dx: f64,
    z: f64,
    alignment_shift: f64,
    start_time: f64,
) -> i64 {
    let fs2 = 2.0 * cfg.sample_rate;
    let t = total_delay_rel(theta, dx, z, cfg.sound_speed) + alignment_shift - start_time;
    (t * fs2).round_ties_even() as i64
}

/// One compressed delay profile: a `D_interp x F` table of interpolated,
/// transmit-compensated sample indices for a single steering angle and
/// sub-pitch lateral offset. Masked taps hold [`SENTINEL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    d_interp: usize,
    f: usize,
    indices: Vec<u16>,
    /// (min, max) valid index per row; `None` when the row is fully masked.
    row_bounds: Vec<Option<(u16, u16)>>,
    per_row_dr: Vec<u32>,
    mdr: u32,
    theta: f64,
    lateral_offset: f64,
    tx_shift: f64,
}

impl DelayProfile {
    pub fn d_interp(&self) -> usize {
        self.d_interp
    }

    pub fn subaperture(&self) -> usize {
        self.f
    }

    pub fn row(&self, r: usize) -> &[u16] {
        &self.indices[r * self.f..(r + 1) * self.f]
    }

    pub fn indices(&self) -> &[u16] {
        &self.indices
    }

    /// Smallest and largest valid index a row needs, or `None` for fully
    /// masked rows.
    pub fn row_bounds(&self, r: usize) -> Option<(u16, u16)> {
        self.row_bounds[r]
    }

    /// Dependent range of each row: `max - min + 1` over valid entries,
    /// 0 for fully masked rows.
    pub fn per_row_dr(&self) -> &[u32] {
        &self.per_row_dr
    }

    /// Maximum dependent range over all rows; sizes the cyclic RF buffers.
    pub fn mdr(&self) -> u32 {
        self.mdr
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lateral_offset(&self) -> f64 {
        self.lateral_offset
    }

    /// Alignment constant `C_theta` the builder folded into the indices.
    /// Profiles deserialized from disk report 0 here; the engine never
    /// consumes it.
    pub fn tx_shift(&self) -> f64 {
        self.tx_shift
    }

    /// Rebuilds a profile from a raw index table, recomputing the
    /// per-row ranges. Used by the file reader and by tests.
    pub fn from_indices(
        d_interp: usize,
        f: usize,
        indices: Vec<u16>,
        theta: f64,
        lateral_offset: f64,
    ) -> Result<Self, DelayError> {
        if indices.len() != d_interp * f {
            return Err(DelayError::Dimensions);
        }
        for &v in &indices {
            if v != SENTINEL && v as usize >= d_interp {
                return Err(DelayError::IndexOutOfRange {
                    index: v as i64,
                    d_interp,
                });
            }
        }
        let mut profile = DelayProfile {
            d_interp,
            f,
            indices,
            row_bounds: Vec::new(),
            per_row_dr: Vec::new(),
            mdr: 0,
            theta,
            lateral_offset,
            tx_shift: 0.0,
        };
        profile.recompute_ranges();
        Ok(profile)
    }

    /// Overrides the stored MDR. Only useful for exercising the streaming
    /// engine's defensive buffer check; built profiles are always
    /// self-consistent.
    pub fn with_mdr_override(mut self, mdr: u32) -> Self {
        self.mdr = mdr;
        self
    }

    fn recompute_ranges(&mut self) {
        self.row_bounds = (0..self.d_interp)
            .map(|r| {
                let row = &self.indices[r * self.f..(r + 1) * self.f];
                let mut bounds: Option<(u16, u16)> = None;
                for &v in row {
                    if v == SENTINEL {
                        continue;
                    }
                    bounds = Some(match bounds {
                        None => (v, v),
                        Some((lo, hi)) => (lo.min(v), hi.max(v)),
                    });
                }
                bounds
            })
            .collect();
        self.per_row_dr = self
            .row_bounds
            .iter()
            .map(|b| match b {
                Some((lo, hi)) => (hi - lo) as u32 + 1,
                None => 0,
            })
            .collect();
        self.mdr = self.per_row_dr.iter().copied().max().unwrap_or(0);
    }
}

/// Builds the compressed delay profile for one steering angle and one
/// sub-pitch lateral offset.
///
/// Row `r` targets depth `z_r` (see [`depth_at_row`]); tap `k` covers the
/// element at relative lateral distance `dx_k = (k - F/2) * d - offset`,
/// so A-line `j` of the offset group (pixel at `x = j * d + offset`) sums
/// element columns `j + k - F/2`. Entries outside the effective aperture or
/// outside `[0, D_interp)` are sentinels and contribute zero downstream.
pub fn build_delay_profile(
    theta: f64,
    lateral_offset: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
) -> Result<DelayProfile, DelayError> {
    if params.num_elements != cfg.num_elements {
        return Err(DelayError::ChannelCountMismatch {
            probe: cfg.num_elements,
            engine: params.num_elements,
        });
    }
    if !(0.0..cfg.pitch).contains(&lateral_offset) {
        return Err(DelayError::OffsetOutOfRange {
            offset: lateral_offset,
            pitch: cfg.pitch,
        });
    }
    let d_interp = acq.depth_interp();
    let f = params.subaperture;
    let half = (f / 2) as i64;
    let shift = tx_alignment_shift(cfg, theta);
    let mut indices = vec![SENTINEL; d_interp * f];

    for r in 0..d_interp {
        let z = depth_at_row(r, cfg, acq.start_time);
        let f_eff = effective_subaperture(z, params, cfg);
        if f_eff == 0 {
            continue;
        }
        let row = &mut indices[r * f..(r + 1) * f];
        for (k, slot) in row.iter_mut().enumerate() {
            let dx = (k as i64 - half) as f64 * cfg.pitch - lateral_offset;
            if !within_aperture(dx, f_eff, cfg.pitch) {
                continue;
            }
            let idx = delay_index(cfg, theta, dx, z, shift, acq.start_time);
            if idx < 0 || idx >= d_interp as i64 {
                continue;
            }
            if idx > (SENTINEL as i64) - 1 {
                return Err(DelayError::IndexOutOfRange {
                    index: idx,
                    d_interp,
                });
            }
            *slot = idx as u16;
        }
    }

    let mut profile = DelayProfile {
        d_interp,
        f,
        indices,
        row_bounds: Vec::new(),
        per_row_dr: Vec::new(),
        mdr: 0,
        theta,
        lateral_offset,
        tx_shift: shift,
    };
    profile.recompute_ranges();
    Ok(profile)
}

/// Default sub-pitch offsets for `R` replicated beamformers: `rho * d / R`.
pub fn replica_offsets(params: &EngineParams, cfg: &ProbeConfig) -> Vec<f64> {
    (0..params.replicas)
        .map(|rho| rho as f64 * cfg.pitch / params.replicas as f64)
        .collect()
}

/// All profiles for a compound acquisition, angle-major then offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub d_interp: usize,
    pub subaperture: usize,
    pub replicas: usize,
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    pub profiles: Vec<DelayProfile>,
    /// Max dependent range over every profile in the set.
    pub mdr: u32,
}

impl ProfileSet {
    pub fn new(
        d_interp: usize,
        subaperture: usize,
        angles: Vec<f64>,
        offsets: Vec<f64>,
        profiles: Vec<DelayProfile>,
    ) -> Result<Self, DelayError> {
        if profiles.len() != angles.len() * offsets.len() {
            return Err(DelayError::Dimensions);
        }
        for p in &profiles {
            if p.d_interp() != d_interp || p.subaperture() != subaperture {
                return Err(DelayError::Dimensions);
            }
        }
        let mdr = profiles.iter().map(|p| p.mdr()).max().unwrap_or(0);
        Ok(ProfileSet {
            d_interp,
            subaperture,
            replicas: offsets.len(),
            angles,
            offsets,
            profiles,
            mdr,
        })
    }

    /// Profiles for one angle, ordered by offset group.
    pub fn profiles_for_angle(&self, angle_idx: usize) -> Vec<&DelayProfile> {
        let r = self.replicas;
        self.profiles[angle_idx * r..(angle_idx + 1) * r].iter().collect()
    }

    /// Total profile storage in bits at 16 bits per entry.
    pub fn storage_bits(&self) -> u64 {
        (self.d_interp * self.subaperture * self.profiles.len() * 16) as u64
    }
}

/// Builds the full profile set for every angle and replica offset.
pub fn build_profile_set(
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
) -> Result<ProfileSet, DelayError> {
    let offsets = replica_offsets(params, cfg);
    let mut profiles = Vec::with_capacity(acq.angles.len() * offsets.len());
    for &theta in &acq.angles {
        for &offset in &offsets {
            profiles.push(build_delay_profile(theta, offset, cfg, acq, params)?);
        }
    }
    ProfileSet::new(
        acq.depth_interp(),
        params.subaperture,
        acq.angles.clone(),
        offsets,
        profiles,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayError {
    /// The delay slope is undefined at `z = dx = 0`.
    SingularSlope,
    /// A valid profile index does not fit the 16-bit storage.
    IndexOutOfRange { index: i64, d_interp: usize },
    /// Replica offset outside `[0, pitch)`.
    OffsetOutOfRange { offset: f64, pitch: f64 },
    ChannelCountMismatch { probe: usize, engine: usize },
    Dimensions,
}

impl fmt::Display for DelayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayError::SingularSlope => write!(f, "delay slope is singular at z = dx = 0"),
            DelayError::IndexOutOfRange { index, d_interp } => write!(
                f,
                "profile index {index} exceeds 16-bit storage (D_interp = {d_interp})"
            ),
            DelayError::OffsetOutOfRange { offset, pitch } => {
                write!(f, "lateral offset {offset} outside [0, {pitch})")
            }
            DelayError::ChannelCountMismatch { probe, engine } => write!(
                f,
                "engine channel count {engine} does not match probe channel count {probe}"
            ),
            DelayError::Dimensions => write!(f, "profile dimensions are inconsistent"),
        }
    }
}

impl std::error::Error for DelayError {}
