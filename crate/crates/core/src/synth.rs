//! Synthetic raw RF channel data for plane-wave transmits.
//!
//! The model is deliberately minimal: point scatterers echo a
//! Gaussian-windowed sinusoid, arrival times come straight from the
//! traditional transmit/receive delay formulas, and there is no attenuation,
//! directivity or multiple scattering. That is enough to make every
//! beamformer claim testable at desk scale.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{AcqConfig, ProbeConfig};
use crate::delay::{rx_delay, tx_delay};

/// Rectangular region scatterers are allowed to occupy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl FieldOfView {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min && x <= self.x_max && z >= self.z_min && z <= self.z_max
    }

    /// Field of view implied by a probe/acquisition pair: the array footprint
    /// widened by half an aperture on each side, and the recorded pulse-echo
    /// depth range.
    pub fn from_geometry(cfg: &ProbeConfig, acq: &AcqConfig) -> Self {
        let margin = cfg.aperture() / 2.0;
        let z_max = acq.start_time * cfg.sound_speed / 2.0
            + acq.depth_samples as f64 / cfg.sample_rate * cfg.sound_speed / 2.0;
        FieldOfView {
            x_min: -margin,
            x_max: cfg.aperture() + margin,
            z_min: 0.0,
            z_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

/// Disc region that modulates diffuse background scatterers: `contrast = 0`
/// excludes them entirely (anechoic), other values scale their amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cyst {
    pub x: f64,
    pub z: f64,
    pub radius: f64,
    pub contrast: f64,
}

impl Cyst {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        let dx = x - self.x;
        let dz = z - self.z;
        dx * dx + dz * dz < self.radius * self.radius
    }
}

/// Diffuse speckle background: `density` scatterers per square millimeter,
/// normally distributed amplitudes scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub density_per_mm2: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub scatterers: Vec<Scatterer>,
    pub background: Option<Background>,
    pub cysts: Vec<Cyst>,
    pub fov: FieldOfView,
}

impl Phantom {
    pub fn new(scatterers: Vec<Scatterer>, fov: FieldOfView) -> Result<Self, SynthError> {
        for s in &scatterers {
            if !fov.contains(s.x, s.z) {
                return Err(SynthError::OutOfField { x: s.x, z: s.z });
            }
        }
        Ok(Phantom {
            scatterers,
            background: None,
            cysts: Vec::new(),
            fov,
        })
    }

    pub fn with_background(mut self, background: Background) -> Self {
        self.background = Some(background);
        self
    }

    pub fn with_cyst(mut self, cyst: Cyst) -> Result<Self, SynthError> {
        if !(cyst.radius > 0.0) {
            return Err(SynthError::BadRadius(cyst.radius));
        }
        self.cysts.push(cyst);
        Ok(self)
    }

    /// Draws the concrete scatterer field for a given seed: the fixed
    /// scatterers followed by the background realization. The draw order is
    /// part of the determinism contract, and the same seed must be used for
    /// every steering angle of one acquisition so the speckle stays coherent
    /// across the compound.
    pub fn realize(&self, seed: u64) -> Vec<Scatterer> {
        let mut out = self.scatterers.clone();
        if let Some(bg) = self.background {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let area_mm2 = (self.fov.x_max - self.fov.x_min)
                * (self.fov.z_max - self.fov.z_min)
                * 1e6;
            let count = (bg.density_per_mm2 * area_mm2).round() as usize;
            'next: for _ in 0..count {
                let mut attempts = 0;
                loop {
                    let x = rng.random_range(self.fov.x_min..self.fov.x_max);
                    let z = rng.random_range(self.fov.z_min..self.fov.z_max);
                    let amp: f64 = rng.sample(StandardNormal);
                    let mut scale = 1.0;
                    let mut excluded = false;
                    for cyst in &self.cysts {
                        if cyst.contains(x, z) {
                            if cyst.contrast == 0.0 {
                                excluded = true;
                            } else {
                                scale *= cyst.contrast;
                            }
                        }
                    }
                    if !excluded {
                        out.push(Scatterer {
                            x,
                            z,
                            amplitude: bg.amplitude * amp * scale,
                        });
                        continue 'next;
                    }
                    attempts += 1;
                    if attempts >= 1000 {
                        // Anechoic region covers (nearly) the whole field.
                        continue 'next;
                    }
                }
            }
        }
        out
    }
}

/// Grid of wire targets: `count` point scatterers of unit amplitude starting
/// at `first_depth` and stepping `axial_spacing` down the same A-line.
pub fn make_wire_phantom(
    fov: FieldOfView,
    lateral_x: f64,
    first_depth: f64,
    axial_spacing: f64,
    count: usize,
) -> Result<Phantom, SynthError> {
    let scatterers = (0..count)
        .map(|i| Scatterer {
            x: lateral_x,
            z: first_depth + i as f64 * axial_spacing,
            amplitude: 1.0,
        })
        .collect();
    Phantom::new(scatterers, fov)
}

/// Default wire grid: five wires spaced 5 mm apart axially.
pub fn make_default_wire_phantom(
    fov: FieldOfView,
    lateral_x: f64,
    first_depth: f64,
) -> Result<Phantom, SynthError> {
    make_wire_phantom(fov, lateral_x, first_depth, 5e-3, 5)
}

/// Anechoic (or reduced-contrast) disc embedded in diffuse speckle.
pub fn make_cyst_phantom(
    fov: FieldOfView,
    center_x: f64,
    center_z: f64,
    radius: f64,
    contrast: f64,
    background: Background,
) -> Result<Phantom, SynthError> {
    if !fov.contains(center_x, center_z) {
        return Err(SynthError::OutOfField {
            x: center_x,
            z: center_z,
        });
    }
    Phantom::new(Vec::new(), fov)?
        .with_cyst(Cyst {
            x: center_x,
            z: center_z,
            radius,
            contrast,
        })
        .map(|p| p.with_background(background))
}

/// Gaussian-windowed sinusoid transmit pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseModel {
    /// -6 dB fractional bandwidth of the Gaussian envelope.
    pub fractional_bandwidth: f64,
    /// Float amplitude mapped to full-scale 16-bit output.
    pub full_scale: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel {
            fractional_bandwidth: 0.6,
            full_scale: 1.0,
        }
    }
}

impl PulseModel {
    /// Envelope time constant for a given center frequency.
    pub fn sigma(&self, center_frequency: f64) -> f64 {
        (2.0 * (2f64).ln()).sqrt()
            / (std::f64::consts::PI * self.fractional_bandwidth * center_frequency)
    }

    pub fn evaluate(&self, t: f64, center_frequency: f64) -> f64 {
        let sigma = self.sigma(center_frequency);
        (-t * t / (2.0 * sigma * sigma)).exp()
            * (2.0 * std::f64::consts::PI * center_frequency * t).cos()
    }
}

/// Raw RF data for one transmit: `depth x width` signed 16-bit samples,
/// fast time along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    pub samples: Vec<i16>,
    pub depth: usize,
    pub width: usize,
    pub theta: f64,
}

impl ChannelFrame {
    pub fn zeroed(depth: usize, width: usize, theta: f64) -> Self {
        ChannelFrame {
            samples: vec![0; depth * width],
            depth,
            width,
            theta,
        }
    }

    pub fn sample(&self, row: usize, channel: usize) -> i16 {
        self.samples[row * self.width + channel]
    }

    pub fn row(&self, row: usize) -> &[i16] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub frame: ChannelFrame,
    /// Samples that clipped during 16-bit quantization.
    pub clipped: u64,
}

/// Pre-quantization float frame. Exposed so linearity can be checked exactly
/// before the 16-bit rounding; the integer path is [`simulate_frame`].
pub fn simulate_frame_float(
    phantom: &Phantom,
    theta: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    pulse: &PulseModel,
    seed: u64,
) -> Vec<f64> {
    let depth = acq.depth_samples;
    let width = cfg.num_elements;
    let mut out = vec![0.0f64; depth * width];
    let scatterers = phantom.realize(seed);
    let sigma = pulse.sigma(cfg.center_frequency);
    let window = 4.0 * sigma;

    for s in &scatterers {
        let t_tx = tx_delay(theta, s.x, s.z, cfg.sound_speed);
        for n in 0..width {
            let arrival = t_tx + rx_delay(cfg.element_x(n), s.x, s.z, cfg.sound_speed);
            // Only touch samples under the Gaussian window.
            let m_lo = ((arrival - window - acq.start_time) * cfg.sample_rate).ceil() as i64;
            let m_hi = ((arrival + window - acq.start_time) * cfg.sample_rate).floor() as i64;
            let m_lo = m_lo.max(0) as usize;
            let m_hi = (m_hi.min(depth as i64 - 1)).max(-1);
            if m_hi < 0 {
                continue;
            }
            for m in m_lo..=m_hi as usize {
                let t = acq.start_time + m as f64 / cfg.sample_rate - arrival;
                out[m * width + n] += s.amplitude * pulse.evaluate(t, cfg.center_frequency);
            }
        }
    }
    out
}

/// Quantizes a float frame to 16 bits: `full_scale` maps to +/-32767, ties
/// round to even, out-of-range values saturate and are counted.
pub fn quantize(frame: &[f64], full_scale: f64) -> (Vec<i16>, u64) {
    let mut clipped = 0u64;
    let samples = frame
        .iter()
        .map(|&v| {
            let scaled = (v / full_scale * 32767.0).round_ties_even();
            if scaled > 32767.0 {
                clipped += 1;
                32767
            } else if scaled < -32768.0 {
                clipped += 1;
                -32768
            } else {
                scaled as i16
            }
        })
        .collect();
    (samples, clipped)
}

/// Simulates the raw RF frame for one steering angle. Deterministic for a
/// fixed seed.
pub fn simulate_frame(
    phantom: &Phantom,
    theta: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    pulse: &PulseModel,
    seed: u64,
) -> SimResult {
    let float = simulate_frame_float(phantom, theta, cfg, acq, pulse, seed);
    let (samples, clipped) = quantize(&float, pulse.full_scale);
    SimResult {
        frame: ChannelFrame {
            samples,
            depth: acq.depth_samples,
            width: cfg.num_elements,
            theta,
        },
        clipped,
    }
}

/// Simulates every steering angle of the acquisition with one shared seed.
pub fn simulate_acquisition(
    phantom: &Phantom,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    pulse: &PulseModel,
    seed: u64,
) -> (Vec<ChannelFrame>, u64) {
    let mut clipped = 0;
    let frames = acq
        .angles
        .iter()
        .map(|&theta| {
            let r = simulate_frame(phantom, theta, cfg, acq, pulse, seed);
            clipped += r.clipped;
            r.frame
        })
        .collect();
    (frames, clipped)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    OutOfField { x: f64, z: f64 },
    BadRadius(f64),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::OutOfField { x, z } => {
                write!(f, "scatterer at ({x}, {z}) outside the field of view")
            }
            SynthError::BadRadius(r) => write!(f, "cyst radius {r} must be positive"),
        }
    }
}

impl std::error::Error for SynthError {}
