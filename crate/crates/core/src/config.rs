//! Probe geometry, acquisition and engine scaling parameters.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

/// Linear-array probe and front-end description.
///
/// Element `n` (0-based) sits at `x_n = n * pitch`, so element 0 is the
/// lateral origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// Number of receive channels, `W_i`.
    pub num_elements: usize,
    /// Element spacing `d` in meters.
    pub pitch: f64,
    /// RF sampling frequency `f_s` in hertz.
    pub sample_rate: f64,
    /// Speed of sound `c` in m/s.
    pub sound_speed: f64,
    /// Transmit center frequency `f_c` in hertz.
    pub center_frequency: f64,
}

impl ProbeConfig {
    pub fn new(
        num_elements: usize,
        pitch: f64,
        sample_rate: f64,
        sound_speed: f64,
        center_frequency: f64,
    ) -> Result<Self, ConfigError> {
        if num_elements < 2 {
            return Err(ConfigError::new("probe.num_elements must be >= 2"));
        }
        if !(pitch > 0.0) {
            return Err(ConfigError::new("probe.pitch must be > 0"));
        }
        if !(sample_rate > 0.0) {
            return Err(ConfigError::new("probe.sample_rate must be > 0"));
        }
        if !(sound_speed > 0.0) {
            return Err(ConfigError::new("probe.sound_speed must be > 0"));
        }
        if !(center_frequency > 0.0) {
            return Err(ConfigError::new("probe.center_frequency must be > 0"));
        }
        Ok(ProbeConfig {
            num_elements,
            pitch,
            sample_rate,
            sound_speed,
            center_frequency,
        })
    }

    /// Lateral position of element `n` in meters.
    pub fn element_x(&self, n: usize) -> f64 {
        n as f64 * self.pitch
    }

    /// Width of the full array, `(W_i - 1) * d`.
    pub fn aperture(&self) -> f64 {
        (self.num_elements - 1) as f64 * self.pitch
    }
}

/// One compound acquisition: the steering angles fired in sequence and the
/// fast-time extent recorded per firing.
#[derive(Debug, Clone, PartialEq)]
pub struct AcqConfig {
    /// Steering angles in radians.
    pub angles: Vec<f64>,
    /// Raw RF samples per channel per firing, `D`.
    pub depth_samples: usize,
    /// Receive clock offset relative to the transmit instant, seconds.
    pub start_time: f64,
}

impl AcqConfig {
    pub fn new(angles: Vec<f64>, depth_samples: usize, start_time: f64) -> Result<Self, ConfigError> {
        if angles.is_empty() {
            return Err(ConfigError::new("acquisition.angles must not be empty"));
        }
        for &a in &angles {
            if !(a.abs() < FRAC_PI_2) {
                return Err(ConfigError::new("acquisition angle magnitude must be < 90 deg"));
            }
        }
        if depth_samples < 1 {
            return Err(ConfigError::new("acquisition.depth_samples must be >= 1"));
        }
        if !start_time.is_finite() {
            return Err(ConfigError::new("acquisition.start_time must be finite"));
        }
        Ok(AcqConfig {
            angles,
            depth_samples,
            start_time,
        })
    }

    /// Fast-time rows after 2x interpolation; also the number of output rows.
    pub fn depth_interp(&self) -> usize {
        2 * self.depth_samples
    }
}

/// Scaling knobs of the parallel beamformer.
///
/// `f_number` may be `f64::INFINITY`, which disables the depth-dependent
/// aperture reduction entirely (the subaperture stays at `subaperture` for
/// every row).
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    /// Receive channel count `W_i`; must match the probe it is used with.
    pub num_elements: usize,
    /// Subaperture size `F` (elements summed per pixel).
    pub subaperture: usize,
    /// RF buffer replica count `F_sub` (diagonals summed per pass).
    pub rf_buffers: usize,
    /// Replicated beamformer count `R` (sub-pitch interleaved A-line groups).
    pub replicas: usize,
    /// Fixed receive F-number controlling aperture growth with depth.
    pub f_number: f64,
    /// Pipeline fill/drain overhead in clock cycles, `P`.
    pub pipeline_delay: u64,
    /// Beamformer clock in hertz.
    pub clock_hz: u64,
}

impl EngineParams {
    pub fn new(
        num_elements: usize,
        subaperture: usize,
        rf_buffers: usize,
        replicas: usize,
        f_number: f64,
        pipeline_delay: u64,
        clock_hz: u64,
    ) -> Result<Self, ConfigError> {
        if subaperture < 2 || subaperture % 2 != 0 {
            return Err(ConfigError::new("engine.subaperture must be even and >= 2"));
        }
        if subaperture > num_elements {
            return Err(ConfigError::new(
                "engine.subaperture must not exceed the channel count",
            ));
        }
        if rf_buffers == 0 || subaperture % rf_buffers != 0 {
            return Err(ConfigError::new(
                "engine.rf_buffers must divide engine.subaperture",
            ));
        }
        // The transmit-compensation repacking bundles F/F_sub channels per
        // block, so the channel count must split evenly into blocks.
        if (num_elements * rf_buffers) % subaperture != 0 {
            return Err(ConfigError::new(
                "num_elements * rf_buffers must be divisible by subaperture",
            ));
        }
        if replicas < 1 {
            return Err(ConfigError::new("engine.replicas must be >= 1"));
        }
        if !(f_number > 0.0) {
            return Err(ConfigError::new("engine.f_number must be > 0"));
        }
        if clock_hz == 0 {
            return Err(ConfigError::new("engine.clock_hz must be > 0"));
        }
        Ok(EngineParams {
            num_elements,
            subaperture,
            rf_buffers,
            replicas,
            f_number,
            pipeline_delay,
            clock_hz,
        })
    }

    /// Sequential passes needed per output row, `F / F_sub`.
    pub fn passes(&self) -> usize {
        self.subaperture / self.rf_buffers
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    msg: &'static str,
}

impl ConfigError {
    fn new(msg: &'static str) -> Self {
        ConfigError { msg }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.msg)
    }
}

impl std::error::Error for ConfigError {}
