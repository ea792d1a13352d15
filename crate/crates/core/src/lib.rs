//! Software mirror of a streaming plane-wave ultrasound beamformer.
//!
//! The pipeline, in dataflow order:
//!
//! 1. [`synth`] generates raw RF channel data for point-scatterer and
//!    anechoic-cyst phantoms.
//! 2. [`delay`] builds compressed per-angle delay profiles — a
//!    `D_interp x F` index table reused by every A-line at the same depth —
//!    together with the dependent-range (MDR) and transmit-delay (MTD)
//!    quantities that size the hardware buffers.
//! 3. [`engine`] runs the parallel beamformer: 2x fast-time interpolation,
//!    per-channel transmit delay removal, diagonal summation of the
//!    delay-stacked RF matrix in `F / F_sub` passes, modulo-MDR cyclic
//!    buffering in streaming mode, and `R`-way interleaved A-line output.
//! 4. [`reference`] is the naive per-pixel oracle the engine is compared
//!    against bit-for-bit.
//! 5. [`imaging`] turns beamformed frames into B-mode images and measures
//!    CNR and lateral resolution.
//! 6. [`perf`] reproduces the latency / frame-rate / bandwidth / memory
//!    arithmetic for the published scaling settings.
//! 7. [`io`] reads and writes the little-endian `RFV1` / `DPV1` / `BFV1`
//!    containers.

pub mod config;
pub mod delay;
pub mod engine;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod perf;
pub mod reference;
pub mod synth;

pub use config::{AcqConfig, ConfigError, EngineParams, ProbeConfig};
pub use delay::{build_delay_profile, build_profile_set, DelayProfile, ProfileSet, SENTINEL};
pub use engine::{
    beamform_compound, beamform_frame, beamform_streaming, compensate_tx_delay, interpolate_2x,
    BeamformedFrame, CyclicBuffer, EngineError,
};
pub use grid::Grid;
pub use synth::{ChannelFrame, Phantom, PulseModel};
