//! Declarative run configuration: a TOML file with `probe`, `acquisition`,
//! `engine` and optional `phantom` sections. Unknown keys are fatal.
//!
//! Geometry values are canonicalized to f32 precision on load because the
//! binary containers store them as f32; every stage of a pipeline then
//! computes from bit-identical values whether it got them from the config
//! or from a file header.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use pwdas_core::config::{AcqConfig, EngineParams, ProbeConfig};
use pwdas_core::synth::{
    make_cyst_phantom, make_wire_phantom, Background, FieldOfView, Phantom, PulseModel, Scatterer,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub probe: ProbeSection,
    pub acquisition: AcqSection,
    pub engine: EngineSection,
    pub phantom: Option<PhantomSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub num_elements: usize,
    pub pitch_m: f64,
    pub sample_rate_hz: f64,
    pub sound_speed_m_s: f64,
    pub center_frequency_hz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcqSection {
    pub angles_deg: Vec<f64>,
    pub depth_samples: usize,
    #[serde(default)]
    pub start_time_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub subaperture: usize,
    pub rf_buffers: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    pub f_number: f64,
    #[serde(default)]
    pub pipeline_delay: u64,
    #[serde(default = "one_u64")]
    pub clock_hz: u64,
    #[serde(default)]
    pub device: Option<String>,
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSection {
    pub kind: PhantomKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_full_scale")]
    pub full_scale: f64,
    #[serde(default = "default_bandwidth")]
    pub fractional_bandwidth: f64,

    #[serde(default = "default_wire_count")]
    pub wire_count: usize,
    #[serde(default = "default_wire_spacing")]
    pub wire_spacing_m: f64,
    #[serde(default)]
    pub wire_first_depth_m: Option<f64>,
    #[serde(default)]
    pub wire_lateral_m: Option<f64>,

    #[serde(default)]
    pub cyst_center_x_m: Option<f64>,
    #[serde(default)]
    pub cyst_center_z_m: Option<f64>,
    #[serde(default)]
    pub cyst_radius_m: Option<f64>,
    #[serde(default)]
    pub cyst_contrast: f64,

    #[serde(default)]
    pub background_density_per_mm2: Option<f64>,
    #[serde(default = "default_amplitude")]
    pub background_amplitude: f64,

    #[serde(default)]
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomKind {
    Wires,
    Cyst,
    Points,
    Empty,
}

fn default_full_scale() -> f64 {
    1.0
}

fn default_bandwidth() -> f64 {
    0.6
}

fn default_wire_count() -> usize {
    5
}

fn default_wire_spacing() -> f64 {
    5e-3
}

fn default_amplitude() -> f64 {
    1.0
}

/// Round-trip through f32, matching what a container header stores.
fn canon(v: f64) -> f64 {
    v as f32 as f64
}

pub struct Loaded {
    pub probe: ProbeConfig,
    pub acq: AcqConfig,
    pub engine: EngineParams,
    pub device: Option<String>,
    pub phantom: Option<PhantomSection>,
}

pub fn parse_config(text: &str) -> Result<Loaded> {
    let file: FileConfig = toml::from_str(text).context("invalid config")?;
    let probe = ProbeConfig::new(
        file.probe.num_elements,
        canon(file.probe.pitch_m),
        canon(file.probe.sample_rate_hz),
        canon(file.probe.sound_speed_m_s),
        canon(file.probe.center_frequency_hz),
    )
    .context("invalid [probe] section")?;
    let angles = file
        .acquisition
        .angles_deg
        .iter()
        .map(|&deg| canon(deg.to_radians()))
        .collect();
    let acq = AcqConfig::new(angles, file.acquisition.depth_samples, canon(file.acquisition.start_time_s))
        .context("invalid [acquisition] section")?;
    let engine = EngineParams::new(
        file.probe.num_elements,
        file.engine.subaperture,
        file.engine.rf_buffers,
        file.engine.replicas,
        file.engine.f_number,
        file.engine.pipeline_delay,
        file.engine.clock_hz,
    )
    .context("invalid [engine] section")?;
    Ok(Loaded {
        probe,
        acq,
        engine,
        device: file.engine.device,
        phantom: file.phantom,
    })
}

pub fn build_phantom(
    section: &PhantomSection,
    probe: &ProbeConfig,
    acq: &AcqConfig,
) -> Result<(Phantom, PulseModel)> {
    let fov = FieldOfView::from_geometry(probe, acq);
    let pulse = PulseModel {
        fractional_bandwidth: section.fractional_bandwidth,
        full_scale: section.full_scale,
    };
    let phantom = match section.kind {
        PhantomKind::Empty => Phantom::new(Vec::new(), fov)?,
        PhantomKind::Points => {
            if section.points.is_empty() {
                bail!("phantom.points must not be empty for kind = \"points\"");
            }
            let scatterers = section
                .points
                .iter()
                .map(|&[x, z, amplitude]| Scatterer { x, z, amplitude })
                .collect();
            Phantom::new(scatterers, fov)?
        }
        PhantomKind::Wires => {
            let first = section
                .wire_first_depth_m
                .context("phantom.wire_first_depth_m is required for kind = \"wires\"")?;
            let lateral = section
                .wire_lateral_m
                .unwrap_or_else(|| probe.aperture() / 2.0);
            make_wire_phantom(fov, lateral, first, section.wire_spacing_m, section.wire_count)?
        }
        PhantomKind::Cyst => {
            let cx = section
                .cyst_center_x_m
                .context("phantom.cyst_center_x_m is required for kind = \"cyst\"")?;
            let cz = section
                .cyst_center_z_m
                .context("phantom.cyst_center_z_m is required for kind = \"cyst\"")?;
            let radius = section
                .cyst_radius_m
                .context("phantom.cyst_radius_m is required for kind = \"cyst\"")?;
            let density = section
                .background_density_per_mm2
                .context("phantom.background_density_per_mm2 is required for kind = \"cyst\"")?;
            make_cyst_phantom(
                fov,
                cx,
                cz,
                radius,
                section.cyst_contrast,
                Background {
                    density_per_mm2: density,
                    amplitude: section.background_amplitude,
                },
            )?
        }
    };
    let phantom = match (section.kind, section.background_density_per_mm2) {
        (PhantomKind::Cyst, _) | (_, None) => phantom,
        (_, Some(density)) => phantom.with_background(Background {
            density_per_mm2: density,
            amplitude: section.background_amplitude,
        }),
    };
    Ok((phantom, pulse))
}
