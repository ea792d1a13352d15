//! Naive per-pixel delay-and-sum, the differential oracle for the engine.
//!
//! Two fidelity modes:
//!
//! * **quantized** walks every pixel and element independently, with no
//!   delay reuse, no diagonal summation, no buffering and no pass structure,
//!   but makes exactly the same quantization decisions as the engine (2x
//!   interpolation, half-even index rounding, alignment-shift split,
//!   F-number masking, edge zero-fill). Engine output must match it
//!   bit-for-bit; any difference is a structural bug, not rounding noise.
//! * **continuous** interpolates the raw RF linearly at the exact fractional
//!   delay. It is only for image-quality comparisons and is never expected
//!   to match anything bit-exactly.
//!
//! Speed is an explicit non-goal here.

use crate::config::{AcqConfig, EngineParams, ProbeConfig};
use crate::delay::{
    delay_index, depth_at_row, effective_subaperture, replica_offsets, rx_delay, tx_alignment_shift,
    tx_delay, tx_removal_counts, within_aperture, INTERP_FACTOR,
};
use crate::engine::{interpolate_2x, BeamformedFrame, EngineError};
use crate::grid::Grid;
use crate::synth::ChannelFrame;

fn check_frame(frame: &ChannelFrame, cfg: &ProbeConfig) -> Result<(), EngineError> {
    if frame.width != cfg.num_elements {
        return Err(EngineError::Dimensions(format!(
            "frame has {} channels, probe has {}",
            frame.width, cfg.num_elements
        )));
    }
    if frame.depth != frame.samples.len() / frame.width {
        return Err(EngineError::Dimensions("frame buffer length mismatch".into()));
    }
    Ok(())
}

/// Quantized per-pixel oracle for one sub-pitch offset group: A-line `j`
/// targets `x = j * d + lateral_offset`.
pub fn das_reference_quantized(
    frame: &ChannelFrame,
    theta: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
    lateral_offset: f64,
) -> Result<BeamformedFrame, EngineError> {
    check_frame(frame, cfg)?;
    if frame.depth != acq.depth_samples {
        return Err(EngineError::Dimensions(format!(
            "frame depth {} does not match acquisition depth {}",
            frame.depth, acq.depth_samples
        )));
    }
    let interp = interpolate_2x(frame);
    let d_interp = acq.depth_interp();
    let width = cfg.num_elements;
    let half = (params.subaperture / 2) as i64;
    let shift = tx_alignment_shift(cfg, theta);
    let removals = tx_removal_counts(cfg, theta, INTERP_FACTOR);

    let mut out = Grid::zeroed(d_interp, width);
    for r in 0..d_interp {
        let z = depth_at_row(r, cfg, acq.start_time);
        let f_eff = effective_subaperture(z, params, cfg);
        if f_eff == 0 {
            continue;
        }
        let dst = out.row_mut(r);
        for (j, acc) in dst.iter_mut().enumerate() {
            let n_lo = (j as i64 - half).max(0) as usize;
            let n_hi = ((j as i64 + half).min(width as i64)).max(0) as usize;
            let mut sum = 0i32;
            for n in n_lo..n_hi {
                // Same relative-lateral-distance arithmetic the profile
                // builder uses for tap k = n - j + F/2.
                let dx = (n as i64 - j as i64) as f64 * cfg.pitch - lateral_offset;
                if !within_aperture(dx, f_eff, cfg.pitch) {
                    continue;
                }
                let idx = delay_index(cfg, theta, dx, z, shift, acq.start_time);
                if idx < 0 || idx >= d_interp as i64 {
                    continue;
                }
                let src = idx as usize + removals[n] as usize;
                if src < d_interp {
                    sum += interp[(src, n)] as i32;
                }
            }
            *acc = sum;
        }
    }
    Ok(BeamformedFrame { values: out, theta })
}

/// Quantized oracle for all `R` offset groups, columns interleaved by
/// increasing physical x exactly like the engine output.
pub fn das_reference_quantized_interleaved(
    frame: &ChannelFrame,
    theta: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
) -> Result<BeamformedFrame, EngineError> {
    let offsets = replica_offsets(params, cfg);
    let replicas = offsets.len();
    let d_interp = acq.depth_interp();
    let mut out = Grid::zeroed(d_interp, cfg.num_elements * replicas);
    for (rho, &offset) in offsets.iter().enumerate() {
        let group = das_reference_quantized(frame, theta, cfg, acq, params, offset)?;
        for r in 0..d_interp {
            let src = group.values.row(r);
            let dst = out.row_mut(r);
            for (j, &v) in src.iter().enumerate() {
                dst[j * replicas + rho] = v;
            }
        }
    }
    Ok(BeamformedFrame { values: out, theta })
}

/// Continuous-delay reference: linear interpolation of the raw RF at the
/// exact (un-quantized) arrival time from the traditional delay formulas.
pub fn das_reference_continuous(
    frame: &ChannelFrame,
    theta: f64,
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
    lateral_offset: f64,
) -> Result<Grid<f64>, EngineError> {
    check_frame(frame, cfg)?;
    let d_interp = acq.depth_interp();
    let width = cfg.num_elements;
    let half = (params.subaperture / 2) as i64;

    let mut out = Grid::zeroed(d_interp, width);
    for r in 0..d_interp {
        let z = depth_at_row(r, cfg, acq.start_time);
        let f_eff = effective_subaperture(z, params, cfg);
        if f_eff == 0 {
            continue;
        }
        let dst = out.row_mut(r);
        for (j, acc) in dst.iter_mut().enumerate() {
            let x = j as f64 * cfg.pitch + lateral_offset;
            let n_lo = (j as i64 - half).max(0) as usize;
            let n_hi = ((j as i64 + half).min(width as i64)).max(0) as usize;
            let mut sum = 0.0f64;
            for n in n_lo..n_hi {
                let x_n = cfg.element_x(n);
                if !within_aperture(x_n - x, f_eff, cfg.pitch) {
                    continue;
                }
                let t = tx_delay(theta, x, z, cfg.sound_speed)
                    + rx_delay(x_n, x, z, cfg.sound_speed);
                let s = (t - acq.start_time) * cfg.sample_rate;
                let s0 = s.floor();
                let w = s - s0;
                let i0 = s0 as i64;
                if i0 < 0 || i0 as usize >= frame.depth {
                    continue;
                }
                let a = frame.sample(i0 as usize, n) as f64;
                let b = if (i0 as usize) + 1 < frame.depth {
                    frame.sample(i0 as usize + 1, n) as f64
                } else {
                    a
                };
                sum += a * (1.0 - w) + b * w;
            }
            *acc = sum;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeConfig {
        ProbeConfig::new(8, 1e-4, 25e6, 1540.0, 5e6).unwrap()
    }

    #[test]
    fn zero_frame_gives_zero_output() {
        let cfg = probe();
        let acq = AcqConfig::new(vec![0.0], 16, 0.0).unwrap();
        let params = EngineParams::new(8, 4, 2, 1, 1.0, 0, 1).unwrap();
        let frame = ChannelFrame::zeroed(16, 8, 0.0);
        let out = das_reference_quantized(&frame, 0.0, &cfg, &acq, &params, 0.0).unwrap();
        assert!(out.values.data().iter().all(|&v| v == 0));
        let cont = das_reference_continuous(&frame, 0.0, &cfg, &acq, &params, 0.0).unwrap();
        assert!(cont.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn face_rows_are_masked_to_zero() {
        // With f# = 1 the rows at z <= d admit no taps at all.
        let cfg = probe();
        let acq = AcqConfig::new(vec![0.0], 16, 0.0).unwrap();
        let params = EngineParams::new(8, 4, 2, 1, 1.0, 0, 1).unwrap();
        let mut frame = ChannelFrame::zeroed(16, 8, 0.0);
        frame.samples.iter_mut().for_each(|v| *v = 100);
        let out = das_reference_quantized(&frame, 0.0, &cfg, &acq, &params, 0.0).unwrap();
        // Row 0 is z = 0: fully masked.
        assert!(out.values.row(0).iter().all(|&v| v == 0));
        // Deep rows are not.
        assert!(out.values.row(30).iter().any(|&v| v != 0));
    }

    #[test]
    fn impulse_translation_consistency() {
        // Shifting a center-channel impulse two interpolated samples down
        // moves the matched output row by one raw-grid row.
        let cfg = probe();
        let acq = AcqConfig::new(vec![0.0], 32, 0.0).unwrap();
        let params = EngineParams::new(8, 4, 2, 1, f64::INFINITY, 0, 1).unwrap();
        let j = 4usize;
        let mut f1 = ChannelFrame::zeroed(32, 8, 0.0);
        f1.samples[10 * 8 + j] = 2000;
        let mut f2 = ChannelFrame::zeroed(32, 8, 0.0);
        f2.samples[11 * 8 + j] = 2000;
        let o1 = das_reference_quantized(&f1, 0.0, &cfg, &acq, &params, 0.0).unwrap();
        let o2 = das_reference_quantized(&f2, 0.0, &cfg, &acq, &params, 0.0).unwrap();
        // Interior rows shift by exactly two interpolated rows.
        for r in 0..o1.values.rows() - 2 {
            assert_eq!(o1.values[(r, j)], o2.values[(r + 2, j)]);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = probe();
        let acq = AcqConfig::new(vec![0.0], 16, 0.0).unwrap();
        let params = EngineParams::new(8, 4, 2, 1, 1.0, 0, 1).unwrap();
        let frame = ChannelFrame::zeroed(16, 4, 0.0);
        assert!(das_reference_quantized(&frame, 0.0, &cfg, &acq, &params, 0.0).is_err());
    }
}
