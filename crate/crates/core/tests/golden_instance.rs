//! Shared golden instance: a 3-channel, 16-sample frame with unit impulses
//! at known rows, beamformed with F = 2 at zero steering.
//!
//! The expected values come from a brute-force enumeration written directly
//! from the traditional transmit/receive delay formulas, independent of the
//! profile/compression code path. At zero steering the per-channel removal
//! counts are zero, so quantizing the summed delay in one step here is
//! equivalent to the engine's split quantization, and the comparison is
//! exact.

use pwdas_core::config::{AcqConfig, EngineParams, ProbeConfig};
use pwdas_core::delay::build_delay_profile;
use pwdas_core::engine::{beamform_frame, compensate_tx_delay, interpolate_2x};
use pwdas_core::grid::Grid;
use pwdas_core::reference::das_reference_quantized;
use pwdas_core::synth::ChannelFrame;

const DEPTH: usize = 16;
const WIDTH: usize = 3;

fn setup() -> (ProbeConfig, AcqConfig, EngineParams, ChannelFrame) {
    let cfg = ProbeConfig::new(WIDTH, 1e-4, 25e6, 1540.0, 5e6).unwrap();
    let acq = AcqConfig::new(vec![0.0], DEPTH, 0.0).unwrap();
    let params = EngineParams::new(WIDTH, 2, 2, 1, f64::INFINITY, 0, 1).unwrap();
    let mut frame = ChannelFrame::zeroed(DEPTH, WIDTH, 0.0);
    frame.samples[3 * WIDTH] = 1000; // channel 0, raw row 3
    frame.samples[5 * WIDTH + 1] = 1000; // channel 1, raw row 5
    frame.samples[7 * WIDTH + 2] = 1000; // channel 2, raw row 7
    (cfg, acq, params, frame)
}

/// Brute-force per-pixel enumeration from the traditional delay formulas.
fn enumeration_oracle(
    cfg: &ProbeConfig,
    acq: &AcqConfig,
    params: &EngineParams,
    frame: &ChannelFrame,
) -> Grid<i32> {
    let interp = interpolate_2x(frame);
    let d_interp = acq.depth_interp();
    let half = (params.subaperture / 2) as i64;
    let mut out = Grid::zeroed(d_interp, WIDTH);
    for r in 0..d_interp {
        let z = r as f64 * cfg.sound_speed / (4.0 * cfg.sample_rate);
        for j in 0..WIDTH {
            let x = j as f64 * cfg.pitch;
            let mut sum = 0i32;
            for n in 0..WIDTH {
                let rel = n as i64 - j as i64;
                if rel < -half || rel >= half {
                    continue;
                }
                let x_n = n as f64 * cfg.pitch;
                // Zero steering: the transmit wavefront reaches depth z
                // after z/c regardless of x.
                let tau = z / cfg.sound_speed
                    + (z * z + (x_n - x) * (x_n - x)).sqrt() / cfg.sound_speed;
                let idx = (tau * 2.0 * cfg.sample_rate).round_ties_even() as i64;
                if idx >= 0 && (idx as usize) < d_interp {
                    sum += interp[(idx as usize, n)] as i32;
                }
            }
            out[(r, j)] = sum;
        }
    }
    out
}

#[test]
fn engine_and_reference_match_the_enumeration() {
    let (cfg, acq, params, frame) = setup();
    let expected = enumeration_oracle(&cfg, &acq, &params, &frame);

    let reference = das_reference_quantized(&frame, 0.0, &cfg, &acq, &params, 0.0).unwrap();
    assert_eq!(reference.values, expected, "reference vs enumeration");

    let profile = build_delay_profile(0.0, 0.0, &cfg, &acq, &params).unwrap();
    let aligned = compensate_tx_delay(&interpolate_2x(&frame), 0.0, &cfg);
    let engine = beamform_frame(&aligned, &[&profile], &params).unwrap();
    assert_eq!(engine.values, expected, "engine vs enumeration");
}

#[test]
fn hand_computed_spot_values() {
    // Worked by hand from the arrival-time arithmetic:
    // - pixel (row 10, A-line 1): the center tap reads the channel-1
    //   impulse directly (index 10 -> 1000); the left tap quantizes to
    //   index 11 on channel 0, which is empty. Sum = 1000.
    // - pixel (row 6, A-line 1): center tap empty; left tap quantizes to
    //   index 7 on channel 0, the trailing interpolated half of the row-3
    //   impulse (500). Sum = 500.
    let (cfg, acq, params, frame) = setup();
    let reference = das_reference_quantized(&frame, 0.0, &cfg, &acq, &params, 0.0).unwrap();
    assert_eq!(reference.values[(10, 1)], 1000);
    assert_eq!(reference.values[(6, 1)], 500);

    let profile = build_delay_profile(0.0, 0.0, &cfg, &acq, &params).unwrap();
    let aligned = compensate_tx_delay(&interpolate_2x(&frame), 0.0, &cfg);
    let engine = beamform_frame(&aligned, &[&profile], &params).unwrap();
    assert_eq!(engine.values[(10, 1)], 1000);
    assert_eq!(engine.values[(6, 1)], 500);
}

#[test]
fn continuous_reference_tracks_the_hand_case() {
    // Same instance through the continuous (float) reference: the impulse
    // energy lands on the same rows within interpolation tolerance. The
    // center-tap pixel reads raw sample 5 of channel 1 at exactly zero
    // fractional delay, so the peak value matches the impulse amplitude.
    let (cfg, acq, params, frame) = setup();
    let cont =
        pwdas_core::reference::das_reference_continuous(&frame, 0.0, &cfg, &acq, &params, 0.0)
            .unwrap();
    let expected_peak = 1000.0;
    let got = cont[(10, 1)];
    assert!(
        (got - expected_peak).abs() <= 1e-6 * expected_peak,
        "continuous peak {got}"
    );
}
