//! The parallel delay-and-sum engine: 2x fast-time interpolation, per-channel
//! transmit delay removal, delay-stacked diagonal summation in `F / F_sub`
//! passes, cyclic RF buffers sized by the maximum dependent range, and
//! `R`-way interleaved A-line output.
//!
//! Everything here mirrors the streaming hardware dataflow functionally.
//! The `F_sub` replicated RF buffers hold identical data in the hardware, so
//! they are modeled as one store with multiple read views; the performance
//! model accounts for the physical copies.

use std::fmt;

use crate::config::{EngineParams, ProbeConfig};
use crate::delay::{tx_removal_counts, DelayProfile, INTERP_FACTOR, SENTINEL};
use crate::grid::Grid;
use crate::synth::ChannelFrame;

/// Beamformed output for one steering angle: `D_interp x W_o` signed 32-bit
/// accumulators. 16-bit inputs summed over a subaperture of up to 64 need
/// 22 bits, so 32-bit accumulation can never saturate silently.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedFrame {
    pub values: Grid<i32>,
    pub theta: f64,
}

/// Linear interpolation by two along fast time. Even rows copy the raw
/// samples, odd rows hold the arithmetic mean of the neighbors with
/// sign-preserving (floor) halving, and the final odd row duplicates the
/// last raw row.
pub fn interpolate_2x(frame: &ChannelFrame) -> Grid<i16> {
    assert!(frame.depth >= 2, "interpolation needs at least two rows");
    let w = frame.width;
    let mut out = Grid::zeroed(2 * frame.depth, w);
    for i in 0..frame.depth {
        out.row_mut(2 * i).copy_from_slice(frame.row(i));
        if i + 1 < frame.depth {
            let (a, b) = (frame.row(i), frame.row(i + 1));
            let mid = out.row_mut(2 * i + 1);
            for n in 0..w {
                // Arithmetic shift: floor((a + b) / 2), so -1 stays -1.
                mid[n] = ((a[n] as i32 + b[n] as i32) >> 1) as i16;
            }
        } else {
            let last = frame.row(i).to_vec();
            out.row_mut(2 * i + 1).copy_from_slice(&last);
        }
    }
    out
}

/// Drops the first `N_n` interpolated samples of each channel and zero-pads
/// the tail so all channels keep the same length. This is the FIFO stage:
/// writes are gated until the channel's removal count has passed, reads
/// start once the maximum transmit delay has passed.
pub fn compensate_tx_delay(interp: &Grid<i16>, theta: f64, cfg: &ProbeConfig) -> Grid<i16> {
    assert_eq!(interp.cols(), cfg.num_elements, "channel count mismatch");
    let rows = interp.rows();
    let removals = tx_removal_counts(cfg, theta, INTERP_FACTOR);
    let mut out = Grid::zeroed(rows, interp.cols());
    // The removal count is monotone across the array, so equal-shift
    // channels form contiguous runs that copy as row slices.
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    let mut start = 0;
    for n in 1..=removals.len() {
        if n == removals.len() || removals[n] != removals[start] {
            runs.push((start, n, removals[start] as usize));
            start = n;
        }
    }
    for r in 0..rows {
        let dst = out.row_mut(r);
        for &(n0, n1, shift) in &runs {
            let src = r + shift;
            if src < rows {
                dst[n0..n1].copy_from_slice(&interp.row(src)[n0..n1]);
            }
        }
    }
    out
}

/// RF row store with modulo addressing: reading logical row `q` returns the
/// value written there iff at most `depth` rows have been written since.
#[derive(Debug, Clone)]
pub struct CyclicBuffer {
    data: Vec<i16>,
    depth: usize,
    width: usize,
    cursor: usize,
}

impl CyclicBuffer {
    pub fn new(depth: usize, width: usize) -> Self {
        assert!(depth > 0);
        CyclicBuffer {
            data: vec![0; depth * width],
            depth,
            width,
            cursor: 0,
        }
    }

    pub fn push(&mut self, row: &[i16]) {
        assert_eq!(row.len(), self.width);
        let slot = self.cursor % self.depth;
        self.data[slot * self.width..(slot + 1) * self.width].copy_from_slice(row);
        self.cursor += 1;
    }

    /// Rows written so far.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Logical row `q`, valid only while `cursor - q <= depth` and `q` has
    /// been written.
    pub fn row(&self, q: usize) -> Option<&[i16]> {
        if q >= self.cursor || self.cursor - q > self.depth {
            return None;
        }
        let slot = q % self.depth;
        Some(&self.data[slot * self.width..(slot + 1) * self.width])
    }
}

/// Accumulates the taps `[k_lo, k_hi)` of one profile row into one A-line
/// group row: `out[j] += rf[index[k], j + k - F/2]`, skipping sentinels and
/// columns outside the array. Used by the streaming path, whose rows live
/// in the 16-bit cyclic buffer.
fn accumulate_taps<'a, G>(
    prof_row: &[u16],
    k_lo: usize,
    k_hi: usize,
    half: i64,
    width: usize,
    fetch: G,
    out: &mut [i32],
) where
    G: Fn(usize) -> &'a [i16],
{
    for (k, &idx) in prof_row[k_lo..k_hi].iter().enumerate() {
        if idx == SENTINEL {
            continue;
        }
        let src = fetch(idx as usize);
        let shift = (k_lo + k) as i64 - half;
        let j_lo = (-shift).max(0) as usize;
        let j_hi = ((width as i64 - shift).min(width as i64)).max(0) as usize;
        let src_off = (j_lo as i64 + shift) as usize;
        let dst = &mut out[j_lo..j_hi];
        let src = &src[src_off..src_off + dst.len()];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s as i32;
        }
    }
}

fn check_frame_inputs(
    rows: usize,
    width: usize,
    profiles: &[&DelayProfile],
    params: &EngineParams,
) -> Result<(), EngineError> {
    if width != params.num_elements {
        return Err(EngineError::Dimensions(format!(
            "frame has {width} channels, engine expects {}",
            params.num_elements
        )));
    }
    if profiles.len() != params.replicas {
        return Err(EngineError::Dimensions(format!(
            "{} profiles supplied for {} replicas",
            profiles.len(),
            params.replicas
        )));
    }
    for p in profiles {
        if p.d_interp() != rows {
            return Err(EngineError::Dimensions(format!(
                "profile depth {} does not match frame depth {rows}",
                p.d_interp()
            )));
        }
        if p.subaperture() != params.subaperture {
            return Err(EngineError::Dimensions(format!(
                "profile subaperture {} does not match engine subaperture {}",
                p.subaperture(),
                params.subaperture
            )));
        }
    }
    Ok(())
}

/// Sums the taps of one profile row into one output row for offset group
/// `rho`. `wide` is the zero-padded widened frame: column `n` of the aligned
/// data sits at `n + F/2`, so tap `k` for A-line `j` reads offset `j + k`
/// and the array-edge zeros fall out of the padding with no branches.
#[allow(clippy::too_many_arguments)]
fn beamform_row(
    prof_row: &[u16],
    wide: &[i32],
    wpad: usize,
    width: usize,
    f_sub: usize,
    passes: usize,
    replicas: usize,
    rho: usize,
    group_row: &mut [i32],
    out_row: &mut [i32],
) {
    group_row.fill(0);
    for pass in 0..passes {
        for (dk, &idx) in prof_row[pass * f_sub..(pass + 1) * f_sub].iter().enumerate() {
            if idx == SENTINEL {
                continue;
            }
            let base = idx as usize * wpad + pass * f_sub + dk;
            let src = &wide[base..base + width];
            for (d, &s) in group_row.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    for (j, &v) in group_row.iter().enumerate() {
        out_row[j * replicas + rho] = v;
    }
}

/// Beamforms one aligned (interpolated + transmit-compensated) frame against
/// the profiles of all `R` offset groups of one steering angle.
///
/// Each output row is produced in `F / F_sub` passes of `F_sub` diagonals,
/// partial rows summed as they complete; the result is bit-identical for
/// every `F_sub` because integer addition reorders freely. Output columns
/// interleave the offset groups by increasing physical x: column
/// `j * R + rho` is A-line `j` of group `rho`. Output rows are independent
/// and are split across the available cores.
pub fn beamform_frame(
    aligned: &Grid<i16>,
    profiles: &[&DelayProfile],
    params: &EngineParams,
) -> Result<BeamformedFrame, EngineError> {
    check_frame_inputs(aligned.rows(), aligned.cols(), profiles, params)?;
    let rows = aligned.rows();
    let width = aligned.cols();
    let replicas = params.replicas;
    let f = params.subaperture;
    let f_sub = params.rf_buffers;
    let passes = params.passes();
    let theta = profiles[0].theta();

    // Widen once and pad each row by F/2 zeros on both sides; the diagonal
    // kernel then needs no edge handling and runs in pure 32-bit adds.
    // Values are identical to summing the 16-bit rows directly.
    let wpad = width + f;
    let mut wide = vec![0i32; rows * wpad];
    for r in 0..rows {
        let src = aligned.row(r);
        let dst = &mut wide[r * wpad + f / 2..r * wpad + f / 2 + width];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = s as i32;
        }
    }

    let mut out = Grid::zeroed(rows, width * replicas);
    let out_cols = width * replicas;
    // Small frames are not worth the spawn overhead.
    let threads = if rows * width >= 1 << 16 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        1
    };
    let chunk_rows = rows.div_ceil(threads);
    for (rho, profile) in profiles.iter().enumerate() {
        let wide = &wide;
        std::thread::scope(|scope| {
            for (i, out_chunk) in out.data_mut().chunks_mut(chunk_rows * out_cols).enumerate() {
                scope.spawn(move || {
                    let mut group_row = vec![0i32; width];
                    for (ri, out_row) in out_chunk.chunks_mut(out_cols).enumerate() {
                        let r = i * chunk_rows + ri;
                        beamform_row(
                            profile.row(r),
                            wide,
                            wpad,
                            width,
                            f_sub,
                            passes,
                            replicas,
                            rho,
                            &mut group_row,
                            out_row,
                        );
                    }
                });
            }
        });
    }
    Ok(BeamformedFrame { values: out, theta })
}

/// Streaming variant: consumes aligned rows in fast-time order through a
/// cyclic buffer of depth MDR and emits each output row as soon as every
/// index it needs has been written. Bit-identical to [`beamform_frame`].
///
/// Returns [`EngineError::MdrViolation`] if a row would need an index the
/// buffer has already overwritten; profiles built by the delay model cannot
/// trigger this, the check guards hand-built tables.
pub fn beamform_streaming<'a, I>(
    rows: I,
    profiles: &[&DelayProfile],
    params: &EngineParams,
) -> Result<BeamformedFrame, EngineError>
where
    I: IntoIterator<Item = &'a [i16]>,
{
    let d_interp = profiles
        .first()
        .map(|p| p.d_interp())
        .ok_or_else(|| EngineError::Dimensions("no profiles supplied".into()))?;
    check_frame_inputs(d_interp, params.num_elements, profiles, params)?;
    let width = params.num_elements;
    let replicas = params.replicas;
    let f = params.subaperture;
    let f_sub = params.rf_buffers;
    let half = (f / 2) as i64;
    let theta = profiles[0].theta();

    let mdr = profiles.iter().map(|p| p.mdr()).max().unwrap().max(1) as usize;
    let mut buffer = CyclicBuffer::new(mdr, width);
    let mut out = Grid::zeroed(d_interp, width * replicas);
    let mut group_row = vec![0i32; width];
    let mut next_out = 0usize;
    let mut written = 0usize;

    let drain = |buffer: &CyclicBuffer,
                     next_out: &mut usize,
                     out: &mut Grid<i32>,
                     group_row: &mut [i32]|
     -> Result<(), EngineError> {
        while *next_out < d_interp {
            let r = *next_out;
            let ready = profiles.iter().all(|p| match p.row_bounds(r) {
                None => true,
                Some((_, hi)) => (hi as usize) < buffer.cursor(),
            });
            if !ready {
                return Ok(());
            }
            for (rho, profile) in profiles.iter().enumerate() {
                group_row.fill(0);
                if let Some((lo, _)) = profile.row_bounds(r) {
                    if (lo as usize) + mdr < buffer.cursor() {
                        return Err(EngineError::MdrViolation {
                            row: r,
                            index: lo as u32,
                        });
                    }
                    let prof_row = profile.row(r);
                    for pass in 0..params.passes() {
                        accumulate_taps(
                            prof_row,
                            pass * f_sub,
                            (pass + 1) * f_sub,
                            half,
                            width,
                            |idx| buffer.row(idx).expect("index bounds checked"),
                            group_row,
                        );
                    }
                }
                let dst = out.row_mut(r);
                for (j, &v) in group_row.iter().enumerate() {
                    dst[j * replicas + rho] = v;
                }
            }
            *next_out += 1;
        }
        Ok(())
    };

    for row in rows {
        if row.len() != width {
            return Err(EngineError::Dimensions(format!(
                "streamed row has {} samples, expected {width}",
                row.len()
            )));
        }
        if written == d_interp {
            return Err(EngineError::Dimensions(
                "more rows streamed than the profile depth".into(),
            ));
        }
        buffer.push(row);
        written += 1;
        drain(&buffer, &mut next_out, &mut out, &mut group_row)?;
    }
    if written != d_interp {
        return Err(EngineError::Dimensions(format!(
            "streamed {written} rows, profile depth is {d_interp}"
        )));
    }
    debug_assert_eq!(next_out, d_interp);
    Ok(BeamformedFrame { values: out, theta })
}

/// Exact integer compound of per-angle frames in widened accumulators.
pub fn compound(frames: &[BeamformedFrame]) -> Result<Grid<i64>, EngineError> {
    let first = frames
        .first()
        .ok_or_else(|| EngineError::AngleMismatch("no frames to compound".into()))?;
    let rows = first.values.rows();
    let cols = first.values.cols();
    let mut out = Grid::zeroed(rows, cols);
    for frame in frames {
        if frame.values.rows() != rows || frame.values.cols() != cols {
            return Err(EngineError::Dimensions(
                "compound inputs have mismatched shapes".into(),
            ));
        }
        for r in 0..rows {
            let dst = out.row_mut(r);
            for (d, &s) in dst.iter_mut().zip(frame.values.row(r)) {
                *d += s as i64;
            }
        }
    }
    Ok(out)
}

/// Full per-acquisition pipeline: interpolate, compensate and beamform every
/// angle of `frames` against the matching profiles, then compound.
pub fn beamform_compound(
    frames: &[ChannelFrame],
    cfg: &ProbeConfig,
    set: &crate::delay::ProfileSet,
    params: &EngineParams,
) -> Result<(Vec<BeamformedFrame>, Grid<i64>), EngineError> {
    if frames.len() != set.angles.len() {
        return Err(EngineError::AngleMismatch(format!(
            "{} RF frames vs {} profile angles",
            frames.len(),
            set.angles.len()
        )));
    }
    let mut per_angle = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        if frame.theta != set.angles[i] {
            return Err(EngineError::AngleMismatch(format!(
                "angle {i}: RF frame at {} rad, profile at {} rad",
                frame.theta, set.angles[i]
            )));
        }
        let interp = interpolate_2x(frame);
        let aligned = compensate_tx_delay(&interp, frame.theta, cfg);
        per_angle.push(beamform_frame(&aligned, &set.profiles_for_angle(i), params)?);
    }
    let compounded = compound(&per_angle)?;
    Ok((per_angle, compounded))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Dimensions(String),
    /// A profile row needs an index that the cyclic buffer has overwritten.
    MdrViolation { row: usize, index: u32 },
    AngleMismatch(String),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Dimensions(msg) => write!(f, "dimension mismatch: {msg}"),
            EngineError::MdrViolation { row, index } => write!(
                f,
                "output row {row} needs overwritten buffer index {index} (dependent range exceeds MDR)"
            ),
            EngineError::AngleMismatch(msg) => write!(f, "angle mismatch: {msg}"),
        }
    }
}

impl std::error::Error for EngineError {}
