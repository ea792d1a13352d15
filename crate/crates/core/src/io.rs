//! Little-endian binary container formats shared with external tooling.
//!
//! * `RFV1` — raw RF channel data, one `D x W_i` i16 block per steering
//!   angle, fast time outer, channel inner (the engine's row-vector fetch
//!   order).
//! * `DPV1` — compressed delay profiles, one `D_interp x F` u16 block per
//!   (angle, offset), sentinel `0xFFFF`.
//! * `BFV1` — beamformed frames, one `D_interp x W_o` i32 block per angle,
//!   then a one-byte marker and the compounded frame when present.
//!
//! Geometry fields travel as f32. Anything derived from them downstream
//! must start from the same f32 values or bit-exact reproducibility across
//! files is lost; the CLI canonicalizes its configs accordingly.

use std::fmt;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::config::ProbeConfig;
use crate::delay::{DelayProfile, ProfileSet};
use crate::grid::Grid;
use crate::synth::ChannelFrame;

pub const RF_MAGIC: &[u8; 4] = b"RFV1";
pub const DP_MAGIC: &[u8; 4] = b"DPV1";
pub const BF_MAGIC: &[u8; 4] = b"BFV1";

/// A full raw acquisition: probe header plus one frame per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct RfData {
    pub probe: ProbeConfig,
    pub depth: usize,
    pub angles: Vec<f64>,
    pub frames: Vec<ChannelFrame>,
}

/// Beamformed output container.
#[derive(Debug, Clone, PartialEq)]
pub struct BfData {
    pub d_interp: usize,
    pub w_o: usize,
    pub per_angle: Vec<Grid<i32>>,
    pub compound: Option<Grid<i64>>,
}

pub fn write_rf<W: Write>(w: &mut W, rf: &RfData) -> Result<(), FormatError> {
    if rf.frames.len() != rf.angles.len() {
        return Err(FormatError::Invalid("frame count != angle count".into()));
    }
    w.write_all(RF_MAGIC)?;
    w.write_u32::<LittleEndian>(rf.probe.num_elements as u32)?;
    w.write_u32::<LittleEndian>(rf.depth as u32)?;
    w.write_u32::<LittleEndian>(rf.angles.len() as u32)?;
    w.write_f32::<LittleEndian>(rf.probe.sample_rate as f32)?;
    w.write_f32::<LittleEndian>(rf.probe.sound_speed as f32)?;
    w.write_f32::<LittleEndian>(rf.probe.pitch as f32)?;
    w.write_f32::<LittleEndian>(rf.probe.center_frequency as f32)?;
    for &a in &rf.angles {
        w.write_f32::<LittleEndian>(a as f32)?;
    }
    for frame in &rf.frames {
        if frame.depth != rf.depth || frame.width != rf.probe.num_elements {
            return Err(FormatError::Invalid("frame dimensions mismatch header".into()));
        }
        for &s in &frame.samples {
            w.write_i16::<LittleEndian>(s)?;
        }
    }
    Ok(())
}

pub fn read_rf<R: Read>(r: &mut R) -> Result<RfData, FormatError> {
    expect_magic(r, RF_MAGIC)?;
    let w_i = r.read_u32::<LittleEndian>()? as usize;
    let depth = r.read_u32::<LittleEndian>()? as usize;
    let n_angles = r.read_u32::<LittleEndian>()? as usize;
    let sample_rate = r.read_f32::<LittleEndian>()? as f64;
    let sound_speed = r.read_f32::<LittleEndian>()? as f64;
    let pitch = r.read_f32::<LittleEndian>()? as f64;
    let center_frequency = r.read_f32::<LittleEndian>()? as f64;
    let probe = ProbeConfig::new(w_i, pitch, sample_rate, sound_speed, center_frequency)
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    if depth == 0 || n_angles == 0 {
        return Err(FormatError::Invalid("empty depth or angle count".into()));
    }
    let mut angles = Vec::with_capacity(n_angles);
    for _ in 0..n_angles {
        angles.push(r.read_f32::<LittleEndian>()? as f64);
    }
    let mut frames = Vec::with_capacity(n_angles);
    for &theta in &angles {
        let mut samples = vec![0i16; depth * w_i];
        r.read_i16_into::<LittleEndian>(&mut samples)?;
        frames.push(ChannelFrame {
            samples,
            depth,
            width: w_i,
            theta,
        });
    }
    Ok(RfData {
        probe,
        depth,
        angles,
        frames,
    })
}

pub fn write_profiles<W: Write>(w: &mut W, set: &ProfileSet) -> Result<(), FormatError> {
    w.write_all(DP_MAGIC)?;
    w.write_u32::<LittleEndian>(set.d_interp as u32)?;
    w.write_u32::<LittleEndian>(set.subaperture as u32)?;
    w.write_u32::<LittleEndian>(set.angles.len() as u32)?;
    w.write_u32::<LittleEndian>(set.replicas as u32)?;
    for &a in &set.angles {
        w.write_f32::<LittleEndian>(a as f32)?;
    }
    for &o in &set.offsets {
        w.write_f32::<LittleEndian>(o as f32)?;
    }
    w.write_u32::<LittleEndian>(set.mdr)?;
    for profile in &set.profiles {
        for &v in profile.indices() {
            w.write_u16::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_profiles<R: Read>(r: &mut R) -> Result<ProfileSet, FormatError> {
    expect_magic(r, DP_MAGIC)?;
    let d_interp = r.read_u32::<LittleEndian>()? as usize;
    let f = r.read_u32::<LittleEndian>()? as usize;
    let n_angles = r.read_u32::<LittleEndian>()? as usize;
    let replicas = r.read_u32::<LittleEndian>()? as usize;
    if d_interp == 0 || f == 0 || n_angles == 0 || replicas == 0 {
        return Err(FormatError::Invalid("empty profile dimensions".into()));
    }
    let mut angles = Vec::with_capacity(n_angles);
    for _ in 0..n_angles {
        angles.push(r.read_f32::<LittleEndian>()? as f64);
    }
    let mut offsets = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        offsets.push(r.read_f32::<LittleEndian>()? as f64);
    }
    let stored_mdr = r.read_u32::<LittleEndian>()?;
    let mut profiles = Vec::with_capacity(n_angles * replicas);
    for a in 0..n_angles {
        for rho in 0..replicas {
            let mut indices = vec![0u16; d_interp * f];
            r.read_u16_into::<LittleEndian>(&mut indices)?;
            let profile =
                DelayProfile::from_indices(d_interp, f, indices, angles[a], offsets[rho])
                    .map_err(|e| FormatError::Invalid(e.to_string()))?;
            profiles.push(profile);
        }
    }
    let set = ProfileSet::new(d_interp, f, angles, offsets, profiles)
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    if set.mdr != stored_mdr {
        return Err(FormatError::Invalid(format!(
            "stored MDR {stored_mdr} disagrees with recomputed {}",
            set.mdr
        )));
    }
    Ok(set)
}

pub fn write_bf<W: Write>(w: &mut W, bf: &BfData) -> Result<(), FormatError> {
    w.write_all(BF_MAGIC)?;
    w.write_u32::<LittleEndian>(bf.d_interp as u32)?;
    w.write_u32::<LittleEndian>(bf.w_o as u32)?;
    w.write_u32::<LittleEndian>(bf.per_angle.len() as u32)?;
    for frame in &bf.per_angle {
        if frame.rows() != bf.d_interp || frame.cols() != bf.w_o {
            return Err(FormatError::Invalid("frame dimensions mismatch header".into()));
        }
        for &v in frame.data() {
            w.write_i32::<LittleEndian>(v)?;
        }
    }
    match &bf.compound {
        None => w.write_u8(0)?,
        Some(c) => {
            if c.rows() != bf.d_interp || c.cols() != bf.w_o {
                return Err(FormatError::Invalid(
                    "compound dimensions mismatch header".into(),
                ));
            }
            w.write_u8(1)?;
            for &v in c.data() {
                let narrow = i32::try_from(v).map_err(|_| {
                    FormatError::Invalid("compound value exceeds 32-bit storage".into())
                })?;
                w.write_i32::<LittleEndian>(narrow)?;
            }
        }
    }
    Ok(())
}

pub fn read_bf<R: Read>(r: &mut R) -> Result<BfData, FormatError> {
    expect_magic(r, BF_MAGIC)?;
    let d_interp = r.read_u32::<LittleEndian>()? as usize;
    let w_o = r.read_u32::<LittleEndian>()? as usize;
    let n_angles = r.read_u32::<LittleEndian>()? as usize;
    if d_interp == 0 || w_o == 0 {
        return Err(FormatError::Invalid("empty beamformed dimensions".into()));
    }
    let mut per_angle = Vec::with_capacity(n_angles);
    for _ in 0..n_angles {
        let mut values = vec![0i32; d_interp * w_o];
        r.read_i32_into::<LittleEndian>(&mut values)?;
        per_angle.push(Grid::from_vec(values, d_interp, w_o));
    }
    let marker = r.read_u8()?;
    let compound = match marker {
        0 => None,
        1 => {
            let mut values = vec![0i32; d_interp * w_o];
            r.read_i32_into::<LittleEndian>(&mut values)?;
            Some(Grid::from_vec(
                values.into_iter().map(|v| v as i64).collect(),
                d_interp,
                w_o,
            ))
        }
        other => {
            return Err(FormatError::Invalid(format!(
                "unknown compound marker {other}"
            )))
        }
    };
    Ok(BfData {
        d_interp,
        w_o,
        per_angle,
        compound,
    })
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(), FormatError> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(FormatError::BadMagic {
            expected: *magic,
            got,
        });
    }
    Ok(())
}

#[derive(Debug)]
pub enum FormatError {
    /// Underlying read/write failure, including truncation.
    Io(std::io::Error),
    /// Wrong container type.
    BadMagic { expected: [u8; 4], got: [u8; 4] },
    /// Structurally broken or self-inconsistent content.
    Invalid(String),
}

impl From<std::io::Error> for FormatError {
    fn from(e: std::io::Error) -> Self {
        FormatError::Io(e)
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "i/o error: {e}"),
            FormatError::BadMagic { expected, got } => write!(
                f,
                "bad magic: expected {:?}, got {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(got)
            ),
            FormatError::Invalid(msg) => write!(f, "invalid file: {msg}"),
        }
    }
}

impl std::error::Error for FormatError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            FormatError::Io(e) => Some(e),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AcqConfig, EngineParams};
    use crate::delay::build_profile_set;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn probe() -> ProbeConfig {
        // f32-exact values so the header round-trips bit-perfectly.
        ProbeConfig::new(8, 0.000244140625, 25e6, 1536.0, 5e6).unwrap()
    }

    #[test]
    fn rf_round_trip() {
        let cfg = probe();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let angles = vec![0.0f64, 0.0625];
        let frames: Vec<ChannelFrame> = angles
            .iter()
            .map(|&theta| ChannelFrame {
                samples: (0..32 * 8).map(|_| rng.random()).collect(),
                depth: 32,
                width: 8,
                theta,
            })
            .collect();
        let rf = RfData {
            probe: cfg,
            depth: 32,
            angles,
            frames,
        };
        let mut buf = Vec::new();
        write_rf(&mut buf, &rf).unwrap();
        let back = read_rf(&mut buf.as_slice()).unwrap();
        assert_eq!(back, rf);
    }

    #[test]
    fn profile_round_trip() {
        let cfg = probe();
        let acq = AcqConfig::new(vec![0.0, 0.05, -0.05], 32, 0.0).unwrap();
        let params = EngineParams::new(8, 4, 2, 2, 1.0, 0, 1).unwrap();
        let set = build_profile_set(&cfg, &acq, &params).unwrap();
        let mut buf = Vec::new();
        write_profiles(&mut buf, &set).unwrap();
        let back = read_profiles(&mut buf.as_slice()).unwrap();
        assert_eq!(back.d_interp, set.d_interp);
        assert_eq!(back.mdr, set.mdr);
        assert_eq!(back.profiles.len(), set.profiles.len());
        for (a, b) in back.profiles.iter().zip(&set.profiles) {
            assert_eq!(a.indices(), b.indices());
            assert_eq!(a.per_row_dr(), b.per_row_dr());
        }
    }

    #[test]
    fn bf_round_trip_with_compound() {
        let mut g = Grid::zeroed(4, 6);
        g[(2, 3)] = -12345;
        let compound = Grid::from_vec(g.data().iter().map(|&v| v as i64 * 3).collect(), 4, 6);
        let bf = BfData {
            d_interp: 4,
            w_o: 6,
            per_angle: vec![g.clone(), g.clone(), g],
            compound: Some(compound),
        };
        let mut buf = Vec::new();
        write_bf(&mut buf, &bf).unwrap();
        let back = read_bf(&mut buf.as_slice()).unwrap();
        assert_eq!(back, bf);
    }

    #[test]
    fn truncated_files_surface_as_io_errors() {
        let mut g = Grid::zeroed(4, 6);
        g[(0, 0)] = 1;
        let bf = BfData {
            d_interp: 4,
            w_o: 6,
            per_angle: vec![g],
            compound: None,
        };
        let mut buf = Vec::new();
        write_bf(&mut buf, &bf).unwrap();
        buf.truncate(buf.len() - 3);
        match read_bf(&mut buf.as_slice()) {
            Err(FormatError::Io(e)) => {
                assert_eq!(e.kind(), std::io::ErrorKind::UnexpectedEof)
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let buf = b"NOPEate least twenty bytes of padding........".to_vec();
        match read_rf(&mut buf.as_slice()) {
            Err(FormatError::BadMagic { .. }) => {}
            other => panic!("expected magic error, got {other:?}"),
        }
    }
}
