//! `pwdas` — batch front end for the plane-wave beamforming pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 comparison mismatch,
//! 4 I/O.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use pwdas_core::config::EngineParams;
use pwdas_core::delay::build_profile_set;
use pwdas_core::engine::{
    beamform_frame, beamform_streaming, compensate_tx_delay, compound, interpolate_2x,
    BeamformedFrame,
};
use pwdas_core::grid::Grid;
use pwdas_core::imaging::{cnr, envelope, envelope_log, lateral_fwhm, write_pgm, Roi};
use pwdas_core::io::{
    read_bf, read_profiles, read_rf, write_bf, write_profiles, write_rf, BfData, FormatError,
    RfData,
};
use pwdas_core::perf::{perf_report, scaling_preset};
use pwdas_core::reference::{das_reference_continuous, das_reference_quantized_interleaved};
use pwdas_core::synth::simulate_acquisition;

const PRESET_CONFIGS: [&str; 4] = [
    include_str!("../presets/preset1.toml"),
    include_str!("../presets/preset2.toml"),
    include_str!("../presets/preset3.toml"),
    include_str!("../presets/preset4.toml"),
];

#[derive(Parser)]
#[command(
    name = "pwdas",
    about = "Plane-wave ultrasound beamforming pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate raw RF channel data for the configured phantom.
    Simulate {
        config: PathBuf,
        /// Output RFV1 container.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the phantom seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build and serialize the compressed delay profiles.
    Delays {
        config: PathBuf,
        /// Output DPV1 container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Beamform an RF container against prebuilt delay profiles.
    Beamform {
        rf: PathBuf,
        profiles: PathBuf,
        /// Output BFV1 container.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineMode::Engine)]
        mode: EngineMode,
        /// RF buffer replica count F_sub (pass width). Defaults to F.
        #[arg(long)]
        rf_buffers: Option<usize>,
    },
    /// Beamform with the naive per-pixel reference instead of the engine.
    Reference {
        rf: PathBuf,
        config: PathBuf,
        /// Output BFV1 container.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ReferenceMode::Quantized)]
        mode: ReferenceMode,
    },
    /// Compare two beamformed containers value by value.
    Compare { a: PathBuf, b: PathBuf },
    /// Image metrics (CNR, lateral FWHM) and PGM export.
    Metrics {
        bf: PathBuf,
        config: PathBuf,
        /// Frame to measure: "compound" or a zero-based angle index.
        #[arg(long, default_value = "compound")]
        frame: String,
        #[arg(long, default_value_t = 60.0)]
        dynamic_range: f64,
        /// Two ROIs "r0:r1:c0:c1,r0:r1:c0:c1" (inside, outside).
        #[arg(long)]
        cnr: Option<String>,
        /// Rows (interpolated grid) to measure lateral FWHM on.
        #[arg(long)]
        fwhm: Vec<usize>,
        /// Write the log-compressed image as binary PGM.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Also write the key=value report to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latency / throughput / memory arithmetic for a configuration.
    Perf {
        config: Option<PathBuf>,
        /// Use a bundled scaling preset (1-4) instead of a config file.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        preset: Option<u8>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineMode {
    Engine,
    Streaming,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReferenceMode {
    Quantized,
    Continuous,
}

/// Error wrapper carrying the process exit code.
struct CliError {
    code: u8,
    err: anyhow::Error,
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

trait Exit<T> {
    fn or_exit(self, code: u8) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Exit<T> for std::result::Result<T, E> {
    fn or_exit(self, code: u8) -> CliResult<T> {
        self.map_err(|e| CliError {
            code,
            err: e.into(),
        })
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_IO: u8 = 4;

fn format_exit_code(err: &FormatError) -> u8 {
    match err {
        FormatError::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate { config, out, seed } => simulate_cmd(&config, &out, seed),
        Command::Delays { config, out } => delays_cmd(&config, &out),
        Command::Beamform {
            rf,
            profiles,
            out,
            mode,
            rf_buffers,
        } => beamform_cmd(&rf, &profiles, &out, mode, rf_buffers),
        Command::Reference {
            rf,
            config,
            out,
            mode,
        } => reference_cmd(&rf, &config, &out, mode),
        Command::Compare { a, b } => compare_cmd(&a, &b),
        Command::Metrics {
            bf,
            config,
            frame,
            dynamic_range,
            cnr,
            fwhm,
            image,
            out,
        } => metrics_cmd(&bf, &config, &frame, dynamic_range, cnr, &fwhm, image, out),
        Command::Perf { config, preset } => perf_cmd(config, preset),
    }
}

fn load_config(path: &Path) -> CliResult<config::Loaded> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(EXIT_IO)?;
    config::parse_config(&text).or_exit(EXIT_VALIDATION)
}

fn write_digested<F>(path: &Path, write: F) -> CliResult<String>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), FormatError>,
{
    let mut buf = Vec::new();
    match write(&mut buf) {
        Ok(()) => {}
        Err(e) => {
            let code = format_exit_code(&e);
            return Err(CliError {
                code,
                err: e.into(),
            });
        }
    }
    fs::write(path, &buf)
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(EXIT_IO)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

fn simulate_cmd(config: &Path, out: &Path, seed: Option<u64>) -> CliResult {
    let loaded = load_config(config)?;
    let section = loaded
        .phantom
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [phantom] section"))
        .or_exit(EXIT_VALIDATION)?;
    let (phantom, pulse) =
        config::build_phantom(section, &loaded.probe, &loaded.acq).or_exit(EXIT_VALIDATION)?;
    let seed = seed.unwrap_or(section.seed);
    let (frames, clipped) =
        simulate_acquisition(&phantom, &loaded.probe, &loaded.acq, &pulse, seed);
    let rf = RfData {
        probe: loaded.probe.clone(),
        depth: loaded.acq.depth_samples,
        angles: loaded.acq.angles.clone(),
        frames,
    };
    let digest = write_digested(out, |buf| write_rf(buf, &rf))?;
    println!("frames={}", rf.frames.len());
    println!("depth_samples={}", rf.depth);
    println!("seed={seed}");
    println!("clipped={clipped}");
    println!("sha256={digest}");
    Ok(())
}

fn delays_cmd(config: &Path, out: &Path) -> CliResult {
    let loaded = load_config(config)?;
    let set = build_profile_set(&loaded.probe, &loaded.acq, &loaded.engine)
        .or_exit(EXIT_VALIDATION)?;
    let mtd = pwdas_core::delay::max_transmit_delay(&loaded.probe, &loaded.acq.angles, 2);
    let digest = write_digested(out, |buf| write_profiles(buf, &set))?;
    println!("profiles={}", set.profiles.len());
    println!("mdr={}", set.mdr);
    println!("mtd={mtd}");
    println!("profile_bits={}", set.storage_bits());
    println!("sha256={digest}");
    Ok(())
}

fn read_rf_file(path: &Path) -> CliResult<RfData> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(EXIT_IO)?;
    read_rf(&mut bytes.as_slice()).map_err(|e| CliError {
        code: format_exit_code(&e),
        err: anyhow::Error::new(e).context(format!("parsing {}", path.display())),
    })
}

fn read_bf_file(path: &Path) -> CliResult<BfData> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(EXIT_IO)?;
    read_bf(&mut bytes.as_slice()).map_err(|e| CliError {
        code: format_exit_code(&e),
        err: anyhow::Error::new(e).context(format!("parsing {}", path.display())),
    })
}

fn beamform_cmd(
    rf_path: &Path,
    dp_path: &Path,
    out: &Path,
    mode: EngineMode,
    rf_buffers: Option<usize>,
) -> CliResult {
    let rf = read_rf_file(rf_path)?;
    let bytes = fs::read(dp_path)
        .with_context(|| format!("reading {}", dp_path.display()))
        .or_exit(EXIT_IO)?;
    let set = read_profiles(&mut bytes.as_slice()).map_err(|e| CliError {
        code: format_exit_code(&e),
        err: anyhow::Error::new(e).context(format!("parsing {}", dp_path.display())),
    })?;

    if set.d_interp != 2 * rf.depth {
        return Err(anyhow!(
            "profile depth {} does not match 2x RF depth {}",
            set.d_interp,
            2 * rf.depth
        ))
        .or_exit(EXIT_VALIDATION);
    }
    if set.angles != rf.angles {
        return Err(anyhow!("profile angles differ from RF angles")).or_exit(EXIT_VALIDATION);
    }
    let f = set.subaperture;
    let f_sub = rf_buffers.unwrap_or(f);
    let params = EngineParams::new(
        rf.probe.num_elements,
        f,
        f_sub,
        set.replicas,
        // Masking is baked into the profiles; the value here is unused.
        1.0,
        0,
        1,
    )
    .or_exit(EXIT_VALIDATION)?;

    let mut per_angle = Vec::with_capacity(rf.frames.len());
    for (i, frame) in rf.frames.iter().enumerate() {
        let interp = interpolate_2x(frame);
        let aligned = compensate_tx_delay(&interp, frame.theta, &rf.probe);
        let profiles = set.profiles_for_angle(i);
        let result = match mode {
            EngineMode::Engine => beamform_frame(&aligned, &profiles, &params),
            EngineMode::Streaming => beamform_streaming(aligned.rows_iter(), &profiles, &params),
        }
        .or_exit(EXIT_VALIDATION)?;
        per_angle.push(result);
    }
    let compounded = compound(&per_angle).or_exit(EXIT_VALIDATION)?;
    let bf = BfData {
        d_interp: set.d_interp,
        w_o: rf.probe.num_elements * set.replicas,
        per_angle: per_angle.into_iter().map(|b| b.values).collect(),
        compound: Some(compounded),
    };
    let digest = write_digested(out, |buf| write_bf(buf, &bf))?;
    println!("angles={}", bf.per_angle.len());
    println!("w_o={}", bf.w_o);
    println!("sha256={digest}");
    Ok(())
}

fn reference_cmd(rf_path: &Path, config: &Path, out: &Path, mode: ReferenceMode) -> CliResult {
    let rf = read_rf_file(rf_path)?;
    let loaded = load_config(config)?;
    if loaded.probe != rf.probe {
        return Err(anyhow!(
            "config probe does not match the RF header (geometry must be identical)"
        ))
        .or_exit(EXIT_VALIDATION);
    }
    if loaded.acq.angles != rf.angles || loaded.acq.depth_samples != rf.depth {
        return Err(anyhow!("config acquisition does not match the RF header"))
            .or_exit(EXIT_VALIDATION);
    }
    let params = &loaded.engine;
    let replicas = params.replicas;
    let offsets = pwdas_core::delay::replica_offsets(params, &loaded.probe);
    let d_interp = loaded.acq.depth_interp();
    let w_o = rf.probe.num_elements * replicas;

    let mut per_angle: Vec<Grid<i32>> = Vec::with_capacity(rf.frames.len());
    for frame in &rf.frames {
        let values = match mode {
            ReferenceMode::Quantized => {
                das_reference_quantized_interleaved(
                    frame,
                    frame.theta,
                    &rf.probe,
                    &loaded.acq,
                    params,
                )
                .or_exit(EXIT_VALIDATION)?
                .values
            }
            ReferenceMode::Continuous => {
                // Float output rounds half-even into the i32 container;
                // continuous mode is for image metrics, not bit-exactness.
                let mut grid = Grid::zeroed(d_interp, w_o);
                for (rho, &offset) in offsets.iter().enumerate() {
                    let group = das_reference_continuous(
                        frame,
                        frame.theta,
                        &rf.probe,
                        &loaded.acq,
                        params,
                        offset,
                    )
                    .or_exit(EXIT_VALIDATION)?;
                    for r in 0..d_interp {
                        for j in 0..rf.probe.num_elements {
                            grid[(r, j * replicas + rho)] =
                                group[(r, j)].round_ties_even() as i32;
                        }
                    }
                }
                grid
            }
        };
        per_angle.push(values);
    }
    let frames: Vec<BeamformedFrame> = per_angle
        .iter()
        .zip(&rf.angles)
        .map(|(values, &theta)| BeamformedFrame {
            values: values.clone(),
            theta,
        })
        .collect();
    let compounded = compound(&frames).or_exit(EXIT_VALIDATION)?;
    let bf = BfData {
        d_interp,
        w_o,
        per_angle,
        compound: Some(compounded),
    };
    let digest = write_digested(out, |buf| write_bf(buf, &bf))?;
    println!("angles={}", bf.per_angle.len());
    println!("w_o={}", bf.w_o);
    println!("sha256={digest}");
    Ok(())
}

fn compare_cmd(a_path: &Path, b_path: &Path) -> CliResult {
    let a = read_bf_file(a_path)?;
    let b = read_bf_file(b_path)?;
    let mismatch = |msg: String| -> CliResult {
        Err(CliError {
            code: EXIT_MISMATCH,
            err: anyhow!(msg),
        })
    };
    if a.d_interp != b.d_interp || a.w_o != b.w_o {
        return mismatch(format!(
            "dimensions differ: {}x{} vs {}x{}",
            a.d_interp, a.w_o, b.d_interp, b.w_o
        ));
    }
    if a.per_angle.len() != b.per_angle.len() {
        return mismatch(format!(
            "angle counts differ: {} vs {}",
            a.per_angle.len(),
            b.per_angle.len()
        ));
    }
    for (i, (fa, fb)) in a.per_angle.iter().zip(&b.per_angle).enumerate() {
        for r in 0..a.d_interp {
            let (ra, rb) = (fa.row(r), fb.row(r));
            if let Some(c) = (0..a.w_o).find(|&c| ra[c] != rb[c]) {
                return mismatch(format!(
                    "mismatch at angle {i} row {r} col {c}: {} != {}",
                    ra[c], rb[c]
                ));
            }
        }
    }
    match (&a.compound, &b.compound) {
        (None, None) => {}
        (Some(ca), Some(cb)) => {
            for r in 0..a.d_interp {
                let (ra, rb) = (ca.row(r), cb.row(r));
                if let Some(c) = (0..a.w_o).find(|&c| ra[c] != rb[c]) {
                    return mismatch(format!(
                        "mismatch at compound row {r} col {c}: {} != {}",
                        ra[c], rb[c]
                    ));
                }
            }
        }
        _ => return mismatch("compound frame present in only one file".into()),
    }
    println!("identical");
    Ok(())
}

fn parse_roi(spec: &str) -> Result<Roi> {
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.parse::<usize>().map_err(|e| anyhow!("bad ROI field {p:?}: {e}")))
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        bail!("ROI must be r0:r1:c0:c1, got {spec:?}");
    }
    Ok(Roi {
        row0: parts[0],
        row1: parts[1],
        col0: parts[2],
        col1: parts[3],
    })
}

#[allow(clippy::too_many_arguments)]
fn metrics_cmd(
    bf_path: &Path,
    config: &Path,
    frame: &str,
    dynamic_range: f64,
    cnr_spec: Option<String>,
    fwhm_rows: &[usize],
    image: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CliResult {
    let bf = read_bf_file(bf_path)?;
    let loaded = load_config(config)?;
    let replicas = loaded.engine.replicas;
    if bf.w_o != loaded.probe.num_elements * replicas {
        return Err(anyhow!(
            "output width {} does not match num_elements * replicas = {}",
            bf.w_o,
            loaded.probe.num_elements * replicas
        ))
        .or_exit(EXIT_VALIDATION);
    }
    let values: Grid<f64> = if frame == "compound" {
        bf.compound
            .as_ref()
            .ok_or_else(|| anyhow!("file has no compound frame"))
            .or_exit(EXIT_VALIDATION)?
            .to_f64()
    } else {
        let idx: usize = frame
            .parse()
            .map_err(|_| anyhow!("--frame must be \"compound\" or an angle index"))
            .or_exit(EXIT_USAGE)?;
        bf.per_angle
            .get(idx)
            .ok_or_else(|| anyhow!("angle index {idx} out of range"))
            .or_exit(EXIT_VALIDATION)?
            .to_f64()
    };

    let mut report = String::new();
    report.push_str(&format!("frame={frame}\n"));
    report.push_str(&format!("dynamic_range_db={dynamic_range}\n"));
    let env = envelope(&values);
    let img = envelope_log(&values, dynamic_range).or_exit(EXIT_VALIDATION)?;
    if let Some(spec) = cnr_spec {
        let (inside_spec, outside_spec) = spec
            .split_once(',')
            .ok_or_else(|| anyhow!("--cnr must be two ROIs separated by a comma"))
            .or_exit(EXIT_USAGE)?;
        let inside = parse_roi(inside_spec).or_exit(EXIT_USAGE)?;
        let outside = parse_roi(outside_spec).or_exit(EXIT_USAGE)?;
        let value = cnr(&img, &inside, &outside).or_exit(EXIT_VALIDATION)?;
        report.push_str(&format!("cnr={value:.6}\n"));
    }
    let pitch = loaded.probe.pitch / replicas as f64;
    for &row in fwhm_rows {
        let value = lateral_fwhm(&env, row, pitch).or_exit(EXIT_VALIDATION)?;
        report.push_str(&format!("fwhm_row{row}_m={value:.6e}\n"));
    }
    print!("{report}");
    if let Some(path) = out {
        fs::write(&path, &report)
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(EXIT_IO)?;
    }
    if let Some(path) = image {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img)
            .context("encoding PGM")
            .or_exit(EXIT_IO)?;
        fs::write(&path, &buf)
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(EXIT_IO)?;
        println!("image={}", path.display());
    }
    Ok(())
}

fn perf_cmd(config_path: Option<PathBuf>, preset: Option<u8>) -> CliResult {
    let (loaded, preset_info) = match (config_path, preset) {
        (Some(path), None) => (load_config(&path)?, None),
        (None, Some(n)) => {
            let loaded =
                config::parse_config(PRESET_CONFIGS[n as usize - 1]).or_exit(EXIT_VALIDATION)?;
            (loaded, scaling_preset(n as usize))
        }
        _ => {
            return Err(anyhow!("pass either a config file or --preset N"))
                .or_exit(EXIT_USAGE)
        }
    };
    // MDR and MTD are computed honestly from the configured geometry, never
    // hard-coded.
    let set = build_profile_set(&loaded.probe, &loaded.acq, &loaded.engine)
        .or_exit(EXIT_VALIDATION)?;
    let mtd = pwdas_core::delay::max_transmit_delay(&loaded.probe, &loaded.acq.angles, 2);
    let report = perf_report(
        &loaded.engine,
        loaded.acq.depth_samples,
        loaded.acq.angles.len(),
        set.mdr,
        mtd,
    );
    if let Some(p) = preset_info {
        println!("preset={}", p.index);
        println!("device={}", p.device);
    } else if let Some(device) = &loaded.device {
        println!("device={device}");
    }
    println!("w_i={}", loaded.engine.num_elements);
    println!("f={}", loaded.engine.subaperture);
    println!("f_sub={}", loaded.engine.rf_buffers);
    println!("r={}", loaded.engine.replicas);
    println!("depth_samples={}", loaded.acq.depth_samples);
    println!("n_angles={}", loaded.acq.angles.len());
    println!("clock_hz={}", loaded.engine.clock_hz);
    println!("pipeline_delay={}", loaded.engine.pipeline_delay);
    print!("{}", report.to_key_values());
    if let Some(p) = preset_info {
        // Static post-implementation reference numbers, reported as-is.
        println!("reference_lut={}", p.reference_lut);
        println!("reference_bram_blocks={}", p.reference_bram_blocks);
        println!("reference_power_watts={}", p.reference_power_watts);
    }
    std::io::stdout().flush().ok();
    Ok(())
}
