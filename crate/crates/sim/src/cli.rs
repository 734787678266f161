use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use setslam_core::conformal::{calibrate_records, parse_records, GeneratorConfig, StereoRig};
use setslam_core::polytope::{template_normals, Enclosure, HPolytope, TemplateKind};
use setslam_core::slam::{CompoundMode, Framework};
use setslam_core::uq::{
    backward_uq_multi, compound_direct, compound_indirect, decompose_pose_set, forward_uq, BackwardMode, PosePolytope,
};

use crate::report::{emit_report, emit_slam, loop_csv, projected_loop, to_json};
use crate::slamsim::{run_slam_sim, SlamSimConfig};
use crate::trials::{conservatism_test, TrialConfig};
use crate::SimError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "setslam", version, about = "Guaranteed set-membership uncertainty for landmark SLAM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Write projected set vertices as CSV.
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Point set under a pose set.
    Forward {
        #[command(flatten)]
        common: Common,
    },
    /// Pose set from correspondences.
    Backward {
        #[command(flatten)]
        common: Common,
        /// chebyshev or diameter.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Product of two pose sets.
    Compound {
        #[command(flatten)]
        common: Common,
        /// direct or indirect.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Conformal quantile of stereo triangulation scores.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Sampling check of a primitive over seeded trials.
    Conservatism {
        #[command(flatten)]
        common: Common,
    },
    /// Synthetic SLAM run with ground-truth bookkeeping.
    SlamSim {
        #[command(flatten)]
        common: Common,
        /// relative or global.
        #[arg(long)]
        mode: Option<String>,
        /// direct or indirect.
        #[arg(long)]
        compound: Option<String>,
    },
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, SimError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

fn require<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, SimError> {
    let path = path.ok_or_else(|| SimError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

fn parse_mode<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T, SimError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| SimError::Config(format!("unknown {flag} value: {value}")))
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
}

fn box_diag45() -> TemplateKind {
    TemplateKind::BoxDiag45
}

fn box_kind() -> TemplateKind {
    TemplateKind::Box
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardInput {
    point_set: HPolytope,
    pose_set: PosePolytope,
    #[serde(default = "box_diag45")]
    template: TemplateKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Pair {
    local: HPolytope,
    global: HPolytope,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BackwardInput {
    pairs: Vec<Pair>,
    #[serde(default)]
    mode: Option<BackwardMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompoundInput {
    p1: PosePolytope,
    p2: PosePolytope,
    #[serde(default)]
    mode: Option<CompoundMode>,
    #[serde(default = "box_kind")]
    pose_template: TemplateKind,
    #[serde(default = "box_diag45")]
    translation_template: TemplateKind,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct CalibrateInput {
    /// JSONL file, relative to the configuration file.
    records: Option<PathBuf>,
    generator: GeneratorConfig,
    n: Option<usize>,
    delta: Option<f64>,
    rig: Option<StereoRig>,
    seed: u64,
}

#[derive(Serialize)]
struct EmptyMarker {
    empty: bool,
}

fn enclosure_json<T: Serialize>(e: &Enclosure<T>) -> String {
    match e {
        Enclosure::Set(s) => to_json(s),
        Enclosure::Empty => to_json(&EmptyMarker { empty: true }),
    }
}

fn forward(c: &Common) -> Result<i32, SimError> {
    let input: ForwardInput = require(c.config.as_deref())?;
    let t = template_normals(&input.template, 3)?;
    let out = forward_uq(&input.point_set, &input.pose_set, &t)?;
    write_out(&c.out, "forward.json", &enclosure_json(&out))?;
    if let (true, Enclosure::Set(s)) = (c.emit_plots, &out) {
        write_out(&c.out.join("plots"), "forward.csv", &loop_csv(&projected_loop(s, 0, 1)?))?;
    }
    Ok(EXIT_OK)
}

fn backward(c: &Common, mode: Option<&str>) -> Result<i32, SimError> {
    let input: BackwardInput = require(c.config.as_deref())?;
    let mode = match mode {
        Some(m) => parse_mode("--mode", m)?,
        None => input.mode.unwrap_or(BackwardMode::Chebyshev),
    };
    let pairs: Vec<(HPolytope, HPolytope)> = input.pairs.into_iter().map(|p| (p.local, p.global)).collect();
    let out = backward_uq_multi(&pairs, mode)?;
    write_out(&c.out, "backward.json", &enclosure_json(&out))?;
    if let (true, Enclosure::Set(s)) = (c.emit_plots, &out) {
        write_out(&c.out.join("plots"), "backward.csv", &loop_csv(&projected_loop(s.polytope(), 9, 10)?))?;
    }
    Ok(EXIT_OK)
}

fn compound(c: &Common, mode: Option<&str>) -> Result<i32, SimError> {
    let input: CompoundInput = require(c.config.as_deref())?;
    let mode = match mode {
        Some(m) => parse_mode("--mode", m)?,
        None => input.mode.unwrap_or(CompoundMode::Direct),
    };
    match mode {
        CompoundMode::Direct => {
            let t = template_normals(&input.pose_template, 12)?;
            let out = compound_direct(&input.p1, &input.p2, &t)?;
            write_out(&c.out, "compound.json", &enclosure_json(&out))?;
            if let (true, Enclosure::Set(s)) = (c.emit_plots, &out) {
                write_out(&c.out.join("plots"), "compound.csv", &loop_csv(&projected_loop(s.polytope(), 9, 10)?))?;
            }
        }
        CompoundMode::Indirect => {
            let t = template_normals(&input.translation_template, 3)?;
            let (Enclosure::Set(d1), Enclosure::Set(d2)) = (decompose_pose_set(&input.p1)?, decompose_pose_set(&input.p2)?)
            else {
                write_out(&c.out, "compound.json", &to_json(&EmptyMarker { empty: true }))?;
                return Ok(EXIT_OK);
            };
            let out = compound_indirect(&d1, &d2, &t)?;
            write_out(&c.out, "compound.json", &to_json(&out))?;
            if c.emit_plots {
                write_out(&c.out.join("plots"), "compound.csv", &loop_csv(&projected_loop(&out.translation, 0, 1)?))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn calibrate(c: &Common) -> Result<i32, SimError> {
    let input: CalibrateInput = load(c.config.as_deref())?;
    let seed = c.seed.unwrap_or(input.seed);
    let delta = input.delta.unwrap_or(0.1);
    let rig = input.rig.clone().unwrap_or_else(|| input.generator.rig());
    let records = match &input.records {
        Some(rel) => {
            let base = c.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
            let path = base.join(rel);
            let text = fs::read_to_string(&path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
            parse_records(&text)?
        }
        None => input.generator.generate(input.n.unwrap_or(200), seed),
    };
    let result = calibrate_records(&records, &rig, delta)?;
    write_out(&c.out, "calibration.json", &to_json(&result))?;
    Ok(EXIT_OK)
}

fn conservatism(c: &Common) -> Result<i32, SimError> {
    let mut cfg: TrialConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let report = conservatism_test(&cfg)?;
    emit_report(&report, &c.out, c.emit_plots)?;
    Ok(if report.all_contained() { EXIT_OK } else { EXIT_VIOLATION })
}

fn slam_sim(c: &Common, mode: Option<&str>, compound: Option<&str>) -> Result<i32, SimError> {
    let mut cfg: SlamSimConfig = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.world.seed = s;
    }
    if let Some(m) = mode {
        cfg.slam.framework = parse_mode::<Framework>("--mode", m)?;
    }
    if let Some(m) = compound {
        cfg.slam.compound = parse_mode::<CompoundMode>("--compound", m)?;
    }
    let sim = run_slam_sim(&cfg)?;
    emit_slam(&sim.output, &sim.summary, &c.out, c.emit_plots)?;
    for w in &sim.world.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if sim.summary.all_contained() { EXIT_OK } else { EXIT_VIOLATION })
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Forward { common } => forward(common),
        Command::Backward { common, mode } => backward(common, mode.as_deref()),
        Command::Compound { common, mode } => compound(common, mode.as_deref()),
        Command::Calibrate { common } => calibrate(common),
        Command::Conservatism { common } => conservatism(common),
        Command::SlamSim { common, mode, compound } => slam_sim(common, mode.as_deref(), compound.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() { EXIT_INVALID } else { EXIT_FAILURE }
        }
    }
}
