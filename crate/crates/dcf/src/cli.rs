//! `deform-dcf track | eval | demo`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error
//! (missing sequence, malformed `--init`, unknown demo kind), 3 unreadable
//! frame, 4 result and ground-truth lengths differ.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use deform_dcf_core::eval::{overlap_precision, sequence_ious, success_curve, BoundingBox};
use deform_dcf_core::features::FeatureKind;
use deform_dcf_core::synthetic::{generate, SequenceKind};
use deform_dcf_core::tracker::{Frame, Tracker};

use crate::config::RunConfig;
use crate::error::Error;
use crate::results::{format_line, read_results};
use crate::sequence::{list_frames, read_frame, read_groundtruth, write_frame, write_groundtruth};
use crate::{dff, render};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FRAME: i32 = 3;
pub const EXIT_LENGTH: i32 = 4;

/// Ground-truth file name written by `demo`.
pub const GROUNDTRUTH_FILE: &str = "groundtruth.txt";

#[derive(Parser, Debug)]
#[command(name = "deform-dcf", version, about = "Deformable correlation filter tracker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track a target through a directory of frames.
    Track(TrackArgs),
    /// Score a result file against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic sequence with exact ground truth.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    /// Directory of frames, processed in lexicographic file-name order.
    #[arg(long)]
    pub sequence: PathBuf,
    /// Initial box as x,y,w,h.
    #[arg(long, value_parser = parse_box, conflicts_with = "groundtruth", required_unless_present = "groundtruth")]
    pub init: Option<BoundingBox>,
    /// Annotation file; its first box initializes the tracker.
    #[arg(long)]
    pub groundtruth: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Directory for frames with the box and sub-filter markers drawn in.
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub groundtruth: PathBuf,
    /// Writes `threshold,op` lines of the success curve.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// translate, rotate or articulate.
    #[arg(long, value_parser = parse_kind)]
    pub kind: SequenceKind,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: u32,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_box(s: &str) -> Result<BoundingBox, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|f| f.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| format!("{s:?} is not four comma-separated numbers"))?;
    match v[..] {
        [x, y, w, h] if w > 0.0 && h > 0.0 => Ok(BoundingBox::new(x, y, w, h)),
        [_, _, _, _] => Err("box width and height must be positive".into()),
        _ => Err(format!("expected x,y,w,h, got {} fields", v.len())),
    }
}

fn parse_kind(s: &str) -> Result<SequenceKind, String> {
    SequenceKind::parse(s).map_err(|e| e.to_string())
}

/// Command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Core(deform_dcf_core::Error::Config(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Track(a) => track(&a),
        Command::Eval(a) => eval(&a),
        Command::Demo(a) => demo(&a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_frame(path: &Path, index: usize, features: Option<&dff::FeatureFile>) -> Result<Frame, Failure> {
    let image = read_frame(path).map_err(|e| Failure::new(EXIT_FRAME, format!("frame {index}: {e}")))?;
    let mut frame = Frame::new(image);
    if let Some(f) = features {
        frame.features = Some(f.raster(index)?);
    }
    Ok(frame)
}

pub fn track(a: &TrackArgs) -> Result<(), Failure> {
    if !a.sequence.is_dir() {
        return Err(Failure::new(EXIT_USAGE, format!("sequence directory {} not found", a.sequence.display())));
    }
    let paths = list_frames(&a.sequence)?;
    if paths.is_empty() {
        return Err(Failure::new(EXIT_USAGE, format!("no frames in {}", a.sequence.display())));
    }
    let init = match (&a.init, &a.groundtruth) {
        (Some(b), _) => *b,
        (None, Some(gt)) => *read_groundtruth(gt)
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?
            .first()
            .ok_or_else(|| Failure::new(EXIT_USAGE, format!("{} holds no boxes", gt.display())))?,
        (None, None) => return Err(Failure::new(EXIT_USAGE, "either --init or --groundtruth is required")),
    };
    let run = RunConfig::layered(a.config.as_deref(), &a.overrides)?;
    let config = run.tracker_config()?;
    let features = match &run.features_path {
        Some(p) if config.features.kinds.contains(&FeatureKind::Precomputed) => {
            let f = dff::load(p)?;
            if f.frames() < paths.len() {
                return Err(Failure::new(EXIT_USAGE, format!("{} has {} feature frames for {} images", p.display(), f.frames(), paths.len())));
            }
            Some(f)
        }
        _ => None,
    };
    if let Some(dir) = &a.render {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let file = std::fs::File::create(&a.output).map_err(Error::io(&a.output))?;
    let mut out = std::io::BufWriter::new(file);

    let first = load_frame(&paths[0], 0, features.as_ref())?;
    let mut tracker = Tracker::init(&first, init, config).map_err(|e| Failure::from(Error::from(e.context("frame 0"))))?;
    let mut result = tracker.result(tracker.self_score(&first).map_err(Error::from)?);
    result.bbox = init;
    let mut emit = |frame: &Frame, result: &deform_dcf_core::tracker::FrameResult| -> Result<(), Failure> {
        writeln!(out, "{}", format_line(result)).map_err(Error::io(&a.output))?;
        if let Some(dir) = &a.render {
            write_frame(dir.join(format!("{:05}.png", result.frame_index)), &render::render(&frame.image, result))?;
        }
        Ok(())
    };
    emit(&first, &result)?;
    for (i, path) in paths.iter().enumerate().skip(1) {
        let frame = load_frame(path, i, features.as_ref())?;
        let r = tracker.step(&frame).map_err(|e| Failure::from(Error::from(e.context(&format!("frame {i}")))))?;
        emit(&frame, &r)?;
    }
    out.flush().map_err(Error::io(&a.output))?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let rows = read_results(&a.results)?;
    let truth = read_groundtruth(&a.groundtruth)?;
    let boxes: Vec<BoundingBox> = rows.iter().map(|r| r.bbox).collect();
    let ious = sequence_ious(&boxes, &truth).map_err(|e| Failure::new(EXIT_LENGTH, e.to_string()))?;
    let op = overlap_precision(&ious, 0.5).map_err(Error::from)?;
    let curve = success_curve(&ious).map_err(Error::from)?;
    println!("OP={op:.4} AUC={:.4}", curve.auc);
    if let Some(path) = &a.curve {
        let text: String = curve.thresholds.iter().zip(&curve.op_values).map(|(t, v)| format!("{t:.2},{v:.6}\n")).collect();
        std::fs::write(path, text).map_err(Error::io(path))?;
    }
    Ok(())
}

pub fn demo(a: &DemoArgs) -> Result<(), Failure> {
    let seq = generate(a.kind, a.frames as usize, a.seed).map_err(Error::from)?;
    std::fs::create_dir_all(&a.out).map_err(Error::io(&a.out))?;
    for (i, frame) in seq.frames.iter().enumerate() {
        write_frame(a.out.join(format!("{i:05}.png")), frame)?;
    }
    write_groundtruth(a.out.join(GROUNDTRUTH_FILE), &seq.groundtruth)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_argument() {
        assert_eq!(parse_box("5,5,10,10").unwrap(), BoundingBox::new(5.0, 5.0, 10.0, 10.0));
        assert_eq!(parse_box(" 1.5, 2 ,3,4").unwrap(), BoundingBox::new(1.5, 2.0, 3.0, 4.0));
        assert!(parse_box("5,5,10").is_err());
        assert!(parse_box("5,5,10,x").is_err());
        assert!(parse_box("5,5,0,10").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["deform-dcf", "track", "--sequence", ".", "--init", "5,5,10", "--output", "o.txt"]), EXIT_USAGE);
        assert_eq!(run(["deform-dcf", "demo", "--kind", "spin", "--frames", "2", "--out", "x"]), EXIT_USAGE);
        assert_eq!(run(["deform-dcf", "demo", "--kind", "rotate", "--frames", "0", "--out", "x"]), EXIT_USAGE);
        assert_eq!(run(["deform-dcf", "frobnicate"]), EXIT_USAGE);
    }
}
