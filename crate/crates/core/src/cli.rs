//! `pacc` command-line verbs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cycle::DrivingCycle;
use crate::demo::{Demonstration, DemonstrationSet};
use crate::error::{PaccError, Result};
use crate::evaluation::write_trace;
use crate::irl::{learn, LearningConfig};
use crate::scenario::{compare, default_config_text, run, ScenarioConfig};
use crate::synthetic::{equilibrium_follower, generate_demonstration, leader_from_cycle, split_parts};
use crate::types::{DriverModel, Weights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_COLLISION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pacc", version, about = "Personalized adaptive cruise control toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn driver cost weights from demonstration CSVs.
    Learn(LearnArgs),
    /// Run one platoon scenario.
    Simulate(SimulateArgs),
    /// Run two scenarios and report percentage differences (A is the baseline).
    Compare(CompareArgs),
    /// Generate synthetic demonstrations from a known driver model.
    GenerateDemos(GenerateArgs),
    /// Write a scenario config with every default spelled out.
    InitConfig(InitConfigArgs),
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Demonstration CSV files, or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub demos: Vec<PathBuf>,
    /// Output driver model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Segment length (s).
    #[arg(long, default_value_t = DriverModel::DEFAULT_SEGMENT_LENGTH)]
    pub t_h: f64,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.2)]
    pub eta: f64,
    /// Maximum number of epochs (>= 1).
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_epochs: u32,
    /// Minimum safety clearance in the desired gap (m).
    #[arg(long, default_value_t = DriverModel::DEFAULT_D_S)]
    pub d_s: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Output trace CSV.
    #[arg(long)]
    pub trace: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario A (baseline).
    #[arg(long)]
    pub config_a: PathBuf,
    /// Scenario B.
    #[arg(long)]
    pub config_b: PathBuf,
    /// Output report JSON with `gap_pct`, `headway_pct`, `fuel_pct`.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Cost weights `a,ds,rs,rd`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub weights: Vec<f64>,
    /// Time headway of the desired gap (s).
    #[arg(long)]
    pub tau: f64,
    /// Leader speed cycle CSV (`time_s,speed_mps`).
    #[arg(long)]
    pub cycle: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Segment length (s).
    #[arg(long, default_value_t = DriverModel::DEFAULT_SEGMENT_LENGTH)]
    pub t_h: f64,
    /// Minimum safety clearance (m).
    #[arg(long, default_value_t = DriverModel::DEFAULT_D_S)]
    pub d_s: f64,
    /// Number of demonstration files the drive is cut into.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub parts: u32,
    /// Sample period of the written demonstrations (s).
    #[arg(long, default_value_t = 0.1)]
    pub period: f64,
}

#[derive(Debug, Args)]
pub struct InitConfigArgs {
    /// Output scenario TOML.
    #[arg(long)]
    pub out: PathBuf,
    /// Cycle path to reference, relative to the output file.
    #[arg(long, default_value = "cycle.csv")]
    pub cycle: String,
    /// Driver model path to reference, relative to the output file.
    #[arg(long, default_value = "model.json")]
    pub model: String,
}

/// Result of one verb.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub status: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn ok(summary: String, artifacts: Vec<PathBuf>) -> Self {
        Self {
            status: EXIT_OK,
            summary,
            artifacts,
        }
    }
}

pub fn exit_code(e: &PaccError) -> i32 {
    match e {
        PaccError::Degenerate(_) => EXIT_DEGENERATE,
        PaccError::Collision { .. } => EXIT_COLLISION,
        _ => EXIT_INPUT,
    }
}

/// Execute a parsed command; errors become a nonzero status.
pub fn execute(cli: Cli) -> CommandOutcome {
    let result = match cli.command {
        Command::Learn(a) => cmd_learn(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::GenerateDemos(a) => cmd_generate_demos(&a),
        Command::InitConfig(a) => cmd_init_config(&a),
    };
    result.unwrap_or_else(|e| CommandOutcome {
        status: exit_code(&e),
        summary: format!("error: {e}"),
        artifacts: Vec::new(),
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| PaccError::io(path, e))
}

fn demo_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| PaccError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(PaccError::invalid("no demonstration CSV files found"));
    }
    Ok(files)
}

pub fn cmd_learn(a: &LearnArgs) -> Result<CommandOutcome> {
    let files = demo_files(&a.demos)?;
    let demos = files
        .iter()
        .map(Demonstration::from_csv)
        .collect::<Result<Vec<_>>>()?;
    let set = DemonstrationSet::from_demonstrations(&demos, a.t_h, a.d_s)?;
    let cfg = LearningConfig {
        eta0: a.eta,
        max_epochs: a.max_epochs as usize,
        ..LearningConfig::default()
    };
    let res = learn(&set, &cfg)?;
    if res.degenerate {
        return Err(PaccError::Degenerate(
            "observed features are all zero, so no weight direction is identifiable".into(),
        ));
    }
    res.model.save(&a.out)?;
    let w = res.model.weights;
    Ok(CommandOutcome::ok(
        format!(
            "learned from {} segments in {} epochs; residual {:.4}{}\nweights a={:.6} ds={:.6} rs={:.6} rd={:.6} tau={:.4} s",
            set.segments.len(),
            res.epochs_run,
            res.final_residual(),
            if res.converged { "" } else { " (not converged)" },
            w.a,
            w.ds,
            w.rs,
            w.rd,
            res.model.tau
        ),
        vec![a.out.clone()],
    ))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<CommandOutcome> {
    let cfg = ScenarioConfig::load(&a.config)?;
    let out = run(&cfg)?;
    write_trace(&out.trace, &a.trace)?;
    write(&a.report, &out.report.to_json()?)?;
    let artifacts = vec![a.trace.clone(), a.report.clone()];
    let r = &out.report;
    if let Some(c) = r.collision {
        return Ok(CommandOutcome {
            status: EXIT_COLLISION,
            summary: format!(
                "collision in pair {} at t = {:.1} s; partial trace written to {}",
                c.pair,
                c.t,
                a.trace.display()
            ),
            artifacts,
        });
    }
    let fmt = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    Ok(CommandOutcome::ok(
        format!(
            "dx_M = {} m, T_M = {} s, F_C = {} L, safety fallbacks: {}",
            fmt(r.dx_m),
            fmt(r.t_m),
            fmt(r.f_c),
            r.safety_fallback_count
        ),
        artifacts,
    ))
}

pub fn cmd_compare(a: &CompareArgs) -> Result<CommandOutcome> {
    let ca = ScenarioConfig::load(&a.config_a)?;
    let cb = ScenarioConfig::load(&a.config_b)?;
    let cmp = compare(&ca, &cb)?;
    write(&a.report, &cmp.report.to_json()?)?;
    let r = &cmp.report;
    if !r.is_complete() {
        return Ok(CommandOutcome {
            status: if cmp.a.collided() || cmp.b.collided() {
                EXIT_COLLISION
            } else {
                EXIT_INPUT
            },
            summary: "comparison incomplete: a run did not finish or a metric is undefined".into(),
            artifacts: vec![a.report.clone()],
        });
    }
    let p = |x: Option<f64>| x.unwrap_or(f64::NAN);
    Ok(CommandOutcome::ok(
        format!(
            "gap {:.2} %, headway {:.2} %, fuel {:.2} % (A baseline; positive = B lower)",
            p(r.gap_pct),
            p(r.headway_pct),
            p(r.fuel_pct)
        ),
        vec![a.report.clone()],
    ))
}

pub fn cmd_generate_demos(a: &GenerateArgs) -> Result<CommandOutcome> {
    let weights: [f64; 4] = a
        .weights
        .as_slice()
        .try_into()
        .map_err(|_| PaccError::invalid("--weights needs exactly 4 values"))?;
    let model = DriverModel {
        d_s: a.d_s,
        segment_length: a.t_h,
        ..DriverModel::new(Weights::from_array(weights), a.tau)
    };
    model.validate()?;
    let cycle = DrivingCycle::from_csv(&a.cycle)?.resample(a.period)?;
    let leader = leader_from_cycle(&cycle, 0.0);
    let init = equilibrium_follower(&leader.states[0], &model);
    let demo = generate_demonstration(&leader, &model, &init)?;
    let parts = split_parts(&demo, a.t_h, a.parts as usize)?;
    std::fs::create_dir_all(&a.out).map_err(|e| PaccError::io(&a.out, e))?;
    let mut artifacts = Vec::new();
    for (k, d) in parts.iter().enumerate() {
        let path = a.out.join(format!("demo_{:02}.csv", k + 1));
        d.save(&path)?;
        artifacts.push(path);
    }
    Ok(CommandOutcome::ok(
        format!("wrote {} demonstrations to {}", artifacts.len(), a.out.display()),
        artifacts,
    ))
}

pub fn cmd_init_config(a: &InitConfigArgs) -> Result<CommandOutcome> {
    write(&a.out, &default_config_text(&a.cycle, &a.model)?)?;
    Ok(CommandOutcome::ok(
        format!("wrote {}", a.out.display()),
        vec![a.out.clone()],
    ))
}
