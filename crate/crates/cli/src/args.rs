use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rescaled_core::model::FunctionKind;
use rescaled_core::solver::StepMode;

use crate::error::CliError;
use crate::run::{RunConfig, Source, Start, Weights};
use crate::synth::WeightPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Psd,
    Dominance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Sketched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Zero,
    Basin,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (n, d) = s.split_once(',').ok_or_else(|| format!("expected n,d but got {s:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad row count {n:?}"))?;
    let d = d.trim().parse().map_err(|_| format!("bad column count {d:?}"))?;
    Ok((n, d))
}

/// Solve `min ½‖f(Ax) − ⟨f(Ax),1⟩ b‖² + ½‖W A x‖²` with exact or sketched Newton.
#[derive(Debug, Parser)]
#[command(name = "rescaled", version)]
pub struct Args {
    /// Entrywise function f.
    #[arg(long, default_value = "exp")]
    pub function: FunctionKind,

    /// Design matrix A (dense CSV or Matrix Market coordinate).
    #[arg(long, requires = "target", conflicts_with_all = ["synthesize", "demo"])]
    pub matrix: Option<PathBuf>,

    /// Target vector b (CSV).
    #[arg(long, requires = "matrix")]
    pub target: Option<PathBuf>,

    /// Weight vector w (CSV).
    #[arg(long, conflicts_with = "weight_policy")]
    pub weights: Option<PathBuf>,

    /// Fit uniform weights to the positive-definite or dominance threshold.
    #[arg(long, value_enum)]
    pub weight_policy: Option<PolicyArg>,

    /// Synthesize a seeded n×d instance, given as `n,d`.
    #[arg(long, value_parser = parse_dims, conflicts_with = "demo")]
    pub synthesize: Option<(usize, usize)>,

    /// Built-in sinh example: A = I₂, b = 0, w = 1, start (0.1, −0.1).
    #[arg(long)]
    pub demo: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Spectral norm of the synthesized A.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,

    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,

    /// Stop when the Newton step norm is at most this.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,

    /// Total failure probability of the sketches.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,

    /// Spectral accuracy of each sketch.
    #[arg(long, default_value_t = 0.05)]
    pub eps1: f64,

    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,

    /// Run exactly this many steps, ignoring the stopping rule.
    #[arg(long)]
    pub fixed_iters: Option<usize>,

    /// Scale every step by this factor in (0, 1].
    #[arg(long)]
    pub damping: Option<f64>,

    /// Hessian floor l used by the weight policies and certificates.
    #[arg(long, default_value_t = 1.0)]
    pub hessian_floor: f64,

    /// Start point (CSV).
    #[arg(long)]
    pub x0: Option<PathBuf>,

    /// Start at zero or inside the basin of the reference optimum.
    #[arg(long, value_enum, default_value_t = StartArg::Zero, conflicts_with = "x0")]
    pub start: StartArg,

    /// Write the JSON trace (or certificate report) here.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Run the certificate suite instead of solving.
    #[arg(long)]
    pub certify: bool,

    /// Record wall time per iteration; traces are then not reproducible.
    #[arg(long)]
    pub timing: bool,
}

impl Args {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let source = match (self.matrix, self.target, self.synthesize, self.demo) {
            (Some(matrix), Some(target), None, false) => Source::Files { matrix, target },
            (None, None, Some((n, d)), false) => Source::Synthesize { n, d },
            (None, None, None, true) => Source::Demo,
            _ => return Err(CliError::Config("choose one of --matrix/--target, --synthesize or --demo".into())),
        };
        let weights = match (self.weights, self.weight_policy) {
            (Some(path), _) => Weights::File(path),
            (None, Some(PolicyArg::Psd)) => Weights::Policy(WeightPolicy::Psd),
            (None, _) => Weights::Policy(WeightPolicy::Dominance),
        };
        Ok(RunConfig {
            kind: self.function,
            source,
            weights,
            seed: self.seed,
            radius: self.radius,
            mode: match self.mode {
                ModeArg::Exact => StepMode::Exact,
                ModeArg::Sketched => StepMode::Sketched,
            },
            eps: self.eps,
            delta: self.delta,
            eps1: self.eps1,
            max_iters: self.max_iters,
            fixed_iters: self.fixed_iters,
            damping: self.damping,
            hessian_floor: self.hessian_floor,
            x0: self.x0,
            start: match self.start {
                StartArg::Zero => Start::Zero,
                StartArg::Basin => Start::Basin,
            },
            out: self.out,
            certify: self.certify,
            timing: self.timing,
        })
    }
}
