//! One invocation: build the instance, then either solve it and write a
//! trace, or run the certificate suite.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rescaled_core::model::{check_norm_bounds, evaluate, FunctionKind};
use rescaled_core::solver::{certify_goodness, solve, SolveOptions, StepMode, TerminalStatus};
use rescaled_core::spectral::certify;
use rescaled_core::{linalg, Error, ProblemInstance};

use crate::error::{CliError, InModule};
use crate::io;
use crate::synth::{basin_start, fit_weights, max_radius, synthesize, SynthSpec, WeightPolicy};
use crate::trace::{ConfigEcho, TraceDocument};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Files {
        matrix: PathBuf,
        target: PathBuf,
    },
    Synthesize {
        n: usize,
        d: usize,
    },
    /// `sinh`, `A = I₂`, `b = 0`, `w = 1`, started at `(0.1, −0.1)`.
    Demo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    File(PathBuf),
    Policy(WeightPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Zero,
    /// Inside the contraction basin of the reference optimum.
    Basin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: FunctionKind,
    pub source: Source,
    pub weights: Weights,
    pub seed: u64,
    pub radius: f64,
    pub mode: StepMode,
    pub eps: f64,
    pub delta: f64,
    pub eps1: f64,
    pub max_iters: usize,
    pub fixed_iters: Option<usize>,
    pub damping: Option<f64>,
    /// Hessian floor `l` used by the weight policies and certificates.
    pub hessian_floor: f64,
    pub x0: Option<PathBuf>,
    pub start: Start,
    pub out: Option<PathBuf>,
    pub certify: bool,
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: FunctionKind::Exp,
            source: Source::Demo,
            weights: Weights::Policy(WeightPolicy::Dominance),
            seed: 0,
            radius: 1.0,
            mode: StepMode::Exact,
            eps: 1e-8,
            delta: 0.01,
            eps1: 0.05,
            max_iters: 100,
            fixed_iters: None,
            damping: None,
            hessian_floor: 1.0,
            x0: None,
            start: Start::Zero,
            out: None,
            certify: false,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eps > 0.0 && self.eps < 0.1) {
            return Err(CliError::Config(format!("eps {} outside (0, 0.1)", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(CliError::Config(format!("delta {} outside (0, 0.1)", self.delta)));
        }
        if !(self.eps1 > 0.0 && self.eps1 <= 0.1) {
            return Err(CliError::Config(format!("eps1 {} outside (0, 0.1]", self.eps1)));
        }
        if self.max_iters == 0 {
            return Err(CliError::Config("max-iters must be at least 1".into()));
        }
        if !(self.hessian_floor > 0.0) {
            return Err(CliError::Config(format!("hessian floor {} must be positive", self.hessian_floor)));
        }
        if let Source::Synthesize { .. } = self.source {
            if !(self.radius > 0.0 && self.radius <= max_radius()) {
                return Err(CliError::Config(format!("radius {} outside (0, {:.4}]", self.radius, max_radius())));
            }
            if let Weights::File(_) = self.weights {
                return Err(CliError::Config(
                    "synthesized instances take a weight policy, not a weight file".into(),
                ));
            }
        }
        Ok(())
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            eps: self.eps,
            delta: self.delta,
            eps1: self.eps1,
            max_iters: self.max_iters,
            mode: self.mode,
            seed: self.seed,
            damping: self.damping,
            fixed_iters: self.fixed_iters,
            record_time: self.timing,
        }
    }
}

/// Instance, start point and (when one is known) the reference optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub instance: ProblemInstance,
    pub x0: DVector<f64>,
    pub x_ref: Option<DVector<f64>>,
    pub source_label: String,
    pub weights_label: String,
    pub start_label: String,
}

fn length_check(context: &'static str, expected: usize, actual: usize) -> Result<(), CliError> {
    if expected != actual {
        return Err(CliError::Core {
            module: "ingest",
            source: Error::DimensionMismatch { context, expected, actual },
        });
    }
    Ok(())
}

fn demo() -> Result<Prepared, CliError> {
    let instance = ProblemInstance::new(
        DMatrix::identity(2, 2),
        DVector::zeros(2),
        DVector::from_element(2, 1.0),
        FunctionKind::Sinh,
    )
    .in_module("model")?;
    Ok(Prepared {
        instance,
        x0: DVector::from_vec(vec![0.1, -0.1]),
        x_ref: Some(DVector::zeros(2)),
        source_label: "demo".into(),
        weights_label: "unit".into(),
        start_label: "demo".into(),
    })
}

fn explicit_start(config: &RunConfig, d: usize) -> Result<Option<DVector<f64>>, CliError> {
    match &config.x0 {
        Some(path) => {
            let x0 = io::read_vector(path)?;
            length_check("start point", d, x0.len())?;
            Ok(Some(x0))
        }
        None => Ok(None),
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    config.validate()?;
    let (instance, x_init, x_ref, source_label, weights_label) = match &config.source {
        Source::Demo => return demo(),
        Source::Synthesize { n, d } => {
            let Weights::Policy(policy) = config.weights else {
                unreachable!("rejected by validate")
            };
            let spec = SynthSpec {
                n: *n,
                d: *d,
                seed: config.seed,
                radius: config.radius,
                kind: config.kind,
                policy,
                l: config.hessian_floor,
            };
            let s = synthesize(&spec)?;
            let x_init = explicit_start(config, *d)?;
            (
                s.instance,
                x_init,
                Some(s.x_star),
                format!("synthesize {n}x{d}"),
                policy.name().to_string(),
            )
        }
        Source::Files { matrix, target } => {
            let a = io::read_matrix(matrix)?;
            let b = io::read_vector(target)?;
            length_check("target length", a.nrows(), b.len())?;
            let x_init = explicit_start(config, a.ncols())?;
            let n = a.nrows();
            match &config.weights {
                Weights::File(path) => {
                    let w = io::read_vector(path)?;
                    length_check("weight length", n, w.len())?;
                    let instance = ProblemInstance::new(a, b, w, config.kind).in_module("model")?;
                    (instance, x_init, None, "files".into(), "file".into())
                }
                Weights::Policy(policy) => {
                    let unit = ProblemInstance::new(a, b, DVector::from_element(n, 1.0), config.kind).in_module("model")?;
                    let from = x_init.clone().unwrap_or_else(|| DVector::zeros(unit.d()));
                    let (instance, x_star) = fit_weights(unit, &from, *policy, config.hessian_floor)?;
                    (instance, x_init, Some(x_star), "files".into(), policy.name().to_string())
                }
            }
        }
    };
    let (x0, start_label) = match (x_init, config.start) {
        (Some(x0), _) => (x0, "file".to_string()),
        (None, Start::Zero) => (DVector::zeros(instance.d()), "zero".to_string()),
        (None, Start::Basin) => {
            let Some(x_star) = &x_ref else {
                return Err(CliError::Config(
                    "a basin start needs a reference optimum (use a weight policy)".into(),
                ));
            };
            (basin_start(&instance, x_star, config.seed)?.x0, "basin".to_string())
        }
    };
    Ok(Prepared {
        instance,
        x0,
        x_ref,
        source_label,
        weights_label,
        start_label,
    })
}

fn echo(config: &RunConfig, prepared: &Prepared) -> ConfigEcho {
    ConfigEcho {
        function: prepared.instance.kind.name().to_string(),
        source: prepared.source_label.clone(),
        n: prepared.instance.n(),
        d: prepared.instance.d(),
        seed: config.seed,
        radius: matches!(config.source, Source::Synthesize { .. }).then_some(config.radius),
        mode: match config.mode {
            StepMode::Exact => "exact".into(),
            StepMode::Sketched => "sketched".into(),
        },
        eps: config.eps,
        delta: config.delta,
        eps1: config.eps1,
        max_iters: config.max_iters,
        fixed_iters: config.fixed_iters,
        damping: config.damping,
        weights: prepared.weights_label.clone(),
        start: prepared.start_label.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    /// Hypotheses are reported but do not decide the exit code.
    pub hypothesis: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub checks: Vec<CheckLine>,
}

impl CertifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.hypothesis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub trace: Option<TraceDocument>,
    pub report: Option<CertifyReport>,
}

impl RunOutcome {
    fn failed(err: CliError) -> Self {
        Self {
            exit_code: EXIT_ERROR,
            summary: format!("error: {err}\n"),
            trace: None,
            report: None,
        }
    }
}

/// A point with `‖A(y − x)‖∞ = 1e−3` in a seeded direction.
fn probe_point(instance: &ProblemInstance, x: &DVector<f64>, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = DVector::from_fn(instance.d(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let reach = (&instance.a * &h).amax();
    if reach > 0.0 {
        x + h * (1e-3 / reach)
    } else {
        x.clone()
    }
}

pub fn certify_report(config: &RunConfig, prepared: &Prepared) -> Result<CertifyReport, CliError> {
    let inst = &prepared.instance;
    let x = &prepared.x0;
    let y = probe_point(inst, x, config.seed);
    let mut checks = Vec::new();
    let cert = certify(inst, x, &y, config.hessian_floor).in_module("spectral")?;
    for (name, passed) in cert.passed {
        let hypothesis = name.ends_with("weights admissible");
        checks.push(CheckLine { name, passed, hypothesis });
    }
    let e = evaluate(inst, x).in_module("model")?;
    let radius = [linalg::spectral_norm(&inst.a), x.norm(), inst.b.norm(), 2.0]
        .into_iter()
        .fold(0.0, f64::max);
    let bounds = check_norm_bounds(inst, &e, radius).in_module("model")?;
    for (name, passed) in [
        ("‖u‖ ≤ √n e^{R²}", bounds.holds_u),
        ("|α| ≤ n e^{R²}", bounds.holds_alpha),
        ("‖c‖ ≤ 2nR e^{R²}", bounds.holds_c),
    ] {
        checks.push(CheckLine {
            name: name.into(),
            passed,
            hypothesis: false,
        });
    }
    if let Some(x_star) = &prepared.x_ref {
        let basin = basin_start(inst, x_star, config.seed)?;
        let good = certify_goodness(inst, x_star, x, basin.l, basin.m).in_module("solver")?;
        checks.push(CheckLine {
            name: "goodness: local minimum with floor l".into(),
            passed: good.ok_local_min,
            hypothesis: false,
        });
        checks.push(CheckLine {
            name: "goodness: Hessian Lipschitz within M".into(),
            passed: good.ok_lipschitz,
            hypothesis: false,
        });
        checks.push(CheckLine {
            name: "goodness: start within 0.1 l / M".into(),
            passed: good.ok_init,
            hypothesis: false,
        });
    }
    Ok(CertifyReport { checks })
}

fn run_certify(config: &RunConfig, prepared: &Prepared) -> Result<RunOutcome, CliError> {
    let report = certify_report(config, prepared)?;
    let mut summary = String::new();
    for c in &report.checks {
        let tag = match (c.passed, c.hypothesis) {
            (true, _) => "PASS",
            (false, true) => "NOT MET",
            (false, false) => "FAIL",
        };
        let _ = writeln!(summary, "[{tag}] {}", c.name);
    }
    if let Some(out) = &config.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        io::write_text(out, &text)?;
    }
    let exit_code = if report.all_passed() { EXIT_CONVERGED } else { EXIT_CHECK_FAILED };
    Ok(RunOutcome {
        exit_code,
        summary,
        trace: None,
        report: Some(report),
    })
}

fn run_solve(config: &RunConfig, prepared: &Prepared) -> Result<RunOutcome, CliError> {
    let trace = solve(&prepared.instance, &prepared.x0, &config.solve_options(), prepared.x_ref.as_ref()).in_module("solver")?;
    let doc = TraceDocument::new(echo(config, prepared), &trace, prepared.x_ref.as_ref());
    if let Some(out) = &config.out {
        io::write_text(out, &doc.to_json()?)?;
    }
    let exit_code = match trace.status {
        TerminalStatus::Converged => EXIT_CONVERGED,
        TerminalStatus::MaxIters => EXIT_MAX_ITERS,
        TerminalStatus::Diverged | TerminalStatus::Error(_) => EXIT_ERROR,
    };
    let mut summary = format!("status: {} after {} iterations\n", doc.status, doc.iterations.len());
    if let Some(msg) = &doc.message {
        let _ = writeln!(summary, "error: solver: {msg}");
    }
    if let Some(last) = doc.iterations.last() {
        let _ = writeln!(summary, "loss: {:e}, last step norm: {:e}", last.loss, last.step_norm);
    }
    if let Some(dist) = doc.final_dist_to_ref {
        let _ = writeln!(summary, "distance to reference optimum: {dist:e}");
    }
    Ok(RunOutcome {
        exit_code,
        summary,
        trace: Some(doc),
        report: None,
    })
}

/// Run one configuration. Every failure is folded into the outcome with
/// exit code 3.
pub fn run(config: &RunConfig) -> RunOutcome {
    let prepared = match prepare(config) {
        Ok(p) => p,
        Err(e) => return RunOutcome::failed(e),
    };
    let result = if config.certify {
        run_certify(config, &prepared)
    } else {
        run_solve(config, &prepared)
    };
    result.unwrap_or_else(RunOutcome::failed)
}
