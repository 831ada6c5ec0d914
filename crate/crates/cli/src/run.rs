//! Executes a [`RunConfig`]: trajectories, comparisons, α-sweeps and
//! convergence studies, with the invariant checks behind the exit status.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use dimerbath::dynamics::{
    electronic_trajectory, PreparedState, ReducedTrajectory, SpectralPropagator, TimeGrid,
    DEFAULT_DIMENSION_CAP,
};
use dimerbath::equivalence::{
    coherence_vs_alpha, compare_reduced, factorization_check, reduced_distances, spectrum_equivalence,
    trace_distance, ComparisonReport, FactorizationReport,
};
use dimerbath::models::{effective_coupling, ModeSpec, ModelKind, TotalModel};
use dimerbath::spaces::{
    annihilation_matrix, commutator, DensityMatrix, SpaceLayout, HERMITIAN_TOL, POSITIVITY_FLOOR,
    TRACE_TOL,
};
use dimerbath::thermal::{gibbs_state, initial_state, ThermalSpec};
use dimerbath::Error;

use crate::config::{electronic_state, KindName, RunConfig, Task};

pub const UNITARITY_TOL: f64 = 1e-10;
pub const ENERGY_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-9;
pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const ROW_TOL: f64 = 1e-9;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
    ConfigError,
    ResourceCap,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 1,
            Status::ConfigError => 2,
            Status::ResourceCap => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::VerificationFailed => "verification-failed",
            Status::ConfigError => "config-error",
            Status::ResourceCap => "resource-cap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        })
    }
}

/// One asserted invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// Dotted name, prefixed with the model it ran on.
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Check {
    fn at_most(name: String, value: f64, tolerance: f64) -> Self {
        let verdict = if value <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self {
            name,
            value,
            tolerance,
            verdict,
        }
    }

    fn at_least(name: String, value: f64, floor: f64) -> Self {
        let verdict = if value >= floor { Verdict::Pass } else { Verdict::Fail };
        Self {
            name,
            value,
            tolerance: floor,
            verdict,
        }
    }

    fn skipped(name: String) -> Self {
        Self {
            name,
            value: f64::NAN,
            tolerance: f64::NAN,
            verdict: Verdict::Skipped,
        }
    }
}

/// Distances at one truncation of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n_max: usize,
    pub max_distance: f64,
    pub spectrum_discrepancy: Option<f64>,
}

/// One α of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub effective_coupling: Vec<f64>,
    pub comparison: ComparisonReport,
}

/// Everything a run produced.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub checks: Vec<Check>,
    /// `key = value` pairs, in file order.
    pub report: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
    pub comparison: Option<ComparisonReport>,
    pub factorization: Option<FactorizationReport>,
    pub sweep: Vec<SweepRow>,
    pub coupling_strictly_decreasing: Option<bool>,
    pub convergence: Vec<ConvergenceRow>,
    /// Reasons for a nonzero verification status.
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn status(&self) -> Status {
        if self.failures.is_empty() {
            Status::Ok
        } else {
            Status::VerificationFailed
        }
    }

    /// One line, `<label>: <detail>`.
    pub fn reason(&self) -> String {
        match self.failures.first() {
            None => "ok: all checks passed".into(),
            Some(first) if self.failures.len() == 1 => format!("{}: {first}", self.status().label()),
            Some(first) => format!(
                "{}: {first} (+{} more)",
                self.status().label(),
                self.failures.len() - 1
            ),
        }
    }

    fn put(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.report.push((key.into(), value.to_string()));
    }

    fn absorb(&mut self, checks: Vec<Check>) {
        for c in &checks {
            if c.verdict == Verdict::Fail {
                self.failures.push(format!(
                    "check={} value={:e} tolerance={:e}",
                    c.name, c.value, c.tolerance
                ));
            }
        }
        self.checks.extend(checks);
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

/// A run that could not complete.
#[derive(Debug)]
pub enum RunError {
    Model(Error),
    Io(std::io::Error),
}

impl RunError {
    pub fn status(&self) -> Status {
        match self {
            RunError::Model(Error::DimensionCap { .. }) => Status::ResourceCap,
            RunError::Model(Error::InvalidParameter { .. }) => Status::ConfigError,
            _ => Status::VerificationFailed,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = match self {
            RunError::Model(e) => e.to_string(),
            RunError::Io(e) => format!("io: {e}"),
        };
        write!(f, "{}: {detail}", self.status().label())
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Model(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

struct Context {
    modes: Vec<ModeSpec>,
    spec: ThermalSpec,
    grid: TimeGrid,
    rho_e0: DensityMatrix,
}

/// Runs a validated configuration and writes its output files.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let ctx = Context {
        modes: config.modes()?,
        spec: config.thermal_spec()?,
        grid: TimeGrid::new(config.evolution.t_max, config.evolution.n_steps)?,
        rho_e0: electronic_state(&config.initial)
            .map_err(|reason| Error::InvalidParameter {
                name: "initial.electronic_state",
                reason,
            })?,
    };
    fs::create_dir_all(&config.output.directory)?;
    let mut out = RunOutcome::default();
    out.put("task", task_name(&config.task));
    match &config.task {
        Task::Trajectory { factorization } => trajectory_task(config, &ctx, *factorization, &mut out)?,
        Task::Compare { kind_b, threshold } => compare_task(config, &ctx, *kind_b, *threshold, &mut out)?,
        Task::AlphaSweep { alphas, threshold } => sweep_task(config, &ctx, alphas, *threshold, &mut out)?,
        Task::Convergence {
            kind_b,
            n_max_list,
            threshold,
        } => convergence_task(config, &ctx, *kind_b, n_max_list, *threshold, &mut out)?,
    }
    for c in out.checks.clone() {
        out.put(format!("check.{}", c.name), c.verdict);
        if c.verdict != Verdict::Skipped {
            out.put(format!("check.{}.value", c.name), format_args!("{:e}", c.value));
            out.put(format!("check.{}.tolerance", c.name), format_args!("{:e}", c.tolerance));
        }
    }
    out.put("status", out.status().label());
    let report_path = output_path(config, "", "report");
    let mut text = String::new();
    for (k, v) in &out.report {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(&report_path, text)?;
    out.files.push(report_path);
    Ok(out)
}

fn task_name(task: &Task) -> &'static str {
    match task {
        Task::Trajectory { .. } => "trajectory",
        Task::Compare { .. } => "compare",
        Task::AlphaSweep { .. } => "alpha_sweep",
        Task::Convergence { .. } => "convergence",
    }
}

fn output_path(config: &RunConfig, suffix: &str, ext: &str) -> PathBuf {
    config
        .output
        .directory
        .join(format!("{}{suffix}.{ext}", config.output.basename))
}

fn check_cap(kind: ModelKind, modes: &[ModeSpec], n_max: usize) -> Result<(), RunError> {
    match kind.total_dim(modes.len(), n_max) {
        Some(dim) if dim <= DEFAULT_DIMENSION_CAP => Ok(()),
        dim => Err(Error::DimensionCap {
            dim: dim.unwrap_or(usize::MAX),
            cap: DEFAULT_DIMENSION_CAP,
        }
        .into()),
    }
}

fn build(config: &RunConfig, ctx: &Context, kind: ModelKind, n_max: usize) -> Result<TotalModel, RunError> {
    check_cap(kind, &ctx.modes, n_max)?;
    Ok(TotalModel::build(kind, &config.electronic, &ctx.modes, n_max)?)
}

/// `time,pop_site1,pop_site2,coh_re,coh_im,coh_abs` with 12 significant digits.
pub fn write_csv(path: &Path, traj: &ReducedTrajectory) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "pop_site1", "pop_site2", "coh_re", "coh_im", "coh_abs"])?;
    for k in 0..traj.len() {
        let c = traj.rho12(k);
        let row = [traj.grid().time(k), traj.rho11(k), traj.rho22(k), c.re, c.im, c.norm()];
        w.write_record(row.iter().map(|v| format!("{v:.11e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Row-level bounds every emitted CSV satisfies.
fn row_checks(label: &str, traj: &ReducedTrajectory) -> Vec<Check> {
    let mut pop = 0.0f64;
    let mut coh = 0.0f64;
    for k in 0..traj.len() {
        let (p1, p2) = (traj.rho11(k), traj.rho22(k));
        pop = pop.max((p1 + p2 - 1.0).abs());
        coh = coh.max(traj.rho12(k).norm() - (p1 * p2).max(0.0).sqrt());
    }
    vec![
        Check::at_most(format!("{label}.population_sum"), pop, ROW_TOL),
        Check::at_most(format!("{label}.coherence_bound"), coh, ROW_TOL),
    ]
}

/// Invariants of one propagated model.
fn model_checks(
    label: &str,
    model: &TotalModel,
    prepared: &PreparedState<'_>,
    prop: &SpectralPropagator,
    traj: &ReducedTrajectory,
    ctx: &Context,
    tail_applies: bool,
) -> Result<Vec<Check>, RunError> {
    let name = |s: &str| format!("{label}.{s}");
    let mut checks = vec![Check::at_most(name("unitarity"), prop.unitarity_bound(), UNITARITY_TOL)];

    let mut trace_err = 0.0f64;
    let mut herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for rho in traj.states() {
        trace_err = trace_err.max((rho.trace().re - 1.0).abs().max(rho.trace().im.abs()));
        herm = herm.max(rho.hermiticity_defect());
        min_eig = min_eig.min(rho.min_eigenvalue()?);
    }
    checks.push(Check::at_most(name("trace"), trace_err, TRACE_TOL));
    checks.push(Check::at_most(name("hermiticity"), herm, HERMITIAN_TOL));
    checks.push(Check::at_least(name("positivity"), min_eig, POSITIVITY_FLOOR));

    let energies = prepared.expectation_series(model.hamiltonian(), &ctx.grid.points())?;
    let e0 = energies[0];
    let drift = energies.iter().map(|e| (e - e0).norm()).fold(0.0, f64::max);
    checks.push(Check::at_most(name("energy_conservation"), drift / (1.0 + e0.norm()), ENERGY_TOL));

    let uncoupled = model.bath_partition().iter().all(|f| f.coupling == [0.0, 0.0]);
    if uncoupled {
        let closed = electronic_trajectory(model.params(), &ctx.rho_e0, &ctx.grid)?;
        let mut dev = 0.0f64;
        for (a, b) in traj.states().iter().zip(closed.states()) {
            dev = dev.max(a.as_operator().sub(b.as_operator())?.max_abs());
        }
        checks.push(Check::at_most(name("uncoupled_closed_form"), dev, CLOSED_FORM_TOL));
    } else {
        checks.push(Check::skipped(name("uncoupled_closed_form")));
    }

    let n = model.n_max();
    let a = annihilation_matrix(n)?;
    let c = commutator(&a, &a.adjoint())?;
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = match (i == j, i + 1 == n) {
                (true, false) => 1.0,
                (true, true) => -((n - 1) as f64),
                _ => 0.0,
            };
            dev = dev.max((c.get(i, j).re - expected).abs().max(c.get(i, j).im.abs()));
        }
    }
    checks.push(Check::at_most(name("truncated_commutator"), dev, COMMUTATOR_TOL));

    if !tail_applies || ctx.spec.n_max_override().is_some() {
        checks.push(Check::skipped(name("gibbs_tail")));
    } else {
        let mut worst = 0.0f64;
        for f in model.bath_partition() {
            let small = gibbs_state(f.omega, ctx.spec.beta(), n)?;
            let large = gibbs_state(f.omega, ctx.spec.beta(), 2 * n)?;
            let padded = DensityMatrix::diagonal(
                SpaceLayout::fock(2 * n)?,
                &(0..2 * n)
                    .map(|k| if k < n { small.get(k, k).re } else { 0.0 })
                    .collect::<Vec<_>>(),
            )?;
            worst = worst.max(trace_distance(&padded, &large)?);
        }
        checks.push(Check::at_most(name("gibbs_tail"), worst, ctx.spec.tail_tol()));
    }
    checks.extend(row_checks(label, traj));
    Ok(checks)
}

/// Propagates `model` from the configured initial state and checks it.
/// The Gibbs tail is only checked when the truncation came from the
/// thermal spec.
fn propagate_and_check(
    label: &str,
    model: &TotalModel,
    ctx: &Context,
) -> Result<(ReducedTrajectory, Vec<Check>), RunError> {
    let tail_applies = model.n_max() == ctx.spec.truncation_for(&ctx.modes);
    let rho0 = initial_state(&ctx.rho_e0, model, &ctx.spec)?;
    let prop = SpectralPropagator::for_model(model)?;
    let prepared = prop.prepare(&rho0)?;
    let traj = prepared.reduced_trajectory(&ctx.grid)?;
    let checks = model_checks(label, model, &prepared, &prop, &traj, ctx, tail_applies)?;
    Ok((traj, checks))
}

fn trajectory_task(
    config: &RunConfig,
    ctx: &Context,
    factorization: bool,
    out: &mut RunOutcome,
) -> Result<(), RunError> {
    let n_max = ctx.spec.truncation_for(&ctx.modes);
    let model = build(config, ctx, config.model_kind(config.bath.kind), n_max)?;
    out.put("model", dimerbath::equivalence::describe(&model));
    out.put("n_max_used", n_max);
    let (traj, checks) = propagate_and_check("model", &model, ctx)?;
    out.absorb(checks);
    let path = output_path(config, "", "csv");
    write_csv(&path, &traj)?;
    out.files.push(path);
    if factorization {
        let rho0 = initial_state(&ctx.rho_e0, &model, &ctx.spec)?;
        let f = factorization_check(&model, &rho0, &ctx.grid)?;
        out.put("factorization.max_distance", format_args!("{:e}", f.max_distance));
        out.put("factorization.bound", format_args!("{:e}", f.bound));
        out.absorb(vec![Check::at_most("model.factorization".into(), f.max_distance, f.bound)]);
        out.factorization = Some(f);
    }
    Ok(())
}

fn put_comparison(out: &mut RunOutcome, prefix: &str, r: &ComparisonReport) {
    out.put(format!("{prefix}model_a"), &r.model_a);
    out.put(format!("{prefix}model_b"), &r.model_b);
    out.put(format!("{prefix}max_trace_distance"), format_args!("{:e}", r.max_distance));
    out.put(format!("{prefix}n_max_used"), r.n_max_used);
    out.put(format!("{prefix}converged"), r.converged);
    out.put(format!("{prefix}convergence_delta"), format_args!("{:e}", r.convergence_delta));
    out.put(format!("{prefix}n_max_refined"), r.n_max_refined);
    match r.refined_max_distance {
        Some(d) => out.put(format!("{prefix}refined_max_trace_distance"), format_args!("{d:e}")),
        None => out.put(format!("{prefix}refined_max_trace_distance"), "nan"),
    }
}

fn require_comparison(out: &mut RunOutcome, label: &str, r: &ComparisonReport, threshold: f64) {
    out.require(r.converged, || {
        format!("{label}not converged: convergence_delta={:e}", r.convergence_delta)
    });
    out.require(r.max_distance < threshold, || {
        format!("{label}max_trace_distance={:e} threshold={threshold:e}", r.max_distance)
    });
}

fn compare_task(
    config: &RunConfig,
    ctx: &Context,
    kind_b: KindName,
    threshold: f64,
    out: &mut RunOutcome,
) -> Result<(), RunError> {
    let n_max = ctx.spec.truncation_for(&ctx.modes);
    let a = build(config, ctx, config.model_kind(config.bath.kind), n_max)?;
    let b = build(config, ctx, config.model_kind(kind_b), n_max)?;
    let cmp = compare_reduced(&a, &b, &ctx.rho_e0, &ctx.spec, &ctx.grid)?;
    put_comparison(out, "", &cmp);
    out.put("threshold", format_args!("{threshold:e}"));
    require_comparison(out, "", &cmp, threshold);

    for (label, model, suffix) in [("model_a", &a, ""), ("model_b", &b, "_b")] {
        let (traj, checks) = propagate_and_check(label, model, ctx)?;
        out.absorb(checks);
        let path = output_path(config, suffix, "csv");
        write_csv(&path, &traj)?;
        out.files.push(path);
    }
    out.comparison = Some(cmp);
    Ok(())
}

fn sweep_task(
    config: &RunConfig,
    ctx: &Context,
    alphas: &[f64],
    threshold: f64,
    out: &mut RunOutcome,
) -> Result<(), RunError> {
    let n_max = ctx.spec.truncation_for(&ctx.modes);
    let sweep = coherence_vs_alpha(&config.electronic, &ctx.modes, &ctx.rho_e0, &ctx.spec, &ctx.grid, alphas)?;
    out.put("n_max_used", n_max);
    out.put("coupling_strictly_decreasing", sweep.coupling_strictly_decreasing);
    out.put("coherence_order_violations", sweep.coherence_order_violations());
    out.require(sweep.coupling_strictly_decreasing, || {
        "effective coupling is not strictly decreasing in alpha".into()
    });
    out.coupling_strictly_decreasing = Some(sweep.coupling_strictly_decreasing);

    let mut worst = 0.0f64;
    let mut worst_delta = 0.0f64;
    let mut all_converged = true;
    for (k, &alpha) in alphas.iter().enumerate() {
        let a = build(config, ctx, ModelKind::CorrelatedAlpha { alpha }, n_max)?;
        let b = build(config, ctx, ModelKind::ReducedEffective { alpha }, n_max)?;
        let cmp = compare_reduced(&a, &b, &ctx.rho_e0, &ctx.spec, &ctx.grid)?;
        let prefix = format!("alpha.{k}.");
        out.put(format!("{prefix}alpha"), alpha);
        let couplings: Vec<f64> = ctx.modes.iter().map(|m| effective_coupling(m.g, alpha)).collect();
        out.put(
            format!("{prefix}effective_coupling"),
            couplings.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(", "),
        );
        put_comparison(out, &prefix, &cmp);
        require_comparison(out, &format!("alpha={alpha}: "), &cmp, threshold);
        worst = worst.max(cmp.max_distance);
        worst_delta = if cmp.convergence_delta.is_nan() {
            f64::NAN
        } else {
            worst_delta.max(cmp.convergence_delta)
        };
        all_converged &= cmp.converged;

        let (traj, checks) = propagate_and_check(&format!("alpha_{k}.reduced"), &b, ctx)?;
        out.absorb(checks);
        let (_, checks) = propagate_and_check(&format!("alpha_{k}.correlated"), &a, ctx)?;
        out.absorb(checks);
        let path = output_path(config, &format!("_alpha{k}"), "csv");
        write_csv(&path, &traj)?;
        out.files.push(path);
        out.sweep.push(SweepRow {
            alpha,
            effective_coupling: couplings,
            comparison: cmp,
        });
    }
    out.put("max_trace_distance", format_args!("{worst:e}"));
    out.put("converged", all_converged);
    out.put("convergence_delta", format_args!("{worst_delta:e}"));
    out.put("threshold", format_args!("{threshold:e}"));
    Ok(())
}

fn convergence_task(
    config: &RunConfig,
    ctx: &Context,
    kind_b: KindName,
    n_max_list: &[usize],
    threshold: f64,
    out: &mut RunOutcome,
) -> Result<(), RunError> {
    let (ka, kb) = (config.model_kind(config.bath.kind), config.model_kind(kind_b));
    for &n in n_max_list {
        check_cap(ka, &ctx.modes, n)?;
        check_cap(kb, &ctx.modes, n)?;
    }
    let mut last = None;
    for &n in n_max_list {
        let a = build(config, ctx, ka, n)?;
        let b = build(config, ctx, kb, n)?;
        let d = reduced_distances(&a, &b, &ctx.rho_e0, &ctx.spec, &ctx.grid, DEFAULT_DIMENSION_CAP)?;
        let max_distance = d.iter().copied().fold(0.0, f64::max);
        let spectrum_discrepancy = if a.total_dim() == b.total_dim() {
            Some(spectrum_equivalence(&a, &b)?)
        } else {
            None
        };
        out.put(format!("n_max.{n}.max_trace_distance"), format_args!("{max_distance:e}"));
        if let Some(s) = spectrum_discrepancy {
            out.put(format!("n_max.{n}.spectrum_discrepancy"), format_args!("{s:e}"));
        }
        out.convergence.push(ConvergenceRow {
            n_max: n,
            max_distance,
            spectrum_discrepancy,
        });
        last = Some(a);
    }
    let rows = &out.convergence;
    let final_row = rows.last().expect("n_max_list is non-empty").clone();
    let delta = match rows.len() {
        0 | 1 => f64::NAN,
        k => (rows[k - 1].max_distance - rows[k - 2].max_distance).abs(),
    };
    let converged = delta < 1e-7;
    let spectra: Vec<f64> = rows.iter().filter_map(|r| r.spectrum_discrepancy).collect();
    let monotone = spectra.windows(2).all(|w| w[1] < w[0]);
    out.put("model_a", config.bath.kind.as_str());
    out.put("model_b", kind_b.as_str());
    out.put("max_trace_distance", format_args!("{:e}", final_row.max_distance));
    out.put("n_max_used", final_row.n_max);
    out.put("converged", converged);
    out.put("convergence_delta", format_args!("{delta:e}"));
    out.put("threshold", format_args!("{threshold:e}"));
    if !spectra.is_empty() {
        out.put("spectrum_discrepancy", format_args!("{:e}", spectra[spectra.len() - 1]));
        out.put("spectrum_monotone", monotone);
    }
    out.require(converged, || format!("not converged: convergence_delta={delta:e}"));
    out.require(final_row.max_distance < threshold, || {
        format!("max_trace_distance={:e} threshold={threshold:e}", final_row.max_distance)
    });

    let model = last.expect("n_max_list is non-empty");
    let (traj, checks) = propagate_and_check("model_a", &model, ctx)?;
    out.absorb(checks);
    let path = output_path(config, "", "csv");
    write_csv(&path, &traj)?;
    out.files.push(path);
    Ok(())
}
