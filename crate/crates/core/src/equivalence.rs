//! Checks that different bath models give the same exciton dynamics.
//!
//! Every comparison is made at a finite Fock truncation, so each one is
//! repeated with two more levels per factor and the change is reported as a
//! convergence certificate.

use std::fmt;

use rayon::prelude::*;

use crate::dynamics::{
    coherence_abs, evolve_reduced_with_cap, ReducedTrajectory, SpectralPropagator, TimeGrid,
    DEFAULT_DIMENSION_CAP,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{
    build_correlated_alpha, build_reduced_effective, effective_coupling, BathRole, ElectronicParams,
    ModeSpec, TotalModel,
};
use crate::spaces::{partial_trace, recombine, DensityMatrix, Operator};
use crate::thermal::{initial_state, ThermalSpec};

/// `½ ‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let diff = rho.as_operator().sub(sigma.as_operator())?;
    let d = 0.5 * linalg::hermitian_trace_norm(diff.matrix())?;
    Ok(d.clamp(0.0, 1.0))
}

/// Knobs for [`compare_reduced_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareOptions {
    pub cap: usize,
    /// Largest accepted change of `max_distance` under refinement.
    pub tolerance: f64,
    /// Extra Fock levels per factor in the refined run.
    pub refinement: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_DIMENSION_CAP,
            tolerance: 1e-7,
            refinement: 2,
        }
    }
}

/// Outcome of a reduced-dynamics comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub model_a: String,
    pub model_b: String,
    pub grid: TimeGrid,
    pub per_time_distance: Vec<f64>,
    pub max_distance: f64,
    pub n_max_used: usize,
    pub converged: bool,
    /// `|max_distance(n_max + refinement) − max_distance(n_max)|`; NaN when
    /// the refined run would exceed the dimension cap.
    pub convergence_delta: f64,
    pub n_max_refined: usize,
    pub refined_max_distance: Option<f64>,
}

/// Short label with the kind and the parameters a model was built from.
pub fn describe(model: &TotalModel) -> String {
    let p = model.params();
    let modes: Vec<String> = model
        .modes()
        .iter()
        .map(|m| format!("({}, {})", m.omega, m.g))
        .collect();
    format!(
        "{} eps1={} eps2={} j={} modes=[{}]",
        model.kind(),
        p.eps1,
        p.eps2,
        p.j,
        modes.join(", ")
    )
}

/// Reduced trajectories of two models, each started from `rho_e0` times
/// its own thermal bath state.
pub fn reduced_pair(
    a: &TotalModel,
    b: &TotalModel,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
    cap: usize,
) -> Result<(ReducedTrajectory, ReducedTrajectory)> {
    let run = |m: &TotalModel| -> Result<_> {
        let rho0 = initial_state(rho_e0, m, spec)?;
        evolve_reduced_with_cap(m, &rho0, grid, cap)
    };
    let (ta, tb) = rayon::join(|| run(a), || run(b));
    Ok((ta?, tb?))
}

/// Per-time trace distance between two trajectories on the same grid.
pub fn trajectory_distances(a: &ReducedTrajectory, b: &ReducedTrajectory) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    a.states()
        .iter()
        .zip(b.states())
        .map(|(x, y)| trace_distance(x, y))
        .collect()
}

/// Per-time trace distances between the reduced trajectories of two models.
pub fn reduced_distances(
    a: &TotalModel,
    b: &TotalModel,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
    cap: usize,
) -> Result<Vec<f64>> {
    let (ta, tb) = reduced_pair(a, b, rho_e0, spec, grid, cap)?;
    trajectory_distances(&ta, &tb)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn check_cap(model: &TotalModel, n_max: usize, cap: usize) -> Result<()> {
    match model.kind().total_dim(model.modes().len(), n_max) {
        Some(dim) if dim <= cap => Ok(()),
        Some(dim) => Err(Error::DimensionCap { dim, cap }),
        None => Err(Error::DimensionCap { dim: usize::MAX, cap }),
    }
}

/// [`compare_reduced_with`] with default options.
pub fn compare_reduced(
    a: &TotalModel,
    b: &TotalModel,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
) -> Result<ComparisonReport> {
    compare_reduced_with(a, b, rho_e0, spec, grid, &CompareOptions::default())
}

/// Compares the reduced dynamics of two models at the truncation chosen by
/// `spec` for the union of their modes, then again with `refinement` more
/// levels per factor. The input models' own truncations are ignored.
///
/// A refined run that would exceed the cap leaves the report unconverged.
pub fn compare_reduced_with(
    a: &TotalModel,
    b: &TotalModel,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    Ok(compare_with_trajectories(a, b, rho_e0, spec, grid, opts)?.report)
}

/// A comparison together with both trajectories at `n_max_used`.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub trajectory_a: ReducedTrajectory,
    pub trajectory_b: ReducedTrajectory,
}

/// [`compare_reduced_with`], keeping the trajectories.
pub fn compare_with_trajectories(
    a: &TotalModel,
    b: &TotalModel,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
    opts: &CompareOptions,
) -> Result<Comparison> {
    if a.params() != b.params() {
        return Err(Error::param("model_b", "electronic parameters differ from model_a"));
    }
    let modes: Vec<ModeSpec> = a.modes().iter().chain(b.modes()).copied().collect();
    let n_max = spec.truncation_for(&modes);
    check_cap(a, n_max, opts.cap)?;
    check_cap(b, n_max, opts.cap)?;

    let at = |n: usize| -> Result<_> {
        reduced_pair(&a.with_n_max(n)?, &b.with_n_max(n)?, rho_e0, spec, grid, opts.cap)
    };
    let (trajectory_a, trajectory_b) = at(n_max)?;
    let per_time_distance = trajectory_distances(&trajectory_a, &trajectory_b)?;
    let max_distance = max_of(&per_time_distance);

    let n_max_refined = n_max + opts.refinement;
    let refinable = check_cap(a, n_max_refined, opts.cap).is_ok()
        && check_cap(b, n_max_refined, opts.cap).is_ok();
    let refined_max_distance = if refinable {
        let (ra, rb) = at(n_max_refined)?;
        Some(max_of(&trajectory_distances(&ra, &rb)?))
    } else {
        None
    };
    let convergence_delta = refined_max_distance.map_or(f64::NAN, |r| (r - max_distance).abs());
    let report = ComparisonReport {
        model_a: describe(a),
        model_b: describe(b),
        grid: *grid,
        per_time_distance,
        max_distance,
        n_max_used: n_max,
        converged: convergence_delta < opts.tolerance,
        convergence_delta,
        n_max_refined,
        refined_max_distance,
    };
    Ok(Comparison {
        report,
        trajectory_a,
        trajectory_b,
    })
}

/// `max |sorted-eig(a) − sorted-eig(b)| / (1 + spectral radius)`.
pub fn spectrum_discrepancy(a: &Operator, b: &Operator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let ea = a.eigenvalues()?;
    let eb = b.eigenvalues()?;
    let radius = ea.iter().chain(&eb).fold(0.0f64, |r, e| r.max(e.abs()));
    let gap = ea.iter().zip(&eb).fold(0.0f64, |g, (x, y)| g.max((x - y).abs()));
    Ok(gap / (1.0 + radius))
}

/// [`spectrum_discrepancy`] of two models' Hamiltonians.
pub fn spectrum_equivalence(a: &TotalModel, b: &TotalModel) -> Result<f64> {
    spectrum_discrepancy(a.hamiltonian(), b.hamiltonian())
}

/// Distance of the evolving state from the product of its marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationReport {
    /// `T(ρ(t), ρ_rest(t) ⊗ ρ_B(t))` per grid point.
    pub distances: Vec<f64>,
    pub max_distance: f64,
    /// Rounding-level scale `dim · ε · (1 + r · t_max)`, `r` the spectral
    /// radius. The center-of-mass modes enter the Hamiltonian as a separate
    /// sum term at every truncation, so deviations above it are errors.
    pub bound: f64,
    pub n_max: usize,
}

impl FactorizationReport {
    pub fn within_bound(&self) -> bool {
        self.max_distance <= self.bound
    }
}

/// Per-time distance between `ρ(t)` and the product of its marginals on
/// `split` and on the remaining factors.
pub fn factorization_distances(
    prop: &SpectralPropagator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    split: &[usize],
) -> Result<Vec<f64>> {
    let layout = prop.layout();
    let rest: Vec<usize> = (0..layout.num_factors()).filter(|k| !split.contains(k)).collect();
    let prepared = prop.prepare(rho0)?;
    grid.points()
        .par_iter()
        .map(|&t| {
            let rho = prepared.state_at(t);
            let product = recombine(
                layout,
                &rest,
                &partial_trace(&rho, &rest)?,
                &partial_trace(&rho, split)?,
            )?;
            trace_distance(&rho, &product)
        })
        .collect()
}

/// Checks that the center-of-mass factors of a transformed model stay in a
/// product state with the electronic and relative-mode factors.
pub fn factorization_check(
    model: &TotalModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<FactorizationReport> {
    let split = model.factor_indices(BathRole::CenterOfMass);
    if split.is_empty() {
        return Err(Error::MissingPartition);
    }
    if rho0.layout() != model.layout() {
        return Err(Error::LayoutMismatch);
    }
    let prop = SpectralPropagator::for_model(model)?;
    let distances = factorization_distances(&prop, rho0, grid, &split)?;
    let radius = prop.energies().iter().fold(0.0f64, |r, e| r.max(e.abs()));
    let bound = model.total_dim() as f64 * f64::EPSILON * (1.0 + radius * grid.t_max());
    Ok(FactorizationReport {
        max_distance: max_of(&distances),
        distances,
        bound,
        n_max: model.n_max(),
    })
}

/// One α of a coherence sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `g(1 − α)/√2` for each mode.
    pub effective_couplings: Vec<f64>,
    pub coherence: Vec<f64>,
}

/// Coherence `|ρ12(t)|` of the reduced-effective model across α.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSweep {
    pub grid: TimeGrid,
    pub n_max_used: usize,
    pub rows: Vec<AlphaRow>,
    /// `|effective_coupling|` strictly decreases along the rows with α ≤ 1,
    /// for every mode with nonzero `g`.
    pub coupling_strictly_decreasing: bool,
}

impl AlphaSweep {
    /// Number of (time, adjacent α pair) entries where coherence drops as α
    /// grows. Reported only: the coupling law does not fix pointwise order.
    pub fn coherence_order_violations(&self) -> usize {
        self.rows
            .windows(2)
            .map(|w| {
                w[0].coherence
                    .iter()
                    .zip(&w[1].coherence)
                    .filter(|(lo, hi)| hi < lo)
                    .count()
            })
            .sum()
    }
}

/// Reduced-effective coherence series for ascending `alphas`.
pub fn coherence_vs_alpha(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
    alphas: &[f64],
) -> Result<AlphaSweep> {
    if alphas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("alphas", "must be strictly ascending"));
    }
    let n_max = spec.truncation_for(modes);
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let model = build_reduced_effective(p, modes, n_max, alpha)?;
            let rho0 = initial_state(rho_e0, &model, spec)?;
            let traj = evolve_reduced_with_cap(&model, &rho0, grid, DEFAULT_DIMENSION_CAP)?;
            Ok(AlphaRow {
                alpha,
                effective_couplings: modes.iter().map(|m| effective_coupling(m.g, alpha)).collect(),
                coherence: coherence_abs(&traj),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let physical: Vec<&AlphaRow> = rows.iter().filter(|r| r.alpha <= 1.0).collect();
    let coupling_strictly_decreasing = modes.iter().enumerate().filter(|(_, m)| m.g != 0.0).all(|(k, _)| {
        physical
            .windows(2)
            .all(|w| w[1].effective_couplings[k].abs() < w[0].effective_couplings[k].abs())
    });
    Ok(AlphaSweep {
        grid: *grid,
        n_max_used: n_max,
        rows,
        coupling_strictly_decreasing,
    })
}

/// Correlated-α model against its reduced-effective counterpart.
pub fn compare_alpha_models(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    alpha: f64,
    rho_e0: &DensityMatrix,
    spec: &ThermalSpec,
    grid: &TimeGrid,
) -> Result<ComparisonReport> {
    let n = spec.truncation_for(modes);
    let a = build_correlated_alpha(p, modes, n, alpha)?;
    let b = build_reduced_effective(p, modes, n, alpha)?;
    compare_reduced(&a, &b, rho_e0, spec, grid)
}

impl fmt::Display for ComparisonReport {
    /// `key = value` lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model_a = {}", self.model_a)?;
        writeln!(f, "model_b = {}", self.model_b)?;
        writeln!(f, "t_max = {}", self.grid.t_max())?;
        writeln!(f, "n_steps = {}", self.grid.n_steps())?;
        writeln!(f, "max_trace_distance = {:e}", self.max_distance)?;
        writeln!(f, "n_max_used = {}", self.n_max_used)?;
        writeln!(f, "converged = {}", self.converged)?;
        writeln!(f, "convergence_delta = {:e}", self.convergence_delta)?;
        writeln!(f, "n_max_refined = {}", self.n_max_refined)?;
        match self.refined_max_distance {
            Some(d) => writeln!(f, "refined_max_trace_distance = {d:e}"),
            None => writeln!(f, "refined_max_trace_distance = nan"),
        }
    }
}
