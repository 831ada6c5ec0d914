//! Exact unitary propagation from one Hermitian eigendecomposition.
//!
//! With `H = V Λ V†` the total state at any time is
//! `ρ(t) = V (ρ̃ ∘ u u†) V†` where `ρ̃ = V† ρ(0) V` and `u_k = e^{−iλ_k t}`.
//! Every grid point is computed from the same decomposition, so nothing
//! accumulates from step to step.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::models::{ElectronicParams, TotalModel};
use crate::spaces::{
    DensityMatrix, Operator, SpaceLayout, HERMITIAN_TOL, POSITIVITY_FLOOR, TRACE_TOL,
};

/// Largest total dimension accepted by default.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Uniform grid `t_k = k · t_max / n_steps` for `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::param("t_max", format!("must be positive, got {t_max}")));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Ok(Self { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.t_max / self.n_steps as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }
}

/// Eigendecomposition of a Hamiltonian, reusable for any time.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    layout: SpaceLayout,
    energies: Vec<f64>,
    vectors: CMat,
    shift: f64,
}

impl SpectralPropagator {
    pub fn new(h: &Operator) -> Result<Self> {
        Self::with_cap(h, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(h: &Operator, cap: usize) -> Result<Self> {
        if h.dim() > cap {
            return Err(Error::DimensionCap { dim: h.dim(), cap });
        }
        let defect = h.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let (energies, vectors) = linalg::hermitian_eigen(h.matrix())?;
        // State evolution only sees energy differences; centering the
        // spectrum keeps the phases small.
        let shift = match (energies.first(), energies.last()) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            _ => 0.0,
        };
        Ok(Self {
            layout: h.layout().clone(),
            energies,
            vectors,
            shift,
        })
    }

    pub fn for_model(model: &TotalModel) -> Result<Self> {
        Self::new(model.hamiltonian())
    }

    pub fn for_model_with_cap(model: &TotalModel, cap: usize) -> Result<Self> {
        Self::with_cap(model.hamiltonian(), cap)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Ascending eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Columns are the eigenvectors, in the order of [`Self::energies`].
    pub fn eigenvectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    /// `max |V†V − I|`.
    pub fn eigenbasis_defect(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        let n = self.dim();
        let id = Mat::<c64>::identity(n, n);
        linalg::max_abs((g - id).as_ref())
    }

    /// `U(t) = V e^{−iΛt} V†`.
    pub fn unitary(&self, t: f64) -> Operator {
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, k| {
            self.vectors[(i, k)] * c64::cis(-self.energies[k] * t)
        });
        let u = scaled * self.vectors.adjoint();
        Operator::new(self.layout.clone(), u).expect("square by construction")
    }

    /// `‖U(t) U(t)† − I‖₂`.
    pub fn unitarity_defect(&self, t: f64) -> Result<f64> {
        let u = self.unitary(t);
        let id = Operator::identity(self.layout.clone());
        u.mul(&u.adjoint())?.sub(&id)?.spectral_norm()
    }

    /// Bound on `‖U(t) U(t)† − I‖₂` valid for every `t`: with
    /// `δ ≥ ‖V†V − I‖₂`, `U U† − I = V D (V†V − I) D* V† + (V V† − I)`
    /// gives `δ (1 + δ) + δ`. The Frobenius norm serves as `δ`.
    pub fn unitarity_bound(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        let n = self.dim();
        let delta = (g - Mat::<c64>::identity(n, n)).norm_l2();
        delta * (2.0 + delta)
    }

    /// Rotates `rho0` into the eigenbasis once, for evaluation at many times.
    pub fn prepare(&self, rho0: &DensityMatrix) -> Result<PreparedState<'_>> {
        if rho0.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        let coeffs = match bath_diagonal_blocks(&self.layout, rho0.matrix()) {
            Some(blocks) => self.rotate_bath_diagonal(&blocks),
            None => self.vectors.adjoint() * rho0.matrix() * &self.vectors,
        };
        Ok(PreparedState { prop: self, coeffs })
    }

    /// `ρ(t)` on the full space.
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        Ok(self.prepare(rho0)?.state_at(t))
    }

    fn block(&self, a: usize) -> MatRef<'_, c64> {
        let h = self.layout.bath_dim();
        self.vectors.as_ref().submatrix(a * h, 0, h, self.dim())
    }

    /// `Σ_ab A_a† diag(c^{ab}) A_b` for a state whose bath part is diagonal.
    fn rotate_bath_diagonal(&self, blocks: &[[Vec<c64>; 2]; 2]) -> CMat {
        let n = self.dim();
        let mut out = Mat::<c64>::zeros(n, n);
        for (a, row) in blocks.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                if c.iter().all(|x| *x == ZERO) {
                    continue;
                }
                let ab = self.block(b);
                let scaled = Mat::from_fn(ab.nrows(), n, |beta, l| c[beta] * ab[(beta, l)]);
                out += self.block(a).adjoint() * scaled;
            }
        }
        out
    }
}

/// For an electronic-first layout, the per-bath-level 2×2 blocks
/// `c^{ab}_β = ρ[(a,β),(b,β)]` when every bath-off-diagonal entry vanishes.
fn bath_diagonal_blocks(layout: &SpaceLayout, m: MatRef<'_, c64>) -> Option<[[Vec<c64>; 2]; 2]> {
    if !layout.has_electronic() || layout.num_factors() < 2 {
        return None;
    }
    let h = layout.bath_dim();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i % h != j % h && m[(i, j)] != ZERO {
                return None;
            }
        }
    }
    let pick = |a: usize, b: usize| (0..h).map(|beta| m[(a * h + beta, b * h + beta)]).collect();
    Some([[pick(0, 0), pick(0, 1)], [pick(1, 0), pick(1, 1)]])
}

/// An initial state expressed in a propagator's eigenbasis.
#[derive(Clone, Debug)]
pub struct PreparedState<'a> {
    prop: &'a SpectralPropagator,
    coeffs: CMat,
}

impl PreparedState<'_> {
    /// `ρ(t) = V (ρ̃ ∘ u u†) V†`.
    pub fn state_at(&self, t: f64) -> DensityMatrix {
        let p = self.prop;
        let n = p.dim();
        let u: Vec<c64> = p.energies.iter().map(|e| c64::cis(-(e - p.shift) * t)).collect();
        let d = Mat::from_fn(n, n, |k, l| self.coeffs[(k, l)] * u[k] * u[l].conj());
        let m = &p.vectors * d * p.vectors.adjoint();
        DensityMatrix::from_parts_unchecked(p.layout.clone(), m)
    }

    /// `Tr[op · ρ(t)]` at each time. `V† op V` is formed once, so this also
    /// exercises the decomposition rather than only the diagonal `Λ`.
    pub fn expectation_series(&self, op: &Operator, times: &[f64]) -> Result<Vec<c64>> {
        let p = self.prop;
        if op.layout() != &p.layout {
            return Err(Error::LayoutMismatch);
        }
        let n = p.dim();
        let rotated = p.vectors.adjoint() * op.matrix() * &p.vectors;
        // Tr[O ρ(t)] = Σ_kl Õ_lk ρ̃_kl u_k conj(u_l)
        let weights = Mat::from_fn(n, n, |k, l| rotated[(l, k)] * self.coeffs[(k, l)]);
        Ok(times
            .iter()
            .map(|&t| {
                let u: Vec<c64> = p.energies.iter().map(|e| c64::cis(-(e - p.shift) * t)).collect();
                let mut acc = ZERO;
                for l in 0..n {
                    let ul = u[l].conj();
                    for k in 0..n {
                        acc += weights[(k, l)] * u[k] * ul;
                    }
                }
                acc
            })
            .collect())
    }

    /// Reduced electronic matrices `[ρ00, ρ11, ρ01]` at each time.
    ///
    /// `ρ_ab(t) = Σ_k conj(Φ_k) Σ_l (K^{ab} ∘ ρ̃)_{kl} Φ_l` with
    /// `K^{ab} = A_aᵀ conj(A_b)`, `A_a` the rows of `V` belonging to site `a`
    /// and `Φ_l = e^{iλ_l t}`.
    fn electronic_elements(&self, times: &[f64]) -> Vec<[c64; 3]> {
        let p = self.prop;
        let n = p.dim();
        let phases = Mat::from_fn(n, times.len(), |l, j| c64::cis((p.energies[l] - p.shift) * times[j]));
        let mut out = vec![[ZERO; 3]; times.len()];
        for (slot, (a, b)) in [(0, 0), (1, 1), (0, 1)].into_iter().enumerate() {
            let mut w = p.block(a).transpose() * p.block(b).conjugate();
            for l in 0..n {
                for k in 0..n {
                    w[(k, l)] *= self.coeffs[(k, l)];
                }
            }
            let y = w * &phases;
            for (j, row) in out.iter_mut().enumerate() {
                row[slot] = (0..n).fold(ZERO, |acc, k| acc + phases[(k, j)].conj() * y[(k, j)]);
            }
        }
        out
    }

    /// Reduced electronic state at every grid point, with its invariants checked.
    pub fn reduced_trajectory(&self, grid: &TimeGrid) -> Result<ReducedTrajectory> {
        let layout = &self.prop.layout;
        if !layout.has_electronic() {
            return Err(Error::InvalidLayout("no electronic factor to keep".into()));
        }
        let states = if layout.num_factors() == 1 {
            grid.points().iter().map(|&t| self.state_at(t)).collect()
        } else {
            self.electronic_elements(&grid.points())
                .into_iter()
                .map(|[r00, r11, r01]| {
                    let m = Mat::from_fn(2, 2, |i, j| match (i, j) {
                        (0, 0) => c64::new(r00.re, 0.0),
                        (1, 1) => c64::new(r11.re, 0.0),
                        (0, 1) => r01,
                        _ => r01.conj(),
                    });
                    DensityMatrix::from_parts_unchecked(SpaceLayout::electronic(), m)
                })
                .collect()
        };
        ReducedTrajectory::new(*grid, states)
    }
}

/// Reduced electronic states on a time grid.
#[derive(Clone, Debug)]
pub struct ReducedTrajectory {
    grid: TimeGrid,
    states: Vec<DensityMatrix>,
}

impl ReducedTrajectory {
    /// Fails unless there is one valid 2×2 state per grid point.
    pub fn new(grid: TimeGrid, states: Vec<DensityMatrix>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: states.len(),
            });
        }
        let traj = Self { grid, states };
        traj.validate()?;
        Ok(traj)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn rho11(&self, k: usize) -> f64 {
        self.states[k].get(0, 0).re
    }

    pub fn rho22(&self, k: usize) -> f64 {
        self.states[k].get(1, 1).re
    }

    pub fn rho12(&self, k: usize) -> c64 {
        self.states[k].get(0, 1)
    }

    /// Checks unit trace, Hermiticity and positivity at every point.
    pub fn validate(&self) -> Result<()> {
        for (k, rho) in self.states.iter().enumerate() {
            let t = self.grid.time(k);
            if rho.layout() != &SpaceLayout::electronic() {
                return Err(Error::LayoutMismatch);
            }
            let tr = rho.trace();
            if (tr - ONE).norm() > TRACE_TOL {
                return Err(Error::InvalidState(format!("trace {tr} at t = {t}")));
            }
            let defect = rho.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::InvalidState(format!("hermiticity defect {defect:e} at t = {t}")));
            }
            let min = rho.min_eigenvalue()?;
            if min < POSITIVITY_FLOOR {
                return Err(Error::InvalidState(format!("eigenvalue {min:e} at t = {t}")));
            }
        }
        Ok(())
    }
}

/// `Tr_ph ρ(t)` at every grid point, refusing models above the default cap.
pub fn evolve_reduced(
    model: &TotalModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<ReducedTrajectory> {
    evolve_reduced_with_cap(model, rho0, grid, DEFAULT_DIMENSION_CAP)
}

pub fn evolve_reduced_with_cap(
    model: &TotalModel,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    cap: usize,
) -> Result<ReducedTrajectory> {
    if rho0.layout() != model.layout() {
        return Err(Error::LayoutMismatch);
    }
    let prop = SpectralPropagator::for_model_with_cap(model, cap)?;
    prop.prepare(rho0)?.reduced_trajectory(grid)
}

/// Closed-form evolution of the bare dimer,
/// `e^{−iH_e t} = e^{−imt} [cos(rt) − i sin(rt) (H_e − m)/r]` with
/// `m = (eps1 + eps2)/2`, `r = √(((eps1 − eps2)/2)² + j²)`.
pub fn electronic_evolution(p: &ElectronicParams, rho_e0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho_e0.layout() != &SpaceLayout::electronic() {
        return Err(Error::LayoutMismatch);
    }
    let d = 0.5 * (p.eps1 - p.eps2);
    let r = d.hypot(p.j);
    let (c, s) = ((r * t).cos(), (r * t).sin());
    // the global phase e^{−imt} cancels in U ρ U†
    let sinc = if r == 0.0 { t } else { s / r };
    let i_sinc = c64::new(0.0, -sinc);
    let u = [[c64::new(c, 0.0) + i_sinc * d, i_sinc * p.j], [i_sinc * p.j, c64::new(c, 0.0) - i_sinc * d]];
    let m = Mat::from_fn(2, 2, |i, j| {
        let mut acc = ZERO;
        for k in 0..2 {
            for l in 0..2 {
                acc += u[i][k] * rho_e0.get(k, l) * u[j][l].conj();
            }
        }
        acc
    });
    Ok(DensityMatrix::from_parts_unchecked(SpaceLayout::electronic(), m))
}

/// [`electronic_evolution`] on every grid point.
pub fn electronic_trajectory(
    p: &ElectronicParams,
    rho_e0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<ReducedTrajectory> {
    let states = grid
        .points()
        .into_iter()
        .map(|t| electronic_evolution(p, rho_e0, t))
        .collect::<Result<Vec<_>>>()?;
    ReducedTrajectory::new(*grid, states)
}

/// `Tr[op · ρ]`.
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<c64> {
    if op.layout() != rho.layout() {
        return Err(Error::LayoutMismatch);
    }
    let (a, r) = (op.matrix(), rho.matrix());
    let n = op.dim();
    let mut acc = ZERO;
    for j in 0..n {
        for i in 0..n {
            acc += a[(i, j)] * r[(j, i)];
        }
    }
    Ok(acc)
}

/// `|ρ12(t_k)|` per grid point.
pub fn coherence_abs(traj: &ReducedTrajectory) -> Vec<f64> {
    (0..traj.len()).map(|k| traj.rho12(k).norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        build_independent_local, build_shared_anticorrelated, ElectronicParams, ModeSpec,
    };
    use crate::spaces::{embed, partial_trace};
    use crate::thermal::{initial_state, ThermalSpec};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn site1() -> DensityMatrix {
        DensityMatrix::diagonal(SpaceLayout::electronic(), &[1.0, 0.0]).unwrap()
    }

    fn plus() -> DensityMatrix {
        let h = c64::new(FRAC_1_SQRT_2, 0.0);
        DensityMatrix::pure(SpaceLayout::electronic(), &[h, h]).unwrap()
    }

    fn shared(p: ElectronicParams, g: f64, n_max: usize) -> TotalModel {
        build_shared_anticorrelated(&p, &[ModeSpec::new(1.0, g).unwrap()], n_max).unwrap()
    }

    fn thermal(model: &TotalModel, rho_e: &DensityMatrix, beta: f64) -> DensityMatrix {
        initial_state(rho_e, model, &ThermalSpec::new(beta, 1e-8).unwrap()).unwrap()
    }

    fn max_dev(a: &Operator, b: &Operator) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn grid_points() {
        let g = TimeGrid::new(50.0, 500).unwrap();
        assert_eq!(g.len(), 501);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(500), 50.0);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 5).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 5).is_err());
    }

    #[test]
    fn unitary_identities() {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let model = shared(p, 0.2, 6);
        let prop = SpectralPropagator::for_model(&model).unwrap();
        let id = Operator::identity(model.layout().clone());
        assert!(max_dev(&prop.unitary(0.0), &id) < 1e-12);
        assert!(prop.eigenbasis_defect() < 1e-10);
        for t in [0.1, 1.0, 10.0] {
            assert!(prop.unitarity_defect(t).unwrap() < 1e-10);
        }
        let (t1, t2) = (0.7, 2.9);
        let prod = prop.unitary(t1).mul(&prop.unitary(t2)).unwrap();
        assert!(max_dev(&prop.unitary(t1 + t2), &prod) < 1e-10);
    }

    #[test]
    fn propagator_rejects_bad_input() {
        let layout = SpaceLayout::electronic();
        let m = Mat::from_fn(2, 2, |i, j| c64::new(if i < j { 1.0 } else { 0.0 }, 0.0));
        let skew = Operator::new(layout.clone(), m).unwrap();
        assert!(matches!(SpectralPropagator::new(&skew), Err(Error::NotHermitian { .. })));

        let p = ElectronicParams::new(0.0, 0.0, 1.0).unwrap();
        let model = shared(p, 0.1, 4);
        assert_eq!(
            SpectralPropagator::for_model_with_cap(&model, 7).unwrap_err(),
            Error::DimensionCap { dim: 8, cap: 7 }
        );
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert_eq!(
            evolve_reduced(&model, &site1(), &grid).unwrap_err(),
            Error::LayoutMismatch
        );
    }

    #[test]
    fn rabi_oscillation_without_coupling() {
        let j = 0.37;
        let p = ElectronicParams::new(0.0, 0.0, j).unwrap();
        let model = shared(p, 0.0, 4);
        let grid = TimeGrid::new(20.0, 200).unwrap();
        let traj = evolve_reduced(&model, &thermal(&model, &site1(), 1.0), &grid).unwrap();
        for (k, t) in grid.points().into_iter().enumerate() {
            assert!((traj.rho11(k) - (j * t).cos().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn populations_freeze_without_hopping() {
        let p = ElectronicParams::new(0.3, -0.2, 0.0).unwrap();
        let modes = [ModeSpec::new(1.0, 0.4).unwrap()];
        let model = build_independent_local(&p, &modes, 6, 1.0).unwrap();
        let rho_e = DensityMatrix::diagonal(SpaceLayout::electronic(), &[0.7, 0.3]).unwrap();
        let grid = TimeGrid::new(10.0, 40).unwrap();
        let traj = evolve_reduced(&model, &thermal(&model, &rho_e, 2.0), &grid).unwrap();
        for k in 0..traj.len() {
            assert!((traj.rho11(k) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_matches_explicit_partial_trace() {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let model = build_independent_local(&p, &[ModeSpec::new(1.0, 0.3).unwrap()], 4, 1.0).unwrap();
        let prop = SpectralPropagator::for_model(&model).unwrap();
        let grid = TimeGrid::new(5.0, 5).unwrap();
        let tilted = DensityMatrix::pure(
            SpaceLayout::electronic(),
            &[c64::new(0.6, 0.0), c64::new(0.0, 0.8)],
        )
        .unwrap();
        // thermal bath (fast path) and an entangled pure state (dense path)
        let mut amps = vec![ZERO; model.total_dim()];
        amps[1] = c64::new(0.6, 0.0);
        amps[model.total_dim() - 3] = c64::new(0.0, 0.8);
        let entangled = DensityMatrix::pure(model.layout().clone(), &amps).unwrap();
        for rho0 in [thermal(&model, &tilted, 0.8), entangled] {
            let prepared = prop.prepare(&rho0).unwrap();
            let traj = prepared.reduced_trajectory(&grid).unwrap();
            for (k, t) in grid.points().into_iter().enumerate() {
                let direct = partial_trace(&prepared.state_at(t), &[0]).unwrap();
                for (i, j) in [(0, 0), (1, 1), (0, 1), (1, 0)] {
                    assert!((traj.states()[k].get(i, j) - direct.get(i, j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn expectation_consistency() {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let model = shared(p, 0.2, 8);
        let rho0 = thermal(&model, &site1(), 1.0);
        let id = Operator::identity(model.layout().clone());
        assert!((expectation(&id, &rho0).unwrap() - ONE).norm() < 1e-14);

        let prop = SpectralPropagator::for_model(&model).unwrap();
        let prepared = prop.prepare(&rho0).unwrap();
        let h = model.hamiltonian();
        let e0 = expectation(h, &rho0).unwrap();
        let proj = Operator::from_real(SpaceLayout::electronic(), |i, j| (i == 0 && j == 0) as u8 as f64);
        let proj = embed(&proj, 0, model.layout()).unwrap();
        let grid = TimeGrid::new(30.0, 6).unwrap();
        let traj = prepared.reduced_trajectory(&grid).unwrap();
        for (k, t) in grid.points().into_iter().enumerate() {
            let rho = prepared.state_at(t);
            let e = expectation(h, &rho).unwrap();
            let series = prepared.expectation_series(h, &[t]).unwrap()[0];
            assert!((series - e).norm() < 1e-12);
            assert!(e.im.abs() < 1e-12);
            assert!((e - e0).norm() < 1e-9 * (1.0 + e0.norm()));
            assert!((expectation(&proj, &rho).unwrap().re - traj.rho11(k)).abs() < 1e-12);
        }
        assert_eq!(
            expectation(&id, &site1()).unwrap_err(),
            Error::LayoutMismatch
        );
    }

    #[test]
    fn shared_matches_scaled_independent_at_zero_temperature() {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let modes = [ModeSpec::new(1.0, 0.2).unwrap()];
        let grid = TimeGrid::new(10.0, 50).unwrap();
        let a = build_shared_anticorrelated(&p, &modes, 12).unwrap();
        let b = build_independent_local(&p, &modes, 12, 2f64.sqrt()).unwrap();
        let ta = evolve_reduced(&a, &thermal(&a, &site1(), f64::INFINITY), &grid).unwrap();
        let tb = evolve_reduced(&b, &thermal(&b, &site1(), f64::INFINITY), &grid).unwrap();
        for k in 0..grid.len() {
            let d = ta.states()[k].as_operator().sub(tb.states()[k].as_operator()).unwrap();
            assert!(d.max_abs() < 1e-6, "t = {}: {:e}", grid.time(k), d.max_abs());
        }
    }

    #[test]
    fn closed_form_dimer_matches_propagator() {
        let p = ElectronicParams::new(0.5, -0.1, 0.3).unwrap();
        let model = shared(p, 0.0, 3);
        let rho_e = DensityMatrix::pure(
            SpaceLayout::electronic(),
            &[c64::new(0.6, 0.0), c64::new(0.0, 0.8)],
        )
        .unwrap();
        let grid = TimeGrid::new(25.0, 50).unwrap();
        let exact = evolve_reduced(&model, &thermal(&model, &rho_e, 1.0), &grid).unwrap();
        let closed = electronic_trajectory(&p, &rho_e, &grid).unwrap();
        for k in 0..grid.len() {
            let d = exact.states()[k].as_operator().sub(closed.states()[k].as_operator()).unwrap();
            assert!(d.max_abs() < 1e-12);
        }
        let degenerate = ElectronicParams::new(0.2, 0.2, 0.0).unwrap();
        let still = electronic_evolution(&degenerate, &rho_e, 3.0).unwrap();
        assert!((still.get(0, 1) - rho_e.get(0, 1)).norm() < 1e-15);
    }

    #[test]
    fn unitarity_bound_is_small() {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let prop = SpectralPropagator::for_model(&shared(p, 0.2, 10)).unwrap();
        let bound = prop.unitarity_bound();
        assert!(bound < 1e-12);
        assert!(prop.unitarity_defect(7.3).unwrap() <= bound + 1e-14);
    }

    #[test]
    fn coherence_examples() {
        let p = ElectronicParams::new(0.0, 0.0, 0.4).unwrap();
        let model = shared(p, 0.0, 3);
        let grid = TimeGrid::new(12.0, 24).unwrap();
        let traj = evolve_reduced(&model, &thermal(&model, &plus(), 1.0), &grid).unwrap();
        assert!(coherence_abs(&traj).iter().all(|c| (c - 0.5).abs() < 1e-12));

        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        let model = shared(p, 0.3, 8);
        let traj = evolve_reduced(&model, &thermal(&model, &site1(), 1.0), &grid).unwrap();
        let coh = coherence_abs(&traj);
        assert!(coh[0] < 1e-14);
        for (k, c) in coh.iter().enumerate() {
            assert!(*c <= 0.5);
            assert!(*c <= (traj.rho11(k) * traj.rho22(k)).sqrt() + 1e-12);
            assert!((traj.rho11(k) + traj.rho22(k) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn trajectory_validation() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        assert!(matches!(
            ReducedTrajectory::new(grid, vec![site1()]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        let bad = DensityMatrix::from_parts_unchecked(
            SpaceLayout::electronic(),
            Mat::from_fn(2, 2, |i, j| if i == j { c64::new(0.6, 0.0) } else { ZERO }),
        );
        assert!(matches!(
            ReducedTrajectory::new(grid, vec![site1(), bad]),
            Err(Error::InvalidState(_))
        ));
    }
}
