//! Hamiltonians of the dimer in each bath picture.
//!
//! Units: ħ = 1, so site energies, electronic coupling, mode frequencies and
//! exciton–phonon couplings share one frequency unit. Every model lives on
//! `[Electronic, Fock…]` and every exciton–phonon term is diagonal in the
//! site basis, `(w₁|1⟩⟨1| + w₂|2⟩⟨2|) ⊗ (b† + b)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::spaces::{Factor, Operator, SpaceLayout};

/// Site energies and electronic coupling of the bare dimer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElectronicParams {
    pub eps1: f64,
    pub eps2: f64,
    pub j: f64,
}

impl ElectronicParams {
    pub fn new(eps1: f64, eps2: f64, j: f64) -> Result<Self> {
        for (name, v) in [("eps1", eps1), ("eps2", eps2), ("j", j)] {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        Ok(Self { eps1, eps2, j })
    }

    /// The same dimer with sites 1 and 2 relabeled.
    pub fn swapped(&self) -> Self {
        Self {
            eps1: self.eps2,
            eps2: self.eps1,
            j: self.j,
        }
    }
}

/// `[[eps1, j], [j, eps2]]` in the basis `{|1⟩, |2⟩}`.
pub fn electronic_hamiltonian(p: &ElectronicParams) -> Operator {
    let m = [[p.eps1, p.j], [p.j, p.eps2]];
    Operator::from_real(SpaceLayout::electronic(), |i, k| m[i][k])
}

/// One harmonic mode: frequency `omega` and exciton–phonon coupling `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSpec {
    pub omega: f64,
    pub g: f64,
}

impl ModeSpec {
    pub fn new(omega: f64, g: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::param("omega", format!("must be positive, got {omega}")));
        }
        if !g.is_finite() {
            return Err(Error::param("g", format!("must be finite, got {g}")));
        }
        Ok(Self { omega, g })
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        Self { omega: self.omega, g }
    }
}

/// What a Fock factor represents in its bath picture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BathRole {
    /// One mode coupled to both sites through `|1⟩⟨1| − |2⟩⟨2|`.
    Shared,
    LocalSite1,
    LocalSite2,
    /// Relative mode `b = (c₁ − c₂)/√2` of the rotated picture.
    Relative,
    /// Center-of-mass mode `B = (c₁ + c₂)/√2`, coupled through the identity.
    CenterOfMass,
}

impl fmt::Display for BathRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BathRole::Shared => "shared",
            BathRole::LocalSite1 => "local-site-1",
            BathRole::LocalSite2 => "local-site-2",
            BathRole::Relative => "relative-b",
            BathRole::CenterOfMass => "center-of-mass-B",
        })
    }
}

/// Metadata for one Fock factor of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathFactor {
    pub role: BathRole,
    /// Index ξ of the mode this factor derives from.
    pub mode: usize,
    pub omega: f64,
    /// Weights `[w₁, w₂]` of the coupling operator `(w₁|1⟩⟨1| + w₂|2⟩⟨2|)(b† + b)`.
    pub coupling: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    SharedAntiCorrelated,
    IndependentLocal { coupling_scale: f64 },
    Transformed,
    CorrelatedAlpha { alpha: f64 },
    ReducedEffective { alpha: f64 },
}

impl ModelKind {
    /// Independent local baths with the `√2 g` coupling that reproduces the
    /// shared model.
    pub fn independent() -> Self {
        ModelKind::IndependentLocal {
            coupling_scale: SQRT_2,
        }
    }

    /// Number of Fock factors for `n_modes` modes.
    pub fn num_factors(&self, n_modes: usize) -> usize {
        match self {
            ModelKind::SharedAntiCorrelated | ModelKind::ReducedEffective { .. } => n_modes,
            _ => 2 * n_modes,
        }
    }

    /// Total Hilbert-space dimension, `None` on overflow.
    pub fn total_dim(&self, n_modes: usize, n_max: usize) -> Option<usize> {
        let k = u32::try_from(self.num_factors(n_modes)).ok()?;
        n_max.checked_pow(k)?.checked_mul(2)
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            ModelKind::CorrelatedAlpha { alpha } | ModelKind::ReducedEffective { alpha } => {
                Some(alpha)
            }
            _ => None,
        }
    }

    /// Fock factors in layout order.
    pub fn bath_factors(&self, modes: &[ModeSpec]) -> Vec<BathFactor> {
        let mut out = Vec::with_capacity(self.num_factors(modes.len()));
        for (xi, m) in modes.iter().enumerate() {
            let factor = |role, coupling| BathFactor {
                role,
                mode: xi,
                omega: m.omega,
                coupling,
            };
            let g = m.g;
            match *self {
                ModelKind::SharedAntiCorrelated => out.push(factor(BathRole::Shared, [g, -g])),
                ModelKind::IndependentLocal { coupling_scale } => {
                    let s = coupling_scale * g;
                    out.push(factor(BathRole::LocalSite1, [s, 0.0]));
                    out.push(factor(BathRole::LocalSite2, [0.0, s]));
                }
                ModelKind::Transformed => {
                    out.push(factor(BathRole::Relative, [g, -g]));
                    out.push(factor(BathRole::CenterOfMass, [g, g]));
                }
                ModelKind::CorrelatedAlpha { alpha } => {
                    out.push(factor(BathRole::LocalSite1, [g, alpha * g]));
                    out.push(factor(BathRole::LocalSite2, [alpha * g, g]));
                }
                ModelKind::ReducedEffective { alpha } => {
                    let e = effective_coupling(g, alpha);
                    out.push(factor(BathRole::Relative, [e, -e]));
                }
            }
        }
        out
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::SharedAntiCorrelated => write!(f, "shared"),
            ModelKind::IndependentLocal { coupling_scale } => {
                write!(f, "independent(scale={coupling_scale})")
            }
            ModelKind::Transformed => write!(f, "transformed"),
            ModelKind::CorrelatedAlpha { alpha } => write!(f, "correlated(alpha={alpha})"),
            ModelKind::ReducedEffective { alpha } => write!(f, "reduced(alpha={alpha})"),
        }
    }
}

/// A dimer Hamiltonian together with the data it was built from.
#[derive(Clone, Debug)]
pub struct TotalModel {
    kind: ModelKind,
    params: ElectronicParams,
    modes: Vec<ModeSpec>,
    n_max: usize,
    factors: Vec<BathFactor>,
    hamiltonian: Operator,
}

impl TotalModel {
    pub fn build(
        kind: ModelKind,
        params: &ElectronicParams,
        modes: &[ModeSpec],
        n_max: usize,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyModes);
        }
        if let ModelKind::IndependentLocal { coupling_scale } = kind {
            if !coupling_scale.is_finite() {
                return Err(Error::param("coupling_scale", "must be finite"));
            }
        }
        if let Some(alpha) = kind.alpha() {
            if !alpha.is_finite() {
                return Err(Error::param("alpha", format!("must be finite, got {alpha}")));
            }
        }
        let factors = kind.bath_factors(modes);
        let mut layout_factors = vec![Factor::Electronic];
        layout_factors.extend(factors.iter().map(|_| Factor::Fock { n_max }));
        let layout = SpaceLayout::new(layout_factors)?;
        let hamiltonian = assemble(&layout, params, &factors, n_max);
        Ok(Self {
            kind,
            params: *params,
            modes: modes.to_vec(),
            n_max,
            factors,
            hamiltonian,
        })
    }

    /// The same model at a different truncation.
    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::build(self.kind, &self.params, &self.modes, n_max)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &ElectronicParams {
        &self.params
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.hamiltonian.layout()
    }

    pub fn total_dim(&self) -> usize {
        self.layout().total_dim()
    }

    /// Fock-factor metadata; entry `k` describes layout factor `k + 1`.
    pub fn bath_partition(&self) -> &[BathFactor] {
        &self.factors
    }

    /// Layout indices of the factors with the given role.
    pub fn factor_indices(&self, role: BathRole) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == role)
            .map(|(k, _)| k + 1)
            .collect()
    }
}

/// Direct assembly on the product basis, O(dim · factors).
fn assemble(
    layout: &SpaceLayout,
    p: &ElectronicParams,
    factors: &[BathFactor],
    n_max: usize,
) -> Operator {
    let n = layout.total_dim();
    let bath = layout.bath_dim();
    let mut h = Mat::from_fn(n, n, |_, _| ZERO);
    let eps = [p.eps1, p.eps2];
    // strides of the Fock factors inside the bath index
    let mut strides = vec![1usize; factors.len()];
    for f in (0..factors.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * n_max;
    }
    for beta in 0..bath {
        let mut occupation_energy = 0.0;
        for (f, factor) in factors.iter().enumerate() {
            let level = (beta / strides[f]) % n_max;
            occupation_energy += factor.omega * level as f64;
        }
        for a in 0..2 {
            let i = a * bath + beta;
            h[(i, i)].re = eps[a] + occupation_energy;
            for (f, factor) in factors.iter().enumerate() {
                let level = (beta / strides[f]) % n_max;
                let w = factor.coupling[a];
                if level + 1 < n_max && w != 0.0 {
                    let k = i + strides[f];
                    let v = w * ((level + 1) as f64).sqrt();
                    h[(i, k)].re = v;
                    h[(k, i)].re = v;
                }
            }
        }
        if p.j != 0.0 {
            h[(beta, bath + beta)].re = p.j;
            h[(bath + beta, beta)].re = p.j;
        }
    }
    Operator::new(layout.clone(), h).expect("assembled with layout dimensions")
}

/// One shared mode per ξ coupled through `g_ξ(|1⟩⟨1| − |2⟩⟨2|)`.
pub fn build_shared_anticorrelated(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    n_max: usize,
) -> Result<TotalModel> {
    TotalModel::build(ModelKind::SharedAntiCorrelated, p, modes, n_max)
}

/// Two local modes per ξ, each coupled to its own site with `coupling_scale · g_ξ`.
/// Factors are ordered (site 1, ξ₁), (site 2, ξ₁), (site 1, ξ₂), …
pub fn build_independent_local(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    n_max: usize,
    coupling_scale: f64,
) -> Result<TotalModel> {
    TotalModel::build(ModelKind::IndependentLocal { coupling_scale }, p, modes, n_max)
}

/// Relative (anti-correlated) and center-of-mass (identity-coupled) mode per ξ.
pub fn build_transformed(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    n_max: usize,
) -> Result<TotalModel> {
    TotalModel::build(ModelKind::Transformed, p, modes, n_max)
}

/// Two modes per ξ with cross-site weight `alpha`.
pub fn build_correlated_alpha(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    n_max: usize,
    alpha: f64,
) -> Result<TotalModel> {
    TotalModel::build(ModelKind::CorrelatedAlpha { alpha }, p, modes, n_max)
}

/// Shared model with each coupling replaced by [`effective_coupling`].
pub fn build_reduced_effective(
    p: &ElectronicParams,
    modes: &[ModeSpec],
    n_max: usize,
    alpha: f64,
) -> Result<TotalModel> {
    TotalModel::build(ModelKind::ReducedEffective { alpha }, p, modes, n_max)
}

/// `g (1 − α) / √2`.
pub fn effective_coupling(g: f64, alpha: f64) -> f64 {
    g * (1.0 - alpha) * FRAC_1_SQRT_2
}

/// Drude–Lorentz spectral density `J(ω) = 2λγω / (ω² + γ²)`.
pub fn drude_spectral_density(omega: f64, lambda_reorg: f64, gamma_cutoff: f64) -> f64 {
    2.0 * lambda_reorg * gamma_cutoff * omega / (omega * omega + gamma_cutoff * gamma_cutoff)
}

/// Discretizes the Drude–Lorentz density on `m` equally spaced frequencies
/// `ω_k = k Δω`, `k = 1..=m`, `Δω = omega_max / m`, with `g_k = √(J(ω_k) Δω / π)`.
pub fn ohmic_drude_modes(
    lambda_reorg: f64,
    gamma_cutoff: f64,
    m: usize,
    omega_max: f64,
) -> Result<Vec<ModeSpec>> {
    if !(lambda_reorg.is_finite() && lambda_reorg >= 0.0) {
        return Err(Error::param("lambda", format!("must be non-negative, got {lambda_reorg}")));
    }
    if !(gamma_cutoff.is_finite() && gamma_cutoff > 0.0) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma_cutoff}")));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::param("omega_max", format!("must be positive, got {omega_max}")));
    }
    if m == 0 {
        return Err(Error::param("m", "need at least one mode"));
    }
    let dw = omega_max / m as f64;
    (1..=m)
        .map(|k| {
            let omega = if k == m { omega_max } else { k as f64 * dw };
            let g = (drude_spectral_density(omega, lambda_reorg, gamma_cutoff) * dw / PI).sqrt();
            ModeSpec::new(omega, g)
        })
        .collect()
}
