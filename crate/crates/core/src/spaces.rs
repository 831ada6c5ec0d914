//! Truncated Fock spaces, the single-exciton space and their tensor products.
//!
//! Basis ordering is row-major over factors: the first factor is the most
//! significant digit of a composite index. Model spaces always carry the
//! electronic factor first, followed by Fock factors in declaration order.

use std::fmt;

use faer::{c64, linalg::matmul::matmul, Accum, Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};

/// Tolerances applied when validating states and Hermitian operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_FLOOR: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    /// The two single-exciton states |1⟩, |2⟩.
    Electronic,
    /// A bosonic mode truncated to levels `0..n_max`.
    Fock { n_max: usize },
}

impl Factor {
    pub fn dim(&self) -> usize {
        match *self {
            Factor::Electronic => 2,
            Factor::Fock { n_max } => n_max,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Electronic => write!(f, "electronic"),
            Factor::Fock { n_max } => write!(f, "fock({n_max})"),
        }
    }
}

/// Ordered list of tensor factors.
///
/// A layout holds at most one electronic factor and, when present, it is the
/// first one. Full model spaces always have it; marginals obtained by tracing
/// out the electronic factor (a bath state, say) do not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidLayout("no factors".into()));
        }
        for (k, factor) in factors.iter().enumerate() {
            match factor {
                Factor::Electronic if k != 0 => {
                    return Err(Error::InvalidLayout(format!(
                        "electronic factor at position {k}, must be first"
                    )))
                }
                Factor::Fock { n_max } if *n_max < 2 => {
                    return Err(Error::InvalidLayout(format!(
                        "fock factor {k} has n_max = {n_max}, need at least 2"
                    )))
                }
                _ => {}
            }
        }
        let total_dim = factors.iter().map(Factor::dim).product();
        Ok(Self { factors, total_dim })
    }

    /// `[Electronic, Fock(n_max) × n_modes]`.
    pub fn model(n_fock: usize, n_max: usize) -> Result<Self> {
        let mut factors = vec![Factor::Electronic];
        factors.extend(std::iter::repeat_n(Factor::Fock { n_max }, n_fock));
        Self::new(factors)
    }

    pub fn electronic() -> Self {
        Self {
            factors: vec![Factor::Electronic],
            total_dim: 2,
        }
    }

    pub fn fock(n_max: usize) -> Result<Self> {
        Self::new(vec![Factor::Fock { n_max }])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn has_electronic(&self) -> bool {
        self.factors.first() == Some(&Factor::Electronic)
    }

    /// Product of the dimensions of every factor except the electronic one.
    pub fn bath_dim(&self) -> usize {
        if self.has_electronic() {
            self.total_dim / 2
        } else {
            self.total_dim
        }
    }

    /// Layout of the factors at `indices` (sorted, deduplicated) in original order.
    pub fn sublayout(&self, indices: &[usize]) -> Result<Self> {
        let factors = indices.iter().map(|&k| self.factors[k]).collect();
        Self::new(factors)
    }

    /// Concatenation `self ⊗ other`.
    pub fn tensor(&self, other: &SpaceLayout) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Self::new(factors)
    }
}

impl fmt::Display for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Index bookkeeping for splitting a layout into kept and traced factors.
///
/// `full_index[t * kept_dim + k]` is the composite index whose kept part is
/// `k` and whose traced part is `t`.
pub(crate) struct FactorSplit {
    pub kept_dim: usize,
    pub traced_dim: usize,
    pub full_index: Vec<usize>,
}

impl FactorSplit {
    pub fn new(layout: &SpaceLayout, keep: &[usize]) -> Self {
        let dims: Vec<usize> = layout.factors.iter().map(Factor::dim).collect();
        let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
        let traced_dim = layout.total_dim / kept_dim;
        let mut full_index = vec![0usize; layout.total_dim];
        let mut digits = vec![0usize; dims.len()];
        for i in 0..layout.total_dim {
            let (mut kept, mut traced) = (0usize, 0usize);
            for (f, &d) in dims.iter().enumerate() {
                if keep.contains(&f) {
                    kept = kept * d + digits[f];
                } else {
                    traced = traced * d + digits[f];
                }
            }
            full_index[traced * kept_dim + kept] = i;
            // advance the row-major odometer
            for f in (0..dims.len()).rev() {
                digits[f] += 1;
                if digits[f] < dims[f] {
                    break;
                }
                digits[f] = 0;
            }
        }
        Self {
            kept_dim,
            traced_dim,
            full_index,
        }
    }

    pub fn index(&self, kept: usize, traced: usize) -> usize {
        self.full_index[traced * self.kept_dim + kept]
    }
}

/// A dense complex operator on a [`SpaceLayout`].
#[derive(Clone, Debug)]
pub struct Operator {
    layout: SpaceLayout,
    matrix: CMat,
}

impl Operator {
    pub fn new(layout: SpaceLayout, matrix: CMat) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if matrix.nrows() != n {
                    matrix.nrows()
                } else {
                    matrix.ncols()
                },
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn from_real(layout: SpaceLayout, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = layout.total_dim();
        let matrix = Mat::from_fn(n, n, |i, j| c64::new(f(i, j), 0.0));
        Self { layout, matrix }
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout,
            matrix: Mat::zeros(n, n),
        }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout,
            matrix: Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO }),
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.matrix[(i, j)]
    }

    pub fn adjoint(&self) -> Operator {
        Self {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint().to_owned(),
        }
    }

    fn same_layout(&self, other: &Operator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn scale(&self, s: c64) -> Operator {
        let n = self.dim();
        Self {
            layout: self.layout.clone(),
            matrix: Mat::from_fn(n, n, |i, j| s * self.matrix[(i, j)]),
        }
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_layout(other)?;
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        matmul(&mut out, Accum::Replace, &self.matrix, &other.matrix, ONE, Par::Seq);
        Ok(Self {
            layout: self.layout.clone(),
            matrix: out,
        })
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.matrix.as_ref())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.matrix.as_ref())
    }

    /// `max |A - A†|` relative to the largest entry of `A`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix.as_ref())
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    /// Ascending eigenvalues; the operator must be Hermitian.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let defect = self.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        linalg::hermitian_eigenvalues(self.matrix.as_ref())
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        let sv = self
            .matrix
            .singular_values()
            .map_err(|e| Error::Eigendecomposition(format!("{e:?}")))?;
        Ok(sv.into_iter().fold(0.0, f64::max))
    }

    /// Restriction to the index block `[start, start + len)` on both sides.
    pub fn block(&self, start: usize, len: usize) -> CMat {
        self.matrix.submatrix(start, start, len, len).to_owned()
    }
}

/// A Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(layout: SpaceLayout, matrix: CMat) -> Result<Self> {
        Self::from_operator(Operator::new(layout, matrix)?)
    }

    pub fn from_operator(op: Operator) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {defect:e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = linalg::hermitian_eigenvalues(op.matrix())?
            .first()
            .copied()
            .unwrap_or(0.0);
        if min < POSITIVITY_FLOOR {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { op })
    }

    /// Wraps a matrix known to be a state by construction.
    pub(crate) fn from_parts_unchecked(layout: SpaceLayout, matrix: CMat) -> Self {
        Self {
            op: Operator { layout, matrix },
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn pure(layout: SpaceLayout, amplitudes: &[c64]) -> Result<Self> {
        let n = layout.total_dim();
        if amplitudes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "amplitudes have squared norm {norm}"
            )));
        }
        let matrix = Mat::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self::from_parts_unchecked(layout, matrix))
    }

    /// Diagonal state from non-negative weights summing to one.
    pub fn diagonal(layout: SpaceLayout, weights: &[f64]) -> Result<Self> {
        let n = layout.total_dim();
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidState("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        let matrix = Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(weights[i], 0.0)
            } else {
                ZERO
            }
        });
        Ok(Self::from_parts_unchecked(layout, matrix))
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.op.layout()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.op.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> c64 {
        self.op.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.op.hermiticity_defect()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(self.matrix())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        let m = self.matrix();
        let n = m.nrows();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += m[(i, j)].norm_sqr();
            }
        }
        acc
    }

    /// −Tr ρ ln ρ, ignoring eigenvalues below 1e-15.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .filter(|&p| p > 1e-15)
            .map(|p| -p * p.ln())
            .sum())
    }
}

/// Truncated annihilation operator with `a[n-1, n] = √n`.
pub fn annihilation_matrix(n_max: usize) -> Result<Operator> {
    let layout = SpaceLayout::fock(n_max)?;
    Ok(Operator::from_real(layout, |i, j| {
        if j == i + 1 {
            (j as f64).sqrt()
        } else {
            0.0
        }
    }))
}

/// `a† a` on a single truncated mode.
pub fn number_operator(n_max: usize) -> Result<Operator> {
    let layout = SpaceLayout::fock(n_max)?;
    Ok(Operator::from_real(layout, |i, j| {
        if i == j {
            i as f64
        } else {
            0.0
        }
    }))
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on factor `factor_index`.
pub fn embed(op: &Operator, factor_index: usize, layout: &SpaceLayout) -> Result<Operator> {
    let len = layout.num_factors();
    if factor_index >= len {
        return Err(Error::FactorOutOfRange {
            index: factor_index,
            len,
        });
    }
    let dims: Vec<usize> = layout.factors().iter().map(Factor::dim).collect();
    let d = dims[factor_index];
    if op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: op.dim(),
        });
    }
    let left: usize = dims[..factor_index].iter().product();
    let right: usize = dims[factor_index + 1..].iter().product();
    let n = layout.total_dim();
    let mut matrix = Mat::<c64>::zeros(n, n);
    for b in 0..d {
        for a in 0..d {
            let v = op.get(a, b);
            if v == ZERO {
                continue;
            }
            for l in 0..left {
                for r in 0..right {
                    let i = (l * d + a) * right + r;
                    let j = (l * d + b) * right + r;
                    matrix[(i, j)] = v;
                }
            }
        }
    }
    Ok(Operator {
        layout: layout.clone(),
        matrix,
    })
}

/// Kronecker product `a ⊗ b` on the concatenated layout.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    let layout = a.layout().tensor(b.layout())?;
    let (da, db) = (a.dim(), b.dim());
    let matrix = Mat::from_fn(da * db, da * db, |i, j| {
        a.get(i / db, j / db) * b.get(i % db, j % db)
    });
    Ok(Operator { layout, matrix })
}

/// `AB − BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.mul(b)?.sub(&b.mul(a)?)
}

fn normalize_keep(layout: &SpaceLayout, keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let len = layout.num_factors();
    if let Some(&index) = keep.iter().find(|&&k| k >= len) {
        return Err(Error::FactorOutOfRange { index, len });
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    Ok(keep)
}

/// Traces out every factor not listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let keep = normalize_keep(rho.layout(), keep)?;
    let layout = rho.layout().sublayout(&keep)?;
    let split = FactorSplit::new(rho.layout(), &keep);
    let m = rho.matrix();
    let dk = split.kept_dim;
    let mut out = Mat::<c64>::zeros(dk, dk);
    for t in 0..split.traced_dim {
        for b in 0..dk {
            let j = split.index(b, t);
            for a in 0..dk {
                out[(a, b)] += m[(split.index(a, t), j)];
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(layout, out))
}

/// `ρ_K ⊗ ρ_T` arranged back into the factor order of `layout`, where `ρ_K`
/// lives on the factors `keep` and `ρ_T` on the rest.
pub fn recombine(
    layout: &SpaceLayout,
    keep: &[usize],
    kept: &DensityMatrix,
    traced: &DensityMatrix,
) -> Result<DensityMatrix> {
    let keep = normalize_keep(layout, keep)?;
    let split = FactorSplit::new(layout, &keep);
    if kept.dim() != split.kept_dim {
        return Err(Error::DimensionMismatch {
            expected: split.kept_dim,
            actual: kept.dim(),
        });
    }
    if traced.dim() != split.traced_dim {
        return Err(Error::DimensionMismatch {
            expected: split.traced_dim,
            actual: traced.dim(),
        });
    }
    let n = layout.total_dim();
    let mut matrix = Mat::<c64>::zeros(n, n);
    for tj in 0..split.traced_dim {
        for ti in 0..split.traced_dim {
            let w = traced.get(ti, tj);
            for kj in 0..split.kept_dim {
                let j = split.index(kj, tj);
                for ki in 0..split.kept_dim {
                    matrix[(split.index(ki, ti), j)] = kept.get(ki, kj) * w;
                }
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(layout.clone(), matrix))
}
