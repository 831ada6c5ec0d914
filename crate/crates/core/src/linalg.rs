//! Small dense-matrix helpers shared by the physics modules.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub(crate) fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub(crate) fn is_real(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

/// `max |A - A†| / max |A|`, zero for the zero matrix.
pub(crate) fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut defect = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        0.0
    } else {
        defect / scale
    }
}

/// Eigenvalues of a 2×2 Hermitian matrix, ascending.
fn eigenvalues_2x2(m: MatRef<'_, c64>) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let c = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + c.norm_sqr()).sqrt();
    [mean - radius, mean + radius]
}

/// Ascending eigenvalues of a Hermitian matrix (only the lower triangle is read).
pub(crate) fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)].re]),
        2 => Ok(eigenvalues_2x2(m).to_vec()),
        n if is_real(m) => {
            let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
            real.self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Eigendecomposition(format!("{e:?}")))
        }
        _ => m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigendecomposition(format!("{e:?}"))),
    }
}

/// Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix.
/// Real symmetric input takes the real solver.
pub(crate) fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    let err = |e| Error::Eigendecomposition(format!("{e:?}"));
    if is_real(m) {
        let real = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = real.self_adjoint_eigen(Side::Lower).map_err(err)?;
        let values = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        Ok((values, Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0))))
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(err)?;
        let values = (0..n).map(|k| evd.S()[k].re).collect();
        Ok((values, evd.U().to_owned()))
    }
}

/// Trace norm of a Hermitian matrix.
pub(crate) fn hermitian_trace_norm(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 2 {
        // closed form keeps T(ρ, σ) = T(σ, ρ) bit-for-bit
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let c = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
        let radius = (0.25 * (a - d) * (a - d) + c.norm_sqr()).sqrt();
        let mean = 0.5 * (a + d);
        return Ok(if mean.abs() >= radius {
            2.0 * mean.abs()
        } else {
            2.0 * radius
        });
    }
    Ok(hermitian_eigenvalues(m)?.iter().map(|v| v.abs()).sum())
}

pub(crate) fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows()).fold(ZERO, |acc, i| acc + m[(i, i)])
}
