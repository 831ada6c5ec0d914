//! Thermal initial states of the phonon factors and Fock truncation choice.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::models::{ModeSpec, TotalModel};
use crate::spaces::{DensityMatrix, SpaceLayout};

/// Levels added on top of the thermally occupied ones. Exciton–phonon
/// coupling displaces population above the thermal support during dynamics.
pub const TRUNCATION_HEADROOM: usize = 4;

/// Inverse temperature and truncation tolerance for the phonon baths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSpec {
    beta: f64,
    tail_tol: f64,
    n_max_override: Option<usize>,
}

impl ThermalSpec {
    /// `beta` may be `f64::INFINITY` (ground state); `tail_tol` in (0, 1).
    pub fn new(beta: f64, tail_tol: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::param("tail_tol", format!("must lie in (0, 1), got {tail_tol}")));
        }
        Ok(Self {
            beta,
            tail_tol,
            n_max_override: None,
        })
    }

    /// Fixes every Fock factor to `n_max` levels instead of choosing from the tail.
    pub fn with_n_max_override(mut self, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::param("n_max_override", format!("must be at least 2, got {n_max}")));
        }
        self.n_max_override = Some(n_max);
        Ok(self)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn n_max_override(&self) -> Option<usize> {
        self.n_max_override
    }

    /// One truncation for every factor: the override when set, otherwise the
    /// largest [`choose_truncation`] over the mode frequencies.
    pub fn truncation_for(&self, modes: &[ModeSpec]) -> usize {
        self.n_max_override.unwrap_or_else(|| {
            modes
                .iter()
                .map(|m| choose_truncation(m.omega, self))
                .max()
                .unwrap_or(TRUNCATION_HEADROOM)
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::param("beta", format!("must be positive or +inf, got {beta}")));
    }
    Ok(())
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::param("omega", format!("must be positive, got {omega}")));
    }
    Ok(())
}

/// Normalized Boltzmann weights `p_n ∝ e^{−βωn}` over levels `0..n_max`.
pub fn gibbs_weights(omega: f64, beta: f64, n_max: usize) -> Result<Vec<f64>> {
    check_omega(omega)?;
    check_beta(beta)?;
    if n_max < 2 {
        return Err(Error::param("n_max", format!("must be at least 2, got {n_max}")));
    }
    let mut w: Vec<f64> = if beta.is_infinite() {
        (0..n_max).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        (0..n_max).map(|n| (-beta * omega * n as f64).exp()).collect()
    };
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|p| *p /= z);
    Ok(w)
}

/// `e^{−βω a†a} / Tr e^{−βω a†a}` on a truncated mode.
pub fn gibbs_state(omega: f64, beta: f64, n_max: usize) -> Result<DensityMatrix> {
    let w = gibbs_weights(omega, beta, n_max)?;
    DensityMatrix::diagonal(SpaceLayout::fock(n_max)?, &w)
}

/// Bose–Einstein occupation `1 / (e^{βω} − 1)`.
pub fn thermal_occupation(omega: f64, beta: f64) -> f64 {
    (beta * omega).exp_m1().recip()
}

/// Smallest `n` whose untruncated Gibbs tail `e^{−βωn}` is below the
/// tolerance, plus [`TRUNCATION_HEADROOM`]. At zero temperature the thermal
/// part is empty and only the headroom remains.
pub fn choose_truncation(omega: f64, spec: &ThermalSpec) -> usize {
    let x = spec.beta * omega;
    let support = if x.is_infinite() {
        0
    } else {
        let tail = |n: usize| (-x * n as f64).exp();
        let mut n = ((1.0 / spec.tail_tol).ln() / x).floor() as usize + 1;
        while n > 1 && tail(n - 1) < spec.tail_tol {
            n -= 1;
        }
        while tail(n) >= spec.tail_tol {
            n += 1;
        }
        n
    };
    (support + TRUNCATION_HEADROOM).max(TRUNCATION_HEADROOM)
}

/// Diagonal of the product Gibbs state over all bath factors of `model`.
pub fn bath_weights(model: &TotalModel, beta: f64) -> Result<Vec<f64>> {
    let mut weights = vec![1.0];
    for factor in model.bath_partition() {
        let w = gibbs_weights(factor.omega, beta, model.n_max())?;
        weights = weights
            .iter()
            .flat_map(|a| w.iter().map(move |b| a * b))
            .collect();
    }
    Ok(weights)
}

/// `ρ_e(0) ⊗ ⨂_f ρ_th(ω_f, β)` on the model's layout.
pub fn initial_state(
    rho_e0: &DensityMatrix,
    model: &TotalModel,
    spec: &ThermalSpec,
) -> Result<DensityMatrix> {
    if rho_e0.layout() != &SpaceLayout::electronic() {
        return Err(Error::LayoutMismatch);
    }
    let weights = bath_weights(model, spec.beta)?;
    let bath = weights.len();
    let n = 2 * bath;
    let mut m = Mat::from_fn(n, n, |_, _| ZERO);
    for a in 0..2 {
        for b in 0..2 {
            let e = rho_e0.get(a, b);
            for (k, &p) in weights.iter().enumerate() {
                m[(a * bath + k, b * bath + k)] = e * p;
            }
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(model.layout().clone(), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_transformed, ElectronicParams};
    use crate::spaces::{commutator, number_operator, partial_trace};
    use faer::c64;

    #[test]
    fn gibbs_limits() {
        let g = gibbs_state(1.0, f64::INFINITY, 5).unwrap();
        assert_eq!(g.get(0, 0).re, 1.0);
        assert!((1..5).all(|n| g.get(n, n).re == 0.0));

        let hot = gibbs_state(1.0, 1e-12, 4).unwrap();
        assert!((0..4).all(|n| (hot.get(n, n).re - 0.25).abs() < 1e-11));

        let g = gibbs_state(1.0, 1.0, 40).unwrap();
        assert!((g.get(1, 1).re / g.get(0, 0).re - 0.367_879_4).abs() < 1e-7);
        assert!((g.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gibbs_rejects_bad_parameters() {
        assert!(gibbs_state(1.0, 0.0, 4).is_err());
        assert!(gibbs_state(1.0, -1.0, 4).is_err());
        assert!(gibbs_state(1.0, f64::NAN, 4).is_err());
        assert!(gibbs_state(0.0, 1.0, 4).is_err());
        assert!(gibbs_state(1.0, 1.0, 1).is_err());
        assert!(ThermalSpec::new(1.0, 0.0).is_err());
        assert!(ThermalSpec::new(1.0, 1.0).is_err());
        assert!(ThermalSpec::new(-2.0, 0.1).is_err());
    }

    #[test]
    fn gibbs_commutes_with_number_operator() {
        let g = gibbs_state(0.8, 1.3, 7).unwrap();
        let c = commutator(g.as_operator(), &number_operator(7).unwrap()).unwrap();
        assert!(c.max_abs() < 1e-13);
    }

    #[test]
    fn occupation_values() {
        assert_eq!(thermal_occupation(1.0, f64::INFINITY), 0.0);
        assert!((thermal_occupation(1.0, 1.0) - 0.581_976_7).abs() < 1e-7);
        assert!((thermal_occupation(1.0, 0.1) - 9.508).abs() < 1e-3);
    }

    #[test]
    fn truncation_choice() {
        let cold = ThermalSpec::new(f64::INFINITY, 1e-8).unwrap();
        assert_eq!(choose_truncation(1.0, &cold), 4);

        // e^{-18} ≈ 1.5e-8 ≥ 1e-8 > e^{-19} ≈ 5.6e-9
        let spec = ThermalSpec::new(1.0, 1e-8).unwrap();
        assert_eq!(choose_truncation(1.0, &spec), 23);

        let mut last = 0;
        for tol in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12] {
            let n = choose_truncation(0.7, &ThermalSpec::new(1.3, tol).unwrap());
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn tail_tolerance_bounds_truncation_error() {
        for (omega, beta, tol) in [(1.0, 1.0, 1e-8), (0.8, 1.0, 1e-6), (2.0, 0.3, 1e-5)] {
            let spec = ThermalSpec::new(beta, tol).unwrap();
            let n = choose_truncation(omega, &spec);
            let small = gibbs_weights(omega, beta, n).unwrap();
            let large = gibbs_weights(omega, beta, 2 * n).unwrap();
            // both diagonal in the same basis: trace distance is half the l1 gap
            let dist: f64 = 0.5
                * (0..2 * n)
                    .map(|k| (small.get(k).copied().unwrap_or(0.0) - large[k]).abs())
                    .sum::<f64>();
            assert!(dist < tol, "{dist:e} ≥ {tol:e}");
        }
    }

    fn transformed_fixture() -> TotalModel {
        let p = ElectronicParams::new(0.5, 0.0, 0.5).unwrap();
        build_transformed(&p, &[ModeSpec::new(1.0, 0.2).unwrap()], 4).unwrap()
    }

    #[test]
    fn initial_state_is_a_product() {
        let model = transformed_fixture();
        let rho_e0 = DensityMatrix::diagonal(SpaceLayout::electronic(), &[1.0, 0.0]).unwrap();

        let cold = ThermalSpec::new(f64::INFINITY, 1e-8).unwrap();
        let pure = initial_state(&rho_e0, &model, &cold).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-15);

        let spec = ThermalSpec::new(1.0, 1e-8).unwrap();
        let rho = initial_state(&rho_e0, &model, &spec).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-13);
        assert!(rho.min_eigenvalue().unwrap() >= -1e-15);
        let el = partial_trace(&rho, &[0]).unwrap();
        assert_eq!(el.get(0, 0).re, 1.0);
        assert_eq!(el.get(1, 1).re, 0.0);

        // mutual information between every pair of factors vanishes
        let s = |keep: &[usize]| partial_trace(&rho, keep).unwrap().von_neumann_entropy().unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let mi = s(&[a]) + s(&[b]) - s(&[a, b]);
            assert!(mi.abs() < 1e-12, "I({a}:{b}) = {mi:e}");
        }
    }

    #[test]
    fn initial_state_keeps_electronic_coherence() {
        let model = transformed_fixture();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(
            SpaceLayout::electronic(),
            &[c64::new(h, 0.0), c64::new(0.0, h)],
        )
        .unwrap();
        let spec = ThermalSpec::new(0.5, 1e-8).unwrap();
        let rho = initial_state(&plus, &model, &spec).unwrap();
        let el = partial_trace(&rho, &[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((el.get(i, j) - plus.get(i, j)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn initial_state_needs_electronic_input() {
        let model = transformed_fixture();
        let spec = ThermalSpec::new(1.0, 1e-8).unwrap();
        let wrong = gibbs_state(1.0, 1.0, 2).unwrap();
        assert_eq!(
            initial_state(&wrong, &model, &spec).unwrap_err(),
            Error::LayoutMismatch
        );
    }
}
