use dimerbath::c64;
use dimerbath::dynamics::{electronic_evolution, SpectralPropagator};
use dimerbath::equivalence::{spectrum_equivalence, trace_distance};
use dimerbath::models::{
    build_shared_anticorrelated, effective_coupling, ElectronicParams, ModeSpec, ModelKind, TotalModel,
};
use dimerbath::spaces::{partial_trace, DensityMatrix, SpaceLayout};
use dimerbath::thermal::{gibbs_weights, initial_state, ThermalSpec};
use proptest::prelude::*;

/// Qubit state from a Bloch vector scaled into the unit ball.
fn qubit(x: f64, y: f64, z: f64, r: f64) -> DensityMatrix {
    let n = (x * x + y * y + z * z).sqrt().max(1e-12);
    let (x, y, z) = (r * x / n, r * y / n, r * z / n);
    let amps = [[c64::new(0.5 * (1.0 + z), 0.0), c64::new(0.5 * x, -0.5 * y)], [
        c64::new(0.5 * x, 0.5 * y),
        c64::new(0.5 * (1.0 - z), 0.0),
    ]];
    let m = dimerbath::CMat::from_fn(2, 2, |i, j| amps[i][j]);
    DensityMatrix::new(SpaceLayout::electronic(), m).unwrap()
}

fn bloch() -> impl Strategy<Value = DensityMatrix> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..=1.0f64).prop_map(|(x, y, z, r)| qubit(x, y, z, r))
}

fn params() -> impl Strategy<Value = ElectronicParams> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, j)| ElectronicParams::new(a, b, j).unwrap())
}

fn mode() -> impl Strategy<Value = ModeSpec> {
    (0.2..2.0f64, -0.5..0.5f64).prop_map(|(w, g)| ModeSpec::new(w, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_distance_is_a_bounded_symmetric_metric(a in bloch(), b in bloch(), c in bloch()) {
        let ab = trace_distance(&a, &b).unwrap();
        let ba = trace_distance(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-14);
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-14);
        let triangle = trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap();
        prop_assert!(ab <= triangle + 1e-12);
    }

    #[test]
    fn gibbs_weights_normalized_and_decreasing(omega in 0.05..5.0f64, beta in 0.01..20.0f64, n in 2usize..40) {
        let w = gibbs_weights(omega, beta, n).unwrap();
        prop_assert_eq!(w.len(), n);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // deep tails may underflow to zero
        prop_assert!(w.windows(2).all(|p| p[1] >= 0.0 && (p[1] < p[0] || p[0] == 0.0)));
    }

    #[test]
    fn effective_coupling_strictly_decreases_up_to_full_correlation(
        g in 0.01..2.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64,
    ) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(effective_coupling(g, hi).abs() < effective_coupling(g, lo).abs());
        prop_assert!(effective_coupling(g, 1.0).abs() == 0.0);
    }

    #[test]
    fn partial_trace_preserves_trace_and_positivity(rho_e in bloch(), m in mode(), beta in 0.1..5.0f64) {
        let p = ElectronicParams::new(0.3, -0.2, 0.4).unwrap();
        let model = TotalModel::build(ModelKind::independent(), &p, &[m], 4).unwrap();
        let spec = ThermalSpec::new(beta, 1e-6).unwrap().with_n_max_override(4).unwrap();
        let rho = initial_state(&rho_e, &model, &spec).unwrap();
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]] {
            let r = partial_trace(&rho, &keep).unwrap();
            prop_assert!((r.trace() - c64::new(1.0, 0.0)).norm() < 1e-12);
            prop_assert!(r.min_eigenvalue().unwrap() > -1e-12);
        }
        let back = partial_trace(&rho, &[0]).unwrap();
        prop_assert!(trace_distance(&back, &rho_e).unwrap() < 1e-12);
    }

    #[test]
    fn site_swap_leaves_shared_spectrum_unchanged(p in params(), m in mode()) {
        let a = build_shared_anticorrelated(&p, &[m], 6).unwrap();
        let b = build_shared_anticorrelated(&p.swapped(), &[m], 6).unwrap();
        prop_assert!(spectrum_equivalence(&a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn propagator_is_unitary(p in params(), m in mode(), t in 0.0..100.0f64) {
        let model = build_shared_anticorrelated(&p, &[m], 6).unwrap();
        let prop = SpectralPropagator::for_model(&model).unwrap();
        prop_assert!(prop.unitarity_bound() < 1e-12);
        prop_assert!(prop.unitarity_defect(t).unwrap() < 1e-12);
    }

    #[test]
    fn isolated_dimer_stays_a_valid_state(p in params(), rho in bloch(), t in 0.0..100.0f64) {
        let r = electronic_evolution(&p, &rho, t).unwrap();
        prop_assert!((r.trace() - c64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(r.hermiticity_defect() < 1e-12);
        prop_assert!((r.purity() - rho.purity()).abs() < 1e-12);
    }
}
