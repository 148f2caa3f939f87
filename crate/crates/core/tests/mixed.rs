mod common;

use common::{c, reference};
use proptest::prelude::*;
use schmidt_core::dynamics::{assemble_total, TimeGrid};
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::{DensityMatrix, Ket, Subsystem};
use schmidt_core::mixed::*;
use schmidt_core::numkernel::{hermitian_eig, ComplexMatrix};
use schmidt_core::presets::reference_initial_state;
use schmidt_core::thermo::work_heat_effective_alicki;

fn grid() -> TimeGrid {
    TimeGrid::span(0.0, 4.0, 1e-3).unwrap()
}

fn bell_basis() -> Vec<Ket> {
    let s = 1.0 / 2f64.sqrt();
    [[s, 0.0, 0.0, s], [s, 0.0, 0.0, -s], [0.0, s, s, 0.0], [0.0, s, -s, 0.0]]
        .iter()
        .map(|a| Ket::from_real(a).unwrap())
        .collect()
}

#[test]
fn pure_state_is_one_branch() {
    let psi = reference_initial_state();
    let ens = spectral_branches(&DensityMatrix::from_ket(&psi), 1e-12).unwrap();
    assert_eq!(ens.len(), 1);
    assert!((ens.probabilities[0] - 1.0).abs() <= 1e-12);
    assert!((ens.branches[0].inner(&psi).norm() - 1.0).abs() <= 1e-12);
}

#[test]
fn maximally_mixed_has_four_equal_branches() {
    let ens = spectral_branches(&DensityMatrix::maximally_mixed(4), 1e-12).unwrap();
    assert_eq!(ens.len(), 4);
    assert!(ens.probabilities.iter().all(|p| (p - 0.25).abs() <= 1e-12));
    assert!(ens.gram_residual() <= 1e-12);
    assert_eq!(ens.dropped_mass, 0.0);
}

proptest! {
    #[test]
    fn spectral_branches_reassemble(m in common::arb_matrix(4, 4)) {
        let raw = &m * &m.adjoint();
        let tr = raw.trace().re;
        let rho = DensityMatrix::new(raw.scale_re(1.0 / tr)).unwrap();
        let ens = spectral_branches(&rho, 0.0).unwrap();
        prop_assert!((&ens.density() - rho.matrix()).norm_fro() <= 1e-10);
        let mut p = ens.probabilities.clone();
        p.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(p, ens.probabilities.clone());
    }
}

#[test]
fn cutoff_drops_and_renormalizes() {
    let rho = DensityMatrix::new(ComplexMatrix::from_diag(&[c(0.7, 0.0), c(0.3 - 1e-14, 0.0), c(1e-14, 0.0), c(0.0, 0.0)])).unwrap();
    let ens = spectral_branches(&rho, 1e-12).unwrap();
    assert_eq!(ens.len(), 2);
    assert!((ens.dropped_mass - 1e-14).abs() <= 1e-15);
    assert!((ens.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
}

#[test]
fn thermal_weights() {
    let ch = reference(1.3);
    let hot = thermal_init(&ch, 0.0).unwrap();
    assert!(hot.probabilities.iter().all(|p| (p - 0.25).abs() <= 1e-14));
    assert!((hot.log_partition.unwrap() - 4f64.ln()).abs() <= 1e-14);

    // Spectrum 2.5 ± √1.94 and −2.5 ± √1.94.
    let r = 1.94f64.sqrt();
    let levels = [-2.5 - r, -2.5 + r, 2.5 - r, 2.5 + r];
    let beta = 1.0;
    let z: f64 = levels.iter().map(|e| (-beta * e).exp()).sum();
    let warm = thermal_init(&ch, beta).unwrap();
    assert!((warm.log_partition.unwrap() - z.ln()).abs() <= 1e-12);
    for (p, e) in warm.probabilities.iter().zip(levels) {
        assert!((p - (-beta * e).exp() / z).abs() <= 1e-12);
    }

    let cold = thermal_init(&ch, 200.0).unwrap();
    let ground = hermitian_eig(&assemble_total(&ch)).unwrap().eigenvalues[0];
    assert!((cold.probabilities[0] - 1.0).abs() <= 1e-12);
    assert!((ground - levels[0]).abs() <= 1e-12);
    assert!(thermal_init(&ch, -1.0).is_err());
    assert!(thermal_init(&ch, f64::INFINITY).is_err());
}

#[test]
fn single_branch_ensemble_is_the_pure_run() {
    let ch = reference(1.3);
    let psi = reference_initial_state();
    let run = run_ensemble(&ch, &EnsembleState::pure(psi.clone()), grid(), &GaugePolicy::Symmetric).unwrap();
    let pure = common::run(&ch, &psi, 4.0, 1e-3, &GaugePolicy::Symmetric);
    for k in 0..2 {
        assert_eq!(run.u_local[k], pure.energy.u_eff[k]);
    }
    assert!((run.u0_direct + 0.3).abs() <= 1e-12);
}

fn check_ensemble(ch: &schmidt_core::dynamics::CompositeHamiltonian, ens: &EnsembleState) -> EnsembleLedger {
    let run = run_ensemble(ch, ens, grid(), &GaugePolicy::Symmetric).unwrap();
    let tol = 1e-4 * (1.0 + run.u0_direct.abs());
    assert!(run.max_additivity() <= tol, "{:e}", run.max_additivity());
    assert!(run.branch_additivity.iter().all(|a| *a <= 1e-4 * 4.0));
    assert!(run.population_drift <= 1e-12, "{:e}", run.population_drift);
    assert!(run.local_state_residual.iter().all(|r| *r <= 1e-9));
    assert!(run.conservation_defect() <= 1e-9);
    assert!((run.u0[0] - run.u0_direct).abs() <= 1e-10);
    run
}

#[test]
fn maximally_mixed_and_thermal_ensembles() {
    let ch = reference(1.3);
    let mixed = check_ensemble(&ch, &spectral_branches(&DensityMatrix::maximally_mixed(4), 1e-12).unwrap());
    assert!(mixed.u0_direct.abs() <= 1e-12);
    let warm = check_ensemble(&ch, &thermal_init(&ch, 1.0).unwrap());
    assert!(warm.u0_direct < 0.0);
    // Energy eigenstates stay put: every branch is static up to phase.
    for b in &warm.branches {
        let l = &b.frames.frames;
        assert!((l[0].lambda[0] - l[l.len() - 1].lambda[0]).abs() <= 1e-9);
    }
}

#[test]
fn ensemble_energies_do_not_depend_on_the_degenerate_basis() {
    let ch = reference(1.3);
    let computational = spectral_branches(&DensityMatrix::maximally_mixed(4), 1e-12).unwrap();
    let bell = EnsembleState::new(vec![0.25; 4], bell_basis()).unwrap();
    let a = check_ensemble(&ch, &computational);
    let b = check_ensemble(&ch, &bell);
    for k in 0..2 {
        let gap = a.u_local[k]
            .iter()
            .zip(&b.u_local[k])
            .skip(1)
            .take(a.times.len() - 2)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-4, "{k}: {gap:e}");
    }
}

#[test]
fn branch_bases_are_related_by_unitaries() {
    let ch = reference(1.3);
    let run = run_ensemble(&ch, &thermal_init(&ch, 1.0).unwrap(), grid(), &GaugePolicy::Symmetric).unwrap();
    for k in Subsystem::BOTH {
        let (t, rel) = branch_unitary_relation(&run, 2, 2, k, 100).unwrap();
        assert!((&t - &ComplexMatrix::identity(2)).norm_fro() <= 1e-12);
        assert!(rel.unitarity <= 1e-12 && rel.mapping <= 1e-12);
        for (eta, alpha) in [(0, 1), (3, 0), (1, 2)] {
            for i in [0, 1234, 4000] {
                let (_, rel) = branch_unitary_relation(&run, eta, alpha, k, i).unwrap();
                assert!(rel.unitarity <= 1e-9 && rel.mapping <= 1e-9);
            }
        }
    }
    assert!(branch_unitary_relation(&run, 4, 0, Subsystem::One, 0).is_err());
    assert!(branch_unitary_relation(&run, 0, 0, Subsystem::One, 4001).is_err());
}

#[test]
fn branch_fluxes_cancel_one_by_one() {
    let ch = reference(1.3);
    let h0 = assemble_total(&ch).norm_op();
    let ens = EnsembleState::new(vec![0.25; 4], bell_basis()).unwrap();
    let worst = |dt: f64| {
        let run = run_ensemble(&ch, &ens, TimeGrid::span(0.0, 2.0, dt).unwrap(), &GaugePolicy::Symmetric).unwrap();
        run.branches
            .iter()
            .map(|b| work_heat_effective_alicki(&b.effective, &b.frames).unwrap().max_net_rate())
            .fold(0.0, f64::max)
    };
    // What is left is truncation: same tolerance scale as additivity, second order.
    let (coarse, fine) = (worst(1e-3), worst(5e-4));
    assert!(coarse <= 1e-4 * h0, "{coarse:e}");
    assert!((3.5..=4.5).contains(&(coarse / fine)), "ratio {}", coarse / fine);
}

#[test]
fn ensembles_are_validated() {
    let psi = reference_initial_state();
    assert!(EnsembleState::new(vec![0.5, 0.5], vec![psi.clone()]).is_err());
    assert!(EnsembleState::new(vec![0.5, 0.6], vec![psi.clone(), psi.clone()]).is_err());
    assert!(EnsembleState::new(vec![1.5, -0.5], bell_basis()[..2].to_vec()).is_err());
    assert!(EnsembleState::new(vec![0.5, 0.5], vec![psi.clone(), psi]).is_err());
    assert!(EnsembleState::new(vec![0.5, 0.5], bell_basis()[..2].to_vec()).is_ok());
    assert!(spectral_branches(&DensityMatrix::maximally_mixed(4), 1.0).is_err());
}
