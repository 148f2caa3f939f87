mod common;

use common::{max_abs, qubit_qutrit, reference, run, run_reference};
use schmidt_core::dynamics::{assemble_total, CompositeHamiltonian};
use schmidt_core::effective::*;
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::Subsystem;
use schmidt_core::numkernel::{commutator, ComplexMatrix};
use schmidt_core::presets::reference_initial_state;
use schmidt_core::schmidt::DARK_TOL;

const DT: f64 = 1e-3;

#[test]
fn stencils_are_second_order() {
    let f: Vec<f64> = (0..20).map(|i| (0.1 * i as f64).sin()).collect();
    for i in [0, 7, 19] {
        let d = fd_scalar(&f, i, 0.1).unwrap();
        assert!((d - (0.1 * i as f64).cos()).abs() <= 4e-3, "{i}");
    }
    // Quadratics are differentiated exactly by every stencil.
    let q: Vec<f64> = (0..5).map(|i| (i * i) as f64).collect();
    for i in 0..5 {
        assert!((fd_scalar(&q, i, 1.0).unwrap() - 2.0 * i as f64).abs() <= 1e-12);
    }
    assert!(fd_scalar(&q[..2], 0, 1.0).is_err());
}

#[test]
fn uncoupled_effective_hamiltonians_are_bare() {
    let ch = reference(0.0);
    let a = run(&ch, &reference_initial_state(), 10.0, DT, &GaugePolicy::Symmetric);
    for k in Subsystem::BOTH {
        let h = ch.local(k).norm_op();
        assert!(a.effective.max_deviation(&ch, k) <= DT * DT * h.powi(3));
    }
}

#[test]
fn zero_hamiltonian_gives_zero_effective_hamiltonians() {
    let z = ComplexMatrix::zeros(2, 2);
    let ch = CompositeHamiltonian::new(z.clone(), z, ComplexMatrix::zeros(4, 4), 1.0).unwrap();
    let a = run(&ch, &reference_initial_state(), 1.0, 1e-2, &GaugePolicy::Symmetric);
    for k in Subsystem::BOTH {
        for h in a.effective.get(k) {
            assert!(h.norm_fro() <= 1e-12);
        }
    }
}

#[test]
fn effective_energies_add_up_to_the_total() {
    let a = run_reference(1.3, 10.0, DT);
    assert!(a.energy.max_additivity() <= 1e-4 * 1.3, "{:e}", a.energy.max_additivity());
}

#[test]
fn antihermitian_residual_is_truncation_error() {
    let h0 = assemble_total(&reference(1.3)).norm_op();
    let worst = |dt: f64| {
        let a = run_reference(1.3, 4.0, dt);
        Subsystem::BOTH
            .iter()
            .map(|k| max_abs(a.effective.antihermitian_residual[k.index()].iter().copied()))
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(2e-3), worst(1e-3));
    assert!(fine <= DT * DT * h0.powi(3), "{fine:e}");
    assert!((3.0..=5.0).contains(&(coarse / fine)), "ratio {}", coarse / fine);
}

#[test]
fn additivity_converges_at_second_order() {
    let coarse = run_reference(1.3, 4.0, 2e-3).energy.max_additivity();
    let fine = run_reference(1.3, 4.0, 1e-3).energy.max_additivity();
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn qubit_qutrit_additivity() {
    let ch = qubit_qutrit();
    let psi = schmidt_core::hilbert::tensor(
        &schmidt_core::hilbert::Ket::normalized(vec![1.0.into(), 0.5.into()]).unwrap(),
        &schmidt_core::hilbert::Ket::normalized(vec![0.3.into(), (-1.0).into(), 0.8.into()]).unwrap(),
    );
    let a = run(&ch, &psi, 6.0, DT, &GaugePolicy::Symmetric);
    let scale = ch.interaction().norm_op();
    assert!(a.energy.max_additivity() <= 1e-4 * scale, "{:e}", a.energy.max_additivity());
}

#[test]
fn split_components_reassemble() {
    let ch = reference(1.3);
    let a = run_reference(1.3, 3.0, DT);
    for k in Subsystem::BOTH {
        for i in [1, 700, 2500] {
            let h = &a.effective.get(k)[i];
            let (ls, x) = split_components(h, ch.local(k)).unwrap();
            assert!((&(&(ch.local(k) + &ls) + &x) - h).norm_fro() <= 1e-12);
            assert!(commutator(&ls, ch.local(k)).norm_fro() <= 1e-10);
            assert_eq!(a.effective.components[k.index()][i].0, ls);
        }
    }
    // Interaction energy splits into the two Lamb shifts and the cross terms.
    assert!(a.energy.max_interaction_balance() <= 1e-4 * 1.3);
}

#[test]
fn master_equations_hold_along_the_trajectory() {
    let ch = reference(1.3);
    let a = run_reference(1.3, 10.0, DT);
    let h0 = assemble_total(&ch).norm_op();
    let mut worst: f64 = 0.0;
    for i in (1..a.frames.len() - 1).step_by(37) {
        for r in master_residuals(&ch, &a.frames, &a.traj, i).unwrap() {
            worst = worst.max(r.r1).max(r.r2);
        }
    }
    assert!(worst <= 1e-4 * h0, "{worst:e}");
    assert!(master_residuals(&ch, &a.frames, &a.traj, 0).is_err());
}

#[test]
fn master_equations_without_hamiltonian_or_coupling() {
    let z = ComplexMatrix::zeros(2, 2);
    let still = CompositeHamiltonian::new(z.clone(), z, ComplexMatrix::zeros(4, 4), 1.0).unwrap();
    let a = run(&still, &reference_initial_state(), 1.0, 1e-2, &GaugePolicy::Symmetric);
    for r in master_residuals(&still, &a.frames, &a.traj, 50).unwrap() {
        assert!(r.r1 <= 1e-12 && r.r2 <= 1e-12);
    }
    // Left alone, only the difference quotient's truncation remains.
    let free = reference(0.0);
    let bound = DT * DT * assemble_total(&free).norm_op().powi(3);
    let a = run(&free, &reference_initial_state(), 2.0, DT, &GaugePolicy::Symmetric);
    for i in [1, 999, 1998] {
        for r in master_residuals(&free, &a.frames, &a.traj, i).unwrap() {
            assert!(r.r1 <= bound && r.r2 <= bound, "{r:?}");
        }
    }
}

#[test]
fn lindblad_form_reproduces_the_population_term() {
    let a = run_reference(1.3, 10.0, DT);
    for i in (1..a.frames.len() - 1).step_by(53) {
        for k in Subsystem::BOTH {
            let rep = lindblad_assembly(&a.frames, k, i, DARK_TOL).unwrap();
            if rep.excluded.is_empty() {
                assert!(rep.distance <= 1e-6, "step {i}: {:e}", rep.distance);
            }
        }
    }
}

#[test]
fn lindblad_form_is_empty_for_constant_coefficients() {
    let free = reference(0.0);
    let a = run(&free, &reference_initial_state(), 1.0, DT, &GaugePolicy::Symmetric);
    let rep = lindblad_assembly(&a.frames, Subsystem::One, 500, DARK_TOL).unwrap();
    // Product state: the second branch is dark and is excluded.
    assert_eq!(rep.excluded, vec![1]);
    assert!(rep.dissipator.norm_fro() <= 1e-12);
    assert!(rep.population_term.norm_fro() <= 1e-12);
    assert!(rep.rates.iter().flatten().all(|g| g.abs() <= 1e-12));
}

#[test]
fn coupling_matrix_and_coefficient_rates() {
    let ch = reference(1.3);
    let a = run_reference(1.3, 6.0, DT);
    let lam: Vec<Vec<f64>> = a.frames.frames.iter().map(|f| f.signed_lambda()).collect();
    for i in (1..a.frames.len() - 1).step_by(41) {
        let c = coupling_diagnostic(&a.frames, &ch, i).unwrap();
        assert!((&c - &c.adjoint()).norm_fro() <= 1e-12);
        let rates = coefficient_rates(&a.frames, &ch, i).unwrap();
        let bounds = coefficient_rate_bounds(&a.frames, &ch, i).unwrap();
        for j in 0..rates.len() {
            let series: Vec<f64> = lam.iter().map(|l| l[j]).collect();
            // The rates are for the unsigned coefficients.
            let fd = a.frames.frames[i].sign[j] * fd_scalar(&series, i, DT).unwrap();
            assert!((fd - rates[j]).abs() <= 1e-4, "step {i} branch {j}: {fd} vs {}", rates[j]);
            assert!(rates[j].abs() <= bounds[j] + 1e-12);
        }
    }
    let free = reference(0.0);
    let a = run(&free, &reference_initial_state(), 1.0, DT, &GaugePolicy::Symmetric);
    assert!(coupling_diagnostic(&a.frames, &free, 10).unwrap().norm_fro() == 0.0);
    assert!(coupling_diagnostic(&a.frames, &free, a.frames.len()).is_err());
}

#[test]
fn effective_hamiltonian_needs_interior_steps() {
    let a = run_reference(1.3, 0.1, 1e-2);
    assert!(effective_hamiltonian(&a.frames, Subsystem::One, 0).is_err());
    assert!(effective_hamiltonian(&a.frames, Subsystem::One, a.frames.len() - 1).is_err());
    assert!(effective_hamiltonian(&a.frames, Subsystem::One, 3).is_ok());
}

fn max_weighted(g: f64, k: Subsystem) -> f64 {
    let ch = reference(g);
    let a = run(&ch, &reference_initial_state(), 10.0, DT, &GaugePolicy::Symmetric);
    (1..a.frames.len() - 1)
        .step_by(7)
        .map(|i| semiclassical_reference(&a.frames, &ch, i, k).unwrap().weighted_distance)
        .fold(0.0, f64::max)
}

#[test]
fn semiclassical_reference_is_exact_without_coupling() {
    let ch = reference(0.0);
    let a = run(&ch, &reference_initial_state(), 4.0, DT, &GaugePolicy::Symmetric);
    for i in (1..a.frames.len() - 1).step_by(11) {
        for k in Subsystem::BOTH {
            let rep = semiclassical_reference(&a.frames, &ch, i, k).unwrap();
            assert!((&rep.reference - ch.local(k)).norm_fro() == 0.0);
            assert!(rep.distance <= DT * DT * 2.5f64.powi(3));
        }
    }
}

#[test]
fn semiclassical_envelope_in_weak_coupling() {
    for g in [0.1, 0.03, 0.01] {
        let hint = reference(g).interaction().norm_op();
        for k in Subsystem::BOTH {
            let d = max_weighted(g, k);
            assert!(d <= 3.5 * g * hint, "g={g} {k:?}: {d:e}");
        }
    }
}

#[test]
fn semiclassical_distance_scales_quadratically() {
    let hi = max_weighted(0.1, Subsystem::One);
    let lo = max_weighted(0.01, Subsystem::One);
    let slope = (hi / lo).log10();
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn semiclassical_distance_at_the_reference_coupling_is_finite() {
    let ch = reference(1.3);
    let a = run_reference(1.3, 2.0, DT);
    let rep = semiclassical_reference(&a.frames, &ch, 1000, Subsystem::One).unwrap();
    assert!(rep.distance.is_finite() && rep.weighted_distance <= rep.distance + 1e-12);
    assert!((&rep.reference - &rep.reference.adjoint()).norm_fro() <= 1e-14);
}
