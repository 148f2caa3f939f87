mod common;

use std::f64::consts::PI;

use common::{qubit_qutrit, reference, run, run_reference};
use schmidt_core::dynamics::{local_step_unitary, propagate_pure, CompositeHamiltonian, TimeGrid};
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::*;
use schmidt_core::numkernel::ComplexMatrix;
use schmidt_core::presets::reference_initial_state;
use schmidt_core::schmidt::*;

fn bell() -> Ket {
    let s = 1.0 / 2f64.sqrt();
    Ket::from_real(&[s, 0.0, 0.0, s]).unwrap()
}

fn shape22() -> BipartitionShape {
    BipartitionShape::new(2, 2).unwrap()
}

#[test]
fn decompositions() {
    let u = Ket::from_real(&[0.6, 0.8]).unwrap();
    let f = decompose(&tensor(&u, &basis_ket(2, 1).unwrap()), shape22()).unwrap();
    assert!((f.lambda[0] - 1.0).abs() < 1e-14 && f.lambda[1].abs() < 1e-14);
    assert_eq!(schmidt_rank(&f, RANK_TOL), 1);
    assert!(f.dark[1]);

    let b = decompose(&bell(), shape22()).unwrap();
    let s = 1.0 / 2f64.sqrt();
    assert!(b.lambda.iter().all(|l| (l - s).abs() < 1e-14));
    assert_eq!(schmidt_rank(&b, RANK_TOL), 2);

    let r = decompose(&reference_initial_state(), shape22()).unwrap();
    assert_eq!(schmidt_rank(&r, RANK_TOL), 1);
    assert!(r.reconstruct().distance(&reference_initial_state()) < 1e-14);
}

#[test]
fn rank_threshold_semantics() {
    let mut f = decompose(&bell(), shape22()).unwrap();
    f.lambda = vec![(1.0 - 1e-24f64).sqrt(), 1e-12];
    assert_eq!(schmidt_rank(&f, RANK_TOL), 1);
    assert_eq!(schmidt_rank(&f, 1e-13), 2);
}

#[test]
fn initial_frame_convention() {
    let psi = Ket::normalized(vec![
        common::c(0.1, 0.3),
        common::c(-0.4, 0.2),
        common::c(0.0, -0.7),
        common::c(0.5, 0.1),
    ])
    .unwrap();
    let f = decompose(&psi, shape22()).unwrap();
    assert!(f.lambda[0] >= f.lambda[1]);
    for j in 0..2 {
        let col = f.basis1.column(j);
        let big = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        assert!(big.im.abs() < 1e-14 && big.re > 0.0);
    }
    assert!(f.reconstruct().distance(&psi) < 1e-13);
    assert!(f.orthonormality_residual() < 1e-13);
}

fn swapped(f: &SchmidtFrame) -> SchmidtFrame {
    let mut g = f.clone();
    g.basis1 = f.basis1.select_columns(&[1, 0]);
    g.basis2 = f.basis2.select_columns(&[1, 0]);
    g.lambda = vec![f.lambda[1], f.lambda[0]];
    g
}

#[test]
fn branch_matching() {
    let psi = Ket::from_real(&[0.8, 0.1, -0.2, 0.55]).unwrap().scale(common::c(1.0, 0.0));
    let psi = Ket::normalized(psi.into_amplitudes()).unwrap();
    let f = decompose(&psi, shape22()).unwrap();
    assert_eq!(match_branches(&f, &f).unwrap(), vec![0, 1]);
    assert_eq!(match_branches(&f, &swapped(&f)).unwrap(), vec![1, 0]);
}

/// `cos θ |a1 b1⟩ + sin θ |a2 b2⟩` with local bases rotated by `φ`: the
/// coefficients cross at `θ = π/4` while the vectors move smoothly.
fn crossing_state(theta: f64, phi: f64) -> Ket {
    let a1 = Ket::from_real(&[phi.cos(), phi.sin()]).unwrap();
    let a2 = Ket::from_real(&[-phi.sin(), phi.cos()]).unwrap();
    let b1 = Ket::from_real(&[(0.5 * phi).cos(), (0.5 * phi).sin()]).unwrap();
    let b2 = Ket::from_real(&[-(0.5 * phi).sin(), (0.5 * phi).cos()]).unwrap();
    let amps: Vec<_> = tensor(&a1, &b1)
        .amplitudes()
        .iter()
        .zip(tensor(&a2, &b2).amplitudes())
        .map(|(x, y)| x * theta.cos() + y * theta.sin())
        .collect();
    Ket::new(amps).unwrap()
}

#[test]
fn matching_follows_vectors_through_a_coefficient_crossing() {
    let before = decompose(&crossing_state(PI / 4.0 - 0.01, 0.30), shape22()).unwrap();
    let after = decompose(&crossing_state(PI / 4.0 + 0.01, 0.31), shape22()).unwrap();
    let perm = match_branches(&before, &after).unwrap();
    assert_eq!(perm, vec![1, 0]);
    for (j, &p) in perm.iter().enumerate() {
        for k in Subsystem::BOTH {
            let o = before.vector(k, j).inner(&after.vector(k, p)).norm();
            assert!(o >= 0.99, "overlap {o}");
        }
    }
}

#[test]
fn uncoupled_product_state_follows_bare_motion() {
    let ch = reference(0.0);
    let a = run(&ch, &reference_initial_state(), 3.0, 1e-3, &GaugePolicy::Symmetric);
    let u1 = local_step_unitary(&ch, Subsystem::One, 1e-3).unwrap();
    let mut moved = a.frames.frames[0].vector(Subsystem::One, 0);
    for (i, f) in a.frames.frames.iter().enumerate() {
        assert!((f.lambda[0] - 1.0).abs() < 1e-12 && f.lambda[1] < 1e-12);
        if i > 0 {
            moved = moved.apply(&u1);
        }
        // Same ray; the phase is the policy's business.
        assert!((moved.inner(&f.vector(Subsystem::One, 0)).norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn static_bell_state_has_constant_frames() {
    let ch = CompositeHamiltonian::new(ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(2, 2), ComplexMatrix::zeros(4, 4), 1.0).unwrap();
    let traj = propagate_pure(&ch, &bell(), TimeGrid::new(0.0, 0.01, 50).unwrap()).unwrap();
    let st = align_track(&traj, &ch, &GaugePolicy::Symmetric).unwrap();
    let f0 = &st.frames[0];
    for f in &st.frames {
        assert!((&f.basis1 - &f0.basis1).norm_fro() < 1e-12);
        assert!((&f.basis2 - &f0.basis2).norm_fro() < 1e-12);
        assert_eq!(f.lambda, f0.lambda);
    }
    // Degenerate coefficients: the block is rotated every step, nothing else.
    for f in &st.frames[1..] {
        assert_eq!(f.flags, vec![FrameFlag::DegenerateBlock(vec![0, 1])]);
    }
}

#[test]
fn reference_frames_agree_with_partial_traces() {
    let a = run_reference(1.3, 10.0, 1e-3);
    let shape = shape22();
    assert!(reconstruction_residual(&a.frames, &a.traj) <= 1e-9);
    for (f, psi) in a.frames.frames.iter().zip(&a.traj.states) {
        assert!(normalization_defect(f) <= 1e-10);
        assert!(f.orthonormality_residual() <= 1e-10);
        for k in Subsystem::BOTH {
            let direct = reduced_state(psi, shape, k).unwrap();
            assert!((&f.local_state(k) - direct.matrix()).norm_fro() <= 1e-9);
            assert!((f.purity() - purity(&direct)).abs() <= 1e-9);
        }
        // Entanglement criterion.
        let s = vn_entropy(&reduced_state(psi, shape, Subsystem::One).unwrap()).unwrap();
        assert_eq!(schmidt_rank(f, RANK_TOL) > 1, s > 1e-9, "t = {}", f.t);
    }
    assert!(a.frames.continuity.flagged.is_empty(), "{:?}", a.frames.continuity.flagged);
}

#[test]
fn coefficients_do_not_depend_on_the_gauge() {
    let ch = reference(1.3);
    let psi = reference_initial_state();
    let base = run(&ch, &psi, 4.0, 1e-3, &GaugePolicy::Symmetric);
    for policy in [
        GaugePolicy::ParallelTransport(Subsystem::One),
        GaugePolicy::ParallelTransport(Subsystem::Two),
        GaugePolicy::BareRotating(Subsystem::Two),
        GaugePolicy::LinearShift { alpha: -1.7 },
    ] {
        let other = run(&ch, &psi, 4.0, 1e-3, &policy);
        for (a, b) in base.frames.frames.iter().zip(&other.frames.frames) {
            for (x, y) in a.lambda.iter().zip(&b.lambda) {
                assert!((x - y).abs() <= 1e-12, "{}", policy.name());
            }
        }
    }
}

#[test]
fn coefficients_pass_through_zero_at_product_state_revivals() {
    // Both conditional precessions of qubit 1 have frequency Ω = 2√(¼ + g²),
    // so the state factorizes again at t = 2πn/Ω.
    let g: f64 = 1.3;
    let period = 2.0 * PI / (2.0 * (0.25 + g * g).sqrt());
    let a = run_reference(g, 10.0, 1e-3);
    let changes = &a.frames.continuity.sign_changes;
    let revivals: Vec<f64> = (1..).map(|n| n as f64 * period).take_while(|t| *t < 10.0).collect();
    assert_eq!(changes.len(), revivals.len(), "{changes:?}");
    for (&i, t) in changes.iter().zip(&revivals) {
        assert!((a.frames.frames[i].t - t).abs() <= 2e-3);
        let f = &a.frames.frames[i];
        assert!(f.lambda[1] <= 2e-3 * 3.0);
    }
    // Signed coefficients are smooth: no jump larger than the rate bound allows.
    let s: Vec<f64> = a.frames.frames.iter().map(|f| f.signed_lambda()[1]).collect();
    assert!(s.windows(2).all(|w| (w[1] - w[0]).abs() <= 5e-3));
}

#[test]
fn unequal_dimensions_are_tracked() {
    let ch = qubit_qutrit();
    let psi = tensor(&Ket::from_real(&[0.6, 0.8]).unwrap(), &Ket::from_real(&[0.0, 0.6, 0.8]).unwrap());
    let a = run(&ch, &psi, 3.0, 1e-3, &GaugePolicy::Symmetric);
    assert!(reconstruction_residual(&a.frames, &a.traj) <= 1e-9);
    let shape = ch.shape();
    for (f, st) in a.frames.frames.iter().zip(&a.traj.states) {
        assert_eq!((f.basis1.cols(), f.basis2.cols(), f.paired()), (2, 3, 2));
        assert!(f.orthonormality_residual() <= 1e-10);
        let direct = reduced_state(st, shape, Subsystem::Two).unwrap();
        assert!((&f.local_state(Subsystem::Two) - direct.matrix()).norm_fro() <= 1e-9);
    }
    assert!(a.frames.continuity.min_overlap.iter().all(|&o| o > 0.99));
}
