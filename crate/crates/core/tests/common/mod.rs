#![allow(dead_code)]

use proptest::prelude::*;
use schmidt_core::analysis::{analyze_pure, PureAnalysis};
use schmidt_core::dynamics::{CompositeHamiltonian, TimeGrid};
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::Ket;
use schmidt_core::numkernel::{ComplexMatrix, C64};
use schmidt_core::presets;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

pub fn reference(g: f64) -> CompositeHamiltonian {
    presets::two_qubit_reference(g).unwrap()
}

pub fn run(ch: &CompositeHamiltonian, psi: &Ket, t1: f64, dt: f64, policy: &GaugePolicy) -> PureAnalysis {
    analyze_pure(ch, psi, TimeGrid::span(0.0, t1, dt).unwrap(), policy).unwrap()
}

pub fn run_reference(g: f64, t1: f64, dt: f64) -> PureAnalysis {
    run(&reference(g), &presets::reference_initial_state(), t1, dt, &GaugePolicy::Symmetric)
}

pub fn complex_matrix(rows: usize, cols: usize, parts: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |r, k| {
        let i = 2 * (r * cols + k);
        c(parts[i], parts[i + 1])
    })
}

pub fn hermitian(n: usize, parts: &[f64]) -> ComplexMatrix {
    complex_matrix(n, n, parts).hermitian_part()
}

pub fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * rows * cols).prop_map(move |p| complex_matrix(rows, cols, &p))
}

pub fn arb_hermitian(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |p| hermitian(n, &p))
}

pub fn arb_ket(dim: usize) -> impl Strategy<Value = Ket> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim)
        .prop_filter("nonzero", |p| p.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|p| Ket::normalized(p.chunks(2).map(|z| c(z[0], z[1])).collect()).unwrap())
}

/// Qubit–qutrit system with a generic coupling; exercises `d1 ≠ d2`.
pub fn qubit_qutrit() -> CompositeHamiltonian {
    let parts: Vec<f64> = (0..72).map(|k| ((k * 37 % 23) as f64 / 23.0) - 0.5).collect();
    let h1 = hermitian(2, &parts[..8]);
    let h2 = hermitian(3, &parts[8..26]).scale_re(2.0);
    let hint = hermitian(6, &parts[..72]).scale_re(0.6);
    CompositeHamiltonian::new(h1, h2, hint, 1.0).unwrap()
}
