//! Named two-qubit scenarios shared by the tests and the command-line runner.

use crate::dynamics::CompositeHamiltonian;
use crate::error::Result;
use crate::hilbert::{pauli, sigma_minus, sigma_plus, tensor, Axis, Ket};
use crate::numkernel::ComplexMatrix;

/// Qubit-1 frequency of the reference model.
pub const OMEGA1: f64 = 1.0;
/// Qubit-2 frequency of the reference model.
pub const OMEGA2: f64 = 5.0;
/// Coupling of the reference model.
pub const COUPLING: f64 = 1.3;

/// `H1 = ω1/2 σz`, `H2 = ω2/2 σy`, `Hint = g σx⊗σy`, `ħ = 1`.
///
/// `[H2, Hint] = 0`, so `⟨H2⟩` is a constant of motion while `⟨H1⟩` is not.
pub fn two_qubit(omega1: f64, omega2: f64, g: f64) -> Result<CompositeHamiltonian> {
    CompositeHamiltonian::new(
        pauli(Axis::Z).scale_re(omega1 / 2.0),
        pauli(Axis::Y).scale_re(omega2 / 2.0),
        pauli(Axis::X).kron(&pauli(Axis::Y)).scale_re(g),
        1.0,
    )
}

/// Reference model at its default parameters with coupling `g`.
pub fn two_qubit_reference(g: f64) -> Result<CompositeHamiltonian> {
    two_qubit(OMEGA1, OMEGA2, g)
}

/// Uncorrelated initial state `(1, 2)/√5 ⊗ (1, 3)/√10`, all amplitudes real.
pub fn reference_initial_state() -> Ket {
    tensor(&reference_factor(1), &reference_factor(2))
}

/// One factor of [`reference_initial_state`] (`k` = 1 or 2).
pub fn reference_factor(k: usize) -> Ket {
    let amps = if k == 1 {
        [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()]
    } else {
        [1.0 / 10f64.sqrt(), 3.0 / 10f64.sqrt()]
    };
    Ket::from_real(&amps).expect("normalized by construction")
}

/// `H1 = ω1/2 σz`, `H2 = ω2/2 σz`, `Hint = g(σ+⊗σ− + σ−⊗σ+)`.
/// Strictly energy conserving when `ω1 = ω2`.
pub fn resonant_exchange(omega1: f64, omega2: f64, g: f64) -> Result<CompositeHamiltonian> {
    let hop = &sigma_plus().kron(&sigma_minus()) + &sigma_minus().kron(&sigma_plus());
    CompositeHamiltonian::new(
        pauli(Axis::Z).scale_re(omega1 / 2.0),
        pauli(Axis::Z).scale_re(omega2 / 2.0),
        hop.scale_re(g),
        1.0,
    )
}

/// `H1 = ω1/2 σz`, `H2 = ω2/2 σz`, `Hint = g σz⊗σz`. Pure dephasing: every
/// term commutes, local populations never move.
pub fn dephasing_zz(omega1: f64, omega2: f64, g: f64) -> Result<CompositeHamiltonian> {
    let zz: ComplexMatrix = pauli(Axis::Z).kron(&pauli(Axis::Z));
    CompositeHamiltonian::new(
        pauli(Axis::Z).scale_re(omega1 / 2.0),
        pauli(Axis::Z).scale_re(omega2 / 2.0),
        zz.scale_re(g),
        1.0,
    )
}

/// `|+⟩⊗|+⟩`, the default initial state for the σz-based scenarios.
pub fn plus_plus() -> Ket {
    let plus = Ket::from_real(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]).expect("normalized");
    tensor(&plus, &plus)
}
