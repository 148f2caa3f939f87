//! Autonomous composite Hamiltonians, exact propagation on a uniform grid
//! and the operator-sum cross-check of the reduced dynamics.

use crate::error::{Error, Result};
use crate::hilbert::{
    embed, partial_trace, partial_trace_matrix, BipartitionShape, DensityMatrix, Ket, Subsystem,
};
use crate::numkernel::{hermitian_eig, unitary_exp, unitary_exp_minus_identity, ComplexMatrix, C64, HERMITIAN_TOL};

#[derive(Clone, Debug)]
pub struct CompositeHamiltonian {
    shape: BipartitionShape,
    h1: ComplexMatrix,
    h2: ComplexMatrix,
    hint: ComplexMatrix,
    hbar: f64,
}

fn require_hermitian(name: &str, m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{name} is not square")));
    }
    let ah = m.anti_hermitian_norm();
    if ah > (HERMITIAN_TOL * m.norm_fro()).max(1e-14) {
        return Err(Error::NotHermitian {
            anti_hermitian_norm: ah,
        });
    }
    Ok(())
}

impl CompositeHamiltonian {
    pub fn new(
        h1: ComplexMatrix,
        h2: ComplexMatrix,
        hint: ComplexMatrix,
        hbar: f64,
    ) -> Result<Self> {
        require_hermitian("H1", &h1)?;
        require_hermitian("H2", &h2)?;
        require_hermitian("Hint", &hint)?;
        let shape = BipartitionShape::new(h1.rows(), h2.rows())?;
        if hint.rows() != shape.total() {
            return Err(Error::Dimension(format!(
                "Hint is {}x{}, expected {}x{}",
                hint.rows(),
                hint.cols(),
                shape.total(),
                shape.total()
            )));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Invalid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self {
            shape,
            h1,
            h2,
            hint,
            hbar,
        })
    }

    pub fn shape(&self) -> BipartitionShape {
        self.shape
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn local(&self, k: Subsystem) -> &ComplexMatrix {
        match k {
            Subsystem::One => &self.h1,
            Subsystem::Two => &self.h2,
        }
    }

    pub fn interaction(&self) -> &ComplexMatrix {
        &self.hint
    }

    /// `H1⊗1 + 1⊗H2`
    pub fn bare_total(&self) -> ComplexMatrix {
        &embed(&self.h1, self.shape, Subsystem::One) + &embed(&self.h2, self.shape, Subsystem::Two)
    }

    /// Same system with the interaction replaced.
    pub fn with_interaction(&self, hint: ComplexMatrix) -> Result<Self> {
        Self::new(self.h1.clone(), self.h2.clone(), hint, self.hbar)
    }
}

/// `H0 = H1⊗1 + 1⊗H2 + Hint`
pub fn assemble_total(ch: &CompositeHamiltonian) -> ComplexMatrix {
    &ch.bare_total() + &ch.hint
}

/// Uniform grid `t_i = t0 + i·dt`, `i < steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::Grid(format!("invalid t0 = {t0}, dt = {dt}")));
        }
        if steps == 0 {
            return Err(Error::Grid("grid needs at least one sample".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid covering `[t0, t1]`; `t1 − t0` is rounded to a whole number of steps.
    pub fn span(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::Grid(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        let n = ((t1 - t0) / dt).round();
        if !(n.is_finite() && n >= 1.0) {
            return Err(Error::Grid(format!("dt = {dt} does not resolve [{t0}, {t1}]")));
        }
        Self::new(t0, dt, n as usize + 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.time(i)).collect()
    }

    /// Logs a warning when `dt·‖H0‖/ħ ≥ 1`.
    pub fn check_resolution(&self, ch: &CompositeHamiltonian) -> bool {
        let scale = self.dt * assemble_total(ch).norm_op() / ch.hbar();
        if scale >= 1.0 {
            log::warn!("dt·‖H0‖/ħ = {scale:.3} ≥ 1; finite differences will be inaccurate");
            false
        } else {
            true
        }
    }
}

#[derive(Clone, Debug)]
pub struct PureTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<Ket>,
}

impl PureTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Single-step propagator `exp(−i·H0·dt/ħ)`.
pub fn step_unitary(ch: &CompositeHamiltonian, dt: f64) -> Result<ComplexMatrix> {
    unitary_exp(&assemble_total(ch), dt / ch.hbar())
}

/// `exp(−i·H0·dt/ħ) − 1`; trajectories apply the step as `ψ + Dψ`.
pub fn step_delta(ch: &CompositeHamiltonian, dt: f64) -> Result<ComplexMatrix> {
    unitary_exp_minus_identity(&assemble_total(ch), dt / ch.hbar())
}

/// Bare local propagator `exp(−i·H_k·dt/ħ)`.
pub fn local_step_unitary(ch: &CompositeHamiltonian, k: Subsystem, dt: f64) -> Result<ComplexMatrix> {
    unitary_exp(ch.local(k), dt / ch.hbar())
}

pub fn propagate_pure(
    ch: &CompositeHamiltonian,
    psi0: &Ket,
    grid: TimeGrid,
) -> Result<PureTrajectory> {
    if psi0.dim() != ch.shape().total() {
        return Err(Error::Dimension(format!(
            "initial ket has dim {}, system has {}",
            psi0.dim(),
            ch.shape().total()
        )));
    }
    if !psi0.is_normalized(1e-10) {
        return Err(Error::Invalid(format!(
            "initial ket not normalized (norm {})",
            psi0.norm()
        )));
    }
    let d = step_delta(ch, grid.dt)?;
    let mut states: Vec<Ket> = Vec::with_capacity(grid.steps);
    states.push(psi0.clone());
    for i in 1..grid.steps {
        let prev = states[i - 1].amplitudes();
        let next = d.mul_vec(prev).iter().zip(prev).map(|(x, p)| p + x).collect();
        states.push(Ket::from_trusted(next));
    }
    Ok(PureTrajectory { grid, states })
}

/// `ρ(t_i) = U^i ρ0 U^{i†}` by repeated application of the step unitary,
/// written as `ρ + X + X† + X·D†` with `U = 1 + D` and `X = Dρ`.
pub fn evolve_density(
    ch: &CompositeHamiltonian,
    rho0: &DensityMatrix,
    grid: TimeGrid,
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != ch.shape().total() {
        return Err(Error::Dimension("density matrix does not fit the system".into()));
    }
    let d = step_delta(ch, grid.dt)?;
    let dh = d.adjoint();
    let mut out: Vec<DensityMatrix> = Vec::with_capacity(grid.steps);
    out.push(rho0.clone());
    for i in 1..grid.steps {
        let rho = out[i - 1].matrix();
        let x = &d * rho;
        let inc = &(&x + &x.adjoint()) + &(&x * &dh);
        out.push(DensityMatrix::from_trusted(rho + &inc));
    }
    Ok(out)
}

/// Operators `K_βα = √p_α ⟨β|U|α⟩` acting on subsystem 1, with `|α⟩` the
/// columns of `basis2` weighted by `probs` and `|β⟩` the computational basis.
pub fn kraus_operators(
    u: &ComplexMatrix,
    shape: BipartitionShape,
    probs: &[f64],
    basis2: &ComplexMatrix,
) -> Vec<ComplexMatrix> {
    let (d1, d2) = (shape.d1, shape.d2);
    let mut out = Vec::new();
    for (alpha, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let s = p.sqrt();
        for beta in 0..d2 {
            out.push(ComplexMatrix::from_fn(d1, d1, |a, b| {
                let v: C64 = (0..d2)
                    .map(|m| u[(a * d2 + beta, b * d2 + m)] * basis2[(m, alpha)])
                    .sum();
                v * s
            }));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct KrausReport {
    /// `‖Σ K ρ1 K† − tr₂ρ(t)‖`
    pub residual: f64,
    /// `‖Σ K†K − 1‖`
    pub completeness: f64,
    pub reconstruction: ComplexMatrix,
    pub operators: Vec<ComplexMatrix>,
}

pub fn apply_kraus(ops: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(rho.rows(), rho.cols());
    for k in ops {
        acc = &acc + &(&(k * rho) * &k.adjoint());
    }
    acc
}

pub fn kraus_completeness(ops: &[ComplexMatrix]) -> f64 {
    let n = ops.first().map_or(0, ComplexMatrix::rows);
    let mut acc = ComplexMatrix::zeros(n, n);
    for k in ops {
        acc = &acc + &(&k.adjoint() * k);
    }
    (&acc - &ComplexMatrix::identity(n)).norm_fro()
}

/// Checks the operator-sum form of `ρ1(t_index)` for an uncorrelated initial state.
pub fn kraus_check(
    ch: &CompositeHamiltonian,
    initial: &DensityMatrix,
    grid: TimeGrid,
    t_index: usize,
) -> Result<KrausReport> {
    let shape = ch.shape();
    if t_index >= grid.steps {
        return Err(Error::Index {
            index: t_index,
            range: format!("0..{}", grid.steps),
        });
    }
    let rho1 = partial_trace(initial, shape, Subsystem::One)?;
    let rho2 = partial_trace(initial, shape, Subsystem::Two)?;
    let product = rho1.matrix().kron(rho2.matrix());
    let corr = (&product - initial.matrix()).norm_fro();
    if corr > 1e-10 {
        return Err(Error::Correlated(corr));
    }
    let eig = hermitian_eig(rho2.matrix())?;
    let probs: Vec<f64> = eig.eigenvalues.iter().map(|&p| p.max(0.0)).collect();
    let elapsed = grid.time(t_index) - grid.t0;
    let u = unitary_exp(&assemble_total(ch), elapsed / ch.hbar())?;
    let operators = kraus_operators(&u, shape, &probs, &eig.eigenvectors);
    let reconstruction = apply_kraus(&operators, rho1.matrix());

    let sub = TimeGrid::new(grid.t0, grid.dt, t_index + 1)?;
    let evolved = evolve_density(ch, initial, sub)?;
    let oracle = partial_trace_matrix(evolved[t_index].matrix(), shape, Subsystem::One)?;
    Ok(KrausReport {
        residual: (&reconstruction - &oracle).norm_fro(),
        completeness: kraus_completeness(&operators),
        reconstruction,
        operators,
    })
}
