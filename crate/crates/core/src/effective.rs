//! Local effective Hamiltonians from aligned Schmidt trajectories, their
//! bare / Lamb-shift / cross split and the exact local dynamical equations.
//!
//! Basis-vector derivatives use a phase-factored central difference: the
//! neighbours are de-phased against the centre vector before differencing and
//! the phase velocity is differenced separately. A gauge phase linear in time
//! therefore shifts the diagonal of H̃ by exactly `∓ħα`.

use crate::dynamics::{CompositeHamiltonian, PureTrajectory};
use crate::error::{Error, Result};
use crate::hilbert::{embed, partial_trace_matrix, reduced_state, BipartitionShape, Subsystem};
use crate::numkernel::{commutator, hermitian_eig, ComplexMatrix, C64, I, ZERO};
use crate::schmidt::SchmidtTrajectory;

/// Stencil used for derivatives at a grid index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    Forward,
    Central,
    Backward,
}

fn stencil(n: usize, i: usize) -> Result<Stencil> {
    if n < 3 {
        return Err(Error::Grid(format!(
            "finite differences need at least 3 samples, got {n}"
        )));
    }
    if i >= n {
        return Err(Error::Index {
            index: i,
            range: format!("0..{n}"),
        });
    }
    Ok(match i {
        0 => Stencil::Forward,
        _ if i == n - 1 => Stencil::Backward,
        _ => Stencil::Central,
    })
}

/// Second-order derivative of a scalar series at `i`.
pub fn fd_scalar(series: &[f64], i: usize, dt: f64) -> Result<f64> {
    let n = series.len();
    Ok(match stencil(n, i)? {
        Stencil::Central => (series[i + 1] - series[i - 1]) / (2.0 * dt),
        Stencil::Forward => (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * dt),
        Stencil::Backward => {
            (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * dt)
        }
    })
}

/// Second-order derivative of an operator series at `i`.
pub fn fd_matrix(series: &[ComplexMatrix], i: usize, dt: f64) -> Result<ComplexMatrix> {
    let n = series.len();
    let comb = |terms: &[(f64, usize)]| {
        let mut acc = ComplexMatrix::zeros(series[0].rows(), series[0].cols());
        for &(w, k) in terms {
            acc = &acc + &series[k].scale_re(w / (2.0 * dt));
        }
        acc
    };
    Ok(match stencil(n, i)? {
        Stencil::Central => comb(&[(1.0, i + 1), (-1.0, i - 1)]),
        Stencil::Forward => comb(&[(-3.0, 0), (4.0, 1), (-1.0, 2)]),
        Stencil::Backward => comb(&[(3.0, n - 1), (-4.0, n - 2), (1.0, n - 3)]),
    })
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `dφ_j/dt` for column `j` of subsystem `k` at step `i`.
pub fn vector_derivative(st: &SchmidtTrajectory, k: Subsystem, j: usize, i: usize) -> Result<Vec<C64>> {
    let n = st.len();
    let col = |m: usize| st.frames[m].basis(k).column(j);
    let h = st.dt;
    let centre = col(i);
    // Neighbour with its relative phase removed, and that phase.
    let dephased = |m: usize| {
        let v = col(m);
        let a = inner(&centre, &v).arg();
        let p = C64::from_polar(1.0, -a);
        (v.into_iter().map(|z| z * p).collect::<Vec<_>>(), a)
    };
    let (weights, phase_rate): (Vec<(f64, Vec<C64>)>, f64) = match stencil(n, i)? {
        Stencil::Central => {
            let (p, ap) = dephased(i + 1);
            let (m, am) = dephased(i - 1);
            (vec![(1.0, p), (-1.0, m)], (ap - am) / (2.0 * h))
        }
        Stencil::Forward => {
            let (a, aa) = dephased(1);
            let (b, ab) = dephased(2);
            (
                vec![(-3.0, centre.clone()), (4.0, a), (-1.0, b)],
                (4.0 * aa - ab) / (2.0 * h),
            )
        }
        Stencil::Backward => {
            let (a, aa) = dephased(n - 2);
            let (b, ab) = dephased(n - 3);
            (
                vec![(3.0, centre.clone()), (-4.0, a), (1.0, b)],
                (-4.0 * aa + ab) / (2.0 * h),
            )
        }
    };
    let mut d = vec![ZERO; centre.len()];
    for (w, v) in &weights {
        for (x, z) in d.iter_mut().zip(v) {
            *x += z * (w / (2.0 * h));
        }
    }
    for (x, z) in d.iter_mut().zip(&centre) {
        *x += I * phase_rate * z;
    }
    Ok(d)
}

/// `(H̃, ‖A − A†‖/2)` with `A = iħ Σ_j |dφ_j⟩⟨φ_j|` over the full local basis.
fn generator(st: &SchmidtTrajectory, k: Subsystem, i: usize) -> Result<(ComplexMatrix, f64)> {
    let b = st.frames[i].basis(k);
    let d = b.rows();
    let mut a = ComplexMatrix::zeros(d, d);
    for j in 0..b.cols() {
        let dv = vector_derivative(st, k, j, i)?;
        let phi = b.column(j);
        for r in 0..d {
            for c in 0..d {
                a[(r, c)] += I * st.hbar * dv[r] * phi[c].conj();
            }
        }
    }
    let residual = 0.5 * a.anti_hermitian_norm();
    Ok((a.hermitian_part(), residual))
}

/// Effective Hamiltonian of subsystem `k` at interior step `i`.
pub fn effective_hamiltonian(st: &SchmidtTrajectory, k: Subsystem, i: usize) -> Result<ComplexMatrix> {
    if stencil(st.len(), i)? != Stencil::Central {
        return Err(Error::Index {
            index: i,
            range: format!("1..{} (central differences)", st.len() - 1),
        });
    }
    Ok(generator(st, k, i)?.0)
}

/// `(H_LS, H_X)`: diagonal and off-diagonal parts of `H̃ − H` in the bare eigenbasis.
pub fn split_components(
    h_eff: &ComplexMatrix,
    h_bare: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let eig = hermitian_eig(h_bare)?;
    let split_in = |b: &ComplexMatrix| {
        let m = &(&b.adjoint() * &(h_eff - h_bare)) * b;
        let diag: Vec<C64> = (0..m.rows()).map(|r| C64::from(m[(r, r)].re)).collect();
        let ls = &(b * &ComplexMatrix::from_diag(&diag)) * &b.adjoint();
        let x = &(h_eff - h_bare) - &ls;
        (ls, x)
    };
    Ok(split_in(&eig.eigenvectors))
}

#[derive(Clone, Debug)]
pub struct EffectiveSeries {
    pub times: Vec<f64>,
    /// `[k][i]`
    pub h_eff: [Vec<ComplexMatrix>; 2],
    pub antihermitian_residual: [Vec<f64>; 2],
    /// `[k][i] = (H_LS, H_X)`
    pub components: [Vec<(ComplexMatrix, ComplexMatrix)>; 2],
    /// Indices computed with one-sided stencils.
    pub one_sided: Vec<usize>,
    /// Indices where the anti-Hermitian residual exceeded `1e-6·‖H̃‖`.
    pub warnings: Vec<(Subsystem, usize)>,
}

impl EffectiveSeries {
    pub fn get(&self, k: Subsystem) -> &[ComplexMatrix] {
        &self.h_eff[k.index()]
    }

    /// `max_i ‖H̃_k(t_i) − H_k‖` over interior steps (operator norm).
    pub fn max_deviation(&self, ch: &CompositeHamiltonian, k: Subsystem) -> f64 {
        let h = ch.local(k);
        let n = self.times.len();
        (1..n.saturating_sub(1))
            .map(|i| (&self.h_eff[k.index()][i] - h).norm_op())
            .fold(0.0, f64::max)
    }
}

/// H̃ at every grid index (one-sided at the ends) plus the split.
pub fn effective_series(st: &SchmidtTrajectory, ch: &CompositeHamiltonian) -> Result<EffectiveSeries> {
    let n = st.len();
    stencil(n, 0)?;
    let mut h_eff: [Vec<ComplexMatrix>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut resid: [Vec<f64>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut comps: [Vec<(ComplexMatrix, ComplexMatrix)>; 2] = [Vec::new(), Vec::new()];
    let mut warnings = Vec::new();
    for k in Subsystem::BOTH {
        let ki = k.index();
        for i in 0..n {
            let (h, r) = generator(st, k, i)?;
            if r > 1e-6 * h.norm_fro().max(1e-14) {
                warnings.push((k, i));
            }
            comps[ki].push(split_components(&h, ch.local(k))?);
            h_eff[ki].push(h);
            resid[ki].push(r);
        }
    }
    if !warnings.is_empty() {
        log::warn!(
            "anti-Hermitian residual above 1e-6·‖H̃‖ at {} samples",
            warnings.len()
        );
    }
    Ok(EffectiveSeries {
        times: st.times(),
        h_eff,
        antihermitian_residual: resid,
        components: comps,
        one_sided: vec![0, n - 1],
        warnings,
    })
}

/// `tr_{k̄}` of an operator on the composite space, keeping `k`.
fn reduce(m: &ComplexMatrix, shape: BipartitionShape, k: Subsystem) -> Result<ComplexMatrix> {
    partial_trace_matrix(m, shape, k)
}

fn lambda_sq_rates(st: &SchmidtTrajectory, i: usize) -> Result<Vec<f64>> {
    let r = st.frames[0].paired();
    (0..r)
        .map(|j| {
            let lo = i.saturating_sub(1).min(st.len().saturating_sub(3));
            let window: Vec<f64> = (lo..lo + 3)
                .map(|m| st.frames[m].lambda[j].powi(2))
                .collect();
            fd_scalar(&window, i - lo, st.dt)
        })
        .collect()
}

/// Rate `dλ_j²/dt` at step `i` for every paired branch.
pub fn population_rates(st: &SchmidtTrajectory, i: usize) -> Result<Vec<f64>> {
    stencil(st.len(), i)?;
    lambda_sq_rates(st, i)
}

/// `iħ Σ_j (dλ_j²/dt) |φ_j⟩⟨φ_j|` on subsystem `k`.
pub fn population_term(st: &SchmidtTrajectory, k: Subsystem, i: usize) -> Result<ComplexMatrix> {
    let rates = population_rates(st, i)?;
    let b = st.frames[i].basis(k);
    let d = b.rows();
    Ok(ComplexMatrix::from_fn(d, d, |r, c| {
        rates
            .iter()
            .enumerate()
            .map(|(j, &w)| b[(r, j)] * b[(c, j)].conj() * w)
            .sum::<C64>()
            * I
            * st.hbar
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterResiduals {
    /// Bare form with the interaction source term.
    pub r1: f64,
    /// Effective-Hamiltonian form with the population term.
    pub r2: f64,
}

/// Residuals of both exact local equations at interior step `i`, per subsystem.
pub fn master_residuals(
    ch: &CompositeHamiltonian,
    st: &SchmidtTrajectory,
    traj: &PureTrajectory,
    i: usize,
) -> Result<[MasterResiduals; 2]> {
    if stencil(st.len(), i)? != Stencil::Central || traj.len() != st.len() {
        return Err(Error::Index {
            index: i,
            range: format!("1..{}", st.len().saturating_sub(1)),
        });
    }
    let shape = ch.shape();
    let hbar = ch.hbar();
    let psi = &traj.states[i];
    let rho0 = psi.projector();
    let source_full = commutator(ch.interaction(), &rho0);
    let mut out = [MasterResiduals { r1: 0.0, r2: 0.0 }; 2];
    for k in Subsystem::BOTH {
        let rho = |m: usize| reduced_state(&traj.states[m], shape, k).map(|d| d.matrix().clone());
        let (rm, rc, rp) = (rho(i - 1)?, rho(i)?, rho(i + 1)?);
        let lhs = (&rp - &rm).scale(I * hbar / (2.0 * st.dt));
        let source = reduce(&source_full, shape, k)?;
        let bare = &commutator(ch.local(k), &rc) + &source;
        let h_eff = effective_hamiltonian(st, k, i)?;
        let eff = &commutator(&h_eff, &rc) + &population_term(st, k, i)?;
        out[k.index()] = MasterResiduals {
            r1: (&lhs - &bare).norm_fro(),
            r2: (&lhs - &eff).norm_fro(),
        };
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LindbladReport {
    pub dissipator: ComplexMatrix,
    pub population_term: ComplexMatrix,
    /// Branches `β` left out because `λ_β² ≤ eps`.
    pub excluded: Vec<usize>,
    /// `‖dissipator − population term‖`
    pub distance: f64,
    /// `γ_αβ`; zero rows/columns for excluded branches.
    pub rates: Vec<Vec<f64>>,
}

/// Lindblad-like form with jumps `G_αβ = |φ_α⟩⟨φ_β|` and
/// rates `γ_αβ = (dλ_α²/dt)/(r·λ_β²)`, `r` the number of paired branches.
pub fn lindblad_assembly(
    st: &SchmidtTrajectory,
    k: Subsystem,
    i: usize,
    eps: f64,
) -> Result<LindbladReport> {
    let frame = &st.frames[i];
    let rates = population_rates(st, i)?;
    let r = frame.paired();
    let b = frame.basis(k);
    let d = b.rows();
    let rho = frame.local_state(k);
    let excluded: Vec<usize> = (0..r).filter(|&j| frame.lambda[j].powi(2) <= eps).collect();
    let mut gamma = vec![vec![0.0; r]; r];
    let mut diss = ComplexMatrix::zeros(d, d);
    for beta in (0..r).filter(|b| !excluded.contains(b)) {
        let lb2 = frame.lambda[beta].powi(2);
        let phi_b = b.column(beta);
        for alpha in 0..r {
            let g = rates[alpha] / (r as f64 * lb2);
            gamma[alpha][beta] = g;
            let phi_a = b.column(alpha);
            let jump = ComplexMatrix::from_fn(d, d, |x, y| phi_a[x] * phi_b[y].conj());
            let jd = jump.adjoint();
            let sandwich = &(&jump * &rho) * &jd;
            let jj = &jd * &jump;
            let anti = &(&jj * &rho) + &(&rho * &jj);
            let term = &sandwich - &anti.scale_re(0.5);
            diss = &diss + &term.scale(I * st.hbar * g);
        }
    }
    let pop = population_term(st, k, i)?;
    Ok(LindbladReport {
        distance: (&diss - &pop).norm_fro(),
        dissipator: diss,
        population_term: pop,
        excluded,
        rates: gamma,
    })
}

/// `C_jk = ⟨φ_j¹φ_j²|Hint|φ_k¹φ_k²⟩` over paired branches.
pub fn coupling_diagnostic(
    st: &SchmidtTrajectory,
    ch: &CompositeHamiltonian,
    i: usize,
) -> Result<ComplexMatrix> {
    let frame = st.frames.get(i).ok_or(Error::Index {
        index: i,
        range: format!("0..{}", st.len()),
    })?;
    let r = frame.paired();
    let products: Vec<Vec<C64>> = (0..r)
        .map(|j| {
            let a = frame.basis1.column(j);
            let b = frame.basis2.column(j);
            a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
        })
        .collect();
    let hv: Vec<Vec<C64>> = products.iter().map(|p| ch.interaction().mul_vec(p)).collect();
    Ok(ComplexMatrix::from_fn(r, r, |j, m| inner(&products[j], &hv[m])))
}

/// `dλ_j/dt = (s_j/ħ) Σ_{m≠j} s_m λ_m Im C_jm`, exact for Schrödinger dynamics.
pub fn coefficient_rates(
    st: &SchmidtTrajectory,
    ch: &CompositeHamiltonian,
    i: usize,
) -> Result<Vec<f64>> {
    let c = coupling_diagnostic(st, ch, i)?;
    let frame = &st.frames[i];
    let lam = frame.signed_lambda();
    Ok((0..lam.len())
        .map(|j| {
            frame.sign[j]
                * (0..lam.len())
                    .filter(|&m| m != j)
                    .map(|m| lam[m] * c[(j, m)].im)
                    .sum::<f64>()
                / ch.hbar()
        })
        .collect())
}

/// Upper bound `(1/ħ) Σ_{m≠j} λ_m |C_jm|` on `|dλ_j/dt|`.
pub fn coefficient_rate_bounds(
    st: &SchmidtTrajectory,
    ch: &CompositeHamiltonian,
    i: usize,
) -> Result<Vec<f64>> {
    let c = coupling_diagnostic(st, ch, i)?;
    let lam = &st.frames[i].lambda;
    Ok((0..lam.len())
        .map(|j| {
            (0..lam.len())
                .filter(|&m| m != j)
                .map(|m| lam[m] * c[(j, m)].norm())
                .sum::<f64>()
                / ch.hbar()
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SemiclassicalReport {
    /// `H_k + tr_{k̄}{Hint·(1 ⊗ ρ_{k̄})}`
    pub reference: ComplexMatrix,
    /// `‖H̃_k − reference‖_op`
    pub distance: f64,
    /// `‖(H̃_k − reference)·ρ_k‖_op`: the part of the distance the state can feel.
    /// Branches with vanishing weight drop out here but not in `distance`.
    pub weighted_distance: f64,
}

/// Mean-field comparison at an interior step.
pub fn semiclassical_reference(
    st: &SchmidtTrajectory,
    ch: &CompositeHamiltonian,
    i: usize,
    k: Subsystem,
) -> Result<SemiclassicalReport> {
    let shape = ch.shape();
    let other = k.other();
    let rho_other = st.frames[i].local_state(other);
    let lifted = embed(&rho_other, shape, other);
    let field = reduce(&(ch.interaction() * &lifted), shape, k)?;
    let reference = ch.local(k) + &field.hermitian_part();
    let h_eff = effective_hamiltonian(st, k, i)?;
    let diff = &h_eff - &reference;
    let weighted_distance = (&diff * &st.frames[i].local_state(k)).norm_op();
    Ok(SemiclassicalReport {
        distance: diff.norm_op(),
        weighted_distance,
        reference,
    })
}
