//! Energy accounting and work/heat flux definitions for both subsystems.
//!
//! Every ledger is built from per-interval increments obeying the discrete
//! product rule `Δ(xy) = x̄·Δy + ȳ·Δx` (bars are interval means), so each
//! definition closes its own first law exactly. Grid-point rates are means of
//! the adjacent interval rates, which reproduces the central difference of
//! the energy in the interior and the one-sided second-order stencil at the ends.

use serde::Serialize;

use crate::assign::max_weight_assignment;
use crate::dynamics::{assemble_total, CompositeHamiltonian, PureTrajectory};
use crate::effective::EffectiveSeries;
use crate::error::{Error, Result};
use crate::hilbert::{reduced_state, shannon_entropy, trace_product, vn_entropy, BipartitionShape, Subsystem};
use crate::numkernel::{commutator, hermitian_eig, ComplexMatrix};
use crate::schmidt::SchmidtTrajectory;

#[derive(Clone, Debug, Serialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `⟨H0⟩` at t0.
    pub u0: f64,
    /// `⟨H0⟩(t_i)`
    pub total: Vec<f64>,
    /// `⟨H̃_k⟩`
    pub u_eff: [Vec<f64>; 2],
    /// `⟨H_k⟩`
    pub bare: [Vec<f64>; 2],
    pub interaction: Vec<f64>,
    pub lamb_shift: [Vec<f64>; 2],
    pub cross: [Vec<f64>; 2],
    /// `⟨H̃¹⟩ + ⟨H̃²⟩ − U⁰`
    pub additivity: Vec<f64>,
    /// `⟨H¹⟩ + ⟨H²⟩ + ⟨Hint⟩ − U⁰`
    pub balance: Vec<f64>,
}

impl EnergyLedger {
    /// Max additivity residual over interior steps.
    pub fn max_additivity(&self) -> f64 {
        interior_max(&self.additivity)
    }

    /// Max of `|Σ_k(⟨H_LS⟩+⟨H_X⟩) − ⟨Hint⟩|` over interior steps.
    pub fn max_interaction_balance(&self) -> f64 {
        let r: Vec<f64> = (0..self.times.len())
            .map(|i| {
                self.lamb_shift[0][i] + self.cross[0][i] + self.lamb_shift[1][i] + self.cross[1][i]
                    - self.interaction[i]
            })
            .collect();
        interior_max(&r)
    }
}

pub(crate) fn interior_max(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    }
    v[1..n - 1].iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn re_trace(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    trace_product(a, b).re
}

/// Energy series of an aligned trajectory and its effective Hamiltonians.
pub fn energies(
    st: &SchmidtTrajectory,
    es: &EffectiveSeries,
    ch: &CompositeHamiltonian,
) -> Result<EnergyLedger> {
    let n = st.len();
    if es.times.len() != n {
        return Err(Error::Grid(format!(
            "effective series has {} samples, trajectory {}",
            es.times.len(),
            n
        )));
    }
    let h0 = assemble_total(ch);
    let mut total = Vec::with_capacity(n);
    let mut interaction = Vec::with_capacity(n);
    let mut u_eff = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut bare = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut ls = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut x = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (i, frame) in st.frames.iter().enumerate() {
        let psi = frame.reconstruct();
        total.push(crate::hilbert::expectation(&h0, &psi)?.re);
        interaction.push(crate::hilbert::expectation(ch.interaction(), &psi)?.re);
        for k in Subsystem::BOTH {
            let ki = k.index();
            let rho = frame.local_state(k);
            u_eff[ki].push(re_trace(&es.h_eff[ki][i], &rho));
            bare[ki].push(re_trace(ch.local(k), &rho));
            ls[ki].push(re_trace(&es.components[ki][i].0, &rho));
            x[ki].push(re_trace(&es.components[ki][i].1, &rho));
        }
    }
    let u0 = total[0];
    let additivity = (0..n).map(|i| u_eff[0][i] + u_eff[1][i] - u0).collect();
    let balance = (0..n)
        .map(|i| bare[0][i] + bare[1][i] + interaction[i] - u0)
        .collect();
    Ok(EnergyLedger {
        times: st.times(),
        u0,
        total,
        u_eff,
        bare,
        interaction,
        lamb_shift: ls,
        cross: x,
        additivity,
        balance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecReport {
    pub commutator_norm: f64,
    pub is_sec: bool,
}

/// Strict energy conservation: `[Hint, H¹⊗1 + 1⊗H²] = 0`.
pub fn sec_check(ch: &CompositeHamiltonian) -> SecReport {
    let n = commutator(ch.interaction(), &ch.bare_total()).norm_fro();
    SecReport {
        commutator_norm: n,
        is_sec: n <= 1e-10,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FluxDefinition {
    BareAlicki,
    BareSpectral,
    BareEigenensemble,
    EffAlicki,
    EffSpectral,
}

impl FluxDefinition {
    pub const ALL: [FluxDefinition; 5] = [
        Self::BareAlicki,
        Self::BareSpectral,
        Self::BareEigenensemble,
        Self::EffAlicki,
        Self::EffSpectral,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::BareAlicki => "bare-alicki",
            Self::BareSpectral => "bare-spectral",
            Self::BareEigenensemble => "bare-eigenensemble",
            Self::EffAlicki => "eff-alicki",
            Self::EffSpectral => "eff-spectral",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.id() == s)
    }

    pub fn is_effective(self) -> bool {
        matches!(self, Self::EffAlicki | Self::EffSpectral)
    }
}

/// Flux series of one subsystem under one definition.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FluxPart {
    /// The definition's own energy notion.
    pub energy: Vec<f64>,
    pub work_rate: Vec<f64>,
    pub heat_rate: Vec<f64>,
    /// Cumulative, zero at t0.
    pub work: Vec<f64>,
    pub heat: Vec<f64>,
}

impl FluxPart {
    /// Builds rates and integrals from interval increments (`len = n − 1`).
    fn from_increments(energy: Vec<f64>, dw: &[f64], dq: &[f64], dt: f64) -> Result<Self> {
        let n = energy.len();
        if n < 3 || dw.len() != n - 1 || dq.len() != n - 1 {
            return Err(Error::Grid("flux ledgers need at least 3 samples".into()));
        }
        let rates = |inc: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| match i {
                    0 => (3.0 * inc[0] - inc[1]) / (2.0 * dt),
                    _ if i == n - 1 => (3.0 * inc[n - 2] - inc[n - 3]) / (2.0 * dt),
                    _ => (inc[i - 1] + inc[i]) / (2.0 * dt),
                })
                .collect()
        };
        let cumulative = |inc: &[f64]| -> Vec<f64> {
            let mut acc = 0.0;
            let mut v = vec![0.0];
            for x in inc {
                acc += x;
                v.push(acc);
            }
            v
        };
        Ok(Self {
            work_rate: rates(dw),
            heat_rate: rates(dq),
            work: cumulative(dw),
            heat: cumulative(dq),
            energy,
        })
    }

    /// Max `|dU/dt − dW/dt − dQ/dt|` with `dU/dt` from the energy series.
    pub fn closure_rate_residual(&self, dt: f64) -> f64 {
        let n = self.energy.len();
        (0..n)
            .map(|i| {
                let du = crate::effective::fd_scalar(&self.energy, i, dt).unwrap_or(0.0);
                (du - self.work_rate[i] - self.heat_rate[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max `|W(t) + Q(t) − (U(t) − U(t0))|`.
    pub fn closure_cumulative_residual(&self) -> f64 {
        let u0 = self.energy[0];
        (0..self.energy.len())
            .map(|i| (self.work[i] + self.heat[i] - (self.energy[i] - u0)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxLedger {
    pub definition: FluxDefinition,
    pub times: Vec<f64>,
    pub dt: f64,
    pub parts: [FluxPart; 2],
    /// Eff-alicki only: max rate deviation from the effective eigen-ensemble
    /// split, `(work, heat)` over both subsystems and the balance window.
    pub identity_residual: Option<(f64, f64)>,
    /// Steps where tracking was ambiguous.
    pub flagged: Vec<usize>,
}

impl FluxLedger {
    pub fn part(&self, k: Subsystem) -> &FluxPart {
        &self.parts[k.index()]
    }

    /// `Σ_k (dW_k/dt + dQ_k/dt)` per step.
    pub fn net_rate(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| {
                self.parts
                    .iter()
                    .map(|p| p.work_rate[i] + p.heat_rate[i])
                    .sum()
            })
            .collect()
    }

    /// Max `|Σ_k (dW_k/dt + dQ_k/dt)|` over the balance window.
    pub fn max_net_rate(&self) -> f64 {
        let net = self.net_rate();
        balance_window(net.len())
            .map(|i| net[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn max_closure_rate(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.closure_rate_residual(self.dt))
            .fold(0.0, f64::max)
    }

    pub fn max_closure_cumulative(&self) -> f64 {
        self.parts
            .iter()
            .map(FluxPart::closure_cumulative_residual)
            .fold(0.0, f64::max)
    }
}

/// Steps whose rates use no endpoint sample. Endpoint `H̃` comes from a
/// one-sided stencil, and its different truncation error enters the adjacent
/// rates at `O(dt)`.
pub fn balance_window(n: usize) -> std::ops::Range<usize> {
    2..n.saturating_sub(2)
}

fn mean(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Increments for `U = Σ_j x_j y_j`: `(Σ ȳ Δx, Σ x̄ Δy)`; work uses `x`, heat `y`.
fn split_increments(x: &[Vec<f64>], y: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut dw = Vec::with_capacity(n - 1);
    let mut dq = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let m = x[i].len();
        dw.push(
            (0..m)
                .map(|j| (x[i + 1][j] - x[i][j]) * mean(y[i][j], y[i + 1][j]))
                .sum(),
        );
        dq.push(
            (0..m)
                .map(|j| mean(x[i][j], x[i + 1][j]) * (y[i + 1][j] - y[i][j]))
                .sum(),
        );
    }
    (dw, dq)
}

/// Work/heat for `U = tr(Hρ)`: `ΔW = tr(ΔH·ρ̄)`, `ΔQ = tr(H̄·Δρ)`.
fn alicki_part(h: &[&ComplexMatrix], rho: &[ComplexMatrix], dt: f64) -> Result<FluxPart> {
    let n = rho.len();
    let energy: Vec<f64> = (0..n).map(|i| re_trace(h[i], &rho[i])).collect();
    let mut dw = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    for i in 0..n.saturating_sub(1) {
        let dh = h[i + 1] - h[i];
        let rbar = (&rho[i] + &rho[i + 1]).scale_re(0.5);
        let hbar = (h[i] + h[i + 1]).scale_re(0.5);
        let drho = &rho[i + 1] - &rho[i];
        dw.push(re_trace(&dh, &rbar));
        dq.push(re_trace(&hbar, &drho));
    }
    FluxPart::from_increments(energy, &dw, &dq, dt)
}

/// Local states `ρ_k(t_i)` from a pure trajectory.
pub fn local_states(traj: &PureTrajectory, shape: BipartitionShape) -> Result<[Vec<ComplexMatrix>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for k in Subsystem::BOTH {
        out[k.index()] = traj
            .states
            .iter()
            .map(|psi| reduced_state(psi, shape, k).map(|d| d.matrix().clone()))
            .collect::<Result<_>>()?;
    }
    Ok(out)
}

pub fn work_heat_bare_alicki(
    rho: &[Vec<ComplexMatrix>; 2],
    ch: &CompositeHamiltonian,
    times: &[f64],
    dt: f64,
) -> Result<FluxLedger> {
    let mut parts: [FluxPart; 2] = Default::default();
    for k in Subsystem::BOTH {
        let h = vec![ch.local(k); rho[k.index()].len()];
        parts[k.index()] = alicki_part(&h, &rho[k.index()], dt)?;
    }
    Ok(FluxLedger {
        definition: FluxDefinition::BareAlicki,
        times: times.to_vec(),
        dt,
        parts,
        identity_residual: None,
        flagged: Vec::new(),
    })
}

pub fn work_heat_bare_spectral(
    ch: &CompositeHamiltonian,
    rho: &[Vec<ComplexMatrix>; 2],
    times: &[f64],
    dt: f64,
) -> Result<FluxLedger> {
    let mut parts: [FluxPart; 2] = Default::default();
    for k in Subsystem::BOTH {
        let eig = hermitian_eig(ch.local(k))?;
        let b = &eig.eigenvectors;
        let series = &rho[k.index()];
        let eps: Vec<Vec<f64>> = vec![eig.eigenvalues.clone(); series.len()];
        let pops: Vec<Vec<f64>> = series
            .iter()
            .map(|r| &(&b.adjoint() * r) * b)
            .map(|m| (0..m.rows()).map(|j| m[(j, j)].re).collect())
            .collect();
        let energy = eps
            .iter()
            .zip(&pops)
            .map(|(e, p)| e.iter().zip(p).map(|(a, b)| a * b).sum())
            .collect();
        let (dw, dq) = split_increments(&eps, &pops);
        parts[k.index()] = FluxPart::from_increments(energy, &dw, &dq, dt)?;
    }
    Ok(FluxLedger {
        definition: FluxDefinition::BareSpectral,
        times: times.to_vec(),
        dt,
        parts,
        identity_residual: None,
        flagged: Vec::new(),
    })
}

/// Eigen-ensemble split of `U = Σ_j λ_j² ⟨φ_j|O_i|φ_j⟩` for an operator series `O_i`.
fn eigenensemble_part(ops: &[&ComplexMatrix], st: &SchmidtTrajectory, k: Subsystem) -> Result<FluxPart> {
    let eps: Vec<Vec<f64>> = st
        .frames
        .iter()
        .zip(ops)
        .map(|(f, o)| {
            let b = f.basis(k);
            let m = &(&b.adjoint() * *o) * b;
            (0..f.paired()).map(|j| m[(j, j)].re).collect()
        })
        .collect();
    let pops: Vec<Vec<f64>> = st
        .frames
        .iter()
        .map(|f| f.lambda.iter().map(|l| l * l).collect())
        .collect();
    let energy = eps
        .iter()
        .zip(&pops)
        .map(|(e, p)| e.iter().zip(p).map(|(a, b)| a * b).sum())
        .collect();
    let (dw, dq) = split_increments(&eps, &pops);
    FluxPart::from_increments(energy, &dw, &dq, st.dt)
}

pub fn work_heat_bare_eigenensemble(
    ch: &CompositeHamiltonian,
    st: &SchmidtTrajectory,
) -> Result<FluxLedger> {
    let mut parts: [FluxPart; 2] = Default::default();
    for k in Subsystem::BOTH {
        let ops = vec![ch.local(k); st.len()];
        parts[k.index()] = eigenensemble_part(&ops, st, k)?;
    }
    Ok(FluxLedger {
        definition: FluxDefinition::BareEigenensemble,
        times: st.times(),
        dt: st.dt,
        parts,
        identity_residual: None,
        flagged: Vec::new(),
    })
}

fn check_grid(es: &EffectiveSeries, st: &SchmidtTrajectory) -> Result<()> {
    if es.times.len() != st.len() {
        return Err(Error::Grid(format!(
            "effective series has {} samples, trajectory {}",
            es.times.len(),
            st.len()
        )));
    }
    Ok(())
}

/// Effective ledger of Alicki form, with the eigen-ensemble identity check.
pub fn work_heat_effective_alicki(es: &EffectiveSeries, st: &SchmidtTrajectory) -> Result<FluxLedger> {
    check_grid(es, st)?;
    let mut parts: [FluxPart; 2] = Default::default();
    let (mut dw_max, mut dq_max): (f64, f64) = (0.0, 0.0);
    for k in Subsystem::BOTH {
        let ki = k.index();
        let rho: Vec<ComplexMatrix> = st.frames.iter().map(|f| f.local_state(k)).collect();
        let h: Vec<&ComplexMatrix> = es.h_eff[ki].iter().collect();
        let part = alicki_part(&h, &rho, st.dt)?;
        let ens = eigenensemble_part(&h, st, k)?;
        for i in balance_window(st.len()) {
            dw_max = dw_max.max((part.work_rate[i] - ens.work_rate[i]).abs());
            dq_max = dq_max.max((part.heat_rate[i] - ens.heat_rate[i]).abs());
        }
        parts[ki] = part;
    }
    Ok(FluxLedger {
        definition: FluxDefinition::EffAlicki,
        times: st.times(),
        dt: st.dt,
        parts,
        identity_residual: Some((dw_max, dq_max)),
        flagged: Vec::new(),
    })
}

/// Effective eigen-ensemble ledger (`ε̃_j = ⟨φ_j|H̃|φ_j⟩`), used as the
/// comparison partner of the effective Alicki form.
pub fn work_heat_effective_eigenensemble(
    es: &EffectiveSeries,
    st: &SchmidtTrajectory,
) -> Result<[FluxPart; 2]> {
    check_grid(es, st)?;
    let mut parts: [FluxPart; 2] = Default::default();
    for k in Subsystem::BOTH {
        let h: Vec<&ComplexMatrix> = es.h_eff[k.index()].iter().collect();
        parts[k.index()] = eigenensemble_part(&h, st, k)?;
    }
    Ok(parts)
}

/// Eigenvalues of an operator series, labels continued by eigenvector overlap.
///
/// Returns `(values[i][j], vectors[i])` and the steps where the best match was ambiguous.
pub fn track_spectrum(series: &[ComplexMatrix]) -> Result<(Vec<Vec<f64>>, Vec<ComplexMatrix>, Vec<usize>)> {
    let mut values = Vec::with_capacity(series.len());
    let mut vectors: Vec<ComplexMatrix> = Vec::with_capacity(series.len());
    let mut flagged = Vec::new();
    for (i, h) in series.iter().enumerate() {
        let eig = hermitian_eig(h)?;
        if i == 0 {
            values.push(eig.eigenvalues);
            vectors.push(eig.eigenvectors);
            continue;
        }
        let prev_v = &vectors[i - 1];
        let prev_e: &Vec<f64> = &values[i - 1];
        let o = &prev_v.adjoint() * &eig.eigenvectors;
        let d = o.rows();
        let scale = prev_e.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let score: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| o[(a, b)].norm_sqr() - 1e-6 * (prev_e[a] - eig.eigenvalues[b]).abs() / scale)
                    .collect()
            })
            .collect();
        let perm = max_weight_assignment(&score);
        if perm.iter().enumerate().any(|(a, &b)| o[(a, b)].norm_sqr() < 0.5) {
            flagged.push(i);
        }
        values.push(perm.iter().map(|&b| eig.eigenvalues[b]).collect());
        vectors.push(eig.eigenvectors.select_columns(&perm));
    }
    Ok((values, vectors, flagged))
}

/// Effective spectral ledger: work from eigenvalue motion, heat from population changes.
pub fn work_heat_effective_spectral(es: &EffectiveSeries, st: &SchmidtTrajectory) -> Result<FluxLedger> {
    check_grid(es, st)?;
    let mut parts: [FluxPart; 2] = Default::default();
    let mut flagged = Vec::new();
    for k in Subsystem::BOTH {
        let ki = k.index();
        let (eps, vecs, fl) = track_spectrum(&es.h_eff[ki])?;
        flagged.extend(fl);
        let pops: Vec<Vec<f64>> = st
            .frames
            .iter()
            .zip(&vecs)
            .map(|(f, v)| {
                let m = &(&v.adjoint() * &f.local_state(k)) * v;
                (0..m.rows()).map(|j| m[(j, j)].re).collect()
            })
            .collect();
        let energy = eps
            .iter()
            .zip(&pops)
            .map(|(e, p)| e.iter().zip(p).map(|(a, b)| a * b).sum())
            .collect();
        let (dw, dq) = split_increments(&eps, &pops);
        parts[ki] = FluxPart::from_increments(energy, &dw, &dq, st.dt)?;
    }
    flagged.sort_unstable();
    flagged.dedup();
    Ok(FluxLedger {
        definition: FluxDefinition::EffSpectral,
        times: st.times(),
        dt: st.dt,
        parts,
        identity_residual: None,
        flagged,
    })
}

/// Gaps `max ε − min ε` of a tracked spectrum.
pub fn spectral_gaps(series: &[ComplexMatrix]) -> Result<Vec<f64>> {
    series
        .iter()
        .map(|h| {
            let e = hermitian_eig(h)?.eigenvalues;
            Ok(e.last().copied().unwrap_or(0.0) - e.first().copied().unwrap_or(0.0))
        })
        .collect()
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub purity1: Vec<f64>,
    pub purity2: Vec<f64>,
    /// `S¹ + S² − S(ρ⁰)`
    pub mutual: Vec<f64>,
    /// Entropy from the Schmidt coefficients, when a frame series is supplied.
    pub schmidt: Vec<f64>,
}

/// Entropy, purity and mutual information from partial traces of the global state.
pub fn entropy_series(
    traj: &PureTrajectory,
    shape: BipartitionShape,
    st: Option<&SchmidtTrajectory>,
) -> Result<EntropySeries> {
    let mut out = EntropySeries {
        times: traj.grid.times(),
        ..Default::default()
    };
    for psi in &traj.states {
        let r1 = reduced_state(psi, shape, Subsystem::One)?;
        let r2 = reduced_state(psi, shape, Subsystem::Two)?;
        let s1 = vn_entropy(&r1)?;
        let s2 = vn_entropy(&r2)?;
        out.s1.push(s1);
        out.s2.push(s2);
        out.purity1.push(crate::hilbert::purity(&r1));
        out.purity2.push(crate::hilbert::purity(&r2));
        // A normalized pure global state has zero entropy.
        out.mutual.push(s1 + s2);
    }
    if let Some(st) = st {
        out.schmidt = st
            .frames
            .iter()
            .map(|f| shannon_entropy(&f.lambda.iter().map(|l| l * l).collect::<Vec<_>>()))
            .collect();
    }
    Ok(out)
}

/// Convenience: expectation of `op` in every state of a trajectory.
pub fn expectation_series(op: &ComplexMatrix, traj: &PureTrajectory) -> Vec<f64> {
    use crate::hilbert::QuantumState;
    traj.states.iter().map(|p| p.expectation_of(op).re).collect()
}

