//! Mixed global states as spectral ensembles of pure branches.
//!
//! Each branch is run through the pure pipeline on its own; ensemble energies
//! are probability-weighted branch energies. No single "entire" effective
//! operator is built.

use rayon::prelude::*;

use crate::analysis::{analyze_pure, PureAnalysis};
use crate::dynamics::{assemble_total, evolve_density, CompositeHamiltonian, TimeGrid};
use crate::error::{Error, Result};
use crate::gauge::GaugePolicy;
use crate::hilbert::{partial_trace, BipartitionShape, DensityMatrix, Ket, Subsystem};
use crate::numkernel::{hermitian_eig, ComplexMatrix};

#[derive(Clone, Debug)]
pub struct EnsembleState {
    pub probabilities: Vec<f64>,
    pub branches: Vec<Ket>,
    /// Weight removed with branches below the cutoff, before renormalization.
    pub dropped_mass: f64,
    /// `ln Z` for thermal ensembles.
    pub log_partition: Option<f64>,
}

impl EnsembleState {
    pub fn new(probabilities: Vec<f64>, branches: Vec<Ket>) -> Result<Self> {
        let s = Self {
            probabilities,
            branches,
            dropped_mass: 0.0,
            log_partition: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn pure(psi: Ket) -> Self {
        Self {
            probabilities: vec![1.0],
            branches: vec![psi],
            dropped_mass: 0.0,
            log_partition: None,
        }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probabilities.len() != self.branches.len() || self.branches.is_empty() {
            return Err(Error::Invalid("need one probability per branch".into()));
        }
        if self.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Invalid("probabilities must be nonnegative".into()));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("probabilities sum to {total}")));
        }
        let gram = self.gram_residual();
        if gram > 1e-10 {
            return Err(Error::Invalid(format!("branches not orthonormal ({gram:.3e})")));
        }
        Ok(())
    }

    /// `max |⟨Ψ_a|Ψ_b⟩ − δ_ab|`.
    pub fn gram_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, x) in self.branches.iter().enumerate() {
            for (b, y) in self.branches.iter().enumerate() {
                let d = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((x.inner(y) - d).norm());
            }
        }
        worst
    }

    /// `Σ P_η |Ψ_η⟩⟨Ψ_η|`
    pub fn density(&self) -> ComplexMatrix {
        let n = self.branches[0].dim();
        self.probabilities
            .iter()
            .zip(&self.branches)
            .fold(ComplexMatrix::zeros(n, n), |acc, (p, b)| {
                &acc + &b.projector().scale_re(*p)
            })
    }
}

/// Eigen-decomposition of `ρ0`; branches with `P ≤ tol` are dropped and the rest renormalized.
pub fn spectral_branches(rho0: &DensityMatrix, tol: f64) -> Result<EnsembleState> {
    let eig = hermitian_eig(rho0.matrix())?;
    let mut probabilities = Vec::new();
    let mut branches = Vec::new();
    let mut dropped = 0.0;
    // Descending weight order.
    for j in (0..eig.eigenvalues.len()).rev() {
        let p = eig.eigenvalues[j];
        if p > tol {
            probabilities.push(p);
            branches.push(Ket::normalized(eig.eigenvectors.column(j))?);
        } else {
            dropped += p.max(0.0);
        }
    }
    let kept: f64 = probabilities.iter().sum();
    if kept <= 0.0 {
        return Err(Error::InvalidDensity("no branch above cutoff".into()));
    }
    probabilities.iter_mut().for_each(|p| *p /= kept);
    if dropped > 0.0 {
        log::info!("dropped {dropped:.3e} probability mass below {tol:.1e}");
    }
    Ok(EnsembleState {
        probabilities,
        branches,
        dropped_mass: dropped,
        log_partition: None,
    })
}

/// Gibbs ensemble over the eigenstates of `H0`.
pub fn thermal_init(ch: &CompositeHamiltonian, beta: f64) -> Result<EnsembleState> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta must be finite and ≥ 0, got {beta}")));
    }
    let eig = hermitian_eig(&assemble_total(ch))?;
    let e_min = eig.eigenvalues[0];
    // Shifted exponent keeps every weight ≤ 1.
    let w: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|e| (-beta * (e - e_min)).exp())
        .collect();
    let z_shift: f64 = w.iter().sum();
    let branches = (0..w.len())
        .map(|j| Ket::normalized(eig.eigenvectors.column(j)))
        .collect::<Result<_>>()?;
    Ok(EnsembleState {
        probabilities: w.iter().map(|x| x / z_shift).collect(),
        branches,
        dropped_mass: 0.0,
        log_partition: Some(z_shift.ln() - beta * e_min),
    })
}

#[derive(Clone, Debug)]
pub struct EnsembleLedger {
    pub times: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub branches: Vec<PureAnalysis>,
    /// `Σ_η P_η ⟨H̃_η^{(k)}⟩`
    pub u_local: [Vec<f64>; 2],
    /// `Σ_η P_η ⟨H0⟩_η`
    pub u0: Vec<f64>,
    /// `tr(H0 ρ0(t0))`
    pub u0_direct: f64,
    /// `U¹ + U² − U⁰(t0)`
    pub additivity: Vec<f64>,
    /// Max over branches of each branch's own additivity residual (interior steps).
    pub branch_additivity: Vec<f64>,
    /// `max_i ‖Σ_η P_η σ_η^{(k)} − tr_k̄ ρ0(t_i)‖_F`, per subsystem.
    pub local_state_residual: [f64; 2],
    /// `max_{η,i} |⟨Ψ_η(t_i)|ρ0(t_i)|Ψ_η(t_i)⟩ − P_η|`
    pub population_drift: f64,
}

impl EnsembleLedger {
    pub fn max_additivity(&self) -> f64 {
        crate::thermo::interior_max(&self.additivity)
    }

    /// Ensemble energy-conservation defect `max_i |U⁰(t_i) − U⁰(t0)|`.
    pub fn conservation_defect(&self) -> f64 {
        let u = self.u0[0];
        self.u0.iter().map(|x| (x - u).abs()).fold(0.0, f64::max)
    }
}

/// Runs every branch through the pure pipeline concurrently and assembles the ensemble.
pub fn run_ensemble(
    ch: &CompositeHamiltonian,
    ens: &EnsembleState,
    grid: TimeGrid,
    policy: &GaugePolicy,
) -> Result<EnsembleLedger> {
    ens.validate()?;
    let runs: Vec<PureAnalysis> = ens
        .branches
        .par_iter()
        .enumerate()
        .map(|(eta, psi)| {
            analyze_pure(ch, psi, grid, policy).map_err(|e| Error::Branch {
                branch: eta,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n = grid.steps;
    let p = &ens.probabilities;
    let weighted = |f: &dyn Fn(&PureAnalysis, usize) -> f64| -> Vec<f64> {
        (0..n)
            .map(|i| runs.iter().zip(p).map(|(r, w)| w * f(r, i)).sum())
            .collect()
    };
    let u_local = [
        weighted(&|r, i| r.energy.u_eff[0][i]),
        weighted(&|r, i| r.energy.u_eff[1][i]),
    ];
    let u0 = weighted(&|r, i| r.energy.total[i]);
    let additivity = (0..n).map(|i| u_local[0][i] + u_local[1][i] - u0[0]).collect();
    let branch_additivity = runs.iter().map(|r| r.energy.max_additivity()).collect();

    let rho0 = DensityMatrix::new(ens.density())?;
    let u0_direct = crate::hilbert::trace_product(&assemble_total(ch), rho0.matrix()).re;
    let global = evolve_density(ch, &rho0, grid)?;
    let shape: BipartitionShape = ch.shape();
    let mut local_state_residual = [0.0f64; 2];
    let mut drift: f64 = 0.0;
    for (i, rho_t) in global.iter().enumerate() {
        for k in Subsystem::BOTH {
            let direct = partial_trace(rho_t, shape, k)?;
            let d = shape.dim(k);
            let avg = runs
                .iter()
                .zip(p)
                .fold(ComplexMatrix::zeros(d, d), |acc, (r, w)| {
                    &acc + &r.frames.frames[i].local_state(k).scale_re(*w)
                });
            let res = (&avg - direct.matrix()).norm_fro();
            local_state_residual[k.index()] = local_state_residual[k.index()].max(res);
        }
        for (r, w) in runs.iter().zip(p) {
            let psi = &r.traj.states[i];
            let pop = psi.inner(&psi.apply(rho_t.matrix())).re;
            drift = drift.max((pop - w).abs());
        }
    }

    Ok(EnsembleLedger {
        times: grid.times(),
        probabilities: p.clone(),
        branches: runs,
        u_local,
        u0,
        u0_direct,
        additivity,
        branch_additivity,
        local_state_residual,
        population_drift: drift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitaryRelation {
    /// `‖T T† − 1‖_F`
    pub unitarity: f64,
    /// `max_j ‖φ_ηj − T φ_αj‖`
    pub mapping: f64,
}

/// `T_ηα = Σ_m |φ_ηm⟩⟨φ_αm|` on subsystem `k` at step `i`, and its two checks.
pub fn branch_unitary_relation(
    run: &EnsembleLedger,
    eta: usize,
    alpha: usize,
    k: Subsystem,
    i: usize,
) -> Result<(ComplexMatrix, UnitaryRelation)> {
    let get = |b: usize| {
        run.branches.get(b).ok_or(Error::Index {
            index: b,
            range: format!("0..{}", run.branches.len()),
        })
    };
    let (re, ra) = (get(eta)?, get(alpha)?);
    fn frame(r: &PureAnalysis, i: usize) -> Result<&crate::schmidt::SchmidtFrame> {
        r.frames.frames.get(i).ok_or(Error::Index {
            index: i,
            range: format!("0..{}", r.frames.len()),
        })
    }
    let be = frame(re, i)?.basis(k);
    let ba = frame(ra, i)?.basis(k);
    let t = be * &ba.adjoint();
    let d = t.rows();
    let unitarity = (&(&t * &t.adjoint()) - &ComplexMatrix::identity(d)).norm_fro();
    let mapped = &t * ba;
    let mapping = (0..d)
        .map(|j| {
            mapped
                .column(j)
                .iter()
                .zip(be.column(j))
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok((t, UnitaryRelation { unitarity, mapping }))
}
