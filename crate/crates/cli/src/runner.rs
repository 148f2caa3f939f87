//! Runs a configured experiment through the core pipeline.

use serde::{Deserialize, Serialize};
use schmidt_core::analysis::{analyze_pure, PureAnalysis};
use schmidt_core::dynamics::{evolve_density, CompositeHamiltonian, TimeGrid};
use schmidt_core::gauge::GaugePolicy;
use schmidt_core::hilbert::{partial_trace, purity, vn_entropy, DensityMatrix, Subsystem};
use schmidt_core::mixed::{run_ensemble, EnsembleLedger, EnsembleState};
use schmidt_core::schmidt::FrameFlag;
use schmidt_core::thermo::{
    entropy_series, local_states, sec_check, work_heat_bare_alicki, work_heat_bare_eigenensemble,
    work_heat_bare_spectral, work_heat_effective_alicki, work_heat_effective_spectral, EnergyLedger, EntropySeries,
    FluxDefinition, FluxLedger, FluxPart, SecReport,
};

use crate::config::{ExperimentConfig, Initial};
use crate::error::CliError;

pub struct PureRun {
    pub analysis: PureAnalysis,
    /// In the order of [`FluxDefinition::ALL`].
    pub fluxes: Vec<FluxLedger>,
    pub entropy: EntropySeries,
}

pub struct MixedRun {
    pub ensemble: EnsembleState,
    pub ledger: EnsembleLedger,
    pub global: Vec<DensityMatrix>,
    /// Probability-weighted branch ledgers.
    pub energy: EnergyLedger,
    pub fluxes: Vec<FluxLedger>,
    pub entropy: EntropySeries,
    pub branch_fluxes: Vec<Vec<FluxLedger>>,
}

pub enum Computed {
    Pure(Box<PureRun>),
    Mixed(Box<MixedRun>),
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub ch: CompositeHamiltonian,
    pub grid: TimeGrid,
    pub policy: GaugePolicy,
    pub sec: SecReport,
    pub computed: Computed,
}

impl Experiment {
    pub fn energy(&self) -> &EnergyLedger {
        match &self.computed {
            Computed::Pure(p) => &p.analysis.energy,
            Computed::Mixed(m) => &m.energy,
        }
    }

    pub fn fluxes(&self) -> &[FluxLedger] {
        match &self.computed {
            Computed::Pure(p) => &p.fluxes,
            Computed::Mixed(m) => &m.fluxes,
        }
    }

    pub fn entropy(&self) -> &EntropySeries {
        match &self.computed {
            Computed::Pure(p) => &p.entropy,
            Computed::Mixed(m) => &m.entropy,
        }
    }

    /// Pure analyses, one per branch.
    pub fn branches(&self) -> Vec<&PureAnalysis> {
        match &self.computed {
            Computed::Pure(p) => vec![&p.analysis],
            Computed::Mixed(m) => m.ledger.branches.iter().collect(),
        }
    }

    pub fn flags(&self) -> Vec<FlagRecord> {
        let times = self.grid.times();
        let mixed = matches!(self.computed, Computed::Mixed(_));
        let mut out = Vec::new();
        for (eta, a) in self.branches().into_iter().enumerate() {
            let branch = mixed.then_some(eta);
            for (i, f) in a.frames.frames.iter().enumerate() {
                for flag in &f.flags {
                    out.push(FlagRecord::frame(branch, i, times[i], flag));
                }
            }
            for &(k, i) in &a.effective.warnings {
                out.push(FlagRecord {
                    branch,
                    step: i,
                    t: times[i],
                    kind: "antihermitian-residual".into(),
                    detail: format!(
                        "subsystem {}: {:.3e}",
                        k.index() + 1,
                        a.effective.antihermitian_residual[k.index()][i]
                    ),
                    severity: Severity::Warning,
                });
            }
        }
        let spectral: Vec<&FluxLedger> = match &self.computed {
            Computed::Pure(p) => vec![&p.fluxes[4]],
            Computed::Mixed(m) => m.branch_fluxes.iter().map(|f| &f[4]).collect(),
        };
        for (eta, l) in spectral.into_iter().enumerate() {
            for &i in &l.flagged {
                out.push(FlagRecord {
                    branch: mixed.then_some(eta),
                    step: i,
                    t: times[i],
                    kind: "ambiguous-spectrum-label".into(),
                    detail: "eigenvector overlap below 1/2".into(),
                    severity: Severity::Warning,
                });
            }
        }
        out
    }
}

/// Ordered: `Warning < Error`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Number of flags at or above `threshold`, if one is configured.
pub fn escalated(flags: &[FlagRecord], threshold: Option<Severity>) -> usize {
    threshold.map_or(0, |t| flags.iter().filter(|f| f.severity >= t).count())
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    pub step: usize,
    pub t: f64,
    pub kind: String,
    pub detail: String,
    pub severity: Severity,
}

impl FlagRecord {
    fn frame(branch: Option<usize>, step: usize, t: f64, flag: &FrameFlag) -> Self {
        let (kind, detail, severity) = match flag {
            FrameFlag::DegenerateBlock(b) => ("degenerate-block", format!("branches {b:?}"), Severity::Warning),
            FrameFlag::TransportFallback(k) => (
                "transport-fallback",
                format!("subsystem {}", k.index() + 1),
                Severity::Error,
            ),
            FrameFlag::VanishingOverlap { branch } => {
                ("vanishing-overlap", format!("branch {branch}"), Severity::Error)
            }
            FrameFlag::Discontinuity { overlap } => {
                ("discontinuity", format!("overlap {overlap:.6}"), Severity::Error)
            }
        };
        Self {
            branch,
            step,
            t,
            kind: kind.into(),
            detail,
            severity,
        }
    }
}

pub fn compute(config: &ExperimentConfig) -> Result<Experiment, CliError> {
    config.check()?;
    let ch = config.hamiltonian()?;
    let grid = config.grid()?;
    let policy = config.policy()?;
    let sec = sec_check(&ch);
    let computed = match config.initial_state(&ch)? {
        Initial::Pure(psi) => {
            let analysis = analyze_pure(&ch, &psi, grid, &policy)?;
            let fluxes = flux_ledgers(&analysis, &ch)?;
            let entropy = entropy_series(&analysis.traj, ch.shape(), Some(&analysis.frames))?;
            Computed::Pure(Box::new(PureRun {
                analysis,
                fluxes,
                entropy,
            }))
        }
        Initial::Mixed(ens) => Computed::Mixed(Box::new(mixed(&ch, ens, grid, &policy)?)),
    };
    Ok(Experiment {
        config: config.clone(),
        ch,
        grid,
        policy,
        sec,
        computed,
    })
}

/// All five ledgers of one pure run, in the order of [`FluxDefinition::ALL`].
pub fn flux_ledgers(a: &PureAnalysis, ch: &CompositeHamiltonian) -> Result<Vec<FluxLedger>, CliError> {
    let rho = local_states(&a.traj, ch.shape())?;
    let times = a.traj.grid.times();
    let dt = a.traj.grid.dt;
    Ok(vec![
        work_heat_bare_alicki(&rho, ch, &times, dt)?,
        work_heat_bare_spectral(ch, &rho, &times, dt)?,
        work_heat_bare_eigenensemble(ch, &a.frames)?,
        work_heat_effective_alicki(&a.effective, &a.frames)?,
        work_heat_effective_spectral(&a.effective, &a.frames)?,
    ])
}

fn mixed(ch: &CompositeHamiltonian, ens: EnsembleState, grid: TimeGrid, policy: &GaugePolicy) -> Result<MixedRun, CliError> {
    let ledger = run_ensemble(ch, &ens, grid, policy)?;
    let global = evolve_density(ch, &DensityMatrix::new(ens.density())?, grid)?;
    let p = &ens.probabilities;
    let branch_fluxes = ledger
        .branches
        .iter()
        .map(|b| flux_ledgers(b, ch))
        .collect::<Result<Vec<_>, _>>()?;
    let fluxes = (0..FluxDefinition::ALL.len())
        .map(|d| weighted_flux(&branch_fluxes.iter().map(|f| &f[d]).collect::<Vec<_>>(), p))
        .collect();
    let energy = weighted_energy(&ledger.branches.iter().map(|b| &b.energy).collect::<Vec<_>>(), p);
    let entropy = mixed_entropy(&global, ch, grid)?;
    Ok(MixedRun {
        ensemble: ens,
        ledger,
        global,
        energy,
        fluxes,
        entropy,
        branch_fluxes,
    })
}

fn mix(series: &[&Vec<f64>], p: &[f64]) -> Vec<f64> {
    (0..series[0].len())
        .map(|i| series.iter().zip(p).map(|(s, w)| w * s[i]).sum())
        .collect()
}

/// Every ledger entry is linear in the branch projector, so the ensemble ledger is the weighted sum.
pub fn weighted_flux(ledgers: &[&FluxLedger], p: &[f64]) -> FluxLedger {
    let part = |k: usize| {
        let parts: Vec<&FluxPart> = ledgers.iter().map(|l| &l.parts[k]).collect();
        let field = |f: fn(&FluxPart) -> &Vec<f64>| mix(&parts.iter().map(|x| f(x)).collect::<Vec<_>>(), p);
        FluxPart {
            energy: field(|x| &x.energy),
            work_rate: field(|x| &x.work_rate),
            heat_rate: field(|x| &x.heat_rate),
            work: field(|x| &x.work),
            heat: field(|x| &x.heat),
        }
    };
    let first = ledgers[0];
    let mut flagged: Vec<usize> = ledgers.iter().flat_map(|l| l.flagged.iter().copied()).collect();
    flagged.sort_unstable();
    flagged.dedup();
    FluxLedger {
        definition: first.definition,
        times: first.times.clone(),
        dt: first.dt,
        parts: [part(0), part(1)],
        identity_residual: first.identity_residual.map(|_| {
            ledgers.iter().filter_map(|l| l.identity_residual).fold((0.0, 0.0), |a, b| (f64::max(a.0, b.0), f64::max(a.1, b.1)))
        }),
        flagged,
    }
}

pub fn weighted_energy(ledgers: &[&EnergyLedger], p: &[f64]) -> EnergyLedger {
    let field = |f: fn(&EnergyLedger) -> &Vec<f64>| mix(&ledgers.iter().map(|x| f(x)).collect::<Vec<_>>(), p);
    EnergyLedger {
        times: ledgers[0].times.clone(),
        u0: ledgers.iter().zip(p).map(|(l, w)| w * l.u0).sum(),
        total: field(|x| &x.total),
        u_eff: [field(|x| &x.u_eff[0]), field(|x| &x.u_eff[1])],
        bare: [field(|x| &x.bare[0]), field(|x| &x.bare[1])],
        interaction: field(|x| &x.interaction),
        lamb_shift: [field(|x| &x.lamb_shift[0]), field(|x| &x.lamb_shift[1])],
        cross: [field(|x| &x.cross[0]), field(|x| &x.cross[1])],
        additivity: field(|x| &x.additivity),
        balance: field(|x| &x.balance),
    }
}

/// Entropies of the evolved global state; `mutual` is `S¹ + S² − S(ρ⁰)`.
fn mixed_entropy(global: &[DensityMatrix], ch: &CompositeHamiltonian, grid: TimeGrid) -> Result<EntropySeries, CliError> {
    let shape = ch.shape();
    let mut out = EntropySeries {
        times: grid.times(),
        ..Default::default()
    };
    for rho in global {
        let r1 = partial_trace(rho, shape, Subsystem::One)?;
        let r2 = partial_trace(rho, shape, Subsystem::Two)?;
        let (s1, s2) = (vn_entropy(&r1)?, vn_entropy(&r2)?);
        out.s1.push(s1);
        out.s2.push(s2);
        out.purity1.push(purity(&r1));
        out.purity2.push(purity(&r2));
        out.mutual.push(s1 + s2 - vn_entropy(rho)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub g: f64,
    /// `max_t ‖H̃_k − H_k‖` over interior steps and branches.
    pub max_deviation: [f64; 2],
    pub max_additivity: f64,
}

pub fn sweep_row(exp: &Experiment, g: f64) -> SweepRow {
    let mut dev = [0.0f64; 2];
    for a in exp.branches() {
        for k in Subsystem::BOTH {
            dev[k.index()] = dev[k.index()].max(a.effective.max_deviation(&exp.ch, k));
        }
    }
    SweepRow {
        g,
        max_deviation: dev,
        max_additivity: exp.energy().max_additivity(),
    }
}

/// Config copies with the coupling replaced; only presets carry a `g`.
pub fn sweep_configs(base: &ExperimentConfig, values: &[f64]) -> Result<Vec<ExperimentConfig>, CliError> {
    if base.system.preset.is_none() {
        return Err(CliError::config("system.preset", "sweeping g needs a preset system"));
    }
    Ok(values
        .iter()
        .map(|&g| {
            let mut c = base.clone();
            c.system.g = Some(g);
            c.out_dir = base.out_dir.join(format!("g_{g}"));
            c
        })
        .collect())
}
