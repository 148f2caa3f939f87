//! One-call pipeline for a pure initial state: propagate, align, differentiate, account.

use crate::dynamics::{propagate_pure, CompositeHamiltonian, PureTrajectory, TimeGrid};
use crate::effective::{effective_series, EffectiveSeries};
use crate::error::Result;
use crate::gauge::GaugePolicy;
use crate::hilbert::Ket;
use crate::schmidt::{align_track, SchmidtTrajectory};
use crate::thermo::{energies, EnergyLedger};

#[derive(Clone, Debug)]
pub struct PureAnalysis {
    pub traj: PureTrajectory,
    pub frames: SchmidtTrajectory,
    pub effective: EffectiveSeries,
    pub energy: EnergyLedger,
}

pub fn analyze_pure(
    ch: &CompositeHamiltonian,
    psi0: &Ket,
    grid: TimeGrid,
    policy: &GaugePolicy,
) -> Result<PureAnalysis> {
    grid.check_resolution(ch);
    let traj = propagate_pure(ch, psi0, grid)?;
    let frames = align_track(&traj, ch, policy)?;
    let effective = effective_series(&frames, ch)?;
    let energy = energies(&frames, &effective, ch)?;
    Ok(PureAnalysis {
        traj,
        frames,
        effective,
        energy,
    })
}
