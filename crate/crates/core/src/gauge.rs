//! Phase-gauge freedom of the Schmidt decomposition: transformations,
//! gauge-fixing policies and the frame-change operators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{local_step_unitary, CompositeHamiltonian};
use crate::error::{Error, Result};
use crate::hilbert::Subsystem;
use crate::numkernel::{ComplexMatrix, C64};
use crate::schmidt::{FrameFlag, SchmidtFrame, SchmidtTrajectory};

/// Overlaps smaller than this cannot carry a phase reference.
pub const MIN_OVERLAP: f64 = 1e-6;

/// Per-slot, per-time phases `θ_j(t_i)`.
///
/// Slots `j < min(d1, d2)` are paired branches (`e^{iθ}` on subsystem 1,
/// `e^{−iθ}` on subsystem 2); higher slots act on the larger factor only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeTransformation {
    pub theta: Vec<Vec<f64>>,
}

impl GaugeTransformation {
    pub fn zeros(steps: usize, slots: usize) -> Self {
        Self {
            theta: vec![vec![0.0; slots]; steps],
        }
    }

    /// `θ_j(t) = α·(t − t0)` on every slot.
    pub fn linear(times: &[f64], slots: usize, alpha: f64) -> Self {
        let t0 = times.first().copied().unwrap_or(0.0);
        Self {
            theta: times.iter().map(|t| vec![alpha * (t - t0); slots]).collect(),
        }
    }

    pub fn validate(&self, steps: usize, slots: usize) -> Result<()> {
        if self.theta.len() != steps || self.theta.iter().any(|r| r.len() != slots) {
            return Err(Error::Dimension(format!(
                "phase table must be {steps} rows of {slots} slots"
            )));
        }
        if self.theta.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite phase".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub enum GaugePolicy {
    #[default]
    Symmetric,
    ParallelTransport(Subsystem),
    BareRotating(Subsystem),
    LinearShift {
        alpha: f64,
    },
    /// Overlaid on the symmetric gauge.
    ExplicitPhases(GaugeTransformation),
}

impl GaugePolicy {
    pub fn name(&self) -> String {
        let sub = |k: &Subsystem| k.index() + 1;
        match self {
            Self::Symmetric => "symmetric".into(),
            Self::ParallelTransport(k) => format!("parallel-transport-{}", sub(k)),
            Self::BareRotating(k) => format!("bare-rotating-{}", sub(k)),
            Self::LinearShift { alpha } => format!("linear-shift(alpha={alpha})"),
            Self::ExplicitPhases(_) => "explicit-phases".into(),
        }
    }

    pub fn validate(&self, steps: usize, slots: usize) -> Result<()> {
        match self {
            Self::LinearShift { alpha } if !alpha.is_finite() => {
                Err(Error::Invalid(format!("alpha must be finite, got {alpha}")))
            }
            Self::ExplicitPhases(t) => t.validate(steps, slots),
            _ => Ok(()),
        }
    }
}

/// Bare local Hamiltonians and their single-step propagators.
#[derive(Clone, Debug)]
pub struct LocalPropagators {
    pub h: [ComplexMatrix; 2],
    pub u: [ComplexMatrix; 2],
    pub hbar: f64,
    pub dt: f64,
}

impl LocalPropagators {
    pub fn new(ch: &CompositeHamiltonian, dt: f64) -> Result<Self> {
        Ok(Self {
            h: [
                ch.local(Subsystem::One).clone(),
                ch.local(Subsystem::Two).clone(),
            ],
            u: [
                local_step_unitary(ch, Subsystem::One, dt)?,
                local_step_unitary(ch, Subsystem::Two, dt)?,
            ],
            hbar: ch.hbar(),
            dt,
        })
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

fn column_overlap(a: &ComplexMatrix, b: &ComplexMatrix, j: usize) -> C64 {
    (0..a.rows()).map(|r| a[(r, j)].conj() * b[(r, j)]).sum()
}

fn column_energy(h: &ComplexMatrix, b: &ComplexMatrix, j: usize) -> f64 {
    let v = b.column(j);
    let hv = h.mul_vec(&v);
    v.iter().zip(&hv).map(|(a, x)| a.conj() * x).sum::<C64>().re
}

/// Phases the paired branches of `cur` relative to `prev` according to `policy`.
///
/// `LinearShift` and `ExplicitPhases` fix the symmetric gauge here; their
/// overlays are applied to the finished trajectory.
pub fn fix_phase_step(
    prev: &SchmidtFrame,
    cur: &SchmidtFrame,
    policy: &GaugePolicy,
    props: &LocalPropagators,
) -> SchmidtFrame {
    let mut out = cur.clone();
    let (hbar, dt) = (props.hbar, props.dt);
    for j in 0..cur.paired() {
        let o1 = column_overlap(&prev.basis1, &cur.basis1, j);
        let o2 = column_overlap(&prev.basis2, &cur.basis2, j);
        let usable = |o: C64| o.norm() >= MIN_OVERLAP;
        let chi = match policy {
            GaugePolicy::ParallelTransport(Subsystem::One) => usable(o1).then(|| -o1.arg()),
            GaugePolicy::ParallelTransport(Subsystem::Two) => usable(o2).then(|| o2.arg()),
            GaugePolicy::BareRotating(k) => {
                let moved = &props.u[k.index()] * prev.basis(*k);
                let b = column_overlap(&moved, cur.basis(*k), j);
                let s = if *k == Subsystem::One { -1.0 } else { 1.0 };
                usable(b).then(|| s * b.arg())
            }
            _ => (usable(o1) && usable(o2)).then(|| {
                // Interaction-induced phase velocities agree on both sides.
                let e1 = 0.5
                    * (column_energy(&props.h[0], &prev.basis1, j)
                        + column_energy(&props.h[0], &cur.basis1, j));
                let e2 = 0.5
                    * (column_energy(&props.h[1], &prev.basis2, j)
                        + column_energy(&props.h[1], &cur.basis2, j));
                let target = 0.5 * ((o1 * o2).arg() + dt * (e2 - e1) / hbar);
                wrap(target - o1.arg())
            }),
        };
        match chi {
            Some(x) => out.rotate_branch(j, x),
            None => out.flags.push(FrameFlag::VanishingOverlap { branch: j }),
        }
    }
    out
}

/// Applies `θ_j(t_i)`; λ and the reconstructed state are unchanged.
pub fn apply_gauge(st: &SchmidtTrajectory, g: &GaugeTransformation) -> Result<SchmidtTrajectory> {
    g.validate(st.len(), st.slots())?;
    let mut out = st.clone();
    let r = st.shape().paired();
    for (frame, theta) in out.frames.iter_mut().zip(&g.theta) {
        for (j, &th) in theta.iter().enumerate() {
            if j < r {
                frame.rotate_branch(j, th);
            } else {
                for k in Subsystem::BOTH {
                    if j < frame.basis(k).cols() {
                        frame.rotate_unpaired(k, j, th);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `(Θ¹, Θ², Θ⁰ = Θ¹⊗Θ²)` at step `i`, diagonal in the Schmidt bases of `st`.
pub fn frame_operators(
    st: &SchmidtTrajectory,
    g: &GaugeTransformation,
    i: usize,
) -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
    g.validate(st.len(), st.slots())?;
    let frame = st.frames.get(i).ok_or(Error::Index {
        index: i,
        range: format!("0..{}", st.len()),
    })?;
    let op = |k: Subsystem| {
        let b = frame.basis(k);
        let sign = if k == Subsystem::One { 1.0 } else { -1.0 };
        let phases: Vec<C64> = (0..b.cols())
            .map(|j| C64::from_polar(1.0, sign * g.theta[i][j]))
            .collect();
        &(b * &ComplexMatrix::from_diag(&phases)) * &b.adjoint()
    };
    let t1 = op(Subsystem::One);
    let t2 = op(Subsystem::Two);
    let t0 = t1.kron(&t2);
    Ok((t1, t2, t0))
}
