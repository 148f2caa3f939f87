//! Schmidt decomposition of bipartite pure states and time-continuous
//! tracking of the Schmidt frames along a trajectory.
//!
//! A frame stores full local bases: the first `r = min(d1, d2)` columns of
//! each basis are the paired Schmidt vectors, the remaining columns of the
//! larger factor complete it. Both subsystems are handled symmetrically, so no
//! reordering of the factors is needed when `d1 > d2`.

use serde::Serialize;

use crate::assign::max_weight_assignment;
use crate::dynamics::{CompositeHamiltonian, PureTrajectory};
use crate::error::{Error, Result};
use crate::gauge::{apply_gauge, fix_phase_step, GaugePolicy, GaugeTransformation, LocalPropagators};
use crate::hilbert::{ket_to_matrix, BipartitionShape, Ket, Subsystem};
use crate::numkernel::{
    canonical_phase, canonical_phase_factor, hermitian_eig, polar_unitary, procrustes, svd,
    ComplexMatrix, C64,
};

/// Coefficients at or below this are dark.
pub const DARK_TOL: f64 = 1e-12;
/// Coefficients closer than this form a degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Default rank threshold.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FrameFlag {
    /// Branches rotated jointly inside a degenerate coefficient block.
    DegenerateBlock(Vec<usize>),
    /// Inactive vectors of a subsystem could not be carried by projection.
    TransportFallback(Subsystem),
    /// Overlap with the previous frame too small to fix the phase.
    VanishingOverlap { branch: usize },
    /// Continuity overlap below `1 − C·dt`.
    Discontinuity { overlap: f64 },
}

#[derive(Clone, Debug)]
pub struct SchmidtFrame {
    pub t: f64,
    /// Length `min(d1, d2)`.
    pub lambda: Vec<f64>,
    /// d1×d1 unitary; columns are basis vectors.
    pub basis1: ComplexMatrix,
    /// d2×d2 unitary.
    pub basis2: ComplexMatrix,
    pub dark: Vec<bool>,
    /// `±1` per branch: `Ψ = Σ_j s_j λ_j φ_j¹⊗φ_j²`. A coefficient that passes
    /// through zero changes sign instead of flipping its vectors.
    pub sign: Vec<f64>,
    pub flags: Vec<FrameFlag>,
}

impl SchmidtFrame {
    pub fn paired(&self) -> usize {
        self.lambda.len()
    }

    pub fn shape(&self) -> BipartitionShape {
        BipartitionShape {
            d1: self.basis1.rows(),
            d2: self.basis2.rows(),
        }
    }

    pub fn basis(&self, k: Subsystem) -> &ComplexMatrix {
        match k {
            Subsystem::One => &self.basis1,
            Subsystem::Two => &self.basis2,
        }
    }

    pub fn basis_mut(&mut self, k: Subsystem) -> &mut ComplexMatrix {
        match k {
            Subsystem::One => &mut self.basis1,
            Subsystem::Two => &mut self.basis2,
        }
    }

    pub fn vector(&self, k: Subsystem, j: usize) -> Ket {
        Ket::new(self.basis(k).column(j)).expect("basis column")
    }

    /// `s_j λ_j`
    pub fn signed_lambda(&self) -> Vec<f64> {
        self.lambda.iter().zip(&self.sign).map(|(l, s)| l * s).collect()
    }

    /// `Σ_j s_j λ_j |φ_j¹⟩⊗|φ_j²⟩`
    pub fn reconstruct(&self) -> Ket {
        let (d1, d2) = (self.basis1.rows(), self.basis2.rows());
        let mut amps = vec![C64::new(0.0, 0.0); d1 * d2];
        for (j, l) in self.signed_lambda().into_iter().enumerate() {
            for a in 0..d1 {
                let x = self.basis1[(a, j)] * l;
                for b in 0..d2 {
                    amps[a * d2 + b] += x * self.basis2[(b, j)];
                }
            }
        }
        Ket::new(amps).expect("finite reconstruction")
    }

    /// Local state `Σ_j λ_j² |φ_j⟩⟨φ_j|` of subsystem `k`.
    pub fn local_state(&self, k: Subsystem) -> ComplexMatrix {
        let b = self.basis(k);
        let d = b.rows();
        ComplexMatrix::from_fn(d, d, |r, c| {
            self.lambda
                .iter()
                .enumerate()
                .map(|(j, &l)| b[(r, j)] * b[(c, j)].conj() * (l * l))
                .sum()
        })
    }

    pub fn purity(&self) -> f64 {
        self.lambda.iter().map(|l| l.powi(4)).sum()
    }

    pub fn entropy(&self) -> f64 {
        let p: Vec<f64> = self.lambda.iter().map(|l| l * l).collect();
        crate::hilbert::shannon_entropy(&p)
    }

    /// Largest `‖B†B − 1‖` over the two local bases.
    pub fn orthonormality_residual(&self) -> f64 {
        Subsystem::BOTH
            .iter()
            .map(|&k| {
                let b = self.basis(k);
                (&(&b.adjoint() * b) - &ComplexMatrix::identity(b.cols())).norm_fro()
            })
            .fold(0.0, f64::max)
    }

    fn scale_column(&mut self, k: Subsystem, j: usize, phase: C64) {
        let b = self.basis_mut(k);
        for r in 0..b.rows() {
            b[(r, j)] *= phase;
        }
    }

    /// Multiplies paired branch `j` by `e^{iχ}` on subsystem 1 and `e^{−iχ}` on subsystem 2.
    pub fn rotate_branch(&mut self, j: usize, chi: f64) {
        let p = C64::from_polar(1.0, chi);
        self.scale_column(Subsystem::One, j, p);
        self.scale_column(Subsystem::Two, j, p.conj());
    }

    /// Phase `e^{iθ}` on subsystem 1 or `e^{−iθ}` on subsystem 2 for an unpaired column.
    pub fn rotate_unpaired(&mut self, k: Subsystem, j: usize, theta: f64) {
        let sign = if k == Subsystem::One { 1.0 } else { -1.0 };
        self.scale_column(k, j, C64::from_polar(1.0, sign * theta));
    }

    fn permute_paired(&mut self, perm: &[usize]) {
        let r = self.paired();
        let mut idx1: Vec<usize> = perm.to_vec();
        idx1.extend(r..self.basis1.cols());
        let mut idx2: Vec<usize> = perm.to_vec();
        idx2.extend(r..self.basis2.cols());
        self.basis1 = self.basis1.select_columns(&idx1);
        self.basis2 = self.basis2.select_columns(&idx2);
        self.lambda = perm.iter().map(|&p| self.lambda[p]).collect();
        self.dark = perm.iter().map(|&p| self.dark[p]).collect();
        self.sign = perm.iter().map(|&p| self.sign[p]).collect();
    }
}

/// Extends the orthonormal columns of `m` (d×r) to a d×d unitary.
fn complete_basis(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (d, r) = (m.rows(), m.cols());
    if r >= d {
        return Ok(m.clone());
    }
    let proj = &ComplexMatrix::identity(d) - &(m * &m.adjoint());
    let eig = hermitian_eig(&proj.hermitian_part())?;
    let mut out = ComplexMatrix::zeros(d, d);
    for c in 0..r {
        out.set_column(c, &m.column(c));
    }
    for c in r..d {
        let mut v = eig.eigenvectors.column(c);
        canonical_phase(&mut v);
        out.set_column(c, &v);
    }
    Ok(out)
}

/// SVD-based frame with no phase convention applied.
fn raw_decompose(psi: &Ket, shape: BipartitionShape) -> Result<SchmidtFrame> {
    let a = ket_to_matrix(psi, shape)?;
    let s = svd(&a)?;
    let basis1 = complete_basis(&s.left)?;
    let basis2 = complete_basis(&s.right.conj())?;
    let dark = s.singular.iter().map(|&l| l <= DARK_TOL).collect();
    Ok(SchmidtFrame {
        t: 0.0,
        sign: vec![1.0; s.singular.len()],
        lambda: s.singular,
        basis1,
        basis2,
        dark,
        flags: Vec::new(),
    })
}

/// Schmidt decomposition with λ descending; each `φ_j¹` has its largest
/// amplitude real positive and the compensating phase sits on `φ_j²`.
pub fn decompose(psi: &Ket, shape: BipartitionShape) -> Result<SchmidtFrame> {
    let mut f = raw_decompose(psi, shape)?;
    canonicalize(&mut f);
    Ok(f)
}

fn canonicalize(f: &mut SchmidtFrame) {
    for j in 0..f.paired() {
        let ph = canonical_phase_factor(&f.basis1.column(j));
        f.rotate_branch(j, ph.arg());
    }
    let r = f.paired();
    for k in Subsystem::BOTH {
        let b = f.basis_mut(k);
        for j in r..b.cols() {
            let mut v = b.column(j);
            canonical_phase(&mut v);
            b.set_column(j, &v);
        }
    }
}

/// Inactive vectors of an initial frame are arbitrary inside their
/// complement; take them from the next state (pulled back by the bare
/// step) so that they are the limit of the vectors the dynamics populates.
fn seed_inactive(first: &mut SchmidtFrame, next: &Ket, props: &LocalPropagators) -> Result<()> {
    let mut look = raw_decompose(next, first.shape())?;
    look.basis1 = &props.u[0].adjoint() * &look.basis1;
    look.basis2 = &props.u[1].adjoint() * &look.basis2;
    let perm = match_branches(first, &look)?;
    look.permute_paired(&perm);
    transport_inactive(&look, first)?;
    canonicalize(first);
    Ok(())
}

/// Once tracked, the seed is replaced by the quadratic extrapolation of the
/// next three frames: the bare pull-back misses the interaction's first-order
/// rotation, which `λ_j²` at step 1 would otherwise carry into `H̃`.
fn refine_seed(frames: &mut [SchmidtFrame]) -> Result<()> {
    let mut look = frames[0].clone();
    for k in Subsystem::BOTH {
        let (b1, b2, b3) = (frames[1].basis(k), frames[2].basis(k), frames[3].basis(k));
        *look.basis_mut(k) = &(b1 - b2).scale_re(3.0) + b3;
    }
    transport_inactive(&look, &mut frames[0])
}

pub fn schmidt_rank(frame: &SchmidtFrame, tol: f64) -> usize {
    frame.lambda.iter().filter(|&&l| l > tol).count()
}

fn overlap_scores(prev: &SchmidtFrame, cur: &SchmidtFrame) -> Vec<Vec<f64>> {
    let r = prev.paired();
    let o1 = &prev.basis1.adjoint() * &cur.basis1;
    let o2 = &prev.basis2.adjoint() * &cur.basis2;
    (0..r)
        .map(|j| (0..r).map(|m| o1[(j, m)].norm_sqr() + o2[(j, m)].norm_sqr()).collect())
        .collect()
}

/// Permutation `π` with `π[j]` the branch of `cur` continuing branch `j` of
/// `prev`, maximizing the summed squared overlaps of both subsystems.
pub fn match_branches(prev: &SchmidtFrame, cur: &SchmidtFrame) -> Result<Vec<usize>> {
    if prev.shape() != cur.shape() {
        return Err(Error::Dimension("frames of different shapes".into()));
    }
    Ok(max_weight_assignment(&overlap_scores(prev, cur)))
}

/// Previous frame pushed forward by the bare local propagators.
fn bare_reference(prev: &SchmidtFrame, props: &LocalPropagators) -> SchmidtFrame {
    let mut r = prev.clone();
    r.basis1 = &props.u[0] * &prev.basis1;
    r.basis2 = &props.u[1] * &prev.basis2;
    r
}

fn degenerate_blocks(frame: &SchmidtFrame) -> Vec<Vec<usize>> {
    let r = frame.paired();
    let mut group: Vec<usize> = (0..r).collect();
    fn root(g: &mut Vec<usize>, x: usize) -> usize {
        let mut x = x;
        while g[x] != x {
            g[x] = g[g[x]];
            x = g[x];
        }
        x
    }
    for a in 0..r {
        for b in a + 1..r {
            if !frame.dark[a]
                && !frame.dark[b]
                && (frame.lambda[a] - frame.lambda[b]).abs() <= DEGENERACY_TOL
            {
                let (ra, rb) = (root(&mut group, a), root(&mut group, b));
                group[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for j in 0..r {
        let g = root(&mut group, j);
        match blocks.iter_mut().find(|b| root(&mut group, b[0]) == g) {
            Some(b) => b.push(j),
            None => blocks.push(vec![j]),
        }
    }
    blocks.retain(|b| b.len() > 1);
    blocks
}

/// Rotates each degenerate block jointly (`W` on subsystem 1, `W̄` on
/// subsystem 2) to the unitary closest to the reference frame.
fn resolve_degenerate(reference: &SchmidtFrame, cur: &mut SchmidtFrame) -> Result<()> {
    for block in degenerate_blocks(cur) {
        let r1 = reference.basis1.select_columns(&block);
        let r2 = reference.basis2.select_columns(&block);
        let c1 = cur.basis1.select_columns(&block);
        let c2 = cur.basis2.select_columns(&block);
        let m = &(&r1.adjoint() * &c1) + &(&r2.adjoint() * &c2).conj();
        let w = procrustes(&m)?;
        let n1 = &c1 * &w;
        let n2 = &c2 * &w.conj();
        for (c, &j) in block.iter().enumerate() {
            cur.basis1.set_column(j, &n1.column(c));
            cur.basis2.set_column(j, &n2.column(c));
        }
        cur.flags.push(FrameFlag::DegenerateBlock(block));
    }
    Ok(())
}

/// Carries dark and complement vectors from the reference into the
/// orthogonal complement of the active branches (Löwdin-orthonormalized).
fn transport_inactive(reference: &SchmidtFrame, cur: &mut SchmidtFrame) -> Result<()> {
    let r = cur.paired();
    for k in Subsystem::BOTH {
        let d = cur.basis(k).rows();
        let active: Vec<usize> = (0..r).filter(|&j| !cur.dark[j]).collect();
        let inactive: Vec<usize> = (0..d).filter(|j| !active.contains(j)).collect();
        if inactive.is_empty() {
            continue;
        }
        let a = cur.basis(k).select_columns(&active);
        let q = &ComplexMatrix::identity(d) - &(&a * &a.adjoint());
        let v = &q * &reference.basis(k).select_columns(&inactive);
        let smallest = svd(&v)?.singular.last().copied().unwrap_or(0.0);
        let carried = if smallest > 1e-6 {
            polar_unitary(&v)?
        } else {
            let c = cur.basis(k).select_columns(&inactive);
            let m = &reference.basis(k).select_columns(&inactive).adjoint() * &c;
            cur.flags.push(FrameFlag::TransportFallback(k));
            &c * &procrustes(&m)?
        };
        let b = cur.basis_mut(k);
        for (c, &j) in inactive.iter().enumerate() {
            b.set_column(j, &carried.column(c));
        }
    }
    Ok(())
}

/// Continues isolated active branches through zeros of their coefficient.
///
/// A pair product that reverses against the reference within one step is a
/// coefficient crossing zero: `φ_j²` is negated and the sign moves to `s_j`.
fn continue_signs(reference: &SchmidtFrame, cur: &mut SchmidtFrame) {
    let blocked: Vec<usize> = degenerate_blocks(cur).into_iter().flatten().collect();
    for j in 0..cur.paired() {
        if cur.dark[j] || blocked.contains(&j) {
            continue;
        }
        let o1: C64 = (0..cur.basis1.rows())
            .map(|r| reference.basis1[(r, j)].conj() * cur.basis1[(r, j)])
            .sum();
        let o2: C64 = (0..cur.basis2.rows())
            .map(|r| reference.basis2[(r, j)].conj() * cur.basis2[(r, j)])
            .sum();
        if (o1 * o2).re < 0.0 {
            let b = &mut cur.basis2;
            for r in 0..b.rows() {
                b[(r, j)] = -b[(r, j)];
            }
            cur.sign[j] = -cur.sign[j];
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ContinuityReport {
    /// Per step `i ≥ 1`: min over paired branches and subsystems of `|⟨φ_j(t_{i−1})|φ_j(t_i)⟩|`.
    pub min_overlap: Vec<f64>,
    /// Steps at which branch numbering was permuted, with the permutation.
    pub permutations: Vec<(usize, Vec<usize>)>,
    /// Steps at which some coefficient changed sign.
    pub sign_changes: Vec<usize>,
    /// Steps carrying any frame flag.
    pub flagged: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SchmidtTrajectory {
    pub frames: Vec<SchmidtFrame>,
    pub policy: GaugePolicy,
    pub continuity: ContinuityReport,
    pub dt: f64,
    pub hbar: f64,
}

impl SchmidtTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> BipartitionShape {
        self.frames[0].shape()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Number of phase slots, `max(d1, d2)`.
    pub fn slots(&self) -> usize {
        let s = self.shape();
        s.d1.max(s.d2)
    }
}

/// Decomposes every state, keeps branch identities continuous and fixes
/// phases according to `policy`.
///
/// Continuity is judged against the previous frame pushed forward by the
/// bare local propagators, so that uncoupled evolution is followed exactly.
pub fn align_track(
    traj: &PureTrajectory,
    ch: &CompositeHamiltonian,
    policy: &GaugePolicy,
) -> Result<SchmidtTrajectory> {
    let shape = ch.shape();
    let grid = traj.grid;
    if traj.is_empty() {
        return Err(Error::Grid("empty trajectory".into()));
    }
    policy.validate(grid.steps, shape.d1.max(shape.d2))?;
    let props = LocalPropagators::new(ch, grid.dt)?;
    let c_jump = 1.0 + crate::dynamics::assemble_total(ch).norm_op() / ch.hbar();

    let mut frames = Vec::with_capacity(traj.len());
    let mut first = decompose(&traj.states[0], shape)?;
    first.t = grid.t0;
    let inactive = first.dark.iter().any(|&d| d) || shape.d1 != shape.d2;
    if inactive && traj.len() > 1 {
        seed_inactive(&mut first, &traj.states[1], &props)?;
    }
    frames.push(first);
    let mut report = ContinuityReport::default();

    for i in 1..traj.len() {
        let prev = &frames[i - 1];
        let reference = bare_reference(prev, &props);
        let mut cur = raw_decompose(&traj.states[i], shape)?;
        cur.t = grid.time(i);
        let perm = match_branches(&reference, &cur)?;
        if perm.iter().enumerate().any(|(a, &b)| a != b) {
            report.permutations.push((i, perm.clone()));
        }
        cur.permute_paired(&perm);
        resolve_degenerate(&reference, &mut cur)?;
        transport_inactive(&reference, &mut cur)?;
        continue_signs(&reference, &mut cur);
        if cur.sign.iter().zip(&prev.sign).any(|(a, b)| a != b) {
            report.sign_changes.push(i);
        }
        let mut cur = fix_phase_step(prev, &cur, policy, &props);

        let mut worst: f64 = 1.0;
        for k in Subsystem::BOTH {
            let o = &prev.basis(k).adjoint() * cur.basis(k);
            for j in 0..cur.paired() {
                worst = worst.min(o[(j, j)].norm());
            }
        }
        if worst < 1.0 - c_jump * grid.dt {
            cur.flags.push(FrameFlag::Discontinuity { overlap: worst });
        }
        report.min_overlap.push(worst);
        if !cur.flags.is_empty() {
            report.flagged.push(i);
        }
        frames.push(cur);
    }
    if inactive && frames.len() >= 4 {
        refine_seed(&mut frames)?;
    }

    let mut st = SchmidtTrajectory {
        frames,
        policy: policy.clone(),
        continuity: report,
        dt: grid.dt,
        hbar: ch.hbar(),
    };
    let overlay = match policy {
        GaugePolicy::LinearShift { alpha } => Some(GaugeTransformation::linear(
            &st.times(),
            st.slots(),
            *alpha,
        )),
        GaugePolicy::ExplicitPhases(table) => Some(table.clone()),
        _ => None,
    };
    if let Some(g) = overlay {
        st = apply_gauge(&st, &g)?;
    }
    Ok(st)
}

/// Reconstruction error of every frame against the trajectory.
pub fn reconstruction_residual(st: &SchmidtTrajectory, traj: &PureTrajectory) -> f64 {
    st.frames
        .iter()
        .zip(&traj.states)
        .map(|(f, psi)| f.reconstruct().distance(psi))
        .fold(0.0, f64::max)
}

/// `Σ_j λ_j²`-normalization defect of a frame.
pub fn normalization_defect(frame: &SchmidtFrame) -> f64 {
    (frame.lambda.iter().map(|l| l * l).sum::<f64>() - 1.0).abs()
}
