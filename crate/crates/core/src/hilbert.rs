//! Bipartite state-space bookkeeping: kets, density matrices, tensor
//! products, partial traces and information measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ComplexMatrix, C64, I, ONE, ZERO};

/// Eigenvalues in [−NEG_CLAMP, 0) are treated as zero; below that the state is invalid.
pub const NEG_CLAMP: f64 = 1e-10;
const ENTROPY_FLOOR: f64 = 1e-14;
const DENSITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amps: Vec<C64>,
}

impl Ket {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension("empty ket".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("ket has non-finite amplitudes".into()));
        }
        Ok(Self { amps })
    }

    pub(crate) fn from_trusted(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    /// Builds and normalizes; fails on a zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let k = Self::new(amps)?;
        let n = k.norm();
        if n < 1e-300 {
            return Err(Error::Invalid("cannot normalize a zero ket".into()));
        }
        Ok(k.scale(C64::from(1.0 / n)))
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::from(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|self⟩⟨other|`
    pub fn outer(&self, other: &Ket) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), other.dim(), |r, c| {
            self.amps[r] * other.amps[c].conj()
        })
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.outer(self)
    }

    pub fn scale(&self, s: C64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|z| z * s).collect(),
        }
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Ket {
        Ket {
            amps: op.mul_vec(&self.amps),
        }
    }

    pub fn distance(&self, other: &Ket) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Validated density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity("not square".into()));
        }
        let ah = matrix.anti_hermitian_norm();
        if ah > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (anti-Hermitian norm {ah:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let eig = hermitian_eig(&matrix)?;
        if let Some(&min) = eig.eigenvalues.first() {
            if min < -NEG_CLAMP {
                return Err(Error::InvalidDensity(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    /// Skips validation; callers guarantee the invariants up to rounding.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_ket(psi: &Ket) -> Self {
        let n = psi.norm();
        Self {
            matrix: psi.projector().scale_re(1.0 / (n * n)),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Ascending spectrum with the small negative noise clamped to zero.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let eig = hermitian_eig(&self.matrix)?;
        eig.eigenvalues
            .into_iter()
            .map(|l| {
                if l < -NEG_CLAMP {
                    Err(Error::InvalidDensity(format!("negative eigenvalue {l:.3e}")))
                } else {
                    Ok(l.max(0.0))
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    One,
    Two,
}

impl Subsystem {
    pub fn other(self) -> Self {
        match self {
            Self::One => Self::Two,
            Self::Two => Self::One,
        }
    }

    /// 0 for subsystem 1, 1 for subsystem 2.
    pub fn index(self) -> usize {
        match self {
            Self::One => 0,
            Self::Two => 1,
        }
    }

    pub fn from_label(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(Error::Index {
                index: k,
                range: "{1, 2}".into(),
            }),
        }
    }

    pub const BOTH: [Subsystem; 2] = [Subsystem::One, Subsystem::Two];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartitionShape {
    pub d1: usize,
    pub d2: usize,
}

impl BipartitionShape {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::Dimension(format!("invalid bipartition {d1}x{d2}")));
        }
        Ok(Self { d1, d2 })
    }

    pub fn total(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn dim(&self, k: Subsystem) -> usize {
        match k {
            Subsystem::One => self.d1,
            Subsystem::Two => self.d2,
        }
    }

    /// Number of paired Schmidt branches, `min(d1, d2)`.
    pub fn paired(&self) -> usize {
        self.d1.min(self.d2)
    }

    /// Shape with `d1 ≤ d2` and whether the factors were swapped to get it.
    pub fn canonical(&self) -> (Self, bool) {
        if self.d1 <= self.d2 {
            (*self, false)
        } else {
            (
                Self {
                    d1: self.d2,
                    d2: self.d1,
                },
                true,
            )
        }
    }
}

pub trait Tensor<Rhs = Self> {
    type Output;
    fn tensor(&self, rhs: &Rhs) -> Self::Output;
}

impl Tensor for Ket {
    type Output = Ket;
    fn tensor(&self, rhs: &Ket) -> Ket {
        let mut amps = Vec::with_capacity(self.dim() * rhs.dim());
        for a in &self.amps {
            for b in &rhs.amps {
                amps.push(a * b);
            }
        }
        Ket { amps }
    }
}

impl Tensor for ComplexMatrix {
    type Output = ComplexMatrix;
    fn tensor(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.kron(rhs)
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T::Output {
    a.tensor(b)
}

/// `op ⊗ 1` or `1 ⊗ op` on the composite space.
pub fn embed(op: &ComplexMatrix, shape: BipartitionShape, k: Subsystem) -> ComplexMatrix {
    match k {
        Subsystem::One => op.kron(&ComplexMatrix::identity(shape.d2)),
        Subsystem::Two => ComplexMatrix::identity(shape.d1).kron(op),
    }
}

/// Amplitude matrix `a_jk = ⟨j,k|Ψ⟩` of shape d1×d2.
pub fn ket_to_matrix(psi: &Ket, shape: BipartitionShape) -> Result<ComplexMatrix> {
    if psi.dim() != shape.total() {
        return Err(Error::Dimension(format!(
            "ket of dim {} does not fit {}x{}",
            psi.dim(),
            shape.d1,
            shape.d2
        )));
    }
    ComplexMatrix::new(shape.d1, shape.d2, psi.amps.clone())
}

pub fn matrix_to_ket(a: &ComplexMatrix) -> Result<Ket> {
    Ket::new(a.as_slice().to_vec())
}

/// Partial trace of a (d1·d2)-square operator, keeping subsystem `keep`.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    shape: BipartitionShape,
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    let n = shape.total();
    if m.rows() != n || m.cols() != n {
        return Err(Error::Dimension(format!(
            "operator {}x{} does not fit {}x{}",
            m.rows(),
            m.cols(),
            shape.d1,
            shape.d2
        )));
    }
    let (d1, d2) = (shape.d1, shape.d2);
    Ok(match keep {
        Subsystem::One => ComplexMatrix::from_fn(d1, d1, |a, b| {
            (0..d2).map(|k| m[(a * d2 + k, b * d2 + k)]).sum()
        }),
        Subsystem::Two => ComplexMatrix::from_fn(d2, d2, |a, b| {
            (0..d1).map(|j| m[(j * d2 + a, j * d2 + b)]).sum()
        }),
    })
}

pub fn partial_trace(
    rho: &DensityMatrix,
    shape: BipartitionShape,
    keep: Subsystem,
) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_trusted(partial_trace_matrix(
        rho.matrix(),
        shape,
        keep,
    )?))
}

/// Reduced state of a pure global state without forming the global projector.
pub fn reduced_state(psi: &Ket, shape: BipartitionShape, keep: Subsystem) -> Result<DensityMatrix> {
    let a = ket_to_matrix(psi, shape)?;
    let m = match keep {
        Subsystem::One => &a * &a.adjoint(),
        Subsystem::Two => &a.transpose() * &a.conj(),
    };
    Ok(DensityMatrix::from_trusted(m))
}

/// States admitting `⟨O⟩`.
pub trait QuantumState {
    fn state_dim(&self) -> usize;
    fn expectation_of(&self, op: &ComplexMatrix) -> C64;
}

impl QuantumState for Ket {
    fn state_dim(&self) -> usize {
        self.dim()
    }
    fn expectation_of(&self, op: &ComplexMatrix) -> C64 {
        let v = op.mul_vec(&self.amps);
        self.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()
    }
}

impl QuantumState for DensityMatrix {
    fn state_dim(&self) -> usize {
        self.dim()
    }
    fn expectation_of(&self, op: &ComplexMatrix) -> C64 {
        trace_product(op, &self.matrix)
    }
}

/// `tr(A·B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    assert_eq!(a.cols(), b.rows());
    assert_eq!(a.rows(), b.cols());
    let mut acc = ZERO;
    for r in 0..a.rows() {
        for k in 0..a.cols() {
            acc += a[(r, k)] * b[(k, r)];
        }
    }
    acc
}

pub fn expectation<S: QuantumState>(op: &ComplexMatrix, state: &S) -> Result<C64> {
    if op.rows() != state.state_dim() || op.cols() != state.state_dim() {
        return Err(Error::Dimension(format!(
            "operator {}x{} vs state dim {}",
            op.rows(),
            op.cols(),
            state.state_dim()
        )));
    }
    Ok(state.expectation_of(op))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    trace_product(rho.matrix(), rho.matrix()).re
}

/// Shannon entropy (natural log) of a probability vector; entries below 1e-14 contribute 0.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > ENTROPY_FLOOR)
        .map(|&x| -x * x.ln())
        .sum()
}

pub fn vn_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(shannon_entropy(&rho.spectrum()?))
}

/// `S(ρ1) + S(ρ2) − S(ρ0)`
pub fn mutual_information(rho: &DensityMatrix, shape: BipartitionShape) -> Result<f64> {
    let s1 = vn_entropy(&partial_trace(rho, shape, Subsystem::One)?)?;
    let s2 = vn_entropy(&partial_trace(rho, shape, Subsystem::Two)?)?;
    Ok(s1 + s2 - vn_entropy(rho)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    let d = match axis {
        Axis::X => [ZERO, ONE, ONE, ZERO],
        Axis::Y => [ZERO, -I, I, ZERO],
        Axis::Z => [ONE, ZERO, ZERO, -ONE],
    };
    ComplexMatrix::new(2, 2, d.to_vec()).expect("2x2 Pauli")
}

/// `σ₊ = |0⟩⟨1|` with `|0⟩` the σ_z = +1 state.
pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO]).expect("2x2")
}

pub fn sigma_minus() -> ComplexMatrix {
    sigma_plus().adjoint()
}

pub fn basis_ket(dim: usize, index: usize) -> Result<Ket> {
    if index >= dim {
        return Err(Error::Index {
            index,
            range: format!("0..{dim}"),
        });
    }
    let mut amps = vec![ZERO; dim];
    amps[index] = ONE;
    Ket::new(amps)
}
