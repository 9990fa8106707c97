//! Vectorized Lindblad dynamics: superoperator assembly, propagation by
//! eigendecomposition (with a scaling-and-squaring fallback) and steady states.
//!
//! Density matrices are vectorized column-major, so `vec(O1 ρ O2)` equals
//! `(O2ᵀ ⊗ O1) vec(ρ)`.

mod expm;

use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, linalg::kron};
use ndarray_linalg::{Eig, Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::{self, CMatrix, Operators, SystemSpec};

pub use expm::expm;

/// Largest accepted condition number of the Liouvillian eigenvector matrix
/// before propagation falls back to scaling and squaring.
pub const EIGEN_CONDITION_LIMIT: f64 = 1e8;
/// Required gap factor between the two smallest singular values of L for a
/// unique steady state.
pub const KERNEL_GAP_FACTOR: f64 = 1e6;
/// Trace tolerance for physical density matrices.
pub const TRACE_TOL: f64 = 1e-9;
/// Hermiticity tolerance for evolved density matrices.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Positivity tolerance (most negative admissible eigenvalue).
pub const POSITIVITY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector of length {0} is not a vectorized square matrix")]
    NotSquareLength(usize),
    #[error("Hamiltonian is not Hermitian (relative defect {0:.3e})")]
    NonHermitian(f64),
    #[error("Liouvillian kernel is not one-dimensional (singular-value gap {gap:.3e} < {required:.1e}); multiple steady states")]
    DegenerateKernel { gap: f64, required: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

fn linalg_err(e: impl std::fmt::Display) -> LindbladError {
    LindbladError::Linalg(e.to_string())
}

fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// A d×d density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub CMatrix);

impl DensityMatrix {
    /// Pure basis state |i⟩⟨i|.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = CMatrix::zeros((dim, dim));
        m[[index, index]] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// The all-ground product state |0...0⟩⟨0...0|.
    pub fn ground(dim: usize) -> Self {
        Self::basis(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    /// Tr(O ρ).
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += op[[i, j]] * self.0[[j, i]];
            }
        }
        acc
    }

    /// Largest element of |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.0[[i, j]] - self.0[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64, LindbladError> {
        let h = (&self.0 + &dagger(&self.0)).mapv(|z| z * 0.5);
        let (e, _) = h.eigh(UPLO::Lower).map_err(linalg_err)?;
        Ok(e.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// (ρ + ρ†)/2 divided by its trace.
    pub fn hermitized_normalized(&self) -> Self {
        let h = (&self.0 + &dagger(&self.0)).mapv(|z| z * 0.5);
        let tr = h.diag().sum().re;
        Self(h.mapv(|z| z / tr))
    }

    /// Checks trace, Hermiticity and positivity against the module tolerances.
    pub fn is_physical(&self) -> Result<bool, LindbladError> {
        Ok((self.trace() - C64::new(1.0, 0.0)).norm() < TRACE_TOL
            && self.hermiticity_error() < HERMITICITY_TOL
            && self.min_eigenvalue()? > -POSITIVITY_TOL)
    }
}

/// Column-stacked density matrix of length d².
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedState(pub Array1<C64>);

impl VectorizedState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ⟨a, b⟩ = Σ conj(a_i) b_i, which equals Tr(A† B) for vectorized A, B.
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

pub fn vectorize(rho: &DensityMatrix) -> VectorizedState {
    vectorize_matrix(&rho.0)
}

pub(crate) fn vectorize_matrix(m: &CMatrix) -> VectorizedState {
    let d = m.nrows();
    let mut v = Array1::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[i + j * d] = m[[i, j]];
        }
    }
    VectorizedState(v)
}

pub fn devectorize(v: &VectorizedState) -> Result<DensityMatrix, LindbladError> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(LindbladError::NotSquareLength(n));
    }
    let mut m = CMatrix::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[[i, j]] = v.0[i + j * d];
        }
    }
    Ok(DensityMatrix(m))
}

/// Superoperator M with `M vec(ρ) = vec(O1 ρ O2)`, i.e. `O2ᵀ ⊗ O1`.
pub fn sandwich_superop(o1: &CMatrix, o2: &CMatrix) -> Result<CMatrix, LindbladError> {
    let d = o1.nrows();
    for m in [o1, o2] {
        if !m.is_square() || m.nrows() != d {
            return Err(LindbladError::DimensionMismatch {
                expected: d,
                found: m.nrows().max(m.ncols()),
            });
        }
    }
    Ok(kron(&o2.t().to_owned(), o1))
}

/// D[O]: ρ ↦ O ρ O† − ½{O†O, ρ}, as a matrix.
fn dissipator(op: &CMatrix) -> CMatrix {
    let d = op.nrows();
    let id = identity(d);
    let op_dag = dagger(op);
    let odo = op_dag.dot(op);
    kron(&op.mapv(|z| z.conj()), op) - kron(&id, &odo).mapv(|z| z * 0.5) - kron(&odo.t().to_owned(), &id).mapv(|z| z * 0.5)
}

/// Eigendecomposition L = V diag(λ) V⁻¹ together with the conditioning of V.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Array1<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    pub condition: f64,
}

impl EigenDecomposition {
    fn compute(m: &CMatrix) -> Result<Self, LindbladError> {
        let (values, vectors) = m.eig().map_err(linalg_err)?;
        let (_, s, _) = vectors.svd(false, false).map_err(linalg_err)?;
        let smax = s.iter().copied().fold(0.0, f64::max);
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let inverse = if condition.is_finite() {
            vectors.inv().map_err(linalg_err)?
        } else {
            CMatrix::zeros(vectors.dim())
        };
        Ok(Self {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    /// V diag(e^{tλ}) V⁻¹.
    pub fn exp(&self, t: f64) -> CMatrix {
        let weights = self.values.mapv(|l| (l * t).exp());
        let mut scaled = self.vectors.clone();
        for (mut col, w) in scaled.columns_mut().into_iter().zip(weights.iter()) {
            col.mapv_inplace(|z| z * w);
        }
        scaled.dot(&self.inverse)
    }
}

/// How a propagator is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMethod {
    /// Eigendecomposition when well conditioned, otherwise scaling and squaring.
    Auto,
    Eigen,
    ScalingSquaring,
}

/// Matrix form of the Lindblad generator acting on vectorized states.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CMatrix,
    dim: usize,
    eigen: OnceLock<Option<Arc<EigenDecomposition>>>,
}

impl Liouvillian {
    /// Wraps an arbitrary d²×d² generator.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self, LindbladError> {
        let n = matrix.nrows();
        if !matrix.is_square() {
            return Err(LindbladError::DimensionMismatch {
                expected: n,
                found: matrix.ncols(),
            });
        }
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n {
            return Err(LindbladError::NotSquareLength(n));
        }
        Ok(Self {
            matrix,
            dim,
            eigen: OnceLock::new(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Hilbert-space dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cached eigendecomposition, `None` if it is unavailable or its
    /// eigenvector matrix is too badly conditioned.
    pub fn eigen(&self) -> Option<Arc<EigenDecomposition>> {
        self.eigen
            .get_or_init(|| match EigenDecomposition::compute(&self.matrix) {
                Ok(e) if e.condition < EIGEN_CONDITION_LIMIT => Some(Arc::new(e)),
                Ok(e) => {
                    log::debug!("eigenvector condition {:.3e}; using scaling and squaring", e.condition);
                    None
                }
                Err(err) => {
                    log::debug!("eigendecomposition failed ({err}); using scaling and squaring");
                    None
                }
            })
            .clone()
    }

    /// e^{tL}.
    pub fn propagator(&self, t: f64) -> Result<CMatrix, LindbladError> {
        self.propagator_with(t, PropagationMethod::Auto)
    }

    pub fn propagator_with(&self, t: f64, method: PropagationMethod) -> Result<CMatrix, LindbladError> {
        let n = self.matrix.nrows();
        if t == 0.0 {
            return Ok(identity(n));
        }
        match method {
            PropagationMethod::Auto => match self.eigen() {
                Some(e) => Ok(e.exp(t)),
                None => expm(&self.matrix.mapv(|z| z * t)),
            },
            PropagationMethod::Eigen => {
                let e = EigenDecomposition::compute(&self.matrix)?;
                Ok(e.exp(t))
            }
            PropagationMethod::ScalingSquaring => expm(&self.matrix.mapv(|z| z * t)),
        }
    }

    /// ρ(t) = devectorize(e^{tL} vec(ρ0)), without renormalization.
    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix, LindbladError> {
        if rho.dim() != self.dim {
            return Err(LindbladError::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let v = vectorize(rho);
        let out = match self.eigen() {
            Some(e) if t != 0.0 => {
                let coeffs = e.inverse.dot(&v.0);
                let weighted = &coeffs * &e.values.mapv(|l| (l * t).exp());
                e.vectors.dot(&weighted)
            }
            _ => self.propagator(t)?.dot(&v.0),
        };
        devectorize(&VectorizedState(out))
    }

    /// Largest element of |1̄† L| relative to the largest element of |L|; zero
    /// for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let s: C64 = (0..d).map(|i| self.matrix[[i + i * d, col]]).sum();
            worst = worst.max(s.norm());
        }
        worst / scale
    }
}

/// Assembles L = −i[H, ·] + γ_q D[a] + κ_q D[a†a] + Σ_k (γ_k D[b_k] + κ_k D[b_k†b_k]).
pub fn liouvillian(spec: &SystemSpec, ops: &Operators, hamiltonian: &CMatrix) -> Result<Liouvillian, LindbladError> {
    let d = ops.dim;
    if hamiltonian.nrows() != d || !hamiltonian.is_square() {
        return Err(LindbladError::DimensionMismatch {
            expected: d,
            found: hamiltonian.nrows(),
        });
    }
    let defect = model::hermiticity_defect(hamiltonian);
    if defect >= model::HERMITIAN_TOL {
        return Err(LindbladError::NonHermitian(defect));
    }
    let id = identity(d);
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (sandwich_superop(hamiltonian, &id)? - sandwich_superop(&id, hamiltonian)?).mapv(|z| z * minus_i);
    let mut add = |rate: f64, op: &CMatrix| {
        if rate > 0.0 {
            l.scaled_add(C64::new(rate, 0.0), &dissipator(op));
        }
    };
    add(spec.transmon.gamma, &ops.a);
    add(spec.transmon.kappa, &ops.transmon_number());
    for (k, t) in spec.tls.iter().enumerate() {
        add(t.gamma, &ops.b[k]);
        add(t.kappa, &ops.tls_number(k));
    }
    Liouvillian::from_matrix(l)
}

/// Unique stationary state of L: the right singular vector of the smallest
/// singular value, Hermitized and trace-normalized.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix, LindbladError> {
    let (_, s, vt) = l.matrix().svd(false, true).map_err(linalg_err)?;
    let vt = vt.ok_or_else(|| LindbladError::Linalg("SVD returned no right singular vectors".into()))?;
    let n = s.len();
    if n < 2 {
        return Err(LindbladError::NotSquareLength(n));
    }
    // singular values below the roundoff floor of L count as exact zeros
    let floor = s[0] * f64::EPSILON * n as f64;
    let smallest = s[n - 1].max(floor);
    let second = s[n - 2];
    let gap = if smallest > 0.0 { second / smallest } else { 0.0 };
    if gap < KERNEL_GAP_FACTOR {
        return Err(LindbladError::DegenerateKernel {
            gap,
            required: KERNEL_GAP_FACTOR,
        });
    }
    let null = vt.row(n - 1).mapv(|z| z.conj());
    let rho = devectorize(&VectorizedState(null))?;
    Ok(rho.hermitized_normalized())
}
