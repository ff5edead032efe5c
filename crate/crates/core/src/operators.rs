//! Dense complex linear algebra on bipartite Hilbert spaces.
//!
//! Composite basis convention: `|i⟩_A ⊗ |j⟩_B` sits at flat index
//! `i * d_B + j`. The same convention fixes the basis of the Choi
//! isomorphism and of the partial transpose.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dimensions of a two-party Hilbert space `H_A ⊗ H_B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartiteSpace {
    pub d_a: usize,
    pub d_b: usize,
}

impl BipartiteSpace {
    pub fn new(d_a: usize, d_b: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 {
            return Err(Error::InvalidInput(format!(
                "subsystem dimensions must be positive (got {d_a}, {d_b})"
            )));
        }
        Ok(Self { d_a, d_b })
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.d_b + j
    }

    /// The space `A ⊗ A'` holding Choi matrices of channels on A.
    pub fn choi_space(&self) -> BipartiteSpace {
        BipartiteSpace { d_a: self.d_a, d_b: self.d_a }
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: dim });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |M − M†|` over entries.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut r = 0.0f64;
    for i in 0..n {
        for j in i..n {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// `½(M + M†)`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A square complex matrix that is Hermitian within tolerance.
///
/// The stored matrix is the exact Hermitian part of the input; the
/// discarded anti-Hermitian residual is kept for auditing.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
    residual: f64,
}

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, &Tolerances::default())
    }

    pub fn with_tolerance(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "operator must be square (got {}x{})",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("operator dimension must be at least 1".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entries".into()));
        }
        let residual = hermiticity_residual(&m);
        let allowed = tol.herm_threshold(max_abs_entry(&m));
        if residual > allowed {
            return Err(Error::NotHermitian { residual, allowed });
        }
        Ok(Self { matrix: hermitian_part(&m), residual })
    }

    /// Hermitian part of an arbitrary square matrix, recording the residual
    /// without enforcing a bound on it.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Self { matrix: hermitian_part(m), residual: hermiticity_residual(m) }
    }

    /// Real symmetric matrix given row by row.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must all have length n".into()));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim), residual: 0.0 }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: CMatrix::zeros(dim, dim), residual: 0.0 }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            matrix: CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO }),
            residual: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.residual
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { matrix: self.matrix.scale(c), residual: self.residual * c.abs() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { matrix: &self.matrix + &other.matrix, residual: self.residual + other.residual })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// `Tr[self · other]`, real for Hermitian pairs.
    pub fn expectation(&self, other: &Self) -> f64 {
        trace_of_product(&self.matrix, &other.matrix).re
    }

    /// `self + c·I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c;
        }
        Self { matrix: m, residual: self.residual }
    }
}

/// `Tr[A B]` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Kronecker product of arbitrary matrices in the flat-index convention.
pub fn kron(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x.kronecker(y)
}

pub fn tensor(x: &HermitianOperator, y: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        matrix: kron(&x.matrix, &y.matrix),
        residual: 0.0,
    }
}

/// Partial trace of an arbitrary (not necessarily Hermitian) matrix.
pub fn partial_trace_matrix(m: &CMatrix, space: BipartiteSpace, which: Subsystem) -> Result<CMatrix> {
    space.check(m.nrows())?;
    space.check(m.ncols())?;
    let (da, db) = (space.d_a, space.d_b);
    Ok(match which {
        Subsystem::B => CMatrix::from_fn(da, da, |i, k| {
            (0..db).map(|j| m[(space.index(i, j), space.index(k, j))]).sum()
        }),
        Subsystem::A => CMatrix::from_fn(db, db, |j, l| {
            (0..da).map(|i| m[(space.index(i, j), space.index(i, l))]).sum()
        }),
    })
}

/// Traces out subsystem `which`, returning the operator on the other factor.
pub fn partial_trace(m: &HermitianOperator, space: BipartiteSpace, which: Subsystem) -> Result<HermitianOperator> {
    let r = partial_trace_matrix(&m.matrix, space, which)?;
    Ok(HermitianOperator { matrix: hermitian_part(&r), residual: m.residual })
}

pub fn partial_transpose_a_matrix(m: &CMatrix, space: BipartiteSpace) -> Result<CMatrix> {
    space.check(m.nrows())?;
    space.check(m.ncols())?;
    let (da, db) = (space.d_a, space.d_b);
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..da {
        for k in 0..da {
            for j in 0..db {
                for l in 0..db {
                    out[(space.index(i, j), space.index(k, l))] = m[(space.index(k, j), space.index(i, l))];
                }
            }
        }
    }
    Ok(out)
}

/// Transpose on the A factor in the computational basis.
pub fn partial_transpose_a(m: &HermitianOperator, space: BipartiteSpace) -> Result<HermitianOperator> {
    let out = partial_transpose_a_matrix(&m.matrix, space)?;
    Ok(HermitianOperator { residual: hermiticity_residual(&out), matrix: hermitian_part(&out) })
}

/// Spectral decomposition `M = V diag(λ) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// `V diag(f(λ)) V†` for a complex-valued spectral function.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// `V diag(w) V†` for real weights.
    pub fn weighted(&self, weights: &[f64]) -> CMatrix {
        assert_eq!(weights.len(), self.dim());
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (k, &w) in weights.iter().enumerate() {
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| C64::new(l, 0.0))
    }
}

pub fn eig_hermitian(m: &HermitianOperator) -> Result<Eigen> {
    eig_matrix(&m.matrix, Tolerances::default().eig_tol)
}

/// Eigendecomposition of a matrix already known to be Hermitian.
pub(crate) fn eig_matrix(m: &CMatrix, eig_tol: f64) -> Result<Eigen> {
    let n = m.nrows();
    let se = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenFailure { dim: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    let eig = Eigen { values, vectors };
    if values_not_finite(&eig.values) {
        return Err(Error::EigenFailure { dim: n });
    }
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let resid = max_abs_entry(&(eig.reconstruct() - m));
    if resid > eig_tol * scale.max(f64::MIN_POSITIVE) && resid > 1e-13 {
        return Err(Error::EigenFailure { dim: n });
    }
    Ok(eig)
}

fn values_not_finite(v: &[f64]) -> bool {
    v.iter().any(|x| !x.is_finite())
}

/// A unit-trace, positive semidefinite operator on a bipartite space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: BipartiteSpace,
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator, space: BipartiteSpace) -> Result<Self> {
        Self::with_tolerance(op, space, &Tolerances::default())
    }

    pub fn with_tolerance(op: HermitianOperator, space: BipartiteSpace, tol: &Tolerances) -> Result<Self> {
        space.check(op.dim())?;
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.trace_tol {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let lmin = eig_hermitian(&op)?.min();
        if lmin < -tol.psd_tol {
            return Err(Error::InvalidState(format!("minimal eigenvalue {lmin:.3e} is negative")));
        }
        Ok(Self { space, op })
    }

    /// Skips validation; callers guarantee PSD and unit trace by construction.
    pub(crate) fn from_parts_unchecked(op: HermitianOperator, space: BipartiteSpace) -> Self {
        debug_assert_eq!(op.dim(), space.dim());
        Self { space, op }
    }

    /// Pure state `|ψ⟩⟨ψ|`, normalizing the vector.
    pub fn pure(psi: &CVector, space: BipartiteSpace) -> Result<Self> {
        space.check(psi.len())?;
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi.unscale(norm);
        let m = &v * v.adjoint();
        Ok(Self { space, op: HermitianOperator::from_hermitian_part(&m) })
    }

    pub fn maximally_mixed(space: BipartiteSpace) -> Self {
        let d = space.dim();
        Self { space, op: HermitianOperator::identity(d).scale(1.0 / d as f64) }
    }

    pub fn space(&self) -> BipartiteSpace {
        self.space
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn reduced(&self, keep: Subsystem) -> HermitianOperator {
        let traced = match keep {
            Subsystem::A => Subsystem::B,
            Subsystem::B => Subsystem::A,
        };
        partial_trace(&self.op, self.space, traced).expect("density matrix dimension is consistent with its space")
    }

    /// `Tr[H ρ]`.
    pub fn energy(&self, h: &HermitianOperator) -> Result<f64> {
        self.space.check(h.dim())?;
        Ok(self.op.expectation(h))
    }
}

/// Thermal state `e^{−βH}/Z`. `beta = +∞` yields the uniform mixture over
/// the ground eigenspace.
pub fn gibbs(h: &HermitianOperator, beta: f64, space: BipartiteSpace) -> Result<DensityMatrix> {
    space.check(h.dim())?;
    let eig = eig_hermitian(h)?;
    gibbs_from_eigen(&eig, beta, space, &Tolerances::default())
}

/// Boltzmann weights `e^{−β(λ_i − λ_min)}/Z` for an ascending spectrum.
pub fn boltzmann_weights(values: &[f64], beta: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidInput(format!("inverse temperature must be ≥ 0 (got {beta})")));
    }
    let e0 = values[0];
    let w: Vec<f64> = if beta.is_infinite() {
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        values
            .iter()
            .map(|&e| if e - e0 <= tol.deg_tol * scale { 1.0 } else { 0.0 })
            .collect()
    } else {
        values.iter().map(|&e| (-beta * (e - e0)).exp()).collect()
    };
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

pub fn gibbs_from_eigen(eig: &Eigen, beta: f64, space: BipartiteSpace, tol: &Tolerances) -> Result<DensityMatrix> {
    space.check(eig.dim())?;
    let p = boltzmann_weights(&eig.values, beta, tol)?;
    let op = HermitianOperator::from_hermitian_part(&eig.weighted(&p));
    Ok(DensityMatrix::from_parts_unchecked(op, space))
}

/// Squared Schmidt coefficients of a bipartite pure state, descending.
pub fn schmidt_spectrum(psi: &CVector, space: BipartiteSpace) -> Result<Vec<f64>> {
    space.check(psi.len())?;
    let norm2 = psi.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::InvalidState("zero state vector".into()));
    }
    let m = CMatrix::from_fn(space.d_a, space.d_b, |i, j| psi[space.index(i, j)]);
    let svd = SVD::new(m, false, false);
    let mut q: Vec<f64> = svd.singular_values.iter().map(|s| s * s / norm2).collect();
    q.sort_by(|a, b| b.total_cmp(a));
    Ok(q)
}

/// Largest absolute eigenvalue.
pub fn op_norm(m: &HermitianOperator) -> Result<f64> {
    let e = eig_hermitian(m)?;
    Ok(e.min().abs().max(e.max().abs()))
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(m: &HermitianOperator) -> Result<f64> {
    Ok(eig_hermitian(m)?.values.iter().map(|v| v.abs()).sum())
}

/// `exp(iG)` for Hermitian `G`.
pub fn unitary_exp(g: &HermitianOperator) -> Result<CMatrix> {
    let e = eig_hermitian(g)?;
    Ok(e.map(|l| C64::new(0.0, l).exp()))
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Single-qubit Pauli operators, `|0⟩` being the `σ_z = +1` eigenstate.
pub mod pauli {
    use super::*;

    #[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
    pub enum Pauli {
        I,
        X,
        Y,
        Z,
    }

    impl Pauli {
        pub fn matrix(self) -> CMatrix {
            let i = C64::new(0.0, 1.0);
            match self {
                Pauli::I => CMatrix::identity(2, 2),
                Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
                Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
                Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
            }
        }

        pub fn from_char(c: char) -> Option<Self> {
            match c.to_ascii_uppercase() {
                'I' => Some(Pauli::I),
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                _ => None,
            }
        }
    }

    /// Tensor product of Paulis, first letter on the most significant qubit.
    pub fn string(ops: &[Pauli]) -> CMatrix {
        ops.iter().fold(CMatrix::identity(1, 1), |acc, p| kron(&acc, &p.matrix()))
    }

    /// Parses strings like `"XX"` or `"ZIZ"`.
    pub fn parse(s: &str) -> Option<CMatrix> {
        let ops: Option<Vec<Pauli>> = s.chars().map(Pauli::from_char).collect();
        ops.filter(|o| !o.is_empty()).map(|o| string(&o))
    }

    /// `op` acting on `site` (0-based, leftmost first) of an `n`-qubit register.
    pub fn on_site(p: Pauli, site: usize, n: usize) -> CMatrix {
        let ops: Vec<Pauli> = (0..n).map(|s| if s == site { p } else { Pauli::I }).collect();
        string(&ops)
    }
}

/// Row-major real/imaginary split used for JSON exchange of complex matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub real: Vec<Vec<f64>>,
    #[serde(default)]
    pub imag: Option<Vec<Vec<f64>>>,
}

impl ComplexMatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let real = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let imag = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
        Self { real, imag: Some(imag) }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.real.len();
        let m = self.real.first().map_or(0, |r| r.len());
        if self.real.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged real part".into()));
        }
        if let Some(im) = &self.imag {
            if im.len() != n || im.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidInput("imaginary part shape differs from real part".into()));
            }
        }
        Ok(CMatrix::from_fn(n, m, |i, j| {
            C64::new(self.real[i][j], self.imag.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}
