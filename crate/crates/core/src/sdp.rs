//! Primal-dual interior-point solver for the local-channel energy SDP
//!
//! ```text
//!   primal:  min  Tr[C E]   s.t.  Tr_{A'} E = I_A,  E ⪰ 0
//!   dual:    max  Tr[Y]     s.t.  C − Y ⊗ I_{A'} ⪰ 0
//! ```
//!
//! `E` is the Choi matrix of a channel on A (ordered `A ⊗ A'`), `Y` a
//! Hermitian operator on A. The solver follows a Mehrotra-type
//! predictor-corrector path with Nesterov–Todd scaling. The equality
//! constraint is expressed in an orthonormal basis of Hermitian `d×d`
//! matrices, so the Schur complement is a real `d²×d²` system.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::operators::{
    eig_matrix, hermitian_part, hermiticity_residual, kron, max_abs_entry, partial_trace_matrix, trace_of_product,
    BipartiteSpace, CMatrix, DensityMatrix, HermitianOperator, Subsystem, C64,
};
use crate::passivity::COperator;

/// Largest input dimension accepted by the solver (Choi dimension 256).
pub const MAX_SDP_DIM: usize = 16;
pub const MAX_ITERATIONS: usize = 200;
const STEP_FRACTION: f64 = 0.98;
const STALL_ITERATIONS: usize = 8;
const REFINEMENT_STEPS: usize = 2;

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a channel on a `d`-level system.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    d_a: usize,
    matrix: HermitianOperator,
}

impl ChoiMatrix {
    pub fn new(matrix: HermitianOperator, d_a: usize) -> Result<Self> {
        if matrix.dim() != d_a * d_a {
            return Err(Error::DimensionMismatch { expected: d_a * d_a, found: matrix.dim() });
        }
        let choi = Self { d_a, matrix };
        let pt = choi.partial_trace_residual();
        if pt > 1e-8 {
            return Err(Error::InvalidChoi(format!("Tr_A'[E] differs from the identity by {pt:.3e}")));
        }
        let lmin = eig_matrix(choi.matrix.matrix(), 1e-8)?.min();
        if lmin < -1e-9 * choi.matrix.trace().max(1.0) {
            return Err(Error::InvalidChoi(format!("minimal eigenvalue {lmin:.3e} is negative")));
        }
        Ok(choi)
    }

    /// `d|Φ⟩⟨Φ| = Σ_ij |i⟩⟨j| ⊗ |i⟩⟨j|`.
    pub fn identity_channel(d: usize) -> Self {
        let m = CMatrix::from_fn(d * d, d * d, |r, c| {
            if r % (d + 1) == 0 && c % (d + 1) == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { d_a: d, matrix: HermitianOperator::from_hermitian_part(&m) }
    }

    /// `I ⊗ I / d`: every input is replaced by the maximally mixed state.
    pub fn completely_depolarizing(d: usize) -> Self {
        Self { d_a: d, matrix: HermitianOperator::identity(d * d).scale(1.0 / d as f64) }
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn matrix(&self) -> &HermitianOperator {
        &self.matrix
    }

    /// `max |Tr_{A'}E − I|` over entries.
    pub fn partial_trace_residual(&self) -> f64 {
        let space = BipartiteSpace { d_a: self.d_a, d_b: self.d_a };
        let pt = partial_trace_matrix(self.matrix.matrix(), space, Subsystem::B).expect("Choi dimension is d²");
        max_abs_entry(&(pt - CMatrix::identity(self.d_a, self.d_a)))
    }
}

/// Channel action on an arbitrary operator: `E(M)[c',a'] = Σ_{c,a} M[c,a] E[(c,c'),(a,a')]`.
pub fn apply_choi_matrix(choi: &ChoiMatrix, m: &CMatrix) -> Result<CMatrix> {
    let d = choi.d_a;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
    }
    let e = choi.matrix.matrix();
    Ok(CMatrix::from_fn(d, d, |cp, ap| {
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..d {
            for a in 0..d {
                acc += m[(c, a)] * e[(c * d + cp, a * d + ap)];
            }
        }
        acc
    }))
}

pub fn apply_choi(choi: &ChoiMatrix, rho_a: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(HermitianOperator::from_hermitian_part(&apply_choi_matrix(choi, rho_a.matrix())?))
}

/// `(E ⊗ I_B)(ρ)` for a channel acting on the A factor of a bipartite state.
pub fn apply_local_channel(choi: &ChoiMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let space = rho.space();
    let (da, db) = (space.d_a, space.d_b);
    if choi.d_a != da {
        return Err(Error::DimensionMismatch { expected: da, found: choi.d_a });
    }
    let r = rho.matrix();
    let e = choi.matrix.matrix();
    let out = CMatrix::from_fn(space.dim(), space.dim(), |row, col| {
        let (cp, b) = (row / db, row % db);
        let (ap, f) = (col / db, col % db);
        let mut acc = C64::new(0.0, 0.0);
        for c in 0..da {
            for a in 0..da {
                acc += r[(space.index(c, b), space.index(a, f))] * e[(c * da + cp, a * da + ap)];
            }
        }
        acc
    });
    DensityMatrix::new(HermitianOperator::from_hermitian_part(&out), space)
}

/// Primal-dual optimum of the extraction SDP.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub choi: ChoiMatrix,
    pub dual_y: HermitianOperator,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub slackness_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SdpSolution {
    /// Assemble a candidate pair and evaluate its objectives against `c`.
    pub fn from_parts(choi: ChoiMatrix, dual_y: HermitianOperator, c: &HermitianOperator) -> Self {
        let d = choi.d_a;
        let primal_value = choi.matrix.expectation(c);
        let dual_value = dual_y.trace();
        let slack = c.matrix() - kron(dual_y.matrix(), &CMatrix::identity(d, d));
        let slackness_residual = (choi.matrix.matrix() * slack).norm();
        Self {
            choi,
            dual_y,
            primal_value,
            dual_value,
            gap: (primal_value - dual_value).abs(),
            slackness_residual,
            iterations: 0,
            converged: true,
        }
    }
}

/// Orthonormal basis of Hermitian `d×d` matrices in coordinates: diagonal
/// entries, then `(E_ij + E_ji)/√2` and `i(E_ij − E_ji)/√2` for `i < j`.
struct HermitianBasis {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianBasis {
    fn new(d: usize) -> Self {
        let pairs = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        Self { d, pairs }
    }

    fn len(&self) -> usize {
        self.d * self.d
    }

    /// Coordinates `⟨B_k, M⟩` of a Hermitian matrix.
    fn coords(&self, m: &CMatrix) -> DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        let mut v = DVector::zeros(self.len());
        for i in 0..self.d {
            v[i] = m[(i, i)].re;
        }
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            v[self.d + 2 * k] = s2 * z.re;
            v[self.d + 2 * k + 1] = s2 * z.im;
        }
        v
    }

    fn matrix(&self, y: &DVector<f64>) -> CMatrix {
        let s2 = std::f64::consts::SQRT_2;
        let mut m = CMatrix::zeros(self.d, self.d);
        for i in 0..self.d {
            m[(i, i)] = C64::new(y[i], 0.0);
        }
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let z = C64::new(y[self.d + 2 * k], y[self.d + 2 * k + 1]) / s2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        m
    }

    fn unit(&self, k: usize) -> CMatrix {
        let mut e = DVector::zeros(self.len());
        e[k] = 1.0;
        self.matrix(&e)
    }
}

struct Problem {
    d: usize,
    c: CMatrix,
    basis: HermitianBasis,
    b: DVector<f64>,
    eye_out: CMatrix,
}

impl Problem {
    fn space(&self) -> BipartiteSpace {
        BipartiteSpace { d_a: self.d, d_b: self.d }
    }

    /// `A(X)`: coordinates of `Tr_{A'} X`.
    fn apply(&self, x: &CMatrix) -> DVector<f64> {
        let pt = partial_trace_matrix(x, self.space(), Subsystem::B).expect("Choi-sized operand");
        self.basis.coords(&pt)
    }

    /// `A*(y) = Y ⊗ I`.
    fn adjoint(&self, y: &DVector<f64>) -> CMatrix {
        kron(&self.basis.matrix(y), &self.eye_out)
    }
}

/// Nesterov–Todd scaling `W = G G†` with `G⁻¹ X G⁻† = G† S G = Λ` diagonal,
/// from `X = L_X L_X†`, `S = L_S L_S†`, `L_S† L_X = U Λ V†`, `G = L_X V Λ^{-1/2}`.
struct Scaling {
    g: CMatrix,
    lambda: Vec<f64>,
}

fn nt_scaling(x: &CMatrix, s: &CMatrix) -> Option<Scaling> {
    let lx = Cholesky::new(x.clone())?.unpack();
    let ls = Cholesky::new(s.clone())?.unpack();
    let svd = SVD::new(ls.adjoint() * &lx, false, true);
    let mut g = &lx * svd.v_t?.adjoint();
    let lambda: Vec<f64> = svd.singular_values.iter().copied().collect();
    if lambda.iter().any(|l| l.is_nan() || *l <= 0.0) {
        return None;
    }
    for (k, l) in lambda.iter().enumerate() {
        g.column_mut(k).unscale_mut(l.sqrt());
    }
    Some(Scaling { g, lambda })
}

/// Largest `α` with `Λ + αD ⪰ 0` for diagonal positive `Λ` (infinite when unbounded).
fn max_step(lambda: &[f64], d: &CMatrix) -> Option<f64> {
    let t = CMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    let lmin = eig_matrix(&hermitian_part(&t), 1e-6).ok()?.min();
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

/// Scaled constraint operators `Ã_k = G† (B_k ⊗ I) G`, flattened to real rows
/// so that `𝒜̃(Z) = R·vec(Z)` and the Schur complement is the Gram matrix `R Rᵀ`.
struct ScaledConstraints {
    n: usize,
    rows: DMatrix<f64>,
}

impl ScaledConstraints {
    fn new(units: &[CMatrix], g: &CMatrix) -> Self {
        let n = g.nrows();
        let mut rows = DMatrix::<f64>::zeros(units.len(), 2 * n * n);
        for (k, a) in units.iter().enumerate() {
            let at = g.adjoint() * a * g;
            for (idx, z) in at.iter().enumerate() {
                rows[(k, 2 * idx)] = z.re;
                rows[(k, 2 * idx + 1)] = z.im;
            }
        }
        Self { n, rows }
    }

    fn apply(&self, z: &CMatrix) -> DVector<f64> {
        let flat = DVector::from_iterator(2 * self.n * self.n, z.iter().flat_map(|w| [w.re, w.im]));
        &self.rows * flat
    }

    fn adjoint(&self, y: &DVector<f64>) -> CMatrix {
        let flat = self.rows.tr_mul(y);
        CMatrix::from_iterator(self.n, self.n, (0..self.n * self.n).map(|i| C64::new(flat[2 * i], flat[2 * i + 1])))
    }

    fn schur(&self) -> Option<Cholesky<f64, nalgebra::Dyn>> {
        let m = &self.rows * self.rows.transpose();
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(ch);
        }
        let shift = 1e-14 * m.trace().max(1.0);
        Cholesky::new(m + DMatrix::identity(self.rows.nrows(), self.rows.nrows()) * shift)
    }
}

/// Scaled-space direction `(D, Δy, T)` for complementarity right-hand side
/// `ΛZ + ZΛ = 2·rc` with the dual kept exactly feasible.
struct Direction {
    d: CMatrix,
    dy: DVector<f64>,
    t: CMatrix,
}

fn solve_direction(
    ops: &ScaledConstraints,
    schur: &Cholesky<f64, nalgebra::Dyn>,
    lambda: &[f64],
    rp: &DVector<f64>,
    rc: &CMatrix,
) -> Direction {
    let z = CMatrix::from_fn(rc.nrows(), rc.ncols(), |i, j| rc[(i, j)] * (2.0 / (lambda[i] + lambda[j])));
    let mut dy = schur.solve(&(rp - ops.apply(&z)));
    // iterative refinement against the unsquared operator
    for _ in 0..REFINEMENT_STEPS {
        let d = &z + ops.adjoint(&dy);
        dy += schur.solve(&(rp - ops.apply(&d)));
    }
    let t = hermitian_part(&(-ops.adjoint(&dy)));
    let d = hermitian_part(&(z - &t));
    Direction { d, dy, t }
}

/// Restore `Tr_{A'}X = I` with a correction `X (V ⊗ I) X`. In the metric of
/// `X` this is a relative perturbation `X^{1/2}(I + K)X^{1/2}`, so positivity
/// and centrality survive while the rounding residual of the Newton solves
/// is removed.
fn restore_partial_trace(p: &Problem, units: &[CMatrix], x: CMatrix) -> CMatrix {
    let rp = &p.b - p.apply(&x);
    if rp.norm() == 0.0 {
        return x;
    }
    let m = units.len();
    let mut normal = DMatrix::<f64>::zeros(m, m);
    for (l, a) in units.iter().enumerate() {
        normal.set_column(l, &p.apply(&(&x * a * &x)));
    }
    let normal = (&normal + normal.transpose()) * 0.5;
    let Some(ch) = Cholesky::new(normal) else { return x };
    let v = ch.solve(&rp);
    let corr = &x * kron(&p.basis.matrix(&v), &p.eye_out) * &x;
    hermitian_part(&(x + corr))
}

/// Solve the extraction SDP for the operator built from a state–Hamiltonian pair.
pub fn solve_extraction(c: &COperator, tol: f64) -> Result<SdpSolution> {
    solve_channel_sdp(&c.matrix, c.d_a, tol)
}

/// `min Tr[C E]` over Choi matrices of channels on a `d`-level system.
/// Only the Hermitian part of `c` is used.
pub fn solve_channel_sdp(c: &HermitianOperator, d: usize, tol: f64) -> Result<SdpSolution> {
    if d == 0 || d > MAX_SDP_DIM {
        return Err(Error::Oversize(format!("SDP input dimension {d} outside 1..={MAX_SDP_DIM}")));
    }
    if c.dim() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: c.dim() });
    }
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::InvalidInput(format!("solver tolerance {tol:e} outside [1e-12, 1e-4]")));
    }
    let n = d * d;
    let basis = HermitianBasis::new(d);
    let b = basis.coords(&CMatrix::identity(d, d));
    let p = Problem { d, c: c.matrix().clone(), basis, b, eye_out: CMatrix::identity(d, d) };
    let units: Vec<CMatrix> = (0..p.basis.len()).map(|k| kron(&p.basis.unit(k), &p.eye_out)).collect();

    // strictly feasible start on both sides
    let lmin_c = eig_matrix(&p.c, 1e-8)?.min();
    let mut x = CMatrix::identity(n, n).unscale(d as f64);
    let mut y = p.basis.coords(&CMatrix::identity(d, d).scale(lmin_c - 1.0));

    let b_norm = p.b.norm();
    let mut converged = false;
    let mut iterations = 0;
    let mut best = (f64::INFINITY, x.clone(), y.clone(), 0);

    while iterations < MAX_ITERATIONS {
        let s = hermitian_part(&(&p.c - p.adjoint(&y)));
        let rp = &p.b - p.apply(&x);
        let pinf = rp.norm() / (1.0 + b_norm);
        let pobj = trace_of_product(&p.c, &x).re;
        let dobj = p.b.dot(&y);
        let rel_gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
        let slack = (&x * &s).norm();
        log::trace!("sdp it={iterations} pobj={pobj:.12e} dobj={dobj:.12e} gap={rel_gap:.2e} pinf={pinf:.2e} slack={slack:.2e}");
        let merit = (rel_gap / tol).max(pinf / tol).max(slack / (0.5 * tol.sqrt()));
        if merit < best.0 {
            best = (merit, x.clone(), y.clone(), iterations);
        }
        if merit <= 1.0 {
            converged = true;
            break;
        }
        if iterations - best.3 >= STALL_ITERATIONS {
            break;
        }

        let Some(sc) = nt_scaling(&x, &s) else { break };
        let lambda = &sc.lambda;
        let mu = lambda.iter().map(|l| l * l).sum::<f64>() / n as f64;
        let ops = ScaledConstraints::new(&units, &sc.g);
        let Some(schur) = ops.schur() else { break };

        // predictor
        let rc_aff = CMatrix::from_diagonal(&DVector::from_iterator(n, lambda.iter().map(|l| C64::new(-l * l, 0.0))));
        let aff = solve_direction(&ops, &schur, lambda, &rp, &rc_aff);
        let (Some(ap), Some(ad)) = (max_step(lambda, &aff.d), max_step(lambda, &aff.t)) else { break };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(n, lambda.iter().map(|l| C64::new(*l, 0.0))));
        let mu_aff = trace_of_product(&(&lam + aff.d.scale(ap)), &(&lam + aff.t.scale(ad))).re / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector with second-order term
        let cross = (&aff.d * &aff.t + &aff.t * &aff.d).scale(0.5);
        let rc = &rc_aff + CMatrix::identity(n, n).scale(sigma * mu) - cross;
        let dir = solve_direction(&ops, &schur, lambda, &rp, &rc);
        let dx = &sc.g * &dir.d * sc.g.adjoint();
        let (Some(ap), Some(ad)) = (max_step(lambda, &dir.d), max_step(lambda, &dir.t)) else { break };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        x = hermitian_part(&(&x + dx.scale(ap)));
        y += dir.dy.scale(ad);
        x = restore_partial_trace(&p, &units, x);
        iterations += 1;
    }
    let (_, x, y, _) = best;

    let choi = ChoiMatrix { d_a: d, matrix: HermitianOperator::from_hermitian_part(&x) };
    let dual_y = HermitianOperator::from_hermitian_part(&p.basis.matrix(&y));
    let mut sol = SdpSolution::from_parts(choi, dual_y, c);
    sol.iterations = iterations;
    sol.converged = converged;
    if converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged(Box::new(sol)))
    }
}

/// Independent recomputation of feasibility, gap and slackness.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CertificateReport {
    pub choi_min_eigenvalue: f64,
    pub choi_psd: bool,
    pub partial_trace_residual: f64,
    pub primal_feasible: bool,
    pub dual_min_eigenvalue: f64,
    pub dual_feasible: bool,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub gap_ok: bool,
    pub slackness_residual: f64,
    pub slackness_ok: bool,
    pub pass: bool,
}

pub fn verify_certificate(sol: &SdpSolution, c: &COperator, tol: f64) -> Result<CertificateReport> {
    verify_channel_certificate(sol, &c.matrix, tol)
}

pub fn verify_channel_certificate(sol: &SdpSolution, c: &HermitianOperator, tol: f64) -> Result<CertificateReport> {
    let d = sol.choi.d_a;
    if c.dim() != d * d || sol.dual_y.dim() != d {
        return Err(Error::DimensionMismatch { expected: d * d, found: c.dim() });
    }
    let e = sol.choi.matrix.matrix();
    let e_eig = eig_matrix(e, 1e-8)?;
    let e_norm = e_eig.min().abs().max(e_eig.max().abs());
    let choi_min = e_eig.min();
    let choi_psd = choi_min >= -1e-9 * e_norm.max(1.0);
    let pt_res = sol.choi.partial_trace_residual();

    let slack = hermitian_part(&(c.matrix() - kron(sol.dual_y.matrix(), &CMatrix::identity(d, d))));
    let c_eig = eig_matrix(c.matrix(), 1e-8)?;
    let c_norm = c_eig.min().abs().max(c_eig.max().abs());
    let dual_min = eig_matrix(&slack, 1e-8)?.min();
    let dual_feasible = dual_min >= -1e-9 * c_norm.max(1.0);

    let primal_value = trace_of_product(c.matrix(), e).re;
    let dual_value = sol.dual_y.trace();
    let gap = primal_value - dual_value;
    let gap_ok = gap.abs() <= tol * primal_value.abs().max(1.0);
    let slackness_residual = (e * &slack).norm();
    let slackness_ok = slackness_residual <= tol.sqrt();
    let primal_feasible = choi_psd && pt_res <= 1e-8 && hermiticity_residual(e) <= 1e-12 * e_norm.max(1.0);
    Ok(CertificateReport {
        choi_min_eigenvalue: choi_min,
        choi_psd,
        partial_trace_residual: pt_res,
        primal_feasible,
        dual_min_eigenvalue: dual_min,
        dual_feasible,
        primal_value,
        dual_value,
        gap,
        gap_ok,
        slackness_residual,
        slackness_ok,
        pass: primal_feasible && dual_feasible && gap_ok && slackness_ok,
    })
}
