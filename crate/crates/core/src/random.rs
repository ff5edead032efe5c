//! Seeded random instance generators for sweeps, tests and benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operators::{BipartiteSpace, CMatrix, CVector, DensityMatrix, HermitianOperator, C64};
use crate::sdp::ChoiMatrix;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Complex Ginibre matrix with i.i.d. standard normal entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// GUE-distributed Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianOperator {
    let g = ginibre(rng, d, d);
    HermitianOperator::from_hermitian_part(&g)
}

/// GUE direction rescaled to the requested operator norm.
pub fn random_hermitian_with_norm<R: Rng + ?Sized>(rng: &mut R, d: usize, norm: f64) -> HermitianOperator {
    let h = random_hermitian(rng, d);
    let current = crate::operators::op_norm(&h).expect("eigensolver converges on small GUE samples");
    h.scale(norm / current)
}

/// Haar-random unitary via QR of a Ginibre matrix with phase fixing.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Random density operator of the given rank (induced measure), returned as a
/// bare Hermitian operator.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> HermitianOperator {
    let g = ginibre(rng, d, rank.max(1));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    HermitianOperator::from_hermitian_part(&m.unscale(tr))
}

pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, space: BipartiteSpace, rank: usize) -> DensityMatrix {
    DensityMatrix::new(random_density(rng, space.dim(), rank), space).expect("induced-measure states are valid")
}

/// Kraus operators of a random channel on `C^d`, obtained from the blocks of
/// a Haar-random isometry `C^d → C^d ⊗ C^k`.
pub fn random_kraus<R: Rng + ?Sized>(rng: &mut R, d: usize, n_kraus: usize) -> Vec<CMatrix> {
    let k = n_kraus.max(1);
    let u = haar_unitary(rng, d * k);
    (0..k).map(|b| u.view((b * d, 0), (d, d)).into_owned()).collect()
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a channel given by Kraus operators.
pub fn choi_from_kraus(kraus: &[CMatrix]) -> CMatrix {
    let d = kraus[0].ncols();
    CMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, out_r) = (r / d, r % d);
        let (j, out_c) = (c / d, c % d);
        kraus.iter().map(|k| k[(out_r, i)] * k[(out_c, j)].conj()).sum()
    })
}

pub fn random_choi<R: Rng + ?Sized>(rng: &mut R, d: usize, n_kraus: usize) -> ChoiMatrix {
    let m = choi_from_kraus(&random_kraus(rng, d, n_kraus));
    ChoiMatrix::new(HermitianOperator::from_hermitian_part(&m), d).expect("Kraus-generated Choi matrices are valid")
}
