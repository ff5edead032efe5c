//! Analytic sufficient conditions for passivity of eigenmixtures and thermal
//! states, the frustration chain, a correlation-clustering estimator and the
//! finite-region criterion for large lattices.
//!
//! All spectral formulas use the gauge `E₀ = 0`; the subtracted offset is
//! kept in [`SpectralData::energy_offset`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::operators::{
    eig_hermitian, eig_matrix, hermitian_part, kron, max_abs_entry, partial_trace_matrix, schmidt_spectrum,
    BipartiteSpace, CMatrix, DensityMatrix, HermitianOperator, Subsystem, C64,
};
use crate::random;
use crate::sdp::{apply_choi_matrix, ChoiMatrix};

/// Inverse-temperature window shared by the bisections in this module.
pub const BETA_WINDOW: (f64, f64) = (1e-3, 1e3);
const BISECTION_STEPS: usize = 60;

/// Spectrum and per-level Schmidt extremes of a bipartite Hamiltonian.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    /// Ascending energies with the ground energy shifted to zero.
    pub energies: Vec<f64>,
    /// Ground energy before the shift.
    pub energy_offset: f64,
    pub schmidt_mins: Vec<f64>,
    pub schmidt_maxs: Vec<f64>,
    pub ground_degenerate: bool,
    pub ground_full_rank: bool,
    /// `d_A > d_B`: full Schmidt rank on A is impossible.
    pub a_larger_than_b: bool,
}

impl SpectralData {
    /// Spectral data from explicit values; energies are sorted together with
    /// their Schmidt extremes and shifted so the minimum is zero.
    pub fn from_parts(energies: &[f64], schmidt_mins: &[f64], schmidt_maxs: &[f64], tol: &Tolerances) -> Result<Self> {
        let n = energies.len();
        if n < 2 || schmidt_mins.len() != n || schmidt_maxs.len() != n {
            return Err(Error::InvalidInput("spectral data needs at least two levels with matching Schmidt lists".into()));
        }
        if schmidt_mins.iter().zip(schmidt_maxs).any(|(lo, hi)| !(0.0..=1.0).contains(lo) || lo > hi || *hi > 1.0) {
            return Err(Error::InvalidInput("Schmidt extremes must satisfy 0 ≤ q_min ≤ q_max ≤ 1".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        let e0 = energies[order[0]];
        let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
        let shifted: Vec<f64> = order.iter().map(|&i| energies[i] - e0).collect();
        let mins: Vec<f64> = order.iter().map(|&i| schmidt_mins[i]).collect();
        Ok(Self {
            ground_degenerate: shifted[1] < tol.deg_tol * scale,
            ground_full_rank: mins[0] > tol.schmidt_tol,
            a_larger_than_b: false,
            schmidt_maxs: order.iter().map(|&i| schmidt_maxs[i]).collect(),
            schmidt_mins: mins,
            energies: shifted,
            energy_offset: e0,
        })
    }

    pub fn gap(&self) -> f64 {
        self.energies[1]
    }

    /// `max_{i≥1} E_i q_{i,max}²`.
    pub fn excited_weight(&self) -> f64 {
        self.energies.iter().zip(&self.schmidt_maxs).skip(1).map(|(e, q)| e * q * q).fold(0.0, f64::max)
    }

    /// `E₁ q_{0,min}²`.
    pub fn ground_weight(&self) -> f64 {
        self.energies[1] * self.schmidt_mins[0] * self.schmidt_mins[0]
    }

    fn require_regular_ground(&self) -> Result<()> {
        if self.ground_degenerate {
            return Err(Error::DegenerateGround { gap: self.gap() });
        }
        if !self.ground_full_rank {
            return Err(Error::RankDeficientGround { q_min: self.schmidt_mins[0] });
        }
        Ok(())
    }

    /// Ground population `1/Z(β)` of the thermal state.
    pub fn ground_population(&self, beta: f64) -> f64 {
        1.0 / self.energies.iter().map(|e| (-beta * e).exp()).sum::<f64>()
    }

    /// `⟨H⟩_β` in the shifted gauge.
    pub fn mean_energy(&self, beta: f64) -> f64 {
        let (num, z) = self
            .energies
            .iter()
            .fold((0.0, 0.0), |(num, z), e| {
                let w = (-beta * e).exp();
                (num + e * w, z + w)
            });
        num / z
    }
}

/// Eigendecomposition plus Schmidt spectra of every eigenvector on A.
pub fn spectral_data(h: &HermitianOperator, space: BipartiteSpace, tol: &Tolerances) -> Result<SpectralData> {
    space.check(h.dim())?;
    let eig = eig_hermitian(h)?;
    let da = space.d_a;
    let mut mins = Vec::with_capacity(eig.dim());
    let mut maxs = Vec::with_capacity(eig.dim());
    for i in 0..eig.dim() {
        let q = schmidt_spectrum(&eig.vector(i), space)?;
        maxs.push(q[0]);
        // the A-side spectrum has d_A entries, padded with zeros beyond rank d_B
        mins.push(if da > space.d_b { 0.0 } else { q[da - 1].max(0.0) });
    }
    let scale = eig.min().abs().max(eig.max().abs());
    let e0 = eig.values[0];
    Ok(SpectralData {
        energies: eig.values.iter().map(|e| e - e0).collect(),
        energy_offset: e0,
        ground_degenerate: eig.values[1] - e0 < tol.deg_tol * scale,
        ground_full_rank: da <= space.d_b && mins[0] > tol.schmidt_tol,
        a_larger_than_b: da > space.d_b,
        schmidt_mins: mins,
        schmidt_maxs: maxs,
    })
}

/// Ground population above which every eigenmixture is passive:
/// `(1 + E₁ q_{0,min}² / max_{i≥1}[E_i q_{i,max}²])⁻¹`.
pub fn threshold_population(sd: &SpectralData) -> Result<f64> {
    sd.require_regular_ground()?;
    Ok(1.0 / (1.0 + sd.ground_weight() / sd.excited_weight()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    /// A sign change was bracketed and bisected.
    Crossing,
    /// The condition already holds at the hottest end of the window.
    HoldsAcrossWindow,
    /// The condition fails even at the coldest end of the window.
    NoCrossing,
}

#[derive(Clone, Debug, Serialize)]
pub struct TemperatureBound {
    pub beta: f64,
    pub temperature: f64,
    pub kind: CrossingKind,
    /// `⟨H⟩_β − E₁ p₀(β) q_{0,min}²` is nonincreasing on the sampled window.
    pub monotone: bool,
}

/// Inverse temperature `β_b` solving `⟨H⟩_β = E₁ p₀(β) q_{0,min}²`; thermal
/// states with `β ≥ β_b` are passive.
pub fn threshold_temperature_bound(sd: &SpectralData) -> Result<TemperatureBound> {
    sd.require_regular_ground()?;
    let gw = sd.ground_weight();
    let f = |beta: f64| sd.mean_energy(beta) - gw * sd.ground_population(beta);
    let (lo, hi) = (BETA_WINDOW.0.ln(), BETA_WINDOW.1.ln());

    let samples: Vec<f64> = (0..=200).map(|k| f((lo + (hi - lo) * k as f64 / 200.0).exp())).collect();
    let monotone = samples.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(gw));

    let finish = |beta: f64, kind| TemperatureBound { beta, temperature: 1.0 / beta, kind, monotone };
    if f(BETA_WINDOW.0) <= 0.0 {
        return Ok(finish(BETA_WINDOW.0, CrossingKind::HoldsAcrossWindow));
    }
    if f(BETA_WINDOW.1) > 0.0 {
        return Ok(finish(BETA_WINDOW.1, CrossingKind::NoCrossing));
    }
    // the returned end keeps f ≤ 0 so the guarantee applies to it
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if f(m.exp()) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(finish(b.exp(), CrossingKind::Crossing))
}

#[derive(Clone, Debug, Serialize)]
pub struct Frustration {
    /// `E₀(H) − E₀(H_A + H_B) − E₀(V)`.
    pub e_f: f64,
    /// Largest first gap of the local Hamiltonians.
    pub local_gap_max: f64,
    /// `E_f / max_i E₁^i`; absent when both local gaps vanish.
    pub ratio: Option<f64>,
    pub one_minus_q0_max: f64,
    pub q0_min_term: f64,
    pub chain_holds: Option<bool>,
}

/// Frustration energy of a decomposition `H = H_A ⊗ I + I ⊗ H_B + V` and
/// both sides of the entanglement lower bound.
pub fn frustration(
    h_total: &HermitianOperator,
    h_a: &HermitianOperator,
    h_b: &HermitianOperator,
    v: &HermitianOperator,
    space: BipartiteSpace,
    tol: &Tolerances,
) -> Result<Frustration> {
    space.check(h_total.dim())?;
    space.check(v.dim())?;
    if h_a.dim() != space.d_a || h_b.dim() != space.d_b {
        return Err(Error::DimensionMismatch { expected: space.d_a, found: h_a.dim() });
    }
    let local = kron(h_a.matrix(), &CMatrix::identity(space.d_b, space.d_b))
        + kron(&CMatrix::identity(space.d_a, space.d_a), h_b.matrix());
    let mismatch = max_abs_entry(&(h_total.matrix() - &local - v.matrix()));
    if mismatch > 1e-9 {
        return Err(Error::InvalidInput(format!("decomposition does not reassemble the Hamiltonian ({mismatch:.3e})")));
    }
    let e_total = eig_hermitian(h_total)?;
    let e_local = eig_matrix(&local, tol.eig_tol)?.min();
    let e_v = eig_hermitian(v)?.min();
    let e_f = e_total.min() - e_local - e_v;
    if e_f < -1e-9 * e_total.max().abs().max(1.0) {
        return Err(Error::InvalidInput(format!("negative frustration energy {e_f:.3e}")));
    }
    let gap = |h: &HermitianOperator| -> Result<f64> {
        let e = eig_hermitian(h)?;
        Ok(e.values.iter().find(|x| **x - e.min() > tol.deg_tol * e.max().abs().max(1.0)).map_or(0.0, |x| x - e.min()))
    };
    let local_gap_max = gap(h_a)?.max(gap(h_b)?);
    let q = schmidt_spectrum(&e_total.vector(0), space)?;
    let q0_max = q[0];
    let q0_min = if space.d_a > space.d_b { 0.0 } else { q[space.d_a - 1] };
    let one_minus = 1.0 - q0_max;
    let ratio = (local_gap_max > 0.0).then(|| e_f / local_gap_max);
    Ok(Frustration {
        e_f: e_f.max(0.0),
        local_gap_max,
        ratio,
        one_minus_q0_max: one_minus,
        q0_min_term: (space.d_a as f64 - 1.0) * q0_min,
        chain_holds: ratio.map(|r| r >= one_minus - 1e-9 && one_minus >= (space.d_a as f64 - 1.0) * q0_min - 1e-12),
    })
}

/// Lower estimate of `max_{‖M‖,‖N‖≤1} |Tr[(M⊗N)ρ] − Tr[Mρ_A] Tr[Nρ_B]|`
/// by alternating maximization with five random restarts.
pub fn clustering_estimate(rho: &DensityMatrix, seed: u64) -> Result<f64> {
    let space = rho.space();
    if space.dim() > 1024 {
        return Err(Error::Oversize(format!("clustering estimate limited to dimension 1024 (got {})", space.dim())));
    }
    let (da, db) = (space.d_a, space.d_b);
    let rho_a = rho.reduced(Subsystem::A);
    let rho_b = rho.reduced(Subsystem::B);
    let delta = rho.matrix() - kron(rho_a.matrix(), rho_b.matrix());
    let ia = CMatrix::identity(da, da);
    let ib = CMatrix::identity(db, db);

    // Hermitian operator on A whose trace against M gives the objective
    let on_a = |n: &CMatrix| -> Result<CMatrix> {
        Ok(hermitian_part(&partial_trace_matrix(&(kron(&ia, n) * &delta), space, Subsystem::B)?))
    };
    let on_b = |m: &CMatrix| -> Result<CMatrix> {
        Ok(hermitian_part(&partial_trace_matrix(&(kron(m, &ib) * &delta), space, Subsystem::A)?))
    };
    let sign_and_norm = |x: &CMatrix| -> Result<(CMatrix, f64)> {
        let e = eig_matrix(x, 1e-8)?;
        let norm = e.values.iter().map(|v| v.abs()).sum();
        let s = e.map(|v| C64::new(if v >= 0.0 { 1.0 } else { -1.0 }, 0.0));
        Ok((s, norm))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..5 {
        let (mut n, _) = sign_and_norm(random::random_hermitian(&mut rng, db).matrix())?;
        let mut value = 0.0;
        for _ in 0..500 {
            let (m, _) = sign_and_norm(&on_a(&n)?)?;
            let (n_next, v) = sign_and_norm(&on_b(&m)?)?;
            n = n_next;
            let done = (v - value).abs() <= 1e-8 * v.max(1e-300);
            value = v;
            if done {
                break;
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

/// Finite-region inputs for the lattice criterion. The constants and the
/// clustering profile are supplied by the caller.
pub struct Theorem3Inputs {
    pub spectral_ab1: SpectralData,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub epsilon_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub h_a_norm: f64,
    pub d_a: usize,
    pub boundary_size_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub l: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem3Result {
    pub lambda_l: f64,
    pub condition_holds: bool,
    /// Meaningful only when `condition_holds`.
    pub p0_bound: f64,
    /// Inverse temperature at which the ground population of `H_{AB₁}`
    /// reaches `p0_bound`; absent when the condition fails.
    pub beta_star_hint: Option<f64>,
}

pub fn theorem3_check(inputs: &Theorem3Inputs) -> Result<Theorem3Result> {
    let sd = &inputs.spectral_ab1;
    sd.require_regular_ground()?;
    if !(inputs.k > 0.0 && inputs.c2 > 0.0 && inputs.c1 >= 0.0 && inputs.l > 0.0 && inputs.h_a_norm >= 0.0) {
        return Err(Error::InvalidInput("constants must satisfy K > 0, c1 ≥ 0, c2 > 0, l > 0".into()));
    }
    // ε must be nonnegative and nonincreasing on a sample around l/2
    let probes: Vec<f64> = (0..=32).map(|i| inputs.l * (0.05 + 0.1 * i as f64)).collect();
    let eps: Vec<f64> = probes.iter().map(|&x| (inputs.epsilon_fn)(x)).collect();
    if eps.iter().any(|e| e.is_nan() || *e < 0.0) || eps.windows(2).any(|w| w[1] > w[0] + 1e-15) {
        return Err(Error::InvalidInput("clustering profile must be nonnegative and nonincreasing".into()));
    }
    let boundary = (inputs.boundary_size_fn)(inputs.l);
    let d_a = inputs.d_a as f64;
    let lambda_l = inputs.k
        * d_a
        * d_a
        * inputs.h_a_norm
        * boundary
        * ((inputs.epsilon_fn)(inputs.l / 2.0) + inputs.c1 * (-inputs.c2 * inputs.l).exp());
    let mx = sd.excited_weight();
    let p0_bound = (1.0 + lambda_l / mx) / (1.0 + sd.ground_weight() / mx);
    let condition_holds = sd.ground_weight() > lambda_l;
    let beta_star_hint = condition_holds.then(|| beta_for_ground_population(sd, p0_bound));
    Ok(Theorem3Result { lambda_l, condition_holds, p0_bound, beta_star_hint })
}

/// Bisection in `ln β` for `1/Z(β) = target` on [`BETA_WINDOW`].
fn beta_for_ground_population(sd: &SpectralData, target: f64) -> f64 {
    let (mut a, mut b) = (BETA_WINDOW.0.ln(), BETA_WINDOW.1.ln());
    if sd.ground_population(a.exp()) >= target {
        return BETA_WINDOW.0;
    }
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if sd.ground_population(m.exp()) >= target {
            b = m;
        } else {
            a = m;
        }
    }
    b.exp()
}

/// Superoperator trace `Tr(I − E) = d² − Σ_ij ⟨i|E(|i⟩⟨j|)|j⟩`.
pub fn identity_defect_trace(choi: &ChoiMatrix) -> f64 {
    let d = choi.d_a();
    let e = choi.matrix().matrix();
    let tr_e: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| e[(i * d + i, j * d + j)].re).sum();
    (d * d) as f64 - tr_e
}

/// Lower bound on `‖I − E‖_{1,1}` from random unit dyads `|u⟩⟨v|`.
pub fn sampled_one_one_norm(choi: &ChoiMatrix, samples: usize, seed: u64) -> Result<f64> {
    let d = choi.d_a();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let u = random::random_state_vector(&mut rng, d);
        let v = random::random_state_vector(&mut rng, d);
        let dyad = &u * v.adjoint();
        let diff = &dyad - apply_choi_matrix(choi, &dyad)?;
        let norm: f64 = diff.singular_values().iter().sum();
        best = best.max(norm);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_chain, build_two_qubit, eigenmixture, local_sum, ModelSpec, SpinChainSpec, TwoQubitSpec};
    use crate::operators::{gibbs, pauli};
    use crate::passivity::{build_c_operator, check_theorem1};
    use proptest::prelude::*;
    use rand::Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn appendix_c(kappa: f64, gamma: f64) -> (HermitianOperator, BipartiteSpace) {
        build_two_qubit(&TwoQubitSpec::anisotropic(2.0, kappa, gamma)).unwrap()
    }

    #[test]
    fn product_ground_state_is_rank_deficient() {
        let h = local_sum(&HermitianOperator::diagonal(&[0.0, 1.0]), &HermitianOperator::diagonal(&[0.0, 1.5]));
        let sd = spectral_data(&h, BipartiteSpace::new(2, 2).unwrap(), &tol()).unwrap();
        assert!(!sd.ground_full_rank);
        assert!(matches!(threshold_population(&sd), Err(Error::RankDeficientGround { .. })));
    }

    #[test]
    fn coupled_pair_has_full_rank_ground() {
        let (h, space) = appendix_c(5.0, 0.0001);
        let sd = spectral_data(&h, space, &tol()).unwrap();
        assert!(sd.ground_full_rank && !sd.ground_degenerate);
        assert_eq!(sd.energies[0], 0.0);
        // oracle: Schmidt coefficients from the reduced state of the ground vector
        let eig = eig_hermitian(&h).unwrap();
        let g = DensityMatrix::pure(&eig.vector(0), space).unwrap();
        let red = eig_hermitian(&g.reduced(Subsystem::A)).unwrap();
        assert!((red.min() - sd.schmidt_mins[0]).abs() < 1e-12);
        assert!((red.max() - sd.schmidt_maxs[0]).abs() < 1e-12);
    }

    #[test]
    fn xx_coupling_has_degenerate_ground() {
        let (h, space) = build_two_qubit(&TwoQubitSpec::xx_only(1.0)).unwrap();
        let sd = spectral_data(&h, space, &tol()).unwrap();
        assert!(sd.ground_degenerate);
        assert!(matches!(threshold_population(&sd), Err(Error::DegenerateGround { .. })));
    }

    #[test]
    fn larger_a_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random::random_hermitian(&mut rng, 6);
        let sd = spectral_data(&h, BipartiteSpace::new(3, 2).unwrap(), &tol()).unwrap();
        assert!(sd.a_larger_than_b && !sd.ground_full_rank);
    }

    #[test]
    fn threshold_population_plug_ins() {
        // E₁ q₀² equal to the excited weight gives 1/2
        let sd = SpectralData::from_parts(&[0.0, 1.0, 2.0], &[0.5, 0.1, 0.1], &[0.5, 0.5, 0.5], &tol()).unwrap();
        // E₁ q₀,min² = 0.25, max_i E_i q_i,max² = 2·0.25 = 0.5
        assert!((threshold_population(&sd).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        let sd = SpectralData::from_parts(&[0.0, 2.0, 2.0], &[0.5, 0.1, 0.1], &[0.5, 0.5, 0.5], &tol()).unwrap();
        assert!((threshold_population(&sd).unwrap() - 0.5).abs() < 1e-15);
        // all Schmidt coefficients 1/2
        let e = [0.0, 1.0, 3.0, 4.0];
        let sd = SpectralData::from_parts(&e, &[0.5; 4], &[0.5; 4], &tol()).unwrap();
        assert!((threshold_population(&sd).unwrap() - 1.0 / (1.0 + 1.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn spectral_data_is_gauge_fixed() {
        let (h, space) = appendix_c(2.0, 0.3);
        let a = spectral_data(&h, space, &tol()).unwrap();
        let b = spectral_data(&h.shift(7.5), space, &tol()).unwrap();
        assert!((b.energy_offset - a.energy_offset - 7.5).abs() < 1e-12);
        for (x, y) in a.energies.iter().zip(&b.energies) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((threshold_population(&a).unwrap() - threshold_population(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn eigenmixtures_above_threshold_pass_on_coupled_pair() {
        let (h, space) = appendix_c(1.5, 0.3);
        let sd = spectral_data(&h, space, &tol()).unwrap();
        let pb = threshold_population(&sd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p0 = rng.random_range(pb..=1.0);
            let rest: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let s: f64 = rest.iter().sum();
            let mut p = vec![p0];
            p.extend(rest.iter().map(|r| (1.0 - p0) * r / s));
            let rho = eigenmixture(&h, &p, space).unwrap().state;
            let r = check_theorem1(&build_c_operator(&rho, &h, &tol()).unwrap(), &tol()).unwrap();
            assert!(r.is_passive, "p = {p:?}: {r:?}");
        }
    }

    #[test]
    fn temperature_bound_two_level_closed_form() {
        // two levels 0, E with q₀,min = q: ⟨H⟩ = E p₁, condition E p₁ = E p₀ q²
        // ⇒ e^{-βE} = q² ⇒ β = −2 ln q / E
        let (e, q) = (1.7, 0.4);
        let sd = SpectralData::from_parts(&[0.0, e], &[q, 0.2], &[1.0 - q, 0.8], &tol()).unwrap();
        let tb = threshold_temperature_bound(&sd).unwrap();
        assert_eq!(tb.kind, CrossingKind::Crossing);
        assert!(tb.monotone);
        assert!((tb.beta - (-2.0 * q.ln() / e)).abs() < 1e-9);
    }

    #[test]
    fn temperature_bound_large_beta_limit() {
        let (h, space) = appendix_c(1.0, 0.7);
        let sd = spectral_data(&h, space, &tol()).unwrap();
        let gw = sd.ground_weight();
        let big = 1e3;
        assert!(sd.mean_energy(big) < gw * sd.ground_population(big));
        assert!((sd.ground_population(big) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_states_beyond_bound_pass() {
        for kappa in [0.5, 1.0, 2.0, 5.0] {
            for gamma in [0.0001, 0.7] {
                let (h, space) = appendix_c(kappa, gamma);
                let sd = spectral_data(&h, space, &tol()).unwrap();
                let Ok(tb) = threshold_temperature_bound(&sd) else { continue };
                for factor in [1.0, 1.5, 3.0, 10.0] {
                    let rho = gibbs(&h, tb.beta * factor, space).unwrap();
                    let r = check_theorem1(&build_c_operator(&rho, &h, &tol()).unwrap(), &tol()).unwrap();
                    assert!(r.is_passive, "κ={kappa} γ={gamma} β={}: {r:?}", tb.beta * factor);
                }
            }
        }
    }

    #[test]
    fn frustration_examples() {
        let ha = HermitianOperator::diagonal(&[0.0, 1.0]);
        let hb = HermitianOperator::diagonal(&[0.0, 2.0]);
        let space = BipartiteSpace::new(2, 2).unwrap();
        let zero = HermitianOperator::zeros(4);
        let f = frustration(&local_sum(&ha, &hb), &ha, &hb, &zero, space, &tol()).unwrap();
        assert!(f.e_f.abs() < 1e-12);

        // ferromagnetic ZZ coupling shares its ground state with the Z fields
        let zz = HermitianOperator::from_hermitian_part(&pauli::parse("ZZ").unwrap().scale(-0.7));
        let hz = HermitianOperator::from_hermitian_part(&pauli::parse("Z").unwrap());
        let total = local_sum(&hz, &hz).add(&zz).unwrap();
        let f = frustration(&total, &hz, &hz, &zz, space, &tol()).unwrap();
        assert!(f.e_f.abs() < 1e-12);
        assert!(f.one_minus_q0_max.abs() < 1e-12);

        let bad = frustration(&total, &hz, &hz, &zero, space, &tol());
        assert!(bad.is_err());
    }

    #[test]
    fn frustration_chain_on_builtin_models() {
        let specs = [
            ModelSpec::TwoQubit(TwoQubitSpec::anisotropic(2.0, 2.0, 0.0001)),
            ModelSpec::TwoQubit(TwoQubitSpec::anisotropic(2.0, 0.5, 0.7)),
            ModelSpec::TwoQubit(TwoQubitSpec::xy_symmetric(-2.0, 1.0)),
            ModelSpec::TwoQubit(TwoQubitSpec::xx_only(1.0)),
            ModelSpec::Chain(SpinChainSpec::new(3, 0.8, 0.7)),
            ModelSpec::Chain(SpinChainSpec::new(4, 1.5, 0.3)),
        ];
        for spec in specs {
            let m = spec.build().unwrap();
            let dec = m.decomposition.as_ref().unwrap();
            let f = frustration(&m.hamiltonian, &dec.h_a, &dec.h_b, &dec.v, m.space, &tol()).unwrap();
            assert!(f.e_f >= 0.0);
            assert_ne!(f.chain_holds, Some(false), "{spec:?}: {f:?}");
        }
        // strict inequality on the anisotropic pair at κ = 2
        let (h, space) = appendix_c(2.0, 0.0001);
        let m = ModelSpec::TwoQubit(TwoQubitSpec::anisotropic(2.0, 2.0, 0.0001)).build().unwrap();
        let dec = m.decomposition.unwrap();
        let f = frustration(&h, &dec.h_a, &dec.h_b, &dec.v, space, &tol()).unwrap();
        assert!(f.ratio.unwrap() > f.one_minus_q0_max);
    }

    #[test]
    fn clustering_of_product_state_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random::random_density(&mut rng, 2, 2);
        let b = random::random_density(&mut rng, 3, 3);
        let rho = DensityMatrix::new(crate::operators::tensor(&a, &b), BipartiteSpace::new(2, 3).unwrap()).unwrap();
        assert!(clustering_estimate(&rho, 1).unwrap() < 1e-10);
    }

    fn pauli_product_max(rho: &DensityMatrix, na: usize, nb: usize) -> f64 {
        let strings = |n: usize| -> Vec<CMatrix> {
            let ops = [pauli::Pauli::I, pauli::Pauli::X, pauli::Pauli::Y, pauli::Pauli::Z];
            (0..4usize.pow(n as u32))
                .map(|mut k| {
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..n {
                        v.push(ops[k % 4]);
                        k /= 4;
                    }
                    pauli::string(&v)
                })
                .collect()
        };
        let (sa, sb) = (strings(na), strings(nb));
        let ra = rho.reduced(Subsystem::A);
        let rb = rho.reduced(Subsystem::B);
        let mut best = 0.0f64;
        for m in &sa {
            let em = crate::operators::trace_of_product(m, ra.matrix()).re;
            for n in &sb {
                let en = crate::operators::trace_of_product(n, rb.matrix()).re;
                let joint = crate::operators::trace_of_product(&kron(m, n), rho.matrix()).re;
                best = best.max((joint - em * en).abs());
            }
        }
        best
    }

    #[test]
    fn clustering_of_singlet_is_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = crate::operators::CVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
            C64::new(-s, 0.0),
            C64::new(0.0, 0.0),
        ]);
        let rho = DensityMatrix::pure(&v, BipartiteSpace::new(2, 2).unwrap()).unwrap();
        let est = clustering_estimate(&rho, 7).unwrap();
        assert!((pauli_product_max(&rho, 1, 1) - 1.0).abs() < 1e-12);
        assert!((est - 1.0).abs() < 1e-9, "{est}");
    }

    #[test]
    fn clustering_bounds_pauli_products_on_chain() {
        let mut spec = SpinChainSpec::new(6, 2.0, 0.0001);
        spec.a_sites = 3;
        let (h, space) = build_chain(&spec).unwrap();
        let rho = gibbs(&h, 1.0, space).unwrap();
        let est = clustering_estimate(&rho, 11).unwrap();
        let oracle = pauli_product_max(&rho, 3, 3);
        assert!(est >= oracle - 1e-8, "{est} < {oracle}");
    }

    fn toy_spectral() -> SpectralData {
        SpectralData::from_parts(&[0.0, 1.0, 1.5, 3.0], &[0.3, 0.1, 0.2, 0.0], &[0.7, 0.9, 0.8, 1.0], &tol()).unwrap()
    }

    fn toy_inputs(boundary: f64, c1: f64, eps: fn(f64) -> f64) -> Theorem3Inputs {
        Theorem3Inputs {
            spectral_ab1: toy_spectral(),
            k: 1.0,
            c1,
            c2: 1.0,
            epsilon_fn: Box::new(eps),
            h_a_norm: 0.5,
            d_a: 2,
            boundary_size_fn: Box::new(move |_| boundary),
            l: 4.0,
        }
    }

    #[test]
    fn theorem3_hand_evaluated() {
        let r = theorem3_check(&toy_inputs(1.0, 1.0, |l| (-l).exp())).unwrap();
        // λ = 1·4·0.5·1·(e^{-2} + e^{-4})
        let lambda = 2.0 * ((-2.0f64).exp() + (-4.0f64).exp());
        assert!((r.lambda_l - lambda).abs() < 1e-15);
        let sd = toy_spectral();
        let mx: f64 = [1.0 * 0.81, 1.5 * 0.64, 3.0 * 1.0].into_iter().fold(0.0, f64::max);
        let gw = 1.0 * 0.09;
        assert_eq!(sd.excited_weight(), mx);
        assert!((sd.ground_weight() - gw).abs() < 1e-15);
        assert_eq!(r.condition_holds, gw > lambda);
        assert!((r.p0_bound - (1.0 + lambda / mx) / (1.0 + gw / mx)).abs() < 1e-15);
    }

    #[test]
    fn theorem3_degenerates_to_population_bound() {
        let r = theorem3_check(&toy_inputs(3.0, 0.0, |_| 0.0)).unwrap();
        assert_eq!(r.lambda_l, 0.0);
        assert!(r.condition_holds);
        assert!((r.p0_bound - threshold_population(&toy_spectral()).unwrap()).abs() < 1e-12);
        let beta = r.beta_star_hint.unwrap();
        assert!((toy_spectral().ground_population(beta) - r.p0_bound).abs() < 1e-9);
    }

    #[test]
    fn theorem3_boundary_monotonicity() {
        let eps = |l: f64| 0.001 * (-l).exp();
        let a = theorem3_check(&toy_inputs(1.0, 0.001, eps)).unwrap();
        let b = theorem3_check(&toy_inputs(2.0, 0.001, eps)).unwrap();
        assert!((b.lambda_l - 2.0 * a.lambda_l).abs() < 1e-15);
        assert!(b.p0_bound >= a.p0_bound);
    }

    #[test]
    fn theorem3_rejects_increasing_profile() {
        assert!(theorem3_check(&toy_inputs(1.0, 1.0, |l| l)).is_err());
    }

    #[test]
    fn theorem3_flags_failed_condition() {
        let r = theorem3_check(&toy_inputs(100.0, 1.0, |l| (-l).exp())).unwrap();
        assert!(!r.condition_holds && r.beta_star_hint.is_none());
    }

    #[test]
    fn identity_defect_examples() {
        assert!(identity_defect_trace(&ChoiMatrix::identity_channel(3)).abs() < 1e-15);
        // completely depolarizing: Tr(E) = Σ_ij ⟨i|I/d|j⟩ δ... = 1
        assert!((identity_defect_trace(&ChoiMatrix::completely_depolarizing(2)) - 3.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn superoperator_trace_dominates_one_one_norm(seed in any::<u64>(), d in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(1..=d * d);
            let choi = random::random_choi(&mut rng, d, k);
            let lhs = identity_defect_trace(&choi);
            let l = sampled_one_one_norm(&choi, 1000, seed ^ 0x5eed).unwrap();
            prop_assert!(lhs >= l / (d * d) as f64 - 1e-12, "{lhs} < {l}/d²");
        }
    }
}
