//! Hamiltonian and state families: open XY chains in a transverse field,
//! the two-qubit instances, eigenmixtures and rotated thermal states.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::operators::{
    eig_hermitian, gibbs_from_eigen, kron, unitary_exp, BipartiteSpace, CMatrix, DensityMatrix, Eigen,
    HermitianOperator, C64,
};

/// Largest chain we build densely (flat dimension 4096).
pub const MAX_CHAIN_SITES: usize = 12;

fn default_field() -> f64 {
    1.0
}

fn default_a_sites() -> usize {
    1
}

/// Open chain `H = f Σ_l σ_z^l + κ Σ_l [(1+γ)/2 σ_x^l σ_x^{l+1} + (1−γ)/2 σ_y^l σ_y^{l+1}]`.
///
/// Subsystem A is the prefix of `a_sites` leftmost sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub n_sites: usize,
    pub kappa: f64,
    pub gamma: f64,
    #[serde(default = "default_field")]
    pub field: f64,
    #[serde(default = "default_a_sites")]
    pub a_sites: usize,
}

impl SpinChainSpec {
    pub fn new(n_sites: usize, kappa: f64, gamma: f64) -> Self {
        Self { n_sites, kappa, gamma, field: 1.0, a_sites: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidInput("a chain needs at least 2 sites".into()));
        }
        if self.n_sites > MAX_CHAIN_SITES {
            return Err(Error::Oversize(format!(
                "chain of {} sites exceeds the dense limit of {MAX_CHAIN_SITES}",
                self.n_sites
            )));
        }
        if self.a_sites == 0 || self.a_sites >= self.n_sites {
            return Err(Error::InvalidInput(format!(
                "subsystem A must be a nonempty proper prefix (a_sites = {}, n_sites = {})",
                self.a_sites, self.n_sites
            )));
        }
        if ![self.kappa, self.gamma, self.field].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("chain parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> BipartiteSpace {
        BipartiteSpace { d_a: 1 << self.a_sites, d_b: 1 << (self.n_sites - self.a_sites) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoQubitForm {
    /// `½ω(σ_z^A + σ_z^B) + (κ/2)(σ_xσ_x + σ_yσ_y)`.
    XySymmetric,
    /// `κ σ_xσ_x`.
    XxOnly,
    /// `½ω(σ_z^A + σ_z^B) + κ[(1+γ)/2 σ_xσ_x + (1−γ)/2 σ_yσ_y]`.
    Anisotropic,
}

impl std::str::FromStr for TwoQubitForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy_symmetric" => Ok(Self::XySymmetric),
            "xx_only" => Ok(Self::XxOnly),
            "anisotropic" => Ok(Self::Anisotropic),
            other => Err(Error::InvalidInput(format!("unknown two-qubit form `{other}`"))),
        }
    }
}

fn default_omega() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitSpec {
    pub form: TwoQubitForm,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub kappa: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl TwoQubitSpec {
    pub fn xy_symmetric(omega: f64, kappa: f64) -> Self {
        Self { form: TwoQubitForm::XySymmetric, omega, kappa, gamma: 0.0 }
    }

    pub fn xx_only(kappa: f64) -> Self {
        Self { form: TwoQubitForm::XxOnly, omega: 0.0, kappa, gamma: 0.0 }
    }

    pub fn anisotropic(omega: f64, kappa: f64, gamma: f64) -> Self {
        Self { form: TwoQubitForm::Anisotropic, omega, kappa, gamma }
    }

    /// Equivalent two-site chain parameters `(field, κ, γ)`.
    fn chain_parameters(&self) -> (f64, f64, f64) {
        match self.form {
            TwoQubitForm::XySymmetric => (self.omega / 2.0, self.kappa, 0.0),
            TwoQubitForm::XxOnly => (0.0, self.kappa, 1.0),
            TwoQubitForm::Anisotropic => (self.omega / 2.0, self.kappa, self.gamma),
        }
    }
}

/// `H = H_A ⊗ I + I ⊗ H_B + V`.
#[derive(Clone, Debug)]
pub struct LocalDecomposition {
    pub h_a: HermitianOperator,
    pub h_b: HermitianOperator,
    pub v: HermitianOperator,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub hamiltonian: HermitianOperator,
    pub space: BipartiteSpace,
    pub decomposition: Option<LocalDecomposition>,
}

/// Built-in model families, tagged the way model files spell them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    Chain(SpinChainSpec),
    TwoQubit(TwoQubitSpec),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Chain(spec) => build_chain_model(spec),
            ModelSpec::TwoQubit(spec) => build_two_qubit_model(spec),
        }
    }

    /// Copy with one named parameter replaced (used by parameter sweeps).
    pub fn with_param(&self, name: &str, value: f64) -> Result<ModelSpec> {
        let unknown = || Error::InvalidInput(format!("model has no sweepable parameter `{name}`"));
        let mut out = self.clone();
        match &mut out {
            ModelSpec::Chain(s) => match name {
                "kappa" => s.kappa = value,
                "gamma" => s.gamma = value,
                "field" => s.field = value,
                "n_sites" => s.n_sites = value.round() as usize,
                _ => return Err(unknown()),
            },
            ModelSpec::TwoQubit(s) => match name {
                "kappa" => s.kappa = value,
                "gamma" => s.gamma = value,
                "omega" => s.omega = value,
                _ => return Err(unknown()),
            },
        }
        Ok(out)
    }
}

/// Sparse-structure builder for XY chains: σ_z fields on `field_sites`, XY
/// couplings on the listed bonds `(l, l+1)`.
fn xy_chain_matrix(n: usize, field: f64, kappa: f64, gamma: f64, field_sites: &[usize], bonds: &[usize]) -> CMatrix {
    let dim = 1usize << n;
    let bit = |site: usize| 1usize << (n - 1 - site);
    let mut h = CMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for &l in field_sites {
            diag += if s & bit(l) == 0 { field } else { -field };
        }
        h[(s, s)] += C64::new(diag, 0.0);
        for &l in bonds {
            let mask = bit(l) | bit(l + 1);
            let t = s ^ mask;
            let parallel = ((s & bit(l)) == 0) == ((s & bit(l + 1)) == 0);
            // (1+γ)/2 XX + (1−γ)/2 YY: γ on |00⟩↔|11⟩, 1 on |01⟩↔|10⟩
            let amp = if parallel { kappa * gamma } else { kappa };
            h[(t, s)] += C64::new(amp, 0.0);
        }
    }
    h
}

fn chain_parts(n: usize, a_sites: usize, field: f64, kappa: f64, gamma: f64) -> Model {
    let all_sites: Vec<usize> = (0..n).collect();
    let all_bonds: Vec<usize> = (0..n - 1).collect();
    let h = xy_chain_matrix(n, field, kappa, gamma, &all_sites, &all_bonds);

    let nb = n - a_sites;
    let a_sites_v: Vec<usize> = (0..a_sites).collect();
    let a_bonds: Vec<usize> = (0..a_sites.saturating_sub(1)).collect();
    let b_sites_v: Vec<usize> = (0..nb).collect();
    let b_bonds: Vec<usize> = (0..nb.saturating_sub(1)).collect();
    let h_a = xy_chain_matrix(a_sites, field, kappa, gamma, &a_sites_v, &a_bonds);
    let h_b = xy_chain_matrix(nb, field, kappa, gamma, &b_sites_v, &b_bonds);
    let v = xy_chain_matrix(n, field, kappa, gamma, &[], &[a_sites - 1]);

    Model {
        hamiltonian: HermitianOperator::from_hermitian_part(&h),
        space: BipartiteSpace { d_a: 1 << a_sites, d_b: 1 << nb },
        decomposition: Some(LocalDecomposition {
            h_a: HermitianOperator::from_hermitian_part(&h_a),
            h_b: HermitianOperator::from_hermitian_part(&h_b),
            v: HermitianOperator::from_hermitian_part(&v),
        }),
    }
}

fn build_chain_model(spec: &SpinChainSpec) -> Result<Model> {
    spec.validate()?;
    Ok(chain_parts(spec.n_sites, spec.a_sites, spec.field, spec.kappa, spec.gamma))
}

fn build_two_qubit_model(spec: &TwoQubitSpec) -> Result<Model> {
    let (field, kappa, gamma) = spec.chain_parameters();
    if ![field, kappa, gamma].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("two-qubit parameters must be finite".into()));
    }
    Ok(chain_parts(2, 1, field, kappa, gamma))
}

pub fn build_chain(spec: &SpinChainSpec) -> Result<(HermitianOperator, BipartiteSpace)> {
    let m = build_chain_model(spec)?;
    Ok((m.hamiltonian, m.space))
}

pub fn build_two_qubit(spec: &TwoQubitSpec) -> Result<(HermitianOperator, BipartiteSpace)> {
    let m = build_two_qubit_model(spec)?;
    Ok((m.hamiltonian, m.space))
}

/// A state diagonal in the Hamiltonian eigenbasis.
#[derive(Clone, Debug)]
pub struct Eigenmixture {
    pub state: DensityMatrix,
    /// Set when the spectrum has degenerate levels, so the eigenbasis (and
    /// hence the state) depends on the eigensolver's choice within a block.
    pub degenerate_spectrum: bool,
}

/// `ρ = Σ_i p_i |E_i⟩⟨E_i|` with populations ordered by ascending energy.
pub fn eigenmixture(h: &HermitianOperator, populations: &[f64], space: BipartiteSpace) -> Result<Eigenmixture> {
    let eig = eig_hermitian(h)?;
    eigenmixture_from_eigen(&eig, populations, space, &Tolerances::default())
}

pub fn eigenmixture_from_eigen(
    eig: &Eigen,
    populations: &[f64],
    space: BipartiteSpace,
    tol: &Tolerances,
) -> Result<Eigenmixture> {
    if populations.len() != eig.dim() || space.dim() != eig.dim() {
        return Err(Error::DimensionMismatch { expected: eig.dim(), found: populations.len() });
    }
    if populations.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::InvalidState("populations must be nonnegative".into()));
    }
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > tol.trace_tol {
        return Err(Error::InvalidState(format!("populations sum to {total}, expected 1")));
    }
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let degenerate = eig.values.windows(2).any(|w| w[1] - w[0] <= tol.deg_tol * scale);
    if degenerate {
        log::warn!("eigenmixture requested on a degenerate spectrum; using the eigensolver's basis");
    }
    let op = HermitianOperator::from_hermitian_part(&eig.weighted(populations));
    Ok(Eigenmixture {
        state: DensityMatrix::from_parts_unchecked(op, space),
        degenerate_spectrum: degenerate,
    })
}

/// `U e^{−βH}/Z U†` with `U = exp(iG)`.
pub fn rotated_thermal(
    h: &HermitianOperator,
    beta: f64,
    rotation_generator: &HermitianOperator,
    space: BipartiteSpace,
) -> Result<DensityMatrix> {
    if rotation_generator.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rotation_generator.dim() });
    }
    let eig = eig_hermitian(h)?;
    let u = unitary_exp(rotation_generator)?;
    rotate_state(&gibbs_from_eigen(&eig, beta, space, &Tolerances::default())?, &u)
}

/// `U ρ U†`.
pub fn rotate_state(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    let m = u * rho.matrix() * u.adjoint();
    Ok(DensityMatrix::from_parts_unchecked(HermitianOperator::from_hermitian_part(&m), rho.space()))
}

/// `h_a ⊗ I + I ⊗ h_b`.
pub fn local_sum(h_a: &HermitianOperator, h_b: &HermitianOperator) -> HermitianOperator {
    let ia = CMatrix::identity(h_a.dim(), h_a.dim());
    let ib = CMatrix::identity(h_b.dim(), h_b.dim());
    HermitianOperator::from_hermitian_part(&(kron(h_a.matrix(), &ib) + kron(&ia, h_b.matrix())))
}
