//! Model, state and instance files.

use std::path::Path;

use cplp_core::models::{eigenmixture, rotate_state, LocalDecomposition, ModelSpec};
use cplp_core::operators::{gibbs, BipartiteSpace, ComplexMatrixJson, DensityMatrix, HermitianOperator};
use cplp_core::scan::{Rotation, ThermalFamily};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub d_a: usize,
    pub d_b: usize,
    pub h_real: Vec<Vec<f64>>,
    #[serde(default)]
    pub h_imag: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Explicit { explicit: ExplicitModel },
    Builtin(ModelSpec),
}

/// Exactly one of `T` and `beta`.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
pub struct Temperature {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub beta: Option<f64>,
}

impl Temperature {
    pub fn beta(&self) -> Result<f64, CliError> {
        let beta = match (self.t, self.beta) {
            (Some(t), None) if t > 0.0 && t.is_finite() => 1.0 / t,
            (None, Some(b)) if b > 0.0 && b.is_finite() => b,
            (Some(_), Some(_)) => return Err(CliError::Input("give either `T` or `beta`, not both".into())),
            (None, None) => return Err(CliError::Input("state needs `T` or `beta`".into())),
            _ => return Err(CliError::Input("temperature must be positive and finite".into())),
        };
        Ok(beta)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Thermal {
        #[serde(flatten)]
        temperature: Temperature,
    },
    RotatedThermal {
        #[serde(flatten)]
        temperature: Temperature,
        rotation: Rotation,
    },
    Eigenmixture {
        populations: Vec<f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: ModelSource,
    #[serde(default)]
    pub state: Option<StateSpec>,
}

/// A loaded model with its Hamiltonian assembled.
pub struct Loaded {
    pub hamiltonian: HermitianOperator,
    pub space: BipartiteSpace,
    pub decomposition: Option<LocalDecomposition>,
    pub spec: ModelFile,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<Loaded, CliError> {
    let spec: ModelFile = read_json(path)?;
    let (hamiltonian, space, decomposition) = match &spec.model {
        ModelSource::Builtin(m) => {
            let built = m.build()?;
            (built.hamiltonian, built.space, built.decomposition)
        }
        ModelSource::Explicit { explicit } => {
            let space = BipartiteSpace::new(explicit.d_a, explicit.d_b)?;
            let json = ComplexMatrixJson { real: explicit.h_real.clone(), imag: explicit.h_imag.clone() };
            let m = json.to_matrix()?;
            if m.nrows() != m.ncols() || m.nrows() != space.dim() {
                return Err(CliError::Input(format!("Hamiltonian must be {0}x{0}", space.dim())));
            }
            (HermitianOperator::new(m)?, space, None)
        }
    };
    Ok(Loaded { hamiltonian, space, decomposition, spec })
}

impl Loaded {
    pub fn state(&self) -> Result<DensityMatrix, CliError> {
        let state = self.spec.state.as_ref().ok_or_else(|| CliError::Input("model file has no `state`".into()))?;
        match state {
            StateSpec::Thermal { temperature } => Ok(gibbs(&self.hamiltonian, temperature.beta()?, self.space)?),
            StateSpec::RotatedThermal { temperature, rotation } => {
                let u = rotation.unitary(self.space.dim())?;
                let rho = gibbs(&self.hamiltonian, temperature.beta()?, self.space)?;
                Ok(rotate_state(&rho, &u)?)
            }
            StateSpec::Eigenmixture { populations } => Ok(eigenmixture(&self.hamiltonian, populations, self.space)?.state),
        }
    }

    /// Thermal family for sweeps; explicit matrices cannot be swept.
    pub fn family(&self) -> Result<ThermalFamily, CliError> {
        let ModelSource::Builtin(model) = &self.spec.model else {
            return Err(CliError::Input("parameter sweeps need a built-in model family".into()));
        };
        let rotation = match &self.spec.state {
            None | Some(StateSpec::Thermal { .. }) => None,
            Some(StateSpec::RotatedThermal { rotation, .. }) => Some(rotation.clone()),
            Some(StateSpec::Eigenmixture { .. }) => return Err(CliError::Input("sweeps run over thermal states only".into())),
        };
        Ok(ThermalFamily { model: model.clone(), rotation })
    }
}

/// Saved optimal channel together with the dual certificate.
#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct ChoiFile {
    pub d_a: usize,
    pub choi: ComplexMatrixJson,
    pub dual_y: ComplexMatrixJson,
}
