//! Threshold temperatures and parameter sweeps over thermal families.
//!
//! `T*` is located by a coarse logarithmic scan of the spectral verdict
//! followed by bisection on the first passive → non-passive transition.
//! Every transition seen on the coarse grid is reported.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{spectral_data, threshold_temperature_bound};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::models::{rotate_state, ModelSpec, SpinChainSpec};
use crate::operators::{eig_hermitian, gibbs_from_eigen, pauli, unitary_exp, BipartiteSpace, CMatrix, DensityMatrix, Eigen, HermitianOperator};
use crate::passivity::{build_c_operator, check_theorem1};
use crate::sdp::solve_extraction;

pub const GRID_POINTS: usize = 64;
pub const BISECTION_STEPS: usize = 40;
/// Relative offset at which the bracket around `T*` is re-verified.
pub const BRACKET_REL: f64 = 1e-4;
pub const DEFAULT_WINDOW: (f64, f64) = (1e-2, 1e2);

/// `U = exp(i·angle·P)` for a Pauli string `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub pauli: String,
    #[serde(default = "one")]
    pub angle: f64,
}

fn one() -> f64 {
    1.0
}

impl Rotation {
    pub fn unitary(&self, dim: usize) -> Result<CMatrix> {
        let p = pauli::parse(&self.pauli).ok_or_else(|| Error::InvalidInput(format!("bad Pauli string `{}`", self.pauli)))?;
        if p.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: p.nrows() });
        }
        unitary_exp(&HermitianOperator::from_hermitian_part(&(p * nalgebra::Complex::new(self.angle, 0.0))))
    }
}

/// Thermal states `U e^{−H/T} U† / Z` of a model, with `U` optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalFamily {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Rotation>,
}

impl ThermalFamily {
    pub fn thermal(model: ModelSpec) -> Self {
        Self { model, rotation: None }
    }

    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        Ok(Self { model: self.model.with_param(name, value)?, rotation: self.rotation.clone() })
    }

    pub fn prepare(&self, tol: &Tolerances) -> Result<PreparedFamily> {
        let model = self.model.build()?;
        let eigen = eig_hermitian(&model.hamiltonian)?;
        let unitary = self.rotation.as_ref().map(|r| r.unitary(model.space.dim())).transpose()?;
        Ok(PreparedFamily { hamiltonian: model.hamiltonian, space: model.space, eigen, unitary, tol: *tol })
    }
}

/// A family with its Hamiltonian diagonalized once.
pub struct PreparedFamily {
    pub hamiltonian: HermitianOperator,
    pub space: BipartiteSpace,
    eigen: Eigen,
    unitary: Option<CMatrix>,
    tol: Tolerances,
}

impl PreparedFamily {
    pub fn state(&self, temperature: f64) -> Result<DensityMatrix> {
        let rho = gibbs_from_eigen(&self.eigen, 1.0 / temperature, self.space, &self.tol)?;
        match &self.unitary {
            Some(u) => rotate_state(&rho, u),
            None => Ok(rho),
        }
    }

    pub fn is_passive(&self, temperature: f64) -> Result<bool> {
        let c = build_c_operator(&self.state(temperature)?, &self.hamiltonian, &self.tol)?;
        Ok(check_theorem1(&c, &self.tol)?.is_passive)
    }

    /// Energy change of the optimal local channel at `temperature`.
    pub fn extractable(&self, temperature: f64, sdp_tol: f64) -> Result<f64> {
        let c = build_c_operator(&self.state(temperature)?, &self.hamiltonian, &self.tol)?;
        let sol = solve_extraction(&c, sdp_tol)?;
        Ok(sol.primal_value - c.state_energy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A transition was bracketed inside the window.
    Found,
    /// Passive on the whole window; `T* ≥ t_hi`.
    AtLeast,
    /// Non-passive at the coldest sampled temperature.
    NotFound,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transition {
    pub t_below: f64,
    pub t_above: f64,
    /// Passive at `t_below` and not at `t_above`.
    pub loses_passivity: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Threshold {
    pub t_star: Option<f64>,
    pub outcome: Outcome,
    pub monotonicity_verified: bool,
    /// Passive at `T*(1 − 1e-4)` and non-passive at `T*(1 + 1e-4)`.
    pub bracket_verified: bool,
    pub transitions: Vec<Transition>,
}

/// Log-spaced grid of `n` points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Supremum of temperatures below which every sampled state is passive.
pub fn threshold_temperature(family: &PreparedFamily, t_window: (f64, f64)) -> Result<Threshold> {
    let (t_lo, t_hi) = t_window;
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature window [{t_lo}, {t_hi}] must be positive and increasing")));
    }
    let grid = log_grid(t_lo, t_hi, GRID_POINTS);
    let verdicts = grid.iter().map(|&t| family.is_passive(t)).collect::<Result<Vec<bool>>>()?;
    let transitions: Vec<Transition> = (0..GRID_POINTS - 1)
        .filter(|&i| verdicts[i] != verdicts[i + 1])
        .map(|i| Transition { t_below: grid[i], t_above: grid[i + 1], loses_passivity: verdicts[i] })
        .collect();
    let monotonicity_verified = verdicts[0] && transitions.len() <= 1;

    if !verdicts[0] {
        return Ok(Threshold { t_star: None, outcome: Outcome::NotFound, monotonicity_verified, bracket_verified: false, transitions });
    }
    let Some(first) = transitions.first() else {
        return Ok(Threshold { t_star: Some(t_hi), outcome: Outcome::AtLeast, monotonicity_verified, bracket_verified: false, transitions });
    };
    let (mut a, mut b) = (first.t_below.ln(), first.t_above.ln());
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if family.is_passive(m.exp())? {
            a = m;
        } else {
            b = m;
        }
    }
    let t_star = (0.5 * (a + b)).exp();
    let bracket_verified = family.is_passive(t_star * (1.0 - BRACKET_REL))? && !family.is_passive(t_star * (1.0 + BRACKET_REL))?;
    Ok(Threshold { t_star: Some(t_star), outcome: Outcome::Found, monotonicity_verified, bracket_verified, transitions })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub parameter: f64,
    /// Absent when no threshold exists or the point failed.
    pub t_star: Option<f64>,
    pub t_bound: Option<f64>,
    pub threshold: Option<Threshold>,
    pub error: Option<String>,
}

impl ScanPoint {
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if let Some(e) = &self.error {
            flags.push(format!("error:{}", e.replace([',', '\n'], " ")));
        }
        if let Some(th) = &self.threshold {
            match th.outcome {
                Outcome::AtLeast => flags.push("at_least_t_hi".to_string()),
                Outcome::NotFound => flags.push("not_found".to_string()),
                Outcome::Found if !th.bracket_verified => flags.push("bracket_unverified".to_string()),
                Outcome::Found => {}
            }
            if !th.monotonicity_verified {
                flags.push(format!("transitions={}", th.transitions.len()));
            }
        }
        flags.join(";")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanMetadata {
    pub family: ThermalFamily,
    pub parameter: String,
    pub t_window: (f64, f64),
    pub grid_points: usize,
    pub bisection_steps: usize,
    pub tolerances: Tolerances,
    pub gauge: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub metadata: ScanMetadata,
    pub points: Vec<ScanPoint>,
}

pub const GAUGE_NOTE: &str = "energies are reported with the ground energy shifted to zero";

fn scan_point(family: &ThermalFamily, parameter: &str, value: f64, t_window: (f64, f64), tol: &Tolerances) -> ScanPoint {
    let run = || -> Result<(Threshold, Option<f64>)> {
        let fam = family.with_param(parameter, value)?;
        let prepared = fam.prepare(tol)?;
        let threshold = threshold_temperature(&prepared, t_window)?;
        // the analytic bound covers unrotated thermal states only
        let t_bound = if fam.rotation.is_none() {
            spectral_data(&prepared.hamiltonian, prepared.space, tol)
                .and_then(|sd| threshold_temperature_bound(&sd))
                .ok()
                .map(|b| b.temperature)
        } else {
            None
        };
        Ok((threshold, t_bound))
    };
    match run() {
        Ok((th, t_bound)) => ScanPoint { parameter: value, t_star: th.t_star, t_bound, threshold: Some(th), error: None },
        Err(e) => ScanPoint { parameter: value, t_star: None, t_bound: None, threshold: None, error: Some(e.to_string()) },
    }
}

/// Threshold temperature at each grid value of `parameter`; points run in
/// parallel on the current rayon pool and come back in grid order.
pub fn sweep(family: &ThermalFamily, parameter: &str, grid: &[f64], t_window: (f64, f64), tol: &Tolerances) -> ScanResult {
    let points = grid.par_iter().map(|&v| scan_point(family, parameter, v, t_window, tol)).collect();
    ScanResult {
        metadata: ScanMetadata {
            family: family.clone(),
            parameter: parameter.to_string(),
            t_window,
            grid_points: GRID_POINTS,
            bisection_steps: BISECTION_STEPS,
            tolerances: *tol,
            gauge: GAUGE_NOTE,
        },
        points,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainConvergence {
    pub n_list: Vec<usize>,
    pub curves: Vec<ScanResult>,
    /// `max_κ |T*_n − T*_{n−1}|` for consecutive entries of `n_list`,
    /// over points where both thresholds were found.
    pub max_differences: Vec<(usize, f64)>,
}

pub const MAX_CONVERGENCE_SITES: usize = 10;

/// One `T*(κ)` curve per chain length, subsystem A the leftmost qubit.
pub fn chain_convergence(
    gamma: f64,
    kappa_grid: &[f64],
    n_list: &[usize],
    t_window: (f64, f64),
    tol: &Tolerances,
) -> Result<ChainConvergence> {
    if n_list.iter().any(|&n| n > MAX_CONVERGENCE_SITES) {
        return Err(Error::Oversize(format!("chain lengths are limited to {MAX_CONVERGENCE_SITES}")));
    }
    let curves: Vec<ScanResult> = n_list
        .iter()
        .map(|&n| sweep(&ThermalFamily::thermal(ModelSpec::Chain(SpinChainSpec::new(n, 0.0, gamma))), "kappa", kappa_grid, t_window, tol))
        .collect();
    let found = |p: &ScanPoint| p.threshold.as_ref().filter(|t| t.outcome == Outcome::Found).and(p.t_star);
    let max_differences = n_list
        .windows(2)
        .zip(curves.windows(2))
        .map(|(n, c)| {
            let d = c[0].points.iter().zip(&c[1].points).filter_map(|(a, b)| Some((found(b)? - found(a)?).abs())).fold(0.0, f64::max);
            (n[1], d)
        })
        .collect();
    Ok(ChainConvergence { n_list: n_list.to_vec(), curves, max_differences })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), |v| format!("{v:.12e}"))
}

/// CSV with columns `parameter,t_star,t_bound,flags`.
pub fn write_csv<W: Write>(result: &ScanResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("CSV output failed: {e}"));
    w.write_record(["parameter", "t_star", "t_bound", "flags"]).map_err(io)?;
    for p in &result.points {
        w.write_record([format!("{:.12e}", p.parameter), fmt_opt(p.t_star), fmt_opt(p.t_bound), p.flags()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("CSV output failed: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write>(result: &ScanResult, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, result).map_err(|e| Error::InvalidInput(format!("JSON output failed: {e}")))
}
