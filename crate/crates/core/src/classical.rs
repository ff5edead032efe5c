//! Incoherent states diagonal in a product eigenbasis. A local channel then
//! acts as a stochastic map on the row index of `E_{i,j}`, and the optimum
//! is attained by a deterministic relabeling of rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{BipartiteSpace, DensityMatrix, HermitianOperator};

const POPULATION_SUM_TOL: f64 = 1e-9;
/// Relative tolerance under which a row entry counts as tied with the diagonal.
const TIE_TOL: f64 = 1e-12;

/// Energies `E_{i,j}` and populations `p_{i,j}` of a product-basis state.
#[derive(Clone, Debug, Serialize)]
pub struct ClassicalInstance {
    energies: Vec<Vec<f64>>,
    populations: Vec<Vec<f64>>,
    /// Original row index of each stored row.
    row_order: Vec<usize>,
    /// Original column index of each stored column.
    col_order: Vec<usize>,
    /// Rows and columns of the stored energies are nondecreasing.
    monotone: bool,
}

/// Raw instance as read from a file.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ClassicalInput {
    pub energies: Vec<Vec<f64>>,
    pub populations: Vec<Vec<f64>>,
}

fn shape(m: &[Vec<f64>]) -> Option<(usize, usize)> {
    let cols = m.first()?.len();
    (cols > 0 && m.iter().all(|r| r.len() == cols)).then_some((m.len(), cols))
}

fn permute(m: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|&i| cols.iter().map(|&j| m[i][j]).collect()).collect()
}

fn is_monotone(e: &[Vec<f64>]) -> bool {
    let rows_ok = e.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
    let cols_ok = e.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    rows_ok && cols_ok
}

impl ClassicalInstance {
    /// Validates and, when possible, reorders rows and columns so energies are
    /// nondecreasing along both indices.
    pub fn new(energies: Vec<Vec<f64>>, populations: Vec<Vec<f64>>) -> Result<Self> {
        let (da, db) = shape(&energies).ok_or_else(|| Error::InvalidInput("energy matrix must be rectangular and nonempty".into()))?;
        if shape(&populations) != Some((da, db)) {
            return Err(Error::InvalidInput("population matrix must match the energy matrix shape".into()));
        }
        if energies.iter().flatten().chain(populations.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("entries must be finite".into()));
        }
        if let Some(p) = populations.iter().flatten().find(|p| **p < 0.0) {
            return Err(Error::InvalidInput(format!("negative population {p}")));
        }
        let total: f64 = populations.iter().flatten().sum();
        if (total - 1.0).abs() > POPULATION_SUM_TOL {
            return Err(Error::InvalidInput(format!("populations sum to {total}, not 1")));
        }

        // a monotone order exists iff sorting by sums produces one
        let mut rows: Vec<usize> = (0..da).collect();
        let mut cols: Vec<usize> = (0..db).collect();
        let row_sum = |i: usize| energies[i].iter().sum::<f64>();
        let col_sum = |j: usize| energies.iter().map(|r| r[j]).sum::<f64>();
        rows.sort_by(|&a, &b| row_sum(a).total_cmp(&row_sum(b)));
        cols.sort_by(|&a, &b| col_sum(a).total_cmp(&col_sum(b)));
        let sorted = permute(&energies, &rows, &cols);
        if is_monotone(&sorted) {
            Ok(Self { populations: permute(&populations, &rows, &cols), energies: sorted, row_order: rows, col_order: cols, monotone: true })
        } else {
            Ok(Self { energies, populations, row_order: (0..da).collect(), col_order: (0..db).collect(), monotone: false })
        }
    }

    pub fn from_input(input: ClassicalInput) -> Result<Self> {
        Self::new(input.energies, input.populations)
    }

    /// Thermal populations `e^{−βE_{i,j}}/Z`.
    pub fn thermal(energies: Vec<Vec<f64>>, beta: f64) -> Result<Self> {
        let e0 = energies.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<Vec<f64>> = energies.iter().map(|r| r.iter().map(|e| (-beta * (e - e0)).exp()).collect()).collect();
        let z: f64 = w.iter().flatten().sum();
        let p = w.into_iter().map(|r| r.into_iter().map(|x| x / z).collect()).collect();
        Self::new(energies, p)
    }

    pub fn d_a(&self) -> usize {
        self.energies.len()
    }

    pub fn d_b(&self) -> usize {
        self.energies[0].len()
    }

    pub fn energies(&self) -> &[Vec<f64>] {
        &self.energies
    }

    pub fn populations(&self) -> &[Vec<f64>] {
        &self.populations
    }

    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }

    pub fn col_order(&self) -> &[usize] {
        &self.col_order
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Diagonal Hamiltonian and state on the product basis, in stored order.
    pub fn to_quantum(&self) -> Result<(HermitianOperator, DensityMatrix)> {
        let space = BipartiteSpace::new(self.d_a(), self.d_b())?;
        let h = HermitianOperator::diagonal(&self.energies.concat());
        let rho = DensityMatrix::new(HermitianOperator::diagonal(&self.populations.concat()), space)?;
        Ok((h, rho))
    }

    /// `Ẽ_{i,k} = Σ_j E_{i,j} p_{k,j}`: energy of the B-marginal conditioned
    /// on A-row `k` after relabeling that row to `i`.
    pub fn e_tilde(&self) -> Vec<Vec<f64>> {
        let da = self.d_a();
        (0..da)
            .map(|i| (0..da).map(|k| self.energies[i].iter().zip(&self.populations[k]).map(|(e, p)| e * p).sum()).collect())
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalResult {
    /// Rows indexed by target `i`, columns by source `k`.
    pub e_tilde: Vec<Vec<f64>>,
    pub optimal_targets: Vec<usize>,
    pub delta_e: f64,
    pub is_passive: bool,
    /// Original row index of each stored row.
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
    pub canonical: bool,
}

/// Optimal deterministic local map `k ↦ argmin_i Ẽ_{i,k}` with ties broken
/// toward the diagonal, then the smallest index.
pub fn solve_classical(inst: &ClassicalInstance) -> ClassicalResult {
    let et = inst.e_tilde();
    let da = inst.d_a();
    let scale = et.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut targets = Vec::with_capacity(da);
    let mut delta_e = 0.0;
    for (k, row) in et.iter().enumerate() {
        let diag = row[k];
        let (best_i, best) = (0..da).map(|i| (i, et[i][k])).fold((k, diag), |acc, c| if c.1 < acc.1 { c } else { acc });
        let target = if diag - best <= TIE_TOL * scale { k } else { best_i };
        delta_e += et[target][k] - diag;
        targets.push(target);
    }
    ClassicalResult {
        is_passive: targets.iter().enumerate().all(|(k, t)| *t == k),
        delta_e: delta_e.min(0.0),
        optimal_targets: targets,
        e_tilde: et,
        row_order: inst.row_order.clone(),
        col_order: inst.col_order.clone(),
        canonical: inst.monotone,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportCheck {
    pub holds: bool,
    /// `(k, j)` with `p_{k,j} > 0` and `E_{k−1,j} < E_{k,j}`, in stored order.
    pub witnesses: Vec<(usize, usize)>,
    /// No monotone order exists, so the check was not run.
    pub skipped: bool,
}

/// Support restriction for passivity against the neighbouring-row relabeling.
pub fn check_support_condition(inst: &ClassicalInstance) -> SupportCheck {
    if !inst.monotone {
        return SupportCheck { holds: false, witnesses: Vec::new(), skipped: true };
    }
    let e = &inst.energies;
    let scale = e.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let witnesses: Vec<(usize, usize)> = (1..inst.d_a())
        .flat_map(|k| (0..inst.d_b()).map(move |j| (k, j)))
        .filter(|&(k, j)| inst.populations[k][j] > 0.0 && e[k][j] - e[k - 1][j] > TIE_TOL * scale)
        .collect();
    SupportCheck { holds: witnesses.is_empty(), witnesses, skipped: false }
}
