//! Block-diagonal standard-form SDP data.
//!
//! Primal:  min  sum_j <C_j, X_j> + offset
//!          s.t. sum_j <A_ij, X_j> = b_i,  X_j PSD
//! Dual:    max  b'y + offset
//!          s.t. C_j - sum_i y_i A_ij = S_j,  S_j PSD
//!
//! Every block is a dense symmetric matrix; scalar nonnegative variables are
//! 1x1 blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ConicError;

/// One term `<A_ij, X_j>` of a constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub block: usize,
    pub matrix: DMatrix<f64>,
}

/// Equality row `sum_j <A_ij, X_j> = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<Term>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub block_dims: Vec<usize>,
    pub block_labels: Vec<String>,
    pub objective: Vec<DMatrix<f64>>,
    pub objective_offset: f64,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    /// Empty problem with zero objective on the given blocks.
    pub fn new(block_dims: Vec<usize>) -> Self {
        let objective = block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let block_labels = (0..block_dims.len()).map(|j| format!("block{j}")).collect();
        Self { block_dims, block_labels, objective, objective_offset: 0.0, constraints: Vec::new() }
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Barrier degree: sum of block orders.
    pub fn degree(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// Checks dimensions, symmetry and block indices.
    pub fn validate(&self) -> Result<(), ConicError> {
        if self.block_dims.is_empty() {
            return Err(ConicError::Dimension("problem has no blocks".into()));
        }
        if self.objective.len() != self.block_dims.len() {
            return Err(ConicError::Dimension(format!(
                "{} objective blocks for {} cone blocks",
                self.objective.len(),
                self.block_dims.len()
            )));
        }
        if self.block_labels.len() != self.block_dims.len() {
            return Err(ConicError::Dimension("block label count mismatch".into()));
        }
        for (j, (c, &d)) in self.objective.iter().zip(&self.block_dims).enumerate() {
            if d == 0 {
                return Err(ConicError::Dimension(format!("block {j} has order 0")));
            }
            check_symmetric(c, d, &format!("objective block {j}"))?;
        }
        for (i, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(ConicError::Dimension(format!("constraint {i} ({}) has non-finite rhs", con.label)));
            }
            for t in &con.terms {
                let d = *self.block_dims.get(t.block).ok_or_else(|| {
                    ConicError::Dimension(format!("constraint {i} ({}) references block {}", con.label, t.block))
                })?;
                check_symmetric(&t.matrix, d, &format!("constraint {i} ({})", con.label))?;
            }
        }
        Ok(())
    }

    /// `A(X)`: the vector of constraint traces.
    pub fn apply(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.terms.iter().map(|t| inner(&t.matrix, &x[t.block])).sum()).collect()
    }

    /// `A^T(y) = sum_i y_i A_i`, blockwise.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (c, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for t in &c.terms {
                out[t.block] += &t.matrix * yi;
            }
        }
        out
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// Objective value `<C, X> + offset`.
    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        block_inner(&self.objective, x) + self.objective_offset
    }

    /// Returns the same problem with constraint rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut p = self.clone();
        p.constraints = order.iter().map(|&i| self.constraints[i].clone()).collect();
        p
    }

    pub fn to_dump(&self) -> ProblemDump {
        let objective = self.objective.iter().enumerate().flat_map(|(j, c)| upper_triplets(j, c)).collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| ConstraintDump {
                label: c.label.clone(),
                b: c.rhs,
                entries: c.terms.iter().flat_map(|t| upper_triplets(t.block, &t.matrix)).collect(),
            })
            .collect();
        ProblemDump {
            block_dims: self.block_dims.clone(),
            block_labels: self.block_labels.clone(),
            objective_offset: self.objective_offset,
            objective,
            constraints,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("dump is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, ConicError> {
        let dump: ProblemDump = serde_json::from_str(text)?;
        Self::from_dump(&dump)
    }

    pub fn from_dump(dump: &ProblemDump) -> Result<Self, ConicError> {
        let mut p = ConicProblem::new(dump.block_dims.clone());
        if dump.block_labels.len() == dump.block_dims.len() {
            p.block_labels = dump.block_labels.clone();
        }
        p.objective_offset = dump.objective_offset;
        for e in &dump.objective {
            set_sym_entry(&mut p.objective, &dump.block_dims, e)?;
        }
        for c in &dump.constraints {
            let mut blocks: Vec<Option<DMatrix<f64>>> = vec![None; dump.block_dims.len()];
            for e in &c.entries {
                let d = *dump
                    .block_dims
                    .get(e.block)
                    .ok_or_else(|| ConicError::Dimension(format!("entry references block {}", e.block)))?;
                let m = blocks[e.block].get_or_insert_with(|| DMatrix::zeros(d, d));
                set_entry(m, d, e)?;
            }
            p.constraints.push(Constraint {
                label: c.label.clone(),
                rhs: c.b,
                terms: blocks
                    .into_iter()
                    .enumerate()
                    .filter_map(|(block, m)| m.map(|matrix| Term { block, matrix }))
                    .collect(),
            });
        }
        p.validate()?;
        Ok(p)
    }
}

/// Sparse upper-triangle triplet (0-based, `row <= col`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDump {
    pub label: String,
    pub b: f64,
    pub entries: Vec<Triplet>,
}

/// JSON interchange form of a [`ConicProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDump {
    pub block_dims: Vec<usize>,
    #[serde(default)]
    pub block_labels: Vec<String>,
    #[serde(default)]
    pub objective_offset: f64,
    pub objective: Vec<Triplet>,
    pub constraints: Vec<ConstraintDump>,
}

fn upper_triplets(block: usize, m: &DMatrix<f64>) -> Vec<Triplet> {
    let mut out = Vec::new();
    for col in 0..m.ncols() {
        for row in 0..=col {
            let value = m[(row, col)];
            if value != 0.0 {
                out.push(Triplet { block, row, col, value });
            }
        }
    }
    out
}

fn set_entry(m: &mut DMatrix<f64>, d: usize, e: &Triplet) -> Result<(), ConicError> {
    if e.row >= d || e.col >= d || e.row > e.col {
        return Err(ConicError::Dimension(format!(
            "triplet ({}, {}) invalid for block {} of order {d}",
            e.row, e.col, e.block
        )));
    }
    m[(e.row, e.col)] = e.value;
    m[(e.col, e.row)] = e.value;
    Ok(())
}

fn set_sym_entry(blocks: &mut [DMatrix<f64>], dims: &[usize], e: &Triplet) -> Result<(), ConicError> {
    let d = *dims.get(e.block).ok_or_else(|| ConicError::Dimension(format!("entry references block {}", e.block)))?;
    set_entry(&mut blocks[e.block], d, e)
}

fn check_symmetric(m: &DMatrix<f64>, d: usize, what: &str) -> Result<(), ConicError> {
    if m.nrows() != d || m.ncols() != d {
        return Err(ConicError::Dimension(format!("{what}: expected {d}x{d}, got {}x{}", m.nrows(), m.ncols())));
    }
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(ConicError::NotSymmetric(what.to_string()));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ConicError::Dimension(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Frobenius inner product of two equally sized matrices.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn block_inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| inner(x, y)).sum()
}

pub fn block_norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}
