//! Block-diagonal linear matrix inequality programs.
//!
//! Every program is held in LMI form
//!
//! ```text
//! minimize  cᵀz   subject to   F₀ᵇ + Σᵢ zᵢ Fᵢᵇ ⪰ 0   for every block b
//! ```
//!
//! with sparse symmetric data stored as upper-triangle triplets. Blocks of
//! size one produced by scalar constraints are gathered into a single
//! diagonal block, which is also how they appear in SDPA files.

mod external;
mod ipm;
mod sdpa;

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;

pub use external::{ExternalSolver, SOLVER_ENV};
pub use ipm::IpmOptions;
pub use sdpa::{export_sdpa, import_sdpa, import_solution};

/// Upper-triangle triplet `(row, col, value)` with `row ≤ col`; an
/// off-diagonal triplet stands for both symmetric positions.
pub type Triplet = (usize, usize, f64);

/// One diagonal block of the program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramBlock {
    pub size: usize,
    /// Only diagonal entries are allowed when set.
    pub diagonal: bool,
    pub constant: Vec<Triplet>,
    /// Coefficient matrices `(variable, triplets)`, sorted by variable.
    pub coeffs: Vec<(usize, Vec<Triplet>)>,
}

impl ProgramBlock {
    pub fn new(size: usize, diagonal: bool) -> Self {
        ProgramBlock {
            size,
            diagonal,
            constant: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// Dense value of `F₀ + Σ zᵢ Fᵢ` on this block.
    pub fn evaluate(&self, z: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size, self.size);
        add_triplets(&mut out, &self.constant, 1.0);
        for (v, t) in &self.coeffs {
            add_triplets(&mut out, t, z[*v]);
        }
        out
    }
}

pub(crate) fn add_triplets(m: &mut DMatrix<f64>, t: &[Triplet], s: f64) {
    if s == 0.0 {
        return;
    }
    for &(i, j, v) in t {
        m[(i, j)] += s * v;
        if i != j {
            m[(j, i)] += s * v;
        }
    }
}

/// Block-diagonal LMI program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub c: Vec<f64>,
    pub blocks: Vec<ProgramBlock>,
    pub var_names: Vec<String>,
}

impl ConicProgram {
    pub fn new(n_vars: usize) -> Self {
        ConicProgram {
            n_vars,
            c: vec![0.0; n_vars],
            blocks: Vec::new(),
            var_names: (0..n_vars).map(|i| format!("z{}", i + 1)).collect(),
        }
    }

    /// Checks indices, symmetry convention and block sizes.
    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.n_vars || self.var_names.len() != self.n_vars {
            return Err(Error::Dimension("objective or names length differs from n_vars".into()));
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            if blk.size == 0 {
                return Err(Error::Dimension(format!("block {b} has size 0")));
            }
            let check = |t: &[Triplet]| -> Result<()> {
                for &(i, j, _) in t {
                    if i > j || j >= blk.size || (blk.diagonal && i != j) {
                        return Err(Error::Dimension(format!("block {b}: bad entry ({i},{j})")));
                    }
                }
                Ok(())
            };
            check(&blk.constant)?;
            let mut last = None;
            for (v, t) in &blk.coeffs {
                if *v >= self.n_vars || last.map_or(false, |l| l >= *v) {
                    return Err(Error::Dimension(format!("block {b}: variable {v} out of order or range")));
                }
                last = Some(*v);
                check(t)?;
            }
        }
        Ok(())
    }

    /// Sizes of all blocks with the diagonal block expanded into unit blocks.
    pub fn cone_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for b in &self.blocks {
            if b.diagonal {
                out.extend(std::iter::repeat(1).take(b.size));
            } else {
                out.push(b.size);
            }
        }
        out
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, z)| c * z).sum()
    }
}

/// Outcome classification of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    SolverFailure,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::NearOptimal => "near-optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::SolverFailure => "solver-failure",
        };
        f.write_str(s)
    }
}

/// Result of a solve. `primal_obj` is the LMI objective `cᵀz`; `dual_obj`
/// is the objective of the conjugate problem over `X ⪰ 0`, a lower bound
/// whenever the conjugate iterate is feasible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub z: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub block_min_eigs: Vec<f64>,
    pub iterations: usize,
    pub wall_time: f64,
}

/// Solver backends.
#[derive(Clone, Debug)]
pub enum Backend {
    /// The in-process primal-dual interior-point method.
    InteriorPoint(IpmOptions),
    /// An SDPA-compatible executable driven through files.
    External(ExternalSolver),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::InteriorPoint(IpmOptions::default())
    }
}

/// Solves the program with the chosen backend.
pub fn solve(program: &ConicProgram, backend: &Backend) -> Result<Solution> {
    program.validate()?;
    let start = Instant::now();
    let mut sol = match backend {
        Backend::InteriorPoint(opts) => ipm::solve(program, opts)?,
        Backend::External(ext) => ext.solve(program)?,
    };
    sol.wall_time = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// Independent residual report for a candidate `z`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub objective: f64,
    pub block_min_eigs: Vec<f64>,
    pub worst_violation: f64,
}

/// Recomputes every block's smallest eigenvalue and the objective at `z`.
pub fn verify(program: &ConicProgram, z: &[f64]) -> Result<VerifyReport> {
    if z.len() != program.n_vars {
        return Err(Error::Dimension(format!("z has {} entries, program has {} variables", z.len(), program.n_vars)));
    }
    let mut eigs = Vec::with_capacity(program.blocks.len());
    for blk in &program.blocks {
        let m = blk.evaluate(z);
        let e = if blk.diagonal {
            (0..blk.size).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min)
        } else {
            min_eigenvalue(&m)
        };
        eigs.push(e);
    }
    let worst = eigs.iter().copied().fold(0.0, |acc: f64, e| acc.max(-e));
    Ok(VerifyReport {
        objective: program.objective(z),
        block_min_eigs: eigs,
        worst_violation: worst,
    })
}
