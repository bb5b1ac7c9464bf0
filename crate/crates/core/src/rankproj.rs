//! Range and null spaces of the decomposed blocks, elimination of interface
//! variables, and projected blocks.
//!
//! For each part `k` let `Pₖ` span the range of `Aₖ(x)` (computed from all
//! coefficient matrices at once) and `Wₖ` its orthogonal complement. A PSD
//! bordered block forces `Wₖᵀ(Bₖ + ΠₖD) = 0`; stacking these conditions gives
//! `U D = F` with `U = [Wₖᵀ Πₖ]ₖ` and `F = [−Wₖᵀ Bₖ]ₖ`. The general solution is
//! `D = U†F + N Z` where the columns of `N` span `Null(U)` and `Z` is free.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::arrowcore::{
    add_corner, add_objective, merge, BlockCoeffs, Corner, DecomposedLmi, LinearObjective,
};
use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, pinv, rank, row_space};
use crate::polymat::{kron, PolyMatrix};
use crate::sdpcore::{ConicProgram, Triplet};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Orthonormal basis of the null space of a symmetric matrix.
pub fn null_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    orthogonal_complement(&range_basis(std::slice::from_ref(a), tol))
}

/// Orthonormal basis of the sum of the column spans of a family.
pub fn range_basis(family: &[DMatrix<f64>], tol: f64) -> DMatrix<f64> {
    let n = family.first().map_or(0, |a| a.nrows());
    let total: usize = family.iter().map(|a| a.ncols()).sum();
    let mut stacked = DMatrix::zeros(n, total);
    let mut col = 0;
    for a in family {
        stacked.view_mut((0, col), (n, a.ncols())).copy_from(a);
        col += a.ncols();
    }
    row_space(&stacked.transpose(), tol)
}

/// Range basis of a polynomial matrix from all its coefficient matrices.
pub fn range_basis_poly(a: &PolyMatrix, tol: f64) -> DMatrix<f64> {
    let coeffs: Vec<DMatrix<f64>> = a.coefficients().into_values().collect();
    if coeffs.is_empty() {
        return DMatrix::zeros(a.rows(), 0);
    }
    range_basis(&coeffs, tol)
}

/// Per-part range (`p`) and null (`w`) bases in the local rows of `Iₖ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceBases {
    pub p: Vec<DMatrix<f64>>,
    pub w: Vec<DMatrix<f64>>,
}

impl SpaceBases {
    /// Ranks `sₖ` of the parts.
    pub fn ranks(&self) -> Vec<usize> {
        self.p.iter().map(|p| p.ncols()).collect()
    }
}

pub fn space_bases(dec: &DecomposedLmi, tol: f64) -> SpaceBases {
    let mut p = Vec::new();
    let mut w = Vec::new();
    for blk in &dec.blocks {
        let pk = range_basis_poly(&blk.a, tol);
        w.push(orthogonal_complement(&pk));
        p.push(pk);
    }
    SpaceBases { p, w }
}

/// Affine parametrisation `D = offset(x) + basis · Z` of all interface
/// values compatible with the null-space conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationMap {
    pub u: DMatrix<f64>,
    pub offset: PolyMatrix,
    pub basis: DMatrix<f64>,
    pub q: usize,
    /// First row of each part's conditions inside `u`.
    pub part_rows: Vec<std::ops::Range<usize>>,
}

impl EliminationMap {
    /// `D` for a numeric point `x` and free variables `z` (`q × m`).
    pub fn interface(&self, x: &[f64], z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.offset.eval(x)? + &self.basis * z)
    }
}

/// Null-space basis of `u` in reduced column-echelon form: pivot columns are
/// chosen left to right, and each basis vector has a unit entry in one free
/// column and zeros in the others.
pub fn canonical_null_basis(u: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = u.shape();
    let scale = u.amax().max(f64::MIN_POSITIVE);
    let mut a = u.clone();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol * scale {
            continue;
        }
        a.swap_rows(r, best);
        let piv = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut n = DMatrix::zeros(cols, free.len());
    for (t, &f) in free.iter().enumerate() {
        n[(f, t)] = 1.0;
        for (pr, &pc) in pivots.iter().enumerate() {
            let v = -a[(pr, f)];
            n[(pc, t)] = if v.abs() <= 1e-14 { 0.0 } else { v };
        }
    }
    n
}

/// Solves the stacked null-space conditions for the interface variables.
pub fn eliminate(dec: &DecomposedLmi, bases: &SpaceBases, tol: f64) -> Result<EliminationMap> {
    let n_i = dec.layout.n_i;
    let m = dec.m;
    let nvars = dec.gamma.nvars();
    let total: usize = bases.w.iter().map(|w| w.ncols()).sum();
    let mut u = DMatrix::zeros(total, n_i);
    let mut f = PolyMatrix::zeros(total, m, nvars);
    let mut part_rows = Vec::new();
    let mut row = 0;
    for (k, blk) in dec.blocks.iter().enumerate() {
        let w = &bases.w[k];
        let c = w.ncols();
        part_rows.push(row..row + c);
        if c == 0 {
            continue;
        }
        u.view_mut((row, 0), (c, n_i)).copy_from(&(w.transpose() * &blk.pi));
        let fk = blk.b.sandwich(&(-w.transpose()), &DMatrix::identity(m, m));
        let rows: Vec<usize> = (row..row + c).collect();
        let cols: Vec<usize> = (0..m).collect();
        f = f.add(&fk.embed(total, m, &rows, &cols))?;
        row += c;
    }
    let u_pinv = pinv(&u, tol);
    let offset = f.sandwich(&u_pinv, &DMatrix::identity(m, m));
    // Consistency: U U† F = F coefficient by coefficient.
    let proj = &u * &u_pinv;
    for (_, fc) in f.coefficients() {
        let resid = &proj * &fc - &fc;
        let norm = fc.norm().max(1.0);
        if resid.norm() > 1e-8 * norm {
            let part = part_rows
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    let ra = resid.rows(a.1.start, a.1.len()).norm();
                    let rb = resid.rows(b.1.start, b.1.len()).norm();
                    ra.total_cmp(&rb)
                })
                .map(|(k, _)| k)
                .unwrap_or(0);
            return Err(Error::InconsistentSystem { part, residual: resid.norm() });
        }
    }
    let basis = if total == 0 { DMatrix::identity(n_i, n_i) } else { canonical_null_basis(&u, tol) };
    let q = basis.ncols();
    debug_assert_eq!(q, n_i - rank(&u, tol).min(n_i));
    Ok(EliminationMap { u, offset, basis, q, part_rows })
}

/// Projected bordered block
/// `[[PₖᵀAₖPₖ, Pₖᵀ(Bₖ + Πₖ·offset) + PₖᵀΠₖN·Z], [·ᵀ, corner]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedBlock {
    pub part: usize,
    pub proj: DMatrix<f64>,
    pub a: PolyMatrix,
    pub border: PolyMatrix,
    pub z_coeff: DMatrix<f64>,
    pub corner: Corner,
}

impl ProjectedBlock {
    pub fn size(&self, m: usize) -> usize {
        self.a.rows() + m
    }
}

pub fn project_lmi(dec: &DecomposedLmi, bases: &SpaceBases, elim: &EliminationMap) -> Result<Vec<ProjectedBlock>> {
    let m = dec.m;
    dec.blocks
        .iter()
        .enumerate()
        .map(|(k, blk)| {
            let pk = &bases.p[k];
            let a = blk.a.congruence(pk);
            let shifted = blk.b.add(&elim.offset.sandwich(&blk.pi, &DMatrix::identity(m, m)))?;
            let border = shifted.sandwich(&pk.transpose(), &DMatrix::identity(m, m));
            Ok(ProjectedBlock {
                part: k,
                proj: pk.clone(),
                a,
                border,
                z_coeff: pk.transpose() * &blk.pi * &elim.basis,
                corner: blk.corner,
            })
        })
        .collect()
}

/// Value of a projected block for numeric `x`, `Z` and free corners `C`.
pub fn projected_block_value(
    blk: &ProjectedBlock,
    gamma: &DMatrix<f64>,
    x: &[f64],
    z: &DMatrix<f64>,
    c: &[DMatrix<f64>],
) -> Result<DMatrix<f64>> {
    let s = blk.a.rows();
    let m = gamma.nrows();
    let mut out = DMatrix::zeros(s + m, s + m);
    out.view_mut((0, 0), (s, s)).copy_from(&blk.a.eval(x)?);
    let border = blk.border.eval(x)? + &blk.z_coeff * z;
    out.view_mut((0, s), (s, m)).copy_from(&border);
    out.view_mut((s, 0), (m, s)).copy_from(&border.transpose());
    let corner = match blk.corner {
        Corner::Free(i) => c[i].clone(),
        Corner::Last => c.iter().fold(gamma.clone(), |acc, ci| acc - ci),
    };
    out.view_mut((s, s), (m, m)).copy_from(&corner);
    Ok(out)
}

/// Kronecker lifts `(Pₖ ⊗ I_L, Πₖ ⊗ I_L)`.
pub fn lift_projection(p: &DMatrix<f64>, pi: &DMatrix<f64>, l: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let id = DMatrix::identity(l, l);
    (kron(p, &id), kron(pi, &id))
}

/// Lifted null-space system on the localizing-level interface matrix `D̂`.
#[derive(Clone, Debug)]
pub struct LiftedConditions {
    /// `U ⊗ I_L`.
    pub u_hat: DMatrix<f64>,
    /// `N ⊗ I_L`, spanning the admissible directions of `D̂`.
    pub n_hat: DMatrix<f64>,
    /// Number of scalar entries of `D̂` (an `L·n_I × L·m` matrix) fixed by the
    /// conditions.
    pub eliminated: usize,
}

/// Builds `(Wₖ ⊗ I)ᵀ(Πₖ ⊗ I)` stacked over `k`, i.e. `U ⊗ I_L` up to row order,
/// together with the lifted free directions.
pub fn lifted_nullspace_conditions(elim: &EliminationMap, l: usize, m: usize, tol: f64) -> LiftedConditions {
    let id = DMatrix::identity(l, l);
    let u_hat = kron(&elim.u, &id);
    let n_hat = kron(&elim.basis, &id);
    let r = if u_hat.is_empty() { 0 } else { rank(&u_hat, tol) };
    LiftedConditions { u_hat, n_hat, eliminated: r * l * m }
}

/// `min t` (or `min γ`) subject to the projected constant blocks with free
/// `Z` and `C`. Variables: the objective variable, `Z` row-major, corners.
pub fn projected_program(
    dec: &DecomposedLmi,
    blocks: &[ProjectedBlock],
    elim: &EliminationMap,
    objective: LinearObjective,
) -> Result<ConicProgram> {
    let zero = vec![0.0; dec.gamma.nvars()];
    let m = dec.m;
    let vars = crate::arrowcore::DecomposedVars { m, n_d_rows: elim.q, n_corners: dec.p() - 1 };
    let mut prog = ConicProgram::new(vars.count());
    prog.c[0] = 1.0;
    let mut names = crate::arrowcore::decomposed_names(&vars, objective);
    for r in 0..elim.q {
        for j in 0..m {
            names[vars.d(r, j)] = format!("z[{r},{j}]");
        }
    }
    prog.var_names = names;
    let gamma = dec.gamma.eval(&zero)?;
    for blk in blocks {
        let s = blk.a.rows();
        let mut bc = BlockCoeffs::new();
        let a = blk.a.eval(&zero)?;
        let border = blk.border.eval(&zero)?;
        let mut constant: Vec<Triplet> = Vec::new();
        for j in 0..s {
            for i in 0..=j {
                constant.push((i, j, a[(i, j)]));
            }
        }
        for i in 0..s {
            for j in 0..m {
                constant.push((i, s + j, border[(i, j)]));
                for r in 0..elim.q {
                    bc.add(vars.d(r, j), i, s + j, blk.z_coeff[(i, r)]);
                }
            }
        }
        bc.constant = merge(constant);
        add_corner(&mut bc, &vars, blk.corner, &gamma, s, dec.p());
        add_objective(&mut bc, objective, blk.corner, s, m);
        prog.blocks.push(bc.into_block(s + m));
    }
    Ok(prog)
}
