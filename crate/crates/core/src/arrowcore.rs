//! Arrow structures and their decomposition.
//!
//! An arrow-type symmetric matrix
//!
//! ```text
//! G = [ A   B ]      A = Σₖ Aₖ,  B = Σₖ Bₖ,
//!     [ Bᵀ  Γ ]
//! ```
//!
//! has a top-left part split into `p` pieces `Aₖ` supported on `Iₖ × Iₖ`
//! and border pieces `Bₖ` whose rows lie in `Iₖ`. Index sets are 0-based
//! and sorted. The decomposition replaces `G ⪰ 0` by `p` bordered blocks
//! coupled through interface variables `D` (one row per element of each
//! pairwise intersection) and corner splits `Cₖ`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_psd, min_eigenvalue, pinv, spectral_norm};
use crate::polymat::{binomial, PolyMatrix};
use crate::sdpcore::{ConicProgram, ProgramBlock, Triplet};

/// Relative PSD tolerance of the certificate oracle.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Arrow partition of a symmetric polynomial matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrowStructure {
    pub n: usize,
    pub m: usize,
    pub index_sets: Vec<Vec<usize>>,
    pub a_blocks: Vec<PolyMatrix>,
    pub b_blocks: Vec<PolyMatrix>,
    pub gamma: PolyMatrix,
}

/// Soft findings of [`ArrowStructure::validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
}

impl ArrowStructure {
    /// Checks shapes and sorts index sets; support conditions are left to [`validate`](Self::validate).
    pub fn new(
        index_sets: Vec<Vec<usize>>,
        a_blocks: Vec<PolyMatrix>,
        b_blocks: Vec<PolyMatrix>,
        gamma: PolyMatrix,
    ) -> Result<Self> {
        let p = index_sets.len();
        if p == 0 || a_blocks.len() != p || b_blocks.len() != p {
            return Err(Error::Dimension(format!(
                "{} index sets, {} A blocks, {} B blocks",
                p,
                a_blocks.len(),
                b_blocks.len()
            )));
        }
        let n = a_blocks[0].rows();
        let m = gamma.rows();
        let nvars = gamma.nvars();
        if gamma.cols() != m {
            return Err(Error::Dimension("Γ must be square".into()));
        }
        for k in 0..p {
            let (a, b) = (&a_blocks[k], &b_blocks[k]);
            if a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != m {
                return Err(Error::Dimension(format!("part {k}: blocks have the wrong shape")));
            }
            if a.nvars() != nvars || b.nvars() != nvars {
                return Err(Error::Dimension(format!("part {k}: variable count differs from Γ")));
            }
        }
        let index_sets = index_sets
            .into_iter()
            .map(|s| s.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        Ok(ArrowStructure { n, m, index_sets, a_blocks, b_blocks, gamma })
    }

    /// Builds a structure from the pieces `Aₖ` and one border `B`, giving
    /// each row of `B` to the lowest part whose index set contains it.
    pub fn with_default_split(
        index_sets: Vec<Vec<usize>>,
        a_blocks: Vec<PolyMatrix>,
        b: &PolyMatrix,
        gamma: PolyMatrix,
    ) -> Result<Self> {
        let n = b.rows();
        let mut owner = vec![None; n];
        for (k, set) in index_sets.iter().enumerate() {
            for &i in set {
                if i < n && owner[i].is_none() {
                    owner[i] = Some(k);
                }
            }
        }
        let mut parts = vec![PolyMatrix::zeros(n, b.cols(), b.nvars()); index_sets.len()];
        for (i, j, poly) in b.entries() {
            let k = owner[i].ok_or_else(|| Error::IndexSetCover { n, missing: vec![i] })?;
            parts[k].set(i, j, poly.clone());
        }
        Self::new(index_sets, a_blocks, parts, gamma)
    }

    pub fn p(&self) -> usize {
        self.index_sets.len()
    }

    pub fn nvars(&self) -> usize {
        self.gamma.nvars()
    }

    pub fn a_sum(&self) -> PolyMatrix {
        sum_all(&self.a_blocks)
    }

    pub fn b_sum(&self) -> PolyMatrix {
        sum_all(&self.b_blocks)
    }

    /// The full matrix `G = [[ΣAₖ, ΣBₖ], [·ᵀ, Γ]]`.
    pub fn assemble(&self) -> PolyMatrix {
        PolyMatrix::bordered(&self.a_sum(), &self.b_sum(), &self.gamma)
    }

    /// Hard checks (cover, support, optional reassembly against `reference`)
    /// and soft warnings (nesting, more than `max_neighbours` intersections).
    pub fn validate(&self, reference: Option<&PolyMatrix>, max_neighbours: Option<usize>) -> Result<ValidationReport> {
        let n = self.n;
        let mut covered = vec![false; n];
        for set in &self.index_sets {
            for &i in set {
                if i >= n {
                    return Err(Error::Dimension(format!("index {i} outside [0, {n})")));
                }
                covered[i] = true;
            }
        }
        let missing: Vec<usize> = (0..n).filter(|&i| !covered[i]).collect();
        if !missing.is_empty() {
            return Err(Error::IndexSetCover { n, missing });
        }
        for (k, set) in self.index_sets.iter().enumerate() {
            let inside = |i: usize| set.binary_search(&i).is_ok();
            for (i, j, _) in self.a_blocks[k].entries() {
                if !inside(i) || !inside(j) {
                    return Err(Error::SupportViolation { part: k, what: "A", row: i, col: j });
                }
            }
            for (i, j, _) in self.b_blocks[k].entries() {
                if !inside(i) {
                    return Err(Error::SupportViolation { part: k, what: "B", row: i, col: j });
                }
            }
        }
        if let Some(g) = reference {
            let diff = g.sub(&self.assemble())?;
            let first = diff.entries().next().map(|(i, j, poly)| format!("entry ({i},{j}) differs by {poly}"));
            if let Some(msg) = first {
                return Err(Error::ReassemblyMismatch(msg));
            }
        }
        let mut report = ValidationReport::default();
        let p = self.p();
        if p == 1 {
            report
                .warnings
                .push("a single part covers everything: the decomposition has no computational advantage".into());
        }
        for k in 0..p {
            for l in 0..p {
                if k != l {
                    let sk: BTreeSet<_> = self.index_sets[k].iter().collect();
                    if self.index_sets[l].iter().all(|i| sk.contains(i)) {
                        report.warnings.push(format!("index set {l} is nested in index set {k}"));
                    }
                }
            }
        }
        if let Some(limit) = max_neighbours {
            for k in 0..p {
                let count = (0..p)
                    .filter(|&l| l != k && !intersect(&self.index_sets[k], &self.index_sets[l]).is_empty())
                    .count();
                if count > limit {
                    report
                        .warnings
                        .push(format!("index set {k} meets {count} other sets (limit {limit})"));
                }
            }
        }
        Ok(report)
    }

    /// Numeric value of every piece at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<NumericArrow> {
        Ok(NumericArrow {
            a: self.a_blocks.iter().map(|a| a.eval(x)).collect::<Result<_>>()?,
            b: self.b_blocks.iter().map(|b| b.eval(x)).collect::<Result<_>>()?,
            gamma: self.gamma.eval(x)?,
        })
    }
}

/// Numeric snapshot of an arrow structure.
#[derive(Clone, Debug)]
pub struct NumericArrow {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub gamma: DMatrix<f64>,
}

impl NumericArrow {
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.a[0].nrows();
        let m = self.gamma.nrows();
        let a: DMatrix<f64> = self.a.iter().fold(DMatrix::zeros(n, n), |acc, x| acc + x);
        let b: DMatrix<f64> = self.b.iter().fold(DMatrix::zeros(n, m), |acc, x| acc + x);
        let mut g = DMatrix::zeros(n + m, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&a);
        g.view_mut((0, n), (n, m)).copy_from(&b);
        g.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
        g.view_mut((n, n), (m, m)).copy_from(&self.gamma);
        g
    }
}

fn sum_all(mats: &[PolyMatrix]) -> PolyMatrix {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = acc.add(m).expect("shapes checked on construction");
    }
    acc
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|i| b.binary_search(i).is_ok()).collect()
}

/// Nonempty intersections `(k, ℓ, Iₖ ∩ I_ℓ)` with `k < ℓ`, ordered by `(k, ℓ)`.
pub fn intersections(index_sets: &[Vec<usize>]) -> Vec<(usize, usize, Vec<usize>)> {
    let p = index_sets.len();
    let mut out = Vec::new();
    for k in 0..p {
        for l in k + 1..p {
            let common = intersect(&index_sets[k], &index_sets[l]);
            if !common.is_empty() {
                out.push((k, l, common));
            }
        }
    }
    out
}

/// 0/1 matrix of shape `|set| × n` with a one at `(i, set[i])`.
pub fn selection_matrix(set: &[usize], n: usize) -> Result<DMatrix<f64>> {
    let mut e = DMatrix::zeros(set.len(), n);
    for (i, &j) in set.iter().enumerate() {
        if j >= n {
            return Err(Error::Dimension(format!("index {j} outside [0, {n})")));
        }
        e[(i, j)] = 1.0;
    }
    Ok(e)
}

/// One interface pair `(k, ℓ)` with its shared indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfacePair {
    pub k: usize,
    pub l: usize,
    pub indices: Vec<usize>,
    /// First row of this pair inside the stacked interface matrix `D`.
    pub offset: usize,
}

/// Interface bookkeeping: the stacked `D` has `n_i` rows and `Πₖ D` is the
/// border correction of part `k` expressed in the local rows of `Iₖ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceLayout {
    pub pairs: Vec<InterfacePair>,
    pub n_i: usize,
    pub pi: Vec<DMatrix<f64>>,
}

impl InterfaceLayout {
    /// Direct signed sum `−Σ_{ℓ<k} D_{ℓ,k} + Σ_{ℓ>k} D_{k,ℓ}` in the local rows of `Iₖ`.
    pub fn signed_sum(&self, index_sets: &[Vec<usize>], k: usize, d: &DMatrix<f64>) -> DMatrix<f64> {
        let set = &index_sets[k];
        let mut out = DMatrix::zeros(set.len(), d.ncols());
        for pair in &self.pairs {
            let sign = if pair.k == k {
                1.0
            } else if pair.l == k {
                -1.0
            } else {
                continue;
            };
            for (t, idx) in pair.indices.iter().enumerate() {
                let row = set.binary_search(idx).expect("intersection inside set");
                for j in 0..d.ncols() {
                    out[(row, j)] += sign * d[(pair.offset + t, j)];
                }
            }
        }
        out
    }
}

/// Builds the interface layout and the sign matrices `Πₖ`.
pub fn build_interface_layout(index_sets: &[Vec<usize>]) -> InterfaceLayout {
    let mut pairs = Vec::new();
    let mut offset = 0;
    for (k, l, indices) in intersections(index_sets) {
        let len = indices.len();
        pairs.push(InterfacePair { k, l, indices, offset });
        offset += len;
    }
    let n_i = offset;
    let mut pi: Vec<DMatrix<f64>> = index_sets.iter().map(|s| DMatrix::zeros(s.len(), n_i)).collect();
    for pair in &pairs {
        for (t, idx) in pair.indices.iter().enumerate() {
            let rk = index_sets[pair.k].binary_search(idx).expect("intersection inside set");
            let rl = index_sets[pair.l].binary_search(idx).expect("intersection inside set");
            pi[pair.k][(rk, pair.offset + t)] = 1.0;
            pi[pair.l][(rl, pair.offset + t)] = -1.0;
        }
    }
    InterfaceLayout { pairs, n_i, pi }
}

/// How the corner of a decomposed block is parametrised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corner {
    /// A free symmetric `Cₖ`; the payload is the position among the free corners.
    Free(usize),
    /// `Γ − Σ_{k<p} Cₖ`.
    Last,
}

/// Block template `[[Aₖ, Bₖ + Πₖ D], [·ᵀ, corner]]` restricted to `Iₖ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockTemplate {
    pub part: usize,
    pub rows: Vec<usize>,
    pub a: PolyMatrix,
    pub b: PolyMatrix,
    pub pi: DMatrix<f64>,
    pub corner: Corner,
}

impl BlockTemplate {
    pub fn size(&self, m: usize) -> usize {
        self.rows.len() + m
    }
}

/// The decomposition `{G̃ₖ ⪰ 0}` of an arrow structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposedLmi {
    pub n: usize,
    pub m: usize,
    pub layout: InterfaceLayout,
    pub blocks: Vec<BlockTemplate>,
    pub gamma: PolyMatrix,
}

/// Builds the block templates of an arrow structure.
pub fn decompose_lmi(s: &ArrowStructure) -> DecomposedLmi {
    let layout = build_interface_layout(&s.index_sets);
    let p = s.p();
    let mcols: Vec<usize> = (0..s.m).collect();
    let blocks = (0..p)
        .map(|k| {
            let rows = s.index_sets[k].clone();
            BlockTemplate {
                part: k,
                a: s.a_blocks[k].select(&rows, &rows),
                b: s.b_blocks[k].select(&rows, &mcols),
                pi: layout.pi[k].clone(),
                corner: if k + 1 < p { Corner::Free(k) } else { Corner::Last },
                rows,
            }
        })
        .collect();
    DecomposedLmi { n: s.n, m: s.m, layout, blocks, gamma: s.gamma.clone() }
}

impl DecomposedLmi {
    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    /// Number of scalar interface variables `n_I · m`.
    pub fn n_d(&self) -> usize {
        self.layout.n_i * self.m
    }

    /// Number of scalar corner variables `(p − 1) · m(m+1)/2`.
    pub fn n_c(&self) -> usize {
        (self.p() - 1) * self.m * (self.m + 1) / 2
    }

    /// Value of block `k` for numeric `D` (`n_I × m`) and free corners `C`.
    pub fn block_value(&self, k: usize, d: &DMatrix<f64>, c: &[DMatrix<f64>]) -> Result<PolyMatrix> {
        let blk = &self.blocks[k];
        let nvars = self.gamma.nvars();
        let border = blk.b.add(&PolyMatrix::from_dense(&(&blk.pi * d), nvars))?;
        let corner = match blk.corner {
            Corner::Free(i) => {
                let mut cm = PolyMatrix::from_dense(&c[i], nvars);
                cm.symmetrize_from_upper();
                cm
            }
            Corner::Last => {
                let total = c.iter().fold(DMatrix::zeros(self.m, self.m), |acc, x| acc + x);
                self.gamma.sub(&PolyMatrix::from_dense(&total, nvars))?
            }
        };
        Ok(PolyMatrix::bordered(&blk.a, &border, &corner))
    }

    /// `Σₖ embed(G̃ₖ(D, C))`, which equals `G` for every `D` and `C`.
    pub fn reassemble(&self, d: &DMatrix<f64>, c: &[DMatrix<f64>]) -> Result<PolyMatrix> {
        let size = self.n + self.m;
        let mut acc = PolyMatrix::symmetric(size, self.gamma.nvars());
        for k in 0..self.p() {
            let blk = &self.blocks[k];
            let idx: Vec<usize> = blk.rows.iter().copied().chain(self.n..size).collect();
            let emb = self.block_value(k, d, c)?.embed(size, size, &idx, &idx);
            acc = acc.add(&emb)?;
        }
        Ok(acc)
    }
}

/// Numeric interface and corner assignment making every block PSD.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub d: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
}

/// Constructs `(D, C)` from `X = A†B`, `S = (Γ − XᵀB)/p`, `Cₖ = S + XᵀAₖX`
/// and a chain of partial sums of `Rₖ = AₖX − Bₖ` along each row's parts.
pub fn constructive_certificate(s: &ArrowStructure, x: &[f64]) -> Result<Certificate> {
    let num = s.evaluate(x)?;
    let p = s.p();
    for (k, a) in num.a.iter().enumerate() {
        if !is_psd(a, CERTIFICATE_TOL) {
            return Err(Error::NotPsd(format!("A_{k} has eigenvalue {:.3e}", min_eigenvalue(a))));
        }
    }
    if !is_psd(&num.gamma, CERTIFICATE_TOL) {
        return Err(Error::NotPsd("Γ".into()));
    }
    let g = num.assemble();
    if !is_psd(&g, CERTIFICATE_TOL) {
        return Err(Error::NotPsd(format!("G has eigenvalue {:.3e}", min_eigenvalue(&g))));
    }
    let n = s.n;
    let m = s.m;
    let a: DMatrix<f64> = num.a.iter().fold(DMatrix::zeros(n, n), |acc, x| acc + x);
    let b: DMatrix<f64> = num.b.iter().fold(DMatrix::zeros(n, m), |acc, x| acc + x);
    let xm = pinv(&a, 1e-12) * &b;
    let smat = (&num.gamma - xm.transpose() * &b) / p as f64;
    let smat = (&smat + smat.transpose()) * 0.5;
    let c: Vec<DMatrix<f64>> = (0..p.saturating_sub(1))
        .map(|k| {
            let v = &smat + xm.transpose() * &num.a[k] * &xm;
            (&v + v.transpose()) * 0.5
        })
        .collect();
    let r: Vec<DMatrix<f64>> = (0..p).map(|k| &num.a[k] * &xm - &num.b[k]).collect();
    let layout = build_interface_layout(&s.index_sets);
    let mut d = DMatrix::zeros(layout.n_i, m);
    for i in 0..n {
        let parts: Vec<usize> = (0..p).filter(|&k| s.index_sets[k].binary_search(&i).is_ok()).collect();
        let mut partial = vec![0.0; m];
        for w in parts.windows(2) {
            let (k, l) = (w[0], w[1]);
            for j in 0..m {
                partial[j] += r[k][(i, j)];
            }
            let pair = layout
                .pairs
                .iter()
                .find(|pr| pr.k == k && pr.l == l)
                .expect("consecutive parts of a row share that row");
            let t = pair.indices.binary_search(&i).expect("row in intersection");
            for j in 0..m {
                d[(pair.offset + t, j)] = partial[j];
            }
        }
    }
    Ok(Certificate { d, c })
}

/// Both sides of the size comparison between a localizing matrix of `G`
/// and one of a decomposed block when `D`, `C` become polynomial variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeComparison {
    /// `Π_{i=1}^{n_D+n_C} (1 + (r − r_G)/(n_x + i))`.
    pub lhs: f64,
    /// `|G| / |G̃ₖ|`.
    pub rhs: f64,
    /// Side length of the localizing matrix of `G`.
    pub full_size: u128,
    /// Side length of the localizing matrix of `G̃ₖ` over `x, D, C`.
    pub block_size: u128,
    pub shrinks: bool,
}

pub fn size_comparator(
    n_x: usize,
    r: u32,
    r_g: u32,
    n_d: usize,
    n_c: usize,
    g_size: usize,
    block_size: usize,
) -> Result<SizeComparison> {
    if r < r_g {
        return Err(Error::DegreeOverflow { r, r_min: r_g });
    }
    let d = (r - r_g) as u64;
    let extra = n_d + n_c;
    let lhs = (1..=extra).map(|i| 1.0 + d as f64 / (n_x + i) as f64).product::<f64>();
    let rhs = g_size as f64 / block_size as f64;
    let full = g_size as u128 * binomial(n_x as u64 + d, n_x as u64);
    let blk = block_size as u128 * binomial((n_x + extra) as u64 + d, (n_x + extra) as u64);
    Ok(SizeComparison {
        lhs,
        rhs,
        full_size: full,
        block_size: blk,
        shrinks: blk <= full,
    })
}

/// Objective used by the constant-matrix programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearObjective {
    /// Add `t·I` to every block and minimise `t`; `t* ≤ 0` iff the system is feasible.
    Shift,
    /// Replace `Γ` by `Γ + γ·I` and minimise `γ`.
    CornerShift,
}

/// Variable numbering for decomposed programs: the objective variable,
/// then `D` row-major, then the upper triangles of the free corners.
#[derive(Clone, Debug)]
pub struct DecomposedVars {
    pub m: usize,
    pub n_d_rows: usize,
    pub n_corners: usize,
}

impl DecomposedVars {
    pub fn t(&self) -> usize {
        0
    }
    pub fn d(&self, row: usize, col: usize) -> usize {
        1 + row * self.m + col
    }
    pub fn c(&self, k: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let tri = self.m * (self.m + 1) / 2;
        1 + self.n_d_rows * self.m + k * tri + upper_index(self.m, i, j)
    }
    pub fn count(&self) -> usize {
        1 + self.n_d_rows * self.m + self.n_corners * self.m * (self.m + 1) / 2
    }
}

/// Position of `(i, j)`, `i ≤ j`, in the row-by-row upper triangle of an `m × m` matrix.
pub fn upper_index(m: usize, i: usize, j: usize) -> usize {
    i * m - i * (i + 1) / 2 + j
}

fn push_dense(t: &mut Vec<Triplet>, mat: &DMatrix<f64>, off: usize) {
    for j in 0..mat.ncols() {
        for i in 0..=j.min(mat.nrows() - 1) {
            let v = mat[(i, j)];
            if v != 0.0 {
                t.push((off + i, off + j, v));
            }
        }
    }
}

/// `min t` (or `min γ`) subject to the undecomposed constant LMI.
pub fn full_program(s: &ArrowStructure, objective: LinearObjective) -> Result<ConicProgram> {
    let zero = vec![0.0; s.nvars()];
    let g = s.evaluate(&zero)?.assemble();
    let size = g.nrows();
    let mut p = ConicProgram::new(1);
    p.c[0] = 1.0;
    p.var_names[0] = match objective {
        LinearObjective::Shift => "t".into(),
        LinearObjective::CornerShift => "gamma".into(),
    };
    let mut blk = ProgramBlock::new(size, false);
    push_dense(&mut blk.constant, &g, 0);
    let diag: Vec<Triplet> = match objective {
        LinearObjective::Shift => (0..size).map(|i| (i, i, 1.0)).collect(),
        LinearObjective::CornerShift => (s.n..size).map(|i| (i, i, 1.0)).collect(),
    };
    blk.coeffs.push((0, diag));
    p.blocks.push(blk);
    Ok(p)
}

/// Linear map from `(t, D, C)` into one decomposed block, in triplet form.
pub(crate) struct BlockCoeffs {
    pub constant: Vec<Triplet>,
    pub coeffs: std::collections::BTreeMap<usize, Vec<Triplet>>,
}

impl BlockCoeffs {
    pub(crate) fn new() -> Self {
        BlockCoeffs { constant: Vec::new(), coeffs: Default::default() }
    }

    pub(crate) fn add(&mut self, var: usize, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            self.coeffs.entry(var).or_default().push((i, j, v));
        }
    }

    pub(crate) fn into_block(self, size: usize) -> ProgramBlock {
        let mut b = ProgramBlock::new(size, false);
        b.constant = merge(self.constant);
        b.coeffs = self.coeffs.into_iter().map(|(v, t)| (v, merge(t))).filter(|(_, t)| !t.is_empty()).collect();
        b
    }
}

/// Sums duplicate positions and drops exact zeros.
pub(crate) fn merge(mut t: Vec<Triplet>) -> Vec<Triplet> {
    t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut out: Vec<Triplet> = Vec::with_capacity(t.len());
    for (i, j, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += v,
            _ => out.push((i, j, v)),
        }
    }
    out.retain(|e| e.2 != 0.0);
    out
}

/// `min t` (or `min γ`) subject to the decomposed constant blocks with
/// free `D` and `C`.
pub fn decomposed_program(dec: &DecomposedLmi, objective: LinearObjective) -> Result<ConicProgram> {
    let zero = vec![0.0; dec.gamma.nvars()];
    let m = dec.m;
    let vars = DecomposedVars { m, n_d_rows: dec.layout.n_i, n_corners: dec.p() - 1 };
    let mut prog = ConicProgram::new(vars.count());
    prog.c[0] = 1.0;
    prog.var_names = decomposed_names(&vars, objective);
    let gamma = dec.gamma.eval(&zero)?;
    for blk in &dec.blocks {
        let nk = blk.rows.len();
        let size = nk + m;
        let mut bc = BlockCoeffs::new();
        push_dense(&mut bc.constant, &blk.a.eval(&zero)?, 0);
        let b = blk.b.eval(&zero)?;
        for i in 0..nk {
            for j in 0..m {
                if b[(i, j)] != 0.0 {
                    bc.constant.push((i, nk + j, b[(i, j)]));
                }
                for r in 0..dec.layout.n_i {
                    bc.add(vars.d(r, j), i, nk + j, blk.pi[(i, r)]);
                }
            }
        }
        add_corner(&mut bc, &vars, blk.corner, &gamma, nk, dec.p());
        add_objective(&mut bc, objective, blk.corner, nk, m);
        prog.blocks.push(bc.into_block(size));
    }
    Ok(prog)
}

pub(crate) fn decomposed_names(vars: &DecomposedVars, objective: LinearObjective) -> Vec<String> {
    let mut names = vec![String::new(); vars.count()];
    names[0] = match objective {
        LinearObjective::Shift => "t".into(),
        LinearObjective::CornerShift => "gamma".into(),
    };
    for r in 0..vars.n_d_rows {
        for j in 0..vars.m {
            names[vars.d(r, j)] = format!("d[{r},{j}]");
        }
    }
    for k in 0..vars.n_corners {
        for i in 0..vars.m {
            for j in i..vars.m {
                names[vars.c(k, i, j)] = format!("c{k}[{i},{j}]");
            }
        }
    }
    names
}

pub(crate) fn add_corner(bc: &mut BlockCoeffs, vars: &DecomposedVars, corner: Corner, gamma: &DMatrix<f64>, off: usize, p: usize) {
    let m = vars.m;
    match corner {
        Corner::Free(k) => {
            for i in 0..m {
                for j in i..m {
                    bc.add(vars.c(k, i, j), off + i, off + j, 1.0);
                }
            }
        }
        Corner::Last => {
            push_dense(&mut bc.constant, gamma, off);
            for k in 0..p - 1 {
                for i in 0..m {
                    for j in i..m {
                        bc.add(vars.c(k, i, j), off + i, off + j, -1.0);
                    }
                }
            }
        }
    }
}

pub(crate) fn add_objective(bc: &mut BlockCoeffs, objective: LinearObjective, corner: Corner, top: usize, m: usize) {
    match objective {
        LinearObjective::Shift => {
            for i in 0..top + m {
                bc.add(0, i, i, 1.0);
            }
        }
        LinearObjective::CornerShift => {
            if corner == Corner::Last {
                for i in top..top + m {
                    bc.add(0, i, i, 1.0);
                }
            }
        }
    }
}

/// Largest PSD violation of the certificate over all blocks, relative to block norms.
pub fn certificate_violation(dec: &DecomposedLmi, cert: &Certificate, x: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..dec.p() {
        let blk = dec.block_value(k, &cert.d, &cert.c)?.eval(x)?;
        let lam = min_eigenvalue(&blk);
        worst = worst.max(-lam / (1.0 + spectral_norm(&blk)));
    }
    Ok(worst)
}

/// Small structures used by examples, tests and the acceptance suite.
pub mod fixtures {
    use nalgebra::DMatrix;
    use rand::Rng;

    use super::ArrowStructure;
    use crate::polymat::{PolyMatrix, Polynomial};

    /// A 5×5 top-left part built from three overlapping pieces with weights
    /// `a`, a 5×1 border whose entries are the polynomial variables
    /// `b₁..b₅`, and a scalar corner `gamma`. Index sets are `{0,1,2}`,
    /// `{0,2,3}` and `{3,4}`; the border is split by the default rule.
    pub fn five_by_five(a: [f64; 3], gamma: f64) -> ArrowStructure {
        let nv = 5;
        let pieces: [(&[usize], DMatrix<f64>); 3] = [
            (&[0, 1, 2], DMatrix::from_row_slice(3, 3, &[2., 1., 1., 1., 2., 1., 1., 1., 1.])),
            (&[0, 2, 3], DMatrix::from_element(3, 3, 1.0)),
            (&[3, 4], DMatrix::from_row_slice(2, 2, &[1., 1., 1., 2.])),
        ];
        let mut a_blocks = Vec::new();
        let mut sets = Vec::new();
        for (k, (set, m)) in pieces.iter().enumerate() {
            let mut full = DMatrix::zeros(5, 5);
            for (i, &gi) in set.iter().enumerate() {
                for (j, &gj) in set.iter().enumerate() {
                    full[(gi, gj)] = a[k] * m[(i, j)];
                }
            }
            a_blocks.push(PolyMatrix::from_dense(&full, nv));
            sets.push(set.to_vec());
        }
        let mut b = PolyMatrix::zeros(5, 1, nv);
        for i in 0..5 {
            b.set(i, 0, Polynomial::var(nv, i));
        }
        let g = PolyMatrix::from_dense(&DMatrix::from_element(1, 1, gamma), nv);
        ArrowStructure::with_default_split(sets, a_blocks, &b, g).expect("fixture is well formed")
    }

    /// Consecutive windows of width `w` and stride `w − overlap` covering `0..n`.
    pub fn chain_sets(n: usize, w: usize, overlap: usize) -> Vec<Vec<usize>> {
        assert!(w > overlap && w <= n);
        let mut out = Vec::new();
        let mut start = 0;
        loop {
            let end = (start + w).min(n);
            out.push((start..end).collect());
            if end == n {
                break;
            }
            start += w - overlap;
        }
        out
    }

    /// Random constant arrow structure built as a sum of Gram blocks, hence
    /// PSD. With `definite = false` the corner is lowered below the Schur
    /// complement so that `G` is indefinite while every `Aₖ` stays PSD.
    pub fn random_arrow<R: Rng>(rng: &mut R, n: usize, m: usize, p: usize, definite: bool) -> ArrowStructure {
        let p = p.max(1).min(n);
        let w = (n / p + 2).min(n);
        let mut sets = chain_sets(n, w, 1.min(w - 1));
        sets.truncate(p.max(1));
        // Make sure the last set reaches the end.
        if let Some(last) = sets.last_mut() {
            let start = last[0];
            *last = (start..n).collect();
        }
        let mut a_blocks = Vec::new();
        let mut b_blocks = Vec::new();
        let mut gamma = DMatrix::zeros(m, m);
        for set in &sets {
            let nk = set.len();
            let rank = rng.gen_range(1..=nk + m);
            let q = DMatrix::from_fn(nk + m, rank, |_, _| rng.gen_range(-1.0..1.0));
            let gk = &q * q.transpose();
            let mut a = DMatrix::zeros(n, n);
            let mut b = DMatrix::zeros(n, m);
            for (i, &gi) in set.iter().enumerate() {
                for (j, &gj) in set.iter().enumerate() {
                    a[(gi, gj)] = gk[(i, j)];
                }
                for j in 0..m {
                    b[(gi, j)] = gk[(i, nk + j)];
                }
            }
            gamma += gk.view((nk, nk), (m, m));
            a_blocks.push(PolyMatrix::from_dense(&a, 0));
            b_blocks.push(PolyMatrix::from_dense(&b, 0));
        }
        if !definite {
            let s = ArrowStructure::new(sets.clone(), a_blocks.clone(), b_blocks.clone(), PolyMatrix::from_dense(&gamma, 0))
                .expect("consistent shapes");
            let num = s.evaluate(&[]).expect("constant");
            let a: DMatrix<f64> = num.a.iter().fold(DMatrix::zeros(n, n), |acc, x| acc + x);
            let b: DMatrix<f64> = num.b.iter().fold(DMatrix::zeros(n, m), |acc, x| acc + x);
            let schur_part = b.transpose() * crate::linalg::pinv(&a, 1e-12) * &b;
            gamma = schur_part - DMatrix::identity(m, m) * rng.gen_range(0.05..0.5);
        }
        let mut gp = PolyMatrix::from_dense(&gamma, 0);
        gp.symmetrize_from_upper();
        ArrowStructure::new(sets, a_blocks, b_blocks, gp).expect("consistent shapes")
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::sdpcore::{solve, Backend, Status};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intersections_of_fixture() {
        let s = five_by_five([1.0; 3], 10.0);
        assert_eq!(intersections(&s.index_sets), vec![(0, 1, vec![0, 2]), (1, 2, vec![3])]);
        assert!(intersections(&[vec![0, 1], vec![2, 3]]).is_empty());
    }

    #[test]
    fn chain_windows_have_expected_overlaps() {
        let sets = chain_sets(11, 4, 2);
        let inter = intersections(&sets);
        assert_eq!(inter.len(), sets.len() - 1);
        assert!(inter.iter().all(|(k, l, s)| l - k == 1 && s.len() == 2));
    }

    #[test]
    fn selection_matrix_rows() {
        let e = selection_matrix(&[0, 1], 3).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 3, &[1., 0., 0., 0., 1., 0.]));
        assert_eq!(selection_matrix(&[0, 1, 2], 3).unwrap(), DMatrix::identity(3, 3));
        assert!(selection_matrix(&[3], 3).is_err());
    }

    #[test]
    fn interface_signs_of_fixture() {
        let s = five_by_five([1.0; 3], 10.0);
        let lay = build_interface_layout(&s.index_sets);
        assert_eq!(lay.n_i, 3);
        let pi1 = DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 0., 0., 0., 1., 0.]);
        let pi2 = DMatrix::from_row_slice(3, 3, &[-1., 0., 0., 0., -1., 0., 0., 0., 1.]);
        let pi3 = DMatrix::from_row_slice(2, 3, &[0., 0., -1., 0., 0., 0.]);
        assert_eq!(lay.pi, vec![pi1, pi2, pi3]);
    }

    #[test]
    fn validation_outcomes() {
        let s = five_by_five([1.0; 3], 10.0);
        let g = s.assemble();
        assert!(s.validate(Some(&g), Some(2)).unwrap().warnings.is_empty());

        let mut bad = s.clone();
        bad.b_blocks[1].set(4, 0, crate::polymat::Polynomial::constant(5, 1.0));
        assert!(matches!(bad.validate(None, None), Err(Error::SupportViolation { part: 1, what: "B", .. })));

        let single = ArrowStructure::new(
            vec![(0..5).collect()],
            vec![s.a_sum()],
            vec![s.b_sum()],
            s.gamma.clone(),
        )
        .unwrap();
        assert_eq!(single.validate(None, None).unwrap().warnings.len(), 1);

        let mut uncovered = s.clone();
        uncovered.index_sets[2] = vec![3];
        uncovered.a_blocks[2] = PolyMatrix::zeros(5, 5, 5);
        uncovered.b_blocks[2] = PolyMatrix::zeros(5, 1, 5);
        assert!(matches!(uncovered.validate(None, None), Err(Error::IndexSetCover { .. })));
    }

    #[test]
    fn decomposition_sizes_and_reassembly() {
        let s = five_by_five([1.0, 2.0, 0.5], 10.0);
        let dec = decompose_lmi(&s);
        let sizes: Vec<usize> = dec.blocks.iter().map(|b| b.size(dec.m)).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        assert_eq!((dec.n_d(), dec.n_c()), (3, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = DMatrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
        let c = vec![DMatrix::from_element(1, 1, 0.3), DMatrix::from_element(1, 1, -1.7)];
        let back = dec.reassemble(&d, &c).unwrap();
        let x = [0.1, -0.2, 0.3, 0.4, -0.5];
        let diff = back.eval(&x).unwrap() - s.assemble().eval(&x).unwrap();
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn certificate_on_fixture() {
        let s = five_by_five([1.0; 3], 10.0);
        let x = [1.0, 0.0, 0.0, 0.0, 0.0];
        let cert = constructive_certificate(&s, &x).unwrap();
        let dec = decompose_lmi(&s);
        assert!(certificate_violation(&dec, &cert, &x).unwrap() <= 1e-8);
    }

    #[test]
    fn certificate_decoupled_border() {
        let s = five_by_five([1.0; 3], 6.0);
        let cert = constructive_certificate(&s, &[0.0; 5]).unwrap();
        assert!(cert.d.amax() < 1e-14);
        assert!(cert.c.iter().all(|c| (c[(0, 0)] - 2.0).abs() < 1e-14));
    }

    #[test]
    fn certificate_rejects_indefinite() {
        let s = five_by_five([1.0; 3], 0.01);
        assert!(matches!(constructive_certificate(&s, &[5.0, 0., 0., 0., 0.]), Err(Error::NotPsd(_))));
    }

    #[test]
    fn comparator_edge_cases() {
        let same = size_comparator(3, 2, 2, 4, 5, 6, 4).unwrap();
        assert_eq!(same.lhs, 1.0);
        assert!(same.shrinks);
        let none = size_comparator(5, 4, 1, 0, 0, 10, 9).unwrap();
        assert!(none.shrinks);
        assert!(size_comparator(3, 0, 1, 0, 0, 1, 1).is_err());
    }

    #[test]
    fn random_structures_certify_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..6 {
            let definite = trial % 2 == 0;
            let s = random_arrow(&mut rng, 8, 2, 3, definite);
            s.validate(None, None).unwrap();
            let dec = decompose_lmi(&s);
            let prog = decomposed_program(&dec, LinearObjective::Shift).unwrap();
            let sol = solve(&prog, &Backend::default()).unwrap();
            assert!(matches!(sol.status, Status::Optimal | Status::NearOptimal), "{:?}", sol.status);
            if definite {
                let cert = constructive_certificate(&s, &[]).unwrap();
                assert!(certificate_violation(&dec, &cert, &[]).unwrap() < 1e-8);
                assert!(sol.primal_obj <= 1e-6, "t* = {}", sol.primal_obj);
            } else {
                assert!(sol.primal_obj > 1e-6, "t* = {}", sol.primal_obj);
            }
        }
    }

    #[test]
    fn corner_shift_values_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_arrow(&mut rng, 7, 2, 3, true);
        let full = solve(&full_program(&s, LinearObjective::CornerShift).unwrap(), &Backend::default()).unwrap();
        let dec = solve(
            &decomposed_program(&decompose_lmi(&s), LinearObjective::CornerShift).unwrap(),
            &Backend::default(),
        )
        .unwrap();
        assert!((full.primal_obj - dec.primal_obj).abs() < 1e-6 * (1.0 + full.primal_obj.abs()));
    }
}
