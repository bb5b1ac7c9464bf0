//! Moment and localizing matrices, the standard moment-SOS relaxation and the
//! arrow-decomposed posterior relaxation.
//!
//! Pseudo-moments `y_α` are indexed by monomials. The constant moment `y_0` is
//! substituted by one, so every block is an affine matrix function of the
//! remaining moments plus any auxiliary variables (interface blocks `D̂` or
//! their reduced form `Z`, and corner splits `Ĉₖ`).
//!
//! Localizing matrices use the Kronecker layout `ℒ_y(G(x) ⊗ b(x)b(x)ᵀ)`:
//! row `(i, a)` of `G ⊗ bbᵀ` sits at position `i·L + a`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::arrowcore::{constructive_certificate, decompose_lmi, merge, upper_index, ArrowStructure, Corner};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, pinv, rank};
use crate::polymat::{basis, BasisKind, Monomial, MonomialBasis, PolyMatrix, Polynomial};
use crate::rankproj::{eliminate, lifted_nullspace_conditions, project_lmi, space_bases, EliminationMap, RANK_TOL};
use crate::sdpcore::{solve, Backend, ConicProgram, ProgramBlock, Solution, Triplet};

/// Default relative threshold for the flatness rank test.
pub const FLATNESS_RANK_TOL: f64 = 1e-6;

/// Ordered set of monomials with a position map.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentIndexer {
    nvars: usize,
    monomials: Vec<Monomial>,
    pos: HashMap<Monomial, usize>,
}

impl MomentIndexer {
    /// Indexer over the given monomials plus the constant, sorted graded-lex.
    pub fn new<I: IntoIterator<Item = Monomial>>(nvars: usize, monomials: I) -> Self {
        let mut set: BTreeSet<Monomial> = monomials.into_iter().collect();
        set.insert(Monomial::one(nvars));
        let monomials: Vec<Monomial> = set.into_iter().collect();
        let pos = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        MomentIndexer { nvars, monomials, pos }
    }

    /// All pairwise products of a basis.
    pub fn closure(b: &MonomialBasis) -> Self {
        let mut all = Vec::with_capacity(b.len() * (b.len() + 1) / 2);
        for (i, u) in b.elements.iter().enumerate() {
            for v in &b.elements[i..] {
                all.push(u.mul(v));
            }
        }
        MomentIndexer::new(b.nvars, all)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn index(&self, m: &Monomial) -> Option<usize> {
        self.pos.get(m).copied()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }
}

/// Affine symmetric matrix in the pseudo-moments and auxiliary variables.
/// Triplets are upper-triangular; the constant monomial carries `F₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiTemplate {
    pub label: String,
    pub size: usize,
    pub moments: BTreeMap<Monomial, Vec<Triplet>>,
    pub aux: BTreeMap<usize, Vec<Triplet>>,
}

impl LmiTemplate {
    pub fn new(label: impl Into<String>, size: usize) -> Self {
        LmiTemplate { label: label.into(), size, moments: BTreeMap::new(), aux: BTreeMap::new() }
    }

    pub fn add_moment(&mut self, m: Monomial, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.moments.entry(m).or_default().push((i.min(j), i.max(j), v));
        }
    }

    pub fn add_aux(&mut self, var: usize, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.aux.entry(var).or_default().push((i.min(j), i.max(j), v));
        }
    }

    /// Merges duplicate positions and drops cancelled entries.
    pub fn compact(&mut self) {
        for t in self.moments.values_mut() {
            *t = merge(std::mem::take(t));
        }
        self.moments.retain(|_, t| !t.is_empty());
        for t in self.aux.values_mut() {
            *t = merge(std::mem::take(t));
        }
        self.aux.retain(|_, t| !t.is_empty());
    }

    /// Dense value for given pseudo-moments and auxiliary values.
    pub fn evaluate(&self, y: &PseudoMoments, aux: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.size, self.size);
        for (m, t) in &self.moments {
            crate::sdpcore::add_triplets(&mut out, t, y.get(m)?);
        }
        for (v, t) in &self.aux {
            let val = *aux
                .get(*v)
                .ok_or_else(|| Error::Dimension(format!("auxiliary variable {v} missing")))?;
            crate::sdpcore::add_triplets(&mut out, t, val);
        }
        Ok(out)
    }
}

/// `M_r(y)` over the given basis: entry `(a, b)` references `y_{b_a b_b}`.
pub fn moment_template(b: &MonomialBasis) -> LmiTemplate {
    let mut t = LmiTemplate::new("moment", b.len());
    for (i, u) in b.elements.iter().enumerate() {
        for (j, v) in b.elements.iter().enumerate().skip(i) {
            t.add_moment(u.mul(v), i, j, 1.0);
        }
    }
    t
}

/// `M_d(Gy) = ℒ_y(G(x) ⊗ b_d(x)b_d(x)ᵀ)` for a square symmetric `G`.
pub fn localizing_template(g: &PolyMatrix, b: &MonomialBasis) -> LmiTemplate {
    let l = b.len();
    let mut t = LmiTemplate::new("localizing", g.rows() * l);
    let products = basis_products(b);
    for (i, j, p) in g.entries() {
        if i > j {
            continue;
        }
        for (gm, c) in p.terms() {
            for a in 0..l {
                let start = if i == j { a } else { 0 };
                for bb in start..l {
                    t.add_moment(gm.mul(&products[a * l + bb]), i * l + a, j * l + bb, c);
                }
            }
        }
    }
    t.compact();
    t
}

/// Scalar localizing matrix `ℒ_y(g(x) b bᵀ)`.
pub fn scalar_localizing_template(g: &Polynomial, b: &MonomialBasis) -> LmiTemplate {
    let mut m = PolyMatrix::symmetric(1, g.nvars());
    m.set(0, 0, g.clone());
    localizing_template(&m, b)
}

fn basis_products(b: &MonomialBasis) -> Vec<Monomial> {
    let l = b.len();
    let mut out = Vec::with_capacity(l * l);
    for u in &b.elements {
        for v in &b.elements {
            out.push(u.mul(v));
        }
    }
    out
}

/// Pseudo-moment sequence, either tabulated or generated by an atomic measure.
#[derive(Clone, Debug)]
pub enum PseudoMoments {
    Table { nvars: usize, values: HashMap<Monomial, f64> },
    Atomic { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl PseudoMoments {
    /// Moments of `Σ wⱼ δ_{xⱼ}`.
    pub fn atomic(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::Dimension("atoms and weights must be nonempty and of equal length".into()));
        }
        Ok(PseudoMoments::Atomic { atoms, weights })
    }

    pub fn dirac(x: Vec<f64>) -> Self {
        PseudoMoments::Atomic { atoms: vec![x], weights: vec![1.0] }
    }

    /// `y_α`; the constant moment of a table is always one.
    pub fn get(&self, m: &Monomial) -> Result<f64> {
        match self {
            PseudoMoments::Table { values, .. } => {
                if m.is_one() {
                    return Ok(1.0);
                }
                values.get(m).copied().ok_or_else(|| Error::Dimension(format!("moment {m} not available")))
            }
            PseudoMoments::Atomic { atoms, weights } => {
                Ok(atoms.iter().zip(weights).map(|(x, w)| w * m.eval(x)).sum())
            }
        }
    }

    /// Numeric moment matrix over a basis.
    pub fn moment_matrix(&self, b: &MonomialBasis) -> Result<DMatrix<f64>> {
        moment_template(b).evaluate(self, &[])
    }
}

/// Rank report of the flatness test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub rank_r: usize,
    pub rank_lower: usize,
    pub flat: bool,
}

/// Compares the ranks of `M_r(y)` and `M_{r−r_G}(y)`.
pub fn flatness(y: &PseudoMoments, nvars: usize, r: u32, r_g: u32, kind: BasisKind, rank_tol: f64) -> Result<FlatnessReport> {
    let hi = y.moment_matrix(&basis(nvars, r, kind))?;
    let lo = y.moment_matrix(&basis(nvars, r.saturating_sub(r_g), kind))?;
    let rank_r = rank(&hi, rank_tol);
    let rank_lower = rank(&lo, rank_tol);
    Ok(FlatnessReport { rank_r, rank_lower, flat: rank_r == rank_lower })
}

/// First-order moments, optionally clamped to a box.
pub fn candidate_point(y: &PseudoMoments, nvars: usize, bounds: Option<&[(f64, f64)]>) -> Result<Vec<f64>> {
    (0..nvars)
        .map(|i| {
            let v = y.get(&Monomial::var(nvars, i))?;
            Ok(match bounds {
                Some(b) => v.clamp(b[i].0, b[i].1),
                None => v,
            })
        })
        .collect()
}

/// Polynomial optimisation problem `min p(x)` subject to `gⱼ(x) ≥ 0`,
/// `Gⱼ(x) ⪰ 0` and optionally one arrow-structured PMI.
#[derive(Clone, Debug)]
pub struct Pop {
    pub nvars: usize,
    pub var_names: Vec<String>,
    pub objective: Polynomial,
    pub scalar_constraints: Vec<Polynomial>,
    pub matrix_constraints: Vec<PolyMatrix>,
    pub arrow: Option<ArrowStructure>,
}

impl Pop {
    pub fn new(objective: Polynomial) -> Self {
        let nvars = objective.nvars();
        Pop {
            nvars,
            var_names: (0..nvars).map(|i| format!("x{}", i + 1)).collect(),
            objective,
            scalar_constraints: Vec::new(),
            matrix_constraints: Vec::new(),
            arrow: None,
        }
    }

    /// Smallest admissible relaxation order.
    pub fn r_min(&self) -> u32 {
        let half = |d: u32| d.div_ceil(2);
        let mut r = half(self.objective.degree()).max(1);
        for g in &self.scalar_constraints {
            r = r.max(half(g.degree()));
        }
        for g in &self.matrix_constraints {
            r = r.max(half(g.degree()));
        }
        if let Some(a) = &self.arrow {
            r = r.max(half(a.assemble().degree()));
        }
        r
    }

    /// Is `x` feasible up to `tol`?
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> Result<bool> {
        for g in &self.scalar_constraints {
            if g.eval(x)? < -tol {
                return Ok(false);
            }
        }
        for g in &self.matrix_constraints {
            if min_eigenvalue(&g.eval(x)?) < -tol {
                return Ok(false);
            }
        }
        if let Some(a) = &self.arrow {
            if min_eigenvalue(&a.evaluate(x)?.assemble()) < -tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Which hierarchy a relaxation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hierarchy {
    Standard,
    ArrowPosterior,
}

#[derive(Clone, Debug)]
pub struct RelaxationOptions {
    pub r: u32,
    pub basis: BasisKind,
    /// Project rank-deficient blocks and eliminate interface variables.
    pub projection: bool,
    /// Appends `ρ² − ‖x‖² ≥ 0`.
    pub ball_radius: Option<f64>,
    /// Points at which `Aₖ(x) ⪰ 0` and `Γ(x) ⪰ 0` are checked before building
    /// the decomposed hierarchy.
    pub assumption_samples: Vec<Vec<f64>>,
}

impl RelaxationOptions {
    pub fn new(r: u32) -> Self {
        RelaxationOptions { r, basis: BasisKind::Standard, projection: true, ball_radius: None, assumption_samples: Vec::new() }
    }

    pub fn basis(mut self, kind: BasisKind) -> Self {
        self.basis = kind;
        self
    }

    pub fn projection(mut self, on: bool) -> Self {
        self.projection = on;
        self
    }
}

/// Bookkeeping of the decomposed localizing blocks.
#[derive(Clone, Debug)]
pub struct AdLayout {
    /// `L = |b_{r−r_G}|`.
    pub l: usize,
    pub localizing_basis: MonomialBasis,
    pub m: usize,
    pub parts: usize,
    pub projected: bool,
    /// Rows of the free interface matrix: `q` with projection, `n_I` without.
    pub border_rows: usize,
    /// Entries of `D̂` fixed by the lifted null-space conditions.
    pub eliminated: usize,
    /// Auxiliary index of the first interface variable.
    pub z_offset: usize,
    /// Auxiliary index of the first corner variable.
    pub c_offset: usize,
    pub structure: ArrowStructure,
    pub elimination: Option<EliminationMap>,
    /// Per block: number of rows of the (projected) top-left part.
    pub block_rows: Vec<usize>,
}

impl AdLayout {
    fn corner_len(&self) -> usize {
        let ml = self.m * self.l;
        ml * (ml + 1) / 2
    }

    /// Auxiliary index of `Z[(r, a), (c, b)]`.
    pub fn z_index(&self, r: usize, a: usize, c: usize, b: usize) -> usize {
        let ml = self.m * self.l;
        self.z_offset + (r * self.l + a) * ml + c * self.l + b
    }

    /// Auxiliary index of `Ĉₖ[u, v]` with `u ≤ v`.
    pub fn c_index(&self, k: usize, u: usize, v: usize) -> usize {
        self.c_offset + k * self.corner_len() + upper_index(self.m * self.l, u, v)
    }

    pub fn n_aux(&self) -> usize {
        let ml = self.m * self.l;
        self.border_rows * self.l * ml + (self.parts - 1) * self.corner_len()
    }

    /// Auxiliary values reproducing the lift `ℒ_y(D(x) ⊗ bbᵀ)`,
    /// `ℒ_y(Cₖ(x) ⊗ bbᵀ)` of per-atom certificates for an atomic measure.
    pub fn aux_from_measure(&self, atoms: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
        let mut aux = vec![0.0; self.n_aux()];
        let l = self.l;
        let m = self.m;
        for (x, &w) in atoms.iter().zip(weights) {
            let cert = constructive_certificate(&self.structure, x)?;
            let z = match &self.elimination {
                Some(elim) => {
                    let rhs = &cert.d - elim.offset.eval(x)?;
                    pinv(&elim.basis, RANK_TOL) * rhs
                }
                None => cert.d.clone(),
            };
            let bx: Vec<f64> = self.localizing_basis.elements.iter().map(|e| e.eval(x)).collect();
            for r in 0..self.border_rows {
                for c in 0..m {
                    let v = w * z[(r, c)];
                    if v == 0.0 {
                        continue;
                    }
                    for a in 0..l {
                        for b in 0..l {
                            aux[self.z_index(r, a, c, b) - self.z_offset] += v * bx[a] * bx[b];
                        }
                    }
                }
            }
            for (k, ck) in cert.c.iter().enumerate() {
                for c1 in 0..m {
                    for c2 in c1..m {
                        for a in 0..l {
                            for b in 0..l {
                                let (u, v) = (c1 * l + a, c2 * l + b);
                                if u > v {
                                    continue;
                                }
                                aux[self.c_index(k, u, v) - self.z_offset] += w * ck[(c1, c2)] * bx[a] * bx[b];
                            }
                        }
                    }
                }
            }
        }
        Ok(aux)
    }
}

/// Moment relaxation ready to be turned into a conic program.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub r: u32,
    pub r_g: u32,
    pub nvars: usize,
    pub hierarchy: Hierarchy,
    pub basis: BasisKind,
    pub projection: bool,
    pub indexer: MomentIndexer,
    pub aux_names: Vec<String>,
    pub objective: Polynomial,
    pub blocks: Vec<LmiTemplate>,
    pub ad: Option<AdLayout>,
    pub var_names: Vec<String>,
}

impl Relaxation {
    /// Number of moments after substituting `y_0 = 1`.
    pub fn n_moments(&self) -> usize {
        self.indexer.len() - 1
    }

    /// Total number of decision variables `n`.
    pub fn n_vars(&self) -> usize {
        self.n_moments() + self.aux_names.len()
    }

    /// Program variable of a moment, `None` for the constant.
    pub fn moment_var(&self, m: &Monomial) -> Option<usize> {
        self.indexer.index(m).and_then(|i| i.checked_sub(1))
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    /// Block multiset in the `count×size` notation, ascending by size.
    pub fn size_summary(&self) -> String {
        size_summary(&self.block_sizes())
    }

    /// Conic program with moments first (graded-lex, constant removed), then
    /// auxiliaries. Scalar blocks are merged into one leading diagonal block.
    pub fn to_program(&self) -> ConicProgram {
        let n_mom = self.n_moments();
        let mut prog = ConicProgram::new(self.n_vars());
        for (m, c) in self.objective.terms() {
            if let Some(v) = self.moment_var(m) {
                prog.c[v] += c;
            }
        }
        prog.var_names = self
            .indexer
            .monomials()
            .iter()
            .skip(1)
            .map(|m| format!("y[{}]", monomial_label(m, &self.var_names)))
            .chain(self.aux_names.iter().cloned())
            .collect();
        let scalars: Vec<&LmiTemplate> = self.blocks.iter().filter(|b| b.size == 1).collect();
        if !scalars.is_empty() {
            let mut diag = ProgramBlock::new(scalars.len(), true);
            let mut coeffs: BTreeMap<usize, Vec<Triplet>> = BTreeMap::new();
            for (t, blk) in scalars.iter().enumerate() {
                for (m, trip) in &blk.moments {
                    let v: f64 = trip.iter().map(|e| e.2).sum();
                    match self.moment_var(m) {
                        None => diag.constant.push((t, t, v)),
                        Some(var) => coeffs.entry(var).or_default().push((t, t, v)),
                    }
                }
                for (a, trip) in &blk.aux {
                    let v: f64 = trip.iter().map(|e| e.2).sum();
                    coeffs.entry(n_mom + a).or_default().push((t, t, v));
                }
            }
            diag.constant = merge(diag.constant);
            diag.coeffs = coeffs.into_iter().map(|(v, t)| (v, merge(t))).filter(|(_, t)| !t.is_empty()).collect();
            prog.blocks.push(diag);
        }
        for blk in self.blocks.iter().filter(|b| b.size > 1) {
            let mut pb = ProgramBlock::new(blk.size, false);
            let mut coeffs: BTreeMap<usize, Vec<Triplet>> = BTreeMap::new();
            for (m, trip) in &blk.moments {
                match self.moment_var(m) {
                    None => pb.constant.extend_from_slice(trip),
                    Some(var) => coeffs.entry(var).or_default().extend_from_slice(trip),
                }
            }
            for (a, trip) in &blk.aux {
                coeffs.entry(n_mom + a).or_default().extend_from_slice(trip);
            }
            pb.constant = merge(pb.constant);
            pb.coeffs = coeffs.into_iter().map(|(v, t)| (v, merge(t))).filter(|(_, t)| !t.is_empty()).collect();
            prog.blocks.push(pb);
        }
        prog
    }

    /// Objective value `Σ p_α y_α` at a program point.
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective
            .terms()
            .map(|(m, c)| c * self.moment_var(m).map_or(1.0, |v| z[v]))
            .sum()
    }

    /// Pseudo-moments read off a program point.
    pub fn moments(&self, z: &[f64]) -> PseudoMoments {
        let values = self
            .indexer
            .monomials()
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), if i == 0 { 1.0 } else { z[i - 1] }))
            .collect();
        PseudoMoments::Table { nvars: self.nvars, values }
    }

    /// Dense values of all blocks.
    pub fn evaluate_blocks(&self, y: &PseudoMoments, aux: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.blocks.iter().map(|b| b.evaluate(y, aux)).collect()
    }
}

/// Solved relaxation.
#[derive(Clone, Debug)]
pub struct RelaxationOutcome {
    pub solution: Solution,
    /// `Σ p_α y_α` at the computed moments, constant term included.
    pub lower_bound: f64,
    pub moments: PseudoMoments,
}

/// Converts, solves and reads back a relaxation.
pub fn solve_relaxation(rel: &Relaxation, backend: &Backend) -> Result<RelaxationOutcome> {
    let prog = rel.to_program();
    let solution = solve(&prog, backend)?;
    let lower_bound = rel.objective_value(&solution.z);
    let moments = rel.moments(&solution.z);
    Ok(RelaxationOutcome { solution, lower_bound, moments })
}

/// Formats sizes as `a×b` groups ascending by size.
pub fn size_summary(sizes: &[usize]) -> String {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in sizes {
        *counts.entry(s).or_default() += 1;
    }
    counts.iter().map(|(s, c)| format!("{c}×{s}")).collect::<Vec<_>>().join(", ")
}

fn monomial_label(m: &Monomial, names: &[String]) -> String {
    let parts: Vec<String> = m
        .exponents()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| if e == 1 { names[i].clone() } else { format!("{}^{e}", names[i]) })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

fn half_degree(d: u32) -> u32 {
    d.div_ceil(2)
}

/// Common blocks: moment matrix and scalar / extra matrix localizing blocks.
fn base_blocks(pop: &Pop, opts: &RelaxationOptions) -> Result<(Vec<LmiTemplate>, Vec<Polynomial>)> {
    let r = opts.r;
    let r_min = pop.r_min();
    if r < r_min {
        return Err(Error::DegreeOverflow { r, r_min });
    }
    let mut scalars = pop.scalar_constraints.clone();
    if let Some(rho) = opts.ball_radius {
        let mut g = Polynomial::constant(pop.nvars, rho * rho);
        for i in 0..pop.nvars {
            let xi = Polynomial::var(pop.nvars, i);
            g = &g - &(&xi * &xi);
        }
        scalars.push(g);
    }
    let mut blocks = vec![moment_template(&basis(pop.nvars, r, opts.basis))];
    for (j, g) in scalars.iter().enumerate() {
        let d = r - half_degree(g.degree());
        let mut t = scalar_localizing_template(g, &basis(pop.nvars, d, opts.basis));
        t.label = format!("scalar {}", j + 1);
        blocks.push(t);
    }
    for (j, g) in pop.matrix_constraints.iter().enumerate() {
        let d = r - half_degree(g.degree());
        let mut t = localizing_template(g, &basis(pop.nvars, d, opts.basis));
        t.label = format!("matrix {}", j + 1);
        blocks.push(t);
    }
    Ok((blocks, scalars))
}

fn finish(
    pop: &Pop,
    opts: &RelaxationOptions,
    hierarchy: Hierarchy,
    r_g: u32,
    blocks: Vec<LmiTemplate>,
    aux_names: Vec<String>,
    ad: Option<AdLayout>,
) -> Relaxation {
    let mut monos: Vec<Monomial> = Vec::new();
    for b in &blocks {
        monos.extend(b.moments.keys().cloned());
    }
    monos.extend(pop.objective.terms().map(|(m, _)| m.clone()));
    Relaxation {
        r: opts.r,
        r_g,
        nvars: pop.nvars,
        hierarchy,
        basis: opts.basis,
        projection: opts.projection && ad.as_ref().map_or(false, |a| a.projected),
        indexer: MomentIndexer::new(pop.nvars, monos),
        aux_names,
        objective: pop.objective.clone(),
        blocks,
        ad,
        var_names: pop.var_names.clone(),
    }
}

/// Standard hierarchy: `M_r(y) ⪰ 0` and one localizing block per constraint.
/// The arrow PMI, if present, enters assembled.
pub fn build_standard(pop: &Pop, opts: &RelaxationOptions) -> Result<Relaxation> {
    let (mut blocks, _) = base_blocks(pop, opts)?;
    let mut r_g = 0;
    if let Some(arrow) = &pop.arrow {
        let g = arrow.assemble();
        r_g = half_degree(g.degree());
        let mut t = localizing_template(&g, &basis(pop.nvars, opts.r - r_g, opts.basis));
        t.label = "pmi".into();
        blocks.push(t);
    }
    Ok(finish(pop, opts, Hierarchy::Standard, r_g, blocks, Vec::new(), None))
}

/// Arrow-decomposed posterior hierarchy: the localizing block of the arrow
/// PMI is replaced by `p` bordered blocks coupled through `D̂` (or its reduced
/// form `Z`) and the corner splits `Ĉₖ`.
pub fn build_ad_posterior(pop: &Pop, opts: &RelaxationOptions) -> Result<Relaxation> {
    let arrow = pop
        .arrow
        .as_ref()
        .ok_or_else(|| Error::Model("the decomposed hierarchy needs an arrow-structured constraint".into()))?;
    if arrow.p() <= 1 {
        return build_standard(pop, opts);
    }
    for x in &opts.assumption_samples {
        let num = arrow.evaluate(x)?;
        for (k, a) in num.a.iter().enumerate() {
            let lam = min_eigenvalue(a);
            if lam < -1e-8 * (1.0 + a.amax()) {
                return Err(Error::AssumptionViolated(format!("A_{} has eigenvalue {lam:.3e} at a sample", k + 1)));
            }
        }
        let lam = min_eigenvalue(&num.gamma);
        if lam < -1e-8 * (1.0 + num.gamma.amax()) {
            return Err(Error::AssumptionViolated(format!("Γ has eigenvalue {lam:.3e} at a sample")));
        }
    }
    let (mut blocks, _) = base_blocks(pop, opts)?;
    let r_g = half_degree(arrow.assemble().degree());
    let lb = basis(pop.nvars, opts.r - r_g, opts.basis);
    let l = lb.len();
    let m = arrow.m;
    let nvars = pop.nvars;
    let dec = decompose_lmi(arrow);
    let p = dec.p();

    struct Part {
        a: PolyMatrix,
        border: PolyMatrix,
        coeff: DMatrix<f64>,
        corner: Corner,
    }
    let (parts, border_rows, elimination, eliminated) = if opts.projection {
        let bases = space_bases(&dec, RANK_TOL);
        let elim = eliminate(&dec, &bases, RANK_TOL)?;
        let proj = project_lmi(&dec, &bases, &elim)?;
        let cond = lifted_nullspace_conditions(&elim, l, m, RANK_TOL);
        let parts: Vec<Part> = proj
            .into_iter()
            .map(|b| Part { a: b.a, border: b.border, coeff: b.z_coeff, corner: b.corner })
            .collect();
        (parts, elim.q, Some(elim), cond.eliminated)
    } else {
        let parts: Vec<Part> = dec
            .blocks
            .iter()
            .map(|b| Part { a: b.a.clone(), border: b.b.clone(), coeff: b.pi.clone(), corner: b.corner })
            .collect();
        (parts, dec.layout.n_i, None, 0)
    };

    let layout = AdLayout {
        l,
        localizing_basis: lb.clone(),
        m,
        parts: p,
        projected: opts.projection,
        border_rows,
        eliminated,
        z_offset: 0,
        c_offset: border_rows * l * m * l,
        structure: arrow.clone(),
        elimination,
        block_rows: parts.iter().map(|pt| pt.a.rows()).collect(),
    };

    let mut aux_names = vec![String::new(); layout.n_aux()];
    let dname = if opts.projection { "z" } else { "d" };
    for r in 0..border_rows {
        for a in 0..l {
            for c in 0..m {
                for b in 0..l {
                    aux_names[layout.z_index(r, a, c, b)] = format!("{dname}[{},{}]", r * l + a, c * l + b);
                }
            }
        }
    }
    for k in 0..p - 1 {
        for u in 0..m * l {
            for v in u..m * l {
                aux_names[layout.c_index(k, u, v)] = format!("c{}[{u},{v}]", k + 1);
            }
        }
    }

    let zero_corner = PolyMatrix::symmetric(m, nvars);
    for (k, part) in parts.iter().enumerate() {
        let corner_poly = match part.corner {
            Corner::Free(_) => &zero_corner,
            Corner::Last => &dec.gamma,
        };
        let g = PolyMatrix::bordered(&part.a, &part.border, corner_poly);
        let mut t = localizing_template(&g, &lb);
        t.label = format!("ad block {}", k + 1);
        let s = part.a.rows();
        for row in 0..s {
            for r in 0..border_rows {
                let x = part.coeff[(row, r)];
                if x == 0.0 {
                    continue;
                }
                for a in 0..l {
                    for c in 0..m {
                        for b in 0..l {
                            t.add_aux(layout.z_index(r, a, c, b), row * l + a, (s + c) * l + b, x);
                        }
                    }
                }
            }
        }
        let base = s * l;
        for u in 0..m * l {
            for v in u..m * l {
                match part.corner {
                    Corner::Free(i) => t.add_aux(layout.c_index(i, u, v), base + u, base + v, 1.0),
                    Corner::Last => {
                        for i in 0..p - 1 {
                            t.add_aux(layout.c_index(i, u, v), base + u, base + v, -1.0);
                        }
                    }
                }
            }
        }
        t.compact();
        blocks.push(t);
    }
    Ok(finish(pop, opts, Hierarchy::ArrowPosterior, r_g, blocks, aux_names, Some(layout)))
}

/// Builds the requested hierarchy.
pub fn build(pop: &Pop, opts: &RelaxationOptions, hierarchy: Hierarchy) -> Result<Relaxation> {
    match hierarchy {
        Hierarchy::Standard => build_standard(pop, opts),
        Hierarchy::ArrowPosterior => build_ad_posterior(pop, opts),
    }
}
