//! Sparse multivariate polynomials, symmetric polynomial matrices, monomial
//! bases and Kronecker utilities.
//!
//! Monomials are ordered graded-lexicographically everywhere in the crate:
//! lower total degree first, and within a degree `x1` dominates `x2`, so the
//! degree-two block of a three-variable basis reads
//! `x1^2, x1*x2, x1*x3, x2^2, x2*x3, x3^2`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x^α`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    /// The constant monomial in `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// The monomial `x_i` (zero-based `i`).
    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn from_exponents(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Number of distinct variables appearing in the monomial.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&e| e > 0).count()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial with real coefficients. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The polynomial `x_i` (zero-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Affine form `c0 + Σ c_i x_i`.
    pub fn affine(c0: f64, coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, c0);
        for (i, &c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::var(n, i), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Adds `c·m` in place, pruning the term if it cancels to exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        assert_eq!(m.nvars(), self.nvars, "monomial arity mismatch");
        if c == 0.0 {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if *v == 0.0 {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, polynomial has {} variables",
                x.len(),
                self.nvars
            )));
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(x)).sum())
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).filter(|(_, c)| *c != 0.0).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Substitutes `x_i = a_i·s_i + b_i` and expands in the new variables `s`.
    pub fn affine_substitute(&self, a: &[f64], b: &[f64]) -> Polynomial {
        assert_eq!(a.len(), self.nvars);
        assert_eq!(b.len(), self.nvars);
        let n = self.nvars;
        let images: Vec<Polynomial> = (0..n)
            .map(|i| {
                let mut p = Polynomial::constant(n, b[i]);
                p.add_term(Monomial::var(n, i), a[i]);
                p
            })
            .collect();
        let mut out = Polynomial::zero(n);
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(n, *c);
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    t = &t * &images[i].pow(e);
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Re-embeds the polynomial into a space with more variables; variable
    /// `i` maps to `map[i]`.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Polynomial {
        let mut out = Polynomial::zero(nvars);
        for (m, c) in &self.terms {
            let mut e = vec![0; nvars];
            for (i, &k) in m.exponents().iter().enumerate() {
                e[map[i]] += k;
            }
            out.add_term(Monomial(e), *c);
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

/// Sparse matrix of polynomials. Symmetric matrices keep both triangles
/// stored so that `get(i, j)` and `get(j, i)` agree.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    symmetric: bool,
    entries: BTreeMap<(usize, usize), Polynomial>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            symmetric: false,
            entries: BTreeMap::new(),
        }
    }

    pub fn symmetric(size: usize, nvars: usize) -> Self {
        PolyMatrix {
            symmetric: true,
            ..Self::zeros(size, size, nvars)
        }
    }

    /// Constant matrix with the given numeric entries.
    pub fn from_dense(m: &DMatrix<f64>, nvars: usize) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols(), nvars);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    out.entries.insert((i, j), Polynomial::constant(nvars, m[(i, j)]));
                }
            }
        }
        out.symmetric = m.is_square() && out.is_symmetric_exact();
        out
    }

    /// Builds `Σ_γ x^γ G_γ` from its coefficient matrices.
    pub fn from_coefficients(rows: usize, cols: usize, nvars: usize, coeffs: &BTreeMap<Monomial, DMatrix<f64>>) -> Self {
        let mut out = Self::zeros(rows, cols, nvars);
        for (mono, mat) in coeffs {
            for i in 0..rows {
                for j in 0..cols {
                    let v = mat[(i, j)];
                    if v != 0.0 {
                        out.entry_mut(i, j).add_term(mono.clone(), v);
                    }
                }
            }
        }
        out.prune();
        out.symmetric = rows == cols && out.is_symmetric_exact();
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_symmetric_flag(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Polynomial> {
        self.entries.get(&(i, j))
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut Polynomial {
        let n = self.nvars;
        self.entries.entry((i, j)).or_insert_with(|| Polynomial::zero(n))
    }

    fn prune(&mut self) {
        self.entries.retain(|_, p| !p.is_zero());
    }

    /// Sets entry `(i, j)`; for symmetric matrices the mirror is set too.
    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        assert!(i < self.rows && j < self.cols, "entry ({i},{j}) out of range");
        assert_eq!(p.nvars(), self.nvars);
        if self.symmetric && i != j {
            self.set_raw(j, i, p.clone());
        }
        self.set_raw(i, j, p);
    }

    fn set_raw(&mut self, i: usize, j: usize, p: Polynomial) {
        if p.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), p);
        }
    }

    /// Adds `p` to entry `(i, j)` (and its mirror when symmetric).
    pub fn add_at(&mut self, i: usize, j: usize, p: &Polynomial) {
        assert!(i < self.rows && j < self.cols, "entry ({i},{j}) out of range");
        let cur = self.get(i, j).cloned().unwrap_or_else(|| Polynomial::zero(self.nvars));
        self.set(i, j, &cur + p);
    }

    /// Iterates over stored nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Polynomial)> {
        self.entries.iter().map(|(&(i, j), p)| (i, j, p))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn degree(&self) -> u32 {
        self.entries.values().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Exact coefficient-wise symmetry test.
    pub fn is_symmetric_exact(&self) -> bool {
        self.rows == self.cols
            && self
                .entries
                .iter()
                .all(|(&(i, j), p)| self.entries.get(&(j, i)).map_or(false, |q| q == p))
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (&(i, j), p) in &self.entries {
            out[(i, j)] = p.eval(x)?;
        }
        Ok(out)
    }

    /// Coefficient matrices `G_γ` with `G(x) = Σ_γ x^γ G_γ`.
    pub fn coefficients(&self) -> BTreeMap<Monomial, DMatrix<f64>> {
        let mut out: BTreeMap<Monomial, DMatrix<f64>> = BTreeMap::new();
        for (&(i, j), p) in &self.entries {
            for (m, c) in p.terms() {
                out.entry(m.clone())
                    .or_insert_with(|| DMatrix::zeros(self.rows, self.cols))[(i, j)] += c;
            }
        }
        out
    }

    /// Applies a numeric linear map coefficient-wise: `L·G(x)·R`.
    pub fn sandwich(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> PolyMatrix {
        assert_eq!(left.ncols(), self.rows);
        assert_eq!(right.nrows(), self.cols);
        let coeffs: BTreeMap<Monomial, DMatrix<f64>> = self
            .coefficients()
            .into_iter()
            .map(|(m, g)| (m, left * g * right))
            .collect();
        let mut out = PolyMatrix::from_coefficients(left.nrows(), right.ncols(), self.nvars, &coeffs);
        if self.symmetric && left.nrows() == right.ncols() && (left.transpose() - right).norm() == 0.0 {
            out.symmetrize_from_upper();
        }
        out
    }

    /// `Pᵀ G P` with the symmetric flag preserved.
    pub fn congruence(&self, p: &DMatrix<f64>) -> PolyMatrix {
        self.sandwich(&p.transpose(), p)
    }

    /// Overwrites the lower triangle by the upper one and marks the matrix symmetric.
    pub fn symmetrize_from_upper(&mut self) {
        assert_eq!(self.rows, self.cols);
        let upper: Vec<((usize, usize), Polynomial)> = self
            .entries
            .iter()
            .filter(|(&(i, j), _)| i <= j)
            .map(|(k, p)| (*k, p.clone()))
            .collect();
        self.entries.clear();
        self.symmetric = true;
        for ((i, j), p) in upper {
            self.set(i, j, p);
        }
    }

    pub fn transpose(&self) -> PolyMatrix {
        PolyMatrix {
            rows: self.cols,
            cols: self.rows,
            nvars: self.nvars,
            symmetric: self.symmetric,
            entries: self.entries.iter().map(|(&(i, j), p)| ((j, i), p.clone())).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        let mut out = self.clone();
        for p in out.entries.values_mut() {
            *p = p.scale(s);
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (&(i, j), p) in &other.entries {
            let cur = out.get(i, j).cloned().unwrap_or_else(|| Polynomial::zero(self.nvars));
            out.set_raw(i, j, &cur + p);
        }
        out.symmetric = self.symmetric && other.symmetric;
        Ok(out)
    }

    pub fn sub(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.add(&other.scale(-1.0))
    }

    fn check_same_shape(&self, other: &PolyMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols || self.nvars != other.nvars {
            return Err(Error::Dimension(format!(
                "{}x{} over {} vars vs {}x{} over {} vars",
                self.rows, self.cols, self.nvars, other.rows, other.cols, other.nvars
            )));
        }
        Ok(())
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(rows.len(), cols.len(), self.nvars);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                if let Some(p) = self.get(i, j) {
                    out.entries.insert((a, b), p.clone());
                }
            }
        }
        out.symmetric = self.symmetric && rows == cols;
        out
    }

    /// Places `self` into a `rows × cols` zero matrix at the given index lists.
    pub fn embed(&self, rows: usize, cols: usize, row_idx: &[usize], col_idx: &[usize]) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(rows, cols, self.nvars);
        for (&(i, j), p) in &self.entries {
            out.entries.insert((row_idx[i], col_idx[j]), p.clone());
        }
        out.symmetric = self.symmetric && rows == cols && row_idx == col_idx;
        out
    }

    /// Applies [`Polynomial::affine_substitute`] to every entry.
    pub fn affine_substitute(&self, a: &[f64], b: &[f64]) -> PolyMatrix {
        let mut out = self.clone();
        for p in out.entries.values_mut() {
            *p = p.affine_substitute(a, b);
        }
        out.prune();
        out
    }

    /// Re-embeds every entry into a larger variable space.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars,
            symmetric: self.symmetric,
            entries: self.entries.iter().map(|(k, p)| (*k, p.remap(nvars, map))).collect(),
        }
    }

    /// Stacks `[[tl, tr], [trᵀ, br]]` into one symmetric matrix.
    pub fn bordered(tl: &PolyMatrix, tr: &PolyMatrix, br: &PolyMatrix) -> PolyMatrix {
        let n = tl.rows;
        let m = br.rows;
        assert_eq!(tr.rows, n);
        assert_eq!(tr.cols, m);
        let mut out = PolyMatrix::symmetric(n + m, tl.nvars);
        for (&(i, j), p) in &tl.entries {
            out.entries.insert((i, j), p.clone());
        }
        for (&(i, j), p) in &tr.entries {
            out.entries.insert((i, n + j), p.clone());
            out.entries.insert((n + j, i), p.clone());
        }
        for (&(i, j), p) in &br.entries {
            out.entries.insert((n + i, n + j), p.clone());
        }
        out
    }
}

/// Kind of monomial basis.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum BasisKind {
    /// All monomials of degree at most `r`.
    Standard,
    /// Pure powers only: `1, x_i, x_i^2, …, x_i^r` ("no mixed terms").
    Nmt,
}

/// Ordered monomial basis `b_r(x)`.
#[derive(Clone, PartialEq, Debug)]
pub struct MonomialBasis {
    pub kind: BasisKind,
    pub nvars: usize,
    pub degree: u32,
    pub elements: Vec<Monomial>,
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Builds the standard or NMT basis of degree `r` in `nvars` variables.
pub fn basis(nvars: usize, r: u32, kind: BasisKind) -> MonomialBasis {
    let mut elements = Vec::new();
    match kind {
        BasisKind::Standard => {
            for d in 0..=r {
                let mut cur = vec![0u32; nvars];
                push_degree(&mut elements, &mut cur, 0, d);
            }
        }
        BasisKind::Nmt => {
            elements.push(Monomial::one(nvars));
            for d in 1..=r {
                for i in 0..nvars {
                    let mut e = vec![0; nvars];
                    e[i] = d;
                    elements.push(Monomial(e));
                }
            }
        }
    }
    MonomialBasis {
        kind,
        nvars,
        degree: r,
        elements,
    }
}

/// Enumerates exponent vectors of total degree `left` in descending lex order.
fn push_degree(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    let n = cur.len();
    if n == 0 {
        if left == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = left;
        out.push(Monomial(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        push_degree(out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

/// Binomial coefficient `C(n, k)` as an exact integer.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for r in 0..br {
                for c in 0..bc {
                    out[(i * br + r, j * bc + c)] = s * b[(r, c)];
                }
            }
        }
    }
    out
}

/// Column-major vectorisation `vec(A)`.
pub fn vec_of(a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.len(), 1, a.as_slice())
}
