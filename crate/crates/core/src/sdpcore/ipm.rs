//! Infeasible-start primal-dual interior-point method with the HKM search
//! direction and Mehrotra predictor-corrector steps.
//!
//! The LMI program `min cᵀz, S = F₀ + Σ zᵢFᵢ ⪰ 0` is paired with its
//! conjugate `max −⟨F₀, X⟩, ⟨Fᵢ, X⟩ = cᵢ, X ⪰ 0`. Each iteration solves the
//! Schur complement system `M Δz = h` with `Mᵢⱼ = ⟨Fᵢ, X Fⱼ S⁻¹⟩`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{add_triplets, ConicProgram, Solution, Status, Triplet};
use crate::error::Result;
use crate::linalg::sym_eigen;

/// Tuning knobs of the interior-point method.
#[derive(Clone, Debug)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility tolerance.
    pub feas_tol: f64,
    /// Fraction of the distance to the boundary taken per step.
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iter: 150,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            step_fraction: 0.95,
            verbose: false,
        }
    }
}

struct DenseBlk {
    n: usize,
    f0: DMatrix<f64>,
    vars: Vec<usize>,
    upper: Vec<Vec<Triplet>>,
    full: Vec<Vec<Triplet>>,
    rows: Vec<Vec<usize>>,
    nnz_suffix: Vec<usize>,
}

struct DiagBlk {
    n: usize,
    f0: Vec<f64>,
    vars: Vec<usize>,
    entries: Vec<Vec<(usize, f64)>>,
    by_row: Vec<Vec<(usize, f64)>>,
}

enum Blk {
    Dense(DenseBlk),
    Diag(DiagBlk),
}

#[derive(Clone)]
enum Mat {
    Dense(DMatrix<f64>),
    Diag(Vec<f64>),
}

impl Mat {
    fn dot(&self, o: &Mat) -> f64 {
        match (self, o) {
            (Mat::Dense(a), Mat::Dense(b)) => a.dot(b),
            (Mat::Diag(a), Mat::Diag(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => unreachable!("block kinds always agree"),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    fn axpy(&mut self, a: f64, o: &Mat) {
        match (self, o) {
            (Mat::Dense(x), Mat::Dense(y)) => *x += y * a,
            (Mat::Diag(x), Mat::Diag(y)) => x.iter_mut().zip(y).for_each(|(x, y)| *x += a * y),
            _ => unreachable!("block kinds always agree"),
        }
    }
}

fn build_blocks(p: &ConicProgram) -> Vec<Blk> {
    p.blocks
        .iter()
        .map(|b| {
            if b.diagonal {
                let mut f0 = vec![0.0; b.size];
                for &(i, _, v) in &b.constant {
                    f0[i] += v;
                }
                let mut by_row = vec![Vec::new(); b.size];
                let mut vars = Vec::new();
                let mut entries = Vec::new();
                for (v, t) in &b.coeffs {
                    let e: Vec<(usize, f64)> = t.iter().map(|&(i, _, x)| (i, x)).collect();
                    for &(i, x) in &e {
                        by_row[i].push((*v, x));
                    }
                    vars.push(*v);
                    entries.push(e);
                }
                Blk::Diag(DiagBlk { n: b.size, f0, vars, entries, by_row })
            } else {
                let mut f0 = DMatrix::zeros(b.size, b.size);
                add_triplets(&mut f0, &b.constant, 1.0);
                let mut vars = Vec::new();
                let mut upper = Vec::new();
                let mut full = Vec::new();
                let mut rows = Vec::new();
                for (v, t) in &b.coeffs {
                    let mut f = Vec::with_capacity(2 * t.len());
                    for &(i, j, x) in t {
                        f.push((i, j, x));
                        if i != j {
                            f.push((j, i, x));
                        }
                    }
                    let mut r: Vec<usize> = f.iter().map(|e| e.0).collect();
                    r.sort_unstable();
                    r.dedup();
                    vars.push(*v);
                    upper.push(t.clone());
                    full.push(f);
                    rows.push(r);
                }
                let mut nnz_suffix = vec![0; upper.len() + 1];
                for k in (0..upper.len()).rev() {
                    nnz_suffix[k] = nnz_suffix[k + 1] + upper[k].len();
                }
                Blk::Dense(DenseBlk { n: b.size, f0, vars, upper, full, rows, nnz_suffix })
            }
        })
        .collect()
}

fn fro_upper(t: &[Triplet]) -> f64 {
    t.iter()
        .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
        .sum::<f64>()
        .sqrt()
}

fn inner_upper(t: &[Triplet], m: &DMatrix<f64>) -> f64 {
    t.iter()
        .map(|&(i, j, v)| if i == j { v * m[(i, i)] } else { v * (m[(i, j)] + m[(j, i)]) })
        .sum()
}

struct Problem<'a> {
    p: &'a ConicProgram,
    blks: Vec<Blk>,
}

impl<'a> Problem<'a> {
    /// `A(X)ᵢ = Σ_b ⟨Fᵢᵇ, Xᵇ⟩`.
    fn apply_a(&self, x: &[Mat]) -> Vec<f64> {
        let mut out = vec![0.0; self.p.n_vars];
        for (b, xb) in self.blks.iter().zip(x) {
            match (b, xb) {
                (Blk::Dense(d), Mat::Dense(xm)) => {
                    for (k, &v) in d.vars.iter().enumerate() {
                        out[v] += inner_upper(&d.upper[k], xm);
                    }
                }
                (Blk::Diag(d), Mat::Diag(xv)) => {
                    for (k, &v) in d.vars.iter().enumerate() {
                        out[v] += d.entries[k].iter().map(|&(i, a)| a * xv[i]).sum::<f64>();
                    }
                }
                _ => unreachable!(),
            }
        }
        out
    }

    /// `Σ zᵢ Fᵢ` (without `F₀`).
    fn apply_at(&self, z: &[f64]) -> Vec<Mat> {
        self.blks
            .iter()
            .map(|b| match b {
                Blk::Dense(d) => {
                    let mut m = DMatrix::zeros(d.n, d.n);
                    for (k, &v) in d.vars.iter().enumerate() {
                        add_triplets(&mut m, &d.upper[k], z[v]);
                    }
                    Mat::Dense(m)
                }
                Blk::Diag(d) => {
                    let mut m = vec![0.0; d.n];
                    for (k, &v) in d.vars.iter().enumerate() {
                        for &(i, a) in &d.entries[k] {
                            m[i] += a * z[v];
                        }
                    }
                    Mat::Diag(m)
                }
            })
            .collect()
    }

    fn f0(&self) -> Vec<Mat> {
        self.blks
            .iter()
            .map(|b| match b {
                Blk::Dense(d) => Mat::Dense(d.f0.clone()),
                Blk::Diag(d) => Mat::Diag(d.f0.clone()),
            })
            .collect()
    }

    /// Schur complement `Mᵢⱼ = Σ_b ⟨Fᵢ, X Fⱼ S⁻¹⟩`.
    fn schur(&self, x: &[Mat], sinv: &[Mat]) -> DMatrix<f64> {
        let m = self.p.n_vars;
        let mut out = DMatrix::zeros(m, m);
        for ((b, xb), sb) in self.blks.iter().zip(x).zip(sinv) {
            match (b, xb, sb) {
                (Blk::Dense(d), Mat::Dense(xm), Mat::Dense(si)) => schur_dense(d, xm, si, &mut out),
                (Blk::Diag(d), Mat::Diag(xv), Mat::Diag(si)) => {
                    for (row, list) in d.by_row.iter().enumerate() {
                        let w = xv[row] * si[row];
                        for &(vi, ai) in list {
                            for &(vj, aj) in list {
                                out[(vi, vj)] += w * ai * aj;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        out
    }
}

fn schur_dense(d: &DenseBlk, x: &DMatrix<f64>, sinv: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    let n = d.n;
    let nv = d.vars.len();
    for jj in 0..nv {
        let rows = &d.rows[jj];
        let c = rows.len();
        // G = (Fⱼ S⁻¹) restricted to the nonzero rows of Fⱼ.
        let mut g = DMatrix::zeros(c, n);
        for &(a, b, v) in &d.full[jj] {
            let ra = rows.binary_search(&a).expect("row listed");
            for col in 0..n {
                g[(ra, col)] += v * sinv[(b, col)];
            }
        }
        let remaining = d.nnz_suffix[jj];
        let vj = d.vars[jj];
        if 2 * remaining < n * n {
            // Sparse path: evaluate only the entries of T = X Fⱼ S⁻¹ that are needed.
            let entry = |a: usize, b: usize| -> f64 {
                let xa = x.column(a);
                let gb = g.column(b);
                let mut s = 0.0;
                for (k, &r) in rows.iter().enumerate() {
                    s += xa[r] * gb[k];
                }
                s
            };
            for ii in jj..nv {
                let mut acc = 0.0;
                for &(a, b, v) in &d.upper[ii] {
                    acc += if a == b { v * entry(a, a) } else { v * (entry(a, b) + entry(b, a)) };
                }
                let vi = d.vars[ii];
                out[(vi, vj)] += acc;
                if vi != vj {
                    out[(vj, vi)] += acc;
                }
            }
        } else {
            let xs = x.select_columns(rows);
            let t = &xs * &g;
            for ii in jj..nv {
                let acc = inner_upper(&d.upper[ii], &t);
                let vi = d.vars[ii];
                out[(vi, vj)] += acc;
                if vi != vj {
                    out[(vj, vi)] += acc;
                }
            }
        }
    }
}

fn chol_inverse(m: &Mat) -> Option<Mat> {
    match m {
        Mat::Dense(a) => {
            let ch = Cholesky::new(a.clone())?;
            let inv = ch.inverse();
            Some(Mat::Dense((&inv + inv.transpose()) * 0.5))
        }
        Mat::Diag(v) => {
            if v.iter().all(|&x| x > 0.0) {
                Some(Mat::Diag(v.iter().map(|x| 1.0 / x).collect()))
            } else {
                None
            }
        }
    }
}

/// Largest `α ≤ 1` keeping `M + α·dM` positive definite, scaled by `tau`.
fn max_step(m: &Mat, dm: &Mat, tau: f64) -> f64 {
    let lmin = match (m, dm) {
        (Mat::Dense(a), Mat::Dense(d)) => {
            let Some(ch) = Cholesky::new(a.clone()) else { return 0.0 };
            let l = ch.l();
            let linv = match l.clone().try_inverse() {
                Some(v) => v,
                None => return 0.0,
            };
            let w = &linv * d * linv.transpose();
            sym_eigen(&w).0.first().copied().unwrap_or(0.0)
        }
        (Mat::Diag(a), Mat::Diag(d)) => a.iter().zip(d).map(|(x, y)| y / x).fold(f64::INFINITY, f64::min),
        _ => unreachable!(),
    };
    if lmin >= 0.0 {
        1.0
    } else {
        (tau * (-1.0 / lmin)).min(1.0)
    }
}

struct Dir {
    dz: Vec<f64>,
    dx: Vec<Mat>,
    ds: Vec<Mat>,
}

/// Solves for the HKM direction given the factored Schur matrix.
#[allow(clippy::too_many_arguments)]
fn direction(
    prob: &Problem,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    x: &[Mat],
    sinv: &[Mat],
    rp: &[f64],
    rd: &[Mat],
    sigma_mu: f64,
    corr: Option<(&[Mat], &[Mat])>,
) -> Dir {
    // Q = σμ S⁻¹ − X − (X R_d + ΔXₐ ΔSₐ) S⁻¹
    let mut q = Vec::with_capacity(x.len());
    for (k, (xb, sb)) in x.iter().zip(sinv).enumerate() {
        let qb = match (xb, sb, &rd[k]) {
            (Mat::Dense(xm), Mat::Dense(si), Mat::Dense(r)) => {
                let mut inner = xm * r;
                if let Some((dxa, dsa)) = corr {
                    if let (Mat::Dense(a), Mat::Dense(b)) = (&dxa[k], &dsa[k]) {
                        inner += a * b;
                    }
                }
                let mut qm = si * sigma_mu - xm - inner * si;
                qm = (&qm + qm.transpose()) * 0.5;
                Mat::Dense(qm)
            }
            (Mat::Diag(xv), Mat::Diag(si), Mat::Diag(r)) => {
                let mut qv = Vec::with_capacity(xv.len());
                for i in 0..xv.len() {
                    let mut inner = xv[i] * r[i];
                    if let Some((dxa, dsa)) = corr {
                        if let (Mat::Diag(a), Mat::Diag(b)) = (&dxa[k], &dsa[k]) {
                            inner += a[i] * b[i];
                        }
                    }
                    qv.push(sigma_mu * si[i] - xv[i] - inner * si[i]);
                }
                Mat::Diag(qv)
            }
            _ => unreachable!(),
        };
        q.push(qb);
    }
    let aq = prob.apply_a(&q);
    let h = DVector::from_iterator(rp.len(), aq.iter().zip(rp).map(|(a, r)| a - r));
    let dz = chol.solve(&h);
    let dz: Vec<f64> = dz.iter().copied().collect();
    let mut ds = prob.apply_at(&dz);
    for (d, r) in ds.iter_mut().zip(rd) {
        d.axpy(1.0, r);
    }
    let mut dx = Vec::with_capacity(x.len());
    for (k, qb) in q.iter().enumerate() {
        let v = match (qb, &x[k], &ds[k], &sinv[k]) {
            (Mat::Dense(qm), Mat::Dense(xm), Mat::Dense(dsm), Mat::Dense(si)) => {
                let core = xm * (dsm - match &rd[k] {
                    Mat::Dense(r) => r,
                    _ => unreachable!(),
                }) * si;
                let mut d = qm - core;
                d = (&d + d.transpose()) * 0.5;
                Mat::Dense(d)
            }
            (Mat::Diag(qv), Mat::Diag(xv), Mat::Diag(dsv), Mat::Diag(si)) => {
                let r = match &rd[k] {
                    Mat::Diag(r) => r,
                    _ => unreachable!(),
                };
                Mat::Diag((0..qv.len()).map(|i| qv[i] - xv[i] * (dsv[i] - r[i]) * si[i]).collect())
            }
            _ => unreachable!(),
        };
        dx.push(v);
    }
    Dir { dz, dx, ds }
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let dmax = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14;
    while reg <= 1e-5 {
        for i in 0..n {
            m[(i, i)] += reg * dmax;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

pub(super) fn solve(p: &ConicProgram, opts: &IpmOptions) -> Result<Solution> {
    let prob = Problem { p, blks: build_blocks(p) };
    let m = p.n_vars;
    let total_dim: usize = prob
        .blks
        .iter()
        .map(|b| match b {
            Blk::Dense(d) => d.n,
            Blk::Diag(d) => d.n,
        })
        .sum();
    let nn = total_dim.max(1) as f64;
    let c_norm = p.c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let f0 = prob.f0();
    let f0_norm = f0.iter().map(|b| b.norm_sq()).sum::<f64>().sqrt();

    // Starting point scaled to the data of each block.
    let mut x: Vec<Mat> = Vec::new();
    let mut s: Vec<Mat> = Vec::new();
    for (b, blk) in prob.blks.iter().zip(&p.blocks) {
        let n = blk.size as f64;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut eta: f64 = 10f64.max(n.sqrt());
        let f0n = fro_upper(&blk.constant);
        eta = eta.max(f0n);
        for (v, t) in &blk.coeffs {
            let fn_ = fro_upper(t);
            xi = xi.max(n * (1.0 + p.c[*v].abs()) / (1.0 + fn_));
            eta = eta.max(fn_);
        }
        match b {
            Blk::Dense(d) => {
                x.push(Mat::Dense(DMatrix::identity(d.n, d.n) * xi));
                s.push(Mat::Dense(DMatrix::identity(d.n, d.n) * eta));
            }
            Blk::Diag(d) => {
                x.push(Mat::Diag(vec![xi; d.n]));
                s.push(Mat::Diag(vec![eta; d.n]));
            }
        }
    }
    let mut z = vec![0.0; m];

    let mut status = Status::SolverFailure;
    let mut iter = 0;
    let mut best: Option<(f64, Vec<f64>, f64, f64)> = None;
    let tau = opts.step_fraction;

    loop {
        // Residuals and measures.
        let ax = prob.apply_a(&x);
        let rp: Vec<f64> = p.c.iter().zip(&ax).map(|(c, a)| c - a).collect();
        let atz = prob.apply_at(&z);
        let mut rd = f0.clone();
        for k in 0..rd.len() {
            rd[k].axpy(1.0, &atz[k]);
            rd[k].axpy(-1.0, &s[k]);
        }
        let mu = x.iter().zip(&s).map(|(a, b)| a.dot(b)).sum::<f64>() / nn;
        let pobj = p.objective(&z);
        let dobj = -f0.iter().zip(&x).map(|(a, b)| a.dot(b)).sum::<f64>();
        let pinf = rp.iter().map(|r| r * r).sum::<f64>().sqrt() / (1.0 + c_norm);
        let dinf = rd.iter().map(|r| r.norm_sq()).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let xnorm = x.iter().map(|b| b.norm_sq()).sum::<f64>().sqrt();
        let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if opts.verbose {
            eprintln!(
                "it {iter:3} pobj {pobj:+.8e} dobj {dobj:+.8e} gap {gap:.1e} pinf {pinf:.1e} dinf {dinf:.1e} mu {mu:.1e}"
            );
        }
        let merit = gap.max(pinf).max(dinf);
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, z.clone(), pobj, dobj));
        }
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            status = Status::Optimal;
            break;
        }
        // Certificates of infeasibility: an unbounded conjugate iterate with a
        // positive objective direction, or an LMI objective diverging to −∞.
        if xnorm > 1e10 && dobj / xnorm > 1e-8 && pinf * (1.0 + c_norm) / xnorm < 1e-8 {
            status = Status::Infeasible;
            break;
        }
        if znorm > 1e10 && -pobj / znorm > 1e-8 && dinf < 1e-6 {
            status = Status::Unbounded;
            break;
        }
        if iter >= opts.max_iter {
            break;
        }
        iter += 1;

        let Some(sinv) = s.iter().map(chol_inverse).collect::<Option<Vec<_>>>() else {
            break;
        };
        let mat = if m > 0 { prob.schur(&x, &sinv) } else { DMatrix::zeros(0, 0) };
        let Some(chol) = factor_schur(mat) else {
            break;
        };

        // Predictor.
        let aff = direction(&prob, &chol, &x, &sinv, &rp, &rd, 0.0, None);
        let ap = aff.dx.iter().zip(&x).map(|(d, xb)| max_step(xb, d, 1.0)).fold(1.0, f64::min);
        let ad = aff.ds.iter().zip(&s).map(|(d, sb)| max_step(sb, d, 1.0)).fold(1.0, f64::min);
        let mut mu_aff = 0.0;
        for k in 0..x.len() {
            let mut xa = x[k].clone();
            xa.axpy(ap, &aff.dx[k]);
            let mut sa = s[k].clone();
            sa.axpy(ad, &aff.ds[k]);
            mu_aff += xa.dot(&sa);
        }
        mu_aff /= nn;
        let mut sigma = (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0);
        if !sigma.is_finite() {
            sigma = 0.5;
        }

        // Corrector.
        let dir = direction(&prob, &chol, &x, &sinv, &rp, &rd, sigma * mu, Some((&aff.dx, &aff.ds)));
        let ap = dir.dx.iter().zip(&x).map(|(d, xb)| max_step(xb, d, tau)).fold(1.0, f64::min);
        let ad = dir.ds.iter().zip(&s).map(|(d, sb)| max_step(sb, d, tau)).fold(1.0, f64::min);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        for k in 0..x.len() {
            x[k].axpy(ap, &dir.dx[k]);
            s[k].axpy(ad, &dir.ds[k]);
        }
        for (zi, d) in z.iter_mut().zip(&dir.dz) {
            *zi += ad * d;
        }
    }

    let (merit, zb, pobj, dobj) = best.expect("at least one iterate");
    let (z_out, pobj, dobj) = if status == Status::Optimal {
        (z.clone(), p.objective(&z), dobj_of(&f0, &x))
    } else if matches!(status, Status::SolverFailure) && merit <= 1e-5 {
        status = Status::NearOptimal;
        (zb, pobj, dobj)
    } else {
        (zb, pobj, dobj)
    };
    let eigs = p
        .blocks
        .iter()
        .map(|b| {
            let mm = b.evaluate(&z_out);
            if b.diagonal {
                (0..b.size).map(|i| mm[(i, i)]).fold(f64::INFINITY, f64::min)
            } else {
                sym_eigen(&mm).0.first().copied().unwrap_or(f64::INFINITY)
            }
        })
        .collect();
    Ok(Solution {
        status,
        z: z_out,
        primal_obj: pobj,
        dual_obj: dobj,
        block_min_eigs: eigs,
        iterations: iter,
        wall_time: 0.0,
    })
}

fn dobj_of(f0: &[Mat], x: &[Mat]) -> f64 {
    -f0.iter().zip(x).map(|(a, b)| a.dot(b)).sum::<f64>()
}
