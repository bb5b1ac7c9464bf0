//! Dense linear-algebra helpers shared by the decomposition and solver code.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for an empty matrix).
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Thin singular value decomposition `A = U·diag(σ)·Vᵀ` with `σ` sorted in
/// descending order.
///
/// One-sided Jacobi rotations keep small singular values accurate on
/// rank-deficient inputs, where the bidiagonal QR iteration in nalgebra 0.33
/// can return factors whose product is visibly off. Columns of `U` that
/// belong to a zero singular value are left at zero.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut uu = DMatrix::zeros(m, n);
    let mut vv = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (c, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 0.0 {
            uu.set_column(c, &(u.column(j) / s));
        }
        vv.set_column(c, &v.column(j));
        sigma.push(s);
    }
    Svd { u: uu, sigma, v: vv }
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    svd(a).sigma
}

/// Spectral norm of a matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// `true` when the smallest eigenvalue is at least `-tol·(1 + ‖A‖₂)`.
pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol * (1.0 + spectral_norm(a))
}

/// Moore–Penrose pseudoinverse with singular values below `rel_tol·σ_max` dropped.
pub fn pinv(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let f = svd(a);
    let cut = rel_tol * f.sigma[0];
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in f.sigma.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += f.v.column(k) * f.u.column(k).transpose() * (1.0 / s);
        }
    }
    out
}

/// Numerical rank with the relative threshold `rel_tol·σ_max`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = singular_values(a);
    let smax = sv[0];
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal bases of the range and the null space of a symmetric matrix,
/// split at `rel_tol·|λ|_max`.
pub fn range_null_split(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
    }
    let (vals, vecs) = sym_eigen(a);
    let lmax = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cut = rel_tol * lmax;
    let range: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > cut && lmax > 0.0).collect();
    let null: Vec<usize> = (0..n).filter(|i| !range.contains(i)).collect();
    (vecs.select_columns(&range), vecs.select_columns(&null))
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases of equal dimension.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // The sine of the largest angle is ‖(I − AAᵀ)B‖₂, which stays accurate
    // for tiny angles where acos of the cosines would not.
    let resid = b - a * (a.transpose() * b);
    spectral_norm(&resid).min(1.0).asin()
}

/// Orthonormal basis of `Null(A)` for a general (rectangular) matrix.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let rows = row_space(a, rel_tol);
    orthogonal_complement(&rows)
}

/// Orthonormal basis (as columns) of the row space of `a`.
pub fn row_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, 0);
    }
    let f = svd(a);
    let smax = f.sigma[0];
    let keep = f.sigma.iter().take_while(|&&s| smax > 0.0 && s > rel_tol * smax).count();
    f.v.columns(0, keep).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `q`.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let proj = DMatrix::identity(n, n) - q * q.transpose();
    let (vals, vecs) = sym_eigen(&proj);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    vecs.select_columns(&keep)
}
