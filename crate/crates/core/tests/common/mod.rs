//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use arrowsos::arrowcore::ArrowStructure;
use arrowsos::momentsos::Pop;
use arrowsos::polymat::{Monomial, PolyMatrix, Polynomial};
use nalgebra::DMatrix;
use rand::Rng;

/// Small POP over the box `[-1, 1]^nx` with a 3×3 arrow PMI split into the
/// index sets `{0, 1}` and `{1, 2}` and a scalar corner. The constant part
/// is positive definite, so `x = 0` is strictly feasible.
pub fn small_arrow_pop<R: Rng>(rng: &mut R, nx: usize) -> Pop {
    let sets = vec![vec![0usize, 1], vec![1usize, 2]];
    let affine_sym = |rng: &mut R, set: &[usize], base: &DMatrix<f64>, spread: f64| {
        let mut out = PolyMatrix::zeros(3, 3, nx);
        for &i in set {
            for &j in set.iter().filter(|&&j| j >= i) {
                let coeffs: Vec<f64> = (0..nx).map(|_| rng.gen_range(-spread..spread)).collect();
                let p = Polynomial::affine(base[(i, j)], &coeffs);
                out.set(i, j, p.clone());
                out.set(j, i, p);
            }
        }
        out
    };
    let mut a_blocks = Vec::new();
    for set in &sets {
        let q = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let local = &q * q.transpose() + DMatrix::identity(2, 2) * 0.8;
        let mut base = DMatrix::zeros(3, 3);
        for (i, &gi) in set.iter().enumerate() {
            for (j, &gj) in set.iter().enumerate() {
                base[(gi, gj)] = local[(i, j)];
            }
        }
        a_blocks.push(affine_sym(rng, set, &base, 0.25));
    }
    let mut b = PolyMatrix::zeros(3, 1, nx);
    let mut b0 = DMatrix::zeros(3, 1);
    for i in 0..3 {
        b0[(i, 0)] = rng.gen_range(-1.0..1.0);
        let coeffs: Vec<f64> = (0..nx).map(|_| rng.gen_range(-0.5..0.5)).collect();
        b.set(i, 0, Polynomial::affine(b0[(i, 0)], &coeffs));
    }
    let a0: DMatrix<f64> = a_blocks.iter().fold(DMatrix::zeros(3, 3), |acc, a| acc + a.eval(&vec![0.0; nx]).unwrap());
    let schur = (b0.transpose() * a0.try_inverse().unwrap() * &b0)[(0, 0)];
    let g_coeffs: Vec<f64> = (0..nx).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let mut gamma = PolyMatrix::zeros(1, 1, nx);
    gamma.set(0, 0, Polynomial::affine(schur + rng.gen_range(0.2..0.8), &g_coeffs));
    let arrow = ArrowStructure::with_default_split(sets, a_blocks, &b, gamma).unwrap();
    arrow.validate(None, None).unwrap();

    let lin: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut objective = Polynomial::affine(0.0, &lin);
    let mut e = vec![0u32; nx];
    e[0] = 1;
    e[nx - 1] += 1;
    objective.add_term(Monomial::from_exponents(e), rng.gen_range(-0.5..0.5));
    let mut pop = Pop::new(objective);
    for i in 0..nx {
        let xi = Polynomial::var(nx, i);
        pop.scalar_constraints.push(&Polynomial::constant(nx, 1.0) - &(&xi * &xi));
    }
    pop.arrow = Some(arrow);
    pop
}

/// Minimum of the objective over the feasible points of a uniform grid on
/// `[-1, 1]^nx`. Any feasible grid point bounds the true optimum from above.
pub fn grid_minimum(pop: &Pop, steps: usize) -> f64 {
    let nx = pop.nvars;
    let arrow = pop.arrow.as_ref().expect("arrow constraint");
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; nx];
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| -1.0 + 2.0 * i as f64 / steps as f64).collect();
        let g = arrow.evaluate(&x).unwrap().assemble();
        if g.cholesky().is_some() {
            best = best.min(pop.objective.eval(&x).unwrap());
        }
        let mut d = 0;
        loop {
            if d == nx {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Rejection sample of a strictly feasible point.
pub fn feasible_point<R: Rng>(rng: &mut R, pop: &Pop) -> Vec<f64> {
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..pop.nvars).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if pop.is_feasible(&x, 0.0).unwrap() {
            return x;
        }
    }
    panic!("no feasible point found");
}
