//! Moment relaxations of small polynomial problems with known optima.

use arrowsos::momentsos::{build_standard, candidate_point, flatness, solve_relaxation, Pop, PseudoMoments, RelaxationOptions};
use arrowsos::polymat::{BasisKind, PolyMatrix, Polynomial};
use arrowsos::sdpcore::Backend;

fn bound(pop: &Pop, r: u32) -> (f64, Vec<f64>) {
    let rel = build_standard(pop, &RelaxationOptions::new(r)).unwrap();
    let out = solve_relaxation(&rel, &Backend::default()).unwrap();
    let x = candidate_point(&out.moments, pop.nvars, None).unwrap();
    (out.lower_bound, x)
}

#[test]
fn interval_minimum_of_a_linear_objective() {
    let x = Polynomial::var(1, 0);
    let mut pop = Pop::new(x.clone());
    pop.scalar_constraints.push(&Polynomial::constant(1, 1.0) - &(&x * &x));
    let (lb, cand) = bound(&pop, 1);
    assert!((lb + 1.0).abs() < 1e-6, "{lb}");
    assert!((cand[0] + 1.0).abs() < 1e-3, "{cand:?}");
}

#[test]
fn disc_minimum_of_a_linear_objective() {
    let (x, y) = (Polynomial::var(2, 0), Polynomial::var(2, 1));
    let mut pop = Pop::new(Polynomial::affine(0.0, &[-1.0, -1.0]));
    pop.scalar_constraints.push(&(&Polynomial::constant(2, 1.0) - &(&x * &x)) - &(&y * &y));
    let (lb, cand) = bound(&pop, 1);
    assert!((lb + 2f64.sqrt()).abs() < 1e-6, "{lb}");
    let h = 0.5f64.sqrt();
    assert!((cand[0] - h).abs() < 1e-3 && (cand[1] - h).abs() < 1e-3, "{cand:?}");
}

#[test]
fn matrix_constraint_bounds_the_off_diagonal() {
    // [[1, x], [x, 1]] ⪰ 0 is |x| ≤ 1.
    let mut g = PolyMatrix::zeros(2, 2, 1);
    g.set(0, 0, Polynomial::constant(1, 1.0));
    g.set(1, 1, Polynomial::constant(1, 1.0));
    g.set(0, 1, Polynomial::var(1, 0));
    g.set(1, 0, Polynomial::var(1, 0));
    let mut pop = Pop::new(Polynomial::var(1, 0));
    pop.matrix_constraints.push(g);
    let (lb, _) = bound(&pop, 1);
    assert!((lb + 1.0).abs() < 1e-6, "{lb}");
}

#[test]
fn nonconvex_quartic_is_exact_at_order_two() {
    // min x⁴ − 3x² on [-2, 2]: the global minimum −9/4 sits at x = ±√1.5.
    let x = Polynomial::var(1, 0);
    let x2 = &x * &x;
    let obj = &(&x2 * &x2) - &(&x2 * &Polynomial::constant(1, 3.0));
    let mut pop = Pop::new(obj);
    pop.scalar_constraints.push(&Polynomial::constant(1, 4.0) - &x2);
    let (lb, _) = bound(&pop, 2);
    assert!((lb + 2.25).abs() < 1e-5, "{lb}");
}

#[test]
fn dirac_moments_are_flat_and_return_their_atom() {
    let p = vec![0.3, -0.7, 1.1];
    let y = PseudoMoments::dirac(p.clone());
    for r in 1..=3 {
        let rep = flatness(&y, 3, r, 1, BasisKind::Standard, 1e-9).unwrap();
        assert_eq!((rep.rank_r, rep.rank_lower, rep.flat), (1, 1, true));
    }
    assert_eq!(candidate_point(&y, 3, None).unwrap(), p);
    let clamped = candidate_point(&y, 3, Some(&[(0.0, 1.0); 3])).unwrap();
    assert_eq!(clamped, vec![0.3, 0.0, 1.0]);
}

#[test]
fn two_atoms_are_not_flat_at_order_one() {
    let y = PseudoMoments::atomic(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let rep = flatness(&y, 1, 1, 1, BasisKind::Standard, 1e-9).unwrap();
    assert_eq!((rep.rank_r, rep.rank_lower, rep.flat), (2, 1, false));
}
