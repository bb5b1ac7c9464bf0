//! Small conic programs with closed-form optima.

use arrowsos::sdpcore::{solve, verify, Backend, ConicProgram, ProgramBlock, Status};

fn solve_ok(prog: &ConicProgram) -> (f64, Vec<f64>) {
    let sol = solve(prog, &Backend::default()).unwrap();
    assert!(matches!(sol.status, Status::Optimal | Status::NearOptimal), "{:?}", sol.status);
    (sol.primal_obj, sol.z)
}

#[test]
fn two_by_two_lmi_attains_unit_eigenvalue_bound() {
    // min t  s.t. [[t, 1], [1, t]] ⪰ 0, optimum t = 1.
    let mut prog = ConicProgram::new(1);
    prog.c[0] = 1.0;
    let mut blk = ProgramBlock::new(2, false);
    blk.constant = vec![(0, 1, 1.0)];
    blk.coeffs.push((0, vec![(0, 0, 1.0), (1, 1, 1.0)]));
    prog.blocks.push(blk);
    let (obj, z) = solve_ok(&prog);
    assert!((obj - 1.0).abs() < 1e-6, "{obj}");
    assert!(verify(&prog, &z).unwrap().worst_violation < 1e-6);
}

#[test]
fn diagonal_block_is_a_linear_program() {
    // min -z0 - 2 z1  s.t. z0 ≥ 0, z1 ≥ 0, 4 - z0 - z1 ≥ 0, 3 - z1 ≥ 0.
    // Vertex optimum z = (1, 3) with value -7.
    let mut prog = ConicProgram::new(2);
    prog.c = vec![-1.0, -2.0];
    let mut blk = ProgramBlock::new(4, true);
    blk.constant = vec![(2, 2, 4.0), (3, 3, 3.0)];
    blk.coeffs.push((0, vec![(0, 0, 1.0), (2, 2, -1.0)]));
    blk.coeffs.push((1, vec![(1, 1, 1.0), (2, 2, -1.0), (3, 3, -1.0)]));
    prog.blocks.push(blk);
    let (obj, z) = solve_ok(&prog);
    assert!((obj + 7.0).abs() < 1e-6, "{obj}");
    assert!((z[0] - 1.0).abs() < 1e-4 && (z[1] - 3.0).abs() < 1e-4, "{z:?}");
}

#[test]
fn spectral_norm_of_a_fixed_matrix() {
    // min t  s.t. [[t I, A], [Aᵀ, t I]] ⪰ 0 gives ‖A‖₂; here A = [[3, 0], [4, 5]]
    // whose singular values are √45 and √5.
    let a = [[3.0, 0.0], [4.0, 5.0]];
    let mut prog = ConicProgram::new(1);
    prog.c[0] = 1.0;
    let mut blk = ProgramBlock::new(4, false);
    for i in 0..2 {
        for j in 0..2 {
            if a[i][j] != 0.0 {
                blk.constant.push((i, 2 + j, a[i][j]));
            }
        }
    }
    blk.coeffs.push((0, (0..4).map(|i| (i, i, 1.0)).collect()));
    prog.blocks.push(blk);
    let (obj, _) = solve_ok(&prog);
    assert!((obj - 45f64.sqrt()).abs() < 1e-6, "{obj}");
}
