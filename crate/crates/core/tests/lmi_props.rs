mod common;

use common::{rand_matrix, rand_pd, rand_system};
use proptest::prelude::*;
use r2d_core::lmi::{
    assemble_closedloop_analysis, assemble_corollary1_matched, assemble_corollary1_mismatched, assemble_lemma3,
    assemble_thm1_matched, assemble_thm1_mismatched, names, sample_contractions, schur_expand,
    verify_lemma2_elimination, Assignment, LmiProblem, StateLayout, Structure, Value, VarShape,
};
use r2d_core::numerics::{inverse, sym_inverse, Matrix, SymMatrix};
use r2d_core::sdp::{solve_feasibility, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_assignment(rng: &mut ChaCha8Rng, p: &LmiProblem) -> Assignment {
    let mut a = Assignment::new();
    for v in &p.variables {
        let value = match &v.shape {
            VarShape::Scalar => Value::Scalar(rng.gen_range(0.01..3.0)),
            VarShape::Full { rows, cols } => Value::Full(rand_matrix(rng, *rows, *cols, 2.0)),
            VarShape::Sym(n) => Value::Sym(rand_pd(rng, *n, 0.1)),
            VarShape::SymBlockDiag(orders) => {
                let n: usize = orders.iter().sum();
                let mut m = Matrix::zeros(n, n);
                let mut off = 0;
                for &b in orders {
                    m.set_block(off, off, rand_pd(rng, b, 0.1).as_matrix());
                    off += b;
                }
                Value::Sym(SymMatrix::symmetrize(&m))
            }
        };
        a.set(v.name.clone(), value);
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn assembled_inequalities_are_symmetric(seed: u64, full: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = rand_system(&mut rng, 2, true);
        let s = if full { Structure::Full } else { Structure::BlockDiagonal };
        let gain = rand_matrix(&mut rng, sys.q, sys.n(), 1.0);
        let m = &sys.modes[0];
        let problems = vec![
            assemble_thm1_matched(&sys, 0, 0.6, s).unwrap(),
            assemble_thm1_mismatched(&sys, 0, 1, &gain, 1.2, s).unwrap(),
            assemble_lemma3(&m.a, &m.a_d, 0.7, StateLayout::of(&sys), s).unwrap(),
        ];
        for p in problems {
            let a = random_assignment(&mut rng, &p);
            for c in &p.constraints {
                let v = c.eval(&a).unwrap();
                let asym = v.as_matrix().asymmetry();
                prop_assert!(asym <= 1e-12, "{}: {asym}", c.name);
            }
        }
    }

    #[test]
    fn corollary_is_thm1_without_delay_blocks(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = rand_system(&mut rng, 2, true).without_delay();
        let n = sys.n();
        let p = sys.p;
        let keep: Vec<usize> = (0..n).chain(2 * n..3 * n).chain(4 * n..4 * n + p).collect();
        let thm = assemble_thm1_matched(&sys, 1, 0.5, Structure::Full).unwrap();
        let cor = assemble_corollary1_matched(&sys, 1, 0.5, Structure::Full).unwrap();
        let a = random_assignment(&mut rng, &thm);
        prop_assert_eq!(
            thm.constraints[0].eval(&a).unwrap().principal(&keep),
            cor.constraints[0].eval(&a).unwrap()
        );
        let gain = rand_matrix(&mut rng, sys.q, n, 1.0);
        let thm = assemble_thm1_mismatched(&sys, 1, 0, &gain, 1.3, Structure::Full).unwrap();
        let cor = assemble_corollary1_mismatched(&sys, 1, 0, &gain, 1.3, Structure::Full).unwrap();
        let a = random_assignment(&mut rng, &thm);
        prop_assert_eq!(
            thm.constraints[0].eval(&a).unwrap().principal(&keep),
            cor.constraints[0].eval(&a).unwrap()
        );
    }

    #[test]
    fn elimination_is_sound(seed: u64, n in 2usize..=5, na in 1usize..=3, nb in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = rng.gen_range(0.1..3.0);
        let x0 = rand_pd(&mut rng, n, shift).scale(-1.0);
        let u = rand_matrix(&mut rng, n, na, 1.0);
        let w = rand_matrix(&mut rng, nb, n, 1.0);
        let eps = rng.gen_range(0.05..5.0);
        let samples = sample_contractions(na, nb, 1000, &mut rng);
        let c = verify_lemma2_elimination(&x0, &u, &w, eps, &samples).unwrap();
        if c.majorized_holds {
            prop_assert!(c.sampled_all_hold, "{c:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn schur_forms_agree(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = StateLayout {
            n1: rng.gen_range(1..=2),
            n2: rng.gen_range(1..=2),
            d_h: rng.gen_range(1..=3),
            d_v: rng.gen_range(1..=3),
        };
        let n = layout.n();
        let rate = rng.gen_range(0.2..1.8);
        let s = rng.gen_range(0.05..1.0);
        let a = rand_matrix(&mut rng, n, n, s);
        let a_d = rand_matrix(&mut rng, n, n, s);
        let p = rand_pd(&mut rng, n, 0.3);
        let q = rand_pd(&mut rng, n, 0.05).scale(rng.gen_range(0.01..0.5));
        let w = layout.delay_weights(rate);
        let three = assemble_closedloop_analysis(&a, &a_d, &p, &q, rate, &w).unwrap().lambda_max().unwrap();
        let two = schur_expand(&a, &a_d, &p, &q, rate, &w).unwrap().lambda_max().unwrap();
        if three.abs() > 1e-9 && two.abs() > 1e-9 {
            prop_assert_eq!(three < 0.0, two < 0.0, "{} vs {}", three, two);
        }
    }
}

/// Feasible matched solutions with zero uncertainty map, via `P = X⁻¹`,
/// `Q = Y⁻¹`, `K = W·X⁻¹`, to a negative definite analysis matrix.
#[test]
fn congruence_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = SolverConfig {
        restarts: 3,
        ..SolverConfig::default()
    };
    let mut solved = 0;
    for trial in 0..40 {
        if solved == 6 {
            break;
        }
        let mut sys = rand_system(&mut rng, 1, false);
        sys.modes[0].a = sys.modes[0].a.scale(0.5);
        sys.modes[0].a_d = sys.modes[0].a_d.scale(0.3);
        let alpha = 0.8;
        let prob = assemble_thm1_matched(&sys, 0, alpha, Structure::BlockDiagonal).unwrap();
        let rep = solve_feasibility(&prob, trial, &cfg).unwrap();
        if !rep.is_feasible() {
            continue;
        }
        solved += 1;
        let x = rep.assignment.sym(&names::x(0)).unwrap();
        let y = rep.assignment.sym(&names::y(0)).unwrap();
        let w = rep.assignment.full(&names::w(0)).unwrap();
        let p = sym_inverse(x).unwrap();
        let q = sym_inverse(y).unwrap();
        let k = w * &inverse(x.as_matrix()).unwrap();
        let m = &sys.modes[0];
        let a_cl = &m.a + &(&m.b * &k);
        let weights = StateLayout::of(&sys).delay_weights(alpha);
        let lm = assemble_closedloop_analysis(&a_cl, &m.a_d, &p, &q, alpha, &weights)
            .unwrap()
            .lambda_max()
            .unwrap();
        assert!(lm < 0.0, "trial {trial}: {lm}");
    }
    assert!(solved >= 3, "only {solved} feasible instances");
}
