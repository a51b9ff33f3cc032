mod common;

use common::rand_system;
use proptest::prelude::*;
use r2d_core::model::{uncertainty_gain, BoundaryConditions, UncertaintyRealization};
use r2d_core::numerics::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn zero_uncertainty_is_nominal(seed: u64, modes in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = rand_system(&mut rng, modes, true);
        for k in 0..modes {
            let r = sys.realize_uncertain_matrices(k, &Matrix::zeros(sys.r, sys.p)).unwrap();
            prop_assert_eq!(&r.a, &sys.modes[k].a);
            prop_assert_eq!(&r.a_d, &sys.modes[k].a_d);
            prop_assert_eq!(&r.b, &sys.modes[k].b);
        }
    }

    #[test]
    fn realizations_are_admissible(
        amplitude in 0.0f64..=1.0,
        frequency in 0.0f64..10.0,
        r in 1usize..=3,
        p in 1usize..=3,
        cosine: bool,
    ) {
        let f = if cosine {
            UncertaintyRealization::ScalarCosinusoid { amplitude, frequency }
        } else {
            UncertaintyRealization::ScalarSinusoid { amplitude, frequency }
        };
        for i in 0..40 {
            for j in 0..40 - i {
                let m = f.eval(i, j, r, p);
                prop_assert!(uncertainty_gain(&m).unwrap() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn boundary_outside_range_is_zero(
        seed: u64,
        z1 in 0usize..6,
        z2 in 0usize..6,
        i in -10i64..20,
        j in -10i64..20,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = rand_system(&mut rng, 1, false);
        let h = vec![1.5; sys.n1];
        let v = vec![-2.0; sys.n2];
        let bc = BoundaryConditions::constant(&sys, z1, z2, &h, &v);
        let in_h = (-(sys.d_h as i64)..=0).contains(&i) && (0..=z1 as i64).contains(&j);
        let in_v = (0..=z2 as i64).contains(&i) && (-(sys.d_v as i64)..=0).contains(&j);
        if !in_h {
            prop_assert_eq!(bc.h(i, j, sys.n1), vec![0.0; sys.n1]);
        }
        if !in_v {
            prop_assert_eq!(bc.v(i, j, sys.n2), vec![0.0; sys.n2]);
        }
    }
}
