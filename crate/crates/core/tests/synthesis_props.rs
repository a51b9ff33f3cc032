mod common;

use common::{rand_matrix, rand_pd};
use proptest::prelude::*;
use r2d_core::numerics::sym_inverse;
use r2d_core::synthesis::{
    extract_gain, lambda_star_from_ratio, step3_minimize_mu, step4_dwell_time, theoretical_decay, DwellTimeScheme,
    LambdaSelection, MatchedSolution, MismatchedSolution, SynthesisCertificate,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solutions(seed: u64, n: usize, modes: usize) -> (Vec<MatchedSolution>, Vec<MismatchedSolution>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matched = (0..modes)
        .map(|_| MatchedSolution {
            x: rand_pd(&mut rng, n, 0.2),
            y: Some(rand_pd(&mut rng, n, 0.2)),
            w: rand_matrix(&mut rng, 1, n, 1.0),
            eps: 1.0,
        })
        .collect();
    let mut mismatched = Vec::new();
    for from in 0..modes {
        for to in 0..modes {
            if from != to {
                mismatched.push(MismatchedSolution {
                    from,
                    to,
                    x: rand_pd(&mut rng, n, 0.2),
                    y: Some(rand_pd(&mut rng, n, 0.2)),
                    eps: 1.0,
                });
            }
        }
    }
    (matched, mismatched)
}

/// `λ_min(s·B − A)`, nonnegative iff `A ⪯ s·B`.
fn slack(a: &r2d_core::SymMatrix, b: &r2d_core::SymMatrix, s: f64) -> f64 {
    b.scale(s).sub(a).lambda_min().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gain_extraction_is_exact(seed: u64, n in 1usize..=5, q in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_pd(&mut rng, n, 0.3);
        let w = rand_matrix(&mut rng, q, n, 3.0);
        let k = extract_gain(&w, &x).unwrap();
        prop_assert!((&(&k * x.as_matrix()) - &w).max_abs() <= 1e-9);
    }

    #[test]
    fn mu1_is_tight(seed: u64, n in 1usize..=3, modes in 2usize..=3, d_h in 1usize..=3, d_v in 1usize..=3) {
        let (m, mm) = solutions(seed, n, modes);
        let c = step3_minimize_mu(&m, &mm, 0.6, 1.2, d_h, d_v).unwrap();
        let mut worst_shrunk = f64::INFINITY;
        for p in &mm {
            let pairs = [
                (sym_inverse(&m[p.to].x).unwrap(), sym_inverse(&p.x).unwrap()),
                (sym_inverse(m[p.to].y.as_ref().unwrap()).unwrap(), sym_inverse(p.y.as_ref().unwrap()).unwrap()),
            ];
            for (a, b) in &pairs {
                let s = slack(a, b, c.mu1);
                prop_assert!(s >= -1e-9 * (1.0 + c.mu1), "{s}");
                worst_shrunk = worst_shrunk.min(slack(a, b, c.mu1 * (1.0 - 1e-6)));
            }
        }
        prop_assert!(worst_shrunk < 0.0);
    }

    #[test]
    fn ratio_round_trips(ratio in 0.05f64..50.0, alpha in 0.05f64..0.95, beta in 1.01f64..3.0) {
        let (lm, lp) = (-alpha.ln(), beta.ln());
        let ls = lambda_star_from_ratio(ratio, lm, lp);
        prop_assume!(ls > 0.0 && ls < lm);
        let d = step4_dwell_time(1.5, 2.0, lm, lp, LambdaSelection::Ratio(ratio)).unwrap();
        prop_assert!((d.required_ratio - ratio).abs() <= 1e-10 * ratio.max(1.0));
    }

    #[test]
    fn decay_envelope_is_nonincreasing(seed: u64, extra in 0.01f64..5.0, z in 0usize..10) {
        let (m, mm) = solutions(seed, 2, 2);
        let c = step3_minimize_mu(&m, &mm, 0.6, 1.2, 2, 3).unwrap();
        let (lm, lp) = (-(0.6f64).ln(), 1.2f64.ln());
        let d = step4_dwell_time(c.mu1, c.mu2, lm, lp, LambdaSelection::Ratio(8.0)).unwrap();
        let cert = SynthesisCertificate {
            alpha: 0.6,
            beta: 1.2,
            gains: Vec::new(),
            matched: m,
            mismatched: mm,
            mu1: c.mu1,
            mu2: c.mu2,
            mu: c.mu,
            mu_floor_applied: c.floor_applied,
            d_bar: 3,
            lambda_minus: lm,
            lambda_plus: lp,
            lambda_star: d.lambda_star,
            tau_a_star: d.tau_a_star,
            required_ratio: d.required_ratio,
            zeta1: 2.0,
            zeta2: 1.0,
            margins: Vec::new(),
        };
        let scheme = DwellTimeScheme::new(cert.tau_a_star + extra, 1.0, cert.required_ratio);
        let values: Vec<f64> = (z..z + 80).map(|dd| theoretical_decay(&cert, &scheme, z, dd)).collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }
}
