use fragline::dislocation::{DiscreteDislocation, Dislocation};
use fragline::exponent::{self, ExponentContext, DEFAULT_ROOT_TOL};
use fragline::fragsim::{StoppingLine, DEFAULT_BUDGET};
use fragline::{slln, tagged, TestFunction};
use proptest::prelude::*;

/// One or two binary atoms with terms in `[0.05, 0.9]`.
fn measure() -> impl Strategy<Value = DiscreteDislocation> {
    let atom = (0.2f64..2.0, 0.05f64..0.9, 0.05f64..0.9).prop_map(|(r, a, b)| {
        let (a, b) = if a + b > 1.0 { (a / (a + b), b / (a + b)) } else { (a, b) };
        (r, vec![a, b])
    });
    prop::collection::vec(atom, 1..=2)
        .prop_map(|atoms| DiscreteDislocation::from_raw(&atoms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn phi_is_increasing_and_concave(nu in measure(), p in -0.5f64..3.0) {
        let h = 0.05;
        let (lo, mid, hi) = (
            exponent::phi(&nu, p).unwrap(),
            exponent::phi(&nu, p + h).unwrap(),
            exponent::phi(&nu, p + 2.0 * h).unwrap(),
        );
        prop_assert!(lo < mid && mid < hi);
        prop_assert!(hi - mid <= mid - lo + 1e-12);
        prop_assert!(exponent::phi_prime(&nu, p).unwrap() > 0.0);
    }

    #[test]
    fn malthusian_root_solves_phi(nu in measure()) {
        let p = exponent::malthusian(&nu, DEFAULT_ROOT_TOL).unwrap();
        prop_assert!(exponent::phi(&nu, p).unwrap().abs() < 1e-9);
        prop_assert!(p <= 1e-12);
    }

    #[test]
    fn line_sits_just_below_eta(nu in measure(), eta in 0.01f64..0.5, seed in any::<u64>()) {
        let line = StoppingLine::simulate(&nu, eta, seed, DEFAULT_BUDGET).unwrap();
        for (k, f) in line.fragments().enumerate() {
            prop_assert!(f.mass < eta);
            prop_assert!(line.ancestry(k).unwrap().iter().all(|a| a.mass >= eta));
        }
    }

    #[test]
    fn refinement_matches_direct_simulation(
        nu in measure(),
        coarse in 0.05f64..0.5,
        shrink in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let fine = coarse * shrink;
        let refined = StoppingLine::simulate(&nu, coarse, seed, DEFAULT_BUDGET)
            .unwrap()
            .refine(&nu, fine, DEFAULT_BUDGET)
            .unwrap();
        let direct = StoppingLine::simulate(&nu, fine, seed, DEFAULT_BUDGET).unwrap();
        let key = |l: &StoppingLine| {
            let mut v: Vec<(u64, u64)> = l.fragments().map(|f| (f.id, f.mass.to_bits())).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(key(&refined), key(&direct));
    }

    #[test]
    fn indicator_halves_sum_to_mass(nu in measure(), eta in 0.01f64..0.3, seed in any::<u64>()) {
        let ctx = ExponentContext::new(Dislocation::Discrete(nu.clone())).unwrap();
        let line = StoppingLine::simulate(&nu, eta, seed, DEFAULT_BUDGET).unwrap();
        let lo = TestFunction::indicator(0.0, 0.5).unwrap();
        let hi = TestFunction::indicator(0.5, 1.0).unwrap();
        let sum = slln::empirical_pairing(&line, ctx.p_star, &lo)
            + slln::empirical_pairing(&line, ctx.p_star, &hi);
        let mass = slln::martingale_mass(&line, ctx.p_star);
        prop_assert!((sum - mass).abs() <= 1e-12 * mass.max(1.0));
    }

    #[test]
    fn tilted_law_reproduces_exponent(nu in measure(), lambda in 0.1f64..3.0) {
        let nu = Dislocation::Discrete(nu);
        let p = exponent::malthusian(&nu, DEFAULT_ROOT_TOL).unwrap();
        let law = tagged::tilted_jump_law(&nu, p).unwrap();
        let lhs = law.laplace_integral(lambda).unwrap();
        let rhs = exponent::tilted_exponent(&nu, p, lambda).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn limit_measure_is_a_probability(nu in measure(), u in 0.0f64..1.0) {
        let nu = Dislocation::Discrete(nu);
        let p = exponent::malthusian(&nu, DEFAULT_ROOT_TOL).unwrap();
        let rho = tagged::LimitMeasure::new(&nu, p).unwrap();
        let total = rho.pairing(&TestFunction::one()).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let c = rho.cdf(u);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
    }
}
