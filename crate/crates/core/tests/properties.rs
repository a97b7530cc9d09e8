//! Invariants over the skewed-logistic family, sampled across `z`.

use std::sync::Arc;

use proptest::prelude::*;
use shockuq::hodograph::{critical_point, exact_profile, invert_initial, track_shock, InverseProfile, TrackOptions};
use shockuq::problem::{sample_initial, validate_problem, Burgers, Flux, ProblemSpec, SkewedLogistic};
use shockuq::solver::{SolverConfig, WenoSolver};

fn wide_spec() -> ProblemSpec {
    ProblemSpec::new(Arc::new(Burgers), Arc::new(SkewedLogistic::default()), 20.0, (-1.0, 1.0), "paper5-wide").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn family_satisfies_every_assumption_on_a_wide_domain(z in -1.0f64..=1.0) {
        let report = validate_problem(&wide_spec(), z, 4001).unwrap();
        for c in &report.checks {
            prop_assert!(c.passed, "z = {z}: {:?} failed at {:?}", c.assumption, c.offending_x.first());
        }
    }

    #[test]
    fn exact_solution_is_non_increasing_in_x(z in -0.9f64..0.9, t in 0.5f64..4.0) {
        let inv = invert_initial(Arc::new(SkewedLogistic::default()), z);
        let cr = critical_point(&inv, &Burgers).unwrap();
        let track = (t > cr.t_star + 1e-5).then(|| {
            track_shock(&inv, &Burgers, &cr, t, &TrackOptions { checkpoints: vec![t], ..Default::default() }).unwrap()
        });
        let xs = (0..400).map(|k| -8.0 + 0.04 * k as f64);
        let u = exact_profile(&inv, &Burgers, track.as_ref(), t, xs).unwrap();
        for w in u.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn shock_states_straddle_the_critical_value(z in -0.9f64..0.9, span in 0.1f64..2.0) {
        let inv = invert_initial(Arc::new(SkewedLogistic::default()), z);
        let cr = critical_point(&inv, &Burgers).unwrap();
        let tr = track_shock(&inv, &Burgers, &cr, cr.t_star + span, &TrackOptions::default()).unwrap();
        let mut prev = tr.sample(0);
        for k in 0..tr.len() {
            let s = tr.sample(k);
            prop_assert!(s.u1 > cr.u_star && cr.u_star > s.u2);
            prop_assert!(s.u1 >= prev.u1 && s.u2 <= prev.u2, "the jump never shrinks");
            // both sides still carry characteristics from before the shock
            prop_assert!(inv.f(s.u1).unwrap() - Burgers.d2(s.u1) * s.t > 0.0);
            prop_assert!(inv.f(s.u2).unwrap() - Burgers.d2(s.u2) * s.t > 0.0);
            prev = s;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn weno_overshoot_stays_within_a_fraction_of_a_cell(z in -0.9f64..0.9) {
        let spec = ProblemSpec::paper5();
        let init = sample_initial(&spec, z, 400).unwrap();
        let n = init.len();
        let cfg = SolverConfig { left_state: init.values[0], right_state: init.values[n - 1], ..Default::default() };
        let solver = WenoSolver::new(spec.flux.clone(), cfg).unwrap();
        let (end, _) = solver.advance_to(&init, 3.0, &[]).unwrap();
        let (lo, hi) = end.min_max();
        let slack = 1e-2 * end.dx;
        prop_assert!(lo >= -1.0 - slack && hi <= 1.0 + slack, "range [{lo}, {hi}]");
    }
}

#[test]
fn solves_are_bit_reproducible() {
    let spec = ProblemSpec::paper5();
    let init = sample_initial(&spec, 0.234, 300).unwrap();
    let solver = WenoSolver::new(spec.flux.clone(), SolverConfig::default()).unwrap();
    let a = solver.advance_to(&init, 2.5, &[1.0, 2.2]).unwrap();
    let b = solver.advance_to(&init, 2.5, &[1.0, 2.2]).unwrap();
    assert_eq!(a, b);
}
