use std::time::Duration;

use proptest::prelude::*;

use boxsuite::fitting::{solve_fit, FitOutcome, FitProblem, PackingRules, SolverConfig};
use boxsuite::model::{Carton, Dims3};
use boxsuite::pmedian::{
    lagrangian_bounds, solve_exact, solve_grasp, ExactBudget, GraspParams, LagrangianParams, PMedianInstance,
};

fn cfg() -> SolverConfig {
    SolverConfig::default().with_time_limit(Duration::from_secs(10))
}

fn dims(hi: u32) -> impl Strategy<Value = Dims3> {
    (1..=hi, 1..=hi, 1..=hi).prop_map(|(a, b, c)| Dims3::new(a as f64, b as f64, c as f64).unwrap())
}

fn carton() -> impl Strategy<Value = Carton> {
    (dims(6), prop::bool::weighted(0.2), prop::bool::weighted(0.15)).prop_map(|(d, ho, br)| {
        let mut c = Carton::new(d);
        c.height_oriented = ho;
        c.bottom_resting = br;
        c
    })
}

fn problem() -> impl Strategy<Value = FitProblem> {
    (prop::collection::vec(carton(), 1..=4), dims(10))
        .prop_map(|(cartons, b)| FitProblem::new(cartons, b).with_rules(PackingRules::default()))
}

fn verdict(p: &FitProblem, c: &SolverConfig) -> FitOutcome {
    solve_fit(p, c).outcome
}

fn costs(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((1u32..50).prop_map(f64::from), m), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn bigger_box_keeps_fit(p in problem(), grow in (0u32..3, 0u32..3, 0u32..3)) {
        prop_assume!(verdict(&p, &cfg()) == FitOutcome::Fit);
        let [x, y, z] = p.box_dims.to_array();
        let big = Dims3::new(x + grow.0 as f64, y + grow.1 as f64, z + grow.2 as f64).unwrap();
        let q = FitProblem::new(p.cartons.clone(), big).with_rules(p.rules);
        prop_assert_eq!(verdict(&q, &cfg()), FitOutcome::Fit);
    }

    #[test]
    fn dropping_a_carton_keeps_fit(p in problem(), k in 0usize..4) {
        prop_assume!(p.cartons.len() > 1 && verdict(&p, &cfg()) == FitOutcome::Fit);
        let mut cartons = p.cartons.clone();
        cartons.remove(k % cartons.len());
        let q = FitProblem::new(cartons, p.box_dims).with_rules(p.rules);
        prop_assert_eq!(verdict(&q, &cfg()), FitOutcome::Fit);
    }

    #[test]
    fn footprint_swap_is_invariant(p in problem()) {
        let [x, y, z] = p.box_dims.to_array();
        let q = FitProblem::new(p.cartons.clone(), Dims3::new(y, x, z).unwrap()).with_rules(p.rules);
        prop_assert_eq!(verdict(&p, &cfg()), verdict(&q, &cfg()));
    }

    #[test]
    fn free_cartons_ignore_box_orientation(p in problem(), perm in 0usize..6) {
        let cartons: Vec<Carton> = p.cartons.iter().map(|c| Carton::new(c.dims)).collect();
        let [x, y, z] = p.box_dims.to_array();
        let order = [[x, y, z], [x, z, y], [y, x, z], [y, z, x], [z, x, y], [z, y, x]][perm];
        let a = FitProblem::new(cartons.clone(), p.box_dims);
        let b = FitProblem::new(cartons, Dims3::new(order[0], order[1], order[2]).unwrap());
        prop_assert_eq!(verdict(&a, &cfg()), verdict(&b, &cfg()));
    }

    #[test]
    fn symmetry_toggles_agree(p in problem()) {
        let base = cfg().with_greedy(false);
        let all = verdict(&p, &base.with_symmetry(true, true));
        for (i, o) in [(true, false), (false, true), (false, false)] {
            prop_assert_eq!(verdict(&p, &base.with_symmetry(i, o)), all);
        }
    }

    #[test]
    fn relaxing_rules_keeps_fit(p in problem()) {
        prop_assume!(verdict(&p, &cfg()) == FitOutcome::Fit);
        let q = FitProblem::new(p.cartons.clone(), p.box_dims)
            .with_rules(PackingRules { enforce_ho: false, enforce_br: false });
        prop_assert_eq!(verdict(&q, &cfg()), FitOutcome::Fit);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pmedian_bounds_bracket(rows in costs(12, 6), p in 1usize..5) {
        let inst = PMedianInstance::from_rows(&rows, p).unwrap();
        let opt = solve_exact(&inst, &ExactBudget::default()).unwrap().cost;
        let g = solve_grasp(&inst, &GraspParams { iterations: 8, ..GraspParams::default() });
        let l = lagrangian_bounds(&inst, &LagrangianParams::default());
        let tol = 1e-9 * opt.max(1.0);
        prop_assert!(g.cost >= opt - tol);
        prop_assert!(l.cost >= opt - tol);
        prop_assert!(l.lower_bound.unwrap() <= opt + tol);
        prop_assert!((inst.cost(&g.suite) - g.cost).abs() <= tol);
    }

    #[test]
    fn optimum_nonincreasing_in_p(rows in costs(10, 6)) {
        let mut last = f64::INFINITY;
        for p in 1..6 {
            let inst = PMedianInstance::from_rows(&rows, p).unwrap();
            let c = solve_exact(&inst, &ExactBudget::default()).unwrap().cost;
            prop_assert!(c <= last + 1e-9);
            last = c;
        }
    }
}
