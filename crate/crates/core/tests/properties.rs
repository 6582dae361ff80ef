use num_rational::BigRational;
use proptest::prelude::*;

use camech::axioms::{
    check_axioms, critical_value, critical_value_by_bisection, deviation_sweep, Axiom, CriticalValue, DeviationConfig,
    Tolerance,
};
use camech::document::InstanceDocument;
use camech::exact::{has_unique_optimum, optimal_allocation};
use camech::experiments::within_bound;
use camech::generate::{generate, GeneratorParams};
use camech::model::{allocation_value, Bundle, SingleMindedBid};
use camech::norm::{norm_key, rank};
use camech::{AuctionInstance, Exponent, Greedy, Gva, Mechanism, Money, NormConfig, SolverKind, TieRule};

fn instance(max_goods: usize, max_bids: usize) -> impl Strategy<Value = AuctionInstance> {
    (1..=max_goods, 1..=max_bids, any::<u64>(), 0.2f64..0.8).prop_map(|(k, n, seed, p)| {
        generate(&GeneratorParams::new(k, n).with_bundle_prob(p), seed, 0).expect("valid parameters")
    })
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::ZERO),
        Just(Exponent::HALF),
        Just(Exponent::ONE),
        Just(Exponent::new(2, 3).unwrap())
    ]
}

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_bid_monotone(
        bits in 1u64..256, drop in 0u64..256, a in 1u64..10_000, raise in 0u64..10_000, l in exponent()
    ) {
        let s = Bundle::from_bits(bits);
        let smaller = Bundle::from_bits(bits & !drop);
        prop_assume!(!smaller.is_empty());
        let bid = SingleMindedBid::new("x", s, ratio(a, 7));
        let better = SingleMindedBid::new("x", smaller, ratio(a + raise, 7));
        prop_assert!(norm_key(&better, l) >= norm_key(&bid, l));
    }

    #[test]
    fn solvers_agree_on_allocation(inst in instance(8, 12)) {
        let (a, v) = optimal_allocation(&inst, SolverKind::BitmaskDP).unwrap();
        let (b, w) = optimal_allocation(&inst, SolverKind::BruteForceBidSubsets).unwrap();
        prop_assert_eq!(&v, &w);
        prop_assert_eq!(a, b);
        let (g, _) = camech::greedy_allocate(&inst, &NormConfig::default()).unwrap();
        prop_assert!(allocation_value(&inst, &g) <= v);
    }

    #[test]
    fn greedy_outcome_invariants(inst in instance(8, 12), l in exponent()) {
        let out = camech::run_greedy(&inst, &NormConfig::new(l, TieRule::Reject)).unwrap();
        prop_assert!(out.allocation.is_conflict_free());
        for (j, b) in inst.bids.iter().enumerate() {
            let pay = out.payment(j);
            prop_assert!(!pay.is_negative());
            if out.is_granted(j) {
                prop_assert_eq!(out.allocation.granted_bundle(j), b.bundle);
                prop_assert!(pay <= &Money::from(b.amount.clone()));
            } else {
                prop_assert!(pay.is_zero());
            }
        }
        let total: Money = out.payments.iter().sum();
        prop_assert_eq!(out.revenue, total);
    }

    #[test]
    fn payment_is_the_critical_value(inst in instance(6, 8), l in exponent()) {
        let g = Greedy::new(NormConfig::new(l, TieRule::Reject));
        let out = g.run(&inst).unwrap();
        for j in out.allocation.winners() {
            let vc = critical_value(&g, &inst, j).unwrap();
            prop_assert_eq!(&vc, &CriticalValue::Finite(out.payment(j).clone()));
        }
    }

    #[test]
    fn bisection_brackets_the_critical_value(inst in instance(5, 6)) {
        let g = Greedy::default();
        for j in 0..inst.bids.len() {
            let exact = critical_value(&g, &inst, j).unwrap();
            let approx = critical_value_by_bisection(&g, &inst, j, None).unwrap();
            let (CriticalValue::Finite(v), CriticalValue::Approx { lo, hi }) = (&exact, &approx) else {
                return Err(TestCaseError::fail(format!("{exact:?} / {approx:?}")));
            };
            prop_assert!(&Money::from(lo.clone()) <= v && v <= &Money::from(hi.clone()));
        }
    }

    #[test]
    fn square_root_bound(inst in instance(8, 12)) {
        let cfg = NormConfig::new(Exponent::HALF, TieRule::Reject);
        let (g, _) = camech::greedy_allocate(&inst, &cfg).unwrap();
        let (_, opt) = optimal_allocation(&inst, SolverKind::BitmaskDP).unwrap();
        let gv = allocation_value(&inst, &g);
        prop_assert!(within_bound(&opt, &gv, inst.num_goods(), Exponent::HALF).unwrap());
        prop_assert!(within_bound(&opt, &camech::greedy_allocate(&inst, &NormConfig::default()).map(|(a, _)| allocation_value(&inst, &a)).unwrap(), inst.num_goods(), Exponent::ONE).unwrap());
    }

    #[test]
    fn generated_instances_are_tie_free(inst in instance(10, 16), l in prop_oneof![Just(Exponent::ZERO), Just(Exponent::HALF), Just(Exponent::ONE)]) {
        prop_assert!(rank(&inst, &NormConfig::new(l, TieRule::Reject)).is_ok());
    }

    #[test]
    fn instance_documents_round_trip(inst in instance(8, 12)) {
        let doc = InstanceDocument::from_instance(&inst.clone().declared_as_true());
        let back = InstanceDocument::parse(&doc.render()).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.to_instance().unwrap(), inst.declared_as_true());
    }

    #[test]
    fn money_between_is_strict(a in 1u64..1000, b in 1u64..1000, m in 2u64..50) {
        let x = Money::int_power(m, num_rational::Ratio::new(1, 2)).scale(&ratio(a, 1));
        let y = &x + &Money::from(ratio(b, 1_000_000));
        let r = Money::from(Money::rational_between(&x, &y));
        prop_assert!(x < r && r < y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// When all four axioms hold, no bidder gains by any single-minded misreport.
    #[test]
    fn axioms_imply_no_profitable_deviation(inst in instance(4, 5)) {
        let g = Greedy::new(NormConfig::new(Exponent::ONE, TieRule::Reject));
        let inst = inst.declared_as_true();
        let all = [Axiom::Exactness, Axiom::Monotonicity, Axiom::Participation, Axiom::Critical];
        let report = check_axioms(&g, std::slice::from_ref(&inst), &all, 5, 1, &Tolerance::Exact).unwrap();
        prop_assert!(report.passed());
        prop_assert!(deviation_sweep(&g, &inst, &DeviationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn gva_is_truthful_with_unique_optima(inst in instance(4, 5)) {
        prop_assume!(has_unique_optimum(&inst, SolverKind::BitmaskDP).unwrap());
        let inst = inst.declared_as_true();
        prop_assert!(deviation_sweep(&Gva::default(), &inst, &DeviationConfig::default()).unwrap().is_empty());
    }
}
