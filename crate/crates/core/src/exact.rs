//! Exact winner determination, Clarke payments and the generalized Vickrey auction.
//!
//! Two solvers find a conflict-free set of bids of maximum total amount:
//! plain enumeration of bid subsets, and a dynamic program over subsets of
//! goods. Both skip zero-amount bids and break ties between co-optimal sets by
//! taking the lexicographically smallest list of bid indices, so they agree on
//! the allocation and not only on its value.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::greedy::greedy_allocate;
use crate::model::{allocation_value, Allocation, AuctionInstance, Bundle, Outcome};
use crate::money::Money;
use crate::norm::{NormConfig, TieRule};

pub const BRUTE_FORCE_MAX_BIDS: usize = 24;
pub const BITMASK_DP_MAX_GOODS: usize = 24;
pub const BITMASK_DP_MAX_BIDS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SolverKind {
    BruteForceBidSubsets,
    #[default]
    BitmaskDP,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::BruteForceBidSubsets => write!(f, "brute-force"),
            SolverKind::BitmaskDP => write!(f, "bitmask-dp"),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute-force" => Ok(SolverKind::BruteForceBidSubsets),
            "bitmask-dp" => Ok(SolverKind::BitmaskDP),
            _ => Err(Error::Parse(format!("unknown solver {s:?}"))),
        }
    }
}

/// Candidate bid for a solve: original index, bundle and amount.
struct Item<'a> {
    index: usize,
    bundle: Bundle,
    amount: &'a BigRational,
}

fn items<'a>(instance: &'a AuctionInstance, keep: impl Fn(usize) -> bool) -> Vec<Item<'a>> {
    instance
        .bids
        .iter()
        .enumerate()
        .filter(|(i, b)| keep(*i) && b.amount.is_positive())
        .map(|(i, b)| Item {
            index: i,
            bundle: b.bundle,
            amount: &b.amount,
        })
        .collect()
}

fn solve(
    instance: &AuctionInstance,
    solver: SolverKind,
    keep: impl Fn(usize) -> bool,
) -> Result<(Vec<usize>, BigRational)> {
    let items = items(instance, keep);
    match solver {
        SolverKind::BruteForceBidSubsets => brute_force(&items),
        SolverKind::BitmaskDP => bitmask_dp(&items, instance.num_goods()),
    }
}

fn brute_force(items: &[Item]) -> Result<(Vec<usize>, BigRational)> {
    if items.len() > BRUTE_FORCE_MAX_BIDS {
        return Err(Error::InstanceTooLarge(format!(
            "{} bids exceeds the brute-force limit of {BRUTE_FORCE_MAX_BIDS}",
            items.len()
        )));
    }
    struct Search<'s, 'a> {
        items: &'s [Item<'a>],
        chosen: Vec<usize>,
        best: Vec<usize>,
        best_value: BigRational,
    }
    impl Search<'_, '_> {
        fn visit(&mut self, next: usize, used: Bundle, value: BigRational) {
            if next == self.items.len() {
                if value > self.best_value || (value == self.best_value && self.chosen < self.best) {
                    self.best_value = value;
                    self.best = self.chosen.clone();
                }
                return;
            }
            let it = &self.items[next];
            if !it.bundle.intersects(used) {
                self.chosen.push(it.index);
                self.visit(next + 1, used.union(it.bundle), &value + it.amount);
                self.chosen.pop();
            }
            self.visit(next + 1, used, value);
        }
    }
    let mut s = Search {
        items,
        chosen: Vec::new(),
        best: Vec::new(),
        best_value: BigRational::zero(),
    };
    s.visit(0, Bundle::EMPTY, BigRational::zero());
    Ok((s.best, s.best_value))
}

/// Dynamic program over subsets of goods. Amounts are scaled to integers by the
/// common denominator; each state keeps its best value and its winner set as a
/// bitmask where bid position `p` is bit `127 - p`, so that among equal values
/// the larger mask is the lexicographically smaller index list.
fn bitmask_dp(items: &[Item], k: usize) -> Result<(Vec<usize>, BigRational)> {
    if k > BITMASK_DP_MAX_GOODS {
        return Err(Error::InstanceTooLarge(format!(
            "{k} goods exceeds the bitmask-dp limit of {BITMASK_DP_MAX_GOODS}"
        )));
    }
    if items.len() > BITMASK_DP_MAX_BIDS {
        return Err(Error::InstanceTooLarge(format!(
            "{} bids exceeds the bitmask-dp limit of {BITMASK_DP_MAX_BIDS}",
            items.len()
        )));
    }
    let scale = items.iter().fold(BigInt::one(), |acc, it| acc.lcm(it.amount.denom()));
    let too_fine = || Error::InstanceTooLarge("amounts too fine-grained for bitmask-dp".into());
    let mut weights = Vec::with_capacity(items.len());
    let mut total: i128 = 0;
    for it in items {
        let w = (it.amount.numer() * (&scale / it.amount.denom()))
            .to_i128()
            .ok_or_else(too_fine)?;
        total = total.checked_add(w).ok_or_else(too_fine)?;
        weights.push(w);
    }

    let states = 1usize << k;
    let mut value = vec![0i128; states];
    let mut winners = vec![0u128; states];
    for s in 1..states {
        let mut best_v = 0i128;
        let mut best_w = 0u128;
        let mut rest = s;
        while rest != 0 {
            let g = rest & rest.wrapping_neg();
            rest ^= g;
            let t = s ^ g;
            if (value[t], winners[t]) > (best_v, best_w) {
                best_v = value[t];
                best_w = winners[t];
            }
        }
        for (p, it) in items.iter().enumerate() {
            let b = it.bundle.bits() as usize;
            if b & !s != 0 {
                continue;
            }
            let t = s ^ b;
            let cand = (value[t] + weights[p], winners[t] | 1u128 << (127 - p));
            if cand > (best_v, best_w) {
                (best_v, best_w) = cand;
            }
        }
        value[s] = best_v;
        winners[s] = best_w;
    }
    let full = states - 1;
    let chosen: Vec<usize> = (0..items.len())
        .filter(|p| winners[full] >> (127 - p) & 1 == 1)
        .map(|p| items[p].index)
        .collect();
    let v = BigRational::new(BigInt::from(value[full]), scale);
    Ok((chosen, v))
}

fn to_allocation(instance: &AuctionInstance, winners: &[usize]) -> Allocation {
    let mut a = Allocation::default();
    for &w in winners {
        a.grant(w, instance.bids[w].bundle);
    }
    a
}

/// A conflict-free set of bids of maximum total amount, and that amount.
pub fn optimal_allocation(instance: &AuctionInstance, solver: SolverKind) -> Result<(Allocation, BigRational)> {
    let (w, v) = solve(instance, solver, |_| true)?;
    Ok((to_allocation(instance, &w), v))
}

/// Optimal value over the bids other than `excluded` that avoid `forbidden` goods.
pub fn optimal_value_without(
    instance: &AuctionInstance,
    solver: SolverKind,
    excluded: usize,
    forbidden: Bundle,
) -> Result<BigRational> {
    Ok(solve(instance, solver, |i| {
        i != excluded && !instance.bids[i].bundle.intersects(forbidden)
    })?
    .1)
}

/// Whether the optimal allocation is the only one of maximum value (zero-amount bids aside).
pub fn has_unique_optimum(instance: &AuctionInstance, solver: SolverKind) -> Result<bool> {
    let (alloc, best) = optimal_allocation(instance, solver)?;
    for (i, b) in instance.bids.iter().enumerate() {
        if !b.amount.is_positive() {
            continue;
        }
        let alternative = if alloc.is_granted(i) {
            optimal_value_without(instance, solver, i, Bundle::EMPTY)?
        } else {
            &b.amount + optimal_value_without(instance, solver, i, b.bundle)?
        };
        if alternative == best {
            return Ok(false);
        }
    }
    Ok(true)
}

fn clarke_from(
    instance: &AuctionInstance,
    solver: SolverKind,
    alloc: &Allocation,
    best: &BigRational,
) -> Result<Vec<Money>> {
    (0..instance.bids.len())
        .map(|j| {
            let others_now = if alloc.is_granted(j) {
                best - &instance.bids[j].amount
            } else {
                best.clone()
            };
            let without = optimal_value_without(instance, solver, j, Bundle::EMPTY)?;
            Ok(Money::from(without - others_now))
        })
        .collect()
}

/// Clarke pivot payments relative to the optimal allocation.
pub fn clarke_payments(instance: &AuctionInstance, solver: SolverKind) -> Result<Vec<Money>> {
    let (alloc, best) = optimal_allocation(instance, solver)?;
    clarke_from(instance, solver, &alloc, &best)
}

/// The generalized Vickrey auction: optimal allocation with Clarke payments.
pub fn run_gva(instance: &AuctionInstance, solver: SolverKind) -> Result<Outcome> {
    let (alloc, best) = optimal_allocation(instance, solver)?;
    let payments = clarke_from(instance, solver, &alloc, &best)?;
    Ok(Outcome::assemble(instance, alloc, payments, None))
}

/// Greedy allocation charged with Clarke payments, where each counterfactual
/// (bidder `j` declaring zero) is again allocated greedily.
pub fn clarke_with_greedy(instance: &AuctionInstance, cfg: &NormConfig) -> Result<Outcome> {
    let (alloc, trace) = greedy_allocate(instance, cfg)?;
    let total = allocation_value(instance, &alloc);
    // A zeroed bid ranks behind every positive norm, so ties it creates only
    // reorder zero-value bids and cannot change the others' value.
    let zero_cfg = match cfg.tie_rule {
        TieRule::Reject => NormConfig::new(cfg.exponent, TieRule::Canonical),
        _ => cfg.clone(),
    };
    let mut payments = Vec::with_capacity(instance.bids.len());
    for j in 0..instance.bids.len() {
        let others_now = if alloc.is_granted(j) {
            &total - &instance.bids[j].amount
        } else {
            total.clone()
        };
        let zeroed = instance.with_declaration(j, instance.bids[j].with_amount(BigRational::zero()));
        let (za, _) = greedy_allocate(&zeroed, &zero_cfg)?;
        let others_zeroed = allocation_value(&zeroed, &za);
        payments.push(Money::from(others_zeroed - others_now));
    }
    Ok(Outcome::assemble(instance, alloc, payments, Some(trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::parse_amount;

    fn inst(goods: &[&str], bids: &[(&str, &[&str], &str)]) -> AuctionInstance {
        let mut i = AuctionInstance::new(goods);
        for (b, s, a) in bids {
            i.add_bid(b, s, a).unwrap();
        }
        i
    }

    fn q(s: &str) -> BigRational {
        parse_amount(s).unwrap()
    }

    fn m(s: &str) -> Money {
        Money::from(q(s))
    }

    const BOTH: [SolverKind; 2] = [SolverKind::BruteForceBidSubsets, SolverKind::BitmaskDP];

    fn greedyall() -> AuctionInstance {
        inst(
            &["a", "b"],
            &[
                ("Red", &["a"], "10"),
                ("Green", &["a", "b"], "19"),
                ("Blue", &["b"], "8"),
            ],
        )
    }

    #[test]
    fn optimal_examples() {
        let comp = inst(
            &["a", "b"],
            &[
                ("Red", &["a"], "20"),
                ("Green", &["b"], "15"),
                ("Blue", &["a", "b"], "20"),
            ],
        );
        let solo = inst(&["a", "b"], &[("Solo", &["b"], "7.25")]);
        for s in BOTH {
            let (a, v) = optimal_allocation(&greedyall(), s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![1]);
            assert_eq!(v, q("19"));
            let (a, v) = optimal_allocation(&comp, s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![0, 1]);
            assert_eq!(v, q("35"));
            let (a, v) = optimal_allocation(&solo, s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![0]);
            assert_eq!(v, q("7.25"));
        }
    }

    #[test]
    fn clarke_examples() {
        let comp = inst(
            &["a", "b"],
            &[
                ("Red", &["a"], "20"),
                ("Green", &["b"], "15"),
                ("Blue", &["a", "b"], "20"),
            ],
        );
        let solo = inst(&["a"], &[("Solo", &["a"], "3")]);
        for s in BOTH {
            assert_eq!(clarke_payments(&greedyall(), s).unwrap(), vec![m("0"), m("18"), m("0")]);
            assert_eq!(clarke_payments(&comp, s).unwrap(), vec![m("5"), m("0"), m("0")]);
            assert_eq!(clarke_payments(&solo, s).unwrap(), vec![m("0")]);
        }
    }

    #[test]
    fn gva_revenue_examples() {
        let worseeff = inst(
            &["a", "b"],
            &[
                ("Green", &["a"], "20"),
                ("Red", &["a", "b"], "37"),
                ("Black", &["b"], "18"),
            ],
        );
        let out = run_gva(&worseeff, SolverKind::BitmaskDP).unwrap();
        assert_eq!(out.payments, vec![m("19"), m("0"), m("17")]);
        assert_eq!(out.revenue, m("36"));
        let best = inst(
            &["a", "b"],
            &[
                ("Red", &["a", "b"], "20"),
                ("Green", &["a"], "9"),
                ("Black", &["b"], "1"),
            ],
        );
        let out = run_gva(&best, SolverKind::BitmaskDP).unwrap();
        assert_eq!(out.allocation.winners().collect::<Vec<_>>(), vec![0]);
        assert_eq!(out.payments[0], m("10"));
        let worsenoteff = inst(&["a", "b"], &[("Green", &["a"], "10"), ("Red", &["a", "b"], "19")]);
        let out = run_gva(&worsenoteff, SolverKind::BruteForceBidSubsets).unwrap();
        assert_eq!(out.allocation.winners().collect::<Vec<_>>(), vec![1]);
        assert_eq!(out.payments[1], m("10"));
    }

    #[test]
    fn co_optimal_tie_break_is_lexicographic() {
        // {0,1} and {2,3} both reach 2
        let notgood = inst(
            &["a", "b", "c", "d"],
            &[
                ("Green", &["a", "b"], "1"),
                ("Red", &["c", "d"], "1"),
                ("Black", &["a", "c"], "1"),
                ("Blue", &["b", "d"], "1"),
            ],
        );
        for s in BOTH {
            let (a, _) = optimal_allocation(&notgood, s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![0, 1]);
            assert!(!has_unique_optimum(&notgood, s).unwrap());
            assert_eq!(run_gva(&notgood, s).unwrap().revenue, m("2"));
        }
        // {0,2} beats {1} lexicographically at equal value
        let mixed = inst(
            &["a", "b", "c"],
            &[("A", &["a"], "1"), ("B", &["a", "c"], "2"), ("C", &["c"], "1")],
        );
        for s in BOTH {
            let (a, _) = optimal_allocation(&mixed, s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![0, 2]);
        }
        assert!(has_unique_optimum(&greedyall(), SolverKind::BitmaskDP).unwrap());
    }

    #[test]
    fn zero_amount_bids_are_never_granted() {
        let i = inst(&["a", "b"], &[("Zero", &["a"], "0"), ("One", &["b"], "1")]);
        for s in BOTH {
            let (a, v) = optimal_allocation(&i, s).unwrap();
            assert_eq!(a.winners().collect::<Vec<_>>(), vec![1]);
            assert_eq!(v, q("1"));
        }
    }

    #[test]
    fn size_guards() {
        let goods: Vec<String> = (0..25).map(|g| format!("g{g}")).collect();
        let mut i = AuctionInstance::new(&goods);
        i.add_bid("x", &["g0"], "1").unwrap();
        assert!(matches!(
            optimal_allocation(&i, SolverKind::BitmaskDP),
            Err(Error::InstanceTooLarge(_))
        ));
        assert!(optimal_allocation(&i, SolverKind::BruteForceBidSubsets).is_ok());
        let mut many = AuctionInstance::new(&["a"]);
        for b in 0..25 {
            many.add_bid(&format!("b{b}"), &["a"], "1").unwrap();
        }
        assert!(matches!(
            optimal_allocation(&many, SolverKind::BruteForceBidSubsets),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn clarke_with_greedy_counterexample() {
        let out = clarke_with_greedy(&greedyall(), &NormConfig::default()).unwrap();
        assert_eq!(out.payments, vec![m("11"), m("0"), m("0")]);
        let lying = greedyall().with_declaration(0, greedyall().bids[0].with_amount(q("9")));
        let out = clarke_with_greedy(&lying, &NormConfig::default()).unwrap();
        assert!(!out.is_granted(0));
        assert!(out.payments[0].is_zero());
        let solo = inst(&["a"], &[("Solo", &["a"], "3")]);
        assert!(clarke_with_greedy(&solo, &NormConfig::default()).unwrap().payments[0].is_zero());
    }
}
