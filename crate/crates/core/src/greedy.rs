//! Greedy allocation and the critical-value payment scheme.
//!
//! Bids are walked in decreasing norm order; a bid is granted when its bundle
//! is disjoint from everything granted before it. A granted bid `j` pays the
//! amount at which its norm would equal the norm of its blocker `n(j)`: the
//! first later bid that was denied, conflicts with `j`, and conflicts with no
//! other bid granted ahead of it. With no blocker the bid pays nothing.

use crate::error::{Error, Result};
use crate::model::{Allocation, AuctionInstance, Bundle, Outcome};
use crate::money::Money;
use crate::norm::{amount_for_norm, norm_value, rank, Exponent, NormConfig, RankedList};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BidStatus {
    Granted,
    /// Denied because of the earliest granted bid in rank order that conflicts with it.
    Denied {
        blocked_by: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyTrace {
    pub ranking: RankedList,
    /// Status of each bid, indexed by bid.
    pub status: Vec<BidStatus>,
    /// `n(j)` for each granted bid, indexed by bid; `None` for denied bids.
    pub blockers: Vec<Option<usize>>,
}

impl GreedyTrace {
    pub fn is_granted(&self, bid: usize) -> bool {
        matches!(self.status.get(bid), Some(BidStatus::Granted))
    }
}

/// Runs both greedy phases: rank the bids, then grant each one that fits.
pub fn greedy_allocate(instance: &AuctionInstance, cfg: &NormConfig) -> Result<(Allocation, GreedyTrace)> {
    let ranking = rank(instance, cfg)?;
    let n = instance.bids.len();
    let mut status = vec![BidStatus::Granted; n];
    let mut allocation = Allocation::default();
    let mut taken = Bundle::EMPTY;
    let mut granted_in_order: Vec<usize> = Vec::new();
    for &i in &ranking.order {
        let s = instance.bids[i].bundle;
        if s.intersects(taken) {
            let by = granted_in_order
                .iter()
                .copied()
                .find(|&g| instance.bids[g].bundle.intersects(s))
                .expect("a conflicting grant exists");
            status[i] = BidStatus::Denied { blocked_by: by };
        } else {
            taken = taken.union(s);
            granted_in_order.push(i);
            allocation.grant(i, s);
        }
    }
    let mut trace = GreedyTrace {
        ranking,
        status,
        blockers: vec![None; n],
    };
    for &j in &granted_in_order {
        trace.blockers[j] = blocker(&trace, instance, j)?;
    }
    Ok((allocation, trace))
}

/// `n(j)`: the first bid after `j` that was denied, conflicts with `j`, and
/// conflicts with no bid other than `j` granted ahead of it.
pub fn blocker(trace: &GreedyTrace, instance: &AuctionInstance, j: usize) -> Result<Option<usize>> {
    if j >= instance.bids.len() {
        return Err(Error::NoSuchBid(j));
    }
    if !trace.is_granted(j) {
        return Err(Error::NotGranted(j));
    }
    let sj = instance.bids[j].bundle;
    let mut others = Bundle::EMPTY;
    let mut after_j = false;
    for &i in &trace.ranking.order {
        if i == j {
            after_j = true;
            continue;
        }
        let si = instance.bids[i].bundle;
        let granted = trace.is_granted(i);
        if after_j && !granted && si.intersects(sj) && !si.intersects(others) {
            return Ok(Some(i));
        }
        if granted {
            others = others.union(si);
        }
    }
    Ok(None)
}

/// The amount at which a bid on `bundle_size` goods ties the norm of `rival`.
pub fn crossing_amount(instance: &AuctionInstance, l: Exponent, bundle_size: usize, rival: usize) -> Money {
    let r = norm_value(&instance.bids[rival], l);
    amount_for_norm(bundle_size, &r, l)
}

/// Payment of every bid under the critical-value scheme.
pub fn greedy_payments(instance: &AuctionInstance, cfg: &NormConfig, trace: &GreedyTrace) -> Result<Vec<Money>> {
    let mut payments = vec![Money::zero(); instance.bids.len()];
    for (j, st) in trace.status.iter().enumerate() {
        if *st != BidStatus::Granted {
            continue;
        }
        if let Some(i) = trace.blockers[j] {
            if trace.is_granted(i) {
                return Err(Error::NotGranted(i));
            }
            payments[j] = crossing_amount(instance, cfg.exponent, instance.bids[j].bundle.len(), i);
        }
    }
    Ok(payments)
}

/// The greedy mechanism: greedy allocation plus critical-value payments.
pub fn run_greedy(instance: &AuctionInstance, cfg: &NormConfig) -> Result<Outcome> {
    let (allocation, trace) = greedy_allocate(instance, cfg)?;
    let payments = greedy_payments(instance, cfg, &trace)?;
    Ok(Outcome::assemble(instance, allocation, payments, Some(trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SingleMindedBid;
    use crate::money::parse_amount;
    use crate::norm::TieRule;

    fn inst(goods: &[&str], bids: &[(&str, &[&str], &str)]) -> AuctionInstance {
        let mut i = AuctionInstance::new(goods);
        for (b, s, a) in bids {
            i.add_bid(b, s, a).unwrap();
        }
        i
    }

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

    fn greedycomp() -> AuctionInstance {
        inst(
            &["a", "b"],
            &[
                ("Red", &["a"], "20"),
                ("Green", &["b"], "15"),
                ("Blue", &["a", "b"], "20"),
            ],
        )
    }

    fn m(s: &str) -> Money {
        Money::from(parse_amount(s).unwrap())
    }

    #[test]
    fn greedyall_allocation() {
        let (alloc, trace) = greedy_allocate(&greedyall(), &NormConfig::default()).unwrap();
        assert_eq!(alloc.winners().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(trace.status[1], BidStatus::Denied { blocked_by: 0 });
        assert_eq!(trace.blockers, vec![Some(1), None, None]);
    }

    #[test]
    fn lone_bid_is_granted() {
        let i = inst(&["a", "b", "c"], &[("Solo", &["a", "c"], "4")]);
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert!(out.is_granted(0));
        assert_eq!(out.payments, vec![Money::zero()]);
    }

    #[test]
    fn greedycomp_blockers_and_payments() {
        let i = greedycomp();
        let (alloc, trace) = greedy_allocate(&i, &NormConfig::default()).unwrap();
        assert_eq!(alloc.winners().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(blocker(&trace, &i, 0).unwrap(), None);
        assert_eq!(blocker(&trace, &i, 1).unwrap(), None);
        assert!(matches!(blocker(&trace, &i, 2), Err(Error::NotGranted(2))));
        let pay = greedy_payments(&i, &NormConfig::default(), &trace).unwrap();
        assert!(pay.iter().all(Money::is_zero));
    }

    #[test]
    fn greedyp_payments() {
        let out = run_greedy(&greedyall(), &NormConfig::default()).unwrap();
        assert_eq!(out.payments, vec![m("9.5"), m("0"), m("0")]);
        assert_eq!(out.revenue, m("9.5"));
    }

    #[test]
    fn best_example_payment() {
        let i = inst(
            &["a", "b"],
            &[
                ("Red", &["a", "b"], "20"),
                ("Green", &["a"], "9"),
                ("Black", &["b"], "1"),
            ],
        );
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert_eq!(out.payments[0], m("18"));
    }

    #[test]
    fn last_granted_has_no_blocker() {
        let i = inst(&["a", "b"], &[("Red", &["a"], "10"), ("Blue", &["b"], "8")]);
        let (_, trace) = greedy_allocate(&i, &NormConfig::default()).unwrap();
        assert_eq!(trace.blockers, vec![None, None]);
    }

    #[test]
    fn complex_green_runs() {
        let mut i = inst(
            &["a", "b"],
            &[
                ("Red", &["a"], "12"),
                ("Green/a", &["a"], "10"),
                ("Green/b", &["b"], "10"),
                ("Green/ab", &["a", "b"], "30"),
            ],
        );
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert_eq!(out.allocation.winners().collect::<Vec<_>>(), vec![3]);
        assert_eq!(out.payments[3], m("24"));
        i.bids[3].amount = parse_amount("23").unwrap();
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert_eq!(out.allocation.winners().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(out.payments[0], m("11.5"));
        assert_eq!(out.payments[2], m("0"));
    }

    #[test]
    fn empty_auction() {
        let i = AuctionInstance::new(&["a"]);
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert!(out.allocation.grants.is_empty());
        assert!(out.revenue.is_zero());
    }

    #[test]
    fn square_root_norm_payment() {
        // Big {a,b,c,d} at 6 has norm 3; Small {a} at 4 has norm 4 and is blocked by Big.
        let i = inst(
            &["a", "b", "c", "d"],
            &[("Small", &["a"], "4"), ("Big", &["a", "b", "c", "d"], "6")],
        );
        let cfg = NormConfig::new(Exponent::HALF, TieRule::Reject);
        let out = run_greedy(&i, &cfg).unwrap();
        assert_eq!(out.payments[0], m("3"));
        // {a,b} against norm 6/sqrt(3) pays sqrt(2) * 6 / sqrt(3) = 2 sqrt(6)
        let i = inst(
            &["a", "b", "c"],
            &[("Pair", &["a", "b"], "10"), ("Triple", &["a", "b", "c"], "6")],
        );
        let out = run_greedy(&i, &cfg).unwrap();
        assert_eq!(
            out.payments[0],
            Money::int_power(6, num_rational::Ratio::new(1, 2)).scale(&parse_amount("2").unwrap())
        );
        assert_eq!(out.payments[0].to_decimal(12), "4.89897948557");
    }

    #[test]
    fn reserve_payments_leave_revenue() {
        let mut i = inst(&["a"], &[("Red", &["a"], "10")]);
        i.add_reserve("reserve", &["a"], "12").unwrap();
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert!(out.is_granted(1));
        assert!(out.revenue.is_zero());
        i.bids[0] = SingleMindedBid::new("Red", i.bids[0].bundle, parse_amount("15").unwrap());
        let out = run_greedy(&i, &NormConfig::default()).unwrap();
        assert_eq!(out.payments[0], m("12"));
        assert_eq!(out.revenue, m("12"));
    }
}
