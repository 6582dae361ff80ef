//! Bid norms `a / |s|^l` and the ranked list the greedy allocation walks.
//!
//! The exponent is a non-negative rational `p/q`, so two norms compare through
//! `a1^q * |s2|^p` versus `a2^q * |s1|^p` without any rounding.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{AuctionInstance, SingleMindedBid};
use crate::money::{parse_amount, Money};

/// Non-negative rational exponent `l = num / den`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    num: u32,
    den: u32,
}

impl Exponent {
    pub const ZERO: Exponent = Exponent { num: 0, den: 1 };
    pub const HALF: Exponent = Exponent { num: 1, den: 2 };
    pub const ONE: Exponent = Exponent { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::Parse("exponent denominator is zero".into()));
        }
        let g = num.gcd(&den).max(1);
        Ok(Exponent {
            num: num / g,
            den: den / g,
        })
    }

    pub fn numer(self) -> u32 {
        self.num
    }

    pub fn denom(self) -> u32 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn as_ratio(self) -> Ratio<i64> {
        Ratio::new(self.num as i64, self.den as i64)
    }
}

impl Default for Exponent {
    fn default() -> Self {
        Exponent::ONE
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `p/q`, integers and finite decimals such as `0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let q = parse_amount(s).map_err(|e| Error::Parse(e.to_string()))?;
        if q < BigRational::zero() {
            return Err(Error::Parse(format!("negative exponent {s:?}")));
        }
        let num = q.numer().try_into().ok();
        let den = q.denom().try_into().ok();
        match (num, den) {
            (Some(n), Some(d)) => Exponent::new(n, d),
            _ => Err(Error::Parse(format!("exponent {s:?} out of range"))),
        }
    }
}

/// How bids with equal norms are ordered.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum TieRule {
    /// Higher amount first, then smaller bundle bitset, then lower bid index.
    #[default]
    Canonical,
    /// A priority list over all bid indices; tied bids follow their position in it.
    ExplicitPermutation(Vec<usize>),
    /// Any tie is an error.
    Reject,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieRule::Canonical => write!(f, "canonical"),
            TieRule::Reject => write!(f, "reject"),
            TieRule::ExplicitPermutation(p) => {
                let items: Vec<_> = p.iter().map(|i| i.to_string()).collect();
                write!(f, "perm:{}", items.join(","))
            }
        }
    }
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(TieRule::Canonical),
            "reject" => Ok(TieRule::Reject),
            _ => {
                let list = s
                    .strip_prefix("perm:")
                    .ok_or_else(|| Error::Parse(format!("unknown tie rule {s:?}")))?;
                let order = list
                    .split(',')
                    .filter(|x| !x.is_empty())
                    .map(|x| x.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse(format!("tie order {s:?}: {e}")))?;
                Ok(TieRule::ExplicitPermutation(order))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct NormConfig {
    pub exponent: Exponent,
    pub tie_rule: TieRule,
}

impl NormConfig {
    pub fn new(exponent: Exponent, tie_rule: TieRule) -> Self {
        NormConfig { exponent, tie_rule }
    }
}

/// `a^q / |s|^p`, the `q`-th power of the norm; order-equivalent to the norm itself.
pub fn norm_key(bid: &SingleMindedBid, l: Exponent) -> BigRational {
    let size = bid.bundle.len().max(1);
    let a = num_traits::pow(bid.amount.clone(), l.denom() as usize);
    let s = num_traits::pow(BigInt::from(size), l.numer() as usize);
    a / BigRational::from_integer(s)
}

/// The norm `a / |s|^l` as an exact value.
pub fn norm_value(bid: &SingleMindedBid, l: Exponent) -> Money {
    let size = bid.bundle.len().max(1) as u64;
    &Money::from(&bid.amount) * &Money::int_power(size, -l.as_ratio())
}

/// Compares the norms of two bids exactly.
pub fn norm_compare(b1: &SingleMindedBid, b2: &SingleMindedBid, l: Exponent) -> Ordering {
    let q = l.denom() as usize;
    let p = l.numer() as usize;
    let s1 = BigInt::from(b1.bundle.len().max(1));
    let s2 = BigInt::from(b2.bundle.len().max(1));
    // (n1/d1)^q * s2^p  vs  (n2/d2)^q * s1^p, cleared of denominators
    let lhs = num_traits::pow(b1.amount.numer().clone(), q)
        * num_traits::pow(b2.amount.denom().clone(), q)
        * num_traits::pow(s2, p);
    let rhs = num_traits::pow(b2.amount.numer().clone(), q)
        * num_traits::pow(b1.amount.denom().clone(), q)
        * num_traits::pow(s1, p);
    lhs.cmp(&rhs)
}

/// Bids in decreasing norm order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    /// Bid indices, best first.
    pub order: Vec<usize>,
    /// Comparison key of each bid (indexed by bid), see [`norm_key`].
    pub keys: Vec<BigRational>,
    pub exponent: Exponent,
}

impl RankedList {
    /// Rank position of every bid (indexed by bid).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &b) in self.order.iter().enumerate() {
            pos[b] = p;
        }
        pos
    }

    /// Maximal runs of bids with equal norm, in rank order; singletons included.
    pub fn norm_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &b in &self.order {
            match groups.last_mut() {
                Some(g) if self.keys[g[0]] == self.keys[b] => g.push(b),
                _ => groups.push(vec![b]),
            }
        }
        groups
    }

    pub fn has_ties(&self) -> bool {
        self.norm_groups().iter().any(|g| g.len() > 1)
    }
}

/// Sorts the bids of `instance` by decreasing norm, resolving ties by `cfg.tie_rule`.
pub fn rank(instance: &AuctionInstance, cfg: &NormConfig) -> Result<RankedList> {
    let n = instance.bids.len();
    let keys: Vec<BigRational> = instance.bids.iter().map(|b| norm_key(b, cfg.exponent)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    match &cfg.tie_rule {
        TieRule::Canonical => order.sort_by(|&x, &y| {
            let (bx, by) = (&instance.bids[x], &instance.bids[y]);
            keys[y]
                .cmp(&keys[x])
                .then_with(|| by.amount.cmp(&bx.amount))
                .then_with(|| bx.bundle.bits().cmp(&by.bundle.bits()))
                .then_with(|| x.cmp(&y))
        }),
        TieRule::ExplicitPermutation(priority) => {
            let mut prio = vec![usize::MAX; n];
            for (p, &b) in priority.iter().enumerate() {
                if b >= n || prio[b] != usize::MAX {
                    return Err(Error::InvalidTieOrder(format!(
                        "{priority:?} is not a permutation of 0..{n}"
                    )));
                }
                prio[b] = p;
            }
            if priority.len() != n {
                return Err(Error::InvalidTieOrder(format!(
                    "{priority:?} is not a permutation of 0..{n}"
                )));
            }
            order.sort_by(|&x, &y| keys[y].cmp(&keys[x]).then_with(|| prio[x].cmp(&prio[y])));
        }
        TieRule::Reject => {
            order.sort_by(|&x, &y| keys[y].cmp(&keys[x]).then_with(|| x.cmp(&y)));
            if let Some(w) = order.windows(2).find(|w| keys[w[0]] == keys[w[1]]) {
                return Err(Error::TiesPresent {
                    first: w[0],
                    second: w[1],
                });
            }
        }
    }
    Ok(RankedList {
        order,
        keys,
        exponent: cfg.exponent,
    })
}

/// The declared amount at which a bid on a bundle of `size` goods has norm `target`.
pub fn amount_for_norm(size: usize, target: &Money, l: Exponent) -> Money {
    target * &Money::int_power(size.max(1) as u64, l.as_ratio())
}

/// `true` iff no two bids of the instance have equal norms under any of `exponents`.
pub fn is_tie_free(instance: &AuctionInstance, exponents: &[Exponent]) -> bool {
    exponents.iter().all(|&l| {
        let mut keys: Vec<BigRational> = instance.bids.iter().map(|b| norm_key(b, l)).collect();
        keys.sort();
        keys.windows(2).all(|w| w[0] != w[1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Bundle;

    fn bid(goods: &[usize], amount: &str) -> SingleMindedBid {
        SingleMindedBid::new(
            "x",
            Bundle::from_indices(goods.iter().copied()),
            parse_amount(amount).unwrap(),
        )
    }

    fn greedyall() -> AuctionInstance {
        let mut inst = AuctionInstance::new(&["a", "b"]);
        inst.add_bid("Red", &["a"], "10").unwrap();
        inst.add_bid("Green", &["a", "b"], "19").unwrap();
        inst.add_bid("Blue", &["b"], "8").unwrap();
        inst
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("1/2".parse::<Exponent>().unwrap(), Exponent::HALF);
        assert_eq!("0.5".parse::<Exponent>().unwrap(), Exponent::HALF);
        assert_eq!("2/4".parse::<Exponent>().unwrap(), Exponent::HALF);
        assert_eq!("1".parse::<Exponent>().unwrap(), Exponent::ONE);
        assert_eq!("0".parse::<Exponent>().unwrap(), Exponent::ZERO);
        assert!("-1".parse::<Exponent>().is_err());
        assert!("1/0".parse::<Exponent>().is_err());
        assert_eq!(Exponent::HALF.to_string(), "1/2");
    }

    #[test]
    fn compare_examples() {
        assert_eq!(
            norm_compare(&bid(&[0], "10"), &bid(&[0, 1], "19"), Exponent::ONE),
            Ordering::Greater
        );
        assert_eq!(
            norm_compare(&bid(&[0, 1], "20"), &bid(&[0, 1], "20"), Exponent::ONE),
            Ordering::Equal
        );
        // 1/1 vs 2/sqrt(4)
        assert_eq!(
            norm_compare(&bid(&[0], "1"), &bid(&[0, 1, 2, 3], "2"), Exponent::HALF),
            Ordering::Equal
        );
    }

    #[test]
    fn norm_values_agree_with_comparison() {
        let a = bid(&[0, 1], "3");
        let b = bid(&[0, 1, 2], "4");
        for l in [Exponent::ZERO, Exponent::HALF, Exponent::ONE] {
            assert_eq!(norm_value(&a, l).cmp(&norm_value(&b, l)), norm_compare(&a, &b, l));
        }
        assert_eq!(norm_value(&bid(&[0, 1], "19"), Exponent::ONE).to_decimal(12), "9.5");
    }

    #[test]
    fn ranks_greedyall() {
        let r = rank(&greedyall(), &NormConfig::default()).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        assert_eq!(r.positions(), vec![0, 1, 2]);
        assert!(!r.has_ties());
    }

    #[test]
    fn singleton_ranking() {
        let mut inst = AuctionInstance::new(&["a"]);
        inst.add_bid("Solo", &["a"], "3").unwrap();
        assert_eq!(rank(&inst, &NormConfig::default()).unwrap().order, vec![0]);
    }

    #[test]
    fn reject_reports_ties() {
        let mut inst = AuctionInstance::new(&["a", "b", "c", "d"]);
        inst.add_bid("Green", &["a", "b"], "1").unwrap();
        inst.add_bid("Red", &["c", "d"], "1").unwrap();
        inst.add_bid("Black", &["a", "c"], "1").unwrap();
        let cfg = NormConfig::new(Exponent::ONE, TieRule::Reject);
        assert!(matches!(rank(&inst, &cfg), Err(Error::TiesPresent { .. })));
        let canon = rank(&inst, &NormConfig::default()).unwrap();
        // equal amounts: smaller bundle bitset first
        assert_eq!(canon.order, vec![0, 2, 1]);
        assert_eq!(canon.norm_groups(), vec![vec![0, 2, 1]]);
    }

    #[test]
    fn explicit_permutation_orders_ties_only() {
        let mut inst = greedyall();
        inst.add_bid("Grey", &["a"], "10").unwrap(); // ties with Red
        let cfg = NormConfig::new(Exponent::ONE, TieRule::ExplicitPermutation(vec![3, 2, 1, 0]));
        assert_eq!(rank(&inst, &cfg).unwrap().order, vec![3, 0, 1, 2]);
        let bad = NormConfig::new(Exponent::ONE, TieRule::ExplicitPermutation(vec![0, 0, 1, 2]));
        assert!(matches!(rank(&inst, &bad), Err(Error::InvalidTieOrder(_))));
    }

    #[test]
    fn tie_rule_round_trips_through_strings() {
        for r in [
            TieRule::Canonical,
            TieRule::Reject,
            TieRule::ExplicitPermutation(vec![2, 0, 1]),
        ] {
            assert_eq!(r.to_string().parse::<TieRule>().unwrap(), r);
        }
    }
}
