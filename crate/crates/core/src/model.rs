//! Goods, single-minded bids, instances, allocations and outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::greedy::GreedyTrace;
use crate::money::{parse_amount, Money};

/// Largest goods universe a [`Bundle`] can address.
pub const MAX_GOODS: usize = 63;

/// A set of goods, as a bitset over the instance's good indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bundle(u64);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub const fn from_bits(bits: u64) -> Self {
        Bundle(bits)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Bundle(indices.into_iter().fold(0, |acc, i| {
            assert!(i < 64, "good index {i} out of range");
            acc | 1 << i
        }))
    }

    /// The bundle of the first `k` goods.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_GOODS);
        Bundle((1u64 << k) - 1)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, good: usize) -> bool {
        good < 64 && self.0 >> good & 1 == 1
    }

    pub fn intersects(self, other: Bundle) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset_of(self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Bundle) -> Bundle {
        Bundle(self.0 | other.0)
    }

    pub fn difference(self, other: Bundle) -> Bundle {
        Bundle(self.0 & !other.0)
    }

    /// Good indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }

    /// All non-empty subsets, in increasing bit order.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = Bundle> {
        let full = self.0;
        let mut sub = 0u64;
        let mut done = full == 0;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            sub = sub.wrapping_sub(full) & full;
            if sub == 0 {
                done = true;
                return None;
            }
            Some(Bundle(sub))
        })
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Good {
    pub id: String,
}

/// A declared single-minded type: the bidder wants `bundle` and values it at `amount`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SingleMindedBid {
    pub bidder: String,
    pub bundle: Bundle,
    pub amount: BigRational,
    /// Placed by the auctioneer to withhold goods below a price.
    pub is_reserve: bool,
}

impl SingleMindedBid {
    pub fn new(bidder: impl Into<String>, bundle: Bundle, amount: BigRational) -> Self {
        SingleMindedBid {
            bidder: bidder.into(),
            bundle,
            amount,
            is_reserve: false,
        }
    }

    pub fn with_amount(&self, amount: BigRational) -> Self {
        SingleMindedBid { amount, ..self.clone() }
    }

    pub fn with_bundle(&self, bundle: Bundle) -> Self {
        SingleMindedBid { bundle, ..self.clone() }
    }

    /// Single-minded valuation with free disposal.
    pub fn valuation(&self, granted: Bundle) -> BigRational {
        if !self.bundle.is_empty() && self.bundle.is_subset_of(granted) {
            self.amount.clone()
        } else {
            BigRational::zero()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuctionInstance {
    pub goods: Vec<Good>,
    pub bids: Vec<SingleMindedBid>,
    /// True types keyed by bidder id, when declared and true types are studied apart.
    pub true_types: BTreeMap<String, SingleMindedBid>,
}

impl AuctionInstance {
    pub fn new<S: AsRef<str>>(goods: &[S]) -> Self {
        AuctionInstance {
            goods: goods
                .iter()
                .map(|g| Good {
                    id: g.as_ref().to_string(),
                })
                .collect(),
            bids: Vec::new(),
            true_types: BTreeMap::new(),
        }
    }

    pub fn num_goods(&self) -> usize {
        self.goods.len()
    }

    pub fn all_goods(&self) -> Bundle {
        Bundle::full(self.goods.len().min(MAX_GOODS))
    }

    pub fn good_index(&self, label: &str) -> Option<usize> {
        self.goods.iter().position(|g| g.id == label)
    }

    /// Resolves good labels into a bundle.
    pub fn bundle<S: AsRef<str>>(&self, labels: &[S]) -> Result<Bundle> {
        let mut idx = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            match self.good_index(l) {
                Some(i) if i < MAX_GOODS => idx.push(i),
                _ => {
                    return Err(Error::Validation(vec![Violation {
                        bid: None,
                        kind: ViolationKind::UnknownGood(l.to_string()),
                    }]))
                }
            }
        }
        Ok(Bundle::from_indices(idx))
    }

    pub fn labels(&self, bundle: Bundle) -> Vec<String> {
        bundle
            .iter()
            .map(|i| {
                self.goods
                    .get(i)
                    .map(|g| g.id.clone())
                    .unwrap_or_else(|| format!("#{i}"))
            })
            .collect()
    }

    /// Appends a bid and returns its index.
    pub fn add_bid<S: AsRef<str>>(&mut self, bidder: &str, goods: &[S], amount: &str) -> Result<usize> {
        let bundle = self.bundle(goods)?;
        let amount = parse_amount(amount).map_err(|e| Error::Parse(e.to_string()))?;
        self.bids.push(SingleMindedBid::new(bidder, bundle, amount));
        Ok(self.bids.len() - 1)
    }

    pub fn add_reserve<S: AsRef<str>>(&mut self, id: &str, goods: &[S], amount: &str) -> Result<usize> {
        let i = self.add_bid(id, goods, amount)?;
        self.bids[i].is_reserve = true;
        Ok(i)
    }

    pub fn set_true_type<S: AsRef<str>>(&mut self, bidder: &str, goods: &[S], amount: &str) -> Result<()> {
        let bundle = self.bundle(goods)?;
        let amount = parse_amount(amount).map_err(|e| Error::Parse(e.to_string()))?;
        self.true_types
            .insert(bidder.to_string(), SingleMindedBid::new(bidder, bundle, amount));
        Ok(())
    }

    /// Records every non-reserve declaration as its bidder's true type.
    pub fn declared_as_true(mut self) -> Self {
        self.true_types = self
            .bids
            .iter()
            .filter(|b| !b.is_reserve)
            .map(|b| (b.bidder.clone(), b.clone()))
            .collect();
        self
    }

    /// The same instance with bid `j` replaced by `bid`.
    pub fn with_declaration(&self, j: usize, bid: SingleMindedBid) -> Self {
        let mut out = self.clone();
        out.bids[j] = bid;
        out
    }

    /// The bid index of a bidder id.
    pub fn bid_of(&self, bidder: &str) -> Option<usize> {
        self.bids.iter().position(|b| b.bidder == bidder)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    TooManyGoods(usize),
    DuplicateGood(String),
    EmptyBundle,
    UnknownGood(String),
    NegativeAmount,
    DuplicateBidder(String),
    TrueTypeInvalid { bidder: String, reason: String },
}

/// One broken invariant; `bid` is the offending bid index when there is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub bid: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(b) = self.bid {
            write!(f, "bid {b}: ")?;
        }
        match &self.kind {
            ViolationKind::TooManyGoods(k) => write!(f, "{k} goods exceeds the limit of {MAX_GOODS}"),
            ViolationKind::DuplicateGood(g) => write!(f, "duplicate good {g:?}"),
            ViolationKind::EmptyBundle => write!(f, "empty bundle"),
            ViolationKind::UnknownGood(g) => write!(f, "unknown good {g}"),
            ViolationKind::NegativeAmount => write!(f, "negative amount"),
            ViolationKind::DuplicateBidder(b) => write!(f, "duplicate bidder {b:?}"),
            ViolationKind::TrueTypeInvalid { bidder, reason } => {
                write!(f, "true type of {bidder:?}: {reason}")
            }
        }
    }
}

fn bundle_violations(bundle: Bundle, k: usize, bid: Option<usize>, out: &mut Vec<Violation>) {
    if bundle.is_empty() {
        out.push(Violation {
            bid,
            kind: ViolationKind::EmptyBundle,
        });
    }
    for g in bundle.iter().filter(|&g| g >= k) {
        out.push(Violation {
            bid,
            kind: ViolationKind::UnknownGood(format!("#{g}")),
        });
    }
}

/// Every broken instance invariant; empty iff the instance is valid.
pub fn validate_instance(instance: &AuctionInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = instance.goods.len();
    if k > MAX_GOODS {
        out.push(Violation {
            bid: None,
            kind: ViolationKind::TooManyGoods(k),
        });
    }
    let mut seen = BTreeSet::new();
    for g in &instance.goods {
        if !seen.insert(g.id.as_str()) {
            out.push(Violation {
                bid: None,
                kind: ViolationKind::DuplicateGood(g.id.clone()),
            });
        }
    }
    let mut bidders = BTreeSet::new();
    for (i, b) in instance.bids.iter().enumerate() {
        bundle_violations(b.bundle, k, Some(i), &mut out);
        if b.amount.is_negative() {
            out.push(Violation {
                bid: Some(i),
                kind: ViolationKind::NegativeAmount,
            });
        }
        if !bidders.insert(b.bidder.as_str()) {
            out.push(Violation {
                bid: Some(i),
                kind: ViolationKind::DuplicateBidder(b.bidder.clone()),
            });
        }
    }
    for (id, t) in &instance.true_types {
        let mut inner = Vec::new();
        bundle_violations(t.bundle, k, None, &mut inner);
        if t.amount.is_negative() {
            inner.push(Violation {
                bid: None,
                kind: ViolationKind::NegativeAmount,
            });
        }
        out.extend(inner.into_iter().map(|v| Violation {
            bid: None,
            kind: ViolationKind::TrueTypeInvalid {
                bidder: id.clone(),
                reason: v.to_string(),
            },
        }));
    }
    out
}

pub fn conflicts(b1: &SingleMindedBid, b2: &SingleMindedBid) -> bool {
    b1.bundle.intersects(b2.bundle)
}

/// Quasi-linear utility of a single-minded bidder: valuation of what it got minus what it paid.
pub fn bidder_utility(true_type: &SingleMindedBid, granted: Bundle, payment: &Money) -> Money {
    &Money::from(true_type.valuation(granted)) - payment
}

/// Grants: bid index to the bundle it receives.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Allocation {
    pub grants: BTreeMap<usize, Bundle>,
}

impl Allocation {
    pub fn grant(&mut self, bid: usize, bundle: Bundle) {
        self.grants.insert(bid, bundle);
    }

    pub fn is_granted(&self, bid: usize) -> bool {
        self.grants.contains_key(&bid)
    }

    pub fn granted_bundle(&self, bid: usize) -> Bundle {
        self.grants.get(&bid).copied().unwrap_or(Bundle::EMPTY)
    }

    pub fn winners(&self) -> impl Iterator<Item = usize> + '_ {
        self.grants.keys().copied()
    }

    pub fn is_conflict_free(&self) -> bool {
        let mut used = Bundle::EMPTY;
        for b in self.grants.values() {
            if used.intersects(*b) {
                return false;
            }
            used = used.union(*b);
        }
        true
    }
}

/// Sum of the declared amounts of granted bids.
pub fn allocation_value(instance: &AuctionInstance, allocation: &Allocation) -> BigRational {
    allocation
        .winners()
        .map(|i| &instance.bids[i].amount)
        .fold(BigRational::zero(), |acc, a| acc + a)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub allocation: Allocation,
    /// Payment of each bid, indexed like `instance.bids`.
    pub payments: Vec<Money>,
    /// Payments collected from non-reserve bids.
    pub revenue: Money,
    /// Utility per bid index, for bidders with a known true type.
    pub utilities: Option<BTreeMap<usize, Money>>,
    pub trace: Option<GreedyTrace>,
}

impl Outcome {
    pub fn assemble(
        instance: &AuctionInstance,
        allocation: Allocation,
        payments: Vec<Money>,
        trace: Option<GreedyTrace>,
    ) -> Self {
        let revenue = instance
            .bids
            .iter()
            .zip(&payments)
            .filter(|(b, _)| !b.is_reserve)
            .map(|(_, p)| p)
            .sum();
        let utilities = if instance.true_types.is_empty() {
            None
        } else {
            Some(
                instance
                    .bids
                    .iter()
                    .enumerate()
                    .filter_map(|(i, b)| {
                        let t = instance.true_types.get(&b.bidder)?;
                        Some((i, bidder_utility(t, allocation.granted_bundle(i), &payments[i])))
                    })
                    .collect(),
            )
        };
        Outcome {
            allocation,
            payments,
            revenue,
            utilities,
            trace,
        }
    }

    pub fn empty(instance: &AuctionInstance) -> Self {
        Outcome::assemble(
            instance,
            Allocation::default(),
            vec![Money::zero(); instance.bids.len()],
            None,
        )
    }

    pub fn is_granted(&self, bid: usize) -> bool {
        self.allocation.is_granted(bid)
    }

    pub fn payment(&self, bid: usize) -> &Money {
        &self.payments[bid]
    }

    pub fn utility(&self, bid: usize) -> Option<&Money> {
        self.utilities.as_ref()?.get(&bid)
    }
}
