//! JSON documents for instances and outcomes.
//!
//! Amounts travel as strings so rationals survive the round trip: finite
//! decimals are written as decimals, anything else as `n/d`. Payments and
//! revenues in outcome documents are rendered to 12 significant digits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::SolverKind;
use crate::greedy::BidStatus;
use crate::model::Outcome;
use crate::model::{validate_instance, AuctionInstance, SingleMindedBid, Violation, ViolationKind};
use crate::money::{format_amount, parse_amount, Money};
use crate::norm::norm_value;
use crate::norm::NormConfig;

/// Significant digits used for payments and revenues in documents.
pub const DECIMAL_DIGITS: usize = 12;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidEntry {
    pub bidder: String,
    pub bundle: Vec<String>,
    pub amount: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub reserve: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub bidder: String,
    pub bundle: Vec<String>,
    pub amount: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub goods: Vec<String>,
    pub bids: Vec<BidEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_types: Vec<TypeEntry>,
}

impl InstanceDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn render(&self) -> String {
        render_json(self)
    }

    pub fn from_instance(instance: &AuctionInstance) -> Self {
        InstanceDocument {
            goods: instance.goods.iter().map(|g| g.id.clone()).collect(),
            bids: instance
                .bids
                .iter()
                .map(|b| BidEntry {
                    bidder: b.bidder.clone(),
                    bundle: instance.labels(b.bundle),
                    amount: format_amount(&b.amount),
                    reserve: b.is_reserve,
                })
                .collect(),
            true_types: instance
                .true_types
                .values()
                .map(|t| TypeEntry {
                    bidder: t.bidder.clone(),
                    bundle: instance.labels(t.bundle),
                    amount: format_amount(&t.amount),
                })
                .collect(),
        }
    }

    /// Builds and validates the instance; every problem found is reported at once.
    pub fn to_instance(&self) -> Result<AuctionInstance> {
        let mut inst = AuctionInstance::new(&self.goods);
        let mut violations = Vec::new();
        let resolve = |labels: &[String], bid: Option<usize>, violations: &mut Vec<Violation>| {
            let mut idx = Vec::new();
            for l in labels {
                match inst.good_index(l) {
                    Some(i) if i < crate::model::MAX_GOODS => idx.push(i),
                    _ => violations.push(Violation {
                        bid,
                        kind: ViolationKind::UnknownGood(l.clone()),
                    }),
                }
            }
            crate::model::Bundle::from_indices(idx)
        };
        let mut bids = Vec::with_capacity(self.bids.len());
        for (i, b) in self.bids.iter().enumerate() {
            let bundle = resolve(&b.bundle, Some(i), &mut violations);
            let amount = parse_amount(&b.amount).map_err(|e| Error::Parse(format!("bid {i}: {e}")))?;
            let mut bid = SingleMindedBid::new(b.bidder.clone(), bundle, amount);
            bid.is_reserve = b.reserve;
            bids.push(bid);
        }
        let mut types = Vec::new();
        for t in &self.true_types {
            let bundle = resolve(&t.bundle, None, &mut violations);
            let amount =
                parse_amount(&t.amount).map_err(|e| Error::Parse(format!("true type of {}: {e}", t.bidder)))?;
            types.push(SingleMindedBid::new(t.bidder.clone(), bundle, amount));
        }
        inst.bids = bids;
        inst.true_types = types.into_iter().map(|t| (t.bidder.clone(), t)).collect();
        if violations.is_empty() {
            violations = validate_instance(&inst);
        }
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::Validation(violations))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantedEntry {
    pub bidder: String,
    pub bundle: Vec<String>,
    pub payment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeniedEntry {
    pub bidder: String,
    pub blocked_by: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityEntry {
    pub bidder: String,
    pub utility: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDocument {
    pub mechanism: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_exponent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    pub granted: Vec<GrantedEntry>,
    pub denied: Vec<DeniedEntry>,
    pub revenue: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<UtilityEntry>>,
}

pub fn decimal(m: &Money) -> String {
    m.to_decimal(DECIMAL_DIGITS)
}

impl OutcomeDocument {
    pub fn from_outcome(
        mechanism: &str,
        norm: Option<&NormConfig>,
        solver: Option<SolverKind>,
        instance: &AuctionInstance,
        outcome: &Outcome,
    ) -> Self {
        let mut granted = Vec::new();
        let mut denied = Vec::new();
        for (i, b) in instance.bids.iter().enumerate() {
            if outcome.is_granted(i) {
                granted.push(GrantedEntry {
                    bidder: b.bidder.clone(),
                    bundle: instance.labels(outcome.allocation.granted_bundle(i)),
                    payment: decimal(outcome.payment(i)),
                    norm: norm.map(|c| decimal(&norm_value(b, c.exponent))),
                });
            } else {
                let by = match outcome.trace.as_ref().map(|t| &t.status[i]) {
                    Some(BidStatus::Denied { blocked_by }) => Some(*blocked_by),
                    _ => outcome
                        .allocation
                        .grants
                        .iter()
                        .find(|(_, s)| s.intersects(b.bundle))
                        .map(|(w, _)| *w),
                };
                denied.push(DeniedEntry {
                    bidder: b.bidder.clone(),
                    blocked_by: by.map(|w| instance.bids[w].bidder.clone()),
                });
            }
        }
        let utilities = outcome.utilities.as_ref().map(|u| {
            u.iter()
                .map(|(i, v)| UtilityEntry {
                    bidder: instance.bids[*i].bidder.clone(),
                    utility: decimal(v),
                })
                .collect()
        });
        OutcomeDocument {
            mechanism: mechanism.to_string(),
            norm_exponent: norm.map(|c| c.exponent.to_string()),
            tie_rule: norm.map(|c| c.tie_rule.to_string()),
            solver: solver.map(|s| s.to_string()),
            granted,
            denied,
            revenue: decimal(&outcome.revenue),
            utilities,
        }
    }

    pub fn render(&self) -> String {
        render_json(self)
    }
}

/// Pretty JSON with a trailing newline.
pub fn render_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}
