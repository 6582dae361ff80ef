//! Executable axiom checks and an exhaustive single-minded deviation search.
//!
//! The critical value of a bid is located from the finite set of amounts at
//! which the mechanism's outcome can change (its thresholds). Probes sit
//! strictly inside the gaps between thresholds, never on one, so verdicts do
//! not depend on how a mechanism treats a bid declared exactly at `v_c`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::document::{decimal, InstanceDocument};
use crate::error::{Error, Result};
use crate::mechanism::{norm_crossings, Mechanism};
use crate::model::{bidder_utility, AuctionInstance, Bundle, SingleMindedBid};
use crate::money::{format_amount, Money};
use crate::norm::{is_tie_free, Exponent};

/// Probes sit this fraction (as a power of two) of the local gap away from a threshold.
pub const PROBE_SHIFT: u32 = 20;
/// Goods limit for the exhaustive bundle enumeration.
pub const DEVIATION_MAX_GOODS: usize = 16;
/// Halvings performed by the bisection fallback.
pub const BISECTION_STEPS: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CriticalValue {
    Finite(Money),
    /// Bracketed by bisection: denied at `lo` (or `lo` is zero), granted at `hi`.
    Approx {
        lo: BigRational,
        hi: BigRational,
    },
    Infinite,
}

impl CriticalValue {
    /// Whether `x` agrees with this value within `eps`.
    pub fn matches(&self, x: &Money, eps: &BigRational) -> bool {
        match self {
            CriticalValue::Finite(v) => {
                let e = Money::from(eps);
                let d = x - v;
                d <= e && -d <= e
            }
            CriticalValue::Approx { lo, hi } => {
                let lo = Money::from(lo - eps);
                let hi = Money::from(hi + eps);
                &lo <= x && x <= &hi
            }
            CriticalValue::Infinite => false,
        }
    }
}

impl std::fmt::Display for CriticalValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriticalValue::Finite(v) => write!(f, "{v}"),
            CriticalValue::Approx { lo, hi } => write!(f, "[{}, {}]", format_amount(lo), format_amount(hi)),
            CriticalValue::Infinite => write!(f, "inf"),
        }
    }
}

fn granted_at(
    mech: &dyn Mechanism,
    instance: &AuctionInstance,
    j: usize,
    bundle: Bundle,
    amount: &BigRational,
) -> Result<(Bundle, Money)> {
    let bid = instance.bids[j].with_bundle(bundle).with_amount(amount.clone());
    mech.bid_result(&instance.with_declaration(j, bid), j)
}

fn two_pow(shift: u32) -> BigRational {
    BigRational::from_integer(BigInt::one() << shift)
}

/// Sorted distinct positive thresholds.
fn positive_sorted(mut t: Vec<Money>) -> Vec<Money> {
    t.retain(Money::is_positive);
    t.sort();
    t.dedup();
    t
}

/// Rational probes just below and just above every threshold, in increasing order.
///
/// Each gap between consecutive thresholds receives one probe near each end;
/// the topmost threshold gets a probe above it whose offset scales with its size.
fn probes_around(thresholds: &[Money], shift: u32) -> Vec<BigRational> {
    let scale = two_pow(shift);
    let mut out = Vec::with_capacity(2 * thresholds.len());
    let zero = Money::zero();
    for (i, t) in thresholds.iter().enumerate() {
        let prev = if i == 0 { &zero } else { &thresholds[i - 1] };
        let below_gap = (t - prev).scale(&scale.recip());
        out.push(Money::rational_between(&(t - &below_gap), t));
        let above_gap = match thresholds.get(i + 1) {
            Some(next) => (next - t).scale(&scale.recip()),
            None => t.scale(&scale.recip()),
        };
        out.push(Money::rational_between(t, &(t + &above_gap)));
    }
    out
}

/// The critical value of bid `j` for its declared bundle.
///
/// Uses the mechanism's thresholds when it reports them and falls back to
/// bisection otherwise.
pub fn critical_value(mech: &dyn Mechanism, instance: &AuctionInstance, j: usize) -> Result<CriticalValue> {
    if j >= instance.bids.len() {
        return Err(Error::NoSuchBid(j));
    }
    let s = instance.bids[j].bundle;
    let Some(thresholds) = mech.thresholds(instance, j, s)? else {
        return critical_value_by_bisection(mech, instance, j, None);
    };
    let thresholds = positive_sorted(thresholds);
    if thresholds.is_empty() {
        let probe = BigRational::one();
        let (g, _) = granted_at(mech, instance, j, s, &probe)?;
        return Ok(if g.is_empty() {
            CriticalValue::Infinite
        } else {
            CriticalValue::Finite(Money::zero())
        });
    }
    let probes = probes_around(&thresholds, PROBE_SHIFT);
    let mut first_grant: Option<usize> = None;
    for (p, v) in probes.iter().enumerate() {
        let (g, _) = granted_at(mech, instance, j, s, v)?;
        match (g.is_empty(), first_grant) {
            (false, None) => first_grant = Some(p),
            (true, Some(gp)) => {
                return Err(Error::NonMonotoneDetected {
                    bid: j,
                    granted_at: format_amount(&probes[gp]),
                    denied_at: format_amount(v),
                })
            }
            _ => {}
        }
    }
    Ok(match first_grant {
        None => CriticalValue::Infinite,
        Some(0) => CriticalValue::Finite(Money::zero()),
        // Probes 2i and 2i+1 straddle threshold i.
        Some(p) if p % 2 == 1 => CriticalValue::Finite(thresholds[p / 2].clone()),
        // Granted just below threshold p/2 but denied just above threshold p/2 - 1:
        // the switch lies inside a gap, so the thresholds were incomplete.
        Some(p) => {
            let (lo, hi) = bisect(mech, instance, j, s, probes[p - 1].clone(), probes[p].clone())?;
            CriticalValue::Approx { lo, hi }
        }
    })
}

fn bisect(
    mech: &dyn Mechanism,
    instance: &AuctionInstance,
    j: usize,
    s: Bundle,
    mut lo: BigRational,
    mut hi: BigRational,
) -> Result<(BigRational, BigRational)> {
    let two = BigRational::from_integer(2.into());
    for _ in 0..BISECTION_STEPS {
        let mid = (&lo + &hi) / &two;
        let (g, _) = granted_at(mech, instance, j, s, &mid)?;
        if g.is_empty() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Critical value by exponential search and bisection, without thresholds.
///
/// `ceiling` bounds the search; it defaults to `2^64` times the largest amount.
pub fn critical_value_by_bisection(
    mech: &dyn Mechanism,
    instance: &AuctionInstance,
    j: usize,
    ceiling: Option<BigRational>,
) -> Result<CriticalValue> {
    if j >= instance.bids.len() {
        return Err(Error::NoSuchBid(j));
    }
    let s = instance.bids[j].bundle;
    let top = instance
        .bids
        .iter()
        .map(|b| b.amount.clone())
        .max()
        .unwrap_or_else(BigRational::one)
        .max(BigRational::one());
    let ceiling = ceiling.unwrap_or_else(|| &top * two_pow(64));
    let mut hi = BigRational::one();
    loop {
        let (g, _) = granted_at(mech, instance, j, s, &hi)?;
        if !g.is_empty() {
            break;
        }
        if hi > ceiling {
            return Ok(CriticalValue::Infinite);
        }
        hi *= BigRational::from_integer(2.into());
    }
    let (lo, hi) = bisect(mech, instance, j, s, BigRational::zero(), hi)?;
    Ok(CriticalValue::Approx { lo, hi })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    Exactness,
    Monotonicity,
    Participation,
    Critical,
    TruthfulUtility,
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axiom::Exactness => "exactness",
            Axiom::Monotonicity => "monotonicity",
            Axiom::Participation => "participation",
            Axiom::Critical => "critical",
            Axiom::TruthfulUtility => "truthful-utility",
        })
    }
}

impl std::str::FromStr for Axiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exactness" => Axiom::Exactness,
            "monotonicity" => Axiom::Monotonicity,
            "participation" => Axiom::Participation,
            "critical" => Axiom::Critical,
            "truthful-utility" => Axiom::TruthfulUtility,
            other => return Err(Error::Parse(format!("unknown axiom {other:?}"))),
        })
    }
}

/// A replayable counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// Position of the instance in the checked sample.
    pub sample: usize,
    pub bid: usize,
    pub bidder: String,
    pub instance: InstanceDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<InstanceDocument>,
    pub details: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated { witness: Box<Witness> },
    Skipped { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    fn rank(&self) -> u8 {
        match self {
            Verdict::Violated { .. } => 2,
            Verdict::Holds => 1,
            Verdict::Skipped { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub axiom: Axiom,
    /// Individual assertions evaluated.
    pub checked: usize,
    pub verdict: Verdict,
}

impl AxiomEntry {
    fn new(axiom: Axiom, checked: usize, witness: Option<Witness>) -> Self {
        let verdict = match witness {
            Some(w) => Verdict::Violated { witness: Box::new(w) },
            None => Verdict::Holds,
        };
        AxiomEntry {
            axiom,
            checked,
            verdict,
        }
    }

    pub fn skipped(axiom: Axiom, reason: impl Into<String>) -> Self {
        AxiomEntry {
            axiom,
            checked: 0,
            verdict: Verdict::Skipped { reason: reason.into() },
        }
    }

    /// Combines two entries for the same axiom; the result does not depend on argument order.
    pub fn merge(self, other: AxiomEntry) -> AxiomEntry {
        let checked = self.checked + other.checked;
        let verdict = match (self.verdict, other.verdict) {
            (Verdict::Violated { witness: a }, Verdict::Violated { witness: b }) => Verdict::Violated {
                witness: if (a.sample, a.bid, &a.details) <= (b.sample, b.bid, &b.details) {
                    a
                } else {
                    b
                },
            },
            (Verdict::Skipped { reason: a }, Verdict::Skipped { reason: b }) => Verdict::Skipped { reason: a.min(b) },
            (a, b) => {
                if a.rank() >= b.rank() {
                    a
                } else {
                    b
                }
            }
        };
        AxiomEntry {
            axiom: self.axiom,
            checked,
            verdict,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub mechanism: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub instances: usize,
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    pub fn new(mechanism: impl Into<String>, seed: Option<u64>, instances: usize) -> Self {
        AxiomReport {
            mechanism: mechanism.into(),
            seed,
            instances,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: AxiomEntry) {
        self.entries.push(entry);
    }

    /// `true` iff no entry is violated.
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| !matches!(e.verdict, Verdict::Violated { .. }))
    }

    pub fn entry(&self, axiom: Axiom) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.axiom == axiom)
    }

    /// Merges reports over disjoint samples; entries are combined per axiom.
    pub fn merge(self, other: AxiomReport) -> AxiomReport {
        let mut by_axiom: BTreeMap<Axiom, AxiomEntry> = BTreeMap::new();
        for e in self.entries.into_iter().chain(other.entries) {
            let merged = match by_axiom.remove(&e.axiom) {
                Some(prev) => prev.merge(e),
                None => e,
            };
            by_axiom.insert(merged.axiom, merged);
        }
        AxiomReport {
            mechanism: self.mechanism,
            seed: self.seed.or(other.seed),
            instances: self.instances + other.instances,
            entries: by_axiom.into_values().collect(),
        }
    }
}

fn witness(
    sample: usize,
    instance: &AuctionInstance,
    bid: usize,
    modified: Option<&AuctionInstance>,
    details: String,
) -> Witness {
    Witness {
        sample,
        bid,
        bidder: instance.bids[bid].bidder.clone(),
        instance: InstanceDocument::from_instance(instance),
        modified: modified.map(InstanceDocument::from_instance),
        details,
    }
}

/// Every bid receives exactly its bundle or nothing.
pub fn check_exactness(mech: &dyn Mechanism, instances: &[AuctionInstance]) -> Result<AxiomEntry> {
    let mut checked = 0;
    for (n, inst) in instances.iter().enumerate() {
        let out = mech.run(inst)?;
        for (j, b) in inst.bids.iter().enumerate() {
            checked += 1;
            let g = out.allocation.granted_bundle(j);
            if !g.is_empty() && g != b.bundle {
                let details = format!("granted {:?} for a bid on {:?}", inst.labels(g), inst.labels(b.bundle));
                return Ok(AxiomEntry::new(
                    Axiom::Exactness,
                    checked,
                    Some(witness(n, inst, j, None, details)),
                ));
            }
        }
    }
    Ok(AxiomEntry::new(Axiom::Exactness, checked, None))
}

/// Every denied bid pays exactly zero.
pub fn check_participation(mech: &dyn Mechanism, instances: &[AuctionInstance]) -> Result<AxiomEntry> {
    let mut checked = 0;
    for (n, inst) in instances.iter().enumerate() {
        let out = mech.run(inst)?;
        for j in 0..inst.bids.len() {
            if out.is_granted(j) {
                continue;
            }
            checked += 1;
            if !out.payment(j).is_zero() {
                let details = format!("denied bid pays {}", decimal(out.payment(j)));
                return Ok(AxiomEntry::new(
                    Axiom::Participation,
                    checked,
                    Some(witness(n, inst, j, None, details)),
                ));
            }
        }
    }
    Ok(AxiomEntry::new(Axiom::Participation, checked, None))
}

/// Attempts per perturbation before giving up on finding a tie-free one.
const PERTURBATION_ATTEMPTS: usize = 16;

fn random_raise(rng: &mut ChaCha8Rng, amount: &BigRational) -> BigRational {
    let num: i64 = rng.gen_range(1..=1_000_000);
    let base = if amount.is_positive() {
        amount.clone()
    } else {
        BigRational::one()
    };
    amount + base * BigRational::new(num.into(), 1_000_000.into())
}

fn random_proper_subset(rng: &mut ChaCha8Rng, s: Bundle) -> Bundle {
    let goods: Vec<usize> = s.iter().collect();
    loop {
        let pick = Bundle::from_indices(goods.iter().copied().filter(|_| rng.gen_bool(0.5)));
        if !pick.is_empty() && pick != s {
            return pick;
        }
    }
}

/// Granted bids stay granted when they offer more money or ask for fewer goods.
///
/// Each instance receives `perturbations` random modifications of a random
/// granted bid. For norm-based mechanisms, perturbations that would create a
/// norm tie are redrawn.
pub fn check_monotonicity(
    mech: &dyn Mechanism,
    instances: &[AuctionInstance],
    perturbations: usize,
    seed: u64,
) -> Result<AxiomEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps: Vec<Exponent> = mech.norm().map(|c| vec![c.exponent]).unwrap_or_default();
    let mut checked = 0;
    for (n, inst) in instances.iter().enumerate() {
        let out = mech.run(inst)?;
        let winners: Vec<usize> = out.allocation.winners().collect();
        if winners.is_empty() {
            continue;
        }
        for _ in 0..perturbations {
            let mut chosen = None;
            for _ in 0..PERTURBATION_ATTEMPTS {
                let j = winners[rng.gen_range(0..winners.len())];
                let b = &inst.bids[j];
                let shrink = b.bundle.len() > 1 && rng.gen_bool(0.5);
                let bid = if shrink {
                    b.with_bundle(random_proper_subset(&mut rng, b.bundle))
                } else {
                    b.with_amount(random_raise(&mut rng, &b.amount))
                };
                let modified = inst.with_declaration(j, bid);
                if is_tie_free(&modified, &exps) {
                    chosen = Some((j, modified));
                    break;
                }
            }
            let Some((j, modified)) = chosen else { continue };
            checked += 1;
            let (g, _) = mech.bid_result(&modified, j)?;
            if g.is_empty() {
                let m = &modified.bids[j];
                let details = format!(
                    "granted at {} on {:?}, denied at {} on {:?}",
                    format_amount(&inst.bids[j].amount),
                    inst.labels(inst.bids[j].bundle),
                    format_amount(&m.amount),
                    modified.labels(m.bundle)
                );
                return Ok(AxiomEntry::new(
                    Axiom::Monotonicity,
                    checked,
                    Some(witness(n, inst, j, Some(&modified), details)),
                ));
            }
        }
    }
    Ok(AxiomEntry::new(Axiom::Monotonicity, checked, None))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tolerance {
    Exact,
    Epsilon(BigRational),
}

/// Every granted bid pays its critical value.
pub fn check_critical(
    mech: &dyn Mechanism,
    instances: &[AuctionInstance],
    tolerance: &Tolerance,
) -> Result<AxiomEntry> {
    let eps = match tolerance {
        Tolerance::Exact => BigRational::zero(),
        Tolerance::Epsilon(e) => e.clone(),
    };
    let mut checked = 0;
    for (n, inst) in instances.iter().enumerate() {
        let out = mech.run(inst)?;
        for j in out.allocation.winners() {
            checked += 1;
            let vc = critical_value(mech, inst, j)?;
            let pay = out.payment(j);
            let ok = match (&vc, tolerance) {
                (CriticalValue::Finite(v), Tolerance::Exact) => v == pay,
                _ => vc.matches(pay, &eps),
            };
            if !ok {
                let details = format!("pays {} but the critical value is {}", decimal(pay), vc);
                return Ok(AxiomEntry::new(
                    Axiom::Critical,
                    checked,
                    Some(witness(n, inst, j, None, details)),
                ));
            }
        }
    }
    Ok(AxiomEntry::new(Axiom::Critical, checked, None))
}

/// Bidders declaring their true types never end with negative utility.
///
/// Instances without true types are checked with their declarations taken as true.
pub fn check_truthful_utility(mech: &dyn Mechanism, instances: &[AuctionInstance]) -> Result<AxiomEntry> {
    let mut checked = 0;
    for (n, inst) in instances.iter().enumerate() {
        let truthful = truthful_instance(inst);
        let out = mech.run(&truthful)?;
        for (j, b) in truthful.bids.iter().enumerate() {
            if b.is_reserve {
                continue;
            }
            checked += 1;
            let u = bidder_utility(b, out.allocation.granted_bundle(j), out.payment(j));
            if u.is_negative() {
                let details = format!("truthful utility {}", decimal(&u));
                return Ok(AxiomEntry::new(
                    Axiom::TruthfulUtility,
                    checked,
                    Some(witness(n, &truthful, j, None, details)),
                ));
            }
        }
    }
    Ok(AxiomEntry::new(Axiom::TruthfulUtility, checked, None))
}

/// The instance with every bidder that has a true type declaring it.
pub fn truthful_instance(instance: &AuctionInstance) -> AuctionInstance {
    if instance.true_types.is_empty() {
        return instance.clone().declared_as_true();
    }
    let mut out = instance.clone();
    for b in out.bids.iter_mut() {
        if let Some(t) = instance.true_types.get(&b.bidder) {
            b.bundle = t.bundle;
            b.amount = t.amount.clone();
        }
    }
    out
}

/// Runs the requested checks and assembles a report.
pub fn check_axioms(
    mech: &dyn Mechanism,
    instances: &[AuctionInstance],
    axioms: &[Axiom],
    perturbations: usize,
    seed: u64,
    tolerance: &Tolerance,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::new(mech.name(), Some(seed), instances.len());
    for &a in axioms {
        let entry = match a {
            Axiom::Exactness => check_exactness(mech, instances)?,
            Axiom::Participation => check_participation(mech, instances)?,
            Axiom::Monotonicity => check_monotonicity(mech, instances, perturbations, seed)?,
            Axiom::Critical => match check_critical(mech, instances, tolerance) {
                Err(Error::NonMonotoneDetected {
                    bid,
                    granted_at,
                    denied_at,
                }) => AxiomEntry::skipped(
                    Axiom::Critical,
                    format!(
                        "bid {bid} is granted at {granted_at} but denied at {denied_at}, so no critical value exists"
                    ),
                ),
                other => other?,
            },
            Axiom::TruthfulUtility => check_truthful_utility(mech, instances)?,
        };
        report.push(entry);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misreport {
    pub bundle: Vec<String>,
    pub amount: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub bid: usize,
    pub bidder: String,
    pub true_type: Misreport,
    pub misreport: Misreport,
    pub truthful_utility: String,
    pub deviating_utility: String,
    /// Outcome of the misreport: granted bundle and payment.
    pub granted: Vec<String>,
    pub payment: String,
    /// Declarations tried.
    pub candidates: usize,
    pub search_space: String,
}

/// Search statistics for a bidder without a profitable deviation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeviationSearch {
    pub best: Option<DeviationReport>,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviationConfig {
    pub probe_shift: u32,
    /// Exponent used for candidate thresholds when the mechanism reports none.
    pub fallback_exponent: Exponent,
}

impl Default for DeviationConfig {
    fn default() -> Self {
        DeviationConfig {
            probe_shift: PROBE_SHIFT,
            fallback_exponent: Exponent::ONE,
        }
    }
}

/// Exhaustively searches single-minded misreports ⟨s', v'⟩ of bid `j`.
///
/// Every non-empty bundle is tried with declared values 0, the true value,
/// and probes just below and above every threshold of that bundle. The
/// returned deviation is the most profitable one found and is strictly
/// better than telling the truth; completeness assumes the outcome is
/// constant between consecutive thresholds.
pub fn find_profitable_deviation(
    mech: &dyn Mechanism,
    instance: &AuctionInstance,
    j: usize,
    cfg: &DeviationConfig,
) -> Result<DeviationSearch> {
    let k = instance.num_goods();
    if k > DEVIATION_MAX_GOODS {
        return Err(Error::BundleSpaceTooLarge {
            goods: k,
            limit: DEVIATION_MAX_GOODS,
        });
    }
    if j >= instance.bids.len() {
        return Err(Error::NoSuchBid(j));
    }
    let bidder = instance.bids[j].bidder.clone();
    let truth: SingleMindedBid = instance
        .true_types
        .get(&bidder)
        .cloned()
        .ok_or_else(|| Error::ValuationUndefined(format!("no true type for {bidder}")))?;
    let declare = |bundle: Bundle, amount: BigRational| {
        let mut b = instance.bids[j].with_bundle(bundle).with_amount(amount);
        b.is_reserve = instance.bids[j].is_reserve;
        instance.with_declaration(j, b)
    };
    let truthful = declare(truth.bundle, truth.amount.clone());
    let (g, p) = mech.bid_result(&truthful, j)?;
    let base = bidder_utility(&truth, g, &p);

    let mut best: Option<(Money, Bundle, BigRational, Bundle, Money)> = None;
    let mut candidates = 0;
    let probe_zero = BigRational::zero();
    for s in instance.all_goods().nonempty_subsets() {
        let thresholds = match mech.thresholds(instance, j, s)? {
            Some(t) => t,
            None => norm_crossings(instance, j, s, cfg.fallback_exponent),
        };
        let thresholds = positive_sorted(thresholds);
        let mut values = vec![probe_zero.clone(), truth.amount.clone()];
        values.extend(probes_around(&thresholds, cfg.probe_shift));
        values.sort();
        values.dedup();
        for v in values {
            candidates += 1;
            let (g, p) = match mech.bid_result(&declare(s, v.clone()), j) {
                Ok(r) => r,
                Err(Error::TiesPresent { .. }) => continue,
                Err(e) => return Err(e),
            };
            let u = bidder_utility(&truth, g, &p);
            let better = match &best {
                Some((bu, ..)) => &u > bu,
                None => u > base,
            };
            if better {
                best = Some((u, s, v, g, p));
            }
        }
    }
    let space = format!(
        "{} bundles; values 0, the true value, and probes 2^-{} of the local gap around each threshold; complete when outcomes are constant between thresholds",
        instance.all_goods().nonempty_subsets().count(),
        cfg.probe_shift
    );
    let best = best.map(|(u, s, v, g, p)| DeviationReport {
        bid: j,
        bidder: bidder.clone(),
        true_type: Misreport {
            bundle: instance.labels(truth.bundle),
            amount: format_amount(&truth.amount),
        },
        misreport: Misreport {
            bundle: instance.labels(s),
            amount: format_amount(&v),
        },
        truthful_utility: decimal(&base),
        deviating_utility: decimal(&u),
        granted: instance.labels(g),
        payment: decimal(&p),
        candidates,
        search_space: space,
    });
    Ok(DeviationSearch { best, candidates })
}

/// Searches every bidder with a known true type.
pub fn deviation_sweep(
    mech: &dyn Mechanism,
    instance: &AuctionInstance,
    cfg: &DeviationConfig,
) -> Result<Vec<DeviationReport>> {
    let mut out = Vec::new();
    for (j, b) in instance.bids.iter().enumerate() {
        if b.is_reserve || !instance.true_types.contains_key(&b.bidder) {
            continue;
        }
        if let Some(r) = find_profitable_deviation(mech, instance, j, cfg)?.best {
            out.push(r);
        }
    }
    Ok(out)
}
