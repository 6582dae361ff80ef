//! Worked-example registry, approximation-ratio studies, tie-order revenue
//! enumeration and the complex-bidder demonstration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::axioms::{find_profitable_deviation, DeviationConfig};
use crate::error::{Error, Result};
use crate::exact::{clarke_with_greedy, optimal_allocation, run_gva, SolverKind};
use crate::generate::{generate, GeneratorParams};
use crate::greedy::{greedy_allocate, run_greedy};
use crate::mechanism::ClarkeGreedy;
use crate::model::{allocation_value, AuctionInstance, Bundle, Outcome};
use crate::money::{format_amount, format_significant, parse_amount, Money};
use crate::norm::{rank, Exponent, NormConfig, TieRule};

/// Upper limit on enumerated tie orders.
pub const MAX_TIE_ORDERS: u128 = 1_000_000;
/// The `1 + ε` margin of the tight families.
pub const TIGHT_EPSILON: (i64, i64) = (1, 1000);

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Stated outright in the worked example.
    Worked,
    /// Immediate from the definitions.
    Trivial,
    /// Computed independently (by hand or by an exact oracle).
    Derived,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub instance: AuctionInstance,
    pub exponent: Exponent,
}

pub const SCENARIOS: [&str; 11] = [
    "greedyall",
    "clarke-fail",
    "greedyp",
    "greedycomp",
    "complex-green",
    "impossibility-setup",
    "better",
    "notgood",
    "best",
    "worseeff",
    "worsenoteff",
];

fn build(goods: &[&str], bids: &[(&str, &[&str], &str)]) -> AuctionInstance {
    let mut i = AuctionInstance::new(goods);
    for (b, s, a) in bids {
        i.add_bid(b, s, a).expect("registry instances are valid");
    }
    i
}

fn q(s: &str) -> BigRational {
    parse_amount(s).expect("registry amounts parse")
}

/// Red, Green and Blue bidding 10 on `a`, 19 on `ab`, 8 on `b`.
fn three_bidders() -> AuctionInstance {
    build(
        &["a", "b"],
        &[
            ("Red", &["a"], "10"),
            ("Green", &["a", "b"], "19"),
            ("Blue", &["b"], "8"),
        ],
    )
}

/// The impossibility family: Red on `a` at 10, Green on `b` at `g_b` and on `ab` at `g_ab`.
pub fn impossibility_instance(g_b: &str, g_ab: &str) -> AuctionInstance {
    build(
        &["a", "b"],
        &[
            ("Red", &["a"], "10"),
            ("Green/b", &["b"], g_b),
            ("Green/ab", &["a", "b"], g_ab),
        ],
    )
}

/// Green's complex valuation in the `complex-green` scenario.
pub fn complex_green_valuation() -> BTreeMap<Bundle, BigRational> {
    [(0b01, "10"), (0b10, "10"), (0b11, "30")]
        .into_iter()
        .map(|(b, v)| (Bundle::from_bits(b), q(v)))
        .collect()
}

pub fn scenario(name: &str) -> Result<Scenario> {
    let (name, summary, instance) = match name {
        "greedyall" => (
            "greedyall",
            "greedy grants Red and Blue; the efficient allocation grants Green",
            three_bidders(),
        ),
        "clarke-fail" => (
            "clarke-fail",
            "Clarke payments on a greedy allocation charge Red more than his bid",
            three_bidders().declared_as_true(),
        ),
        "greedyp" => (
            "greedyp",
            "critical-value payments on the three-bidder instance",
            three_bidders(),
        ),
        "greedycomp" => (
            "greedycomp",
            "efficient greedy allocation whose winners pay nothing",
            build(
                &["a", "b"],
                &[
                    ("Red", &["a"], "20"),
                    ("Green", &["b"], "15"),
                    ("Blue", &["a", "b"], "20"),
                ],
            ),
        ),
        "complex-green" => {
            let mut i = build(
                &["a", "b"],
                &[
                    ("Red", &["a"], "12"),
                    ("Green/a", &["a"], "10"),
                    ("Green/b", &["b"], "10"),
                    ("Green/ab", &["a", "b"], "30"),
                ],
            );
            i.set_true_type("Red", &["a"], "12").expect("valid");
            (
                "complex-green",
                "a complex bidder gains by under-bidding on its pair",
                i,
            )
        }
        "impossibility-setup" => (
            "impossibility-setup",
            "single-minded Red against double-minded Green, in the g_ab > 20 regime",
            impossibility_instance("9", "21"),
        ),
        "better" => (
            "better",
            "three equal bids where greedy out-earns the GVA on average",
            build(
                &["a", "b", "c", "d"],
                &[
                    ("Green", &["a", "b"], "1"),
                    ("Red", &["c", "d"], "1"),
                    ("Black", &["a", "c"], "1"),
                ],
            ),
        ),
        "notgood" => (
            "notgood",
            "four equal bids where the GVA extracts the full surplus",
            build(
                &["a", "b", "c", "d"],
                &[
                    ("Green", &["a", "b"], "1"),
                    ("Red", &["c", "d"], "1"),
                    ("Black", &["a", "c"], "1"),
                    ("Blue", &["b", "d"], "1"),
                ],
            ),
        ),
        "best" => (
            "best",
            "strong complementarity: Red wins the pair under both mechanisms",
            build(
                &["a", "b"],
                &[
                    ("Red", &["a", "b"], "20"),
                    ("Green", &["a"], "9"),
                    ("Black", &["b"], "1"),
                ],
            ),
        ),
        "worseeff" => (
            "worseeff",
            "efficient greedy allocation with lower revenue than the GVA",
            build(
                &["a", "b"],
                &[
                    ("Green", &["a"], "20"),
                    ("Red", &["a", "b"], "37"),
                    ("Black", &["b"], "18"),
                ],
            ),
        ),
        "worsenoteff" => (
            "worsenoteff",
            "inefficient greedy allocation leaving b unsold",
            build(&["a", "b"], &[("Green", &["a"], "10"), ("Red", &["a", "b"], "19")]),
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(Scenario {
        name,
        summary,
        instance,
        exponent: Exponent::ONE,
    })
}

fn owns(owner: &str, bidder: &str) -> bool {
    bidder == owner || bidder.strip_prefix(owner).is_some_and(|r| r.starts_with('/'))
}

/// Utility of a player bidding through several single-minded agents named
/// `owner` or `owner/...`: its valuation of everything they won, minus all
/// they paid. The valuation is the best table entry contained in the union
/// (free disposal); an empty union is worth zero.
pub fn complex_player_utility(
    instance: &AuctionInstance,
    owner: &str,
    valuation: &BTreeMap<Bundle, BigRational>,
    outcome: &Outcome,
) -> Result<Money> {
    if valuation.keys().any(|b| b.is_empty()) {
        return Err(Error::ValuationUndefined(
            "the valuation table lists the empty bundle".into(),
        ));
    }
    let mine: Vec<usize> = (0..instance.bids.len())
        .filter(|&i| owns(owner, &instance.bids[i].bidder))
        .collect();
    let union = mine
        .iter()
        .fold(Bundle::EMPTY, |u, &i| u.union(outcome.allocation.granted_bundle(i)));
    let value = valuation
        .iter()
        .filter(|(b, _)| b.is_subset_of(union))
        .map(|(_, v)| v.clone())
        .max()
        .unwrap_or_else(BigRational::zero);
    let paid: Money = mine.iter().map(|&i| outcome.payment(i)).sum();
    Ok(Money::from(value) - paid)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReproRow {
    pub scenario: String,
    pub mechanism: String,
    pub quantity: String,
    pub expected: String,
    pub actual: String,
    pub provenance: Provenance,
    pub pass: bool,
}

fn show(m: &Money) -> String {
    match m.as_rational() {
        Some(r) => format_amount(&r),
        None => m.to_string(),
    }
}

struct Rows(Vec<ReproRow>);

impl Rows {
    fn amount(
        &mut self,
        scenario: &str,
        mechanism: &str,
        quantity: String,
        expected: &str,
        actual: &Money,
        provenance: Provenance,
    ) {
        let exp = Money::from(q(expected));
        self.0.push(ReproRow {
            scenario: scenario.into(),
            mechanism: mechanism.into(),
            quantity,
            expected: show(&exp),
            actual: show(actual),
            provenance,
            pass: &exp == actual,
        });
    }

    fn winners(
        &mut self,
        scenario: &str,
        mechanism: &str,
        instance: &AuctionInstance,
        expected: &[&str],
        outcome: &Outcome,
    ) {
        let actual: Vec<&str> = outcome
            .allocation
            .winners()
            .map(|i| instance.bids[i].bidder.as_str())
            .collect();
        self.0.push(ReproRow {
            scenario: scenario.into(),
            mechanism: mechanism.into(),
            quantity: "granted".into(),
            expected: expected.join(","),
            actual: actual.join(","),
            provenance: Provenance::Worked,
            pass: actual == expected,
        });
    }

    fn payments(
        &mut self,
        scenario: &str,
        mechanism: &str,
        instance: &AuctionInstance,
        expected: &[(&str, &str)],
        outcome: &Outcome,
    ) {
        for (bidder, amount) in expected {
            let j = instance.bid_of(bidder).expect("bidder in scenario");
            self.amount(
                scenario,
                mechanism,
                format!("payment of {bidder}"),
                amount,
                outcome.payment(j),
                Provenance::Worked,
            );
        }
    }
}

/// Runs every scenario under the mechanisms its worked example discusses and
/// compares each stated number exactly.
pub fn reproduce_all() -> Result<Vec<ReproRow>> {
    let greedy = NormConfig::default();
    let dp = SolverKind::BitmaskDP;
    let mut rows = Rows(Vec::new());

    let s = scenario("greedyall")?.instance;
    rows.winners("greedyall", "greedy", &s, &["Red", "Blue"], &run_greedy(&s, &greedy)?);
    let opt = run_gva(&s, dp)?;
    rows.winners("greedyall", "optimal", &s, &["Green"], &opt);
    let (_, v) = optimal_allocation(&s, dp)?;
    rows.amount(
        "greedyall",
        "optimal",
        "value".into(),
        "19",
        &Money::from(v),
        Provenance::Worked,
    );

    let s = scenario("clarke-fail")?.instance;
    let out = clarke_with_greedy(&s, &greedy)?;
    rows.payments("clarke-fail", "clarke-greedy", &s, &[("Red", "11")], &out);
    rows.amount(
        "clarke-fail",
        "clarke-greedy",
        "truthful utility of Red".into(),
        "-1",
        out.utility(0).expect("true type"),
        Provenance::Worked,
    );
    let lie = s.with_declaration(0, s.bids[0].with_amount(q("9")));
    let out = clarke_with_greedy(&lie, &greedy)?;
    rows.amount(
        "clarke-fail",
        "clarke-greedy",
        "utility of Red declaring 9".into(),
        "0",
        out.utility(0).expect("true type"),
        Provenance::Worked,
    );
    let dev = find_profitable_deviation(&ClarkeGreedy::new(greedy.clone()), &s, 0, &DeviationConfig::default())?;
    let best = dev
        .best
        .map(|d| Money::from(q(&d.deviating_utility)))
        .unwrap_or_else(|| Money::from_integer(-1));
    rows.amount(
        "clarke-fail",
        "clarke-greedy",
        "best deviation utility of Red".into(),
        "0",
        &best,
        Provenance::Worked,
    );

    let s = scenario("greedyp")?.instance;
    rows.payments(
        "greedyp",
        "greedy",
        &s,
        &[("Red", "9.5"), ("Green", "0"), ("Blue", "0")],
        &run_greedy(&s, &greedy)?,
    );
    let out = run_gva(&s, dp)?;
    rows.winners("greedyp", "gva", &s, &["Green"], &out);
    rows.payments("greedyp", "gva", &s, &[("Green", "18")], &out);

    let s = scenario("greedycomp")?.instance;
    let out = run_greedy(&s, &greedy)?;
    rows.winners("greedycomp", "greedy", &s, &["Red", "Green"], &out);
    rows.payments(
        "greedycomp",
        "greedy",
        &s,
        &[("Red", "0"), ("Green", "0"), ("Blue", "0")],
        &out,
    );
    rows.payments(
        "greedycomp",
        "gva",
        &s,
        &[("Red", "5"), ("Green", "0")],
        &run_gva(&s, dp)?,
    );

    let s = scenario("complex-green")?.instance;
    let table = complex_green_valuation();
    let out = run_greedy(&s, &greedy)?;
    rows.winners("complex-green", "greedy", &s, &["Green/ab"], &out);
    rows.payments("complex-green", "greedy", &s, &[("Green/ab", "24")], &out);
    let u = complex_player_utility(&s, "Green", &table, &out)?;
    rows.amount(
        "complex-green",
        "greedy",
        "truthful utility of Green".into(),
        "6",
        &u,
        Provenance::Worked,
    );
    let others = AuctionInstance {
        bids: s.bids.iter().filter(|b| !owns("Green", &b.bidder)).cloned().collect(),
        ..s.clone()
    };
    let (_, without_green) = optimal_allocation(&others, dp)?;
    let (opt, _) = optimal_allocation(&s, dp)?;
    let others_in_opt: BigRational = opt
        .winners()
        .filter(|&i| !owns("Green", &s.bids[i].bidder))
        .map(|i| s.bids[i].amount.clone())
        .sum();
    rows.amount(
        "complex-green",
        "gva",
        "payment of Green as one player".into(),
        "12",
        &Money::from(without_green - others_in_opt),
        Provenance::Worked,
    );
    let j = s.bid_of("Green/ab").expect("bidder");
    let lie = s.with_declaration(j, s.bids[j].with_amount(q("23")));
    let out = run_greedy(&lie, &greedy)?;
    rows.winners("complex-green", "greedy", &lie, &["Red", "Green/b"], &out);
    rows.payments(
        "complex-green",
        "greedy",
        &lie,
        &[("Red", "11.5"), ("Green/b", "0")],
        &out,
    );
    let u = complex_player_utility(&lie, "Green", &table, &out)?;
    rows.amount(
        "complex-green",
        "greedy",
        "deviating utility of Green".into(),
        "10",
        &u,
        Provenance::Worked,
    );

    for r in impossibility_demo(&["0", "9"], &["19", "21"])? {
        let (goods, pay) = if r.g_ab == "21" { ("a,b", "20") } else { ("b", "0") };
        rows.0.push(ReproRow {
            scenario: "impossibility-setup".into(),
            mechanism: "greedy".into(),
            quantity: format!("goods of Green at g_b={} g_ab={}", r.g_b, r.g_ab),
            expected: goods.into(),
            actual: r.green_goods.join(","),
            provenance: Provenance::Derived,
            pass: r.green_goods.join(",") == goods,
        });
        rows.amount(
            "impossibility-setup",
            "greedy",
            format!("payment of Green at g_b={} g_ab={}", r.g_b, r.g_ab),
            pay,
            &Money::from(q(&r.green_pays)),
            Provenance::Derived,
        );
    }

    for (name, greedy_rev, gva_rev) in [
        ("better", "2/3", "0"),
        ("notgood", "2/3", "2"),
        ("best", "18", "10"),
        ("worseeff", "18.5", "36"),
        ("worsenoteff", "9.5", "10"),
    ] {
        let s = scenario(name)?.instance;
        let avg = revenue_compare_tie_orders(&s, &greedy, dp)?;
        rows.amount(
            name,
            "greedy",
            "revenue averaged over tie orders".into(),
            greedy_rev,
            &avg.greedy_average,
            Provenance::Worked,
        );
        rows.amount(
            name,
            "gva",
            "revenue".into(),
            gva_rev,
            &avg.gva_revenue,
            Provenance::Worked,
        );
    }
    let s = scenario("best")?.instance;
    rows.payments("best", "greedy", &s, &[("Red", "18")], &run_greedy(&s, &greedy)?);
    rows.payments("best", "gva", &s, &[("Red", "10")], &run_gva(&s, dp)?);
    let s = scenario("worseeff")?.instance;
    let out = run_greedy(&s, &greedy)?;
    rows.winners("worseeff", "greedy", &s, &["Green", "Black"], &out);
    rows.payments("worseeff", "greedy", &s, &[("Green", "18.5"), ("Black", "0")], &out);
    rows.payments(
        "worseeff",
        "gva",
        &s,
        &[("Green", "19"), ("Black", "17")],
        &run_gva(&s, dp)?,
    );
    let s = scenario("worsenoteff")?.instance;
    let out = run_greedy(&s, &greedy)?;
    rows.winners("worsenoteff", "greedy", &s, &["Green"], &out);
    rows.payments("worsenoteff", "greedy", &s, &[("Green", "9.5")], &out);
    let out = run_gva(&s, dp)?;
    rows.winners("worsenoteff", "gva", &s, &["Red"], &out);
    rows.payments("worsenoteff", "gva", &s, &[("Red", "10")], &out);
    Ok(rows.0)
}

/// Plain-text rendering of a reproduction table.
pub fn render_rows(rows: &[ReproRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{} {:<20} {:<14} {:<44} expected {:<8} actual {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.scenario,
            r.mechanism,
            r.quantity,
            r.expected,
            r.actual
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpossibilityRow {
    pub g_b: String,
    pub g_ab: String,
    pub green_goods: Vec<String>,
    pub green_pays: String,
    pub red_pays: String,
}

/// Greedy outcomes of the impossibility family across both regimes of `g_ab`.
pub fn impossibility_demo(g_bs: &[&str], g_abs: &[&str]) -> Result<Vec<ImpossibilityRow>> {
    let mut rows = Vec::new();
    for g_b in g_bs {
        for g_ab in g_abs {
            let s = impossibility_instance(g_b, g_ab);
            let out = run_greedy(&s, &NormConfig::default())?;
            let goods = (1..3).fold(Bundle::EMPTY, |u, i| u.union(out.allocation.granted_bundle(i)));
            let pays: Money = (1..3).map(|i| out.payment(i)).sum();
            rows.push(ImpossibilityRow {
                g_b: g_b.to_string(),
                g_ab: g_ab.to_string(),
                green_goods: s.labels(goods),
                green_pays: show(&pays),
                red_pays: show(out.payment(0)),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TieAverage {
    /// Tie orders enumerated: the product of factorials of the tie-group sizes.
    pub orders: u64,
    pub greedy_average: Money,
    pub gva_revenue: Money,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Advances `v` to its next lexicographic permutation; `false` after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len())
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("a larger element exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Greedy revenue averaged uniformly over every ordering of equal-norm bids,
/// next to the GVA revenue.
pub fn revenue_compare_tie_orders(
    instance: &AuctionInstance,
    cfg: &NormConfig,
    solver: SolverKind,
) -> Result<TieAverage> {
    let base = NormConfig::new(cfg.exponent, TieRule::Canonical);
    let mut groups = rank(instance, &base)?.norm_groups();
    let count = groups
        .iter()
        .try_fold(1u128, |acc, g| acc.checked_mul(factorial(g.len())))
        .unwrap_or(u128::MAX);
    if count > MAX_TIE_ORDERS {
        return Err(Error::TooManyTieOrders(count));
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    let mut total = Money::zero();
    let mut orders = 0u64;
    loop {
        let order: Vec<usize> = groups.iter().flatten().copied().collect();
        let out = run_greedy(
            instance,
            &NormConfig::new(cfg.exponent, TieRule::ExplicitPermutation(order)),
        )?;
        total = total + out.revenue;
        orders += 1;
        // Odometer over the groups: advance the last one that still can, resetting those after it.
        let mut advanced = false;
        for g in groups.iter_mut().rev() {
            if next_permutation(g) {
                advanced = true;
                break;
            }
            g.sort_unstable();
        }
        if !advanced {
            break;
        }
    }
    let gva = run_gva(instance, solver)?;
    Ok(TieAverage {
        orders,
        greedy_average: total.scale(&BigRational::new(BigInt::one(), orders.into())),
        gva_revenue: gva.revenue,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioTrial {
    pub optimal: String,
    pub greedy: String,
    pub ratio: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioStats {
    pub trials: usize,
    pub k: usize,
    pub n: usize,
    pub exponent: String,
    pub seed: u64,
    pub per_trial: Vec<RatioTrial>,
    pub max_ratio: String,
    pub bound: String,
    /// Indices of trials exceeding the bound.
    pub violations: Vec<usize>,
}

/// `true` iff `optimal <= bound(k) * greedy`, decided exactly, where the
/// bound is `sqrt(k)` for `l = 1/2` and `k` for `l = 1`.
pub fn within_bound(optimal: &BigRational, greedy: &BigRational, k: usize, l: Exponent) -> Result<bool> {
    let k = BigRational::from_integer(k.into());
    if l == Exponent::HALF {
        Ok(optimal * optimal <= k * greedy * greedy)
    } else if l == Exponent::ONE {
        Ok(optimal <= &(k * greedy))
    } else {
        Err(Error::Parse(format!(
            "no approximation bound is known for exponent {l}"
        )))
    }
}

fn bound_label(k: usize, l: Exponent) -> String {
    if l == Exponent::HALF {
        format!("sqrt({k})")
    } else {
        k.to_string()
    }
}

/// Optimal over greedy value on `trials` seeded random instances of `k` goods and `n` bids.
pub fn ratio_experiment(params: &GeneratorParams, trials: usize, l: Exponent, seed: u64) -> Result<RatioStats> {
    within_bound(&BigRational::zero(), &BigRational::zero(), params.goods, l)?;
    let cfg = NormConfig::new(l, TieRule::Reject);
    let mut per_trial = Vec::with_capacity(trials);
    let mut violations = Vec::new();
    let mut max_ratio = BigRational::one();
    for t in 0..trials {
        let inst = generate(params, seed, t as u64)?;
        let (alloc, _) = greedy_allocate(&inst, &cfg)?;
        let g = allocation_value(&inst, &alloc);
        let (_, opt) = optimal_allocation(&inst, SolverKind::BitmaskDP)?;
        let ratio = if g.is_zero() { BigRational::one() } else { &opt / &g };
        if !within_bound(&opt, &g, params.goods, l)? {
            violations.push(t);
        }
        if ratio > max_ratio {
            max_ratio = ratio.clone();
        }
        per_trial.push(RatioTrial {
            optimal: format_amount(&opt),
            greedy: format_amount(&g),
            ratio: format_significant(&ratio, 12),
        });
    }
    Ok(RatioStats {
        trials,
        k: params.goods,
        n: params.bids,
        exponent: l.to_string(),
        seed,
        per_trial,
        max_ratio: format_significant(&max_ratio, 12),
        bound: bound_label(params.goods, l),
        violations,
    })
}

/// A two-bid family on which greedy falls short of the optimum by nearly the bound:
/// a single good at `1 + ε` outranks the whole set, priced so its norm sits just below.
pub fn tight_family(k: usize, l: Exponent) -> Result<AuctionInstance> {
    if k == 0 || k > crate::model::MAX_GOODS {
        return Err(Error::InstanceTooLarge(format!("{k} goods")));
    }
    let eps = BigRational::new(TIGHT_EPSILON.0.into(), TIGHT_EPSILON.1.into());
    let one_eps = BigRational::one() + &eps;
    let big = if l == Exponent::ONE {
        BigRational::from_integer(k.into())
    } else if l == Exponent::HALF {
        let r = k.sqrt();
        if r * r == k {
            BigRational::from_integer(r.into())
        } else {
            // Largest multiple of ε whose norm stays below 1 + ε: m^2 < k (1 + ε)^2 / ε^2.
            let limit = BigRational::from_integer(k.into()) * &one_eps * &one_eps / (&eps * &eps);
            let mut m = limit.floor().to_integer().sqrt();
            if BigRational::from_integer(&m * &m) >= limit {
                m -= 1;
            }
            BigRational::from_integer(m) * &eps
        }
    } else {
        return Err(Error::Parse(format!("no tight family is defined for exponent {l}")));
    };
    let goods: Vec<String> = (1..=k).map(|g| format!("g{g}")).collect();
    let mut inst = AuctionInstance::new(&goods);
    inst.bids.push(crate::model::SingleMindedBid::new(
        "A",
        Bundle::from_indices([0]),
        one_eps,
    ));
    inst.bids
        .push(crate::model::SingleMindedBid::new("B", inst.all_goods(), big));
    Ok(inst)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightRow {
    pub k: usize,
    pub exponent: String,
    pub greedy: String,
    pub optimal: String,
    pub ratio: String,
    pub bound: String,
    /// `ratio >= 0.95 * bound`, decided exactly.
    pub near_tight: bool,
}

pub fn tight_row(k: usize, l: Exponent) -> Result<TightRow> {
    let inst = tight_family(k, l)?;
    let (alloc, _) = greedy_allocate(&inst, &NormConfig::new(l, TieRule::Reject))?;
    let g = allocation_value(&inst, &alloc);
    let (_, opt) = optimal_allocation(&inst, SolverKind::BitmaskDP)?;
    let ratio = &opt / &g;
    let kq = BigRational::from_integer(k.into());
    let frac = BigRational::new(95.into(), 100.into());
    let near_tight = if l == Exponent::HALF {
        &ratio * &ratio >= &frac * &frac * kq
    } else {
        ratio >= frac * kq
    };
    Ok(TightRow {
        k,
        exponent: l.to_string(),
        greedy: format_amount(&g),
        optimal: format_amount(&opt),
        ratio: format_significant(&ratio, 12),
        bound: bound_label(k, l),
        near_tight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        for name in SCENARIOS {
            assert_eq!(scenario(name).unwrap().name, name);
        }
        assert!(matches!(scenario("nope"), Err(Error::UnknownScenario(_))));
        let best = scenario("best").unwrap().instance;
        assert_eq!(best.bids[0].bidder, "Red");
        assert_eq!(best.bids[0].amount, q("20"));
        let better = scenario("better").unwrap().instance;
        assert_eq!(better.num_goods(), 4);
        assert!(better.bids.iter().all(|b| b.amount == q("1")));
    }

    #[test]
    fn every_reproduction_row_passes() {
        let rows = reproduce_all().unwrap();
        let failed: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
        assert!(failed.is_empty(), "{}", render_rows(&rows));
    }

    #[test]
    fn tie_order_counts() {
        let d = SolverKind::BitmaskDP;
        let better =
            revenue_compare_tie_orders(&scenario("better").unwrap().instance, &NormConfig::default(), d).unwrap();
        assert_eq!(better.orders, 6);
        let notgood =
            revenue_compare_tie_orders(&scenario("notgood").unwrap().instance, &NormConfig::default(), d).unwrap();
        assert_eq!(notgood.orders, 24);
        assert_eq!(notgood.greedy_average, Money::from(q("2/3")));
        let single =
            revenue_compare_tie_orders(&scenario("greedyp").unwrap().instance, &NormConfig::default(), d).unwrap();
        assert_eq!(single.orders, 1);
        assert_eq!(single.greedy_average, Money::from(q("9.5")));
        let mut many = AuctionInstance::new(&["a"]);
        for b in 0..11 {
            many.add_bid(&format!("b{b}"), &["a"], "1").unwrap();
        }
        assert!(matches!(
            revenue_compare_tie_orders(&many, &NormConfig::default(), d),
            Err(Error::TooManyTieOrders(39916800))
        ));
    }

    #[test]
    fn permutations_are_exhaustive() {
        let mut v = vec![0, 1, 2, 3];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 24);
        assert_eq!(v, vec![3, 2, 1, 0]);
    }

    #[test]
    fn complex_utilities() {
        let s = scenario("complex-green").unwrap().instance;
        let table = complex_green_valuation();
        let out = Outcome::empty(&s);
        assert_eq!(
            complex_player_utility(&s, "Green", &table, &out).unwrap(),
            Money::zero()
        );
        let out = run_greedy(&s, &NormConfig::default()).unwrap();
        assert_eq!(
            complex_player_utility(&s, "Green", &table, &out).unwrap(),
            Money::from_integer(6)
        );
        let mut bad = table.clone();
        bad.insert(Bundle::EMPTY, q("1"));
        assert!(complex_player_utility(&s, "Green", &bad, &out).is_err());
        assert!(!owns("Green", "Greenish"));
    }

    #[test]
    fn tight_families_examples() {
        let r = tight_row(4, Exponent::ONE).unwrap();
        assert_eq!((r.greedy.as_str(), r.optimal.as_str()), ("1.001", "4"));
        assert_eq!(r.ratio, "3.996003996");
        let r = tight_row(4, Exponent::HALF).unwrap();
        assert_eq!((r.greedy.as_str(), r.optimal.as_str()), ("1.001", "2"));
        let r = tight_row(2, Exponent::ONE).unwrap();
        assert_eq!(r.ratio, "1.998001998");
        for k in [4, 9, 16] {
            for l in [Exponent::HALF, Exponent::ONE] {
                assert!(tight_row(k, l).unwrap().near_tight);
            }
        }
        // Non-square k: B's norm stays strictly below A's.
        let i = tight_family(8, Exponent::HALF).unwrap();
        assert!(
            rank(&i, &NormConfig::new(Exponent::HALF, TieRule::Reject))
                .unwrap()
                .order
                == vec![0, 1]
        );
        assert!(tight_row(8, Exponent::HALF).unwrap().near_tight);
    }

    #[test]
    fn lone_bid_ratio_is_one() {
        let s = ratio_experiment(&GeneratorParams::new(4, 1), 20, Exponent::HALF, 5).unwrap();
        assert!(s.violations.is_empty());
        assert_eq!(s.max_ratio, "1");
    }

    #[test]
    fn impossibility_regimes() {
        let rows = impossibility_demo(&["9"], &["19", "21"]).unwrap();
        assert_eq!(rows[0].green_goods, vec!["b"]);
        assert_eq!(rows[0].red_pays, "9.5");
        assert_eq!(rows[1].green_goods, vec!["a", "b"]);
        assert_eq!(rows[1].green_pays, "20");
    }
}
