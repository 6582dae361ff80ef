//! Runnable mechanisms behind one interface, so the axiom checks can treat
//! the greedy mechanism, the GVA and the Clarke-with-greedy hybrid alike.

use crate::error::Result;
use crate::exact::{clarke_with_greedy, optimal_value_without, run_gva, SolverKind};
use crate::greedy::{blocker, crossing_amount, greedy_allocate, run_greedy};
use crate::model::{AuctionInstance, Bundle, Outcome};
use crate::money::Money;
use crate::norm::{Exponent, NormConfig};

/// A direct mechanism: declarations in, allocation and payments out.
///
/// Implementations must be deterministic.
pub trait Mechanism: Sync {
    fn name(&self) -> String;

    fn run(&self, instance: &AuctionInstance) -> Result<Outcome>;

    /// What bid `j` receives and pays. Override when cheaper than a full run.
    fn bid_result(&self, instance: &AuctionInstance, j: usize) -> Result<(Bundle, Money)> {
        let out = self.run(instance)?;
        Ok((out.allocation.granted_bundle(j), out.payments[j].clone()))
    }

    /// Declared amounts for `bundle` by bid `j` at which the outcome can change.
    /// `None` when the mechanism cannot say, in which case callers probe blindly.
    fn thresholds(&self, _instance: &AuctionInstance, _j: usize, _bundle: Bundle) -> Result<Option<Vec<Money>>> {
        Ok(None)
    }

    /// The ranking norm, for mechanisms built on one.
    fn norm(&self) -> Option<&NormConfig> {
        None
    }
}

/// Amounts at which a bid on `bundle` crosses the norm of every other bid.
pub fn norm_crossings(instance: &AuctionInstance, j: usize, bundle: Bundle, l: Exponent) -> Vec<Money> {
    (0..instance.bids.len())
        .filter(|&i| i != j)
        .map(|i| crossing_amount(instance, l, bundle.len(), i))
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct Greedy {
    pub cfg: NormConfig,
}

impl Greedy {
    pub fn new(cfg: NormConfig) -> Self {
        Greedy { cfg }
    }
}

impl Mechanism for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn run(&self, instance: &AuctionInstance) -> Result<Outcome> {
        run_greedy(instance, &self.cfg)
    }

    fn bid_result(&self, instance: &AuctionInstance, j: usize) -> Result<(Bundle, Money)> {
        let (alloc, trace) = greedy_allocate(instance, &self.cfg)?;
        if !alloc.is_granted(j) {
            return Ok((Bundle::EMPTY, Money::zero()));
        }
        let s = instance.bids[j].bundle;
        let pay = match blocker(&trace, instance, j)? {
            Some(i) => crossing_amount(instance, self.cfg.exponent, s.len(), i),
            None => Money::zero(),
        };
        Ok((s, pay))
    }

    fn thresholds(&self, instance: &AuctionInstance, j: usize, bundle: Bundle) -> Result<Option<Vec<Money>>> {
        Ok(Some(norm_crossings(instance, j, bundle, self.cfg.exponent)))
    }

    fn norm(&self) -> Option<&NormConfig> {
        Some(&self.cfg)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Gva {
    pub solver: SolverKind,
}

impl Gva {
    pub fn new(solver: SolverKind) -> Self {
        Gva { solver }
    }
}

impl Mechanism for Gva {
    fn name(&self) -> String {
        "gva".into()
    }

    fn run(&self, instance: &AuctionInstance) -> Result<Outcome> {
        run_gva(instance, self.solver)
    }

    /// The bid wins exactly when its amount beats what the others lose by ceding `bundle`.
    fn thresholds(&self, instance: &AuctionInstance, j: usize, bundle: Bundle) -> Result<Option<Vec<Money>>> {
        let all = optimal_value_without(instance, self.solver, j, Bundle::EMPTY)?;
        let rest = optimal_value_without(instance, self.solver, j, bundle)?;
        Ok(Some(vec![Money::from(all - rest)]))
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClarkeGreedy {
    pub cfg: NormConfig,
}

impl ClarkeGreedy {
    pub fn new(cfg: NormConfig) -> Self {
        ClarkeGreedy { cfg }
    }
}

impl Mechanism for ClarkeGreedy {
    fn name(&self) -> String {
        "clarke-greedy".into()
    }

    fn run(&self, instance: &AuctionInstance) -> Result<Outcome> {
        clarke_with_greedy(instance, &self.cfg)
    }

    fn thresholds(&self, instance: &AuctionInstance, j: usize, bundle: Bundle) -> Result<Option<Vec<Money>>> {
        Ok(Some(norm_crossings(instance, j, bundle, self.cfg.exponent)))
    }

    fn norm(&self) -> Option<&NormConfig> {
        Some(&self.cfg)
    }
}
