//! Seeded random instances that are tie-free by construction.
//!
//! Each good joins a bundle independently with probability `bundle_prob`
//! (empty bundles are redrawn). Amounts are distinct integers in
//! `1..=AMOUNT_RANGE` divided by `AMOUNT_SCALE`; the amount vector is redrawn
//! until no two norms coincide under any exponent in [`TIE_FREE_EXPONENTS`].

use std::collections::BTreeSet;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AuctionInstance, Bundle, SingleMindedBid, MAX_GOODS};
use crate::norm::{is_tie_free, Exponent};

pub const AMOUNT_RANGE: u64 = 1_000_000;
pub const AMOUNT_SCALE: u64 = 1_000;
pub const TIE_FREE_EXPONENTS: [Exponent; 3] = [Exponent::ZERO, Exponent::HALF, Exponent::ONE];

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub goods: usize,
    pub bids: usize,
    pub bundle_prob: f64,
}

impl GeneratorParams {
    pub fn new(goods: usize, bids: usize) -> Self {
        GeneratorParams {
            goods,
            bids,
            bundle_prob: 0.4,
        }
    }

    pub fn with_bundle_prob(mut self, p: f64) -> Self {
        self.bundle_prob = p;
        self
    }

    fn check(&self) -> Result<()> {
        if self.goods == 0 || self.goods > MAX_GOODS {
            return Err(Error::InstanceTooLarge(format!(
                "{} goods; between 1 and {MAX_GOODS} are supported",
                self.goods
            )));
        }
        if self.bids as u64 > AMOUNT_RANGE / 2 {
            return Err(Error::InstanceTooLarge(format!(
                "{} bids exceed the distinct-amount pool",
                self.bids
            )));
        }
        if !(self.bundle_prob > 0.0 && self.bundle_prob <= 1.0) {
            return Err(Error::Parse(format!(
                "bundle probability {} is outside (0, 1]",
                self.bundle_prob
            )));
        }
        Ok(())
    }
}

fn random_bundle(rng: &mut ChaCha8Rng, k: usize, p: f64) -> Bundle {
    loop {
        let b = Bundle::from_indices((0..k).filter(|_| rng.gen_bool(p)));
        if !b.is_empty() {
            return b;
        }
    }
}

fn distinct_amounts(rng: &mut ChaCha8Rng, n: usize) -> Vec<BigRational> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: u64 = rng.gen_range(1..=AMOUNT_RANGE);
        if seen.insert(x) {
            out.push(BigRational::new(x.into(), AMOUNT_SCALE.into()));
        }
    }
    out
}

/// The instance drawn from `rng`.
pub fn generate_with(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> Result<AuctionInstance> {
    params.check()?;
    let goods: Vec<String> = (0..params.goods).map(|g| format!("g{g}")).collect();
    let mut inst = AuctionInstance::new(&goods);
    let bundles: Vec<Bundle> = (0..params.bids)
        .map(|_| random_bundle(rng, params.goods, params.bundle_prob))
        .collect();
    loop {
        let amounts = distinct_amounts(rng, params.bids);
        inst.bids = bundles
            .iter()
            .zip(amounts)
            .enumerate()
            .map(|(i, (&s, a))| SingleMindedBid::new(format!("b{i}"), s, a))
            .collect();
        if is_tie_free(&inst, &TIE_FREE_EXPONENTS) {
            return Ok(inst);
        }
    }
}

/// Instance number `index` of the stream selected by `seed`.
pub fn generate(params: &GeneratorParams, seed: u64, index: u64) -> Result<AuctionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    generate_with(params, &mut rng)
}

/// `count` instances, independent of each other and of `count`.
pub fn generate_suite(params: &GeneratorParams, count: usize, seed: u64) -> Result<Vec<AuctionInstance>> {
    (0..count as u64).map(|i| generate(params, seed, i)).collect()
}

/// Instances whose sizes are drawn uniformly from `1..=max_goods` and `1..=max_bids`.
pub fn generate_varied(
    max_goods: usize,
    max_bids: usize,
    bundle_prob: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<AuctionInstance>> {
    (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let k = rng.gen_range(1..=max_goods);
            let n = rng.gen_range(1..=max_bids);
            generate_with(&GeneratorParams::new(k, n).with_bundle_prob(bundle_prob), &mut rng)
        })
        .collect()
}
