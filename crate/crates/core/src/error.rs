use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bids {first} and {second} have equal norms and the tie rule rejects ties")]
    TiesPresent { first: usize, second: usize },

    #[error("bid {0} was not granted")]
    NotGranted(usize),

    #[error("bid index {0} is out of range")]
    NoSuchBid(usize),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("bundle space too large: {goods} goods exceeds the limit of {limit}")]
    BundleSpaceTooLarge { goods: usize, limit: usize },

    #[error("non-monotone allocation for bid {bid}: granted at {granted_at}, denied at {denied_at}")]
    NonMonotoneDetected {
        bid: usize,
        granted_at: String,
        denied_at: String,
    },

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error("{0} tie orders exceed the enumeration limit")]
    TooManyTieOrders(u128),

    #[error("valuation undefined: {0}")]
    ValuationUndefined(String),

    #[error("invalid tie order: {0}")]
    InvalidTieOrder(String),

    #[error("invalid instance: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
