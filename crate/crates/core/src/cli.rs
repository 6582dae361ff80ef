//! The `camech` command line: `run`, `check`, `gen` and `experiment`.
//!
//! Exit codes: 0 success, 1 a check or expectation failed, 2 parse or
//! validation error, 3 ties under the `reject` tie rule, 4 size guard.

use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::axioms::{
    check_axioms, deviation_sweep, truthful_instance, Axiom, AxiomReport, DeviationConfig, DeviationReport, Tolerance,
};
use crate::document::decimal;
use crate::document::{render_json, InstanceDocument, OutcomeDocument};
use crate::error::{Error, Result};
use crate::exact::SolverKind;
use crate::experiments::{
    ratio_experiment, render_rows, reproduce_all, revenue_compare_tie_orders, scenario, tight_row, RatioStats,
    ReproRow, TightRow,
};
use crate::generate::{generate, GeneratorParams};
use crate::mechanism::{ClarkeGreedy, Greedy, Gva, Mechanism};
use crate::money::{format_amount, Money};
use crate::norm::{Exponent, NormConfig, TieRule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TIES: i32 = 3;
pub const EXIT_TOO_LARGE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "camech",
    version,
    about = "Mechanisms for single-minded combinatorial auctions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MechanismKind {
    Greedy,
    Gva,
    ClarkeGreedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Reproduce,
    Ratio,
    Revenue,
    Tight,
}

#[derive(clap::Args, Debug, Clone)]
pub struct MechanismArgs {
    #[arg(long, value_enum, default_value = "greedy")]
    pub mechanism: MechanismKind,
    /// Norm exponent l as `p/q`, an integer or a decimal.
    #[arg(long, default_value = "1")]
    pub norm_exponent: Exponent,
    /// `canonical`, `reject` or `perm:i,j,...`.
    #[arg(long, default_value = "canonical")]
    pub tie_rule: TieRule,
    /// `bitmask-dp` or `brute-force`.
    #[arg(long, default_value = "bitmask-dp")]
    pub solver: SolverKind,
}

impl MechanismArgs {
    fn norm(&self) -> NormConfig {
        NormConfig::new(self.norm_exponent, self.tie_rule.clone())
    }

    fn build(&self) -> Box<dyn Mechanism> {
        match self.mechanism {
            MechanismKind::Greedy => Box::new(Greedy::new(self.norm())),
            MechanismKind::Gva => Box::new(Gva::new(self.solver)),
            MechanismKind::ClarkeGreedy => Box::new(ClarkeGreedy::new(self.norm())),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a mechanism on an instance and print the outcome.
    Run {
        /// Instance document, or `-` for stdin.
        input: String,
        #[command(flatten)]
        mech: MechanismArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check axioms and search for profitable deviations.
    Check {
        input: String,
        #[command(flatten)]
        mech: MechanismArgs,
        /// Comma-separated axioms; all by default.
        #[arg(long, value_delimiter = ',')]
        axioms: Option<Vec<Axiom>>,
        /// Also search every bidder's single-minded misreports.
        #[arg(long)]
        deviations: bool,
        #[arg(long, env = "CAMECH_SEED", default_value_t = 0)]
        seed: u64,
        /// Random monotonicity perturbations applied to the instance.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a seeded tie-free random instance.
    Gen {
        #[arg(long)]
        goods: usize,
        #[arg(long)]
        bids: usize,
        #[arg(long, default_value_t = 0.4)]
        bundle_prob: f64,
        #[arg(long, env = "CAMECH_SEED", default_value_t = 0)]
        seed: u64,
        /// Record every declaration as its bidder's true type.
        #[arg(long)]
        true_types: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment suite.
    Experiment {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Norm exponent for the ratio, revenue and tight suites; tight runs both 1/2 and 1 when omitted.
        #[arg(long)]
        l: Option<Exponent>,
        #[arg(long, default_value_t = 0.4)]
        bundle_prob: f64,
        /// Registered scenario for the revenue suite.
        #[arg(long)]
        scenario: Option<String>,
        /// Goods counts for the tight suite.
        #[arg(long, value_delimiter = ',', default_value = "4,9,16")]
        sizes: Vec<usize>,
        #[arg(long, env = "CAMECH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::TiesPresent { .. } => EXIT_TIES,
        Error::InstanceTooLarge(_) | Error::BundleSpaceTooLarge { .. } | Error::TooManyTieOrders(_) => EXIT_TOO_LARGE,
        _ => EXIT_INVALID,
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckDocument {
    mechanism: String,
    axioms: AxiomReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviations: Option<Vec<DeviationReport>>,
    passed: bool,
}

#[derive(Serialize)]
struct ReproduceDocument {
    suite: &'static str,
    rows: Vec<ReproRow>,
    passed: bool,
}

#[derive(Serialize)]
struct RatioDocument {
    suite: &'static str,
    stats: RatioStats,
    passed: bool,
}

#[derive(Serialize)]
struct RevenueDocument {
    suite: &'static str,
    scenario: String,
    exponent: String,
    orders: u64,
    greedy_average: String,
    greedy_average_decimal: String,
    gva_revenue: String,
}

#[derive(Serialize)]
struct TightDocument {
    suite: &'static str,
    rows: Vec<TightRow>,
    passed: bool,
}

fn exact_or_decimal(m: &Money) -> String {
    m.as_rational().map(|r| format_amount(&r)).unwrap_or_else(|| decimal(m))
}

/// Executes a parsed command and returns its exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { input, mech, output } => {
            let inst = InstanceDocument::parse(&read_input(&input)?)?.to_instance()?;
            let m = mech.build();
            let out = m.run(&inst)?;
            let doc = match mech.mechanism {
                MechanismKind::Gva => OutcomeDocument::from_outcome(&m.name(), None, Some(mech.solver), &inst, &out),
                _ => OutcomeDocument::from_outcome(&m.name(), Some(&mech.norm()), None, &inst, &out),
            };
            emit(&output, &doc.render())?;
            Ok(EXIT_OK)
        }
        Command::Check {
            input,
            mech,
            axioms,
            deviations,
            seed,
            samples,
            output,
        } => {
            let inst = InstanceDocument::parse(&read_input(&input)?)?.to_instance()?;
            let m = mech.build();
            m.run(&inst)?;
            let axioms = axioms.unwrap_or_else(|| {
                vec![
                    Axiom::Exactness,
                    Axiom::Monotonicity,
                    Axiom::Participation,
                    Axiom::Critical,
                    Axiom::TruthfulUtility,
                ]
            });
            let tolerance = Tolerance::Exact;
            let report = check_axioms(
                m.as_ref(),
                std::slice::from_ref(&inst),
                &axioms,
                samples,
                seed,
                &tolerance,
            )?;
            let devs = if deviations {
                let truthful = if inst.true_types.is_empty() {
                    truthful_instance(&inst)
                } else {
                    inst.clone()
                };
                Some(deviation_sweep(m.as_ref(), &truthful, &DeviationConfig::default())?)
            } else {
                None
            };
            let passed = report.passed() && devs.as_ref().is_none_or(|d| d.is_empty());
            let doc = CheckDocument {
                mechanism: m.name(),
                axioms: report,
                deviations: devs,
                passed,
            };
            emit(&output, &render_json(&doc))?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Gen {
            goods,
            bids,
            bundle_prob,
            seed,
            true_types,
            output,
        } => {
            let mut inst = generate(
                &GeneratorParams::new(goods, bids).with_bundle_prob(bundle_prob),
                seed,
                0,
            )?;
            if true_types {
                inst = inst.declared_as_true();
            }
            emit(&output, &InstanceDocument::from_instance(&inst).render())?;
            Ok(EXIT_OK)
        }
        Command::Experiment {
            suite,
            k,
            n,
            trials,
            l,
            bundle_prob,
            scenario: name,
            sizes,
            seed,
            output,
        } => match suite {
            Suite::Reproduce => {
                let rows = reproduce_all()?;
                eprint!("{}", render_rows(&rows));
                let passed = rows.iter().all(|r| r.pass);
                emit(
                    &output,
                    &render_json(&ReproduceDocument {
                        suite: "reproduce",
                        rows,
                        passed,
                    }),
                )?;
                Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
            }
            Suite::Ratio => {
                let params = GeneratorParams::new(k, n).with_bundle_prob(bundle_prob);
                let stats = ratio_experiment(&params, trials, l.unwrap_or(Exponent::HALF), seed)?;
                let passed = stats.violations.is_empty();
                emit(
                    &output,
                    &render_json(&RatioDocument {
                        suite: "ratio",
                        stats,
                        passed,
                    }),
                )?;
                Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
            }
            Suite::Revenue => {
                let name = name.ok_or_else(|| Error::Parse("the revenue suite needs --scenario".into()))?;
                let s = scenario(&name)?;
                let l = l.unwrap_or(s.exponent);
                let avg = revenue_compare_tie_orders(
                    &s.instance,
                    &NormConfig::new(l, TieRule::Canonical),
                    SolverKind::BitmaskDP,
                )?;
                let doc = RevenueDocument {
                    suite: "revenue",
                    scenario: name,
                    exponent: l.to_string(),
                    orders: avg.orders,
                    greedy_average: exact_or_decimal(&avg.greedy_average),
                    greedy_average_decimal: decimal(&avg.greedy_average),
                    gva_revenue: exact_or_decimal(&avg.gva_revenue),
                };
                emit(&output, &render_json(&doc))?;
                Ok(EXIT_OK)
            }
            Suite::Tight => {
                let exps = match l {
                    Some(l) => vec![l],
                    None => vec![Exponent::HALF, Exponent::ONE],
                };
                let mut rows = Vec::new();
                for &l in &exps {
                    for &k in &sizes {
                        rows.push(tight_row(k, l)?);
                    }
                }
                let passed = rows.iter().all(|r| r.near_tight);
                emit(
                    &output,
                    &render_json(&TightDocument {
                        suite: "tight",
                        rows,
                        passed,
                    }),
                )?;
                Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
            }
        },
    }
}

/// Parses the process arguments, runs the command and reports errors on stderr.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
