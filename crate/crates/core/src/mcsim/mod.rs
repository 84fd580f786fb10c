//! Risk cost per arc: a discrete trip-cost distribution built from insurance
//! loss brackets, sampled by inverse CDF, with the exact expectation kept
//! alongside as an oracle.

pub mod rng;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DataError, Network};
use rng::{substream_seed, UniformStream};

/// Iterations per arc unless overridden.
pub const DEFAULT_ITERATIONS: u64 = 1_000_000;
pub const DEFAULT_DEDUCTIBLE_RATE: f64 = 0.01;
pub const DEFAULT_OPEN_BRACKET_CAP: f64 = 1_000_000.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid loss bracket table: {0}")]
    Table(String),
    #[error("accident probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("arc {from}->{to} has no accident probability")]
    MissingProbability { from: String, to: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// One claim-value range; `upper_bound` is `None` for the open top range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBracket {
    pub upper_bound: Option<f64>,
    pub occurrence: f64,
}

/// Claim-value ranges with their share of accidents, and the carrier's
/// cost policy: it pays `deductible_rate` of the range maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBracketTable {
    brackets: Vec<LossBracket>,
    deductible_rate: f64,
    open_bracket_cap: f64,
}

impl LossBracketTable {
    pub fn new(
        brackets: Vec<LossBracket>,
        deductible_rate: f64,
        open_bracket_cap: f64,
    ) -> Result<Self, McError> {
        let table = Self {
            brackets,
            deductible_rate,
            open_bracket_cap,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), McError> {
        let bad = |m: String| Err(McError::Table(m));
        if self.brackets.is_empty() {
            return bad("no brackets".into());
        }
        if !(self.deductible_rate > 0.0 && self.deductible_rate <= 1.0) {
            return bad(format!(
                "deductible rate must lie in (0, 1], got {}",
                self.deductible_rate
            ));
        }
        let mut total = 0.0;
        let mut prev = 0.0;
        let last = self.brackets.len() - 1;
        for (i, b) in self.brackets.iter().enumerate() {
            if !(b.occurrence >= 0.0 && b.occurrence.is_finite()) {
                return bad(format!("bracket {i}: occurrence {} is invalid", b.occurrence));
            }
            total += b.occurrence;
            match b.upper_bound {
                Some(ub) => {
                    if !(ub > prev && ub.is_finite()) {
                        return bad(format!(
                            "bracket {i}: upper bounds must be positive and strictly increasing"
                        ));
                    }
                    prev = ub;
                }
                None if i == last => {
                    if !(self.open_bracket_cap >= prev && self.open_bracket_cap > 0.0)
                        || !self.open_bracket_cap.is_finite()
                    {
                        return bad(format!(
                            "open bracket cap {} is below the largest bound {prev}",
                            self.open_bracket_cap
                        ));
                    }
                }
                None => return bad(format!("bracket {i}: only the last bracket may be open")),
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("occurrences sum to {total}, expected 1"));
        }
        Ok(())
    }

    pub fn brackets(&self) -> &[LossBracket] {
        &self.brackets
    }

    pub fn deductible_rate(&self) -> f64 {
        self.deductible_rate
    }

    pub fn open_bracket_cap(&self) -> f64 {
        self.open_bracket_cap
    }

    /// Same brackets under a different cost policy.
    pub fn with_policy(&self, deductible_rate: f64, open_bracket_cap: f64) -> Result<Self, McError> {
        Self::new(self.brackets.clone(), deductible_rate, open_bracket_cap)
    }

    /// Carrier cost if an accident falls in each bracket.
    pub fn accident_costs(&self) -> Vec<f64> {
        self.brackets
            .iter()
            .map(|b| self.deductible_rate * b.upper_bound.unwrap_or(self.open_bracket_cap))
            .collect()
    }

    /// Expected carrier cost given that an accident happened.
    pub fn conditional_mean(&self) -> f64 {
        self.brackets
            .iter()
            .zip(self.accident_costs())
            .map(|(b, c)| b.occurrence * c)
            .sum()
    }

    /// Parses `upper_bound,occurrence` rows; an empty bound marks the open
    /// top bracket. Occurrences are fractions.
    pub fn parse_csv<R: Read>(
        reader: R,
        file: &str,
        deductible_rate: f64,
        open_bracket_cap: f64,
    ) -> Result<Self, McError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let format = |m: String| {
            McError::Data(DataError::Format {
                file: file.into(),
                message: m,
            })
        };
        let headers = rdr.headers().map_err(|e| format(e.to_string()))?;
        if headers.iter().ne(["upper_bound", "occurrence"]) {
            return Err(format("expected header `upper_bound,occurrence`".into()));
        }
        let mut brackets = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| format(e.to_string()))?;
            let row = rec.position().map_or(0, |p| p.line());
            let row_err = |m: String| {
                McError::Data(DataError::Row {
                    file: file.into(),
                    row,
                    message: m,
                })
            };
            if rec.len() != 2 {
                return Err(row_err(format!("expected 2 fields, found {}", rec.len())));
            }
            let upper_bound = if rec[0].is_empty() {
                None
            } else {
                Some(
                    rec[0]
                        .parse::<f64>()
                        .map_err(|_| row_err(format!("upper_bound {:?} is not a number", &rec[0])))?,
                )
            };
            let occurrence = rec[1]
                .parse::<f64>()
                .map_err(|_| row_err(format!("occurrence {:?} is not a number", &rec[1])))?;
            brackets.push(LossBracket {
                upper_bound,
                occurrence,
            });
        }
        Self::new(brackets, deductible_rate, open_bracket_cap)
    }

    pub fn load(path: &Path, deductible_rate: f64, open_bracket_cap: f64) -> Result<Self, McError> {
        let file = fs::File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_csv(
            file,
            &path.display().to_string(),
            deductible_rate,
            open_bracket_cap,
        )
    }
}

impl Default for LossBracketTable {
    /// Cargo-insurer claim shares (37.91%, 24.17%, 19.91%, 16.11%, 1.90%)
    /// with a 1% deductible and the open range valued at 1,000,000.
    fn default() -> Self {
        let rows = [
            (Some(200_000.0), 0.3791),
            (Some(300_000.0), 0.2417),
            (Some(500_000.0), 0.1991),
            (Some(1_000_000.0), 0.1611),
            (None, 0.0190),
        ];
        Self {
            brackets: rows
                .into_iter()
                .map(|(upper_bound, occurrence)| LossBracket {
                    upper_bound,
                    occurrence,
                })
                .collect(),
            deductible_rate: DEFAULT_DEDUCTIBLE_RATE,
            open_bracket_cap: DEFAULT_OPEN_BRACKET_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostOutcome {
    pub cost: f64,
    /// Upper edge of this outcome's region `[previous, cumulative)`.
    pub cumulative: f64,
    pub probability: f64,
}

/// Trip-cost outcomes ordered by cumulative probability. Zero-mass outcomes
/// are dropped, so `p = 0` leaves a single zero-cost outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDistribution {
    pub outcomes: Vec<CostOutcome>,
    pub accident_probability: f64,
}

pub fn build_cost_distribution(
    p_accident: f64,
    table: &LossBracketTable,
) -> Result<CostDistribution, McError> {
    if !(0.0..=1.0).contains(&p_accident) {
        return Err(McError::Probability(p_accident));
    }
    table.validate()?;
    let no_accident = 1.0 - p_accident;
    let mut outcomes = Vec::with_capacity(table.brackets.len() + 1);
    if no_accident > 0.0 {
        outcomes.push(CostOutcome {
            cost: 0.0,
            cumulative: no_accident,
            probability: no_accident,
        });
    }
    let mut share = 0.0;
    for (b, cost) in table.brackets.iter().zip(table.accident_costs()) {
        share += b.occurrence;
        let cumulative = no_accident + p_accident * share;
        let mass = p_accident * b.occurrence;
        let advances = outcomes.last().is_none_or(|o| cumulative > o.cumulative);
        if mass > 0.0 && advances {
            outcomes.push(CostOutcome {
                cost,
                cumulative,
                probability: mass,
            });
        }
    }
    if let Some(last) = outcomes.last_mut() {
        last.cumulative = 1.0;
    }
    Ok(CostDistribution {
        outcomes,
        accident_probability: p_accident,
    })
}

/// Inverse-CDF lookup: the first outcome whose cumulative exceeds `u`.
pub fn sample_trip_cost(dist: &CostDistribution, u: f64) -> f64 {
    let i = dist.outcomes.partition_point(|o| o.cumulative <= u);
    dist.outcomes[i.min(dist.outcomes.len() - 1)].cost
}

/// Exact mean of the distribution.
pub fn expected_risk_cost(dist: &CostDistribution) -> f64 {
    dist.outcomes.iter().map(|o| o.probability * o.cost).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub iterations: u64,
    pub seed: u64,
}

/// Monte Carlo mean of sampled trip costs and its standard error.
pub fn estimate_risk_cost(
    dist: &CostDistribution,
    iterations: u64,
    seed: u64,
) -> Result<RiskEstimate, McError> {
    if iterations == 0 {
        return Err(McError::ZeroIterations);
    }
    let mut stream = UniformStream::new(seed);
    // Welford's running mean and sum of squared deviations.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=iterations {
        let x = sample_trip_cost(dist, stream.next_f64());
        let delta = x - mean;
        mean += delta / k as f64;
        m2 += delta * (x - mean);
    }
    let std_error = if iterations > 1 {
        (m2 / (iterations - 1) as f64 / iterations as f64).sqrt()
    } else {
        0.0
    };
    Ok(RiskEstimate {
        mean,
        std_error,
        iterations,
        seed,
    })
}

/// One row of the risk-cost report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcRisk {
    pub from: String,
    pub to: String,
    pub paccident: f64,
    pub estimate: RiskEstimate,
    pub expected: f64,
}

/// Stream id of a listed arc.
pub fn arc_stream_id(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

/// Estimates `risk_cost` for every listed arc in parallel and copies the
/// result to mirrored directions. Each arc draws from its own substream.
pub fn estimate_network_risk(
    network: &mut Network,
    table: &LossBracketTable,
    iterations: u64,
    global_seed: u64,
) -> Result<Vec<ArcRisk>, McError> {
    if iterations == 0 {
        return Err(McError::ZeroIterations);
    }
    let indices = network.file_arc_indices();
    let rows: Vec<(usize, ArcRisk)> = indices
        .par_iter()
        .map(|&i| {
            let arc = &network.arcs()[i];
            let p = arc
                .accident_probability
                .ok_or_else(|| McError::MissingProbability {
                    from: arc.from.clone(),
                    to: arc.to.clone(),
                })?;
            let dist = build_cost_distribution(p, table)?;
            let seed = substream_seed(global_seed, &arc_stream_id(&arc.from, &arc.to));
            let estimate = estimate_risk_cost(&dist, iterations, seed)?;
            Ok((
                i,
                ArcRisk {
                    from: arc.from.clone(),
                    to: arc.to.clone(),
                    paccident: p,
                    estimate,
                    expected: expected_risk_cost(&dist),
                },
            ))
        })
        .collect::<Result<_, McError>>()?;
    for (i, row) in &rows {
        let arc = network.arc_mut(*i);
        arc.risk_cost = Some(row.estimate.mean);
        arc.risk_std_error = Some(row.estimate.std_error);
    }
    network.sync_mirrors();
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// `from,to,paccident,risk_cost_mean,std_error,iterations,seed`; the seed is
/// the arc's own substream seed.
pub fn write_risk_report<W: Write>(rows: &[ArcRisk], mut out: W) -> std::io::Result<()> {
    writeln!(out, "from,to,paccident,risk_cost_mean,std_error,iterations,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.9},{:.6},{:.6},{},{}",
            r.from,
            r.to,
            r.paccident,
            r.estimate.mean,
            r.estimate.std_error,
            r.estimate.iterations,
            r.estimate.seed
        )?;
    }
    Ok(())
}
