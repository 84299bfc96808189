//! Next-test selection.
//!
//! The utility of a test is the expected number of faulty components it
//! will exercise, `U(t) = Σ_c conf(c, t) · H(c)`. With predicted confidences
//! the sum runs over the `top_k` components the classifier ranks highest for
//! `t`; the oracle uses the real trace in full.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::TraceClassifier;
use crate::diagnosis::HealthStateMap;
use crate::error::{Error, Result};
use crate::features::{CallGraph, FeatureExtractor};
use crate::project::{NodeId, Project, TraceTable};

pub const DEFAULT_TOP_K: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Predicted,
    Oracle,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Predicted => "predicted",
            Strategy::Oracle => "oracle",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "predicted" => Ok(Strategy::Predicted),
            "oracle" => Ok(Strategy::Oracle),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown planner {other:?}"))),
        }
    }
}

/// conf(c, t) per test, each row ranked by descending confidence with ties
/// broken by ascending component id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfidenceTable {
    rows: BTreeMap<NodeId, Vec<(NodeId, f64)>>,
}

fn rank(mut row: Vec<(NodeId, f64)>) -> Vec<(NodeId, f64)> {
    row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    row
}

impl ConfidenceTable {
    pub fn from_rows(rows: BTreeMap<NodeId, BTreeMap<NodeId, f64>>) -> Self {
        ConfidenceTable {
            rows: rows
                .into_iter()
                .map(|(t, m)| (t, rank(m.into_iter().collect())))
                .collect(),
        }
    }

    /// Classifier confidences for every (test, component) pair.
    pub fn from_classifier(model: &TraceClassifier, project: &Project) -> Result<Self> {
        let graph = CallGraph::build(project);
        let extractor = FeatureExtractor::new(project, &graph);
        let comps: Vec<NodeId> = project.function_ids().collect();
        let tests: Vec<NodeId> = project.test_ids().collect();
        let rows: Vec<(NodeId, Vec<(NodeId, f64)>)> = tests
            .par_iter()
            .map(|&t| {
                let fvs = extractor.extract_row(t, &comps)?;
                let row = comps
                    .iter()
                    .zip(&fvs)
                    .map(|(&c, fv)| Ok((c, model.predict_conf(fv)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((t, rank(row)))
            })
            .collect::<Result<_>>()?;
        Ok(ConfidenceTable {
            rows: rows.into_iter().collect(),
        })
    }

    /// Indicator confidences: 1 for trace members, 0 for every other
    /// component. A perfectly calibrated classifier.
    pub fn from_traces(project: &Project, traces: &TraceTable) -> Self {
        let rows = project
            .test_ids()
            .map(|t| {
                let trace = traces.trace(t);
                let row = project
                    .function_ids()
                    .map(|c| (c, if trace.contains(&c) { 1.0 } else { 0.0 }))
                    .collect();
                (t, rank(row))
            })
            .collect();
        ConfidenceTable { rows }
    }

    pub fn ranked(&self, t: NodeId) -> &[(NodeId, f64)] {
        self.rows.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// U(t) over an already ranked confidence row.
pub fn utility_ranked(ranked: &[(NodeId, f64)], h: &HealthStateMap, top_k: usize) -> f64 {
    ranked.iter().take(top_k).map(|&(c, conf)| conf * h.get(c)).sum()
}

/// U(t) from an unranked confidence map.
pub fn utility(conf_of: &BTreeMap<NodeId, f64>, h: &HealthStateMap, top_k: usize) -> f64 {
    utility_ranked(&rank(conf_of.iter().map(|(c, p)| (*c, *p)).collect()), h, top_k)
}

/// U(t) with indicator confidences over the real trace, untruncated.
pub fn oracle_utility(trace: &BTreeSet<NodeId>, h: &HealthStateMap) -> f64 {
    trace.iter().map(|&c| h.get(c)).sum()
}

/// Where a planner gets its view of unexecuted tests.
#[derive(Debug, Clone, Copy)]
pub enum Guide<'a> {
    Predicted(&'a ConfidenceTable),
    Oracle(&'a TraceTable),
    Random,
}

impl Guide<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            Guide::Predicted(_) => Strategy::Predicted,
            Guide::Oracle(_) => Strategy::Oracle,
            Guide::Random => Strategy::Random,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerState {
    pub t_left: BTreeSet<NodeId>,
    pub strategy: Strategy,
    pub top_k: usize,
    rng: ChaCha8Rng,
}

impl PlannerState {
    /// `rng` is only drawn from by the random strategy.
    pub fn new(t_left: BTreeSet<NodeId>, strategy: Strategy, top_k: usize, rng: ChaCha8Rng) -> Result<Self> {
        if top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(PlannerState {
            t_left,
            strategy,
            top_k,
            rng,
        })
    }

    /// Picks the next test. The caller removes it from `t_left` once it runs.
    pub fn next_test(&mut self, guide: Guide<'_>, h: &HealthStateMap) -> Result<NodeId> {
        if guide.strategy() != self.strategy {
            return Err(Error::Config(format!(
                "{} planner was given {} guidance",
                self.strategy,
                guide.strategy()
            )));
        }
        if self.t_left.is_empty() {
            return Err(Error::NoTestsLeft);
        }
        let pick = match guide {
            Guide::Random => {
                let i = self.rng.gen_range(0..self.t_left.len());
                *self.t_left.iter().nth(i).expect("index in range")
            }
            Guide::Predicted(table) => {
                argmax(&self.t_left, |t| utility_ranked(table.ranked(t), h, self.top_k))
            }
            Guide::Oracle(traces) => argmax(&self.t_left, |t| oracle_utility(traces.trace(t), h)),
        };
        Ok(pick)
    }
}

/// Highest utility, first (lowest id) on ties.
fn argmax(tests: &BTreeSet<NodeId>, utility: impl Fn(NodeId) -> f64) -> NodeId {
    let mut best = None;
    for &t in tests {
        let u = utility(t);
        match best {
            Some((_, bu)) if u <= bu => {}
            _ => best = Some((t, u)),
        }
    }
    best.expect("non-empty test set").0
}
