//! The troubleshooting loop: diagnose from executed tests, stop if a
//! diagnosis is confident enough, otherwise plan and execute one more test.
//!
//! The diagnoser only ever sees real traces of executed tests. Predicted
//! traces steer the planner and nothing else.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{NetConfig, TraceClassifier};
use crate::diagnosis::{self, health_states, Diagnosis, DiagnosisSet, LikelihoodCache, Observation, Outcome};
use crate::error::{Error, Result};
use crate::features::{CallGraph, FeatureExtractor, Instance, LabeledDataset, Split};
use crate::planner::{ConfidenceTable, Guide, PlannerState, Strategy, DEFAULT_TOP_K};
use crate::project::{FaultSet, NodeId, Project, TraceTable};
use crate::rng;

const MAX_INITIAL_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retraining {
    Off,
    /// Retrain after every `n` planned executions.
    Every(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpConfig {
    /// Converge once the best diagnosis scores at least this much.
    pub score_threshold: f64,
    /// Planned executions allowed after the initial tests.
    pub test_budget: usize,
    pub initial_tests: usize,
    pub max_diag_cardinality: usize,
    pub prior_fault_prob: f64,
    pub top_k: usize,
    pub online_retraining: Retraining,
}

impl Default for LdpConfig {
    fn default() -> Self {
        LdpConfig {
            score_threshold: 0.7,
            test_budget: 150,
            initial_tests: 5,
            max_diag_cardinality: diagnosis::DEFAULT_MAX_CARDINALITY,
            prior_fault_prob: diagnosis::DEFAULT_PRIOR,
            top_k: DEFAULT_TOP_K,
            online_retraining: Retraining::Off,
        }
    }
}

impl LdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return Err(Error::Config(format!(
                "score threshold {} must be in (0, 1)",
                self.score_threshold
            )));
        }
        if self.initial_tests == 0 {
            return Err(Error::Config("initial_tests must be at least 1".into()));
        }
        if let Retraining::Every(0) = self.online_retraining {
            return Err(Error::Config("retraining interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// FAILED iff the test's trace touches the fault.
pub fn outcome_oracle(t: NodeId, traces: &TraceTable, fault: &FaultSet) -> Result<Outcome> {
    if !traces.contains(t) {
        return Err(Error::UnknownNode(t));
    }
    let failed = traces.trace(t).iter().any(|c| fault.contains(*c));
    Ok(if failed { Outcome::Failed } else { Outcome::Passed })
}

fn observe(t: NodeId, traces: &TraceTable, fault: &FaultSet) -> Result<Observation> {
    Ok(Observation {
        test: t,
        trace: traces.trace(t).clone(),
        outcome: outcome_oracle(t, traces, fault)?,
    })
}

/// `k` tests drawn uniformly without replacement, redrawn until at least one
/// of them fails. Returned ascending.
pub fn select_initial_tests(
    traces: &TraceTable,
    fault: &FaultSet,
    k: usize,
    seed: u64,
) -> Result<Vec<NodeId>> {
    let tests: Vec<NodeId> = traces.iter().map(|(t, _)| t).collect();
    if k > tests.len() {
        return Err(Error::Config(format!(
            "{k} initial tests requested from {} tests",
            tests.len()
        )));
    }
    let failing = |t: &NodeId| traces.trace(*t).iter().any(|c| fault.contains(*c));
    if !tests.iter().any(failing) {
        return Err(Error::Infeasible(format!(
            "no test covers fault {:?}",
            fault.ids()
        )));
    }
    let mut rng = rng::stage_rng(seed, "initial-tests");
    for _ in 0..MAX_INITIAL_DRAWS {
        let mut pick: Vec<NodeId> = sample(&mut rng, tests.len(), k)
            .into_iter()
            .map(|i| tests[i])
            .collect();
        if pick.iter().any(failing) {
            pick.sort();
            return Ok(pick);
        }
    }
    Err(Error::Infeasible(format!(
        "no failing initial set found in {MAX_INITIAL_DRAWS} draws"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Terminal {
    Converged,
    TimedOut,
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    Init {
        tests: Vec<NodeId>,
        failed: usize,
    },
    Execute {
        test: NodeId,
        outcome: Outcome,
    },
    Diagnose {
        top: Vec<NodeId>,
        top_score: f64,
        n_diagnoses: usize,
    },
    Retrain {
        instances: usize,
    },
    Converge {
        steps: usize,
        diagnosis: Vec<NodeId>,
        score: f64,
    },
    Timeout {
        steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub fault_id: usize,
    pub fault: FaultSet,
    pub planner: Strategy,
    pub budget: usize,
    pub seed: u64,
    /// Planned executions after the initial tests.
    pub steps: usize,
    pub terminal: Terminal,
    pub converged_diagnosis: Option<Diagnosis>,
    /// The final top diagnosis equals the injected fault.
    pub correct: bool,
    pub initial_tests: Vec<NodeId>,
    /// Planned tests in execution order.
    pub executed: Vec<NodeId>,
    pub events: Vec<Event>,
}

/// One line of the experiment CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub planner: Strategy,
    pub budget: usize,
    pub fault_id: usize,
    pub steps: usize,
    pub terminal: Terminal,
    pub correct: bool,
}

/// Reads an experiment CSV, skipping `#` comment lines.
pub fn read_experiment_csv<R: std::io::Read>(input: R) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Converged episodes per (planner, budget).
pub fn convergence_counts(rows: &[EpisodeRow]) -> Vec<ConvergenceRow> {
    let mut counts: BTreeMap<(Strategy, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        let slot = counts.entry((r.planner, r.budget)).or_default();
        slot.1 += 1;
        if r.terminal == Terminal::Converged {
            slot.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|((planner, budget), (converged, episodes))| ConvergenceRow {
            planner,
            budget,
            converged,
            episodes,
        })
        .collect()
}

/// Steps of converged episodes, ascending, per (planner, budget).
pub fn step_curves(rows: &[EpisodeRow]) -> BTreeMap<(Strategy, usize), Vec<usize>> {
    let mut curves: BTreeMap<(Strategy, usize), Vec<usize>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.terminal == Terminal::Converged) {
        curves.entry((r.planner, r.budget)).or_default().push(r.steps);
    }
    curves.values_mut().for_each(|v| v.sort_unstable());
    curves
}

/// Mean steps per planner over the faults on which every planner present in
/// `rows` converged under `budget`, with the number of such faults.
pub fn paired_mean_steps(rows: &[EpisodeRow], budget: usize) -> (BTreeMap<Strategy, f64>, usize) {
    let planners: BTreeSet<Strategy> = rows.iter().map(|r| r.planner).collect();
    let mut by_fault: BTreeMap<usize, Vec<&EpisodeRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.budget == budget) {
        by_fault.entry(r.fault_id).or_default().push(r);
    }
    let mut sums: BTreeMap<Strategy, f64> = BTreeMap::new();
    let mut n = 0;
    for group in by_fault.values() {
        if group.len() != planners.len() || group.iter().any(|r| r.terminal != Terminal::Converged) {
            continue;
        }
        n += 1;
        for r in group {
            *sums.entry(r.planner).or_default() += r.steps as f64;
        }
    }
    sums.values_mut().for_each(|v| *v /= n.max(1) as f64);
    (sums, n)
}

impl EpisodeRecord {
    pub fn row(&self) -> EpisodeRow {
        EpisodeRow {
            planner: self.planner,
            budget: self.budget,
            fault_id: self.fault_id,
            steps: self.steps,
            terminal: self.terminal,
            correct: self.correct,
        }
    }

    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            let line = serde_json::to_string(e)?;
            writeln!(out, "{line}").map_err(|e| Error::Validation(format!("writing log: {e}")))?;
        }
        Ok(())
    }
}

/// Classifier confidences plus what is needed to retrain online.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub model: TraceClassifier,
    pub table: ConfidenceTable,
    /// Training data to extend when retraining online.
    pub training: Option<LabeledDataset>,
}

impl Predictor {
    pub fn new(model: TraceClassifier, project: &Project) -> Result<Self> {
        let table = ConfidenceTable::from_classifier(&model, project)?;
        Ok(Predictor {
            model,
            table,
            training: None,
        })
    }

    pub fn with_training(mut self, dataset: LabeledDataset) -> Self {
        self.training = Some(dataset);
        self
    }

    /// Adds instances for the executed tests (sampled methods, real trace
    /// labels) to the training set and retrains.
    fn retrain(
        &mut self,
        project: &Project,
        traces: &TraceTable,
        executed: &[NodeId],
        cfg: &NetConfig,
    ) -> Result<usize> {
        let Some(training) = self.training.as_mut() else {
            return Err(Error::Config("online retraining needs a training dataset".into()));
        };
        let graph = CallGraph::build(project);
        let extractor = FeatureExtractor::new(project, &graph);
        let known: BTreeSet<(NodeId, NodeId)> =
            training.instances.iter().map(|i| (i.test, i.function)).collect();
        for &t in executed {
            let fvs = extractor.extract_row(t, &training.sampled_functions)?;
            let trace = traces.trace(t);
            for (&c, fv) in training.sampled_functions.iter().zip(fvs) {
                if known.contains(&(t, c)) {
                    continue;
                }
                training.instances.push(Instance {
                    test: t,
                    function: c,
                    features: fv,
                    label: trace.contains(&c),
                    split: Split::Train,
                });
            }
        }
        self.model = TraceClassifier::train(training, cfg)?;
        self.table = ConfidenceTable::from_classifier(&self.model, project)?;
        Ok(training.split(Split::Train).count())
    }
}

/// Inputs shared by every episode of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct Workbench<'a> {
    pub project: &'a Project,
    pub traces: &'a TraceTable,
    pub predictor: Option<&'a Predictor>,
}

/// Runs one troubleshooting episode.
pub fn run_episode(
    bench: &Workbench<'_>,
    fault_id: usize,
    fault: &FaultSet,
    planner: Strategy,
    cfg: &LdpConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    run_episode_inner(bench, fault_id, fault, planner, cfg, seed).map_err(|e| Error::Episode {
        fault: fault.ids().iter().copied().collect(),
        planner: planner.to_string(),
        source: Box::new(e),
    })
}

fn run_episode_inner(
    bench: &Workbench<'_>,
    fault_id: usize,
    fault: &FaultSet,
    planner: Strategy,
    cfg: &LdpConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    cfg.validate()?;
    let (project, traces) = (bench.project, bench.traces);
    let mut predictor = match (planner, bench.predictor) {
        (Strategy::Predicted, Some(p)) => Some(p.clone()),
        (Strategy::Predicted, None) => {
            return Err(Error::Config("the predicted planner needs a trained classifier".into()))
        }
        _ => None,
    };
    let n_components = project.functions().len();

    let initial = select_initial_tests(traces, fault, cfg.initial_tests, seed)?;
    let mut observations: Vec<Observation> = initial
        .iter()
        .map(|&t| observe(t, traces, fault))
        .collect::<Result<_>>()?;
    let mut events = vec![Event::Init {
        tests: initial.clone(),
        failed: observations.iter().filter(|o| o.outcome == Outcome::Failed).count(),
    }];
    let t_left: BTreeSet<NodeId> = traces
        .iter()
        .map(|(t, _)| t)
        .filter(|t| !initial.contains(t))
        .collect();
    let mut state = PlannerState::new(
        t_left,
        planner,
        cfg.top_k,
        rng::stage_rng(seed, "planner-random"),
    )?;
    let mut executed = Vec::new();
    let mut cache = LikelihoodCache::new();

    let (terminal, last): (Terminal, DiagnosisSet) = loop {
        let ds = diagnosis::diagnose_cached(
            &observations,
            cfg.max_diag_cardinality,
            cfg.prior_fault_prob,
            n_components,
            &mut cache,
        )?;
        events.push(Event::Diagnose {
            top: ds.top().map(|d| d.components.clone()).unwrap_or_default(),
            top_score: ds.max_score(),
            n_diagnoses: ds.len(),
        });
        if ds.max_score() >= cfg.score_threshold {
            break (Terminal::Converged, ds);
        }
        if executed.len() >= cfg.test_budget || state.t_left.is_empty() {
            break (Terminal::TimedOut, ds);
        }
        let h = health_states(&ds);
        let guide = match planner {
            Strategy::Predicted => Guide::Predicted(&predictor.as_ref().expect("checked above").table),
            Strategy::Oracle => Guide::Oracle(traces),
            Strategy::Random => Guide::Random,
        };
        let t = state.next_test(guide, &h)?;
        state.t_left.remove(&t);
        let obs = observe(t, traces, fault)?;
        events.push(Event::Execute {
            test: t,
            outcome: obs.outcome,
        });
        observations.push(obs);
        executed.push(t);

        if let (Retraining::Every(n), Some(p)) = (cfg.online_retraining, predictor.as_mut()) {
            if executed.len() % n == 0 {
                let mut all = initial.clone();
                all.extend(&executed);
                let instances = p.retrain(project, traces, &all, &p.model.config.clone())?;
                events.push(Event::Retrain { instances });
            }
        }
    };

    let steps = executed.len();
    let top = last.top().cloned();
    let correct = top
        .as_ref()
        .is_some_and(|d| d.components.iter().copied().collect::<BTreeSet<_>>() == *fault.ids());
    let converged_diagnosis = match terminal {
        Terminal::Converged => {
            let d = top.clone().expect("converged with a diagnosis");
            events.push(Event::Converge {
                steps,
                diagnosis: d.components.clone(),
                score: d.score,
            });
            Some(d)
        }
        Terminal::TimedOut => {
            events.push(Event::Timeout { steps });
            None
        }
    };
    Ok(EpisodeRecord {
        fault_id,
        fault: fault.clone(),
        planner,
        budget: cfg.test_budget,
        seed,
        steps,
        terminal,
        converged_diagnosis,
        correct,
        initial_tests: initial,
        executed,
        events,
    })
}

/// Seed of the episodes for one fault. Shared by every planner and budget so
/// that comparisons are paired.
pub fn episode_seed(seed: u64, fault_id: usize) -> u64 {
    rng::derive_indexed(seed, "episode", fault_id as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub planner: Strategy,
    pub budget: usize,
    pub converged: usize,
    pub episodes: usize,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<EpisodeRow> {
        self.records.iter().map(EpisodeRecord::row).collect()
    }

    /// Converged episodes per (planner, budget).
    pub fn convergence_counts(&self) -> Vec<ConvergenceRow> {
        convergence_counts(&self.rows())
    }

    pub fn converged(&self, planner: Strategy, budget: usize) -> usize {
        self.records
            .iter()
            .filter(|r| r.planner == planner && r.budget == budget && r.terminal == Terminal::Converged)
            .count()
    }

    /// Steps of converged episodes, ascending, per (planner, budget).
    pub fn step_curves(&self) -> BTreeMap<(Strategy, usize), Vec<usize>> {
        step_curves(&self.rows())
    }

    /// See [`paired_mean_steps`].
    pub fn paired_mean_steps(&self, budget: usize) -> (BTreeMap<Strategy, f64>, usize) {
        paired_mean_steps(&self.rows(), budget)
    }

    pub fn record(&self, planner: Strategy, budget: usize, fault_id: usize) -> Option<&EpisodeRecord> {
        self.records
            .iter()
            .find(|r| r.planner == planner && r.budget == budget && r.fault_id == fault_id)
    }

    /// Experiment CSV: planner, budget, fault_id, steps, terminal, correct.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("writing csv: {e}")))?;
        Ok(())
    }

    /// Bar-chart data: converged episodes per planner and budget.
    pub fn write_convergence_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["planner", "budget", "converged", "episodes"])?;
        for row in self.convergence_counts() {
            w.write_record([
                row.planner.to_string(),
                row.budget.to_string(),
                row.converged.to_string(),
                row.episodes.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Validation(format!("writing csv: {e}")))?;
        Ok(())
    }

    /// Curve data: sorted steps-to-convergence per planner and budget.
    pub fn write_steps_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["planner", "budget", "rank", "steps"])?;
        for ((planner, budget), steps) in self.step_curves() {
            for (rank, s) in steps.iter().enumerate() {
                w.write_record([
                    planner.to_string(),
                    budget.to_string(),
                    (rank + 1).to_string(),
                    s.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Validation(format!("writing csv: {e}")))?;
        Ok(())
    }

    /// Line-delimited JSON of every episode, each event tagged with its
    /// episode coordinates.
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            for e in &r.events {
                let mut value = serde_json::to_value(e)?;
                if let serde_json::Value::Object(map) = &mut value {
                    map.insert("planner".into(), serde_json::to_value(r.planner)?);
                    map.insert("budget".into(), r.budget.into());
                    map.insert("fault_id".into(), r.fault_id.into());
                }
                writeln!(out, "{value}").map_err(|e| Error::Validation(format!("writing log: {e}")))?;
            }
        }
        Ok(())
    }
}

/// The record `full` would have been under the smaller budget `budget`.
///
/// Planners never look at the budget, so a session with budget `b` is the
/// first `b` steps of any longer session with the same seed.
pub fn truncate_record(full: &EpisodeRecord, budget: usize) -> Result<EpisodeRecord> {
    if budget > full.budget {
        return Err(Error::Config(format!(
            "cannot extend a budget-{} episode to budget {budget}",
            full.budget
        )));
    }
    if full.steps <= budget {
        return Ok(EpisodeRecord {
            budget,
            ..full.clone()
        });
    }
    // Keep everything up to the diagnosis that follows the budget-th execution.
    let mut events = Vec::new();
    let mut executions = 0;
    let mut top = Vec::new();
    for event in &full.events {
        match event {
            Event::Execute { .. } => executions += 1,
            Event::Diagnose { top: t, .. } if executions == budget => {
                top = t.clone();
                events.push(event.clone());
                break;
            }
            _ => {}
        }
        events.push(event.clone());
    }
    events.push(Event::Timeout { steps: budget });
    let correct = !top.is_empty() && top.iter().copied().collect::<BTreeSet<_>>() == *full.fault.ids();
    Ok(EpisodeRecord {
        budget,
        steps: budget,
        terminal: Terminal::TimedOut,
        converged_diagnosis: None,
        correct,
        executed: full.executed[..budget].to_vec(),
        events,
        ..full.clone()
    })
}

/// One episode per (fault, planner, budget); the record order is fault-major,
/// then planner, then budget. Each (fault, planner) pair runs once under the
/// largest budget and smaller budgets are read off by truncation.
pub fn run_experiment(
    bench: &Workbench<'_>,
    faults: &[FaultSet],
    planners: &[Strategy],
    budgets: &[usize],
    cfg: &LdpConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    if faults.is_empty() || planners.is_empty() || budgets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max_budget = *budgets.iter().max().expect("non-empty");
    let full_cfg = LdpConfig {
        test_budget: max_budget,
        ..cfg.clone()
    };
    let jobs: Vec<(usize, Strategy)> = (0..faults.len())
        .flat_map(|f| planners.iter().map(move |&p| (f, p)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(f, planner)| {
            let full = run_episode(bench, f, &faults[f], planner, &full_cfg, episode_seed(seed, f))?;
            budgets.iter().map(|&b| truncate_record(&full, b)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        records: per_job.into_iter().flatten().collect(),
    })
}
