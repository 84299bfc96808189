//! Seeded synthetic corpora with ground-truth traces.
//!
//! Classes are laid out in order and calls only flow towards later methods of
//! the same class or towards the next few classes, so the static graph is a
//! DAG of bounded depth. A fraction of function-to-function calls is marked
//! dynamic: those calls happen at run time but are invisible to the static
//! call graph.
//!
//! Ids: functions take `0..F` in class order, tests take `F..F+T`.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::project::{Edge, FaultSet, FunctionRef, NodeId, Project, TestRef, TraceTable};
use crate::rng;

/// Inclusive integer range, serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span(pub usize, pub usize);

impl Span {
    pub fn min(&self) -> usize {
        self.0
    }

    pub fn max(&self) -> usize {
        self.1
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(self.0..=self.1)
    }
}

pub const DEFAULT_WORDS: &[&str] = &[
    "string", "utils", "array", "number", "format", "parse", "value", "builder", "char", "date",
    "time", "range", "math", "fraction", "matrix", "vector", "random", "locale", "escape", "text",
    "object", "class", "reflect", "field", "method", "system", "word", "bool", "lang", "token",
    "stream", "buffer", "compare", "hash", "equals", "serial", "event", "bit", "map", "list",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub name: String,
    pub n_classes: usize,
    pub methods_per_class: Span,
    pub word_pool: Vec<String>,
    /// Out-degree of every function before static/dynamic labeling.
    pub static_out_degree: Span,
    /// Share of function-to-function calls that are dynamic.
    pub dynamic_edge_fraction: f64,
    pub tests_per_class: usize,
    /// Entry callees per test, drawn from the test's target class.
    pub test_entry_calls: Span,
    /// How many later classes a cross-class call may reach.
    pub class_call_window: usize,
    /// Probability that a call stays inside its class.
    pub intra_class_call_prob: f64,
    pub naming_correlation: f64,
    pub branch_prob: f64,
    pub dynamic_prob: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            name: "synthetic".into(),
            n_classes: 50,
            methods_per_class: Span(6, 10),
            word_pool: DEFAULT_WORDS.iter().map(|w| w.to_string()).collect(),
            static_out_degree: Span(0, 3),
            dynamic_edge_fraction: 0.15,
            tests_per_class: 2,
            test_entry_calls: Span(1, 3),
            class_call_window: 4,
            intra_class_call_prob: 0.5,
            naming_correlation: 0.8,
            branch_prob: 0.7,
            dynamic_prob: 0.5,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("dynamic_edge_fraction", self.dynamic_edge_fraction),
            ("intra_class_call_prob", self.intra_class_call_prob),
            ("naming_correlation", self.naming_correlation),
            ("branch_prob", self.branch_prob),
            ("dynamic_prob", self.dynamic_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        for (name, span) in [
            ("methods_per_class", self.methods_per_class),
            ("static_out_degree", self.static_out_degree),
            ("test_entry_calls", self.test_entry_calls),
        ] {
            if span.0 > span.1 {
                return Err(Error::Config(format!("{name} range [{}, {}] is empty", span.0, span.1)));
            }
        }
        if self.n_classes == 0 {
            return Err(Error::Config("n_classes must be at least 1".into()));
        }
        if self.methods_per_class.0 == 0 {
            return Err(Error::Config("methods_per_class must start at 1 or more".into()));
        }
        if self.test_entry_calls.0 == 0 {
            return Err(Error::Config("test_entry_calls must start at 1 or more".into()));
        }
        let distinct: HashSet<&str> = self.word_pool.iter().map(String::as_str).collect();
        if distinct.len() < 8 {
            return Err(Error::Config(format!(
                "word_pool needs at least 8 distinct words, got {}",
                distinct.len()
            )));
        }
        if let Some(w) = self
            .word_pool
            .iter()
            .find(|w| w.is_empty() || !w.bytes().all(|b| b.is_ascii_lowercase()) || *w == "test")
        {
            return Err(Error::Config(format!(
                "word_pool entry {w:?} must be a lowercase ASCII word other than \"test\""
            )));
        }
        Ok(())
    }

    fn words(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.word_pool
            .iter()
            .map(String::as_str)
            .filter(|w| seen.insert(*w))
            .collect()
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// One or two distinct words from the pool.
fn draw_words<'a>(words: &[&'a str], rng: &mut ChaCha8Rng) -> Vec<&'a str> {
    let n = rng.gen_range(1..=2);
    sample(rng, words.len(), n).into_iter().map(|i| words[i]).collect()
}

fn upper_camel(words: &[&str]) -> String {
    words.iter().map(|w| capitalize(w)).collect()
}

fn lower_camel(words: &[&str]) -> String {
    let mut out = words[0].to_string();
    for w in &words[1..] {
        out.push_str(&capitalize(w));
    }
    out
}

/// Generates a project. Pure function of `cfg`.
pub fn generate_project(cfg: &GenConfig) -> Result<Project> {
    cfg.validate()?;
    let words = cfg.words();
    let mut rng = rng::stage_rng(cfg.seed, "project");

    let mut functions = Vec::new();
    let mut classes: Vec<Vec<NodeId>> = Vec::with_capacity(cfg.n_classes);
    let mut class_words: Vec<Vec<&str>> = Vec::with_capacity(cfg.n_classes);
    let mut next_id = 0u32;
    for _ in 0..cfg.n_classes {
        let cw = draw_words(&words, &mut rng);
        let class_name = upper_camel(&cw);
        let n_methods = cfg.methods_per_class.draw(&mut rng);
        let mut ids = Vec::with_capacity(n_methods);
        for _ in 0..n_methods {
            let mw = draw_words(&words, &mut rng);
            functions.push(FunctionRef {
                id: NodeId(next_id),
                class_name: class_name.clone(),
                method_name: lower_camel(&mw),
            });
            ids.push(NodeId(next_id));
            next_id += 1;
        }
        classes.push(ids);
        class_words.push(cw);
    }

    // Function-to-function calls, then a random subset relabeled dynamic.
    let mut calls: BTreeSet<Edge> = BTreeSet::new();
    for (k, members) in classes.iter().enumerate() {
        let later_classes: Vec<NodeId> = classes
            .iter()
            .skip(k + 1)
            .take(cfg.class_call_window)
            .flatten()
            .copied()
            .collect();
        for (pos, &caller) in members.iter().enumerate() {
            let local = &members[pos + 1..];
            let degree = cfg.static_out_degree.draw(&mut rng);
            for _ in 0..degree {
                let prefer_local = rng.gen::<f64>() < cfg.intra_class_call_prob;
                let pool: &[NodeId] = match (prefer_local, local.is_empty(), later_classes.is_empty()) {
                    (_, true, true) => continue,
                    (true, false, _) | (false, false, true) => local,
                    _ => &later_classes,
                };
                let callee = *pool.choose(&mut rng).expect("non-empty pool");
                calls.insert(Edge(caller, callee));
            }
        }
    }
    let calls: Vec<Edge> = calls.into_iter().collect();
    let n_dynamic = (cfg.dynamic_edge_fraction * calls.len() as f64).round() as usize;
    let dynamic_idx: HashSet<usize> = sample(&mut rng, calls.len(), n_dynamic.min(calls.len()))
        .into_iter()
        .collect();
    let mut static_edges = Vec::new();
    let mut dynamic_edges = Vec::new();
    for (i, e) in calls.into_iter().enumerate() {
        if dynamic_idx.contains(&i) {
            dynamic_edges.push(e);
        } else {
            static_edges.push(e);
        }
    }

    let mut tests = Vec::new();
    for (k, members) in classes.iter().enumerate() {
        for _ in 0..cfg.tests_per_class {
            let id = NodeId(next_id);
            next_id += 1;
            let n_entry = cfg.test_entry_calls.draw(&mut rng).min(members.len());
            let mut entries: Vec<NodeId> = sample(&mut rng, members.len(), n_entry)
                .into_iter()
                .map(|i| members[i])
                .collect();
            let named_after_target = rng.gen::<f64>() < cfg.naming_correlation;
            let (class_name, method_name) = if named_after_target {
                let target = &functions[entries[0].0 as usize];
                (
                    format!("{}Test", upper_camel(&class_words[k])),
                    format!("test{}", capitalize(&target.method_name)),
                )
            } else {
                let cw = draw_words(&words, &mut rng);
                let mw = draw_words(&words, &mut rng);
                (format!("{}Test", upper_camel(&cw)), format!("test{}", upper_camel(&mw)))
            };
            tests.push(TestRef {
                id,
                class_name,
                method_name,
            });
            entries.sort();
            static_edges.extend(entries.into_iter().map(|c| Edge(id, c)));
        }
    }

    Project::new(cfg.name.clone(), functions, tests, static_edges, dynamic_edges)
}

/// Out-edges of every node, ascending by callee, each tagged dynamic or not.
fn adjacency(project: &Project) -> BTreeMap<NodeId, Vec<(NodeId, bool)>> {
    let mut adj: BTreeMap<NodeId, Vec<(NodeId, bool)>> = BTreeMap::new();
    for e in project.static_edges() {
        adj.entry(e.0).or_default().push((e.1, false));
    }
    for e in project.dynamic_edges() {
        adj.entry(e.0).or_default().push((e.1, true));
    }
    for out in adj.values_mut() {
        out.sort();
    }
    adj
}

/// Stochastic traversal from `test`.
///
/// Breadth-first from the test; each node is expanded once, on first visit.
/// Every out-edge of an expanded node consumes exactly one uniform draw from
/// the test's stream, in ascending callee order, whether or not the callee was
/// already visited. A static edge is taken when the draw is below
/// `branch_prob`, a dynamic edge when it is below `dynamic_prob`.
pub fn trace_of(
    adj: &BTreeMap<NodeId, Vec<(NodeId, bool)>>,
    test: NodeId,
    cfg: &GenConfig,
) -> BTreeSet<NodeId> {
    let mut rng = rng::test_stream(cfg.seed, test.0);
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([test]);
    let mut seen: HashSet<NodeId> = HashSet::from([test]);
    while let Some(node) = queue.pop_front() {
        for &(callee, dynamic) in adj.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            let p = if dynamic { cfg.dynamic_prob } else { cfg.branch_prob };
            let taken = rng.gen::<f64>() < p;
            if taken && seen.insert(callee) {
                visited.insert(callee);
                queue.push_back(callee);
            }
        }
    }
    visited
}

/// Ground-truth traces for every test of `project`.
pub fn generate_traces(project: &Project, cfg: &GenConfig) -> Result<TraceTable> {
    let adj = adjacency(project);
    let traces = project
        .test_ids()
        .map(|t| (t, trace_of(&adj, t, cfg)))
        .collect();
    TraceTable::new(project, traces)
}

/// Generates a project together with its traces.
pub fn generate_corpus(cfg: &GenConfig) -> Result<(Project, TraceTable)> {
    let project = generate_project(cfg)?;
    let traces = generate_traces(&project, cfg)?;
    Ok((project, traces))
}

fn binomial_at_least(n: usize, k: usize, needed: usize) -> bool {
    if k > n {
        return needed == 0;
    }
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c >= needed as u128 {
            return true;
        }
    }
    c >= needed as u128
}

/// Draws `n_faults` distinct fault sets of `cardinality` functions, each
/// member covered by at least one trace.
pub fn inject_faults(
    traces: &TraceTable,
    cardinality: usize,
    n_faults: usize,
    seed: u64,
) -> Result<Vec<FaultSet>> {
    if cardinality == 0 {
        return Err(Error::Infeasible("fault cardinality must be at least 1".into()));
    }
    let covered: Vec<NodeId> = traces.covered().into_iter().collect();
    if !binomial_at_least(covered.len(), cardinality, n_faults) {
        return Err(Error::Infeasible(format!(
            "{n_faults} distinct faults of size {cardinality} requested but only {} functions are covered",
            covered.len()
        )));
    }
    let mut rng = rng::stage_rng(seed, "faults");
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n_faults);
    while out.len() < n_faults {
        let pick = sample(&mut rng, covered.len(), cardinality)
            .into_iter()
            .map(|i| covered[i]);
        let fault = FaultSet::new(pick)?;
        if seen.insert(fault.clone()) {
            out.push(fault);
        }
    }
    Ok(out)
}
