//! Static call graph, pair features and labeled datasets.
//!
//! A (test, component) pair is described by eight numbers: four read off the
//! static call graph and four comparing names. Graph features only ever see
//! static edges; a call that happens through a dynamic edge leaves no trace in
//! them.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::project::{NodeId, Project, TraceTable};
use crate::rng;

/// Shortest-path value used for unreachable pairs.
pub const DEFAULT_PATH_CAP: u32 = 20;

pub const N_FEATURES: usize = 8;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "path_existence",
    "shortest_path",
    "target_in_degree",
    "source_out_degree",
    "class_common_words",
    "method_common_words",
    "class_name_distance",
    "method_name_distance",
];

/// Adjacency over tests and functions using static edges only.
#[derive(Debug, Clone)]
pub struct CallGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    succ: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
}

impl CallGraph {
    pub fn build(project: &Project) -> Self {
        let mut ids: Vec<NodeId> = project.function_ids().chain(project.test_ids()).collect();
        ids.sort();
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut succ = vec![Vec::new(); ids.len()];
        let mut in_degree = vec![0; ids.len()];
        for e in project.static_edges() {
            let (a, b) = (index[&e.0], index[&e.1]);
            succ[a].push(b);
            in_degree[b] += 1;
        }
        CallGraph {
            ids,
            index,
            succ,
            in_degree,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    fn idx(&self, id: NodeId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        self.index
            .get(&id)
            .map(|&i| self.succ[i].iter().map(|&j| self.ids[j]).collect())
            .unwrap_or_default()
    }

    pub fn out_degree(&self, id: NodeId) -> Result<usize> {
        Ok(self.succ[self.idx(id)?].len())
    }

    pub fn in_degree(&self, id: NodeId) -> Result<usize> {
        Ok(self.in_degree[self.idx(id)?])
    }

    /// Breadth-first edge distances from `source`, indexed like the graph's
    /// sorted node list; `None` where unreachable. The source itself is at 0.
    fn distances(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.ids.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap() + 1;
            for &v in &self.succ[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Length in edges of the shortest directed path, `None` if unreachable.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<Option<u32>> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        Ok(self.distances(a)[b])
    }

    pub fn path_exists(&self, from: NodeId, to: NodeId) -> Result<bool> {
        Ok(self.shortest_path(from, to)?.is_some())
    }

    /// Shortest path with unreachable pairs encoded as `cap`.
    pub fn shortest_path_len(&self, from: NodeId, to: NodeId, cap: u32) -> Result<u32> {
        Ok(self.shortest_path(from, to)?.unwrap_or(cap))
    }

    /// All nodes reachable from `from` (excluding `from` unless on a cycle).
    pub fn reachable(&self, from: NodeId) -> Result<BTreeSet<NodeId>> {
        let a = self.idx(from)?;
        let mut seen = vec![false; self.ids.len()];
        let mut stack = vec![a];
        let mut out = BTreeSet::new();
        while let Some(u) = stack.pop() {
            for &v in &self.succ[u] {
                if !seen[v] {
                    seen[v] = true;
                    out.insert(self.ids[v]);
                    stack.push(v);
                }
            }
        }
        Ok(out)
    }
}

/// Splits a camel-case identifier into lowercase words. Each capital letter
/// starts a new word, digits stay with the word before them and underscores
/// separate words.
pub fn camel_split(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in name.chars() {
        if ch == '_' {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if ch.is_ascii_uppercase() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            current.push(ch.to_ascii_lowercase());
        } else {
            current.push(ch.to_ascii_lowercase());
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Number of distinct words the two names share.
pub fn common_words(a: &str, b: &str) -> usize {
    let wa: BTreeSet<String> = camel_split(a).into_iter().collect();
    let wb: BTreeSet<String> = camel_split(b).into_iter().collect();
    wa.intersection(&wb).count()
}

/// Unit-cost Levenshtein distance over bytes.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer name's length.
pub fn name_distance(a: &str, b: &str) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub path_existence: f64,
    pub shortest_path: f64,
    pub target_in_degree: f64,
    pub source_out_degree: f64,
    pub class_common_words: f64,
    pub method_common_words: f64,
    pub class_name_distance: f64,
    pub method_name_distance: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.path_existence,
            self.shortest_path,
            self.target_in_degree,
            self.source_out_degree,
            self.class_common_words,
            self.method_common_words,
            self.class_name_distance,
            self.method_name_distance,
        ]
    }

    pub fn from_array(v: [f64; N_FEATURES]) -> Self {
        FeatureVector {
            path_existence: v[0],
            shortest_path: v[1],
            target_in_degree: v[2],
            source_out_degree: v[3],
            class_common_words: v[4],
            method_common_words: v[5],
            class_name_distance: v[6],
            method_name_distance: v[7],
        }
    }
}

/// Computes feature vectors against one project and its call graph.
pub struct FeatureExtractor<'a> {
    project: &'a Project,
    graph: &'a CallGraph,
    path_cap: u32,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(project: &'a Project, graph: &'a CallGraph) -> Self {
        Self::with_path_cap(project, graph, DEFAULT_PATH_CAP)
    }

    pub fn with_path_cap(project: &'a Project, graph: &'a CallGraph, path_cap: u32) -> Self {
        FeatureExtractor {
            project,
            graph,
            path_cap,
        }
    }

    fn check_test(&self, t: NodeId) -> Result<usize> {
        self.project.test(t).ok_or(Error::UnknownNode(t))?;
        self.graph.idx(t)
    }

    fn vector(&self, t: NodeId, c: NodeId, dist: &[Option<u32>]) -> Result<FeatureVector> {
        let ci = self.graph.idx(c)?;
        let func = self.project.function(c).ok_or(Error::UnknownNode(c))?;
        let test = self.project.test(t).ok_or(Error::UnknownNode(t))?;
        let reach = dist[ci];
        Ok(FeatureVector {
            path_existence: if reach.is_some() { 1.0 } else { 0.0 },
            shortest_path: f64::from(reach.unwrap_or(self.path_cap)),
            target_in_degree: self.graph.in_degree[ci] as f64,
            source_out_degree: self.graph.succ[self.graph.idx(t)?].len() as f64,
            class_common_words: common_words(&test.class_name, &func.class_name) as f64,
            method_common_words: common_words(&test.method_name, &func.method_name) as f64,
            class_name_distance: name_distance(&test.class_name, &func.class_name),
            method_name_distance: name_distance(&test.method_name, &func.method_name),
        })
    }

    /// Features of one (test, component) pair.
    pub fn extract(&self, t: NodeId, c: NodeId) -> Result<FeatureVector> {
        let ti = self.check_test(t)?;
        self.vector(t, c, &self.graph.distances(ti))
    }

    /// Features of `t` against every function in `components`; one BFS.
    pub fn extract_row(&self, t: NodeId, components: &[NodeId]) -> Result<Vec<FeatureVector>> {
        let ti = self.check_test(t)?;
        let dist = self.graph.distances(ti);
        components.iter().map(|&c| self.vector(t, c, &dist)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub test: NodeId,
    pub function: NodeId,
    pub features: FeatureVector,
    pub label: bool,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Share of COMPS that is traced and turned into instances.
    pub sample_fraction: f64,
    /// Share of instances assigned to TRAIN.
    pub split_ratio: f64,
    pub path_cap: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            sample_fraction: 0.10,
            split_ratio: 0.5,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub instances: Vec<Instance>,
    /// Functions whose traces were recorded, ascending.
    pub sampled_functions: Vec<NodeId>,
}

impl LabeledDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Instance> {
        self.instances.iter().filter(move |i| i.split == split)
    }

    /// Feature rows and labels of one partition.
    pub fn matrix(&self, split: Split) -> (Vec<Vec<f64>>, Vec<bool>) {
        self.split(split)
            .map(|i| (i.features.to_array().to_vec(), i.label))
            .unzip()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.instances.is_empty() {
            return 0.0;
        }
        self.instances.iter().filter(|i| i.label).count() as f64 / self.instances.len() as f64
    }

    /// Writes the delimiter-separated export: ids, the eight features, label.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["test_id", "function_id"];
        header.extend(FEATURE_NAMES);
        header.push("label");
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut row = vec![inst.test.to_string(), inst.function.to_string()];
            row.extend(inst.features.to_array().iter().map(|v| v.to_string()));
            row.push(u8::from(inst.label).to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("writing dataset: {e}")))?;
        Ok(())
    }
}

/// Samples methods, pairs every test with every sampled method and labels
/// each pair from the trace table.
pub fn build_dataset(
    project: &Project,
    traces: &TraceTable,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "sample_fraction {} must be in (0, 1]",
            cfg.sample_fraction
        )));
    }
    if !(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0) {
        return Err(Error::Config(format!("split_ratio {} must be in (0, 1)", cfg.split_ratio)));
    }
    if project.functions().is_empty() || project.tests().is_empty() {
        return Err(Error::EmptyInput);
    }
    let functions: Vec<NodeId> = project.function_ids().collect();
    let n_sampled = (cfg.sample_fraction * functions.len() as f64).ceil() as usize;
    let mut rng = rng::stage_rng(seed, "dataset-sample");
    let mut sampled: Vec<NodeId> = sample(&mut rng, functions.len(), n_sampled.min(functions.len()))
        .into_iter()
        .map(|i| functions[i])
        .collect();
    sampled.sort();

    let graph = CallGraph::build(project);
    let extractor = FeatureExtractor::with_path_cap(project, &graph, cfg.path_cap);
    let tests: Vec<NodeId> = project.test_ids().collect();
    let rows: Vec<Vec<Instance>> = tests
        .par_iter()
        .map(|&t| {
            let trace = traces.trace(t);
            let fvs = extractor.extract_row(t, &sampled)?;
            Ok(sampled
                .iter()
                .zip(fvs)
                .map(|(&c, features)| Instance {
                    test: t,
                    function: c,
                    features,
                    label: trace.contains(&c),
                    split: Split::Test,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut instances: Vec<Instance> = rows.into_iter().flatten().collect();

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng::stage_rng(seed, "dataset-split"));
    let n_train = (cfg.split_ratio * instances.len() as f64).round() as usize;
    for &i in &order[..n_train] {
        instances[i].split = Split::Train;
    }
    Ok(LabeledDataset {
        instances,
        sampled_functions: sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::{Edge, FunctionRef, TestRef};
    use crate::synth::{generate_corpus, GenConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn f(id: u32, class: &str, method: &str) -> FunctionRef {
        FunctionRef {
            id: NodeId(id),
            class_name: class.into(),
            method_name: method.into(),
        }
    }

    fn t(id: u32, class: &str, method: &str) -> TestRef {
        TestRef {
            id: NodeId(id),
            class_name: class.into(),
            method_name: method.into(),
        }
    }

    fn e(a: u32, b: u32) -> Edge {
        Edge(NodeId(a), NodeId(b))
    }

    /// t=100 → 1 → 2, plus a dynamic edge 100 → 9.
    fn toy() -> Project {
        Project::new(
            "toy",
            vec![
                f(1, "StringUtils", "capitalize"),
                f(2, "StringUtils", "isEmpty"),
                f(3, "NumberFormat", "parse"),
                f(9, "Dyn", "load"),
            ],
            vec![t(100, "StringUtilsTest", "testCapitalize")],
            vec![e(100, 1), e(1, 2)],
            vec![e(100, 9)],
        )
        .unwrap()
    }

    #[test]
    fn degrees_and_dynamic_exclusion() {
        let p = toy();
        let g = CallGraph::build(&p);
        assert_eq!(g.out_degree(NodeId(100)).unwrap(), 1);
        assert_eq!(g.in_degree(NodeId(2)).unwrap(), 1);
        assert!(!g.path_exists(NodeId(100), NodeId(9)).unwrap());
        assert_eq!(g.edge_count(), 2);
        assert!(matches!(g.path_exists(NodeId(100), NodeId(55)), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn shortest_paths() {
        let p = Project::new(
            "sp",
            vec![f(1, "A", "a"), f(2, "B", "b"), f(3, "C", "c")],
            vec![t(10, "T", "t")],
            // t→a→c and t→b→a
            vec![e(10, 1), e(1, 3), e(10, 2), e(2, 1)],
            vec![],
        )
        .unwrap();
        let g = CallGraph::build(&p);
        assert_eq!(g.shortest_path_len(NodeId(10), NodeId(1), 20).unwrap(), 1);
        assert_eq!(g.shortest_path_len(NodeId(10), NodeId(3), 20).unwrap(), 2);
        assert_eq!(g.shortest_path_len(NodeId(3), NodeId(10), 20).unwrap(), 20);
    }

    #[test]
    fn camel_split_rules() {
        assert_eq!(camel_split("StringUtilsTest"), ["string", "utils", "test"]);
        assert_eq!(camel_split("capitalize"), ["capitalize"]);
        assert_eq!(camel_split("toCSV2"), ["to", "c", "s", "v2"]);
    }

    #[test]
    fn common_word_counts() {
        assert_eq!(common_words("StringUtilsTest", "StringUtils"), 2);
        assert_eq!(common_words("parseValueNow", "parseValueNow"), 3);
        assert_eq!(common_words("parseValue", "StringUtils"), 0);
        assert_eq!(common_words("valueValue", "Value"), 1);
    }

    #[test]
    fn name_distances() {
        assert_eq!(name_distance("abc", "abc"), 0.0);
        assert!((name_distance("abc", "abd") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(name_distance("a", "xyz"), 1.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn unreachable_unrelated_pair() {
        let p = toy();
        let g = CallGraph::build(&p);
        let fv = FeatureExtractor::new(&p, &g).extract(NodeId(100), NodeId(3)).unwrap();
        assert_eq!(fv.path_existence, 0.0);
        assert_eq!(fv.shortest_path, f64::from(DEFAULT_PATH_CAP));
        assert_eq!(fv.target_in_degree, 0.0);
        assert_eq!(fv.source_out_degree, 1.0);
        assert_eq!(fv.class_common_words, 0.0);
        assert_eq!(fv.method_common_words, 0.0);
        assert!(fv.class_name_distance > 0.0 && fv.method_name_distance > 0.0);
    }

    #[test]
    fn direct_call_named_after_class() {
        let p = toy();
        let g = CallGraph::build(&p);
        let fv = FeatureExtractor::new(&p, &g).extract(NodeId(100), NodeId(1)).unwrap();
        assert_eq!((fv.path_existence, fv.shortest_path), (1.0, 1.0));
        assert_eq!(fv.class_common_words, 2.0);
        assert_eq!(fv.method_common_words, 1.0);
        // Reached only through the dynamic edge: no graph signal.
        let dynamic = FeatureExtractor::new(&p, &g).extract(NodeId(100), NodeId(9)).unwrap();
        assert_eq!(dynamic.path_existence, 0.0);
    }

    #[test]
    fn extract_rejects_unknown_ids() {
        let p = toy();
        let g = CallGraph::build(&p);
        let x = FeatureExtractor::new(&p, &g);
        assert!(x.extract(NodeId(1), NodeId(2)).is_err());
        assert!(x.extract(NodeId(100), NodeId(77)).is_err());
    }

    #[test]
    fn row_extraction_matches_single_pairs() {
        let (p, _) = generate_corpus(&GenConfig {
            n_classes: 8,
            seed: 1,
            ..GenConfig::default()
        })
        .unwrap();
        let g = CallGraph::build(&p);
        let x = FeatureExtractor::new(&p, &g);
        let comps: Vec<NodeId> = p.function_ids().collect();
        for t in p.test_ids().take(4) {
            let row = x.extract_row(t, &comps).unwrap();
            for (c, fv) in comps.iter().zip(&row) {
                assert_eq!(&x.extract(t, *c).unwrap(), fv);
            }
        }
    }

    #[test]
    fn dataset_sizes_and_labels() {
        // 100 tests × 2000 methods.
        let functions: Vec<FunctionRef> = (0..2000).map(|i| f(i, "Lib", "call")).collect();
        let tests: Vec<TestRef> = (2000..2100).map(|i| t(i, "LibTest", "testCall")).collect();
        let edges: Vec<Edge> = (2000..2100).map(|i| e(i, i - 2000)).collect();
        let p = Project::new("big", functions, tests, edges, vec![]).unwrap();
        let traces = TraceTable::new(
            &p,
            p.test_ids()
                .map(|t| (t, BTreeSet::from([NodeId(t.0 - 2000)])))
                .collect(),
        )
        .unwrap();
        let full = DatasetConfig {
            sample_fraction: 1.0,
            ..DatasetConfig::default()
        };
        let ds = build_dataset(&p, &traces, &full, 1).unwrap();
        assert_eq!(ds.instances.len(), 200_000);
        let ds = build_dataset(&p, &traces, &DatasetConfig::default(), 1).unwrap();
        assert_eq!(ds.instances.len(), 20_000);
        let n_train = ds.split(Split::Train).count();
        let n_test = ds.split(Split::Test).count();
        assert!(n_train.abs_diff(n_test) <= 1);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let inst = &ds.instances[rng.gen_range(0..ds.instances.len())];
            assert_eq!(inst.label, traces.trace(inst.test).contains(&inst.function));
        }
    }

    #[test]
    fn dataset_is_deterministic_and_validates() {
        let (p, tr) = generate_corpus(&GenConfig {
            n_classes: 10,
            seed: 2,
            ..GenConfig::default()
        })
        .unwrap();
        let cfg = DatasetConfig::default();
        assert_eq!(build_dataset(&p, &tr, &cfg, 9).unwrap(), build_dataset(&p, &tr, &cfg, 9).unwrap());
        let bad = DatasetConfig {
            sample_fraction: 0.0,
            ..cfg
        };
        assert!(build_dataset(&p, &tr, &bad, 9).is_err());
        let bad = DatasetConfig {
            split_ratio: 1.0,
            ..cfg
        };
        assert!(build_dataset(&p, &tr, &bad, 9).is_err());
    }

    #[test]
    fn csv_export_layout() {
        let p = toy();
        let traces = TraceTable::new(
            &p,
            [(NodeId(100), BTreeSet::from([NodeId(1), NodeId(9)]))].into(),
        )
        .unwrap();
        let cfg = DatasetConfig {
            sample_fraction: 1.0,
            ..DatasetConfig::default()
        };
        let ds = build_dataset(&p, &traces, &cfg, 0).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "test_id,function_id,path_existence,shortest_path,target_in_degree,source_out_degree,\
             class_common_words,method_common_words,class_name_distance,method_name_distance,label"
        );
        assert_eq!(lines.count(), 4);
    }

    /// Random digraph on `n` nodes: tests are ids 100.., functions 0...
    fn random_graph(n_funcs: u32, n_tests: u32, edges: &[(u32, u32)]) -> Project {
        let functions = (0..n_funcs).map(|i| f(i, "F", "f")).collect();
        let tests = (0..n_tests).map(|i| t(100 + i, "T", "t")).collect();
        let mut es: BTreeSet<Edge> = BTreeSet::new();
        for &(a, b) in edges {
            let caller = if a < n_tests && a % 3 == 0 { 100 + a } else { a % n_funcs };
            let callee = b % n_funcs;
            if caller != callee {
                es.insert(e(caller, callee));
            }
        }
        Project::new("rand", functions, tests, es.into_iter().collect(), vec![]).unwrap()
    }

    fn floyd_warshall(p: &Project) -> HashMap<(NodeId, NodeId), u32> {
        let ids: Vec<NodeId> = p.function_ids().chain(p.test_ids()).collect();
        let n = ids.len();
        let inf = u32::MAX / 2;
        let mut d = vec![vec![inf; n]; n];
        let pos = |id: NodeId| ids.iter().position(|x| *x == id).unwrap();
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for e in p.static_edges() {
            d[pos(e.0)][pos(e.1)] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let mut out = HashMap::new();
        for i in 0..n {
            for j in 0..n {
                if d[i][j] < inf && i != j {
                    out.insert((ids[i], ids[j]), d[i][j]);
                }
            }
        }
        out
    }

    /// Boolean transitive closure by repeated squaring of (I + A).
    fn closure(p: &Project) -> HashMap<(NodeId, NodeId), bool> {
        let ids: Vec<NodeId> = p.function_ids().chain(p.test_ids()).collect();
        let n = ids.len();
        let pos = |id: NodeId| ids.iter().position(|x| *x == id).unwrap();
        let mut a = vec![vec![false; n]; n];
        for e in p.static_edges() {
            a[pos(e.0)][pos(e.1)] = true;
        }
        let mut r = a.clone();
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
        }
        for _ in 0..5 {
            let mut sq = vec![vec![false; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if r[i][k] {
                        for j in 0..n {
                            sq[i][j] |= r[k][j];
                        }
                    }
                }
            }
            r = sq;
        }
        // r includes length-0 paths; a pair is reachable by ≥1 edge iff some
        // successor reaches it.
        let mut out = HashMap::new();
        for i in 0..n {
            for j in 0..n {
                let hit = (0..n).any(|k| a[i][k] && r[k][j]);
                out.insert((ids[i], ids[j]), hit);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn graph_queries_match_oracles(edges in proptest::collection::vec((0u32..12, 0u32..12), 0..30)) {
            let p = random_graph(9, 3, &edges);
            let g = CallGraph::build(&p);
            let fw = floyd_warshall(&p);
            let cl = closure(&p);
            let ids: Vec<NodeId> = p.function_ids().chain(p.test_ids()).collect();
            let ins: usize = ids.iter().map(|&i| g.in_degree(i).unwrap()).sum();
            let outs: usize = ids.iter().map(|&i| g.out_degree(i).unwrap()).sum();
            prop_assert_eq!(ins, p.static_edges().len());
            prop_assert_eq!(outs, p.static_edges().len());
            for &a in &ids {
                for &b in &ids {
                    if a == b { continue; }
                    prop_assert_eq!(g.path_exists(a, b).unwrap(), cl[&(a, b)]);
                    prop_assert_eq!(g.shortest_path(a, b).unwrap(), fw.get(&(a, b)).copied());
                }
            }
        }

        #[test]
        fn adding_an_edge_is_monotone(
            edges in proptest::collection::vec((0u32..12, 0u32..12), 0..25),
            extra in (0u32..12, 0u32..12),
        ) {
            let p = random_graph(9, 3, &edges);
            let mut more = edges.clone();
            more.push(extra);
            let q = random_graph(9, 3, &more);
            let (g, h) = (CallGraph::build(&p), CallGraph::build(&q));
            let ids: Vec<NodeId> = p.function_ids().chain(p.test_ids()).collect();
            for &a in &ids {
                for &b in &ids {
                    let before = g.shortest_path_len(a, b, 20).unwrap();
                    let after = h.shortest_path_len(a, b, 20).unwrap();
                    prop_assert!(after <= before);
                    if g.path_exists(a, b).unwrap() {
                        prop_assert!(h.path_exists(a, b).unwrap());
                    }
                }
            }
        }

        #[test]
        fn name_distance_properties(a in "[a-zA-Z]{1,12}", b in "[a-zA-Z]{1,12}") {
            let d = name_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, name_distance(&b, &a));
            prop_assert_eq!(d == 0.0, a == b);
        }

        #[test]
        fn common_words_bounded(a in "[a-z]{1,4}([A-Z][a-z0-9]{0,4}){0,4}", b in "[a-z]{1,4}([A-Z][a-z0-9]{0,4}){0,4}") {
            let wa: BTreeSet<String> = camel_split(&a).into_iter().collect();
            let wb: BTreeSet<String> = camel_split(&b).into_iter().collect();
            let n = common_words(&a, &b);
            prop_assert!(n <= wa.len().min(wb.len()));
            prop_assert_eq!(common_words(&a, &a), wa.len());
        }
    }
}
