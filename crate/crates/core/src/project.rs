//! The project universe: tests, components, static and dynamic call edges,
//! plus the ground-truth trace table and fault lists stored next to a corpus.
//!
//! Every file is written in a canonical form (ascending ids, sorted edges) so
//! that a load followed by a save is the identity on bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier shared by tests and functions. Tests and functions live in one
/// id space because both are call-graph nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A method under test (a component).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRef {
    pub id: NodeId,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "method")]
    pub method_name: String,
}

/// An automated test. Tests are call-graph sources with edges to their entry
/// callees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRef {
    pub id: NodeId,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "method")]
    pub method_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    pub fn caller(&self) -> NodeId {
        self.0
    }

    pub fn callee(&self) -> NodeId {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Test,
    Function,
}

/// A validated project. Construct through [`Project::new`] or
/// [`Project::load`]; fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Project {
    name: String,
    functions: Vec<FunctionRef>,
    tests: Vec<TestRef>,
    static_edges: Vec<Edge>,
    dynamic_edges: Vec<Edge>,
    #[serde(skip)]
    index: BTreeMap<NodeId, (NodeKind, usize)>,
}

#[derive(Deserialize)]
struct RawProject {
    name: String,
    functions: Vec<FunctionRef>,
    tests: Vec<TestRef>,
    static_edges: Vec<Edge>,
    dynamic_edges: Vec<Edge>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_name(id: NodeId, field: &str, value: &str) -> Result<()> {
    if is_identifier(value) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "node {id}: {field} {value:?} is not a non-empty ASCII identifier"
        )))
    }
}

impl Project {
    /// Validates and canonicalizes the parts of a project.
    pub fn new(
        name: impl Into<String>,
        mut functions: Vec<FunctionRef>,
        mut tests: Vec<TestRef>,
        mut static_edges: Vec<Edge>,
        mut dynamic_edges: Vec<Edge>,
    ) -> Result<Self> {
        functions.sort_by_key(|f| f.id);
        tests.sort_by_key(|t| t.id);
        static_edges.sort();
        dynamic_edges.sort();

        let mut index = BTreeMap::new();
        for (i, f) in functions.iter().enumerate() {
            check_name(f.id, "class", &f.class_name)?;
            check_name(f.id, "method", &f.method_name)?;
            if index.insert(f.id, (NodeKind::Function, i)).is_some() {
                return Err(Error::Validation(format!("duplicate id {}", f.id)));
            }
        }
        for (i, t) in tests.iter().enumerate() {
            check_name(t.id, "class", &t.class_name)?;
            check_name(t.id, "method", &t.method_name)?;
            if index.insert(t.id, (NodeKind::Test, i)).is_some() {
                return Err(Error::Validation(format!("duplicate id {}", t.id)));
            }
        }

        for (kind, edges) in [("static", &static_edges), ("dynamic", &dynamic_edges)] {
            for w in edges.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Validation(format!(
                        "duplicate {kind} edge ({}, {})",
                        w[0].0, w[0].1
                    )));
                }
            }
            for e in edges.iter() {
                for end in [e.0, e.1] {
                    if !index.contains_key(&end) {
                        return Err(Error::Validation(format!(
                            "{kind} edge ({}, {}) references undeclared id {end}",
                            e.0, e.1
                        )));
                    }
                }
                if e.0 == e.1 {
                    return Err(Error::Validation(format!("self-loop on id {}", e.0)));
                }
                if index[&e.1].0 == NodeKind::Test {
                    return Err(Error::Validation(format!(
                        "{kind} edge ({}, {}) calls into test {}",
                        e.0, e.1, e.1
                    )));
                }
            }
        }
        let statics: HashSet<Edge> = static_edges.iter().copied().collect();
        if let Some(e) = dynamic_edges.iter().find(|e| statics.contains(e)) {
            return Err(Error::Validation(format!(
                "edge ({}, {}) is both static and dynamic",
                e.0, e.1
            )));
        }

        Ok(Project {
            name: name.into(),
            functions,
            tests,
            static_edges,
            dynamic_edges,
            index,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawProject = serde_json::from_str(text)?;
        Project::new(
            raw.name,
            raw.functions,
            raw.tests,
            raw.static_edges,
            raw.dynamic_edges,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Project::from_json(&text)
    }

    /// Canonical JSON form.
    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_json())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// COMPS, ascending by id.
    pub fn functions(&self) -> &[FunctionRef] {
        &self.functions
    }

    /// T, ascending by id.
    pub fn tests(&self) -> &[TestRef] {
        &self.tests
    }

    pub fn static_edges(&self) -> &[Edge] {
        &self.static_edges
    }

    pub fn dynamic_edges(&self) -> &[Edge] {
        &self.dynamic_edges
    }

    pub fn function_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.functions.iter().map(|f| f.id)
    }

    pub fn test_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.tests.iter().map(|t| t.id)
    }

    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.index.get(&id).map(|(k, _)| *k)
    }

    pub fn function(&self, id: NodeId) -> Option<&FunctionRef> {
        match self.index.get(&id) {
            Some((NodeKind::Function, i)) => Some(&self.functions[*i]),
            _ => None,
        }
    }

    pub fn test(&self, id: NodeId) -> Option<&TestRef> {
        match self.index.get(&id) {
            Some((NodeKind::Test, i)) => Some(&self.tests[*i]),
            _ => None,
        }
    }

    /// Class and method name of any node.
    pub fn names(&self, id: NodeId) -> Option<(&str, &str)> {
        match self.index.get(&id)? {
            (NodeKind::Function, i) => {
                let f = &self.functions[*i];
                Some((&f.class_name, &f.method_name))
            }
            (NodeKind::Test, i) => {
                let t = &self.tests[*i];
                Some((&t.class_name, &t.method_name))
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.index.len()
    }

    /// Largest id in use, or `None` for an empty project.
    pub fn max_id(&self) -> Option<NodeId> {
        self.index.keys().next_back().copied()
    }
}

/// Ground-truth trace of every test: the set of functions it invokes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceTable {
    traces: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    traces: BTreeMap<String, Vec<NodeId>>,
}

impl TraceTable {
    /// Builds a table and checks it against `project`: one entry per test,
    /// every traced id a declared function.
    pub fn new(project: &Project, traces: BTreeMap<NodeId, BTreeSet<NodeId>>) -> Result<Self> {
        for (test, trace) in &traces {
            if project.test(*test).is_none() {
                return Err(Error::Validation(format!("trace for unknown test {test}")));
            }
            if let Some(bad) = trace.iter().find(|c| project.function(**c).is_none()) {
                return Err(Error::Validation(format!(
                    "trace of test {test} references unknown function {bad}"
                )));
            }
        }
        if let Some(missing) = project.test_ids().find(|t| !traces.contains_key(t)) {
            return Err(Error::Validation(format!("missing trace entry for test {missing}")));
        }
        Ok(TraceTable { traces })
    }

    pub fn from_json(text: &str, project: &Project) -> Result<Self> {
        let file: TraceFile = serde_json::from_str(text)?;
        let mut traces = BTreeMap::new();
        for (key, ids) in file.traces {
            let test = key
                .parse::<u32>()
                .map(NodeId)
                .map_err(|_| Error::Validation(format!("trace key {key:?} is not a test id")))?;
            traces.insert(test, ids.into_iter().collect());
        }
        TraceTable::new(project, traces)
    }

    pub fn load(path: impl AsRef<Path>, project: &Project) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TraceTable::from_json(&text, project)
    }

    pub fn to_json(&self) -> String {
        // Keys sort numerically rather than as strings.
        let mut out = String::from("{\"traces\":{");
        for (i, (test, trace)) in self.traces.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let ids: Vec<NodeId> = trace.iter().copied().collect();
            out.push_str(&format!("\"{}\":{}", test, serde_json::to_string(&ids).unwrap()));
        }
        out.push_str("}}\n");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_json())
    }

    /// trace(t). Empty for tests the table does not know.
    pub fn trace(&self, test: NodeId) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.traces.get(&test).unwrap_or(&EMPTY)
    }

    pub fn contains(&self, test: NodeId) -> bool {
        self.traces.contains_key(&test)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<NodeId>)> {
        self.traces.iter().map(|(t, s)| (*t, s))
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Functions that appear in at least one trace.
    pub fn covered(&self) -> BTreeSet<NodeId> {
        self.traces.values().flatten().copied().collect()
    }

    pub fn mean_trace_len(&self) -> f64 {
        if self.traces.is_empty() {
            return 0.0;
        }
        let total: usize = self.traces.values().map(BTreeSet::len).sum();
        total as f64 / self.traces.len() as f64
    }
}

/// A set of functions assumed faulty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultSet(BTreeSet<NodeId>);

impl FaultSet {
    pub fn new(ids: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let set: BTreeSet<NodeId> = ids.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Validation("fault set is empty".into()));
        }
        Ok(FaultSet(set))
    }

    pub fn ids(&self) -> &BTreeSet<NodeId> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.0.contains(&id)
    }
}

#[derive(Serialize, Deserialize)]
struct FaultFile {
    faults: Vec<FaultSet>,
}

pub fn faults_to_json(faults: &[FaultSet]) -> String {
    to_canonical_json(&FaultFile {
        faults: faults.to_vec(),
    })
}

/// Parses a fault file and checks every member against `project`.
pub fn faults_from_json(text: &str, project: &Project) -> Result<Vec<FaultSet>> {
    let file: FaultFile = serde_json::from_str(text)?;
    for (i, f) in file.faults.iter().enumerate() {
        if f.is_empty() {
            return Err(Error::Validation(format!("fault {i} is empty")));
        }
        if let Some(bad) = f.ids().iter().find(|c| project.function(**c).is_none()) {
            return Err(Error::Validation(format!("fault {i} references unknown function {bad}")));
        }
    }
    Ok(file.faults)
}

pub fn load_faults(path: impl AsRef<Path>, project: &Project) -> Result<Vec<FaultSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    faults_from_json(&text, project)
}

pub fn save_faults(path: impl AsRef<Path>, faults: &[FaultSet]) -> Result<()> {
    write_file(path.as_ref(), &faults_to_json(faults))
}

pub(crate) fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable value");
    s.push('\n');
    s
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
