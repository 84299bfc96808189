//! Spectrum-based diagnosis.
//!
//! Candidates are the inclusion-minimal sets of components that intersect the
//! trace of every failed test. Each candidate ω is scored by
//!
//! ```text
//! L(ω)  = max over g ∈ [0,1]^ω of
//!           Π_{passed t} Π_{c ∈ ω∩trace(t)} g_c
//!         × Π_{failed t} (1 − Π_{c ∈ ω∩trace(t)} g_c)
//! Pr(ω) = p^|ω| · (1 − p)^(|COMPS| − |ω|)
//! p(ω)  ∝ L(ω) · Pr(ω)
//! ```
//!
//! where `g_c` is the probability that a faulty `c` still lets a test pass.
//! The health state of a component is the total score of the diagnoses that
//! contain it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::project::NodeId;

pub const DEFAULT_MAX_CARDINALITY: usize = 3;
pub const DEFAULT_PRIOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Passed,
    Failed,
}

/// An executed test with its real trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub test: NodeId,
    pub trace: BTreeSet<NodeId>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub components: Vec<NodeId>,
    pub score: f64,
}

/// Scored diagnoses, highest score first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosisSet {
    pub diagnoses: Vec<Diagnosis>,
}

impl DiagnosisSet {
    pub fn top(&self) -> Option<&Diagnosis> {
        self.diagnoses.first()
    }

    pub fn max_score(&self) -> f64 {
        self.top().map_or(0.0, |d| d.score)
    }

    pub fn len(&self) -> usize {
        self.diagnoses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagnoses.is_empty()
    }
}

fn canonical_order(a: &[NodeId], b: &[NodeId]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Whether `set` (sorted) hits `trace`.
fn hits(set: &[NodeId], trace: &BTreeSet<NodeId>) -> bool {
    set.iter().any(|c| trace.contains(c))
}

/// All inclusion-minimal hitting sets of at most `max_cardinality` elements,
/// ordered by size and then lexicographically.
///
/// Exhaustive: each branch picks the smallest trace the partial set misses
/// and tries every one of its members, so every minimal hitting set within
/// the bound is reached. Non-minimal leaves are filtered out afterwards.
pub fn minimal_hitting_sets(
    failed_traces: &[BTreeSet<NodeId>],
    max_cardinality: usize,
) -> Result<Vec<Vec<NodeId>>> {
    if let Some(index) = failed_traces.iter().position(BTreeSet::is_empty) {
        return Err(Error::UnhittableTrace { index });
    }
    if max_cardinality == 0 {
        return Err(Error::Config("max_cardinality must be at least 1".into()));
    }
    if failed_traces.is_empty() {
        return Ok(Vec::new());
    }
    let mut traces: Vec<&BTreeSet<NodeId>> = failed_traces.iter().collect();
    traces.sort_by_key(|t| t.len());
    traces.dedup();

    let mut found: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut partial = Vec::with_capacity(max_cardinality);
    expand(&traces, max_cardinality, &mut partial, &mut found);

    let mut minimal: Vec<Vec<NodeId>> = found
        .into_iter()
        .filter(|set| is_minimal(set, &traces))
        .collect();
    minimal.sort_by(|a, b| canonical_order(a, b));
    Ok(minimal)
}

fn expand(
    traces: &[&BTreeSet<NodeId>],
    max: usize,
    partial: &mut Vec<NodeId>,
    found: &mut BTreeSet<Vec<NodeId>>,
) {
    // Traces are sorted by size, so the first miss is a smallest one.
    let Some(missed) = traces.iter().find(|t| !hits(partial, t)) else {
        let mut set = partial.clone();
        set.sort();
        found.insert(set);
        return;
    };
    if partial.len() == max {
        return;
    }
    for &c in missed.iter() {
        partial.push(c);
        expand(traces, max, partial, found);
        partial.pop();
    }
}

/// Every member must be the only member of the set in some trace.
fn is_minimal(set: &[NodeId], traces: &[&BTreeSet<NodeId>]) -> bool {
    set.iter().all(|&c| {
        traces
            .iter()
            .any(|t| t.contains(&c) && set.iter().filter(|x| t.contains(x)).count() == 1)
    })
}

/// Observations of one candidate, grouped by which of its members each trace
/// touches (a bitmask over the candidate) and by outcome.
struct Spectrum {
    width: usize,
    /// (mask, passed count, failed count), masks non-zero.
    patterns: Vec<(u32, f64, f64)>,
    /// Some failed test touched no member of the candidate.
    unexplained_failure: bool,
}

impl Spectrum {
    fn new(candidate: &[NodeId], observations: &[Observation]) -> Self {
        assert!(candidate.len() <= 31, "candidate too large");
        let mut groups: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        let mut unexplained_failure = false;
        for obs in observations {
            let mask = candidate
                .iter()
                .enumerate()
                .filter(|(_, c)| obs.trace.contains(c))
                .fold(0u32, |m, (i, _)| m | (1 << i));
            if mask == 0 {
                unexplained_failure |= obs.outcome == Outcome::Failed;
                continue;
            }
            let slot = groups.entry(mask).or_default();
            match obs.outcome {
                Outcome::Passed => slot.0 += 1.0,
                Outcome::Failed => slot.1 += 1.0,
            }
        }
        Spectrum {
            width: candidate.len(),
            patterns: groups.into_iter().map(|(m, (p, f))| (m, p, f)).collect(),
            unexplained_failure,
        }
    }

    /// Everything the maximized likelihood depends on.
    fn key(&self) -> SpectrumKey {
        SpectrumKey {
            width: self.width,
            unexplained_failure: self.unexplained_failure,
            patterns: self
                .patterns
                .iter()
                .map(|&(m, p, f)| (m, p as u64, f as u64))
                .collect(),
        }
    }

    fn log_likelihood(&self, g: &[f64]) -> f64 {
        let mut total = 0.0;
        for &(mask, passed, failed) in &self.patterns {
            let prod: f64 = (0..self.width)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| g[i])
                .product();
            if passed > 0.0 {
                total += passed * prod.ln();
            }
            if failed > 0.0 {
                total += failed * (1.0 - prod).ln();
            }
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
        total
    }

    /// Whether every pattern touches a single member, so the likelihood
    /// factorizes per component.
    fn separable(&self) -> bool {
        self.patterns.iter().all(|(m, _, _)| m.count_ones() == 1)
    }

    fn max_log_likelihood(&self) -> f64 {
        if self.unexplained_failure {
            return f64::NEG_INFINITY;
        }
        if self.separable() {
            // Per component: max_g g^p (1−g)^f at g = p / (p + f).
            let mut per = vec![(0.0, 0.0); self.width];
            for &(mask, p, f) in &self.patterns {
                let i = mask.trailing_zeros() as usize;
                per[i].0 += p;
                per[i].1 += f;
            }
            return per.into_iter().map(|(p, f)| binomial_max_log(p, f)).sum();
        }
        self.coordinate_ascent()
    }

    /// Coordinate ascent over g on a 0.01 grid, refined twice by a factor of
    /// ten around each coordinate's incumbent.
    fn coordinate_ascent(&self) -> f64 {
        let mut g = vec![0.5; self.width];
        let mut best = self.log_likelihood(&g);
        for _sweep in 0..50 {
            let before = best;
            for i in 0..self.width {
                let mut step: f64 = 0.01;
                let (mut lo, mut hi): (f64, f64) = (0.0, 1.0);
                for _round in 0..3 {
                    let n = ((hi - lo) / step).round() as usize;
                    let mut best_x = g[i];
                    for k in 0..=n {
                        let x = (lo + k as f64 * step).clamp(0.0, 1.0);
                        g[i] = x;
                        let ll = self.log_likelihood(&g);
                        if ll > best {
                            best = ll;
                            best_x = x;
                        }
                    }
                    g[i] = best_x;
                    lo = (best_x - step).max(0.0);
                    hi = (best_x + step).min(1.0);
                    step /= 10.0;
                }
            }
            if best - before <= 1e-12 {
                break;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct SpectrumKey {
    width: usize,
    unexplained_failure: bool,
    patterns: Vec<(u32, u64, u64)>,
}

/// Memoized candidate likelihoods. Two candidates with the same spectrum have
/// the same maximized likelihood, and during a troubleshooting session most
/// spectra do not change from one step to the next.
#[derive(Debug, Clone, Default)]
pub struct LikelihoodCache {
    map: HashMap<SpectrumKey, f64>,
}

impl LikelihoodCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// ln max_g g^p (1−g)^f, with 0^0 = 1.
fn binomial_max_log(p: f64, f: f64) -> f64 {
    if p == 0.0 || f == 0.0 {
        return 0.0;
    }
    let g = p / (p + f);
    p * g.ln() + f * (1.0 - g).ln()
}

/// Maximized log-likelihood of one candidate.
pub fn log_likelihood(candidate: &[NodeId], observations: &[Observation]) -> f64 {
    Spectrum::new(candidate, observations).max_log_likelihood()
}

/// Scores every candidate and normalizes the scores to sum to one.
pub fn score_diagnoses(
    candidates: &[Vec<NodeId>],
    observations: &[Observation],
    prior_fault_prob: f64,
    n_components: usize,
) -> Result<DiagnosisSet> {
    score_diagnoses_cached(candidates, observations, prior_fault_prob, n_components, &mut LikelihoodCache::new())
}

/// [`score_diagnoses`] reusing likelihoods computed earlier.
pub fn score_diagnoses_cached(
    candidates: &[Vec<NodeId>],
    observations: &[Observation],
    prior_fault_prob: f64,
    n_components: usize,
    cache: &mut LikelihoodCache,
) -> Result<DiagnosisSet> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if !(prior_fault_prob > 0.0 && prior_fault_prob < 1.0) {
        return Err(Error::Config(format!(
            "prior fault probability {prior_fault_prob} must be in (0, 1)"
        )));
    }
    let (ln_p, ln_q) = (prior_fault_prob.ln(), (1.0 - prior_fault_prob).ln());
    let spectra: Vec<Spectrum> = candidates
        .par_iter()
        .map(|omega| Spectrum::new(omega, observations))
        .collect();
    let keys: Vec<SpectrumKey> = spectra.iter().map(Spectrum::key).collect();
    let mut missing: Vec<usize> = Vec::new();
    let mut queued = HashSet::new();
    for (i, key) in keys.iter().enumerate() {
        if !cache.map.contains_key(key) && queued.insert(key) {
            missing.push(i);
        }
    }
    let fresh: Vec<f64> = missing
        .par_iter()
        .map(|&i| spectra[i].max_log_likelihood())
        .collect();
    for (&i, ll) in missing.iter().zip(fresh) {
        cache.map.insert(keys[i].clone(), ll);
    }
    let log_scores: Vec<f64> = candidates
        .iter()
        .zip(&keys)
        .map(|(omega, key)| {
            let k = omega.len() as f64;
            let prior = k * ln_p + (n_components as f64 - k) * ln_q;
            cache.map[key] + prior
        })
        .collect();
    let peak = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::NoConsistentDiagnosis);
    }
    let weights: Vec<f64> = log_scores.iter().map(|s| (s - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut diagnoses: Vec<Diagnosis> = candidates
        .iter()
        .zip(weights)
        .map(|(c, w)| Diagnosis {
            components: c.clone(),
            score: w / total,
        })
        .collect();
    diagnoses.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| canonical_order(&a.components, &b.components))
    });
    Ok(DiagnosisSet { diagnoses })
}

/// Candidates from the failed observations, then scores.
pub fn diagnose(
    observations: &[Observation],
    max_cardinality: usize,
    prior_fault_prob: f64,
    n_components: usize,
) -> Result<DiagnosisSet> {
    diagnose_cached(observations, max_cardinality, prior_fault_prob, n_components, &mut LikelihoodCache::new())
}

pub fn diagnose_cached(
    observations: &[Observation],
    max_cardinality: usize,
    prior_fault_prob: f64,
    n_components: usize,
    cache: &mut LikelihoodCache,
) -> Result<DiagnosisSet> {
    let failed: Vec<BTreeSet<NodeId>> = observations
        .iter()
        .filter(|o| o.outcome == Outcome::Failed)
        .map(|o| o.trace.clone())
        .collect();
    if failed.is_empty() {
        return Err(Error::NoCandidates);
    }
    let candidates = minimal_hitting_sets(&failed, max_cardinality)?;
    score_diagnoses_cached(&candidates, observations, prior_fault_prob, n_components, cache)
}

/// H(c): total score of the diagnoses containing `c`. Components in no
/// diagnosis are absent and read as zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HealthStateMap(BTreeMap<NodeId, f64>);

impl HealthStateMap {
    pub fn get(&self, c: NodeId) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.0.iter().map(|(c, h)| (*c, *h))
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// Multiplies every health state by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        HealthStateMap(self.0.iter().map(|(c, h)| (*c, h * factor)).collect())
    }

    pub fn from_map(map: BTreeMap<NodeId, f64>) -> Self {
        HealthStateMap(map)
    }
}

pub fn health_states(diagnoses: &DiagnosisSet) -> HealthStateMap {
    let mut h: BTreeMap<NodeId, f64> = BTreeMap::new();
    for d in &diagnoses.diagnoses {
        for &c in &d.components {
            *h.entry(c).or_default() += d.score;
        }
    }
    HealthStateMap(h)
}

/// JSON diagnosis report: diagnoses by descending score plus health states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub diagnoses: Vec<Diagnosis>,
    pub health: HealthStateMap,
}

impl DiagnosisReport {
    pub fn new(set: &DiagnosisSet) -> Self {
        DiagnosisReport {
            diagnoses: set.diagnoses.clone(),
            health: health_states(set),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn set(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn obs(test: u32, trace: &[u32], outcome: Outcome) -> Observation {
        Observation {
            test: NodeId(test),
            trace: ids(trace),
            outcome,
        }
    }

    const A: u32 = 1;
    const B: u32 = 2;
    const C: u32 = 3;

    /// Brute force: every subset of the universe up to `max` that hits all
    /// traces and has no hitting proper subset.
    pub(crate) fn brute_force(traces: &[BTreeSet<NodeId>], max: usize) -> Vec<Vec<NodeId>> {
        let universe: Vec<NodeId> = traces.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let n = universe.len();
        let hitting = |mask: u32| {
            traces.iter().all(|t| (0..n).any(|i| mask & (1 << i) != 0 && t.contains(&universe[i])))
        };
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > max || !hitting(mask) {
                continue;
            }
            let minimal = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .all(|i| !hitting(mask & !(1 << i)));
            if minimal {
                out.push((0..n).filter(|i| mask & (1 << i) != 0).map(|i| universe[i]).collect::<Vec<_>>());
            }
        }
        out.sort_by(|a, b| canonical_order(a, b));
        out
    }

    #[test]
    fn hitting_set_examples() {
        assert_eq!(minimal_hitting_sets(&[ids(&[A])], 3).unwrap(), vec![set(&[A])]);
        assert_eq!(
            minimal_hitting_sets(&[ids(&[A, B]), ids(&[B, C])], 3).unwrap(),
            vec![set(&[B]), set(&[A, C])]
        );
        assert_eq!(minimal_hitting_sets(&[ids(&[A, B]), ids(&[B, C])], 1).unwrap(), vec![set(&[B])]);
        assert!(matches!(
            minimal_hitting_sets(&[ids(&[A]), ids(&[])], 3),
            Err(Error::UnhittableTrace { index: 1 })
        ));
    }

    #[test]
    fn two_failures_no_passes() {
        let observations = [obs(10, &[A, B], Outcome::Failed), obs(11, &[B, C], Outcome::Failed)];
        let cands = vec![set(&[B]), set(&[A, C])];
        assert_eq!(log_likelihood(&cands[0], &observations), 0.0);
        assert_eq!(log_likelihood(&cands[1], &observations), 0.0);
        let ds = score_diagnoses(&cands, &observations, 0.01, 3).unwrap();
        assert_eq!(ds.diagnoses[0].components, set(&[B]));
        assert!(ds.diagnoses[0].score > ds.diagnoses[1].score);
        // Equal likelihoods: the ratio is the prior ratio (1−p)/p = 99.
        assert!((ds.diagnoses[0].score / ds.diagnoses[1].score - 99.0).abs() < 1e-9);
    }

    #[test]
    fn passed_test_on_b_gives_four_over_27() {
        let observations = [
            obs(10, &[A, B], Outcome::Failed),
            obs(11, &[B, C], Outcome::Failed),
            obs(12, &[B], Outcome::Passed),
        ];
        let l_b = log_likelihood(&set(&[B]), &observations).exp();
        assert!((l_b - 4.0 / 27.0).abs() < 1e-12);
        assert_eq!(log_likelihood(&set(&[A, C]), &observations), 0.0);

        // p({a,c}) > p({b}) iff Pr(b)/Pr(a,c) < 27/4.
        let cands = vec![set(&[B]), set(&[A, C])];
        for (p, ac_wins) in [(0.2, true), (0.1, false)] {
            let ratio: f64 = (1.0 - p) / p;
            assert_eq!(ratio < 27.0 / 4.0, ac_wins);
            let ds = score_diagnoses(&cands, &observations, p, 3).unwrap();
            assert_eq!(ds.diagnoses[0].components == set(&[A, C]), ac_wins, "p = {p}");
        }
    }

    #[test]
    fn coordinate_ascent_finds_coupled_optimum() {
        // One passed and one failed test both touching {a, b}: L = q(1−q)
        // with q = g_a·g_b, maximized at q = 1/2 → 1/4.
        let observations = [obs(1, &[A, B], Outcome::Passed), obs(2, &[A, B], Outcome::Failed)];
        let l = log_likelihood(&set(&[A, B]), &observations).exp();
        assert!((l - 0.25).abs() < 1e-6, "{l}");
    }

    #[test]
    fn unexplained_failure_is_zero_likelihood() {
        let observations = [obs(1, &[A], Outcome::Failed), obs(2, &[C], Outcome::Failed)];
        assert_eq!(log_likelihood(&set(&[A]), &observations), f64::NEG_INFINITY);
        assert!(matches!(
            score_diagnoses(&[set(&[A])], &observations, 0.01, 3),
            Err(Error::NoConsistentDiagnosis)
        ));
        assert!(matches!(score_diagnoses(&[], &observations, 0.01, 3), Err(Error::NoCandidates)));
    }

    #[test]
    fn single_candidate_scores_one() {
        let observations = [obs(1, &[A], Outcome::Failed)];
        let ds = score_diagnoses(&[set(&[A])], &observations, 0.01, 10).unwrap();
        assert_eq!(ds.diagnoses[0].score, 1.0);
    }

    #[test]
    fn health_state_examples() {
        let ds = DiagnosisSet {
            diagnoses: vec![
                Diagnosis {
                    components: set(&[B]),
                    score: 0.6,
                },
                Diagnosis {
                    components: set(&[A, C]),
                    score: 0.4,
                },
            ],
        };
        let h = health_states(&ds);
        assert_eq!((h.get(NodeId(B)), h.get(NodeId(A)), h.get(NodeId(C))), (0.6, 0.4, 0.4));
        assert_eq!(h.get(NodeId(99)), 0.0);
        assert!((h.total() - (0.6 + 0.4 * 2.0)).abs() < 1e-12);
        assert_eq!(health_states(&DiagnosisSet::default()).total(), 0.0);
    }

    #[test]
    fn report_is_sorted_by_score() {
        let observations = [obs(10, &[A, B], Outcome::Failed), obs(11, &[B, C], Outcome::Failed)];
        let ds = diagnose(&observations, 3, 0.01, 3).unwrap();
        let report = DiagnosisReport::new(&ds);
        assert!(report.diagnoses.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(report.health.get(NodeId(C)) > 0.0);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains(r#""health":{"1":"#), "{json}");
    }

    fn instance() -> impl Strategy<Value = Vec<BTreeSet<NodeId>>> {
        proptest::collection::vec(proptest::collection::btree_set(0u32..12, 1..6), 1..6)
            .prop_map(|ts| ts.into_iter().map(|t| t.into_iter().map(NodeId).collect()).collect())
    }

    proptest! {
        #[test]
        fn hitting_sets_match_brute_force(traces in instance(), max in 1usize..4) {
            let fast = minimal_hitting_sets(&traces, max).unwrap();
            prop_assert_eq!(&fast, &brute_force(&traces, max));
            for (i, h) in fast.iter().enumerate() {
                prop_assert!(traces.iter().all(|t| hits(h, t)));
                for (j, other) in fast.iter().enumerate() {
                    if i != j {
                        prop_assert!(!other.iter().all(|c| h.contains(c)));
                    }
                }
            }
        }

        #[test]
        fn scores_normalize(traces in instance(), passed in proptest::collection::vec(proptest::collection::btree_set(0u32..12, 0..5), 0..4)) {
            let mut observations: Vec<Observation> = traces
                .iter()
                .enumerate()
                .map(|(i, t)| Observation { test: NodeId(100 + i as u32), trace: t.clone(), outcome: Outcome::Failed })
                .collect();
            for (i, p) in passed.iter().enumerate() {
                observations.push(Observation { test: NodeId(200 + i as u32), trace: p.iter().map(|&c| NodeId(c)).collect(), outcome: Outcome::Passed });
            }
            prop_assume!(!minimal_hitting_sets(&traces, 3).unwrap().is_empty());
            let ds = diagnose(&observations, 3, 0.01, 12).unwrap();
            let total: f64 = ds.diagnoses.iter().map(|d| d.score).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            let h = health_states(&ds);
            let weighted: f64 = ds.diagnoses.iter().map(|d| d.score * d.components.len() as f64).sum();
            prop_assert!((h.total() - weighted).abs() <= 1e-9);
            for (_, v) in h.iter() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn more_failures_never_add_single_fault_candidates(traces in instance(), extra in proptest::collection::btree_set(0u32..12, 1..6)) {
            let singles = |ts: &[BTreeSet<NodeId>]| minimal_hitting_sets(ts, 3).unwrap().into_iter().filter(|h| h.len() == 1).count();
            let before = singles(&traces);
            let mut more = traces.clone();
            more.push(extra.into_iter().map(NodeId).collect());
            prop_assert!(singles(&more) <= before);
        }
    }
}
