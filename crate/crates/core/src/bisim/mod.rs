//! Branching bisimilarity between labelled transition systems.
//!
//! GET-FUTURE and CHAIN-UPDATE steps are silent; forward rules are
//! observed as the return rules they stand for. Equivalence is computed by
//! signature refinement on the disjoint union of the two systems and does
//! not distinguish divergence: a silent cycle is equivalent to being stuck.

pub mod relation;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::explore::Lts;
use crate::runtime::{Rule, TransitionLabel};
use crate::syntax::FutureId;

pub use relation::{check_r_is_bisimulation, in_relation_r, RCounterexample};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Observable labels carry the acting future.
    #[default]
    Fine,
    /// Observable labels are rule names only.
    Coarse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObsLabel {
    Tau,
    Obs { rule: Rule, actor: Option<FutureId> },
}

impl fmt::Display for ObsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObsLabel::Tau => f.write_str("tau"),
            ObsLabel::Obs { rule, actor: None } => write!(f, "{rule}"),
            ObsLabel::Obs {
                rule,
                actor: Some(a),
            } => write!(f, "{rule}@{}", a.0),
        }
    }
}

impl Serialize for ObsLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn obs_label(label: TransitionLabel, granularity: Granularity) -> ObsLabel {
    let rule = match label.rule {
        Rule::GetFuture | Rule::ChainUpdate => return ObsLabel::Tau,
        Rule::ForwardAsync | Rule::ForwardData => Rule::ReturnAsync,
        Rule::ForwardSync => Rule::ReturnSync,
        other => other,
    };
    ObsLabel::Obs {
        rule,
        actor: match granularity {
            Granularity::Fine => Some(label.actor),
            Granularity::Coarse => None,
        },
    }
}

/// An LTS whose edges carry observation labels.
#[derive(Clone, Debug)]
pub struct ObsLts {
    pub len: usize,
    pub initial: usize,
    pub edges: Vec<(usize, ObsLabel, usize)>,
    pub truncated: bool,
}

impl ObsLts {
    pub fn successors(&self) -> Vec<Vec<(ObsLabel, usize)>> {
        let mut out = vec![Vec::new(); self.len];
        for &(a, l, b) in &self.edges {
            out[a].push((l, b));
        }
        out
    }
}

pub fn relabel(lts: &Lts, granularity: Granularity) -> ObsLts {
    ObsLts {
        len: lts.states.len(),
        initial: lts.initial,
        edges: lts
            .edges
            .iter()
            .map(|&(a, l, b)| (a, obs_label(l, granularity), b))
            .collect(),
        truncated: lts.truncated,
    }
}

/// Whether some state can perform silent steps forever.
pub fn has_tau_cycle(lts: &ObsLts) -> bool {
    let mut adj = vec![Vec::new(); lts.len];
    for &(a, l, b) in &lts.edges {
        if l == ObsLabel::Tau {
            if a == b {
                return true;
            }
            adj[a].push(b);
        }
    }
    sccs(&adj).iter().any(|c| c.len() > 1)
}

pub const DEFAULT_BLOCK_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error("partition grew beyond {0} blocks")]
    BlockLimit(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BisimVerdict {
    Bisimilar,
    /// `pair` holds the two distinguished states (indices into the first
    /// and second system). `witness` is a shortest sequence of observable
    /// labels that one system can perform, up to silent steps, and the
    /// other cannot; it is empty when the systems have the same weak
    /// traces and differ only in branching structure.
    NotBisimilar {
        pair: (usize, usize),
        witness: Vec<ObsLabel>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisimReport {
    pub verdict: BisimVerdict,
    /// Set when either input was truncated by exploration bounds.
    pub advisory: bool,
}

impl BisimReport {
    pub fn is_bisimilar(&self) -> bool {
        self.verdict == BisimVerdict::Bisimilar
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.verdict {
            BisimVerdict::Bisimilar => json!({
                "verdict": "bisimilar",
                "witness": [],
                "pair": null,
                "advisory": self.advisory,
            }),
            BisimVerdict::NotBisimilar { pair, witness } => json!({
                "verdict": "not_bisimilar",
                "witness": witness,
                "pair": [pair.0, pair.1],
                "advisory": self.advisory,
            }),
        }
    }
}

/// Strongly connected components of the graph `adj`, emitted so that every
/// component comes after the components it can reach.
fn sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// A labelled edge with the label interned as an integer.
pub type Edge = (u32, usize);

/// Coarsest divergence-insensitive branching bisimulation of a single LTS
/// given as adjacency lists; label 0 is τ. Returns a block index per state.
pub fn branching_partition(
    succ: &[Vec<Edge>],
    block_limit: usize,
) -> Result<Vec<usize>, BisimError> {
    const TAU: u32 = 0;
    let n = succ.len();
    let mut block = vec![0usize; n];
    let mut count = 1;
    loop {
        let inert: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                succ[s]
                    .iter()
                    .filter(|(l, t)| *l == TAU && block[*t] == block[s])
                    .map(|(_, t)| *t)
                    .collect()
            })
            .collect();
        let comps = sccs(&inert);
        let mut comp_of = vec![0usize; n];
        for (c, members) in comps.iter().enumerate() {
            for &s in members {
                comp_of[s] = c;
            }
        }
        let mut sig: Vec<Vec<Edge>> = vec![Vec::new(); comps.len()];
        for (c, members) in comps.iter().enumerate() {
            let mut set = BTreeSet::new();
            for &s in members {
                for &(l, t) in &succ[s] {
                    if l == TAU && block[t] == block[s] {
                        let d = comp_of[t];
                        if d != c {
                            set.extend(sig[d].iter().copied());
                        }
                    } else {
                        set.insert((l, block[t]));
                    }
                }
            }
            sig[c] = set.into_iter().collect();
        }
        let mut ids: HashMap<(usize, &[Edge]), usize> = HashMap::new();
        let mut next_block = vec![0usize; n];
        for s in 0..n {
            let key = (block[s], sig[comp_of[s]].as_slice());
            let fresh = ids.len();
            next_block[s] = *ids.entry(key).or_insert(fresh);
        }
        let new_count = ids.len();
        if new_count > block_limit {
            return Err(BisimError::BlockLimit(block_limit));
        }
        block = next_block;
        if new_count == count {
            return Ok(block);
        }
        count = new_count;
    }
}

fn union_successors(a: &ObsLts, b: &ObsLts) -> (Vec<Vec<Edge>>, HashMap<ObsLabel, u32>) {
    let mut ids: HashMap<ObsLabel, u32> = HashMap::from([(ObsLabel::Tau, 0)]);
    let mut succ = vec![Vec::new(); a.len + b.len];
    for (offset, lts) in [(0, a), (a.len, b)] {
        for &(s, l, t) in &lts.edges {
            let fresh = ids.len() as u32;
            let id = *ids.entry(l).or_insert(fresh);
            succ[offset + s].push((id, offset + t));
        }
    }
    (succ, ids)
}

pub fn branching_bisimilar(a: &ObsLts, b: &ObsLts) -> Result<BisimReport, BisimError> {
    branching_bisimilar_with(a, b, DEFAULT_BLOCK_LIMIT)
}

pub fn branching_bisimilar_with(
    a: &ObsLts,
    b: &ObsLts,
    block_limit: usize,
) -> Result<BisimReport, BisimError> {
    let (succ, _) = union_successors(a, b);
    let block = branching_partition(&succ, block_limit)?;
    let advisory = a.truncated || b.truncated;
    let verdict = if block[a.initial] == block[a.len + b.initial] {
        BisimVerdict::Bisimilar
    } else {
        BisimVerdict::NotBisimilar {
            pair: (a.initial, b.initial),
            witness: trace_witness(a, b, WITNESS_SEARCH_LIMIT).unwrap_or_default(),
        }
    };
    Ok(BisimReport { verdict, advisory })
}

fn tau_closure(
    succ: &[Vec<(ObsLabel, usize)>],
    start: impl IntoIterator<Item = usize>,
) -> Vec<usize> {
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for s in start {
        if seen.insert(s) {
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &(l, t) in &succ[s] {
            if l == ObsLabel::Tau && seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    seen.into_iter().collect()
}

fn weak_post(succ: &[Vec<(ObsLabel, usize)>], set: &[usize]) -> BTreeMap<ObsLabel, Vec<usize>> {
    let mut by_label: BTreeMap<ObsLabel, BTreeSet<usize>> = BTreeMap::new();
    for &s in set {
        for &(l, t) in &succ[s] {
            if l != ObsLabel::Tau {
                by_label.entry(l).or_default().insert(t);
            }
        }
    }
    by_label
        .into_iter()
        .map(|(l, ts)| (l, tau_closure(succ, ts)))
        .collect()
}

/// Number of subset pairs explored before giving up on a trace witness.
pub const WITNESS_SEARCH_LIMIT: usize = 200_000;

/// Shortest sequence of observable labels performable (up to silent steps)
/// by exactly one of the two systems, if one exists within `limit`
/// explored pairs of state sets.
pub fn trace_witness(a: &ObsLts, b: &ObsLts, limit: usize) -> Option<Vec<ObsLabel>> {
    let (sa, sb) = (a.successors(), b.successors());
    let start = (tau_closure(&sa, [a.initial]), tau_closure(&sb, [b.initial]));
    let mut nodes: Vec<(Option<usize>, Option<ObsLabel>)> = vec![(None, None)];
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::from([(0usize, start)]);
    let path = |nodes: &[(Option<usize>, Option<ObsLabel>)], mut k: usize| {
        let mut out = Vec::new();
        while let (Some(parent), Some(l)) = nodes[k] {
            out.push(l);
            k = parent;
        }
        out.reverse();
        out
    };
    while let Some((k, (xa, xb))) = queue.pop_front() {
        let (pa, pb) = (weak_post(&sa, &xa), weak_post(&sb, &xb));
        let labels: BTreeSet<ObsLabel> = pa.keys().chain(pb.keys()).copied().collect();
        for l in labels {
            let na = pa.get(&l).cloned().unwrap_or_default();
            let nb = pb.get(&l).cloned().unwrap_or_default();
            if na.is_empty() != nb.is_empty() {
                let mut w = path(&nodes, k);
                w.push(l);
                return Some(w);
            }
            let key = (na, nb);
            if !seen.contains(&key) {
                if seen.len() >= limit {
                    return None;
                }
                seen.insert(key.clone());
                nodes.push((Some(k), Some(l)));
                queue.push_back((nodes.len() - 1, key));
            }
        }
    }
    None
}

/// Whether `lts` can perform the observable labels of `trace` in order,
/// with any number of silent steps in between.
pub fn accepts_weak_trace(lts: &ObsLts, trace: &[ObsLabel]) -> bool {
    let succ = lts.successors();
    let mut current = tau_closure(&succ, [lts.initial]);
    for l in trace {
        let post = weak_post(&succ, &current);
        match post.get(l) {
            Some(next) => current = next.clone(),
            None => return false,
        }
    }
    true
}
