//! Single-trace execution and bounded exhaustive exploration.
//!
//! States of an [`Lts`] are canonical configurations: futures are numbered
//! by their position in the spawn tree rather than by allocation order, so
//! interleavings that reach the same state share it.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::runtime::{
    classify, enabled_transitions, initial_configuration, Configuration, Frame, FutureState,
    RuntimeError, Status, TransitionLabel, Value,
};
use crate::syntax::{FutureId, Program};
use crate::typecheck::{check_configuration, ConfigTypeEnv, ForwardMode, TypeError};

pub const DEFAULT_MAX_STATES: usize = 100_000;
pub const DEFAULT_MAX_DEPTH: usize = 10_000;
pub const MAX_STATES_ENV: &str = "DEFCAL_MAX_STATES";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerPolicy {
    RoundRobin,
    SeededRandom(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreBounds {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds {
            max_states: DEFAULT_MAX_STATES,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl ExploreBounds {
    /// Defaults, with the state bound taken from `DEFCAL_MAX_STATES` when
    /// set to a positive integer.
    pub fn from_env() -> ExploreBounds {
        let mut b = ExploreBounds::default();
        if let Some(n) = std::env::var(MAX_STATES_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|n| *n > 0)
        {
            b.max_states = n;
        }
        b
    }
}

fn rename_value(w: Value, map: &BTreeMap<FutureId, FutureId>) -> Value {
    match w {
        Value::Fut(f) => Value::Fut(map[&f]),
        other => other,
    }
}

/// Renames future ids to `0..n` in spawn-tree order. Configurations that
/// differ only by a renaming of futures that preserves spawn paths
/// canonicalize identically.
pub fn canonicalize(cn: &Configuration) -> Configuration {
    let mut order: Vec<(Vec<u32>, FutureId)> = cn
        .futures
        .keys()
        .map(|f| {
            let path = cn
                .origins
                .get(f)
                .map(|o| o.path.clone())
                .unwrap_or_else(|| vec![f.0]);
            (path, *f)
        })
        .collect();
    order.sort();
    let map: BTreeMap<FutureId, FutureId> = order
        .iter()
        .enumerate()
        .map(|(i, (_, f))| (*f, FutureId(i as u32)))
        .collect();
    let next_id = FutureId(order.len() as u32);
    if map.iter().all(|(a, b)| a == b) && cn.next_id == next_id {
        return cn.clone();
    }
    let rename = |f: FutureId| map.get(&f).copied().unwrap_or(f);
    let store = |s: &crate::runtime::Store| {
        s.iter()
            .map(|(k, w)| (k.clone(), rename_value(*w, &map)))
            .collect()
    };
    Configuration {
        globals: store(&cn.globals),
        futures: cn
            .futures
            .iter()
            .map(|(f, st)| {
                let st = match st {
                    FutureState::Unresolved(frames) => FutureState::Unresolved(
                        frames
                            .iter()
                            .map(|q| Frame {
                                fn_name: q.fn_name.clone(),
                                locals: store(&q.locals),
                                stmt: q.stmt.map_futures(&rename),
                            })
                            .collect(),
                    ),
                    FutureState::Resolved(w) => FutureState::Resolved(rename_value(*w, &map)),
                    FutureState::Chained(g) => FutureState::Chained(rename(*g)),
                };
                (map[f], st)
            })
            .collect(),
        origins: cn
            .origins
            .iter()
            .map(|(f, o)| (rename(*f), o.clone()))
            .collect(),
        next_id,
        dialect: cn.dialect,
    }
}

/// 256-bit hex digest of the structural serialization of `cn`.
pub fn digest(cn: &Configuration) -> String {
    let bytes = serde_json::to_vec(cn).expect("configurations always serialize");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every future is resolved; carries the value of the main future after
    /// following resolved links, if that ends in a base value.
    Terminated(Option<Value>),
    Deadlocked(Vec<(FutureId, FutureId)>),
    DepthExceeded,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub initial: Configuration,
    pub steps: Vec<(TransitionLabel, Configuration)>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn final_configuration(&self) -> &Configuration {
        self.steps.last().map_or(&self.initial, |(_, cn)| cn)
    }

    pub fn labels(&self) -> Vec<TransitionLabel> {
        self.steps.iter().map(|(l, _)| *l).collect()
    }

    /// JSON lines, one object per step.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (i, (label, cn)) in self.steps.iter().enumerate() {
            let line = json!({
                "step": i + 1,
                "rule": label.rule,
                "actor": label.actor.0,
                "configuration": cn.to_json(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

fn outcome_of(cn: &Configuration) -> Outcome {
    match classify(cn) {
        Status::Terminated => {
            let w = cn.follow(Value::Fut(FutureId(0)));
            Outcome::Terminated((!w.is_future()).then_some(w))
        }
        Status::Deadlocked(edges) => Outcome::Deadlocked(edges),
        // A stuck task that is not waiting on a future; ruled out by typing.
        Status::Running => Outcome::Deadlocked(vec![]),
    }
}

/// Executes one interleaving of `p` for at most `max_steps` steps.
pub fn run(
    p: &Program,
    policy: SchedulerPolicy,
    mode: ForwardMode,
    max_steps: usize,
) -> Result<Trace, RuntimeError> {
    let initial = initial_configuration(p);
    let mut cn = initial.clone();
    let mut steps = Vec::new();
    let mut rng = match policy {
        SchedulerPolicy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        SchedulerPolicy::RoundRobin => None,
    };
    let mut last_actor: Option<FutureId> = None;
    loop {
        let mut enabled = enabled_transitions(p, &cn, mode)?;
        if enabled.is_empty() {
            let outcome = outcome_of(&cn);
            return Ok(Trace {
                initial,
                steps,
                outcome,
            });
        }
        if steps.len() >= max_steps {
            return Ok(Trace {
                initial,
                steps,
                outcome: Outcome::DepthExceeded,
            });
        }
        let pick = match rng.as_mut() {
            Some(rng) => rng.gen_range(0..enabled.len()),
            None => last_actor
                .and_then(|a| enabled.iter().position(|(l, _)| l.actor > a))
                .unwrap_or(0),
        };
        let (label, next) = enabled.swap_remove(pick);
        last_actor = Some(label.actor);
        steps.push((label, next.clone()));
        cn = next;
    }
}

/// A finite labelled transition system over canonical configurations.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<Configuration>,
    pub initial: usize,
    pub edges: Vec<(usize, TransitionLabel, usize)>,
    /// Whether each state's successors were computed. Only states cut off
    /// by a bound are left unexpanded.
    pub expanded: Vec<bool>,
    pub truncated: bool,
    pub mode: ForwardMode,
}

impl Lts {
    pub fn successors(&self) -> Vec<Vec<(TransitionLabel, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for &(from, label, to) in &self.edges {
            out[from].push((label, to));
        }
        out
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.states.len()];
        for &(from, _, _) in &self.edges {
            has_out[from] = true;
        }
        (0..self.states.len())
            .filter(|&i| self.expanded[i] && !has_out[i])
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "states": self.states.iter().map(digest).collect::<Vec<_>>(),
            "initial": self.initial,
            "edges": self.edges.iter().map(|(a, l, b)| json!([a, l.rule, l.actor.0, b])).collect::<Vec<_>>(),
            "truncated": self.truncated,
        })
    }
}

/// Breadth-first closure of the canonical states reachable from the
/// initial configuration of `p`.
pub fn explore(p: &Program, bounds: ExploreBounds, mode: ForwardMode) -> Result<Lts, RuntimeError> {
    let init = canonicalize(&initial_configuration(p));
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    index.insert(init.clone(), 0);
    let mut lts = Lts {
        states: vec![init],
        initial: 0,
        edges: Vec::new(),
        expanded: vec![false],
        truncated: false,
        mode,
    };
    let mut depth = vec![0usize];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if depth[i] >= bounds.max_depth {
            lts.truncated = true;
            continue;
        }
        let successors = enabled_transitions(p, &lts.states[i], mode)?;
        lts.expanded[i] = true;
        for (label, next) in successors {
            let next = canonicalize(&next);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if lts.states.len() >= bounds.max_states {
                        lts.truncated = true;
                        lts.expanded[i] = false;
                        continue;
                    }
                    let j = lts.states.len();
                    index.insert(next.clone(), j);
                    lts.states.push(next);
                    lts.expanded.push(false);
                    depth.push(depth[i] + 1);
                    queue.push_back(j);
                    j
                }
            };
            lts.edges.push((i, label, j));
        }
    }
    Ok(lts)
}

/// Preservation over an explored state space: every state is well typed under
/// the Ω reconstructed from it. Returns the first failing state.
pub fn check_preservation(p: &Program, lts: &Lts) -> Result<(), (usize, Vec<TypeError>)> {
    for (i, cn) in lts.states.iter().enumerate() {
        let omega = ConfigTypeEnv::reconstruct(p, cn, lts.mode).map_err(|e| (i, vec![e]))?;
        check_configuration(&omega, cn).map_err(|e| (i, e))?;
    }
    Ok(())
}

/// Progress over an explored state space: a state has no successor exactly
/// when it is terminated or every task waits on an unresolved future.
pub fn check_progress(lts: &Lts) -> Result<(), usize> {
    let succ = lts.successors();
    for (i, cn) in lts.states.iter().enumerate() {
        if !lts.expanded[i] {
            continue;
        }
        let stuck = succ[i].is_empty();
        let running = classify(cn) == Status::Running;
        if stuck == running {
            return Err(i);
        }
    }
    Ok(())
}

/// Comparable form of a value across canonical renamings: futures are
/// identified by spawn path.
#[derive(Debug, PartialEq, Eq)]
enum ValueKey {
    Base(Value),
    Future(Vec<u32>),
}

fn value_key(cn: &Configuration, w: Value) -> ValueKey {
    match w {
        Value::Fut(f) => ValueKey::Future(cn.origins.get(&f).map_or(vec![f.0], |o| o.path.clone())),
        b => ValueKey::Base(b),
    }
}

/// Futures are written once: along every edge a resolved future keeps its
/// value and a chained future stays chained to the same target or becomes
/// resolved. Returns the first offending edge.
pub fn check_write_once(lts: &Lts) -> Result<(), usize> {
    for (k, &(from, _, to)) in lts.edges.iter().enumerate() {
        let (a, b) = (&lts.states[from], &lts.states[to]);
        let by_path: HashMap<&Vec<u32>, FutureId> =
            b.origins.iter().map(|(f, o)| (&o.path, *f)).collect();
        for (f, st) in &a.futures {
            let Some(g) = a.origins.get(f).and_then(|o| by_path.get(&o.path)) else {
                return Err(k);
            };
            let ok = match (st, &b.futures[g]) {
                (FutureState::Unresolved(_), _) => true,
                (FutureState::Resolved(w), FutureState::Resolved(w2)) => {
                    value_key(a, *w) == value_key(b, *w2)
                }
                (FutureState::Chained(t), FutureState::Chained(t2)) => {
                    value_key(a, Value::Fut(*t)) == value_key(b, Value::Fut(*t2))
                }
                (FutureState::Chained(_), FutureState::Resolved(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(k);
            }
        }
    }
    Ok(())
}
