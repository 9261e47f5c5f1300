//! The relation ℛ between configurations of a DeF+F program (F side) and
//! of its forward-eliminated counterpart (D side), the lemmas it entails,
//! and a direct check that ℛ is a branching bisimulation on explored LTSs.
//!
//! Both configurations are expected to be canonicalized, so that a future
//! created by the same spawn on both sides carries the same identifier.
//! Synchronous forwards are assumed to run in strict mode.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use super::{obs_label, Granularity, ObsLabel};
use crate::explore::Lts;
use crate::runtime::{eval_atom, Configuration, Frame, FutureState, Value};
use crate::syntax::{Atom, FutureId, Rhs, Stmt};
use crate::transform::fwd_elim_stmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RCounterexample {
    pub state_f: usize,
    pub state_d: usize,
    pub reason: String,
}

impl fmt::Display for RCounterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pair ({}, {}): {}",
            self.state_f, self.state_d, self.reason
        )
    }
}

fn resolved(cn: &Configuration, f: FutureId) -> Option<Value> {
    cn.resolved_value(f)
}

/// All values from which `w` is reachable through resolved links of `cn`,
/// `w` included.
fn ancestors(cn: &Configuration, w: Value) -> BTreeSet<Value> {
    let mut out = BTreeSet::from([w]);
    loop {
        let before = out.len();
        for (f, st) in &cn.futures {
            if let FutureState::Resolved(v) = st {
                if out.contains(v) {
                    out.insert(Value::Fut(*f));
                }
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

/// Walks resolved links in `d` from `f` while every visited future is
/// resolved to `w` in `fcn`, succeeding when a future resolved to `w` in
/// `d` is met.
fn walk_to(fcn: &Configuration, d: &Configuration, f: FutureId, w: Value) -> bool {
    let mut current = f;
    let mut seen = HashSet::new();
    while seen.insert(current) {
        if resolved(fcn, current) != Some(w) {
            return false;
        }
        match resolved(d, current) {
            Some(v) if v == w => return true,
            Some(Value::Fut(g)) => current = g,
            _ => return false,
        }
    }
    false
}

fn get_head(s: &Stmt) -> Option<(&str, &Atom, Option<&Stmt>)> {
    let (head, tail) = s.split_head();
    match head {
        Stmt::Assign {
            target,
            rhs: Rhs::GetStar(a),
            ..
        } => Some((target, a, tail)),
        _ => None,
    }
}

fn operand(cn: &Configuration, frame: &Frame, a: &Atom) -> Value {
    match eval_atom(&cn.globals, &frame.locals, a) {
        Ok(v) => v,
        Err(_) => Value::Int(i64::MIN),
    }
}

/// Two tasks on either side of forward elimination run the same code.
fn tasks_match(
    fcn: &Configuration,
    d: &Configuration,
    qf: &[Frame],
    qd: &[Frame],
) -> Result<(), String> {
    if qf.len() != qd.len() {
        return Err(format!("stack depths {} and {}", qf.len(), qd.len()));
    }
    for (i, (a, b)) in qf.iter().zip(qd).enumerate() {
        if a.fn_name != b.fn_name || a.locals != b.locals {
            return Err(format!("frame {i} differs in function or locals"));
        }
        let top = i + 1 == qf.len();
        if fwd_elim_stmt(&a.stmt) == b.stmt {
            continue;
        }
        let matched = top
            && match (get_head(&a.stmt), get_head(&b.stmt)) {
                (Some((y, wf, tf)), Some((y2, wd, td))) => {
                    y == y2
                        && tf.map(fwd_elim_stmt).as_ref() == td
                        && !ancestors(fcn, operand(fcn, a, wf))
                            .is_disjoint(&ancestors(d, operand(d, b, wd)))
                }
                _ => false,
            };
        if !matched {
            return Err(format!(
                "frame {i} statements `{}` and `{}` unrelated",
                a.stmt, b.stmt
            ));
        }
    }
    Ok(())
}

/// Why `cn_f ℛ cn_d` fails, or `Ok` when it holds.
pub fn explain_relation_r(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    if cn_f.globals != cn_d.globals {
        return Err("global stores differ".into());
    }
    if !cn_f.futures.keys().eq(cn_d.futures.keys()) {
        return Err("future identifiers differ".into());
    }
    for (f, sf) in &cn_f.futures {
        let sd = &cn_d.futures[f];
        let ok = match (sf, sd) {
            (_, FutureState::Chained(_)) => Err("chained future on the DeF side".to_string()),
            (FutureState::Unresolved(qf), FutureState::Unresolved(qd)) => {
                tasks_match(cn_f, cn_d, qf, qd)
            }
            (FutureState::Chained(g), FutureState::Resolved(Value::Fut(h))) if g == h => Ok(()),
            (FutureState::Resolved(w), FutureState::Resolved(_)) if walk_to(cn_f, cn_d, *f, *w) => {
                Ok(())
            }
            _ => Err("resolution states unrelated".to_string()),
        };
        ok.map_err(|e| format!("f{}: {e}", f.0))?;
    }
    Ok(())
}

pub fn in_relation_r(cn_f: &Configuration, cn_d: &Configuration) -> bool {
    explain_relation_r(cn_f, cn_d).is_ok()
}

/// A chained future on the F side is resolved to its target on the D side.
pub fn chained_resolved_in_d(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for (f, st) in &cn_f.futures {
        if let FutureState::Chained(g) = st {
            if resolved(cn_d, *f) != Some(Value::Fut(*g)) {
                return Err(format!(
                    "f{} chained to f{} is not resolved to it",
                    f.0, g.0
                ));
            }
        }
    }
    Ok(())
}

/// A future resolved to `w` on the F side reaches `w` through D-side links
/// whose members all hold `w` on the F side.
pub fn f_resolved_reached_in_d(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for (f, st) in &cn_f.futures {
        if let FutureState::Resolved(w) = st {
            if !walk_to(cn_f, cn_d, *f, *w) {
                return Err(format!("f{} resolved to {w} has no matching sequence", f.0));
            }
        }
    }
    Ok(())
}

/// A future resolved on the D side is chained to the same future on the F
/// side, or resolved there to a value its D-side sequence reaches.
pub fn d_resolved_matched_in_f(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for (f, st) in &cn_d.futures {
        let FutureState::Resolved(w) = st else {
            continue;
        };
        let ok = match cn_f.state(*f) {
            Some(FutureState::Chained(g)) => *w == Value::Fut(*g),
            Some(FutureState::Resolved(w2)) => walk_to(cn_f, cn_d, *f, *w2),
            _ => false,
        };
        if !ok {
            return Err(format!("f{} resolved to {w} on the DeF side", f.0));
        }
    }
    Ok(())
}

/// A future runs a task on one side iff it does on the other, with the same
/// stores and statements equal up to forward elimination and `get*` stages.
pub fn tasks_correspond(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for (f, sf) in &cn_f.futures {
        let sd = cn_d.state(*f);
        match (sf, sd) {
            (FutureState::Unresolved(qf), Some(FutureState::Unresolved(qd))) => {
                tasks_match(cn_f, cn_d, qf, qd).map_err(|e| format!("f{}: {e}", f.0))?
            }
            (FutureState::Unresolved(_), _) | (_, Some(FutureState::Unresolved(_))) => {
                return Err(format!("f{} runs a task on one side only", f.0))
            }
            _ => {}
        }
    }
    Ok(())
}

/// The D-side resolved sequence from `f`, with its final value.
fn d_sequence(cn: &Configuration, f: FutureId) -> (Vec<FutureId>, Option<Value>) {
    let mut seq = vec![f];
    let mut seen = HashSet::from([f]);
    let mut current = f;
    loop {
        match resolved(cn, current) {
            Some(Value::Fut(g)) if seen.insert(g) => {
                seq.push(g);
                current = g;
            }
            Some(Value::Fut(_)) | None => return (seq, None),
            Some(w) => return (seq, Some(w)),
        }
    }
}

/// A D-side sequence ending in a base value is followed, in order, by the
/// F-side links from its first member. The F side may also have collapsed
/// the tail of the sequence by resolving a member directly to that value.
pub fn d_sequences_followed_in_f(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for f in cn_d.futures.keys() {
        let (seq, Some(w)) = d_sequence(cn_d, *f) else {
            continue;
        };
        let mut j = 0;
        while j + 1 < seq.len() {
            let next = match cn_f.state(seq[j]) {
                Some(FutureState::Chained(g)) | Some(FutureState::Resolved(Value::Fut(g))) => *g,
                Some(FutureState::Resolved(v)) if *v == w => break,
                _ => return Err(format!("f{} breaks the sequence from f{}", seq[j].0, f.0)),
            };
            match seq[j + 1..].iter().position(|g| *g == next) {
                Some(k) => j += k + 1,
                None => return Err(format!("f{} leaves the sequence from f{}", seq[j].0, f.0)),
            }
        }
    }
    Ok(())
}

/// Every value on an F-side resolved sequence from `f` is held by some
/// member of the D-side resolved sequence from `f`.
pub fn f_values_on_d_sequence(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    for f in cn_f.futures.keys() {
        let (fseq, last) = d_sequence(cn_f, *f);
        let (dseq, dlast) = d_sequence(cn_d, *f);
        let d_values: BTreeSet<Value> = dseq
            .iter()
            .skip(1)
            .map(|g| Value::Fut(*g))
            .chain(dlast)
            .collect();
        let f_values = fseq.iter().skip(1).map(|g| Value::Fut(*g)).chain(last);
        for v in f_values {
            if !d_values.contains(&v) {
                return Err(format!("f{} reaches {v} on the F side only", f.0));
            }
        }
    }
    Ok(())
}

type LemmaCheck = fn(&Configuration, &Configuration) -> Result<(), String>;

pub fn check_lemmas(cn_f: &Configuration, cn_d: &Configuration) -> Result<(), String> {
    let lemmas: [(&str, LemmaCheck); 6] = [
        ("chained_resolved_in_d", chained_resolved_in_d),
        ("f_resolved_reached_in_d", f_resolved_reached_in_d),
        ("d_resolved_matched_in_f", d_resolved_matched_in_f),
        ("tasks_correspond", tasks_correspond),
        ("d_sequences_followed_in_f", d_sequences_followed_in_f),
        ("f_values_on_d_sequence", f_values_on_d_sequence),
    ];
    for (name, check) in lemmas {
        check(cn_f, cn_d).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(())
}

fn labelled(lts: &Lts) -> Vec<Vec<(ObsLabel, usize)>> {
    let mut out = vec![Vec::new(); lts.states.len()];
    for &(a, l, b) in &lts.edges {
        out[a].push((obs_label(l, Granularity::Fine), b));
    }
    out
}

fn tau_reach(succ: &[Vec<(ObsLabel, usize)>], start: usize) -> Vec<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for &(l, t) in &succ[s] {
            if l == ObsLabel::Tau && seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    seen.into_iter().collect()
}

/// Outcome of a successful [`check_r_is_bisimulation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RCheck {
    pub pairs: usize,
    /// Pairs whose clauses were not checked because a state was cut off by
    /// exploration bounds or the pair bound was hit.
    pub unchecked: usize,
}

/// Checks on two explored LTSs that ℛ relates their initial states, that
/// every related pair satisfies the lemmas, and that the four transfer
/// clauses of a branching bisimulation hold for every pair reachable from
/// the initial one. At most `max_pairs` pairs are visited.
pub fn check_r_is_bisimulation(
    lts_f: &Lts,
    lts_d: &Lts,
    max_pairs: usize,
) -> Result<RCheck, RCounterexample> {
    let (sf, sd) = (labelled(lts_f), labelled(lts_d));
    let fail = |a: usize, b: usize, reason: String| RCounterexample {
        state_f: a,
        state_d: b,
        reason,
    };
    let start = (lts_f.initial, lts_d.initial);
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut unchecked = 0;
    while let Some((a, b)) = queue.pop_front() {
        let (cf, cd) = (&lts_f.states[a], &lts_d.states[b]);
        explain_relation_r(cf, cd).map_err(|e| fail(a, b, format!("not in R: {e}")))?;
        check_lemmas(cf, cd).map_err(|e| fail(a, b, e))?;
        if !lts_f.expanded[a] || !lts_d.expanded[b] {
            unchecked += 1;
            continue;
        }
        let mut next: Vec<(usize, usize)> = Vec::new();
        for (succ, other, flip) in [(&sf[a], (&sd, b), false), (&sd[b], (&sf, a), true)] {
            for &(l, t) in succ {
                let pair = |x: usize, y: usize| if flip { (y, x) } else { (x, y) };
                let related = |x: usize, y: usize| {
                    let (p, q) = pair(x, y);
                    in_relation_r(&lts_f.states[p], &lts_d.states[q])
                };
                if l == ObsLabel::Tau {
                    if !related(t, other.1) {
                        let (p, q) = pair(t, other.1);
                        return Err(fail(p, q, "silent step leaves R".into()));
                    }
                    next.push(pair(t, other.1));
                    continue;
                }
                let matches: Vec<usize> = tau_reach(other.0, other.1)
                    .into_iter()
                    .flat_map(|u| other.0[u].iter().filter(|(m, _)| *m == l).map(|(_, v)| *v))
                    .filter(|&v| related(t, v))
                    .collect();
                if matches.is_empty() {
                    let (p, q) = pair(a, b);
                    let (p, q) = if flip { (q, p) } else { (p, q) };
                    return Err(fail(p, q, format!("{l} is not matched")));
                }
                next.extend(matches.into_iter().map(|v| pair(t, v)));
            }
        }
        for p in next {
            if seen.len() >= max_pairs {
                unchecked += 1;
                break;
            }
            if seen.insert(p) {
                queue.push_back(p);
            }
        }
    }
    Ok(RCheck {
        pairs: seen.len(),
        unchecked,
    })
}
