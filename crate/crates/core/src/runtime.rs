//! Runtime configurations and the one-step transition relation.
//!
//! A configuration is a global store plus a set of futures. Each future is
//! either running (a stack of frames, top of stack last), resolved with a
//! value, or chained to another future (DeF+F only).
//! [`enabled_transitions`] enumerates every labelled step out of a
//! configuration without touching its input.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::syntax::{
    normalize, Atom, BaseType, BinOp, Dialect, Expr, FutureId, Ident, Program, Rhs, Stmt, TypeExpr,
    MAIN,
};
use crate::typecheck::ForwardMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Fut(FutureId),
}

impl Value {
    pub fn to_atom(self) -> Atom {
        match self {
            Value::Int(n) => Atom::Int(n),
            Value::Bool(b) => Atom::Bool(b),
            Value::Fut(f) => Atom::Fut(f),
        }
    }

    pub fn is_future(self) -> bool {
        matches!(self, Value::Fut(_))
    }

    /// Initial value of a variable of type `t`. A flow starts out as an
    /// already resolved future holding the base default.
    pub fn init(t: TypeExpr) -> Value {
        match t.base() {
            BaseType::Int => Value::Int(0),
            BaseType::Bool => Value::Bool(false),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Fut(id) => write!(f, "{id}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => s.serialize_i64(*n),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Fut(id) => s.collect_str(id),
        }
    }
}

pub type Store = BTreeMap<Ident, Value>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Frame {
    #[serde(rename = "fn")]
    pub fn_name: Ident,
    pub locals: Store,
    pub stmt: Stmt,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FutureState {
    /// Frame stack, bottom first.
    Unresolved(Vec<Frame>),
    Resolved(Value),
    Chained(FutureId),
}

/// Where a future comes from: the function its task started with, and its
/// position in the spawn tree (the spawning future's path extended by the
/// number of futures that future had already spawned).
///
/// Paths do not depend on how tasks were interleaved, which makes them the
/// basis of canonical future numbering.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Origin {
    pub task: Ident,
    pub path: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Configuration {
    pub globals: Store,
    pub futures: BTreeMap<FutureId, FutureState>,
    pub origins: BTreeMap<FutureId, Origin>,
    pub next_id: FutureId,
    pub dialect: Dialect,
}

impl Configuration {
    pub fn empty(dialect: Dialect) -> Configuration {
        Configuration {
            globals: Store::new(),
            futures: BTreeMap::new(),
            origins: BTreeMap::new(),
            next_id: FutureId(0),
            dialect,
        }
    }

    /// Adds a future computed by a task started with `task`. Intended for
    /// building configurations by hand; the spawn path defaults to `[id]`.
    pub fn insert_future(&mut self, id: FutureId, task: &str, state: FutureState) {
        self.futures.insert(id, state);
        self.origins.insert(
            id,
            Origin {
                task: task.to_string(),
                path: vec![id.0],
            },
        );
        if id.0 >= self.next_id.0 {
            self.next_id = FutureId(id.0 + 1);
        }
    }

    pub fn state(&self, f: FutureId) -> Option<&FutureState> {
        self.futures.get(&f)
    }

    pub fn resolved_value(&self, f: FutureId) -> Option<Value> {
        match self.futures.get(&f) {
            Some(FutureState::Resolved(w)) => Some(*w),
            _ => None,
        }
    }

    /// Follows resolved links from `w` until a base value, an unresolved
    /// future or a cycle is reached. Returns the last value seen.
    pub fn follow(&self, mut w: Value) -> Value {
        let mut seen = std::collections::BTreeSet::new();
        while let Value::Fut(f) = w {
            if !seen.insert(f) {
                break;
            }
            match self.resolved_value(f) {
                Some(next) => w = next,
                None => break,
            }
        }
        w
    }

    /// Human-readable JSON rendering, futures by id and store keys sorted.
    pub fn to_json(&self) -> serde_json::Value {
        let store = |s: &Store| {
            serde_json::Value::Object(
                s.iter()
                    .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap()))
                    .collect(),
            )
        };
        let futures: Vec<_> = self
            .futures
            .iter()
            .map(|(id, st)| match st {
                FutureState::Unresolved(frames) => json!({
                    "id": id.to_string(),
                    "state": "unresolved",
                    "frames": frames.iter().rev().map(|q| json!({
                        "fn": q.fn_name,
                        "locals": store(&q.locals),
                        "stmt": q.stmt.to_string(),
                    })).collect::<Vec<_>>(),
                }),
                FutureState::Resolved(w) => json!({
                    "id": id.to_string(),
                    "state": "resolved",
                    "value": w,
                }),
                FutureState::Chained(g) => json!({
                    "id": id.to_string(),
                    "state": "chained",
                    "target": g.to_string(),
                }),
            })
            .collect();
        json!({
            "globals": store(&self.globals),
            "futures": futures,
        })
    }
}

/// Compact single-line rendering: `a ▷ f0({..|..}) f1(4) f2(chain f1)`.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn store(f: &mut fmt::Formatter<'_>, s: &Store) -> fmt::Result {
            f.write_str("[")?;
            for (i, (k, v)) in s.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{k}↦{v}")?;
            }
            f.write_str("]")
        }
        store(f, &self.globals)?;
        f.write_str(" ▷")?;
        for (id, st) in &self.futures {
            write!(f, " {id}(")?;
            match st {
                FutureState::Unresolved(frames) => {
                    for (i, q) in frames.iter().rev().enumerate() {
                        if i > 0 {
                            f.write_str(" # ")?;
                        }
                        f.write_str("{")?;
                        store(f, &q.locals)?;
                        write!(f, " | {}}}", q.stmt)?;
                    }
                }
                FutureState::Resolved(w) => write!(f, "{w}")?,
                FutureState::Chained(g) => write!(f, "chain {g}")?,
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Skip,
    Assign,
    IfTrue,
    IfFalse,
    InvkSync,
    InvkAsync,
    ReturnSync,
    ReturnAsync,
    GetFuture,
    GetData,
    ForwardSync,
    ForwardAsync,
    ForwardData,
    ChainUpdate,
    CefForwardSync,
}

impl Rule {
    pub const ALL: [Rule; 15] = [
        Rule::Skip,
        Rule::Assign,
        Rule::IfTrue,
        Rule::IfFalse,
        Rule::InvkSync,
        Rule::InvkAsync,
        Rule::ReturnSync,
        Rule::ReturnAsync,
        Rule::GetFuture,
        Rule::GetData,
        Rule::ForwardSync,
        Rule::ForwardAsync,
        Rule::ForwardData,
        Rule::ChainUpdate,
        Rule::CefForwardSync,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Skip => "SKIP",
            Rule::Assign => "ASSIGN",
            Rule::IfTrue => "IF-TRUE",
            Rule::IfFalse => "IF-FALSE",
            Rule::InvkSync => "INVK-SYNC",
            Rule::InvkAsync => "INVK-ASYNC",
            Rule::ReturnSync => "RETURN-SYNC",
            Rule::ReturnAsync => "RETURN-ASYNC",
            Rule::GetFuture => "GET-FUTURE",
            Rule::GetData => "GET-DATA",
            Rule::ForwardSync => "FORWARD-SYNC",
            Rule::ForwardAsync => "FORWARD-ASYNC",
            Rule::ForwardData => "FORWARD-DATA",
            Rule::ChainUpdate => "CHAIN-UPDATE",
            Rule::CefForwardSync => "CEF-FORWARD-SYNC",
        }
    }

    pub fn from_name(name: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.name() == name)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Rule name plus the future whose state the rule rewrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionLabel {
    pub rule: Rule,
    pub actor: FutureId,
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.rule, self.actor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("unbound variable `{0}`")]
    Unbound(Ident),
    #[error("operator `{op}` applied to {left} and {right}")]
    BadOperands {
        op: BinOp,
        left: Value,
        right: Value,
    },
    #[error("arithmetic overflow in `{0}`")]
    Overflow(BinOp),
    #[error("condition evaluated to non-boolean {0}")]
    NonBoolCondition(Value),
    #[error("unknown function `{0}`")]
    UnknownFunction(Ident),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity {
        name: Ident,
        expected: usize,
        got: usize,
    },
    #[error("malformed configuration: {0}")]
    Integrity(String),
}

pub fn initial_configuration(p: &Program) -> Configuration {
    let globals = p
        .globals
        .iter()
        .map(|(x, t)| (x.clone(), Value::init(*t)))
        .collect();
    let locals = p
        .main_locals
        .iter()
        .map(|(x, t)| (x.clone(), Value::init(*t)))
        .collect();
    let main = Frame {
        fn_name: MAIN.to_string(),
        locals,
        stmt: p.main_body.clone(),
    };
    let mut futures = BTreeMap::new();
    futures.insert(FutureId(0), FutureState::Unresolved(vec![main]));
    let mut origins = BTreeMap::new();
    origins.insert(
        FutureId(0),
        Origin {
            task: MAIN.to_string(),
            path: vec![],
        },
    );
    Configuration {
        globals,
        futures,
        origins,
        next_id: FutureId(1),
        dialect: p.dialect,
    }
}

fn lookup(globals: &Store, locals: &Store, x: &str) -> Result<Value, RuntimeError> {
    locals
        .get(x)
        .or_else(|| globals.get(x))
        .copied()
        .ok_or_else(|| RuntimeError::Unbound(x.to_string()))
}

pub fn eval_atom(globals: &Store, locals: &Store, a: &Atom) -> Result<Value, RuntimeError> {
    Ok(match a {
        Atom::Var(x) => lookup(globals, locals, x)?,
        Atom::Int(n) => Value::Int(*n),
        Atom::Bool(b) => Value::Bool(*b),
        Atom::Fut(f) => Value::Fut(*f),
    })
}

pub fn apply_op(op: BinOp, left: Value, right: Value) -> Result<Value, RuntimeError> {
    use Value::{Bool, Int};
    let overflow = || RuntimeError::Overflow(op);
    Ok(match (op, left, right) {
        (BinOp::Add, Int(a), Int(b)) => Int(a.checked_add(b).ok_or_else(overflow)?),
        (BinOp::Sub, Int(a), Int(b)) => Int(a.checked_sub(b).ok_or_else(overflow)?),
        (BinOp::Mul, Int(a), Int(b)) => Int(a.checked_mul(b).ok_or_else(overflow)?),
        (BinOp::Eq, Int(a), Int(b)) => Bool(a == b),
        (BinOp::Eq, Bool(a), Bool(b)) => Bool(a == b),
        (BinOp::Lt, Int(a), Int(b)) => Bool(a < b),
        (BinOp::Le, Int(a), Int(b)) => Bool(a <= b),
        (BinOp::And, Bool(a), Bool(b)) => Bool(a && b),
        (BinOp::Or, Bool(a), Bool(b)) => Bool(a || b),
        _ => return Err(RuntimeError::BadOperands { op, left, right }),
    })
}

/// `⟦e⟧_{a+ℓ}`: locals take precedence over globals.
pub fn eval(globals: &Store, locals: &Store, e: &Expr) -> Result<Value, RuntimeError> {
    match e {
        Expr::Atom(a) => eval_atom(globals, locals, a),
        Expr::BinOp(l, op, r) => apply_op(
            *op,
            eval_atom(globals, locals, l)?,
            eval_atom(globals, locals, r)?,
        ),
    }
}

/// Instantiates a frame for a call: parameters bound to `args`, locals to
/// their initial values. `p` is assumed normalized.
pub fn bind(p: &Program, name: &str, args: &[Value]) -> Result<Frame, RuntimeError> {
    let f = p
        .function(name)
        .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
    if f.params.len() != args.len() {
        return Err(RuntimeError::Arity {
            name: name.to_string(),
            expected: f.params.len(),
            got: args.len(),
        });
    }
    let mut locals: Store = f
        .params
        .iter()
        .zip(args)
        .map(|((x, _), w)| (x.clone(), *w))
        .collect();
    for (x, t) in &f.locals {
        locals.insert(x.clone(), Value::init(*t));
    }
    Ok(Frame {
        fn_name: f.name.clone(),
        locals,
        stmt: f.body.clone(),
    })
}

/// `(a + ℓ)[x ↦ w]`: writes the local if `x` is one, the global otherwise.
pub fn store_update(
    globals: &mut Store,
    locals: &mut Store,
    x: &str,
    w: Value,
) -> Result<(), RuntimeError> {
    if let Some(slot) = locals.get_mut(x) {
        *slot = w;
    } else if let Some(slot) = globals.get_mut(x) {
        *slot = w;
    } else {
        return Err(RuntimeError::Unbound(x.to_string()));
    }
    Ok(())
}

/// Prefix of locals introduced by the flexible synchronous forward rule.
pub const FWD_PREFIX: &str = "$fwd";

fn rest(tail: Option<&Stmt>) -> Stmt {
    tail.cloned().unwrap_or(Stmt::Skip)
}

fn with_head(head: Stmt, tail: Option<&Stmt>) -> Stmt {
    Stmt::seq(head, rest(tail))
}

/// Replaces the pending `x = m(v̄)` at the head of `caller` by `x = w`.
fn fill_caller(caller: &mut Frame, w: Value) -> Result<(), RuntimeError> {
    let (head, tail) = caller.stmt.split_head();
    match head {
        Stmt::Assign {
            target,
            rhs: Rhs::SyncCall(..),
            span,
        } => {
            let filled = Stmt::Assign {
                target: target.clone(),
                rhs: Rhs::atom(w.to_atom()),
                span: *span,
            };
            caller.stmt = with_head(filled, tail);
            Ok(())
        }
        other => Err(RuntimeError::Integrity(format!(
            "caller frame is not waiting on a synchronous call: `{other}`"
        ))),
    }
}

/// Number of futures already spawned by the task of `parent`.
fn child_count(cn: &Configuration, parent: &[u32]) -> u32 {
    cn.origins
        .values()
        .filter(|o| o.path.len() == parent.len() + 1 && o.path.starts_with(parent))
        .count() as u32
}

/// The step taken by the task of future `f`, if any.
fn task_step(
    p: &Program,
    cn: &Configuration,
    f: FutureId,
    frames: &[Frame],
    mode: ForwardMode,
) -> Result<Option<(Rule, Configuration)>, RuntimeError> {
    let top = frames
        .last()
        .ok_or_else(|| RuntimeError::Integrity(format!("{f} has an empty stack")))?;
    let (head, tail) = top.stmt.split_head();
    let g = &cn.globals;
    let l = &top.locals;

    // Successor in which only the top frame of f changes.
    let replace_top = |globals: Store, frame: Frame| {
        let mut next = cn.clone();
        next.globals = globals;
        if let Some(FutureState::Unresolved(stack)) = next.futures.get_mut(&f) {
            *stack.last_mut().unwrap() = frame;
        }
        next
    };
    let rewrite = |stmt: Stmt| {
        replace_top(
            cn.globals.clone(),
            Frame {
                stmt,
                ..top.clone()
            },
        )
    };
    let set_state = |state: FutureState| {
        let mut next = cn.clone();
        next.futures.insert(f, state);
        next
    };
    let pop_and_fill = |w: Value| -> Result<Configuration, RuntimeError> {
        let mut stack = frames[..frames.len() - 1].to_vec();
        fill_caller(stack.last_mut().unwrap(), w)?;
        Ok(set_state(FutureState::Unresolved(stack)))
    };

    let step = match head {
        Stmt::Skip => tail.map(|t| (Rule::Skip, rewrite(t.clone()))),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => match eval_atom(g, l, cond)? {
            Value::Bool(true) => Some((
                Rule::IfTrue,
                rewrite(normalize(&Stmt::seq((**then_branch).clone(), rest(tail)))),
            )),
            Value::Bool(false) => Some((
                Rule::IfFalse,
                rewrite(normalize(&Stmt::seq((**else_branch).clone(), rest(tail)))),
            )),
            other => return Err(RuntimeError::NonBoolCondition(other)),
        },
        Stmt::Assign { target, rhs, span } => match rhs {
            Rhs::Expr(e) => {
                let w = eval(g, l, e)?;
                let mut globals = g.clone();
                let mut locals = l.clone();
                store_update(&mut globals, &mut locals, target, w)?;
                Some((
                    Rule::Assign,
                    replace_top(
                        globals,
                        Frame {
                            fn_name: top.fn_name.clone(),
                            locals,
                            stmt: rest(tail),
                        },
                    ),
                ))
            }
            Rhs::SyncCall(m, args) => {
                let ws = args
                    .iter()
                    .map(|a| eval_atom(g, l, a))
                    .collect::<Result<Vec<_>, _>>()?;
                let callee = bind(p, m, &ws)?;
                let mut stack = frames.to_vec();
                stack.push(callee);
                Some((Rule::InvkSync, set_state(FutureState::Unresolved(stack))))
            }
            Rhs::AsyncCall(m, args) => {
                let ws = args
                    .iter()
                    .map(|a| eval_atom(g, l, a))
                    .collect::<Result<Vec<_>, _>>()?;
                let callee = bind(p, m, &ws)?;
                let fresh = cn.next_id;
                let parent = cn
                    .origins
                    .get(&f)
                    .map(|o| o.path.clone())
                    .unwrap_or_else(|| vec![f.0]);
                let mut path = parent.clone();
                path.push(child_count(cn, &parent));
                let assign = Stmt::Assign {
                    target: target.clone(),
                    rhs: Rhs::atom(Atom::Fut(fresh)),
                    span: *span,
                };
                let mut next = rewrite(with_head(assign, tail));
                next.futures
                    .insert(fresh, FutureState::Unresolved(vec![callee]));
                next.origins.insert(
                    fresh,
                    Origin {
                        task: m.clone(),
                        path,
                    },
                );
                next.next_id = FutureId(fresh.0 + 1);
                Some((Rule::InvkAsync, next))
            }
            Rhs::GetStar(v) => match eval_atom(g, l, v)? {
                Value::Fut(target_fut) => match cn.futures.get(&target_fut) {
                    Some(FutureState::Resolved(w)) => {
                        let get = Stmt::Assign {
                            target: target.clone(),
                            rhs: Rhs::GetStar(w.to_atom()),
                            span: *span,
                        };
                        Some((Rule::GetFuture, rewrite(with_head(get, tail))))
                    }
                    Some(_) => None,
                    None => {
                        return Err(RuntimeError::Integrity(format!(
                            "dangling reference to {target_fut}"
                        )))
                    }
                },
                b => {
                    let assign = Stmt::Assign {
                        target: target.clone(),
                        rhs: Rhs::atom(b.to_atom()),
                        span: *span,
                    };
                    Some((Rule::GetData, rewrite(with_head(assign, tail))))
                }
            },
        },
        Stmt::Return { value, .. } => {
            let w = eval_atom(g, l, value)?;
            if frames.len() == 1 {
                Some((Rule::ReturnAsync, set_state(FutureState::Resolved(w))))
            } else {
                Some((Rule::ReturnSync, pop_and_fill(w)?))
            }
        }
        Stmt::ForwardStar { value, span } => {
            let w = eval_atom(g, l, value)?;
            if frames.len() == 1 {
                match w {
                    Value::Fut(target_fut) => Some((
                        Rule::ForwardAsync,
                        set_state(FutureState::Chained(target_fut)),
                    )),
                    b => Some((Rule::ForwardData, set_state(FutureState::Resolved(b)))),
                }
            } else {
                match mode {
                    ForwardMode::Strict => Some((Rule::ForwardSync, pop_and_fill(w)?)),
                    ForwardMode::Flexible => {
                        let n = top
                            .locals
                            .keys()
                            .filter(|k| k.starts_with(FWD_PREFIX))
                            .count();
                        let fresh = format!("{FWD_PREFIX}{n}");
                        let ret = p
                            .return_type(&top.fn_name)
                            .ok_or_else(|| RuntimeError::UnknownFunction(top.fn_name.clone()))?;
                        let mut locals = top.locals.clone();
                        locals.insert(fresh.clone(), Value::init(ret));
                        let stmt = Stmt::seq(
                            Stmt::Assign {
                                target: fresh.clone(),
                                rhs: Rhs::GetStar(w.to_atom()),
                                span: *span,
                            },
                            Stmt::seq(
                                Stmt::Return {
                                    value: Atom::Var(fresh),
                                    span: *span,
                                },
                                rest(tail),
                            ),
                        );
                        Some((
                            Rule::CefForwardSync,
                            replace_top(
                                cn.globals.clone(),
                                Frame {
                                    fn_name: top.fn_name.clone(),
                                    locals,
                                    stmt,
                                },
                            ),
                        ))
                    }
                }
            }
        }
        Stmt::Seq(..) => {
            return Err(RuntimeError::Integrity(format!(
                "{f}: statement not in normal form"
            )))
        }
    };
    Ok(step)
}

/// Every enabled transition out of `cn`, ordered by actor. Each future has
/// at most one enabled transition.
pub fn enabled_transitions(
    p: &Program,
    cn: &Configuration,
    mode: ForwardMode,
) -> Result<Vec<(TransitionLabel, Configuration)>, RuntimeError> {
    let mut out = Vec::new();
    for (&f, state) in &cn.futures {
        let step = match state {
            FutureState::Unresolved(frames) => task_step(p, cn, f, frames, mode)?,
            FutureState::Chained(target) => match cn.futures.get(target) {
                Some(FutureState::Resolved(w)) => {
                    let mut next = cn.clone();
                    next.futures.insert(f, FutureState::Resolved(*w));
                    Some((Rule::ChainUpdate, next))
                }
                Some(_) => None,
                None => {
                    return Err(RuntimeError::Integrity(format!(
                        "{f} chained to missing {target}"
                    )))
                }
            },
            FutureState::Resolved(_) => None,
        };
        if let Some((rule, next)) = step {
            out.push((TransitionLabel { rule, actor: f }, next));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Terminated,
    /// Wait-for edges `(waiting, awaited)` of every blocked future.
    Deadlocked(Vec<(FutureId, FutureId)>),
}

/// The future a task is blocked on: its top statement is `x = get* v` with
/// `v` a reference to a future that is not resolved.
pub fn blocked_on(cn: &Configuration, f: FutureId) -> Option<FutureId> {
    let Some(FutureState::Unresolved(frames)) = cn.futures.get(&f) else {
        return None;
    };
    let top = frames.last()?;
    let (head, _) = top.stmt.split_head();
    let Stmt::Assign {
        rhs: Rhs::GetStar(v),
        ..
    } = head
    else {
        return None;
    };
    match eval_atom(&cn.globals, &top.locals, v) {
        Ok(Value::Fut(g)) if cn.resolved_value(g).is_none() => Some(g),
        _ => None,
    }
}

/// Structural classification: a configuration is stuck when every running
/// task waits on an unresolved future and no chain can be updated.
pub fn classify(cn: &Configuration) -> Status {
    let mut edges = Vec::new();
    let mut pending = false;
    for (&f, state) in &cn.futures {
        match state {
            FutureState::Resolved(_) => {}
            FutureState::Unresolved(_) => {
                pending = true;
                match blocked_on(cn, f) {
                    Some(g) => edges.push((f, g)),
                    None => return Status::Running,
                }
            }
            FutureState::Chained(g) => {
                pending = true;
                if cn.resolved_value(*g).is_some() {
                    return Status::Running;
                }
                edges.push((f, *g));
            }
        }
    }
    if pending {
        Status::Deadlocked(edges)
    } else {
        Status::Terminated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn only(p: &Program, cn: &Configuration) -> (TransitionLabel, Configuration) {
        let mut ts = enabled_transitions(p, cn, ForwardMode::Strict).unwrap();
        assert_eq!(ts.len(), 1, "{ts:?}");
        ts.remove(0)
    }

    fn top_stmt(cn: &Configuration, f: u32) -> String {
        match &cn.futures[&FutureId(f)] {
            FutureState::Unresolved(frames) => frames.last().unwrap().stmt.to_string(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn initial_configuration_shapes() {
        let p = parse_program("int g; bool h; Flow[int] k; { int x; return 0 }").unwrap();
        let cn = initial_configuration(&p);
        assert_eq!(cn.globals["g"], Value::Int(0));
        assert_eq!(cn.globals["h"], Value::Bool(false));
        assert_eq!(cn.globals["k"], Value::Int(0));
        assert_eq!(cn.next_id, FutureId(1));
        assert_eq!(top_stmt(&cn, 0), "return 0; skip");
    }

    #[test]
    fn locals_shadow_globals() {
        let g: Store = [("x".to_string(), Value::Int(9))].into();
        let l: Store = [("x".to_string(), Value::Int(1))].into();
        assert_eq!(eval_atom(&g, &l, &Atom::var("x")), Ok(Value::Int(1)));
        let (mut g2, mut l2) = (g.clone(), Store::new());
        store_update(&mut g2, &mut l2, "x", Value::Int(3)).unwrap();
        assert_eq!(g2["x"], Value::Int(3));
        let (mut g3, mut l3) = (g.clone(), l.clone());
        store_update(&mut g3, &mut l3, "x", Value::Int(5)).unwrap();
        assert_eq!((g3["x"], l3["x"]), (Value::Int(9), Value::Int(5)));
    }

    #[test]
    fn operators() {
        let e = Expr::BinOp(Atom::Int(2), BinOp::Lt, Atom::Int(3));
        assert_eq!(
            eval(&Store::new(), &Store::new(), &e),
            Ok(Value::Bool(true))
        );
        let l: Store = [("x".to_string(), Value::Fut(FutureId(1)))].into();
        let e = Expr::BinOp(Atom::var("x"), BinOp::Add, Atom::Int(1));
        assert!(matches!(
            eval(&Store::new(), &l, &e),
            Err(RuntimeError::BadOperands { .. })
        ));
        assert_eq!(
            apply_op(BinOp::Mul, Value::Int(i64::MAX), Value::Int(2)),
            Err(RuntimeError::Overflow(BinOp::Mul))
        );
    }

    #[test]
    fn async_call_then_assign() {
        let p =
            parse_program("fun int foo(int x) { return x } { Flow[int] x; x = !foo(1); return 0 }")
                .unwrap();
        let cn = initial_configuration(&p);
        let (label, next) = only(&p, &cn);
        assert_eq!(label.rule, Rule::InvkAsync);
        assert_eq!(top_stmt(&next, 0), "x = f1; return 0; skip");
        let FutureState::Unresolved(frames) = &next.futures[&FutureId(1)] else {
            panic!()
        };
        assert_eq!(frames[0].locals["x"], Value::Int(1));
        assert_eq!(next.origins[&FutureId(1)].path, vec![0]);
        let ts = enabled_transitions(&p, &next, ForwardMode::Strict).unwrap();
        let rules: Vec<_> = ts.iter().map(|(l, _)| (l.rule, l.actor.0)).collect();
        assert_eq!(rules, vec![(Rule::Assign, 0), (Rule::ReturnAsync, 1)]);
    }

    #[test]
    fn sync_call_round_trip() {
        let p = parse_program(
            "fun int inc(int a) { int b; b = a + 1; return b } { int r; r = inc(4); return r }",
        )
        .unwrap();
        let mut cn = initial_configuration(&p);
        let mut rules = vec![];
        loop {
            let ts = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
            let Some((l, next)) = ts.into_iter().next() else {
                break;
            };
            rules.push(l.rule);
            cn = next;
        }
        assert_eq!(
            rules,
            vec![
                Rule::InvkSync,
                Rule::Assign,
                Rule::ReturnSync,
                Rule::Assign,
                Rule::ReturnAsync
            ]
        );
        assert_eq!(
            cn.futures[&FutureId(0)],
            FutureState::Resolved(Value::Int(5))
        );
        assert_eq!(classify(&cn), Status::Terminated);
    }

    #[test]
    fn get_star_walks_resolved_links() {
        // f0({[x↦f1] | y = get* x}) f1(f2) f2(4)
        let p = parse_program("{ Flow[int] x; int y; y = get* x; return y }").unwrap();
        let mut cn = initial_configuration(&p);
        if let Some(FutureState::Unresolved(frames)) = cn.futures.get_mut(&FutureId(0)) {
            frames[0].locals.insert("x".into(), Value::Fut(FutureId(1)));
        }
        cn.insert_future(
            FutureId(1),
            "f",
            FutureState::Resolved(Value::Fut(FutureId(2))),
        );
        cn.insert_future(FutureId(2), "g", FutureState::Resolved(Value::Int(4)));
        let mut rules = vec![];
        for _ in 0..3 {
            let (l, next) = only(&p, &cn);
            rules.push(l.rule);
            cn = next;
        }
        assert_eq!(rules, vec![Rule::GetFuture, Rule::GetFuture, Rule::GetData]);
        assert_eq!(top_stmt(&cn, 0), "y = 4; return y; skip");
    }

    #[test]
    fn blocked_get_and_deadlock() {
        let p = parse_program("{ Flow[int] x; int y; y = get* x; return y }").unwrap();
        let mut cn = initial_configuration(&p);
        if let Some(FutureState::Unresolved(frames)) = cn.futures.get_mut(&FutureId(0)) {
            frames[0].locals.insert("x".into(), Value::Fut(FutureId(1)));
        }
        cn.insert_future(FutureId(1), "f", FutureState::Chained(FutureId(2)));
        cn.insert_future(FutureId(2), "g", FutureState::Chained(FutureId(1)));
        assert!(enabled_transitions(&p, &cn, ForwardMode::Strict)
            .unwrap()
            .is_empty());
        assert_eq!(
            classify(&cn),
            Status::Deadlocked(vec![
                (FutureId(0), FutureId(1)),
                (FutureId(1), FutureId(2)),
                (FutureId(2), FutureId(1))
            ])
        );
    }

    #[test]
    fn forward_rules() {
        let p = parse_program(
            "fun Flow[int] g() { Flow[int] y; y = !h(); forward* y }
             fun int h() { return 4 }
             { Flow[int] r; r = g(); return 0 }",
        )
        .unwrap();
        // Strict: the synchronous forward behaves like a return.
        let cn = initial_configuration(&p);
        let (_, cn) = only(&p, &cn); // INVK-SYNC
        let (_, cn) = only(&p, &cn); // INVK-ASYNC in g
        let ts = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
        let (l, strict) = ts.into_iter().next().unwrap(); // ASSIGN y = f1
        assert_eq!(l.rule, Rule::Assign);
        let ts = enabled_transitions(&p, &strict, ForwardMode::Strict).unwrap();
        assert_eq!(ts[0].0.rule, Rule::ForwardSync);
        assert_eq!(top_stmt(&ts[0].1, 0), "r = f1; return 0; skip");
        let ts = enabled_transitions(&p, &strict, ForwardMode::Flexible).unwrap();
        assert_eq!(ts[0].0.rule, Rule::CefForwardSync);
        assert_eq!(top_stmt(&ts[0].1, 0), "$fwd0 = get* f1; return $fwd0; skip");

        // Asynchronous forward of a future chains, of data resolves.
        let p = parse_program(
            "fun Flow[int] g(Flow[int] y) { forward* y } { Flow[int] r; r = !g(3); return 0 }",
        )
        .unwrap();
        let cn = initial_configuration(&p);
        let (_, cn) = only(&p, &cn);
        let ts = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
        assert_eq!(
            ts[1].0,
            TransitionLabel {
                rule: Rule::ForwardData,
                actor: FutureId(1)
            }
        );
        assert_eq!(
            ts[1].1.futures[&FutureId(1)],
            FutureState::Resolved(Value::Int(3))
        );
    }

    #[test]
    fn chain_update_is_global() {
        let p = parse_program("{ return 0 }").unwrap();
        let mut cn = initial_configuration(&p);
        cn.insert_future(FutureId(1), "f", FutureState::Chained(FutureId(2)));
        cn.insert_future(FutureId(2), "g", FutureState::Resolved(Value::Int(4)));
        let ts = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
        let labels: Vec<_> = ts.iter().map(|(l, _)| l.to_string()).collect();
        assert_eq!(labels, vec!["RETURN-ASYNC@f0", "CHAIN-UPDATE@f1"]);
        assert_eq!(
            ts[1].1.futures[&FutureId(1)],
            FutureState::Resolved(Value::Int(4))
        );
    }

    #[test]
    fn input_is_not_mutated() {
        let p =
            parse_program("fun int f() { return 1 } { Flow[int] x; x = !f(); return 0 }").unwrap();
        let cn = initial_configuration(&p);
        let before = cn.clone();
        let a = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
        let b = enabled_transitions(&p, &cn, ForwardMode::Strict).unwrap();
        assert_eq!(cn, before);
        assert_eq!(a, b);
    }
}
