//! Static typing of programs and of runtime configurations.
//!
//! Typing is algorithmic: subsumption (a base type `B` lifting to
//! `Flow[B]`) is applied only at assignments, argument passing, returns and
//! forwards. Nested flows arise only transiently when typing an
//! asynchronous call and are collapsed immediately.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::runtime::{Configuration, FutureState, Value, FWD_PREFIX};
use crate::syntax::{
    Atom, BaseType, Dialect, Expr, FutureId, Ident, Program, Rhs, Span, Stmt, TypeExpr, MAIN,
    MAIN_RETURN,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    /// `forward*` only in functions returning `Flow[B]`; a synchronous
    /// forward behaves like a return.
    #[default]
    Strict,
    /// `forward*` also in base-returning functions; a synchronous forward
    /// waits on the forwarded future.
    Flexible,
}

impl fmt::Display for ForwardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForwardMode::Strict => "strict",
            ForwardMode::Flexible => "flexible",
        })
    }
}

/// A possibly nested flow type, as built while typing `!m(v̄)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawType {
    Base(BaseType),
    Flow(Box<RawType>),
}

impl RawType {
    pub fn flow(inner: RawType) -> RawType {
        RawType::Flow(Box::new(inner))
    }
}

impl From<TypeExpr> for RawType {
    fn from(t: TypeExpr) -> RawType {
        match t {
            TypeExpr::Basic(b) => RawType::Base(b),
            TypeExpr::Flow(b) => RawType::flow(RawType::Base(b)),
        }
    }
}

/// `↓`: `↓Flow[Flow[T]] = ↓Flow[T]`, `↓Flow[T] = Flow[↓T]` otherwise,
/// `↓B = B`.
pub fn collapse(t: &RawType) -> TypeExpr {
    match t {
        RawType::Base(b) => TypeExpr::Basic(*b),
        RawType::Flow(inner) => match **inner {
            RawType::Flow(_) => collapse(inner),
            _ => TypeExpr::Flow(collapse(inner).base()),
        },
    }
}

/// `B <: Flow[B]`, plus reflexivity.
pub fn subtype(t1: TypeExpr, t2: TypeExpr) -> bool {
    t1 == t2 || (t1 == TypeExpr::Basic(t2.base()) && t2.is_flow())
}

pub fn lift(t: TypeExpr) -> TypeExpr {
    TypeExpr::Flow(t.base())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    pub vars: BTreeMap<Ident, TypeExpr>,
    pub funs: BTreeMap<Ident, (Vec<TypeExpr>, TypeExpr)>,
    /// Result types of futures, for future identifiers occurring in runtime
    /// statements.
    pub futures: BTreeMap<FutureId, BaseType>,
}

impl TypeEnv {
    /// Γ of a program: globals and function signatures.
    pub fn of_program(p: &Program) -> TypeEnv {
        TypeEnv {
            vars: p.globals.iter().cloned().collect(),
            funs: p
                .functions
                .iter()
                .map(|f| {
                    let params = f.params.iter().map(|(_, t)| *t).collect();
                    (f.name.clone(), (params, f.return_type))
                })
                .collect(),
            futures: BTreeMap::new(),
        }
    }

    /// Γ extended with the parameters and locals of `fn_name`.
    pub fn for_function(&self, p: &Program, fn_name: &str) -> TypeEnv {
        let mut env = self.clone();
        if fn_name == MAIN {
            env.vars.extend(p.main_locals.iter().cloned());
        } else if let Some(f) = p.function(fn_name) {
            env.vars
                .extend(f.params.iter().chain(f.locals.iter()).cloned());
        }
        env
    }

    fn return_type(&self, fn_name: &str) -> Option<TypeExpr> {
        if fn_name == MAIN {
            Some(MAIN_RETURN)
        } else {
            self.funs.get(fn_name).map(|(_, r)| *r)
        }
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (x, t) in &self.vars {
            out.push_str(&format!("{x} : {t}\n"));
        }
        for (m, (params, ret)) in &self.funs {
            let ps: Vec<String> = params.iter().map(|t| t.to_string()).collect();
            out.push_str(&format!("{m} : ({}) -> {ret}\n", ps.join(", ")));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Source(Span),
    Future(FutureId),
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub location: Location,
    pub rule: &'static str,
    pub message: String,
}

impl TypeError {
    fn at(span: Span, rule: &'static str, message: impl Into<String>) -> TypeError {
        TypeError {
            location: if span.is_known() {
                Location::Source(span)
            } else {
                Location::Unknown
            },
            rule,
            message: message.into(),
        }
    }

    fn in_future(f: FutureId, rule: &'static str, message: impl Into<String>) -> TypeError {
        TypeError {
            location: Location::Future(f),
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Location::Source(s) => write!(f, "{}:{}: ", s.line, s.col)?,
            Location::Future(id) => write!(f, "{id}: ")?,
            Location::Unknown => {}
        }
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

impl std::error::Error for TypeError {}

pub fn type_of_atom(env: &TypeEnv, a: &Atom, span: Span) -> Result<TypeExpr, TypeError> {
    match a {
        Atom::Var(x) => env
            .vars
            .get(x)
            .copied()
            .ok_or_else(|| TypeError::at(span, "T-VAR", format!("unknown identifier `{x}`"))),
        Atom::Int(_) => Ok(TypeExpr::INT),
        Atom::Bool(_) => Ok(TypeExpr::BOOL),
        Atom::Fut(f) => env
            .futures
            .get(f)
            .map(|b| TypeExpr::Flow(*b))
            .ok_or_else(|| TypeError::at(span, "T-VAR", format!("unknown future {f}"))),
    }
}

fn check_args(
    env: &TypeEnv,
    m: &str,
    args: &[Atom],
    span: Span,
    rule: &'static str,
) -> Result<TypeExpr, TypeError> {
    let (params, ret) = env
        .funs
        .get(m)
        .ok_or_else(|| TypeError::at(span, rule, format!("unknown function `{m}`")))?;
    if params.len() != args.len() {
        return Err(TypeError::at(
            span,
            rule,
            format!(
                "`{m}` expects {} arguments, got {}",
                params.len(),
                args.len()
            ),
        ));
    }
    for (i, (a, t)) in args.iter().zip(params).enumerate() {
        let ta = type_of_atom(env, a, span)?;
        if !subtype(ta, *t) {
            return Err(TypeError::at(
                span,
                rule,
                format!("argument {} of `{m}` has type {ta}, expected {t}", i + 1),
            ));
        }
    }
    Ok(*ret)
}

fn type_of_rhs_at(env: &TypeEnv, z: &Rhs, span: Span) -> Result<TypeExpr, TypeError> {
    match z {
        Rhs::Expr(Expr::Atom(a)) => type_of_atom(env, a, span),
        Rhs::Expr(Expr::BinOp(l, op, r)) => {
            let (tl, tr) = (type_of_atom(env, l, span)?, type_of_atom(env, r, span)?);
            op.signatures()
                .iter()
                .find(|(a, b, _)| tl == TypeExpr::Basic(*a) && tr == TypeExpr::Basic(*b))
                .map(|(_, _, res)| TypeExpr::Basic(*res))
                .ok_or_else(|| {
                    TypeError::at(
                        span,
                        "T-EXPRESSION",
                        format!("operator `{op}` is not defined on {tl} and {tr}"),
                    )
                })
        }
        Rhs::SyncCall(m, args) => check_args(env, m, args, span, "T-INVK-SYNC"),
        Rhs::AsyncCall(m, args) => {
            let ret = check_args(env, m, args, span, "T-INVK-ASYNC")?;
            Ok(collapse(&RawType::flow(ret.into())))
        }
        Rhs::GetStar(v) => Ok(TypeExpr::Basic(type_of_atom(env, v, span)?.base())),
    }
}

/// Type of a right-hand side. The forward mode does not influence
/// right-hand sides; it is accepted for symmetry with [`check_stmt`].
pub fn type_of_rhs(env: &TypeEnv, z: &Rhs, _mode: ForwardMode) -> Result<TypeExpr, TypeError> {
    type_of_rhs_at(env, z, Span::default())
}

fn check_into(
    env: &TypeEnv,
    ret: TypeExpr,
    s: &Stmt,
    mode: ForwardMode,
    errs: &mut Vec<TypeError>,
) {
    match s {
        Stmt::Skip => {}
        Stmt::Seq(a, b) => {
            check_into(env, ret, a, mode, errs);
            check_into(env, ret, b, mode, errs);
        }
        Stmt::Assign { target, rhs, span } => {
            let Some(tx) = env.vars.get(target).copied() else {
                errs.push(TypeError::at(
                    *span,
                    "T-ASSIGN",
                    format!("assignment to undeclared variable `{target}`"),
                ));
                return;
            };
            match type_of_rhs_at(env, rhs, *span) {
                Ok(tz) if subtype(tz, tx) => {}
                Ok(tz) => errs.push(TypeError::at(
                    *span,
                    "T-ASSIGN",
                    format!("cannot assign {tz} to `{target}` of type {tx}"),
                )),
                Err(e) => errs.push(e),
            }
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            span,
        } => {
            match type_of_atom(env, cond, *span) {
                Ok(TypeExpr::BOOL) => {}
                Ok(t) => errs.push(TypeError::at(
                    *span,
                    "T-IF",
                    format!("condition has type {t}, expected bool"),
                )),
                Err(e) => errs.push(e),
            }
            check_into(env, ret, then_branch, mode, errs);
            check_into(env, ret, else_branch, mode, errs);
        }
        Stmt::Return { value, span } => match type_of_atom(env, value, *span) {
            Ok(t) if subtype(t, ret) => {}
            Ok(t) => errs.push(TypeError::at(
                *span,
                "T-RETURN",
                format!("returning {t} from a function declared to return {ret}"),
            )),
            Err(e) => errs.push(e),
        },
        Stmt::ForwardStar { value, span } => {
            let t = match type_of_atom(env, value, *span) {
                Ok(t) => t,
                Err(e) => {
                    errs.push(e);
                    return;
                }
            };
            match mode {
                ForwardMode::Strict => {
                    if !ret.is_flow() {
                        errs.push(TypeError::at(
                            *span,
                            "T-FORWARD",
                            format!("forward* in a function declared to return {ret}, expected a Flow return type"),
                        ));
                    } else if !subtype(t, ret) {
                        errs.push(TypeError::at(
                            *span,
                            "T-FORWARD",
                            format!("forwarding {t} from a function declared to return {ret}"),
                        ));
                    }
                }
                ForwardMode::Flexible => {
                    if !subtype(t, lift(ret)) {
                        errs.push(TypeError::at(
                            *span,
                            "T-CEF-FORWARD",
                            format!("forwarding {t} from a function declared to return {ret}"),
                        ));
                    }
                }
            }
        }
    }
}

/// `Γ ⊢_m s`, collecting every violation.
pub fn check_stmt(
    env: &TypeEnv,
    fn_name: &str,
    s: &Stmt,
    mode: ForwardMode,
) -> Result<(), Vec<TypeError>> {
    let Some(ret) = env.return_type(fn_name) else {
        return Err(vec![TypeError::at(
            s.span(),
            "T-METHOD",
            format!("unknown function `{fn_name}`"),
        )]);
    };
    let mut errs = Vec::new();
    check_into(env, ret, s, mode, &mut errs);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Whether every control path through `s` ends in `return` or `forward*`.
pub fn always_returns(s: &Stmt) -> bool {
    s.leaves().into_iter().any(|leaf| match leaf {
        Stmt::Return { .. } | Stmt::ForwardStar { .. } => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => always_returns(then_branch) && always_returns(else_branch),
        _ => false,
    })
}

fn first_forward(s: &Stmt) -> Option<Span> {
    match s {
        Stmt::ForwardStar { span, .. } => Some(*span),
        Stmt::Seq(a, b) => first_forward(a).or_else(|| first_forward(b)),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => first_forward(then_branch).or_else(|| first_forward(else_branch)),
        _ => None,
    }
}

fn check_distinct<'a>(
    names: impl IntoIterator<Item = &'a Ident>,
    span: Span,
    what: &str,
    errs: &mut Vec<TypeError>,
) {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            errs.push(TypeError::at(
                span,
                "T-METHOD",
                format!("`{n}` declared twice in {what}"),
            ));
        }
    }
}

/// Checks a normalized program and returns its global environment.
pub fn check_program(p: &Program, mode: ForwardMode) -> Result<TypeEnv, Vec<TypeError>> {
    let env = TypeEnv::of_program(p);
    let mut errs = Vec::new();
    check_distinct(
        p.globals.iter().map(|(x, _)| x),
        Span::default(),
        "the globals",
        &mut errs,
    );
    check_distinct(
        p.functions.iter().map(|f| &f.name),
        Span::default(),
        "the function list",
        &mut errs,
    );

    let bodies = p
        .functions
        .iter()
        .map(|f| {
            let names: Vec<&Ident> = f.params.iter().chain(&f.locals).map(|(x, _)| x).collect();
            (f.name.as_str(), &f.body, f.span, names)
        })
        .chain(std::iter::once((
            MAIN,
            &p.main_body,
            Span::default(),
            p.main_locals.iter().map(|(x, _)| x).collect(),
        )));

    for (name, body, span, names) in bodies {
        check_distinct(names, span, &format!("`{name}`"), &mut errs);
        if p.dialect == Dialect::DeF {
            if let Some(at) = first_forward(body) {
                errs.push(TypeError::at(
                    at,
                    "T-FORWARD",
                    "forward* is not available in the DeF dialect",
                ));
            }
        }
        let local = env.for_function(p, name);
        if let Err(mut e) = check_stmt(&local, name, body, mode) {
            errs.append(&mut e);
        }
        if !always_returns(body) {
            errs.push(TypeError::at(
                span,
                "T-METHOD",
                format!("`{name}` may finish without return or forward*"),
            ));
        }
    }

    if errs.is_empty() {
        Ok(env)
    } else {
        Err(errs)
    }
}

/// Ω: the typing environment of a runtime configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigTypeEnv {
    pub globals: TypeEnv,
    /// Frame environments of running futures, bottom first, each with the
    /// function the frame executes.
    pub pending: BTreeMap<FutureId, Vec<(TypeEnv, Ident)>>,
    /// `Flow[B]` for every resolved or chained future.
    pub resolved: BTreeMap<FutureId, TypeExpr>,
    pub mode: ForwardMode,
}

impl ConfigTypeEnv {
    /// Reconstructs Ω from a configuration: the result type of a future is
    /// the return type of the function its task started with.
    pub fn reconstruct(
        p: &Program,
        cn: &Configuration,
        mode: ForwardMode,
    ) -> Result<ConfigTypeEnv, TypeError> {
        let mut results = BTreeMap::new();
        for &f in cn.futures.keys() {
            let task = match (cn.futures.get(&f), cn.origins.get(&f)) {
                (Some(FutureState::Unresolved(frames)), _) if !frames.is_empty() => {
                    frames[0].fn_name.clone()
                }
                (_, Some(o)) => o.task.clone(),
                _ => {
                    return Err(TypeError::in_future(
                        f,
                        "T-CONFIG",
                        "future of unknown origin",
                    ))
                }
            };
            let ret = p.return_type(&task).ok_or_else(|| {
                TypeError::in_future(f, "T-CONFIG", format!("unknown function `{task}`"))
            })?;
            results.insert(f, ret.base());
        }
        let mut globals = TypeEnv::of_program(p);
        globals.futures = results;
        let mut pending = BTreeMap::new();
        let mut resolved = BTreeMap::new();
        for (&f, state) in &cn.futures {
            match state {
                FutureState::Unresolved(frames) => {
                    let envs = frames
                        .iter()
                        .map(|q| {
                            let mut env = globals.for_function(p, &q.fn_name);
                            if let Some(ret) = p.return_type(&q.fn_name) {
                                for x in q.locals.keys().filter(|x| x.starts_with(FWD_PREFIX)) {
                                    env.vars.insert(x.clone(), TypeExpr::Basic(ret.base()));
                                }
                            }
                            (env, q.fn_name.clone())
                        })
                        .collect();
                    pending.insert(f, envs);
                }
                _ => {
                    resolved.insert(f, TypeExpr::Flow(globals.futures[&f]));
                }
            }
        }
        Ok(ConfigTypeEnv {
            globals,
            pending,
            resolved,
            mode,
        })
    }

    /// Result base type of `f` according to Ω.
    pub fn result_base(&self, f: FutureId) -> Option<BaseType> {
        if let Some(t) = self.resolved.get(&f) {
            return Some(t.base());
        }
        let (env, name) = self.pending.get(&f)?.first()?;
        env.return_type(name).map(|t| t.base())
    }

    fn value_inhabits(&self, w: Value, t: TypeExpr) -> bool {
        match w {
            Value::Int(_) => t.base() == BaseType::Int,
            Value::Bool(_) => t.base() == BaseType::Bool,
            Value::Fut(f) => t.is_flow() && self.result_base(f) == Some(t.base()),
        }
    }
}

/// Ω ⊢ cn.
pub fn check_configuration(
    omega: &ConfigTypeEnv,
    cn: &Configuration,
) -> Result<(), Vec<TypeError>> {
    let mut errs = Vec::new();
    for &f in cn.futures.keys() {
        if omega.pending.contains_key(&f) == omega.resolved.contains_key(&f) {
            errs.push(TypeError::in_future(
                f,
                "T-CONFIG",
                "future must be typed exactly once in Ω",
            ));
        }
    }
    let check_store =
        |store: &crate::runtime::Store, env: &TypeEnv, owner: String, errs: &mut Vec<TypeError>| {
            for (x, w) in store {
                match env.vars.get(x) {
                    Some(t) if omega.value_inhabits(*w, *t) => {}
                    Some(t) => errs.push(TypeError {
                        location: Location::Unknown,
                        rule: "T-STORE",
                        message: format!("{owner}: `{x}` holds {w}, not a value of {t}"),
                    }),
                    None => errs.push(TypeError {
                        location: Location::Unknown,
                        rule: "T-STORE",
                        message: format!("{owner}: `{x}` is not declared"),
                    }),
                }
            }
        };
    check_store(&cn.globals, &omega.globals, "globals".into(), &mut errs);

    for (&f, state) in &cn.futures {
        match state {
            FutureState::Unresolved(frames) => {
                let Some(envs) = omega.pending.get(&f) else {
                    continue;
                };
                if envs.len() != frames.len() {
                    errs.push(TypeError::in_future(
                        f,
                        "T-CONFIG",
                        "stack depth differs from Ω",
                    ));
                    continue;
                }
                for (q, (env, name)) in frames.iter().zip(envs) {
                    if *name != q.fn_name {
                        errs.push(TypeError::in_future(
                            f,
                            "T-CONFIG",
                            format!("frame runs `{}` but Ω records `{name}`", q.fn_name),
                        ));
                    }
                    check_store(&q.locals, env, format!("{f} frame of `{name}`"), &mut errs);
                    if let Err(es) = check_stmt(env, name, &q.stmt, omega.mode) {
                        errs.extend(es.into_iter().map(|e| TypeError {
                            location: Location::Future(f),
                            ..e
                        }));
                    }
                }
            }
            FutureState::Resolved(w) => {
                if let Some(t) = omega.resolved.get(&f) {
                    if !omega.value_inhabits(*w, *t) {
                        errs.push(TypeError::in_future(
                            f,
                            "T-CONFIG",
                            format!("resolved with {w}, not a value of {t}"),
                        ));
                    }
                }
            }
            FutureState::Chained(g) => {
                if !cn.futures.contains_key(g) {
                    errs.push(TypeError::in_future(
                        f,
                        "T-CONFIG",
                        format!("chained to missing {g}"),
                    ));
                } else if omega.result_base(f) != omega.result_base(*g) {
                    errs.push(TypeError::in_future(
                        f,
                        "T-CONFIG",
                        format!("chained to {g} of a different result type"),
                    ));
                }
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
