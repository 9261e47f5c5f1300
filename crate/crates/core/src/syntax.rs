//! Abstract syntax of DeF / DeF+F programs.
//!
//! The same statement type is used for source programs and for the
//! statements held by runtime frames. The only runtime-only piece is
//! [`Atom::Fut`], a future identifier substituted into a statement by the
//! reduction rules; the parser never produces it.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

pub use crate::pretty::pretty;

pub type Ident = String;

/// Identifier of a future in a runtime configuration. `FutureId(0)` is the
/// main task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FutureId(pub u32);

impl fmt::Display for FutureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BaseType {
    Int,
    Bool,
}

/// `B | Flow[B]`. Flow only ever wraps a base type, so nesting is
/// unrepresentable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TypeExpr {
    Basic(BaseType),
    Flow(BaseType),
}

impl TypeExpr {
    pub const INT: TypeExpr = TypeExpr::Basic(BaseType::Int);
    pub const BOOL: TypeExpr = TypeExpr::Basic(BaseType::Bool);
    pub const FLOW_INT: TypeExpr = TypeExpr::Flow(BaseType::Int);
    pub const FLOW_BOOL: TypeExpr = TypeExpr::Flow(BaseType::Bool);

    pub fn base(self) -> BaseType {
        match self {
            TypeExpr::Basic(b) | TypeExpr::Flow(b) => b,
        }
    }

    pub fn is_flow(self) -> bool {
        matches!(self, TypeExpr::Flow(_))
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseType::Int => "int",
            BaseType::Bool => "bool",
        })
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Basic(b) => write!(f, "{b}"),
            TypeExpr::Flow(b) => write!(f, "Flow[{b}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Atom {
    Var(Ident),
    Int(i64),
    Bool(bool),
    /// Runtime only: a future identifier substituted by a reduction rule.
    Fut(FutureId),
}

impl Atom {
    pub fn var(name: &str) -> Atom {
        Atom::Var(name.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Le,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 8] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Eq,
        BinOp::Lt,
        BinOp::Le,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Operator signatures: `(left, right) -> result`. `==` is overloaded on
    /// int and bool.
    pub fn signatures(self) -> &'static [(BaseType, BaseType, BaseType)] {
        use BaseType::*;
        match self {
            BinOp::Add | BinOp::Sub | BinOp::Mul => &[(Int, Int, Int)],
            BinOp::Lt | BinOp::Le => &[(Int, Int, Bool)],
            BinOp::Eq => &[(Int, Int, Bool), (Bool, Bool, Bool)],
            BinOp::And | BinOp::Or => &[(Bool, Bool, Bool)],
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Expr {
    Atom(Atom),
    BinOp(Atom, BinOp, Atom),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rhs {
    Expr(Expr),
    SyncCall(Ident, Vec<Atom>),
    AsyncCall(Ident, Vec<Atom>),
    GetStar(Atom),
}

impl Rhs {
    pub fn atom(a: Atom) -> Rhs {
        Rhs::Expr(Expr::Atom(a))
    }
}

/// Source position attached to statements for diagnostics.
///
/// Spans never take part in equality, ordering or hashing: two statements
/// that differ only in where they were written are the same statement.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }

    pub fn is_known(&self) -> bool {
        self.line > 0
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Span) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, _: &Span) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Stmt {
    Skip,
    Assign {
        target: Ident,
        rhs: Rhs,
        #[serde(skip)]
        span: Span,
    },
    If {
        cond: Atom,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
        #[serde(skip)]
        span: Span,
    },
    Seq(Box<Stmt>, Box<Stmt>),
    Return {
        value: Atom,
        #[serde(skip)]
        span: Span,
    },
    ForwardStar {
        value: Atom,
        #[serde(skip)]
        span: Span,
    },
}

impl Stmt {
    pub fn assign(target: &str, rhs: Rhs) -> Stmt {
        Stmt::Assign {
            target: target.to_string(),
            rhs,
            span: Span::default(),
        }
    }

    pub fn ret(value: Atom) -> Stmt {
        Stmt::Return {
            value,
            span: Span::default(),
        }
    }

    pub fn forward(value: Atom) -> Stmt {
        Stmt::ForwardStar {
            value,
            span: Span::default(),
        }
    }

    pub fn if_else(cond: Atom, then_branch: Stmt, else_branch: Stmt) -> Stmt {
        Stmt::If {
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
            span: Span::default(),
        }
    }

    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        Stmt::Seq(Box::new(first), Box::new(second))
    }

    /// Right-nested sequence of `stmts`; an empty list is `skip`.
    pub fn seq_of(stmts: Vec<Stmt>) -> Stmt {
        let mut iter = stmts.into_iter().rev();
        let Some(mut acc) = iter.next() else {
            return Stmt::Skip;
        };
        for s in iter {
            acc = Stmt::seq(s, acc);
        }
        acc
    }

    pub fn span(&self) -> Span {
        match self {
            Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::Return { span, .. }
            | Stmt::ForwardStar { span, .. } => *span,
            Stmt::Skip => Span::default(),
            Stmt::Seq(first, _) => first.span(),
        }
    }

    /// The non-sequence statements of `self`, in execution order.
    /// Branches of `if` are not descended into.
    pub fn leaves(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        collect_leaves(self, &mut out);
        out
    }

    /// Splits a normal-form statement `s'; s''` into its head and tail.
    /// A statement that is not a sequence is its own head with an empty
    /// (`None`) tail.
    pub fn split_head(&self) -> (&Stmt, Option<&Stmt>) {
        match self {
            Stmt::Seq(first, rest) => (first, Some(rest)),
            other => (other, None),
        }
    }

    /// Applies `f` to every future identifier occurring in `self`.
    pub fn map_futures(&self, f: &impl Fn(FutureId) -> FutureId) -> Stmt {
        let atom = |a: &Atom| match a {
            Atom::Fut(id) => Atom::Fut(f(*id)),
            other => other.clone(),
        };
        match self {
            Stmt::Skip => Stmt::Skip,
            Stmt::Assign { target, rhs, span } => Stmt::Assign {
                target: target.clone(),
                rhs: match rhs {
                    Rhs::Expr(Expr::Atom(a)) => Rhs::Expr(Expr::Atom(atom(a))),
                    Rhs::Expr(Expr::BinOp(l, op, r)) => {
                        Rhs::Expr(Expr::BinOp(atom(l), *op, atom(r)))
                    }
                    Rhs::SyncCall(m, args) => {
                        Rhs::SyncCall(m.clone(), args.iter().map(atom).collect())
                    }
                    Rhs::AsyncCall(m, args) => {
                        Rhs::AsyncCall(m.clone(), args.iter().map(atom).collect())
                    }
                    Rhs::GetStar(a) => Rhs::GetStar(atom(a)),
                },
                span: *span,
            },
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            } => Stmt::If {
                cond: atom(cond),
                then_branch: Box::new(then_branch.map_futures(f)),
                else_branch: Box::new(else_branch.map_futures(f)),
                span: *span,
            },
            Stmt::Seq(a, b) => Stmt::seq(a.map_futures(f), b.map_futures(f)),
            Stmt::Return { value, span } => Stmt::Return {
                value: atom(value),
                span: *span,
            },
            Stmt::ForwardStar { value, span } => Stmt::ForwardStar {
                value: atom(value),
                span: *span,
            },
        }
    }

    pub fn contains_forward(&self) -> bool {
        match self {
            Stmt::ForwardStar { .. } => true,
            Stmt::Seq(a, b) => a.contains_forward() || b.contains_forward(),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => then_branch.contains_forward() || else_branch.contains_forward(),
            _ => false,
        }
    }
}

fn collect_leaves<'a>(s: &'a Stmt, out: &mut Vec<&'a Stmt>) {
    match s {
        Stmt::Seq(a, b) => {
            collect_leaves(a, out);
            collect_leaves(b, out);
        }
        other => out.push(other),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub enum Dialect {
    #[default]
    DeF,
    DeFPlusF,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::DeF => "def",
            Dialect::DeFPlusF => "def+f",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunDef {
    pub return_type: TypeExpr,
    pub name: Ident,
    pub params: Vec<(Ident, TypeExpr)>,
    pub locals: Vec<(Ident, TypeExpr)>,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub globals: Vec<(Ident, TypeExpr)>,
    pub functions: Vec<FunDef>,
    pub main_locals: Vec<(Ident, TypeExpr)>,
    pub main_body: Stmt,
    pub dialect: Dialect,
}

/// Name under which the main body is known to the runtime and the
/// typechecker. It is a reserved word, so no user function can clash.
pub const MAIN: &str = "main";

/// Declared return type of the main body.
pub const MAIN_RETURN: TypeExpr = TypeExpr::FLOW_INT;

pub const RESERVED: &[&str] = &[
    "skip", "if", "else", "return", "forward", "get", "true", "false", "int", "bool", "Flow",
    "fun", "main",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Declared return type of `name`, including the main body.
    pub fn return_type(&self, name: &str) -> Option<TypeExpr> {
        if name == MAIN {
            Some(MAIN_RETURN)
        } else {
            self.function(name).map(|f| f.return_type)
        }
    }

    /// Declared type of a variable in the scope of function `fn_name`
    /// (params and locals shadow globals).
    pub fn var_type(&self, fn_name: &str, var: &str) -> Option<TypeExpr> {
        let scoped = if fn_name == MAIN {
            self.main_locals.iter().find(|(n, _)| n == var)
        } else {
            self.function(fn_name).and_then(|f| {
                f.params
                    .iter()
                    .chain(f.locals.iter())
                    .find(|(n, _)| n == var)
            })
        };
        scoped
            .or_else(|| self.globals.iter().find(|(n, _)| n == var))
            .map(|(_, t)| *t)
    }

    pub fn uses_forward(&self) -> bool {
        self.main_body.contains_forward()
            || self.functions.iter().any(|f| f.body.contains_forward())
    }
}

/// Rewrites `s` into normal form: a right-associated sequence whose head is
/// never a sequence, where the final statement is followed by an explicit
/// `skip` unless it already is one. `if` branches are normalized
/// recursively. Leading `skip`s are kept.
pub fn normalize(s: &Stmt) -> Stmt {
    let mut flat = Vec::new();
    flatten_into(s, &mut flat);
    if flat.last() != Some(&Stmt::Skip) {
        flat.push(Stmt::Skip);
    }
    Stmt::seq_of(flat)
}

fn flatten_into(s: &Stmt, out: &mut Vec<Stmt>) {
    match s {
        Stmt::Seq(a, b) => {
            flatten_into(a, out);
            flatten_into(b, out);
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            span,
        } => out.push(Stmt::If {
            cond: cond.clone(),
            then_branch: Box::new(normalize(then_branch)),
            else_branch: Box::new(normalize(else_branch)),
            span: *span,
        }),
        leaf => out.push(leaf.clone()),
    }
}

pub fn normalize_program(p: &Program) -> Program {
    Program {
        globals: p.globals.clone(),
        functions: p
            .functions
            .iter()
            .map(|f| FunDef {
                body: normalize(&f.body),
                ..f.clone()
            })
            .collect(),
        main_locals: p.main_locals.clone(),
        main_body: normalize(&p.main_body),
        dialect: p.dialect,
    }
}
