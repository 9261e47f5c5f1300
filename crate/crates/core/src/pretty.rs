//! Canonical concrete syntax for programs and statements.

use std::fmt::{self, Write};

use crate::syntax::{Atom, Dialect, Expr, FunDef, Program, Rhs, Stmt, TypeExpr};

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(x) => f.write_str(x),
            Atom::Int(n) => write!(f, "{n}"),
            Atom::Bool(b) => write!(f, "{b}"),
            Atom::Fut(id) => write!(f, "{id}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::BinOp(l, op, r) => write!(f, "{l} {op} {r}"),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Atom]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Expr(e) => write!(f, "{e}"),
            Rhs::SyncCall(m, args) => {
                write!(f, "{m}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Rhs::AsyncCall(m, args) => {
                write!(f, "!{m}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Rhs::GetStar(a) => write!(f, "get* {a}"),
        }
    }
}

/// Single-line rendering, used in traces and diagnostics.
impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Skip => f.write_str("skip"),
            Stmt::Assign { target, rhs, .. } => write!(f, "{target} = {rhs}"),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => write!(f, "if {cond} {{ {then_branch} }} else {{ {else_branch} }}"),
            Stmt::Seq(a, b) => write!(f, "{a}; {b}"),
            Stmt::Return { value, .. } => write!(f, "return {value}"),
            Stmt::ForwardStar { value, .. } => write!(f, "forward* {value}"),
        }
    }
}

/// Statements of a block as they will be printed. A trailing `skip` that
/// normalization would re-insert is left out.
fn printable_leaves(s: &Stmt) -> Vec<&Stmt> {
    let mut leaves = s.leaves();
    let n = leaves.len();
    if n >= 2 && *leaves[n - 1] == Stmt::Skip && *leaves[n - 2] != Stmt::Skip {
        leaves.pop();
    }
    leaves
}

fn write_block(out: &mut String, s: &Stmt, indent: usize) {
    let pad = "  ".repeat(indent);
    let leaves = printable_leaves(s);
    for (i, leaf) in leaves.iter().enumerate() {
        out.push_str(&pad);
        match leaf {
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let _ = writeln!(out, "if {cond} {{");
                write_block(out, then_branch, indent + 1);
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, else_branch, indent + 1);
                out.push_str(&pad);
                out.push('}');
            }
            other => {
                let _ = write!(out, "{other}");
            }
        }
        if i + 1 < leaves.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn write_decls(out: &mut String, decls: &[(String, TypeExpr)], indent: usize) {
    let pad = "  ".repeat(indent);
    for (name, ty) in decls {
        let _ = writeln!(out, "{pad}{ty} {name};");
    }
}

fn write_fun(out: &mut String, f: &FunDef) {
    let params = f
        .params
        .iter()
        .map(|(n, t)| format!("{t} {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "fun {} {}({params}) {{", f.return_type, f.name);
    write_decls(out, &f.locals, 1);
    write_block(out, &f.body, 1);
    out.push_str("}\n");
}

/// Renders `p` in the concrete syntax accepted by the parser. Parsing the
/// result yields `normalize_program(p)`.
pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    if p.dialect == Dialect::DeFPlusF {
        out.push_str("#dialect def+f\n");
    }
    write_decls(&mut out, &p.globals, 0);
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for f in &p.functions {
        write_fun(&mut out, f);
        out.push('\n');
    }
    out.push_str("{\n");
    write_decls(&mut out, &p.main_locals, 1);
    write_block(&mut out, &p.main_body, 1);
    out.push_str("}\n");
    out
}
