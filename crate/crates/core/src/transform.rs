//! Forward elimination: the DeF+F to DeF translation replacing every
//! `forward* v` by `return v`.

use thiserror::Error;

use crate::syntax::{Dialect, FunDef, Ident, Program, Span, Stmt};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    /// A `forward*` in a function whose declared return type is a base
    /// type. Such programs only typecheck in flexible mode, where a
    /// synchronous forward waits on the forwarded future; turning it into
    /// a return would change which programs block.
    #[error("{}:{}: `{function}` forwards but returns {return_type}; forward elimination needs a Flow return type", span.line, span.col)]
    BaseReturningForward {
        function: Ident,
        return_type: String,
        span: Span,
    },
}

pub fn fwd_elim_stmt(s: &Stmt) -> Stmt {
    match s {
        Stmt::ForwardStar { value, span } => Stmt::Return {
            value: value.clone(),
            span: *span,
        },
        Stmt::Seq(a, b) => Stmt::seq(fwd_elim_stmt(a), fwd_elim_stmt(b)),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            span,
        } => Stmt::If {
            cond: cond.clone(),
            then_branch: Box::new(fwd_elim_stmt(then_branch)),
            else_branch: Box::new(fwd_elim_stmt(else_branch)),
            span: *span,
        },
        other => other.clone(),
    }
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

pub fn fwd_elim(p: &Program) -> Result<Program, TransformError> {
    for f in &p.functions {
        if f.return_type.is_flow() {
            continue;
        }
        if let Some(span) = first_forward(&f.body) {
            return Err(TransformError::BaseReturningForward {
                function: f.name.clone(),
                return_type: f.return_type.to_string(),
                span,
            });
        }
    }
    Ok(Program {
        globals: p.globals.clone(),
        functions: p
            .functions
            .iter()
            .map(|f| FunDef {
                body: fwd_elim_stmt(&f.body),
                ..f.clone()
            })
            .collect(),
        main_locals: p.main_locals.clone(),
        main_body: fwd_elim_stmt(&p.main_body),
        dialect: Dialect::DeF,
    })
}
