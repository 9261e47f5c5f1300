//! Lexer and recursive-descent parser for `.def` sources.
//!
//! ```text
//! program := pragma? (vardecl ";")* fundef* "{" (vardecl ";")* stmtseq "}"
//! pragma  := "#dialect" ("def" | "def+f")
//! vardecl := type ident
//! type    := "int" | "bool" | "Flow" "[" ("int" | "bool") "]"
//! fundef  := "fun" type ident "(" (type ident ("," type ident)*)? ")"
//!            "{" (vardecl ";")* stmtseq "}"
//! stmtseq := stmt (";" stmt)*
//! stmt    := "skip" | ident "=" rhs | "return" atom | "forward*" atom
//!          | "if" atom "{" stmtseq "}" "else" "{" stmtseq "}"
//! rhs     := atom op atom | ident "(" args ")" | "!" ident "(" args ")"
//!          | "get*" atom | atom
//! atom    := ident | integer | "true" | "false"
//! ```
//!
//! `--` starts a comment running to the end of the line.

use std::fmt;

use crate::syntax::{
    is_reserved, normalize_program, Atom, BaseType, BinOp, Dialect, Expr, FunDef, Program, Rhs,
    Span, Stmt, TypeExpr,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    Skip,
    If,
    Else,
    Return,
    ForwardStar,
    GetStar,
    True,
    False,
    IntTy,
    BoolTy,
    Flow,
    Fun,
    Pragma,
    // punctuation
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Assign,
    Bang,
    Op(BinOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(x) => format!("identifier `{x}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Skip => "`skip`".into(),
            Tok::If => "`if`".into(),
            Tok::Else => "`else`".into(),
            Tok::Return => "`return`".into(),
            Tok::ForwardStar => "`forward*`".into(),
            Tok::GetStar => "`get*`".into(),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::IntTy => "`int`".into(),
            Tok::BoolTy => "`bool`".into(),
            Tok::Flow => "`Flow`".into(),
            Tok::Fun => "`fun`".into(),
            Tok::Pragma => "`#dialect`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Op(op) => format!("`{op}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    let err = |line, col, message: String| ParseError {
        line,
        column: col,
        message,
        expected: vec![],
    };

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut col);
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i, &mut col);
            }
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<i64>().map_err(|_| {
                err(
                    span.line,
                    span.col,
                    format!("integer literal `{text}` out of range"),
                )
            })?;
            tokens.push(Token {
                tok: Tok::Int(n),
                span,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            let starred = chars.get(i) == Some(&'*');
            let tok = match word.as_str() {
                "forward" if starred => {
                    advance(1, &mut i, &mut col);
                    Tok::ForwardStar
                }
                "get" if starred => {
                    advance(1, &mut i, &mut col);
                    Tok::GetStar
                }
                "skip" => Tok::Skip,
                "if" => Tok::If,
                "else" => Tok::Else,
                "return" => Tok::Return,
                "true" => Tok::True,
                "false" => Tok::False,
                "int" => Tok::IntTy,
                "bool" => Tok::BoolTy,
                "Flow" => Tok::Flow,
                "fun" => Tok::Fun,
                _ => Tok::Ident(word),
            };
            tokens.push(Token { tok, span });
            continue;
        }
        if c == '#' {
            let start = i;
            advance(1, &mut i, &mut col);
            while i < chars.len() && chars[i].is_alphabetic() {
                advance(1, &mut i, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            if word != "#dialect" {
                return Err(err(
                    span.line,
                    span.col,
                    format!("unknown directive `{word}`"),
                ));
            }
            tokens.push(Token {
                tok: Tok::Pragma,
                span,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, len) = match two.as_str() {
            "==" => (Tok::Op(BinOp::Eq), 2),
            "<=" => (Tok::Op(BinOp::Le), 2),
            "&&" => (Tok::Op(BinOp::And), 2),
            "||" => (Tok::Op(BinOp::Or), 2),
            _ => match c {
                ';' => (Tok::Semi, 1),
                ',' => (Tok::Comma, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '=' => (Tok::Assign, 1),
                '!' => (Tok::Bang, 1),
                '+' => (Tok::Op(BinOp::Add), 1),
                '-' => (Tok::Op(BinOp::Sub), 1),
                '*' => (Tok::Op(BinOp::Mul), 1),
                '<' => (Tok::Op(BinOp::Lt), 1),
                other => {
                    return Err(err(
                        span.line,
                        span.col,
                        format!("unexpected character `{other}`"),
                    ))
                }
            },
        };
        advance(len, &mut i, &mut col);
        tokens.push(Token { tok, span });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span::new(line, col),
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Dialect in force when `forward*` is encountered; `None` means
    /// inferred from the source.
    forced: Option<Dialect>,
    saw_forward: bool,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let span = self.span();
        ParseError {
            line: span.line,
            column: span.col,
            message: format!("unexpected {}", self.peek().describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&tok.describe()]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                if is_reserved(&x) {
                    let span = self.span();
                    return Err(ParseError {
                        line: span.line,
                        column: span.col,
                        message: format!("`{x}` is a reserved word"),
                        expected: vec!["identifier".into()],
                    });
                }
                self.bump();
                Ok(x)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn is_type_start(&self) -> bool {
        matches!(self.peek(), Tok::IntTy | Tok::BoolTy | Tok::Flow)
    }

    fn base_type(&mut self) -> PResult<BaseType> {
        match self.peek() {
            Tok::IntTy => {
                self.bump();
                Ok(BaseType::Int)
            }
            Tok::BoolTy => {
                self.bump();
                Ok(BaseType::Bool)
            }
            _ => Err(self.error(&["`int`", "`bool`"])),
        }
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        if *self.peek() == Tok::Flow {
            self.bump();
            self.expect(Tok::LBracket)?;
            let b = self.base_type()?;
            self.expect(Tok::RBracket)?;
            Ok(TypeExpr::Flow(b))
        } else if self.is_type_start() {
            Ok(TypeExpr::Basic(self.base_type()?))
        } else {
            Err(self.error(&["type"]))
        }
    }

    fn var_decls(&mut self) -> PResult<Vec<(String, TypeExpr)>> {
        let mut decls = Vec::new();
        while self.is_type_start() {
            let ty = self.type_expr()?;
            let name = self.ident()?;
            self.expect(Tok::Semi)?;
            decls.push((name, ty));
        }
        Ok(decls)
    }

    fn atom(&mut self) -> PResult<Atom> {
        match self.peek().clone() {
            Tok::Ident(_) => Ok(Atom::Var(self.ident()?)),
            Tok::Int(n) => {
                self.bump();
                Ok(Atom::Int(n))
            }
            Tok::Op(BinOp::Sub) => {
                if let Tok::Int(n) = *self.peek_at(1) {
                    self.bump();
                    self.bump();
                    Ok(Atom::Int(-n))
                } else {
                    Err(self.error(&["atom"]))
                }
            }
            Tok::True => {
                self.bump();
                Ok(Atom::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Atom::Bool(false))
            }
            _ => Err(self.error(&["identifier", "integer", "`true`", "`false`"])),
        }
    }

    fn args(&mut self) -> PResult<Vec<Atom>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.atom()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.atom()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn rhs(&mut self) -> PResult<Rhs> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let m = self.ident()?;
                Ok(Rhs::AsyncCall(m, self.args()?))
            }
            Tok::GetStar => {
                self.bump();
                Ok(Rhs::GetStar(self.atom()?))
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => {
                let m = self.ident()?;
                Ok(Rhs::SyncCall(m, self.args()?))
            }
            _ => {
                let left = self.atom()?;
                if let Tok::Op(op) = *self.peek() {
                    self.bump();
                    let right = self.atom()?;
                    Ok(Rhs::Expr(Expr::BinOp(left, op, right)))
                } else {
                    Ok(Rhs::Expr(Expr::Atom(left)))
                }
            }
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Skip => {
                self.bump();
                Ok(Stmt::Skip)
            }
            Tok::Return => {
                self.bump();
                Ok(Stmt::Return {
                    value: self.atom()?,
                    span,
                })
            }
            Tok::ForwardStar => {
                if self.forced == Some(Dialect::DeF) {
                    return Err(ParseError {
                        line: span.line,
                        column: span.col,
                        message: "`forward*` is not part of the DeF dialect".into(),
                        expected: vec![],
                    });
                }
                self.saw_forward = true;
                self.bump();
                Ok(Stmt::ForwardStar {
                    value: self.atom()?,
                    span,
                })
            }
            Tok::If => {
                self.bump();
                let cond = self.atom()?;
                self.expect(Tok::LBrace)?;
                let then_branch = self.stmt_seq()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Else)?;
                self.expect(Tok::LBrace)?;
                let else_branch = self.stmt_seq()?;
                self.expect(Tok::RBrace)?;
                Ok(Stmt::If {
                    cond,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    span,
                })
            }
            Tok::Ident(_) => {
                let target = self.ident()?;
                self.expect(Tok::Assign)?;
                let rhs = self.rhs()?;
                Ok(Stmt::Assign { target, rhs, span })
            }
            _ => Err(self.error(&["`skip`", "assignment", "`if`", "`return`", "`forward*`"])),
        }
    }

    fn stmt_seq(&mut self) -> PResult<Stmt> {
        let mut stmts = vec![self.stmt()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            stmts.push(self.stmt()?);
        }
        Ok(Stmt::seq_of(stmts))
    }

    fn fundef(&mut self) -> PResult<FunDef> {
        let span = self.expect(Tok::Fun)?;
        let return_type = self.type_expr()?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let ty = self.type_expr()?;
                params.push((self.ident()?, ty));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let locals = self.var_decls()?;
        let body = self.stmt_seq()?;
        self.expect(Tok::RBrace)?;
        Ok(FunDef {
            return_type,
            name,
            params,
            locals,
            body,
            span,
        })
    }

    fn program(&mut self) -> Result<Program, Vec<ParseError>> {
        let mut errors = Vec::new();
        if *self.peek() == Tok::Pragma {
            self.bump();
            let dialect = match self.peek().clone() {
                Tok::Ident(ref w) if w == "def" => {
                    self.bump();
                    if *self.peek() == Tok::Op(BinOp::Add) {
                        self.bump();
                        match self.peek() {
                            Tok::Ident(w) if w == "f" => {
                                self.bump();
                                Dialect::DeFPlusF
                            }
                            _ => return Err(vec![self.error(&["`f`"])]),
                        }
                    } else {
                        Dialect::DeF
                    }
                }
                _ => return Err(vec![self.error(&["`def`", "`def+f`"])]),
            };
            // An explicit command-line override wins over the pragma.
            if self.forced.is_none() {
                self.forced = Some(dialect);
            }
        }
        let globals = self.var_decls().map_err(|e| vec![e])?;
        let mut functions: Vec<FunDef> = Vec::new();
        while *self.peek() == Tok::Fun {
            let f = self.fundef().map_err(|e| vec![e])?;
            if functions.iter().any(|g| g.name == f.name) {
                errors.push(ParseError {
                    line: f.span.line,
                    column: f.span.col,
                    message: format!("duplicate definition of function `{}`", f.name),
                    expected: vec![],
                });
            }
            functions.push(f);
        }
        if *self.peek() != Tok::LBrace {
            let mut e = self.error(&["`fun`", "`{`"]);
            if self.is_type_start() {
                e.message = "global declarations must precede function definitions".into();
            }
            errors.push(e);
            return Err(errors);
        }
        self.bump();
        let main_locals = self.var_decls().map_err(|e| vec![e])?;
        let main_body = self.stmt_seq().map_err(|e| vec![e])?;
        self.expect(Tok::RBrace).map_err(|e| vec![e])?;
        if *self.peek() != Tok::Eof {
            errors.push(self.error(&["end of input"]));
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let dialect = match self.forced {
            Some(d) => d,
            None if self.saw_forward => Dialect::DeFPlusF,
            None => Dialect::DeF,
        };
        Ok(normalize_program(&Program {
            globals,
            functions,
            main_locals,
            main_body,
            dialect,
        }))
    }
}

/// Parses a whole program. The dialect is DeF+F if the source contains
/// `forward*` or a `#dialect def+f` pragma. The returned program is in
/// normal form.
pub fn parse_program(source: &str) -> Result<Program, Vec<ParseError>> {
    parse_program_with(source, None)
}

/// Like [`parse_program`], with an optional dialect override taking
/// precedence over the pragma. Forcing DeF makes `forward*` a syntax error.
pub fn parse_program_with(
    source: &str,
    dialect: Option<Dialect>,
) -> Result<Program, Vec<ParseError>> {
    let tokens = lex(source).map_err(|e| vec![e])?;
    Parser {
        tokens,
        pos: 0,
        forced: dialect,
        saw_forward: false,
    }
    .program()
}

/// Parses a single right-hand side.
pub fn parse_rhs(source: &str) -> Result<Rhs, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        forced: None,
        saw_forward: false,
    };
    let rhs = p.rhs()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error(&["end of input"]));
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::normalize;

    #[test]
    fn minimal_program() {
        let p = parse_program("int x; { x = 1; return x }").unwrap();
        assert_eq!(p.globals, vec![("x".to_string(), TypeExpr::INT)]);
        assert!(p.functions.is_empty());
        assert_eq!(
            p.main_body,
            normalize(&Stmt::seq(
                Stmt::assign("x", Rhs::atom(Atom::Int(1))),
                Stmt::ret(Atom::var("x"))
            ))
        );
        assert_eq!(p.dialect, Dialect::DeF);
    }

    #[test]
    fn delegating_foo() {
        let src = "fun int bar(int t) { return t }
            fun Flow[int] foo(Flow[int] x) { int t; Flow[int] r; t = get* x; t = t + 1; r = !bar(t); return r }
            { return 0 }";
        let p = parse_program(src).unwrap();
        assert_eq!(p.dialect, Dialect::DeF);
        let foo = p.function("foo").unwrap();
        assert_eq!(foo.return_type, TypeExpr::FLOW_INT);
        assert_eq!(foo.params, vec![("x".to_string(), TypeExpr::FLOW_INT)]);
        assert_eq!(foo.body.leaves().len(), 5);
    }

    #[test]
    fn dialect_gating() {
        let src = "{ forward* 1 }";
        assert_eq!(parse_program(src).unwrap().dialect, Dialect::DeFPlusF);
        let errs = parse_program_with(src, Some(Dialect::DeF)).unwrap_err();
        assert_eq!((errs[0].line, errs[0].column), (1, 3));
        let errs = parse_program("#dialect def\n{ forward* 1 }").unwrap_err();
        assert_eq!(errs[0].line, 2);
        assert_eq!(
            parse_program("#dialect def+f\n{ return 1 }")
                .unwrap()
                .dialect,
            Dialect::DeFPlusF
        );
    }

    #[test]
    fn rhs_forms() {
        assert_eq!(
            parse_rhs("!foo(1, x)").unwrap(),
            Rhs::AsyncCall("foo".into(), vec![Atom::Int(1), Atom::var("x")])
        );
        assert_eq!(parse_rhs("get* y").unwrap(), Rhs::GetStar(Atom::var("y")));
        assert_eq!(
            parse_rhs("x + 1").unwrap(),
            Rhs::Expr(Expr::BinOp(Atom::var("x"), BinOp::Add, Atom::Int(1)))
        );
        assert_eq!(parse_rhs("f()").unwrap(), Rhs::SyncCall("f".into(), vec![]));
        assert_eq!(parse_rhs("-3").unwrap(), Rhs::atom(Atom::Int(-3)));
        assert_eq!(
            parse_rhs("a <= b").unwrap(),
            Rhs::Expr(Expr::BinOp(Atom::var("a"), BinOp::Le, Atom::var("b")))
        );
    }

    #[test]
    fn nested_expressions_are_rejected() {
        let err = parse_rhs("x + 1 + 2").unwrap_err();
        assert_eq!(err.column, 7);
    }

    #[test]
    fn comments_are_ignored() {
        let p = parse_program("-- header\n{ return 0 -- done\n}").unwrap();
        assert_eq!(p.main_body.leaves().len(), 2);
    }

    #[test]
    fn duplicate_functions() {
        let errs = parse_program("fun int f() { return 1 } fun int f() { return 2 } { return 0 }")
            .unwrap_err();
        assert!(errs[0].message.contains("duplicate"));
        assert_eq!(errs[0].column, 26);
    }

    #[test]
    fn lexical_errors_have_positions() {
        let errs = parse_program("{\n  x = 1 $ 2 }").unwrap_err();
        assert_eq!((errs[0].line, errs[0].column), (2, 9));
    }

    #[test]
    fn reserved_words_are_not_identifiers() {
        assert!(parse_program("{ main = 1; return 0 }").is_err());
        assert!(parse_program("int get; { return 0 }").is_err());
    }

    #[test]
    fn spans_point_at_statements() {
        let p = parse_program("{\n  skip;\n  return 0\n}").unwrap();
        let leaves = p.main_body.leaves();
        assert_eq!((leaves[1].span().line, leaves[1].span().col), (3, 3));
    }
}
