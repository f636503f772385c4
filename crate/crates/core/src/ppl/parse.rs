//! Lexer, recursive-descent parser and CFA lowering for the program text.
//!
//! ```text
//! prog  := stmt*
//! stmt  := "skip;" | id ":=" expr ";" | id "~" "uniform(" num "," num ");"
//!        | "assume(" pred ");" | "if(" pred ")" block "else" block
//!        | "choice" block "or" block | "accept;" | "reject;"
//! block := "{" stmt* "}"
//! ```

use crate::error::{Error, Result};
use crate::formula::{Cmp, Formula, Term};
use crate::rat::{self, Rat};

use super::{Edge, Program, Stmt};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Value and whether it was written with a decimal point.
    Num(Rat, bool),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 21] = [
    ":=", "==", "!=", "<=", ">=", "&&", "||", ";", "~", "(", ")", "{", "}", ",", "+", "-", "*", "<", ">", "=", "!",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let bump = |i: &mut usize, col: &mut usize, n: usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(&mut i, &mut col, 1);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let n = j - i;
            bump(&mut i, &mut col, n);
            out.push(Token {
                tok: Tok::Ident(word),
                line: start.0,
                col: start.1,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            let v = rat::parse(&word).ok_or_else(|| Error::parse(line, col, format!("bad number `{word}`")))?;
            let n = j - i;
            bump(&mut i, &mut col, n);
            out.push(Token {
                tok: Tok::Num(v, word.contains('.')),
                line: start.0,
                col: start.1,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                bump(&mut i, &mut col, s.len());
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: start.0,
                    col: start.1,
                });
            }
            None => return Err(Error::parse(line, col, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

/// Surface syntax, before lowering.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Basic(Stmt),
    If(Formula, Vec<Ast>, Vec<Ast>),
    Choice(Vec<Ast>, Vec<Ast>),
    Accept,
    Reject,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

const KEYWORDS: [&str; 11] = [
    "skip", "assume", "if", "else", "choice", "or", "accept", "reject", "uniform", "true", "false",
];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(Error::parse(l, c, msg))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == w)
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<()> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{w}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(x)) if !KEYWORDS.contains(&x.as_str()) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn number(&mut self) -> Result<(Rat, bool)> {
        let neg = self.is_sym("-");
        if neg {
            self.pos += 1;
        }
        match self.peek() {
            Some(Tok::Num(v, dec)) => {
                let out = (if neg { -v.clone() } else { v.clone() }, *dec);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err("expected a number"),
        }
    }

    fn program(&mut self) -> Result<Vec<Ast>> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Vec<Ast>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.peek().is_none() {
                return self.err("unclosed block");
            }
            out.push(self.stmt()?);
        }
        self.pos += 1;
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Ast> {
        for (kw, ast) in [("skip", Ast::Basic(Stmt::Skip)), ("accept", Ast::Accept), ("reject", Ast::Reject)] {
            if self.is_word(kw) {
                self.pos += 1;
                self.expect_sym(";")?;
                return Ok(ast);
            }
        }
        if self.is_word("assume") {
            self.pos += 1;
            self.expect_sym("(")?;
            let p = self.pred()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(Ast::Basic(Stmt::Assume(p)));
        }
        if self.is_word("if") {
            self.pos += 1;
            self.expect_sym("(")?;
            let p = self.pred()?;
            self.expect_sym(")")?;
            let a = self.block()?;
            self.expect_word("else")?;
            let b = self.block()?;
            return Ok(Ast::If(p, a, b));
        }
        if self.is_word("choice") {
            self.pos += 1;
            let a = self.block()?;
            self.expect_word("or")?;
            let b = self.block()?;
            return Ok(Ast::Choice(a, b));
        }
        let x = self.ident()?;
        if self.is_sym(":=") {
            self.pos += 1;
            let e = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Ast::Basic(Stmt::Assign(x, e)));
        }
        if self.is_sym("~") {
            self.pos += 1;
            self.expect_word("uniform")?;
            self.expect_sym("(")?;
            let (lo, d1) = self.number()?;
            self.expect_sym(",")?;
            let (hi, d2) = self.number()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            let real = d1 || d2;
            if lo > hi {
                return self.err("uniform bounds out of order");
            }
            if !real && !(rat::is_int(&lo) && rat::is_int(&hi)) {
                return self.err("integer uniform needs integer bounds");
            }
            return Ok(Ast::Basic(Stmt::Sample { var: x, lo, hi, real }));
        }
        self.err("expected `:=` or `~`")
    }

    fn pred(&mut self) -> Result<Formula> {
        let mut parts = vec![self.conj()?];
        while self.is_sym("||") {
            self.pos += 1;
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary_pred()?];
        while self.is_sym("&&") {
            self.pos += 1;
            parts.push(self.unary_pred()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary_pred(&mut self) -> Result<Formula> {
        if self.is_sym("!") {
            self.pos += 1;
            return Ok(Formula::not(self.unary_pred()?));
        }
        if self.is_word("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.is_word("false") {
            self.pos += 1;
            return Ok(Formula::False);
        }
        if self.is_sym("(") {
            // Either a parenthesized predicate or an arithmetic operand.
            let save = self.pos;
            self.pos += 1;
            if let Ok(p) = self.pred() {
                if self.is_sym(")") {
                    self.pos += 1;
                    if !self.at_cmp() {
                        return Ok(p);
                    }
                }
            }
            self.pos = save;
        }
        let l = self.expr()?;
        let c = match self.peek() {
            Some(Tok::Sym("<=")) => Cmp::Le,
            Some(Tok::Sym("<")) => Cmp::Lt,
            Some(Tok::Sym("=")) | Some(Tok::Sym("==")) => Cmp::Eq,
            Some(Tok::Sym(">=")) => Cmp::Ge,
            Some(Tok::Sym(">")) => Cmp::Gt,
            Some(Tok::Sym("!=")) => Cmp::Ne,
            _ => return self.err("expected a comparison"),
        };
        self.pos += 1;
        let r = self.expr()?;
        Ok(Formula::atom(c, l, r))
    }

    fn at_cmp(&self) -> bool {
        ["<=", "<", "=", "==", ">=", ">", "!=", "+", "-", "*"].iter().any(|s| self.is_sym(s))
    }

    fn expr(&mut self) -> Result<Term> {
        let mut parts = vec![self.product()?];
        loop {
            if self.is_sym("+") {
                self.pos += 1;
                parts.push(self.product()?);
            } else if self.is_sym("-") {
                self.pos += 1;
                parts.push(Term::Neg(Box::new(self.product()?)));
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Term::Add(parts) })
    }

    fn product(&mut self) -> Result<Term> {
        let mut parts = vec![self.atom()?];
        while self.is_sym("*") {
            self.pos += 1;
            parts.push(self.atom()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Term::Mul(parts) })
    }

    fn atom(&mut self) -> Result<Term> {
        if self.is_sym("-") {
            self.pos += 1;
            return Ok(match self.atom()? {
                Term::Const(c) => Term::Const(-c),
                t => Term::Neg(Box::new(t)),
            });
        }
        if self.is_sym("(") {
            self.pos += 1;
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if let Some(Tok::Num(v, _)) = self.peek() {
            let v = v.clone();
            self.pos += 1;
            return Ok(Term::Const(v));
        }
        Ok(Term::Var(self.ident()?))
    }
}

pub fn parse_ast(text: &str) -> Result<Vec<Ast>> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (lines, last_col),
    };
    p.program()
}

/// Where control stands while lowering: at a vertex, on edges still
/// waiting for a target, or nowhere after accept/reject.
enum At {
    Vertex(usize),
    Pending(Vec<(usize, Stmt)>),
    Done,
}

struct Builder {
    n: usize,
    edges: Vec<Edge>,
    acc: Option<usize>,
    rej: Option<usize>,
}

impl Builder {
    fn fresh(&mut self) -> usize {
        self.n += 1;
        self.n - 1
    }

    fn vertex(&mut self, at: At) -> Option<usize> {
        match at {
            At::Vertex(v) => Some(v),
            At::Pending(p) => {
                let v = self.fresh();
                self.close(p, v);
                Some(v)
            }
            At::Done => None,
        }
    }

    fn close(&mut self, pending: Vec<(usize, Stmt)>, to: usize) {
        for (from, stmt) in pending {
            self.edges.push(Edge { from, stmt, to });
        }
    }

    fn pending(at: At) -> Vec<(usize, Stmt)> {
        match at {
            At::Vertex(v) => vec![(v, Stmt::Skip)],
            At::Pending(p) => p,
            At::Done => vec![],
        }
    }

    fn seq(&mut self, stmts: &[Ast], mut at: At) -> Result<At> {
        for s in stmts {
            if matches!(at, At::Done) {
                return Err(Error::IllFormed("statement after accept or reject is unreachable".into()));
            }
            at = self.stmt(s, at)?;
        }
        Ok(at)
    }

    fn stmt(&mut self, s: &Ast, at: At) -> Result<At> {
        Ok(match s {
            Ast::Basic(b) => {
                let v = self.vertex(at).expect("reachable");
                At::Pending(vec![(v, b.clone())])
            }
            Ast::Accept | Ast::Reject => {
                let slot = if matches!(s, Ast::Accept) { self.acc } else { self.rej };
                let target = match slot {
                    Some(t) => t,
                    None => {
                        let t = self.fresh();
                        if matches!(s, Ast::Accept) {
                            self.acc = Some(t);
                        } else {
                            self.rej = Some(t);
                        }
                        t
                    }
                };
                let p = Self::pending(at);
                self.close(p, target);
                At::Done
            }
            Ast::If(p, a, b) => {
                let v = self.vertex(at).expect("reachable");
                let ra = self.seq(a, At::Pending(vec![(v, Stmt::Assume(p.clone()))]))?;
                let rb = self.seq(b, At::Pending(vec![(v, Stmt::Assume(Formula::not(p.clone())))]))?;
                self.merge(ra, rb)
            }
            Ast::Choice(a, b) => {
                let v = self.vertex(at).expect("reachable");
                let ra = self.seq(a, At::Vertex(v))?;
                let rb = self.seq(b, At::Vertex(v))?;
                self.merge(ra, rb)
            }
        })
    }

    fn merge(&mut self, a: At, b: At) -> At {
        let mut p = Self::pending(a);
        p.extend(Self::pending(b));
        if p.is_empty() {
            At::Done
        } else {
            At::Pending(p)
        }
    }
}

/// Lowers statements to a CFA. Paths that fall off the end stop at a sink
/// vertex that is neither accepting nor rejecting.
pub fn lower(stmts: &[Ast]) -> Result<Program> {
    let mut b = Builder {
        n: 1,
        edges: Vec::new(),
        acc: None,
        rej: None,
    };
    let end = b.seq(stmts, At::Vertex(0))?;
    if let At::Pending(p) = end {
        let sink = b.fresh();
        b.close(p, sink);
    }
    Program::new(b.n, b.edges, 0, b.acc, b.rej)
}

pub fn parse_program(text: &str) -> Result<Program> {
    lower(&parse_ast(text)?)
}
