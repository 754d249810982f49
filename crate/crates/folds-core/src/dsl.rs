//! Text format for signatures, theories, and models.
//!
//! Three file kinds share one lexer and are told apart by their leading
//! keyword (an optional `format 1` prefix is accepted and ignored):
//!
//! ```text
//! signature cat {
//!   sort O rank 0
//!   sort A rank 1 (d: O, c: O)
//!   sort T rank 2 (t0: A, t1: A, t2: A)
//!     where c t0 = d t1, d t0 = d t2, c t1 = c t2
//! }
//!
//! theory cat_rules on cat {
//!   axiom comp_exists: forall x:O. forall y:O. true
//! }
//!
//! model two of cat {
//!   O() = { x, y }
//!   A(x, y) = { f }
//! }
//! ```
//!
//! Equation paths are generator names, outermost first, so `c t0` applies
//! t0 and then c; they are attached to the sort they start from. Model
//! fibers list cell labels over the generator arguments; labels must be
//! unique within their sort so references stay unambiguous. Connectives
//! bind as ~ then /\ then \/ then -> (right-associative) then <->, and a
//! binder's body extends as far right as possible. `--` starts a comment.

use crate::folds::{Axiom, Formula, Theory};
use crate::sigcore::SigSpec;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DslFile {
    Signature(SigSpec),
    Theory(Theory),
    Model(ModelDecl),
}

/// A parsed model file: fibers of labeled cells over generator arguments,
/// unresolved (labels become cells once a signature is fixed).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModelDecl {
    pub name: String,
    pub sig_name: String,
    pub fibers: Vec<FiberDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberDecl {
    pub sort: String,
    pub args: Vec<String>,
    pub labels: Vec<String>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Assign,
    EqEq,
    Arrow,
    IffSym,
    AndSym,
    OrSym,
    Tilde,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Assign => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::IffSym => "`<->`".into(),
            Tok::AndSym => "`/\\`".into(),
            Tok::OrSym => "`\\/`".into(),
            Tok::Tilde => "`~`".into(),
        }
    }
}

struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let err = |line, col, msg: String| ParseError { line, col, msg };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok, len: usize| {
            out.push(Token {
                tok,
                line: tline,
                col: tcol,
            });
            len
        };
        let advance = match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => 1,
            '-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            '{' => push(Tok::LBrace, 1),
            '}' => push(Tok::RBrace, 1),
            '(' => push(Tok::LParen, 1),
            ')' => push(Tok::RParen, 1),
            ',' => push(Tok::Comma, 1),
            ':' => push(Tok::Colon, 1),
            '.' => push(Tok::Dot, 1),
            '~' => push(Tok::Tilde, 1),
            '=' if bytes.get(i + 1) == Some(&b'=') => push(Tok::EqEq, 2),
            '=' => push(Tok::Assign, 1),
            '<' if src[i..].starts_with("<->") => push(Tok::IffSym, 3),
            '-' if src[i..].starts_with("->") => push(Tok::Arrow, 2),
            '/' if src[i..].starts_with("/\\") => push(Tok::AndSym, 2),
            '\\' if src[i..].starts_with("\\/") => push(Tok::OrSym, 2),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let n: usize = src[start..i]
                    .parse()
                    .map_err(|_| err(tline, tcol, "number is too large".into()))?;
                out.push(Token {
                    tok: Tok::Num(n),
                    line: tline,
                    col: tcol,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    line: tline,
                    col: tcol,
                });
                continue;
            }
            other => return Err(err(line, col, format!("unexpected character `{other}`"))),
        };
        i += advance;
        col += advance;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected {}, found {}", tok.describe(), t.describe());
                self.fail(msg)
            }
            None => self.fail(format!("expected {}, found end of input", tok.describe())),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => {
                let msg = format!("expected {what}, found {}", t.describe());
                self.fail(msg)
            }
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected `{kw}`, found {}", t.describe());
                self.fail(msg)
            }
            None => self.fail(format!("expected `{kw}`, found end of input")),
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_ident() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_num(&mut self, what: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            Some(t) => {
                let msg = format!("expected {what}, found {}", t.describe());
                self.fail(msg)
            }
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.fail(format!(
                "unexpected {} after the closing brace",
                self.toks[self.pos].tok.describe()
            ))
        }
    }
}

pub fn parse(src: &str) -> Result<DslFile, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    if p.eat_kw("format") {
        let v = p.expect_num("format version")?;
        if v != 1 {
            return p.fail(format!("unsupported format version {v}"));
        }
    }
    match p.peek_ident() {
        Some("signature") => parse_signature_body(&mut p).map(DslFile::Signature),
        Some("theory") => parse_theory_body(&mut p).map(DslFile::Theory),
        Some("model") => parse_model_body(&mut p).map(DslFile::Model),
        _ => p.fail("expected `signature`, `theory`, or `model`"),
    }
}

pub fn parse_signature(src: &str) -> Result<SigSpec, ParseError> {
    match parse(src)? {
        DslFile::Signature(s) => Ok(s),
        _ => Err(ParseError {
            line: 1,
            col: 1,
            msg: "expected a signature file".into(),
        }),
    }
}

pub fn parse_theory(src: &str) -> Result<Theory, ParseError> {
    match parse(src)? {
        DslFile::Theory(t) => Ok(t),
        _ => Err(ParseError {
            line: 1,
            col: 1,
            msg: "expected a theory file".into(),
        }),
    }
}

pub fn parse_model(src: &str) -> Result<ModelDecl, ParseError> {
    match parse(src)? {
        DslFile::Model(m) => Ok(m),
        _ => Err(ParseError {
            line: 1,
            col: 1,
            msg: "expected a model file".into(),
        }),
    }
}

struct RawEq {
    sort: usize,
    lhs: Vec<(String, usize, usize)>,
    rhs: Vec<(String, usize, usize)>,
}

fn parse_signature_body(p: &mut Parser) -> Result<SigSpec, ParseError> {
    p.expect_kw("signature")?;
    let name = p.expect_ident("signature name")?;
    p.expect(Tok::LBrace)?;
    let mut sorts: Vec<(String, usize)> = Vec::new();
    // (name, dom sort, cod sort name with position)
    let mut gens: Vec<(String, usize, (String, usize, usize))> = Vec::new();
    let mut raw_eqs: Vec<RawEq> = Vec::new();
    while p.eat_kw("sort") {
        let sort_name = p.expect_ident("sort name")?;
        p.expect_kw("rank")?;
        let rank = p.expect_num("rank")?;
        let sort_idx = sorts.len();
        sorts.push((sort_name, rank));
        if p.peek() == Some(&Tok::LParen) {
            p.next();
            loop {
                let gen_name = p.expect_ident("generator name")?;
                p.expect(Tok::Colon)?;
                let (line, col) = p.here();
                let target = p.expect_ident("target sort")?;
                gens.push((gen_name, sort_idx, (target, line, col)));
                match p.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return p.fail("expected `,` or `)` in the generator list");
                    }
                }
            }
        }
        if p.eat_kw("where") {
            loop {
                let lhs = parse_path(p)?;
                p.expect(Tok::Assign)?;
                let rhs = parse_path(p)?;
                raw_eqs.push(RawEq {
                    sort: sort_idx,
                    lhs,
                    rhs,
                });
                if p.peek() == Some(&Tok::Comma) {
                    p.next();
                } else {
                    break;
                }
            }
        }
    }
    p.expect(Tok::RBrace)?;
    p.expect_end()?;

    let sort_idx = |name: &str| sorts.iter().position(|(n, _)| n == name);
    let mut resolved_gens = Vec::with_capacity(gens.len());
    for (gname, dom, (target, line, col)) in &gens {
        let cod = sort_idx(target).ok_or_else(|| ParseError {
            line: *line,
            col: *col,
            msg: format!("unknown sort `{target}`"),
        })?;
        resolved_gens.push((gname.clone(), *dom, cod));
    }
    // A path names generators right to left starting from the sort the
    // equation is attached to.
    let resolve_path = |start: usize, path: &[(String, usize, usize)]| {
        let mut out = vec![0usize; path.len()];
        let mut cur = start;
        for (k, (name, line, col)) in path.iter().enumerate().rev() {
            let gi = resolved_gens
                .iter()
                .position(|(n, d, _)| n == name && *d == cur)
                .ok_or_else(|| ParseError {
                    line: *line,
                    col: *col,
                    msg: format!("no generator `{name}` out of sort `{}`", sorts[cur].0),
                })?;
            out[k] = gi;
            cur = resolved_gens[gi].2;
        }
        Ok::<_, ParseError>(out)
    };
    let mut equations = Vec::with_capacity(raw_eqs.len());
    for eq in &raw_eqs {
        equations.push((resolve_path(eq.sort, &eq.lhs)?, resolve_path(eq.sort, &eq.rhs)?));
    }
    Ok(SigSpec {
        name,
        sorts,
        gens: resolved_gens,
        equations,
        path_bound: 0,
    })
}

/// One or more generator names; stops before `=`, `,`, `}`, or the next
/// `sort` declaration. `sort` and `where` cannot name generators.
fn parse_path(p: &mut Parser) -> Result<Vec<(String, usize, usize)>, ParseError> {
    let mut path = Vec::new();
    while let Some(name) = p.peek_ident() {
        if name == "sort" || name == "where" {
            break;
        }
        let (line, col) = p.here();
        let name = p.expect_ident("generator name")?;
        path.push((name, line, col));
    }
    if path.is_empty() {
        p.fail("expected a generator path")
    } else {
        Ok(path)
    }
}

fn parse_theory_body(p: &mut Parser) -> Result<Theory, ParseError> {
    p.expect_kw("theory")?;
    let name = p.expect_ident("theory name")?;
    p.expect_kw("on")?;
    let sig_name = p.expect_ident("signature name")?;
    p.expect(Tok::LBrace)?;
    let mut axioms = Vec::new();
    while p.eat_kw("axiom") {
        let id = p.expect_ident("axiom name")?;
        p.expect(Tok::Colon)?;
        let formula = parse_formula(p)?;
        axioms.push(Axiom { id, formula });
    }
    p.expect(Tok::RBrace)?;
    p.expect_end()?;
    Ok(Theory {
        name,
        sig_name,
        axioms,
    })
}

fn parse_formula(p: &mut Parser) -> Result<Formula, ParseError> {
    if p.peek_ident() == Some("forall") || p.peek_ident() == Some("exists") {
        return parse_binder(p);
    }
    parse_iff(p)
}

fn parse_binder(p: &mut Parser) -> Result<Formula, ParseError> {
    let is_forall = p.eat_kw("forall");
    if !is_forall {
        p.expect_kw("exists")?;
    }
    let var = p.expect_ident("variable name")?;
    p.expect(Tok::Colon)?;
    let sort = p.expect_ident("sort name")?;
    let mut args = Vec::new();
    if p.peek() == Some(&Tok::LParen) {
        p.next();
        if p.peek() != Some(&Tok::RParen) {
            loop {
                args.push(p.expect_ident("argument variable")?);
                match p.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return p.fail("expected `,` or `)` in the argument list");
                    }
                }
            }
        } else {
            p.next();
        }
    }
    p.expect(Tok::Dot)?;
    let body = Box::new(parse_formula(p)?);
    Ok(if is_forall {
        Formula::Forall {
            var,
            sort,
            args,
            body,
        }
    } else {
        Formula::Exists {
            var,
            sort,
            args,
            body,
        }
    })
}

fn parse_iff(p: &mut Parser) -> Result<Formula, ParseError> {
    let mut f = parse_implies(p)?;
    while p.peek() == Some(&Tok::IffSym) {
        p.next();
        let rhs = parse_implies(p)?;
        f = Formula::Iff(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn parse_implies(p: &mut Parser) -> Result<Formula, ParseError> {
    let lhs = parse_or(p)?;
    if p.peek() == Some(&Tok::Arrow) {
        p.next();
        let rhs = parse_implies(p)?;
        Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
    } else {
        Ok(lhs)
    }
}

fn parse_or(p: &mut Parser) -> Result<Formula, ParseError> {
    let mut f = parse_and(p)?;
    while p.peek() == Some(&Tok::OrSym) {
        p.next();
        let rhs = parse_and(p)?;
        f = Formula::Or(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn parse_and(p: &mut Parser) -> Result<Formula, ParseError> {
    let mut f = parse_unary(p)?;
    while p.peek() == Some(&Tok::AndSym) {
        p.next();
        let rhs = parse_unary(p)?;
        f = Formula::And(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn parse_unary(p: &mut Parser) -> Result<Formula, ParseError> {
    match p.peek() {
        Some(Tok::Tilde) => {
            p.next();
            Ok(Formula::Not(Box::new(parse_unary(p)?)))
        }
        Some(Tok::LParen) => {
            p.next();
            let f = parse_formula(p)?;
            p.expect(Tok::RParen)?;
            Ok(f)
        }
        Some(Tok::Ident(s)) if s == "forall" || s == "exists" => parse_binder(p),
        Some(Tok::Ident(s)) if s == "true" => {
            p.next();
            Ok(Formula::True)
        }
        Some(Tok::Ident(s)) if s == "false" => {
            p.next();
            Ok(Formula::False)
        }
        Some(Tok::Ident(_)) => {
            let name = p.expect_ident("name")?;
            match p.peek() {
                Some(Tok::LParen) => {
                    p.next();
                    let mut args = Vec::new();
                    if p.peek() == Some(&Tok::RParen) {
                        p.next();
                    } else {
                        loop {
                            args.push(p.expect_ident("argument variable")?);
                            match p.next() {
                                Some(Tok::Comma) => continue,
                                Some(Tok::RParen) => break,
                                _ => {
                                    p.pos = p.pos.saturating_sub(1);
                                    return p.fail("expected `,` or `)` in the argument list");
                                }
                            }
                        }
                    }
                    Ok(Formula::Inhab { sort: name, args })
                }
                Some(Tok::EqEq) => {
                    p.next();
                    let rhs = p.expect_ident("variable name")?;
                    Ok(Formula::Eq(name, rhs))
                }
                _ => p.fail(format!(
                    "expected `(` or `==` after `{name}` (bare names are not formulas)"
                )),
            }
        }
        _ => p.fail("expected a formula"),
    }
}

fn parse_model_body(p: &mut Parser) -> Result<ModelDecl, ParseError> {
    p.expect_kw("model")?;
    let name = p.expect_ident("model name")?;
    p.expect_kw("of")?;
    let sig_name = p.expect_ident("signature name")?;
    p.expect(Tok::LBrace)?;
    let mut fibers = Vec::new();
    while let Some(Tok::Ident(_)) = p.peek() {
        let sort = p.expect_ident("sort name")?;
        p.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if p.peek() == Some(&Tok::RParen) {
            p.next();
        } else {
            loop {
                args.push(p.expect_ident("argument label")?);
                match p.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return p.fail("expected `,` or `)` in the argument list");
                    }
                }
            }
        }
        p.expect(Tok::Assign)?;
        p.expect(Tok::LBrace)?;
        let mut labels = Vec::new();
        if p.peek() == Some(&Tok::RBrace) {
            p.next();
        } else {
            loop {
                labels.push(p.expect_ident("cell label")?);
                match p.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RBrace) => break,
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return p.fail("expected `,` or `}` in the cell list");
                    }
                }
            }
        }
        fibers.push(FiberDecl { sort, args, labels });
    }
    p.expect(Tok::RBrace)?;
    p.expect_end()?;
    Ok(ModelDecl {
        name,
        sig_name,
        fibers,
    })
}

pub fn print(file: &DslFile) -> String {
    match file {
        DslFile::Signature(s) => print_signature(s),
        DslFile::Theory(t) => print_theory(t),
        DslFile::Model(m) => print_model(m),
    }
}

/// Generators appear under their domain sort and equations under the sort
/// their paths start from, so a spec whose generator and equation lists are
/// grouped that way round-trips exactly.
pub fn print_signature(s: &SigSpec) -> String {
    let mut out = format!("signature {} {{\n", s.name);
    for (i, (name, rank)) in s.sorts.iter().enumerate() {
        let _ = write!(out, "  sort {name} rank {rank}");
        let gens: Vec<&(String, usize, usize)> =
            s.gens.iter().filter(|(_, dom, _)| *dom == i).collect();
        if !gens.is_empty() {
            let list: Vec<String> = gens
                .iter()
                .map(|(g, _, cod)| format!("{g}: {}", s.sorts[*cod].0))
                .collect();
            let _ = write!(out, " ({})", list.join(", "));
        }
        let eqs: Vec<String> = s
            .equations
            .iter()
            .filter(|(lhs, _)| s.gens[*lhs.last().expect("equation sides are nonempty")].1 == i)
            .map(|(lhs, rhs)| {
                let side = |path: &[usize]| {
                    path.iter()
                        .map(|&g| s.gens[g].0.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                format!("{} = {}", side(lhs), side(rhs))
            })
            .collect();
        if !eqs.is_empty() {
            let _ = write!(out, "\n    where {}", eqs.join(", "));
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

pub fn print_theory(t: &Theory) -> String {
    let mut out = format!("theory {} on {} {{\n", t.name, t.sig_name);
    for ax in &t.axioms {
        let mut f = String::new();
        fmt_formula(&ax.formula, 0, &mut f);
        let _ = writeln!(out, "  axiom {}: {}", ax.id, f);
    }
    out.push_str("}\n");
    out
}

pub fn print_model(m: &ModelDecl) -> String {
    let mut out = format!("model {} of {} {{\n", m.name, m.sig_name);
    for f in &m.fibers {
        let _ = writeln!(
            out,
            "  {}({}) = {{ {} }}",
            f.sort,
            f.args.join(", "),
            f.labels.join(", ")
        );
    }
    out.push_str("}\n");
    out
}

/// Precedence climbing: binders are 0, <-> is 1, -> is 2 (right
/// associative), \/ is 3, /\ is 4, ~ is 5.
fn fmt_formula(f: &Formula, min: u8, out: &mut String) {
    let wrap = |out: &mut String, prec: u8, inner: &dyn Fn(&mut String)| {
        if prec < min {
            out.push('(');
            inner(out);
            out.push(')');
        } else {
            inner(out);
        }
    };
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Inhab { sort, args } => {
            let _ = write!(out, "{sort}({})", args.join(", "));
        }
        Formula::Eq(a, b) => {
            let _ = write!(out, "{a} == {b}");
        }
        Formula::Not(x) => wrap(out, 5, &|out| {
            out.push('~');
            fmt_formula(x, 5, out);
        }),
        Formula::And(a, b) => wrap(out, 4, &|out| {
            fmt_formula(a, 4, out);
            out.push_str(" /\\ ");
            fmt_formula(b, 5, out);
        }),
        Formula::Or(a, b) => wrap(out, 3, &|out| {
            fmt_formula(a, 3, out);
            out.push_str(" \\/ ");
            fmt_formula(b, 4, out);
        }),
        Formula::Implies(a, b) => wrap(out, 2, &|out| {
            fmt_formula(a, 3, out);
            out.push_str(" -> ");
            fmt_formula(b, 2, out);
        }),
        Formula::Iff(a, b) => wrap(out, 1, &|out| {
            fmt_formula(a, 1, out);
            out.push_str(" <-> ");
            fmt_formula(b, 2, out);
        }),
        Formula::Forall { var, sort, args, body } | Formula::Exists { var, sort, args, body } => {
            wrap(out, 0, &|out| {
                let kw = if matches!(f, Formula::Forall { .. }) {
                    "forall"
                } else {
                    "exists"
                };
                let _ = write!(out, "{kw} {var}:{sort}");
                if !args.is_empty() {
                    let _ = write!(out, "({})", args.join(", "));
                }
                out.push_str(". ");
                fmt_formula(body, 0, out);
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigcore::test_sigs::cat_e_spec;
    use proptest::prelude::*;

    #[test]
    fn signature_round_trips_through_text() {
        let spec = cat_e_spec();
        let text = print_signature(&spec);
        let back = parse_signature(&text).unwrap();
        assert_eq!(back.name, spec.name);
        assert_eq!(back.sorts, spec.sorts);
        assert_eq!(back.gens, spec.gens);
        assert_eq!(back.equations, spec.equations);
    }

    #[test]
    fn signature_text_reads_naturally() {
        let src = "
            -- two-sorted graphs
            signature graph {
              sort O rank 0
              sort A rank 1 (d: O, c: O)
            }
        ";
        let spec = parse_signature(src).unwrap();
        assert_eq!(spec.sorts, vec![("O".into(), 0), ("A".into(), 1)]);
        assert_eq!(
            spec.gens,
            vec![("d".into(), 1, 0), ("c".into(), 1, 0)]
        );
    }

    #[test]
    fn equation_paths_resolve_right_to_left() {
        let src = "
            signature cat0 {
              sort O rank 0
              sort A rank 1 (d: O, c: O)
              sort T rank 2 (t0: A, t1: A, t2: A)
                where c t0 = d t1, d t0 = d t2, c t1 = c t2
            }
        ";
        let spec = parse_signature(src).unwrap();
        // c t0: t0 out of T (index 2), then c out of A (index 1).
        assert_eq!(spec.equations[0], (vec![1, 2], vec![0, 3]));
    }

    #[test]
    fn formula_precedence_and_binder_scope() {
        let src = "
            theory t on s {
              axiom a: forall x:O. P(x) /\\ Q(x) -> R(x)
              axiom b: ~P(x) \\/ Q(x) <-> P(x) -> Q(x)
            }
        ";
        let thy = parse_theory(src).unwrap();
        // The binder body is the whole implication.
        match &thy.axioms[0].formula {
            Formula::Forall { body, .. } => {
                assert!(matches!(**body, Formula::Implies(_, _)))
            }
            other => panic!("expected a binder, got {other:?}"),
        }
        // <-> binds loosest: (~P \/ Q) <-> (P -> Q).
        match &thy.axioms[1].formula {
            Formula::Iff(l, r) => {
                assert!(matches!(**l, Formula::Or(_, _)));
                assert!(matches!(**r, Formula::Implies(_, _)));
            }
            other => panic!("expected iff, got {other:?}"),
        }
    }

    #[test]
    fn model_files_parse_and_print() {
        let src = "
            model two of graph {
              O() = { x, y }
              A(x, y) = { e }
              A(y, y) = {}
            }
        ";
        let m = parse_model(src).unwrap();
        assert_eq!(m.fibers.len(), 3);
        assert_eq!(m.fibers[1].args, vec!["x", "y"]);
        assert!(m.fibers[2].labels.is_empty());
        let back = parse_model(&print_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse("signature s {\n  sort A rank x\n}").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.msg.contains("rank"), "{err}");
        let err = parse_signature("signature s { sort A rank 1 (d: O) }").unwrap_err();
        assert!(err.msg.contains("unknown sort"), "{err}");
    }

    #[test]
    fn format_prefix_is_accepted() {
        let spec = parse_signature("format 1 signature s { sort X rank 0 }").unwrap();
        assert_eq!(spec.name, "s");
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_']{0,4}".prop_filter("not a keyword", |s| {
            ![
                "signature", "sort", "rank", "where", "theory", "on", "axiom", "model", "of",
                "forall", "exists", "true", "false", "format",
            ]
            .contains(&s.as_str())
        })
    }

    fn formula_strategy() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            Just(Formula::False),
            (ident(), proptest::collection::vec(ident(), 0..3))
                .prop_map(|(sort, args)| Formula::Inhab { sort, args }),
            (ident(), ident()).prop_map(|(a, b)| Formula::Eq(a, b)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Formula::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Formula::Or(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Formula::Iff(Box::new(a), Box::new(b))),
                (
                    ident(),
                    ident(),
                    proptest::collection::vec(ident(), 0..3),
                    inner,
                    proptest::bool::ANY
                )
                    .prop_map(|(var, sort, args, body, fa)| if fa {
                        Formula::Forall { var, sort, args, body: Box::new(body) }
                    } else {
                        Formula::Exists { var, sort, args, body: Box::new(body) }
                    }),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_formulas_reparse_exactly(f in formula_strategy()) {
            let thy = Theory {
                name: "t".into(),
                sig_name: "s".into(),
                axioms: vec![Axiom { id: "a".into(), formula: f }],
            };
            let text = print_theory(&thy);
            let back = parse_theory(&text).unwrap();
            prop_assert_eq!(back, thy);
        }

        #[test]
        fn printed_models_reparse_exactly(
            name in ident(),
            sig in ident(),
            fibers in proptest::collection::vec(
                (ident(), proptest::collection::vec(ident(), 0..3),
                 proptest::collection::vec(ident(), 0..3)),
                0..5,
            ),
        ) {
            let m = ModelDecl {
                name,
                sig_name: sig,
                fibers: fibers
                    .into_iter()
                    .map(|(sort, args, labels)| FiberDecl { sort, args, labels })
                    .collect(),
            };
            let back = parse_model(&print_model(&m)).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn printed_grouped_signatures_reparse_exactly(
            name in ident(),
            sorts in proptest::collection::vec((ident(), 0usize..3), 1..4),
            gen_counts in proptest::collection::vec(0usize..3, 1..4),
        ) {
            // Unique sort names, generators grouped by their domain sort.
            let mut seen = Vec::new();
            let sorts: Vec<(String, usize)> = sorts
                .into_iter()
                .filter(|(n, _)| {
                    if seen.contains(n) { false } else { seen.push(n.clone()); true }
                })
                .collect();
            let mut gens = Vec::new();
            for (i, _) in sorts.iter().enumerate() {
                let count = gen_counts.get(i).copied().unwrap_or(0);
                for k in 0..count {
                    gens.push((format!("g{i}_{k}"), i, (i + k + 1) % sorts.len()));
                }
            }
            let spec = SigSpec { name, sorts, gens, equations: vec![], path_bound: 0 };
            let back = parse_signature(&print_signature(&spec)).unwrap();
            prop_assert_eq!(back.name, spec.name);
            prop_assert_eq!(back.sorts, spec.sorts);
            prop_assert_eq!(back.gens, spec.gens);
        }
    }
}
