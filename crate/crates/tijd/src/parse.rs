//! Concrete syntax of the theory language.
//!
//! Statements are terminated by `.`:
//!   rules          `head <- body.` (or the fact shorthand `head.`)
//!   axioms         `fol F.`
//!   declarations   `of name:: t1(_), ..., tn(_) -> t(_).`
//!
//! Connectives, loosest first: `=>`/`<=>` (right associative), `;`,
//! `&` (`,` is accepted as a synonym), `not`. Quantifiers are written
//! `exists(X,Y)$ F` / `forall(X,Y)$ F` and scope maximally to the right.
//! `%` starts a comment running to the end of the line. Variables start
//! with an uppercase letter or `_`; a bare `_` is an anonymous variable.

use thiserror::Error;

use crate::formula::{Formula, OpenFunctionDecl, Rule, Statement, Theory, TheoryError};
use crate::term::Term;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    Semi,
    Arrow,     // ->
    LeftArrow, // <-
    Implies,   // =>
    Iff,       // <=>
    Equals,
    ColonColon,
    Dollar,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, message: message.into() }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_ascii_whitespace() {
                    self.bump();
                } else if c == b'%' {
                    while let Some(c) = self.peek() {
                        self.bump();
                        if c == b'\n' {
                            break;
                        }
                    }
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else { break };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b'&' => {
                    self.bump();
                    Tok::Amp
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b'$' => {
                    self.bump();
                    Tok::Dollar
                }
                b'-' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        return Err(self.error("expected `->`"));
                    }
                }
                b'<' => {
                    self.bump();
                    match self.peek() {
                        Some(b'-') => {
                            self.bump();
                            Tok::LeftArrow
                        }
                        Some(b'=') => {
                            self.bump();
                            if self.peek() == Some(b'>') {
                                self.bump();
                                Tok::Iff
                            } else {
                                return Err(self.error("expected `<=>`"));
                            }
                        }
                        _ => return Err(self.error("expected `<-` or `<=>`")),
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        Tok::Implies
                    } else {
                        Tok::Equals
                    }
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b':') {
                        self.bump();
                        Tok::ColonColon
                    } else {
                        return Err(self.error("expected `::`"));
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut n: i64 = 0;
                    while let Some(c) = self.peek() {
                        if c.is_ascii_digit() {
                            n = n
                                .checked_mul(10)
                                .and_then(|n| n.checked_add((c - b'0') as i64))
                                .ok_or_else(|| self.error("integer literal too large"))?;
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Int(n)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                    if c.is_ascii_uppercase() || c == b'_' {
                        Tok::Var(word)
                    } else {
                        Tok::Ident(word)
                    }
                }
                other => return Err(self.error(format!("unexpected character `{}`", other as char))),
            };
            out.push(Spanned { tok, line, col });
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    anon_counter: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: Lexer::new(src).tokens()?, pos: 0, anon_counter: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        match self.toks.get(self.pos.min(self.toks.len().saturating_sub(1))) {
            Some(s) if self.pos < self.toks.len() => {
                ParseError { line: s.line, col: s.col, message: message.into() }
            }
            Some(s) => ParseError { line: s.line, col: s.col + 1, message: message.into() },
            None => ParseError { line: 1, col: 1, message: message.into() },
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn fresh_anon(&mut self) -> String {
        self.anon_counter += 1;
        format!("_A{}", self.anon_counter)
    }

    fn statements(&mut self) -> Result<Vec<Statement>, ParseError> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "fol" => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::Dot, "`.` after axiom")?;
                Ok(Statement::Axiom(f))
            }
            Some(Tok::Ident(kw)) if kw == "of" => {
                self.pos += 1;
                let decl = self.open_function()?;
                Ok(Statement::OpenFunction(decl))
            }
            _ => {
                let head = self.head_atom()?;
                match self.bump() {
                    Some(Tok::Dot) => Ok(Statement::Rule(Rule { head, body: Formula::True })),
                    Some(Tok::LeftArrow) => {
                        let body = self.formula()?;
                        self.expect(Tok::Dot, "`.` after rule body")?;
                        Ok(Statement::Rule(Rule { head, body }))
                    }
                    _ => Err(self.error_here("expected `.` or `<-` after rule head")),
                }
            }
        }
    }

    fn head_atom(&mut self) -> Result<(String, Vec<Term>), ParseError> {
        let name = match self.bump() {
            Some(Tok::Ident(name)) => name,
            _ => return Err(self.error_here("expected predicate name")),
        };
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                match self.bump() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    _ => return Err(self.error_here("expected `,` or `)` in argument list")),
                }
            }
        }
        Ok((name, args))
    }

    fn open_function(&mut self) -> Result<OpenFunctionDecl, ParseError> {
        let name = match self.bump() {
            Some(Tok::Ident(name)) => name,
            _ => return Err(self.error_here("expected open function name after `of`")),
        };
        self.expect(Tok::ColonColon, "`::` in declaration")?;
        let mut domain_types = Vec::new();
        while self.peek() != Some(&Tok::Arrow) {
            if !domain_types.is_empty() {
                self.expect(Tok::Comma, "`,` between domain types")?;
            }
            domain_types.push(self.type_atom()?);
        }
        self.expect(Tok::Arrow, "`->` in declaration")?;
        let range_type = self.type_atom()?;
        self.expect(Tok::Dot, "`.` after declaration")?;
        Ok(OpenFunctionDecl { name, domain_types, range_type })
    }

    fn type_atom(&mut self) -> Result<String, ParseError> {
        let name = match self.bump() {
            Some(Tok::Ident(name)) => name,
            _ => return Err(self.error_here("expected type predicate name")),
        };
        self.expect(Tok::LParen, "`(` in type")?;
        match self.bump() {
            Some(Tok::Var(v)) if v == "_" => {}
            _ => return Err(self.error_here("expected `_` placeholder in type")),
        }
        self.expect(Tok::RParen, "`)` in type")?;
        Ok(name)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Some(Tok::Var(v)) => {
                if v == "_" {
                    Ok(Term::Var(self.fresh_anon()))
                } else {
                    Ok(Term::Var(v))
                }
            }
            Some(Tok::Int(n)) => Ok(Term::Int(n)),
            Some(Tok::Ident(name)) => {
                let mut args = Vec::new();
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    loop {
                        args.push(self.term()?);
                        match self.bump() {
                            Some(Tok::Comma) => continue,
                            Some(Tok::RParen) => break,
                            _ => return Err(self.error_here("expected `,` or `)` in term")),
                        }
                    }
                }
                Ok(Term::App(name, args))
            }
            _ => Err(self.error_here("expected a term")),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        match self.peek() {
            Some(Tok::Implies) => {
                self.pos += 1;
                let rhs = self.formula()?;
                Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
            }
            Some(Tok::Iff) => {
                self.pos += 1;
                let rhs = self.formula()?;
                Ok(Formula::Iff(Box::new(lhs), Box::new(rhs)))
            }
            _ => Ok(lhs),
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.conjunction()?];
        while self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(Formula::or(parts))
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unary()?];
        while matches!(self.peek(), Some(Tok::Amp) | Some(Tok::Comma)) {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "not" => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::Ident(kw)) if kw == "exists" || kw == "forall" => {
                let is_exists = kw == "exists";
                self.pos += 1;
                let vars = self.quantified_vars()?;
                self.expect(Tok::Dollar, "`$` after quantifier variables")?;
                // the body extends maximally to the right
                let body = self.formula()?;
                Ok(if is_exists {
                    Formula::Exists(vars, Box::new(body))
                } else {
                    Formula::Forall(vars, Box::new(body))
                })
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(f)
            }
            Some(Tok::Ident(kw)) if kw == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(kw)) if kw == "false" => {
                self.pos += 1;
                Ok(Formula::False)
            }
            _ => {
                let t = self.term()?;
                if self.peek() == Some(&Tok::Equals) {
                    self.pos += 1;
                    let rhs = self.term()?;
                    return Ok(Formula::Eq(t, rhs));
                }
                match t {
                    Term::App(name, args) => Ok(Formula::Atom(name, args)),
                    _ => Err(self.error_here("expected an atom or equality")),
                }
            }
        }
    }

    fn quantified_vars(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(Tok::LParen, "`(` after quantifier")?;
        let mut vars = Vec::new();
        loop {
            match self.bump() {
                Some(Tok::Var(v)) => vars.push(v),
                _ => return Err(self.error_here("expected variable in quantifier")),
            }
            match self.bump() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                _ => return Err(self.error_here("expected `,` or `)` in quantifier")),
            }
        }
        Ok(vars)
    }
}

/// Parses a sequence of statements without validation.
pub fn parse_statements(src: &str) -> Result<Vec<Statement>, ParseError> {
    Parser::new(src)?.statements()
}

/// Parses and validates a complete theory from one source text.
pub fn parse_theory(src: &str) -> Result<Theory, LoadError> {
    Ok(Theory::from_statements(parse_statements(src)?)?)
}

/// Parses and validates a theory merged from several sources (e.g. the
/// shipped knowledge base plus sentence facts).
pub fn parse_theory_multi<'a>(sources: impl IntoIterator<Item = &'a str>) -> Result<Theory, LoadError> {
    let mut stmts = Vec::new();
    for src in sources {
        stmts.extend(parse_statements(src)?);
    }
    Ok(Theory::from_statements(stmts)?)
}

/// Parses a single formula, e.g. a command-line query.
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    if p.peek().is_some() && p.peek() != Some(&Tok::Dot) {
        return Err(p.error_here("trailing input after formula"));
    }
    Ok(f)
}

/// Parses a single term, e.g. an adjunct word such as `na(a1)` or `om(4)`.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    if p.peek().is_some() {
        return Err(p.error_here("trailing input after term"));
    }
    Ok(t)
}
