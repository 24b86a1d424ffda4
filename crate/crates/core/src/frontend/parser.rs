//! Lexer and recursive-descent parser.
//!
//! ```text
//! stmts  := stmt (';' stmt)* ';'?
//! stmt   := 'skip' | ident ':=' aexpr
//!         | 'if' cond 'then' stmts ('else' stmts)? 'fi'
//!         | 'while' bexpr ('@invariant' '(' bexpr ')')? 'do' stmts 'od'
//! cond   := 'star' | 'prob' '(' (aexpr | '2' '^' '(' '-' ident ')') ')' | bexpr
//! bexpr  := conj ('or' conj)* ; conj := neg ('and' neg)*
//! neg    := 'not' neg | 'true' | 'false' | '(' bexpr ')' | aexpr cmp aexpr
//! aexpr  := term (('+'|'-') term)* ; term := unary (('*'|'/') unary)*
//! unary  := '-' unary | num | ident | '(' aexpr ')'
//!         | 'sample' '(' ('unif'|'norm') '(' aexpr ',' aexpr ')' ')'
//!         | 'ndet' '(' aexpr ',' aexpr ')'
//! ```
//!
//! Expressions are checked for linearity as they are parsed, so errors carry
//! the position of the offending expression.

use super::ast::*;
use super::linearize;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &[(&str, &str)] = &[
    (":=", ":="),
    ("<=", "<="),
    (">=", ">="),
    ("!=", "!="),
    ("==", "="),
    ("≤", "<="),
    ("≥", ">="),
    ("≠", "!="),
    ("∧", "and"),
    ("∨", "or"),
    ("¬", "not"),
    ("<", "<"),
    (">", ">"),
    ("=", "="),
    (";", ";"),
    ("(", "("),
    (")", ")"),
    (",", ","),
    ("+", "+"),
    ("-", "-"),
    ("*", "*"),
    ("/", "/"),
    ("^", "^"),
    ("@", "@"),
    ("⋆", "star"),
];

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' || c == 'ℓ' {
            let s = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '_'
                    || chars[i] == 'ℓ'
                    || chars[i] == '.')
            {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Token {
                tok: Tok::Ident(word),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let lit: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Token {
                tok: Tok::Num(lit),
                line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some((pat, sym)) = SYMBOLS.iter().find(|(p, _)| rest.starts_with(p)) else {
            return Err(ParseError {
                line,
                col,
                msg: format!("unexpected character `{c}`"),
            });
        };
        let n = pat.chars().count();
        i += n;
        col += n;
        let tok = match *sym {
            "and" | "or" | "not" | "star" => Tok::Ident(sym.to_string()),
            s => Tok::Sym(s),
        };
        out.push(Token {
            tok,
            line,
            col: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "while", "do", "od", "if", "then", "else", "fi", "skip", "star", "prob", "sample", "unif",
    "norm", "ndet", "and", "or", "not", "true", "false",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn err_at<T>(&self, at: (usize, usize), msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: at.0,
            col: at.1,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(w) => format!("`{w}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) && !w.contains('.') => {
                self.bump();
                Ok(w)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    pub(crate) fn program(&mut self) -> Result<Program, ParseError> {
        let body = self.stmts()?;
        if !self.at_eof() {
            return self.err(format!("unexpected {}", self.describe()));
        }
        Ok(Program { body })
    }

    fn stmts(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = vec![self.stmt()?];
        while self.eat_sym(";") {
            if self.at_eof() || ["od", "fi", "else"].iter().any(|k| self.is_kw(k)) {
                break;
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_kw("skip") {
            return Ok(Stmt::Skip);
        }
        if self.eat_kw("if") {
            let cond = self.cond()?;
            self.expect_kw("then")?;
            let then = self.stmts()?;
            let els = if self.eat_kw("else") {
                Some(self.stmts()?)
            } else {
                None
            };
            self.expect_kw("fi")?;
            return Ok(Stmt::If { cond, then, els });
        }
        if self.eat_kw("while") {
            let cond = self.bexpr()?;
            let invariant = if self.eat_sym("@") {
                match self.bump() {
                    Tok::Ident(w) if w == "invariant" => {}
                    _ => return self.err("expected `invariant` after `@`"),
                }
                self.expect_sym("(")?;
                let b = self.bexpr()?;
                self.expect_sym(")")?;
                Some(b)
            } else {
                None
            };
            self.expect_kw("do")?;
            let body = self.stmts()?;
            self.expect_kw("od")?;
            return Ok(Stmt::While {
                cond,
                invariant,
                body,
            });
        }
        if matches!(self.peek(), Tok::Ident(_)) {
            let name = self.ident()?;
            self.expect_sym(":=")?;
            let at = self.here();
            let rhs = self.aexpr()?;
            if let Err(e) = linearize::check_rhs(&rhs) {
                return self.err_at(at, e.to_string());
            }
            return Ok(Stmt::Assign(name, rhs));
        }
        self.err(format!("expected a statement, found {}", self.describe()))
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        if self.eat_kw("star") {
            return Ok(Cond::Star);
        }
        if self.is_kw("prob") && matches!(self.peek_at(1), Tok::Sym("(")) {
            self.bump();
            self.bump();
            let at = self.here();
            let arg = if matches!(self.peek(), Tok::Num(n) if n == "2")
                && matches!(self.peek_at(1), Tok::Sym("^"))
            {
                self.bump();
                self.bump();
                self.expect_sym("(")?;
                self.expect_sym("-")?;
                let v = self.ident()?;
                self.expect_sym(")")?;
                ProbArg::InvPow2(v)
            } else {
                let e = self.aexpr()?;
                match linearize::constant_value(&e) {
                    Ok(p) if p.is_negative() || p > Rational::one() => {
                        return self.err_at(at, "probability outside [0,1]");
                    }
                    Ok(_) => {}
                    Err(_) => return self.err_at(at, "probability must be a constant"),
                }
                ProbArg::Const(e)
            };
            self.expect_sym(")")?;
            return Ok(Cond::Prob(arg));
        }
        Ok(Cond::Bool(self.bexpr()?))
    }

    pub(crate) fn bexpr(&mut self) -> Result<BExpr, ParseError> {
        let mut lhs = self.conj()?;
        while self.eat_kw("or") {
            let rhs = self.conj()?;
            lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<BExpr, ParseError> {
        let mut lhs = self.bneg()?;
        while self.eat_kw("and") || self.eat_sym(",") {
            let rhs = self.bneg()?;
            lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bneg(&mut self) -> Result<BExpr, ParseError> {
        if self.eat_kw("not") {
            return Ok(BExpr::Not(Box::new(self.bneg()?)));
        }
        if self.eat_kw("true") {
            return Ok(BExpr::True);
        }
        if self.eat_kw("false") {
            return Ok(BExpr::False);
        }
        if self.is_sym("(") {
            // Either a parenthesized condition or the left side of a comparison.
            let save = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if self.eat_sym(")") && !self.at_cmp() {
                    return Ok(b);
                }
            }
            self.pos = save;
        }
        let at = self.here();
        let lhs = self.aexpr()?;
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            _ => return self.err(format!("expected a comparison, found {}", self.describe())),
        };
        self.bump();
        let rhs = self.aexpr()?;
        for e in [&lhs, &rhs] {
            if let Err(err) = linearize::check_pure(e) {
                return self.err_at(at, err.to_string());
            }
        }
        Ok(BExpr::Cmp(lhs, op, rhs))
    }

    fn at_cmp(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Sym("<" | "<=" | ">" | ">=" | "=" | "!=" | "+" | "-" | "*" | "/")
        )
    }

    fn aexpr(&mut self) -> Result<AExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym("+") {
                lhs = AExpr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                lhs = AExpr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<AExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym("*") {
                lhs = AExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym("/") {
                lhs = AExpr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else if matches!(self.peek(), Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()))
                && matches!(lhs, AExpr::Num(_))
            {
                // `4t` is `4 * t`
                lhs = AExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<AExpr, ParseError> {
        if self.eat_sym("-") {
            return Ok(AExpr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("(") {
            let e = self.aexpr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("sample") {
            self.expect_sym("(")?;
            let which = match self.bump() {
                Tok::Ident(w) if w == "unif" || w == "norm" => w,
                _ => return self.err("expected `unif` or `norm`"),
            };
            self.expect_sym("(")?;
            let a = self.aexpr()?;
            self.expect_sym(",")?;
            let b = self.aexpr()?;
            self.expect_sym(")")?;
            self.expect_sym(")")?;
            let d = if which == "unif" {
                Dist::Unif(a, b)
            } else {
                Dist::Norm(a, b)
            };
            return Ok(AExpr::Sample(Box::new(d)));
        }
        if self.eat_kw("ndet") {
            self.expect_sym("(")?;
            let a = self.aexpr()?;
            self.expect_sym(",")?;
            let b = self.aexpr()?;
            self.expect_sym(")")?;
            return Ok(AExpr::Ndet(Box::new(a), Box::new(b)));
        }
        match self.peek().clone() {
            Tok::Num(lit) => {
                let at = self.here();
                self.bump();
                match lit.parse::<Rational>() {
                    Ok(r) => Ok(AExpr::Num(r)),
                    Err(_) => self.err_at(at, format!("malformed number `{lit}`")),
                }
            }
            Tok::Ident(_) => Ok(AExpr::Var(self.ident()?)),
            _ => self.err(format!("expected an expression, found {}", self.describe())),
        }
    }
}

/// Parse program text.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    Parser::new(src)?.program()
}

/// Parse a standalone condition (used for annotation files).
pub fn parse_bexpr(src: &str) -> Result<BExpr, ParseError> {
    let mut p = Parser::new(src)?;
    let b = p.bexpr()?;
    if !p.at_eof() {
        return p.err(format!("unexpected {}", p.describe()));
    }
    Ok(b)
}
