//! Text format for domains.
//!
//! ```text
//! domain fractions
//! skill findLCD "Find the least common denominator"
//! root solve(?f)
//!
//! method solve(?f) as addFractions-same-den {
//!   pre { fraction(?f, left, ?n1, ?d); fraction(?f, right, ?n2, ?d) }
//!   subtasks { addNumerators(?n1, ?n2); writeAnswer(?n1, ?d) }
//!   skill addFractions
//! }
//!
//! operator computeLCD(?d1, ?d2) {
//!   pre { ?l := lcm(?d1, ?d2) }
//!   action lcdField = ?l
//!   effects { +field(lcdField, ?l) }
//!   skill findLCD
//! }
//!
//! axiom mastered(?s) { pre { pMastery(?s, ?p); test ?p >= 4/5 } }
//! ```
//!
//! `#` starts a comment. Conditions are `pred(args)`, `not pred(args)`,
//! `test <expr> <op> <expr>` and `?x := <expr>`. A `unordered` keyword after
//! a method head lets its subtasks interleave. Records without an explicit
//! `as <name>` are named after their head.

use std::collections::BTreeMap;
use std::fmt;

use super::{
    validate, ActionTemplate, Domain, DomainError, DomainErrorKind, Method, Operator, Position,
    RecordRef, SubtaskOrder, TaskHead,
};
use crate::expr::{BinOp, Expr, Func};
use crate::facts::{Axiom, CompareOp, Condition, Pattern, Term};
use crate::value::{Sym, Value};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    /// Backquoted symbol, for symbols that are not plain identifiers.
    Quoted(String),
    Var(String),
    Int(i64),
    Rat(i64, i64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Plus,
    Minus,
    Star,
    Slash,
    Assign,
    Cmp(CompareOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "symbol `{s}`"),
            Tok::Var(v) => write!(f, "variable ?{v}"),
            Tok::Int(n) => write!(f, "number {n}"),
            Tok::Rat(n, d) => write!(f, "number {n}/{d}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Assign => f.write_str("`:=`"),
            Tok::Cmp(op) => write!(f, "`{}`", op.symbol()),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Position,
}

fn syntax_error(pos: Position, message: impl Into<String>) -> DomainError {
    DomainError {
        kind: DomainErrorKind::Syntax,
        position: Some(pos),
        message: message.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// True if `s` prints as a bare identifier and reads back as a symbol.
fn is_plain_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if !is_ident_start(first) || s.ends_with('-') || s.contains("--") {
        return false;
    }
    if !s.chars().all(|c| is_ident_char(c) || c == '-') {
        return false;
    }
    !matches!(s, "true" | "false")
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn tokens(mut self) -> Result<Vec<Token>, DomainError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                } else {
                    break;
                }
            }
            let pos = self.pos();
            let Some(c) = self.bump() else {
                out.push(Token { tok: Tok::Eof, pos });
                return Ok(out);
            };
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '=' => Tok::Cmp(CompareOp::Eq),
                ':' if self.peek() == Some('=') => {
                    self.bump();
                    Tok::Assign
                }
                '!' if self.peek() == Some('=') => {
                    self.bump();
                    Tok::Cmp(CompareOp::Ne)
                }
                '<' | '>' => {
                    let eq = self.peek() == Some('=');
                    if eq {
                        self.bump();
                    }
                    Tok::Cmp(match (c, eq) {
                        ('<', false) => CompareOp::Lt,
                        ('<', true) => CompareOp::Le,
                        ('>', false) => CompareOp::Gt,
                        _ => CompareOp::Ge,
                    })
                }
                '?' => {
                    let mut name = String::new();
                    while let Some(c) = self.peek().filter(|c| is_ident_char(*c)) {
                        name.push(c);
                        self.bump();
                    }
                    if name.is_empty() {
                        return Err(syntax_error(pos, "expected a variable name after `?`"));
                    }
                    Tok::Var(name)
                }
                '"' => Tok::Str(self.quoted('"', pos)?),
                '`' => Tok::Quoted(self.quoted('`', pos)?),
                c if c.is_ascii_digit() => self.number(c, pos)?,
                c if is_ident_start(c) => {
                    let mut name = String::from(c);
                    loop {
                        match self.peek() {
                            Some(c) if is_ident_char(c) => {
                                name.push(c);
                                self.bump();
                            }
                            Some('-') if self.peek2().is_some_and(is_ident_char) => {
                                name.push('-');
                                self.bump();
                            }
                            _ => break,
                        }
                    }
                    Tok::Ident(name)
                }
                other => return Err(syntax_error(pos, format!("unexpected character {other:?}"))),
            };
            out.push(Token { tok, pos });
        }
    }

    fn quoted(&mut self, close: char, start: Position) -> Result<String, DomainError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(syntax_error(start, "unterminated quoted literal")),
                Some(c) if c == close => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c @ ('\\' | '"' | '`')) => s.push(c),
                    _ => return Err(syntax_error(start, "invalid escape in quoted literal")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn digits(&mut self, first: Option<char>, pos: Position) -> Result<i64, DomainError> {
        let mut s: String = first.into_iter().collect();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        s.parse()
            .map_err(|_| syntax_error(pos, format!("integer literal {s} is out of range")))
    }

    fn number(&mut self, first: char, pos: Position) -> Result<Tok, DomainError> {
        let n = self.digits(Some(first), pos)?;
        if self.peek() == Some('/') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let d = self.digits(None, pos)?;
            if d == 0 {
                return Err(syntax_error(pos, format!("rational literal {n}/0 has a zero denominator")));
            }
            return Ok(Tok::Rat(n, d));
        }
        Ok(Tok::Int(n))
    }
}

/// Where each record was declared, for error reporting.
#[derive(Default)]
struct Positions {
    root: Option<Position>,
    methods: Vec<Position>,
    operators: Vec<Position>,
    axioms: Vec<Position>,
    skills: BTreeMap<Sym, Position>,
}

impl Positions {
    fn of(&self, record: &RecordRef) -> Option<Position> {
        match record {
            RecordRef::Root => self.root,
            RecordRef::Skill(s) => self.skills.get(s).copied(),
            RecordRef::Method(i, _) => self.methods.get(*i).copied(),
            RecordRef::Operator(i, _) => self.operators.get(*i).copied(),
            RecordRef::Axiom(i) => self.axioms.get(*i).copied(),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Position {
        self.tokens[self.at].pos
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), DomainError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn unexpected(&self, wanted: &str) -> DomainError {
        syntax_error(self.pos(), format!("expected {wanted}, found {}", self.peek()))
    }

    fn ident(&mut self, what: &str) -> Result<Sym, DomainError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(Sym::from(s))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn term(&mut self) -> Result<Term, DomainError> {
        let negative = self.eat(&Tok::Minus);
        let tok = self.next();
        let value = match (tok.tok, negative) {
            (Tok::Var(v), false) => return Ok(Term::Var(Sym::from(v))),
            (Tok::Ident(s), false) => ident_value(s),
            (Tok::Quoted(s), false) => Value::Symbol(Sym::from(s)),
            (Tok::Str(s), false) => Value::Text(s),
            (Tok::Int(n), neg) => Value::Int(if neg { -n } else { n }),
            (Tok::Rat(n, d), neg) => rational(if neg { -n } else { n }, d),
            (other, _) => {
                return Err(syntax_error(tok.pos, format!("expected a term, found {other}")))
            }
        };
        Ok(Term::Value(value))
    }

    fn arg_list<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, DomainError>,
    ) -> Result<Vec<T>, DomainError> {
        let mut out = Vec::new();
        if !self.eat(&Tok::LParen) {
            return Ok(out);
        }
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn head(&mut self) -> Result<TaskHead, DomainError> {
        let name = self.ident("a task name")?;
        let args = self.arg_list(Self::term)?;
        Ok(TaskHead { name, args })
    }

    fn pattern(&mut self) -> Result<Pattern, DomainError> {
        let predicate = self.ident("a predicate name")?;
        let args = self.arg_list(Self::term)?;
        Ok(Pattern { predicate, args })
    }

    fn expr(&mut self) -> Result<Expr, DomainError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, DomainError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DomainError> {
        if self.eat(&Tok::Minus) {
            return Ok(match *self.peek() {
                Tok::Int(n) => {
                    self.next();
                    Expr::Lit(Value::Int(-n))
                }
                Tok::Rat(n, d) => {
                    self.next();
                    Expr::Lit(rational(-n, d))
                }
                _ => Expr::Neg(Box::new(self.unary()?)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DomainError> {
        let tok = self.next();
        Ok(match tok.tok {
            Tok::Int(n) => Expr::Lit(Value::Int(n)),
            Tok::Rat(n, d) => Expr::Lit(rational(n, d)),
            Tok::Str(s) => Expr::Lit(Value::Text(s)),
            Tok::Quoted(s) => Expr::Lit(Value::Symbol(Sym::from(s))),
            Tok::Var(v) => Expr::Var(Sym::from(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                e
            }
            Tok::Ident(name) if self.peek() == &Tok::LParen => {
                let func = Func::from_name(&name).ok_or_else(|| {
                    syntax_error(tok.pos, format!("unknown function `{name}`"))
                })?;
                let args = self.arg_list(Self::expr)?;
                let ok = match func.arity() {
                    Some(n) => args.len() == n,
                    None => !args.is_empty(),
                };
                if !ok {
                    return Err(syntax_error(
                        tok.pos,
                        format!("`{name}` called with {} argument(s)", args.len()),
                    ));
                }
                Expr::Call(func, args)
            }
            Tok::Ident(name) => Expr::Lit(ident_value(name)),
            other => {
                return Err(syntax_error(tok.pos, format!("expected an expression, found {other}")))
            }
        })
    }

    fn compare_op(&mut self) -> Result<CompareOp, DomainError> {
        match *self.peek() {
            Tok::Cmp(op) => {
                self.next();
                Ok(op)
            }
            _ => Err(self.unexpected("a comparison operator")),
        }
    }

    fn condition(&mut self) -> Result<Condition, DomainError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "not")
            && matches!(self.peek_at(1), Tok::Ident(_))
        {
            self.next();
            return Ok(Condition::Negated(self.pattern()?));
        }
        // `test` is reserved here: `test (a + b) > c` must not read as a
        // pattern named test.
        if matches!(self.peek(), Tok::Ident(s) if s == "test") {
            self.next();
            let lhs = self.expr()?;
            let op = self.compare_op()?;
            let rhs = self.expr()?;
            return Ok(Condition::Test { op, lhs, rhs });
        }
        if let (Tok::Var(v), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            self.next();
            self.next();
            return Ok(Condition::Assign {
                var: Sym::from(v),
                expr: self.expr()?,
            });
        }
        Ok(Condition::Positive(self.pattern()?))
    }

    /// `{ item; item; ... }` with optional separators.
    fn block<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, DomainError>,
    ) -> Result<Vec<T>, DomainError> {
        self.expect(&Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            while self.eat(&Tok::Semi) {}
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            out.push(item(self)?);
        }
    }

    fn effect(&mut self) -> Result<(bool, Pattern), DomainError> {
        let add = if self.eat(&Tok::Plus) {
            true
        } else if self.eat(&Tok::Minus) {
            false
        } else {
            return Err(self.unexpected("`+` or `-` before an effect"));
        };
        Ok((add, self.pattern()?))
    }

    fn record_name(&mut self, head: &TaskHead) -> Result<Sym, DomainError> {
        if self.eat_keyword("as") {
            self.ident("a record name")
        } else {
            Ok(head.name.clone())
        }
    }

    fn once<T>(slot: &mut Option<T>, value: T, pos: Position, clause: &str) -> Result<(), DomainError> {
        if slot.is_some() {
            return Err(syntax_error(pos, format!("duplicate `{clause}` clause")));
        }
        *slot = Some(value);
        Ok(())
    }

    fn method(&mut self) -> Result<Method, DomainError> {
        let head = self.head()?;
        let name = self.record_name(&head)?;
        let order = if self.eat_keyword("unordered") {
            SubtaskOrder::Unordered
        } else {
            SubtaskOrder::Sequential
        };
        self.expect(&Tok::LBrace)?;
        let (mut pre, mut subtasks, mut skill) = (None, None, None);
        while !self.eat(&Tok::RBrace) {
            let pos = self.pos();
            let clause = self.ident("`pre`, `subtasks`, `skill` or `}`")?;
            match clause.as_str() {
                "pre" => {
                    let v = self.block(Self::condition)?;
                    Self::once(&mut pre, v, pos, "pre")?;
                }
                "subtasks" => {
                    let v = self.block(Self::head)?;
                    Self::once(&mut subtasks, v, pos, "subtasks")?;
                }
                "skill" => {
                    let v = self.ident("a skill name")?;
                    Self::once(&mut skill, v, pos, "skill")?;
                }
                other => {
                    return Err(syntax_error(pos, format!("unknown method clause `{other}`")))
                }
            }
        }
        Ok(Method {
            name,
            head,
            preconditions: pre.unwrap_or_default(),
            subtasks: subtasks.unwrap_or_default(),
            order,
            skill,
        })
    }

    fn operator(&mut self, start: Position) -> Result<Operator, DomainError> {
        let head = self.head()?;
        let name = self.record_name(&head)?;
        self.expect(&Tok::LBrace)?;
        let (mut pre, mut action, mut effects, mut skill) = (None, None, None, None);
        while !self.eat(&Tok::RBrace) {
            let pos = self.pos();
            let clause = self.ident("`pre`, `action`, `effects`, `skill` or `}`")?;
            match clause.as_str() {
                "pre" => {
                    let v = self.block(Self::condition)?;
                    Self::once(&mut pre, v, pos, "pre")?;
                }
                "action" => {
                    let field = self.term()?;
                    self.expect(&Tok::Cmp(CompareOp::Eq))?;
                    let value = self.expr()?;
                    Self::once(&mut action, ActionTemplate { field, value }, pos, "action")?;
                }
                "effects" => {
                    let v = self.block(Self::effect)?;
                    Self::once(&mut effects, v, pos, "effects")?;
                }
                "skill" => {
                    let v = self.ident("a skill name")?;
                    Self::once(&mut skill, v, pos, "skill")?;
                }
                other => {
                    return Err(syntax_error(pos, format!("unknown operator clause `{other}`")))
                }
            }
        }
        let action = action.ok_or_else(|| {
            syntax_error(start, format!("operator {name} has no `action` clause"))
        })?;
        let (mut add, mut delete) = (Vec::new(), Vec::new());
        for (is_add, p) in effects.unwrap_or_default() {
            if is_add {
                add.push(p);
            } else {
                delete.push(p);
            }
        }
        Ok(Operator {
            name,
            head,
            preconditions: pre.unwrap_or_default(),
            action,
            add,
            delete,
            skill,
        })
    }

    fn axiom(&mut self) -> Result<Axiom, DomainError> {
        let head = self.pattern()?;
        let mut pre = None;
        self.expect(&Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            let pos = self.pos();
            let clause = self.ident("`pre` or `}`")?;
            if clause.as_str() != "pre" {
                return Err(syntax_error(pos, format!("unknown axiom clause `{clause}`")));
            }
            let v = self.block(Self::condition)?;
            Self::once(&mut pre, v, pos, "pre")?;
        }
        Ok(Axiom {
            head,
            preconditions: pre.unwrap_or_default(),
        })
    }
}

fn ident_value(s: String) -> Value {
    match s.as_str() {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::Symbol(Sym::from(s)),
    }
}

fn rational(n: i64, d: i64) -> Value {
    // The lexer rejects zero denominators.
    Value::rational(n, d).unwrap_or(Value::Int(0))
}

/// Parses a domain file. Errors carry the line and column of the offending
/// token or record.
pub fn parse_domain(src: &str) -> Result<Domain, DomainError> {
    let tokens = Lexer::new(src).tokens()?;
    let mut p = Parser { tokens, at: 0 };
    let mut name: Option<Sym> = None;
    let mut root: Option<TaskHead> = None;
    let mut skills = BTreeMap::new();
    let (mut methods, mut operators, mut axioms) = (Vec::new(), Vec::new(), Vec::new());
    let mut positions = Positions::default();

    loop {
        let start = p.pos();
        let keyword = match p.next().tok {
            Tok::Eof => break,
            Tok::Ident(k) => k,
            other => {
                return Err(syntax_error(start, format!("expected a record keyword, found {other}")))
            }
        };
        match keyword.as_str() {
            "domain" => {
                if name.is_some() {
                    return Err(syntax_error(start, "duplicate `domain` record"));
                }
                name = Some(p.ident("a domain name")?);
            }
            "skill" => {
                let id = p.ident("a skill name")?;
                let display = match p.peek().clone() {
                    Tok::Str(s) => {
                        p.next();
                        s
                    }
                    _ => id.as_str().to_owned(),
                };
                if skills.insert(id.clone(), display).is_some() {
                    return Err(DomainError {
                        kind: DomainErrorKind::DuplicateName,
                        position: Some(start),
                        message: format!("skill {id} declared twice"),
                    });
                }
                positions.skills.insert(id, start);
            }
            "root" => {
                if root.is_some() {
                    return Err(syntax_error(start, "duplicate `root` record"));
                }
                root = Some(p.head()?);
                positions.root = Some(start);
            }
            "method" => {
                methods.push(p.method()?);
                positions.methods.push(start);
            }
            "operator" => {
                operators.push(p.operator(start)?);
                positions.operators.push(start);
            }
            "axiom" => {
                axioms.push(p.axiom()?);
                positions.axioms.push(start);
            }
            other => return Err(syntax_error(start, format!("unknown record keyword `{other}`"))),
        }
    }

    let name = name.ok_or(DomainError {
        kind: DomainErrorKind::MissingDomainName,
        position: None,
        message: "no `domain <name>` record".into(),
    })?;
    let root = root.ok_or(DomainError {
        kind: DomainErrorKind::MissingRoot,
        position: None,
        message: "no `root <task>` record".into(),
    })?;
    let unchecked = Domain {
        name,
        skills,
        root,
        methods,
        operators,
        axioms,
    };
    if let Some((kind, record, message)) = validate::first_load_error(&unchecked) {
        return Err(DomainError {
            kind,
            position: positions.of(&record),
            message: format!("{record}: {message}"),
        });
    }
    let mut domain = unchecked;
    domain.canonicalize();
    Ok(domain)
}

/// Prints a ground value in domain-file syntax.
pub struct LiteralDisplay<'a>(pub &'a Value);

impl fmt::Display for LiteralDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Value::Symbol(s) if is_plain_symbol(s.as_str()) => f.write_str(s.as_str()),
            Value::Symbol(s) => write_quoted(f, '`', s.as_str()),
            Value::Text(t) => write_quoted(f, '"', t),
            other => write!(f, "{other}"),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, q: char, s: &str) -> fmt::Result {
    use fmt::Write;
    f.write_char(q)?;
    for c in s.chars() {
        match c {
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\\' | '"' | '`' => {
                f.write_char('\\')?;
                f.write_char(c)?;
            }
            c => f.write_char(c)?,
        }
    }
    f.write_char(q)
}

struct TermDisplay<'a>(&'a Term);

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Value(v) => write!(f, "{}", LiteralDisplay(v)),
        }
    }
}

pub(crate) struct HeadDisplay<'a>(pub &'a Sym, pub &'a [Term]);

impl fmt::Display for HeadDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.0)?;
        for (i, t) in self.1.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", TermDisplay(t))?;
        }
        f.write_str(")")
    }
}

fn pattern_str(p: &Pattern) -> String {
    HeadDisplay(&p.predicate, &p.args).to_string()
}

pub(crate) fn condition_to_string(c: &Condition) -> String {
    match c {
        Condition::Positive(p) => pattern_str(p),
        Condition::Negated(p) => format!("not {}", pattern_str(p)),
        Condition::Test { op, lhs, rhs } => format!("test {lhs} {} {rhs}", op.symbol()),
        Condition::Assign { var, expr } => format!("?{var} := {expr}"),
    }
}

fn conditions_block(conds: &[Condition]) -> String {
    if conds.is_empty() {
        return "{ }".into();
    }
    let items: Vec<String> = conds.iter().map(condition_to_string).collect();
    format!("{{ {} }}", items.join("; "))
}

pub(crate) fn axiom_to_string(a: &Axiom) -> String {
    format!("axiom {} {{ pre {} }}", pattern_str(&a.head), conditions_block(&a.preconditions))
}

/// Prints a domain in canonical form. Parsing the output yields an equal
/// domain.
pub fn serialize_domain(d: &Domain) -> String {
    use fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "domain {}", d.name);
    if !d.skills.is_empty() {
        out.push('\n');
    }
    for (id, display) in &d.skills {
        let _ = writeln!(out, "skill {id} {}", LiteralDisplay(&Value::Text(display.clone())));
    }
    let _ = writeln!(out, "\nroot {}", d.root);
    for m in &d.methods {
        let order = match m.order {
            SubtaskOrder::Sequential => "",
            SubtaskOrder::Unordered => " unordered",
        };
        let _ = writeln!(out, "\nmethod {} as {}{order} {{", m.head, m.name);
        let _ = writeln!(out, "  pre {}", conditions_block(&m.preconditions));
        let subtasks: Vec<String> = m.subtasks.iter().map(|h| h.to_string()).collect();
        if subtasks.is_empty() {
            let _ = writeln!(out, "  subtasks {{ }}");
        } else {
            let _ = writeln!(out, "  subtasks {{ {} }}", subtasks.join("; "));
        }
        if let Some(s) = &m.skill {
            let _ = writeln!(out, "  skill {s}");
        }
        out.push_str("}\n");
    }
    for o in &d.operators {
        let _ = writeln!(out, "\noperator {} as {} {{", o.head, o.name);
        let _ = writeln!(out, "  pre {}", conditions_block(&o.preconditions));
        let _ = writeln!(out, "  action {} = {}", TermDisplay(&o.action.field), o.action.value);
        if !o.add.is_empty() || !o.delete.is_empty() {
            let effects: Vec<String> = o
                .add
                .iter()
                .map(|p| format!("+{}", pattern_str(p)))
                .chain(o.delete.iter().map(|p| format!("-{}", pattern_str(p))))
                .collect();
            let _ = writeln!(out, "  effects {{ {} }}", effects.join("; "));
        }
        if let Some(s) = &o.skill {
            let _ = writeln!(out, "  skill {s}");
        }
        out.push_str("}\n");
    }
    if !d.axioms.is_empty() {
        out.push('\n');
    }
    for a in &d.axioms {
        let _ = writeln!(out, "{}", axiom_to_string(a));
    }
    out
}
