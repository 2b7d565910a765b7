//! Semialgebraic systems: data model, parser, translations and samplers.
//!
//! A system is a conjunction of polynomial atoms `f >= 0`, `g > 0` (or
//! `g != 0`) and `h = 0`. Atoms written with `<=`, `<` or with a nonzero right
//! hand side are normalized at parse time so that every stored polynomial is
//! compared against zero in one orientation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::poly::{f64_to_rational, Monomial, PolyError, RatPoly, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomKind {
    NonStrictGe,
    StrictGt,
    Diseq,
    Eq,
}

/// Which flavour of "g" atoms a system carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SasKind {
    WithDiseq,
    WithStrict,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SasError {
    #[error("{line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: a system may not mix `!=` and strict inequalities")]
    MixedKinds { line: usize, col: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Sas {
    pub kind: SasKind,
    /// `f_i >= 0`
    pub ge: Vec<RatPoly>,
    /// `g_j > 0` or `g_j != 0` depending on `kind`
    pub strict_or_diseq: Vec<RatPoly>,
    /// `h_k = 0`
    pub eq: Vec<RatPoly>,
    pub vars: BTreeSet<Var>,
}

impl Sas {
    pub fn new(kind: SasKind, ge: Vec<RatPoly>, g: Vec<RatPoly>, eq: Vec<RatPoly>) -> Self {
        let vars = ge
            .iter()
            .chain(&g)
            .chain(&eq)
            .flat_map(RatPoly::vars)
            .collect();
        Sas {
            kind,
            ge,
            strict_or_diseq: g,
            eq,
            vars,
        }
    }

    pub fn empty(kind: SasKind) -> Self {
        Sas::new(kind, vec![], vec![], vec![])
    }

    pub fn num_atoms(&self) -> usize {
        self.ge.len() + self.strict_or_diseq.len() + self.eq.len()
    }

    /// Relabels the system when that does not change its meaning, i.e. when
    /// it has no strict/disequality atoms.
    pub fn with_kind(&self, kind: SasKind) -> Option<Sas> {
        if self.kind == kind {
            return Some(self.clone());
        }
        if self.strict_or_diseq.is_empty() {
            let mut s = self.clone();
            s.kind = kind;
            return Some(s);
        }
        None
    }

    pub fn atoms(&self) -> impl Iterator<Item = (AtomKind, &RatPoly)> {
        let gk = match self.kind {
            SasKind::WithDiseq => AtomKind::Diseq,
            SasKind::WithStrict => AtomKind::StrictGt,
        };
        self.ge
            .iter()
            .map(|p| (AtomKind::NonStrictGe, p))
            .chain(self.strict_or_diseq.iter().map(move |p| (gk, p)))
            .chain(self.eq.iter().map(|p| (AtomKind::Eq, p)))
    }

    pub fn satisfies(&self, point: &BTreeMap<Var, BigRational>) -> Result<bool, PolyError> {
        for (kind, p) in self.atoms() {
            let v = p.eval(point)?;
            let ok = match kind {
                AtomKind::NonStrictGe => !v.is_negative(),
                AtomKind::StrictGt => v.is_positive(),
                AtomKind::Diseq => !v.is_zero(),
                AtomKind::Eq => v.is_zero(),
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `g != 0` becomes `g^2 > 0`.
    pub fn diseq_to_strict(&self) -> Sas {
        match self.kind {
            SasKind::WithStrict => self.clone(),
            SasKind::WithDiseq => Sas::new(
                SasKind::WithStrict,
                self.ge.clone(),
                self.strict_or_diseq.iter().map(|g| g * g).collect(),
                self.eq.clone(),
            ),
        }
    }

    /// `g > 0` becomes the pair `g >= 0`, `g != 0`.
    pub fn strict_to_diseq(&self) -> Sas {
        match self.kind {
            SasKind::WithDiseq => self.clone(),
            SasKind::WithStrict => {
                let mut ge = self.ge.clone();
                ge.extend(self.strict_or_diseq.iter().cloned());
                Sas::new(
                    SasKind::WithDiseq,
                    ge,
                    self.strict_or_diseq.clone(),
                    self.eq.clone(),
                )
            }
        }
    }

    /// Drops disequalities; strict atoms are weakened to `>=`.
    pub fn symbolic_closure(&self) -> Sas {
        let closed = self.strict_to_diseq();
        Sas::new(SasKind::WithDiseq, closed.ge, vec![], closed.eq)
    }

    /// Rejection sampling inside `bounds`, deterministic for a given seed.
    /// Equalities that are linear in some variable with a constant
    /// coefficient are solved for that variable instead of sampled.
    /// Gives up after `n * 200 + 1000` draws and returns what it has.
    pub fn sample_region(
        &self,
        bounds: &BTreeMap<Var, (f64, f64)>,
        n: usize,
        seed: u64,
    ) -> Vec<BTreeMap<Var, BigRational>> {
        let plan = elimination_plan(&self.eq);
        let sampled: BTreeSet<Var> = self
            .vars
            .iter()
            .filter(|v| !plan.iter().any(|(w, _)| w == *v))
            .cloned()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let budget = n.saturating_mul(200).saturating_add(1000);
        for _ in 0..budget {
            if out.len() >= n {
                break;
            }
            let mut point = draw_point(&mut rng, bounds, &sampled);
            for (v, expr) in plan.iter().rev() {
                let Ok(val) = expr.eval(&point) else { break };
                point.insert(v.clone(), val);
            }
            if self.satisfies(&point).unwrap_or(false) {
                out.push(point);
            }
        }
        out
    }
}

/// Greedy `var := expr` substitutions solving equalities of the form
/// `c * var + rest = 0` with `c` constant and `rest` free of `var`. Later
/// expressions never mention earlier variables, so evaluation runs in
/// reverse order.
fn elimination_plan(eqs: &[RatPoly]) -> Vec<(Var, RatPoly)> {
    let mut pending: Vec<RatPoly> = eqs.to_vec();
    let mut plan: Vec<(Var, RatPoly)> = Vec::new();
    loop {
        let mut found = None;
        'outer: for (k, h) in pending.iter().enumerate() {
            for v in h.vars() {
                let mut coeff = None;
                let mut ok = true;
                for (m, c) in h.terms() {
                    match m.exponent(&v) {
                        0 => {}
                        1 if m.degree() == 1 => coeff = Some(c.clone()),
                        _ => ok = false,
                    }
                }
                if let (true, Some(c)) = (ok, coeff) {
                    let var_poly = RatPoly::var(v.clone()).scale(&c);
                    let rest = h - &var_poly;
                    let expr = rest.scale(&(-BigRational::one() / c));
                    found = Some((k, v, expr));
                    break 'outer;
                }
            }
        }
        let Some((k, v, expr)) = found else { break };
        pending.remove(k);
        pending = pending
            .iter()
            .map(|h| substitute(h, &v, &expr))
            .filter(|h| !h.is_zero())
            .collect();
        plan.push((v, expr));
    }
    plan
}

fn substitute(p: &RatPoly, v: &Var, expr: &RatPoly) -> RatPoly {
    let mut out = RatPoly::zero();
    for (m, c) in p.terms() {
        let e = m.exponent(v);
        let rest: Monomial =
            Monomial::from_exponents(m.exponents().iter().filter(|(w, _)| w != v).cloned());
        let term = RatPoly::monomial(rest, c.clone());
        out = &out + &(&term * &expr.pow(e));
    }
    out
}

/// Draws a point with "sticky" coordinates: small probability of landing
/// exactly on 0 or an endpoint so that boundaries of closed sets are hit.
pub fn draw_point(
    rng: &mut impl Rng,
    bounds: &BTreeMap<Var, (f64, f64)>,
    vars: &BTreeSet<Var>,
) -> BTreeMap<Var, BigRational> {
    let mut point = BTreeMap::new();
    for v in vars.iter().chain(bounds.keys()) {
        if point.contains_key(v) {
            continue;
        }
        let (lo, hi) = bounds.get(v).copied().unwrap_or((-4.0, 4.0));
        let r: f64 = rng.random();
        let x = if r < 0.05 && lo <= 0.0 && 0.0 <= hi {
            0.0
        } else {
            // Quantize to a 1/1024 grid so that rational arithmetic stays small.
            let raw = lo + (hi - lo) * rng.random::<f64>();
            (raw * 1024.0).round() / 1024.0
        };
        point.insert(
            v.clone(),
            f64_to_rational(x.clamp(lo, hi)).expect("finite sample"),
        );
    }
    point
}

impl fmt::Display for Sas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num_atoms() == 0 {
            return f.write_str("true");
        }
        let parts: Vec<String> = self
            .atoms()
            .map(|(k, p)| {
                let op = match k {
                    AtomKind::NonStrictGe => ">=",
                    AtomKind::StrictGt => ">",
                    AtomKind::Diseq => "!=",
                    AtomKind::Eq => "=",
                };
                format!("{p} {op} 0")
            })
            .collect();
        f.write_str(&parts.join(" /\\ "))
    }
}

impl fmt::Debug for Sas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sas[{:?}]({self})", self.kind)
    }
}

/// Disjunctive normal form over systems.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SasFormula {
    pub disjuncts: Vec<Sas>,
}

impl SasFormula {
    pub fn single(s: Sas) -> Self {
        SasFormula { disjuncts: vec![s] }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.disjuncts
            .iter()
            .flat_map(|s| s.vars.iter().cloned())
            .collect()
    }

    pub fn satisfies(&self, point: &BTreeMap<Var, BigRational>) -> Result<bool, PolyError> {
        for s in &self.disjuncts {
            if s.satisfies(point)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl fmt::Display for SasFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.len() == 1 {
            return write!(f, "{}", self.disjuncts[0]);
        }
        let parts: Vec<String> = self.disjuncts.iter().map(|s| format!("({s})")).collect();
        f.write_str(&parts.join(" \\/ "))
    }
}

/// An interpolation problem: the two formulas of a problem file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub t: SasFormula,
    pub t_prime: SasFormula,
}

/// Parses one formula: atoms joined by `/\` (or `,`), disjuncts by `\/`.
pub fn parse(text: &str) -> Result<SasFormula, SasError> {
    parse_at(text, 1)
}

fn parse_at(text: &str, first_line: usize) -> Result<SasFormula, SasError> {
    let tokens = lex(text, first_line)?;
    let mut p = Parser { tokens, pos: 0 };
    let f = p.formula()?;
    if let Some(t) = p.peek() {
        return Err(p.err_at(t, "unexpected trailing input"));
    }
    Ok(f)
}

/// Parses a problem file with `T:` and `T':` sections. `#` starts a comment.
pub fn parse_problem(text: &str) -> Result<Problem, SasError> {
    let mut sections: Vec<(String, usize, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim_start();
        let header = ["T':", "T:"].iter().find(|h| trimmed.starts_with(**h));
        match header {
            Some(h) => {
                let body = &trimmed[h.len()..];
                sections.push((h.to_string(), idx + 1, body.to_string()));
            }
            None => match sections.last_mut() {
                Some((_, _, body)) => {
                    body.push('\n');
                    body.push_str(line);
                }
                None if line.trim().is_empty() => {}
                None => {
                    return Err(SasError::Syntax {
                        line: idx + 1,
                        col: 1,
                        msg: "expected a `T:` or `T':` section header".into(),
                    })
                }
            },
        }
    }
    let mut t = None;
    let mut tp = None;
    for (h, line, body) in sections {
        let f = parse_at(&body, line)?;
        let slot = if h == "T:" { &mut t } else { &mut tp };
        if slot.is_some() {
            return Err(SasError::Syntax {
                line,
                col: 1,
                msg: format!("duplicate section `{h}`"),
            });
        }
        *slot = Some(f);
    }
    match (t, tp) {
        (Some(t), Some(t_prime)) => Ok(Problem { t, t_prime }),
        _ => Err(SasError::Syntax {
            line: 1,
            col: 1,
            msg: "problem needs both `T:` and `T':` sections".into(),
        }),
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "T: {}", self.t)?;
        writeln!(f, "T': {}", self.t_prime)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const OPS: [&str; 16] = [
    "/\\", "\\/", ">=", "<=", "!=", "==", ">", "<", "=", "+", "-", "*", "/", "^", "(", ")",
];

fn lex(text: &str, first_line: usize) -> Result<Vec<Token>, SasError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let lineno = first_line + li;
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            if c == ',' {
                out.push(Token {
                    tok: Tok::Op("/\\"),
                    line: lineno,
                    col,
                });
                i += 1;
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
            {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let s = &line[start..i];
                let num = parse_decimal(s).ok_or_else(|| SasError::Syntax {
                    line: lineno,
                    col,
                    msg: format!("malformed number `{s}`"),
                })?;
                out.push(Token {
                    tok: Tok::Num(num),
                    line: lineno,
                    col,
                });
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(line[start..i].to_string()),
                    line: lineno,
                    col,
                });
                continue;
            }
            match OPS.iter().find(|op| line[i..].starts_with(**op)) {
                Some(op) => {
                    out.push(Token {
                        tok: Tok::Op(op),
                        line: lineno,
                        col,
                    });
                    i += op.len();
                }
                None => {
                    return Err(SasError::Syntax {
                        line: lineno,
                        col,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let mut parts = s.split('.');
    let int_part = parts.next()?;
    let frac = parts.next().unwrap_or("");
    if parts.next().is_some() || (int_part.is_empty() && frac.is_empty()) {
        return None;
    }
    let digits = format!("{int_part}{frac}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(numer, denom))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

enum Rel {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Op(o), .. }) if *o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.peek_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err_at(&self, t: &Token, msg: &str) -> SasError {
        SasError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.to_string(),
        }
    }

    fn err_here(&self, msg: &str) -> SasError {
        match self.peek() {
            Some(t) => self.err_at(t, msg),
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((1, 1));
                SasError::Syntax {
                    line,
                    col,
                    msg: format!("{msg} (at end of input)"),
                }
            }
        }
    }

    fn formula(&mut self) -> Result<SasFormula, SasError> {
        let mut disjuncts = vec![self.conjunction()?];
        while self.eat_op("\\/") {
            disjuncts.push(self.conjunction()?);
        }
        Ok(SasFormula { disjuncts })
    }

    fn conjunction(&mut self) -> Result<Sas, SasError> {
        let start = self.peek().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        let mut atoms: Vec<(AtomKind, RatPoly)> = Vec::new();
        self.conj_group(&mut atoms)?;
        while self.eat_op("/\\") {
            self.conj_group(&mut atoms)?;
        }
        let has_diseq = atoms.iter().any(|(k, _)| *k == AtomKind::Diseq);
        let has_strict = atoms.iter().any(|(k, _)| *k == AtomKind::StrictGt);
        if has_diseq && has_strict {
            return Err(SasError::MixedKinds {
                line: start.0,
                col: start.1,
            });
        }
        let kind = if has_diseq {
            SasKind::WithDiseq
        } else {
            SasKind::WithStrict
        };
        let mut ge = vec![];
        let mut g = vec![];
        let mut eq = vec![];
        for (k, p) in atoms {
            match k {
                AtomKind::NonStrictGe => ge.push(p),
                AtomKind::StrictGt | AtomKind::Diseq => g.push(p),
                AtomKind::Eq => eq.push(p),
            }
        }
        Ok(Sas::new(kind, ge, g, eq))
    }

    // A group is an atom, `true`, or a parenthesized conjunction.
    fn conj_group(&mut self, atoms: &mut Vec<(AtomKind, RatPoly)>) -> Result<(), SasError> {
        if matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == "true") {
            self.pos += 1;
            return Ok(());
        }
        let save = self.pos;
        match self.atom() {
            Ok(a) => {
                atoms.push(a);
                Ok(())
            }
            Err(atom_err) => {
                self.pos = save;
                if !self.eat_op("(") {
                    return Err(atom_err);
                }
                let inner = match self.conjunction() {
                    Ok(s) => s,
                    Err(_) => return Err(atom_err),
                };
                if !self.eat_op(")") {
                    return Err(atom_err);
                }
                atoms.extend(inner.atoms().map(|(k, p)| (k, p.clone())));
                Ok(())
            }
        }
    }

    fn atom(&mut self) -> Result<(AtomKind, RatPoly), SasError> {
        let lhs = self.expr()?;
        let rel = match self.peek() {
            Some(Token {
                tok: Tok::Op(o), ..
            }) => match *o {
                ">=" => Rel::Ge,
                ">" => Rel::Gt,
                "<=" => Rel::Le,
                "<" => Rel::Lt,
                "=" | "==" => Rel::Eq,
                "!=" => Rel::Ne,
                _ => return Err(self.err_here("expected a relation (>=, >, <=, <, =, !=)")),
            },
            _ => return Err(self.err_here("expected a relation (>=, >, <=, <, =, !=)")),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(match rel {
            Rel::Ge => (AtomKind::NonStrictGe, &lhs - &rhs),
            Rel::Gt => (AtomKind::StrictGt, &lhs - &rhs),
            Rel::Le => (AtomKind::NonStrictGe, &rhs - &lhs),
            Rel::Lt => (AtomKind::StrictGt, &rhs - &lhs),
            Rel::Eq => (AtomKind::Eq, &lhs - &rhs),
            Rel::Ne => (AtomKind::Diseq, &lhs - &rhs),
        })
    }

    fn expr(&mut self) -> Result<RatPoly, SasError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op("+") {
                acc = &acc + &self.term()?;
            } else if self.eat_op("-") {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn starts_factor(&self) -> bool {
        match self.peek() {
            Some(Token {
                tok: Tok::Num(_), ..
            }) => true,
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => s != "true",
            Some(Token {
                tok: Tok::Op("("), ..
            }) => true,
            _ => false,
        }
    }

    fn term(&mut self) -> Result<RatPoly, SasError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op("*") {
                acc = &acc * &self.unary()?;
            } else if self.peek_op("/") {
                let tok = self.peek().cloned().expect("peeked");
                self.pos += 1;
                let d = self.unary()?;
                let c = match (d.num_terms(), d.degree()) {
                    (1, Some(0)) => d.coeff(&Monomial::one()),
                    _ => return Err(self.err_at(&tok, "division only by nonzero constants")),
                };
                acc = acc.scale(&(BigRational::from_integer(1.into()) / c));
            } else if self.starts_factor() {
                acc = &acc * &self.power()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RatPoly, SasError> {
        if self.eat_op("-") {
            return Ok(-self.unary()?);
        }
        if self.eat_op("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RatPoly, SasError> {
        let base = self.primary()?;
        if self.eat_op("^") {
            match self.peek().cloned() {
                Some(Token {
                    tok: Tok::Num(n), ..
                }) if n.is_integer() && !n.is_negative() => {
                    self.pos += 1;
                    let e: u32 = n
                        .to_integer()
                        .try_into()
                        .map_err(|_| self.err_here("exponent too large"))?;
                    return Ok(base.pow(e));
                }
                _ => return Err(self.err_here("expected a nonnegative integer exponent")),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<RatPoly, SasError> {
        match self.peek().cloned() {
            Some(Token {
                tok: Tok::Num(n), ..
            }) => {
                self.pos += 1;
                Ok(RatPoly::constant(n))
            }
            Some(Token {
                tok: Tok::Ident(s), ..
            }) if s != "true" => {
                self.pos += 1;
                Ok(RatPoly::var(Var::new(&s)))
            }
            Some(Token {
                tok: Tok::Op("("), ..
            }) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat_op(")") {
                    return Err(self.err_here("expected `)`"));
                }
                Ok(e)
            }
            _ => Err(self.err_here("expected a number, variable or `(`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::int;
    use proptest::prelude::*;

    fn p(s: &str) -> RatPoly {
        let f = parse(&format!("{s} = 0")).unwrap();
        f.disjuncts[0].eq[0].clone()
    }

    fn pt(vals: &[(&str, i64)]) -> BTreeMap<Var, BigRational> {
        vals.iter().map(|(n, v)| (Var::new(n), int(*v))).collect()
    }

    #[test]
    fn parses_strict_pair() {
        let f = parse("y > x /\\ x > -y").unwrap();
        assert_eq!(f.disjuncts.len(), 1);
        let s = &f.disjuncts[0];
        assert_eq!(s.kind, SasKind::WithStrict);
        assert_eq!(s.strict_or_diseq, vec![p("y - x"), p("x + y")]);
    }

    #[test]
    fn parses_equality_and_disjunction() {
        let f = parse("y = 0").unwrap();
        assert_eq!(f.disjuncts[0].eq, vec![p("y")]);
        let f = parse("(y >= (x-1)^2) \\/ (y > (x+1)^2)").unwrap();
        assert_eq!(f.disjuncts.len(), 2);
        assert_eq!(f.disjuncts[0].ge, vec![p("y - x^2 + 2x - 1")]);
        assert_eq!(f.disjuncts[1].strict_or_diseq, vec![p("y - x^2 - 2*x - 1")]);
    }

    #[test]
    fn normalizes_orientation() {
        let s = &parse("y <= -1").unwrap().disjuncts[0];
        assert_eq!(s.ge, vec![p("-1 - y")]);
        let s = &parse("x^2 + y^2 < 1").unwrap().disjuncts[0];
        assert_eq!(s.strict_or_diseq, vec![p("1 - x^2 - y^2")]);
        let s = &parse("1.5x != 1/2").unwrap().disjuncts[0];
        assert_eq!(s.kind, SasKind::WithDiseq);
        assert_eq!(s.strict_or_diseq, vec![p("3/2*x - 1/2")]);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("y > x /\\\n x >> 1") {
            Err(SasError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("x > 0 /\\ y != 0"),
            Err(SasError::MixedKinds { .. })
        ));
        assert!(parse("x + 1").is_err());
        assert!(parse("x / y > 0").is_err());
    }

    #[test]
    fn problem_file() {
        let text = "# row 1\nT:  y > x /\\ x > -y\nT': 0 >= y   # negation\n";
        let prob = parse_problem(text).unwrap();
        assert_eq!(prob.t.disjuncts[0].strict_or_diseq.len(), 2);
        assert_eq!(prob.t_prime.disjuncts[0].ge, vec![p("-y")]);
        let multi = "T:\n  x >= 0\n  /\\ y >= 0\nT':\n x + y < 0\n";
        let prob = parse_problem(multi).unwrap();
        assert_eq!(prob.t.disjuncts[0].ge.len(), 2);
        assert!(parse_problem("T: x > 0\n").is_err());
        match parse_problem("T: x > 0\nT': y >> 0\n") {
            Err(SasError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn satisfies_examples() {
        let t = &parse("y <= -1").unwrap().disjuncts[0];
        assert!(t.satisfies(&pt(&[("x", 0), ("y", -1)])).unwrap());
        let tp = &parse("x^2 + y^2 < 1").unwrap().disjuncts[0];
        assert!(!tp.satisfies(&pt(&[("x", 0), ("y", -1)])).unwrap());
        let cegar = &parse("xa = 0 /\\ ya = 0").unwrap().disjuncts[0];
        assert!(cegar.satisfies(&pt(&[("xa", 0), ("ya", 0)])).unwrap());
        assert!(t.satisfies(&pt(&[("x", 0)])).is_err());
    }

    #[test]
    fn translations() {
        let s = &parse("g != 0").unwrap().disjuncts[0];
        assert_eq!(s.diseq_to_strict().strict_or_diseq, vec![p("g^2")]);
        let plain = &parse("y >= 0 /\\ x = 1").unwrap().disjuncts[0];
        assert_eq!(plain.diseq_to_strict(), *plain);
        assert_eq!(plain.strict_to_diseq().ge, plain.ge);
        let strict = &parse("x > 0").unwrap().disjuncts[0];
        let back = strict.strict_to_diseq();
        assert_eq!(back.kind, SasKind::WithDiseq);
        assert_eq!(
            (back.ge.clone(), back.strict_or_diseq.clone()),
            (vec![p("x")], vec![p("x")])
        );
    }

    #[test]
    fn translation_semantics_on_grid() {
        let s = &parse("x != 0 /\\ y >= 0").unwrap().disjuncts[0];
        let t = s.diseq_to_strict();
        let strict = &parse("x - y > 0 /\\ y >= 0").unwrap().disjuncts[0];
        let d = strict.strict_to_diseq();
        for a in -3..=3 {
            for b in -3..=3 {
                let at = pt(&[("x", a), ("y", b)]);
                assert_eq!(s.satisfies(&at).unwrap(), t.satisfies(&at).unwrap());
                assert_eq!(strict.satisfies(&at).unwrap(), d.satisfies(&at).unwrap());
            }
        }
    }

    #[test]
    fn closure_examples() {
        let s = &parse("y > x /\\ x > -y").unwrap().disjuncts[0];
        assert_eq!(s.symbolic_closure().ge, vec![p("y - x"), p("x + y")]);
        let h = &parse("h = 0").unwrap().disjuncts[0];
        assert_eq!(h.symbolic_closure().eq, vec![p("h")]);
        let disk = &parse("x^2 + y^2 < 1").unwrap().disjuncts[0];
        let c = disk.symbolic_closure();
        assert_eq!(c.ge, vec![p("1 - x^2 - y^2")]);
        assert!(c.strict_or_diseq.is_empty());
    }

    #[test]
    fn barely_disjoint_witness() {
        // Row 4 inputs: closures meet at the origin.
        let t = &parse("y > x /\\ x > -y").unwrap().disjuncts[0];
        let tp = &parse("y <= -x^2").unwrap().disjuncts[0];
        let origin = pt(&[("x", 0), ("y", 0)]);
        assert!(!t.satisfies(&origin).unwrap());
        assert!(t.symbolic_closure().satisfies(&origin).unwrap());
        assert!(tp.symbolic_closure().satisfies(&origin).unwrap());
    }

    fn unit_box(vars: &[&str], lo: f64, hi: f64) -> BTreeMap<Var, (f64, f64)> {
        vars.iter().map(|v| (Var::new(v), (lo, hi))).collect()
    }

    #[test]
    fn sampler() {
        let s = &parse("y >= 0").unwrap().disjuncts[0];
        let pts = s.sample_region(&unit_box(&["y"], -1.0, 1.0), 10, 7);
        assert_eq!(pts.len(), 10);
        assert!(pts.iter().all(|q| !q[&Var::new("y")].is_negative()));
        let empty = &parse("x^2 + y^2 < 1 /\\ y <= -1").unwrap().disjuncts[0];
        assert!(empty
            .sample_region(&unit_box(&["x", "y"], -2.0, 2.0), 10, 1)
            .is_empty());
        let para = &parse("y >= x^2 + 1").unwrap().disjuncts[0];
        let mut bx = unit_box(&["x"], -2.0, 2.0);
        bx.insert(Var::new("y"), (0.0, 5.0));
        let pts = para.sample_region(&bx, 50, 3);
        assert!(!pts.is_empty());
        for q in &pts {
            let (x, y) = (&q[&Var::new("x")], &q[&Var::new("y")]);
            assert!(y >= &(x * x + int(1)));
        }
        assert_eq!(para.sample_region(&bx, 50, 3), pts);
    }

    fn arb_poly() -> impl Strategy<Value = RatPoly> {
        let term = (0u32..3, 0u32..2, -6i64..7, 1i64..3);
        prop::collection::vec(term, 1..4).prop_map(|ts| {
            RatPoly::from_terms(ts.into_iter().map(|(a, b, n, d)| {
                (
                    Monomial::from_exponents([(Var::new("x"), a), (Var::new("y"), b)]),
                    crate::poly::rat(n, d),
                )
            }))
        })
    }

    fn arb_sas() -> impl Strategy<Value = Sas> {
        (
            any::<bool>(),
            prop::collection::vec(arb_poly(), 0..3),
            prop::collection::vec(arb_poly(), 0..3),
            prop::collection::vec(arb_poly(), 0..2),
        )
            .prop_map(|(diseq, ge, g, eq)| {
                let nz = |v: Vec<RatPoly>| -> Vec<RatPoly> {
                    v.into_iter().filter(|p| !p.is_zero()).collect()
                };
                let g = nz(g);
                let kind = if diseq && !g.is_empty() {
                    SasKind::WithDiseq
                } else {
                    SasKind::WithStrict
                };
                Sas::new(kind, nz(ge), g, nz(eq))
            })
    }

    #[test]
    fn sampler_solves_linear_equalities() {
        let s = parse("x1 = 0 /\\ v2 = v1 + 2 /\\ x2 = x1 + 2*v1 /\\ x2 < 0")
            .unwrap()
            .disjuncts
            .remove(0);
        let pts = s.sample_region(&BTreeMap::new(), 50, 3);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| s.satisfies(p).unwrap()));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(ds in prop::collection::vec(arb_sas(), 1..3)) {
            let f = SasFormula { disjuncts: ds };
            let back = parse(&f.to_string()).unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn translations_preserve_semantics(s in arb_sas(), a in -3i64..4, b in -3i64..4) {
            let at = pt(&[("x", a), ("y", b)]);
            let direct = s.satisfies(&at).unwrap();
            prop_assert_eq!(direct, s.diseq_to_strict().satisfies(&at).unwrap());
            prop_assert_eq!(direct, s.strict_to_diseq().satisfies(&at).unwrap());
            if direct {
                prop_assert!(s.symbolic_closure().satisfies(&at).unwrap());
            }
        }
    }
}
