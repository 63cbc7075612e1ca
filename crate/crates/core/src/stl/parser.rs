//! Text grammar for STL and parametric STL.
//!
//! ```text
//! phi  := "(" phi ")" | "!" phi | phi "&&" phi | phi "||" phi | phi "->" phi
//!       | "G[" num "," num "]" phi | "F[" num "," num "]" phi | phi "U[" num "," num "]" phi
//!       | term cmp num
//! term := linear expression over identifiers using "+", "-" and "*" by a constant
//! cmp  := ">" | "<" | ">=" | "<="
//! ```
//!
//! Precedence, tightest first: `!`, temporal operators, `&&`, `||`, `->`.
//! `->` is right-associative, the others associate left. Parametric formulas may
//! use `$name` wherever a number appears in a bound or interval.

use std::fmt;

use thiserror::Error;

use super::formula::{Comparator, Formula, Interval, Predicate};
use super::term::Term;
use crate::pstl::{PstlFormula, Slot, SlotInterval};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Param(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Plus,
    Minus,
    Star,
    Cmp(Comparator),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Param(s) => write!(f, "parameter `${s}`"),
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Cmp(c) => write!(f, "`{}`", c.symbol()),
            Tok::Eof => write!(f, "end of input"),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::Comma => ",",
                    Tok::Bang => "!",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    Tok::Arrow => "->",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    _ => "*",
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError { line, column, message };
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
        let (start_line, start_col) = (line, col);
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, width) = match two.as_str() {
            "&&" => (Tok::AndAnd, 2),
            "||" => (Tok::OrOr, 2),
            "->" => (Tok::Arrow, 2),
            ">=" => (Tok::Cmp(Comparator::Ge), 2),
            "<=" => (Tok::Cmp(Comparator::Le), 2),
            _ => match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                ',' => (Tok::Comma, 1),
                '!' => (Tok::Bang, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                '>' => (Tok::Cmp(Comparator::Gt), 1),
                '<' => (Tok::Cmp(Comparator::Lt), 1),
                '$' | '_' | 'a'..='z' | 'A'..='Z' => {
                    let mut j = i + 1;
                    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    // primed names (`x'`) refer to next-state values in model expressions
                    if j < chars.len() && chars[j] == '\'' && c != '$' {
                        j += 1;
                    }
                    let word: String = chars[i..j].iter().collect();
                    if c == '$' {
                        if word.len() == 1 {
                            return Err(err(line, col, "expected parameter name after `$`".into()));
                        }
                        (Tok::Param(word[1..].to_string()), j - i)
                    } else {
                        (Tok::Ident(word), j - i)
                    }
                }
                '0'..='9' | '.' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                        j += 1;
                    }
                    if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                        let mut k = j + 1;
                        if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                            k += 1;
                        }
                        if k < chars.len() && chars[k].is_ascii_digit() {
                            while k < chars.len() && chars[k].is_ascii_digit() {
                                k += 1;
                            }
                            j = k;
                        }
                    }
                    let s: String = chars[i..j].iter().collect();
                    let n = s
                        .parse::<f64>()
                        .map_err(|_| err(line, col, format!("malformed number `{s}`")))?;
                    (Tok::Num(n), j - i)
                }
                other => return Err(err(line, col, format!("unexpected character `{other}`"))),
            },
        };
        out.push(Spanned { tok, line: start_line, column: start_col });
        i += width;
        col += width;
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    allow_params: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let s = &self.toks[self.pos];
        Err(ParseError { line: s.line, column: s.column, message: message.into() })
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {want}, found {}", self.peek()))
        }
    }

    fn temporal_keyword(&self) -> Option<char> {
        match (self.peek(), self.peek2()) {
            (Tok::Ident(s), Tok::LBracket) if s == "G" || s == "F" || s == "U" => s.chars().next(),
            _ => None,
        }
    }

    fn formula(&mut self) -> Result<PstlFormula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(PstlFormula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<PstlFormula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = PstlFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<PstlFormula, ParseError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.until()?;
            lhs = PstlFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<PstlFormula, ParseError> {
        let mut lhs = self.unary()?;
        while self.temporal_keyword() == Some('U') {
            self.bump();
            let iv = self.interval()?;
            let rhs = self.unary()?;
            lhs = PstlFormula::Until(iv, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PstlFormula, ParseError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(PstlFormula::Not(Box::new(self.unary()?)));
        }
        match self.temporal_keyword() {
            Some('G') => {
                self.bump();
                let iv = self.interval()?;
                Ok(PstlFormula::Globally(iv, Box::new(self.unary()?)))
            }
            Some('F') => {
                self.bump();
                let iv = self.interval()?;
                Ok(PstlFormula::Eventually(iv, Box::new(self.unary()?)))
            }
            Some(_) => self.error("`U[..]` needs a left operand"),
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<PstlFormula, ParseError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<PstlFormula, ParseError> {
        let term = self.term()?;
        let cmp = match self.peek() {
            Tok::Cmp(c) => *c,
            other => return self.error(format!("expected comparator, found {other}")),
        };
        self.bump();
        let bound = self.slot()?;
        Ok(PstlFormula::Pred { term, cmp, bound })
    }

    fn interval(&mut self) -> Result<SlotInterval, ParseError> {
        self.expect(Tok::LBracket)?;
        let start = self.slot()?;
        self.expect(Tok::Comma)?;
        let end = self.slot()?;
        self.expect(Tok::RBracket)?;
        if let (Slot::Const(a), Slot::Const(b)) = (&start, &end) {
            if !Interval::new(*a, *b).is_valid() {
                return self.error(format!("invalid interval [{a},{b}]: need 0 <= a <= b"));
            }
        }
        Ok(SlotInterval { start, end })
    }

    fn slot(&mut self) -> Result<Slot, ParseError> {
        match self.peek().clone() {
            Tok::Param(p) => {
                if !self.allow_params {
                    return self.error(format!("parameter `${p}` not allowed in a plain STL formula"));
                }
                self.bump();
                Ok(Slot::Param(p))
            }
            _ => Ok(Slot::Const(self.signed_number()?)),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let mut sign = 1.0;
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if self.bump() == Tok::Minus {
                sign = -sign;
            }
        }
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(sign * n)
            }
            other => self.error(format!("expected number, found {other}")),
        }
    }

    fn term(&mut self) -> Result<Term<f64>, ParseError> {
        let mut term = Term::constant(0.0);
        let mut sign = 1.0;
        if matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if self.bump() == Tok::Minus {
                sign = -1.0;
            }
        }
        loop {
            self.summand(sign, &mut term)?;
            match self.peek() {
                Tok::Plus => sign = 1.0,
                Tok::Minus => sign = -1.0,
                _ => break,
            }
            self.bump();
        }
        Ok(term)
    }

    fn summand(&mut self, sign: f64, term: &mut Term<f64>) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                if *self.peek() == Tok::Star {
                    self.bump();
                    match self.bump() {
                        Tok::Ident(name) => term.add_var(&name, sign * n),
                        other => {
                            self.pos -= 1;
                            return self.error(format!("expected identifier after `*`, found {other}"));
                        }
                    }
                } else {
                    term.constant += sign * n;
                }
                Ok(())
            }
            Tok::Ident(name) => {
                self.bump();
                let mut coef = 1.0;
                if *self.peek() == Tok::Star {
                    self.bump();
                    coef = self.signed_number()?;
                }
                term.add_var(&name, sign * coef);
                Ok(())
            }
            other => self.error(format!("expected term, found {other}")),
        }
    }
}

fn run<T>(
    text: &str,
    allow_params: bool,
    body: impl FnOnce(&mut Parser) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, allow_params };
    let out = body(&mut p)?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {} after end of formula", p.peek()));
    }
    Ok(out)
}

/// Parses a parametric formula; `$name` slots are allowed in bounds and intervals.
pub fn parse_pstl(text: &str) -> Result<PstlFormula, ParseError> {
    run(text, true, |p| p.formula())
}

/// Parses a parameter-free STL formula.
pub fn parse_stl<S: Scalar>(text: &str) -> Result<Formula<S>, ParseError> {
    let pf = run(text, false, |p| p.formula())?;
    Ok(lower(&pf).cast())
}

/// Parses a bare linear expression, e.g. `x + 0.5*v' - 2`.
pub fn parse_term(text: &str) -> Result<Term<f64>, ParseError> {
    run(text, false, |p| p.term())
}

fn lower(f: &PstlFormula) -> Formula<f64> {
    let konst = |s: &Slot| match s {
        Slot::Const(c) => *c,
        Slot::Param(_) => unreachable!("parameters rejected while parsing"),
    };
    let iv = |i: &SlotInterval| Interval::new(konst(&i.start), konst(&i.end));
    let b = |x: &PstlFormula| Box::new(lower(x));
    match f {
        PstlFormula::Pred { term, cmp, bound } => {
            Formula::Pred(Predicate { term: term.clone(), cmp: *cmp, bound: konst(bound) })
        }
        PstlFormula::Not(x) => Formula::Not(b(x)),
        PstlFormula::And(x, y) => Formula::And(b(x), b(y)),
        PstlFormula::Or(x, y) => Formula::Or(b(x), b(y)),
        PstlFormula::Implies(x, y) => Formula::Implies(b(x), b(y)),
        PstlFormula::Until(i, x, y) => Formula::Until(iv(i), b(x), b(y)),
        PstlFormula::Eventually(i, x) => Formula::Eventually(iv(i), b(x)),
        PstlFormula::Globally(i, x) => Formula::Globally(iv(i), b(x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula<f64> {
        parse_stl(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    #[test]
    fn globally_thrust() {
        let f = p("G[0,1](thrust > 100)");
        assert_eq!(
            f,
            Formula::globally(
                Interval::new(0.0, 1.0),
                Formula::pred(Term::var("thrust"), Comparator::Gt, 100.0)
            )
        );
    }

    #[test]
    fn visibility_implication() {
        let f = p("(visibility < 20) -> F[0,5](distance_to_pipeline < 10)");
        assert_eq!(
            f,
            Formula::implies(
                Formula::pred(Term::var("visibility"), Comparator::Lt, 20.0),
                Formula::eventually(
                    Interval::new(0.0, 5.0),
                    Formula::pred(Term::var("distance_to_pipeline"), Comparator::Lt, 10.0)
                )
            )
        );
    }

    #[test]
    fn negation() {
        assert_eq!(p("!(x > 0)"), Formula::not(Formula::pred(Term::var("x"), Comparator::Gt, 0.0)));
    }

    #[test]
    fn precedence_and_associativity() {
        let a = || Formula::pred(Term::var("a"), Comparator::Gt, 0.0);
        let b = || Formula::pred(Term::var("b"), Comparator::Gt, 0.0);
        let c = || Formula::pred(Term::var("c"), Comparator::Gt, 0.0);
        assert_eq!(p("a > 0 || b > 0 && c > 0"), Formula::or(a(), Formula::and(b(), c())));
        assert_eq!(p("a > 0 -> b > 0 -> c > 0"), Formula::implies(a(), Formula::implies(b(), c())));
        assert_eq!(
            p("!a > 0 && G[0,2] b > 0"),
            Formula::and(Formula::not(a()), Formula::globally(Interval::new(0.0, 2.0), b()))
        );
        assert_eq!(
            p("a > 0 U[1,3] b > 0 && c > 0"),
            Formula::and(Formula::until(Interval::new(1.0, 3.0), a(), b()), c())
        );
    }

    #[test]
    fn linear_terms() {
        let f = p("2*x - y*0.5 + 3 - x >= -1");
        let Formula::Pred(pr) = f else { panic!() };
        assert_eq!(pr.term.coefficients["x"], 1.0);
        assert_eq!(pr.term.coefficients["y"], -0.5);
        assert_eq!(pr.term.constant, 3.0);
        assert_eq!(pr.cmp, Comparator::Ge);
        assert_eq!(pr.bound, -1.0);
    }

    #[test]
    fn identifiers_named_like_operators() {
        let f = p("G > 1 && F[0,1](U < 2)");
        assert!(matches!(f, Formula::And(..)));
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_stl::<f64>("G[0,1](x > )").unwrap_err();
        assert_eq!((e.line, e.column), (1, 12));
        let e = parse_stl::<f64>("x > 0 &&\n  (y <").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_stl::<f64>("G[3,1](x > 0)").is_err());
        assert!(parse_stl::<f64>("x > $p").is_err());
        assert!(parse_stl::<f64>("x > 0 y").is_err());
    }

    #[test]
    fn unknown_variables_parse() {
        assert!(parse_stl::<f64>("never_declared > 0").is_ok());
    }

    #[test]
    fn print_round_trip_examples() {
        for s in [
            "G[0,1](thrust > 100)",
            "(visibility < 20) -> F[0,5](distance_to_pipeline < 10)",
            "!(x > 0)",
            "(a - 2*b + 0.25 <= 3) U[0.5,2] (c >= -1)",
            "G[0,1]((visibility < 20) -> F[0,15](distance_to_pipeline < 10))",
        ] {
            let f = p(s);
            assert_eq!(p(&f.to_string()), f, "{s}");
        }
    }

    #[test]
    fn parametric_slots() {
        let f = parse_pstl("F[$t1,$t2](f > $a)").unwrap();
        let PstlFormula::Eventually(iv, inner) = &f else { panic!() };
        assert_eq!(iv.end, Slot::Param("t2".into()));
        assert!(matches!(**inner, PstlFormula::Pred { bound: Slot::Param(_), .. }));
        assert_eq!(parse_pstl(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn primed_identifiers_in_terms() {
        let t = parse_term("x + 0.5*v' - 2").unwrap();
        assert_eq!(t.coefficients["v'"], 0.5);
        assert_eq!(t.constant, -2.0);
    }
}
