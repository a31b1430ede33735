//! Recursive-descent parser for the fragment
//!
//! ```text
//! phi := G[a,b] psi | F[a,b] psi | F[a,b]G[c,d] psi
//! psi := conj
//! conj := unary ("&" unary)*
//! unary := "true" | ident | "!" ident | "(" conj ")"
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{Interval, Predicate, StateFormula, TemporalFormula};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unbound predicate `{name}` at {position}")]
    Unbound { position: usize, name: String },
    #[error("negation of non-affine predicate `{name}` at {position} breaks concavity")]
    NotConcave { position: usize, name: String },
    #[error("malformed interval [{a}, {b}] at {position}")]
    Interval { position: usize, a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LBrack,
    RBrack,
    LParen,
    RParen,
    Comma,
    Bang,
    Amp,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            '[' => out.push((Tok::LBrack, start)),
            ']' => out.push((Tok::RBrack, start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            ',' => out.push((Tok::Comma, start)),
            '!' => out.push((Tok::Bang, start)),
            '&' => out.push((Tok::Amp, start)),
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                i += 1;
                while i < bytes.len() {
                    let b = bytes[i];
                    let exp_sign = (b == b'-' || b == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    position: start,
                    message: format!("invalid number `{lit}`"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    env: &'a BTreeMap<String, Predicate>,
    // Shared leaves so repeated names evaluate the same predicate.
    interned: BTreeMap<String, Arc<Predicate>>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.syntax("expected number"),
        }
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let position = self.offset();
        self.expect(Tok::LBrack, "`[`")?;
        let a = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let b = self.number()?;
        self.expect(Tok::RBrack, "`]`")?;
        Interval::new(a, b).map_err(|_| ParseError::Interval { position, a, b })
    }

    fn is_operator(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
            && matches!(self.toks.get(self.pos + 1), Some((Tok::LBrack, _)))
    }

    fn temporal(&mut self) -> Result<TemporalFormula, ParseError> {
        if self.is_operator("G") {
            self.bump();
            let i = self.interval()?;
            let body = self.conj()?;
            return Ok(TemporalFormula::Always(i, body));
        }
        if self.is_operator("F") {
            self.bump();
            let outer = self.interval()?;
            if self.is_operator("G") {
                self.bump();
                let inner = self.interval()?;
                let body = self.conj()?;
                return Ok(TemporalFormula::EventuallyAlways { outer, inner, body });
            }
            let body = self.conj()?;
            return Ok(TemporalFormula::Eventually(outer, body));
        }
        self.syntax("expected `G[a,b]` or `F[a,b]`")
    }

    fn conj(&mut self) -> Result<StateFormula, ParseError> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(StateFormula::and(parts))
    }

    fn leaf(&mut self, name: &str, position: usize) -> Result<Arc<Predicate>, ParseError> {
        if let Some(p) = self.interned.get(name) {
            return Ok(p.clone());
        }
        let p = self.env.get(name).ok_or_else(|| ParseError::Unbound {
            position,
            name: name.to_string(),
        })?;
        let p = Arc::new(p.clone());
        self.interned.insert(name.to_string(), p.clone());
        Ok(p)
    }

    fn unary(&mut self) -> Result<StateFormula, ParseError> {
        match self.bump() {
            (Tok::Ident(name), _) if name == "true" => Ok(StateFormula::True),
            (Tok::Ident(name), position) => Ok(StateFormula::Pred(self.leaf(&name, position)?)),
            (Tok::Bang, _) => match self.bump() {
                (Tok::Ident(name), position) if name != "true" => {
                    let p = self.leaf(&name, position)?;
                    if !p.is_affine() {
                        return Err(ParseError::NotConcave { position, name });
                    }
                    Ok(StateFormula::NegPred(p))
                }
                (_, position) => Err(ParseError::Syntax {
                    position,
                    message: "negation applies to a predicate name only".into(),
                }),
            },
            (Tok::LParen, _) => {
                let inner = self.conj()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            (_, position) => Err(ParseError::Syntax {
                position,
                message: "expected `true`, predicate, `!` or `(`".into(),
            }),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.syntax("trailing input")
        }
    }
}

/// Parses a temporal formula against a predicate environment.
pub fn parse_formula(
    text: &str,
    env: &BTreeMap<String, Predicate>,
) -> Result<TemporalFormula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        env,
        interned: BTreeMap::new(),
    };
    let phi = p.temporal()?;
    p.finish()?;
    Ok(phi)
}

/// Parses a bare state formula (`psi`).
pub fn parse_state_formula(
    text: &str,
    env: &BTreeMap<String, Predicate>,
) -> Result<StateFormula, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        env,
        interned: BTreeMap::new(),
    };
    let psi = p.conj()?;
    p.finish()?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> BTreeMap<String, Predicate> {
        let mut env = BTreeMap::new();
        for p in [
            Predicate::affine("p1", vec![1.0], 0.0, vec![0]).unwrap(),
            Predicate::affine("low", vec![-1.0], 25.0, vec![0]).unwrap(),
            Predicate::affine("high", vec![1.0], -21.0, vec![0]).unwrap(),
            Predicate::ball("ball", vec![0.0, 0.0], 1.0, vec![0, 1]).unwrap(),
        ] {
            env.insert(p.name().to_string(), p);
        }
        env
    }

    #[test]
    fn always_with_single_predicate() {
        let phi = parse_formula("G[0,8] p1", &env()).unwrap();
        match phi {
            TemporalFormula::Always(i, StateFormula::Pred(p)) => {
                assert_eq!((i.start(), i.end()), (0.0, 8.0));
                assert_eq!(p.name(), "p1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eventually_always_room_task() {
        let phi = parse_formula("F[0,1000]G[200,1000] (low & high)", &env()).unwrap();
        match &phi {
            TemporalFormula::EventuallyAlways { outer, inner, body } => {
                assert_eq!((outer.start(), outer.end()), (0.0, 1000.0));
                assert_eq!((inner.start(), inner.end()), (200.0, 1000.0));
                assert!(matches!(body, StateFormula::And(parts) if parts.len() == 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(phi.to_string(), "F[0,1000]G[200,1000] (low & high)");
    }

    #[test]
    fn negated_ball_is_rejected() {
        assert!(matches!(
            parse_formula("G[0,1] !ball", &env()),
            Err(ParseError::NotConcave { position: 8, .. })
        ));
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(
            parse_formula("G[0,1] nope", &env()),
            Err(ParseError::Unbound { position: 7, .. })
        ));
        assert!(matches!(
            parse_formula("G[5,1] p1", &env()),
            Err(ParseError::Interval { position: 1, .. })
        ));
        assert!(matches!(
            parse_formula("G[0,1] p1 &", &env()),
            Err(ParseError::Syntax { position: 11, .. })
        ));
        assert!(matches!(
            parse_formula("X[0,1] p1", &env()),
            Err(ParseError::Syntax { position: 0, .. })
        ));
        assert!(matches!(
            parse_formula("G[0,1] (p1 & low", &env()),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn decimal_intervals_and_true() {
        let phi = parse_formula("F[0.5,2.25] true & !p1", &env()).unwrap();
        let (lo, hi) = phi.horizon();
        assert_eq!((lo, hi), (0.5, 2.25));
        assert_eq!(phi.to_string(), "F[0.5,2.25] (true & !p1)");
    }
}
