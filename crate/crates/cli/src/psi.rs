//! Terminal data expressions.
//!
//! A sum of terms `[coefficient [*]] sin(k1, k2)` or `cos(k1, k2)`, each
//! standing for `coefficient * sin(2 pi (k1 x1 + k2 x2))`. The literal `0`
//! denotes zero data.
//!
//! ```text
//! psi = 1.0*sin(1,0) + 0.5 * cos(1, 1) - sin(0, 2)
//! ```

use vorticity_bsde::field::{ScalarField, TrigTerm};
use vorticity_bsde::{Error, Result};

pub const MAX_EXPRESSION_LEN: usize = 64 * 1024;

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.pos += want.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        if self.eat(want) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{want}`")))
        }
    }

    fn error(&self, msg: &str) -> Error {
        Error::Format(format!("{msg} at column {}", self.pos + 1))
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        let start = self.pos;
        let mantissa = self.take_while(|c| c.is_ascii_digit() || c == '.');
        if mantissa.is_empty() {
            return Ok(None);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => {
                self.pos = start;
                Err(self.error(&format!("invalid number `{text}`")))
            }
        }
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let neg = self.eat('-');
        self.skip_ws();
        let digits = self.take_while(|c| c.is_ascii_digit());
        let v: i64 = digits
            .parse()
            .map_err(|_| self.error("expected an integer wavenumber"))?;
        Ok(if neg { -v } else { v })
    }

    fn term(&mut self, sign: f64) -> Result<TrigTerm> {
        let sign = if self.eat('-') { -sign } else { sign };
        let coefficient = match self.number()? {
            Some(c) => {
                self.eat('*');
                c
            }
            None => 1.0,
        };
        self.skip_ws();
        let name = self.take_while(|c| c.is_ascii_alphabetic());
        let ctor: fn(f64, (i64, i64)) -> TrigTerm = match name {
            "sin" => TrigTerm::sin,
            "cos" => TrigTerm::cos,
            "" => return Err(self.error("expected `sin` or `cos`")),
            other => return Err(self.error(&format!("unknown function `{other}`"))),
        };
        self.expect('(')?;
        let k1 = self.integer()?;
        self.expect(',')?;
        let k2 = self.integer()?;
        self.expect(')')?;
        if (k1, k2) == (0, 0) {
            return Err(self.error("wavenumber (0, 0) would give nonzero mean"));
        }
        Ok(ctor(sign * coefficient, (k1, k2)))
    }
}

/// Parses an expression into its terms; `0` gives no terms.
pub fn parse_psi(src: &str) -> Result<Vec<TrigTerm>> {
    if src.len() > MAX_EXPRESSION_LEN {
        return Err(Error::Format(format!(
            "expression longer than {MAX_EXPRESSION_LEN} bytes"
        )));
    }
    let trimmed = src.trim();
    if trimmed.is_empty() {
        return Err(Error::Format("empty expression".into()));
    }
    if trimmed.parse::<f64>() == Ok(0.0) {
        return Ok(Vec::new());
    }
    let mut cur = Cursor { src, pos: 0 };
    let mut terms = Vec::new();
    let mut sign = if cur.eat('-') {
        -1.0
    } else {
        cur.eat('+');
        1.0
    };
    loop {
        terms.push(cur.term(sign)?);
        cur.skip_ws();
        sign = match cur.peek() {
            None => break,
            Some('+') => 1.0,
            Some('-') => -1.0,
            Some(c) => return Err(cur.error(&format!("unexpected `{c}`"))),
        };
        cur.pos += 1;
    }
    Ok(terms)
}

/// Builds the field on an `n` grid; every mode must be resolved.
pub fn psi_field(terms: &[TrigTerm], n: usize) -> Result<ScalarField> {
    ScalarField::from_trig_terms(n, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use vorticity_bsde::field::TrigKind;

    #[test]
    fn parses_sums_of_modes() {
        let t = parse_psi("1.0*sin(1,0) + 0.5 * cos(1, 1) - sin(0, -2)").unwrap();
        assert_eq!(
            t,
            vec![
                TrigTerm::sin(1.0, (1, 0)),
                TrigTerm::cos(0.5, (1, 1)),
                TrigTerm::sin(-1.0, (0, -2)),
            ]
        );
        assert_eq!(parse_psi("-2e-1 cos(3,0)").unwrap()[0].amplitude, -0.2);
        assert_eq!(parse_psi("sin(1,0)").unwrap()[0].kind, TrigKind::Sin);
        assert!(parse_psi(" 0 ").unwrap().is_empty());
        assert!(parse_psi("0.0").unwrap().is_empty());
    }

    #[test]
    fn rejects_malformed_expressions() {
        for bad in [
            "",
            "1.0",
            "sin(1)",
            "tan(1,0)",
            "sin(0,0)",
            "sin(1,0) +",
            "sin(1,0) * 2",
            "1e999 sin(1,0)",
            "sin(1,0",
            "sin(a,0)",
            "1..2 sin(1,0)",
        ] {
            assert!(matches!(parse_psi(bad), Err(Error::Format(_))), "{bad:?}");
        }
    }

    #[test]
    fn unresolved_modes_are_rejected() {
        let t = parse_psi("sin(16,0)").unwrap();
        assert!(matches!(psi_field(&t, 32), Err(Error::Domain(_))));
        assert!(psi_field(&t, 64).is_ok());
    }

    proptest! {
        #[test]
        fn parser_never_panics(s in "\\PC{0,64}") {
            let _ = parse_psi(&s);
        }

        #[test]
        fn printed_terms_parse_back(
            terms in proptest::collection::vec((-10.0f64..10.0, -5i64..=5, 1i64..=5, any::<bool>()), 1..6)
        ) {
            let text = terms
                .iter()
                .map(|(a, k1, k2, s)| format!("{a:e}*{}({k1},{k2})", if *s { "sin" } else { "cos" }))
                .collect::<Vec<_>>()
                .join(" + ");
            let parsed = parse_psi(&text).unwrap();
            prop_assert_eq!(parsed.len(), terms.len());
            for (p, (a, k1, k2, _)) in parsed.iter().zip(&terms) {
                prop_assert_eq!(p.amplitude, *a);
                prop_assert_eq!(p.k, (*k1, *k2));
            }
        }
    }
}
