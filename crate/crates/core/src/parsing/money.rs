//! Money figures as emitted by the model: numbers, `false`, or text such as
//! `"$1M - $3M"`, `"1.5M USD"` or `"2K"`.

use std::str::FromStr;

use rust_decimal::Decimal;
use serde_json::Value;
use thiserror::Error;

use crate::model::MoneyAmount;

pub const UNSPECIFIED_CURRENCY: &str = "UNSPECIFIED";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyError {
    #[error("unparseable money value {0:?}")]
    Unparseable(String),
}

const ABSENT_WORDS: [&str; 8] = ["false", "none", "null", "n/a", "na", "nil", "-", ""];
const SYMBOLS: [char; 5] = ['$', '€', '£', '¥', '₿'];

/// Normalizes a money field. `false`/`null` mean "no amount"; ranges become
/// their mean; `K`, `M`, `B` (and the spelled-out words) scale by 10³, 10⁶,
/// 10⁹. Never panics.
pub fn parse_money(value: &Value) -> Result<Option<MoneyAmount>, MoneyError> {
    match value {
        Value::Null | Value::Bool(false) => Ok(None),
        Value::Number(n) => {
            let text = n.to_string();
            let parsed = Decimal::from_str(&text)
                .or_else(|_| Decimal::from_scientific(&text))
                .map_err(|_| MoneyError::Unparseable(text.clone()))?;
            if parsed.is_sign_negative() && !parsed.is_zero() {
                return Err(MoneyError::Unparseable(text));
            }
            Ok(Some(MoneyAmount {
                value: parsed.normalize(),
                currency: UNSPECIFIED_CURRENCY.to_string(),
                original: text,
            }))
        }
        Value::String(s) => parse_money_text(s),
        Value::Object(map) => {
            let amount = map.get("amount").or_else(|| map.get("value"));
            let currency = map.get("currency").and_then(Value::as_str);
            match (amount, currency) {
                (Some(a), cur) => {
                    let Some(mut parsed) = parse_money(a)? else {
                        return Ok(None);
                    };
                    if let Some(c) = cur {
                        if parsed.currency == UNSPECIFIED_CURRENCY {
                            parsed.currency = c.trim().to_string();
                        } else if !parsed.currency.eq_ignore_ascii_case(c.trim()) {
                            return Err(MoneyError::Unparseable(value.to_string()));
                        }
                    }
                    parsed.original = value.to_string();
                    Ok(Some(parsed))
                }
                (None, _) => Err(MoneyError::Unparseable(value.to_string())),
            }
        }
        other => Err(MoneyError::Unparseable(other.to_string())),
    }
}

fn parse_money_text(original: &str) -> Result<Option<MoneyAmount>, MoneyError> {
    let fail = || MoneyError::Unparseable(original.to_string());
    let text = original.trim();
    if ABSENT_WORDS.iter().any(|w| text.eq_ignore_ascii_case(w)) {
        return Ok(None);
    }
    let text = text
        .trim_start_matches(['~', '≈'])
        .trim_start_matches("approx.")
        .trim_start_matches("approximately")
        .trim();

    let mut scanner = Scanner::new(text);
    let first = scanner.amount().ok_or_else(fail)?;
    scanner.skip_ws();
    let (value, currency) = if scanner.done() {
        (first.scaled().ok_or_else(fail)?, first.currency)
    } else if scanner.range_separator() {
        let second = scanner.amount().ok_or_else(fail)?;
        scanner.skip_ws();
        if !scanner.done() {
            return Err(fail());
        }
        // "1-3M": a bare left bound borrows the right bound's magnitude
        let left_multiplier = if first.multiplier.is_none() && first.currency.is_none() {
            second.multiplier
        } else {
            first.multiplier
        };
        let left = first
            .number
            .checked_mul(left_multiplier.unwrap_or(Decimal::ONE))
            .ok_or_else(fail)?;
        let right = second.scaled().ok_or_else(fail)?;
        let currency = match (first.currency, second.currency) {
            (Some(a), Some(b)) if a != b => return Err(fail()),
            (a, b) => a.or(b),
        };
        let sum = left.checked_add(right).ok_or_else(fail)?;
        (sum / Decimal::TWO, currency)
    } else {
        return Err(fail());
    };
    Ok(Some(MoneyAmount {
        value: value.normalize(),
        currency: currency.unwrap_or_else(|| UNSPECIFIED_CURRENCY.to_string()),
        original: original.to_string(),
    }))
}

struct Amount {
    number: Decimal,
    multiplier: Option<Decimal>,
    currency: Option<String>,
}

impl Amount {
    fn scaled(&self) -> Option<Decimal> {
        self.number
            .checked_mul(self.multiplier.unwrap_or(Decimal::ONE))
    }
}

struct Scanner<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn done(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphabetic()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn peek_word(&mut self) -> String {
        let save = self.pos;
        let w = self.word();
        self.pos = save;
        w
    }

    fn currency(&mut self) -> Option<String> {
        let c = self.peek()?;
        if SYMBOLS.contains(&c) {
            self.pos += 1;
            return Some(c.to_string());
        }
        let w = self.peek_word();
        let code_like = (2..=6).contains(&w.chars().count())
            && w.chars().all(|c| c.is_ascii_uppercase())
            || matches!(
                w.to_ascii_lowercase().as_str(),
                "dollars" | "usd" | "eth" | "euros"
            );
        if code_like {
            self.pos += w.chars().count();
            Some(w)
        } else {
            None
        }
    }

    fn number(&mut self) -> Option<Decimal> {
        let start = self.pos;
        let mut digits = String::new();
        let mut seen_point = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                self.pos += 1;
            } else if c == '.'
                && !seen_point
                && self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(char::is_ascii_digit)
            {
                seen_point = true;
                digits.push(c);
                self.pos += 1;
            } else if c == ',' && !seen_point && !digits.is_empty() {
                // thousands separator: exactly three digits follow
                let group: Vec<char> = self
                    .chars
                    .iter()
                    .skip(self.pos + 1)
                    .take(4)
                    .copied()
                    .collect();
                let ok = group.len() >= 3
                    && group[..3].iter().all(char::is_ascii_digit)
                    && group.get(3).is_none_or(|c| !c.is_ascii_digit());
                if !ok {
                    break;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
        if digits.is_empty() {
            self.pos = start;
            return None;
        }
        Decimal::from_str(&digits).ok()
    }

    fn magnitude(&mut self) -> Option<Decimal> {
        let save = self.pos;
        self.skip_ws();
        let w = self.peek_word();
        let m = match w.to_ascii_lowercase().as_str() {
            "k" | "thousand" => Some(Decimal::from(1_000)),
            "m" | "mm" | "mn" | "million" | "millions" => Some(Decimal::from(1_000_000)),
            "b" | "bn" | "billion" | "billions" => Some(Decimal::from(1_000_000_000)),
            _ => None,
        };
        match m {
            Some(m) => {
                self.pos += w.chars().count();
                Some(m)
            }
            None => {
                self.pos = save;
                None
            }
        }
    }

    fn amount(&mut self) -> Option<Amount> {
        self.skip_ws();
        let prefix = self.currency();
        self.skip_ws();
        let number = self.number()?;
        let multiplier = self.magnitude();
        let save = self.pos;
        self.skip_ws();
        let suffix = self.currency();
        if suffix.is_none() {
            self.pos = save;
        }
        let currency = match (prefix, suffix) {
            (Some(a), Some(b)) if a != b => return None,
            (a, b) => a.or(b),
        };
        Some(Amount {
            number,
            multiplier,
            currency,
        })
    }

    fn range_separator(&mut self) -> bool {
        match self.peek() {
            Some('-' | '–' | '—') => {
                self.pos += 1;
                true
            }
            Some(_) => {
                let w = self.peek_word();
                if w.eq_ignore_ascii_case("to") {
                    self.pos += w.len();
                    true
                } else {
                    false
                }
            }
            None => false,
        }
    }
}
