//! Best-effort conversion of model output into strict JSON.
//!
//! Stages, in order: strip code fences and surrounding prose, then a single
//! token-level pass that normalizes quotes, splits `'key: value'` pairs,
//! quotes bare keys and values, converts Python literals, inserts missing
//! commas, drops trailing commas and closes unterminated brackets. Tokens
//! that need no fix are copied byte-for-byte, so valid JSON is returned
//! unchanged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairTag {
    FenceStripped,
    ProseStripped,
    QuotesNormalized,
    MisquotedPairsSplit,
    BareKeysQuoted,
    BareValuesQuoted,
    PythonLiterals,
    StringEscapesFixed,
    MissingColonInserted,
    MissingCommasInserted,
    MissingValueFilled,
    TrailingCommaRemoved,
    StrayCloserRemoved,
    UnclosedBracketsClosed,
    /// Set by the corrective retry, never by [`repair_candidate`].
    CorrectiveRetry,
}

impl RepairTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RepairTag::FenceStripped => "fence_stripped",
            RepairTag::ProseStripped => "prose_stripped",
            RepairTag::QuotesNormalized => "quotes_normalized",
            RepairTag::MisquotedPairsSplit => "misquoted_pairs_split",
            RepairTag::BareKeysQuoted => "bare_keys_quoted",
            RepairTag::BareValuesQuoted => "bare_values_quoted",
            RepairTag::PythonLiterals => "python_literals",
            RepairTag::StringEscapesFixed => "string_escapes_fixed",
            RepairTag::MissingColonInserted => "missing_colon_inserted",
            RepairTag::MissingCommasInserted => "missing_commas_inserted",
            RepairTag::MissingValueFilled => "missing_value_filled",
            RepairTag::TrailingCommaRemoved => "trailing_comma_removed",
            RepairTag::StrayCloserRemoved => "stray_closer_removed",
            RepairTag::UnclosedBracketsClosed => "unclosed_brackets_closed",
            RepairTag::CorrectiveRetry => "corrective_retry",
        }
    }
}

/// Repairs `text` and reports which repairs fired, in stage order.
pub fn repair_candidate(text: &str) -> (String, Vec<RepairTag>) {
    let mut tags = BTreeSet::new();
    let candidate = extract_object(text, &mut tags);
    // valid JSON would be copied through unchanged anyway
    if !candidate.starts_with('{')
        || serde_json::from_str::<serde::de::IgnoredAny>(&candidate).is_ok()
    {
        return (candidate, tags.into_iter().collect());
    }
    let tokens = lex(&candidate);
    let mut rewriter = Rewriter::new(&tokens.items, &mut tags);
    rewriter.run();
    let mut out = rewriter.finish();
    out.push_str(&tokens.tail);
    (out, tags.into_iter().collect())
}

/// Fence and prose removal. Whitespace-only trimming is not a repair.
fn extract_object(text: &str, tags: &mut BTreeSet<RepairTag>) -> String {
    let mut t = text.trim();
    if let Some(open) = t.find("```") {
        let after = &t[open + 3..];
        // the opening fence line may carry a language tag
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let inner = match body.find("```") {
            Some(close) => &body[..close],
            None => body,
        };
        tags.insert(RepairTag::FenceStripped);
        t = inner.trim();
    }
    let Some(start) = t.find('{') else {
        return t.to_string();
    };
    let end = match t.rfind('}') {
        Some(end) if end > start => end + 1,
        _ => t.len(),
    };
    let candidate = &t[start..end];
    if candidate.len() != t.len() {
        tags.insert(RepairTag::ProseStripped);
    }
    candidate.trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Comma,
    Str(StrTok),
    Word(String),
}

#[derive(Debug, Clone, PartialEq)]
struct StrTok {
    /// Body between the quotes, already escaped for a JSON string.
    json: String,
    single: bool,
    terminated: bool,
    escapes_fixed: bool,
}

impl StrTok {
    fn needs_rewrite(&self) -> bool {
        self.single || !self.terminated || self.escapes_fixed
    }

    fn to_json(&self) -> String {
        format!("\"{}\"", self.json)
    }

    fn content(&self) -> String {
        serde_json::from_str::<String>(&self.to_json()).unwrap_or_else(|_| self.json.clone())
    }
}

#[derive(Debug, Clone)]
struct Lexed {
    pre: String,
    raw: String,
    tok: Tok,
}

struct Lexemes {
    items: Vec<Lexed>,
    tail: String,
}

const STRUCTURAL: &[char] = &['{', '}', '[', ']', ':', ','];

fn lex(s: &str) -> Lexemes {
    let chars: Vec<char> = s.chars().collect();
    let n = chars.len();
    let mut i = 0;
    let mut items = Vec::new();
    loop {
        let ws_start = i;
        while i < n && chars[i].is_whitespace() {
            i += 1;
        }
        let pre: String = chars[ws_start..i].iter().collect();
        if i >= n {
            return Lexemes { items, tail: pre };
        }
        let start = i;
        let tok = match chars[i] {
            '{' => {
                i += 1;
                Tok::LBrace
            }
            '}' => {
                i += 1;
                Tok::RBrace
            }
            '[' => {
                i += 1;
                Tok::LBracket
            }
            ']' => {
                i += 1;
                Tok::RBracket
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            '"' => {
                let (tok, next) = lex_double(&chars, i);
                i = next;
                Tok::Str(tok)
            }
            '\'' => {
                let (tok, next) = lex_single(&chars, i);
                i = next;
                Tok::Str(tok)
            }
            _ => {
                while i < n
                    && !chars[i].is_whitespace()
                    && !STRUCTURAL.contains(&chars[i])
                    && chars[i] != '"'
                {
                    i += 1;
                }
                Tok::Word(chars[start..i].iter().collect())
            }
        };
        items.push(Lexed {
            pre,
            raw: chars[start..i].iter().collect(),
            tok,
        });
    }
}

fn is_valid_escape(c: char) -> bool {
    matches!(c, '"' | '\\' | '/' | 'b' | 'f' | 'n' | 'r' | 't' | 'u')
}

fn push_control(json: &mut String, c: char) {
    match c {
        '\n' => json.push_str("\\n"),
        '\r' => json.push_str("\\r"),
        '\t' => json.push_str("\\t"),
        other => json.push_str(&format!("\\u{:04x}", other as u32)),
    }
}

fn lex_double(chars: &[char], open: usize) -> (StrTok, usize) {
    let mut json = String::new();
    let mut fixed = false;
    let mut i = open + 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' => {
                return (
                    StrTok {
                        json,
                        single: false,
                        terminated: true,
                        escapes_fixed: fixed,
                    },
                    i + 1,
                )
            }
            '\\' if i + 1 < chars.len() => {
                let next = chars[i + 1];
                if next == 'u' && !valid_unicode_escape(chars, i + 2) {
                    json.push_str("\\\\");
                    fixed = true;
                    i += 1;
                    continue;
                }
                if is_valid_escape(next) {
                    json.push('\\');
                    json.push(next);
                } else {
                    json.push_str("\\\\");
                    if next.is_control() {
                        push_control(&mut json, next);
                    } else {
                        json.push(next);
                    }
                    fixed = true;
                }
                i += 2;
            }
            '\\' => {
                json.push_str("\\\\");
                fixed = true;
                i += 1;
            }
            c if c.is_control() => {
                push_control(&mut json, c);
                fixed = true;
                i += 1;
            }
            c => {
                json.push(c);
                i += 1;
            }
        }
    }
    (
        StrTok {
            json,
            single: false,
            terminated: false,
            escapes_fixed: fixed,
        },
        i,
    )
}

fn valid_unicode_escape(chars: &[char], from: usize) -> bool {
    from + 4 <= chars.len() && chars[from..from + 4].iter().all(|c| c.is_ascii_hexdigit())
}

/// A single quote closes the string only when the next non-blank
/// character could follow a JSON string, so apostrophes in prose survive.
fn closes_single(chars: &[char], quote: usize) -> bool {
    let mut j = quote + 1;
    while j < chars.len() && chars[j].is_whitespace() {
        j += 1;
    }
    j >= chars.len() || matches!(chars[j], ',' | ':' | '}' | ']' | '\'' | '"')
}

fn lex_single(chars: &[char], open: usize) -> (StrTok, usize) {
    let mut json = String::new();
    let mut i = open + 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\'' if closes_single(chars, i) => {
                return (
                    StrTok {
                        json,
                        single: true,
                        terminated: true,
                        escapes_fixed: false,
                    },
                    i + 1,
                )
            }
            '\\' if i + 1 < chars.len() => {
                let next = chars[i + 1];
                match next {
                    '\'' => json.push('\''),
                    'u' if valid_unicode_escape(chars, i + 2) => json.push_str("\\u"),
                    n if n != 'u' && is_valid_escape(n) => {
                        json.push('\\');
                        json.push(n);
                    }
                    n if n.is_control() => {
                        json.push_str("\\\\");
                        push_control(&mut json, n);
                    }
                    n => {
                        json.push_str("\\\\");
                        json.push(n);
                    }
                }
                i += 2;
            }
            '\\' => {
                json.push_str("\\\\");
                i += 1;
            }
            '"' => {
                json.push_str("\\\"");
                i += 1;
            }
            c if c.is_control() => {
                push_control(&mut json, c);
                i += 1;
            }
            c => {
                json.push(c);
                i += 1;
            }
        }
    }
    (
        StrTok {
            json,
            single: true,
            terminated: false,
            escapes_fixed: false,
        },
        i,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObjState {
    KeyOrEnd,
    Key,
    Colon,
    Value,
    CommaOrEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArrState {
    ValueOrEnd,
    Value,
    CommaOrEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Obj(ObjState),
    Arr(ArrState),
}

struct Rewriter<'t, 'g> {
    toks: &'t [Lexed],
    out: Vec<(String, String)>,
    stack: Vec<Frame>,
    tags: &'g mut BTreeSet<RepairTag>,
    pending_comma: Option<usize>,
    top_done: bool,
}

fn json_literal(word: &str) -> bool {
    matches!(
        serde_json::from_str::<Value>(word),
        Ok(Value::Number(_) | Value::Bool(_) | Value::Null)
    )
}

fn python_literal(word: &str) -> Option<&'static str> {
    match word {
        "True" => Some("true"),
        "False" => Some("false"),
        "None" => Some("null"),
        _ => None,
    }
}

/// `key: value` inside a quoted string, the key being identifier-like.
fn split_pair(content: &str) -> Option<(String, String)> {
    let (key, rest) = content.split_once(':')?;
    let key = key.trim();
    let mut chars = key.chars();
    let first = chars.next()?;
    if !(first.is_ascii_alphabetic() || first == '_')
        || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return None;
    }
    let mut value = rest.trim();
    if let Some(stripped) = value.strip_suffix(',') {
        value = stripped.trim_end();
    }
    Some((key.to_string(), value.to_string()))
}

impl<'t, 'g> Rewriter<'t, 'g> {
    fn new(toks: &'t [Lexed], tags: &'g mut BTreeSet<RepairTag>) -> Self {
        Self {
            toks,
            out: Vec::new(),
            stack: Vec::new(),
            tags,
            pending_comma: None,
            top_done: false,
        }
    }

    fn emit(&mut self, pre: &str, text: impl Into<String>) {
        self.out.push((pre.to_string(), text.into()));
    }

    fn emit_raw(&mut self, i: usize) {
        let t = &self.toks[i];
        self.out.push((t.pre.clone(), t.raw.clone()));
    }

    fn tag(&mut self, tag: RepairTag) {
        self.tags.insert(tag);
    }

    fn set(&mut self, frame: Frame) {
        if let Some(top) = self.stack.last_mut() {
            *top = frame;
        }
    }

    fn drop_pending_comma(&mut self) {
        if let Some(idx) = self.pending_comma.take() {
            self.out[idx].1.clear();
            self.tag(RepairTag::TrailingCommaRemoved);
        }
    }

    fn after_value(&mut self) {
        self.pending_comma = None;
        match self.stack.last().copied() {
            Some(Frame::Obj(_)) => self.set(Frame::Obj(ObjState::CommaOrEnd)),
            Some(Frame::Arr(_)) => self.set(Frame::Arr(ArrState::CommaOrEnd)),
            None => self.top_done = true,
        }
    }

    fn close(&mut self) {
        self.stack.pop();
        self.after_value();
    }

    fn next_is_colon(&self, i: usize) -> bool {
        matches!(self.toks.get(i + 1).map(|t| &t.tok), Some(Tok::Colon))
    }

    fn emit_string(&mut self, i: usize, s: &StrTok) {
        if s.needs_rewrite() {
            if s.single {
                self.tag(RepairTag::QuotesNormalized);
            }
            if s.escapes_fixed {
                self.tag(RepairTag::StringEscapesFixed);
            }
            if !s.terminated {
                self.tag(RepairTag::UnclosedBracketsClosed);
            }
            let pre = self.toks[i].pre.clone();
            self.emit(&pre, s.to_json());
        } else {
            self.emit_raw(i);
        }
    }

    /// Consecutive bare words forming one value; stops before a word that
    /// is itself followed by a colon (the next key). A run made only of
    /// literals (`1 2`) is a missing comma, so only its first word is taken.
    fn word_run(&self, i: usize) -> (String, usize) {
        let Tok::Word(first) = &self.toks[i].tok else {
            unreachable!("word_run called on a non-word")
        };
        let mut text = first.clone();
        let mut all_literals = json_literal(first) || python_literal(first).is_some();
        let mut j = i + 1;
        while let Some(Lexed {
            pre,
            tok: Tok::Word(w),
            ..
        }) = self.toks.get(j)
        {
            if self.next_is_colon(j) {
                break;
            }
            all_literals &= json_literal(w) || python_literal(w).is_some();
            text.push_str(pre);
            text.push_str(w);
            j += 1;
        }
        if all_literals && j > i + 1 {
            return (first.clone(), i + 1);
        }
        (text, j)
    }

    fn run(&mut self) {
        let mut i = 0;
        while i < self.toks.len() {
            if self.top_done {
                self.tag(RepairTag::ProseStripped);
                break;
            }
            i = match self.stack.last().copied() {
                None => self.value_position(i),
                Some(Frame::Obj(ObjState::KeyOrEnd | ObjState::Key)) => self.key_position(i),
                Some(Frame::Obj(ObjState::Colon)) => self.colon_position(i),
                Some(Frame::Obj(ObjState::Value))
                | Some(Frame::Arr(ArrState::Value | ArrState::ValueOrEnd)) => {
                    self.value_position(i)
                }
                Some(Frame::Obj(ObjState::CommaOrEnd)) | Some(Frame::Arr(ArrState::CommaOrEnd)) => {
                    self.comma_position(i)
                }
            };
        }
    }

    fn finish(mut self) -> String {
        if !self.stack.is_empty() {
            self.tag(RepairTag::UnclosedBracketsClosed);
            while let Some(frame) = self.stack.last().copied() {
                match frame {
                    Frame::Obj(ObjState::Colon) => {
                        self.emit("", ": null");
                    }
                    Frame::Obj(ObjState::Value) => {
                        self.emit("", " null");
                    }
                    Frame::Obj(ObjState::Key) | Frame::Arr(ArrState::Value) => {
                        self.drop_pending_comma();
                    }
                    _ => {}
                }
                let closer = match frame {
                    Frame::Obj(_) => "}",
                    Frame::Arr(_) => "]",
                };
                self.emit("", closer);
                self.close();
            }
        }
        self.out
            .into_iter()
            .map(|(pre, text)| pre + &text)
            .collect()
    }

    fn value_position(&mut self, i: usize) -> usize {
        let tok = self.toks[i].tok.clone();
        match tok {
            Tok::LBrace => {
                self.emit_raw(i);
                self.pending_comma = None;
                self.stack.push(Frame::Obj(ObjState::KeyOrEnd));
                i + 1
            }
            Tok::LBracket => {
                self.emit_raw(i);
                self.pending_comma = None;
                self.stack.push(Frame::Arr(ArrState::ValueOrEnd));
                i + 1
            }
            Tok::Str(s) => {
                self.emit_string(i, &s);
                self.after_value();
                i + 1
            }
            Tok::Word(_) => {
                let (text, next) = self.word_run(i);
                let pre = self.toks[i].pre.clone();
                if next == i + 1 && json_literal(&text) {
                    self.emit_raw(i);
                } else if let Some(lit) = python_literal(&text) {
                    self.tag(RepairTag::PythonLiterals);
                    self.emit(&pre, lit);
                } else {
                    self.tag(RepairTag::BareValuesQuoted);
                    self.emit(&pre, Value::String(text).to_string());
                }
                self.after_value();
                next
            }
            Tok::RBracket if matches!(self.stack.last(), Some(Frame::Arr(_))) => {
                self.drop_pending_comma();
                self.emit_raw(i);
                self.close();
                i + 1
            }
            Tok::Comma if matches!(self.stack.last(), Some(Frame::Arr(_))) => {
                // `[,` or `,,`
                self.tag(RepairTag::TrailingCommaRemoved);
                i + 1
            }
            Tok::Comma | Tok::RBrace if matches!(self.stack.last(), Some(Frame::Obj(_))) => {
                self.tag(RepairTag::MissingValueFilled);
                self.emit(" ", "null");
                self.after_value();
                i
            }
            _ => {
                // nothing sensible to do with this token here
                if self.stack.is_empty() {
                    self.tag(RepairTag::ProseStripped);
                } else {
                    self.tag(RepairTag::StrayCloserRemoved);
                }
                i + 1
            }
        }
    }

    fn key_position(&mut self, i: usize) -> usize {
        let tok = self.toks[i].tok.clone();
        match tok {
            Tok::RBrace => {
                self.drop_pending_comma();
                self.emit_raw(i);
                self.close();
                i + 1
            }
            Tok::Comma => {
                self.tag(RepairTag::TrailingCommaRemoved);
                i + 1
            }
            Tok::Str(s) if !self.next_is_colon(i) => match split_pair(&s.content()) {
                Some((key, value)) => {
                    self.tag(RepairTag::MisquotedPairsSplit);
                    if s.single {
                        self.tag(RepairTag::QuotesNormalized);
                    }
                    let pre = self.toks[i].pre.clone();
                    self.emit(&pre, format!("{}: ", Value::String(key)));
                    self.pending_comma = None;
                    self.misquoted_value(&value);
                    i + 1
                }
                None => {
                    self.emit_string(i, &s);
                    self.set(Frame::Obj(ObjState::Colon));
                    i + 1
                }
            },
            Tok::Str(s) => {
                self.emit_string(i, &s);
                self.set(Frame::Obj(ObjState::Colon));
                i + 1
            }
            Tok::Word(_) => {
                let mut text = String::new();
                let mut j = i;
                while let Some(Lexed {
                    pre,
                    tok: Tok::Word(w),
                    ..
                }) = self.toks.get(j)
                {
                    if j > i {
                        text.push_str(pre);
                    }
                    text.push_str(w);
                    j += 1;
                }
                self.tag(RepairTag::BareKeysQuoted);
                let pre = self.toks[i].pre.clone();
                self.emit(&pre, Value::String(text).to_string());
                self.set(Frame::Obj(ObjState::Colon));
                j
            }
            _ => {
                self.tag(RepairTag::StrayCloserRemoved);
                i + 1
            }
        }
    }

    /// Emits the value half of a split `'key: value'` string.
    fn misquoted_value(&mut self, value: &str) {
        match value {
            "" => {
                self.emit("", "null");
                self.after_value();
            }
            "{" => {
                self.emit("", "{");
                self.stack.push(Frame::Obj(ObjState::KeyOrEnd));
            }
            "[" => {
                self.emit("", "[");
                self.stack.push(Frame::Arr(ArrState::ValueOrEnd));
            }
            text => {
                let nested = repair_value(text);
                self.emit("", nested);
                self.after_value();
            }
        }
    }

    fn colon_position(&mut self, i: usize) -> usize {
        if matches!(self.toks[i].tok, Tok::Colon) {
            self.emit_raw(i);
            self.set(Frame::Obj(ObjState::Value));
            i + 1
        } else {
            self.tag(RepairTag::MissingColonInserted);
            self.emit("", ":");
            self.set(Frame::Obj(ObjState::Value));
            i
        }
    }

    fn comma_position(&mut self, i: usize) -> usize {
        let in_object = matches!(self.stack.last(), Some(Frame::Obj(_)));
        match &self.toks[i].tok {
            Tok::Comma => {
                self.emit_raw(i);
                self.pending_comma = Some(self.out.len() - 1);
                self.set(if in_object {
                    Frame::Obj(ObjState::Key)
                } else {
                    Frame::Arr(ArrState::Value)
                });
                i + 1
            }
            Tok::RBrace if in_object => {
                self.emit_raw(i);
                self.close();
                i + 1
            }
            Tok::RBracket if !in_object => {
                self.emit_raw(i);
                self.close();
                i + 1
            }
            Tok::RBrace => {
                // array left open inside an object
                self.tag(RepairTag::UnclosedBracketsClosed);
                self.emit("", "]");
                self.close();
                i
            }
            Tok::RBracket | Tok::Colon => {
                self.tag(RepairTag::StrayCloserRemoved);
                i + 1
            }
            Tok::Str(_) | Tok::Word(_) | Tok::LBrace | Tok::LBracket => {
                self.tag(RepairTag::MissingCommasInserted);
                self.emit("", ",");
                self.pending_comma = Some(self.out.len() - 1);
                self.set(if in_object {
                    Frame::Obj(ObjState::Key)
                } else {
                    Frame::Arr(ArrState::Value)
                });
                i
            }
        }
    }
}

/// Repairs a standalone value. Falls back to a JSON string of the
/// original text when the value does not repair into exactly one value.
fn repair_value(text: &str) -> String {
    let lexed = lex(text);
    let mut scratch = BTreeSet::new();
    let mut rewriter = Rewriter::new(&lexed.items, &mut scratch);
    rewriter.run();
    let repaired = rewriter.finish();
    let leftover = scratch.contains(&RepairTag::ProseStripped);
    let repaired = repaired.trim();
    if !leftover && serde_json::from_str::<Value>(repaired).is_ok() {
        repaired.to_string()
    } else {
        Value::String(text.to_string()).to_string()
    }
}
