//! Hand-written lexer and recursive-descent parser for the `.xkb` rule DSL.
//!
//! ```text
//! doc    := schema_block stmt*
//! schema := "schema" "{" feat+ cls "}"
//! feat   := "feature" ID ":" "{" VAL ("," VAL)* "}" ";"
//! cls    := "classes" "{" ID ("," ID)* "}" ";"
//! stmt   := ("data" | "rule") ID ":" ff "=>" cf ";"
//! ff     := fand ("|" fand)*
//! fand   := fneg ("&" fneg)*
//! fneg   := "!" fneg | "(" ff ")" | ID "=" VAL | "true" | "false"
//! ```
//!
//! `cf` mirrors `ff` with bare class identifiers as atoms. Line comments start
//! with `//`.

use std::collections::HashSet;

use super::formula::{ClassAtom, ClassFormula, FeatureAtom, FeatureFormula, Formula};
use super::rule::{Origin, Rule};
use super::schema::{Feature, Schema};
use super::Document;
use crate::error::{Error, ParseError};

const KEYWORDS: &[&str] = &["schema", "feature", "classes", "data", "rule", "true", "false"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Bang,
    Amp,
    Pipe,
    Eq,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Quoted(q) => format!("\"{q}\""),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", punct(other)),
        }
    }
}

fn punct(t: &Tok) -> &'static str {
    match t {
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::Colon => ":",
        Tok::Semi => ";",
        Tok::Comma => ",",
        Tok::Bang => "!",
        Tok::Amp => "&",
        Tok::Pipe => "|",
        Tok::Eq => "=",
        Tok::Arrow => "=>",
        _ => "",
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn is_identifier(w: &str) -> bool {
    w.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&w)
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError { line, column, message, expected: vec![] };
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
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let tok = if is_word_start(c) {
            let mut w = String::new();
            while i < chars.len() && is_word_char(chars[i]) {
                w.push(chars[i]);
                i += 1;
                col += 1;
            }
            Tok::Word(w)
        } else if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(start_line, start_col, "unterminated string".into()))
                    }
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(err(line, col, "invalid escape in string".into())),
                        };
                        s.push(esc);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            Tok::Quoted(s)
        } else {
            let t = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '!' => Tok::Bang,
                '&' => Tok::Amp,
                '|' => Tok::Pipe,
                '=' if chars.get(i + 1) == Some(&'>') => {
                    i += 1;
                    col += 1;
                    Tok::Arrow
                }
                '=' => Tok::Eq,
                other => return Err(err(line, col, format!("unexpected character `{other}`"))),
            };
            i += 1;
            col += 1;
            t
        };
        out.push(Spanned { tok, line: start_line, column: start_col });
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser<'s> {
    toks: Vec<Spanned>,
    pos: usize,
    schema: Option<&'s Schema>,
}

type PResult<T> = Result<T, ParseError>;

impl<'s> Parser<'s> {
    fn new(src: &str, schema: Option<&'s Schema>) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0, schema })
    }

    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.peek();
        Err(ParseError {
            line: t.line,
            column: t.column,
            message: format!("unexpected {}", t.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn error_at<T>(&self, at: &Spanned, message: String) -> PResult<T> {
        Err(ParseError { line: at.line, column: at.column, message, expected: vec![] })
    }

    fn expect(&mut self, tok: Tok) -> PResult<Spanned> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            let want = format!("`{}`", punct(&tok));
            self.unexpected(&[want.as_str()])
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Spanned> {
        if self.at_keyword(kw) {
            Ok(self.bump())
        } else {
            let want = format!("`{kw}`");
            self.unexpected(&[want.as_str()])
        }
    }

    fn identifier(&mut self) -> PResult<(String, Spanned)> {
        match &self.peek().tok {
            Tok::Word(w) if is_identifier(w) => {
                let w = w.clone();
                Ok((w, self.bump()))
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn value(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Word(w) | Tok::Quoted(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => self.unexpected(&["value"]),
        }
    }

    fn schema_block(&mut self) -> PResult<Schema> {
        let start = self.expect_keyword("schema")?;
        self.expect(Tok::LBrace)?;
        let mut features = Vec::new();
        while self.at_keyword("feature") {
            self.bump();
            let (name, _) = self.identifier()?;
            self.expect(Tok::Colon)?;
            self.expect(Tok::LBrace)?;
            let mut domain = vec![self.value()?];
            while self.peek().tok == Tok::Comma {
                self.bump();
                domain.push(self.value()?);
            }
            self.expect(Tok::RBrace)?;
            self.expect(Tok::Semi)?;
            features.push(Feature { name, domain });
        }
        if features.is_empty() {
            return self.unexpected(&["`feature`"]);
        }
        self.expect_keyword("classes")?;
        self.expect(Tok::LBrace)?;
        let mut classes = vec![self.identifier()?.0];
        while self.peek().tok == Tok::Comma {
            self.bump();
            classes.push(self.identifier()?.0);
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Semi)?;
        self.expect(Tok::RBrace)?;
        Schema::new(features, classes).or_else(|e| self.error_at(&start, e.to_string()))
    }

    fn feature_formula(&mut self) -> PResult<FeatureFormula> {
        let mut parts = vec![self.feature_conj()?];
        while self.peek().tok == Tok::Pipe {
            self.bump();
            parts.push(self.feature_conj()?);
        }
        Ok(Formula::or(parts))
    }

    fn feature_conj(&mut self) -> PResult<FeatureFormula> {
        let mut parts = vec![self.feature_neg()?];
        while self.peek().tok == Tok::Amp {
            self.bump();
            parts.push(self.feature_neg()?);
        }
        Ok(Formula::and(parts))
    }

    fn feature_neg(&mut self) -> PResult<FeatureFormula> {
        match &self.peek().tok {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.feature_neg()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.feature_formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Word(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Word(w) if w == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Word(w) if is_identifier(w) => {
                let (feature, at) = self.identifier()?;
                self.expect(Tok::Eq)?;
                let value = self.value()?;
                if let Some(schema) = self.schema {
                    let Some(fi) = schema.feature_index(&feature) else {
                        return self.error_at(&at, format!("unknown feature {feature}"));
                    };
                    if schema.value_index(fi, &value).is_none() {
                        return self
                            .error_at(&at, format!("unknown value {value} for feature {feature}"));
                    }
                }
                Ok(Formula::atom(FeatureAtom { feature, value }))
            }
            _ => self.unexpected(&["`!`", "`(`", "feature", "`true`", "`false`"]),
        }
    }

    fn class_formula(&mut self) -> PResult<ClassFormula> {
        let mut parts = vec![self.class_conj()?];
        while self.peek().tok == Tok::Pipe {
            self.bump();
            parts.push(self.class_conj()?);
        }
        Ok(Formula::or(parts))
    }

    fn class_conj(&mut self) -> PResult<ClassFormula> {
        let mut parts = vec![self.class_neg()?];
        while self.peek().tok == Tok::Amp {
            self.bump();
            parts.push(self.class_neg()?);
        }
        Ok(Formula::and(parts))
    }

    fn class_neg(&mut self) -> PResult<ClassFormula> {
        match &self.peek().tok {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.class_neg()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.class_formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Word(w) if w == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Word(w) if w == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Word(w) if is_identifier(w) => {
                let (class, at) = self.identifier()?;
                if let Some(schema) = self.schema {
                    if schema.class_index(&class).is_none() {
                        return self.error_at(&at, format!("unknown class {class}"));
                    }
                }
                Ok(Formula::atom(ClassAtom(class)))
            }
            _ => self.unexpected(&["`!`", "`(`", "class", "`true`", "`false`"]),
        }
    }

    fn rule_tail(&mut self) -> PResult<(FeatureFormula, ClassFormula)> {
        let body = self.feature_formula()?;
        self.expect(Tok::Arrow)?;
        let head = self.class_formula()?;
        Ok((body, head))
    }
}

/// Parses a complete `.xkb` document: schema block followed by rules.
pub fn parse_document(text: &str) -> Result<Document, Error> {
    let mut p = Parser::new(text, None)?;
    let schema = p.schema_block()?;
    p.schema = Some(&schema);
    let mut rules = Vec::new();
    let mut ids = HashSet::new();
    loop {
        let start = p.peek().clone();
        let origin = match &start.tok {
            Tok::Eof => break,
            Tok::Word(w) if w == "data" => Origin::Data,
            Tok::Word(w) if w == "rule" => Origin::Explanation,
            _ => return Err(p.unexpected::<()>(&["`data`", "`rule`", "end of input"]).unwrap_err().into()),
        };
        p.bump();
        let (id, id_at) = p.identifier()?;
        if !ids.insert(id.clone()) {
            return Err(p.error_at::<()>(&id_at, format!("duplicate rule id {id}")).unwrap_err().into());
        }
        p.expect(Tok::Colon)?;
        let (body, head) = p.rule_tail()?;
        p.expect(Tok::Semi)?;
        let rule = Rule { id, body, head, origin };
        if origin == Origin::Data {
            if let Some(reason) = rule.instance_violation(&schema) {
                return Err(p
                    .error_at::<()>(&start, format!("data rule {} is not an instance rule: {reason}", rule.id))
                    .unwrap_err()
                    .into());
            }
        }
        rules.push(rule);
    }
    drop(p);
    Ok(Document { schema, rules })
}

/// Parses one feedback rule against `schema`. The text is
/// `[id ":"] body "=>" head [";"]`; without an id the rule is named `fb1`.
pub fn parse_rule(schema: &Schema, text: &str) -> Result<Rule, Error> {
    parse_rule_fresh(schema, text, |_| false)
}

/// Like [`parse_rule`], but an auto-assigned id skips every id for which
/// `taken` returns true (`fb1`, `fb2`, ...).
pub fn parse_rule_fresh(schema: &Schema, text: &str, taken: impl Fn(&str) -> bool) -> Result<Rule, Error> {
    let mut p = Parser::new(text, Some(schema))?;
    let id = match (p.peek_at(0), p.peek_at(1)) {
        (Tok::Word(w), Tok::Colon) if is_identifier(w) => {
            let (id, _) = p.identifier()?;
            p.bump();
            Some(id)
        }
        _ => None,
    };
    let (body, head) = p.rule_tail()?;
    if p.peek().tok == Tok::Semi {
        p.bump();
    }
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected::<()>(&["end of input"]).unwrap_err().into());
    }
    let id = id.unwrap_or_else(|| fresh_id("fb", taken));
    Ok(Rule { id, body, head, origin: Origin::Feedback })
}

/// Parses `body => head` without checking atoms against a schema.
pub fn parse_rule_text(text: &str) -> Result<(FeatureFormula, ClassFormula), ParseError> {
    let mut p = Parser::new(text, None)?;
    let out = p.rule_tail()?;
    if p.peek().tok != Tok::Eof {
        return p.unexpected(&["end of input"]);
    }
    Ok(out)
}

/// First `{prefix}{n}` (n = 1, 2, ...) not rejected by `taken`.
pub fn fresh_id(prefix: &str, taken: impl Fn(&str) -> bool) -> String {
    (1..)
        .map(|n| format!("{prefix}{n}"))
        .find(|id| !taken(id))
        .expect("unbounded id space")
}
