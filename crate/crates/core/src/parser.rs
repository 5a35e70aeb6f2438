//! Parser for the textual `.skb` knowledge-base format and the run-time
//! command format. One statement per line, terminated by `.`; `#` starts a
//! comment.

use std::fmt;

use crate::model::{
    CptTemplate, Identifier, GroundAtom, KnowledgeBase, ParentRef, Prior, QuantifierKind,
    QuantifierRef, Schema, SchemaAtom, TypeDecl,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: line {}, col {}: {}", sev, self.span.line, self.span.column, self.message)
    }
}

/// A run-time command: observe evidence, query a node, or extend a type.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Observe(GroundAtom, bool),
    Query(GroundAtom),
    AddMember { type_name: Identifier, constant: Identifier },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Arrow,     // ->
    Bar,       // |
    Tilde,     // ~
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Equals,
    PlusEquals, // +=
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Number(n) => write!(f, "`{n}`"),
            Token::Arrow => write!(f, "`->`"),
            Token::Bar => write!(f, "`|`"),
            Token::Tilde => write!(f, "`~`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::LBrace => write!(f, "`{{`"),
            Token::RBrace => write!(f, "`}}`"),
            Token::Comma => write!(f, "`,`"),
            Token::Dot => write!(f, "`.`"),
            Token::Equals => write!(f, "`=`"),
            Token::PlusEquals => write!(f, "`+=`"),
        }
    }
}

struct Lexer;

impl Lexer {
    /// Tokenizes one line. Columns are 1-based byte offsets.
    fn lex(line: &str, line_no: usize) -> Result<Vec<(Token, SourceSpan)>, ParseDiagnostic> {
        let mut out = Vec::new();
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let span = |start: usize, len: usize| SourceSpan {
                line: line_no,
                column: start + 1,
                length: len.max(1),
            };
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '#' => break,
                '(' => { out.push((Token::LParen, span(i, 1))); i += 1; }
                ')' => { out.push((Token::RParen, span(i, 1))); i += 1; }
                '{' => { out.push((Token::LBrace, span(i, 1))); i += 1; }
                '}' => { out.push((Token::RBrace, span(i, 1))); i += 1; }
                ',' => { out.push((Token::Comma, span(i, 1))); i += 1; }
                '.' => { out.push((Token::Dot, span(i, 1))); i += 1; }
                '=' => { out.push((Token::Equals, span(i, 1))); i += 1; }
                '|' => { out.push((Token::Bar, span(i, 1))); i += 1; }
                '~' => { out.push((Token::Tilde, span(i, 1))); i += 1; }
                '+' if bytes.get(i + 1) == Some(&b'=') => {
                    out.push((Token::PlusEquals, span(i, 2)));
                    i += 2;
                }
                '-' if bytes.get(i + 1) == Some(&b'>') => {
                    out.push((Token::Arrow, span(i, 2)));
                    i += 2;
                }
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    // a dot is part of the number only if digits follow
                    if i + 1 < bytes.len()
                        && bytes[i] == b'.'
                        && (bytes[i + 1] as char).is_ascii_digit()
                    {
                        i += 1;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                    let text = &line[start..i];
                    let value: f64 = text.parse().map_err(|_| ParseDiagnostic {
                        span: span(start, i - start),
                        message: format!("malformed number literal `{text}`"),
                        severity: Severity::Error,
                    })?;
                    out.push((Token::Number(value), span(start, i - start)));
                }
                c if c.is_ascii_alphabetic() => {
                    let start = i;
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    out.push((Token::Ident(line[start..i].to_owned()), span(start, i - start)));
                }
                other => {
                    return Err(ParseDiagnostic {
                        span: span(i, 1),
                        message: format!("unknown token `{other}`"),
                        severity: Severity::Error,
                    });
                }
            }
        }
        Ok(out)
    }
}

struct Cursor {
    tokens: Vec<(Token, SourceSpan)>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl Cursor {
    fn new(tokens: Vec<(Token, SourceSpan)>, line: usize, line_len: usize) -> Self {
        Cursor { tokens, pos: 0, line, end_column: line_len.max(1) }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1).map(|(t, _)| t)
    }

    fn span(&self) -> SourceSpan {
        self.tokens
            .get(self.pos)
            .map(|(_, s)| *s)
            .unwrap_or(SourceSpan { line: self.line, column: self.end_column, length: 1 })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseDiagnostic {
        ParseDiagnostic { span: self.span(), message: message.into(), severity: Severity::Error }
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<(), ParseDiagnostic> {
        match self.peek() {
            Some(t) if t == want => {
                self.bump();
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected {what}, found {t}"))),
            None => Err(self.error(format!("expected {what}, found end of statement"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<Identifier, ParseDiagnostic> {
        let span = self.span();
        match self.bump() {
            Some(Token::Ident(s)) => Identifier::new(&s).map_err(|e| ParseDiagnostic {
                span,
                message: e.to_string(),
                severity: Severity::Error,
            }),
            Some(t) => Err(ParseDiagnostic {
                span,
                message: format!("expected {what}, found {t}"),
                severity: Severity::Error,
            }),
            None => Err(ParseDiagnostic {
                span,
                message: format!("expected {what}, found end of statement"),
                severity: Severity::Error,
            }),
        }
    }

    fn number(&mut self, what: &str) -> Result<(f64, SourceSpan), ParseDiagnostic> {
        let span = self.span();
        match self.bump() {
            Some(Token::Number(n)) => Ok((n, span)),
            Some(t) => Err(ParseDiagnostic {
                span,
                message: format!("expected {what}, found {t}"),
                severity: Severity::Error,
            }),
            None => Err(ParseDiagnostic {
                span,
                message: format!("expected {what}, found end of statement"),
                severity: Severity::Error,
            }),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }
}

/// atom := ident [ '(' ident (',' ident)* ')' ]
fn parse_atom(cur: &mut Cursor) -> Result<SchemaAtom, ParseDiagnostic> {
    let pred_span = cur.span();
    let predicate = cur.ident("a predicate name")?;
    if predicate.is_parameter() {
        return Err(ParseDiagnostic {
            span: pred_span,
            message: format!("predicate `{predicate}` must start with a lowercase letter"),
            severity: Severity::Error,
        });
    }
    let mut args = Vec::new();
    if cur.peek() == Some(&Token::LParen) {
        cur.bump();
        loop {
            args.push(cur.ident("an argument")?);
            match cur.peek() {
                Some(Token::Comma) => {
                    cur.bump();
                }
                Some(Token::RParen) => {
                    cur.bump();
                    break;
                }
                _ => return Err(cur.error("expected `,` or `)` in argument list")),
            }
        }
    }
    Ok(SchemaAtom::new(predicate, args))
}

/// quantifier := ('exists'|'forall') PARAM 'in' type '.' atom
fn parse_quantifier(cur: &mut Cursor, kind: QuantifierKind) -> Result<QuantifierRef, ParseDiagnostic> {
    cur.bump(); // the exists/forall keyword
    let bound_span = cur.span();
    let bound = cur.ident("a bound parameter")?;
    if !bound.is_parameter() {
        return Err(ParseDiagnostic {
            span: bound_span,
            message: format!("bound variable `{bound}` must be capitalized"),
            severity: Severity::Error,
        });
    }
    match cur.peek() {
        Some(Token::Ident(kw)) if kw == "in" => {
            cur.bump();
        }
        _ => return Err(cur.error("expected `in` after the bound parameter")),
    }
    let type_name = cur.ident("a type name")?;
    cur.expect(&Token::Dot, "`.` between the type and the body atom")?;
    let body = parse_atom(cur)?;
    Ok(QuantifierRef { kind, bound, type_name, body })
}

fn parse_parent(cur: &mut Cursor) -> Result<ParentRef, ParseDiagnostic> {
    match cur.peek() {
        Some(Token::Ident(kw)) if kw == "exists" => {
            Ok(ParentRef::Quantifier(parse_quantifier(cur, QuantifierKind::Exists)?))
        }
        Some(Token::Ident(kw)) if kw == "forall" => {
            Ok(ParentRef::Quantifier(parse_quantifier(cur, QuantifierKind::Forall)?))
        }
        _ => Ok(ParentRef::Atom(parse_atom(cur)?)),
    }
}

#[derive(Debug)]
enum Stmt {
    Type(TypeDecl),
    Individuals(Vec<Identifier>),
    Schema { parents: Vec<ParentRef>, child: SchemaAtom },
    /// `p(child | conds) = v` — conds carry polarity.
    Row { child: SchemaAtom, conds: Vec<(ParentRef, bool)>, p: f64, span: SourceSpan },
    /// `p(atom) = v`
    Prior { atom: SchemaAtom, p: f64 },
}

fn parse_statement(cur: &mut Cursor) -> Result<Stmt, ParseDiagnostic> {
    let stmt = match cur.peek() {
        Some(Token::Ident(kw)) if kw == "type" => {
            cur.bump();
            let name = cur.ident("a type name")?;
            cur.expect(&Token::Equals, "`=`")?;
            let members = parse_brace_list(cur)?;
            Stmt::Type(TypeDecl { name, members })
        }
        Some(Token::Ident(kw)) if kw == "individuals" => {
            cur.bump();
            Stmt::Individuals(parse_brace_list(cur)?)
        }
        Some(Token::Ident(kw)) if kw == "schema" => {
            cur.bump();
            let mut parents = Vec::new();
            if cur.peek() != Some(&Token::Arrow) {
                loop {
                    parents.push(parse_parent(cur)?);
                    match cur.peek() {
                        Some(Token::Comma) => {
                            cur.bump();
                        }
                        _ => break,
                    }
                }
            }
            cur.expect(&Token::Arrow, "`->`")?;
            let child = parse_atom(cur)?;
            Stmt::Schema { parents, child }
        }
        Some(Token::Ident(kw)) if kw == "p" && cur.peek2() == Some(&Token::LParen) => {
            let stmt_span = cur.span();
            cur.bump();
            cur.bump(); // '('
            let head = parse_atom(cur)?;
            match cur.peek() {
                Some(Token::Bar) => {
                    cur.bump();
                    let mut conds = Vec::new();
                    loop {
                        let negated = if cur.peek() == Some(&Token::Tilde) {
                            cur.bump();
                            true
                        } else {
                            false
                        };
                        conds.push((parse_parent(cur)?, !negated));
                        match cur.peek() {
                            Some(Token::Comma) => {
                                cur.bump();
                            }
                            _ => break,
                        }
                    }
                    cur.expect(&Token::RParen, "`)`")?;
                    cur.expect(&Token::Equals, "`=`")?;
                    let (p, pspan) = cur.number("a probability")?;
                    check_probability(p, pspan)?;
                    Stmt::Row { child: head, conds, p, span: stmt_span }
                }
                Some(Token::RParen) => {
                    cur.bump();
                    cur.expect(&Token::Equals, "`=`")?;
                    let (p, pspan) = cur.number("a probability")?;
                    check_probability(p, pspan)?;
                    Stmt::Prior { atom: head, p }
                }
                _ => return Err(cur.error("expected `|` or `)` in probability statement")),
            }
        }
        Some(_) => return Err(cur.error("expected `type`, `individuals`, `schema` or `p(`")),
        None => unreachable!("empty statements are skipped"),
    };
    cur.expect(&Token::Dot, "`.` terminating the statement")?;
    if !cur.at_end() {
        return Err(cur.error("unexpected trailing tokens after `.`"));
    }
    Ok(stmt)
}

fn check_probability(p: f64, span: SourceSpan) -> Result<(), ParseDiagnostic> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ParseDiagnostic {
            span,
            message: format!("probability {p} is outside [0,1]"),
            severity: Severity::Error,
        })
    }
}

fn parse_brace_list(cur: &mut Cursor) -> Result<Vec<Identifier>, ParseDiagnostic> {
    cur.expect(&Token::LBrace, "`{`")?;
    let mut out = Vec::new();
    if cur.peek() == Some(&Token::RBrace) {
        cur.bump();
        return Ok(out);
    }
    loop {
        let span = cur.span();
        let id = cur.ident("a constant")?;
        if id.is_parameter() {
            return Err(ParseDiagnostic {
                span,
                message: format!("`{id}` is capitalized; set members must be constants"),
                severity: Severity::Error,
            });
        }
        out.push(id);
        match cur.peek() {
            Some(Token::Comma) => {
                cur.bump();
            }
            Some(Token::RBrace) => {
                cur.bump();
                break;
            }
            _ => return Err(cur.error("expected `,` or `}` in member list")),
        }
    }
    Ok(out)
}

/// Parses a whole knowledge-base file. All diagnostics are collected; any
/// error means no knowledge base is returned.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, Vec<ParseDiagnostic>> {
    let mut diags: Vec<ParseDiagnostic> = Vec::new();
    let mut stmts: Vec<Stmt> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = match Lexer::lex(line, line_no) {
            Ok(t) => t,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        if tokens.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(tokens, line_no, line.len());
        match parse_statement(&mut cur) {
            Ok(s) => stmts.push(s),
            Err(d) => diags.push(d),
        }
    }

    // Assemble: schemata first, then attach rows by child predicate/arity.
    let mut kb = KnowledgeBase::default();
    let mut row_stmts = Vec::new();
    for stmt in stmts {
        match stmt {
            Stmt::Type(t) => {
                let mut members = Vec::new();
                for m in t.members {
                    if members.contains(&m) {
                        diags.push(ParseDiagnostic {
                            span: SourceSpan { line: 1, column: 1, length: 1 },
                            message: format!("duplicate member `{m}` in type `{}`", t.name),
                            severity: Severity::Warning,
                        });
                    } else {
                        members.push(m);
                    }
                }
                kb.types.push(TypeDecl { name: t.name, members });
            }
            Stmt::Individuals(list) => kb.extra_individuals.extend(list),
            Stmt::Schema { parents, child } => {
                kb.schemata.push(Schema { parents, child, cpt: CptTemplate::empty() })
            }
            Stmt::Row { .. } => row_stmts.push(stmt),
            Stmt::Prior { atom, p, .. } => kb.priors.push(Prior { atom, p_true: p }),
        }
    }

    for stmt in row_stmts {
        let Stmt::Row { child, conds, p, span } = stmt else { unreachable!() };
        let schema = kb.schemata.iter_mut().find(|s| {
            s.child.predicate == child.predicate && s.child.arity() == child.arity()
        });
        let Some(schema) = schema else {
            diags.push(ParseDiagnostic {
                span,
                message: format!(
                    "no schema has a child matching {}/{}",
                    child.predicate,
                    child.arity()
                ),
                severity: Severity::Error,
            });
            continue;
        };
        if child != schema.child {
            diags.push(ParseDiagnostic {
                span,
                message: format!(
                    "row head `{child}` does not match the schema child `{}`",
                    schema.child
                ),
                severity: Severity::Error,
            });
            continue;
        }
        if conds.len() != schema.parents.len() {
            diags.push(ParseDiagnostic {
                span,
                message: format!(
                    "row for `{child}` lists {} conditions but the schema has {} parents",
                    conds.len(),
                    schema.parents.len()
                ),
                severity: Severity::Error,
            });
            continue;
        }
        let mut key = Vec::with_capacity(conds.len());
        let mut ok = true;
        for ((cond, positive), parent) in conds.iter().zip(&schema.parents) {
            if cond != parent {
                diags.push(ParseDiagnostic {
                    span,
                    message: format!(
                        "row condition `{cond}` does not match schema parent `{parent}` \
                         (conditions must follow the schema's parent order)"
                    ),
                    severity: Severity::Error,
                });
                ok = false;
                break;
            }
            key.push(*positive);
        }
        if !ok {
            continue;
        }
        if schema.cpt.rows.insert(key, p).is_some() {
            diags.push(ParseDiagnostic {
                span,
                message: format!("duplicate contingency row for `{child}`"),
                severity: Severity::Error,
            });
        }
    }

    if diags.iter().any(|d| d.severity == Severity::Error) {
        Err(diags)
    } else {
        Ok(kb)
    }
}

/// Parses a single run-time command:
/// `observe atom = true|false`, `query atom`, `member type += constant`.
pub fn parse_command(text: &str) -> Result<Command, ParseDiagnostic> {
    let tokens = Lexer::lex(text, 1)?;
    let mut cur = Cursor::new(tokens, 1, text.len());
    let cmd = match cur.peek() {
        Some(Token::Ident(kw)) if kw == "observe" => {
            cur.bump();
            let atom = parse_ground_atom_inner(&mut cur)?;
            cur.expect(&Token::Equals, "`=`")?;
            let span = cur.span();
            let value = match cur.bump() {
                Some(Token::Ident(v)) if v == "true" => true,
                Some(Token::Ident(v)) if v == "false" => false,
                _ => {
                    return Err(ParseDiagnostic {
                        span,
                        message: "expected `true` or `false`".into(),
                        severity: Severity::Error,
                    })
                }
            };
            Command::Observe(atom, value)
        }
        Some(Token::Ident(kw)) if kw == "query" => {
            cur.bump();
            Command::Query(parse_ground_atom_inner(&mut cur)?)
        }
        Some(Token::Ident(kw)) if kw == "member" => {
            cur.bump();
            let type_name = cur.ident("a type name")?;
            cur.expect(&Token::PlusEquals, "`+=`")?;
            let span = cur.span();
            let constant = cur.ident("a constant")?;
            if constant.is_parameter() {
                return Err(ParseDiagnostic {
                    span,
                    message: format!("`{constant}` is capitalized; members must be constants"),
                    severity: Severity::Error,
                });
            }
            Command::AddMember { type_name, constant }
        }
        _ => return Err(cur.error("expected `observe`, `query` or `member`")),
    };
    if !cur.at_end() {
        return Err(cur.error("unexpected trailing tokens"));
    }
    Ok(cmd)
}

fn parse_ground_atom_inner(cur: &mut Cursor) -> Result<GroundAtom, ParseDiagnostic> {
    let span = cur.span();
    let atom = parse_atom(cur)?;
    if !atom.is_ground() {
        return Err(ParseDiagnostic {
            span,
            message: format!("`{atom}` contains parameters; a ground atom is required here"),
            severity: Severity::Error,
        });
    }
    Ok(GroundAtom::new(atom.predicate, atom.args))
}

/// Parses a ground atom in canonical text form, e.g. `testimony(watson)`.
pub fn parse_ground_atom(text: &str) -> Result<GroundAtom, ParseDiagnostic> {
    let tokens = Lexer::lex(text, 1)?;
    let mut cur = Cursor::new(tokens, 1, text.len());
    let atom = parse_ground_atom_inner(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.error("unexpected trailing tokens"));
    }
    Ok(atom)
}

/// Renders a knowledge base back into `.skb` text. The output reparses to a
/// structurally equal knowledge base.
pub fn pretty_print(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    for t in &kb.types {
        let members: Vec<String> = t.members.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("type {} = {{ {} }}.\n", t.name, members.join(", ")));
    }
    if !kb.extra_individuals.is_empty() {
        let list: Vec<String> = kb.extra_individuals.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("individuals {{ {} }}.\n", list.join(", ")));
    }
    for s in &kb.schemata {
        let parents: Vec<String> = s.parents.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("schema {} -> {}.\n", parents.join(", "), s.child));
        for (key, p) in &s.cpt.rows {
            let conds: Vec<String> = s
                .parents
                .iter()
                .zip(key)
                .map(|(parent, positive)| {
                    if *positive {
                        parent.to_string()
                    } else {
                        format!("~{parent}")
                    }
                })
                .collect();
            out.push_str(&format!("p({} | {}) = {}.\n", s.child, conds.join(", "), p));
        }
    }
    for pr in &kb.priors {
        out.push_str(&format!("p({}) = {}.\n", pr.atom, pr.p_true));
    }
    out
}
