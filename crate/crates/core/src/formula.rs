//! Formula AST, concrete-syntax parser, printer and static analysis.
//!
//! The primitive connectives are `false`, atoms, implication, `<<Γ>> X`,
//! `<<Γ>> _ U _`, `[[Γ]] _ U _` and the two refinement binders. Everything
//! else (`true`, `~`, `&`, `|`, `F`, `G`, `[[Γ]] X`) is desugared at parse
//! time. Negation is represented as `φ -> false`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Internal marker prefix for chain placeholders; not lexable as an
/// identifier, so it can never clash with user atoms.
pub(crate) const CHAIN_MARKER: char = '\u{1}';

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Formula {
    False,
    Atom(String),
    Implies(Box<Formula>, Box<Formula>),
    /// `<<Γ>> X φ`
    Next(BTreeSet<String>, Box<Formula>),
    /// `<<Γ>> φ U ψ`
    Until(BTreeSet<String>, Box<Formula>, Box<Formula>),
    /// `[[Γ]] φ U ψ`
    DualUntil(BTreeSet<String>, Box<Formula>, Box<Formula>),
    /// `split i -> {Γ} . φ`: agent `i` can distribute its ability among the
    /// fresh sub-agents so that the body holds.
    Split {
        agent: String,
        subs: Vec<String>,
        body: Box<Formula>,
    },
    /// `dsplit i -> {Γ} . φ`, equivalent to `~split i -> {Γ} . ~φ`.
    DualSplit {
        agent: String,
        subs: Vec<String>,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::Implies(Box::new(Formula::False), Box::new(Formula::False))
    }

    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(f: Formula) -> Formula {
        Formula::Implies(Box::new(f), Box::new(Formula::False))
    }

    /// `φ ∨ ψ` as `¬φ -> ψ`.
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(Formula::neg(a)), Box::new(b))
    }

    /// `φ ∧ ψ` as `¬(φ -> ¬ψ)`.
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::neg(Formula::Implies(Box::new(a), Box::new(Formula::neg(b))))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(coalition: &[&str], f: Formula) -> Formula {
        Formula::Next(names(coalition), Box::new(f))
    }

    pub fn until(coalition: &[&str], f: Formula, g: Formula) -> Formula {
        Formula::Until(names(coalition), Box::new(f), Box::new(g))
    }

    pub fn dual_until(coalition: &[&str], f: Formula, g: Formula) -> Formula {
        Formula::DualUntil(names(coalition), Box::new(f), Box::new(g))
    }

    /// `<<Γ>> F φ` as `<<Γ>> true U φ`.
    pub fn eventually(coalition: &[&str], f: Formula) -> Formula {
        Formula::Until(names(coalition), Box::new(Formula::tt()), Box::new(f))
    }

    /// `<<Γ>> G φ` as `~[[Γ]] true U ~φ`.
    pub fn globally(coalition: &[&str], f: Formula) -> Formula {
        Formula::neg(Formula::DualUntil(
            names(coalition),
            Box::new(Formula::tt()),
            Box::new(Formula::neg(f)),
        ))
    }

    /// `[[Γ]] X φ` as `~<<Γ>> X ~φ`.
    pub fn dual_next(coalition: &[&str], f: Formula) -> Formula {
        Formula::neg(Formula::Next(names(coalition), Box::new(Formula::neg(f))))
    }

    /// `[[Γ]] F φ` as `[[Γ]] true U φ`.
    pub fn dual_eventually(coalition: &[&str], f: Formula) -> Formula {
        Formula::DualUntil(names(coalition), Box::new(Formula::tt()), Box::new(f))
    }

    /// `[[Γ]] G φ` as `~<<Γ>> true U ~φ`.
    pub fn dual_globally(coalition: &[&str], f: Formula) -> Formula {
        Formula::neg(Formula::Until(
            names(coalition),
            Box::new(Formula::tt()),
            Box::new(Formula::neg(f)),
        ))
    }

    pub fn split(agent: &str, subs: &[&str], body: Formula) -> Formula {
        Formula::Split {
            agent: agent.to_string(),
            subs: subs.iter().map(|s| s.to_string()).collect(),
            body: Box::new(body),
        }
    }

    pub fn dual_split(agent: &str, subs: &[&str], body: Formula) -> Formula {
        Formula::DualSplit {
            agent: agent.to_string(),
            subs: subs.iter().map(|s| s.to_string()).collect(),
            body: Box::new(body),
        }
    }

    pub fn is_split_free(&self) -> bool {
        match self {
            Formula::False | Formula::Atom(_) => true,
            Formula::Implies(a, b) => a.is_split_free() && b.is_split_free(),
            Formula::Next(_, f) => f.is_split_free(),
            Formula::Until(_, a, b) | Formula::DualUntil(_, a, b) => {
                a.is_split_free() && b.is_split_free()
            }
            Formula::Split { .. } | Formula::DualSplit { .. } => false,
        }
    }
}

fn names(coalition: &[&str]) -> BTreeSet<String> {
    coalition.iter().map(|s| s.to_string()).collect()
}

/// Agents occurring free in coalition annotations. Sub-agents are bound by
/// their binder; the refined agent itself occurs free at the binder.
pub fn free_agents(f: &Formula) -> BTreeSet<String> {
    match f {
        Formula::False | Formula::Atom(_) => BTreeSet::new(),
        Formula::Implies(a, b) => {
            let mut s = free_agents(a);
            s.extend(free_agents(b));
            s
        }
        Formula::Next(c, g) => {
            let mut s = c.clone();
            s.extend(free_agents(g));
            s
        }
        Formula::Until(c, a, b) | Formula::DualUntil(c, a, b) => {
            let mut s = c.clone();
            s.extend(free_agents(a));
            s.extend(free_agents(b));
            s
        }
        Formula::Split { agent, subs, body } | Formula::DualSplit { agent, subs, body } => {
            let mut s = free_agents(body);
            for sub in subs {
                s.remove(sub);
            }
            s.insert(agent.clone());
            s
        }
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

/// Recognises the desugared encodings so printing can use the surface
/// syntax again. Every sugar reparses to exactly the matched tree, which
/// keeps `parse(print(f)) = f`.
fn match_neg(f: &Formula) -> Option<&Formula> {
    match f {
        Formula::Implies(a, b) if **b == Formula::False => Some(a),
        _ => None,
    }
}

/// `¬(a -> ¬b)`, the parser's encoding of `a & b`.
fn match_and(f: &Formula) -> Option<(&Formula, &Formula)> {
    let inner = match_neg(f)?;
    match inner {
        Formula::Implies(a, b) => match_neg(b).map(|rhs| (&**a, rhs)),
        _ => None,
    }
}

/// `¬a -> b` with `b ≠ false`, the parser's encoding of `a | b`.
fn match_or(f: &Formula) -> Option<(&Formula, &Formula)> {
    match f {
        Formula::Implies(a, b) if **b != Formula::False => match_neg(a).map(|lhs| (lhs, &**b)),
        _ => None,
    }
}

fn is_tt(f: &Formula) -> bool {
    *f == Formula::tt()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_tt(self) {
            return write!(f, "true");
        }
        if let Some((a, b)) = match_and(self) {
            return write!(f, "({} & {})", Operand(a), Operand(b));
        }
        if let Some(inner) = match_neg(self) {
            // dual-X and the two G forms are negation-shaped
            if let Formula::Next(c, g) = inner {
                if let Some(arg) = match_neg(g) {
                    return write!(f, "[[{}]] X {}", join(c), Operand(arg));
                }
            }
            if let Formula::DualUntil(c, a, b) = inner {
                if is_tt(a) {
                    if let Some(arg) = match_neg(b) {
                        return write!(f, "<<{}>> G {}", join(c), Operand(arg));
                    }
                }
            }
            if let Formula::Until(c, a, b) = inner {
                if is_tt(a) {
                    if let Some(arg) = match_neg(b) {
                        return write!(f, "[[{}]] G {}", join(c), Operand(arg));
                    }
                }
            }
            return write!(f, "~{}", Operand(inner));
        }
        if let Some((a, b)) = match_or(self) {
            return write!(f, "({} | {})", Operand(a), Operand(b));
        }
        match self {
            Formula::False => write!(f, "false"),
            Formula::Atom(p) => write!(f, "{p}"),
            // a bare binder on the left would swallow the arrow into its body
            Formula::Implies(a, b) if matches!(**a, Formula::Split { .. } | Formula::DualSplit { .. }) => {
                write!(f, "(({a}) -> {b})")
            }
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Next(c, g) => write!(f, "<<{}>> X {}", join(c), Operand(g)),
            Formula::Until(c, a, b) if is_tt(a) => {
                write!(f, "<<{}>> F {}", join(c), Operand(b))
            }
            Formula::Until(c, a, b) => {
                write!(f, "<<{}>> {} U {}", join(c), Operand(a), Operand(b))
            }
            Formula::DualUntil(c, a, b) if is_tt(a) => {
                write!(f, "[[{}]] F {}", join(c), Operand(b))
            }
            Formula::DualUntil(c, a, b) => {
                write!(f, "[[{}]] {} U {}", join(c), Operand(a), Operand(b))
            }
            Formula::Split { agent, subs, body } => {
                write!(f, "split {agent} -> {{{}}} . {body}", subs.join(","))
            }
            Formula::DualSplit { agent, subs, body } => {
                write!(f, "dsplit {agent} -> {{{}}} . {body}", subs.join(","))
            }
        }
    }
}

fn join(c: &BTreeSet<String>) -> String {
    c.iter().cloned().collect::<Vec<_>>().join(",")
}

/// Prints a formula so it is safe in unary positions (negation bodies,
/// modal arguments, `&`/`|` operands). Atoms, negations and modal heads
/// reparse correctly bare; binders have open-ended bodies and implications
/// sit at lower precedence, so those get parentheses. `&`/`|` already print
/// their own parentheses.
struct Operand<'a>(&'a Formula);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_tt(self.0) {
            return write!(f, "true");
        }
        if match_and(self.0).is_some() || match_or(self.0).is_some() {
            return write!(f, "{}", self.0); // prints with outer parens
        }
        if match_neg(self.0).is_some() {
            return write!(f, "{}", self.0); // ~-forms nest in unary position
        }
        match self.0 {
            Formula::False | Formula::Atom(_) => write!(f, "{}", self.0),
            // a plain implication prints its own parentheses
            Formula::Implies(..) => write!(f, "{}", self.0),
            Formula::Next(..) | Formula::Until(..) | Formula::DualUntil(..) => {
                write!(f, "{}", self.0)
            }
            other => write!(f, "({other})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    False,
    True,
    SplitKw,
    DsplitKw,
    Arrow,
    Bar,
    Amp,
    Tilde,
    LPar,
    RPar,
    LBrace,
    RBrace,
    CoalL,  // <<
    CoalR,  // >>
    DualL,  // [[
    DualR,  // ]]
    Comma,
    Dot,
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars>, col: &mut usize| {
            chars.next();
            *col += 1;
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => bump(&mut chars, &mut col),
            '(' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::LPar, pos));
            }
            ')' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::RPar, pos));
            }
            '{' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::LBrace, pos));
            }
            '}' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::RBrace, pos));
            }
            ',' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::Comma, pos));
            }
            '.' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::Dot, pos));
            }
            '~' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::Tilde, pos));
            }
            '&' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::Amp, pos));
            }
            '|' => {
                bump(&mut chars, &mut col);
                toks.push((Tok::Bar, pos));
            }
            '-' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut col);
                    toks.push((Tok::Arrow, pos));
                } else {
                    return Err(ParseError {
                        message: "expected `->`".into(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            '<' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'<') {
                    bump(&mut chars, &mut col);
                    toks.push((Tok::CoalL, pos));
                } else {
                    return Err(ParseError {
                        message: "expected `<<`".into(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            '>' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut col);
                    toks.push((Tok::CoalR, pos));
                } else {
                    return Err(ParseError {
                        message: "expected `>>`".into(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            '[' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'[') {
                    bump(&mut chars, &mut col);
                    toks.push((Tok::DualL, pos));
                } else {
                    return Err(ParseError {
                        message: "expected `[[`".into(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            ']' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&']') {
                    bump(&mut chars, &mut col);
                    toks.push((Tok::DualR, pos));
                } else {
                    return Err(ParseError {
                        message: "expected `]]`".into(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            c if c.is_alphanumeric() || c == '_' || c == '\'' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '\'' {
                        word.push(c);
                        bump(&mut chars, &mut col);
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "false" => Tok::False,
                    "true" => Tok::True,
                    "split" => Tok::SplitKw,
                    "dsplit" => Tok::DsplitKw,
                    _ => Tok::Ident(word),
                };
                toks.push((tok, pos));
            }
            other => {
                return Err(ParseError {
                    message: format!("unexpected character `{other}`"),
                    line: pos.line,
                    col: pos.col,
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [(Tok, Pos)],
    at: usize,
    end: Pos,
    /// agents currently in scope
    scope: BTreeSet<String>,
    /// every agent name seen so far (ambient or bound); sub-agent names must
    /// be globally fresh, so shadowing is rejected rather than renamed
    used: BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn pos(&self) -> Pos {
        if self.at < self.toks.len() {
            self.toks[self.at].1
        } else {
            self.end
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let p = self.pos();
        Err(ParseError {
            message: message.into(),
            line: p.line,
            col: p.col,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn next_tok(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.at += 1;
                Ok(())
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    /// `idlist`, resolved against the current scope. Empty coalitions are
    /// accepted so the grand-coalition validities can be written down.
    fn idlist(&mut self, closer: &Tok) -> Result<BTreeSet<String>, ParseError> {
        let mut out = BTreeSet::new();
        if self.peek() == Some(closer) {
            return Ok(out);
        }
        loop {
            let name = self.ident("agent name")?;
            if !self.scope.contains(&name) {
                return self.err(format!("unbound agent name `{name}`"));
            }
            out.insert(name);
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
            } else {
                return Ok(out);
            }
        }
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.at += 1;
            let rhs = self.implies()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Bar) {
            self.at += 1;
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.at += 1;
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.peek() == Some(&Tok::Tilde) {
            self.at += 1;
            let f = self.unary()?;
            return Ok(Formula::neg(f));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        let before = self.at;
        match self.next_tok() {
            Some(Tok::False) => Ok(Formula::False),
            Some(Tok::True) => Ok(Formula::tt()),
            Some(Tok::Ident(p)) => Ok(Formula::Atom(p)),
            Some(Tok::LPar) => {
                let f = self.implies()?;
                self.expect(Tok::RPar, "`)`")?;
                Ok(f)
            }
            Some(Tok::CoalL) => {
                let coalition = self.idlist(&Tok::CoalR)?;
                self.expect(Tok::CoalR, "`>>`")?;
                self.modal_tail(coalition, false)
            }
            Some(Tok::DualL) => {
                let coalition = self.idlist(&Tok::DualR)?;
                self.expect(Tok::DualR, "`]]`")?;
                self.modal_tail(coalition, true)
            }
            Some(Tok::SplitKw) => self.binder(false),
            Some(Tok::DsplitKw) => self.binder(true),
            _ => {
                self.at = before;
                self.err("expected a formula")
            }
        }
    }

    /// `X φ | F φ | G φ | φ U ψ` after a coalition. `X`, `F`, `G` and `U`
    /// are positional keywords here; parenthesise to use them as atoms.
    fn modal_tail(&mut self, coalition: BTreeSet<String>, dual: bool) -> Result<Formula, ParseError> {
        let c: Vec<&str> = coalition.iter().map(|s| s.as_str()).collect();
        match self.peek() {
            Some(Tok::Ident(k)) if k == "X" => {
                self.at += 1;
                let f = self.unary()?;
                Ok(if dual { Formula::dual_next(&c, f) } else { Formula::next(&c, f) })
            }
            Some(Tok::Ident(k)) if k == "F" => {
                self.at += 1;
                let f = self.unary()?;
                Ok(if dual { Formula::dual_eventually(&c, f) } else { Formula::eventually(&c, f) })
            }
            Some(Tok::Ident(k)) if k == "G" => {
                self.at += 1;
                let f = self.unary()?;
                Ok(if dual { Formula::dual_globally(&c, f) } else { Formula::globally(&c, f) })
            }
            _ => {
                let lhs = self.unary()?;
                match self.peek() {
                    Some(Tok::Ident(k)) if k == "U" => {
                        self.at += 1;
                        let rhs = self.unary()?;
                        let cs: Vec<&str> = coalition.iter().map(|s| s.as_str()).collect();
                        Ok(if dual {
                            Formula::dual_until(&cs, lhs, rhs)
                        } else {
                            Formula::until(&cs, lhs, rhs)
                        })
                    }
                    _ => self.err("expected `U` (or `X`/`F`/`G` right after the coalition)"),
                }
            }
        }
    }

    fn binder(&mut self, dual: bool) -> Result<Formula, ParseError> {
        let agent = self.ident("refined agent name")?;
        if !self.scope.contains(&agent) {
            return self.err(format!("unbound agent name `{agent}`"));
        }
        self.expect(Tok::Arrow, "`->`")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut subs: Vec<String> = Vec::new();
        loop {
            let name = self.ident("sub-agent name")?;
            if self.used.contains(&name) {
                return self.err(format!(
                    "sub-agent `{name}` clashes with an agent already in use"
                ));
            }
            if subs.contains(&name) {
                return self.err(format!("sub-agent `{name}` listed twice"));
            }
            subs.push(name);
            if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        self.expect(Tok::Dot, "`.`")?;
        // body scope: (scope \ {agent}) ∪ subs
        let saved = self.scope.clone();
        self.scope.remove(&agent);
        for s in &subs {
            self.scope.insert(s.clone());
            self.used.insert(s.clone());
        }
        let body = self.implies()?;
        self.scope = saved;
        Ok(if dual {
            Formula::DualSplit { agent, subs, body: Box::new(body) }
        } else {
            Formula::Split { agent, subs, body: Box::new(body) }
        })
    }
}

/// Parses a formula, resolving agent names against `ambient_agents` plus any
/// enclosing binders. Derived forms are desugared.
pub fn parse_formula(text: &str, ambient_agents: &BTreeSet<String>) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let end = Pos { line: lines, col: text.lines().last().map_or(1, |l| l.chars().count() + 1) };
    let mut p = Parser {
        toks: &toks,
        at: 0,
        end,
        scope: ambient_agents.clone(),
        used: ambient_agents.clone(),
    };
    let f = p.implies()?;
    if p.at != toks.len() {
        return p.err("trailing input after formula");
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Flat-fragment analysis
// ---------------------------------------------------------------------------

/// One maximal same-polarity refinement chain.
///
/// A positive chain stands for `<i1->Γ1>...<im->Γm> body`; a negative chain
/// for its negation (which is how an all-`dsplit` chain normalises).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatChain {
    /// `(refined agent, sub-agents)` in application order, outermost first.
    pub elements: Vec<(String, Vec<String>)>,
    /// Split-free body, in scope of all sub-agents.
    pub body: Formula,
    pub negative: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Flatness {
    Flat,
    NotFlat { offending: Formula },
}

/// A flat formula split into a split-free skeleton over chain placeholders
/// plus the chains themselves. Placeholder atom `k` is `\u{1}k`.
#[derive(Clone, Debug)]
pub struct FlatDecomposition {
    pub skeleton: Formula,
    pub chains: Vec<FlatChain>,
}

pub fn marker_atom(k: usize) -> Formula {
    Formula::Atom(format!("{CHAIN_MARKER}{k}"))
}

pub fn marker_index(name: &str) -> Option<usize> {
    name.strip_prefix(CHAIN_MARKER).and_then(|s| s.parse().ok())
}

/// Classifies a formula as flat or not.
///
/// Flat means every `split`/`dsplit` occurrence heads a maximal chain of
/// same-polarity refinements over a split-free body. Chains tolerate double
/// negations between elements (polarity is what matters), so
/// `dsplit i . dsplit j . φ` is flat while `dsplit i . split j . φ` is not.
pub fn classify_flat(f: &Formula) -> Flatness {
    match flat_decompose(f) {
        Ok(_) => Flatness::Flat,
        Err(offending) => Flatness::NotFlat { offending },
    }
}

/// Decomposes a flat formula; returns the offending subformula otherwise.
pub fn flat_decompose(f: &Formula) -> Result<FlatDecomposition, Formula> {
    let mut chains: Vec<FlatChain> = Vec::new();
    let skeleton = walk(f, &mut chains)?;
    Ok(FlatDecomposition { skeleton, chains })
}

fn walk(f: &Formula, chains: &mut Vec<FlatChain>) -> Result<Formula, Formula> {
    match f {
        Formula::False | Formula::Atom(_) => Ok(f.clone()),
        Formula::Implies(a, b) => Ok(Formula::Implies(
            Box::new(walk(a, chains)?),
            Box::new(walk(b, chains)?),
        )),
        Formula::Next(c, g) => Ok(Formula::Next(c.clone(), Box::new(walk(g, chains)?))),
        Formula::Until(c, a, b) => Ok(Formula::Until(
            c.clone(),
            Box::new(walk(a, chains)?),
            Box::new(walk(b, chains)?),
        )),
        Formula::DualUntil(c, a, b) => Ok(Formula::DualUntil(
            c.clone(),
            Box::new(walk(a, chains)?),
            Box::new(walk(b, chains)?),
        )),
        Formula::Split { .. } | Formula::DualSplit { .. } => {
            let chain = extract_chain(f)?;
            let k = match chains.iter().position(|c| *c == chain) {
                Some(k) => k,
                None => {
                    chains.push(chain);
                    chains.len() - 1
                }
            };
            Ok(marker_atom(k))
        }
    }
}

/// Rewrites a `split`/`dsplit` head into `(¬)^ε <i1->Γ1>...<im->Γm> body`.
///
/// Tracks the pending negation parity while descending: a `dsplit` is
/// `¬ split ¬`, so it flips the parity at the operator and leaves one
/// negation on its body. A chain continues only while each operator comes
/// out at the chain's polarity; a polarity switch or a split left in the
/// body makes the formula non-flat.
fn extract_chain(head: &Formula) -> Result<FlatChain, Formula> {
    let mut elements: Vec<(String, Vec<String>)> = Vec::new();
    let mut negative = false;
    let mut cur = head.clone();
    let mut neg = 0u8;
    loop {
        match cur {
            Formula::Implies(a, b) if *b == Formula::False => {
                neg ^= 1;
                cur = *a;
            }
            Formula::Split { agent, subs, body } => {
                if elements.is_empty() {
                    negative = neg == 1;
                } else if neg == 1 {
                    return Err(head.clone());
                }
                elements.push((agent, subs));
                cur = *body;
                neg = 0;
            }
            Formula::DualSplit { agent, subs, body } => {
                let effective = neg ^ 1;
                if elements.is_empty() {
                    negative = effective == 1;
                } else if effective == 1 {
                    return Err(head.clone());
                }
                elements.push((agent, subs));
                cur = *body;
                neg = 1;
            }
            other => {
                if !other.is_split_free() {
                    return Err(head.clone());
                }
                let body = if neg == 1 { Formula::neg(other) } else { other };
                return Ok(FlatChain { elements, body, negative });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agents12() -> BTreeSet<String> {
        ["1", "2"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_basic_next() {
        let f = parse_formula("<<1>> X p", &agents12()).unwrap();
        assert_eq!(f, Formula::next(&["1"], Formula::atom("p")));
    }

    #[test]
    fn parses_split() {
        let f = parse_formula("split 1 -> {a,b} . (<<a,2>> X p)", &agents12()).unwrap();
        assert_eq!(
            f,
            Formula::split("1", &["a", "b"], Formula::next(&["a", "2"], Formula::atom("p")))
        );
    }

    #[test]
    fn subagent_clash_is_rejected() {
        let err = parse_formula("split 1 -> {1,b} . p", &agents12()).unwrap_err();
        assert!(err.message.contains("clashes"), "{err}");
        let err = parse_formula("split 1 -> {a,a} . p", &agents12()).unwrap_err();
        assert!(err.message.contains("twice"), "{err}");
        // reuse across sibling binders is shadowing, also rejected
        let err =
            parse_formula("(split 1 -> {a} . p) & (split 2 -> {a} . p)", &agents12()).unwrap_err();
        assert!(err.message.contains("clashes"), "{err}");
    }

    #[test]
    fn refined_agent_must_be_in_scope() {
        let err = parse_formula("split 3 -> {a} . p", &agents12()).unwrap_err();
        assert!(err.message.contains("unbound"), "{err}");
        // inside the body the refined agent is gone
        let err = parse_formula("split 1 -> {a} . <<1>> X p", &agents12()).unwrap_err();
        assert!(err.message.contains("unbound"), "{err}");
    }

    #[test]
    fn unknown_coalition_agent_is_rejected() {
        let err = parse_formula("<<3>> X p", &agents12()).unwrap_err();
        assert!(err.message.contains("unbound"), "{err}");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_formula("<<1>> X", &agents12()).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.col >= 8);
    }

    #[test]
    fn derived_forms_desugar() {
        let f = parse_formula("~p", &agents12()).unwrap();
        assert_eq!(f, Formula::neg(Formula::atom("p")));
        let f = parse_formula("true", &agents12()).unwrap();
        assert_eq!(f, Formula::tt());
        let f = parse_formula("<<1>> F p", &agents12()).unwrap();
        assert_eq!(f, Formula::eventually(&["1"], Formula::atom("p")));
        let f = parse_formula("[[2]] X p", &agents12()).unwrap();
        assert_eq!(f, Formula::dual_next(&["2"], Formula::atom("p")));
        let f = parse_formula("<<1,2>> G p", &agents12()).unwrap();
        assert_eq!(f, Formula::globally(&["1", "2"], Formula::atom("p")));
    }

    #[test]
    fn precedence() {
        // -> binds loosest, then |, then &, then ~
        let f = parse_formula("~p & q | r -> s", &agents12()).unwrap();
        let expect = Formula::implies(
            Formula::or(
                Formula::and(Formula::neg(Formula::atom("p")), Formula::atom("q")),
                Formula::atom("r"),
            ),
            Formula::atom("s"),
        );
        assert_eq!(f, expect);
        // modal argument binds tighter than &
        let f = parse_formula("<<1>> X p & q", &agents12()).unwrap();
        assert_eq!(
            f,
            Formula::and(Formula::next(&["1"], Formula::atom("p")), Formula::atom("q"))
        );
    }

    #[test]
    fn empty_coalition_parses() {
        let f = parse_formula("<<>> X p", &agents12()).unwrap();
        assert_eq!(f, Formula::next(&[], Formula::atom("p")));
    }

    #[test]
    fn free_agents_examples() {
        assert!(free_agents(&Formula::atom("p")).is_empty());
        let f = Formula::next(&["1", "2"], Formula::atom("p"));
        assert_eq!(free_agents(&f), agents12());
        let f = Formula::split("1", &["a", "b"], Formula::next(&["a", "2"], Formula::atom("p")));
        assert_eq!(
            free_agents(&f),
            ["1", "2"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn flatness_matches_worked_examples() {
        let amb = agents12();
        // <<i>> F (<i->Γ><j->Δ>φ ∧ [k->Υ][l->Ξ]ψ) with split-free φ, ψ is flat
        let f = parse_formula(
            "<<1>> F ((split 1 -> {a} . split 2 -> {b} . p) & (dsplit 1 -> {c} . dsplit 2 -> {d} . q))",
            &amb,
        );
        // note: second conjunct re-splits 1 and 2, which is out of scope inside
        // the first chain only; siblings are fine but names must stay fresh
        let f = f.unwrap();
        assert_eq!(classify_flat(&f), Flatness::Flat);

        // [i->Γ]<j->Δ>φ is not flat
        let g = parse_formula("dsplit 1 -> {a} . split 2 -> {b} . p", &amb).unwrap();
        assert!(matches!(classify_flat(&g), Flatness::NotFlat { .. }));

        // <i->Γ><<k>>F<j->Δ>φ is not flat
        let h = parse_formula("split 1 -> {a} . <<2>> F (split 2 -> {b} . p)", &amb).unwrap();
        assert!(matches!(classify_flat(&h), Flatness::NotFlat { .. }));

        // double negation between same-polarity elements stays flat
        let k = parse_formula("split 1 -> {a} . ~~split 2 -> {b} . p", &amb).unwrap();
        assert_eq!(classify_flat(&k), Flatness::Flat);

        // mixed polarity the other way round is not flat either
        let l = parse_formula("split 1 -> {a} . dsplit 2 -> {b} . p", &amb).unwrap();
        assert!(matches!(classify_flat(&l), Flatness::NotFlat { .. }));
    }

    #[test]
    fn dual_chain_normalises_negative() {
        let amb = agents12();
        let f = parse_formula("dsplit 1 -> {a} . dsplit 2 -> {b} . p", &amb).unwrap();
        let d = flat_decompose(&f).unwrap();
        assert_eq!(d.chains.len(), 1);
        let chain = &d.chains[0];
        assert!(chain.negative);
        assert_eq!(chain.elements.len(), 2);
        // body carries the final negation from the innermost dual
        assert_eq!(chain.body, Formula::neg(Formula::atom("p")));
    }

    #[test]
    fn decompose_dedups_identical_chains() {
        let f = Formula::and(
            Formula::split("1", &["a"], Formula::atom("p")),
            Formula::split("1", &["a"], Formula::atom("p")),
        );
        let d = flat_decompose(&f).unwrap();
        assert_eq!(d.chains.len(), 1);
    }

    #[test]
    fn roundtrip_samples() {
        let amb = agents12();
        for text in [
            "<<1>> X p",
            "<<1,2>> p U q",
            "[[2]] p U (p -> false)",
            "split 1 -> {a,b} . (~(<<a>> X p) & <<a,b>> X p)",
            "dsplit 1 -> {a,b} . <<a,2>> X p",
        ] {
            let f = parse_formula(text, &amb).unwrap();
            let printed = f.to_string();
            let g = parse_formula(&printed, &amb).unwrap();
            assert_eq!(f, g, "roundtrip failed for {text} -> {printed}");
        }
    }
}
