//! The model and witness file formats.
//!
//! Models are line-oriented text, `#` starts a comment, tokens are
//! whitespace-separated:
//!
//! ```text
//! agents: 1 2
//! actions 1: u n
//! actions 2: w
//! states: locked unlocked
//! label locked:
//! label unlocked: unlocked_p
//! trans locked: u w -> unlocked
//! ```
//!
//! Action columns in `trans` rows follow the `agents:` declaration order and
//! every `(state, vector)` pair must appear exactly once. A witness file is
//! a model (the refined one) followed by one `hom` block per chain element:
//!
//! ```text
//! hom 1 -> {a,b}:
//! map a_0 b_0 -> n
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::cgm::{decode_into, Cgm, CgmDesc, Defect, TransRow};
use crate::refinement::Homomorphism;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}, col {col}: {message}")]
    Syntax { message: String, line: usize, col: usize },
    #[error("model is not well-formed:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Defect>),
    #[error("witness hom block {index}: {message}")]
    BadHom { index: usize, message: String },
}

fn syntax(message: impl Into<String>, line: usize, col: usize) -> FormatError {
    FormatError::Syntax { message: message.into(), line, col }
}

/// A parsed witness file: the refined model plus the homomorphism blocks in
/// chain application order. The map rows are kept textual; resolve them
/// against a base model with [`resolve_hom`].
#[derive(Clone, Debug)]
pub struct WitnessFile {
    pub model: CgmDesc,
    pub homs: Vec<HomBlock>,
}

#[derive(Clone, Debug)]
pub struct HomBlock {
    pub refined_agent: String,
    pub subagents: Vec<String>,
    /// `(sub-action names in subagent order, refined action name)`
    pub rows: Vec<(Vec<String>, String)>,
}

/// Parses the model portion of a file. Stops at the first `hom` directive
/// when `stop_at_hom` and reports where it stopped.
fn parse_model_lines(
    text: &str,
    stop_at_hom: bool,
) -> Result<(CgmDesc, Option<usize>), FormatError> {
    let mut desc = CgmDesc::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let Some(colon) = line.find(':') else {
            return Err(syntax("expected `:` in directive", line_no, line.len() + 1));
        };
        let head: Vec<&str> = line[..colon].split_whitespace().collect();
        let tail: Vec<&str> = line[colon + 1..].split_whitespace().collect();
        match head.as_slice() {
            ["agents"] => desc.agents.extend(tail.iter().map(|s| s.to_string())),
            ["actions", agent] => {
                desc.alphabets
                    .push((agent.to_string(), tail.iter().map(|s| s.to_string()).collect()));
            }
            ["states"] => desc.states.extend(tail.iter().map(|s| s.to_string())),
            ["label", state] => {
                desc.labels
                    .push((state.to_string(), tail.iter().map(|s| s.to_string()).collect()));
            }
            ["trans", state] => {
                let Some(arrow) = tail.iter().position(|&t| t == "->") else {
                    return Err(syntax("expected `->` in trans row", line_no, colon + 2));
                };
                if arrow + 2 != tail.len() {
                    return Err(syntax(
                        "expected exactly one target state after `->`",
                        line_no,
                        colon + 2,
                    ));
                }
                desc.trans.push(TransRow {
                    state: state.to_string(),
                    actions: tail[..arrow].iter().map(|s| s.to_string()).collect(),
                    target: tail[arrow + 1].to_string(),
                });
            }
            ["hom", ..] if stop_at_hom => return Ok((desc, Some(lineno))),
            other => {
                return Err(syntax(
                    format!("unknown directive `{}`", other.join(" ")),
                    line_no,
                    1,
                ))
            }
        }
    }
    Ok((desc, None))
}

/// Parses a model description from text; the description may still fail
/// validation.
pub fn parse_model(text: &str) -> Result<CgmDesc, FormatError> {
    let (desc, _) = parse_model_lines(text, false)?;
    Ok(desc)
}

/// Parses and validates a model from a file. Well-formedness defects are
/// collected into the error.
pub fn load_model(path: &Path) -> Result<Cgm, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    load_model_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
}

pub fn load_model_str(text: &str) -> Result<Cgm, FormatError> {
    let desc = parse_model(text)?;
    Cgm::from_desc(&desc).map_err(FormatError::Invalid)
}

/// Serialises a model in the file format, deterministically.
pub fn model_to_string(m: &Cgm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "agents: {}", m.agents().join(" "));
    for (i, agent) in m.agents().iter().enumerate() {
        let _ = writeln!(out, "actions {agent}: {}", m.alphabet(i).join(" "));
    }
    let _ = writeln!(out, "states: {}", m.states().join(" "));
    for (w, state) in m.states().iter().enumerate() {
        let ps: Vec<&str> = m
            .props()
            .iter()
            .filter(|p| m.prop_states(p).unwrap().contains(w))
            .map(|p| p.as_str())
            .collect();
        if ps.is_empty() {
            let _ = writeln!(out, "label {state}:");
        } else {
            let _ = writeln!(out, "label {state}: {}", ps.join(" "));
        }
    }
    let sizes: Vec<usize> = (0..m.n_agents()).map(|a| m.alphabet(a).len()).collect();
    let mut digits = vec![0usize; m.n_agents()];
    for (w, state) in m.states().iter().enumerate() {
        for code in 0..m.n_joint() {
            decode_into(code, &sizes, &mut digits);
            let acts: Vec<&str> = digits
                .iter()
                .enumerate()
                .map(|(k, &d)| m.alphabet(k)[d].as_str())
                .collect();
            let _ = writeln!(
                out,
                "trans {state}: {} -> {}",
                acts.join(" "),
                m.state_name(m.successor(w, code))
            );
        }
    }
    out
}

/// Serialises a witness: optional comment header, the final refined model,
/// then one hom block per chain element in application order. The chain is
/// re-applied to the base model to name each stage's refined actions.
pub fn witness_to_string(
    base: &Cgm,
    homs: &[Homomorphism],
    header: &[String],
) -> Result<String, crate::refinement::HomError> {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let mut blocks = String::new();
    let mut cur = base.clone();
    for h in homs {
        let i = cur.agent_index(&h.refined_agent).map_err(|_| {
            crate::refinement::HomError::UnknownAgent(h.refined_agent.clone())
        })?;
        let _ = writeln!(blocks, "hom {} -> {{{}}}:", h.refined_agent, h.subagents.join(","));
        let sizes = h.sub_sizes();
        let mut digits = vec![0usize; h.subagents.len()];
        for (code, &target) in h.map.iter().enumerate() {
            decode_into(code, &sizes, &mut digits);
            let acts: Vec<&str> = digits
                .iter()
                .enumerate()
                .map(|(k, &d)| h.sub_alphabets[k][d].as_str())
                .collect();
            let _ = writeln!(blocks, "map {} -> {}", acts.join(" "), cur.alphabet(i)[target]);
        }
        cur = crate::refinement::apply_hom(&cur, h)?.derived;
    }
    out.push_str(&model_to_string(&cur));
    out.push_str(&blocks);
    Ok(out)
}

/// Resolves every hom block of a witness against the base model in chain
/// order, applying each stage, and checks the final derived model equals the
/// one stored in the file. Returns the resolved chain and the final model.
pub fn resolve_witness(base: &Cgm, wf: &WitnessFile) -> Result<(Vec<Homomorphism>, Cgm), FormatError> {
    let mut cur = base.clone();
    let mut homs = Vec::new();
    for (k, block) in wf.homs.iter().enumerate() {
        let h = resolve_hom(&cur, block, k)?;
        cur = crate::refinement::apply_hom(&cur, &h)
            .map_err(|e| FormatError::BadHom { index: k, message: e.to_string() })?
            .derived;
        homs.push(h);
    }
    let stored = Cgm::from_desc(&wf.model).map_err(FormatError::Invalid)?;
    if !stored.equivalent(&cur) {
        return Err(FormatError::BadHom {
            index: wf.homs.len(),
            message: "stored model does not match the chain of homomorphisms".into(),
        });
    }
    Ok((homs, cur))
}

/// Parses a witness file into the refined model description and hom blocks.
pub fn parse_witness(text: &str) -> Result<WitnessFile, FormatError> {
    let (model, rest) = parse_model_lines(text, true)?;
    let mut homs: Vec<HomBlock> = Vec::new();
    let Some(start) = rest else {
        return Ok(WitnessFile { model, homs });
    };
    for (off, raw) in text.lines().skip(start).enumerate() {
        let line_no = start + off + 1;
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["hom", agent, "->", braces] => {
                let braces = braces.strip_suffix(':').ok_or_else(|| {
                    syntax("expected `:` after hom header", line_no, line.len() + 1)
                })?;
                let inner = braces
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| syntax("expected `{subs}` in hom header", line_no, 1))?;
                homs.push(HomBlock {
                    refined_agent: agent.to_string(),
                    subagents: inner.split(',').map(|s| s.trim().to_string()).collect(),
                    rows: Vec::new(),
                });
            }
            ["map", rest @ ..] => {
                let block = homs.last_mut().ok_or_else(|| {
                    syntax("`map` before any `hom` header", line_no, 1)
                })?;
                let Some(arrow) = rest.iter().position(|&t| t == "->") else {
                    return Err(syntax("expected `->` in map row", line_no, 1));
                };
                if arrow + 2 != rest.len() {
                    return Err(syntax("expected one refined action after `->`", line_no, 1));
                }
                block.rows.push((
                    rest[..arrow].iter().map(|s| s.to_string()).collect(),
                    rest[arrow + 1].to_string(),
                ));
            }
            other => {
                return Err(syntax(
                    format!("unknown directive `{}` in witness", other.join(" ")),
                    line_no,
                    1,
                ))
            }
        }
    }
    Ok(WitnessFile { model, homs })
}

/// Resolves a parsed hom block into a [`Homomorphism`] against the model it
/// refines (the base model for the first block, the previous block's
/// derived model after that).
pub fn resolve_hom(base: &Cgm, block: &HomBlock, index: usize) -> Result<Homomorphism, FormatError> {
    let bad = |message: String| FormatError::BadHom { index, message };
    let i = base
        .agent_index(&block.refined_agent)
        .map_err(|_| bad(format!("unknown refined agent `{}`", block.refined_agent)))?;
    let n_subs = block.subagents.len();
    if n_subs == 0 {
        return Err(bad("no sub-agents".into()));
    }
    // reconstruct the per-sub-agent alphabets from the rows, first-seen order
    let mut sub_alphabets: Vec<Vec<String>> = vec![Vec::new(); n_subs];
    for (acts, _) in &block.rows {
        if acts.len() != n_subs {
            return Err(bad(format!(
                "map row has {} sub-actions, expected {n_subs}",
                acts.len()
            )));
        }
        for (k, a) in acts.iter().enumerate() {
            if !sub_alphabets[k].contains(a) {
                sub_alphabets[k].push(a.clone());
            }
        }
    }
    let sizes: Vec<usize> = sub_alphabets.iter().map(|a| a.len()).collect();
    let total: usize = sizes.iter().product();
    if block.rows.len() != total {
        return Err(bad(format!(
            "expected {total} map rows for the sub-alphabet sizes {sizes:?}, found {}",
            block.rows.len()
        )));
    }
    let mut map = vec![usize::MAX; total];
    for (acts, target) in &block.rows {
        let mut code = 0usize;
        for (k, a) in acts.iter().enumerate() {
            let pos = sub_alphabets[k].iter().position(|x| x == a).unwrap();
            code = code * sizes[k] + pos;
        }
        if map[code] != usize::MAX {
            return Err(bad(format!("duplicate map row `{}`", acts.join(" "))));
        }
        let t = base
            .alphabet(i)
            .iter()
            .position(|x| x == target)
            .ok_or_else(|| bad(format!("unknown refined action `{target}`")))?;
        map[code] = t;
    }
    Ok(Homomorphism {
        refined_agent: block.refined_agent.clone(),
        subagents: block.subagents.clone(),
        sub_alphabets,
        map,
    })
}
