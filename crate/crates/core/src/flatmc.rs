//! The flat-fragment model-checking reduction.
//!
//! A flat formula is a split-free skeleton over maximal refinement chains.
//! Each positive chain `<i1->Γ1>...<im->Γm> body` is decided by reduction to
//! one-step satisfiability:
//!
//! 1. untils in the body are unfolded `|W|` times into pure `X`-form;
//! 2. candidate assignments map every subformula to a state set — boolean,
//!    unsplit and fully-split entries are forced, while each partially-split
//!    modality ranges between `pre` under its unsplit coalition and `pre`
//!    with the refined agents added;
//! 3. an assignment is realizable iff a conjunction of one-step constraints
//!    over `Can(C, α)` atoms is satisfiable: for every state inside the
//!    chosen extension a disjunction over context actions and maximal
//!    rectangles of the forcing set, and for every state outside it the
//!    negated disjunction (this enforces the extension exactly, which nested
//!    subformulas rely on);
//! 4. for one refined agent the constraint goes to the one-step solver
//!    whole; for chains the constraint is put in disjunctive normal form and
//!    each disjunct splits into independent per-agent problems.
//!
//! The chain's extension is the union of the forced body extensions of the
//! realizable assignments; witnesses come from the solver's games.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::atl::{check_atl, eval_interval, CheckError, Interval};
use crate::cgm::{Cgm, Coalition, InputError, StateSet};
use crate::exec;
use crate::formula::{flat_decompose, marker_index, FlatChain, Formula};
use crate::onestep::{extract_hom, sat_onestep, SatOutcome, SatRequest};
use crate::refinement::Homomorphism;

// ---------------------------------------------------------------------------
// Constraint language
// ---------------------------------------------------------------------------

/// A boolean combination over one-step ability atoms. `Can { elem, C, α }`
/// reads: in chain element `elem`'s one-step game, coalition `C` (a mask
/// over that element's sub-agents) can force the label into `α` (a mask
/// over the refined agent's alphabet).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OneStepConstraint {
    Const(bool),
    Can { elem: usize, coalition: u32, actions: u32 },
    Not(Box<OneStepConstraint>),
    And(Vec<OneStepConstraint>),
    Or(Vec<OneStepConstraint>),
}

impl OneStepConstraint {
    /// Conjunction with constant folding.
    pub fn and(parts: Vec<OneStepConstraint>) -> OneStepConstraint {
        let mut out = Vec::new();
        for p in parts {
            match p {
                OneStepConstraint::Const(true) => {}
                OneStepConstraint::Const(false) => return OneStepConstraint::Const(false),
                OneStepConstraint::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => OneStepConstraint::Const(true),
            1 => out.pop().unwrap(),
            _ => OneStepConstraint::And(out),
        }
    }

    /// Disjunction with constant folding.
    pub fn or(parts: Vec<OneStepConstraint>) -> OneStepConstraint {
        let mut out = Vec::new();
        for p in parts {
            match p {
                OneStepConstraint::Const(false) => {}
                OneStepConstraint::Const(true) => return OneStepConstraint::Const(true),
                OneStepConstraint::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => OneStepConstraint::Const(false),
            1 => out.pop().unwrap(),
            _ => OneStepConstraint::Or(out),
        }
    }

    pub fn negated(self) -> OneStepConstraint {
        match self {
            OneStepConstraint::Const(b) => OneStepConstraint::Const(!b),
            OneStepConstraint::Not(inner) => *inner,
            other => OneStepConstraint::Not(Box::new(other)),
        }
    }

    /// Disjunctive normal form as clauses of literals, or `None` when the
    /// clause count would exceed `cap`. `Some(vec![])` is unsatisfiable,
    /// a clause `vec![]` is trivially true.
    pub fn dnf(&self, cap: usize) -> Option<Vec<Vec<ConstraintLiteral>>> {
        fn go(c: &OneStepConstraint, neg: bool, cap: usize) -> Option<Vec<Vec<ConstraintLiteral>>> {
            match c {
                OneStepConstraint::Const(b) => {
                    if *b != neg {
                        Some(vec![vec![]])
                    } else {
                        Some(vec![])
                    }
                }
                OneStepConstraint::Can { elem, coalition, actions } => Some(vec![vec![
                    ConstraintLiteral {
                        positive: !neg,
                        elem: *elem,
                        coalition: *coalition,
                        actions: *actions,
                    },
                ]]),
                OneStepConstraint::Not(inner) => go(inner, !neg, cap),
                OneStepConstraint::And(parts) if !neg => product(parts, false, cap),
                OneStepConstraint::Or(parts) if neg => product(parts, true, cap),
                OneStepConstraint::And(parts) | OneStepConstraint::Or(parts) => {
                    // disjunction after NNF: concatenate
                    let mut out = Vec::new();
                    for p in parts {
                        out.extend(go(p, neg, cap)?);
                        if out.len() > cap {
                            return None;
                        }
                    }
                    Some(out)
                }
            }
        }
        fn product(
            parts: &[OneStepConstraint],
            neg: bool,
            cap: usize,
        ) -> Option<Vec<Vec<ConstraintLiteral>>> {
            let mut acc: Vec<Vec<ConstraintLiteral>> = vec![vec![]];
            for p in parts {
                let clauses = go(p, neg, cap)?;
                let mut next = Vec::new();
                for a in &acc {
                    for c in &clauses {
                        let mut merged = a.clone();
                        merged.extend(c.iter().cloned());
                        next.push(merged);
                        if next.len() > cap {
                            return None;
                        }
                    }
                }
                acc = next;
            }
            Some(acc)
        }
        go(self, false, cap)
    }
}

/// One literal of a DNF clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintLiteral {
    pub positive: bool,
    pub elem: usize,
    pub coalition: u32,
    pub actions: u32,
}

impl ConstraintLiteral {
    fn to_constraint(&self) -> OneStepConstraint {
        let atom = OneStepConstraint::Can {
            elem: self.elem,
            coalition: self.coalition,
            actions: self.actions,
        };
        if self.positive {
            atom
        } else {
            atom.negated()
        }
    }
}

/// The grand-coalition obligation for one chain element: each of the
/// refined agent's actions can be enforced by the full sub-agent coalition.
/// Exact-one labelling of successors is structural in [`crate::onestep::OneStepGame`],
/// so only the surjectivity atoms appear here.
pub fn grand_constraint(elem: usize, n_actions: usize, n_subagents: usize) -> OneStepConstraint {
    let full = (1u32 << n_subagents) - 1;
    OneStepConstraint::and(
        (0..n_actions)
            .map(|a| OneStepConstraint::Can { elem, coalition: full, actions: 1 << a })
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Errors and caps
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlatError {
    #[error("formula is not flat at subformula `{0}`")]
    NotFlat(String),
    #[error("chain not supported by the reduction: {0}")]
    UnsupportedChain(String),
    #[error("body still contains an until after elimination")]
    UntilInBody,
    #[error("body is not a boolean combination of one-step modalities: `{0}`")]
    NotOneStepBody(String),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Hom(#[from] crate::refinement::HomError),
}

/// Resource caps for the reduction. `bound` overrides the per-element
/// default of `max(2, |Act_i|)` actions per sub-agent.
#[derive(Clone, Debug)]
pub struct Caps {
    pub bound: Option<usize>,
    pub max_assignments: usize,
    pub max_dnf: usize,
    pub max_nodes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            bound: None,
            max_assignments: 50_000,
            max_dnf: 20_000,
            max_nodes: 2_000_000,
        }
    }
}

// ---------------------------------------------------------------------------
// Forcing sets
// ---------------------------------------------------------------------------

/// The set of refined-agent actions that, played alongside a fixed context
/// vector, land in `target` regardless of the remaining agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcingSet {
    pub refined_agent: String,
    pub context: Vec<(String, String)>,
    pub state: String,
    pub target: StateSet,
    pub actions: BTreeSet<String>,
}

/// Computes `A_{i, context, w, target}` by exhaustive completion over the
/// agents outside `context ∪ {i}`.
pub fn forcing_set(
    m: &Cgm,
    agent: &str,
    context: &[(&str, &str)],
    state: &str,
    target: &StateSet,
) -> Result<ForcingSet, InputError> {
    let i = m.agent_index(agent)?;
    let w = m.state_index(state)?;
    let mut ctx_pairs = Vec::with_capacity(context.len());
    for &(a, act) in context {
        let ai = m.agent_index(a)?;
        ctx_pairs.push((ai, m.action_index(ai, act)?));
    }
    let mask = forcing_mask(m, i, &ctx_pairs, w, target);
    Ok(ForcingSet {
        refined_agent: agent.to_string(),
        context: context
            .iter()
            .map(|&(a, act)| (a.to_string(), act.to_string()))
            .collect(),
        state: state.to_string(),
        target: target.clone(),
        actions: m
            .alphabet(i)
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, name)| name.clone())
            .collect(),
    })
}

/// Index-level forcing set as an action mask over agent `i`'s alphabet.
fn forcing_mask(m: &Cgm, i: usize, context: &[(usize, usize)], w: usize, target: &StateSet) -> u32 {
    let mut mask = 0u32;
    let mut fixed = context.to_vec();
    for a in 0..m.alphabet(i).len() {
        fixed.push((i, a));
        let mut all_in = true;
        m.for_each_completion(&fixed, |code| {
            if all_in && !target.contains(m.successor(w, code)) {
                all_in = false;
            }
        });
        if all_in {
            mask |= 1 << a;
        }
        fixed.pop();
    }
    mask
}

/// The product forcing set over several refined agents at once: the set of
/// tuples `(a_{i_k})_{k∈dims}` that land in `target` under the context no
/// matter how everyone else completes. Returned as a boolean table over the
/// mixed-radix product of the dims' alphabets.
fn product_forcing(
    m: &Cgm,
    dims: &[usize],
    context: &[(usize, usize)],
    w: usize,
    target: &StateSet,
) -> Vec<bool> {
    let sizes: Vec<usize> = dims.iter().map(|&a| m.alphabet(a).len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = vec![false; total];
    let mut digits = vec![0usize; dims.len()];
    for (code, entry) in out.iter_mut().enumerate() {
        crate::cgm::decode_into(code, &sizes, &mut digits);
        let mut fixed = context.to_vec();
        for (k, &a) in dims.iter().enumerate() {
            fixed.push((a, digits[k]));
        }
        let mut all_in = true;
        m.for_each_completion(&fixed, |c| {
            if all_in && !target.contains(m.successor(w, c)) {
                all_in = false;
            }
        });
        *entry = all_in;
    }
    out
}

/// All maximal rectangles `A_1 × ... × A_d ⊆ A`, as per-dim action masks.
/// A rectangle contained in another can never help since `Can` is monotone
/// in its action set, so only closed ones are produced.
fn maximal_rectangles(a: &[bool], sizes: &[usize]) -> Vec<Vec<u32>> {
    let d = sizes.len();
    debug_assert!(d >= 1);
    let index = |digits: &[usize]| -> usize {
        let mut code = 0usize;
        for (k, &x) in digits.iter().enumerate() {
            code = code * sizes[k] + x;
        }
        code
    };
    if d == 1 {
        let mask: u32 = (0..sizes[0]).filter(|&x| a[x]).map(|x| 1u32 << x).sum();
        return if mask == 0 { Vec::new() } else { vec![vec![mask]] };
    }
    // enumerate candidate masks for dims 0..d-1, close over the last dim,
    // then keep only fully closed combinations
    let mut out = Vec::new();
    let mut masks: Vec<u32> = vec![0; d];
    let limits: Vec<u32> = sizes.iter().map(|&n| 1u32 << n).collect();
    // odometer over nonempty masks of the first d-1 dims
    let mut cur: Vec<u32> = vec![1; d - 1];
    'outer: loop {
        masks[..d - 1].copy_from_slice(&cur);
        // last dim: maximal compatible set
        let mut last = 0u32;
        'last: for x in 0..sizes[d - 1] {
            // every tuple of the chosen masks extended by x must be in A
            let mut digits = vec![0usize; d];
            digits[d - 1] = x;
            if !for_all_in_masks(&masks[..d - 1], sizes, &mut digits, 0, &mut |dg| a[index(dg)]) {
                continue 'last;
            }
            last |= 1 << x;
        }
        if last != 0 {
            masks[d - 1] = last;
            // closure check on every earlier dim
            let mut closed = true;
            for j in 0..d - 1 {
                let mut grown = 0u32;
                for x in 0..sizes[j] {
                    let mut digits = vec![0usize; d];
                    digits[j] = x;
                    let others: Vec<usize> = (0..d).filter(|&t| t != j).collect();
                    let other_masks: Vec<u32> = others.iter().map(|&t| masks[t]).collect();
                    let ok = for_all_in_masks_at(&other_masks, &others, sizes, &mut digits, 0, &mut |dg| {
                        a[index(dg)]
                    });
                    if ok {
                        grown |= 1 << x;
                    }
                }
                if grown != masks[j] {
                    closed = false;
                    break;
                }
            }
            if closed {
                out.push(masks.clone());
            }
        }
        // advance odometer (skip empty masks)
        let mut k = d - 1;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < limits[k] {
                break;
            }
            cur[k] = 1;
        }
    }
    out
}

/// All tuples drawn from the masks of dims `0..masks.len()` satisfy `f`.
fn for_all_in_masks(
    masks: &[u32],
    sizes: &[usize],
    digits: &mut Vec<usize>,
    dim: usize,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if dim == masks.len() {
        return f(digits);
    }
    for x in 0..sizes[dim] {
        if masks[dim] & (1 << x) != 0 {
            digits[dim] = x;
            if !for_all_in_masks(masks, sizes, digits, dim + 1, f) {
                return false;
            }
        }
    }
    true
}

fn for_all_in_masks_at(
    masks: &[u32],
    dims: &[usize],
    sizes: &[usize],
    digits: &mut Vec<usize>,
    at: usize,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if at == dims.len() {
        return f(digits);
    }
    let dim = dims[at];
    for x in 0..sizes[dim] {
        if masks[at] & (1 << x) != 0 {
            digits[dim] = x;
            if !for_all_in_masks_at(masks, dims, sizes, digits, at + 1, f) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Until elimination
// ---------------------------------------------------------------------------

/// Unfolds every until `n` times, leaving only `X`-modalities:
/// `<<Δ>> φ U ψ` becomes `θ_n` with `θ_0 = ψ`,
/// `θ_{k+1} = ψ ∨ (φ ∧ <<Δ>> X θ_k)`, and `[[Δ]] φ U ψ` becomes `τ_n` with
/// `τ_{k+1} = ψ ∨ (φ ∧ ¬<<Δ>> X ¬τ_k)`. Exact when `n = |W|` because the
/// fixed points stabilise within `|W|` iterations.
pub fn eliminate_until(f: &Formula, n: usize) -> Formula {
    match f {
        Formula::False | Formula::Atom(_) => f.clone(),
        Formula::Implies(a, b) => {
            Formula::implies(eliminate_until(a, n), eliminate_until(b, n))
        }
        Formula::Next(c, g) => Formula::Next(c.clone(), Box::new(eliminate_until(g, n))),
        Formula::Until(c, a, b) => {
            let a = eliminate_until(a, n);
            let b = eliminate_until(b, n);
            let mut theta = b.clone();
            let names: Vec<&str> = c.iter().map(|s| s.as_str()).collect();
            for _ in 0..n {
                theta = Formula::or(b.clone(), Formula::and(a.clone(), Formula::next(&names, theta)));
            }
            theta
        }
        Formula::DualUntil(c, a, b) => {
            let a = eliminate_until(a, n);
            let b = eliminate_until(b, n);
            let mut tau = b.clone();
            let names: Vec<&str> = c.iter().map(|s| s.as_str()).collect();
            for _ in 0..n {
                tau = Formula::or(
                    b.clone(),
                    Formula::and(
                        a.clone(),
                        Formula::neg(Formula::next(&names, Formula::neg(tau))),
                    ),
                );
            }
            tau
        }
        Formula::Split { agent, subs, body } => Formula::Split {
            agent: agent.clone(),
            subs: subs.clone(),
            body: Box::new(eliminate_until(body, n)),
        },
        Formula::DualSplit { agent, subs, body } => Formula::DualSplit {
            agent: agent.clone(),
            subs: subs.clone(),
            body: Box::new(eliminate_until(body, n)),
        },
    }
}

// ---------------------------------------------------------------------------
// Chain compilation
// ---------------------------------------------------------------------------

/// How one modality's coalition intersects one chain element's sub-agents.
#[derive(Clone, Debug, PartialEq, Eq)]
enum ElemSplit {
    Empty,
    Full,
    /// proper nonempty sub-coalition, as a mask over the element's sub-agents
    Partial(u32),
}

#[derive(Clone, Debug)]
struct ModalInfo {
    child: usize,
    per_elem: Vec<ElemSplit>,
    /// chain element indices with a proper partial split
    partial_dims: Vec<usize>,
    /// context agents: the unsplit coalition part plus refined agents of
    /// fully split elements
    context_agents: Vec<usize>,
    lower: Coalition,
    upper: Coalition,
}

#[derive(Clone, Debug)]
enum NodeKind {
    False,
    Atom(StateSet),
    Implies(usize, usize),
    Modal(ModalInfo),
}

struct Node {
    kind: NodeKind,
}

struct ElemCtx {
    agent: usize,
    agent_name: String,
    subs: Vec<String>,
}

/// A compiled chain problem: element contexts plus the deduplicated
/// subformula table of the until-free body, children before parents.
pub struct ChainProblem {
    elems: Vec<ElemCtx>,
    nodes: Vec<Node>,
    root: usize,
    partial_nodes: Vec<usize>,
}

impl ChainProblem {
    pub fn new(
        m: &Cgm,
        elements: &[(String, Vec<String>)],
        body: &Formula,
    ) -> Result<ChainProblem, FlatError> {
        if elements.is_empty() {
            return Err(FlatError::UnsupportedChain("empty chain".into()));
        }
        let mut elems = Vec::new();
        let mut sub_lookup: HashMap<&str, (usize, usize)> = HashMap::new();
        for (k, (agent, subs)) in elements.iter().enumerate() {
            let a = match m.agent_index(agent) {
                Ok(a) => a,
                Err(_) => {
                    if sub_lookup.contains_key(agent.as_str()) {
                        return Err(FlatError::UnsupportedChain(format!(
                            "element {} re-splits sub-agent `{agent}` introduced earlier in the chain",
                            k + 1
                        )));
                    }
                    return Err(InputError::UnknownAgent(agent.clone()).into());
                }
            };
            if elems.iter().any(|e: &ElemCtx| e.agent == a) {
                return Err(FlatError::UnsupportedChain(format!(
                    "agent `{agent}` refined twice in one chain"
                )));
            }
            for (pos, s) in subs.iter().enumerate() {
                if m.agent_index(s).is_ok() || sub_lookup.insert(s, (k, pos)).is_some() {
                    return Err(FlatError::UnsupportedChain(format!(
                        "sub-agent `{s}` clashes with an agent already in use"
                    )));
                }
            }
            if subs.is_empty() {
                return Err(FlatError::UnsupportedChain(format!(
                    "element refining `{agent}` has no sub-agents"
                )));
            }
            elems.push(ElemCtx { agent: a, agent_name: agent.clone(), subs: subs.clone() });
        }
        let refined: Vec<usize> = elems.iter().map(|e| e.agent).collect();
        let mut nodes: Vec<Node> = Vec::new();
        let mut memo: HashMap<Formula, usize> = HashMap::new();
        let root = add_node(m, body, &elems, &refined, &sub_lookup, &mut nodes, &mut memo)?;
        let partial_nodes = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                matches!(&n.kind, NodeKind::Modal(mi) if !mi.partial_dims.is_empty())
            })
            .map(|(i, _)| i)
            .collect();
        Ok(ChainProblem { elems, nodes, root, partial_nodes })
    }

    pub fn n_elements(&self) -> usize {
        self.elems.len()
    }

    /// Streams candidate assignments in a fixed order.
    pub fn assignments<'a>(&'a self, m: &'a Cgm) -> AssignmentIter<'a> {
        AssignmentIter {
            problem: self,
            m,
            idx: vec![0; self.partial_nodes.len()],
            values: vec![None; self.nodes.len()],
            bounds: vec![None; self.partial_nodes.len()],
            started: false,
            done: false,
            overflow: false,
        }
    }

    /// The realizability constraint of one assignment: positive tr-disjuncts
    /// for states inside each partially-split extension, negated disjuncts
    /// for states outside it.
    pub fn constraints(&self, m: &Cgm, asg: &Assignment) -> OneStepConstraint {
        let mut parts = Vec::new();
        for (node_id, node) in self.nodes.iter().enumerate() {
            let NodeKind::Modal(mi) = &node.kind else { continue };
            if mi.partial_dims.is_empty() {
                continue;
            }
            let x = &asg.values[node_id];
            let y = &asg.values[mi.child];
            for w in 0..m.n_states() {
                let disj = self.state_disjunction(m, mi, w, y);
                if x.contains(w) {
                    parts.push(disj);
                } else {
                    parts.push(disj.negated());
                }
            }
        }
        OneStepConstraint::and(parts)
    }

    /// `⋁_context ⋁_rect ⋀_k Can(elem_k, Δ_k, A_k)` at one state.
    fn state_disjunction(&self, m: &Cgm, mi: &ModalInfo, w: usize, target: &StateSet) -> OneStepConstraint {
        let dims: Vec<usize> = mi.partial_dims.iter().map(|&k| self.elems[k].agent).collect();
        let sizes: Vec<usize> = dims.iter().map(|&a| m.alphabet(a).len()).collect();
        let mut disjuncts = Vec::new();
        m.for_each_vector(&mi.context_agents, |ctx| {
            let a = product_forcing(m, &dims, ctx, w, target);
            for rect in maximal_rectangles(&a, &sizes) {
                let mut conj = Vec::new();
                for (pos, &k) in mi.partial_dims.iter().enumerate() {
                    let ElemSplit::Partial(cmask) = mi.per_elem[k] else { unreachable!() };
                    conj.push(OneStepConstraint::Can {
                        elem: k,
                        coalition: cmask,
                        actions: rect[pos],
                    });
                }
                disjuncts.push(OneStepConstraint::and(conj));
            }
        });
        OneStepConstraint::or(disjuncts)
    }
}

fn add_node(
    m: &Cgm,
    f: &Formula,
    elems: &[ElemCtx],
    refined: &[usize],
    sub_lookup: &HashMap<&str, (usize, usize)>,
    nodes: &mut Vec<Node>,
    memo: &mut HashMap<Formula, usize>,
) -> Result<usize, FlatError> {
    if let Some(&i) = memo.get(f) {
        return Ok(i);
    }
    let kind = match f {
        Formula::False => NodeKind::False,
        Formula::Atom(p) => NodeKind::Atom(m.prop_states(p).map_err(CheckError::Input)?.clone()),
        Formula::Implies(a, b) => {
            let l = add_node(m, a, elems, refined, sub_lookup, nodes, memo)?;
            let r = add_node(m, b, elems, refined, sub_lookup, nodes, memo)?;
            NodeKind::Implies(l, r)
        }
        Formula::Next(coalition, child) => {
            let c = add_node(m, child, elems, refined, sub_lookup, nodes, memo)?;
            let mut delta0: Vec<usize> = Vec::new();
            let mut masks = vec![0u32; elems.len()];
            for name in coalition {
                if let Some(&(k, pos)) = sub_lookup.get(name.as_str()) {
                    masks[k] |= 1 << pos;
                } else {
                    let a = m.agent_index(name).map_err(CheckError::Input)?;
                    if refined.contains(&a) {
                        return Err(FlatError::UnsupportedChain(format!(
                            "refined agent `{name}` used inside the chain body"
                        )));
                    }
                    delta0.push(a);
                }
            }
            let per_elem: Vec<ElemSplit> = elems
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let full = (1u32 << e.subs.len()) - 1;
                    match masks[k] {
                        0 => ElemSplit::Empty,
                        mk if mk == full => ElemSplit::Full,
                        mk => ElemSplit::Partial(mk),
                    }
                })
                .collect();
            let partial_dims: Vec<usize> = per_elem
                .iter()
                .enumerate()
                .filter(|(_, s)| matches!(s, ElemSplit::Partial(_)))
                .map(|(k, _)| k)
                .collect();
            let mut context_agents = delta0.clone();
            let mut lower = Coalition::empty();
            for &a in &delta0 {
                lower.insert(a);
            }
            for (k, s) in per_elem.iter().enumerate() {
                if matches!(s, ElemSplit::Full) {
                    context_agents.push(elems[k].agent);
                    lower.insert(elems[k].agent);
                }
            }
            context_agents.sort_unstable();
            let mut upper = lower;
            for &k in &partial_dims {
                upper.insert(elems[k].agent);
            }
            NodeKind::Modal(ModalInfo { child: c, per_elem, partial_dims, context_agents, lower, upper })
        }
        Formula::Until(..) | Formula::DualUntil(..) => return Err(FlatError::UntilInBody),
        Formula::Split { .. } | Formula::DualSplit { .. } => {
            return Err(FlatError::NotFlat(f.to_string()))
        }
    };
    nodes.push(Node { kind });
    let id = nodes.len() - 1;
    memo.insert(f.clone(), id);
    Ok(id)
}

// ---------------------------------------------------------------------------
// Assignments
// ---------------------------------------------------------------------------

/// One candidate assignment: a state set per subformula node, with the
/// bounds of each partially-split modality recorded for inspection.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub values: Vec<StateSet>,
    /// node ids of the partially-split modalities, in node order
    pub partial_nodes: Vec<usize>,
    /// `(lower, upper)` per entry of `partial_nodes`
    pub bounds: Vec<(StateSet, StateSet)>,
}

impl Assignment {
    /// The body's extension under this assignment.
    pub fn root_value<'a>(&'a self, problem: &ChainProblem) -> &'a StateSet {
        &self.values[problem.root]
    }
}

/// Odometer over the free choices of partially-split modalities. Bounds of
/// later choice points are recomputed whenever an earlier choice moves, so
/// nested partial modalities enumerate exactly the sets between their
/// current bounds.
pub struct AssignmentIter<'a> {
    problem: &'a ChainProblem,
    m: &'a Cgm,
    idx: Vec<usize>,
    values: Vec<Option<StateSet>>,
    bounds: Vec<Option<(StateSet, StateSet)>>,
    started: bool,
    done: bool,
    overflow: bool,
}

const MAX_DIFF_BITS: usize = 20;

impl AssignmentIter<'_> {
    /// True if some candidate list was too large to enumerate; the stream
    /// then under-approximates and callers must treat results as capped.
    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    /// Recomputes node values from scratch given the current choice vector.
    /// Returns the count vector actually in force (for carry logic).
    fn pass(&mut self) -> Vec<usize> {
        let n = self.problem.nodes.len();
        let mut counts = vec![1usize; self.problem.partial_nodes.len()];
        for v in self.values.iter_mut() {
            *v = None;
        }
        for id in 0..n {
            let value = match &self.problem.nodes[id].kind {
                NodeKind::False => StateSet::empty(self.m.n_states()),
                NodeKind::Atom(s) => s.clone(),
                NodeKind::Implies(l, r) => {
                    let lv = self.values[*l].as_ref().unwrap();
                    let rv = self.values[*r].as_ref().unwrap();
                    lv.complement().union(rv)
                }
                NodeKind::Modal(mi) => {
                    let child = self.values[mi.child].as_ref().unwrap();
                    if mi.partial_dims.is_empty() {
                        self.m.pre(mi.lower, child)
                    } else {
                        let t = self.problem.partial_nodes.iter().position(|&p| p == id).unwrap();
                        let lo = self.m.pre(mi.lower, child);
                        let hi = self.m.pre(mi.upper, child);
                        debug_assert!(lo.is_subset(&hi));
                        let diff: Vec<usize> = hi.minus(&lo).iter().collect();
                        if diff.len() > MAX_DIFF_BITS {
                            self.overflow = true;
                            counts[t] = 1;
                            self.bounds[t] = Some((lo.clone(), hi));
                            lo
                        } else {
                            counts[t] = 1usize << diff.len();
                            let mut v = lo.clone();
                            for (bit, &state) in diff.iter().enumerate() {
                                if self.idx[t] & (1 << bit) != 0 {
                                    v.insert(state);
                                }
                            }
                            self.bounds[t] = Some((lo, hi));
                            v
                        }
                    }
                }
            };
            self.values[id] = Some(value);
        }
        counts
    }

    fn snapshot(&self) -> Assignment {
        Assignment {
            values: self.values.iter().map(|v| v.clone().unwrap()).collect(),
            partial_nodes: self.problem.partial_nodes.clone(),
            bounds: self.bounds.iter().map(|b| b.clone().unwrap()).collect(),
        }
    }
}

impl Iterator for AssignmentIter<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.pass();
            return Some(self.snapshot());
        }
        // advance the odometer; the radix of a position depends only on
        // choices at earlier positions, so recompute counts per attempt
        let t_len = self.idx.len();
        if t_len == 0 {
            self.done = true;
            return None;
        }
        let mut t = t_len;
        loop {
            if t == 0 {
                self.done = true;
                return None;
            }
            t -= 1;
            self.idx[t] += 1;
            for later in self.idx.iter_mut().skip(t + 1) {
                *later = 0;
            }
            let counts = self.pass();
            if self.idx[t] < counts[t] {
                return Some(self.snapshot());
            }
            self.idx[t] = 0;
        }
    }
}

/// Materialises up to `max` assignments of a single-element chain problem,
/// in enumeration order.
pub fn enumerate_assignments(
    m: &Cgm,
    body: &Formula,
    agent: &str,
    subs: &[String],
    max: usize,
) -> Result<Vec<Assignment>, FlatError> {
    let problem = ChainProblem::new(m, &[(agent.to_string(), subs.to_vec())], body)?;
    Ok(problem.assignments(m).take(max).collect())
}

/// The realizability constraint of one assignment of a single-element
/// chain, compiled standalone.
pub fn assignment_constraints(
    m: &Cgm,
    body: &Formula,
    agent: &str,
    subs: &[String],
    asg: &Assignment,
) -> Result<OneStepConstraint, FlatError> {
    let problem = ChainProblem::new(m, &[(agent.to_string(), subs.to_vec())], body)?;
    Ok(problem.constraints(m, asg))
}

// ---------------------------------------------------------------------------
// The single-shot translation for boolean one-step bodies (m = 1)
// ---------------------------------------------------------------------------

/// The direct translation of a boolean combination of one-step modalities
/// (propositional arguments only) at a single state: modalities that never
/// or fully mention the sub-agents fold to constants against the base
/// model, partially-split ones become `⋁_context Can(Δ∩Γ, A_{i,context,w,⟦χ⟧})`.
pub fn translate_tr_single(
    body: &Formula,
    m: &Cgm,
    state: &str,
    agent: &str,
    subs: &[String],
) -> Result<OneStepConstraint, FlatError> {
    let i = m.agent_index(agent).map_err(CheckError::Input)?;
    let w = m.state_index(state).map_err(CheckError::Input)?;
    let sub_pos: HashMap<&str, usize> =
        subs.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    translate_at(body, m, w, i, subs, &sub_pos)
}

fn translate_at(
    f: &Formula,
    m: &Cgm,
    w: usize,
    i: usize,
    subs: &[String],
    sub_pos: &HashMap<&str, usize>,
) -> Result<OneStepConstraint, FlatError> {
    match f {
        Formula::False => Ok(OneStepConstraint::Const(false)),
        Formula::Atom(p) => {
            let s = m.prop_states(p).map_err(CheckError::Input)?;
            Ok(OneStepConstraint::Const(s.contains(w)))
        }
        Formula::Implies(a, b) => {
            let a = translate_at(a, m, w, i, subs, sub_pos)?;
            let b = translate_at(b, m, w, i, subs, sub_pos)?;
            Ok(OneStepConstraint::or(vec![a.negated(), b]))
        }
        Formula::Next(coalition, chi) => {
            if !is_prop_only(chi) {
                return Err(FlatError::NotOneStepBody(chi.to_string()));
            }
            let target = check_atl(m, chi)?;
            let mut delta0: Vec<usize> = Vec::new();
            let mut cmask = 0u32;
            for name in coalition {
                if let Some(&pos) = sub_pos.get(name.as_str()) {
                    cmask |= 1 << pos;
                } else {
                    let a = m.agent_index(name).map_err(CheckError::Input)?;
                    if a == i {
                        return Err(FlatError::UnsupportedChain(format!(
                            "refined agent `{name}` used inside the chain body"
                        )));
                    }
                    delta0.push(a);
                }
            }
            delta0.sort_unstable();
            let full = (1u32 << subs.len()) - 1;
            if cmask == 0 {
                let mut c = Coalition::empty();
                for &a in &delta0 {
                    c.insert(a);
                }
                return Ok(OneStepConstraint::Const(m.pre(c, &target).contains(w)));
            }
            if cmask == full {
                let mut c = Coalition::empty();
                for &a in &delta0 {
                    c.insert(a);
                }
                c.insert(i);
                return Ok(OneStepConstraint::Const(m.pre(c, &target).contains(w)));
            }
            let mut disjuncts = Vec::new();
            m.for_each_vector(&delta0, |ctx| {
                let mask = forcing_mask(m, i, ctx, w, &target);
                disjuncts.push(if mask == 0 {
                    OneStepConstraint::Const(false)
                } else {
                    OneStepConstraint::Can { elem: 0, coalition: cmask, actions: mask }
                });
            });
            Ok(OneStepConstraint::or(disjuncts))
        }
        other => Err(FlatError::NotOneStepBody(other.to_string())),
    }
}

fn is_prop_only(f: &Formula) -> bool {
    match f {
        Formula::False | Formula::Atom(_) => true,
        Formula::Implies(a, b) => is_prop_only(a) && is_prop_only(b),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// The checker
// ---------------------------------------------------------------------------

/// Per-state verdict of a flat check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    True,
    False,
    /// not provable within the per-sub-agent alphabet bound
    FalseUpToBound,
    /// a resource cap cut the search; no claim either way
    ResourceExceeded,
}

/// Everything the reduction established about one chain.
#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub chain: FlatChain,
    /// states where the chain formula definitely holds
    pub proven: StateSet,
    /// states where it may hold (complement is definitely false)
    pub possible: StateSet,
    /// per state, the witness homomorphisms of a positive chain
    pub witnesses: Vec<Option<Vec<Homomorphism>>>,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct FlatResult {
    /// states where the whole formula definitely holds
    pub lo: StateSet,
    /// states where it may hold
    pub hi: StateSet,
    pub chains: Vec<ChainOutcome>,
}

impl FlatResult {
    pub fn verdict(&self, w: usize) -> Verdict {
        if self.lo.contains(w) {
            Verdict::True
        } else if !self.hi.contains(w) {
            Verdict::False
        } else if self.chains.iter().any(|c| c.capped) {
            Verdict::ResourceExceeded
        } else {
            Verdict::FalseUpToBound
        }
    }

    /// Witness of the first positive chain proven at `w`, if any.
    pub fn witness_at(&self, w: usize) -> Option<(usize, &[Homomorphism])> {
        self.chains.iter().enumerate().find_map(|(k, c)| {
            if c.chain.negative {
                return None;
            }
            c.witnesses[w].as_deref().map(|h| (k, h))
        })
    }
}

/// Checks a flat formula at every state: chains by the reduction, the
/// split-free skeleton by interval-valued fixed-point evaluation.
pub fn check_flat_all(m: &Cgm, f: &Formula, caps: &Caps) -> Result<FlatResult, FlatError> {
    let decomposition = flat_decompose(f).map_err(|off| FlatError::NotFlat(off.to_string()))?;
    let mut chains = Vec::new();
    for chain in &decomposition.chains {
        chains.push(eval_chain(m, chain, caps)?);
    }
    let resolver = |name: &str| -> Option<Interval> {
        marker_index(name).map(|k| Interval {
            lo: chains[k].proven.clone(),
            hi: chains[k].possible.clone(),
        })
    };
    let iv = eval_interval(m, &decomposition.skeleton, &resolver)?;
    Ok(FlatResult { lo: iv.lo, hi: iv.hi, chains })
}

/// Checks a flat formula at one state; the witness belongs to the first
/// positive chain proven there.
pub fn check_flat(
    m: &Cgm,
    state: &str,
    f: &Formula,
    caps: &Caps,
) -> Result<(Verdict, Option<Vec<Homomorphism>>), FlatError> {
    let w = m.state_index(state).map_err(CheckError::Input)?;
    let result = check_flat_all(m, f, caps)?;
    let witness = result.witness_at(w).map(|(_, h)| h.to_vec());
    Ok((result.verdict(w), witness))
}

/// Evaluates a flat formula with the direct bounded-search semantics in
/// place of the reduction: chain extensions come from
/// [`crate::refinement::brute_force_refine`]'s sweep, so a positive chain is
/// only ever proven (its complement stays open) and dually for negative
/// chains. The split-free skeleton is evaluated on the resulting intervals.
pub fn oracle_check_flat_all(
    m: &Cgm,
    f: &Formula,
    bound: usize,
    candidate_cap: usize,
) -> Result<FlatResult, FlatError> {
    use crate::refinement::{brute_force_refine_states, RefineStates};
    let decomposition = flat_decompose(f).map_err(|off| FlatError::NotFlat(off.to_string()))?;
    let n = m.n_states();
    let mut chains = Vec::new();
    for chain in &decomposition.chains {
        let inner = FlatChain {
            elements: chain.elements.clone(),
            body: chain.body.clone(),
            negative: false,
        };
        let outcome = match brute_force_refine_states(m, &inner, bound, candidate_cap)? {
            RefineStates::Capped => ChainOutcome {
                chain: chain.clone(),
                proven: StateSet::empty(n),
                possible: StateSet::full(n),
                witnesses: vec![None; n],
                capped: true,
            },
            RefineStates::Done { proven, witnesses } => {
                if chain.negative {
                    ChainOutcome {
                        chain: chain.clone(),
                        proven: StateSet::empty(n),
                        possible: proven.complement(),
                        witnesses,
                        capped: false,
                    }
                } else {
                    ChainOutcome {
                        chain: chain.clone(),
                        proven,
                        possible: StateSet::full(n),
                        witnesses,
                        capped: false,
                    }
                }
            }
        };
        chains.push(outcome);
    }
    let resolver = |name: &str| -> Option<Interval> {
        marker_index(name).map(|k| Interval {
            lo: chains[k].proven.clone(),
            hi: chains[k].possible.clone(),
        })
    };
    let iv = eval_interval(m, &decomposition.skeleton, &resolver)?;
    Ok(FlatResult { lo: iv.lo, hi: iv.hi, chains })
}

fn eval_chain(m: &Cgm, chain: &FlatChain, caps: &Caps) -> Result<ChainOutcome, FlatError> {
    if chain.negative {
        // a negative chain is the negation of the positive chain over the
        // same body (the extraction already folded the inner negation in)
        let inner = FlatChain {
            elements: chain.elements.clone(),
            body: chain.body.clone(),
            negative: false,
        };
        let pos = eval_positive_chain(m, &inner, caps)?;
        let n = m.n_states();
        return Ok(ChainOutcome {
            chain: chain.clone(),
            proven: pos.possible.complement(),
            possible: pos.proven.complement(),
            // counterexample homomorphisms of the dual, per refuted state
            witnesses: (0..n).map(|w| pos.witnesses[w].clone()).collect(),
            capped: pos.capped,
        });
    }
    let mut out = eval_positive_chain(m, chain, caps)?;
    out.chain = chain.clone();
    Ok(out)
}

enum SolveRes {
    Sat(Vec<Homomorphism>),
    Unsat,
    Capped,
}

fn eval_positive_chain(m: &Cgm, chain: &FlatChain, caps: &Caps) -> Result<ChainOutcome, FlatError> {
    let n = m.n_states();
    let body = eliminate_until(&chain.body, n);
    let problem = ChainProblem::new(m, &chain.elements, &body)?;
    let reserved = m.all_action_names();

    let mut proven = StateSet::empty(n);
    let mut possible = StateSet::empty(n);
    let mut witnesses: Vec<Option<Vec<Homomorphism>>> = vec![None; n];
    let mut capped = false;

    let mut iter = problem.assignments(m);
    let mut seen = 0usize;
    const BATCH: usize = 64;
    loop {
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            if seen >= caps.max_assignments {
                capped = true;
                break;
            }
            match iter.next() {
                Some(a) => {
                    seen += 1;
                    batch.push(a);
                }
                None => break,
            }
        }
        if iter.overflowed() {
            capped = true;
        }
        if batch.is_empty() {
            break;
        }
        // solve the batch in parallel; merge in enumeration order so the
        // reported witness per state is scheduling-independent
        let proven_before = proven.clone();
        let results = exec::map_slice(&batch, |asg| {
            let viable = asg.root_value(&problem).clone();
            if viable.is_empty() || viable.is_subset(&proven_before) {
                // nothing new to prove; realizability only matters for states
                // this assignment could newly cover
                return (viable, None);
            }
            let res = solve_assignment(m, &problem, asg, caps, &reserved);
            (viable, Some(res))
        });
        for (viable, res) in results {
            possible.union_with(&viable);
            match res {
                None => {}
                Some(SolveRes::Unsat) => {}
                Some(SolveRes::Capped) => capped = true,
                Some(SolveRes::Sat(homs)) => {
                    for w in viable.iter() {
                        if witnesses[w].is_none() {
                            witnesses[w] = Some(homs.clone());
                        }
                    }
                    proven.union_with(&viable);
                }
            }
        }
        if capped && seen >= caps.max_assignments {
            break;
        }
    }
    if capped {
        // the unexplored remainder could still cover anything
        possible = StateSet::full(n);
        for w in proven.iter() {
            possible.insert(w);
        }
    }
    Ok(ChainOutcome {
        chain: chain.clone(),
        proven,
        possible,
        witnesses,
        capped,
    })
}

fn solve_assignment(
    m: &Cgm,
    problem: &ChainProblem,
    asg: &Assignment,
    caps: &Caps,
    reserved: &BTreeSet<String>,
) -> SolveRes {
    let constraint = problem.constraints(m, asg);
    if let OneStepConstraint::Const(false) = constraint {
        return SolveRes::Unsat;
    }
    if problem.elems.len() == 1 {
        return solve_single(m, problem, 0, &constraint, caps, reserved);
    }
    // chains: DNF, then independent per-element problems per disjunct
    let Some(clauses) = constraint.dnf(caps.max_dnf) else {
        return SolveRes::Capped;
    };
    let mut any_capped = false;
    'clauses: for clause in clauses {
        let mut homs = Vec::with_capacity(problem.elems.len());
        for (k, _) in problem.elems.iter().enumerate() {
            let lits: Vec<OneStepConstraint> = clause
                .iter()
                .filter(|l| l.elem == k)
                .map(|l| l.to_constraint())
                .collect();
            match solve_single(m, problem, k, &OneStepConstraint::and(lits), caps, reserved) {
                SolveRes::Sat(mut h) => homs.append(&mut h),
                SolveRes::Unsat => continue 'clauses,
                SolveRes::Capped => {
                    any_capped = true;
                    continue 'clauses;
                }
            }
        }
        return SolveRes::Sat(homs);
    }
    if any_capped {
        SolveRes::Capped
    } else {
        SolveRes::Unsat
    }
}

fn solve_single(
    m: &Cgm,
    problem: &ChainProblem,
    elem: usize,
    constraint: &OneStepConstraint,
    caps: &Caps,
    reserved: &BTreeSet<String>,
) -> SolveRes {
    let e = &problem.elems[elem];
    let alphabet = m.alphabet(e.agent);
    let bound = caps.bound.unwrap_or_else(|| 2.max(alphabet.len()));
    let req = SatRequest {
        refined_agent: &e.agent_name,
        alphabet,
        subagents: &e.subs,
        elem,
        bound,
        max_nodes: caps.max_nodes,
        reserved,
    };
    match sat_onestep(constraint, &req) {
        SatOutcome::Sat(g) => SolveRes::Sat(vec![extract_hom(&g)]),
        SatOutcome::UnsatUpToBound => SolveRes::Unsat,
        SatOutcome::ResourceExceeded => SolveRes::Capped,
    }
}
