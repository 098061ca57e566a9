//! One-step games and bounded satisfiability of one-step constraints.
//!
//! A [`OneStepGame`] is the auxiliary single-decision game of the reduction:
//! sub-agents pick one action each and the joint choice is labelled by one
//! of the refined agent's actions. The `step` table *is* the candidate
//! homomorphism, so exact-one labelling is structural and surjectivity is an
//! invariant the search enforces — together they discharge the
//! grand-coalition obligation.
//!
//! `sat_onestep` searches canonical games (symmetry-reduced over
//! per-sub-agent action renaming) in increasing size, filling the step
//! table cell by cell and cutting branches whose constraint value is
//! already definite-false under three-valued evaluation. A negative answer
//! is only ever `UnsatUpToBound`.

use std::collections::BTreeSet;

use crate::exec;
use crate::flatmc::OneStepConstraint;
use crate::refinement::{fresh_action_names, Homomorphism};
use crate::symmetry::is_canonical;

/// The one-step game for one refined agent: `step` maps each joint
/// sub-agent action (mixed-radix, most significant digit first) to the
/// label of the successor state, an action of the refined agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneStepGame {
    pub refined_agent: String,
    /// the refined agent's alphabet, i.e. the label vocabulary
    pub alphabet: Vec<String>,
    pub subagents: Vec<String>,
    pub sub_alphabets: Vec<Vec<String>>,
    pub step: Vec<usize>,
}

impl OneStepGame {
    pub fn sub_sizes(&self) -> Vec<usize> {
        self.sub_alphabets.iter().map(|a| a.len()).collect()
    }

    /// Checks the structural invariants: a total, surjective step table.
    pub fn validate(&self) -> Result<(), String> {
        let cells: usize = self.sub_sizes().iter().product();
        if self.step.len() != cells {
            return Err(format!("step table has {} cells, expected {cells}", self.step.len()));
        }
        let mut seen = vec![false; self.alphabet.len()];
        for &v in &self.step {
            if v >= self.alphabet.len() {
                return Err(format!("label index {v} out of range"));
            }
            seen[v] = true;
        }
        if !seen.iter().all(|&b| b) {
            return Err("step table is not surjective".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn negated(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

/// `⟨⟨C⟩⟩ X ⋁α` at the reference state: some joint action of the coalition
/// guarantees a label in `α` no matter what the rest of the sub-agents do.
pub fn eval_atom(g: &OneStepGame, coalition: &[&str], actions: &[&str]) -> bool {
    let cmask = coalition_mask(g, coalition);
    let amask = action_mask(g, actions);
    let filled: Vec<Option<usize>> = g.step.iter().map(|&v| Some(v)).collect();
    atom_tri(&filled, &g.sub_sizes(), cmask, amask) == Tri::True
}

fn coalition_mask(g: &OneStepGame, coalition: &[&str]) -> u32 {
    let mut mask = 0u32;
    for name in coalition {
        let k = g
            .subagents
            .iter()
            .position(|s| s == name)
            .unwrap_or_else(|| panic!("unknown sub-agent `{name}`"));
        mask |= 1 << k;
    }
    mask
}

fn action_mask(g: &OneStepGame, actions: &[&str]) -> u32 {
    let mut mask = 0u32;
    for name in actions {
        let k = g
            .alphabet
            .iter()
            .position(|a| a == name)
            .unwrap_or_else(|| panic!("unknown action `{name}`"));
        mask |= 1 << k;
    }
    mask
}

/// Three-valued atom evaluation on a partially filled step table.
pub(crate) fn atom_tri(table: &[Option<usize>], dims: &[usize], coalition: u32, actions: u32) -> Tri {
    let k = dims.len();
    let coal: Vec<usize> = (0..k).filter(|&j| coalition & (1 << j) != 0).collect();
    let rest: Vec<usize> = (0..k).filter(|&j| coalition & (1 << j) == 0).collect();
    let mut any_unknown_combo = false;
    let mut coal_digits = vec![0usize; coal.len()];
    'combos: loop {
        // status of this coalition choice over all completions
        let mut all_in = true;
        let mut any_hole = false;
        let mut rest_digits = vec![0usize; rest.len()];
        'cells: loop {
            let mut code = 0usize;
            let mut digit_of = vec![0usize; k];
            for (j, &d) in coal.iter().zip(&coal_digits) {
                digit_of[*j] = d;
            }
            for (j, &d) in rest.iter().zip(&rest_digits) {
                digit_of[*j] = d;
            }
            for (j, &d) in digit_of.iter().enumerate() {
                code = code * dims[j] + d;
            }
            match table[code] {
                Some(v) => {
                    if actions & (1 << v) == 0 {
                        all_in = false;
                        break 'cells;
                    }
                }
                None => any_hole = true,
            }
            let mut t = rest.len();
            loop {
                if t == 0 {
                    break 'cells;
                }
                t -= 1;
                rest_digits[t] += 1;
                if rest_digits[t] < dims[rest[t]] {
                    break;
                }
                rest_digits[t] = 0;
            }
        }
        if all_in {
            if !any_hole {
                return Tri::True;
            }
            any_unknown_combo = true;
        }
        let mut t = coal.len();
        loop {
            if t == 0 {
                break 'combos;
            }
            t -= 1;
            coal_digits[t] += 1;
            if coal_digits[t] < dims[coal[t]] {
                break;
            }
            coal_digits[t] = 0;
        }
    }
    if any_unknown_combo {
        Tri::Unknown
    } else {
        Tri::False
    }
}

/// Three-valued constraint evaluation for one chain element on a partial
/// table; atoms of other elements must not occur here.
pub(crate) fn constraint_tri(
    c: &OneStepConstraint,
    elem: usize,
    table: &[Option<usize>],
    dims: &[usize],
) -> Tri {
    match c {
        OneStepConstraint::Const(true) => Tri::True,
        OneStepConstraint::Const(false) => Tri::False,
        OneStepConstraint::Can { elem: e, coalition, actions } => {
            debug_assert_eq!(*e, elem, "atom for element {e} in a sat call for element {elem}");
            atom_tri(table, dims, *coalition, *actions)
        }
        OneStepConstraint::Not(inner) => constraint_tri(inner, elem, table, dims).negated(),
        OneStepConstraint::And(parts) => {
            let mut out = Tri::True;
            for p in parts {
                match constraint_tri(p, elem, table, dims) {
                    Tri::False => return Tri::False,
                    Tri::Unknown => out = Tri::Unknown,
                    Tri::True => {}
                }
            }
            out
        }
        OneStepConstraint::Or(parts) => {
            let mut out = Tri::False;
            for p in parts {
                match constraint_tri(p, elem, table, dims) {
                    Tri::True => return Tri::True,
                    Tri::Unknown => out = Tri::Unknown,
                    Tri::False => {}
                }
            }
            out
        }
    }
}

/// Parameters of one bounded satisfiability search.
pub struct SatRequest<'a> {
    pub refined_agent: &'a str,
    /// the refined agent's alphabet in the base model
    pub alphabet: &'a [String],
    pub subagents: &'a [String],
    /// element id the constraint's atoms are tagged with
    pub elem: usize,
    /// per-sub-agent alphabet size limit
    pub bound: usize,
    /// search node budget per size profile
    pub max_nodes: usize,
    /// action names that generated sub-alphabets must avoid
    pub reserved: &'a BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(OneStepGame),
    UnsatUpToBound,
    ResourceExceeded,
}

enum Search {
    Found(Vec<usize>),
    Exhausted,
    Capped,
}

/// Bounded search for a one-step game satisfying the constraint.
///
/// Surjectivity and exact-one labelling are structural, so the
/// grand-coalition obligation never needs explicit atoms. Games are visited
/// in increasing total size, then lexicographically on step tables, and only
/// canonical representatives are returned; the first hit is therefore the
/// least witness regardless of scheduling.
pub fn sat_onestep(constraint: &OneStepConstraint, req: &SatRequest) -> SatOutcome {
    let n_act = req.alphabet.len();
    let profiles = size_profiles(req.subagents.len(), req.bound, n_act);
    let results = exec::map_slice(&profiles, |sizes| {
        let cells: usize = sizes.iter().product();
        let mut table: Vec<Option<usize>> = vec![None; cells];
        let mut budget = req.max_nodes;
        dfs(constraint, req.elem, sizes, &mut table, 0, n_act, &mut budget)
    });
    let mut capped = false;
    for (sizes, res) in profiles.iter().zip(results) {
        match res {
            Search::Found(step) => {
                let sub_alphabets: Vec<Vec<String>> = req
                    .subagents
                    .iter()
                    .zip(sizes)
                    .map(|(s, &n)| fresh_action_names(s, n, req.reserved))
                    .collect();
                return SatOutcome::Sat(OneStepGame {
                    refined_agent: req.refined_agent.to_string(),
                    alphabet: req.alphabet.to_vec(),
                    subagents: req.subagents.to_vec(),
                    sub_alphabets,
                    step,
                });
            }
            Search::Capped => capped = true,
            Search::Exhausted => {}
        }
    }
    if capped {
        SatOutcome::ResourceExceeded
    } else {
        SatOutcome::UnsatUpToBound
    }
}

/// Size profiles with enough cells for a surjection, ordered by
/// `(total cells, lexicographic)`.
fn size_profiles(n_subs: usize, bound: usize, n_act: usize) -> Vec<Vec<usize>> {
    let mut profiles = Vec::new();
    let mut cur = vec![1usize; n_subs];
    loop {
        if cur.iter().product::<usize>() >= n_act {
            profiles.push(cur.clone());
        }
        let mut k = n_subs;
        loop {
            if k == 0 {
                profiles.sort_by_key(|p| (p.iter().product::<usize>(), p.clone()));
                return profiles;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] <= bound {
                break;
            }
            cur[k] = 1;
        }
    }
}

fn dfs(
    constraint: &OneStepConstraint,
    elem: usize,
    dims: &[usize],
    table: &mut Vec<Option<usize>>,
    at: usize,
    n_act: usize,
    budget: &mut usize,
) -> Search {
    if at == table.len() {
        let step: Vec<usize> = table.iter().map(|v| v.unwrap()).collect();
        let mut seen = vec![false; n_act];
        for &v in &step {
            seen[v] = true;
        }
        if !seen.iter().all(|&b| b) || !is_canonical(&step, dims) {
            return Search::Exhausted;
        }
        return match constraint_tri(constraint, elem, table, dims) {
            Tri::True => Search::Found(step),
            _ => Search::Exhausted,
        };
    }
    for v in 0..n_act {
        if *budget == 0 {
            return Search::Capped;
        }
        *budget -= 1;
        table[at] = Some(v);
        // surjectivity feasibility: enough holes left for the missing labels
        let mut seen = vec![false; n_act];
        for x in table.iter().flatten() {
            seen[*x] = true;
        }
        let missing = seen.iter().filter(|&&b| !b).count();
        let holes = table.len() - at - 1;
        let feasible = missing <= holes;
        if feasible && constraint_tri(constraint, elem, table, dims) != Tri::False {
            match dfs(constraint, elem, dims, table, at + 1, n_act, budget) {
                Search::Exhausted => {}
                other => {
                    table[at] = None;
                    return other;
                }
            }
        }
        table[at] = None;
    }
    Search::Exhausted
}

/// Reads the homomorphism off a game: the map is the step table itself.
pub fn extract_hom(g: &OneStepGame) -> Homomorphism {
    Homomorphism {
        refined_agent: g.refined_agent.clone(),
        subagents: g.subagents.clone(),
        sub_alphabets: g.sub_alphabets.clone(),
        map: g.step.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatmc::{grand_constraint, OneStepConstraint};

    fn xor_game() -> OneStepGame {
        OneStepGame {
            refined_agent: "1".into(),
            alphabet: vec!["u".into(), "n".into()],
            subagents: vec!["a".into(), "b".into()],
            sub_alphabets: vec![vec!["a_0".into(), "a_1".into()], vec!["b_0".into(), "b_1".into()]],
            step: vec![1, 0, 0, 1],
        }
    }

    fn req<'a>(
        alphabet: &'a [String],
        subs: &'a [String],
        bound: usize,
        reserved: &'a BTreeSet<String>,
    ) -> SatRequest<'a> {
        SatRequest {
            refined_agent: "1",
            alphabet,
            subagents: subs,
            elem: 0,
            bound,
            max_nodes: 1_000_000,
            reserved,
        }
    }

    #[test]
    fn atom_eval_on_xor_game() {
        let g = xor_game();
        assert!(g.validate().is_ok());
        assert!(!eval_atom(&g, &["a"], &["u"]));
        assert!(eval_atom(&g, &["a", "b"], &["u"]));
        // full alphabet is guaranteed even for the empty coalition
        assert!(eval_atom(&g, &[], &["u", "n"]));
        // the empty target is never achievable
        assert!(!eval_atom(&g, &["a", "b"], &[]));
    }

    #[test]
    fn grand_constraint_alone_gives_projection() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        let c = grand_constraint(0, 2, 2);
        match sat_onestep(&c, &req(&alphabet, &subs, 2, &reserved)) {
            SatOutcome::Sat(g) => {
                assert!(g.validate().is_ok());
                // least game: one trivial sub-agent, the other carrying Act_i
                assert_eq!(g.sub_sizes(), vec![1, 2]);
                assert_eq!(g.step, vec![0, 1]);
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn denial_constraint_finds_xor() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        // no singleton sub-coalition may force any single action
        let mut parts = Vec::new();
        for c in [0b01u32, 0b10] {
            for a in [0b01u32, 0b10] {
                parts.push(OneStepConstraint::Not(Box::new(OneStepConstraint::Can {
                    elem: 0,
                    coalition: c,
                    actions: a,
                })));
            }
        }
        let c = OneStepConstraint::And(parts);
        match sat_onestep(&c, &req(&alphabet, &subs, 2, &reserved)) {
            SatOutcome::Sat(g) => {
                assert_eq!(g.sub_sizes(), vec![2, 2]);
                assert_eq!(g.step, vec![0, 1, 1, 0], "expected the xor-shaped table");
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn coalition_monotonicity_makes_unsat() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        let c = OneStepConstraint::And(vec![
            OneStepConstraint::Can { elem: 0, coalition: 0b01, actions: 0b01 },
            OneStepConstraint::Not(Box::new(OneStepConstraint::Can {
                elem: 0,
                coalition: 0b11,
                actions: 0b01,
            })),
        ]);
        for bound in 1..=3 {
            let mut r = req(&alphabet, &subs, bound, &reserved);
            r.bound = bound;
            assert_eq!(sat_onestep(&c, &r), SatOutcome::UnsatUpToBound);
        }
    }

    #[test]
    fn node_budget_is_respected() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        // unsatisfiable: forcing both singletons contradicts denial of the pair
        let c = OneStepConstraint::And(vec![
            OneStepConstraint::Can { elem: 0, coalition: 0b01, actions: 0b01 },
            OneStepConstraint::Not(Box::new(OneStepConstraint::Can {
                elem: 0,
                coalition: 0b11,
                actions: 0b01,
            })),
        ]);
        let mut r = req(&alphabet, &subs, 3, &reserved);
        r.max_nodes = 2;
        assert_eq!(sat_onestep(&c, &r), SatOutcome::ResourceExceeded);
    }

    #[test]
    fn grand_constraint_contradicted_is_unsat() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        // surjectivity is structural, so denying the grand coalition one of
        // the actions contradicts it directly
        let c = OneStepConstraint::Not(Box::new(OneStepConstraint::Can {
            elem: 0,
            coalition: 0b11,
            actions: 0b01,
        }));
        assert_eq!(
            sat_onestep(&c, &req(&alphabet, &subs, 3, &reserved)),
            SatOutcome::UnsatUpToBound
        );
    }

    #[test]
    fn extract_hom_mirrors_step_table() {
        let g = xor_game();
        let h = extract_hom(&g);
        assert_eq!(h.map, g.step);
        assert_eq!(h.subagents, g.subagents);
    }

    #[test]
    fn sat_witness_recheck() {
        let alphabet: Vec<String> = vec!["u".into(), "n".into()];
        let subs: Vec<String> = vec!["a".into(), "b".into()];
        let reserved = BTreeSet::new();
        let c = OneStepConstraint::And(vec![
            OneStepConstraint::Can { elem: 0, coalition: 0b01, actions: 0b10 },
            OneStepConstraint::Not(Box::new(OneStepConstraint::Can {
                elem: 0,
                coalition: 0b10,
                actions: 0b10,
            })),
        ]);
        match sat_onestep(&c, &req(&alphabet, &subs, 2, &reserved)) {
            SatOutcome::Sat(g) => {
                assert!(eval_atom(&g, &["a"], &["n"]));
                assert!(!eval_atom(&g, &["b"], &["n"]));
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }
}
