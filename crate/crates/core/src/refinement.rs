//! Γ-to-i homomorphisms: representation, validation, model construction,
//! and the direct semantics of the refinement operator by bounded search.
//!
//! `brute_force_refine` is the ground truth the flat-fragment reduction is
//! tested against. It enumerates candidate homomorphisms up to canonical
//! renaming of sub-agent actions, applies them in chain order, and checks
//! the body with `check_atl` on the refined model. Its negative answer is
//! always `FalseUpToBound`: exhaustion of the bounded search, never a
//! semantic refutation.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::atl::{check_atl, CheckError};
use crate::cgm::{decode_into, Cgm, StateSet};
use crate::exec;
use crate::formula::FlatChain;
use crate::symmetry::is_canonical;

/// A surjective map from sub-agent joint actions onto the refined agent's
/// actions, together with the sub-agent alphabets that define its domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homomorphism {
    pub refined_agent: String,
    pub subagents: Vec<String>,
    /// per sub-agent, in `subagents` order
    pub sub_alphabets: Vec<Vec<String>>,
    /// mixed-radix table over the sub-alphabets, most significant digit
    /// first; entries index the refined agent's alphabet in the base model
    pub map: Vec<usize>,
}

impl Homomorphism {
    pub fn sub_sizes(&self) -> Vec<usize> {
        self.sub_alphabets.iter().map(|a| a.len()).collect()
    }

    pub fn table_len(&self) -> usize {
        self.sub_sizes().iter().product()
    }

    pub fn is_surjective(&self, n_actions: usize) -> bool {
        let mut seen = vec![false; n_actions];
        for &v in &self.map {
            if v >= n_actions {
                return false;
            }
            seen[v] = true;
        }
        seen.iter().all(|&b| b)
    }

    /// Applies the map to one tuple of sub-agent action indices.
    pub fn apply(&self, acts: &[usize]) -> usize {
        let sizes = self.sub_sizes();
        let mut code = 0usize;
        for (k, &a) in acts.iter().enumerate() {
            code = code * sizes[k] + a;
        }
        self.map[code]
    }
}

/// A base model, a homomorphism, and the refined model it induces.
#[derive(Clone, Debug)]
pub struct RefinedModel {
    pub base: Cgm,
    pub hom: Homomorphism,
    pub derived: Cgm,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HomError {
    #[error("refined agent `{0}` is not an agent of the model")]
    UnknownAgent(String),
    #[error("map is not surjective onto the refined agent's alphabet")]
    NotSurjective,
    #[error("map has {0} rows, expected {1}")]
    WrongTableLen(usize, usize),
    #[error("sub-agent `{0}` clashes with an existing agent")]
    SubAgentClash(String),
    #[error("action name `{0}` clashes with an existing action")]
    ActionNameClash(String),
    #[error("sub-agent `{0}` has an empty alphabet")]
    EmptySubAlphabet(String),
    #[error("map entry {0} out of range for alphabet of size {1}")]
    MapEntryOutOfRange(usize, usize),
    #[error("chain is negative; refine the positive inner chain instead")]
    NegativeChain,
    #[error("candidate cap of {0} homomorphism tuples exceeded")]
    ResourceExceeded(usize),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Builds the refined model: states and valuation unchanged, the refined
/// agent replaced in place by the sub-agents, and
/// `o'(w, a) = o(w, a_{Ag∖{i}} · h(a_Γ))` for every state and joint action.
pub fn apply_hom(m: &Cgm, h: &Homomorphism) -> Result<RefinedModel, HomError> {
    let i = m
        .agent_index(&h.refined_agent)
        .map_err(|_| HomError::UnknownAgent(h.refined_agent.clone()))?;
    let n_act = m.alphabet(i).len();
    if h.map.len() != h.table_len() {
        return Err(HomError::WrongTableLen(h.map.len(), h.table_len()));
    }
    for &v in &h.map {
        if v >= n_act {
            return Err(HomError::MapEntryOutOfRange(v, n_act));
        }
    }
    if !h.is_surjective(n_act) {
        return Err(HomError::NotSurjective);
    }
    for (sub, alphabet) in h.subagents.iter().zip(&h.sub_alphabets) {
        if alphabet.is_empty() {
            return Err(HomError::EmptySubAlphabet(sub.clone()));
        }
        if m.agents().contains(sub) {
            return Err(HomError::SubAgentClash(sub.clone()));
        }
    }
    let taken = m.all_action_names();
    let mut fresh: BTreeSet<String> = BTreeSet::new();
    for alphabet in &h.sub_alphabets {
        for act in alphabet {
            if taken.contains(act) || !fresh.insert(act.clone()) {
                return Err(HomError::ActionNameClash(act.clone()));
            }
        }
    }

    // derived vocabulary: agents before i, then Γ, then agents after i
    let mut agents: Vec<&str> = Vec::new();
    let mut alphabets: Vec<Vec<&str>> = Vec::new();
    // position of each derived agent in the base model, sub-agents tagged
    enum Origin {
        Base(usize),
        Sub(usize),
    }
    let mut origin: Vec<Origin> = Vec::new();
    for (a, name) in m.agents().iter().enumerate() {
        if a == i {
            for (k, sub) in h.subagents.iter().enumerate() {
                agents.push(sub);
                alphabets.push(h.sub_alphabets[k].iter().map(|s| s.as_str()).collect());
                origin.push(Origin::Sub(k));
            }
        } else {
            agents.push(name);
            alphabets.push(m.alphabet(a).iter().map(|s| s.as_str()).collect());
            origin.push(Origin::Base(a));
        }
    }
    let states: Vec<&str> = m.states().iter().map(|s| s.as_str()).collect();
    let mut labels: Vec<(&str, Vec<&str>)> = Vec::new();
    for (w, s) in m.states().iter().enumerate() {
        let ps: Vec<&str> = m
            .props()
            .iter()
            .filter(|p| m.prop_states(p).unwrap().contains(w))
            .map(|p| p.as_str())
            .collect();
        labels.push((s, ps));
    }
    let label_refs: Vec<(&str, &[&str])> = labels.iter().map(|(s, ps)| (*s, ps.as_slice())).collect();
    let alphabet_refs: Vec<&[&str]> = alphabets.iter().map(|a| a.as_slice()).collect();
    let n_subs = h.subagents.len();
    let derived = Cgm::build(&agents, &alphabet_refs, &states, &label_refs, |w, acts| {
        let mut base_pairs: Vec<(usize, usize)> = Vec::with_capacity(m.n_agents());
        let mut sub_acts = vec![0usize; n_subs];
        for (pos, act) in acts.iter().enumerate() {
            match origin[pos] {
                Origin::Base(a) => base_pairs.push((a, *act)),
                Origin::Sub(k) => sub_acts[k] = *act,
            }
        }
        base_pairs.push((i, h.apply(&sub_acts)));
        let mut code = 0usize;
        base_pairs.sort_unstable();
        for &(a, act) in &base_pairs {
            code = code * m.alphabet(a).len() + act;
        }
        m.successor(w, code)
    });
    // keep propositions with empty extensions (V' = V includes them)
    let prop_names: Vec<&str> = m.props().iter().map(|p| p.as_str()).collect();
    let derived = derived.with_declared_props(&prop_names);
    Ok(RefinedModel { base: m.clone(), hom: h.clone(), derived })
}

/// A violated condition of the homomorphism definition, checked against a
/// candidate refined model.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum HomDefect {
    #[error("state sets differ")]
    StatesDiffer,
    #[error("valuations differ at state `{0}`")]
    ValuationDiffers(String),
    #[error("alphabet of unaffected agent `{0}` changed")]
    AlphabetChanged(String),
    #[error("refined agent `{0}` missing from the base model")]
    UnknownRefinedAgent(String),
    #[error("sub-agent `{0}` missing from the derived model")]
    MissingSubAgent(String),
    #[error("map not surjective: action `{0}` never taken")]
    NotSurjective(String),
    #[error("map table has wrong arity")]
    WrongTableLen,
    #[error("transition identity fails at ({0}, {1})")]
    TransitionMismatch(String, String),
}

/// Exhaustively checks every condition of the refinement definition on a
/// candidate. Defects are data; an empty list means the candidate is a
/// genuine refined model.
pub fn validate_hom(m: &Cgm, candidate: &RefinedModel) -> Vec<HomDefect> {
    let mut defects = Vec::new();
    let h = &candidate.hom;
    let d = &candidate.derived;
    let Ok(i) = m.agent_index(&h.refined_agent) else {
        defects.push(HomDefect::UnknownRefinedAgent(h.refined_agent.clone()));
        return defects;
    };
    let n_act = m.alphabet(i).len();
    if m.states() != d.states() {
        defects.push(HomDefect::StatesDiffer);
        return defects;
    }
    for (w, s) in m.states().iter().enumerate() {
        let same = m.props().iter().all(|p| {
            let base_has = m.prop_states(p).unwrap().contains(w);
            let derived_has = d.prop_states(p).map(|x| x.contains(w)).unwrap_or(false);
            base_has == derived_has
        }) && d.props().iter().all(|p| {
            let derived_has = d.prop_states(p).unwrap().contains(w);
            let base_has = m.prop_states(p).map(|x| x.contains(w)).unwrap_or(false);
            base_has == derived_has
        });
        if !same {
            defects.push(HomDefect::ValuationDiffers(s.clone()));
        }
    }
    for (a, name) in m.agents().iter().enumerate() {
        if a == i {
            continue;
        }
        match d.agent_index(name) {
            Ok(da) if d.alphabet(da) == m.alphabet(a) => {}
            _ => defects.push(HomDefect::AlphabetChanged(name.clone())),
        }
    }
    for sub in &h.subagents {
        if d.agent_index(sub).is_err() {
            defects.push(HomDefect::MissingSubAgent(sub.clone()));
        }
    }
    if h.map.len() != h.table_len() {
        defects.push(HomDefect::WrongTableLen);
        return defects;
    }
    let mut seen = vec![false; n_act];
    for &v in &h.map {
        if v < n_act {
            seen[v] = true;
        }
    }
    for (k, &b) in seen.iter().enumerate() {
        if !b {
            defects.push(HomDefect::NotSurjective(m.alphabet(i)[k].clone()));
        }
    }
    if !defects.is_empty() {
        return defects;
    }
    // transition identity, exhaustively over (state, derived joint action)
    let sub_positions: Vec<usize> = h
        .subagents
        .iter()
        .map(|s| d.agent_index(s).unwrap())
        .collect();
    let derived_sizes: Vec<usize> = (0..d.n_agents()).map(|a| d.alphabet(a).len()).collect();
    let mut digits = vec![0usize; d.n_agents()];
    for w in 0..m.n_states() {
        for code in 0..d.n_joint() {
            decode_into(code, &derived_sizes, &mut digits);
            let sub_acts: Vec<usize> = sub_positions.iter().map(|&p| digits[p]).collect();
            let mut base_pairs: Vec<(usize, usize)> = Vec::new();
            for (pos, name) in d.agents().iter().enumerate() {
                if let Ok(a) = m.agent_index(name) {
                    if a != i {
                        base_pairs.push((a, digits[pos]));
                    }
                }
            }
            base_pairs.push((i, h.apply(&sub_acts)));
            base_pairs.sort_unstable();
            let mut base_code = 0usize;
            for &(a, act) in &base_pairs {
                base_code = base_code * m.alphabet(a).len() + act;
            }
            if d.successor(w, code) != m.successor(w, base_code) {
                let action_names: Vec<String> = digits
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| d.alphabet(pos)[k].clone())
                    .collect();
                defects.push(HomDefect::TransitionMismatch(
                    m.state_name(w).to_string(),
                    action_names.join(" "),
                ));
            }
        }
    }
    defects
}

/// Deterministic fresh action names for a sub-agent: `sub_0`, `sub_1`, ...
/// with underscores appended until free of the reserved set.
pub(crate) fn fresh_action_names(
    sub: &str,
    count: usize,
    reserved: &BTreeSet<String>,
) -> Vec<String> {
    (0..count)
        .map(|k| {
            let mut name = format!("{sub}_{k}");
            while reserved.contains(&name) {
                name.push('_');
            }
            name
        })
        .collect()
}

/// All candidate homomorphisms splitting `agent` into `subs` with
/// per-sub-agent alphabet sizes at most `bound`, one canonical
/// representative per renaming orbit, in `(table cells, size profile,
/// table)` lexicographic order.
pub fn enumerate_homs(
    m: &Cgm,
    agent: &str,
    subs: &[String],
    bound: usize,
) -> Result<Vec<Homomorphism>, HomError> {
    let i = m
        .agent_index(agent)
        .map_err(|_| HomError::UnknownAgent(agent.to_string()))?;
    let n_act = m.alphabet(i).len();
    let reserved = m.all_action_names();
    let mut out = Vec::new();
    for sizes in size_profiles(subs.len(), bound) {
        let cells: usize = sizes.iter().product();
        if cells < n_act {
            continue; // no surjection possible
        }
        let mut table = vec![0usize; cells];
        loop {
            if is_surjective_table(&table, n_act) && is_canonical(&table, &sizes) {
                let sub_alphabets: Vec<Vec<String>> = subs
                    .iter()
                    .zip(&sizes)
                    .map(|(s, &n)| fresh_action_names(s, n, &reserved))
                    .collect();
                out.push(Homomorphism {
                    refined_agent: agent.to_string(),
                    subagents: subs.to_vec(),
                    sub_alphabets,
                    map: table.clone(),
                });
            }
            // odometer over table cells, least significant last
            let mut k = cells;
            'adv: loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                table[k] += 1;
                if table[k] < n_act {
                    break 'adv;
                }
                table[k] = 0;
            }
            if k == 0 && table[0] == 0 {
                break;
            }
        }
    }
    Ok(out)
}

/// Size profiles in `(total cells, lexicographic)` order.
fn size_profiles(n_subs: usize, bound: usize) -> Vec<Vec<usize>> {
    let mut profiles = Vec::new();
    let mut cur = vec![1usize; n_subs];
    loop {
        profiles.push(cur.clone());
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

fn is_surjective_table(table: &[usize], n_act: usize) -> bool {
    let mut seen = vec![false; n_act];
    for &v in table {
        seen[v] = true;
    }
    seen.iter().all(|&b| b)
}

/// Outcome of the bounded direct search for a refinement witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefineOutcome {
    /// Witness homomorphisms, one per chain element in application order.
    True(Vec<Homomorphism>),
    /// The bounded search space is exhausted; says nothing beyond the bound.
    FalseUpToBound,
}

const DEFAULT_CANDIDATE_CAP: usize = 5_000_000;

/// Direct semantics of a positive flat chain at one state: searches for a
/// sequence of homomorphisms, one per element applied left to right, whose
/// final model satisfies the body at `state`. Reports the first witness in
/// canonical candidate order; callers negate for negative chains.
pub fn brute_force_refine(
    m: &Cgm,
    state: &str,
    chain: &FlatChain,
    bound: usize,
) -> Result<RefineOutcome, HomError> {
    brute_force_refine_with_cap(m, state, chain, bound, DEFAULT_CANDIDATE_CAP)
}

pub fn brute_force_refine_with_cap(
    m: &Cgm,
    state: &str,
    chain: &FlatChain,
    bound: usize,
    cap: usize,
) -> Result<RefineOutcome, HomError> {
    if chain.negative {
        return Err(HomError::NegativeChain);
    }
    let w = m.state_index(state).map_err(CheckError::Input)?;
    let target = brute_force_refine_states(m, chain, bound, cap)?;
    match target {
        RefineStates::Capped => Err(HomError::ResourceExceeded(cap)),
        RefineStates::Done { proven, witnesses } => {
            if proven.contains(w) {
                Ok(RefineOutcome::True(witnesses[w].clone().unwrap()))
            } else {
                Ok(RefineOutcome::FalseUpToBound)
            }
        }
    }
}

pub(crate) enum RefineStates {
    Done {
        proven: StateSet,
        witnesses: Vec<Option<Vec<Homomorphism>>>,
    },
    Capped,
}

/// Evaluates a positive chain at every state in one sweep: enumerates the
/// first element's candidates in parallel, recursing sequentially below.
/// Witnesses are the first candidate tuple (in canonical order) that covers
/// each state, which is independent of scheduling.
pub(crate) fn brute_force_refine_states(
    m: &Cgm,
    chain: &FlatChain,
    bound: usize,
    cap: usize,
) -> Result<RefineStates, HomError> {
    let n = m.n_states();
    let (first, rest) = match chain.elements.split_first() {
        Some(x) => x,
        None => {
            let sat = check_atl(m, &chain.body)?;
            let witnesses = (0..n)
                .map(|w| if sat.contains(w) { Some(Vec::new()) } else { None })
                .collect();
            return Ok(RefineStates::Done { proven: sat, witnesses });
        }
    };
    let candidates = enumerate_homs(m, &first.0, &first.1, bound)?;
    if candidates.len() > cap {
        return Ok(RefineStates::Capped);
    }
    let branch_cap = (cap / candidates.len().max(1)).max(1);
    let results = exec::map_slice(&candidates, |h| -> Result<RefineStates, HomError> {
        let refined = apply_hom(m, h)?;
        let tail = FlatChain {
            elements: rest.to_vec(),
            body: chain.body.clone(),
            negative: false,
        };
        if rest.is_empty() {
            let sat = check_atl(&refined.derived, &chain.body)?;
            let witnesses = (0..n)
                .map(|w| if sat.contains(w) { Some(vec![h.clone()]) } else { None })
                .collect();
            Ok(RefineStates::Done { proven: sat, witnesses })
        } else {
            match brute_force_refine_states(&refined.derived, &tail, bound, branch_cap)? {
                RefineStates::Capped => Ok(RefineStates::Capped),
                RefineStates::Done { proven, witnesses } => {
                    let witnesses = witnesses
                        .into_iter()
                        .map(|tw| {
                            tw.map(|mut tail_homs| {
                                tail_homs.insert(0, h.clone());
                                tail_homs
                            })
                        })
                        .collect();
                    Ok(RefineStates::Done { proven, witnesses })
                }
            }
        }
    });
    let mut proven = StateSet::empty(n);
    let mut witnesses: Vec<Option<Vec<Homomorphism>>> = vec![None; n];
    let mut capped = false;
    for r in results {
        match r? {
            RefineStates::Capped => capped = true,
            RefineStates::Done { proven: p, witnesses: ws } => {
                for w in p.iter() {
                    if witnesses[w].is_none() {
                        witnesses[w] = ws[w].clone();
                    }
                }
                proven.union_with(&p);
            }
        }
    }
    if capped {
        return Ok(RefineStates::Capped);
    }
    Ok(RefineStates::Done { proven, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lock_model;
    use crate::formula::Formula;

    fn xor_hom() -> Homomorphism {
        Homomorphism {
            refined_agent: "1".into(),
            subagents: vec!["a".into(), "b".into()],
            sub_alphabets: vec![vec!["a_0".into(), "a_1".into()], vec!["b_0".into(), "b_1".into()]],
            // u is index 0, n is index 1 in the lock alphabet; XOR of the
            // sub-bits selects u exactly when the bits differ
            map: vec![1, 0, 0, 1],
        }
    }

    #[test]
    fn projection_refinement_preserves_power() {
        let m = lock_model();
        let h = Homomorphism {
            refined_agent: "1".into(),
            subagents: vec!["a".into(), "b".into()],
            sub_alphabets: vec![vec!["a_0".into(), "a_1".into()], vec!["b_0".into()]],
            map: vec![0, 1], // projection on a's component
        };
        let rm = apply_hom(&m, &h).unwrap();
        assert!(validate_hom(&m, &rm).is_empty());
        let d = &rm.derived;
        // {a} has exactly agent 1's one-step power, {b} none
        let f_a = Formula::next(&["a"], Formula::atom("unlocked_p"));
        let f_b = Formula::next(&["b"], Formula::atom("unlocked_p"));
        let f_1 = Formula::next(&["1"], Formula::atom("unlocked_p"));
        assert_eq!(check_atl(d, &f_a).unwrap(), check_atl(&m, &f_1).unwrap());
        let f_none = Formula::next(&[], Formula::atom("unlocked_p"));
        assert_eq!(check_atl(d, &f_b).unwrap(), check_atl(&m, &f_none).unwrap());
    }

    #[test]
    fn xor_refinement_denies_singletons() {
        let m = lock_model();
        let rm = apply_hom(&m, &xor_hom()).unwrap();
        assert!(validate_hom(&m, &rm).is_empty());
        let d = &rm.derived;
        let locked = d.state_index("locked").unwrap();
        let unl = Formula::atom("unlocked_p");
        for solo in ["a", "b"] {
            let f = Formula::next(&[solo], unl.clone());
            assert!(
                !check_atl(d, &f).unwrap().contains(locked),
                "{solo} alone should not force unlock"
            );
        }
        let f = Formula::next(&["a", "b"], unl);
        assert!(check_atl(d, &f).unwrap().contains(locked));
    }

    #[test]
    fn majority_refinement() {
        let m = lock_model();
        // three binary sub-agents, map = majority bit with n ↦ 0, u ↦ 1;
        // u is index 0 in the alphabet, so majority-of-ones picks index 0
        let mut map = vec![0usize; 8];
        for (code, entry) in map.iter_mut().enumerate() {
            let ones = (code & 1) + ((code >> 1) & 1) + ((code >> 2) & 1);
            *entry = if ones >= 2 { 0 } else { 1 };
        }
        let h = Homomorphism {
            refined_agent: "1".into(),
            subagents: vec!["a".into(), "b".into(), "c".into()],
            sub_alphabets: (0..3)
                .map(|k| {
                    let s = ["a", "b", "c"][k];
                    vec![format!("{s}_0"), format!("{s}_1")]
                })
                .collect(),
            map,
        };
        let rm = apply_hom(&m, &h).unwrap();
        assert!(validate_hom(&m, &rm).is_empty());
        let d = &rm.derived;
        let locked = d.state_index("locked").unwrap();
        let unl = Formula::atom("unlocked_p");
        for solo in ["a", "b", "c"] {
            let force = Formula::next(&[solo], unl.clone());
            assert!(!check_atl(d, &force).unwrap().contains(locked));
            // a single member cannot force staying locked either
            let avoid = Formula::next(&[solo], Formula::neg(unl.clone()));
            assert!(!check_atl(d, &avoid).unwrap().contains(locked));
        }
        for pair in [["a", "b"], ["a", "c"], ["b", "c"]] {
            let force = Formula::next(&pair.map(|s| s), unl.clone());
            assert!(check_atl(d, &force).unwrap().contains(locked));
            let avoid = Formula::next(&pair.map(|s| s), Formula::neg(unl.clone()));
            assert!(check_atl(d, &avoid).unwrap().contains(locked));
        }
    }

    #[test]
    fn validate_hom_flags_tampering() {
        let m = lock_model();
        let mut rm = apply_hom(&m, &xor_hom()).unwrap();
        assert!(validate_hom(&m, &rm).is_empty());
        // alter one map row: the derived table no longer matches
        rm.hom.map[0] = 0;
        let defects = validate_hom(&m, &rm);
        assert!(defects
            .iter()
            .any(|d| matches!(d, HomDefect::TransitionMismatch(..))));
        // drop surjectivity
        let mut rm2 = apply_hom(&m, &xor_hom()).unwrap();
        rm2.hom.map = vec![0, 0, 0, 0];
        let defects = validate_hom(&m, &rm2);
        assert!(defects.iter().any(|d| matches!(d, HomDefect::NotSurjective(_))));
    }

    #[test]
    fn enumerate_homs_singleton_codomain() {
        let m = Cgm::build(&["1"], &[&["a"]], &["s"], &[], |_, _| 0);
        let homs = enumerate_homs(&m, "1", &["x".into(), "y".into()], 1).unwrap();
        assert_eq!(homs.len(), 1);
        assert_eq!(homs[0].map, vec![0]);
    }

    #[test]
    fn enumerate_homs_empty_when_surjectivity_impossible() {
        let m = Cgm::build(&["1"], &[&["a", "b", "c"]], &["s"], &[], |_, _| 0);
        let homs = enumerate_homs(&m, "1", &["x".into()], 2).unwrap();
        assert!(homs.is_empty());
    }

    #[test]
    fn canonical_count_matches_unreduced_orbit_count() {
        // |Act_i| = 2, |Γ| = 2, bound = 2: count orbits of surjective tables
        // under per-sub-agent permutations with a raw enumerator
        let m = lock_model();
        let homs = enumerate_homs(&m, "1", &["x".into(), "y".into()], 2).unwrap();
        let mut orbit_count = 0usize;
        for sizes in [[1usize, 1], [1, 2], [2, 1], [2, 2]] {
            let cells: usize = sizes.iter().product();
            let mut reps: Vec<Vec<usize>> = Vec::new();
            for raw in 0..(2usize.pow(cells as u32)) {
                let table: Vec<usize> = (0..cells).map(|k| (raw >> k) & 1).collect();
                if !is_surjective_table(&table, 2) {
                    continue;
                }
                // canonical form by explicit orbit minimisation
                let mut best = table.clone();
                let perms0 = crate::symmetry::permutations(sizes[0]);
                let perms1 = crate::symmetry::permutations(sizes[1]);
                let mut scratch = vec![0usize; cells];
                for p0 in &perms0 {
                    for p1 in &perms1 {
                        crate::symmetry::permute_table(&table, &sizes, &[p0, p1], &mut scratch);
                        if scratch < best {
                            best = scratch.clone();
                        }
                    }
                }
                if !reps.contains(&best) {
                    reps.push(best);
                }
            }
            orbit_count += reps.len();
        }
        assert_eq!(homs.len(), orbit_count);
    }

    #[test]
    fn refine_oracle_finds_xor_witness() {
        let m = lock_model();
        let unl = Formula::atom("unlocked_p");
        let body = Formula::and(
            Formula::and(
                Formula::neg(Formula::next(&["a"], unl.clone())),
                Formula::neg(Formula::next(&["b"], unl.clone())),
            ),
            Formula::next(&["a", "b"], unl.clone()),
        );
        let chain = FlatChain {
            elements: vec![("1".into(), vec!["a".into(), "b".into()])],
            body,
            negative: false,
        };
        match brute_force_refine(&m, "locked", &chain, 2).unwrap() {
            RefineOutcome::True(homs) => {
                assert_eq!(homs.len(), 1);
                let rm = apply_hom(&m, &homs[0]).unwrap();
                assert!(validate_hom(&m, &rm).is_empty());
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn refine_oracle_seriality() {
        let m = lock_model();
        for state in ["locked", "unlocked"] {
            let chain = FlatChain {
                elements: vec![("1".into(), vec!["a".into(), "b".into()])],
                body: Formula::tt(),
                negative: false,
            };
            assert!(matches!(
                brute_force_refine(&m, state, &chain, 2).unwrap(),
                RefineOutcome::True(_)
            ));
        }
    }

    #[test]
    fn refine_oracle_singleton_carries_all_power() {
        let m = lock_model();
        let chain = FlatChain {
            elements: vec![("1".into(), vec!["a".into()])],
            body: Formula::neg(Formula::next(&["a"], Formula::atom("unlocked_p"))),
            negative: false,
        };
        for bound in 1..=3 {
            assert_eq!(
                brute_force_refine(&m, "locked", &chain, bound).unwrap(),
                RefineOutcome::FalseUpToBound
            );
        }
    }

    #[test]
    fn refine_oracle_monotone_in_bound() {
        let m = lock_model();
        let chain = FlatChain {
            elements: vec![("1".into(), vec!["a".into(), "b".into()])],
            body: Formula::next(&["a"], Formula::atom("unlocked_p")),
            negative: false,
        };
        let at2 = brute_force_refine(&m, "locked", &chain, 2).unwrap();
        let at3 = brute_force_refine(&m, "locked", &chain, 3).unwrap();
        assert!(matches!(at2, RefineOutcome::True(_)));
        assert!(matches!(at3, RefineOutcome::True(_)));
    }

    #[test]
    fn every_enumerated_hom_validates() {
        let m = lock_model();
        for h in enumerate_homs(&m, "1", &["x".into(), "y".into()], 2).unwrap() {
            let rm = apply_hom(&m, &h).unwrap();
            assert!(validate_hom(&m, &rm).is_empty(), "hom {h:?} failed validation");
        }
    }
}
