//! Finite concurrent game models and their elementary one-step operations.
//!
//! A [`Cgm`] interns agents, actions, states and propositions to dense
//! indices. The transition function is a dense table indexed by
//! `(state, joint action code)` where the joint code is the mixed-radix
//! encoding of one action per agent, most significant digit first in agent
//! declaration order. The search layers above iterate over this table
//! millions of times, so everything here is allocation-light.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// A set of state indices, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateSet {
    n: usize,
    words: Vec<u64>,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    pub fn singleton(n: usize, i: usize) -> Self {
        let mut s = Self::empty(n);
        s.insert(i);
        s
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(n);
        for &i in indices {
            s.insert(i);
        }
        s
    }

    /// Number of states in the universe, not the cardinality of the set.
    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        debug_assert_eq!(self.n, other.n);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        StateSet { n: self.n, words }
    }

    pub fn intersect(&self, other: &StateSet) -> StateSet {
        debug_assert_eq!(self.n, other.n);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        StateSet { n: self.n, words }
    }

    pub fn minus(&self, other: &StateSet) -> StateSet {
        debug_assert_eq!(self.n, other.n);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect();
        StateSet { n: self.n, words }
    }

    pub fn complement(&self) -> StateSet {
        let mut out = Self::full(self.n);
        for (w, s) in out.words.iter_mut().zip(&self.words) {
            *w &= !s;
        }
        out
    }

    pub fn union_with(&mut self, other: &StateSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.contains(i))
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A coalition of agents, as a bitmask over agent indices of one model.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Coalition(pub u64);

impl Coalition {
    pub fn empty() -> Self {
        Coalition(0)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut m = 0u64;
        for &i in indices {
            debug_assert!(i < 64);
            m |= 1 << i;
        }
        Coalition(m)
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn union(&self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    pub fn is_subset(&self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn members(&self, n_agents: usize) -> Vec<usize> {
        (0..n_agents).filter(|&i| self.contains(i)).collect()
    }
}

/// A joint action for a subset of the agents of one model.
///
/// Entries are `(agent index, action index)` pairs, kept sorted by agent.
/// Merging two vectors is defined only when their domains are disjoint.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ActionVector {
    entries: Vec<(usize, usize)>,
}

impl ActionVector {
    pub fn new() -> Self {
        ActionVector { entries: Vec::new() }
    }

    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Result<Self, InputError> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(InputError::DuplicateAgent(w[0].0));
            }
        }
        Ok(ActionVector { entries: pairs })
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(a, _)| a)
    }

    pub fn get(&self, agent: usize) -> Option<usize> {
        self.entries
            .binary_search_by_key(&agent, |&(a, _)| a)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// The merge `a_Γ · b_Δ`, defined iff the two domains are disjoint.
    pub fn merge(&self, other: &ActionVector) -> Result<ActionVector, InputError> {
        let mut pairs = self.entries.clone();
        pairs.extend_from_slice(&other.entries);
        Self::from_pairs(pairs).map_err(|_| {
            let overlap = other
                .agents()
                .find(|a| self.get(*a).is_some())
                .unwrap_or(0);
            InputError::OverlappingMerge(overlap)
        })
    }

    /// Restriction to a sub-domain.
    pub fn restrict(&self, agents: &[usize]) -> ActionVector {
        let entries = self
            .entries
            .iter()
            .copied()
            .filter(|(a, _)| agents.contains(a))
            .collect();
        ActionVector { entries }
    }
}

/// Errors raised by name resolution and one-step queries.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum InputError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown action `{0}` for agent `{1}`")]
    UnknownAction(String, String),
    #[error("unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("agent #{0} assigned twice in one action vector")]
    DuplicateAgent(usize),
    #[error("action vectors overlap on agent #{0}")]
    OverlappingMerge(usize),
}

/// A well-formedness defect of a model description.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum Defect {
    #[error("no states declared")]
    NoStates,
    #[error("no agents declared")]
    NoAgents,
    #[error("agent `{0}` declared twice")]
    DuplicateAgent(String),
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("agent `{0}` has no action alphabet")]
    MissingAlphabet(String),
    #[error("agent `{0}` has an empty action alphabet")]
    EmptyAlphabet(String),
    #[error("alphabets not disjoint: action `{0}` declared for agents `{1}` and `{2}`")]
    AlphabetsNotDisjoint(String, String, String),
    #[error("action `{0}` declared twice for agent `{1}`")]
    DuplicateAction(String, String),
    #[error("alphabet declared for unknown agent `{0}`")]
    AlphabetForUnknownAgent(String),
    #[error("label on unknown state `{0}`")]
    LabelOnUnknownState(String),
    #[error("transition from unknown state `{0}`")]
    TransFromUnknownState(String),
    #[error("transition to unknown state `{0}`")]
    TransToUnknownState(String),
    #[error("transition row for `{0}` has {1} action entries, expected {2}")]
    TransArity(String, usize, usize),
    #[error("transition row for `{0}` uses unknown action `{1}` for agent `{2}`")]
    TransUnknownAction(String, String, String),
    #[error("duplicate transition at ({0}, {1})")]
    DuplicateTransition(String, String),
    #[error("missing transition at ({0}, {1})")]
    MissingTransition(String, String),
    #[error("model too large: {0}")]
    TooLarge(String),
}

/// One raw transition row, as written in a model file.
#[derive(Clone, Debug)]
pub struct TransRow {
    pub state: String,
    pub actions: Vec<String>,
    pub target: String,
}

/// A raw model description, prior to validation and interning.
#[derive(Clone, Debug, Default)]
pub struct CgmDesc {
    pub agents: Vec<String>,
    /// `(agent, alphabet)` pairs, in declaration order.
    pub alphabets: Vec<(String, Vec<String>)>,
    pub states: Vec<String>,
    /// `(state, propositions)` pairs; a state may satisfy zero or many.
    pub labels: Vec<(String, Vec<String>)>,
    pub trans: Vec<TransRow>,
}

/// Checks every well-formedness invariant of a model description.
///
/// Defects are data, not failures: an empty report means the description
/// interns to a total [`Cgm`].
pub fn validate_cgm(desc: &CgmDesc) -> Vec<Defect> {
    let mut defects = Vec::new();
    if desc.states.is_empty() {
        defects.push(Defect::NoStates);
    }
    if desc.agents.is_empty() {
        defects.push(Defect::NoAgents);
    }
    let mut agent_set: HashMap<&str, usize> = HashMap::new();
    for (i, a) in desc.agents.iter().enumerate() {
        if agent_set.insert(a, i).is_some() {
            defects.push(Defect::DuplicateAgent(a.clone()));
        }
    }
    let mut state_set: HashMap<&str, usize> = HashMap::new();
    for (i, s) in desc.states.iter().enumerate() {
        if state_set.insert(s, i).is_some() {
            defects.push(Defect::DuplicateState(s.clone()));
        }
    }

    // Alphabets: one per agent, non-empty, pairwise disjoint.
    let mut alphabet_of: HashMap<&str, &Vec<String>> = HashMap::new();
    let mut action_owner: HashMap<&str, &str> = HashMap::new();
    for (agent, alphabet) in &desc.alphabets {
        if !agent_set.contains_key(agent.as_str()) {
            defects.push(Defect::AlphabetForUnknownAgent(agent.clone()));
            continue;
        }
        if alphabet.is_empty() {
            defects.push(Defect::EmptyAlphabet(agent.clone()));
        }
        let mut seen = BTreeSet::new();
        for act in alphabet {
            if !seen.insert(act.as_str()) {
                defects.push(Defect::DuplicateAction(act.clone(), agent.clone()));
                continue;
            }
            if let Some(owner) = action_owner.get(act.as_str()) {
                if *owner != agent.as_str() {
                    defects.push(Defect::AlphabetsNotDisjoint(
                        act.clone(),
                        owner.to_string(),
                        agent.clone(),
                    ));
                }
            } else {
                action_owner.insert(act, agent);
            }
        }
        alphabet_of.insert(agent, alphabet);
    }
    for agent in &desc.agents {
        if !alphabet_of.contains_key(agent.as_str()) {
            defects.push(Defect::MissingAlphabet(agent.clone()));
        }
    }

    for (state, _) in &desc.labels {
        if !state_set.contains_key(state.as_str()) {
            defects.push(Defect::LabelOnUnknownState(state.clone()));
        }
    }

    // Transition rows: typed, and total with each (state, vector) exactly once.
    if defects.iter().any(|d| {
        matches!(
            d,
            Defect::MissingAlphabet(_) | Defect::EmptyAlphabet(_) | Defect::NoAgents
        )
    }) {
        return defects; // totality is not meaningful without full alphabets
    }
    // coalition masks use one bit per agent and the table is dense
    if desc.agents.len() > 60 {
        defects.push(Defect::TooLarge(format!("{} agents (limit 60)", desc.agents.len())));
        return defects;
    }
    let sizes: Vec<usize> = desc
        .agents
        .iter()
        .map(|a| alphabet_of[a.as_str()].len())
        .collect();
    let joint: usize = sizes.iter().try_fold(1usize, |a, &b| a.checked_mul(b)).unwrap_or(usize::MAX);
    if joint.saturating_mul(desc.states.len().max(1)) > 100_000_000 {
        defects.push(Defect::TooLarge(format!(
            "{} states x {joint} joint actions",
            desc.states.len()
        )));
        return defects;
    }
    let mut seen_rows: HashMap<(usize, usize), ()> = HashMap::new();
    for row in &desc.trans {
        let Some(&w) = state_set.get(row.state.as_str()) else {
            defects.push(Defect::TransFromUnknownState(row.state.clone()));
            continue;
        };
        if row.actions.len() != desc.agents.len() {
            defects.push(Defect::TransArity(
                row.state.clone(),
                row.actions.len(),
                desc.agents.len(),
            ));
            continue;
        }
        let mut code = 0usize;
        let mut ok = true;
        for (k, act) in row.actions.iter().enumerate() {
            let agent = &desc.agents[k];
            match alphabet_of[agent.as_str()].iter().position(|x| x == act) {
                Some(idx) => code = code * sizes[k] + idx,
                None => {
                    defects.push(Defect::TransUnknownAction(
                        row.state.clone(),
                        act.clone(),
                        agent.clone(),
                    ));
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if !state_set.contains_key(row.target.as_str()) {
            defects.push(Defect::TransToUnknownState(row.target.clone()));
            continue;
        }
        if seen_rows.insert((w, code), ()).is_some() {
            defects.push(Defect::DuplicateTransition(
                row.state.clone(),
                row.actions.join(" "),
            ));
        }
    }
    // Totality: every (state, vector) pair must appear.
    for (w, state) in desc.states.iter().enumerate() {
        for code in 0..joint {
            if !seen_rows.contains_key(&(w, code)) {
                defects.push(Defect::MissingTransition(
                    state.clone(),
                    decode_vector(code, &sizes)
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| alphabet_of[desc.agents[k].as_str()][a].clone())
                        .collect::<Vec<_>>()
                        .join(" "),
                ));
            }
        }
    }
    defects
}

fn decode_vector(mut code: usize, sizes: &[usize]) -> Vec<usize> {
    let mut digits = vec![0usize; sizes.len()];
    for k in (0..sizes.len()).rev() {
        digits[k] = code % sizes[k];
        code /= sizes[k];
    }
    digits
}

/// A finite concurrent game model with interned names and a dense
/// transition table.
#[derive(Clone, PartialEq, Eq)]
pub struct Cgm {
    agents: Vec<String>,
    alphabets: Vec<Vec<String>>,
    states: Vec<String>,
    props: Vec<String>,
    /// per proposition, the set of states carrying it
    labels: Vec<StateSet>,
    /// successor state per `(state, joint code)`, row-major by state
    table: Vec<u32>,
    /// mixed-radix stride per agent
    strides: Vec<usize>,
    joint: usize,
    agent_idx: HashMap<String, usize>,
    state_idx: HashMap<String, usize>,
    prop_idx: HashMap<String, usize>,
    /// action name -> (agent, index); well-defined by alphabet disjointness
    action_idx: HashMap<String, (usize, usize)>,
}

impl fmt::Debug for Cgm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cgm")
            .field("agents", &self.agents)
            .field("states", &self.states)
            .field("props", &self.props)
            .finish_non_exhaustive()
    }
}

impl Cgm {
    /// Interns a validated description. Returns the full defect list when
    /// any invariant fails; totality is enforced here, not lazily.
    pub fn from_desc(desc: &CgmDesc) -> Result<Cgm, Vec<Defect>> {
        let defects = validate_cgm(desc);
        if !defects.is_empty() {
            return Err(defects);
        }
        let agents = desc.agents.clone();
        let mut alphabets = vec![Vec::new(); agents.len()];
        for (agent, alphabet) in &desc.alphabets {
            let i = agents.iter().position(|a| a == agent).unwrap();
            alphabets[i] = alphabet.clone();
        }
        let states = desc.states.clone();
        let mut props: Vec<String> = Vec::new();
        for (_, ps) in &desc.labels {
            for p in ps {
                if !props.contains(p) {
                    props.push(p.clone());
                }
            }
        }
        let mut labels = vec![StateSet::empty(states.len()); props.len()];
        for (state, ps) in &desc.labels {
            let w = states.iter().position(|s| s == state).unwrap();
            for p in ps {
                let pi = props.iter().position(|q| q == p).unwrap();
                labels[pi].insert(w);
            }
        }
        let sizes: Vec<usize> = alphabets.iter().map(|a| a.len()).collect();
        let joint: usize = sizes.iter().product();
        let mut table = vec![0u32; states.len() * joint];
        for row in &desc.trans {
            let w = states.iter().position(|s| *s == row.state).unwrap();
            let mut code = 0usize;
            for (k, act) in row.actions.iter().enumerate() {
                let idx = alphabets[k].iter().position(|x| x == act).unwrap();
                code = code * sizes[k] + idx;
            }
            let t = states.iter().position(|s| *s == row.target).unwrap();
            table[w * joint + code] = t as u32;
        }
        Ok(Self::assemble(agents, alphabets, states, props, labels, table))
    }

    /// Builds a model directly from index-level data. Intended for
    /// generators and tests; panics on inconsistent dimensions.
    pub fn build(
        agents: &[&str],
        alphabets: &[&[&str]],
        states: &[&str],
        labels: &[(&str, &[&str])],
        trans: impl Fn(usize, &[usize]) -> usize,
    ) -> Cgm {
        assert_eq!(agents.len(), alphabets.len());
        let agents: Vec<String> = agents.iter().map(|s| s.to_string()).collect();
        let alphabets: Vec<Vec<String>> = alphabets
            .iter()
            .map(|a| a.iter().map(|s| s.to_string()).collect())
            .collect();
        let states: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let mut props: Vec<String> = Vec::new();
        for (_, ps) in labels {
            for p in *ps {
                if !props.iter().any(|q| q == p) {
                    props.push(p.to_string());
                }
            }
        }
        let mut label_sets = vec![StateSet::empty(states.len()); props.len()];
        for (state, ps) in labels {
            let w = states.iter().position(|s| s == state).expect("unknown state in labels");
            for p in *ps {
                let pi = props.iter().position(|q| q == p).unwrap();
                label_sets[pi].insert(w);
            }
        }
        let sizes: Vec<usize> = alphabets.iter().map(|a| a.len()).collect();
        let joint: usize = sizes.iter().product();
        let mut table = vec![0u32; states.len() * joint];
        let mut digits = vec![0usize; agents.len()];
        for w in 0..states.len() {
            for code in 0..joint {
                decode_into(code, &sizes, &mut digits);
                let t = trans(w, &digits);
                assert!(t < states.len(), "transition target out of range");
                table[w * joint + code] = t as u32;
            }
        }
        Self::assemble(agents, alphabets, states, props, label_sets, table)
    }

    fn assemble(
        agents: Vec<String>,
        alphabets: Vec<Vec<String>>,
        states: Vec<String>,
        props: Vec<String>,
        labels: Vec<StateSet>,
        table: Vec<u32>,
    ) -> Cgm {
        let sizes: Vec<usize> = alphabets.iter().map(|a| a.len()).collect();
        let mut strides = vec![1usize; agents.len()];
        for k in (0..agents.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        let joint: usize = sizes.iter().product();
        let agent_idx = agents.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let state_idx = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let prop_idx = props.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let mut action_idx = HashMap::new();
        for (i, alphabet) in alphabets.iter().enumerate() {
            for (k, act) in alphabet.iter().enumerate() {
                action_idx.insert(act.clone(), (i, k));
            }
        }
        Cgm {
            agents,
            alphabets,
            states,
            props,
            labels,
            table,
            strides,
            joint,
            agent_idx,
            state_idx,
            prop_idx,
            action_idx,
        }
    }

    /// Declares propositions that may hold nowhere, so lookups of them
    /// resolve to the empty set instead of an unknown-proposition error.
    pub fn with_declared_props(mut self, props: &[&str]) -> Cgm {
        for p in props {
            if !self.prop_idx.contains_key(*p) {
                self.prop_idx.insert(p.to_string(), self.props.len());
                self.props.push(p.to_string());
                self.labels.push(StateSet::empty(self.states.len()));
            }
        }
        self
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_joint(&self) -> usize {
        self.joint
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn alphabet(&self, agent: usize) -> &[String] {
        &self.alphabets[agent]
    }

    pub fn agent_index(&self, name: &str) -> Result<usize, InputError> {
        self.agent_idx
            .get(name)
            .copied()
            .ok_or_else(|| InputError::UnknownAgent(name.to_string()))
    }

    pub fn state_index(&self, name: &str) -> Result<usize, InputError> {
        self.state_idx
            .get(name)
            .copied()
            .ok_or_else(|| InputError::UnknownState(name.to_string()))
    }

    pub fn state_name(&self, w: usize) -> &str {
        &self.states[w]
    }

    pub fn prop_states(&self, name: &str) -> Result<&StateSet, InputError> {
        self.prop_idx
            .get(name)
            .map(|&i| &self.labels[i])
            .ok_or_else(|| InputError::UnknownProp(name.to_string()))
    }

    pub fn action_index(&self, agent: usize, name: &str) -> Result<usize, InputError> {
        match self.action_idx.get(name) {
            Some(&(a, k)) if a == agent => Ok(k),
            _ => Err(InputError::UnknownAction(
                name.to_string(),
                self.agents[agent].clone(),
            )),
        }
    }

    /// Resolves a list of agent names to a coalition mask.
    pub fn coalition(&self, names: &BTreeSet<String>) -> Result<Coalition, InputError> {
        let mut c = Coalition::empty();
        for name in names {
            c.insert(self.agent_index(name)?);
        }
        Ok(c)
    }

    /// The successor under a complete joint action code.
    #[inline]
    pub fn successor(&self, w: usize, code: usize) -> usize {
        self.table[w * self.joint + code] as usize
    }

    /// Runs `f` over every joint code extending the fixed `(agent, action)`
    /// pairs. Pairs must have distinct agents.
    pub fn for_each_completion(&self, fixed: &[(usize, usize)], mut f: impl FnMut(usize)) {
        let mut base = 0usize;
        let mut free: Vec<usize> = Vec::with_capacity(self.agents.len());
        'agents: for a in 0..self.agents.len() {
            for &(fa, fact) in fixed {
                if fa == a {
                    base += fact * self.strides[a];
                    continue 'agents;
                }
            }
            free.push(a);
        }
        let mut digits = vec![0usize; free.len()];
        loop {
            let mut code = base;
            for (d, &a) in digits.iter().zip(&free) {
                code += d * self.strides[a];
            }
            f(code);
            // odometer over the free agents
            let mut k = free.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < self.alphabets[free[k]].len() {
                    break;
                }
                digits[k] = 0;
            }
        }
    }

    /// Runs `f` over every partial joint action of the given agents,
    /// passing the `(agent, action)` pairs.
    pub fn for_each_vector(&self, agents: &[usize], mut f: impl FnMut(&[(usize, usize)])) {
        let mut pairs: Vec<(usize, usize)> = agents.iter().map(|&a| (a, 0)).collect();
        loop {
            f(&pairs);
            let mut k = agents.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                pairs[k].1 += 1;
                if pairs[k].1 < self.alphabets[agents[k]].len() {
                    break;
                }
                pairs[k].1 = 0;
            }
        }
    }

    /// One-step outcomes of a partial action vector: the set
    /// `{ o(w, partial · c) : c completes the remaining agents }`.
    pub fn successors_partial(&self, w: usize, fixed: &[(usize, usize)]) -> StateSet {
        let mut out = StateSet::empty(self.n_states());
        self.for_each_completion(fixed, |code| {
            out.insert(self.successor(w, code));
        });
        out
    }

    /// Name-level wrapper over [`Cgm::successors_partial`].
    pub fn successors(
        &self,
        state: &str,
        partial: &[(&str, &str)],
    ) -> Result<BTreeSet<String>, InputError> {
        let w = self.state_index(state)?;
        let mut fixed = Vec::with_capacity(partial.len());
        for &(agent, action) in partial {
            let a = self.agent_index(agent)?;
            let k = self.action_index(a, action)?;
            fixed.push((a, k));
        }
        ActionVector::from_pairs(fixed.clone())?;
        Ok(self
            .successors_partial(w, &fixed)
            .iter()
            .map(|i| self.states[i].clone())
            .collect())
    }

    /// The one-step controllable predecessors of `target`:
    /// `{ w : ∃ joint action of the coalition forcing the next state into target }`.
    pub fn pre(&self, coalition: Coalition, target: &StateSet) -> StateSet {
        let members = coalition.members(self.n_agents());
        let mut out = StateSet::empty(self.n_states());
        for w in 0..self.n_states() {
            let mut works = false;
            self.for_each_vector(&members, |pairs| {
                if works {
                    return;
                }
                let mut all_in = true;
                self.for_each_completion(pairs, |code| {
                    if all_in && !target.contains(self.successor(w, code)) {
                        all_in = false;
                    }
                });
                if all_in {
                    works = true;
                }
            });
            if works {
                out.insert(w);
            }
        }
        out
    }

    /// The dual of [`Cgm::pre`]: states where the coalition cannot avoid
    /// `target` in one step, `{ w : ∀ coalition vector ∃ completion into target }`.
    /// Computed directly by alternating over action vectors.
    pub fn dual_pre(&self, coalition: Coalition, target: &StateSet) -> StateSet {
        let members = coalition.members(self.n_agents());
        let mut out = StateSet::empty(self.n_states());
        for w in 0..self.n_states() {
            let mut every = true;
            self.for_each_vector(&members, |pairs| {
                if !every {
                    return;
                }
                let mut some_in = false;
                self.for_each_completion(pairs, |code| {
                    if !some_in && target.contains(self.successor(w, code)) {
                        some_in = true;
                    }
                });
                if !some_in {
                    every = false;
                }
            });
            if every {
                out.insert(w);
            }
        }
        out
    }

    /// Name-level `pre` for tests and reports.
    pub fn pre_named(&self, coalition: &[&str], target: &[&str]) -> Result<BTreeSet<String>, InputError> {
        let mut c = Coalition::empty();
        for name in coalition {
            c.insert(self.agent_index(name)?);
        }
        let mut t = StateSet::empty(self.n_states());
        for s in target {
            t.insert(self.state_index(s)?);
        }
        Ok(self.pre(c, &t).iter().map(|i| self.states[i].clone()).collect())
    }

    /// Exports the interned model back to a description (for serialization).
    pub fn to_desc(&self) -> CgmDesc {
        let mut labels = Vec::new();
        for (w, state) in self.states.iter().enumerate() {
            let ps: Vec<String> = self
                .props
                .iter()
                .enumerate()
                .filter(|(pi, _)| self.labels[*pi].contains(w))
                .map(|(_, p)| p.clone())
                .collect();
            labels.push((state.clone(), ps));
        }
        let mut trans = Vec::new();
        let sizes: Vec<usize> = self.alphabets.iter().map(|a| a.len()).collect();
        let mut digits = vec![0usize; self.agents.len()];
        for (w, state) in self.states.iter().enumerate() {
            for code in 0..self.joint {
                decode_into(code, &sizes, &mut digits);
                trans.push(TransRow {
                    state: state.clone(),
                    actions: digits
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| self.alphabets[k][d].clone())
                        .collect(),
                    target: self.states[self.successor(w, code)].clone(),
                });
            }
        }
        CgmDesc {
            agents: self.agents.clone(),
            alphabets: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| (a.clone(), self.alphabets[i].clone()))
                .collect(),
            states: self.states.clone(),
            labels,
            trans,
        }
    }

    /// All action names of the model, for freshness checks.
    pub fn all_action_names(&self) -> BTreeSet<String> {
        self.action_idx.keys().cloned().collect()
    }

    /// Structural equality modulo the proposition universe: a proposition
    /// declared in one model but absent from the other counts as holding
    /// nowhere. The text format cannot express empty extensions, so
    /// round-tripped models are compared this way.
    pub fn equivalent(&self, other: &Cgm) -> bool {
        if self.agents != other.agents
            || self.alphabets != other.alphabets
            || self.states != other.states
            || self.table != other.table
        {
            return false;
        }
        let empty = StateSet::empty(self.states.len());
        let all_props: BTreeSet<&String> = self.props.iter().chain(other.props.iter()).collect();
        all_props.into_iter().all(|p| {
            let a = self.prop_states(p).unwrap_or(&empty);
            let b = other.prop_states(p).unwrap_or(&empty);
            a == b
        })
    }
}

pub(crate) fn decode_into(mut code: usize, sizes: &[usize], digits: &mut [usize]) {
    for k in (0..sizes.len()).rev() {
        digits[k] = code % sizes[k];
        code /= sizes[k];
    }
}
