//! Fixed-point model checking of split-free ATL, plus a strategy-enumerating
//! oracle that evaluates the semantics directly.
//!
//! `check_atl` computes extensions bottom-up: `<<Γ>> X` via `pre`,
//! `<<Γ>> φ U ψ` as the least fixed point `Z = ψ ∪ (φ ∩ pre(Γ, Z))` and
//! `[[Γ]] φ U ψ` with `dual_pre` in place of `pre`. Memoryless strategies
//! suffice for these objectives, so the oracle enumerates memoryless
//! vectors only and follows every induced run with cycle detection.
//!
//! The same evaluator also runs on intervals `[lo, hi]` of state sets so the
//! refinement layers can propagate three-valued chain verdicts through an
//! outer split-free skeleton.

use thiserror::Error;

use crate::cgm::{Cgm, Coalition, InputError, StateSet};
use crate::formula::Formula;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("formula is not split-free: {0}")]
    NotSplitFree(String),
    #[error(transparent)]
    Input(#[from] InputError),
}

/// A lower/upper approximation of an extension; `lo == hi` when crisp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: StateSet,
    pub hi: StateSet,
}

impl Interval {
    pub fn crisp(s: StateSet) -> Interval {
        Interval { hi: s.clone(), lo: s }
    }

    pub fn is_crisp(&self) -> bool {
        self.lo == self.hi
    }
}

/// Evaluates a split-free formula on intervals. `atoms` resolves synthetic
/// atoms first; anything unresolved falls back to the model valuation.
pub(crate) fn eval_interval(
    m: &Cgm,
    f: &Formula,
    atoms: &dyn Fn(&str) -> Option<Interval>,
) -> Result<Interval, CheckError> {
    let n = m.n_states();
    match f {
        Formula::False => Ok(Interval::crisp(StateSet::empty(n))),
        Formula::Atom(p) => {
            if let Some(iv) = atoms(p) {
                return Ok(iv);
            }
            Ok(Interval::crisp(m.prop_states(p)?.clone()))
        }
        Formula::Implies(a, b) => {
            let a = eval_interval(m, a, atoms)?;
            let b = eval_interval(m, b, atoms)?;
            // ¬a ∪ b, anti-monotone in a
            Ok(Interval {
                lo: a.hi.complement().union(&b.lo),
                hi: a.lo.complement().union(&b.hi),
            })
        }
        Formula::Next(c, g) => {
            let coalition = m.coalition(c)?;
            let g = eval_interval(m, g, atoms)?;
            Ok(Interval {
                lo: m.pre(coalition, &g.lo),
                hi: m.pre(coalition, &g.hi),
            })
        }
        Formula::Until(c, a, b) => {
            let coalition = m.coalition(c)?;
            let a = eval_interval(m, a, atoms)?;
            let b = eval_interval(m, b, atoms)?;
            Ok(Interval {
                lo: until_fixpoint(m, coalition, &a.lo, &b.lo, false),
                hi: until_fixpoint(m, coalition, &a.hi, &b.hi, false),
            })
        }
        Formula::DualUntil(c, a, b) => {
            let coalition = m.coalition(c)?;
            let a = eval_interval(m, a, atoms)?;
            let b = eval_interval(m, b, atoms)?;
            Ok(Interval {
                lo: until_fixpoint(m, coalition, &a.lo, &b.lo, true),
                hi: until_fixpoint(m, coalition, &a.hi, &b.hi, true),
            })
        }
        Formula::Split { .. } | Formula::DualSplit { .. } => {
            Err(CheckError::NotSplitFree(f.to_string()))
        }
    }
}

/// Least fixed point `Z = ψ ∪ (φ ∩ step(Γ, Z))`, where `step` is `pre` or
/// `dual_pre`. Stabilises within `|W|` iterations; this is asserted.
fn until_fixpoint(m: &Cgm, coalition: Coalition, phi: &StateSet, psi: &StateSet, dual: bool) -> StateSet {
    let mut z = StateSet::empty(m.n_states());
    let mut iters = 0usize;
    loop {
        let step = if dual { m.dual_pre(coalition, &z) } else { m.pre(coalition, &z) };
        let next = psi.union(&phi.intersect(&step));
        iters += 1;
        if next == z {
            // the first iteration that changes nothing is not counted as growth
            assert!(iters <= m.n_states() + 1, "until fixed point took {iters} iterations");
            return z;
        }
        z = next;
    }
}

/// The extension `{ w : M, w ⊨ f }` of a split-free formula.
pub fn check_atl(m: &Cgm, f: &Formula) -> Result<StateSet, CheckError> {
    let iv = eval_interval(m, f, &|_| None)?;
    debug_assert!(iv.is_crisp());
    Ok(iv.lo)
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large: {0} strategy vectors exceed the cap of {1}")]
    TooLarge(usize, usize),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Default run horizon: `|W| · |Act_Ag| + 1`, enough to cover every lasso of
/// every induced run.
pub fn default_horizon(m: &Cgm) -> usize {
    m.n_states() * m.n_joint() + 1
}

const DEFAULT_VECTOR_CAP: usize = 2_000_000;

/// One memoryless strategy per coalition member: a choice of action for
/// every state.
#[derive(Clone, Debug)]
pub struct MemorylessStrategyVector {
    pub agents: Vec<usize>,
    /// per member, one action index per state
    pub choice: Vec<Vec<usize>>,
}

impl MemorylessStrategyVector {
    fn pairs_at(&self, w: usize) -> Vec<(usize, usize)> {
        self.agents
            .iter()
            .zip(&self.choice)
            .map(|(&a, c)| (a, c[w]))
            .collect()
    }
}

fn for_each_vector(m: &Cgm, agents: &[usize], mut f: impl FnMut(&MemorylessStrategyVector)) {
    let n = m.n_states();
    let mut sv = MemorylessStrategyVector {
        agents: agents.to_vec(),
        choice: agents.iter().map(|_| vec![0usize; n]).collect(),
    };
    loop {
        f(&sv);
        // odometer over (member, state) cells
        let mut i = agents.len();
        'outer: loop {
            if i == 0 {
                return;
            }
            i -= 1;
            let size = m.alphabet(agents[i]).len();
            for w in 0..n {
                sv.choice[i][w] += 1;
                if sv.choice[i][w] < size {
                    break 'outer;
                }
                sv.choice[i][w] = 0;
            }
        }
    }
}

fn vector_count(m: &Cgm, agents: &[usize]) -> usize {
    agents
        .iter()
        .map(|&a| m.alphabet(a).len().checked_pow(m.n_states() as u32).unwrap_or(usize::MAX))
        .try_fold(1usize, |acc, x| acc.checked_mul(x))
        .unwrap_or(usize::MAX)
}

/// Every branch from `w` must reach a `psi` state through `phi` states.
/// A revisited state on the current path means the adversary can loop
/// forever, so the branch fails.
fn all_branches_reach(
    m: &Cgm,
    sv: &MemorylessStrategyVector,
    w: usize,
    phi: &StateSet,
    psi: &StateSet,
    horizon: usize,
    path: &mut Vec<usize>,
) -> bool {
    if psi.contains(w) {
        return true;
    }
    if !phi.contains(w) || path.contains(&w) || path.len() >= horizon {
        return false;
    }
    path.push(w);
    let succ = m.successors_partial(w, &sv.pairs_at(w));
    let ok = succ
        .iter()
        .all(|v| all_branches_reach(m, sv, v, phi, psi, horizon, path));
    path.pop();
    ok
}

/// Some branch from `w` reaches a `psi` state through `phi` states.
fn some_branch_reaches(
    m: &Cgm,
    sv: &MemorylessStrategyVector,
    w: usize,
    phi: &StateSet,
    psi: &StateSet,
    horizon: usize,
    path: &mut Vec<usize>,
) -> bool {
    if psi.contains(w) {
        return true;
    }
    if !phi.contains(w) || path.contains(&w) || path.len() >= horizon {
        return false;
    }
    path.push(w);
    let succ = m.successors_partial(w, &sv.pairs_at(w));
    let ok = succ
        .iter()
        .any(|v| some_branch_reaches(m, sv, v, phi, psi, horizon, path));
    path.pop();
    ok
}

/// Direct evaluation of the satisfaction clauses by exhaustive strategy
/// enumeration. Independent of `check_atl`'s fixed-point path; intended for
/// small models (`|W| ≤ 5`, alphabets ≤ 3).
pub fn brute_force_atl(m: &Cgm, f: &Formula, horizon: usize) -> Result<StateSet, OracleError> {
    brute_force_atl_with_cap(m, f, horizon, DEFAULT_VECTOR_CAP)
}

pub fn brute_force_atl_with_cap(
    m: &Cgm,
    f: &Formula,
    horizon: usize,
    cap: usize,
) -> Result<StateSet, OracleError> {
    let n = m.n_states();
    match f {
        Formula::False => Ok(StateSet::empty(n)),
        Formula::Atom(p) => Ok(m.prop_states(p).map_err(CheckError::Input)?.clone()),
        Formula::Implies(a, b) => {
            let a = brute_force_atl_with_cap(m, a, horizon, cap)?;
            let b = brute_force_atl_with_cap(m, b, horizon, cap)?;
            Ok(a.complement().union(&b))
        }
        Formula::Next(c, g) => {
            let coalition = m.coalition(c).map_err(CheckError::Input)?;
            let members = coalition.members(m.n_agents());
            let target = brute_force_atl_with_cap(m, g, horizon, cap)?;
            // one-step: only the first action of a strategy matters
            let mut out = StateSet::empty(n);
            for w in 0..n {
                let mut works = false;
                m.for_each_vector(&members, |pairs| {
                    if !works && m.successors_partial(w, pairs).is_subset(&target) {
                        works = true;
                    }
                });
                if works {
                    out.insert(w);
                }
            }
            Ok(out)
        }
        Formula::Until(c, a, b) => {
            let coalition = m.coalition(c).map_err(CheckError::Input)?;
            let members = coalition.members(m.n_agents());
            let count = vector_count(m, &members);
            if count > cap {
                return Err(OracleError::TooLarge(count, cap));
            }
            let phi = brute_force_atl_with_cap(m, a, horizon, cap)?;
            let psi = brute_force_atl_with_cap(m, b, horizon, cap)?;
            let mut out = StateSet::empty(n);
            for_each_vector(m, &members, |sv| {
                for w in 0..n {
                    if !out.contains(w) {
                        let mut path = Vec::new();
                        if all_branches_reach(m, sv, w, &phi, &psi, horizon, &mut path) {
                            out.insert(w);
                        }
                    }
                }
            });
            Ok(out)
        }
        Formula::DualUntil(c, a, b) => {
            let coalition = m.coalition(c).map_err(CheckError::Input)?;
            let members = coalition.members(m.n_agents());
            let count = vector_count(m, &members);
            if count > cap {
                return Err(OracleError::TooLarge(count, cap));
            }
            let phi = brute_force_atl_with_cap(m, a, horizon, cap)?;
            let psi = brute_force_atl_with_cap(m, b, horizon, cap)?;
            // every strategy vector of the coalition leaves some branch that
            // satisfies the until
            let mut out = StateSet::full(n);
            for_each_vector(m, &members, |sv| {
                for w in 0..n {
                    if out.contains(w) {
                        let mut path = Vec::new();
                        if !some_branch_reaches(m, sv, w, &phi, &psi, horizon, &mut path) {
                            out.remove(w);
                        }
                    }
                }
            });
            Ok(out)
        }
        Formula::Split { .. } | Formula::DualSplit { .. } => {
            Err(CheckError::NotSplitFree(f.to_string()).into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::lock_model;

    #[test]
    fn constants() {
        let m = lock_model();
        assert_eq!(check_atl(&m, &Formula::tt()).unwrap(), StateSet::full(2));
        assert_eq!(check_atl(&m, &Formula::False).unwrap(), StateSet::empty(2));
    }

    #[test]
    fn lock_eventually_unlocked() {
        let m = lock_model();
        let f = Formula::eventually(&["1"], Formula::atom("unlocked_p"));
        assert_eq!(check_atl(&m, &f).unwrap(), StateSet::full(2));
    }

    #[test]
    fn lock_agent2_next() {
        let m = lock_model();
        let f = Formula::next(&["2"], Formula::atom("unlocked_p"));
        let unlocked = m.state_index("unlocked").unwrap();
        assert_eq!(check_atl(&m, &f).unwrap(), StateSet::singleton(2, unlocked));
    }

    #[test]
    fn oracle_agrees_on_lock() {
        let m = lock_model();
        let h = default_horizon(&m);
        for f in [
            Formula::tt(),
            Formula::False,
            Formula::eventually(&["1"], Formula::atom("unlocked_p")),
            Formula::next(&["2"], Formula::atom("unlocked_p")),
            Formula::globally(&["2"], Formula::neg(Formula::atom("unlocked_p"))),
            Formula::dual_until(&["1"], Formula::tt(), Formula::atom("unlocked_p")),
        ] {
            assert_eq!(
                check_atl(&m, &f).unwrap(),
                brute_force_atl(&m, &f, h).unwrap(),
                "disagreement on {f}"
            );
        }
    }

    #[test]
    fn single_state_until_collapses() {
        // on a 1-state model <<Γ>> φ U ψ is just ψ ∨ (φ ∧ <<Γ>> X ψ) at the
        // unique state, which the unfolding also gives
        let m = Cgm::build(&["1"], &[&["a"]], &["s"], &[("s", &["p"])], |_, _| 0);
        let f = Formula::until(&["1"], Formula::tt(), Formula::atom("p"));
        let unfold = Formula::or(
            Formula::atom("p"),
            Formula::and(Formula::tt(), Formula::next(&["1"], Formula::atom("p"))),
        );
        assert_eq!(check_atl(&m, &f).unwrap(), check_atl(&m, &unfold).unwrap());
        assert_eq!(
            brute_force_atl(&m, &f, default_horizon(&m)).unwrap(),
            check_atl(&m, &f).unwrap()
        );
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let m = lock_model();
        let f = Formula::until(&["1"], Formula::tt(), Formula::atom("unlocked_p"));
        assert!(matches!(
            brute_force_atl_with_cap(&m, &f, 5, 1),
            Err(OracleError::TooLarge(..))
        ));
    }

    #[test]
    fn split_is_rejected() {
        let m = lock_model();
        let f = Formula::split("1", &["a"], Formula::atom("unlocked_p"));
        assert!(matches!(check_atl(&m, &f), Err(CheckError::NotSplitFree(_))));
    }
}
