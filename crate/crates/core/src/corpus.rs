//! Model and formula generators backing the validation suites.
//!
//! The fixed LOCK model is the running example used throughout the tests.
//! `two_state_models` enumerates every 2-state, 2-agent, 2-action CGM over
//! one proposition up to isomorphism (state swap compatible with the
//! valuation, per-agent action renamings, agent swap). Random models and
//! formula samples are seeded, so every suite is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cgm::Cgm;
use crate::formula::Formula;

/// The LOCK model: agent 1 may unlock (`u`) or not (`n`), agent 2 only
/// waits (`w`); `unlocked` is absorbing and carries `unlocked_p`.
pub fn lock_model() -> Cgm {
    Cgm::build(
        &["1", "2"],
        &[&["u", "n"], &["w"]],
        &["locked", "unlocked"],
        &[("unlocked", &["unlocked_p"])],
        |w, acts| {
            if w == 1 || acts[0] == 0 {
                1
            } else {
                0
            }
        },
    )
}

/// Encodes a 2-state 2-agent 2-action model: 8 transition bits (state-major,
/// then agent-1 action, then agent-2 action) plus 2 valuation bits.
fn model_code(table: &[usize; 8], val: &[bool; 2]) -> u16 {
    let mut code = 0u16;
    for (i, &t) in table.iter().enumerate() {
        code |= (t as u16) << i;
    }
    code | ((val[0] as u16) << 8) | ((val[1] as u16) << 9)
}

fn apply_sym(
    table: &[usize; 8],
    val: &[bool; 2],
    swap_states: bool,
    swap_a1: bool,
    swap_a2: bool,
    swap_agents: bool,
) -> ([usize; 8], [bool; 2]) {
    let sw = |s: usize| if swap_states { 1 - s } else { s };
    let mut out = [0usize; 8];
    for w in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let (ra, rb) = if swap_agents { (b, a) } else { (a, b) };
                let ia = if swap_a1 { 1 - ra } else { ra };
                let ib = if swap_a2 { 1 - rb } else { rb };
                // new model at (sw(w), a, b) behaves like old at (w, ia, ib)
                out[sw(w) * 4 + a * 2 + b] = sw(table[w * 4 + ia * 2 + ib]);
            }
        }
    }
    let mut v = [false; 2];
    v[sw(0)] = val[0];
    v[sw(1)] = val[1];
    (out, v)
}

/// Every 2-state, 2-agent, 2-action CGM over one proposition `p`, one
/// canonical representative per isomorphism class.
pub fn two_state_models() -> Vec<Cgm> {
    let mut out = Vec::new();
    for raw in 0u16..1024 {
        let mut table = [0usize; 8];
        for (i, t) in table.iter_mut().enumerate() {
            *t = ((raw >> i) & 1) as usize;
        }
        let val = [(raw >> 8) & 1 == 1, (raw >> 9) & 1 == 1];
        let code = model_code(&table, &val);
        let mut minimal = true;
        'syms: for s in 0..16u8 {
            let (t2, v2) = apply_sym(
                &table,
                &val,
                s & 1 != 0,
                s & 2 != 0,
                s & 4 != 0,
                s & 8 != 0,
            );
            if model_code(&t2, &v2) < code {
                minimal = false;
                break 'syms;
            }
        }
        if minimal {
            out.push(build_two_state(&table, &val));
        }
    }
    out
}

fn build_two_state(table: &[usize; 8], val: &[bool; 2]) -> Cgm {
    let mut labels: Vec<(&str, &[&str])> = Vec::new();
    if val[0] {
        labels.push(("s0", &["p"]));
    }
    if val[1] {
        labels.push(("s1", &["p"]));
    }
    let t = *table;
    Cgm::build(
        &["1", "2"],
        &[&["a", "b"], &["c", "d"]],
        &["s0", "s1"],
        &labels,
        move |w, acts| t[w * 4 + acts[0] * 2 + acts[1]],
    )
    .with_declared_props(&["p"])
}

/// A seeded random model with the given shape. Both propositions `p` and
/// `q` get independently random extensions.
pub fn random_model(seed: u64, n_states: usize, n_agents: usize, n_actions: usize) -> Cgm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent_names: Vec<String> = (1..=n_agents).map(|i| i.to_string()).collect();
    let agents: Vec<&str> = agent_names.iter().map(|s| s.as_str()).collect();
    let action_names: Vec<Vec<String>> = (0..n_agents)
        .map(|i| (0..n_actions).map(|k| format!("x{i}{k}")).collect())
        .collect();
    let alphabets: Vec<Vec<&str>> = action_names
        .iter()
        .map(|a| a.iter().map(|s| s.as_str()).collect())
        .collect();
    let alphabet_refs: Vec<&[&str]> = alphabets.iter().map(|a| a.as_slice()).collect();
    let state_names: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
    let states: Vec<&str> = state_names.iter().map(|s| s.as_str()).collect();
    let mut labels: Vec<(&str, Vec<&str>)> = Vec::new();
    for s in &states {
        let mut ps = Vec::new();
        if rng.random_bool(0.5) {
            ps.push("p");
        }
        if rng.random_bool(0.5) {
            ps.push("q");
        }
        labels.push((s, ps));
    }
    // make sure both propositions are mentioned so lookups never fail
    if !labels.iter().any(|(_, ps)| ps.contains(&"p")) {
        labels[0].1.push("p");
    }
    if !labels.iter().any(|(_, ps)| ps.contains(&"q")) {
        labels[n_states - 1].1.push("q");
    }
    let label_refs: Vec<(&str, &[&str])> = labels.iter().map(|(s, ps)| (*s, ps.as_slice())).collect();
    let joint = n_actions.pow(n_agents as u32);
    let table: Vec<usize> = (0..n_states * joint)
        .map(|_| rng.random_range(0..n_states))
        .collect();
    Cgm::build(&agents, &alphabet_refs, &states, &label_refs, |w, acts| {
        let mut code = 0usize;
        for &a in acts {
            code = code * n_actions + a;
        }
        table[w * joint + code]
    })
}

/// A deterministic split-free formula corpus over agents `1`, `2`:
/// everything of modal depth ≤ 2 built from a fixed base, plus `count`
/// seeded random formulas of depth ≤ 3 (always including until and
/// dual-until forms). `props` are the atoms to draw from.
pub fn formula_corpus(props: &[&str], count: usize, seed: u64) -> Vec<Formula> {
    let coalitions: [&[&str]; 4] = [&[], &["1"], &["2"], &["1", "2"]];
    let p0 = props[0];
    let p1 = props[props.len() - 1];
    let atoms = [Formula::atom(p0), Formula::False, Formula::tt()];
    let mut depth1: Vec<Formula> = Vec::new();
    for c in coalitions {
        for a in &atoms {
            depth1.push(Formula::next(c, a.clone()));
            depth1.push(Formula::until(c, Formula::atom(p1), a.clone()));
            depth1.push(Formula::dual_until(c, Formula::atom(p1), a.clone()));
        }
    }
    let mut corpus: Vec<Formula> = Vec::new();
    corpus.extend(atoms.iter().cloned());
    corpus.push(Formula::atom(p1));
    corpus.extend(depth1.iter().cloned());
    // depth 2: one modal layer over a depth-1 formula, plus implications
    for c in coalitions {
        for f in depth1.iter().step_by(3) {
            corpus.push(Formula::next(c, f.clone()));
            corpus.push(Formula::until(c, Formula::atom(p0), f.clone()));
            corpus.push(Formula::dual_until(c, f.clone(), Formula::atom(p1)));
        }
    }
    for f in depth1.iter().step_by(4) {
        corpus.push(Formula::implies(f.clone(), Formula::atom(p0)));
        corpus.push(Formula::neg(f.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        corpus.push(random_formula(&mut rng, 3, props));
    }
    corpus
}

/// A random split-free formula of the given modal/boolean depth.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, props: &[&str]) -> Formula {
    let coalitions: [&[&str]; 4] = [&[], &["1"], &["2"], &["1", "2"]];
    if depth == 0 {
        return match rng.random_range(0..4) {
            0 => Formula::atom(props[0]),
            1 => Formula::atom(props[rng.random_range(0..props.len())]),
            2 => Formula::False,
            _ => Formula::tt(),
        };
    }
    let c = coalitions[rng.random_range(0..4)];
    match rng.random_range(0..5) {
        0 => Formula::implies(
            random_formula(rng, depth - 1, props),
            random_formula(rng, depth - 1, props),
        ),
        1 => Formula::neg(random_formula(rng, depth - 1, props)),
        2 => Formula::next(c, random_formula(rng, depth - 1, props)),
        3 => Formula::until(
            c,
            random_formula(rng, depth - 1, props),
            random_formula(rng, depth - 1, props),
        ),
        _ => Formula::dual_until(
            c,
            random_formula(rng, depth - 1, props),
            random_formula(rng, depth - 1, props),
        ),
    }
}

/// A random boolean combination of up to `modalities` one-step modalities
/// over the sub-agent vocabulary, for refinement instances. `subs` are the
/// sub-agent names in scope and `others` the surviving original agents.
pub fn random_onestep_body(
    rng: &mut ChaCha8Rng,
    subs: &[&str],
    others: &[&str],
    modalities: usize,
) -> Formula {
    let mut literals: Vec<Formula> = Vec::new();
    for _ in 0..modalities.max(1) {
        // coalition: random subset of subs ∪ others
        let mut coalition: Vec<&str> = Vec::new();
        for s in subs {
            if rng.random_bool(0.5) {
                coalition.push(s);
            }
        }
        for o in others {
            if rng.random_bool(0.3) {
                coalition.push(o);
            }
        }
        let arg = if rng.random_bool(0.8) {
            Formula::atom("p")
        } else {
            Formula::neg(Formula::atom("p"))
        };
        let modal = Formula::next(&coalition, arg);
        literals.push(if rng.random_bool(0.4) { Formula::neg(modal) } else { modal });
    }
    let mut body = literals.pop().unwrap();
    for lit in literals {
        body = if rng.random_bool(0.5) {
            Formula::and(body, lit)
        } else {
            Formula::or(body, lit)
        };
    }
    body
}
