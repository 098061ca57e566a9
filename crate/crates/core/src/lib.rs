//! Model checking and witness synthesis for ATL extended with the
//! strategic-ability refinement operator `split i -> {a,b,...}`.
//!
//! The crate is organised around the pipeline:
//!
//! * [`cgm`] — finite concurrent game models and their one-step operations,
//! * [`formula`] — AST, parser and flat-fragment analysis,
//! * [`atl`] — fixed-point model checking of split-free ATL plus a
//!   strategy-enumerating oracle,
//! * [`refinement`] — homomorphisms, refined models and the brute-force
//!   refinement oracle,
//! * [`onestep`] — one-step games and bounded satisfiability with witness
//!   extraction,
//! * [`flatmc`] — the flat-fragment reduction: forcing sets, translation,
//!   until elimination, assignment enumeration and orchestration,
//! * [`mod@format`] — the model and witness file formats,
//! * [`corpus`] — model/formula generators used by the validation suites.
//!
//! Data-parallel inner loops go through [`exec`], which falls back to
//! sequential iteration when the `parallel` feature is disabled.

pub mod atl;
pub mod cgm;
pub mod corpus;
pub mod exec;
pub mod flatmc;
pub mod format;
pub mod formula;
pub mod onestep;
pub mod refinement;
pub(crate) mod symmetry;

pub use atl::{
    brute_force_atl, check_atl, default_horizon, CheckError, Interval, MemorylessStrategyVector,
    OracleError,
};
pub use cgm::{
    validate_cgm, ActionVector, Cgm, CgmDesc, Coalition, Defect, InputError, StateSet,
};
pub use flatmc::{
    assignment_constraints, check_flat, check_flat_all, eliminate_until, enumerate_assignments,
    forcing_set, grand_constraint, oracle_check_flat_all, translate_tr_single, Assignment, Caps,
    ChainOutcome, ChainProblem, FlatError, FlatResult, ForcingSet, OneStepConstraint, Verdict,
};
pub use format::{
    load_model, load_model_str, model_to_string, parse_model, parse_witness, resolve_hom,
    resolve_witness, witness_to_string, FormatError, HomBlock, WitnessFile,
};
pub use onestep::{eval_atom, extract_hom, sat_onestep, OneStepGame, SatOutcome, SatRequest};
pub use formula::{
    classify_flat, flat_decompose, free_agents, parse_formula, FlatChain, FlatDecomposition,
    Flatness, Formula, ParseError,
};
pub use refinement::{
    apply_hom, brute_force_refine, enumerate_homs, validate_hom, HomDefect, HomError,
    Homomorphism, RefineOutcome, RefinedModel,
};
