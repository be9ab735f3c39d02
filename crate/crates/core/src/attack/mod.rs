//! Profiled attack: targets, point selection, classifiers, voting and key
//! recovery.

pub mod kvc;
pub mod profile;
pub mod recover;
pub mod solve;
pub mod target;
pub mod vote;

pub use kvc::{kvc_select, KvcSelection};
pub use profile::{
    fit_bank, labels, run_profiling_attack, ClassifierBank, Method, Preprocess, ProfileConfig,
    ProfiledClassifier, ProfilingResult,
};
pub use recover::{
    recover_full_key, AttackResult, BytePredictor, KeystreamCheck, NoisyOracle, OraclePredictor,
    RecoverConfig,
};
pub use solve::{solve_word, Recurrence};
pub use target::{derive_label, feedback_targets, ByteHalf, Lfsr, TargetSpec, TargetWord};
pub use vote::{majority_vote_prob, mtd, plurality, Mtd, Vote, MTD_TARGET};
