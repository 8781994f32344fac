//! Protocol orchestration, stability indices, verdicts, equivariant selection
//! and quantifier-prefix classification.

mod classify;
mod config;
mod indices;
mod protocols;
mod report;
mod select;

pub use classify::{
    classify_prefix, Classification, ClassifierMode, FormulaPrefix, Pointclass, Polarity, Quantifier, Sort,
};
pub use config::{
    BarrierParams, HorizonParams, ImagingParams, IsingParams, PointerParams, PointerPreset, PolicySpec,
    ProtocolConfig, ProtocolKind,
};
pub use indices::{normalized_distance, sc, ssi, verdict, Thresholds, Verdict};
pub use protocols::{env_recoding, member_rng, smooth_phantom, MemberRun};
pub use report::{combine, run_protocol, MemberRecord, StabilityReport};
pub use select::{invariant_selection, EquivarianceReport};
