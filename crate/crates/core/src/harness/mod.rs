//! Experiment harness: population generation, dataset assembly,
//! impairment sweeps, the domain-adaptation and scalability experiments,
//! and report serialization.

mod dataset;
mod experiments;
mod population;
mod report;
mod sweeps;

pub use dataset::{
    build_dataset, build_feature, Representation, SynthesisConfig, FEATURE_LEN,
    VFDT_FEATURE_GAIN,
};
pub use experiments::{paired_split, run_domain_adaptation, run_scalability, ExperimentSpec};
pub use population::{generate_population, PopulationRanges};
pub use report::{CellReport, ExperimentReport, ReportMeta};
pub use sweeps::{
    cfo_trace_spectrum_bin, run_sweep, SweepBand, SweepKind, SweepReport, SweepSettings,
};
