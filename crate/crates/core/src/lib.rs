//! MUSIC imaging of sparse objects from noisy multistatic data, with the
//! compressed-sensing analysis that certifies it (coherence, restricted isometry
//! constants, Γ_S, noise margins) and BPDN/OMP baselines for comparison.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene`]: grids, object configurations, sampling schemes, noise.
//! - [`forward`]: sensing matrices and data matrices.
//! - [`music`]: spectral decomposition, imaging function, support recovery.
//! - [`analysis`]: coherence, RIC, Γ_S, perturbation bounds and noise margins.
//! - [`solvers`]: complex BPDN and OMP with their error-bound checkers.
//! - [`spectral`]: multi-tone spectral estimation and source localization.
//! - [`harness`]: seeded Monte Carlo sweeps and their exports.

pub mod analysis;
pub mod error;
pub mod forward;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod music;
pub mod rng;
pub mod scene;
pub mod solvers;
pub mod spectral;

pub use analysis::{
    BoundEntry, BudgetReport, CoherenceReport, GammaReport, PerturbationReport, RicEstimate, RicMethod, StabilityBudget,
};
pub use error::{Error, Result};
pub use forward::{DataMatrix, DataMode, FoldyLaxSystem, SensingPair};
pub use harness::{ExperimentConfig, Method, SuccessCurve, TrialOutcome};
pub use linalg::{CMat, CVec, C64};
pub use music::{ImagingResult, RankRule, SpectralDecomposition, ThresholdRule};
pub use scene::{Grid, NoiseSpec, SamplingScheme, Scene};
pub use solvers::{BpdnOptions, SparseProblem, SparseSolution};
pub use spectral::{CovarianceTriple, SignalModel};
