//! Estimation of the center of symmetry of a symmetric log-concave density.
//!
//! * [`lcmle`]: weighted log-concave maximum likelihood and piecewise-linear
//!   log-densities.
//! * [`symlc`]: symmetric density and score estimates (partial MLE,
//!   geometric-mean and smoothed symmetrizations).
//! * [`onestep`]: one-step estimators, Fisher information estimates and
//!   Wald intervals.
//! * [`profile_mle`]: the joint MLE of center and density by grid search.
//! * [`refdists`]: reference families for simulation.
//! * [`comparators`]: Stone's and Beran's estimators with tuning tables.
//! * [`simharness`]: Monte-Carlo experiments and tuning searches.

pub mod comparators;
pub mod error;
pub mod lcmle;
pub mod normal;
pub mod onestep;
pub mod profile_mle;
pub mod quad;
pub mod refdists;
pub mod simharness;
pub mod symlc;

pub use error::{Error, Result};
pub use lcmle::{
    fit_logconcave, fit_weighted_logconcave, FitConfig, LogConcaveFit, WeightedSample,
};
pub use onestep::{onestep_estimate, LocationEstimate, OneStepConfig};
pub use profile_mle::{fit_full_mle, GridConfig, MleEstimate};
pub use refdists::{Family, ReferenceDistribution};
pub use symlc::{ScoreEstimate, ScoreKind, SymmetricDensity};
