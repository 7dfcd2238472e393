//! Distribution-invariant privatization (DIP).

pub mod audit;
pub mod baselines;
pub mod continualize;
pub mod dist;
pub mod error;
pub mod harness;
mod kdtree;
pub mod multivariate;
pub mod noise;
pub mod rng;
mod search;
mod special;
pub mod univariate;

pub use continualize::{
    continualize_discrete, continualize_mixed, continualized_edf, generalized_ceiling, CeilingMap, ContinualizedCdf,
    ContinualizedParametric, DiscreteSupport, InvertibleCdf, JumpSpec, MixedCeiling, MixedSpec, UniformPiece,
};
pub use dist::{DistKind, Family, ParametricDistribution};
pub use error::{DipError, Result};
pub use multivariate::{
    privatize_against_holdout, privatize_record, privatize_table, split_sample, BudgetPlan, Column, DataTable,
    HoldoutIndex, PrivatizeConfig, RunMetadata,
};
pub use noise::{convolved_cdf, sample_laplace, LaplaceScale};
pub use rng::{Domain, DrawSource, FixedDraws, RandomStream, Randomness, StreamSeed};
pub use univariate::{privatize_empirical, privatize_known, privatize_mixed_known, ColumnKind, UnivariatePrivatizer};
