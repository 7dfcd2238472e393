//! Privatization of a single variable.
//!
//! Every value goes through `Z̃ = L(H(F(V) + e))` with `H = F⁻¹ ∘ G`, where
//! `V` is the continualized input, `e ~ Laplace(0, b)` and `L` the ceiling map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continualize::{
    continualize_mixed, edf_from_order_statistics, jittered_order_statistics, CeilingMap, ContinualizedCdf,
    ContinualizedParametric, DiscreteSupport, InvertibleCdf, MixedCeiling, MixedSpec,
};
use crate::dist::ParametricDistribution;
use crate::error::{DipError, Result};
use crate::noise::{convolved_cdf, LaplaceScale};
use crate::rng::{Domain, DrawSource, Randomness};

/// Declared kind of a data column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Discrete(DiscreteSupport),
    /// Expanded into `levels - 1` dummy coordinates by the multivariate code.
    Categorical(Vec<String>),
    Mixed(MixedCeiling),
}

impl ColumnKind {
    /// `V` for a raw value. Only discrete and mixed kinds consume a draw.
    pub fn continualize<R: Randomness + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        match self {
            ColumnKind::Continuous => {
                if z.is_finite() {
                    Ok(z)
                } else {
                    Err(DipError::OutsideSupport { value: z })
                }
            }
            ColumnKind::Discrete(s) => s.continualize(z, rng),
            ColumnKind::Mixed(m) => m.continualize(z, rng),
            ColumnKind::Categorical(_) => Err(DipError::param(
                "kind",
                "categorical columns must be expanded into dummy coordinates",
            )),
        }
    }

    pub fn ceiling_map(&self) -> CeilingMap {
        match self {
            ColumnKind::Discrete(s) => CeilingMap::GeneralizedCeiling(s.clone()),
            ColumnKind::Mixed(m) => CeilingMap::MixedL0(m.clone()),
            ColumnKind::Continuous | ColumnKind::Categorical(_) => CeilingMap::Identity,
        }
    }
}

/// `H(F(v) + e)` for one continualized value. The ceiling is not applied.
pub fn privatize_value<C, R>(v: f64, cdf: &C, scale: LaplaceScale, rng: &mut R) -> f64
where
    C: InvertibleCdf + ?Sized,
    R: Randomness + ?Sized,
{
    let w = cdf.cdf(v) + rng.laplace(scale);
    cdf.inverse(convolved_cdf(w, scale))
}

/// A forward CDF, its ceiling and the noise scale.
#[derive(Debug, Clone)]
pub struct UnivariatePrivatizer<C> {
    forward: C,
    kind: ColumnKind,
    ceiling: CeilingMap,
    scale: LaplaceScale,
}

impl<C: InvertibleCdf> UnivariatePrivatizer<C> {
    pub fn new(forward: C, kind: ColumnKind, scale: LaplaceScale) -> Self {
        let ceiling = kind.ceiling_map();
        Self {
            forward,
            kind,
            ceiling,
            scale,
        }
    }

    pub fn forward(&self) -> &C {
        &self.forward
    }

    pub fn scale(&self) -> LaplaceScale {
        self.scale
    }

    /// Privatize one raw value with its own stream: continualization draw
    /// first (if any), then the Laplace draw.
    pub fn privatize_one<R: Randomness + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        let v = self.kind.continualize(z, rng)?;
        self.ceiling.apply(privatize_value(v, &self.forward, self.scale, rng))
    }

    /// Privatize every value; record `i` uses stream `(Privatize, i, coord)`.
    pub fn privatize_all<S: DrawSource>(&self, values: &[f64], draws: &S, coord: u64) -> Result<Vec<f64>> {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &z)| {
                let mut rng = draws.stream(Domain::Privatize, i as u64, coord);
                self.privatize_one(z, &mut rng)
            })
            .collect()
    }
}

enum KnownForward {
    Continuous(ParametricDistribution),
    Discrete(ContinualizedParametric),
}

impl InvertibleCdf for KnownForward {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            KnownForward::Continuous(d) => InvertibleCdf::cdf(d, x),
            KnownForward::Discrete(c) => c.cdf(x),
        }
    }

    fn inverse(&self, u: f64) -> f64 {
        match self {
            KnownForward::Continuous(d) => InvertibleCdf::inverse(d, u),
            KnownForward::Discrete(c) => c.inverse(u),
        }
    }
}

/// DIP with a known distribution. The output has exactly the distribution
/// of `dist`.
pub fn privatize_known<S: DrawSource>(
    values: &[f64],
    dist: &ParametricDistribution,
    epsilon: f64,
    draws: &S,
) -> Result<Vec<f64>> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    if let Some(&z) = values.iter().find(|&&z| !dist.in_support(z)) {
        return Err(DipError::OutsideSupport { value: z });
    }
    let privatizer = match dist.discrete_support() {
        None => UnivariatePrivatizer::new(KnownForward::Continuous(*dist), ColumnKind::Continuous, scale),
        Some(support) => UnivariatePrivatizer::new(
            KnownForward::Discrete(ContinualizedParametric::new(*dist)?),
            ColumnKind::Discrete(support),
            scale,
        ),
    };
    privatizer.privatize_all(values, draws, 0)
}

/// DIP with a known mixed distribution.
pub fn privatize_mixed_known<S: DrawSource>(
    values: &[f64],
    spec: &MixedSpec,
    epsilon: f64,
    draws: &S,
) -> Result<Vec<f64>> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    let cdf = continualize_mixed(spec)?;
    let CeilingMap::MixedL0(l0) = cdf.ceiling().clone() else {
        unreachable!("mixed continualization carries an L0 ceiling")
    };
    UnivariatePrivatizer::new(cdf, ColumnKind::Mixed(l0), scale).privatize_all(values, draws, 0)
}

/// Continualize the hold-out values of one coordinate with streams
/// `(Holdout, j, coord)`.
pub fn continualize_holdout<S: DrawSource>(
    holdout: &[f64],
    kind: &ColumnKind,
    draws: &S,
    coord: u64,
) -> Result<Vec<f64>> {
    holdout
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut rng = draws.stream(Domain::Holdout, j as u64, coord);
            kind.continualize(z, &mut rng)
        })
        .collect()
}

/// `Ĉ` of a hold-out sample of the given kind, with the kind's ceiling.
pub fn holdout_cdf<S: DrawSource>(
    holdout: &[f64],
    kind: &ColumnKind,
    draws: &S,
    coord: u64,
) -> Result<ContinualizedCdf> {
    if holdout.len() < 2 {
        return Err(DipError::HoldoutTooSmall {
            needed: 2,
            got: holdout.len(),
        });
    }
    let v = continualize_holdout(holdout, kind, draws, coord)?;
    let d = jittered_order_statistics(&v)?;
    Ok(edf_from_order_statistics(d).with_ceiling(kind.ceiling_map()))
}

/// DIP with the distribution estimated from a hold-out sample.
pub fn privatize_empirical<S: DrawSource>(
    values: &[f64],
    holdout: &[f64],
    epsilon: f64,
    kind: &ColumnKind,
    draws: &S,
) -> Result<Vec<f64>> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    let cdf = holdout_cdf(holdout, kind, draws, 0)?;
    UnivariatePrivatizer::new(cdf, kind.clone(), scale).privatize_all(values, draws, 0)
}
