//! Continualization of discrete and mixed CDFs.
//!
//! A value `z` at a jump `a_k` is spread uniformly over the gap to its left
//! neighbour, `V = z - U`, which turns the step CDF into a piecewise-linear,
//! strictly increasing one. The matching ceiling map sends a continualized
//! value back to the original support.

use serde::{Deserialize, Serialize};

use crate::dist::ParametricDistribution;
use crate::error::{DipError, Result};
use crate::rng::Randomness;
use crate::search::BlockIndex;
use crate::special::next_up;

/// Relative offset used instead of the artificial anchor when inverting at 0.
const ANCHOR_OFFSET: f64 = 1e-12;
/// Relative jitter separating tied hold-out values.
const TIE_JITTER: f64 = 1e-9;

/// A CDF that can be evaluated everywhere and inverted on `[0, 1]`.
pub trait InvertibleCdf: Sync {
    fn cdf(&self, x: f64) -> f64;

    /// Inverse for `u` in `[0, 1]`; endpoints map to finite values.
    fn inverse(&self, u: f64) -> f64;
}

/// Countable, strictly increasing support of a discrete variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiscreteSupport {
    Points(Vec<f64>),
    /// `origin + k * step` for `k = 0, 1, ...` (optionally `count` points).
    Lattice {
        origin: f64,
        step: f64,
        count: Option<u64>,
    },
}

impl DiscreteSupport {
    pub fn points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(DipError::Empty("support"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(DipError::param("support", "points must be finite"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DipError::NonMonotoneSupport);
        }
        Ok(DiscreteSupport::Points(points))
    }

    /// Panics on a non-positive step or a zero count; only used with constants.
    pub fn lattice(origin: f64, step: f64, count: Option<u64>) -> Self {
        assert!(step > 0.0 && step.is_finite() && origin.is_finite());
        assert!(count != Some(0));
        DiscreteSupport::Lattice { origin, step, count }
    }

    /// Number of points, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        match self {
            DiscreteSupport::Points(p) => Some(p.len()),
            DiscreteSupport::Lattice { count, .. } => count.map(|c| c as usize),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.len().is_some()
    }

    pub fn point(&self, k: usize) -> Option<f64> {
        match self {
            DiscreteSupport::Points(p) => p.get(k).copied(),
            DiscreteSupport::Lattice { origin, step, count } => match count {
                Some(c) if k as u64 >= *c => None,
                _ => Some(origin + k as f64 * step),
            },
        }
    }

    pub fn min(&self) -> f64 {
        self.point(0).expect("support is non-empty")
    }

    pub fn max(&self) -> Option<f64> {
        self.len().map(|n| self.point(n - 1).expect("in range"))
    }

    /// `a_0 = a_1 - 1`, the artificial left neighbour of the smallest point.
    pub fn anchor(&self) -> f64 {
        self.min() - 1.0
    }

    /// Left end of the continualization gap of point `k`.
    pub fn left_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.anchor()
        } else {
            self.point(k - 1).expect("in range")
        }
    }

    /// Index of the support point equal to `x`, up to a relative `1e-9`
    /// tolerance for values that went through decimal text.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if !x.is_finite() {
            return None;
        }
        let close = |a: f64, tol: f64| a == x || (a - x).abs() <= tol;
        match self {
            DiscreteSupport::Points(p) => {
                let i = p.partition_point(|&a| a < x);
                let tol = 1e-9 * x.abs().max(1.0);
                [i.checked_sub(1), Some(i)]
                    .into_iter()
                    .flatten()
                    .find(|&j| j < p.len() && close(p[j], tol))
            }
            DiscreteSupport::Lattice { origin, step, .. } => {
                let r = ((x - origin) / step).round();
                if r < 0.0 {
                    return None;
                }
                let k = r as usize;
                self.point(k).filter(|&a| close(a, 1e-9 * step)).map(|_| k)
            }
        }
    }

    /// Index of `inf{a_k : a_k >= v}`.
    pub fn ceiling_index(&self, v: f64) -> Result<usize> {
        if v.is_nan() {
            return Err(DipError::OutsideSupport { value: v });
        }
        if let Some(max) = self.max() {
            if v > max {
                return Err(DipError::AboveSupport { value: v, max });
            }
        }
        match self {
            DiscreteSupport::Points(p) => Ok(p.partition_point(|&a| a < v)),
            DiscreteSupport::Lattice { origin, step, .. } => {
                if !v.is_finite() {
                    return Err(DipError::OutsideSupport { value: v });
                }
                let mut k = ((v - origin) / step).ceil().max(0.0) as usize;
                while k > 0 && self.point(k - 1).is_some_and(|a| a >= v) {
                    k -= 1;
                }
                while self.point(k).is_some_and(|a| a < v) {
                    k += 1;
                }
                Ok(k)
            }
        }
    }

    /// Generalized ceiling `inf{a_k : a_k >= v}`.
    pub fn ceiling(&self, v: f64) -> Result<f64> {
        let k = self.ceiling_index(v)?;
        Ok(self.point(k).expect("ceiling index in range"))
    }

    /// Spread a support value over its gap: `V = a_k - U (a_k - a_{k-1})`
    /// with `U ~ Uniform[0, 1)`, so `V` lies in `(a_{k-1}, a_k]`.
    pub fn continualize<R: Randomness + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        let k = self.index_of(z).ok_or(DipError::OutsideSupport { value: z })?;
        let hi = self.point(k).expect("in range");
        let lo = self.left_of(k);
        let v = hi - rng.unit() * (hi - lo);
        Ok(if v <= lo { next_up(lo) } else { v })
    }
}

/// Inverse `inf{a_k : a_k >= v}` over an explicit point set.
pub fn generalized_ceiling(v: f64, support: &[f64]) -> Result<f64> {
    DiscreteSupport::points(support.to_vec())?.ceiling(v)
}

/// Jump points and their masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl JumpSpec {
    /// Masses may sum to less than one (mixed distributions).
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(DipError::DimensionMismatch(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        DiscreteSupport::points(points.clone())?;
        if masses.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
            return Err(DipError::NonPositiveMass);
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(DipError::MassNotNormalized(total));
        }
        Ok(Self { points, masses })
    }

    /// Atoms of a discrete family. Unbounded supports are cut once the
    /// remaining tail mass drops below `tail`; the last atom absorbs it.
    pub fn from_distribution(dist: &ParametricDistribution, tail: f64) -> Result<Self> {
        let support = dist
            .discrete_support()
            .ok_or_else(|| DipError::param("distribution", "must be discrete"))?;
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut prev = 0.0;
        for k in 0.. {
            let Some(a) = support.point(k) else { break };
            let c = dist.cdf(a);
            let last = support.point(k + 1).is_none() || 1.0 - c < tail;
            let c = if last { 1.0 } else { c };
            if c > prev {
                points.push(a);
                masses.push(c - prev);
            }
            prev = c;
            if last {
                break;
            }
        }
        Self::new(points, masses)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn anchor(&self) -> f64 {
        self.points[0] - 1.0
    }

    pub fn support(&self) -> DiscreteSupport {
        DiscreteSupport::Points(self.points.clone())
    }

    /// Continualize one support value, see [`DiscreteSupport::continualize`].
    pub fn continualize_value<R: Randomness + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        self.support().continualize(z, rng)
    }
}

/// Maps continualized values back to the original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CeilingMap {
    Identity,
    GeneralizedCeiling(DiscreteSupport),
    MixedL0(MixedCeiling),
}

impl CeilingMap {
    pub fn apply(&self, v: f64) -> Result<f64> {
        match self {
            CeilingMap::Identity => Ok(v),
            CeilingMap::GeneralizedCeiling(s) => s.ceiling(v),
            CeilingMap::MixedL0(m) => Ok(m.l0(v)),
        }
    }
}

/// Piecewise-linear CDF through `(knots, values)`, 0 left of the first knot
/// and 1 right of the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinualizedCdf {
    knots: Vec<f64>,
    values: Vec<f64>,
    ceiling: CeilingMap,
    // Some(m) when values[k] = k/m, which allows exact arithmetic on the grid
    steps: Option<usize>,
    #[serde(skip)]
    search: BlockIndex,
}

impl ContinualizedCdf {
    /// Knots must be strictly increasing, values non-decreasing from 0 to 1.
    pub fn from_knots(knots: Vec<f64>, values: Vec<f64>, ceiling: CeilingMap) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(DipError::DimensionMismatch(format!(
                "{} knots and {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) || knots.iter().any(|x| !x.is_finite()) {
            return Err(DipError::NonMonotoneSupport);
        }
        if values.windows(2).any(|w| w[0] > w[1]) || values[0] != 0.0 {
            return Err(DipError::param("values", "must be non-decreasing from 0"));
        }
        let last = *values.last().expect("non-empty");
        if (last - 1.0).abs() > 1e-9 {
            return Err(DipError::MassNotNormalized(last));
        }
        let mut values = values;
        *values.last_mut().expect("non-empty") = 1.0;
        Ok(Self {
            search: BlockIndex::new(&knots),
            knots,
            values,
            ceiling,
            steps: None,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ceiling(&self) -> &CeilingMap {
        &self.ceiling
    }

    pub fn with_ceiling(mut self, ceiling: CeilingMap) -> Self {
        self.ceiling = ceiling;
        self
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        *self.knots.last().expect("non-empty")
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if x <= self.knots[0] {
            return 0.0;
        }
        let k = self.search.count_below(&self.knots, x);
        if k == self.knots.len() {
            return 1.0;
        }
        let (d0, d1) = (self.knots[k - 1], self.knots[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if x == d1 {
            return v1;
        }
        let t = (x - d0) / (d1 - d0);
        match self.steps {
            Some(m) => ((k - 1) as f64 + t) / m as f64,
            None => v0 + (v1 - v0) * t,
        }
    }

    /// Inverse on `[0, 1]`. `0` maps just right of the first knot and `1` to
    /// the last knot, so the artificial anchor is never returned.
    pub fn inverse(&self, u: f64) -> f64 {
        let (lo, hi) = (self.lower(), self.upper());
        if u.is_nan() || u <= 0.0 {
            return lo + ANCHOR_OFFSET * (hi - lo);
        }
        if u >= 1.0 {
            return hi;
        }
        let k = self.value_index(u).max(1);
        let (d0, d1) = (self.knots[k - 1], self.knots[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if u == v1 {
            return d1;
        }
        let t = match self.steps {
            Some(m) => u * m as f64 - (k - 1) as f64,
            None => (u - v0) / (v1 - v0),
        };
        let x = d0 + (d1 - d0) * t;
        x.clamp(next_up(d0), d1)
    }

    /// The segment `(d_{k-1}, d_k]` containing `x`, if any.
    pub fn segment(&self, x: f64) -> Option<usize> {
        if x <= self.knots[0] || x > self.upper() {
            return None;
        }
        Some(self.search.count_below(&self.knots, x))
    }

    // values.partition_point(|&v| v < u), computed directly on a k/m grid
    fn value_index(&self, u: f64) -> usize {
        let Some(m) = self.steps else {
            return self.values.partition_point(|&v| v < u);
        };
        let mut k = ((u * m as f64).ceil().max(0.0) as usize).min(m);
        while k > 0 && self.values[k - 1] >= u {
            k -= 1;
        }
        while k <= m && self.values[k] < u {
            k += 1;
        }
        k
    }
}

impl InvertibleCdf for ContinualizedCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.evaluate(x)
    }

    fn inverse(&self, u: f64) -> f64 {
        ContinualizedCdf::inverse(self, u)
    }
}

/// Piecewise-linear `F_V` of a finite jump specification.
pub fn continualize_discrete(spec: &JumpSpec) -> Result<ContinualizedCdf> {
    let total = spec.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DipError::MassNotNormalized(total));
    }
    let mut knots = Vec::with_capacity(spec.points.len() + 1);
    let mut values = Vec::with_capacity(spec.points.len() + 1);
    knots.push(spec.anchor());
    values.push(0.0);
    let mut acc = 0.0;
    for (&a, &p) in spec.points.iter().zip(&spec.masses) {
        acc += p;
        knots.push(a);
        values.push(acc.min(1.0));
    }
    ContinualizedCdf::from_knots(knots, values, CeilingMap::GeneralizedCeiling(spec.support()))
}

/// Sorted hold-out values made strictly increasing. Ties are separated by
/// `1e-9 * range * rank-within-tie`.
pub fn jittered_order_statistics(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(DipError::param("hold-out", "values must be finite"));
    }
    let mut d = values.to_vec();
    d.sort_by(f64::total_cmp);
    jitter_sorted(&mut d);
    Ok(d)
}

pub(crate) fn jitter_sorted(d: &mut [f64]) {
    if d.is_empty() {
        return;
    }
    let range = d[d.len() - 1] - d[0];
    let unit = TIE_JITTER * if range > 0.0 { range } else { 1.0 };
    let mut prev_raw = d[0];
    let mut tie_rank = 0usize;
    for i in 1..d.len() {
        let raw = d[i];
        if raw == prev_raw {
            tie_rank += 1;
            d[i] = raw + tie_rank as f64 * unit;
        } else {
            tie_rank = 0;
        }
        prev_raw = raw;
        if d[i] <= d[i - 1] {
            d[i] = next_up(d[i - 1]);
        }
    }
}

/// The continualized edf `Ĉ` of a (continualized) hold-out sample: knots
/// `d_0 = d_1 - 1 < d_1 < ... < d_m` with values `k/m`.
pub fn continualized_edf(holdout: &[f64]) -> Result<ContinualizedCdf> {
    let m = holdout.len();
    if m < 2 {
        return Err(DipError::HoldoutTooSmall { needed: 2, got: m });
    }
    let d = jittered_order_statistics(holdout)?;
    Ok(edf_from_order_statistics(d))
}

/// `Ĉ` from values that are already sorted and strictly increasing.
pub(crate) fn edf_from_order_statistics(d: Vec<f64>) -> ContinualizedCdf {
    let m = d.len();
    let mut knots = Vec::with_capacity(m + 1);
    knots.push(d[0] - 1.0);
    knots.extend(d);
    let values = (0..=m).map(|k| k as f64 / m as f64).collect();
    ContinualizedCdf {
        search: BlockIndex::new(&knots),
        knots,
        values,
        ceiling: CeilingMap::Identity,
        steps: Some(m),
    }
}

/// Continualized `F_V` of a known discrete family, possibly with unbounded
/// support.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinualizedParametric {
    dist: ParametricDistribution,
    support: DiscreteSupport,
}

impl ContinualizedParametric {
    pub fn new(dist: ParametricDistribution) -> Result<Self> {
        let support = dist
            .discrete_support()
            .ok_or_else(|| DipError::param("distribution", "must be discrete"))?;
        Ok(Self { dist, support })
    }

    pub fn support(&self) -> &DiscreteSupport {
        &self.support
    }

    pub fn distribution(&self) -> &ParametricDistribution {
        &self.dist
    }

    fn cdf_below(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.dist.cdf(self.support.point(k - 1).expect("in range"))
        }
    }
}

impl InvertibleCdf for ContinualizedParametric {
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.support.anchor() {
            return 0.0;
        }
        let Ok(k) = self.support.ceiling_index(x) else {
            return 1.0;
        };
        let hi = self.support.point(k).expect("in range");
        let f_hi = self.dist.cdf(hi);
        if x == hi {
            return f_hi;
        }
        let lo = self.support.left_of(k);
        let f_lo = self.cdf_below(k);
        f_lo + (f_hi - f_lo) * ((x - lo) / (hi - lo))
    }

    fn inverse(&self, u: f64) -> f64 {
        if u.is_nan() || u <= 0.0 {
            return self.support.anchor() + ANCHOR_OFFSET;
        }
        if u >= 1.0 {
            if let Some(max) = self.support.max() {
                return max;
            }
        }
        let u = u.min(1.0 - f64::EPSILON / 2.0);
        let a = self.dist.quantile(u);
        let k = self.support.index_of(a).expect("quantile lies in support");
        let lo = self.support.left_of(k);
        let (f_lo, f_hi) = (self.cdf_below(k), self.dist.cdf(a));
        if u >= f_hi || f_hi <= f_lo {
            return a;
        }
        let x = lo + (a - lo) * ((u - f_lo) / (f_hi - f_lo));
        x.clamp(next_up(lo), a)
    }
}

/// Known continuous families are their own continuous CDF.
impl InvertibleCdf for ParametricDistribution {
    fn cdf(&self, x: f64) -> f64 {
        ParametricDistribution::cdf(self, x)
    }

    fn inverse(&self, u: f64) -> f64 {
        let u = if u.is_nan() { 0.5 } else { u };
        self.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }
}

/// Uniform mass `mass` on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPiece {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// A mixed distribution: finitely many atoms plus uniform continuous pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSpec {
    pub jumps: JumpSpec,
    pub pieces: Vec<UniformPiece>,
}

/// Jump table of a mixed variable. The jump `a_j` with shift index `k`
/// occupies `[a_j + k - 1, a_j + k]` after continualization; continuous
/// values between `a_k` and `a_{k+1}` are shifted by `k`. Index 0 is the
/// first non-negative jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedCeiling {
    points: Vec<f64>,
    first_shift: i64,
}

impl MixedCeiling {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        DiscreteSupport::points(points.clone())?;
        let negative = points.partition_point(|&a| a < 0.0);
        Ok(Self {
            points,
            first_shift: -(negative as i64),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn shift(&self, j: usize) -> f64 {
        (self.first_shift + j as i64) as f64
    }

    /// Shift applied to continuous values between jump `j - 1` and jump `j`
    /// (`j = 0` is everything below the first jump).
    fn region_shift(&self, j: usize) -> f64 {
        (self.first_shift + j as i64 - 1) as f64
    }

    /// `V = z + k - U` at a jump, `V = z + k` between jumps.
    pub fn continualize<R: Randomness + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        if !z.is_finite() {
            return Err(DipError::OutsideSupport { value: z });
        }
        let j = self.points.partition_point(|&a| a < z);
        if j < self.points.len() && self.points[j] == z {
            let top = z + self.shift(j);
            let v = top - rng.unit();
            let lo = top - 1.0;
            return Ok(if v <= lo { next_up(lo) } else { v });
        }
        Ok(z + self.region_shift(j))
    }

    /// `L0`: `[a_k + k - 1, a_k + k] -> a_k`, `(a_k + k, a_{k+1} + k) -> v - k`.
    pub fn l0(&self, v: f64) -> f64 {
        // first jump whose interval top is >= v
        let (mut lo, mut hi) = (0, self.points.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.points[mid] + self.shift(mid) < v {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        if j < self.points.len() && v >= self.points[j] + self.shift(j) - 1.0 {
            return self.points[j];
        }
        v - self.region_shift(j)
    }
}

/// Continualized CDF of a mixed specification, with the `L0` ceiling.
pub fn continualize_mixed(spec: &MixedSpec) -> Result<ContinualizedCdf> {
    let ceiling = MixedCeiling::new(spec.jumps.points().to_vec())?;
    let mut pieces: Vec<UniformPiece> = Vec::new();
    for p in &spec.pieces {
        if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
            return Err(DipError::param("piece", "need finite lo < hi"));
        }
        if !(p.mass > 0.0) {
            return Err(DipError::NonPositiveMass);
        }
        // split at interior jumps so every part has a single shift
        let mut cuts = vec![p.lo];
        cuts.extend(spec.jumps.points().iter().filter(|&&a| a > p.lo && a < p.hi));
        cuts.push(p.hi);
        for w in cuts.windows(2) {
            pieces.push(UniformPiece {
                lo: w[0],
                hi: w[1],
                mass: p.mass * (w[1] - w[0]) / (p.hi - p.lo),
            });
        }
    }
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    if let Some(w) = pieces.windows(2).find(|w| w[1].lo < w[0].hi) {
        return Err(DipError::OverlappingMass(format!(
            "pieces ({}, {}) and ({}, {}) overlap",
            w[0].lo, w[0].hi, w[1].lo, w[1].hi
        )));
    }
    let total = spec.jumps.total_mass() + spec.pieces.iter().map(|p| p.mass).sum::<f64>();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DipError::MassNotNormalized(total));
    }

    // (lo, hi, mass) segments in the shifted space
    let mut segments: Vec<(f64, f64, f64)> = Vec::new();
    for p in &pieces {
        let j = ceiling.points.partition_point(|&a| a < p.hi);
        let s = ceiling.region_shift(j);
        segments.push((p.lo + s, p.hi + s, p.mass));
    }
    for (j, (&a, &m)) in spec.jumps.points().iter().zip(spec.jumps.masses()).enumerate() {
        let top = a + ceiling.shift(j);
        segments.push((top - 1.0, top, m));
    }
    segments.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut knots = vec![segments[0].0];
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for &(lo, hi, mass) in &segments {
        let last = *knots.last().expect("non-empty");
        if lo > last {
            knots.push(lo);
            values.push(acc);
        }
        acc += mass;
        knots.push(hi);
        values.push(acc.min(1.0));
    }
    ContinualizedCdf::from_knots(knots, values, CeilingMap::MixedL0(ceiling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{FixedDraws, RandomStream};
    use proptest::prelude::*;

    fn bernoulli_spec() -> JumpSpec {
        JumpSpec::new(vec![0.0, 1.0], vec![0.9, 0.1]).unwrap()
    }

    #[test]
    fn bernoulli_f_v() {
        let f = continualize_discrete(&bernoulli_spec()).unwrap();
        assert_eq!(f.evaluate(0.0), 0.9);
        assert_eq!(f.evaluate(1.0), 1.0);
        assert!((f.evaluate(-0.5) - 0.45).abs() < 1e-15);
        assert_eq!(f.evaluate(-1.0), 0.0);
        assert_eq!(f.evaluate(3.0), 1.0);
    }

    #[test]
    fn single_point_spreads_uniformly() {
        let spec = JumpSpec::new(vec![5.0], vec![1.0]).unwrap();
        let f = continualize_discrete(&spec).unwrap();
        assert!((f.evaluate(4.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            JumpSpec::new(vec![1.0, 0.0], vec![0.5, 0.5]),
            Err(DipError::NonMonotoneSupport)
        );
        assert_eq!(
            JumpSpec::new(vec![0.0, 1.0], vec![1.0, 0.0]),
            Err(DipError::NonPositiveMass)
        );
        let partial = JumpSpec::new(vec![0.0], vec![0.5]).unwrap();
        assert!(continualize_discrete(&partial).is_err());
    }

    #[test]
    fn agreement_at_jumps() {
        let dist = ParametricDistribution::binomial(5, 0.5).unwrap();
        let spec = JumpSpec::from_distribution(&dist, 0.0).unwrap();
        let f = continualize_discrete(&spec).unwrap();
        let mut acc = 0.0;
        for (&a, &p) in spec.points().iter().zip(spec.masses()) {
            acc += p;
            assert!((f.evaluate(a) - acc).abs() <= 1e-12);
            assert!((f.evaluate(a) - dist.cdf(a)).abs() <= 1e-12);
        }
    }

    #[test]
    fn continualize_value_intervals() {
        let spec = bernoulli_spec();
        let mut rng = RandomStream::new(3);
        for _ in 0..1000 {
            let v1 = spec.continualize_value(1.0, &mut rng).unwrap();
            assert!(v1 > 0.0 && v1 <= 1.0);
            let v0 = spec.continualize_value(0.0, &mut rng).unwrap();
            assert!(v0 > -1.0 && v0 <= 0.0);
        }
        assert_eq!(
            spec.continualize_value(
                1.0,
                &mut FixedDraws {
                    unit: 0.0,
                    laplace: 0.0
                }
            )
            .unwrap(),
            1.0
        );
        assert!(spec.continualize_value(0.5, &mut rng).is_err());
    }

    #[test]
    fn ceiling_examples() {
        assert_eq!(generalized_ceiling(0.3, &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(generalized_ceiling(-0.2, &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(generalized_ceiling(1.0, &[0.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(
            generalized_ceiling(1.5, &[0.0, 1.0]),
            Err(DipError::AboveSupport { .. })
        ));
    }

    #[test]
    fn lattice_ceiling_is_exact_at_points() {
        let s = DiscreteSupport::lattice(0.5, 0.5, Some(10));
        for k in 0..10 {
            let a = s.point(k).unwrap();
            assert_eq!(s.ceiling(a).unwrap(), a);
            assert_eq!(s.ceiling(next_up(s.left_of(k))).unwrap(), a);
        }
        assert!(s.ceiling(5.0 + 1e-9).is_err());
        let unbounded = DiscreteSupport::lattice(0.0, 1.0, None);
        assert_eq!(unbounded.ceiling(1e6 + 0.1).unwrap(), 1e6 + 1.0);
        assert_eq!(unbounded.index_of(3.0000000001), Some(3));
        assert_eq!(unbounded.index_of(2.5), None);
        assert_eq!(unbounded.index_of(-1.0), None);
    }

    #[test]
    fn continualized_values_match_f_v() {
        // DKW at 99%: sqrt(ln(2/0.01) / (2n)) < 0.01 for n = 1e5
        let spec = JumpSpec::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.2, 0.3]).unwrap();
        let f = continualize_discrete(&spec).unwrap();
        let mut rng = RandomStream::new(17);
        let n = 100_000;
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                let z = if u < 0.5 {
                    0.0
                } else if u < 0.7 {
                    1.0
                } else {
                    3.0
                };
                spec.continualize_value(z, &mut rng).unwrap()
            })
            .collect();
        v.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for (i, &x) in v.iter().enumerate() {
            let c = f.evaluate(x);
            ks = ks.max((i as f64 + 1.0) / n as f64 - c).max(c - i as f64 / n as f64);
        }
        assert!(ks <= 0.01, "ks {ks}");
    }

    #[test]
    fn edf_examples() {
        let c = continualized_edf(&[9.0, 2.0, 5.0]).unwrap();
        assert!((c.evaluate(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.evaluate(3.5) - 0.5).abs() < 1e-15);
        assert_eq!(c.evaluate(9.0), 1.0);
        assert_eq!(c.evaluate(1.0), 0.0);
        assert_eq!(c.evaluate(0.0), 0.0);
        assert_eq!(c.evaluate(12.0), 1.0);
        assert_eq!(c.lower(), 1.0);
        assert_eq!(c.inverse(0.5), 3.5);
        assert_eq!(c.inverse(1.0), 9.0);
        assert!(c.inverse(0.0) > 1.0 && c.inverse(0.0) < 1.0 + 1e-9);
        assert!(matches!(
            continualized_edf(&[1.0]),
            Err(DipError::HoldoutTooSmall { .. })
        ));
    }

    #[test]
    fn edf_knots_are_exact_and_invertible() {
        let mut rng = RandomStream::new(9);
        let h: Vec<f64> = (0..200).map(|_| rng.unit() * 10.0 - 3.0).collect();
        let c = continualized_edf(&h).unwrap();
        for (k, &d) in c.knots().iter().enumerate() {
            assert_eq!(c.evaluate(d), c.values()[k]);
        }
        for i in 1..1000 {
            let x = c.lower() + (c.upper() - c.lower()) * i as f64 / 1000.0;
            assert!((c.inverse(c.evaluate(x)) - x).abs() <= 1e-9);
        }
    }

    #[test]
    fn ties_become_strictly_increasing() {
        let d = jittered_order_statistics(&[1.0, 1.0, 1.0, 2.0, 2.0, 0.0]).unwrap();
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert!(d
            .iter()
            .zip([0.0, 1.0, 1.0, 1.0, 2.0, 2.0])
            .all(|(a, b)| (a - b).abs() < 1e-8));
        let same = jittered_order_statistics(&[4.0; 5]).unwrap();
        assert!(same.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn edf_within_one_over_m_of_step_edf() {
        let mut rng = RandomStream::new(21);
        let m = 250;
        let h: Vec<f64> = (0..m).map(|_| rng.unit()).collect();
        let c = continualized_edf(&h).unwrap();
        let d = &c.knots()[1..];
        let mut worst: f64 = 0.0;
        for i in 1..=20_000 {
            let x = c.lower() + (c.upper() - c.lower()) * i as f64 / 20_000.0;
            let edf = d.partition_point(|&a| a <= x) as f64 / m as f64;
            worst = worst.max((c.evaluate(x) - edf).abs());
        }
        assert!(worst <= 1.0 / m as f64 + 1e-12, "{worst}");
    }

    #[test]
    fn parametric_continualization_agrees_with_table() {
        let dist = ParametricDistribution::binomial(5, 0.5).unwrap();
        let param = ContinualizedParametric::new(dist).unwrap();
        let table = continualize_discrete(&JumpSpec::from_distribution(&dist, 0.0).unwrap()).unwrap();
        for i in -20..=70 {
            let x = i as f64 / 10.0 + 0.013;
            assert!((param.cdf(x) - table.evaluate(x)).abs() < 1e-12);
        }
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            assert!((param.inverse(u) - table.inverse(u)).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn parametric_unbounded_inverse() {
        let dist = ParametricDistribution::poisson(3.0).unwrap();
        let f = ContinualizedParametric::new(dist).unwrap();
        for i in 1..200 {
            let u = i as f64 / 200.0;
            let x = f.inverse(u);
            assert!((f.cdf(x) - u).abs() < 1e-9);
        }
        let top = f.inverse(1.0);
        assert!(top.is_finite() && top > 10.0);
        assert!(f.inverse(0.0) > -1.0 && f.inverse(0.0) < -1.0 + 1e-9);
    }

    fn figure_spec() -> MixedSpec {
        MixedSpec {
            jumps: JumpSpec::new(vec![0.0], vec![0.3]).unwrap(),
            pieces: vec![
                UniformPiece {
                    lo: -1.0,
                    hi: 0.0,
                    mass: 0.3,
                },
                UniformPiece {
                    lo: 0.0,
                    hi: 1.0,
                    mass: 0.4,
                },
            ],
        }
    }

    #[test]
    fn mixed_examples() {
        let c = continualize_mixed(&figure_spec()).unwrap();
        assert!((c.evaluate(0.0) - 0.6).abs() < 1e-15);
        assert!((c.evaluate(-1.0) - 0.3).abs() < 1e-15);
        assert!((c.evaluate(-0.5) - 0.45).abs() < 1e-15);
        assert!((c.evaluate(0.5) - 0.8).abs() < 1e-15);
        let CeilingMap::MixedL0(l0) = c.ceiling() else {
            panic!("expected L0")
        };
        assert_eq!(l0.l0(-0.4), 0.0);
        assert_eq!(l0.l0(0.7), 0.7);
        assert_eq!(l0.l0(-1.5), -0.5);
        assert_eq!(l0.l0(-1.0), 0.0);
        assert_eq!(l0.l0(0.0), 0.0);
    }

    #[test]
    fn mixed_round_trip_and_distribution() {
        let spec = figure_spec();
        let c = continualize_mixed(&spec).unwrap();
        let CeilingMap::MixedL0(l0) = c.ceiling().clone() else {
            panic!()
        };
        let mut rng = RandomStream::new(4);
        let n = 100_000;
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.unit();
            let z = if u < 0.3 {
                -1.0 + rng.unit()
            } else if u < 0.6 {
                0.0
            } else {
                rng.unit()
            };
            let v = l0.continualize(z, &mut rng).unwrap();
            assert!((l0.l0(v) - z).abs() <= 1e-15);
            vs.push(v);
        }
        vs.sort_by(f64::total_cmp);
        let ks = vs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = c.evaluate(x);
                ((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64)
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "{ks}");
    }

    #[test]
    fn mixed_with_negative_jumps_and_gaps() {
        let spec = MixedSpec {
            jumps: JumpSpec::new(vec![-2.0, 0.0, 3.0], vec![0.2, 0.2, 0.2]).unwrap(),
            pieces: vec![UniformPiece {
                lo: -3.0,
                hi: 5.0,
                mass: 0.4,
            }],
        };
        let c = continualize_mixed(&spec).unwrap();
        let CeilingMap::MixedL0(l0) = c.ceiling().clone() else {
            panic!()
        };
        assert!(c.knots().windows(2).all(|w| w[0] < w[1]));
        let mut rng = RandomStream::new(8);
        for &z in &[-2.9, -2.0, -1.0, 0.0, 0.5, 2.9, 3.0, 4.5] {
            for _ in 0..50 {
                let v = l0.continualize(z, &mut rng).unwrap();
                assert!((l0.l0(v) - z).abs() < 1e-12, "z={z} v={v}");
            }
        }
        let overlapping = MixedSpec {
            jumps: JumpSpec::new(vec![0.0], vec![0.2]).unwrap(),
            pieces: vec![
                UniformPiece {
                    lo: 0.0,
                    hi: 2.0,
                    mass: 0.4,
                },
                UniformPiece {
                    lo: 1.0,
                    hi: 3.0,
                    mass: 0.4,
                },
            ],
        };
        assert!(matches!(
            continualize_mixed(&overlapping),
            Err(DipError::OverlappingMass(_))
        ));
    }

    proptest! {
        #[test]
        fn ceiling_undoes_continualization(k in 0usize..6, seed in any::<u64>()) {
            let support = DiscreteSupport::points(vec![-1.0, 0.0, 0.5, 2.0, 7.25, 8.0]).unwrap();
            let z = support.point(k).unwrap();
            let mut rng = RandomStream::new(seed);
            let v = support.continualize(z, &mut rng).unwrap();
            prop_assert!(v > support.left_of(k) && v <= z);
            prop_assert_eq!(support.ceiling(v).unwrap(), z);
        }

        #[test]
        fn edf_inverse_round_trip(x in 0.0f64..1.0) {
            let c = continualized_edf(&[0.1, 0.4, 0.45, 0.9, 1.3]).unwrap();
            let x = c.lower() + 1e-6 + x * (c.upper() - c.lower() - 1e-6);
            prop_assert!((c.inverse(c.evaluate(x)) - x).abs() <= 1e-9);
        }
    }
}
