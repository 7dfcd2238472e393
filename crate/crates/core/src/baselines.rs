//! Comparison mechanisms: the Laplace randomized mechanism (LRM) and the
//! exponential mechanism (EXM).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continualize::DiscreteSupport;
use crate::error::{check_epsilon, DipError, Result};
use crate::noise::{laplace_pdf, LaplaceScale};
use crate::rng::{Domain, DrawSource, Randomness};

/// Bounds `[lower, upper]` of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub lower: f64,
    pub upper: f64,
}

impl BoundsSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_finite() && upper.is_finite() && lower < upper {
            Ok(Self { lower, upper })
        } else {
            Err(DipError::param(
                "bounds",
                format!("need finite lower < upper, got [{lower}, {upper}]"),
            ))
        }
    }

    /// `[-max|Z|, max|Z|]`, approximated from the data (not strictly private).
    pub fn symmetric_from_data(values: &[f64]) -> Result<Self> {
        let a = values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        Self::new(-a, a)
    }

    /// `[0, max Z]`, approximated from the data (not strictly private).
    pub fn nonnegative_from_data(values: &[f64]) -> Result<Self> {
        let a = values.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        Self::new(0.0, a)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Laplace scale `(upper - lower) / ε`.
    pub fn scale(&self, epsilon: f64) -> Result<LaplaceScale> {
        check_epsilon(epsilon)?;
        LaplaceScale::new(self.width() / epsilon)
    }
}

/// Nearest point of a finite grid; ties go to the lower point.
pub fn round_to_grid(x: f64, grid: &DiscreteSupport) -> Result<f64> {
    let hi = match grid.ceiling_index(x) {
        Ok(k) => k,
        Err(DipError::AboveSupport { max, .. }) => return Ok(max),
        Err(e) => return Err(e),
    };
    let up = grid.point(hi).expect("in range");
    if hi == 0 {
        return Ok(up);
    }
    let down = grid.point(hi - 1).expect("in range");
    Ok(if x - down <= up - x { down } else { up })
}

/// `Z + Laplace(0, (upper - lower)/ε)`, optionally rounded to a grid. Record
/// `i` uses stream `(Baseline, i, coord)`.
pub fn lrm_privatize<S: DrawSource>(
    values: &[f64],
    epsilon: f64,
    bounds: &BoundsSpec,
    rounding: Option<&DiscreteSupport>,
    draws: &S,
    coord: u64,
) -> Result<Vec<f64>> {
    let scale = bounds.scale(epsilon)?;
    values
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut rng = draws.stream(Domain::Baseline, i as u64, coord);
            let w = z + rng.laplace(scale);
            match rounding {
                Some(grid) => round_to_grid(w, grid),
                None => Ok(w),
            }
        })
        .collect()
}

/// Coordinate-independent LRM over several columns, `ε/p` per column.
pub fn lrm_privatize_columns<S: DrawSource>(
    columns: &[Vec<f64>],
    epsilon: f64,
    bounds: &[BoundsSpec],
    draws: &S,
) -> Result<Vec<Vec<f64>>> {
    if columns.len() != bounds.len() || columns.is_empty() {
        return Err(DipError::DimensionMismatch(format!(
            "{} columns and {} bounds",
            columns.len(),
            bounds.len()
        )));
    }
    check_epsilon(epsilon)?;
    let share = epsilon / columns.len() as f64;
    columns
        .iter()
        .zip(bounds)
        .enumerate()
        .map(|(l, (col, b))| lrm_privatize(col, share, b, None, draws, l as u64))
        .collect()
}

/// Largest density ratio `f(w|z) / f(w|z')` of the LRM over a grid of
/// inputs in the bounds and outputs around them.
pub fn lrm_ratio_check(bounds: &BoundsSpec, epsilon: f64, grid: usize) -> Result<f64> {
    let scale = bounds.scale(epsilon)?;
    let grid = grid.max(10);
    let at = |i: usize, n: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let zs: Vec<f64> = (0..grid).map(|i| at(i, grid, bounds.lower, bounds.upper)).collect();
    let reach = 3.0 * bounds.width();
    let mut worst: f64 = 1.0;
    for k in 0..2 * grid {
        let w = at(k, 2 * grid, bounds.lower - reach, bounds.upper + reach);
        // log-density ratio is maximal between the extreme inputs
        let logs: Vec<f64> = zs.iter().map(|&z| laplace_pdf(w - z, scale).ln()).collect();
        let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max((hi - lo).exp());
    }
    Ok(worst)
}

/// EXM selection probabilities over `support` and the sensitivity `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExmDistribution {
    pub support: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `Δ = max |Z|` of the sample (1 if the sample is all zero).
    pub sensitivity: f64,
}

/// Probabilities `∝ exp(ε q(v) / (2Δ))` with `q(v)` the sample frequency of `v`.
pub fn exm_distribution(support: &[f64], sample: &[f64], epsilon: f64) -> Result<ExmDistribution> {
    check_epsilon(epsilon)?;
    if support.is_empty() {
        return Err(DipError::Empty("exponential mechanism support"));
    }
    if sample.is_empty() {
        return Err(DipError::Empty("exponential mechanism sample"));
    }
    let points = DiscreteSupport::points(support.to_vec())?;
    let mut counts = vec![0usize; support.len()];
    for &z in sample {
        let k = points.index_of(z).ok_or(DipError::OutsideSupport { value: z })?;
        counts[k] += 1;
    }
    let max_abs = sample.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let sensitivity = if max_abs > 0.0 { max_abs } else { 1.0 };
    let n = sample.len() as f64;
    let scores: Vec<f64> = counts
        .iter()
        .map(|&c| epsilon * (c as f64 / n) / (2.0 * sensitivity))
        .collect();
    // log-sum-exp normalization
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(ExmDistribution {
        support: support.to_vec(),
        probabilities: weights.iter().map(|w| w / total).collect(),
        sensitivity,
    })
}

/// One EXM draw per sample record; record `i` uses stream `(Baseline, i, 0)`.
pub fn exm_sample_discrete<S: DrawSource>(
    support: &[f64],
    sample: &[f64],
    epsilon: f64,
    draws: &S,
) -> Result<Vec<f64>> {
    let dist = exm_distribution(support, sample, epsilon)?;
    let mut cumulative = Vec::with_capacity(dist.probabilities.len());
    let mut acc = 0.0;
    for &p in &dist.probabilities {
        acc += p;
        cumulative.push(acc);
    }
    let last = cumulative.len() - 1;
    Ok((0..sample.len())
        .into_par_iter()
        .map(|i| {
            let u = draws.stream(Domain::Baseline, i as u64, 0).unit() * acc;
            let k = cumulative.partition_point(|&c| c <= u).min(last);
            dist.support[k]
        })
        .collect())
}
