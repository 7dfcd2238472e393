//! Computational checks of the privacy and preservation claims.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continualize::{continualize_discrete, InvertibleCdf, JumpSpec};
use crate::error::{check_epsilon, DipError, Result};
use crate::noise::{convolved_inverse, laplace_cdf, LaplaceScale};
use crate::rng::{Domain, DrawSource, Randomness, StreamSeed};
use crate::univariate::{ColumnKind, UnivariatePrivatizer};

/// Relative slack allowed on `e^ε` in the ratio checks.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub epsilon: f64,
    pub max_ratio: f64,
    pub bound: f64,
}

impl RatioCheck {
    pub fn passed(&self) -> bool {
        self.max_ratio <= self.bound * (1.0 + RATIO_SLACK)
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Max of `f(w|z) / f(w|z')` for `W = F(z) + e`, `e ~ Laplace(0, 1/ε)`, over
/// `z, z'` on a grid spanning the quantiles of `F` (and both tails, where
/// `F` is 0 or 1) and `w` on a grid over `[-1, 2]`. The ratio is evaluated
/// in closed form, `exp(ε(|w - F(z')| - |w - F(z)|))`.
pub fn density_ratio_bound_check(cdf: &dyn InvertibleCdf, epsilon: f64, resolution: usize) -> Result<RatioCheck> {
    check_epsilon(epsilon)?;
    let n = resolution.max(10);
    let mut zs: Vec<f64> = vec![cdf.inverse(0.0) - 1e6, cdf.inverse(1.0) + 1e6];
    zs.extend(grid(0.0, 1.0, n / 2).map(|u| cdf.inverse(u)));
    let fs: Vec<f64> = zs.iter().map(|&z| cdf.cdf(z)).collect();
    let ws: Vec<f64> = grid(-1.0, 2.0, 2 * n).collect();
    let max_log = ws
        .par_iter()
        .map(|&w| {
            let mut worst = 0.0f64;
            for &f in &fs {
                for &g in &fs {
                    worst = worst.max(epsilon * ((w - g).abs() - (w - f).abs()));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(RatioCheck {
        epsilon,
        max_ratio: max_log.exp(),
        bound: epsilon.exp(),
    })
}

/// Per-coordinate checks at `ε/p` and their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedCheck {
    pub epsilon: f64,
    pub per_coordinate: Vec<RatioCheck>,
    pub product: f64,
    pub bound: f64,
}

impl ComposedCheck {
    pub fn passed(&self) -> bool {
        self.per_coordinate.iter().all(RatioCheck::passed) && self.product <= self.bound * (1.0 + RATIO_SLACK)
    }
}

pub fn composed_ratio_check(cdfs: &[&dyn InvertibleCdf], epsilon: f64, resolution: usize) -> Result<ComposedCheck> {
    check_epsilon(epsilon)?;
    if cdfs.is_empty() {
        return Err(DipError::Empty("no coordinates"));
    }
    let share = epsilon / cdfs.len() as f64;
    let per_coordinate = cdfs
        .iter()
        .map(|c| density_ratio_bound_check(*c, share, resolution))
        .collect::<Result<Vec<_>>>()?;
    let product = per_coordinate.iter().map(|c| c.max_ratio).product();
    Ok(ComposedCheck {
        epsilon,
        per_coordinate,
        product,
        bound: epsilon.exp(),
    })
}

/// Output pmf of known-F discrete DIP computed by quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub points: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Largest change of any atom between `nodes` and `2 * nodes`.
    pub quadrature_delta: f64,
}

impl OracleResult {
    pub fn max_error(&self) -> f64 {
        self.input
            .iter()
            .zip(&self.output)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Maximum quadrature delta accepted between node counts.
pub const QUADRATURE_TOLERANCE: f64 = 1e-5;

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = nodes.max(2) & !1;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

fn oracle_pmf(spec: &JumpSpec, scale: LaplaceScale, nodes: usize) -> Vec<f64> {
    let masses = spec.masses();
    let s = masses.len();
    let mut c = Vec::with_capacity(s + 1);
    c.push(0.0);
    let mut acc = 0.0;
    for &p in masses {
        acc += p;
        c.push(acc);
    }
    c[s] = 1.0;
    // Z̃ = a_j iff U' + e lands in (g_{j-1}, g_j], with U' = F_V(V) uniform on (0, 1)
    let g: Vec<f64> = c.iter().map(|&x| convolved_inverse(x, scale)).collect();
    let lap = |x: f64| {
        if x == f64::INFINITY {
            1.0
        } else if x == f64::NEG_INFINITY {
            0.0
        } else {
            laplace_cdf(x, scale)
        }
    };
    (0..s)
        .into_par_iter()
        .map(|j| {
            let integrand = |u: f64| lap(g[j + 1] - u) - lap(g[j] - u);
            // integrate over each input atom's u-range, split at the kinks
            let mut total = 0.0;
            for k in 0..s {
                let mut cuts = vec![c[k], c[k + 1]];
                cuts.extend([g[j], g[j + 1]].into_iter().filter(|&x| x > c[k] && x < c[k + 1]));
                cuts.sort_by(f64::total_cmp);
                for w in cuts.windows(2) {
                    total += simpson(integrand, w[0], w[1], nodes);
                }
            }
            total
        })
        .collect()
}

/// `P(Z̃ = a_k)` for known-F discrete DIP by deterministic quadrature over
/// the continualization uniform, with the Laplace noise integrated in closed
/// form. Fails if doubling the node count moves any atom by more than
/// [`QUADRATURE_TOLERANCE`].
pub fn brute_force_output_distribution(spec: &JumpSpec, epsilon: f64, nodes: usize) -> Result<OracleResult> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    if nodes < 1000 {
        return Err(DipError::param("nodes", "need at least 1000 quadrature nodes"));
    }
    let total = spec.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DipError::MassNotNormalized(total));
    }
    let points = spec.points().to_vec();
    let input = spec.masses().to_vec();
    if points.len() == 1 {
        return Ok(OracleResult {
            points,
            input,
            output: vec![1.0],
            quadrature_delta: 0.0,
        });
    }
    let coarse = oracle_pmf(spec, scale, nodes);
    let fine = oracle_pmf(spec, scale, 2 * nodes);
    let delta = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if delta > QUADRATURE_TOLERANCE {
        return Err(DipError::QuadratureNotConverged { delta });
    }
    Ok(OracleResult {
        points,
        input,
        output: fine,
        quadrature_delta: delta,
    })
}

/// Empirical output pmf of `n` simulated known-F privatizations, with inputs
/// drawn from the spec itself.
pub fn simulate_output_pmf(spec: &JumpSpec, epsilon: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let scale = LaplaceScale::for_epsilon(epsilon)?;
    let cdf = continualize_discrete(spec)?;
    let privatizer = UnivariatePrivatizer::new(cdf.clone(), ColumnKind::Discrete(spec.support()), scale);
    let draws = StreamSeed(seed);
    let points = spec.points();
    let counts = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<u64>> {
            let u = draws.stream(Domain::Sample, i as u64, 0).open_unit();
            let z = crate::continualize::generalized_ceiling(cdf.inverse(u), points)?;
            let out = privatizer.privatize_one(z, &mut draws.stream(Domain::Privatize, i as u64, 0))?;
            let mut c = vec![0u64; points.len()];
            c[points.partition_point(|&a| a < out)] += 1;
            Ok(c)
        })
        .try_reduce(
            || vec![0u64; points.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts.iter().map(|&c| c as f64 / n as f64).collect())
}

/// Monte-Carlo power of the most powerful test of `μ0` against `μ1` from
/// `M` independent releases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub releases: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub sims: usize,
    pub power: f64,
    pub standard_error: f64,
    /// `γ e^{Mε}`.
    pub bound: f64,
}

impl PowerEstimate {
    pub fn passed(&self) -> bool {
        self.power <= self.bound + 3.0 * self.standard_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub mu0: f64,
    pub mu1: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { mu0: 0.2, mu1: 0.8 }
    }
}

// Log-likelihood ratio of M releases W = F(μ) + e, on a 1e-12 grid so that
// the atoms of its distribution compare equal.
fn llr(cfg: PowerConfig, epsilon: f64, centre: f64, m: usize, rng: &mut impl Randomness) -> i64 {
    let scale = LaplaceScale::new(1.0 / epsilon).expect("validated epsilon");
    let mut t = 0.0;
    for _ in 0..m {
        let w = centre + rng.laplace(scale);
        t += epsilon * ((w - cfg.mu0).abs() - (w - cfg.mu1).abs());
    }
    (t / 1e-12).round() as i64
}

/// Power of the randomized Neyman-Pearson test of size `γ`, with the
/// critical value and randomization calibrated on `sims` null simulations.
/// The release is DIP of a known Uniform(0,1) value, so `F(μ) = μ`.
pub fn repeated_query_power(
    releases: usize,
    epsilon: f64,
    gamma: f64,
    sims: usize,
    seed: u64,
    cfg: PowerConfig,
) -> Result<PowerEstimate> {
    check_epsilon(epsilon)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(DipError::ProbabilityOutOfRange(gamma));
    }
    if sims < 1000 {
        return Err(DipError::param("sims", "need at least 1000 simulations"));
    }
    let draws = StreamSeed(seed);
    let simulate = |coord: u64, centre: f64| -> Vec<i64> {
        (0..sims)
            .into_par_iter()
            .map(|s| {
                llr(
                    cfg,
                    epsilon,
                    centre,
                    releases,
                    &mut draws.stream(Domain::Audit, s as u64, coord),
                )
            })
            .collect()
    };
    let mut null = simulate(0, cfg.mu0);
    let alt = simulate(1, cfg.mu1);
    null.sort_unstable();
    let n = sims as f64;
    // smallest c with P0(T > c) <= γ
    let idx = ((1.0 - gamma) * n).ceil() as usize;
    let c = null[idx.min(sims) - 1];
    let above0 = null.iter().filter(|&&t| t > c).count() as f64 / n;
    let at0 = null.iter().filter(|&&t| t == c).count() as f64 / n;
    let kappa = ((gamma - above0) / at0).clamp(0.0, 1.0);

    let x: Vec<f64> = alt
        .iter()
        .map(|&t| {
            if t > c {
                1.0
            } else if t == c {
                kappa
            } else {
                0.0
            }
        })
        .collect();
    let power = x.iter().sum::<f64>() / n;
    let var_x = x.iter().map(|v| (v - power).powi(2)).sum::<f64>() / (n - 1.0);
    let at1 = alt.iter().filter(|&&t| t == c).count() as f64 / n;
    // delta method for the calibrated κ = (γ - A0) / B0
    let var_kappa =
        (above0 * (1.0 - above0) + kappa * kappa * at0 * (1.0 - at0) - 2.0 * kappa * above0 * at0) / (n * at0 * at0);
    let standard_error = (var_x / n + at1 * at1 * var_kappa.max(0.0)).sqrt();
    Ok(PowerEstimate {
        releases,
        epsilon,
        gamma,
        sims,
        power,
        standard_error,
        bound: gamma * (releases as f64 * epsilon).exp(),
    })
}

/// Additive noise of a linear mechanism `z + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdditiveNoise {
    Laplace { scale: f64 },
    Gaussian { sd: f64 },
}

impl AdditiveNoise {
    fn log_density(&self, x: f64) -> f64 {
        match *self {
            AdditiveNoise::Laplace { scale } => -(x.abs()) / scale - (2.0 * scale).ln(),
            AdditiveNoise::Gaussian { sd } => -0.5 * (x / sd).powi(2) - (sd * (2.0 * std::f64::consts::PI).sqrt()).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub epsilon: f64,
    /// Largest `ln f(w - z) - ln f(w - z')` found.
    pub max_log_ratio: f64,
    pub gap: f64,
    pub w: f64,
}

impl Counterexample {
    pub fn max_ratio(&self) -> f64 {
        self.max_log_ratio.exp()
    }

    pub fn violates(&self) -> bool {
        self.max_log_ratio > self.epsilon
    }
}

/// Searches inputs `z = 0`, `z' = Δ` with `Δ` up to `probe` and outputs `w`
/// over `[-probe, 2 probe]` for the largest density ratio of `z + noise`.
pub fn linear_mechanism_counterexample(epsilon: f64, noise: AdditiveNoise, probe: f64) -> Result<Counterexample> {
    check_epsilon(epsilon)?;
    if !(probe >= 0.0 && probe.is_finite()) {
        return Err(DipError::param("probe", "must be finite and non-negative"));
    }
    let mut best = Counterexample {
        epsilon,
        max_log_ratio: 0.0,
        gap: 0.0,
        w: 0.0,
    };
    if probe == 0.0 {
        return Ok(best);
    }
    let gaps = 101;
    let ws = 601;
    for i in 0..gaps {
        let gap = probe * i as f64 / (gaps - 1) as f64;
        for k in 0..ws {
            let w = -probe + 3.0 * probe * k as f64 / (ws - 1) as f64;
            let r = noise.log_density(w) - noise.log_density(w - gap);
            if r > best.max_log_ratio {
                best = Counterexample {
                    epsilon,
                    max_log_ratio: r,
                    gap,
                    w,
                };
            }
        }
    }
    Ok(best)
}

/// Collected audit results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: Option<u64>,
    pub ratio_checks: Vec<RatioCheck>,
    pub composed: Vec<ComposedCheck>,
    pub oracles: Vec<OracleResult>,
    pub power: Vec<PowerEstimate>,
    pub counterexamples: Vec<Counterexample>,
}

pub const ORACLE_TOLERANCE: f64 = 1e-4;

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.ratio_checks.iter().all(RatioCheck::passed)
            && self.composed.iter().all(ComposedCheck::passed)
            && self.oracles.iter().all(|o| o.max_error() <= ORACLE_TOLERANCE)
            && self.power.iter().all(PowerEstimate::passed)
            && self.counterexamples.iter().all(Counterexample::violates)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(seed) = self.seed {
            writeln!(f, "seed {seed}")?;
        }
        for c in &self.ratio_checks {
            writeln!(
                f,
                "ratio-bound eps={} max_ratio={:.12} bound={:.12} {}",
                c.epsilon,
                c.max_ratio,
                c.bound,
                verdict(c.passed())
            )?;
        }
        for c in &self.composed {
            writeln!(
                f,
                "composed eps={} coordinates={} product={:.12} bound={:.12} {}",
                c.epsilon,
                c.per_coordinate.len(),
                c.product,
                c.bound,
                verdict(c.passed())
            )?;
        }
        for o in &self.oracles {
            writeln!(
                f,
                "oracle points={:?} input={:?} output={:?} max_delta={:.3e} quadrature_delta={:.3e} {}",
                o.points,
                o.input,
                o.output,
                o.max_error(),
                o.quadrature_delta,
                verdict(o.max_error() <= ORACLE_TOLERANCE)
            )?;
        }
        for p in &self.power {
            writeln!(
                f,
                "power M={} eps={} gamma={} sims={} power={:.5} se={:.5} bound={:.5} {}",
                p.releases,
                p.epsilon,
                p.gamma,
                p.sims,
                p.power,
                p.standard_error,
                p.bound,
                verdict(p.passed())
            )?;
        }
        for c in &self.counterexamples {
            writeln!(
                f,
                "linear-counterexample eps={} gap={} w={} log_ratio={:.6} ratio={:.6e} exceeds e^eps: {}",
                c.epsilon,
                c.gap,
                c.w,
                c.max_log_ratio,
                c.max_ratio(),
                verdict(c.violates())
            )?;
        }
        Ok(())
    }
}
