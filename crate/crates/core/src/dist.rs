//! Known parametric distributions.
//!
//! Each distribution exposes a CDF defined on all of ℝ, a (generalized)
//! inverse CDF, and seeded sampling. Continuous families without a closed
//! form inverse (normal, beta) are inverted by bisection on the CDF.

use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};

use crate::continualize::DiscreteSupport;
use crate::error::{DipError, Result};
use crate::rng::RandomStream;
use crate::special;

/// Final bracket width of the normal and beta quantile bisection.
pub const BISECTION_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Exponential {
        rate: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    Bernoulli {
        p: f64,
    },
    Binomial {
        trials: u32,
        p: f64,
    },
    Poisson {
        rate: f64,
    },
    /// Number of trials up to and including the first success (support 1, 2, ...).
    Geometric {
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Interval { lo: f64, hi: f64 },
    Discrete(DiscreteSupport),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricDistribution {
    family: Family,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DipError::param(name, format!("must be positive and finite, got {v}")))
    }
}

fn probability(name: &'static str, p: f64, open_low: bool, open_high: bool) -> Result<()> {
    let low_ok = if open_low { p > 0.0 } else { p >= 0.0 };
    let high_ok = if open_high { p < 1.0 } else { p <= 1.0 };
    if p.is_finite() && low_ok && high_ok {
        Ok(())
    } else {
        Err(DipError::param(name, format!("{p} is not a valid probability")))
    }
}

impl ParametricDistribution {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(DipError::param("uniform", "need finite lo < hi"));
                }
            }
            Family::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(DipError::param("mean", "must be finite"));
                }
                positive("sd", sd)?;
            }
            Family::Exponential { rate } => positive("rate", rate)?,
            Family::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
            }
            Family::Bernoulli { p } => probability("p", p, true, true)?,
            Family::Binomial { trials, p } => {
                if trials == 0 {
                    return Err(DipError::param("trials", "must be at least 1"));
                }
                probability("p", p, true, true)?;
            }
            Family::Poisson { rate } => positive("rate", rate)?,
            Family::Geometric { p } => probability("p", p, true, false)?,
        }
        Ok(Self { family })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Uniform { lo, hi })
    }
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Family::Normal { mean, sd })
    }
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Beta { alpha, beta })
    }
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli { p })
    }
    pub fn binomial(trials: u32, p: f64) -> Result<Self> {
        Self::new(Family::Binomial { trials, p })
    }
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(Family::Poisson { rate })
    }
    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(Family::Geometric { p })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kind(&self) -> DistKind {
        match self.family {
            Family::Uniform { .. } | Family::Normal { .. } | Family::Exponential { .. } | Family::Beta { .. } => {
                DistKind::Continuous
            }
            _ => DistKind::Discrete,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind() == DistKind::Discrete
    }

    pub fn support(&self) -> Support {
        match self.family {
            Family::Uniform { lo, hi } => Support::Interval { lo, hi },
            Family::Normal { .. } => Support::Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            Family::Exponential { .. } => Support::Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            Family::Beta { .. } => Support::Interval { lo: 0.0, hi: 1.0 },
            Family::Bernoulli { .. } => Support::Discrete(DiscreteSupport::lattice(0.0, 1.0, Some(2))),
            Family::Binomial { trials, .. } => {
                Support::Discrete(DiscreteSupport::lattice(0.0, 1.0, Some(trials as u64 + 1)))
            }
            Family::Poisson { .. } => Support::Discrete(DiscreteSupport::lattice(0.0, 1.0, None)),
            Family::Geometric { .. } => Support::Discrete(DiscreteSupport::lattice(1.0, 1.0, None)),
        }
    }

    /// The discrete support, if the family is discrete.
    pub fn discrete_support(&self) -> Option<DiscreteSupport> {
        match self.support() {
            Support::Discrete(s) => Some(s),
            Support::Interval { .. } => None,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.support() {
            Support::Interval { lo, hi } => x >= lo && x <= hi,
            Support::Discrete(s) => s.index_of(x).is_some(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Uniform { lo, hi } => 0.5 * (lo + hi),
            Family::Normal { mean, .. } => mean,
            Family::Exponential { rate } => 1.0 / rate,
            Family::Beta { alpha, beta } => alpha / (alpha + beta),
            Family::Bernoulli { p } => p,
            Family::Binomial { trials, p } => trials as f64 * p,
            Family::Poisson { rate } => rate,
            Family::Geometric { p } => 1.0 / p,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            Family::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Family::Normal { sd, .. } => sd * sd,
            Family::Exponential { rate } => 1.0 / (rate * rate),
            Family::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            Family::Bernoulli { p } => p * (1.0 - p),
            Family::Binomial { trials, p } => trials as f64 * p * (1.0 - p),
            Family::Poisson { rate } => rate,
            Family::Geometric { p } => (1.0 - p) / (p * p),
        }
    }

    /// Probability mass at `x` (zero for continuous families and off-support points).
    pub fn pmf(&self, x: f64) -> f64 {
        let k = match self.discrete_support().and_then(|s| s.index_of(x)) {
            Some(_) => x,
            None => return 0.0,
        };
        match self.family {
            Family::Bernoulli { p } => {
                if k == 0.0 {
                    1.0 - p
                } else {
                    p
                }
            }
            Family::Binomial { trials, p } => {
                let n = trials as f64;
                (special::ln_gamma(n + 1.0) - special::ln_gamma(k + 1.0) - special::ln_gamma(n - k + 1.0)
                    + k * p.ln()
                    + (n - k) * (-p).ln_1p())
                .exp()
            }
            Family::Poisson { rate } => (k * rate.ln() - rate - special::ln_gamma(k + 1.0)).exp(),
            Family::Geometric { p } => p * ((k - 1.0) * (-p).ln_1p()).exp(),
            _ => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.family {
            Family::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Family::Normal { mean, sd } => special::std_normal_cdf((x - mean) / sd),
            Family::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Family::Beta { alpha, beta } => special::beta_inc(alpha, beta, x),
            Family::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Family::Binomial { trials, p } => {
                if x < 0.0 {
                    return 0.0;
                }
                let k = x.floor();
                if k >= trials as f64 {
                    return 1.0;
                }
                // P(X <= k) = I_{1-p}(n - k, k + 1)
                special::beta_inc(trials as f64 - k, k + 1.0, 1.0 - p)
            }
            Family::Poisson { rate } => {
                if x < 0.0 {
                    return 0.0;
                }
                special::gamma_q(x.floor() + 1.0, rate)
            }
            Family::Geometric { p } => {
                if x < 1.0 {
                    return 0.0;
                }
                -(x.floor() * (-p).ln_1p()).exp_m1()
            }
        }
    }

    /// Inverse CDF for `u` in (0, 1). Discrete families return the generalized
    /// inverse `inf{x : F(x) >= u}`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(DipError::ProbabilityOutOfRange(u));
        }
        Ok(self.quantile(u))
    }

    pub(crate) fn quantile(&self, u: f64) -> f64 {
        match self.family {
            Family::Uniform { lo, hi } => lo + u * (hi - lo),
            Family::Exponential { rate } => -(-u).ln_1p() / rate,
            Family::Normal { mean, sd } => {
                let z = special::bisect_increasing(special::std_normal_cdf, u, -40.0, 40.0, BISECTION_WIDTH);
                mean + sd * z
            }
            Family::Beta { alpha, beta } => {
                special::bisect_increasing(|x| special::beta_inc(alpha, beta, x), u, 0.0, 1.0, BISECTION_WIDTH)
            }
            Family::Bernoulli { p } => {
                if u <= 1.0 - p {
                    0.0
                } else {
                    1.0
                }
            }
            Family::Binomial { trials, .. } => {
                let mut k = 0.0;
                while k < trials as f64 && self.cdf(k) < u {
                    k += 1.0;
                }
                k
            }
            Family::Poisson { rate } => self.scan_from(rate.floor(), 0.0, u),
            Family::Geometric { p } => {
                let guess = ((-u).ln_1p() / (-p).ln_1p()).ceil().max(1.0);
                self.scan_from(guess, 1.0, u)
            }
        }
    }

    // Walk an integer lattice from `start` to the smallest k with cdf(k) >= u.
    fn scan_from(&self, start: f64, min: f64, u: f64) -> f64 {
        let mut k = start.max(min);
        while k > min && self.cdf(k - 1.0) >= u {
            k -= 1.0;
        }
        while self.cdf(k) < u {
            k += 1.0;
        }
        k
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, rng: &mut RandomStream, n: usize) -> Vec<f64> {
        match self.family {
            Family::Uniform { lo, hi } => {
                let d = rand_distr::Uniform::new(lo, hi).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Family::Normal { mean, sd } => {
                let d = rand_distr::Normal::new(mean, sd).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Family::Exponential { rate } => {
                let d = rand_distr::Exp::new(rate).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Family::Beta { alpha, beta } => {
                let d = rand_distr::Beta::new(alpha, beta).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Family::Bernoulli { p } => {
                let d = rand_distr::Bernoulli::new(p).expect("validated");
                d.sample_iter(rng).take(n).map(|b| if b { 1.0 } else { 0.0 }).collect()
            }
            Family::Binomial { trials, p } => {
                let d = rand_distr::Binomial::new(trials as u64, p).expect("validated");
                d.sample_iter(rng).take(n).map(|k| k as f64).collect()
            }
            Family::Poisson { rate } => {
                let d = rand_distr::Poisson::new(rate).expect("validated");
                d.sample_iter(rng).take(n).collect()
            }
            Family::Geometric { p } => {
                // rand_distr counts failures before the first success.
                let d = rand_distr::Geometric::new(p).expect("validated");
                d.sample_iter(rng).take(n).map(|k| k as f64 + 1.0).collect()
            }
        }
    }
}

impl std::fmt::Display for ParametricDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.family {
            Family::Uniform { lo, hi } => write!(f, "Uniform({lo},{hi})"),
            Family::Normal { mean, sd } => write!(f, "Normal({mean},{sd})"),
            Family::Exponential { rate } => write!(f, "Exp({rate})"),
            Family::Beta { alpha, beta } => write!(f, "Beta({alpha},{beta})"),
            Family::Bernoulli { p } => write!(f, "Bernoulli({p})"),
            Family::Binomial { trials, p } => write!(f, "Binomial({trials},{p})"),
            Family::Poisson { rate } => write!(f, "Poisson({rate})"),
            Family::Geometric { p } => write!(f, "Geometric({p})"),
        }
    }
}

impl std::str::FromStr for ParametricDistribution {
    type Err = DipError;

    /// Parses `name:param[,param]`, e.g. `bernoulli:0.3`, `normal:0,1`, `binomial:5,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = params
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| DipError::param("distribution", format!("bad number `{p}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(DipError::param(
                    "distribution",
                    format!("`{name}` takes {k} parameter(s)"),
                ))
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" | "unif" => {
                want(2)?;
                Self::uniform(nums[0], nums[1])
            }
            "normal" | "gaussian" => {
                want(2)?;
                Self::normal(nums[0], nums[1])
            }
            "exponential" | "exp" => {
                want(1)?;
                Self::exponential(nums[0])
            }
            "beta" => {
                want(2)?;
                Self::beta(nums[0], nums[1])
            }
            "bernoulli" | "ber" => {
                want(1)?;
                Self::bernoulli(nums[0])
            }
            "binomial" | "bin" => {
                want(2)?;
                if nums[0] < 1.0 || nums[0].fract() != 0.0 {
                    return Err(DipError::param("trials", "must be a positive integer"));
                }
                Self::binomial(nums[0] as u32, nums[1])
            }
            "poisson" | "pois" => {
                want(1)?;
                Self::poisson(nums[0])
            }
            "geometric" | "geom" => {
                want(1)?;
                Self::geometric(nums[0])
            }
            other => Err(DipError::param("distribution", format!("unknown family `{other}`"))),
        }
    }
}
