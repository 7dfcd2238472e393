use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dip_core::audit::{
    brute_force_output_distribution, density_ratio_bound_check, linear_mechanism_counterexample, repeated_query_power,
    AdditiveNoise, AuditReport, PowerConfig,
};
use dip_core::baselines::{exm_sample_discrete, lrm_privatize, BoundsSpec};
use dip_core::harness::{check_report, run_experiment, ExperimentConfig, Scenario};
use dip_core::{
    privatize_table, ColumnKind, ContinualizedParametric, DataTable, DiscreteSupport, Domain, InvertibleCdf, JumpSpec,
    ParametricDistribution, PrivatizeConfig, RunMetadata, StreamSeed,
};
use serde::Serialize;

use crate::data::{read_csv, to_table, write_table, RawCsv};
use crate::error::CliError;
use crate::schema::{ColumnSchema, KindSpec, LatticeSpec, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Dip,
    Lrm,
    Exm,
}

pub struct PrivatizeRequest {
    pub input: PathBuf,
    pub output: PathBuf,
    pub schema: PathBuf,
    pub epsilon: f64,
    pub holdout_ratio: f64,
    pub seed: u64,
    pub order: Option<Vec<String>>,
    pub mechanism: Mechanism,
    pub report: Option<PathBuf>,
}

/// What a release reports about itself. No data values, no row numbers.
#[derive(Debug, Serialize)]
struct ReleaseReport {
    mechanism: Mechanism,
    epsilon: f64,
    seed: u64,
    input_rows: usize,
    output_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dip: Option<RunMetadata>,
}

pub fn privatize(req: &PrivatizeRequest) -> Result<(), CliError> {
    let schema = Schema::load(&req.schema)?;
    let raw = read_csv(&req.input)?;
    let table = to_table(&raw, &schema)?;
    let (out, dip) = match req.mechanism {
        Mechanism::Dip => {
            let column_order = req
                .order
                .as_ref()
                .map(|names| resolve_order(names, &table))
                .transpose()?;
            let config = PrivatizeConfig {
                epsilon: req.epsilon,
                holdout_ratio: req.holdout_ratio,
                column_order,
                seed: req.seed,
            };
            let (out, meta) = privatize_table(&table, &config)?;
            (out, Some(meta))
        }
        Mechanism::Lrm => (lrm_table(&table, &schema, req.epsilon, req.seed)?, None),
        Mechanism::Exm => (exm_table(&table, req.epsilon, req.seed)?, None),
    };
    write_table(&out, &req.output)?;
    let report = ReleaseReport {
        mechanism: req.mechanism,
        epsilon: req.epsilon,
        seed: req.seed,
        input_rows: table.n_rows(),
        output_rows: out.n_rows(),
        dip,
    };
    if let Some(path) = &req.report {
        let text = toml::to_string(&report).map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(path, text)?;
    }
    eprintln!(
        "released {} of {} rows with {:?} at eps={}",
        report.output_rows, report.input_rows, req.mechanism, req.epsilon
    );
    if let Some(meta) = &report.dip {
        eprintln!(
            "per-coordinate eps={} over {} coordinates, nearest-cell fallbacks: {} forward, {} inverse",
            meta.per_coordinate_epsilon, meta.coordinates, meta.forward_fallbacks, meta.inverse_fallbacks
        );
    }
    Ok(())
}

fn resolve_order(names: &[String], table: &DataTable) -> Result<Vec<usize>, CliError> {
    let order: Vec<usize> = names
        .iter()
        .map(|n| {
            table
                .columns()
                .iter()
                .position(|c| &c.name == n)
                .ok_or_else(|| CliError::Usage(format!("--order names unknown column `{n}`")))
        })
        .collect::<Result<_, _>>()?;
    let distinct: BTreeSet<usize> = order.iter().copied().collect();
    if distinct.len() != order.len() || order.len() != table.n_columns() {
        return Err(CliError::Usage("--order must list every column exactly once".into()));
    }
    Ok(order)
}

fn finite_points(kind: &ColumnKind) -> Option<Vec<f64>> {
    match kind {
        ColumnKind::Discrete(s) => {
            let n = s.len()?;
            Some((0..n).filter_map(|k| s.point(k)).collect())
        }
        ColumnKind::Categorical(levels) => Some((0..levels.len()).map(|k| k as f64).collect()),
        _ => None,
    }
}

// Declared bounds, else the finite support, else the data range widened to
// include zero (symmetric if the data has negative values).
fn lrm_bounds(spec: Option<&ColumnSchema>, kind: &ColumnKind, values: &[f64]) -> Result<BoundsSpec, CliError> {
    if let Some([lo, hi]) = spec.and_then(|s| s.bounds) {
        return Ok(BoundsSpec::new(lo, hi)?);
    }
    if let Some(points) = finite_points(kind) {
        return Ok(BoundsSpec::new(points[0], points[points.len() - 1])?);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min < 0.0 {
        BoundsSpec::symmetric_from_data(values)?
    } else {
        BoundsSpec::nonnegative_from_data(values)?
    })
}

fn lrm_table(table: &DataTable, schema: &Schema, epsilon: f64, seed: u64) -> Result<DataTable, CliError> {
    let share = epsilon / table.n_columns() as f64;
    let draws = StreamSeed(seed);
    let data = table
        .columns()
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let values = table.column(c);
            let bounds = lrm_bounds(schema.column(&col.name), &col.kind, values)?;
            let grid = match &col.kind {
                ColumnKind::Discrete(s) => Some(s.clone()),
                ColumnKind::Categorical(levels) => Some(DiscreteSupport::lattice(0.0, 1.0, Some(levels.len() as u64))),
                _ => None,
            };
            lrm_privatize(values, share, &bounds, grid.as_ref(), &draws, c as u64)
                .map_err(|e| CliError::Data(format!("column `{}`: {e}", col.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DataTable::new(table.columns().to_vec(), data)?)
}

fn exm_table(table: &DataTable, epsilon: f64, seed: u64) -> Result<DataTable, CliError> {
    let share = epsilon / table.n_columns() as f64;
    let data = table
        .columns()
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let support = finite_points(&col.kind).ok_or_else(|| {
                CliError::Data(format!(
                    "column `{}`: the exponential mechanism needs a finite discrete or categorical column",
                    col.name
                ))
            })?;
            let draws = StreamSeed(seed).child(Domain::Baseline, c as u64);
            exm_sample_discrete(&support, table.column(c), share, &draws)
                .map_err(|e| CliError::Data(format!("column `{}`: {e}", col.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DataTable::new(table.columns().to_vec(), data)?)
}

pub struct SimulateRequest {
    pub scenario: Scenario,
    pub reps: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub seed: u64,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub holdout: Option<Vec<f64>>,
    pub distributions: Option<Vec<ParametricDistribution>>,
    pub correlation: Option<f64>,
    pub check: bool,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn simulate(req: &SimulateRequest) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::new(req.scenario);
    cfg.seed = req.seed;
    if let Some(r) = req.reps {
        cfg.reps = r;
    }
    if let Some(e) = &req.epsilons {
        cfg.epsilons = e.clone();
    }
    if let Some(n) = req.n {
        cfg.n = n;
    }
    if let Some(p) = req.p {
        cfg.p = p;
    }
    if let Some(h) = &req.holdout {
        cfg.holdout_ratios = h.clone();
    }
    if let Some(d) = &req.distributions {
        cfg.distributions = d.clone();
    }
    if let Some(rho) = req.correlation {
        cfg.correlation = rho;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_experiment(&cfg)?;
    let mut text = report.to_string();
    let checks = if req.check { check_report(&cfg, &report) } else { vec![] };
    for c in &checks {
        text.push_str(&format!("{c}\n"));
    }
    print!("{text}");
    write_optional(req.output.as_deref(), &text)?;
    write_optional(req.csv.as_deref(), &report.to_csv())?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Check(format!(
            "{failed} of {} checks outside tolerance",
            checks.len()
        )));
    }
    Ok(())
}

fn write_optional(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AuditTarget {
    RatioBound,
    Oracle,
    Power,
    LinearCounterexample,
}

pub struct AuditRequest {
    pub target: AuditTarget,
    pub epsilons: Vec<f64>,
    pub distribution: Option<ParametricDistribution>,
    pub seed: u64,
    pub sims: usize,
    pub releases: Vec<usize>,
    pub gamma: f64,
    pub probe: f64,
    pub nodes: usize,
    pub output: Option<PathBuf>,
}

pub fn audit(req: &AuditRequest) -> Result<(), CliError> {
    let mut report = AuditReport {
        seed: Some(req.seed),
        ..AuditReport::default()
    };
    let usage = |e: dip_core::DipError| CliError::Usage(e.to_string());
    match req.target {
        AuditTarget::RatioBound => {
            let d = match req.distribution {
                Some(d) => d,
                None => ParametricDistribution::uniform(0.0, 1.0)?,
            };
            let discrete;
            let cdf: &dyn InvertibleCdf = if d.is_discrete() {
                discrete = ContinualizedParametric::new(d)?;
                &discrete
            } else {
                &d
            };
            for &eps in &req.epsilons {
                report
                    .ratio_checks
                    .push(density_ratio_bound_check(cdf, eps, 100).map_err(usage)?);
            }
        }
        AuditTarget::Oracle => {
            let d = match req.distribution {
                Some(d) => d,
                None => ParametricDistribution::bernoulli(0.3)?,
            };
            if !d.is_discrete() {
                return Err(CliError::Usage(format!(
                    "oracle needs a discrete distribution, got {d}"
                )));
            }
            let spec = JumpSpec::from_distribution(&d, 1e-12)?;
            for &eps in &req.epsilons {
                report
                    .oracles
                    .push(brute_force_output_distribution(&spec, eps, req.nodes).map_err(usage)?);
            }
        }
        AuditTarget::Power => {
            for &eps in &req.epsilons {
                for &m in &req.releases {
                    report.power.push(
                        repeated_query_power(m, eps, req.gamma, req.sims, req.seed, PowerConfig::default())
                            .map_err(usage)?,
                    );
                }
            }
        }
        AuditTarget::LinearCounterexample => {
            for &eps in &req.epsilons {
                for noise in [
                    AdditiveNoise::Laplace { scale: 1.0 / eps },
                    AdditiveNoise::Gaussian { sd: 1.0 },
                ] {
                    report
                        .counterexamples
                        .push(linear_mechanism_counterexample(eps, noise, req.probe).map_err(usage)?);
                }
            }
        }
    }
    let text = format!("{report}{}\n", if report.passed() { "PASS" } else { "FAIL" });
    print!("{text}");
    write_optional(req.output.as_deref(), &text)?;
    if !report.passed() {
        return Err(CliError::Check("audit invariant violated".into()));
    }
    Ok(())
}

/// Most distinct values a numeric column may have to be suggested as a
/// discrete column with an explicit support.
pub const MAX_SUGGESTED_POINTS: usize = 20;

fn suggest_column(name: &str, cells: &[&str]) -> ColumnSchema {
    let numbers: Option<Vec<f64>> = cells
        .iter()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let kind = match numbers {
        None => {
            let mut levels: Vec<String> = Vec::new();
            for c in cells {
                if !levels.iter().any(|l| l == c) {
                    levels.push(c.to_string());
                }
            }
            KindSpec::Categorical { levels }
        }
        Some(v) => {
            let mut distinct = v.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let integral = v.iter().all(|x| x.fract() == 0.0);
            if distinct.len() <= MAX_SUGGESTED_POINTS && distinct.len() < v.len() {
                KindSpec::Discrete {
                    support: Some(distinct),
                    lattice: None,
                }
            } else if integral && distinct[0] >= 0.0 {
                KindSpec::Discrete {
                    support: None,
                    lattice: Some(LatticeSpec {
                        origin: 0.0,
                        step: 1.0,
                        count: None,
                    }),
                }
            } else {
                KindSpec::Continuous
            }
        }
    };
    ColumnSchema {
        name: name.to_string(),
        kind,
        bounds: None,
    }
}

pub fn suggest_schema(raw: &RawCsv) -> Schema {
    Schema {
        columns: raw
            .headers
            .iter()
            .enumerate()
            .map(|(c, h)| {
                let cells: Vec<&str> = raw.rows.iter().map(|r| r[c].as_str()).collect();
                suggest_column(h, &cells)
            })
            .collect(),
    }
}

pub fn schema_suggest(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let raw = read_csv(input)?;
    if raw.rows.is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", input.display())));
    }
    let schema = suggest_schema(&raw);
    let body = toml::to_string(&schema).map_err(|e| CliError::Data(e.to_string()))?;
    let text = format!("# Suggested kinds; review every column before privatizing.\n\n{body}");
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suggestions() {
        let c = suggest_column("a", &["1.5", "2.25", "-3"]);
        assert_eq!(c.kind, KindSpec::Continuous);
        let c = suggest_column("b", &["1", "0", "1", "1"]);
        assert_eq!(
            c.kind,
            KindSpec::Discrete {
                support: Some(vec![0.0, 1.0]),
                lattice: None
            }
        );
        let many: Vec<String> = (0..50).map(|i| (i * 3).to_string()).collect();
        let refs: Vec<&str> = many.iter().map(String::as_str).collect();
        assert!(matches!(
            suggest_column("c", &refs).kind,
            KindSpec::Discrete { lattice: Some(_), .. }
        ));
        let c = suggest_column("d", &["x", "y", "x"]);
        assert_eq!(
            c.kind,
            KindSpec::Categorical {
                levels: vec!["x".into(), "y".into()]
            }
        );
    }
}
