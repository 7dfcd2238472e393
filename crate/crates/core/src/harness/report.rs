use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DipError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Np,
    Dip,
    Lrm,
    Exm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Np, Method::Dip, Method::Lrm, Method::Exm];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Np => "NP",
            Method::Dip => "DIP",
            Method::Lrm => "LRM",
            Method::Exm => "EXM",
        })
    }
}

impl FromStr for Method {
    type Err = DipError;

    fn from_str(s: &str) -> Result<Self, DipError> {
        match s.to_ascii_lowercase().as_str() {
            "np" => Ok(Method::Np),
            "dip" => Ok(Method::Dip),
            "lrm" => Ok(Method::Lrm),
            "exm" => Ok(Method::Exm),
            _ => Err(DipError::param("method", format!("unknown method `{s}`"))),
        }
    }
}

/// Mean and spread of one metric over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub reps: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let reps = values.len();
        let n = reps as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if reps > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            sd,
            se: sd / n.sqrt(),
            reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: String,
    pub method: Method,
    /// `None` for the non-private benchmark.
    pub epsilon: Option<f64>,
    pub holdout: Option<f64>,
    pub metric: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub title: String,
    pub seed: u64,
    /// Multiplier applied to values when displayed.
    pub scale: f64,
    pub cells: Vec<Cell>,
    /// Summed per-replicate seconds by method; not part of the reproducible output.
    pub runtimes: Vec<(Method, f64)>,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn find(&self, scenario: &str, method: Method, epsilon: Option<f64>, metric: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.method == method && c.epsilon == epsilon && c.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,epsilon,holdout,metric,mean,sd,se,reps\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{},{},{}",
                c.scenario.replace('"', "\"\""),
                c.method,
                opt(c.epsilon),
                opt(c.holdout),
                c.metric,
                c.summary.mean,
                c.summary.sd,
                c.summary.se,
                c.summary.reps
            );
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (seed {})", self.title, self.seed)?;
        if self.scale != 1.0 {
            writeln!(f, "values x{}", self.scale)?;
        }
        let rows: Vec<[String; 6]> = self
            .cells
            .iter()
            .map(|c| {
                [
                    c.scenario.clone(),
                    c.method.to_string(),
                    c.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
                    c.holdout
                        .map(|h| format!("{}%", h * 100.0))
                        .unwrap_or_else(|| "-".into()),
                    c.metric.clone(),
                    format!(
                        "{:.2} ({:.2}) se {:.3} n={}",
                        c.summary.mean * self.scale,
                        c.summary.sd * self.scale,
                        c.summary.se * self.scale,
                        c.summary.reps
                    ),
                ]
            })
            .collect();
        let header = ["scenario", "method", "eps", "hold", "metric", "mean (sd)"];
        let mut widths = header.map(str::len);
        for r in &rows {
            for (w, s) in widths.iter_mut().zip(r) {
                *w = (*w).max(s.len());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, cols: [&str; 6]| {
            let parts: Vec<String> = cols.iter().zip(widths).map(|(s, w)| format!("{s:<w$}")).collect();
            writeln!(f, "{}", parts.join("  ").trim_end())
        };
        line(f, header)?;
        for r in &rows {
            line(f, [&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]])?;
        }
        for (m, secs) in &self.runtimes {
            writeln!(f, "runtime {m}: {secs:.2}s")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Outcome of one tolerance check against a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Standard error of a difference between our mean and a reference reported
/// as mean (sd) over `reference_reps` replicates.
pub fn pooled_se(ours: &Summary, reference_sd: f64, reference_reps: usize) -> f64 {
    (ours.se.powi(2) + reference_sd.powi(2) / reference_reps as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.se - s.sd / 2.0).abs() < 1e-15);
        assert_eq!(Summary::of(&[7.0]).sd, 0.0);
    }

    #[test]
    fn pooled() {
        let s = Summary {
            mean: 0.0,
            sd: 0.0,
            se: 0.3,
            reps: 10,
        };
        assert!((pooled_se(&s, 4.0, 100) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn text_and_csv() {
        let cell = Cell {
            scenario: "Binomial(5,0.5)".into(),
            method: Method::Dip,
            epsilon: Some(1.0),
            holdout: None,
            metric: "error".into(),
            summary: Summary::of(&[0.001, 0.003]),
        };
        let r = BenchReport {
            title: "t".into(),
            seed: 3,
            scale: 1000.0,
            cells: vec![cell],
            runtimes: vec![],
            notes: vec!["OPM: not implemented".into()],
        };
        let csv = r.to_csv();
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("\"Binomial(5,0.5)\",DIP,1,,error,0.002"));
        let text = r.to_string();
        assert!(text.contains("2.00 (1.41)"));
        assert!(text.contains("OPM: not implemented"));
        assert_eq!("lrm".parse::<Method>().unwrap(), Method::Lrm);
    }
}
