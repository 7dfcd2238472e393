use nalgebra::{DMatrix, DVector};

use crate::dist::ParametricDistribution;
use crate::error::{DipError, Result};

/// One-sample Kolmogorov-Smirnov distance `sup |edf - F|`, taken over both
/// one-sided gaps at every sorted sample point.
pub fn ks_distance(sample: &[f64], reference: &ParametricDistribution) -> Result<f64> {
    if sample.is_empty() {
        return Err(DipError::Empty("sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference.cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// Relative size of the smallest R diagonal below which a design is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least squares by Householder QR. `design` is column-major: one vector
/// per regressor.
pub fn ols_fit(design: &[Vec<f64>], response: &[f64]) -> Result<Vec<f64>> {
    let p = design.len();
    if p == 0 {
        return Err(DipError::Empty("design"));
    }
    let n = response.len();
    if let Some(c) = design.iter().find(|c| c.len() != n) {
        return Err(DipError::DimensionMismatch(format!(
            "design column has {} rows, response has {n}",
            c.len()
        )));
    }
    if n < p {
        return Err(DipError::RankDeficient);
    }
    let x = DMatrix::from_fn(n, p, |i, j| design[j][i]);
    let qr = x.qr();
    let r = qr.r();
    let top = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if !(top > 0.0) || (0..p).any(|j| r[(j, j)].abs() <= RANK_TOLERANCE * top) {
        return Err(DipError::RankDeficient);
    }
    let mut qty = DVector::from_column_slice(response);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(DipError::RankDeficient)?;
    Ok(beta.iter().copied().collect())
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Pearson correlation matrix of the given columns.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = columns.len();
    let centred: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let d: Vec<f64> = c.iter().map(|x| x - m).collect();
            let ss = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (d, ss)
        })
        .collect();
    let mut out = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            out[a][b] = if a == b {
                1.0
            } else {
                let (da, sa) = &centred[a];
                let (db, sb) = &centred[b];
                da.iter().zip(db).map(|(x, y)| x * y).sum::<f64>() / (sa * sb)
            };
        }
    }
    out
}

pub fn frobenius_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        let u = ParametricDistribution::uniform(0.0, 1.0).unwrap();
        assert!((ks_distance(&[0.25, 0.75], &u).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(ks_distance(&[5.0, 6.0], &u).unwrap(), 1.0);
        let n = 999;
        let q: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let d = ks_distance(&q, &u).unwrap();
        assert!(d <= 1.0 / (n + 1) as f64 + 1.0 / n as f64);
        assert!(ks_distance(&[], &u).is_err());
    }

    #[test]
    fn ols_identity_and_exact_fit() {
        let design = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let b = ols_fit(&design, &[2.0, -1.0, 0.5]).unwrap();
        assert!(l2_distance(&b, &[2.0, -1.0, 0.5]) < 1e-14);

        let x1: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let x2: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 1.5 * a - 2.0 * b).collect();
        let b = ols_fit(&[x1, x2], &y).unwrap();
        assert!(l2_distance(&b, &[1.5, -2.0]) < 1e-10);
    }

    #[test]
    fn ols_residual_orthogonal() {
        let x1: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let x2: Vec<f64> = (0..40).map(|i| ((i * i) % 11) as f64).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 13) as f64).collect();
        let b = ols_fit(&[x1.clone(), x2.clone()], &y).unwrap();
        let r: Vec<f64> = (0..40).map(|i| y[i] - b[0] * x1[i] - b[1] * x2[i]).collect();
        for x in [&x1, &x2] {
            let dot: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8, "{dot}");
        }
    }

    #[test]
    fn ols_rejects_collinear() {
        let x1: Vec<f64> = (0..10).map(f64::from).collect();
        let x2: Vec<f64> = x1.iter().map(|x| 2.0 * x).collect();
        assert!(matches!(ols_fit(&[x1, x2], &[1.0; 10]), Err(DipError::RankDeficient)));
    }

    #[test]
    fn correlation_of_linear_pair() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|x| 3.0 - x).collect();
        let r = correlation_matrix(&[a, b]);
        assert!((r[0][1] + 1.0).abs() < 1e-14);
        assert_eq!(frobenius_distance(&r, &r), 0.0);
    }
}
