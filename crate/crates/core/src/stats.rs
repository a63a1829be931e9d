//! Small numeric helpers: moments, Pearson correlation and least squares.

#![allow(clippy::needless_range_loop)]

use thiserror::Error;

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// z-scores using the sample standard deviation; `None` for input that is
/// constant up to rounding.
pub fn standardize(xs: &[f64]) -> Option<Vec<f64>> {
    let m = mean(xs)?;
    let sd = sample_variance(xs)?.sqrt();
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if sd <= 1e-12 * scale || !sd.is_finite() {
        return None;
    }
    Some(xs.iter().map(|x| (x - m) / sd).collect())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OlsError {
    #[error("need more observations ({observations}) than parameters ({parameters})")]
    TooFewObservations {
        observations: usize,
        parameters: usize,
    },
    #[error("design matrix is rank deficient (pivot {pivot} vanished)")]
    RankDeficient { pivot: usize },
    #[error("regressor columns have unequal lengths")]
    Ragged,
}

/// Least-squares fit with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one entry per regressor.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
}

/// Ordinary least squares `y ~ 1 + x_1 + ... + x_p` with classical
/// homoskedastic standard errors, solved through the normal equations.
pub fn ols(columns: &[&[f64]], y: &[f64]) -> Result<OlsFit, OlsError> {
    let n = y.len();
    let p = columns.len() + 1;
    if columns.iter().any(|c| c.len() != n) {
        return Err(OlsError::Ragged);
    }
    if n <= p {
        return Err(OlsError::TooFewObservations {
            observations: n,
            parameters: p,
        });
    }
    let value = |row: usize, col: usize| if col == 0 { 1.0 } else { columns[col - 1][row] };

    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for row in 0..n {
        for a in 0..p {
            let va = value(row, a);
            xty[a] += va * y[row];
            for b in a..p {
                xtx[a][b] += va * value(row, b);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a][b] = xtx[b][a];
        }
    }
    let inverse = invert(&xtx)?;
    let coefficients: Vec<f64> = (0..p)
        .map(|a| (0..p).map(|b| inverse[a][b] * xty[b]).sum())
        .collect();
    let rss: f64 = (0..n)
        .map(|row| {
            let fitted: f64 = (0..p).map(|c| coefficients[c] * value(row, c)).sum();
            (y[row] - fitted).powi(2)
        })
        .sum();
    let residual_variance = rss / (n - p) as f64;
    let std_errors = (0..p)
        .map(|a| (residual_variance * inverse[a][a]).max(0.0).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients,
        std_errors,
        residual_variance,
    })
}

/// Gauss-Jordan inversion with partial pivoting.
fn invert(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, OlsError> {
    let p = matrix.len();
    let scale = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| row[i].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(OlsError::RankDeficient { pivot: col });
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..p {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..p {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for j in 0..p {
                        a[row][j] -= f * a[col][j];
                        inv[row][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}
