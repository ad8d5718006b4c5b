//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use mrct_core::data::{discretize_covariates, partition_by_region, Arm, DatasetBuilder, Endpoint, TrialDataset};
use mrct_core::num::{Matrix, RngStream};

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let pivot = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, pivot);
        let d = m[c][c];
        assert!(d.abs() > 1e-300, "singular matrix");
        for v in &mut m[c] {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot_row = m[c].clone();
                    for (v, p) in m[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn xtx(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = rows[0].len();
    let mut out = vec![vec![0.0; k]; k];
    for r in rows {
        for a in 0..k {
            for b in 0..k {
                out[a][b] += r[a] * r[b];
            }
        }
    }
    out
}

/// Normal-equation least squares.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let inv = invert(&xtx(rows));
    let mut xty = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for a in 0..k {
            xty[a] += r[a] * yi;
        }
    }
    (0..k).map(|a| (0..k).map(|b| inv[a][b] * xty[b]).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Leave-one-out predictions by refitting without each row in turn.
pub fn brute_force_loo(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    (0..rows.len())
        .map(|i| {
            let keep: Vec<usize> = (0..rows.len()).filter(|&j| j != i).collect();
            let r: Vec<Vec<f64>> = keep.iter().map(|&j| rows[j].clone()).collect();
            let yy: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
            dot(&normal_equations(&r, &yy), &rows[i])
        })
        .collect()
}

/// Random design with an intercept and `k − 1` standard normal columns.
pub fn random_design(rng: &mut RngStream, n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..k).map(|_| rng.standard_normal()));
            r
        })
        .collect();
    let y = rows.iter().map(|r| r.iter().sum::<f64>() + rng.standard_normal()).collect();
    (rows, y)
}

pub fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Wald statistic of the trailing `block` coefficients computed from the
/// normal equations and an explicitly inverted covariance block.
pub fn wald_quadratic_form(rows: &[Vec<f64>], y: &[f64], block: std::ops::Range<usize>) -> f64 {
    let (n, k) = (rows.len(), rows[0].len());
    let beta = normal_equations(rows, y);
    let rss: f64 = rows.iter().zip(y).map(|(r, &yi)| (yi - dot(r, &beta)).powi(2)).sum();
    let s2 = rss / (n - k) as f64;
    let inv = invert(&xtx(rows));
    let idx: Vec<usize> = block.collect();
    let cov: Vec<Vec<f64>> = idx.iter().map(|&a| idx.iter().map(|&b| s2 * inv[a][b]).collect()).collect();
    let cinv = invert(&cov);
    let b: Vec<f64> = idx.iter().map(|&a| beta[a]).collect();
    (0..b.len()).map(|a| (0..b.len()).map(|c| b[a] * cinv[a][c] * b[c]).sum::<f64>()).sum()
}

/// Small continuous trial with two regions, `p` covariates and alternating
/// arms.
pub fn small_trial(rng: &mut RngStream, n_r: usize, n_o: usize, p: usize, effect: f64) -> TrialDataset {
    let names = (1..=p).map(|s| format!("x{s}")).collect();
    let mut b = DatasetBuilder::new(Endpoint::Continuous, names, 0.5).unwrap();
    for (label, n) in [("r", n_r), ("o", n_o)] {
        for i in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            let arm = if i % 2 == 0 { Arm::Treatment } else { Arm::Control };
            let t = if arm == Arm::Treatment { 1.0 } else { 0.0 };
            let y = x.iter().sum::<f64>() + effect * t * (1.0 + x[0]) + rng.standard_normal();
            b.push(y, None, arm, label, &x).unwrap();
        }
    }
    b.finish().unwrap()
}

pub fn discretized_small_trial(seed: u64, n_r: usize, n_o: usize, p: usize) -> TrialDataset {
    let d = small_trial(&mut RngStream::new(seed, 0), n_r, n_o, p, 1.0);
    let d = discretize_covariates(&d).unwrap();
    partition_by_region(&d, "r").unwrap();
    d
}
