//! Ordinary least squares through a thin QR factorization.
//!
//! The factorization is modified Gram–Schmidt with one reorthogonalization
//! pass. A column is declared dependent when the norm left after projecting
//! out the earlier columns falls below `RANK_TOL` times its original norm.
//! Strict fits reject such columns; pruned fits drop them and remember which
//! original columns survived.

use crate::error::{Error, Result};

pub const RANK_TOL: f64 = 1e-10;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::InvalidArgument("ragged design columns".into()));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in columns {
            data.extend_from_slice(c);
        }
        Ok(Matrix { nrows, ncols, data })
    }

    /// Builds from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidArgument("ragged design rows".into()));
        }
        let mut m = Matrix::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    /// Copy keeping only the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            let src = self.col(j);
            let dst = m.col_mut(j);
            for (k, &i) in rows.iter().enumerate() {
                dst[k] = src[i];
            }
        }
        m
    }

    /// Copy keeping only the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        Matrix {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin QR of the kept columns of a design.
#[derive(Debug, Clone)]
struct ThinQr {
    q: Matrix,
    /// Upper-triangular, k×k, column-major.
    r: Matrix,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

fn thin_qr(design: &Matrix) -> ThinQr {
    let n = design.nrows();
    let p = design.ncols();
    let mut q_cols: Vec<f64> = Vec::with_capacity(n * p);
    let mut r_entries: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut kept = Vec::with_capacity(p);
    let mut dropped = Vec::new();
    let mut v = vec![0.0; n];

    for j in 0..p {
        v.copy_from_slice(design.col(j));
        let orig = dot(&v, &v).sqrt();
        let k = kept.len();
        let mut rcol = vec![0.0; k + 1];
        for _pass in 0..2 {
            for m in 0..k {
                let qm = &q_cols[m * n..(m + 1) * n];
                let c = dot(qm, &v);
                rcol[m] += c;
                for (vi, qi) in v.iter_mut().zip(qm) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if orig == 0.0 || !(norm >= RANK_TOL * orig) {
            dropped.push(j);
            continue;
        }
        rcol[k] = norm;
        q_cols.extend(v.iter().map(|x| x / norm));
        r_entries.push(rcol);
        kept.push(j);
    }

    let k = kept.len();
    let q = Matrix {
        nrows: n,
        ncols: k,
        data: q_cols,
    };
    let mut r = Matrix::zeros(k, k);
    for (j, col) in r_entries.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            r.set(i, j, val);
        }
    }
    ThinQr { q, r, kept, dropped }
}

/// Inverse of an upper-triangular matrix.
fn upper_inverse(r: &Matrix) -> Matrix {
    let k = r.nrows();
    let mut inv = Matrix::zeros(k, k);
    for j in 0..k {
        inv.set(j, j, 1.0 / r.get(j, j));
        for i in (0..j).rev() {
            let mut s = 0.0;
            for m in (i + 1)..=j {
                s += r.get(i, m) * inv.get(m, j);
            }
            inv.set(i, j, -s / r.get(i, i));
        }
    }
    inv
}

/// A fitted least-squares model.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// residual_variance × (XᵀX)⁻¹ over the kept columns.
    pub covariance: Matrix,
    /// (XᵀX)⁻¹ over the kept columns.
    pub xtx_inv: Matrix,
    pub residual_variance: f64,
    pub hat_diagonals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// Original design column of each coefficient.
    pub columns: Vec<usize>,
    /// Design columns dropped as linearly dependent.
    pub dropped: Vec<usize>,
    q: Matrix,
    r_inv: Matrix,
}

impl OlsFit {
    /// Prediction at a full-width design row (dropped columns are ignored).
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(&self.coefficients)
            .map(|(&j, b)| row[j] * b)
            .sum()
    }

    pub fn residuals(&self, response: &[f64]) -> Vec<f64> {
        response.iter().zip(&self.fitted).map(|(y, f)| y - f).collect()
    }

    /// Heteroskedasticity-consistent (HC0) sandwich covariance.
    pub fn sandwich_covariance(&self, response: &[f64]) -> Matrix {
        let e = self.residuals(response);
        let k = self.k;
        // (XᵀX)⁻¹Xᵀ diag(e²) X(XᵀX)⁻¹ = R⁻¹ (Qᵀ diag(e²) Q) R⁻ᵀ
        let mut meat = Matrix::zeros(k, k);
        for a in 0..k {
            let qa = self.q.col(a);
            for b in 0..=a {
                let qb = self.q.col(b);
                let s: f64 = qa
                    .iter()
                    .zip(qb)
                    .zip(&e)
                    .map(|((x, y), r)| x * y * r * r)
                    .sum();
                meat.set(a, b, s);
                meat.set(b, a, s);
            }
        }
        let mut tmp = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for m in i..k {
                    s += self.r_inv.get(i, m) * meat.get(m, j);
                }
                tmp.set(i, j, s);
            }
        }
        let mut out = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let mut s = 0.0;
                for m in j..k {
                    s += tmp.get(i, m) * self.r_inv.get(j, m);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        out
    }
}

fn fit_from_qr(qr: ThinQr, response: &[f64]) -> Result<OlsFit> {
    let n = qr.q.nrows();
    let k = qr.kept.len();
    if n <= k {
        return Err(Error::TooFewObservations { needed: k + 1, got: n });
    }
    let qty: Vec<f64> = (0..k).map(|m| dot(qr.q.col(m), response)).collect();
    let r_inv = upper_inverse(&qr.r);
    let coefficients: Vec<f64> = (0..k)
        .map(|i| (i..k).map(|m| r_inv.get(i, m) * qty[m]).sum())
        .collect();

    let mut fitted = vec![0.0; n];
    let mut hat = vec![0.0; n];
    for m in 0..k {
        let qm = qr.q.col(m);
        let c = qty[m];
        for i in 0..n {
            fitted[i] += qm[i] * c;
            hat[i] += qm[i] * qm[i];
        }
    }
    let rss: f64 = response
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    let residual_variance = rss / (n - k) as f64;

    let mut xtx_inv = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            // (R⁻¹R⁻ᵀ)ᵢⱼ = Σ_m R⁻¹[i,m] R⁻¹[j,m], nonzero only for m ≥ max(i, j) = i.
            let s: f64 = (i..k).map(|m| r_inv.get(i, m) * r_inv.get(j, m)).sum();
            xtx_inv.set(i, j, s);
            xtx_inv.set(j, i, s);
        }
    }
    let mut covariance = xtx_inv.clone();
    covariance.data.iter_mut().for_each(|v| *v *= residual_variance);

    Ok(OlsFit {
        coefficients,
        covariance,
        xtx_inv,
        residual_variance,
        hat_diagonals: hat,
        fitted,
        n,
        k,
        columns: qr.kept,
        dropped: qr.dropped,
        q: qr.q,
        r_inv,
    })
}

fn check_inputs(design: &Matrix, response: &[f64]) -> Result<()> {
    if design.nrows() != response.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but response has {} entries",
            design.nrows(),
            response.len()
        )));
    }
    if design.data.iter().chain(response).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input"));
    }
    Ok(())
}

/// Least-squares fit that requires full column rank.
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<OlsFit> {
    check_inputs(design, response)?;
    if design.nrows() <= design.ncols() {
        return Err(Error::TooFewObservations {
            needed: design.ncols() + 1,
            got: design.nrows(),
        });
    }
    let qr = thin_qr(design);
    if let Some(&column) = qr.dropped.first() {
        return Err(Error::RankDeficient { column });
    }
    fit_from_qr(qr, response)
}

/// Least-squares fit that drops linearly dependent columns.
pub fn ols_fit_pruned(design: &Matrix, response: &[f64]) -> Result<OlsFit> {
    check_inputs(design, response)?;
    let qr = thin_qr(design);
    if qr.kept.is_empty() {
        return Err(Error::RankDeficient { column: 0 });
    }
    fit_from_qr(qr, response)
}

/// Leverage at or above this is treated as exact interpolation.
pub const UNIT_LEVERAGE_TOL: f64 = 1e-10;

/// Leave-one-out fitted values ŷᵢ − hᵢᵢeᵢ/(1 − hᵢᵢ).
///
/// Fails on the first observation whose leverage is numerically one; use
/// [`unit_leverage_indices`] to find all of them.
pub fn loo_prediction(fit: &OlsFit, response: &[f64]) -> Result<Vec<f64>> {
    if response.len() != fit.n {
        return Err(Error::InvalidArgument("response length differs from fit".into()));
    }
    fit.fitted
        .iter()
        .zip(&fit.hat_diagonals)
        .zip(response)
        .enumerate()
        .map(|(i, ((&f, &h), &y))| {
            if h >= 1.0 - UNIT_LEVERAGE_TOL {
                Err(Error::UnitLeverage { index: i })
            } else {
                Ok(f - h * (y - f) / (1.0 - h))
            }
        })
        .collect()
}

pub fn unit_leverage_indices(fit: &OlsFit) -> Vec<usize> {
    fit.hat_diagonals
        .iter()
        .enumerate()
        .filter(|(_, &h)| h >= 1.0 - UNIT_LEVERAGE_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Inverts a symmetric positive definite matrix by Cholesky factorization.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let mut l = Matrix::zeros(k, k);
    let scale = (0..k).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    for j in 0..k {
        let mut d = a.get(j, j);
        for m in 0..j {
            d -= l.get(j, m) * l.get(j, m);
        }
        if !(d > 1e-14 * scale) {
            return Err(Error::DegenerateWald(format!(
                "covariance block is singular at column {j}"
            )));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..k {
            let mut s = a.get(i, j);
            for m in 0..j {
                s -= l.get(i, m) * l.get(j, m);
            }
            l.set(i, j, s / d);
        }
    }
    // L⁻¹ by forward substitution, then A⁻¹ = L⁻ᵀL⁻¹.
    let mut linv = Matrix::zeros(k, k);
    for j in 0..k {
        linv.set(j, j, 1.0 / l.get(j, j));
        for i in (j + 1)..k {
            let mut s = 0.0;
            for m in j..i {
                s += l.get(i, m) * linv.get(m, j);
            }
            linv.set(i, j, -s / l.get(i, i));
        }
    }
    let mut inv = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (i..k).map(|m| linv.get(m, i) * linv.get(m, j)).sum();
            inv.set(i, j, s);
            inv.set(j, i, s);
        }
    }
    Ok(inv)
}
