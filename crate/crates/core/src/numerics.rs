//! Dense linear algebra used by the rest of the crate.
//!
//! Everything here works on [`DenseMatrix`], a row-major `f64` matrix. The
//! ridge solve goes through the normal equations (Cholesky, with an LU
//! fallback) and eigenvalues come from Householder reduction to Hessenberg
//! form followed by Francis double-shift QR.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix with at least one row and one column.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("from_vec", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dim("from_rows", cols, bad.len()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("{} rows on the right", self.cols),
                other.rows,
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(
                "sub",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Eigenvalues of a square matrix, with multiplicity, in no particular order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Magnitudes sorted ascending.
    pub fn sorted_magnitudes(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.values.iter().map(|z| z.norm()).collect();
        m.sort_by(f64::total_cmp);
        m
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn mat_vec(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols != v.len() {
        return Err(Error::dim("mat_vec", m.cols, v.len()));
    }
    Ok((0..m.rows)
        .map(|r| m.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect())
}

/// Computes `X Xᵀ` for an `n × t` matrix given as `t` columns of length `n`.
///
/// Columns are the natural layout for harvested reservoir states, so the
/// Gram matrix is accumulated as a sum of rank-one updates.
pub fn gram_of_columns<'a>(columns: impl IntoIterator<Item = &'a [f64]>, n: usize) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(n, n);
    for col in columns {
        debug_assert_eq!(col.len(), n);
        for i in 0..n {
            let xi = col[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut g.data[i * n + i..(i + 1) * n];
            for (gij, xj) in row.iter_mut().zip(&col[i..]) {
                *gij += xi * xj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g.data[i * n + j] = g.data[j * n + i];
        }
    }
    g
}

/// Solves `A Z = B` for a symmetric positive (semi-)definite `A` that already
/// carries its diagonal shift.
///
/// Cholesky is tried first; if a pivot is not safely positive the system is
/// retried with partially pivoted LU. Pivots below `order · ε · max|A|` are
/// treated as singular.
pub fn solve_regularized(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::dim(
            "solve_regularized",
            "square matrix",
            format!("{}x{}", a.rows, a.cols),
        ));
    }
    if a.rows != b.rows {
        return Err(Error::dim("solve_regularized", a.rows, b.rows));
    }
    let tol = a.rows as f64 * f64::EPSILON * a.max_abs();
    if tol == 0.0 {
        return Err(Error::Singular { hint: "" });
    }
    match cholesky(a, tol) {
        Some(l) => Ok(cholesky_solve(&l, b)),
        None => lu_solve(a, b, tol),
    }
}

fn cholesky(a: &DenseMatrix, tol: f64) -> Option<DenseMatrix> {
    let n = a.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let d = a[(j, j)] - lj.iter().map(|v| v * v).sum::<f64>();
        if d <= tol || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let (head, tail) = l.data.split_at(i * n);
            let li = &tail[..j];
            let lj = &head[j * n..j * n + j];
            let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            l.data[i * n + j] = (a[(i, j)] - s) / djj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows;
    let mut z = b.clone();
    for c in 0..b.cols {
        // forward: L y = b
        for i in 0..n {
            let mut s = z[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
    }
    z
}

fn lu_solve(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let n = a.rows;
    let mut lu = a.clone();
    let mut z = b.clone();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
            .unwrap_or(k);
        if lu[(p, k)].abs() <= tol {
            return Err(Error::Singular { hint: "" });
        }
        if p != k {
            for c in 0..n {
                lu.data.swap(k * n + c, p * n + c);
            }
            for c in 0..z.cols {
                let w = z.cols;
                z.data.swap(k * w + c, p * w + c);
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            if f == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                lu.data[i * n + c] -= f * lu.data[k * n + c];
            }
            for c in 0..z.cols {
                let w = z.cols;
                z.data[i * w + c] -= f * z.data[k * w + c];
            }
        }
    }
    for c in 0..z.cols {
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * z[(k, c)];
            }
            z[(i, c)] = s / lu[(i, i)];
        }
    }
    Ok(z)
}

/// All eigenvalues of a square matrix.
pub fn eigenvalues(m: &DenseMatrix) -> Result<ComplexSpectrum> {
    if !m.is_square() {
        return Err(Error::dim(
            "eigenvalues",
            "square matrix",
            format!("{}x{}", m.rows, m.cols),
        ));
    }
    let n = m.rows;
    let mut h = m.data.clone();
    hessenberg(&mut h, n);
    let (re, im) = hqr(&mut h, n)?;
    Ok(ComplexSpectrum {
        values: re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect(),
    })
}

pub fn spectral_radius(m: &DenseMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.max_magnitude())
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i * n + m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        // H = (I - u uᵀ/h) H (I - u uᵀ/h)
        for j in m..n {
            let f = (m..=high).map(|i| ort[i] * h[i * n + j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f = (m..=high).map(|j| ort[j] * h[i * n + j]).sum::<f64>() / hh;
            for j in m..=high {
                h[i * n + j] -= f * ort[j];
            }
        }
        h[m * n + m - 1] = scale * g;
        for i in (m + 1)..=high {
            h[i * n + m - 1] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
/// Periodic exceptional shifts break the stagnation that pure cyclic
/// permutations cause.
fn hqr(h: &mut [f64], nn: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];
    let at = |i: usize, j: usize| i * nn + j;
    let eps = f64::EPSILON;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[at(i, j)].abs();
        }
    }

    let max_iter = 30 * nn.max(10);
    let mut iter = 0usize;
    let mut n = nn as isize - 1;

    while n >= 0 {
        let nu = n as usize;
        // find a negligible subdiagonal entry
        let mut l = nu;
        while l > 0 {
            let mut s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[at(l, l - 1)].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            re[nu] = h[at(nu, nu)];
            im[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let w = h[at(nu, nu - 1)] * h[at(nu - 1, nu)];
            let p = (h[at(nu - 1, nu - 1)] - h[at(nu, nu)]) / 2.0;
            let q = p * p + w;
            let z = q.abs().sqrt();
            let x = h[at(nu, nu)];
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                re[nu - 1] = x + z;
                re[nu] = if z != 0.0 { x - w / z } else { x + z };
                im[nu - 1] = 0.0;
                im[nu] = 0.0;
            } else {
                re[nu - 1] = x + p;
                re[nu] = x + p;
                im[nu - 1] = z;
                im[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            if iter > max_iter {
                return Err(Error::NoConvergence(iter));
            }
            let mut x = h[at(nu, nu)];
            let mut y = h[at(nu - 1, nu - 1)];
            let mut w = h[at(nu, nu - 1)] * h[at(nu - 1, nu)];

            // exceptional shifts, alternating between the top and the bottom
            // of the active block
            if iter > 0 && iter % 10 == 0 {
                let round = iter / 10;
                let (s, d) = if round % 2 == 1 {
                    (h[at(l + 1, l)].abs() + h[at(l + 2, l + 1)].abs(), h[at(l, l)])
                } else {
                    (h[at(nu, nu - 1)].abs() + h[at(nu - 1, nu - 2)].abs(), h[at(nu, nu)])
                };
                let c = 0.75 + 0.05 * ((round - 1) % 4) as f64;
                x = d + c * s;
                y = x;
                w = -0.4375 * s * s;
            }
            iter += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[at(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
                q = h[at(m + 1, m + 1)] - z - rr - ss;
                r = h[at(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[at(m, m - 1)].abs() * (q.abs() + r.abs());
                let rhs =
                    eps * (p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[at(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[at(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            for k in m..nu {
                let notlast = k != nu - 1;
                let mut xk = 0.0;
                if k != m {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if notlast { h[at(k + 2, k - 1)] } else { 0.0 };
                    xk = p.abs() + q.abs() + r.abs();
                    if xk == 0.0 {
                        continue;
                    }
                    p /= xk;
                    q /= xk;
                    r /= xk;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[at(k, k - 1)] = -s * xk;
                } else if l != m {
                    h[at(k, k - 1)] = -h[at(k, k - 1)];
                }
                p += s;
                let hx = p / s;
                let hy = q / s;
                let hz = r / s;
                q /= p;
                r /= p;

                for j in k..=nu {
                    let mut pp = h[at(k, j)] + q * h[at(k + 1, j)];
                    if notlast {
                        pp += r * h[at(k + 2, j)];
                        h[at(k + 2, j)] -= pp * hz;
                    }
                    h[at(k, j)] -= pp * hx;
                    h[at(k + 1, j)] -= pp * hy;
                }
                for i in l..=nu.min(k + 3) {
                    let mut pp = hx * h[at(i, k)] + hy * h[at(i, k + 1)];
                    if notlast {
                        pp += hz * h[at(i, k + 2)];
                        h[at(i, k + 2)] -= pp * r;
                    }
                    h[at(i, k)] -= pp;
                    h[at(i, k + 1)] -= pp * q;
                }
            }
        }
    }
    Ok((re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cyclic_shift(n: usize, scale: f64) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[((i + 1) % n, i)] = scale;
        }
        m
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        let b = random_matrix(rng, n, n);
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.1;
        }
        a
    }

    /// Inverse of a 3x3 matrix by cofactors.
    fn cofactor_inverse3(a: &DenseMatrix) -> DenseMatrix {
        let m = |r: usize, c: usize| a[(r, c)];
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        let mut inv = DenseMatrix::zeros(3, 3);
        for r in 0..3 {
            for c in 0..3 {
                let rows: Vec<usize> = (0..3).filter(|&i| i != c).collect();
                let cols: Vec<usize> = (0..3).filter(|&j| j != r).collect();
                let minor = m(rows[0], cols[0]) * m(rows[1], cols[1])
                    - m(rows[0], cols[1]) * m(rows[1], cols[0]);
                let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
                inv[(r, c)] = sign * minor / det;
            }
        }
        inv
    }

    #[test]
    fn mat_vec_examples() {
        assert_eq!(
            mat_vec(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            mat_vec(&DenseMatrix::zeros(2, 2), &[5.0, 7.0]).unwrap(),
            vec![0.0, 0.0]
        );
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_eq!(mat_vec(&m, &[1.0, 0.0]).unwrap(), vec![0.0, 0.5]);
        assert!(matches!(
            mat_vec(&m, &[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(DenseMatrix::from_vec(0, 2, vec![]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::from_vec(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn solve_examples() {
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(solve_regularized(&DenseMatrix::identity(2), &b).unwrap(), b);

        let a = DenseMatrix::identity(2).scaled(2.0);
        let b = DenseMatrix::from_rows(&[vec![4.0], vec![6.0]]).unwrap();
        let z = solve_regularized(&a, &b).unwrap();
        assert_abs_diff_eq!(z[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[(1, 0)], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_matches_cofactor_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_spd(&mut rng, 3);
            let b = random_matrix(&mut rng, 3, 2);
            let expected = cofactor_inverse3(&a).matmul(&b).unwrap();
            let z = solve_regularized(&a, &b).unwrap();
            for r in 0..3 {
                for c in 0..2 {
                    assert_abs_diff_eq!(z[(r, c)], expected[(r, c)], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        assert!(matches!(solve_regularized(&a, &b), Err(Error::Singular { .. })));
        let z = DenseMatrix::zeros(2, 2);
        assert!(matches!(solve_regularized(&z, &b), Err(Error::Singular { .. })));
    }

    #[test]
    fn solve_falls_back_to_lu_for_indefinite() {
        // symmetric but indefinite: Cholesky fails, LU succeeds
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![2.0], vec![3.0]]).unwrap();
        let z = solve_regularized(&a, &b).unwrap();
        assert_abs_diff_eq!(z[(0, 0)], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[(1, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_residual_random_spd_up_to_50() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 13, 30, 50] {
            let a = random_spd(&mut rng, n);
            let b = random_matrix(&mut rng, n, 3);
            let z = solve_regularized(&a, &b).unwrap();
            let resid = a.matmul(&z).unwrap().sub(&b).unwrap().frobenius_norm();
            assert!(resid <= 1e-8 * b.frobenius_norm(), "n={n} resid={resid}");
        }
    }

    #[test]
    fn gram_matches_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 7, 40);
        let cols: Vec<Vec<f64>> = (0..40).map(|c| x.column(c)).collect();
        let g = gram_of_columns(cols.iter().map(Vec::as_slice), 7);
        let expected = x.matmul(&x.transpose()).unwrap();
        assert!(g.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn eigen_examples() {
        let spec = eigenvalues(&DenseMatrix::diag(&[0.3, 0.7])).unwrap();
        let mut re: Vec<f64> = spec.values.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(re[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(re[1], 0.7, epsilon = 1e-14);
        assert!(spec.values.iter().all(|z| z.im == 0.0));

        let rot = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let spec = eigenvalues(&rot).unwrap();
        let mut im: Vec<f64> = spec.values.iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(im[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(im[1], 1.0, epsilon = 1e-14);
        assert!(spec.values.iter().all(|z| z.re.abs() < 1e-14));

        // 0.5-scaled 4-cycle: 0.5 times the fourth roots of unity
        let spec = eigenvalues(&cyclic_shift(4, 0.5)).unwrap();
        assert_eq!(spec.len(), 4);
        for root in [(0.5, 0.0), (0.0, 0.5), (-0.5, 0.0), (0.0, -0.5)] {
            assert!(spec
                .values
                .iter()
                .any(|z| (z.re - root.0).abs() < 1e-10 && (z.im - root.1).abs() < 1e-10));
        }

        assert!(eigenvalues(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        for n in 2..=200 {
            assert_abs_diff_eq!(
                spectral_radius(&cyclic_shift(n, 0.9)).unwrap(),
                0.9,
                epsilon = 1e-10
            );
        }
        assert_eq!(spectral_radius(&DenseMatrix::zeros(4, 4)).unwrap(), 0.0);
        assert_eq!(spectral_radius(&DenseMatrix::zeros(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn eigenvalues_match_trace_and_count_on_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [3, 8, 40, 120] {
            let m = random_matrix(&mut rng, n, n);
            let spec = eigenvalues(&m).unwrap();
            assert_eq!(spec.len(), n);
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let sum_re: f64 = spec.values.iter().map(|z| z.re).sum();
            let sum_im: f64 = spec.values.iter().map(|z| z.im).sum();
            assert_abs_diff_eq!(sum_re, trace, epsilon = 1e-9);
            assert_abs_diff_eq!(sum_im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn eigenvalues_of_triangular_are_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 30;
        let mut m = random_matrix(&mut rng, n, n);
        for r in 0..n {
            for c in 0..r {
                m[(r, c)] = 0.0;
            }
        }
        let mut got: Vec<f64> = eigenvalues(&m).unwrap().values.iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cyclic_shift_eigen_magnitudes(n in 2usize..120, scale in 0.05f64..1.5) {
            let spec = eigenvalues(&cyclic_shift(n, scale)).unwrap();
            prop_assert_eq!(spec.len(), n);
            for z in &spec.values {
                prop_assert!((z.norm() - scale).abs() < 1e-10, "|z|={} scale={}", z.norm(), scale);
            }
        }

        #[test]
        fn spectral_radius_is_homogeneous(seed in any::<u64>(), n in 2usize..25, c in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n, n);
            let r = spectral_radius(&m).unwrap();
            let rc = spectral_radius(&m.scaled(c)).unwrap();
            prop_assert!((rc - c.abs() * r).abs() < 1e-9, "{} vs {}", rc, c.abs() * r);
        }
    }
}
