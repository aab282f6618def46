//! Dense matrix storage and the symmetric/Hermitian eigensolver.
//!
//! The eigensolver is the classical Householder tridiagonalization followed
//! by implicit-shift QL with eigenvector accumulation (the EISPACK
//! tred2/tql2 pair). It is single-threaded and runs the same instruction
//! sequence for identical input bits, which makes spectra bit-reproducible.
//! Complex Hermitian matrices are handled through the real symmetric
//! embedding [[X, -Y], [Y, X]] of A = X + iY, whose spectrum is that of A
//! with every multiplicity doubled.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        CMat {
            rows,
            cols,
            data: data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.at(i, j).conj());
            }
        }
        out
    }

    /// C = self * other.
    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = CMat::zeros(m, n);
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in arow.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// self^H * self, exploiting that the result is Hermitian.
    pub fn gram(&self) -> CMat {
        let (m, n) = (self.rows, self.cols);
        let mut out = CMat::zeros(n, n);
        for p in 0..m {
            let row = &self.data[p * n..(p + 1) * n];
            for i in 0..n {
                let ci = row[i].conj();
                if ci == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in i..n {
                    orow[j] += ci * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                let v = out.at(j, i).conj();
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest |A_ij - conj(A_ji)| over the matrix.
    pub fn hermitian_deviation(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Replace A by (A + A^H)/2.
    pub fn symmetrize_hermitian(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            let d = self.at(i, i);
            self.set(i, i, Complex64::new(d.re, 0.0));
            for j in i + 1..n {
                let v = 0.5 * (self.at(i, j) + self.at(j, i).conj());
                self.set(i, j, v);
                self.set(j, i, v.conj());
            }
        }
    }

    /// Exact real view when every imaginary part is zero.
    pub fn as_real(&self) -> Option<Vec<f64>> {
        if self.data.iter().all(|z| z.im == 0.0) {
            Some(self.data.iter().map(|z| z.re).collect())
        } else {
            None
        }
    }
}

const QL_MAX_ITER: usize = 60;

/// Householder reduction of a real symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transformation.
///
/// `v` holds the symmetric input column-major (equals row-major for symmetric
/// data) and is overwritten with the accumulated transformation; `d` receives
/// the diagonal, `e` the subdiagonal (e[0] = 0).
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let c = |i: usize, j: usize| j * n + i; // column-major index

    for j in 0..n {
        d[j] = v[c(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut h = 0.0f64;
        let mut scale = 0.0f64;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[c(i - 1, j)];
                v[c(i, j)] = 0.0;
                v[c(j, i)] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            // apply the reflector to the remaining submatrix
            for j in 0..i {
                let f = d[j];
                v[c(j, i)] = f;
                let mut g = e[j] + v[c(j, j)] * f;
                let col_j = &v[j * n..j * n + i];
                for (k, &vkj) in col_j.iter().enumerate().take(i).skip(j + 1) {
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            let mut f = 0.0f64;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col_j = &mut v[j * n..j * n + i];
                for (k, vkj) in col_j.iter_mut().enumerate().take(i).skip(j) {
                    *vkj -= f * e[k] + g * d[k];
                }
                d[j] = v[c(i - 1, j)];
                v[c(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // back-accumulate the transformations
    for i in 0..n - 1 {
        v[c(n - 1, i)] = v[c(i, i)];
        v[c(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[c(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0f64;
                for k in 0..=i {
                    g += v[c(k, i + 1)] * v[c(k, j)];
                }
                let col_j = &mut v[j * n..j * n + i + 1];
                for (k, vkj) in col_j.iter_mut().enumerate() {
                    *vkj -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[c(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[c(n - 1, j)];
        v[c(n - 1, j)] = 0.0;
    }
    v[c(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix with
/// eigenvector accumulation, followed by an ascending sort.
fn tql2(n: usize, d: &mut [f64], e: &mut [f64], v: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = 2.0f64.powi(-52);
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::numerical(format!(
                        "QL iteration failed to converge for eigenvalue index {l} after {QL_MAX_ITER} sweeps"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // rotate eigenvector columns i and i+1
                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut lo[i * n..(i + 1) * n];
                    let col_i1 = &mut hi[..n];
                    for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // ascending selection sort, swapping eigenvector columns along
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                v.swap(i * n + row, k * n + row);
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a real symmetric matrix given by its row-major
/// entries. Returns eigenvalues in ascending order and the eigenvectors as
/// column-major columns in the same order.
pub fn sym_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut v = a.to_vec(); // symmetric: row-major == column-major
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut d, &mut e, &mut v)?;
    Ok((d, v))
}

/// Eigendecomposition of a Hermitian matrix. Real input short-circuits to the
/// symmetric solver; genuinely complex input goes through the 2n real
/// embedding. Returns ascending eigenvalues with column-major complex
/// eigenvectors.
pub fn hermitian_eigen_dense(a: &CMat) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if !a.is_square() {
        return Err(Error::invalid(
            "hermitian eigendecomposition needs a square matrix",
        ));
    }
    let n = a.rows;
    if let Some(re) = a.as_real() {
        let (d, v) = sym_eigen(&re, n)?;
        let vc = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        return Ok((d, vc));
    }

    // embed A = X + iY into [[X, -Y], [Y, X]]
    let m = 2 * n;
    let mut b = vec![0.0f64; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a.at(i, j);
            b[i * m + j] = z.re;
            b[(i + n) * m + (j + n)] = z.re;
            b[i * m + (j + n)] = -z.im;
            b[(i + n) * m + j] = z.im;
        }
    }
    let (d2, v2) = sym_eigen(&b, m)?;
    let mut d = Vec::with_capacity(n);
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for (out_col, src_col) in (0..m).step_by(2).enumerate() {
        d.push(d2[src_col]);
        let col = &v2[src_col * m..(src_col + 1) * m];
        for row in 0..n {
            v[out_col * n + row] = Complex64::new(col[row], col[row + n]);
        }
    }
    Ok((d, v))
}

/// y = A x for row-major complex A and a column slice x.
pub fn matvec(a: &CMat, x: &[Complex64], y: &mut [Complex64]) {
    assert_eq!(a.cols, x.len());
    assert_eq!(a.rows, y.len());
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &a.data[i * a.cols..(i + 1) * a.cols];
        let mut acc = Complex64::new(0.0, 0.0);
        for (&aij, &xj) in row.iter().zip(x.iter()) {
            acc += aij * xj;
        }
        *yi = acc;
    }
}
