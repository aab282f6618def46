//! Full spectral decompositions, counting functions and the product
//! counting inequality check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::OperatorMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen_dense, matvec, CMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    SignedEigenvalues,
    SingularValues,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
    Abs,
}

pub const RESIDUAL_TOL: f64 = 1e-10;

/// Sorted spectrum with the decomposition residual.
///
/// Signed eigenvalues are ordered by descending absolute value; singular
/// values descend. `residual` is max_k ||A v_k - lambda_k v_k|| / ||A||
/// over the decomposition that produced the values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl Spectrum {
    /// Subsequence selected by sign, as positive magnitudes in descending
    /// order (the n-th entry tracks the counting function of that sign).
    pub fn magnitudes(&self, sign: Sign) -> Vec<f64> {
        match (self.kind, sign) {
            (SpectrumKind::SingularValues, Sign::Minus) => Vec::new(),
            (SpectrumKind::SingularValues, _) => self.values.clone(),
            (SpectrumKind::SignedEigenvalues, Sign::Abs) => {
                self.values.iter().map(|v| v.abs()).collect()
            }
            (SpectrumKind::SignedEigenvalues, Sign::Plus) => {
                self.values.iter().filter(|&&v| v > 0.0).copied().collect()
            }
            (SpectrumKind::SignedEigenvalues, Sign::Minus) => self
                .values
                .iter()
                .filter(|&&v| v < 0.0)
                .map(|v| -v)
                .collect(),
        }
    }

    /// CSV document with header `index,value,sign`; the sign column is empty
    /// for singular values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,sign\n");
        for (i, &v) in self.values.iter().enumerate() {
            let sign = match self.kind {
                SpectrumKind::SingularValues => "",
                SpectrumKind::SignedEigenvalues => {
                    if v >= 0.0 {
                        "+"
                    } else {
                        "-"
                    }
                }
            };
            out.push_str(&format!("{},{},{}\n", i + 1, v, sign));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Spectrum> {
        let mut lines = text.lines();
        match lines.next() {
            Some("index,value,sign") => {}
            _ => {
                return Err(Error::invalid(
                    "spectrum CSV must start with 'index,value,sign'",
                ))
            }
        }
        let mut values = Vec::new();
        let mut signed = false;
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let _idx = parts.next();
            let v: f64 = parts
                .next()
                .ok_or_else(|| Error::invalid(format!("CSV line {} missing value", ln + 2)))?
                .parse()
                .map_err(|e| Error::invalid(format!("CSV line {}: {e}", ln + 2)))?;
            let sign = parts.next().unwrap_or("");
            if !sign.is_empty() {
                signed = true;
            }
            values.push(v);
        }
        Ok(Spectrum {
            kind: if signed {
                SpectrumKind::SignedEigenvalues
            } else {
                SpectrumKind::SingularValues
            },
            values,
            residual: 0.0,
        })
    }
}

fn order_by_abs_desc(values: &mut [f64]) {
    values.sort_by(|a, b| {
        b.abs()
            .partial_cmp(&a.abs())
            .unwrap()
            .then(b.partial_cmp(a).unwrap())
    });
}

fn decomposition_residual(a: &CMat, evals: &[f64], vecs: &[Complex64]) -> f64 {
    let n = a.rows;
    let scale = evals
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1e-300);
    let mut worst = 0.0f64;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (k, &lam) in evals.iter().enumerate() {
        let x = &vecs[k * n..(k + 1) * n];
        matvec(a, x, &mut y);
        let mut err = 0.0f64;
        let mut nrm = 0.0f64;
        for i in 0..n {
            err += (y[i] - lam * x[i]).norm_sqr();
            nrm += x[i].norm_sqr();
        }
        worst = worst.max(err.sqrt() / (nrm.sqrt() * scale).max(1e-300));
    }
    worst
}

/// Eigenvalues (with signs) of a Hermitian operator matrix.
pub fn hermitian_eigen(a: &OperatorMatrix) -> Result<Spectrum> {
    if !a.hermitian {
        return Err(Error::invalid("matrix is not flagged Hermitian"));
    }
    let (evals, vecs) = hermitian_eigen_dense(&a.data)?;
    let residual = decomposition_residual(&a.data, &evals, &vecs);
    if residual > RESIDUAL_TOL {
        return Err(Error::numerical(format!(
            "eigendecomposition residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }
    let mut values = evals;
    order_by_abs_desc(&mut values);
    Ok(Spectrum {
        kind: SpectrumKind::SignedEigenvalues,
        values,
        residual,
    })
}

/// Singular values via the eigenvalues of A^H A (descending square roots).
pub fn singular_values(a: &OperatorMatrix) -> Result<Spectrum> {
    let (values, residual) = singular_values_cmat(&a.data)?;
    Ok(Spectrum {
        kind: SpectrumKind::SingularValues,
        values,
        residual,
    })
}

pub(crate) fn singular_values_cmat(a: &CMat) -> Result<(Vec<f64>, f64)> {
    let g = a.gram();
    let (evals, vecs) = hermitian_eigen_dense(&g)?;
    let residual = decomposition_residual(&g, &evals, &vecs);
    if residual > RESIDUAL_TOL {
        return Err(Error::numerical(format!(
            "gram eigendecomposition residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }
    let mut values: Vec<f64> = evals.iter().map(|&x| x.max(0.0).sqrt()).collect();
    values.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok((values, residual))
}

/// Number of spectrum entries of the requested sign strictly above lambda.
pub fn counting(s: &Spectrum, lambda: f64, sign: Sign) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("counting threshold must be positive"));
    }
    Ok(s.magnitudes(sign).iter().filter(|&&v| v > lambda).count())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KyFanViolation {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lhs: usize,
    pub rhs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KyFanReport {
    pub pairs_checked: usize,
    pub violations: Vec<KyFanViolation>,
}

/// Relative guard band applied at ties so that strict counting on floats
/// cannot produce spurious violations.
pub const KYFAN_GUARD: f64 = 1e-9;

/// Check n(l1 l2, A B^H) <= n(l1, A) + n(l2, B) over the grid product.
pub fn kyfan_verify(a: &CMat, b: &CMat, lambda_grid: &[f64]) -> Result<KyFanReport> {
    if a.cols != b.cols {
        return Err(Error::invalid(
            "A B^H needs matching column counts (A: p x q, B: r x q)",
        ));
    }
    if lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("lambda grid must be positive"));
    }
    let prod = a.mul(&b.adjoint());
    let (sa, _) = singular_values_cmat(a)?;
    let (sb, _) = singular_values_cmat(b)?;
    let (sp, _) = singular_values_cmat(&prod)?;
    let count = |s: &[f64], lam: f64| s.iter().filter(|&&v| v > lam).count();

    let mut violations = Vec::new();
    let mut pairs = 0usize;
    for &l1 in lambda_grid {
        for &l2 in lambda_grid {
            pairs += 1;
            let lhs = count(&sp, l1 * l2 * (1.0 + KYFAN_GUARD));
            let rhs = count(&sa, l1 * (1.0 - KYFAN_GUARD)) + count(&sb, l2 * (1.0 - KYFAN_GUARD));
            if lhs > rhs {
                violations.push(KyFanViolation {
                    lambda1: l1,
                    lambda2: l2,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(KyFanReport {
        pairs_checked: pairs,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op_from_real(n: usize, entries: &[f64], hermitian: bool) -> OperatorMatrix {
        OperatorMatrix {
            data: CMat::from_real(n, n, entries),
            hermitian,
            atoms: n,
            block_size: 1,
            provenance: crate::assembly::Provenance {
                measure_sha256: String::new(),
                kernel_sha256: String::new(),
                weights_sha256: String::new(),
                diagonal_rule: "zero".into(),
                atoms: n,
                block_size: 1,
                hermitian,
            },
        }
    }

    #[test]
    fn diag_and_flip() {
        let a = op_from_real(3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0], true);
        let s = hermitian_eigen(&a).unwrap();
        assert_eq!(s.values, vec![3.0, 2.0, 1.0]);

        let a = op_from_real(2, &[0.0, 1.0, 1.0, 0.0], true);
        let s = hermitian_eigen(&a).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14);
        assert!((s.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unflagged_matrix() {
        let a = op_from_real(2, &[0.0, 1.0, 0.0, 0.0], false);
        assert!(hermitian_eigen(&a).is_err());
    }

    // Independent oracle: Householder tridiagonalization without vectors,
    // then Sturm-sequence bisection for each eigenvalue index.
    fn sturm_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
        let mut m = a.to_vec();
        let mut d = vec![0.0f64; n];
        let mut e = vec![0.0f64; n];
        // plain Householder reduction (row-major, no accumulation)
        for i in (1..n).rev() {
            let l = i - 1;
            let mut scale = 0.0;
            for k in 0..i {
                scale += m[i * n + k].abs();
            }
            if scale == 0.0 || i == 1 {
                e[i] = m[i * n + l];
                d[i] = 0.0;
                continue;
            }
            let mut h = 0.0;
            for k in 0..i {
                m[i * n + k] /= scale;
                h += m[i * n + k] * m[i * n + k];
            }
            let f = m[i * n + l];
            let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            m[i * n + l] = f - g;
            let mut fsum = 0.0;
            for j in 0..i {
                let mut gg = 0.0;
                for k in 0..=j {
                    gg += m[j * n + k] * m[i * n + k];
                }
                for k in j + 1..i {
                    gg += m[k * n + j] * m[i * n + k];
                }
                e[j] = gg / h;
                fsum += e[j] * m[i * n + j];
            }
            let hh = fsum / (h + h);
            for j in 0..i {
                let f = m[i * n + j];
                let g = e[j] - hh * f;
                e[j] = g;
                for k in 0..=j {
                    m[j * n + k] -= f * e[k] + g * m[i * n + k];
                }
            }
            d[i] = h;
        }
        d[0] = 0.0;
        e[0] = 0.0;
        for i in 0..n {
            d[i] = m[i * n + i];
        }
        // Sturm count: eigenvalues of the tridiagonal (d, e) below x
        let count_below = |x: f64| -> usize {
            let mut cnt = 0usize;
            let mut q = 1.0f64;
            for i in 0..n {
                let off = if i == 0 { 0.0 } else { e[i] * e[i] / q };
                q = d[i] - x - off;
                if q == 0.0 {
                    q = -1e-300;
                }
                if q < 0.0 {
                    cnt += 1;
                }
            }
            cnt
        };
        let bound = d
            .iter()
            .map(|x| x.abs())
            .chain(e.iter().map(|x| 2.0 * x.abs()))
            .fold(0.0f64, f64::max)
            * (n as f64)
            + 1.0;
        (0..n)
            .map(|k| {
                let mut lo = -bound;
                let mut hi = bound;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(mid) <= k {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    #[test]
    fn eigenvalues_match_sturm_bisection_oracle() {
        let n = 8;
        let mut state = 0xabcdef1234567890u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..20 {
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rnd();
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let (mut mine, _) = crate::linalg::sym_eigen(&a, n).unwrap();
            mine.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let oracle = sturm_eigenvalues(&a, n);
            for (x, y) in mine.iter().zip(oracle.iter()) {
                assert!((x - y).abs() < 1e-10, "{x} vs oracle {y}");
            }
        }
    }

    #[test]
    fn singular_values_examples() {
        let a = op_from_real(2, &[-2.0, 0.0, 0.0, 1.0], true);
        let s = singular_values(&a).unwrap();
        assert!((s.values[0] - 2.0).abs() < 1e-12);
        assert!((s.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_singular_values_equal_abs_eigenvalues() {
        let n = 12;
        let mut state = 0x5eed5eed5eed5eedu64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rnd();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let op = op_from_real(n, &a, true);
        let eig = hermitian_eigen(&op).unwrap();
        let sv = singular_values(&op).unwrap();
        for (e, s) in eig.values.iter().zip(sv.values.iter()) {
            assert!((e.abs() - s).abs() <= 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn general_singular_values_match_dilation_oracle() {
        let n = 5;
        let mut state = 0x13572468aceb1357u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..10 {
            let mut a = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, Complex64::new(rnd(), rnd()));
                }
            }
            let (sv, _) = singular_values_cmat(&a).unwrap();
            // Hermitian dilation [[0, A],[A^H, 0]]: positive eigenvalues are
            // the singular values of A
            let mut dil = CMat::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    dil.set(i, n + j, a.at(i, j));
                    dil.set(n + j, i, a.at(i, j).conj());
                }
            }
            let (evals, _) = hermitian_eigen_dense(&dil).unwrap();
            let mut pos: Vec<f64> = evals.iter().filter(|&&x| x > 0.0).copied().collect();
            pos.sort_by(|x, y| y.partial_cmp(x).unwrap());
            assert_eq!(
                pos.len(),
                sv.iter().filter(|&&s| s > 1e-12).count().max(pos.len())
            );
            for (s, p) in sv.iter().zip(pos.iter()) {
                assert!((s - p).abs() < 1e-10, "{s} vs dilation {p}");
            }
        }
    }

    #[test]
    fn counting_examples() {
        let s = Spectrum {
            kind: SpectrumKind::SingularValues,
            values: vec![3.0, 2.0, 1.0],
            residual: 0.0,
        };
        assert_eq!(counting(&s, 1.5, Sign::Abs).unwrap(), 2);
        assert!(counting(&s, 0.0, Sign::Abs).is_err());
        assert!(counting(&s, -1.0, Sign::Abs).is_err());

        let s = Spectrum {
            kind: SpectrumKind::SignedEigenvalues,
            values: vec![2.0, -1.5, 0.5],
            residual: 0.0,
        };
        assert_eq!(counting(&s, 1.0, Sign::Minus).unwrap(), 1);
        assert_eq!(counting(&s, 1.0, Sign::Plus).unwrap(), 1);
        assert_eq!(counting(&s, 0.4, Sign::Abs).unwrap(), 3);
        // abs = plus + minus
        for lam in [0.1, 0.6, 1.4, 1.9, 2.5] {
            assert_eq!(
                counting(&s, lam, Sign::Abs).unwrap(),
                counting(&s, lam, Sign::Plus).unwrap() + counting(&s, lam, Sign::Minus).unwrap()
            );
        }
    }

    #[test]
    fn counting_is_right_continuous_step() {
        let s = Spectrum {
            kind: SpectrumKind::SingularValues,
            values: vec![2.0, 1.0],
            residual: 0.0,
        };
        // strictly-greater convention: value at the jump equals the limit
        // from above
        assert_eq!(counting(&s, 1.0, Sign::Abs).unwrap(), 1);
        assert_eq!(counting(&s, 1.0 + 1e-12, Sign::Abs).unwrap(), 1);
        assert_eq!(counting(&s, 1.0 - 1e-12, Sign::Abs).unwrap(), 2);
    }

    #[test]
    fn singular_values_unitarily_invariant() {
        let n = 10;
        let mut state = 0x0ddba115eedu64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let mut a = CMat::zeros(n, n);
        for z in a.data.iter_mut() {
            *z = Complex64::new(rnd(), rnd());
        }
        // orthogonal factor from the eigenvectors of a random symmetric matrix
        let mut sym = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rnd();
                sym[i * n + j] = v;
                sym[j * n + i] = v;
            }
        }
        let (_, vecs) = crate::linalg::sym_eigen(&sym, n).unwrap();
        let mut q = CMat::zeros(n, n);
        for col in 0..n {
            for row in 0..n {
                q.set(row, col, Complex64::new(vecs[col * n + row], 0.0));
            }
        }
        let (s, _) = singular_values_cmat(&a).unwrap();
        let (s_left, _) = singular_values_cmat(&q.mul(&a)).unwrap();
        let (s_right, _) = singular_values_cmat(&a.mul(&q)).unwrap();
        let scale = s[0];
        for k in 0..n {
            assert!((s[k] - s_left[k]).abs() <= 1e-11 * scale);
            assert!((s[k] - s_right[k]).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn kyfan_identity_and_diagonal_cases() {
        let eye = CMat::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let rep = kyfan_verify(&eye, &eye, &[0.9]).unwrap();
        assert!(rep.violations.is_empty());

        let a = CMat::from_real(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let b = CMat::from_real(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let rep = kyfan_verify(&a, &b, &[2.0]).unwrap();
        assert!(rep.violations.is_empty());
        // product singular values are {12, 1}: n(4) = 1 <= 1 + 1
        let prod = a.mul(&b.adjoint());
        let (sp, _) = singular_values_cmat(&prod).unwrap();
        assert!((sp[0] - 12.0).abs() < 1e-12 && (sp[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let s = Spectrum {
            kind: SpectrumKind::SignedEigenvalues,
            values: vec![2.5, -1.25, 0.125],
            residual: 1e-14,
        };
        let text = s.to_csv();
        assert!(text.starts_with("index,value,sign\n"));
        let back = Spectrum::from_csv(&text).unwrap();
        assert_eq!(back.kind, SpectrumKind::SignedEigenvalues);
        assert_eq!(back.values, s.values);

        let s = Spectrum {
            kind: SpectrumKind::SingularValues,
            values: vec![2.0, 1.0],
            residual: 0.0,
        };
        let back = Spectrum::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.kind, SpectrumKind::SingularValues);
        assert_eq!(back.values, s.values);
    }
}
