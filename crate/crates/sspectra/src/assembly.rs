//! Galerkin assembly of the weighted integral operator over an atom cloud.
//!
//! Entries carry the symmetrized sqrt(w_i w_j) weighting, so the matrix is
//! unitarily equivalent to the natural quadrature form on the weighted L2
//! space and stays exactly Hermitian in self-adjoint configurations. The
//! kernel singularity at X = Y is replaced by a cell average over a ball
//! whose measure mass equals the atom weight (`BallAverage`), with `Zero` as
//! a robustness control.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, TermForm};
use crate::linalg::CMat;
use crate::measures::{measure_class_report, MeasureClassReport, SingularMeasure};

/// Hard cap on the assembled dimension (rows = cols = k * atoms).
pub const MAX_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRule {
    BallAverage,
    Zero,
}

impl DiagonalRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagonalRule::BallAverage => "ball_average",
            DiagonalRule::Zero => "zero",
        }
    }
}

/// Per-atom weight values F(X_i); scalar or k x k.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub label: String,
    values: WeightValues,
}

#[derive(Clone, Debug)]
enum WeightValues {
    Scalar(Vec<Complex64>),
    Matrix { size: usize, blocks: Vec<CMat> },
}

impl WeightField {
    pub fn constant(atoms: usize, value: Complex64) -> Self {
        WeightField {
            label: format!("const({value})"),
            values: WeightValues::Scalar(vec![value; atoms]),
        }
    }

    pub fn ones(atoms: usize) -> Self {
        Self::constant(atoms, Complex64::new(1.0, 0.0))
    }

    pub fn from_scalar_fn(
        m: &SingularMeasure,
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Self {
        let values = (0..m.len()).map(|i| f(m.point(i))).collect();
        WeightField {
            label: label.into(),
            values: WeightValues::Scalar(values),
        }
    }

    pub fn from_values(label: impl Into<String>, values: Vec<Complex64>) -> Self {
        WeightField {
            label: label.into(),
            values: WeightValues::Scalar(values),
        }
    }

    pub fn matrix_constant(atoms: usize, block: CMat) -> Result<Self> {
        if !block.is_square() {
            return Err(Error::invalid("matrix weight blocks must be square"));
        }
        Ok(WeightField {
            label: format!("mat_const({}x{})", block.rows, block.cols),
            values: WeightValues::Matrix {
                size: block.rows,
                blocks: vec![block; atoms],
            },
        })
    }

    pub fn len(&self) -> usize {
        match &self.values {
            WeightValues::Scalar(v) => v.len(),
            WeightValues::Matrix { blocks, .. } => blocks.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_size(&self) -> usize {
        match &self.values {
            WeightValues::Scalar(_) => 1,
            WeightValues::Matrix { size, .. } => *size,
        }
    }

    pub fn scalar_at(&self, i: usize) -> Complex64 {
        match &self.values {
            WeightValues::Scalar(v) => v[i],
            WeightValues::Matrix { .. } => panic!("matrix weight read as scalar"),
        }
    }

    pub fn block_at(&self, i: usize) -> CMat {
        match &self.values {
            WeightValues::Scalar(v) => CMat {
                rows: 1,
                cols: 1,
                data: vec![v[i]],
            },
            WeightValues::Matrix { blocks, .. } => blocks[i].clone(),
        }
    }

    /// Pointwise conjugate transpose, the F* companion field.
    pub fn adjoint(&self) -> WeightField {
        let values = match &self.values {
            WeightValues::Scalar(v) => WeightValues::Scalar(v.iter().map(|z| z.conj()).collect()),
            WeightValues::Matrix { size, blocks } => WeightValues::Matrix {
                size: *size,
                blocks: blocks.iter().map(|b| b.adjoint()).collect(),
            },
        };
        WeightField {
            label: format!("{}^*", self.label),
            values,
        }
    }

    /// True when other(X) = self(X)^* entrywise (exact comparison).
    pub fn is_adjoint_of(&self, other: &WeightField) -> bool {
        if self.len() != other.len() || self.block_size() != other.block_size() {
            return false;
        }
        match (&self.values, &other.values) {
            (WeightValues::Scalar(a), WeightValues::Scalar(b)) => {
                a.iter().zip(b.iter()).all(|(x, y)| *x == y.conj())
            }
            (WeightValues::Matrix { blocks: a, .. }, WeightValues::Matrix { blocks: b, .. }) => {
                a.iter().zip(b.iter()).all(|(x, y)| {
                    x.data
                        .iter()
                        .zip(y.adjoint().data.iter())
                        .all(|(p, q)| p == q)
                })
            }
            _ => false,
        }
    }

    pub fn finite(&self) -> bool {
        match &self.values {
            WeightValues::Scalar(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            WeightValues::Matrix { blocks, .. } => blocks
                .iter()
                .all(|b| b.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())),
        }
    }

    fn hash_bytes(&self, hasher: &mut Sha256) {
        match &self.values {
            WeightValues::Scalar(v) => {
                for z in v {
                    hasher.update(z.re.to_le_bytes());
                    hasher.update(z.im.to_le_bytes());
                }
            }
            WeightValues::Matrix { blocks, .. } => {
                for b in blocks {
                    for z in &b.data {
                        hasher.update(z.re.to_le_bytes());
                        hasher.update(z.im.to_le_bytes());
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub measure_sha256: String,
    pub kernel_sha256: String,
    pub weights_sha256: String,
    pub diagonal_rule: String,
    pub atoms: usize,
    pub block_size: usize,
    pub hermitian: bool,
}

/// Dense assembled operator matrix with provenance.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub data: CMat,
    pub hermitian: bool,
    pub atoms: usize,
    pub block_size: usize,
    pub provenance: Provenance,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.data.rows
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn weights_hash(f1: &WeightField, f2: &WeightField) -> String {
    let mut h = Sha256::new();
    h.update(f1.label.as_bytes());
    f1.hash_bytes(&mut h);
    h.update(f2.label.as_bytes());
    f2.hash_bytes(&mut h);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Closed-form cell average of |z|^(-theta) over a ball of radius `r` in
/// dimension `d_eff`: (d/(d-theta)) r^(-theta) times the amplitude.
pub fn ball_average_power(d_eff: f64, theta: f64, r: f64) -> Result<f64> {
    if !(theta < d_eff) {
        return Err(Error::invalid(format!(
            "ball_average requires the singularity exponent ({theta}) below the measure dimension ({d_eff})"
        )));
    }
    Ok(d_eff / (d_eff - theta) * r.powf(-theta))
}

/// Cell average of -log|z| over the same ball: -(log r - 1/d).
pub fn ball_average_log(d_eff: f64, r: f64) -> f64 {
    -(r.ln() - 1.0 / d_eff)
}

/// Ball radius whose empirical mass matches the atom weight:
/// r = (w / A_hat)^(1/alpha).
pub fn ball_radius_for_weight(weight: f64, report: &MeasureClassReport) -> f64 {
    (weight / report.a_hat).powf(1.0 / report.alpha_used)
}

/// Diagonal surrogate D_i for the kernel's leading term: zero, or the cell
/// average over the weight-matched ball. Returns a k x k block.
pub fn diagonal_value(
    rule: DiagonalRule,
    m: &SingularMeasure,
    report: &MeasureClassReport,
    atom: usize,
    kernel: &KernelSpec,
) -> Result<CMat> {
    let k = kernel.matrix_size;
    if rule == DiagonalRule::Zero {
        return Ok(CMat::zeros(k, k));
    }
    let lead = kernel.leading();
    let x = m.point(atom);
    let amp = lead.amplitude.eval(x, x);
    let d_eff = report.alpha_used;
    let r = ball_radius_for_weight(m.weight(atom), report);
    let factor = match lead.form {
        TermForm::Riesz => ball_average_power(d_eff, -lead.degree, r)?,
        TermForm::Log => ball_average_log(d_eff, r),
        TermForm::Smooth => 1.0,
    };
    let mut out = amp;
    for z in out.data.iter_mut() {
        *z *= factor;
    }
    Ok(out)
}

/// Class report used by the ball-average rule: computed at the measure's
/// known regularity exponent when one exists. Clouds too coarse for the
/// standard 4h radius floor fall back to a relaxed floor and finally to the
/// global mass/diameter ratio, so the diagonal stays defined at toy sizes.
pub fn diagonal_class_report(m: &SingularMeasure) -> Result<MeasureClassReport> {
    let n_centers = 64.min(m.len());
    if let Ok(rep) = measure_class_report(m, m.known_alpha(), n_centers, 12) {
        return Ok(rep);
    }
    if let Ok(rep) =
        crate::measures::class_report_with_floor(m, m.known_alpha(), n_centers, 12, 1.0)
    {
        return Ok(rep);
    }
    let alpha = m.known_alpha().unwrap_or(1.0);
    let diam = m.diameter_estimate().max(f64::MIN_POSITIVE);
    let ratio = m.total_mass() / diam.powf(alpha);
    Ok(MeasureClassReport {
        alpha_hat: alpha,
        alpha_used: alpha,
        a_hat: ratio,
        b_hat: ratio,
        per_radius: Vec::new(),
        verdict: crate::measures::ClassVerdict::None,
        diameter: diam,
        n_centers_used: 0,
    })
}

/// Number of worker threads for row-parallel assembly (SSPECTRA_THREADS,
/// default 1 for bit-reproducibility; output is identical either way).
fn assembly_threads() -> usize {
    std::env::var("SSPECTRA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Assemble the dense symmetrized matrix:
/// entry(i,j) = sqrt(w_i w_j) F1(X_i) K(X_i, X_j, X_i - X_j) F2(X_j) off the
/// diagonal, and w_i F1(X_i) D_i F2(X_i) on it.
pub fn assemble(
    m: &SingularMeasure,
    kernel: &KernelSpec,
    f1: &WeightField,
    f2: &WeightField,
    rule: DiagonalRule,
) -> Result<OperatorMatrix> {
    if f1.len() != m.len() || f2.len() != m.len() {
        return Err(Error::invalid(
            "weight field length does not match the atom count",
        ));
    }
    if kernel.ambient_dim != m.ambient_dim {
        return Err(Error::invalid(
            "kernel and measure ambient dimensions differ",
        ));
    }
    let k = kernel.matrix_size;
    if f1.block_size() != k || f2.block_size() != k {
        return Err(Error::invalid("weight and kernel matrix sizes differ"));
    }
    if !f1.finite() || !f2.finite() {
        return Err(Error::invalid("weight fields must be finite"));
    }
    let atoms = m.len();
    let n = atoms * k;
    if n > MAX_DIM {
        return Err(Error::invalid(format!(
            "assembled dimension {n} exceeds the cap {MAX_DIM}"
        )));
    }

    let diag: Vec<CMat> = match rule {
        DiagonalRule::Zero => (0..atoms).map(|_| CMat::zeros(k, k)).collect(),
        DiagonalRule::BallAverage => {
            let report = diagonal_class_report(m)?;
            (0..atoms)
                .map(|i| diagonal_value(rule, m, &report, i, kernel))
                .collect::<Result<_>>()?
        }
    };

    let sqrt_w: Vec<f64> = (0..atoms).map(|i| m.weight(i).sqrt()).collect();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];

    let fill_rows = |rows: std::ops::Range<usize>, out: &mut [Complex64]| -> Result<()> {
        // out covers rows i in `rows`, row-major, offset relative to rows.start
        if k == 1 {
            for i in rows.clone() {
                let xi = m.point(i);
                let f1i = f1.scalar_at(i);
                let row = &mut out[(i - rows.start) * n..(i - rows.start + 1) * n];
                for (j, slot) in row.iter_mut().enumerate() {
                    let v = if i == j {
                        m.weight(i) * f1i * diag[i].data[0] * f2.scalar_at(i)
                    } else {
                        let kv = kernel.eval_scalar(xi, m.point(j))?;
                        if !kv.re.is_finite() || !kv.im.is_finite() {
                            return Err(Error::numerical(format!(
                                "non-finite kernel value at atom pair ({i}, {j})"
                            )));
                        }
                        sqrt_w[i] * sqrt_w[j] * f1i * kv * f2.scalar_at(j)
                    };
                    *slot = v;
                }
            }
        } else {
            for i in rows.clone() {
                let xi = m.point(i);
                let f1i = f1.block_at(i);
                for j in 0..atoms {
                    let block = if i == j {
                        let mut b = f1i.mul(&diag[i]).mul(&f2.block_at(i));
                        for z in b.data.iter_mut() {
                            *z *= m.weight(i);
                        }
                        b
                    } else {
                        let kv = kernel.eval(xi, m.point(j))?;
                        if kv
                            .data
                            .iter()
                            .any(|z| !z.re.is_finite() || !z.im.is_finite())
                        {
                            return Err(Error::numerical(format!(
                                "non-finite kernel value at atom pair ({i}, {j})"
                            )));
                        }
                        let mut b = f1i.mul(&kv).mul(&f2.block_at(j));
                        let s = sqrt_w[i] * sqrt_w[j];
                        for z in b.data.iter_mut() {
                            *z *= s;
                        }
                        b
                    };
                    for bi in 0..k {
                        for bj in 0..k {
                            out[((i - rows.start) * k + bi) * n + j * k + bj] = block.at(bi, bj);
                        }
                    }
                }
            }
        }
        Ok(())
    };

    let threads = assembly_threads().min(atoms.max(1));
    if threads <= 1 {
        fill_rows(0..atoms, &mut data)?;
    } else {
        let chunk_rows = atoms.div_ceil(threads);
        let mut results: Vec<Result<()>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            let mut rest: &mut [Complex64] = &mut data;
            let mut start = 0usize;
            while start < atoms {
                let stop = (start + chunk_rows).min(atoms);
                let (chunk, tail) = rest.split_at_mut((stop - start) * k * n);
                rest = tail;
                let range = start..stop;
                let fill = &fill_rows;
                handles.push(scope.spawn(move || fill(range, chunk)));
                start = stop;
            }
            for h in handles {
                results.push(h.join().expect("assembly worker panicked"));
            }
        });
        for r in results {
            r?;
        }
    }

    let mut mat = CMat {
        rows: n,
        cols: n,
        data,
    };

    let mut hermitian = false;
    if kernel.hermitian && f2.is_adjoint_of(f1) {
        let scale = mat.max_abs().max(1e-300);
        let dev = mat.hermitian_deviation();
        if dev > 1e-12 * scale {
            return Err(Error::numerical(format!(
                "expected Hermitian assembly but deviation is {:.3e} relative",
                dev / scale
            )));
        }
        mat.symmetrize_hermitian();
        hermitian = true;
    }

    let measure_sha = sha_hex(serde_json::to_string(&m.to_json())?.as_bytes());
    let kernel_sha = sha_hex(serde_json::to_string(&kernel.descriptor())?.as_bytes());
    let provenance = Provenance {
        measure_sha256: measure_sha,
        kernel_sha256: kernel_sha,
        weights_sha256: weights_hash(f1, f2),
        diagonal_rule: rule.as_str().to_string(),
        atoms,
        block_size: k,
        hermitian,
    };

    Ok(OperatorMatrix {
        data: mat,
        hermitian,
        atoms,
        block_size: k,
        provenance,
    })
}

const SSPM_MAGIC: &[u8; 4] = b"SSPM";
const SSPM_VERSION: u32 = 1;
const FLAG_HERMITIAN: u32 = 1;

impl OperatorMatrix {
    /// Binary export: 16-byte header (magic, version, dim, flags), then
    /// row-major little-endian (re, im) f64 pairs. A provenance JSON sidecar
    /// is written next to the file.
    pub fn write_sspm(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut buf = Vec::with_capacity(16 + self.data.data.len() * 16);
        buf.extend_from_slice(SSPM_MAGIC);
        buf.extend_from_slice(&SSPM_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        let flags = if self.hermitian { FLAG_HERMITIAN } else { 0 };
        buf.extend_from_slice(&flags.to_le_bytes());
        for z in &self.data.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        let sidecar = sidecar_path(path);
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.provenance)?)?;
        Ok(())
    }

    pub fn read_sspm(path: &std::path::Path) -> Result<OperatorMatrix> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 16 || &bytes[0..4] != SSPM_MAGIC {
            return Err(Error::invalid("not an SSPM matrix file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != SSPM_VERSION {
            return Err(Error::invalid(format!(
                "unsupported SSPM version {version}"
            )));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let flags = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let need = 16 + n * n * 16;
        if bytes.len() != need {
            return Err(Error::invalid(format!(
                "SSPM payload length {} does not match dimension {n}",
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(n * n);
        for idx in 0..n * n {
            let off = 16 + idx * 16;
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        let provenance: Provenance = match std::fs::read_to_string(sidecar_path(path)) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(_) => Provenance {
                measure_sha256: String::new(),
                kernel_sha256: String::new(),
                weights_sha256: String::new(),
                diagonal_rule: String::new(),
                atoms: n,
                block_size: 1,
                hermitian: flags & FLAG_HERMITIAN != 0,
            },
        };
        Ok(OperatorMatrix {
            data: CMat {
                rows: n,
                cols: n,
                data,
            },
            hermitian: flags & FLAG_HERMITIAN != 0,
            atoms: provenance.atoms,
            block_size: provenance.block_size,
            provenance,
        })
    }
}

pub fn sidecar_path(path: &std::path::Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".provenance.json");
    std::path::PathBuf::from(s)
}
