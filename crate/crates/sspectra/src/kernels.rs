//! Polyhomogeneous kernels: radial power-type terms, a log term at degree
//! zero, smooth remainders, and multiplier wrapping. Kernels evaluate
//! pointwise at (X, Y) with Z = X - Y; evaluation on the diagonal is an
//! error, the assembly module owns the diagonal rule.

use std::sync::Arc;

use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::CMat;

pub type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64], &[f64]) -> CMat + Send + Sync>;

/// Smooth coefficient a(X, Y) of a kernel term; scalar or k x k.
#[derive(Clone)]
pub enum Amplitude {
    Const(Complex64),
    MatConst(CMat),
    Scalar {
        f: ScalarFn,
        id: String,
    },
    Matrix {
        f: MatrixFn,
        id: String,
        size: usize,
    },
}

impl Amplitude {
    pub fn real(c: f64) -> Self {
        Amplitude::Const(Complex64::new(c, 0.0))
    }

    pub fn scalar_fn(id: impl Into<String>, f: ScalarFn) -> Self {
        Amplitude::Scalar { f, id: id.into() }
    }

    pub fn size(&self) -> usize {
        match self {
            Amplitude::Const(_) | Amplitude::Scalar { .. } => 1,
            Amplitude::MatConst(m) => m.rows,
            Amplitude::Matrix { size, .. } => *size,
        }
    }

    pub fn eval_scalar(&self, x: &[f64], y: &[f64]) -> Complex64 {
        match self {
            Amplitude::Const(c) => *c,
            Amplitude::Scalar { f, .. } => f(x, y),
            _ => panic!("matrix amplitude evaluated as scalar"),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> CMat {
        match self {
            Amplitude::Const(c) => CMat {
                rows: 1,
                cols: 1,
                data: vec![*c],
            },
            Amplitude::Scalar { f, .. } => CMat {
                rows: 1,
                cols: 1,
                data: vec![f(x, y)],
            },
            Amplitude::MatConst(m) => m.clone(),
            Amplitude::Matrix { f, .. } => f(x, y),
        }
    }

    pub fn is_serializable(&self) -> bool {
        matches!(self, Amplitude::Const(_) | Amplitude::MatConst(_))
    }

    /// Hermitian in the kernel sense: a(X,Y) = a(Y,X)^* guaranteed by form.
    fn is_symmetric_const(&self) -> bool {
        match self {
            Amplitude::Const(c) => c.im == 0.0,
            Amplitude::MatConst(m) => m.hermitian_deviation() == 0.0,
            _ => false,
        }
    }

    fn descriptor(&self) -> serde_json::Value {
        match self {
            Amplitude::Const(c) => {
                json!({"amplitude_id": "const", "params": {"re": c.re, "im": c.im}})
            }
            Amplitude::MatConst(m) => {
                let re: Vec<f64> = m.data.iter().map(|z| z.re).collect();
                let im: Vec<f64> = m.data.iter().map(|z| z.im).collect();
                json!({"amplitude_id": "mat_const", "params": {"k": m.rows, "re": re, "im": im}})
            }
            Amplitude::Scalar { id, .. } => json!({"amplitude_id": id, "serializable": false}),
            Amplitude::Matrix { id, .. } => json!({"amplitude_id": id, "serializable": false}),
        }
    }
}

impl std::fmt::Debug for Amplitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Amplitude::Const(c) => write!(f, "Const({c})"),
            Amplitude::MatConst(m) => write!(f, "MatConst({}x{})", m.rows, m.cols),
            Amplitude::Scalar { id, .. } => write!(f, "Scalar({id})"),
            Amplitude::Matrix { id, size, .. } => write!(f, "Matrix({id}, {size})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermForm {
    /// amplitude(X,Y) * |Z|^degree
    Riesz,
    /// amplitude(X,Y) * (-log |Z|); degree 0 only
    Log,
    /// amplitude(X,Y), no Z dependence
    Smooth,
}

impl TermForm {
    fn as_str(&self) -> &'static str {
        match self {
            TermForm::Riesz => "riesz",
            TermForm::Log => "log",
            TermForm::Smooth => "smooth",
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelTerm {
    pub degree: f64,
    pub form: TermForm,
    pub amplitude: Amplitude,
}

impl KernelTerm {
    pub fn riesz(degree: f64, amplitude: Amplitude) -> Self {
        KernelTerm {
            degree,
            form: TermForm::Riesz,
            amplitude,
        }
    }

    pub fn log(amplitude: Amplitude) -> Self {
        KernelTerm {
            degree: 0.0,
            form: TermForm::Log,
            amplitude,
        }
    }

    pub fn smooth(degree: f64, amplitude: Amplitude) -> Self {
        KernelTerm {
            degree,
            form: TermForm::Smooth,
            amplitude,
        }
    }

    fn radial_factor(&self, znorm: f64) -> f64 {
        match self.form {
            TermForm::Riesz => znorm.powf(self.degree),
            TermForm::Log => -znorm.ln(),
            TermForm::Smooth => 1.0,
        }
    }
}

/// Sum of (log-)homogeneous terms with strictly increasing degrees.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub ambient_dim: usize,
    pub matrix_size: usize,
    pub hermitian: bool,
    terms: Vec<KernelTerm>,
}

/// Radial power kernel a * |Z|^(-theta) with singularity exponent
/// theta in [0, N).
pub fn riesz_kernel(ambient_dim: usize, theta: f64, amplitude: Amplitude) -> Result<KernelSpec> {
    if !(0.0..(ambient_dim as f64)).contains(&theta) {
        return Err(Error::invalid(format!(
            "singularity exponent theta = {theta} outside [0, {ambient_dim})"
        )));
    }
    KernelSpec::from_term(ambient_dim, KernelTerm::riesz(-theta, amplitude))
}

/// Log kernel -Q(X,Y) log|Z|, positive near the diagonal for Q > 0.
pub fn log_kernel(ambient_dim: usize, q_amplitude: Amplitude) -> Result<KernelSpec> {
    KernelSpec::from_term(ambient_dim, KernelTerm::log(q_amplitude))
}

impl KernelSpec {
    pub fn from_term(ambient_dim: usize, term: KernelTerm) -> Result<KernelSpec> {
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        if term.degree <= -(ambient_dim as f64) {
            return Err(Error::invalid(format!(
                "term degree {} at or below the integrability threshold -{ambient_dim}",
                term.degree
            )));
        }
        if term.form == TermForm::Log && term.degree != 0.0 {
            return Err(Error::invalid("log terms are only allowed at degree 0"));
        }
        let matrix_size = term.amplitude.size();
        let hermitian = term.amplitude.is_symmetric_const();
        Ok(KernelSpec {
            ambient_dim,
            matrix_size,
            hermitian,
            terms: vec![term],
        })
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn leading(&self) -> &KernelTerm {
        &self.terms[0]
    }

    /// Singularity exponent of the leading term (may be negative for kernels
    /// that vanish at the diagonal).
    pub fn theta(&self) -> f64 {
        -self.terms[0].degree
    }

    /// Declare the Hermitian symmetry K(X,Y,Z) = K(Y,X,-Z)^* for kernels
    /// built from callables, where it cannot be inferred.
    pub fn with_hermitian(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }

    /// Append a term of strictly higher degree.
    pub fn add_lower_order(mut self, term: KernelTerm) -> Result<KernelSpec> {
        let last = self.terms.last().unwrap().degree;
        if term.degree <= last {
            return Err(Error::invalid(format!(
                "appended term degree {} must exceed the current highest degree {last}",
                term.degree
            )));
        }
        if term.form == TermForm::Log && term.degree != 0.0 {
            return Err(Error::invalid("log terms are only allowed at degree 0"));
        }
        if term.amplitude.size() != self.matrix_size {
            return Err(Error::invalid("term matrix size mismatch"));
        }
        self.hermitian = self.hermitian && term.amplitude.is_symmetric_const();
        self.terms.push(term);
        Ok(self)
    }

    /// Scalar evaluation (matrix_size must be 1). X = Y is rejected; callers
    /// needing the diagonal use the assembly module's diagonal rule.
    pub fn eval_scalar(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        if self.matrix_size != 1 {
            return Err(Error::invalid("matrix-valued kernel evaluated as scalar"));
        }
        let znorm = distance(x, y);
        if znorm == 0.0 {
            return Err(Error::invalid(
                "diagonal evaluation: kernels are singular at X = Y; use the assembly diagonal rule",
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.amplitude.eval_scalar(x, y) * t.radial_factor(znorm);
        }
        Ok(acc)
    }

    /// Full evaluation as a k x k matrix.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<CMat> {
        let znorm = distance(x, y);
        if znorm == 0.0 {
            return Err(Error::invalid(
                "diagonal evaluation: kernels are singular at X = Y; use the assembly diagonal rule",
            ));
        }
        let k = self.matrix_size;
        let mut acc = CMat::zeros(k, k);
        for t in &self.terms {
            let a = t.amplitude.eval(x, y);
            let factor = t.radial_factor(znorm);
            for (o, &v) in acc.data.iter_mut().zip(a.data.iter()) {
                *o += v * factor;
            }
        }
        Ok(acc)
    }

    /// JSON descriptor; callable amplitudes are flagged unserializable.
    pub fn descriptor(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|t| {
                let mut v = t.amplitude.descriptor();
                let obj = v.as_object_mut().unwrap();
                obj.insert("form".into(), json!(t.form.as_str()));
                obj.insert("degree".into(), json!(t.degree));
                v
            })
            .collect();
        json!({
            "N": self.ambient_dim,
            "k": self.matrix_size,
            "hermitian": self.hermitian,
            "terms": terms,
        })
    }

    pub fn is_serializable(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude.is_serializable())
    }
}

/// Smooth two-point factor used to wrap kernels.
#[derive(Clone)]
pub struct MultiplierSpec {
    pub phi: Amplitude,
    pub declared_smoothness: u32,
    pub id: String,
}

impl MultiplierSpec {
    pub fn scalar(id: impl Into<String>, declared_smoothness: u32, f: ScalarFn) -> Self {
        let id = id.into();
        MultiplierSpec {
            phi: Amplitude::Scalar { f, id: id.clone() },
            declared_smoothness,
            id,
        }
    }

    pub fn size(&self) -> usize {
        self.phi.size()
    }
}

impl std::fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MultiplierSpec({}, C^{})",
            self.id, self.declared_smoothness
        )
    }
}

/// Right factor selection for `apply_multiplier`.
pub enum RightMultiplier<'a> {
    /// Plain left multiplication Phi(X,Y) K.
    None,
    /// Phi(X,Y) K Phi(Y,X)^*, the symmetry-preserving wrap.
    SameAsLeft,
    Other(&'a MultiplierSpec),
}

/// Wrap a kernel as Phi_l(X,Y) K(X,Y,Z) Phi_r(Y,X)^* by composing every term
/// amplitude. Hermitian symmetry survives exactly when the right factor is
/// the left one and the base kernel is Hermitian.
pub fn apply_multiplier(
    kernel: &KernelSpec,
    left: &MultiplierSpec,
    right: RightMultiplier<'_>,
) -> Result<KernelSpec> {
    let k = kernel.matrix_size;
    if left.size() != 1 && left.size() != k {
        return Err(Error::invalid("left multiplier size mismatch"));
    }
    let (right_spec, same) = match right {
        RightMultiplier::None => (None, false),
        RightMultiplier::SameAsLeft => (Some(left.clone()), true),
        RightMultiplier::Other(r) => {
            if r.size() != 1 && r.size() != k {
                return Err(Error::invalid("right multiplier size mismatch"));
            }
            (Some(r.clone()), false)
        }
    };

    let terms = kernel
        .terms
        .iter()
        .map(|t| KernelTerm {
            degree: t.degree,
            form: t.form,
            amplitude: wrap_amplitude(&t.amplitude, left, right_spec.as_ref(), k),
        })
        .collect();

    Ok(KernelSpec {
        ambient_dim: kernel.ambient_dim,
        matrix_size: k,
        hermitian: kernel.hermitian && same,
        terms,
    })
}

fn wrap_amplitude(
    base: &Amplitude,
    left: &MultiplierSpec,
    right: Option<&MultiplierSpec>,
    k: usize,
) -> Amplitude {
    let base = base.clone();
    let lphi = left.phi.clone();
    let rphi = right.map(|r| r.phi.clone());
    let id = match right {
        Some(r) => format!("{}*base*{}^H", left.id, r.id),
        None => format!("{}*base", left.id),
    };
    if k == 1 {
        let f: ScalarFn = Arc::new(move |x: &[f64], y: &[f64]| {
            let mut v = lphi.eval_scalar(x, y) * base.eval_scalar(x, y);
            if let Some(r) = &rphi {
                v *= r.eval_scalar(y, x).conj();
            }
            v
        });
        Amplitude::Scalar { f, id }
    } else {
        let f: MatrixFn = Arc::new(move |x: &[f64], y: &[f64]| {
            let b = base.eval(x, y);
            let l = broadcast(&lphi.eval(x, y), b.rows);
            let mut acc = l.mul(&b);
            if let Some(r) = &rphi {
                let rm = broadcast(&r.eval(y, x), b.rows).adjoint();
                acc = acc.mul(&rm);
            }
            acc
        });
        Amplitude::Matrix { f, id, size: k }
    }
}

fn broadcast(m: &CMat, k: usize) -> CMat {
    if m.rows == k {
        return m.clone();
    }
    // scalar multiplier against a matrix kernel
    let c = m.data[0];
    let mut out = CMat::zeros(k, k);
    for i in 0..k {
        out.set(i, i, c);
    }
    out
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
