//! Closed-form spectral predictions: symbol constants for radial kernels,
//! counting exponents per regime, factorization planning, Orlicz norms,
//! eigenvalue-asymptotics coefficients, and the unit-circle convolution
//! oracle that pins every constant convention independently.

use libm::tgamma;
use serde::{Deserialize, Serialize};

use crate::assembly::WeightField;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, TermForm};
use crate::linalg::hermitian_eigen_dense;
use crate::measures::SingularMeasure;
use crate::quad::adaptive_simpson;

use std::f64::consts::PI;

/// Constant c(N, theta) in the radial-power Fourier pair
/// FT(|Z|^(-theta)) = c |Xi|^(theta - N):
/// c = pi^(N/2) 2^(N-theta) Gamma((N-theta)/2) / Gamma(theta/2).
pub fn riesz_symbol_constant(ambient_dim: usize, theta: f64) -> Result<f64> {
    let n = ambient_dim as f64;
    if !(theta > 0.0 && theta < n) {
        return Err(Error::invalid(format!(
            "theta = {theta} must lie strictly inside (0, {n})"
        )));
    }
    Ok(PI.powf(n / 2.0) * 2f64.powf(n - theta) * tgamma((n - theta) / 2.0) / tgamma(theta / 2.0))
}

/// Constant of the symbol induced on a d-plane by integrating the ambient
/// radial symbol over the dF-dimensional normal fiber:
/// c_fiber = (2 pi)^(-dF) c(N, theta) pi^(dF/2) Gamma((l-dF)/2) / Gamma(l/2)
/// with l = N - theta, so that the induced symbol is c_fiber |xi|^(-(l-dF)).
pub fn fiber_symbol_constant(ambient_dim: usize, codim: usize, theta: f64) -> Result<f64> {
    let l = ambient_dim as f64 - theta;
    let df = codim as f64;
    if !(l > df) {
        return Err(Error::invalid(format!(
            "order l = N - theta = {l} must exceed the codimension {df}"
        )));
    }
    let c = riesz_symbol_constant(ambient_dim, theta)?;
    Ok((2.0 * PI).powf(-df) * c * PI.powf(df / 2.0) * tgamma((l - df) / 2.0) / tgamma(l / 2.0))
}

/// Surface counting exponent d / (l - dF).
pub fn sigma_weyl(d: usize, codim: usize, l: f64) -> Result<f64> {
    let df = codim as f64;
    if !(l > df) {
        return Err(Error::invalid(format!(
            "order l = {l} must exceed the codimension {df}"
        )));
    }
    Ok(d as f64 / (l - df))
}

/// One convention for the per-factor decay rates sigma_i and the combined
/// counting exponent after the product inequality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExponentVariant {
    pub sigma: [Option<f64>; 2],
    /// Exponent p in n(lambda) ~ lambda^(-p) for the product operator,
    /// combined as 2 sigma_1 sigma_2 / (sigma_1 + sigma_2).
    pub combined: Option<f64>,
}

/// The three circulating conventions for the exponent family, kept side by
/// side because they disagree; the canonical one reproduces d/(l-dF) at
/// alpha = d and matches the circle oracle. The alternates serialize under
/// their interface names `paper_s2` and `paper_thm32`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExponentTable {
    pub canonical: ExponentVariant,
    /// Alternate with sigma_i halved: 2 sigma_i = alpha/(2 gamma_i - N + alpha).
    #[serde(rename = "paper_s2")]
    pub half_sigma: ExponentVariant,
    /// Alternate with the denominator shifted by 2 alpha:
    /// sigma_i = alpha/(2 gamma_i - N + 2 alpha).
    #[serde(rename = "paper_thm32")]
    pub shifted_alpha: ExponentVariant,
    /// False when the canonical combined exponent is undefined (l <= N - alpha).
    pub admissible: bool,
}

fn positive(x: f64) -> Option<f64> {
    if x.is_finite() && x > 0.0 {
        Some(x)
    } else {
        None
    }
}

fn combine(s1: Option<f64>, s2: Option<f64>) -> Option<f64> {
    match (s1, s2) {
        (Some(a), Some(b)) => positive(2.0 * a * b / (a + b)),
        _ => None,
    }
}

/// Evaluate all three exponent conventions for a factorization of an order
/// -l kernel into orders -gamma1, -(l - gamma1) over an alpha-regular
/// measure in dimension N.
pub fn exponent_table(ambient_dim: usize, alpha: f64, l: f64, gamma1: f64) -> ExponentTable {
    let n = ambient_dim as f64;
    let gammas = [gamma1, l - gamma1];

    let sig = |den_shift: f64, scale: f64| -> [Option<f64>; 2] {
        [
            positive(scale * alpha / (2.0 * gammas[0] - n + den_shift)),
            positive(scale * alpha / (2.0 * gammas[1] - n + den_shift)),
        ]
    };

    // canonical: sigma_i = alpha / (2 gamma_i - N + alpha)
    let canonical_sigma = sig(alpha, 1.0);
    let canonical = ExponentVariant {
        sigma: canonical_sigma,
        combined: combine(canonical_sigma[0], canonical_sigma[1]),
    };
    let s2_sigma = sig(alpha, 0.5);
    let half_sigma = ExponentVariant {
        sigma: s2_sigma,
        combined: combine(s2_sigma[0], s2_sigma[1]),
    };
    let t32_sigma = sig(2.0 * alpha, 1.0);
    let shifted_alpha = ExponentVariant {
        sigma: t32_sigma,
        combined: combine(t32_sigma[0], t32_sigma[1]),
    };

    ExponentTable {
        canonical,
        half_sigma,
        shifted_alpha,
        admissible: canonical.combined.is_some(),
    }
}

/// Combined canonical exponent alpha / (l - N + alpha); the alpha = d case
/// reduces to d / (l - dF).
pub fn canonical_exponent(ambient_dim: usize, alpha: f64, l: f64) -> Option<f64> {
    positive(alpha / (l - ambient_dim as f64 + alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRequirement {
    PPlus,
    PTwoSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpaceRequirement {
    /// F in L_{2 sigma, mu}; payload is 2 sigma.
    LTwoSigma(f64),
    /// |F|^2 in the L log L Orlicz class.
    OrliczLLogL,
    /// F in L_{2, mu}.
    LTwo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationPlan {
    pub ambient_dim: usize,
    pub l: f64,
    pub alpha: f64,
    pub gamma: [f64; 2],
    pub regimes: [Regime; 2],
    pub measure_class: ClassRequirement,
    pub weight_spaces: [WeightSpaceRequirement; 2],
    pub exponents: ExponentTable,
    pub warnings: Vec<String>,
}

const REGIME_TOL: f64 = 1e-12;

fn regime_of(gamma: f64, n: f64) -> Regime {
    if (2.0 * gamma - n).abs() <= REGIME_TOL * n.max(1.0) {
        Regime::Critical
    } else if 2.0 * gamma < n {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// Split an order -l kernel into factors of orders -gamma1 and -(l-gamma1)
/// and derive what the measure class and the weight integrability must be.
pub fn plan_factorization(
    ambient_dim: usize,
    l: f64,
    alpha: f64,
    gamma1: f64,
) -> Result<FactorizationPlan> {
    if !(gamma1 > 0.0 && gamma1 < l) {
        return Err(Error::invalid("gamma1 must lie strictly inside (0, l)"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let n = ambient_dim as f64;
    let gammas = [gamma1, l - gamma1];
    let regimes = [regime_of(gammas[0], n), regime_of(gammas[1], n)];
    let exponents = exponent_table(ambient_dim, alpha, l, gamma1);

    let mut warnings = Vec::new();
    let mut spaces = [WeightSpaceRequirement::LTwo, WeightSpaceRequirement::LTwo];
    for i in 0..2 {
        spaces[i] = match regimes[i] {
            Regime::Subcritical => {
                if alpha <= n - 2.0 * gammas[i] {
                    warnings.push(format!(
                        "factor {}: alpha = {alpha} does not exceed N - 2*gamma = {}; subcritical estimate inadmissible",
                        i + 1,
                        n - 2.0 * gammas[i]
                    ));
                } else if 2.0 * alpha <= n - 2.0 * gammas[i] {
                    warnings.push(format!(
                        "factor {}: stricter condition 2*alpha > N - 2*gamma fails (alpha = {alpha})",
                        i + 1
                    ));
                }
                match exponents.canonical.sigma[i] {
                    Some(s) => WeightSpaceRequirement::LTwoSigma(2.0 * s),
                    None => WeightSpaceRequirement::LTwoSigma(f64::NAN),
                }
            }
            Regime::Critical => WeightSpaceRequirement::OrliczLLogL,
            Regime::Supercritical => WeightSpaceRequirement::LTwo,
        };
    }

    let both_subcritical = regimes.iter().all(|&r| r == Regime::Subcritical);
    let measure_class = if both_subcritical {
        ClassRequirement::PPlus
    } else {
        ClassRequirement::PTwoSided
    };

    Ok(FactorizationPlan {
        ambient_dim,
        l,
        alpha,
        gamma: gammas,
        regimes,
        measure_class,
        weight_spaces: spaces,
        exponents,
        warnings,
    })
}

/// Young function (1+t) log(1+t) - t of the L log L class.
pub fn young_llogl(t: f64) -> f64 {
    (1.0 + t) * t.ln_1p() - t
}

/// Luxemburg norm inf{ k > 0 : sum_i Psi(g_i / k) w_i <= 1 } by bisection to
/// 1e-10 relative accuracy; g identically zero returns 0.
pub fn luxemburg_norm(g: &[f64], m: &SingularMeasure) -> Result<f64> {
    if g.len() != m.len() {
        return Err(Error::invalid(
            "value vector length does not match the atom count",
        ));
    }
    if g.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid(
            "Luxemburg norm needs nonnegative finite values",
        ));
    }
    let gmax = g.iter().fold(0.0f64, |a, &b| a.max(b));
    if gmax == 0.0 {
        return Ok(0.0);
    }
    let total = |k: f64| -> f64 {
        let mut acc = 0.0;
        for (i, &gi) in g.iter().enumerate() {
            if gi > 0.0 {
                acc += young_llogl(gi / k) * m.weight(i);
            }
        }
        acc
    };
    let mut hi = gmax.max(1e-300);
    let mut guard = 0;
    while total(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::numerical("Luxemburg bracket search failed upward"));
        }
    }
    let mut lo = hi;
    while total(lo) <= 1.0 {
        lo *= 0.5;
        guard += 1;
        if lo < 1e-300 || guard > 4000 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn weight_magnitude_squared(f: &WeightField, i: usize) -> f64 {
    if f.block_size() == 1 {
        f.scalar_at(i).norm_sqr()
    } else {
        // operator norm of the block, squared
        let b = f.block_at(i);
        let g = b.gram();
        match hermitian_eigen_dense(&g) {
            Ok((evals, _)) => evals.last().copied().unwrap_or(0.0).max(0.0),
            Err(_) => f64::NAN,
        }
    }
}

/// The measure- and weight-dependent factor in the counting estimate for one
/// factor (the non-constructive absolute constant excluded):
/// subcritical -> integral of |F|^(2 sigma), critical -> Luxemburg norm of
/// |F|^2, supercritical -> ||F|^2||_{L1}^sigma * mass^(2 - 2 sigma).
pub fn weight_norm_factor(
    regime: Regime,
    f: &WeightField,
    m: &SingularMeasure,
    sigma: f64,
) -> Result<f64> {
    if f.len() != m.len() {
        return Err(Error::invalid(
            "weight field length does not match the atom count",
        ));
    }
    let g: Vec<f64> = (0..m.len())
        .map(|i| weight_magnitude_squared(f, i))
        .collect();
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite weight magnitudes"));
    }
    let value = match regime {
        Regime::Subcritical => {
            if !(sigma > 1.0) {
                return Err(Error::invalid("subcritical factor needs sigma > 1"));
            }
            (0..m.len()).map(|i| g[i].powf(sigma) * m.weight(i)).sum()
        }
        Regime::Critical => luxemburg_norm(&g, m)?,
        Regime::Supercritical => {
            if !(sigma > 0.0 && sigma < 1.0) {
                return Err(Error::invalid("supercritical factor needs sigma in (0,1)"));
            }
            let l1: f64 = (0..m.len()).map(|i| g[i] * m.weight(i)).sum();
            l1.powf(sigma) * m.total_mass().powf(2.0 - 2.0 * sigma)
        }
    };
    if !value.is_finite() {
        return Err(Error::numerical("weight norm factor is not finite"));
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Phase-space normalization 1/(d (2 pi)^d); consistent with the circle
    /// oracle.
    Canonical,
    /// Alternative convention 1/(d (2 pi)^(d-1)), exactly 2 pi times the
    /// canonical one; kept so reports can expose the discrepancy.
    Paper,
}

/// Predicted counting coefficients n_pm(lambda) ~ A_pm lambda^(-sigma_w).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylPrediction {
    pub sigma_w: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub normalization: Normalization,
    /// Per-atom angular densities (before the outer normalization).
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
}

fn sphere_volume(d: usize) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        _ => Err(Error::unsupported("surface dimension above 2")),
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Eigenvalue-asymptotics coefficients for a radial leading kernel over a
/// surface measure with tangent frames: for each atom the induced symbol on
/// the tangent sphere is the constant amp(X, X) * c_fiber, the density is
/// |F|^(2 sigma) (r_0)_pm^sigma (trace form for matrix data), and A_pm
/// integrates the density against the measure with the chosen normalization.
pub fn weyl_coefficient(
    m: &SingularMeasure,
    kernel: &KernelSpec,
    f: &WeightField,
    normalization: Normalization,
) -> Result<WeylPrediction> {
    if !m.has_tangent_frames() {
        return Err(Error::invalid(
            "coefficient prediction needs a surface measure with tangent frames",
        ));
    }
    if f.len() != m.len() {
        return Err(Error::invalid(
            "weight field length does not match the atom count",
        ));
    }
    let d = m
        .intrinsic_dim
        .ok_or_else(|| Error::invalid("surface dimension missing"))?;
    let codim = m.codim.unwrap_or(0);
    let lead = kernel.leading();
    if lead.form != TermForm::Riesz {
        return Err(Error::unsupported(
            "coefficient prediction covers radial power leading terms only",
        ));
    }
    let theta = -lead.degree;
    if !(theta > 0.0) {
        return Err(Error::unsupported(
            "leading term must be singular at the diagonal",
        ));
    }
    let l = kernel.ambient_dim as f64 - theta;
    let sigma = sigma_weyl(d, codim, l)?;
    let cfib = fiber_symbol_constant(kernel.ambient_dim, codim, theta)?;
    let sphere = sphere_volume(d)?;

    let k = kernel.matrix_size;
    let mut rho_plus = Vec::with_capacity(m.len());
    let mut rho_minus = Vec::with_capacity(m.len());
    for i in 0..m.len() {
        let x = m.point(i);
        if k == 1 {
            let amp = lead.amplitude.eval_scalar(x, x);
            if amp.im.abs() > 1e-12 * (1.0 + amp.norm()) {
                return Err(Error::numerical(
                    "leading amplitude is not real on the diagonal; symbol sign split undefined",
                ));
            }
            let r0 = amp.re * cfib;
            let fmag = f.scalar_at(i).norm().powf(2.0 * sigma);
            let plus = if r0 > 0.0 { r0.powf(sigma) } else { 0.0 };
            let minus = if r0 < 0.0 { (-r0).powf(sigma) } else { 0.0 };
            rho_plus.push(fmag * plus * sphere);
            rho_minus.push(fmag * minus * sphere);
        } else {
            let amp = lead.amplitude.eval(x, x);
            if amp.hermitian_deviation() > 1e-12 * amp.max_abs().max(1.0) {
                return Err(Error::numerical(
                    "leading matrix amplitude is not Hermitian on the diagonal",
                ));
            }
            // F r0 F^H with r0 = cfib * amp
            let fb = f.block_at(i);
            let mut inner = fb.mul(&amp).mul(&fb.adjoint());
            for z in inner.data.iter_mut() {
                *z *= cfib;
            }
            inner.symmetrize_hermitian();
            let (evals, _) = hermitian_eigen_dense(&inner)?;
            let plus: f64 = evals
                .iter()
                .filter(|&&e| e > 0.0)
                .map(|&e| e.powf(sigma))
                .sum();
            let minus: f64 = evals
                .iter()
                .filter(|&&e| e < 0.0)
                .map(|&e| (-e).powf(sigma))
                .sum();
            rho_plus.push(plus * sphere);
            rho_minus.push(minus * sphere);
        }
    }

    let norm = match normalization {
        Normalization::Canonical => 1.0 / (d as f64 * (2.0 * PI).powi(d as i32)),
        Normalization::Paper => 1.0 / (d as f64 * (2.0 * PI).powi(d as i32 - 1)),
    };
    let a_plus = norm * kahan_sum((0..m.len()).map(|i| m.weight(i) * rho_plus[i]));
    let a_minus = norm * kahan_sum((0..m.len()).map(|i| m.weight(i) * rho_minus[i]));

    Ok(WeylPrediction {
        sigma_w: sigma,
        a_plus,
        a_minus,
        normalization,
        rho_plus,
        rho_minus,
    })
}

/// Fourier coefficients of the radial-power convolution kernel on the unit
/// circle, by adaptive quadrature with endpoint singularity subtraction, and
/// the asymptotic constant lim n^(1-theta) g_hat(n).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleOracle {
    pub theta: f64,
    /// g_hat(n) for n = 0..=n_max; the operator eigenvalue at frequency n
    /// (frequencies +-n are degenerate for n >= 1).
    pub coeffs: Vec<f64>,
    pub c_inf: f64,
}

impl WeylPrediction {
    /// Full prediction document: coefficients, the exponent-convention
    /// table, and optionally the circle-oracle constant used to pin the
    /// conventions.
    pub fn to_json(
        &self,
        table: &ExponentTable,
        oracle: Option<&CircleOracle>,
    ) -> serde_json::Value {
        serde_json::json!({
            "sigma_w": self.sigma_w,
            "exponent_table": table,
            "A_plus": self.a_plus,
            "A_minus": self.a_minus,
            "normalization": self.normalization,
            "oracle": oracle.map(|o| serde_json::json!({"theta": o.theta, "c_inf": o.c_inf})),
        })
    }
}

impl CircleOracle {
    /// The 2 n_max + 1 operator eigenvalues, sorted descending.
    pub fn eigenvalues_sorted(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.coeffs.len() - 1);
        out.push(self.coeffs[0]);
        for &c in &self.coeffs[1..] {
            out.push(c);
            out.push(c);
        }
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        out
    }
}

/// g_hat(n) = integral over the circle of (2 sin(phi/2))^(-theta) e^(-i n phi).
pub fn circle_fourier_coeff(theta: f64, n: usize, tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid("circle oracle needs theta in [0, 1)"));
    }
    // (2 sin(phi/2))^(-theta) = phi^(-theta) u(phi) with u smooth, u(0) = 1;
    // subtract the pure power so the remaining integrand is continuous.
    let u = move |phi: f64| -> f64 {
        if phi == 0.0 {
            1.0
        } else {
            (2.0 * (phi / 2.0).sin() / phi).powf(-theta)
        }
    };
    let integrand = move |phi: f64| -> f64 {
        if phi == 0.0 {
            return 0.0;
        }
        phi.powf(-theta) * (u(phi) * (n as f64 * phi).cos() - 1.0)
    };
    let head = PI.powf(1.0 - theta) / (1.0 - theta);
    let tail = adaptive_simpson(&integrand, 0.0, PI, tol)?;
    Ok(2.0 * (tail + head))
}

/// Oracle eigenvalues of the circle convolution operator for theta in (0, 1)
/// (theta = 0 degenerates to the constant kernel).
pub fn circle_oracle(theta: f64, n_max: usize) -> Result<CircleOracle> {
    if n_max < 8 {
        return Err(Error::invalid("n_max must be at least 8"));
    }
    let tol = 1e-11;
    let mut coeffs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        coeffs.push(circle_fourier_coeff(theta, n, tol)?);
    }
    // Richardson in 1/n^2: the scaled coefficients approach the limit with an
    // O(n^-2) correction.
    let f_hi = (n_max as f64).powf(1.0 - theta) * coeffs[n_max];
    let f_lo = ((n_max / 2) as f64).powf(1.0 - theta) * coeffs[n_max / 2];
    let c_inf = (4.0 * f_hi - f_lo) / 3.0;
    Ok(CircleOracle {
        theta,
        coeffs,
        c_inf,
    })
}

/// Exact eigenvalues pi/|n| of the circle convolution with kernel
/// -log(2 sin(phi/2)) (zero mean, so g_hat(0) = 0).
pub fn circle_oracle_log(n_max: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0];
    for n in 1..=n_max {
        coeffs.push(PI / n as f64);
    }
    coeffs
}
