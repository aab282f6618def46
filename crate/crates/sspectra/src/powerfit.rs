//! Power-law estimation for computed spectra: log-log least squares in
//! index space, plus extrapolation across resolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{Sign, Spectrum};

/// Fitted n(lambda) ~ A_hat lambda^(-p_hat), obtained from the sequence fit
/// s_n ~ C n^(-1/p_hat) over the window; A_hat = C^p_hat.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerFitResult {
    pub p_hat: f64,
    #[serde(rename = "A_hat")]
    pub a_hat: f64,
    /// Log-log slope of the sequence fit, -1/p_hat.
    pub slope: f64,
    /// Inclusive 1-based index range [n_lo, n_hi] that was fitted.
    pub window: (usize, usize),
    pub rms_residual: f64,
    pub sign: Sign,
    /// Full spectrum length the default window was derived from.
    pub spectrum_len: usize,
}

/// Default fit window [max(8, 0.005 M), 0.1 M]: the head is pre-asymptotic
/// and the tail is contaminated by the diagonal-regularization error of the
/// assembly.
pub fn default_window(spectrum_len: usize) -> (usize, usize) {
    let lo = 8usize.max((0.005 * spectrum_len as f64).round() as usize);
    let hi = (0.1 * spectrum_len as f64).round() as usize;
    (lo, hi)
}

/// Least-squares fit of log s_n against log n over the window.
pub fn fit_power_law(
    s: &Spectrum,
    sign: Sign,
    window: Option<(usize, usize)>,
) -> Result<PowerFitResult> {
    let seq = s.magnitudes(sign);
    let m = s.values.len();
    let (lo, hi) = window.unwrap_or_else(|| default_window(m));
    if lo < 1 || hi <= lo {
        return Err(Error::invalid(format!("bad fit window [{lo}, {hi}]")));
    }
    if hi > seq.len() {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] exceeds the {} values of the requested sign",
            seq.len()
        )));
    }
    if hi - lo + 1 < 16 {
        return Err(Error::invalid("need at least 16 values in the fit window"));
    }
    let vals = &seq[lo - 1..hi];
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("non-positive values inside the fit window"));
    }

    let xs: Vec<f64> = (lo..=hi).map(|n| (n as f64).ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope < 0.0) {
        return Err(Error::numerical(format!(
            "sequence does not decay over the window (slope = {slope:.3e})"
        )));
    }
    let p_hat = -1.0 / slope;
    let a_hat = (intercept * p_hat).exp(); // C^p with C = exp(intercept)
    let mut rss = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        let r = y - (intercept + slope * x);
        rss += r * r;
    }
    let rms_residual = (rss / n).sqrt();
    Ok(PowerFitResult {
        p_hat,
        a_hat,
        slope,
        window: (lo, hi),
        rms_residual,
        sign,
        spectrum_len: m,
    })
}

/// One fit level inside an extrapolation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitLevel {
    pub resolution: usize,
    pub p_hat: f64,
    pub a_hat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtrapolatedFit {
    pub result: PowerFitResult,
    pub levels: Vec<FitLevel>,
}

fn ls_intercept(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return my;
    }
    let slope = sxy / sxx;
    my - slope * mx
}

/// Linear extrapolation of p_hat and log a_hat against the resolution
/// reciprocal 1/M, evaluated at 1/M -> 0. Sequences whose error halves per
/// resolution doubling are recovered exactly.
pub fn extrapolate(fits: &[PowerFitResult], resolutions: &[usize]) -> Result<ExtrapolatedFit> {
    if fits.len() < 2 {
        return Err(Error::invalid("extrapolation needs at least 2 resolutions"));
    }
    if fits.len() != resolutions.len() {
        return Err(Error::invalid("one fit per resolution required"));
    }
    for w in resolutions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("resolutions must be strictly increasing"));
        }
    }
    // windows must agree in relative terms
    let rel = |f: &PowerFitResult| {
        (
            f.window.0 as f64 / f.spectrum_len as f64,
            f.window.1 as f64 / f.spectrum_len as f64,
        )
    };
    let (lo0, hi0) = rel(&fits[0]);
    for f in fits.iter().skip(1) {
        let (lo, hi) = rel(f);
        if (lo - lo0).abs() > 0.02 || (hi - hi0).abs() > 0.02 {
            return Err(Error::invalid(
                "fit windows differ in relative terms across resolutions",
            ));
        }
    }
    let xs: Vec<f64> = resolutions.iter().map(|&m| 1.0 / m as f64).collect();
    let ps: Vec<f64> = fits.iter().map(|f| f.p_hat).collect();
    let las: Vec<f64> = fits.iter().map(|f| f.a_hat.ln()).collect();
    let p_ext = ls_intercept(&xs, &ps);
    let a_ext = ls_intercept(&xs, &las).exp();
    if !(p_ext > 0.0) {
        return Err(Error::numerical("extrapolated exponent is not positive"));
    }
    let last = fits.last().unwrap();
    let levels = fits
        .iter()
        .zip(resolutions.iter())
        .map(|(f, &m)| FitLevel {
            resolution: m,
            p_hat: f.p_hat,
            a_hat: f.a_hat,
        })
        .collect();
    Ok(ExtrapolatedFit {
        result: PowerFitResult {
            p_hat: p_ext,
            a_hat: a_ext,
            slope: -1.0 / p_ext,
            window: last.window,
            rms_residual: fits.iter().map(|f| f.rms_residual).fold(0.0, f64::max),
            sign: last.sign,
            spectrum_len: last.spectrum_len,
        },
        levels,
    })
}
