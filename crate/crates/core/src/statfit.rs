//! Distance-dependence and distribution fits with 95% confidence intervals.
//!
//! Regressions are weighted least squares. Log-distance binning weights give
//! every occupied `log10(d)` bin the same total influence, which compensates
//! uneven measurement layouts. Coefficient intervals use the sandwich
//! covariance `s^2 (X'WX)^-1 X'W^2X (X'WX)^-1` with `s^2 = sum(r^2)/(n-2)`
//! and Student-t quantiles on `n - 2` degrees of freedom; with uniform
//! weights this reduces to the textbook OLS intervals.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

const CONFIDENCE: f64 = 0.95;
/// Number of equal-width log10(d) bins used to weight regressions.
pub const DEFAULT_N_BINS: usize = 10;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Caller-supplied weights, normally [`log_distance_weights`].
    Weighted,
    Ols,
}

/// `PL(d) = alpha + 10 beta log10(d) + eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    /// Weighted residual standard deviation, dB.
    pub sigma_eps: f64,
    pub weighting: Weighting,
    pub alpha_ci: Interval,
    pub beta_ci: Interval,
    pub n: usize,
}

impl PowerLawFit {
    pub fn mean_at(&self, d: f64) -> f64 {
        self.alpha + 10.0 * self.beta * d.log10()
    }
}

/// Gaussian fit on a dB (or log10) scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LognormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub mu_ci: Interval,
    pub sigma_ci: Interval,
    pub n: usize,
    /// All samples identical; `sigma` is zero and the intervals collapse.
    pub degenerate: bool,
}

/// `Z = alpha + beta log10(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLogdFit {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_ci: Interval,
    pub beta_ci: Interval,
    pub n: usize,
}

impl LinearLogdFit {
    pub fn mean_at(&self, d: f64) -> f64 {
        self.alpha + self.beta * d.log10()
    }
}

fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

fn check_distances(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::Empty("distance list"));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!("distance {bad} must be positive")));
    }
    Ok(())
}

/// Equal total weight for each occupied bin of `[min log10 d, max log10 d]`,
/// split evenly among the bin's points. The weights sum to one.
pub fn log_distance_weights(d: &[f64], n_bins: usize) -> Result<Vec<f64>> {
    check_distances(d)?;
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be at least 1".into()));
    }
    let logs: Vec<f64> = d.iter().map(|v| v.log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let bin_of = |l: f64| -> usize {
        if width > 0.0 {
            (((l - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            0
        }
    };
    let mut counts = vec![0usize; n_bins];
    for &l in &logs {
        counts[bin_of(l)] += 1;
    }
    let occupied = counts.iter().filter(|&&c| c > 0).count() as f64;
    Ok(logs
        .iter()
        .map(|&l| 1.0 / (occupied * counts[bin_of(l)] as f64))
        .collect())
}

struct LineFit {
    intercept: f64,
    slope: f64,
    intercept_ci: Interval,
    slope_ci: Interval,
    /// `sqrt(n/(n-2) * sum(w r^2))` with normalized weights.
    residual_sd: f64,
}

fn fit_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n || w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: if y.len() != n { y.len() } else { w.len() },
        });
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if let Some(i) = (0..n).find(|&i| !(x[i].is_finite() && y[i].is_finite())) {
        return Err(Error::NonFinite { index: i });
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let w_total: f64 = w.iter().sum();
    if !(w_total > 0.0) {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    let w: Vec<f64> = w.iter().map(|v| v / w_total).collect();

    let xm: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let ym: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let x_scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if !(sxx > 1e-24 * x_scale * x_scale) {
        return Err(Error::DegenerateDesign);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let dof = (n - 2) as f64;
    let s2 = resid.iter().map(|r| r * r).sum::<f64>() / dof;

    // Sandwich covariance in centered coordinates u = x - xm, where
    // X'WX = diag(1, sxx).
    let b00: f64 = w.iter().map(|w| w * w).sum();
    let b01: f64 = (0..n).map(|i| w[i] * w[i] * (x[i] - xm)).sum();
    let b11: f64 = (0..n).map(|i| w[i] * w[i] * (x[i] - xm).powi(2)).sum();
    let var_c = s2 * b00;
    let cov_cs = s2 * b01 / sxx;
    let var_slope = s2 * b11 / (sxx * sxx);
    // intercept = c - slope * xm
    let var_intercept = var_c - 2.0 * xm * cov_cs + xm * xm * var_slope;

    let t = t_quantile(n - 2);
    let ci = |est: f64, var: f64| {
        let h = t * var.max(0.0).sqrt();
        Interval { lo: est - h, hi: est + h }
    };
    let wss: f64 = w.iter().zip(&resid).map(|(w, r)| w * r * r).sum();
    Ok(LineFit {
        intercept,
        slope,
        intercept_ci: ci(intercept, var_intercept),
        slope_ci: ci(slope, var_slope),
        residual_sd: (wss * n as f64 / dof).sqrt(),
    })
}

/// Weighted fit of the alpha-beta path-loss law.
pub fn fit_power_law(d: &[f64], pl_db: &[f64], weights: &[f64]) -> Result<PowerLawFit> {
    check_distances(d)?;
    let x: Vec<f64> = d.iter().map(|v| 10.0 * v.log10()).collect();
    let line = fit_line(&x, pl_db, weights)?;
    Ok(PowerLawFit {
        alpha: line.intercept,
        beta: line.slope,
        sigma_eps: line.residual_sd,
        weighting: Weighting::Weighted,
        alpha_ci: line.intercept_ci,
        beta_ci: line.slope_ci,
        n: d.len(),
    })
}

/// alpha-beta fit with log-distance binning weights.
pub fn fit_power_law_binned(d: &[f64], pl_db: &[f64], n_bins: usize) -> Result<PowerLawFit> {
    let w = log_distance_weights(d, n_bins)?;
    fit_power_law(d, pl_db, &w)
}

/// Ordinary least squares alpha-beta fit; residuals are zero-mean.
pub fn fit_ols(d: &[f64], pl_db: &[f64]) -> Result<PowerLawFit> {
    let w = vec![1.0; d.len()];
    let mut fit = fit_power_law(d, pl_db, &w)?;
    fit.weighting = Weighting::Ols;
    Ok(fit)
}

/// `eps_i = PL_i - (alpha + 10 beta log10 d_i)`.
pub fn shadowing_residuals(fit: &PowerLawFit, d: &[f64], pl_db: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(pl_db)
        .map(|(&d, &pl)| pl - fit.mean_at(d))
        .collect()
}

/// Sample mean and standard deviation with t (mean) and chi-square (sigma)
/// intervals.
pub fn fit_lognormal(values: &[f64]) -> Result<LognormalFit> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mu = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    let dof = (n - 1) as f64;
    let sigma = (ss / dof).sqrt();
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let degenerate = sigma <= 1e-12 * scale;
    if degenerate {
        let point = |v| Interval { lo: v, hi: v };
        return Ok(LognormalFit {
            mu,
            sigma: 0.0,
            mu_ci: point(mu),
            sigma_ci: point(0.0),
            n,
            degenerate,
        });
    }
    let t = t_quantile(n - 1);
    let h = t * sigma / (n as f64).sqrt();
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    let upper = chi.inverse_cdf(0.5 + CONFIDENCE / 2.0);
    let lower = chi.inverse_cdf(0.5 - CONFIDENCE / 2.0);
    Ok(LognormalFit {
        mu,
        sigma,
        mu_ci: Interval { lo: mu - h, hi: mu + h },
        sigma_ci: Interval {
            lo: sigma * (dof / upper).sqrt(),
            hi: sigma * (dof / lower).sqrt(),
        },
        n,
        degenerate,
    })
}

/// Weighted fit of `Z = alpha + beta log10(d)` with explicit weights.
pub fn fit_linear_logd_weighted(values: &[f64], d: &[f64], weights: &[f64]) -> Result<LinearLogdFit> {
    check_distances(d)?;
    let x: Vec<f64> = d.iter().map(|v| v.log10()).collect();
    let line = fit_line(&x, values, weights)?;
    Ok(LinearLogdFit {
        alpha: line.intercept,
        beta: line.slope,
        alpha_ci: line.intercept_ci,
        beta_ci: line.slope_ci,
        n: d.len(),
    })
}

/// `Z = alpha + beta log10(d)` with log-distance binning weights.
pub fn fit_linear_logd(values: &[f64], d: &[f64], n_bins: usize) -> Result<LinearLogdFit> {
    let w = log_distance_weights(d, n_bins)?;
    fit_linear_logd_weighted(values, d, &w)
}
