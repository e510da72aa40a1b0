use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Lognormal mixture over τ. `means`/`scales` describe `log τ` in normalized units,
/// so `log τ = mean_log_tau + std_log_tau · y` with `y` a Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams<T> {
    pub weights: Vec<T>,
    pub means: Vec<T>,
    pub scales: Vec<T>,
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl<T: Real> MixtureParams<T> {
    pub fn new(weights: Vec<T>, means: Vec<T>, scales: Vec<T>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || scales.len() != k {
            return Err(Error::Contract("mixture needs K ≥ 1 equally sized weights/means/scales".into()));
        }
        Ok(Self { weights, means, scales })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// `−log p(τ)` with τ in hours, via log-sum-exp over components. Includes the
    /// Jacobians of the log transform (`+log τ`) and the standardization
    /// (`+log std_log_tau`).
    pub fn nll(&self, tau: f64, norm: &NormStats) -> Result<T> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTau(tau));
        }
        let y = T::of(norm.normalize(tau));
        let half_ln_2pi = T::of(HALF_LN_2PI);
        let half = T::of(0.5);
        let terms: Vec<T> = self
            .weights
            .iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((&w, &m), &s)| {
                let z = (y - m) / s;
                w.ln() - s.ln() - half_ln_2pi - half * z * z
            })
            .collect();
        Ok(-log_sum_exp(&terms) + T::of(tau.ln() + norm.std_log_tau.ln()))
    }

    /// Mixture CDF at τ hours.
    pub fn cdf(&self, tau: f64, norm: &NormStats) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        self.cdf_normalized(norm.normalize(tau))
    }

    fn cdf_normalized(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((&w, &m), &s)| w.to_f64_lossy() * std_normal_cdf((y - m.to_f64_lossy()) / s.to_f64_lossy()))
            .sum()
    }

    /// Quantile in hours, by bisection on the mixture CDF in log space.
    pub fn quantile(&self, p: f64, norm: &NormStats) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (&m, &s) in self.means.iter().zip(&self.scales) {
            let (m, s) = (m.to_f64_lossy(), s.to_f64_lossy());
            lo = lo.min(m - 40.0 * s);
            hi = hi.max(m + 40.0 * s);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf_normalized(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        norm.denormalize(0.5 * (lo + hi))
    }

    pub fn median(&self, norm: &NormStats) -> f64 {
        self.quantile(0.5, norm)
    }

    /// `E[τ]` in hours: `Σ ω_k exp(m + s μ_k + (s σ_k)² / 2)`.
    pub fn mean(&self, norm: &NormStats) -> f64 {
        let (m, s) = (norm.mean_log_tau, norm.std_log_tau);
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((&w, &mu), &sd)| {
                let (mu, sd) = (mu.to_f64_lossy(), sd.to_f64_lossy());
                w.to_f64_lossy() * (m + s * mu + 0.5 * (s * sd).powi(2)).exp()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_lognormal_at_one() {
        let p = MixtureParams::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        let nll = p.nll(1.0, &NormStats::IDENTITY).unwrap();
        assert!((nll - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert!((nll - 0.9189).abs() < 1e-4);
    }

    #[test]
    fn identical_components_collapse() {
        let one = MixtureParams::<f64>::new(vec![1.0], vec![0.3], vec![0.7]).unwrap();
        let two = MixtureParams::new(vec![0.5, 0.5], vec![0.3, 0.3], vec![0.7, 0.7]).unwrap();
        for tau in [0.01, 0.5, 1.0, 7.0, 300.0] {
            let n = NormStats { mean_log_tau: 0.4, std_log_tau: 1.3 };
            assert!((one.nll(tau, &n).unwrap() - two.nll(tau, &n).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_positive_tau() {
        let p = MixtureParams::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(p.nll(0.0, &NormStats::IDENTITY), Err(Error::InvalidTau(_))));
        assert!(p.nll(-1.0, &NormStats::IDENTITY).is_err());
    }

    #[test]
    fn median_and_mean_closed_form() {
        let p = MixtureParams::new(vec![1.0], vec![0.8], vec![0.5]).unwrap();
        assert!((p.median(&NormStats::IDENTITY) - 0.8f64.exp()).abs() < 1e-9);
        assert!((p.mean(&NormStats::IDENTITY) - (0.8f64 + 0.125).exp()).abs() < 1e-12);
        let n = NormStats { mean_log_tau: 1.0, std_log_tau: 2.0 };
        // y-median 0.8 → log τ = 1 + 2·0.8
        assert!((p.median(&n) - 2.6f64.exp()).abs() < 1e-8);
        assert!((p.cdf(p.median(&n), &n) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn works_in_f32() {
        let p = MixtureParams::<f32>::new(vec![0.25, 0.75], vec![-1.0, 1.0], vec![0.5, 0.9]).unwrap();
        let nll = p.nll(2.0, &NormStats::IDENTITY).unwrap();
        let p64 = MixtureParams::<f64>::new(vec![0.25, 0.75], vec![-1.0, 1.0], vec![0.5, 0.9]).unwrap();
        assert!((nll as f64 - p64.nll(2.0, &NormStats::IDENTITY).unwrap()).abs() < 1e-5);
    }
}
