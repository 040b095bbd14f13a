//! Log-scale traffic normalization and the reconstruction quality settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Mean of `log(1 + x)` over the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub log_mean: f64,
}

impl NormStats {
    pub fn new(log_mean: f64) -> Result<Self> {
        if !(log_mean > 0.0 && log_mean.is_finite()) {
            return Err(Error::DegenerateStats(format!("log mean must be positive, got {log_mean}")));
        }
        Ok(Self { log_mean })
    }

    pub fn normalize_value(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("cannot normalize negative traffic {x}")));
        }
        Ok(x.ln_1p() / self.log_mean)
    }

    pub fn denormalize_value(&self, x: f64) -> f64 {
        (x * self.log_mean).exp_m1()
    }

    /// `log(1 + x) / x̄` element-wise.
    pub fn normalize(&self, values: &Grid) -> Result<Grid> {
        if let Some(v) = values.as_slice().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Domain(format!("cannot normalize negative traffic {v}")));
        }
        Ok(values.map(|x| x.ln_1p() / self.log_mean))
    }

    /// `exp(x · x̄) − 1` element-wise.
    pub fn denormalize(&self, values: &Grid) -> Grid {
        values.map(|x| self.denormalize_value(x))
    }
}

/// MAE threshold ε and the probability threshold β used by quality gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub epsilon: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    0.9
}

impl QualityConfig {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        let c = Self { epsilon, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, default_beta())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn zero_maps_to_zero() {
        let s = NormStats::new(3.7).unwrap();
        assert_eq!(s.normalize_value(0.0).unwrap(), 0.0);
    }

    #[test]
    fn normalize_example() {
        // training series {0, e−1}: log-mean (0 + 1) / 2
        let s = NormStats::new((0.0f64.ln_1p() + (E - 1.0).ln_1p()) / 2.0).unwrap();
        assert_eq!(s.log_mean, 0.5);
        assert!((s.normalize_value(E - 1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_examples() {
        let s = NormStats::new(0.5).unwrap();
        for x in [0.0, 1.0, 1e3, 1e6] {
            let back = s.denormalize_value(s.normalize_value(x).unwrap());
            assert!((back - x).abs() < 1e-6, "{x} -> {back}");
        }
    }

    #[test]
    fn negative_input_is_domain_error() {
        let s = NormStats::new(1.0).unwrap();
        assert!(matches!(s.normalize(&Grid::from_rows(&[[1.0, -0.5]])), Err(Error::Domain(_))));
        assert!(matches!(NormStats::new(0.0), Err(Error::DegenerateStats(_))));
    }

    #[test]
    fn quality_config_bounds() {
        assert!(QualityConfig::new(0.1, 0.9).is_ok());
        assert!(QualityConfig::new(0.0, 0.9).is_err());
        assert!(QualityConfig::new(0.1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_and_invertible(a in 0.0f64..1e9, b in 0.0f64..1e9, m in 0.1f64..20.0) {
            let s = NormStats::new(m).unwrap();
            let (na, nb) = (s.normalize_value(a).unwrap(), s.normalize_value(b).unwrap());
            if a < b {
                prop_assert!(na <= nb);
                if b - a > 1e-6 * b.max(1.0) { prop_assert!(na < nb); }
            }
            let back = s.denormalize_value(na);
            prop_assert!((back - a).abs() <= 1e-6 * a.max(1.0));
        }
    }
}
