use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ExplicitEuler,
    #[default]
    ImplicitEuler,
}

/// Grid sizes and time stepping for the transport equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    /// Radial nodes per particle.
    pub n: usize,
    /// Electrolyte control volumes across the cell.
    pub m: usize,
    /// Largest internal step (s). Longer sample intervals are sub-stepped.
    pub dt: f64,
    pub integrator: Integrator,
}

/// Explicit Euler must satisfy `dt <= EXPLICIT_SAFETY * dr^2 / D_s`.
pub const EXPLICIT_SAFETY: f64 = 0.4;

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            n: 10,
            m: 30,
            dt: 1.0,
            integrator: Integrator::ImplicitEuler,
        }
    }
}

impl DiscretizationConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn explicit(mut self) -> Self {
        self.integrator = Integrator::ExplicitEuler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("need at least 3 radial nodes, got {}", self.n)));
        }
        if self.m < 6 {
            return Err(Error::Config(format!(
                "need at least 6 electrolyte volumes, got {}",
                self.m
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Largest stable explicit step for a particle of radius `r` and diffusivity `d`.
    pub fn explicit_limit(&self, r: f64, d: f64) -> f64 {
        let dr = r / self.n as f64;
        EXPLICIT_SAFETY * dr * dr / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_bounds() {
        let c = DiscretizationConfig::default();
        assert_eq!((c.n, c.m, c.dt), (10, 30, 1.0));
        assert_eq!(c.integrator, Integrator::ImplicitEuler);
        assert!(c.validate().is_ok());
        assert!(c.with_n(2).validate().is_err());
        assert!(c.with_m(5).validate().is_err());
        assert!(c.with_dt(0.0).validate().is_err());
        assert!((c.explicit_limit(5e-6, 1e-14) - 0.4 * 2.5e-13 / 1e-14).abs() < 1e-9);
    }

    #[test]
    fn toml_round_trip() {
        let c = DiscretizationConfig::default().explicit().with_dt(0.5);
        let s = toml::to_string(&c).unwrap();
        assert!(s.contains("explicit-euler"));
        let back: DiscretizationConfig = toml::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
