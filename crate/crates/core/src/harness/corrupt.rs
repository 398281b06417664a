//! Sensor corruption: constant bias plus zero-mean Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::Measurement;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub noise_std_i: f64,
    pub noise_std_v: f64,
    pub bias_i: f64,
    pub bias_v: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn noise(std_i: f64, std_v: f64, seed: u64) -> Self {
        Self {
            noise_std_i: std_i,
            noise_std_v: std_v,
            seed,
            ..Self::default()
        }
    }

    pub fn bias(bias_i: f64, bias_v: f64) -> Self {
        Self {
            bias_i,
            bias_v,
            ..Self::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.noise_std_i == 0.0 && self.noise_std_v == 0.0 && self.bias_i == 0.0 && self.bias_v == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (name, x) in [("noise_std_i", self.noise_std_i), ("noise_std_v", self.noise_std_v)] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("{name} = {x} must be finite and >= 0"));
            }
        }
        for (name, x) in [("bias_i", self.bias_i), ("bias_v", self.bias_v)] {
            if !x.is_finite() {
                v.push(format!("{name} = {x} must be finite"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }
}

/// Apply `spec` to current and voltage; time and temperature pass through. The current
/// noise stream and the voltage noise stream come from one seeded generator, drawn in
/// sample order (current first).
pub fn corrupt(stream: &[Measurement], spec: &CorruptionSpec) -> Result<Vec<Measurement>> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(stream.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ni = Normal::new(0.0, spec.noise_std_i).map_err(|e| Error::Config(e.to_string()))?;
    let nv = Normal::new(0.0, spec.noise_std_v).map_err(|e| Error::Config(e.to_string()))?;
    Ok(stream
        .iter()
        .map(|m| {
            let di = ni.sample(&mut rng);
            let dv = nv.sample(&mut rng);
            Measurement {
                current: m.current + spec.bias_i + di,
                voltage: m.voltage + spec.bias_v + dv,
                ..*m
            }
        })
        .collect())
}
