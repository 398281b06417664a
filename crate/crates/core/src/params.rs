//! Cell and SEI parameter sets, and the structured parameter file that carries them.
//!
//! The parameter file is TOML with a `[cell]` table and a `[sei]` table. Units are
//! given in the comments of the shipped reference file; all values are SI except
//! capacities (Ah).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::props::arrhenius_scale;

pub const FARADAY: f64 = 96485.33212;
pub const GAS_CONSTANT: f64 = 8.314462618;

const REFERENCE_FILE: &str = include_str!("../data/reference_cell.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Anode,
    Cathode,
}

fn default_faraday() -> f64 {
    FARADAY
}

fn default_gas_constant() -> f64 {
    GAS_CONSTANT
}

/// Geometry, transport, kinetic and stoichiometric constants of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParameters {
    pub area: f64,
    pub l_n: f64,
    pub l_s: f64,
    pub l_p: f64,
    pub r_n: f64,
    pub r_p: f64,
    pub eps_n: f64,
    pub eps_p: f64,
    pub eps_e_n: f64,
    pub eps_e_s: f64,
    pub eps_e_p: f64,
    pub eps_n_f: f64,
    pub eps_p_f: f64,
    pub c_s_n_max: f64,
    pub c_s_p_max: f64,
    pub d_s_n_ref: f64,
    pub d_s_p_ref: f64,
    pub ea_d_n: f64,
    pub ea_d_p: f64,
    pub ea_k_n: f64,
    pub ea_k_p: f64,
    pub k_n_ref: f64,
    pub k_p_ref: f64,
    pub t_plus: f64,
    pub r_l: f64,
    pub t_ref: f64,
    pub theta_n_100: f64,
    pub theta_n_0: f64,
    pub theta_p_100: f64,
    pub theta_p_0: f64,
    #[serde(default = "default_faraday")]
    pub faraday: f64,
    #[serde(default = "default_gas_constant")]
    pub gas_constant: f64,
}

/// Per-electrode view used by code that treats both electrodes alike.
#[derive(Debug, Clone, Copy)]
pub struct ElectrodeGeometry {
    pub radius: f64,
    pub thickness: f64,
    pub eps_solid: f64,
    pub c_max: f64,
    pub theta_100: f64,
    pub theta_0: f64,
}

impl ElectrodeGeometry {
    /// Specific interfacial area a_s = 3 eps / R.
    pub fn a_s(&self) -> f64 {
        3.0 * self.eps_solid / self.radius
    }
}

impl CellParameters {
    pub fn reference() -> Self {
        ParameterSet::reference().cell
    }

    pub fn electrode(&self, e: Electrode) -> ElectrodeGeometry {
        match e {
            Electrode::Anode => ElectrodeGeometry {
                radius: self.r_n,
                thickness: self.l_n,
                eps_solid: self.eps_n,
                c_max: self.c_s_n_max,
                theta_100: self.theta_n_100,
                theta_0: self.theta_n_0,
            },
            Electrode::Cathode => ElectrodeGeometry {
                radius: self.r_p,
                thickness: self.l_p,
                eps_solid: self.eps_p,
                c_max: self.c_s_p_max,
                theta_100: self.theta_p_100,
                theta_0: self.theta_p_0,
            },
        }
    }

    pub fn a_s(&self, e: Electrode) -> f64 {
        self.electrode(e).a_s()
    }

    pub fn total_thickness(&self) -> f64 {
        self.l_n + self.l_s + self.l_p
    }

    pub fn solid_diffusivity(&self, e: Electrode, temperature: f64) -> Result<f64> {
        let (d, ea) = match e {
            Electrode::Anode => (self.d_s_n_ref, self.ea_d_n),
            Electrode::Cathode => (self.d_s_p_ref, self.ea_d_p),
        };
        arrhenius_scale(d, ea, temperature, self.t_ref, self.gas_constant)
    }

    pub fn rate_constant(&self, e: Electrode, temperature: f64) -> Result<f64> {
        let (k, ea) = match e {
            Electrode::Anode => (self.k_n_ref, self.ea_k_n),
            Electrode::Cathode => (self.k_p_ref, self.ea_k_p),
        };
        arrhenius_scale(k, ea, temperature, self.t_ref, self.gas_constant)
    }

    /// Stoichiometry of an electrode at a given cell SOC (linear in the window).
    pub fn stoichiometry_at_soc(&self, e: Electrode, soc: f64) -> f64 {
        let g = self.electrode(e);
        g.theta_0 + soc * (g.theta_100 - g.theta_0)
    }

    /// Capacity implied by the cathode window (Ah).
    pub fn cathode_capacity_ah(&self) -> f64 {
        self.faraday * self.l_p * self.eps_p * self.c_s_p_max * (self.theta_p_0 - self.theta_p_100) * self.area / 3600.0
    }

    /// Capacity implied by the anode window (Ah).
    pub fn anode_capacity_ah(&self) -> f64 {
        self.faraday * self.l_n * self.eps_n * self.c_s_n_max * (self.theta_n_100 - self.theta_n_0) * self.area / 3600.0
    }

    /// Every violated invariant, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = [
            ("area", self.area),
            ("l_n", self.l_n),
            ("l_s", self.l_s),
            ("l_p", self.l_p),
            ("r_n", self.r_n),
            ("r_p", self.r_p),
            ("c_s_n_max", self.c_s_n_max),
            ("c_s_p_max", self.c_s_p_max),
            ("d_s_n_ref", self.d_s_n_ref),
            ("d_s_p_ref", self.d_s_p_ref),
            ("k_n_ref", self.k_n_ref),
            ("k_p_ref", self.k_p_ref),
            ("t_ref", self.t_ref),
            ("faraday", self.faraday),
            ("gas_constant", self.gas_constant),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be finite and > 0 (got {x})"));
            }
        }
        let fractions = [
            ("eps_n", self.eps_n),
            ("eps_p", self.eps_p),
            ("eps_e_n", self.eps_e_n),
            ("eps_e_s", self.eps_e_s),
            ("eps_e_p", self.eps_e_p),
            ("eps_n_f", self.eps_n_f),
            ("eps_p_f", self.eps_p_f),
        ];
        for (name, x) in fractions {
            if !(x > 0.0 && x < 1.0) {
                v.push(format!("{name} must lie in (0, 1) (got {x})"));
            }
        }
        let tol = 1e-12;
        let sum_n = self.eps_n + self.eps_e_n + self.eps_n_f;
        if sum_n > 1.0 + tol {
            v.push(format!("eps_n + eps_e_n + eps_n_f must be <= 1 (got {sum_n})"));
        }
        let sum_p = self.eps_p + self.eps_e_p + self.eps_p_f;
        if sum_p > 1.0 + tol {
            v.push(format!("eps_p + eps_e_p + eps_p_f must be <= 1 (got {sum_p})"));
        }
        for (name, x) in [
            ("ea_d_n", self.ea_d_n),
            ("ea_d_p", self.ea_d_p),
            ("ea_k_n", self.ea_k_n),
            ("ea_k_p", self.ea_k_p),
            ("r_l", self.r_l),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("{name} must be finite and >= 0 (got {x})"));
            }
        }
        if !(self.t_plus > 0.0 && self.t_plus < 1.0) {
            v.push(format!("t_plus must lie in (0, 1) (got {})", self.t_plus));
        }
        for (name, x) in [
            ("theta_n_100", self.theta_n_100),
            ("theta_n_0", self.theta_n_0),
            ("theta_p_100", self.theta_p_100),
            ("theta_p_0", self.theta_p_0),
        ] {
            if !(x > 0.0 && x < 1.0) {
                v.push(format!("{name} must lie in (0, 1) (got {x})"));
            }
        }
        if !(self.theta_n_100 > self.theta_n_0) {
            v.push(format!(
                "theta_n_100 ({}) must exceed theta_n_0 ({})",
                self.theta_n_100, self.theta_n_0
            ));
        }
        if !(self.theta_p_100 < self.theta_p_0) {
            v.push(format!(
                "theta_p_100 ({}) must be below theta_p_0 ({})",
                self.theta_p_100, self.theta_p_0
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }
}

/// SEI-layer constants. The lumped resistance-per-capacity `theta_2` is derived on
/// demand so it can never drift from its constituents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeiParameters {
    pub m_sei: f64,
    pub rho_sei: f64,
    pub kappa_sei: f64,
    pub l_sei_0: f64,
    pub q_0: f64,
}

impl SeiParameters {
    pub fn reference() -> Self {
        ParameterSet::reference().sei
    }

    /// Constant part of theta_2 that multiplies 1/kappa_sei (Ohm S / (m Ah)).
    pub fn theta_2_numerator(&self, cell: &CellParameters) -> f64 {
        let a_sn = cell.a_s(Electrode::Anode);
        3600.0 * self.m_sei / (2.0 * cell.faraday * cell.area.powi(2) * self.rho_sei * a_sn.powi(2) * cell.l_n.powi(2))
    }

    /// SEI resistance gained per Ah of capacity lost (Ohm/Ah).
    pub fn theta_2(&self, cell: &CellParameters) -> f64 {
        self.theta_2_numerator(cell) / self.kappa_sei
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("m_sei", self.m_sei),
            ("rho_sei", self.rho_sei),
            ("kappa_sei", self.kappa_sei),
            ("l_sei_0", self.l_sei_0),
            ("q_0", self.q_0),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} must be finite and > 0 (got {x})"));
            }
        }
        v
    }
}

/// The contents of one parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub cell: CellParameters,
    pub sei: SeiParameters,
}

impl ParameterSet {
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_FILE, "<reference_cell.toml>").expect("shipped reference parameter file is valid")
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let set: ParameterSet = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameter set serializes")
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.cell.violations();
        v.extend(self.sei.violations());
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }
}

pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
