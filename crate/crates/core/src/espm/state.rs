use serde::{Deserialize, Serialize};

use crate::params::{CellParameters, Electrode, SeiParameters};

/// Salt concentration the reduced model holds fixed (mol/m^3).
pub const NOMINAL_CE: f64 = 1200.0;

/// Full plant state: radial profiles, electrolyte profile, capacity and film thickness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspmState {
    /// Cathode radial profile, centre to surface (mol/m^3).
    pub c_s_p: Vec<f64>,
    /// Anode radial profile, centre to surface (mol/m^3).
    pub c_s_n: Vec<f64>,
    /// Electrolyte volumes, anode collector to cathode collector (mol/m^3).
    pub c_e: Vec<f64>,
    /// Capacity (Ah).
    pub q: f64,
    /// SEI thickness (m).
    pub l_sei: f64,
}

impl EspmState {
    /// Relaxed cell at `soc`: uniform solid profiles and uniform electrolyte.
    pub fn at_soc(params: &CellParameters, sei: &SeiParameters, n: usize, m: usize, soc: f64) -> Self {
        let cp = params.stoichiometry_at_soc(Electrode::Cathode, soc) * params.c_s_p_max;
        let cn = params.stoichiometry_at_soc(Electrode::Anode, soc) * params.c_s_n_max;
        Self {
            c_s_p: vec![cp; n],
            c_s_n: vec![cn; n],
            c_e: vec![NOMINAL_CE; m],
            q: sei.q_0,
            l_sei: sei.l_sei_0,
        }
    }

    pub fn solid(&self, e: Electrode) -> &[f64] {
        match e {
            Electrode::Anode => &self.c_s_n,
            Electrode::Cathode => &self.c_s_p,
        }
    }

    pub fn surface(&self, e: Electrode) -> f64 {
        *self.solid(e).last().expect("non-empty profile")
    }

    /// Names of violated invariants, if any.
    pub fn violations(&self, params: &CellParameters, sei: &SeiParameters) -> Vec<String> {
        let mut v = Vec::new();
        for (name, c, cmax) in [
            ("c_s_p", &self.c_s_p, params.c_s_p_max),
            ("c_s_n", &self.c_s_n, params.c_s_n_max),
        ] {
            if let Some((i, x)) = c.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && **x <= cmax)) {
                v.push(format!("{name}[{i}] = {x} outside [0, {cmax}]"));
            }
        }
        if let Some((i, x)) = self.c_e.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            v.push(format!("c_e[{i}] = {x} not positive"));
        }
        if !(self.q > 0.0) {
            v.push(format!("capacity {} not positive", self.q));
        }
        if self.l_sei < sei.l_sei_0 {
            v.push(format!("SEI thickness {} below its initial value", self.l_sei));
        }
        v
    }
}
