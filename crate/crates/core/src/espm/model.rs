use serde::{Deserialize, Serialize};

use crate::aging::power_fade_resistance;
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::ocp::OcpTable;
use crate::params::{CellParameters, Electrode, SeiParameters};
use crate::props::{bruggeman, diffusional_conductivity, electrolyte_conductivity};

use super::config::DiscretizationConfig;
use super::electrolyte::ElectrolyteGrid;
use super::solid::SolidOperator;
use super::state::{EspmState, NOMINAL_CE};

/// Whether the electrolyte is simulated or frozen at [`NOMINAL_CE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ElectrolyteMode {
    #[default]
    Dynamic,
    Frozen,
}

/// Exchange current density (A/m^2).
pub fn exchange_current(c_surf: f64, c_e: f64, c_max: f64, k: f64, faraday: f64) -> Result<f64> {
    if !(c_surf > 0.0 && c_surf < c_max) {
        return Err(Error::KineticSingularity { c_surf, c_max });
    }
    if !(c_e > 0.0) {
        return Err(Error::Domain(format!("electrolyte concentration {c_e} must be > 0")));
    }
    Ok(faraday * k * (c_e * c_surf * (c_max - c_surf)).sqrt())
}

/// Butler-Volmer overpotential with symmetric transfer coefficients.
///
/// Discharge (I > 0) gives a negative cathode and a positive anode overpotential.
pub fn overpotential(
    c_surf: f64,
    c_e: f64,
    current: f64,
    t: f64,
    electrode: Electrode,
    params: &CellParameters,
) -> Result<f64> {
    let g = params.electrode(electrode);
    let k = params.rate_constant(electrode, t)?;
    let i0 = exchange_current(c_surf, c_e, g.c_max, k, params.faraday)?;
    let x = current / (2.0 * g.a_s() * params.area * g.thickness * i0);
    let mag = 2.0 * params.gas_constant * t / params.faraday * x.asinh();
    Ok(match electrode {
        Electrode::Cathode => -mag,
        Electrode::Anode => mag,
    })
}

/// Ohmic electrolyte resistance (ohm) with region-mean concentrations
/// `[anode, separator, cathode]` and the given anode porosity.
pub fn electrolyte_resistance(params: &CellParameters, c_e_regions: [f64; 3], t: f64, eps_e_n: f64) -> Result<f64> {
    let porosities = [eps_e_n, params.eps_e_s, params.eps_e_p];
    if let Some(e) = porosities.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::Domain(format!(
            "degenerate electrode: porosity {e} outside (0, 1)"
        )));
    }
    let k_n = bruggeman(electrolyte_conductivity(c_e_regions[0], t)?, eps_e_n);
    let k_s = bruggeman(electrolyte_conductivity(c_e_regions[1], t)?, params.eps_e_s);
    let k_p = bruggeman(electrolyte_conductivity(c_e_regions[2], t)?, params.eps_e_p);
    Ok((params.l_n / k_n + 2.0 * params.l_s / k_s + params.l_p / k_p) / (2.0 * params.area))
}

/// The plant: solid diffusion in both electrodes plus (optionally) electrolyte transport.
#[derive(Debug, Clone)]
pub struct EspmModel {
    pub params: CellParameters,
    pub sei: SeiParameters,
    pub ocp: OcpTable,
    pub cfg: DiscretizationConfig,
    pub mode: ElectrolyteMode,
    /// Include the power-fade drop in the terminal voltage.
    pub aged: bool,
    pub cathode: SolidOperator,
    pub anode: SolidOperator,
    pub grid: ElectrolyteGrid,
}

/// Per-sample output of [`EspmModel::simulate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub temperature: Vec<f64>,
    pub voltage: Vec<f64>,
    pub soc_n: Vec<f64>,
    pub soc_p: Vec<f64>,
    pub states: Vec<EspmState>,
    /// True if a voltage cutoff ended the run before the cycle did.
    pub cut_off: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> Option<&EspmState> {
        self.states.last()
    }

    pub fn surface(&self, e: Electrode) -> Vec<f64> {
        self.states.iter().map(|s| s.surface(e)).collect()
    }
}

/// Optional stopping voltages for [`EspmModel::simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cutoffs {
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
}

impl EspmModel {
    pub fn new(params: CellParameters, sei: SeiParameters, ocp: OcpTable, cfg: DiscretizationConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let cathode = SolidOperator::new(&params, cfg.n, Electrode::Cathode)?;
        let anode = SolidOperator::new(&params, cfg.n, Electrode::Anode)?;
        let grid = ElectrolyteGrid::new(&params, cfg.m)?;
        Ok(Self {
            params,
            sei,
            ocp,
            cfg,
            mode: ElectrolyteMode::Dynamic,
            aged: false,
            cathode,
            anode,
            grid,
        })
    }

    /// Shipped reference cell with default discretisation.
    pub fn reference() -> Self {
        let p = crate::params::ParameterSet::reference();
        Self::new(p.cell, p.sei, OcpTable::reference(), DiscretizationConfig::default()).expect("reference model")
    }

    pub fn with_mode(mut self, mode: ElectrolyteMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_aging(mut self, aged: bool) -> Self {
        self.aged = aged;
        self
    }

    pub fn operator(&self, e: Electrode) -> &SolidOperator {
        match e {
            Electrode::Anode => &self.anode,
            Electrode::Cathode => &self.cathode,
        }
    }

    pub fn state_at_soc(&self, soc: f64) -> EspmState {
        EspmState::at_soc(&self.params, &self.sei, self.cfg.n, self.cfg.m, soc)
    }

    fn check_explicit(&self, e: Electrode, d: f64, dt: f64) -> Result<()> {
        if self.cfg.integrator == super::config::Integrator::ExplicitEuler {
            let lim = self.cfg.explicit_limit(self.params.electrode(e).radius, d);
            if dt > lim * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "explicit step {dt} s exceeds the {e:?} stability limit {lim} s"
                )));
            }
        }
        Ok(())
    }

    /// Advance both particles by `dt`.
    pub fn step_solid(&self, state: &EspmState, current: f64, t: f64, dt: f64) -> Result<EspmState> {
        let mut next = state.clone();
        for e in [Electrode::Cathode, Electrode::Anode] {
            let d = self.params.solid_diffusivity(e, t)?;
            self.check_explicit(e, d, dt)?;
            let c = match e {
                Electrode::Cathode => &mut next.c_s_p,
                Electrode::Anode => &mut next.c_s_n,
            };
            self.operator(e).step(c, d, current, dt, self.cfg.integrator, None)?;
            let cmax = self.params.electrode(e).c_max;
            if let Some((node, &value)) = c.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= cmax)) {
                return Err(Error::Saturation {
                    electrode: e,
                    node,
                    value,
                });
            }
        }
        Ok(next)
    }

    /// Advance the electrolyte by `dt` (no-op when frozen).
    pub fn step_electrolyte(&self, state: &EspmState, current: f64, t: f64, dt: f64) -> Result<EspmState> {
        let mut next = state.clone();
        if self.mode == ElectrolyteMode::Dynamic {
            if self.cfg.integrator == super::config::Integrator::ExplicitEuler {
                let lim = self.grid.explicit_limit(&state.c_e, t)?;
                if dt > lim {
                    return Err(Error::Config(format!(
                        "explicit step {dt} s exceeds the electrolyte stability limit {lim} s"
                    )));
                }
            }
            self.grid.step(&mut next.c_e, current, t, dt, self.cfg.integrator)?;
        }
        Ok(next)
    }

    /// Advance the whole transport state over a sample interval, sub-stepping at `cfg.dt`.
    pub fn step(&self, state: &EspmState, current: f64, t: f64, interval: f64) -> Result<EspmState> {
        if interval <= 0.0 {
            return Ok(state.clone());
        }
        let k = (interval / self.cfg.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = interval / k as f64;
        let mut s = state.clone();
        for _ in 0..k {
            s = self.step_solid(&s, current, t, h)?;
            s = self.step_electrolyte(&s, current, t, h)?;
        }
        Ok(s)
    }

    /// Region means of the electrolyte used for conductivities.
    pub fn electrolyte_regions(&self, state: &EspmState) -> [f64; 3] {
        match self.mode {
            ElectrolyteMode::Dynamic => self.grid.region_means(&state.c_e),
            ElectrolyteMode::Frozen => [NOMINAL_CE; 3],
        }
    }

    /// Electrolyte concentration seen by each electrode's kinetics.
    fn local_ce(&self, state: &EspmState) -> (f64, f64) {
        match self.mode {
            ElectrolyteMode::Dynamic => {
                let r = self.grid.region_means(&state.c_e);
                (r[0], r[2])
            }
            ElectrolyteMode::Frozen => (NOMINAL_CE, NOMINAL_CE),
        }
    }

    /// Concentration-polarisation term of the terminal voltage.
    pub fn polarisation(&self, state: &EspmState, t: f64) -> Result<f64> {
        if self.mode == ElectrolyteMode::Frozen {
            return Ok(0.0);
        }
        let c0 = state.c_e[0];
        let cl = state.c_e[state.c_e.len() - 1];
        let nu = diffusional_conductivity(self.grid.mean(&state.c_e), t)?;
        let p = &self.params;
        Ok(2.0 * p.gas_constant * t * (1.0 - p.t_plus) * nu / p.faraday * (cl / c0).ln())
    }

    /// U_j + eta_j at the surface of one electrode.
    pub fn electrode_potential(&self, e: Electrode, c_surf: f64, c_e: f64, current: f64, t: f64) -> Result<f64> {
        let g = self.params.electrode(e);
        let u = self.ocp.curve(e).potential(c_surf / g.c_max, t, self.params.t_ref)?;
        Ok(u + overpotential(c_surf, c_e, current, t, e, &self.params)?)
    }

    pub fn terminal_voltage(&self, state: &EspmState, current: f64, t: f64) -> Result<f64> {
        self.terminal_voltage_with(state, current, t, self.aged)
    }

    pub fn terminal_voltage_with(&self, state: &EspmState, current: f64, t: f64, aged: bool) -> Result<f64> {
        let (ce_n, ce_p) = self.local_ce(state);
        let h1 = self.electrode_potential(Electrode::Cathode, state.surface(Electrode::Cathode), ce_p, current, t)?;
        let h2 = self.electrode_potential(Electrode::Anode, state.surface(Electrode::Anode), ce_n, current, t)?;
        let regions = self.electrolyte_regions(state);
        let r_e0 = electrolyte_resistance(&self.params, regions, t, self.params.eps_e_n)?;
        let mut v = h1 - h2 + self.polarisation(state, t)? - current * (r_e0 + self.params.r_l);
        if aged {
            v -= current * power_fade_resistance(state.q, &self.params, &self.sei, regions, t)?;
        }
        Ok(v)
    }

    /// Bulk SOC of each electrode, `(anode, cathode)`. Not clamped.
    pub fn bulk_soc(&self, state: &EspmState) -> (f64, f64) {
        let soc = |e: Electrode, c: &[f64]| {
            let g = self.params.electrode(e);
            let theta = self.operator(e).bulk(c) / g.c_max;
            (theta - g.theta_0) / (g.theta_100 - g.theta_0)
        };
        (
            soc(Electrode::Anode, &state.c_s_n),
            soc(Electrode::Cathode, &state.c_s_p),
        )
    }

    /// Voltage is sampled before each step: `V_k = V(x_k, I_k)`, then
    /// `x_{k+1} = step(x_k, I_k, t_{k+1} - t_k)`.
    pub fn simulate(&self, cycle: &DriveCycle, init: &EspmState) -> Result<Trajectory> {
        self.simulate_with(cycle, init, Cutoffs::default())
    }

    pub fn simulate_with(&self, cycle: &DriveCycle, init: &EspmState, cut: Cutoffs) -> Result<Trajectory> {
        if cycle.is_empty() {
            return Err(Error::Domain("drive cycle is empty".into()));
        }
        let n = cycle.len();
        let mut tr = Trajectory {
            t: Vec::with_capacity(n),
            current: Vec::with_capacity(n),
            temperature: Vec::with_capacity(n),
            voltage: Vec::with_capacity(n),
            soc_n: Vec::with_capacity(n),
            soc_p: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            cut_off: false,
        };
        let mut x = init.clone();
        for k in 0..n {
            let (tk, ik, temp) = (cycle.t[k], cycle.current[k], cycle.temperature[k]);
            let v = self.terminal_voltage(&x, ik, temp).map_err(|e| e.at_time(tk))?;
            if cut.v_min.is_some_and(|m| v < m) || cut.v_max.is_some_and(|m| v > m) {
                tr.cut_off = true;
                break;
            }
            let (sn, sp) = self.bulk_soc(&x);
            tr.t.push(tk);
            tr.current.push(ik);
            tr.temperature.push(temp);
            tr.voltage.push(v);
            tr.soc_n.push(sn);
            tr.soc_p.push(sp);
            let next = if k + 1 < n {
                Some(self.step(&x, ik, temp, cycle.dt_after(k)).map_err(|e| e.at_time(tk))?)
            } else {
                None
            };
            tr.states.push(x);
            match next {
                Some(s) => x = s,
                None => break,
            }
        }
        Ok(tr)
    }
}
