use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::espm::{DiscretizationConfig, ElectrolyteMode, EspmModel};
use crate::ocp::OcpTable;
use crate::params::{CellParameters, ParameterSet, SeiParameters};

/// Output channels, in row-block order.
pub const OUTPUTS: [&str; 3] = ["V", "soc_p", "soc_n"];
/// Divisor applied to each channel before differencing: 1 V and unit SOC.
pub const OUTPUT_SCALE: [f64; 3] = [1.0, 1.0, 1.0];

/// Everything a simulation needs besides the 18 identifiable constants.
#[derive(Debug, Clone)]
pub struct ModelSetup {
    pub sei: SeiParameters,
    pub ocp: OcpTable,
    pub discretization: DiscretizationConfig,
    pub electrolyte: ElectrolyteMode,
}

/// Sampled outputs of one unaged run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub voltage: Vec<f64>,
    pub soc_p: Vec<f64>,
    pub soc_n: Vec<f64>,
}

impl Outputs {
    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    pub fn channel(&self, m: usize) -> &[f64] {
        match m {
            0 => &self.voltage,
            1 => &self.soc_p,
            _ => &self.soc_n,
        }
    }
}

impl ModelSetup {
    pub fn new(set: &ParameterSet, ocp: OcpTable, discretization: DiscretizationConfig) -> Self {
        Self {
            sei: set.sei.clone(),
            ocp,
            discretization,
            electrolyte: ElectrolyteMode::Dynamic,
        }
    }

    pub fn reference() -> Self {
        Self::new(
            &ParameterSet::reference(),
            OcpTable::reference(),
            DiscretizationConfig::default(),
        )
    }

    pub fn model(&self, cell: CellParameters) -> Result<EspmModel> {
        Ok(
            EspmModel::new(cell, self.sei.clone(), self.ocp.clone(), self.discretization)?
                .with_mode(self.electrolyte)
                .with_aging(false),
        )
    }

    /// Run the whole cycle from `soc0`. A run that stops early is an error.
    pub fn simulate(&self, cell: CellParameters, cycle: &DriveCycle, soc0: f64) -> Result<Outputs> {
        let model = self.model(cell)?;
        let tr = model.simulate(cycle, &model.state_at_soc(soc0))?;
        if tr.len() != cycle.len() {
            return Err(Error::Integration(format!(
                "run stopped after {} of {} samples",
                tr.len(),
                cycle.len()
            )));
        }
        Ok(Outputs {
            voltage: tr.voltage,
            soc_p: tr.soc_p,
            soc_n: tr.soc_n,
        })
    }
}

/// Constant-current discharge at `c_rate` times the cathode capacity, sampled every
/// `dt` seconds.
pub fn c_rate_discharge(cell: &CellParameters, c_rate: f64, duration: f64, dt: f64) -> Result<DriveCycle> {
    let i = c_rate * cell.cathode_capacity_ah();
    let mut c = DriveCycle::constant(i, cell.t_ref, duration, dt)?;
    c.meta.name = format!("{c_rate}C discharge");
    c.meta.c_rate_scale = cell.cathode_capacity_ah();
    Ok(c)
}

/// `pulses` repetitions of a `c_rate` discharge for `on` seconds followed by `off`
/// seconds of rest, sampled every `dt` seconds.
pub fn pulse_train(
    cell: &CellParameters,
    c_rate: f64,
    on: f64,
    off: f64,
    pulses: usize,
    dt: f64,
) -> Result<DriveCycle> {
    if !(dt > 0.0 && on >= dt && off >= 0.0 && pulses > 0) {
        return Err(Error::Config(format!(
            "bad pulse train: on {on}, off {off}, dt {dt}, pulses {pulses}"
        )));
    }
    let i = c_rate * cell.cathode_capacity_ah();
    let period = on + off;
    let n = (pulses as f64 * period / dt).round() as usize + 1;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let current = t
        .iter()
        .map(|tk| {
            if tk % period < on - 1e-9 && *tk < pulses as f64 * period {
                i
            } else {
                0.0
            }
        })
        .collect();
    let mut c = DriveCycle::new(t, current, vec![cell.t_ref; n])?;
    c.meta.name = format!("{c_rate}C pulse train");
    c.meta.source = "generated".into();
    c.meta.c_rate_scale = cell.cathode_capacity_ah();
    Ok(c)
}

/// Length of the reference 1C discharge: full to 5 % SOC (s).
pub const ONE_C_DURATION: f64 = 3420.0;

/// 1C discharge from full charge to 5 % SOC, sampled every `dt` seconds.
pub fn one_c_profile(cell: &CellParameters, dt: f64) -> Result<DriveCycle> {
    c_rate_discharge(cell, 1.0, ONE_C_DURATION, dt)
}
