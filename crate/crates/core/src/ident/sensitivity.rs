use serde::{Deserialize, Serialize};

use super::sim::{ModelSetup, Outputs, OUTPUT_SCALE};
use super::vector::{ParamId, ParameterVector};
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Forward,
    #[default]
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub scheme: Scheme,
    /// Perturbation as a fraction of the nominal value.
    pub rel_step: f64,
    /// Keep every `decimation`-th sample.
    pub decimation: usize,
    /// Initial cell SOC of every run.
    pub soc0: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Central,
            rel_step: 1e-3,
            decimation: 1,
            soc0: 1.0,
        }
    }
}

/// Normalised output partials, one column per parameter. Rows are the voltage
/// samples, then cathode SOC, then anode SOC.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    params: Vec<ParamId>,
    times: Vec<f64>,
    columns: Vec<Vec<f64>>,
    norms: Vec<f64>,
    voltage_norms: Vec<f64>,
    /// Columns whose perturbed runs failed; they are stored as zeros.
    pub flagged: Vec<(ParamId, String)>,
    /// Columns computed with a one-sided difference under the central scheme, and
    /// which side was used.
    pub one_sided: Vec<(ParamId, &'static str)>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl SensitivityMatrix {
    /// Columns must all hold `3 * times.len()` finite entries.
    pub fn from_columns(params: Vec<ParamId>, times: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if params.len() != columns.len() {
            return Err(Error::Config(format!(
                "{} parameters for {} columns",
                params.len(),
                columns.len()
            )));
        }
        let rows = 3 * times.len();
        for (p, c) in params.iter().zip(&columns) {
            if c.len() != rows {
                return Err(Error::Config(format!(
                    "column {p} has {} rows, expected {rows}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("column {p} has non-finite entries")));
            }
        }
        let k = times.len();
        let norms = columns.iter().map(|c| norm(c)).collect();
        let voltage_norms = columns.iter().map(|c| norm(&c[..k])).collect();
        Ok(Self {
            params,
            times,
            columns,
            norms,
            voltage_norms,
            flagged: Vec::new(),
            one_sided: Vec::new(),
        })
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn rows(&self) -> usize {
        3 * self.times.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col]
    }

    /// Norm over all rows.
    pub fn norm(&self, col: usize) -> f64 {
        self.norms[col]
    }

    /// Norm over the voltage rows only.
    pub fn voltage_norm(&self, col: usize) -> f64 {
        self.voltage_norms[col]
    }

    pub fn position(&self, p: ParamId) -> Option<usize> {
        self.params.iter().position(|q| *q == p)
    }
}

fn stack(o: &Outputs, decimation: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * o.len() / decimation + 3);
    for m in 0..3 {
        out.extend(o.channel(m).iter().step_by(decimation).map(|v| v / OUTPUT_SCALE[m]));
    }
    out
}

/// Finite-difference sensitivities of voltage and both electrode SOCs to each
/// parameter in `free`, scaled by the parameter value. Perturbations use the
/// values in `params`, whether or not they are marked free there.
pub fn sensitivity_matrix(
    cycle: &DriveCycle,
    params: &ParameterVector,
    setup: &ModelSetup,
    free: &[ParamId],
    cfg: &SensitivityConfig,
    exec: Execution,
) -> Result<SensitivityMatrix> {
    if !(cfg.rel_step > 0.0 && cfg.rel_step < 0.5) {
        return Err(Error::Config(format!(
            "rel_step must lie in (0, 0.5), got {}",
            cfg.rel_step
        )));
    }
    if cfg.decimation == 0 {
        return Err(Error::Config("decimation must be >= 1".into()));
    }
    let nominal_cell = params.to_cell();
    let nominal = setup.simulate(nominal_cell.clone(), cycle, cfg.soc0)?;
    let y0 = stack(&nominal, cfg.decimation);
    let h = cfg.rel_step;
    let point = |id: ParamId, sign: f64| {
        let mut cell = nominal_cell.clone();
        id.set(&mut cell, id.get(&nominal_cell) * (1.0 + sign * h));
        cell
    };
    let run = |id: ParamId, sign: f64| -> Result<Vec<f64>> {
        Ok(stack(
            &setup.simulate(point(id, sign), cycle, cfg.soc0)?,
            cfg.decimation,
        ))
    };
    let one_sided = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>();
    // d y / d ln(lambda) = lambda * d y / d lambda. A side that leaves the valid
    // parameter region (e.g. a volume fraction already at its closure limit) is
    // replaced by the other one-sided difference.
    let columns: Vec<Result<(Vec<f64>, Option<&'static str>)>> = exec.map(free, |id| {
        let up_ok = point(*id, 1.0).validate().is_ok();
        let down_ok = point(*id, -1.0).validate().is_ok();
        match (cfg.scheme, up_ok, down_ok) {
            (Scheme::Forward, true, _) => Ok((one_sided(&run(*id, 1.0)?, &y0), None)),
            (Scheme::Central, true, true) => {
                let up = run(*id, 1.0)?;
                let down = run(*id, -1.0)?;
                Ok((up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect(), None))
            }
            (Scheme::Central, true, false) => Ok((one_sided(&run(*id, 1.0)?, &y0), Some("forward"))),
            (_, false, true) => Ok((one_sided(&y0, &run(*id, -1.0)?), Some("backward"))),
            (_, false, false) => Err(Error::Domain(
                "both perturbations leave the valid parameter region".into(),
            )),
        }
    });
    let times: Vec<f64> = cycle.t.iter().step_by(cfg.decimation).copied().collect();
    let mut flagged = Vec::new();
    let mut cols = Vec::with_capacity(free.len());
    let mut one_sided_cols = Vec::new();
    for (id, c) in free.iter().zip(columns) {
        match c {
            Ok((c, side)) if c.iter().all(|v| v.is_finite()) => {
                if let Some(side) = side {
                    one_sided_cols.push((*id, side));
                }
                cols.push(c);
            }
            Ok(_) => {
                log::warn!("sensitivity column {id} is not finite");
                flagged.push((*id, "non-finite difference".into()));
                cols.push(vec![0.0; y0.len()]);
            }
            Err(e) => {
                log::warn!("sensitivity column {id} failed: {e}");
                flagged.push((*id, e.to_string()));
                cols.push(vec![0.0; y0.len()]);
            }
        }
    }
    let mut s = SensitivityMatrix::from_columns(free.to_vec(), times, cols)?;
    s.flagged = flagged;
    s.one_sided = one_sided_cols;
    Ok(s)
}
