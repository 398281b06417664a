use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::analysis::{CorrelationMatrix, NormTable, Subset};
use super::optimize::Optimizer;
use super::sim::ModelSetup;
use super::vector::{ParamId, ParameterVector};
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Coulomb-counted SOC, current held constant over each sample interval:
/// `soc_{k+1} = soc_k - I_k (t_{k+1} - t_k) / (3600 Q0)`.
pub fn coulomb_count_soc(cycle: &DriveCycle, q0: f64, soc0: f64) -> Result<Vec<f64>> {
    if !(q0 > 0.0 && q0.is_finite()) {
        return Err(Error::Domain(format!("capacity must be finite and > 0, got {q0}")));
    }
    let mut out = Vec::with_capacity(cycle.len());
    let mut soc = soc0;
    for k in 0..cycle.len() {
        out.push(soc);
        soc -= cycle.current[k] * cycle.dt_after(k) / (3600.0 * q0);
    }
    Ok(out)
}

/// Measured voltage plus the SOC reference both electrodes are compared with.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub cycle: DriveCycle,
    pub voltage: Vec<f64>,
    pub soc: Vec<f64>,
    pub soc0: f64,
    /// Capacity used for Coulomb counting (Ah).
    pub capacity: f64,
}

impl FitData {
    /// Voltage is taken from the cycle's optional voltage column.
    pub fn new(cycle: DriveCycle, capacity: f64, soc0: f64) -> Result<Self> {
        let voltage = cycle
            .voltage
            .clone()
            .ok_or_else(|| Error::Config("fit data needs a voltage column".into()))?;
        let soc = coulomb_count_soc(&cycle, capacity, soc0)?;
        Ok(Self {
            cycle,
            voltage,
            soc,
            soc0,
            capacity,
        })
    }

    /// Data generated by simulating `truth`, counted with its cathode capacity.
    pub fn synthetic(truth: &ParameterVector, setup: &ModelSetup, cycle: &DriveCycle, soc0: f64) -> Result<Self> {
        let cell = truth.to_cell();
        let out = setup.simulate(cell.clone(), cycle, soc0)?;
        let mut c = cycle.clone();
        c.voltage = Some(out.voltage);
        Self::new(c, cell.cathode_capacity_ah(), soc0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWeights {
    pub voltage: f64,
    pub cathode_soc: f64,
    pub anode_soc: f64,
}

impl Default for FitWeights {
    fn default() -> Self {
        Self {
            voltage: 1.0,
            cathode_soc: 1.0,
            anode_soc: 1.0,
        }
    }
}

/// Evaluations allowed by default.
pub const DEFAULT_BUDGET: usize = 8000;

/// Cost assigned to candidates that cannot be simulated.
pub const INFEASIBLE_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    /// Voltage RMS error (V).
    pub j1: f64,
    /// Cathode bulk SOC RMS error.
    pub j2: f64,
    /// Anode bulk SOC RMS error.
    pub j3: f64,
    pub total: f64,
    /// Capacity implied by the candidate's cathode window (Ah).
    pub q0: f64,
    /// False when the candidate is invalid or its run failed; every term then holds
    /// [`INFEASIBLE_COST`].
    pub feasible: bool,
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64).sqrt()
}

/// Unaged simulation of `candidate` scored against `data`.
pub fn fit_cost(candidate: &ParameterVector, data: &FitData, setup: &ModelSetup, w: &FitWeights) -> Cost {
    let cell = candidate.to_cell();
    let q0 = cell.cathode_capacity_ah();
    let infeasible = Cost {
        j1: INFEASIBLE_COST,
        j2: INFEASIBLE_COST,
        j3: INFEASIBLE_COST,
        total: INFEASIBLE_COST,
        q0,
        feasible: false,
    };
    if cell.validate().is_err() {
        return infeasible;
    }
    let Ok(out) = setup.simulate(cell, &data.cycle, data.soc0) else {
        return infeasible;
    };
    let (j1, j2, j3) = (
        rms(&out.voltage, &data.voltage),
        rms(&out.soc_p, &data.soc),
        rms(&out.soc_n, &data.soc),
    );
    let total = w.voltage * j1 + w.cathode_soc * j2 + w.anode_soc * j3;
    if !total.is_finite() {
        return infeasible;
    }
    Cost {
        j1,
        j2,
        j3,
        total,
        q0,
        feasible: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub initial: ParameterVector,
    pub fitted: ParameterVector,
    pub initial_cost: Cost,
    pub cost: Cost,
    pub evaluations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

impl FitReport {
    /// Relative error of each free parameter against `truth`.
    pub fn relative_errors(&self, truth: &ParameterVector) -> Vec<(ParamId, f64)> {
        self.fitted
            .free_ids()
            .into_iter()
            .map(|p| (p, (self.fitted.value(p) - truth.value(p)) / truth.value(p)))
            .collect()
    }

    /// Plain-text report. The analysis tables are appended when given.
    pub fn to_text(&self, analysis: Option<(&NormTable, &CorrelationMatrix, &Subset)>) -> String {
        let mut s = String::from("# lithos fit report v1\n");
        let _ = writeln!(s, "evaluations = {}", self.evaluations);
        let _ = writeln!(s, "converged = {}", self.converged);
        for (name, c) in [("initial", &self.initial_cost), ("final", &self.cost)] {
            let _ = writeln!(
                s,
                "{name}_cost = {:e} (J1 {:e}, J2 {:e}, J3 {:e}, Q0 {:e} Ah, feasible {})",
                c.total, c.j1, c.j2, c.j3, c.q0, c.feasible
            );
        }
        s.push_str("\n[parameters]\n# name initial fitted lower upper\n");
        for p in self.fitted.free_ids() {
            let e = self.fitted.entry(p);
            let _ = writeln!(
                s,
                "{p} {:e} {:e} {:e} {:e}",
                self.initial.value(p),
                e.value,
                e.lower,
                e.upper
            );
        }
        s.push_str("\n[history]\n# iteration best_cost\n");
        for (k, c) in self.history.iter().enumerate() {
            let _ = writeln!(s, "{k} {c:e}");
        }
        if let Some((norms, corr, subset)) = analysis {
            s.push_str("\n[sensitivity]\n# rank all_outputs voltage_only\n");
            for (k, (m, v)) in norms.multi.iter().zip(&norms.voltage).enumerate() {
                let _ = writeln!(s, "{} {} {:e} {} {:e}", k + 1, m.param, m.norm, v.param, v.norm);
            }
            s.push_str("\n[subset]\n");
            let names: Vec<&str> = subset.selected.iter().map(|p| p.name()).collect();
            let _ = writeln!(s, "selected = {}", names.join(","));
            for e in &subset.log {
                let _ = writeln!(s, "# {e}");
            }
            s.push_str("\n[correlation]\n");
            s.push_str(&corr.to_text());
        }
        s
    }
}

/// Fit the free entries of `initial` to `data`. A zero budget returns `initial`
/// unevaluated with `converged = false`.
pub fn fit(
    data: &FitData,
    initial: &ParameterVector,
    setup: &ModelSetup,
    weights: &FitWeights,
    optimizer: &dyn Optimizer,
    budget: usize,
    exec: Execution,
) -> Result<FitReport> {
    let bad = initial.violations();
    if let Some(p) = initial.free_ids().into_iter().find(|p| initial.entry(*p).lower <= 0.0) {
        return Err(Error::Config(format!("{p}: fitting needs a positive lower bound")));
    }
    if !bad.is_empty() {
        return Err(Error::InvalidParameters(bad));
    }
    let x0 = initial.free_values();
    if budget == 0 {
        let nan = f64::NAN;
        let cost = Cost {
            j1: nan,
            j2: nan,
            j3: nan,
            total: nan,
            q0: initial.to_cell().cathode_capacity_ah(),
            feasible: false,
        };
        return Ok(FitReport {
            initial: initial.clone(),
            fitted: initial.clone(),
            initial_cost: cost,
            cost,
            evaluations: 0,
            history: Vec::new(),
            converged: false,
        });
    }
    // search in log coordinates: products such as A * eps_p, which the SOC terms
    // pin, become straight lines
    let to_x = |u: &[f64]| u.iter().map(|v| v.exp()).collect::<Vec<f64>>();
    let u0: Vec<f64> = x0.iter().map(|v| v.ln()).collect();
    let ub: Vec<(f64, f64)> = initial
        .free_bounds()
        .iter()
        .map(|(lo, hi)| (lo.ln(), hi.ln()))
        .collect();
    let objective = |u: &[f64]| match initial.with_free_values(&to_x(u)) {
        Ok(c) => fit_cost(&c, data, setup, weights).total,
        Err(_) => INFEASIBLE_COST,
    };
    let mut m = optimizer.minimize(&objective, &u0, &ub, budget, exec);
    m.x = to_x(&m.x);
    let fitted = initial.with_free_values(&m.x)?;
    let initial_cost = fit_cost(initial, data, setup, weights);
    let cost = fit_cost(&fitted, data, setup, weights);
    Ok(FitReport {
        initial: initial.clone(),
        fitted,
        initial_cost,
        cost,
        evaluations: m.evaluations,
        history: m.history,
        converged: m.converged,
    })
}
