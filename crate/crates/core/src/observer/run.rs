//! Running the observer over a measurement stream.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::params::Electrode;

use super::{unpack_kappa_sei, Observer, ObserverState};

/// One sample from the cell: current positive on discharge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub t: f64,
    pub current: f64,
    pub voltage: f64,
    pub temperature: f64,
}

impl Measurement {
    /// Samples of a cycle that carries a voltage column.
    pub fn from_cycle(cycle: &DriveCycle) -> Result<Vec<Self>> {
        let v = cycle
            .voltage
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("{} has no voltage column", cycle.meta.source)))?;
        Ok((0..cycle.len())
            .map(|k| Self {
                t: cycle.t[k],
                current: cycle.current[k],
                voltage: v[k],
                temperature: cycle.temperature[k],
            })
            .collect())
    }
}

/// Version tag written at the top of exported estimate files.
pub const ESTIMATE_FORMAT: &str = "lithos-estimates v1";

const COLUMNS: [&str; 19] = [
    "t_s",
    "current_A",
    "voltage_V",
    "y_hat_1_V",
    "y_hat_2_V",
    "e_y1_V",
    "e_y2_V",
    "cathode_bulk_mol_m3",
    "cathode_surface_mol_m3",
    "anode_bulk_mol_m3",
    "anode_surface_mol_m3",
    "soc_cathode",
    "soc_anode",
    "q_raw_Ah",
    "q_filtered_Ah",
    "theta1_m2_s",
    "theta2_ohm_Ah",
    "kappa_sei_S_m",
    "gate_open",
];

/// Per-sample estimates. Row `k` holds the estimate used to predict sample `k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateTrajectory {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub y_hat_1: Vec<f64>,
    pub y_hat_2: Vec<f64>,
    pub e_y1: Vec<f64>,
    pub e_y2: Vec<f64>,
    pub x1_bulk: Vec<f64>,
    pub x1_surface: Vec<f64>,
    pub x2_bulk: Vec<f64>,
    pub x2_surface: Vec<f64>,
    pub soc_p: Vec<f64>,
    pub soc_n: Vec<f64>,
    pub q_raw: Vec<f64>,
    pub q_filtered: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub kappa_sei: Vec<f64>,
    pub gate_open: Vec<bool>,
    /// Time at which the gate opened, if it did.
    pub gate_time: Option<f64>,
    /// Sample times whose step was rejected for a non-finite residual.
    pub faults: Vec<f64>,
    /// States before each sample, when requested.
    pub states: Vec<ObserverState>,
    pub final_state: Option<ObserverState>,
}

impl EstimateTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_capacity(&self) -> Option<f64> {
        self.q_filtered.last().copied()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = format!("# {ESTIMATE_FORMAT}\n{}\n", COLUMNS.join(","));
        for k in 0..self.len() {
            let row = [
                self.t[k],
                self.current[k],
                self.voltage[k],
                self.y_hat_1[k],
                self.y_hat_2[k],
                self.e_y1[k],
                self.e_y2[k],
                self.x1_bulk[k],
                self.x1_surface[k],
                self.x2_bulk[k],
                self.x2_surface[k],
                self.soc_p[k],
                self.soc_n[k],
                self.q_raw[k],
                self.q_filtered[k],
                self.theta1[k],
                self.theta2[k],
                self.kappa_sei[k],
            ];
            for v in row {
                let _ = write!(s, "{v:.12e},");
            }
            let _ = writeln!(s, "{}", u8::from(self.gate_open[k]));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Moving RMS of the cathode residual with a dwell timer.
#[derive(Debug, Clone)]
struct Gate {
    window: f64,
    threshold: f64,
    dwell: f64,
    current_limit: f64,
    residual_tau: f64,
    filtered: Option<(f64, f64)>,
    samples: VecDeque<(f64, f64)>,
    sum: f64,
    start: Option<f64>,
    below_since: Option<f64>,
}

impl Gate {
    fn new(cfg: &super::GatingConfig) -> Self {
        Self {
            window: cfg.window,
            threshold: cfg.threshold,
            dwell: cfg.dwell,
            current_limit: cfg.current_limit,
            residual_tau: cfg.residual_tau,
            filtered: None,
            samples: VecDeque::new(),
            sum: 0.0,
            start: None,
            below_since: None,
        }
    }

    /// Feed a residual; returns true once the gate should open.
    fn push(&mut self, t: f64, e: f64, current: f64) -> bool {
        if current.abs() <= self.current_limit {
            let f = match self.filtered {
                Some((t0, f0)) if self.residual_tau > 0.0 => {
                    let a = 1.0 - (-(t - t0) / self.residual_tau).exp();
                    f0 + a * (e - f0)
                }
                _ => e,
            };
            self.filtered = Some((t, f));
            self.samples.push_back((t, f * f));
            self.sum += f * f;
        }
        while let Some(&(t0, v)) = self.samples.front() {
            if t - t0 > self.window {
                self.sum -= v;
                self.samples.pop_front();
            } else {
                break;
            }
        }
        // no verdict until a full window has been seen
        if t - *self.start.get_or_insert(t) < self.window || self.samples.is_empty() {
            return false;
        }
        let rms = (self.sum.max(0.0) / self.samples.len() as f64).sqrt();
        if rms < self.threshold {
            let since = *self.below_since.get_or_insert(t);
            t - since >= self.dwell
        } else {
            self.below_since = None;
            false
        }
    }
}

/// Run the observer over a stream. The gate opens once and stays open; until then the
/// capacity estimate and its filtered value do not move.
///
/// A sample whose residual is not finite is skipped (state unchanged) and its time is
/// recorded in `faults`. Other failures abort the run with the sample time attached.
pub fn run_observer(
    obs: &Observer,
    stream: &[Measurement],
    init: &ObserverState,
    keep_states: bool,
) -> Result<EstimateTrajectory> {
    if stream.is_empty() {
        return Err(Error::Domain("measurement stream is empty".into()));
    }
    for w in stream.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::Domain(format!(
                "stream time {} does not increase after {}",
                w[1].t, w[0].t
            )));
        }
    }
    let n = stream.len();
    let mut tr = EstimateTrajectory::default();
    let mut gate = Gate::new(&obs.config.gating);
    let tau = obs.config.gating.filter_tau;
    let p = &obs.params;
    let mut st = init.clone();
    let mut gate_time = init.gate_open.then(|| stream[0].t);
    for (k, m) in stream.iter().enumerate() {
        let dt = if k + 1 < n { stream[k + 1].t - m.t } else { 0.0 };
        let out = match obs.step(&st, m, dt) {
            Ok(o) => Some(o),
            Err(Error::Fault(msg)) => {
                log::warn!("{msg}; sample skipped");
                tr.faults.push(m.t);
                None
            }
            Err(e) => return Err(e.at_time(m.t)),
        };
        let (y1, y2, e1, e2) = out.as_ref().map(|o| (o.y_hat_1, o.y_hat_2, o.e_y1, o.e_y2)).unwrap_or((
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
        ));
        let cat = obs.operator(Electrode::Cathode);
        let an = obs.operator(Electrode::Anode);
        let bulk_p = cat.bulk(&st.x1_hat);
        let bulk_n = an.bulk(&st.x2_hat);
        let soc = |e: Electrode, c: f64| {
            let g = p.electrode(e);
            (c / g.c_max - g.theta_0) / (g.theta_100 - g.theta_0)
        };
        tr.t.push(m.t);
        tr.current.push(m.current);
        tr.voltage.push(m.voltage);
        tr.y_hat_1.push(y1);
        tr.y_hat_2.push(y2);
        tr.e_y1.push(e1);
        tr.e_y2.push(e2);
        tr.x1_bulk.push(bulk_p);
        tr.x1_surface.push(*st.x1_hat.last().expect("nodes"));
        tr.x2_bulk.push(bulk_n);
        tr.x2_surface.push(*st.x2_hat.last().expect("nodes"));
        tr.soc_p.push(soc(Electrode::Cathode, bulk_p));
        tr.soc_n.push(soc(Electrode::Anode, bulk_n));
        tr.q_raw.push(st.x3_hat);
        tr.q_filtered.push(st.q_filtered);
        tr.theta1.push(st.theta1_hat);
        tr.theta2.push(st.theta2_hat);
        tr.kappa_sei
            .push(unpack_kappa_sei(st.theta2_hat, p, &obs.sei).unwrap_or(f64::NAN));
        tr.gate_open.push(st.gate_open);
        if keep_states {
            tr.states.push(st.clone());
        }

        let Some(out) = out else { continue };
        let mut next = out.state;
        if !st.gate_open && gate.push(m.t, e1, m.current) {
            next.gate_open = true;
            tr.gate_time = Some(m.t);
            gate_time = Some(m.t);
            log::info!("adaptation gate opened at t = {} s", m.t);
        }
        next.q_filtered = if st.gate_open {
            let a = 1.0 - (-dt / tau).exp();
            st.q_filtered + a * (next.x3_hat - st.q_filtered)
        } else {
            next.x3_hat
        };
        if let Some(t0) = gate_time {
            if !st.params_open && m.t - t0 >= obs.config.gating.parameter_delay {
                next.params_open = true;
                log::info!("parameter adaptation started at t = {} s", m.t);
            }
        }
        let flags = next.flags(p);
        if !flags.is_empty() {
            log::debug!("t = {} s: {}", m.t, flags.join("; "));
        }
        st = next;
    }
    if tr.gate_time.is_none() {
        log::warn!("adaptation gate never opened; capacity and parameters kept their initial values");
    }
    tr.final_state = Some(st);
    Ok(tr)
}
