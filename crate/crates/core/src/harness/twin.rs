//! Twin experiments: the simulated plant stands in for the cell, its outputs are
//! corrupted and fed to the observer, and the estimates are scored against the truth.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aging::age_to_capacity;
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::espm::{DiscretizationConfig, ElectrolyteMode, EspmModel, Trajectory};
use crate::exec::Execution;
use crate::observer::{
    composite_lyapunov, run_observer, EstimateTrajectory, Measurement, Observer, ObserverConfig, TruthPoint,
};
use crate::ocp::OcpTable;
use crate::params::ParameterSet;

use super::corrupt::{corrupt, CorruptionSpec};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "LITHOS_OUT_DIR";

/// Plant health: start of life, or aged along the SEI path to a capacity (Ah).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantHealth {
    Fresh,
    Aged(f64),
}

impl FromStr for PlantHealth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "fresh" {
            return Ok(Self::Fresh);
        }
        if let Some(q) = s.strip_prefix("aged:") {
            let q: f64 = q
                .parse()
                .map_err(|_| Error::Config(format!("cannot read capacity in plant spec '{s}'")))?;
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::Config(format!("aged capacity must be > 0, got {q}")));
            }
            return Ok(Self::Aged(q));
        }
        Err(Error::Config(format!(
            "plant spec '{s}' is neither 'fresh' nor 'aged:<Ah>'"
        )))
    }
}

impl std::fmt::Display for PlantHealth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fresh => write!(f, "fresh"),
            Self::Aged(q) => write!(f, "aged:{q}"),
        }
    }
}

impl Serialize for PlantHealth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PlantHealth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_plant_soc() -> f64 {
    0.75
}

fn default_age_horizon() -> f64 {
    3.0e7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub health: PlantHealth,
    /// Initial SOC of the plant.
    #[serde(default = "default_plant_soc")]
    pub soc: f64,
    #[serde(default)]
    pub electrolyte: ElectrolyteMode,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    /// Time over which the aging side reaction is spread (s); only the end state matters.
    #[serde(default = "default_age_horizon")]
    pub age_horizon: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            health: PlantHealth::Fresh,
            soc: default_plant_soc(),
            electrolyte: ElectrolyteMode::Dynamic,
            discretization: DiscretizationConfig::default(),
            age_horizon: default_age_horizon(),
        }
    }
}

/// Observer initial condition relative to the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverInit {
    /// Initial SOC error: the observer starts at `plant.soc - soc_error`.
    pub soc_error: f64,
    /// Initial capacity guess (Ah).
    pub capacity: f64,
    /// Initial anode diffusivity as a multiple of the plant's.
    pub theta1_scale: f64,
    /// Initial SEI lump as a multiple of the plant's.
    pub theta2_scale: f64,
}

impl Default for ObserverInit {
    fn default() -> Self {
        Self {
            soc_error: 0.45,
            capacity: 2.1,
            theta1_scale: 1.0,
            theta2_scale: 1.0,
        }
    }
}

/// Everything one twin run depends on. Serialised verbatim into the output bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinConfig {
    pub plant: PlantConfig,
    pub init: ObserverInit,
    #[serde(default)]
    pub corruption: CorruptionSpec,
    pub observer: ObserverConfig,
    pub parameters: ParameterSet,
}

impl TwinConfig {
    /// Reference cell, reference gains for 10 nodes, fresh plant, default initialisation.
    pub fn reference() -> Result<Self> {
        let parameters = ParameterSet::reference();
        let plant = PlantConfig::default();
        let observer = ObserverConfig::reference(
            &parameters.cell,
            &parameters.sei,
            &OcpTable::reference(),
            plant.discretization.n,
        )?;
        Ok(Self {
            plant,
            init: ObserverInit::default(),
            corruption: CorruptionSpec::default(),
            observer,
            parameters,
        })
    }

    pub fn with_health(mut self, health: PlantHealth) -> Self {
        self.plant.health = health;
        self
    }

    pub fn with_corruption(mut self, c: CorruptionSpec) -> Self {
        self.corruption = c;
        self
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("twin config serialises")
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.span().map(|s| crate::params::line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        self.observer.check()?;
        self.corruption.validate()?;
        self.plant.discretization.validate()?;
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.plant.soc) {
            v.push(format!("plant.soc = {} outside [0, 1]", self.plant.soc));
        }
        let s0 = self.plant.soc - self.init.soc_error;
        if !(0.0..=1.0).contains(&s0) {
            v.push(format!("observer start SOC {s0} outside [0, 1]"));
        }
        for (name, x) in [
            ("init.capacity", self.init.capacity),
            ("init.theta1_scale", self.init.theta1_scale),
            ("init.theta2_scale", self.init.theta2_scale),
            ("plant.age_horizon", self.plant.age_horizon),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} = {x} must be finite and > 0"));
            }
        }
        if self.observer.gains.n() != self.plant.discretization.n {
            log::info!(
                "observer uses {} radial nodes, plant {}",
                self.observer.gains.n(),
                self.plant.discretization.n
            );
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }
}

/// Scalar outcome of one twin run.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinSummary {
    pub q_true: f64,
    pub q_hat: f64,
    pub q_hat_raw: f64,
    pub q_error_pct: f64,
    pub gate_time: Option<f64>,
    /// First time after which the filtered capacity error stays below 2 %.
    pub q_settle_time: Option<f64>,
    /// First time after which both electrode SOC errors stay below 2 %.
    pub soc_settle_time: Option<f64>,
    pub soc_error_cathode: f64,
    pub soc_error_anode: f64,
    pub theta1_true: f64,
    pub theta1_hat: f64,
    pub theta1_error_pct: f64,
    pub kappa_sei_true: f64,
    pub kappa_sei_hat: f64,
    pub rms_e_y1: f64,
    pub faults: usize,
    pub samples: usize,
    pub seed: u64,
}

fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".into()
    }
}

impl TwinSummary {
    /// Flat `key = value` text; numbers carry 12 significant digits.
    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map(sig12).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        for (k, v) in [
            ("q_true_Ah", sig12(self.q_true)),
            ("q_hat_Ah", sig12(self.q_hat)),
            ("q_hat_raw_Ah", sig12(self.q_hat_raw)),
            ("q_error_pct", sig12(self.q_error_pct)),
            ("gate_time_s", opt(self.gate_time)),
            ("q_settle_time_s", opt(self.q_settle_time)),
            ("soc_settle_time_s", opt(self.soc_settle_time)),
            ("soc_error_cathode", sig12(self.soc_error_cathode)),
            ("soc_error_anode", sig12(self.soc_error_anode)),
            ("theta1_true_m2_s", sig12(self.theta1_true)),
            ("theta1_hat_m2_s", sig12(self.theta1_hat)),
            ("theta1_error_pct", sig12(self.theta1_error_pct)),
            ("kappa_sei_true_S_m", sig12(self.kappa_sei_true)),
            ("kappa_sei_hat_S_m", sig12(self.kappa_sei_hat)),
            ("rms_e_y1_V", sig12(self.rms_e_y1)),
            ("faults", self.faults.to_string()),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Everything a twin run produces.
#[derive(Debug, Clone)]
pub struct TwinResult {
    pub plant: Trajectory,
    pub clean: Vec<Measurement>,
    pub measured: Vec<Measurement>,
    pub estimates: EstimateTrajectory,
    pub summary: TwinSummary,
    pub observer: Observer,
    pub config: TwinConfig,
}

/// Sample-to-sample descent of the composite Lyapunov function after the gate opens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    /// Largest voltage the reduced model leaves out along the plant trajectory (V).
    pub uncertainty: f64,
    /// Residual radius of the error ball: boundary layer plus `uncertainty` (V).
    pub ball: f64,
    pub steps_after_gate: usize,
    /// Steps starting with either residual outside the ball.
    pub steps_outside: usize,
    /// Of those, steps where the function increased.
    pub increases: usize,
}

impl DescentReport {
    /// Share of outside-ball steps that did not increase; 1 when there are none.
    pub fn fraction_non_increasing(&self) -> f64 {
        if self.steps_outside == 0 {
            1.0
        } else {
            1.0 - self.increases as f64 / self.steps_outside as f64
        }
    }
}

impl TwinResult {
    /// Truth matching estimate row `k`.
    pub fn truth(&self, k: usize) -> TruthPoint {
        let s = &self.plant.states[k];
        TruthPoint {
            c_s_p: s.c_s_p.clone(),
            c_s_n: s.c_s_n.clone(),
            q: s.q,
            theta1: self.summary.theta1_true,
            theta2: self.observer.sei.theta_2(&self.observer.params),
        }
    }

    /// Composite Lyapunov value at each sample (needs states kept in the estimates).
    pub fn lyapunov_series(&self) -> Vec<f64> {
        (0..self.estimates.states.len().min(self.plant.states.len()))
            .map(|k| composite_lyapunov(&self.observer, &self.estimates.states[k], &self.truth(k)).total)
            .collect()
    }

    /// Largest `|V_plant - V_reduced|` over the plant trajectory, where the reduced
    /// voltage is the plant's own state with the electrolyte held uniform at its
    /// initial concentration.
    pub fn model_uncertainty(&self) -> Result<f64> {
        let (model, _) = build_plant(&self.config)?;
        let c0 = crate::espm::NOMINAL_CE;
        let mut worst: f64 = 0.0;
        for (k, s) in self.plant.states.iter().enumerate() {
            let mut flat = s.clone();
            flat.c_e.iter_mut().for_each(|c| *c = c0);
            let (i, t) = (self.plant.current[k], self.plant.temperature[k]);
            let d = model.terminal_voltage(s, i, t)? - model.terminal_voltage(&flat, i, t)?;
            worst = worst.max(d.abs());
        }
        Ok(worst)
    }

    /// Count Lyapunov increases after the gate opens, outside the residual ball of
    /// radius `boundary_layer + model_uncertainty()`. Inside the ball only boundedness
    /// is expected. Needs the observer states (see [`twin_experiment_with_states`]).
    pub fn lyapunov_descent(&self) -> Result<DescentReport> {
        // first sample whose step ran with adaptation on
        let Some(k0) = self.estimates.gate_open.iter().position(|g| *g) else {
            return Err(Error::Domain("gate never opened; no adaptive phase to check".into()));
        };
        let v = self.lyapunov_series();
        if v.len() < 2 {
            return Err(Error::Domain("observer states were not kept".into()));
        }
        let uncertainty = self.model_uncertainty()?;
        let ball = self.observer.config.boundary_layer + uncertainty;
        let e = &self.estimates;
        let mut r = DescentReport {
            uncertainty,
            ball,
            steps_after_gate: 0,
            steps_outside: 0,
            increases: 0,
        };
        for k in k0..v.len() - 1 {
            r.steps_after_gate += 1;
            if e.e_y1[k].abs() > ball || e.e_y2[k].abs() > ball {
                r.steps_outside += 1;
                if v[k + 1] > v[k] {
                    r.increases += 1;
                }
            }
        }
        Ok(r)
    }
}

/// The plant built from a config, and its initial state.
pub fn build_plant(cfg: &TwinConfig) -> Result<(EspmModel, crate::espm::EspmState)> {
    let p = &cfg.parameters;
    let model = EspmModel::new(
        p.cell.clone(),
        p.sei.clone(),
        OcpTable::reference(),
        cfg.plant.discretization,
    )?
    .with_mode(cfg.plant.electrolyte)
    .with_aging(true);
    let mut x0 = model.state_at_soc(cfg.plant.soc);
    if let PlantHealth::Aged(q) = cfg.plant.health {
        x0 = age_to_capacity(&x0, q, cfg.plant.age_horizon, &p.cell, &p.sei)?;
    }
    Ok((model, x0))
}

/// Plant stage only: simulate and sample the clean measurements.
pub fn simulate_plant(cycle: &DriveCycle, cfg: &TwinConfig) -> Result<(Trajectory, Vec<Measurement>)> {
    let (model, x0) = build_plant(cfg)?;
    let tr = model.simulate(cycle, &x0)?;
    if tr.len() < cycle.len() {
        return Err(Error::Domain(format!(
            "plant stopped after {} of {} samples",
            tr.len(),
            cycle.len()
        )));
    }
    let clean = (0..tr.len())
        .map(|k| Measurement {
            t: tr.t[k],
            current: tr.current[k],
            voltage: tr.voltage[k],
            temperature: tr.temperature[k],
        })
        .collect();
    Ok((tr, clean))
}

fn settle_time(t: &[f64], err: impl Fn(usize) -> f64, tol: f64) -> Option<f64> {
    let n = t.len();
    let mut last_bad = None;
    for k in 0..n {
        if !(err(k) < tol) {
            last_bad = Some(k);
        }
    }
    match last_bad {
        None => t.first().copied(),
        Some(k) if k + 1 < n => Some(t[k + 1]),
        _ => None,
    }
}

fn summarise(cfg: &TwinConfig, plant: &Trajectory, est: &EstimateTrajectory, obs: &Observer) -> TwinSummary {
    let q_true = plant.states[0].q;
    let q_hat = est.final_state.as_ref().map(|s| s.q_filtered).unwrap_or(f64::NAN);
    let q_hat_raw = est.final_state.as_ref().map(|s| s.x3_hat).unwrap_or(f64::NAN);
    let theta1_true = cfg.parameters.cell.d_s_n_ref;
    let theta1_hat = est.final_state.as_ref().map(|s| s.theta1_hat).unwrap_or(f64::NAN);
    let theta2_hat = est.final_state.as_ref().map(|s| s.theta2_hat).unwrap_or(f64::NAN);
    let n = est.len().min(plant.len());
    let last = n - 1;
    let soc_err = |k: usize| {
        (est.soc_p[k] - plant.soc_p[k])
            .abs()
            .max((est.soc_n[k] - plant.soc_n[k]).abs())
    };
    let ok: Vec<f64> = est.e_y1.iter().copied().filter(|e| e.is_finite()).collect();
    let rms = (ok.iter().map(|e| e * e).sum::<f64>() / ok.len().max(1) as f64).sqrt();
    TwinSummary {
        q_true,
        q_hat,
        q_hat_raw,
        q_error_pct: 100.0 * (q_hat - q_true).abs() / q_true,
        gate_time: est.gate_time,
        q_settle_time: settle_time(&est.t[..n], |k| (est.q_filtered[k] - q_true).abs() / q_true, 0.02),
        soc_settle_time: settle_time(&est.t[..n], soc_err, 0.02),
        soc_error_cathode: est.soc_p[last] - plant.soc_p[last],
        soc_error_anode: est.soc_n[last] - plant.soc_n[last],
        theta1_true,
        theta1_hat,
        theta1_error_pct: 100.0 * (theta1_hat - theta1_true).abs() / theta1_true,
        kappa_sei_true: cfg.parameters.sei.kappa_sei,
        kappa_sei_hat: crate::observer::unpack_kappa_sei(theta2_hat, &obs.params, &obs.sei).unwrap_or(f64::NAN),
        rms_e_y1: rms,
        faults: est.faults.len(),
        samples: n,
        seed: cfg.corruption.seed,
    }
}

/// Observer for a config and its initial state, aligned with the plant's start.
pub fn build_observer(cfg: &TwinConfig) -> Result<(Observer, crate::observer::ObserverState)> {
    let p = &cfg.parameters;
    let obs = Observer::new(
        p.cell.clone(),
        p.sei.clone(),
        OcpTable::reference(),
        cfg.observer.clone(),
    )?;
    let init = obs.state_at_soc(
        cfg.plant.soc - cfg.init.soc_error,
        cfg.init.capacity,
        cfg.init.theta1_scale * p.cell.d_s_n_ref,
        cfg.init.theta2_scale * p.sei.theta_2(&p.cell),
    );
    Ok((obs, init))
}

fn run_stages(cycle: &DriveCycle, cfg: &TwinConfig, keep_states: bool, out: Option<&Path>) -> Result<TwinResult> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("output"))?;
        write_file(&dir.join("config.toml"), &cfg.to_toml_string()).map_err(|e| e.in_stage("output"))?;
    }
    let (plant, clean) = simulate_plant(cycle, cfg).map_err(|e| e.in_stage("plant"))?;
    if let Some(dir) = out {
        write_file(&dir.join("plant.csv"), &plant_csv(&plant)).map_err(|e| e.in_stage("output"))?;
    }
    let measured = corrupt(&clean, &cfg.corruption).map_err(|e| e.in_stage("corruption"))?;
    let (obs, init) = build_observer(cfg).map_err(|e| e.in_stage("observer"))?;
    let estimates = run_observer(&obs, &measured, &init, keep_states).map_err(|e| e.in_stage("observer"))?;
    let summary = summarise(cfg, &plant, &estimates, &obs);
    if let Some(dir) = out {
        estimates
            .write_csv(dir.join("estimates.csv"))
            .map_err(|e| e.in_stage("output"))?;
        write_file(&dir.join("summary.txt"), &summary.to_text()).map_err(|e| e.in_stage("output"))?;
    }
    Ok(TwinResult {
        plant,
        clean,
        measured,
        estimates,
        summary,
        observer: obs,
        config: cfg.clone(),
    })
}

/// Run plant, corruption and observer in memory.
pub fn twin_experiment(cycle: &DriveCycle, cfg: &TwinConfig) -> Result<TwinResult> {
    run_stages(cycle, cfg, false, None)
}

/// As [`twin_experiment`], also keeping every observer state (for Lyapunov checks).
pub fn twin_experiment_with_states(cycle: &DriveCycle, cfg: &TwinConfig) -> Result<TwinResult> {
    run_stages(cycle, cfg, true, None)
}

/// Run and write `config.toml`, `plant.csv`, `estimates.csv` and `summary.txt` into
/// `dir`, each as soon as its stage finishes, so a failed observer run leaves the
/// plant output in place.
pub fn twin_experiment_to_dir(cycle: &DriveCycle, cfg: &TwinConfig, dir: &Path) -> Result<TwinResult> {
    run_stages(cycle, cfg, false, Some(dir))
}

/// Output directory: the environment override when set, else `default`.
pub fn output_dir(default: impl Into<PathBuf>) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| default.into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Plant trajectory as CSV with 12 significant digits.
pub fn plant_csv(tr: &Trajectory) -> String {
    let mut s = String::from("t_s,current_A,temperature_K,voltage_V,soc_anode,soc_cathode,capacity_Ah\n");
    for k in 0..tr.len() {
        let q = tr.states[k].q;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            sig12(tr.t[k]),
            sig12(tr.current[k]),
            sig12(tr.temperature[k]),
            sig12(tr.voltage[k]),
            sig12(tr.soc_n[k]),
            sig12(tr.soc_p[k]),
            sig12(q)
        );
    }
    s
}

/// Independent twin runs on a worker pool (or sequentially), in input order.
pub fn sweep(cycle: &DriveCycle, configs: &[TwinConfig], exec: Execution) -> Vec<Result<TwinSummary>> {
    exec.map(configs, |c| twin_experiment(cycle, c).map(|r| r.summary))
}
