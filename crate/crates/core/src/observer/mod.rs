//! Adaptive interconnected sliding-mode observer.
//!
//! A cathode observer and an anode observer each correct their own electrode from
//! the voltage residual, while carrying an open-loop copy of the other electrode. The
//! copies are re-seeded from the other observer's closed-loop estimate at every sample
//! and propagated one step without injection. The cathode observer also estimates the
//! capacity and the SEI lump `theta_2`; the anode observer estimates the anode
//! diffusivity `theta_1`. Both work on the reduced model: electrolyte at
//! [`NOMINAL_CE`](crate::espm::NOMINAL_CE), no concentration polarisation.

pub mod excitation;
pub mod gains;
pub mod lyapunov;
pub mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::espm::{overpotential, Integrator, SolidOperator, NOMINAL_CE};
use crate::ocp::OcpTable;
use crate::params::{CellParameters, Electrode, SeiParameters};

pub use excitation::{persistence_of_excitation, ExcitationReport};
pub use gains::{
    validate_gains, GainCheck, GainDesign, GatingConfig, ObserverConfig, ObserverGains, ValidationReport,
    ASSUMED_INITIAL_ERROR,
};
pub use lyapunov::{composite_lyapunov, LyapunovTerms, TruthPoint};
pub use run::{run_observer, EstimateTrajectory, Measurement};

/// Which observer's output to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Cathode,
    Anode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    /// Cathode concentrations, closed loop (mol/m^3).
    pub x1_hat: Vec<f64>,
    /// Anode concentrations, closed loop (mol/m^3).
    pub x2_hat: Vec<f64>,
    /// Open-loop cathode copy carried by the anode observer.
    pub x1_ol: Vec<f64>,
    /// Open-loop anode copy carried by the cathode observer.
    pub x2_ol: Vec<f64>,
    /// Capacity (Ah).
    pub x3_hat: f64,
    /// Anode diffusivity at the reference temperature (m^2/s).
    pub theta1_hat: f64,
    /// SEI lump (ohm/Ah).
    pub theta2_hat: f64,
    pub gate_open: bool,
    /// Diffusivity and SEI adaptation enabled; follows `gate_open` after a delay.
    pub params_open: bool,
    /// Low-passed capacity (Ah).
    pub q_filtered: f64,
}

impl ObserverState {
    /// Uniform profiles at `soc`, open-loop copies equal to the closed-loop ones.
    pub fn at_soc(params: &CellParameters, n: usize, soc: f64, q: f64, theta1: f64, theta2: f64) -> Self {
        let cp = params.stoichiometry_at_soc(Electrode::Cathode, soc) * params.c_s_p_max;
        let cn = params.stoichiometry_at_soc(Electrode::Anode, soc) * params.c_s_n_max;
        Self {
            x1_hat: vec![cp; n],
            x2_hat: vec![cn; n],
            x1_ol: vec![cp; n],
            x2_ol: vec![cn; n],
            x3_hat: q,
            theta1_hat: theta1,
            theta2_hat: theta2,
            gate_open: false,
            params_open: false,
            q_filtered: q,
        }
    }

    /// Concentrations outside `[0, c_max]`, as messages. Estimates are never clamped.
    pub fn flags(&self, params: &CellParameters) -> Vec<String> {
        let mut v = Vec::new();
        for (name, c, cmax) in [
            ("x1_hat", &self.x1_hat, params.c_s_p_max),
            ("x2_hat", &self.x2_hat, params.c_s_n_max),
        ] {
            if let Some((i, x)) = c.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && **x <= cmax)) {
                v.push(format!("{name}[{i}] = {x} outside [0, {cmax}]"));
            }
        }
        v
    }
}

/// `kappa_sei` implied by an estimate of `theta_2` and the known cell constants.
pub fn unpack_kappa_sei(theta2: f64, params: &CellParameters, sei: &SeiParameters) -> Result<f64> {
    if !(theta2 > 0.0 && theta2.is_finite()) {
        return Err(Error::Domain(format!("theta_2 = {theta2} must be finite and > 0")));
    }
    Ok(sei.theta_2_numerator(params) / theta2)
}

/// Observer bound to one cell and one configuration.
#[derive(Debug, Clone)]
pub struct Observer {
    pub params: CellParameters,
    pub sei: SeiParameters,
    pub ocp: OcpTable,
    pub config: ObserverConfig,
    cathode: SolidOperator,
    anode: SolidOperator,
    ratio_deviation: f64,
    theta2_nominal: f64,
}

impl Observer {
    pub fn new(params: CellParameters, sei: SeiParameters, ocp: OcpTable, config: ObserverConfig) -> Result<Self> {
        params.validate()?;
        config.check()?;
        let n = config.gains.n();
        let cathode = SolidOperator::new(&params, n, Electrode::Cathode)?;
        let anode = SolidOperator::new(&params, n, Electrode::Anode)?;
        let ratio_deviation = config.gains.ratio_deviation();
        let theta2_nominal = sei.theta_2(&params);
        Ok(Self {
            params,
            sei,
            ocp,
            config,
            cathode,
            anode,
            ratio_deviation,
            theta2_nominal,
        })
    }

    /// Reference cell with reference gains for `n` radial nodes.
    pub fn reference(n: usize) -> Result<Self> {
        let p = crate::params::ParameterSet::reference();
        let ocp = OcpTable::reference();
        let cfg = ObserverConfig::reference(&p.cell, &p.sei, &ocp, n)?;
        Self::new(p.cell, p.sei, ocp, cfg)
    }

    pub fn gains(&self) -> &ObserverGains {
        &self.config.gains
    }

    pub fn n(&self) -> usize {
        self.cathode.n()
    }

    pub fn operator(&self, e: Electrode) -> &SolidOperator {
        match e {
            Electrode::Cathode => &self.cathode,
            Electrode::Anode => &self.anode,
        }
    }

    /// Nominal `theta_2` of the configured SEI parameters.
    pub fn theta2_nominal(&self) -> f64 {
        self.theta2_nominal
    }

    /// State at `soc` with the given capacity and parameter guesses.
    pub fn state_at_soc(&self, soc: f64, q: f64, theta1: f64, theta2: f64) -> ObserverState {
        ObserverState::at_soc(&self.params, self.n(), soc, q, theta1, theta2)
    }

    /// Sign of the residual, or its saturated form when a boundary layer is configured.
    pub fn switching(&self, e: f64) -> f64 {
        let phi = self.config.boundary_layer;
        if phi > 0.0 {
            (e / phi).clamp(-1.0, 1.0)
        } else if e > 0.0 {
            1.0
        } else if e < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// Reduced-model output from surface concentrations, capacity and `theta_2`.
    pub fn output_from(&self, x1_n: f64, x2_n: f64, x3: f64, theta2: f64, current: f64, t: f64) -> Result<f64> {
        let p = &self.params;
        let h1 = self.ocp.cathode.potential(x1_n / p.c_s_p_max, t, p.t_ref)?
            + overpotential(x1_n, NOMINAL_CE, current, t, Electrode::Cathode, p)?;
        let h2 = self.ocp.anode.potential(x2_n / p.c_s_n_max, t, p.t_ref)?
            + overpotential(x2_n, NOMINAL_CE, current, t, Electrode::Anode, p)?;
        let h3 = gains::h3(x3, p, &self.sei, t)?;
        Ok(h1 - h2 - p.r_l * current - h3 * current + (x3 - self.sei.q_0) * theta2 * current)
    }

    /// Output of the cathode observer (own closed loop, anode open loop) or the anode
    /// observer (cathode open loop, own closed loop).
    pub fn observer_output(&self, st: &ObserverState, m: &Measurement, which: Side) -> Result<f64> {
        let n = self.n() - 1;
        let (x1, x2) = match which {
            Side::Cathode => (st.x1_hat[n], st.x2_ol[n]),
            Side::Anode => (st.x1_ol[n], st.x2_hat[n]),
        };
        self.output_from(x1, x2, st.x3_hat, st.theta2_hat, m.current, m.temperature)
    }

    fn anode_diffusivity(&self, theta1: f64, t: f64) -> Result<f64> {
        let p = &self.params;
        Ok(theta1 * p.solid_diffusivity(Electrode::Anode, t)? / p.d_s_n_ref)
    }

    /// Advance one particle over `dt`, sub-stepping at the configured step.
    fn propagate(&self, e: Electrode, c: &mut [f64], d: f64, current: f64, dt: f64, inj: Option<&[f64]>) -> Result<()> {
        let k = (dt / self.config.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = dt / k as f64;
        for _ in 0..k {
            self.operator(e)
                .step(c, d, current, h, Integrator::ImplicitEuler, inj)?;
        }
        Ok(())
    }

    fn injection(&self, gain: &[f64], beta: f64, e: f64) -> Vec<f64> {
        let s = self.switching(e);
        gain.iter().map(|g| g * e - beta * g * s).collect()
    }

    fn residual(m: &Measurement, y_hat: f64) -> Result<f64> {
        let e = m.voltage - y_hat;
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Fault(format!("non-finite output residual at t = {} s", m.t)))
        }
    }

    /// Cathode observer over one sample interval: closed-loop cathode, open-loop anode
    /// copy seeded from the anode estimate, and capacity when the gate is open.
    pub fn cathode_step(&self, st: &ObserverState, m: &Measurement, y_hat_1: f64, dt: f64) -> Result<ObserverState> {
        let e = Self::residual(m, y_hat_1)?;
        let g = self.gains();
        let mut next = st.clone();
        let dp = self.params.solid_diffusivity(Electrode::Cathode, m.temperature)?;
        let inj = self.injection(&g.g1, g.beta1, e);
        self.propagate(Electrode::Cathode, &mut next.x1_hat, dp, m.current, dt, Some(&inj))?;
        let dn = self.anode_diffusivity(st.theta1_hat, m.temperature)?;
        next.x2_ol = st.x2_hat.clone();
        self.propagate(Electrode::Anode, &mut next.x2_ol, dn, m.current, dt, None)?;
        if st.gate_open {
            next.x3_hat = st.x3_hat + dt * g.g3 * e * m.current;
        }
        Ok(next)
    }

    /// Anode observer over one sample interval, mirroring [`cathode_step`](Self::cathode_step).
    pub fn anode_step(&self, st: &ObserverState, m: &Measurement, y_hat_2: f64, dt: f64) -> Result<ObserverState> {
        let e = Self::residual(m, y_hat_2)?;
        let g = self.gains();
        let mut next = st.clone();
        let dn = self.anode_diffusivity(st.theta1_hat, m.temperature)?;
        let inj = self.injection(&g.g2, g.beta2, e);
        self.propagate(Electrode::Anode, &mut next.x2_hat, dn, m.current, dt, Some(&inj))?;
        let dp = self.params.solid_diffusivity(Electrode::Cathode, m.temperature)?;
        next.x1_ol = st.x1_hat.clone();
        self.propagate(Electrode::Cathode, &mut next.x1_ol, dp, m.current, dt, None)?;
        Ok(next)
    }

    /// Rate of the diffusivity law at this state and anode residual.
    pub fn theta1_rate(&self, st: &ObserverState, e_y2: f64) -> f64 {
        let g = self.gains();
        let c_a = self.anode.surface_row(&st.x2_hat);
        c_a * self.switching(e_y2) * g.h_tol_2 / (g.gamma_n2 * g.k1)
    }

    /// Diffusivity adaptation over `dt`, projected onto the configured interval.
    pub fn adapt_theta1(&self, st: &ObserverState, e_y2: f64, dt: f64) -> ObserverState {
        let mut next = st.clone();
        let [lo, hi] = self.config.theta1_bounds;
        let d_ref = self.params.d_s_n_ref;
        let raw = st.theta1_hat + dt * self.theta1_rate(st, e_y2);
        next.theta1_hat = raw.clamp(lo * d_ref, hi * d_ref);
        if next.theta1_hat != raw {
            log::debug!("theta1 projected from {raw:e} to {:e}", next.theta1_hat);
        }
        next
    }

    /// Rate of the SEI law at this state, current and cathode residual.
    pub fn theta2_rate(&self, st: &ObserverState, current: f64, e_y1: f64) -> f64 {
        let g = self.gains();
        let cg1 = g.g1[self.n() - 1];
        cg1 * (st.x3_hat - self.sei.q_0) * current * self.switching(e_y1) * g.h_tol_1 / (g.k2 * g.gamma_p2)
    }

    /// SEI adaptation over `dt`, kept in `(0, theta2_max * nominal]`. Refused when the
    /// gain ratio does not hold, since the law is only valid under it.
    pub fn adapt_theta2(&self, st: &ObserverState, current: f64, e_y1: f64, dt: f64) -> Result<ObserverState> {
        if self.ratio_deviation > gains::RATIO_TOLERANCE {
            return Err(Error::Config(format!(
                "SEI adaptation needs G1/gamma_p2 = -G2/gamma_n2; relative deviation is {:.3e}",
                self.ratio_deviation
            )));
        }
        let mut next = st.clone();
        let hi = self.config.theta2_max * self.theta2_nominal;
        let lo = 1e-6 * self.theta2_nominal;
        let raw = st.theta2_hat + dt * self.theta2_rate(st, current, e_y1);
        next.theta2_hat = raw.clamp(lo, hi);
        if next.theta2_hat != raw {
            log::debug!("theta2 projected from {raw:e} to {:e}", next.theta2_hat);
        }
        Ok(next)
    }

    /// One full observer sample: outputs, both observers, adaptation when gated.
    /// The gate and the capacity filter are left to the caller.
    pub fn step(&self, st: &ObserverState, m: &Measurement, dt: f64) -> Result<StepOutput> {
        let y1 = self.observer_output(st, m, Side::Cathode)?;
        let y2 = self.observer_output(st, m, Side::Anode)?;
        let e1 = Self::residual(m, y1)?;
        let e2 = Self::residual(m, y2)?;
        let c = self.cathode_step(st, m, y1, dt)?;
        let a = self.anode_step(st, m, y2, dt)?;
        let mut next = c;
        next.x2_hat = a.x2_hat;
        next.x1_ol = a.x1_ol;
        if st.params_open {
            next.theta1_hat = self.adapt_theta1(st, e2, dt).theta1_hat;
            next.theta2_hat = self.adapt_theta2(st, m.current, e1, dt)?.theta2_hat;
        }
        Ok(StepOutput {
            state: next,
            y_hat_1: y1,
            y_hat_2: y2,
            e_y1: e1,
            e_y2: e2,
        })
    }
}

/// Result of [`Observer::step`]: the advanced state plus the outputs it was driven by.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: ObserverState,
    pub y_hat_1: f64,
    pub y_hat_2: f64,
    pub e_y1: f64,
    pub e_y2: f64,
}
