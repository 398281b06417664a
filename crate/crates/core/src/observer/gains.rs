//! Observer gains, their construction for a given cell, and the conditions they must meet.
//!
//! Concentration-weighted quantities in the stability conditions are evaluated in
//! stoichiometry units (concentration divided by `c_max`) so that the capacity and
//! concentration terms can be compared at all.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aging::electrolyte_resistance_at_capacity;
use crate::error::{Error, Result};
use crate::espm::{SolidOperator, NOMINAL_CE};
use crate::ocp::OcpTable;
use crate::params::{line_of, CellParameters, Electrode, SeiParameters};

/// Largest initial SOC error the default gains are designed for.
pub const ASSUMED_INITIAL_ERROR: f64 = 0.45;

/// Relative tolerance on the cathode/anode gain ratio.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Linear, sliding and adaptation gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverGains {
    /// Cathode output injection, one entry per radial node (mol / (m^3 s V)), all < 0.
    pub g1: Vec<f64>,
    /// Anode output injection (mol / (m^3 s V)), all > 0.
    pub g2: Vec<f64>,
    /// Capacity gain (Ah / (V A s)).
    pub g3: f64,
    /// Sliding gains as multiples of the linear gains: `G_v = -beta * G` (V).
    pub beta1: f64,
    pub beta2: f64,
    /// Adaptation constants for the diffusivity and SEI laws.
    pub k1: f64,
    pub k2: f64,
    /// Lower bounds on |dU/dc_surf| (V m^3 / mol).
    pub gamma_p2: f64,
    pub gamma_n2: f64,
    /// Lower bound on |dh3/dQ| (ohm / Ah).
    pub alpha_q2: f64,
    /// Tolerable output-error magnitudes standing in for |h1 - h2| and |h2| (V).
    pub h_tol_1: f64,
    pub h_tol_2: f64,
    /// Output-uncertainty coefficient bound (ohm / Ah).
    pub psi: f64,
}

/// Tuning knobs from which [`ObserverGains::design`] builds a full gain set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDesign {
    /// SOC correction rate per volt of output error (1 / (V s)), shared by both electrodes.
    pub soc_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub g3: f64,
    pub k1: f64,
    pub k2: f64,
    pub psi: f64,
    pub initial_error: f64,
}

impl Default for GainDesign {
    fn default() -> Self {
        Self {
            soc_rate: 1e-2,
            beta1: 2e-3,
            beta2: 2e-3,
            g3: 0.05,
            k1: 1e34,
            k2: 1e13,
            psi: 0.02,
            initial_error: ASSUMED_INITIAL_ERROR,
        }
    }
}

/// Stoichiometry window `(min, max)` an electrode sweeps between 0 and 100 % SOC.
pub(crate) fn window(params: &CellParameters, e: Electrode) -> (f64, f64) {
    let g = params.electrode(e);
    (g.theta_0.min(g.theta_100), g.theta_0.max(g.theta_100))
}

/// Smallest |dU/dc| over the electrode's window (V m^3 / mol).
pub fn min_ocp_slope(params: &CellParameters, ocp: &OcpTable, e: Electrode) -> f64 {
    let (a, b) = window(params, e);
    let band = ocp.curve(e).slope_band(a, b, f64::INFINITY, 0.0);
    // the curves decrease; a non-negative slope anywhere means no positive bound exists
    (-band.max_slope).max(0.0) / params.electrode(e).c_max
}

/// Resistance term of the reduced output as a function of capacity, with the
/// electrolyte at its nominal concentration.
pub fn h3(q: f64, params: &CellParameters, sei: &SeiParameters, t: f64) -> Result<f64> {
    electrolyte_resistance_at_capacity(q, params, sei, [NOMINAL_CE; 3], t)
}

/// Smallest |dh3/dQ| on `[q_lo, q_hi]`, by central differences on a dense grid.
pub fn min_h3_slope(params: &CellParameters, sei: &SeiParameters, q_lo: f64, q_hi: f64) -> Result<f64> {
    let n = 400;
    let h = 1e-4 * sei.q_0;
    let mut lo = f64::INFINITY;
    for i in 0..=n {
        let q = q_lo + (q_hi - q_lo) * i as f64 / n as f64;
        let d = (h3(q + h, params, sei, params.t_ref)? - h3(q - h, params, sei, params.t_ref)?) / (2.0 * h);
        lo = lo.min(-d);
    }
    Ok(lo)
}

/// Output-error magnitudes at an SOC error of `err` about mid-SOC:
/// `(|h1 - h2|, |h1|, |h2|)`, each the larger of the two error directions.
pub fn error_magnitudes(params: &CellParameters, ocp: &OcpTable, err: f64) -> Result<(f64, f64, f64)> {
    let u = |e: Electrode, soc: f64| {
        let theta = params.stoichiometry_at_soc(e, soc);
        ocp.curve(e).potential(theta, params.t_ref, params.t_ref)
    };
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    for s in [0.5 - err, 0.5 + err] {
        let s = s.clamp(0.0, 1.0);
        let h1 = u(Electrode::Cathode, 0.5)? - u(Electrode::Cathode, s)?;
        let h2 = u(Electrode::Anode, 0.5)? - u(Electrode::Anode, s)?;
        out.0 = out.0.max((h1 - h2).abs());
        out.1 = out.1.max(h1.abs());
        out.2 = out.2.max(h2.abs());
    }
    Ok(out)
}

impl ObserverGains {
    /// Gains for `n` radial nodes.
    ///
    /// The linear gains are uniform across nodes and move both electrodes by the same
    /// SOC per volt, so the injection never creates or destroys cyclable lithium. The
    /// Lipschitz bounds are the true OCP slope minima, with one of them lowered until
    /// `G1 / gamma_p2 = -G2 / gamma_n2` holds exactly.
    pub fn design(
        params: &CellParameters,
        sei: &SeiParameters,
        ocp: &OcpTable,
        n: usize,
        d: GainDesign,
    ) -> Result<Self> {
        let span = |e: Electrode| {
            let (a, b) = window(params, e);
            (b - a) * params.electrode(e).c_max
        };
        let g1 = -d.soc_rate * span(Electrode::Cathode);
        let g2 = d.soc_rate * span(Electrode::Anode);
        let sp = min_ocp_slope(params, ocp, Electrode::Cathode);
        let sn = min_ocp_slope(params, ocp, Electrode::Anode);
        let r = g2 / -g1;
        let (gamma_p2, gamma_n2) = if sp * r <= sn { (sp, sp * r) } else { (sn / r, sn) };
        let alpha_q2 = min_h3_slope(params, sei, 0.8 * sei.q_0, 1.1 * sei.q_0)?;
        let (h_tol_1, _, h_tol_2) = error_magnitudes(params, ocp, d.initial_error)?;
        Ok(Self {
            g1: vec![g1; n],
            g2: vec![g2; n],
            g3: d.g3,
            beta1: d.beta1,
            beta2: d.beta2,
            k1: d.k1,
            k2: d.k2,
            gamma_p2,
            gamma_n2,
            alpha_q2,
            h_tol_1,
            h_tol_2,
            psi: d.psi,
        })
    }

    pub fn reference(params: &CellParameters, sei: &SeiParameters, ocp: &OcpTable, n: usize) -> Result<Self> {
        Self::design(params, sei, ocp, n, GainDesign::default())
    }

    pub fn n(&self) -> usize {
        self.g1.len()
    }

    /// Largest relative violation of `G1 / gamma_p2 = -G2 / gamma_n2`.
    pub fn ratio_deviation(&self) -> f64 {
        self.g1
            .iter()
            .zip(&self.g2)
            .map(|(a, b)| {
                let l = a / self.gamma_p2;
                let r = -b / self.gamma_n2;
                (l - r).abs() / l.abs().max(r.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// Sign pattern only; everything else is in [`validate_gains`].
    pub fn sign_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.g1.len() != self.g2.len() || self.g1.is_empty() {
            v.push(format!("G1 has {} entries and G2 has {}", self.g1.len(), self.g2.len()));
        }
        if let Some((i, x)) = self.g1.iter().enumerate().find(|(_, x)| !(**x < 0.0)) {
            v.push(format!("G1[{i}] = {x} is not negative"));
        }
        if let Some((i, x)) = self.g2.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            v.push(format!("G2[{i}] = {x} is not positive"));
        }
        for (name, x) in [
            ("G3", self.g3),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("gamma_p2", self.gamma_p2),
            ("gamma_n2", self.gamma_n2),
            ("alpha_q2", self.alpha_q2),
            ("h_tol_1", self.h_tol_1),
            ("h_tol_2", self.h_tol_2),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} = {x} must be finite and > 0"));
            }
        }
        if !(self.psi.is_finite() && self.psi >= 0.0) {
            v.push(format!("psi = {} must be finite and >= 0", self.psi));
        }
        v
    }
}

/// Moving-RMS gate on the cathode output residual, and the capacity smoothing filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatingConfig {
    /// RMS threshold (V).
    pub threshold: f64,
    /// RMS averaging window (s).
    pub window: f64,
    /// How long the RMS must stay below the threshold (s).
    pub dwell: f64,
    /// Capacity filter time constant (s).
    pub filter_tau: f64,
    /// Only samples with |I| at or below this (A) enter the RMS; above it the residual
    /// is dominated by resistance mismatch rather than concentration error.
    pub current_limit: f64,
    /// Time constant of the low-pass applied to the residual before the RMS (s), so
    /// white sensor noise does not hold the gate shut. Zero disables it.
    pub residual_tau: f64,
    /// Time after the gate opens before the diffusivity and SEI laws start (s), so the
    /// capacity estimate settles first.
    pub parameter_delay: f64,
}

impl Default for GatingConfig {
    fn default() -> Self {
        Self {
            threshold: 0.030,
            window: 60.0,
            dwell: 120.0,
            filter_tau: 200.0,
            current_limit: 0.5,
            residual_tau: 10.0,
            parameter_delay: 300.0,
        }
    }
}

fn default_boundary_layer() -> f64 {
    0.005
}

fn default_theta1_bounds() -> [f64; 2] {
    [0.01, 100.0]
}

fn default_theta2_max() -> f64 {
    100.0
}

fn default_dt() -> f64 {
    1.0
}

/// Everything an observer run needs besides the cell: gains, gating and numerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub gains: ObserverGains,
    #[serde(default)]
    pub gating: GatingConfig,
    /// Width of the saturation that replaces sgn (V). Zero selects the pure sign.
    #[serde(default = "default_boundary_layer")]
    pub boundary_layer: f64,
    /// Projection interval for the diffusivity estimate, as multiples of its reference value.
    #[serde(default = "default_theta1_bounds")]
    pub theta1_bounds: [f64; 2],
    /// Upper projection bound for theta_2, as a multiple of its nominal value.
    #[serde(default = "default_theta2_max")]
    pub theta2_max: f64,
    /// Largest internal step (s); longer sample intervals are sub-stepped.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl ObserverConfig {
    pub fn new(gains: ObserverGains) -> Self {
        Self {
            gains,
            gating: GatingConfig::default(),
            boundary_layer: default_boundary_layer(),
            theta1_bounds: default_theta1_bounds(),
            theta2_max: default_theta2_max(),
            dt: default_dt(),
        }
    }

    /// Reference gains for the given cell and default gating.
    pub fn reference(params: &CellParameters, sei: &SeiParameters, ocp: &OcpTable, n: usize) -> Result<Self> {
        Ok(Self::new(ObserverGains::reference(params, sei, ocp, n)?))
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("observer config serialises")
    }

    /// Structural checks that do not need the cell.
    pub fn check(&self) -> Result<()> {
        let mut v = self.gains.sign_violations();
        let g = &self.gating;
        for (name, x) in [
            ("gating.threshold", g.threshold),
            ("gating.window", g.window),
            ("gating.filter_tau", g.filter_tau),
            ("dt", self.dt),
        ] {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} = {x} must be finite and > 0"));
            }
        }
        for (name, x) in [
            ("gating.dwell", g.dwell),
            ("gating.current_limit", g.current_limit),
            ("gating.residual_tau", g.residual_tau),
            ("gating.parameter_delay", g.parameter_delay),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("{name} = {x} must be finite and >= 0"));
            }
        }
        if !(self.boundary_layer.is_finite() && self.boundary_layer >= 0.0) {
            v.push(format!("boundary_layer = {} must be >= 0", self.boundary_layer));
        }
        let [lo, hi] = self.theta1_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            v.push(format!("theta1_bounds [{lo}, {hi}] must satisfy 0 < lo < hi"));
        }
        if !(self.theta2_max > 0.0 && self.theta2_max.is_finite()) {
            v.push(format!("theta2_max = {} must be finite and > 0", self.theta2_max));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameters(v))
        }
    }
}

/// One line of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct GainCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Error magnitudes at which the conditions were evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumedErrors {
    pub soc_error: f64,
    /// Per-node cathode / anode stoichiometry errors.
    pub e1: f64,
    pub e2: f64,
    /// |h1|, |h2| and |h1 - h2| at that error (V).
    pub h1: f64,
    pub h2: f64,
    pub e_y1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<GainCheck>,
    pub assumed: AssumedErrors,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&GainCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&GainCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = &self.assumed;
        writeln!(
            f,
            "assumed initial SOC error {:.3}: |h1| = {:.4} V, |h2| = {:.4} V, |e_y1| = {:.4} V",
            a.soc_error, a.h1, a.h2, a.e_y1
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<18} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Evaluate every gain condition. Never fails: problems are reported as failed checks.
///
/// `theta1` is the anode diffusivity used in the anode error matrix; `initial_error` the
/// assumed SOC error for the conservative bounds. The state uncertainties in the sliding
/// gain bounds are taken as zero.
pub fn validate_gains(
    g: &ObserverGains,
    params: &CellParameters,
    sei: &SeiParameters,
    ocp: &OcpTable,
    theta1: f64,
    initial_error: f64,
) -> ValidationReport {
    let mut checks = Vec::new();
    let signs = g.sign_violations();
    checks.push(GainCheck {
        name: "sign pattern",
        passed: signs.is_empty(),
        detail: if signs.is_empty() {
            "G1 < 0, G2 > 0, scalars > 0".into()
        } else {
            signs.join("; ")
        },
    });
    let dev = g.ratio_deviation();
    checks.push(GainCheck {
        name: "gain ratio",
        passed: dev <= RATIO_TOLERANCE,
        detail: format!("max relative deviation {dev:.3e} (tolerance {RATIO_TOLERANCE:.0e})"),
    });

    let sp = min_ocp_slope(params, ocp, Electrode::Cathode);
    let sn = min_ocp_slope(params, ocp, Electrode::Anode);
    let aq = min_h3_slope(params, sei, 0.8 * sei.q_0, 1.1 * sei.q_0).unwrap_or(f64::NAN);
    let ok = g.gamma_p2 <= sp * (1.0 + 1e-12) && g.gamma_n2 <= sn * (1.0 + 1e-12) && g.alpha_q2 <= aq * (1.0 + 1e-12);
    checks.push(GainCheck {
        name: "lipschitz bounds",
        passed: ok,
        detail: format!(
            "gamma_p2 {:.4e} <= {:.4e}, gamma_n2 {:.4e} <= {:.4e}, alpha_q2 {:.4e} <= {:.4e}",
            g.gamma_p2, sp, g.gamma_n2, sn, g.alpha_q2, aq
        ),
    });

    let n = g.n();
    let spectrum = |e: Electrode, gain: &[f64], gamma: f64, d: f64| -> Result<f64> {
        let (a, _) = SolidOperator::new(params, n, e)?.to_dense();
        let mut m = a * d;
        for i in 0..n {
            m[(i, n - 1)] += gain[i] * gamma;
        }
        Ok(max_real_eigenvalue(&m))
    };
    let dp = params
        .solid_diffusivity(Electrode::Cathode, params.t_ref)
        .unwrap_or(f64::NAN);
    for (name, res) in [
        ("cathode spectrum", spectrum(Electrode::Cathode, &g.g1, g.gamma_p2, dp)),
        // y depends on -h2, so the anode error matrix carries -G2 gamma_n2 C.
        (
            "anode spectrum",
            spectrum(
                Electrode::Anode,
                &g.g2.iter().map(|x| -x).collect::<Vec<_>>(),
                g.gamma_n2,
                theta1,
            ),
        ),
    ] {
        checks.push(match res {
            Ok(re) => GainCheck {
                name,
                passed: re < 0.0,
                detail: format!("largest real part {re:.4e} 1/s"),
            },
            Err(e) => GainCheck {
                name,
                passed: false,
                detail: e.to_string(),
            },
        });
    }

    let (e_y1, h1, h2) = error_magnitudes(params, ocp, initial_error).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    let span = |e: Electrode| {
        let (a, b) = window(params, e);
        b - a
    };
    let e1 = initial_error * span(Electrode::Cathode);
    let e2 = initial_error * span(Electrode::Anode);
    // sliding gains: with zero state uncertainty the bounds reduce to the cross-fed error
    checks.push(GainCheck {
        name: "beta1 bound",
        passed: g.beta1 <= h2,
        detail: format!("beta1 {:.4e} <= |h2,ol| {:.4e}", g.beta1, h2),
    });
    checks.push(GainCheck {
        name: "beta2 bound",
        passed: g.beta2 <= h1,
        detail: format!("beta2 {:.4e} <= |h1,ol| {:.4e}", g.beta2, h1),
    });

    // capacity gain, concentration terms in stoichiometry units; e1 and e2 carry
    // opposite signs, as do G1 and G2
    let cp = params.c_s_p_max;
    let cn = params.c_s_n_max;
    let e1g1: f64 = g.g1.iter().map(|x| -e1 * x / cp).sum();
    let e2g2: f64 = g.g2.iter().map(|x| e2 * x / cn).sum();
    let theta2 = sei.theta_2(params);
    let need = ((e1g1 + e2g2) * (theta2 + g.alpha_q2 + g.psi)).abs() / e_y1;
    checks.push(GainCheck {
        name: "G3 bound",
        passed: g.g3 >= need,
        detail: format!("G3 {:.4e} >= {:.4e}", g.g3, need),
    });

    ValidationReport {
        checks,
        assumed: AssumedErrors {
            soc_error: initial_error,
            e1,
            e2,
            h1,
            h2,
            e_y1,
        },
    }
}
