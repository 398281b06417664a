//! SEI film growth and the capacity-fade / power-fade coupling.
//!
//! Side-reaction current density `i_s` is an input here, not modelled. It is
//! non-positive by convention (a reduction that consumes cyclable lithium); positive
//! values are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::espm::model::electrolyte_resistance;
use crate::espm::EspmState;
use crate::params::{line_of, CellParameters, Electrode, SeiParameters};

fn check_sign(i_s: f64) -> Result<()> {
    if i_s > 0.0 || !i_s.is_finite() {
        Err(Error::SignConvention(format!(
            "side-reaction current density must be <= 0, got {i_s} A/m^2"
        )))
    } else {
        Ok(())
    }
}

/// dL_sei/dt (m/s).
pub fn sei_growth_rate(i_s: f64, sei: &SeiParameters, faraday: f64) -> Result<f64> {
    check_sign(i_s)?;
    Ok(-i_s * sei.m_sei / (2.0 * faraday * sei.rho_sei))
}

/// dQ/dt (Ah/s).
pub fn capacity_fade_rate(i_s: f64, params: &CellParameters) -> Result<f64> {
    check_sign(i_s)?;
    Ok(i_s * params.a_s(Electrode::Anode) * params.area * params.l_n / 3600.0)
}

/// Capacity rate implied by a film growth rate.
pub fn capacity_rate_from_growth(dl_dt: f64, params: &CellParameters, sei: &SeiParameters) -> f64 {
    -dl_dt * 2.0 * params.faraday * sei.rho_sei * params.a_s(Electrode::Anode) * params.area * params.l_n
        / (3600.0 * sei.m_sei)
}

/// Anode porosity left over once the film has grown to `l_sei`.
pub fn modified_porosity(l_sei: f64, params: &CellParameters) -> Result<f64> {
    if !(l_sei >= 0.0) {
        return Err(Error::Domain(format!("SEI thickness {l_sei} must be >= 0")));
    }
    porosity_any_thickness(l_sei, params)
}

/// Same closure relation, but a negative thickness is allowed (film thinner than zero
/// extrapolates the porosity linearly).
fn porosity_any_thickness(l_sei: f64, params: &CellParameters) -> Result<f64> {
    let eps = 1.0 - params.eps_n * (1.0 + 3.0 * l_sei / params.r_n) - params.eps_n_f;
    if eps <= 0.0 {
        return Err(Error::PoreClogging(eps));
    }
    Ok(eps)
}

/// Film thickness consistent with capacity `q` along the aging trajectory.
pub fn sei_thickness_at_capacity(q: f64, params: &CellParameters, sei: &SeiParameters) -> f64 {
    sei.l_sei_0
        - 3600.0 * (q - sei.q_0) * sei.m_sei
            / (2.0 * params.faraday * params.area * params.l_n * params.a_s(Electrode::Anode) * sei.rho_sei)
}

/// SEI film resistance gained since the start of life.
pub fn sei_resistance_delta(q: f64, params: &CellParameters, sei: &SeiParameters) -> f64 {
    sei.theta_2(params) * (sei.q_0 - q)
}

/// Electrolyte resistance with the anode porosity implied by capacity `q`.
/// Defined for `q > Q_0` too: the thickness relation is continued linearly, even past
/// zero, so the result stays strictly decreasing in `q`.
pub fn electrolyte_resistance_at_capacity(
    q: f64,
    params: &CellParameters,
    sei: &SeiParameters,
    c_e_regions: [f64; 3],
    t: f64,
) -> Result<f64> {
    let l = sei_thickness_at_capacity(q, params, sei);
    let eps = porosity_any_thickness(l, params)?;
    electrolyte_resistance(params, c_e_regions, t, eps)
}

/// Resistance increase from aging at capacity `q <= Q_0`.
pub fn power_fade_resistance(
    q: f64,
    params: &CellParameters,
    sei: &SeiParameters,
    c_e_regions: [f64; 3],
    t: f64,
) -> Result<f64> {
    if q > sei.q_0 {
        return Err(Error::Domain(format!(
            "capacity {q} Ah exceeds the start-of-life value {} Ah",
            sei.q_0
        )));
    }
    power_fade_resistance_unchecked(q, params, sei, c_e_regions, t)
}

pub(crate) fn power_fade_resistance_unchecked(
    q: f64,
    params: &CellParameters,
    sei: &SeiParameters,
    c_e_regions: [f64; 3],
    t: f64,
) -> Result<f64> {
    let r_now = electrolyte_resistance_at_capacity(q, params, sei, c_e_regions, t)?;
    let r_bol = electrolyte_resistance_at_capacity(sei.q_0, params, sei, c_e_regions, t)?;
    Ok(r_now - r_bol + sei_resistance_delta(q, params, sei))
}

/// Aging quantities derived from a plant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgingState {
    pub l_sei: f64,
    pub q: f64,
    pub r_sei_delta: f64,
    pub eps_e_n_current: f64,
    pub r_pf: f64,
}

impl AgingState {
    pub fn from_state(
        state: &EspmState,
        params: &CellParameters,
        sei: &SeiParameters,
        c_e_regions: [f64; 3],
        t: f64,
    ) -> Result<Self> {
        Ok(Self {
            l_sei: state.l_sei,
            q: state.q,
            r_sei_delta: sei_resistance_delta(state.q, params, sei),
            eps_e_n_current: modified_porosity(state.l_sei, params)?,
            r_pf: power_fade_resistance(state.q, params, sei, c_e_regions, t)?,
        })
    }
}

/// Piecewise-constant side-reaction current density.
#[derive(Debug, Clone, PartialEq)]
pub struct SideReactionProfile {
    /// Breakpoints (s); value `i_s[k]` holds on `[t[k], t[k+1])` and after the last.
    pub t: Vec<f64>,
    pub i_s: Vec<f64>,
}

impl SideReactionProfile {
    pub fn constant(i_s: f64) -> Result<Self> {
        check_sign(i_s)?;
        Ok(Self {
            t: vec![0.0],
            i_s: vec![i_s],
        })
    }

    /// Constant density that removes `loss_ah` over `horizon` seconds.
    pub fn for_capacity_loss(loss_ah: f64, horizon: f64, params: &CellParameters) -> Result<Self> {
        if !(loss_ah >= 0.0 && horizon > 0.0) {
            return Err(Error::Domain(format!("bad loss {loss_ah} Ah over {horizon} s")));
        }
        let per_unit = params.a_s(Electrode::Anode) * params.area * params.l_n / 3600.0;
        Self::constant(-loss_ah / horizon / per_unit)
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&b| b <= t);
        self.i_s[k.saturating_sub(1)]
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut t = Vec::new();
        let mut i_s = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse {
                path: origin.into(),
                line: n + 1,
                message,
            };
            let f: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if f.len() != 2 {
                return Err(perr(format!("expected 2 columns, found {}", f.len())));
            }
            let a: f64 = f[0].parse().map_err(|_| perr(format!("bad time '{}'", f[0])))?;
            let b: f64 = f[1].parse().map_err(|_| perr(format!("bad i_s '{}'", f[1])))?;
            if let Some(&prev) = t.last() {
                if a <= prev {
                    return Err(Error::NonMonotoneTime {
                        path: origin.into(),
                        line: n + 1,
                        t: a,
                    });
                }
            }
            check_sign(b).map_err(|e| perr(e.to_string()))?;
            t.push(a);
            i_s.push(b);
        }
        if t.is_empty() {
            return Err(Error::Parse {
                path: origin.into(),
                line: line_of(text, text.len()),
                message: "empty side-reaction profile".into(),
            });
        }
        Ok(Self { t, i_s })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Integrate film growth and capacity loss from `t0` to `t1`.
///
/// The rates are constant between profile breakpoints, so each piece is integrated
/// in closed form; `dt` only sets how often the pore-clogging and capacity checks run.
/// Transport states are left alone; aging runs on its own slow clock.
pub fn age_cell(
    state: &EspmState,
    profile: &SideReactionProfile,
    t0: f64,
    t1: f64,
    dt: f64,
    params: &CellParameters,
    sei: &SeiParameters,
) -> Result<EspmState> {
    if !(dt > 0.0) || t1 < t0 {
        return Err(Error::Domain(format!("bad aging window [{t0}, {t1}] with dt {dt}")));
    }
    let mut s = state.clone();
    let mut t = t0;
    while t < t1 {
        let k = profile.t.partition_point(|&b| b <= t);
        let seg_end = profile.t.get(k).copied().unwrap_or(f64::INFINITY).min(t1);
        let i_s = profile.at(t);
        let dl = sei_growth_rate(i_s, sei, params.faraday)?;
        let dq = capacity_fade_rate(i_s, params)?;
        let (l_start, q_start, seg_start) = (s.l_sei, s.q, t);
        while t < seg_end {
            t = (t + dt).min(seg_end);
            s.l_sei = l_start + dl * (t - seg_start);
            s.q = q_start + dq * (t - seg_start);
            modified_porosity(s.l_sei, params).map_err(|e| e.at_time(t))?;
            if !(s.q > 0.0) {
                return Err(Error::Domain("capacity exhausted".into()).at_time(t));
            }
        }
    }
    Ok(s)
}

/// Age a state until its capacity reaches `q_target` under a constant side reaction
/// spread over `horizon` seconds.
pub fn age_to_capacity(
    state: &EspmState,
    q_target: f64,
    horizon: f64,
    params: &CellParameters,
    sei: &SeiParameters,
) -> Result<EspmState> {
    let loss = state.q - q_target;
    let profile = SideReactionProfile::for_capacity_loss(loss, horizon, params)?;
    let mut s = age_cell(state, &profile, 0.0, horizon, horizon / 1000.0, params, sei)?;
    // remove accumulated rounding so the target is hit exactly
    s.q = q_target;
    s.l_sei = state.l_sei
        + (sei_thickness_at_capacity(q_target, params, sei) - sei_thickness_at_capacity(state.q, params, sei));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterSet;

    fn ps() -> ParameterSet {
        ParameterSet::reference()
    }

    #[test]
    fn growth_rate_basics() {
        let p = ps();
        let f = p.cell.faraday;
        assert_eq!(sei_growth_rate(0.0, &p.sei, f).unwrap(), 0.0);
        let a = sei_growth_rate(-1e-6, &p.sei, f).unwrap();
        let b = sei_growth_rate(-2e-6, &p.sei, f).unwrap();
        assert!(a > 0.0);
        assert!((b / a - 2.0).abs() < 1e-14);
        assert!(matches!(
            sei_growth_rate(1e-9, &p.sei, f),
            Err(Error::SignConvention(_))
        ));
        assert!(matches!(
            capacity_fade_rate(1e-9, &p.cell),
            Err(Error::SignConvention(_))
        ));
    }

    #[test]
    fn fade_rates_cross_identity() {
        let p = ps();
        for i_s in [-1e-7, -3.3e-6, -0.02] {
            let dl = sei_growth_rate(i_s, &p.sei, p.cell.faraday).unwrap();
            let dq = capacity_fade_rate(i_s, &p.cell).unwrap();
            let dq2 = capacity_rate_from_growth(dl, &p.cell, &p.sei);
            assert!((dq - dq2).abs() <= 1e-12 * dq.abs());
        }
    }

    #[test]
    fn porosity_formula() {
        let c = CellParameters::reference();
        assert!((modified_porosity(0.0, &c).unwrap() - (1.0 - c.eps_n - c.eps_n_f)).abs() < 1e-15);
        let h = 1e-9;
        let d = (modified_porosity(2e-7 + h, &c).unwrap() - modified_porosity(2e-7 - h, &c).unwrap()) / (2.0 * h);
        assert!((d + 3.0 * c.eps_n / c.r_n).abs() < 1e-6 * 3.0 * c.eps_n / c.r_n);
        let l_zero = c.r_n / 3.0 * ((1.0 - c.eps_n_f) / c.eps_n - 1.0);
        let e = 1.0 - c.eps_n * (1.0 + 3.0 * l_zero / c.r_n) - c.eps_n_f;
        assert!(e.abs() < 1e-12);
        assert!(matches!(
            modified_porosity(l_zero * 1.001, &c),
            Err(Error::PoreClogging(_))
        ));
    }

    #[test]
    fn power_fade_vanishes_at_start_of_life() {
        let p = ps();
        let r = power_fade_resistance(p.sei.q_0, &p.cell, &p.sei, [1200.0; 3], 298.15).unwrap();
        assert_eq!(r, 0.0);
        assert!(power_fade_resistance(p.sei.q_0 + 0.01, &p.cell, &p.sei, [1200.0; 3], 298.15).is_err());
        let sei_term = sei_resistance_delta(p.sei.q_0 - 0.1, &p.cell, &p.sei);
        assert!((sei_term - 0.1 * p.sei.theta_2(&p.cell)).abs() < 1e-15);
    }

    #[test]
    fn power_fade_is_monotone() {
        let p = ps();
        let mut prev = 0.0;
        for k in 1..=50 {
            let q = p.sei.q_0 - 0.005 * k as f64;
            let r = power_fade_resistance(q, &p.cell, &p.sei, [1200.0; 3], 298.15).unwrap();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn constant_profile_matches_closed_form() {
        let p = ps();
        let s0 = EspmState::at_soc(&p.cell, &p.sei, 10, 30, 0.5);
        let i_s = -2e-6;
        let prof = SideReactionProfile::constant(i_s).unwrap();
        let horizon = 3.0e7;
        let s = age_cell(&s0, &prof, 0.0, horizon, 60.0, &p.cell, &p.sei).unwrap();
        let l = p.sei.l_sei_0 - i_s * p.sei.m_sei * horizon / (2.0 * p.cell.faraday * p.sei.rho_sei);
        let q = p.sei.q_0 + i_s * p.cell.a_s(Electrode::Anode) * p.cell.area * p.cell.l_n * horizon / 3600.0;
        assert!((s.l_sei - l).abs() < 1e-12 * l);
        assert!((s.q - q).abs() < 1e-12 * q);
        assert_eq!(s.c_s_n, s0.c_s_n);
        // film and capacity stay on the algebraic relation
        assert!((sei_thickness_at_capacity(s.q, &p.cell, &p.sei) - s.l_sei).abs() < 1e-9 * s.l_sei);
    }

    #[test]
    fn zero_profile_leaves_state() {
        let p = ps();
        let s0 = EspmState::at_soc(&p.cell, &p.sei, 10, 30, 0.5);
        let s = age_cell(
            &s0,
            &SideReactionProfile::constant(0.0).unwrap(),
            0.0,
            1e6,
            100.0,
            &p.cell,
            &p.sei,
        )
        .unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn profile_parsing_and_lookup() {
        let pr = SideReactionProfile::parse("# t i_s\n0 -1e-6\n100, -2e-6\n", "x").unwrap();
        assert_eq!(pr.at(50.0), -1e-6);
        assert_eq!(pr.at(100.0), -2e-6);
        assert_eq!(pr.at(1e9), -2e-6);
        assert!(SideReactionProfile::parse("0 1e-6\n", "x").is_err());
        assert!(matches!(
            SideReactionProfile::parse("0 -1\n0 -1\n", "x"),
            Err(Error::NonMonotoneTime { line: 2, .. })
        ));
    }

    #[test]
    fn age_to_target_capacity() {
        let p = ps();
        let s0 = EspmState::at_soc(&p.cell, &p.sei, 10, 30, 0.5);
        let s = age_to_capacity(&s0, 1.84, 3.0e7, &p.cell, &p.sei).unwrap();
        assert_eq!(s.q, 1.84);
        assert!(s.l_sei > s0.l_sei);
        let a = AgingState::from_state(&s, &p.cell, &p.sei, [1200.0; 3], 298.15).unwrap();
        assert!(a.r_pf > 0.0 && a.eps_e_n_current < p.cell.eps_e_n);
    }
}
