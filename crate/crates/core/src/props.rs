//! Temperature and concentration dependent transport properties.
//!
//! The electrolyte correlations are empirical fits that take the salt concentration
//! in mol/L and return cm^2/s (diffusivity) and mS/cm (conductivity). Everything
//! outside this module works in SI; conversions happen here only.

use crate::error::{Error, Result};

/// mol/m^3 to mol/L.
pub fn to_mol_per_litre(c: f64) -> f64 {
    c * 1e-3
}

/// cm^2/s to m^2/s.
pub fn cm2_per_s_to_si(d: f64) -> f64 {
    d * 1e-4
}

/// mS/cm to S/m.
pub fn ms_per_cm_to_si(k: f64) -> f64 {
    k * 0.1
}

/// `ref_value * exp(-Ea/Rg * (1/T - 1/T_ref))`.
pub fn arrhenius_scale(ref_value: f64, ea: f64, t: f64, t_ref: f64, rg: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) || !(t_ref > 0.0 && t_ref.is_finite()) {
        return Err(Error::Domain(format!(
            "temperatures must be positive (T = {t}, T_ref = {t_ref})"
        )));
    }
    Ok(ref_value * (-ea / rg * (1.0 / t - 1.0 / t_ref)).exp())
}

fn check_ce(c_e: f64) -> Result<()> {
    if c_e > 0.0 && c_e.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("electrolyte concentration {c_e} must be > 0")))
    }
}

/// Electrolyte diffusivity (m^2/s) for c_e in mol/m^3.
pub fn electrolyte_diffusivity(c_e: f64, t: f64) -> Result<f64> {
    check_ce(c_e)?;
    let c = to_mol_per_litre(c_e);
    let denom = t - (229.0 + c);
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "temperature {t} K is below the diffusivity correlation's pole"
        )));
    }
    let exponent = 4.43 + 54.0 / denom + 0.22 * c;
    Ok(cm2_per_s_to_si(10f64.powf(-exponent)))
}

/// Electrolyte ionic conductivity (S/m) for c_e in mol/m^3.
///
/// The quadratic-in-T coefficient of the linear-in-c term is +2.8e-5.
pub fn electrolyte_conductivity(c_e: f64, t: f64) -> Result<f64> {
    check_ce(c_e)?;
    let c = to_mol_per_litre(c_e);
    let inner = (-10.5 + 0.074 * t - 6.96e-5 * t * t)
        + c * (0.668 - 0.0178 * t + 2.8e-5 * t * t)
        + c * c * (0.494 - 8.86e-4 * t);
    let k = ms_per_cm_to_si(c * inner * inner);
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(Error::Domain(format!(
            "electrolyte conductivity vanished at c_e = {c_e}, T = {t}"
        )))
    }
}

/// Diffusional conductivity factor (dimensionless) for c_e in mol/m^3.
pub fn diffusional_conductivity(c_e: f64, t: f64) -> Result<f64> {
    check_ce(c_e)?;
    let c = to_mol_per_litre(c_e);
    Ok(0.601 - 0.24 * c.sqrt() + 0.982 * (1.0 - 0.0052 * (t - 293.0)) * c.powf(1.5))
}

/// Bruggeman effective value `x * eps^1.5`.
pub fn bruggeman(x: f64, eps: f64) -> f64 {
    x * eps.powf(1.5)
}
