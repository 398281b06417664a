use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::CellParameters;

/// One of the 18 identifiable cell constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamId {
    CsNMax,
    CsPMax,
    DsN,
    DsP,
    RN,
    RP,
    Area,
    LN,
    LP,
    EpsN,
    EpsP,
    KN,
    KP,
    RL,
    LS,
    EpsES,
    EpsNF,
    EpsPF,
}

impl ParamId {
    pub const ALL: [ParamId; 18] = [
        ParamId::CsNMax,
        ParamId::CsPMax,
        ParamId::DsN,
        ParamId::DsP,
        ParamId::RN,
        ParamId::RP,
        ParamId::Area,
        ParamId::LN,
        ParamId::LP,
        ParamId::EpsN,
        ParamId::EpsP,
        ParamId::KN,
        ParamId::KP,
        ParamId::RL,
        ParamId::LS,
        ParamId::EpsES,
        ParamId::EpsNF,
        ParamId::EpsPF,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamId::CsNMax => "c_s_n_max",
            ParamId::CsPMax => "c_s_p_max",
            ParamId::DsN => "D_s_n",
            ParamId::DsP => "D_s_p",
            ParamId::RN => "R_n",
            ParamId::RP => "R_p",
            ParamId::Area => "A",
            ParamId::LN => "L_n",
            ParamId::LP => "L_p",
            ParamId::EpsN => "eps_n",
            ParamId::EpsP => "eps_p",
            ParamId::KN => "k_n",
            ParamId::KP => "k_p",
            ParamId::RL => "R_l",
            ParamId::LS => "L_s",
            ParamId::EpsES => "eps_e_s",
            ParamId::EpsNF => "eps_n_f",
            ParamId::EpsPF => "eps_p_f",
        }
    }

    /// Value in a cell description. Rate constants and diffusivities are the
    /// reference-temperature values.
    pub fn get(self, p: &CellParameters) -> f64 {
        match self {
            ParamId::CsNMax => p.c_s_n_max,
            ParamId::CsPMax => p.c_s_p_max,
            ParamId::DsN => p.d_s_n_ref,
            ParamId::DsP => p.d_s_p_ref,
            ParamId::RN => p.r_n,
            ParamId::RP => p.r_p,
            ParamId::Area => p.area,
            ParamId::LN => p.l_n,
            ParamId::LP => p.l_p,
            ParamId::EpsN => p.eps_n,
            ParamId::EpsP => p.eps_p,
            ParamId::KN => p.k_n_ref,
            ParamId::KP => p.k_p_ref,
            ParamId::RL => p.r_l,
            ParamId::LS => p.l_s,
            ParamId::EpsES => p.eps_e_s,
            ParamId::EpsNF => p.eps_n_f,
            ParamId::EpsPF => p.eps_p_f,
        }
    }

    pub fn set(self, p: &mut CellParameters, v: f64) {
        let slot = match self {
            ParamId::CsNMax => &mut p.c_s_n_max,
            ParamId::CsPMax => &mut p.c_s_p_max,
            ParamId::DsN => &mut p.d_s_n_ref,
            ParamId::DsP => &mut p.d_s_p_ref,
            ParamId::RN => &mut p.r_n,
            ParamId::RP => &mut p.r_p,
            ParamId::Area => &mut p.area,
            ParamId::LN => &mut p.l_n,
            ParamId::LP => &mut p.l_p,
            ParamId::EpsN => &mut p.eps_n,
            ParamId::EpsP => &mut p.eps_p,
            ParamId::KN => &mut p.k_n_ref,
            ParamId::KP => &mut p.k_p_ref,
            ParamId::RL => &mut p.r_l,
            ParamId::LS => &mut p.l_s,
            ParamId::EpsES => &mut p.eps_e_s,
            ParamId::EpsNF => &mut p.eps_n_f,
            ParamId::EpsPF => &mut p.eps_p_f,
        };
        *slot = v;
    }

    fn is_volume_fraction(self) -> bool {
        matches!(
            self,
            ParamId::EpsN | ParamId::EpsP | ParamId::EpsES | ParamId::EpsNF | ParamId::EpsPF
        )
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ParamId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown parameter '{s}'")))
    }
}

impl TryFrom<String> for ParamId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ParamId> for String {
    fn from(p: ParamId) -> String {
        p.name().to_string()
    }
}

/// Parse a comma separated list such as `A,eps_n,R_n`.
pub fn parse_param_list(s: &str) -> Result<Vec<ParamId>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    pub nominal: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
}

/// The 18 parameters of a cell with bounds and a free/fixed mask. Everything not in
/// the vector (activation energies, windows, electrode porosities, ...) comes from
/// `base` unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    base: CellParameters,
    entries: [Entry; 18],
}

impl ParameterVector {
    /// All parameters fixed at their values in `base`. Default bounds are half to
    /// one and a half times nominal; volume fractions are further capped so the
    /// electrode / separator volume cannot exceed one with everything else held.
    pub fn new(base: CellParameters) -> Result<Self> {
        base.validate()?;
        let entries = ParamId::ALL.map(|id| {
            let v = id.get(&base);
            let mut upper = 1.5 * v;
            if id.is_volume_fraction() {
                upper = upper.min(fraction_cap(&base, id));
            }
            Entry {
                value: v,
                nominal: v,
                lower: 0.5 * v,
                upper,
                free: false,
            }
        });
        Ok(Self { base, entries })
    }

    pub fn reference() -> Self {
        Self::new(CellParameters::reference()).expect("reference cell is valid")
    }

    pub fn base(&self) -> &CellParameters {
        &self.base
    }

    pub fn entry(&self, id: ParamId) -> &Entry {
        &self.entries[id.index()]
    }

    pub fn value(&self, id: ParamId) -> f64 {
        self.entries[id.index()].value
    }

    pub fn is_free(&self, id: ParamId) -> bool {
        self.entries[id.index()].free
    }

    pub fn free_ids(&self) -> Vec<ParamId> {
        ParamId::ALL.into_iter().filter(|p| self.is_free(*p)).collect()
    }

    /// Free exactly the listed parameters; the rest go back to nominal.
    pub fn with_free(mut self, free: &[ParamId]) -> Self {
        for id in ParamId::ALL {
            let e = &mut self.entries[id.index()];
            e.free = free.contains(&id);
            if !e.free {
                e.value = e.nominal;
            }
        }
        self
    }

    pub fn set_bounds(&mut self, id: ParamId, lower: f64, upper: f64) -> Result<()> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Config(format!(
                "{id}: bounds [{lower}, {upper}] are not a finite interval"
            )));
        }
        let e = &mut self.entries[id.index()];
        e.lower = lower;
        e.upper = upper;
        Ok(())
    }

    /// Set a free parameter. Out-of-bounds values and fixed entries are errors.
    pub fn set(&mut self, id: ParamId, v: f64) -> Result<()> {
        let e = &mut self.entries[id.index()];
        if !e.free {
            return Err(Error::Config(format!("{id} is fixed")));
        }
        if !(v >= e.lower && v <= e.upper) {
            return Err(Error::Domain(format!("{id} = {v} outside [{}, {}]", e.lower, e.upper)));
        }
        e.value = v;
        Ok(())
    }

    /// Set a free parameter, projecting onto its bounds. Returns the stored value.
    pub fn set_clamped(&mut self, id: ParamId, v: f64) -> Result<f64> {
        let e = self.entries[id.index()];
        let v = v.clamp(e.lower, e.upper);
        self.set(id, v)?;
        Ok(v)
    }

    /// Free values in `free_ids` order.
    pub fn free_values(&self) -> Vec<f64> {
        self.free_ids().iter().map(|p| self.value(*p)).collect()
    }

    /// Bounds of the free entries in `free_ids` order.
    pub fn free_bounds(&self) -> Vec<(f64, f64)> {
        self.free_ids()
            .iter()
            .map(|p| {
                let e = self.entry(*p);
                (e.lower, e.upper)
            })
            .collect()
    }

    /// Copy with the free entries replaced (projected onto bounds).
    pub fn with_free_values(&self, x: &[f64]) -> Result<Self> {
        let ids = self.free_ids();
        if ids.len() != x.len() {
            return Err(Error::Config(format!(
                "{} free parameters, got {} values",
                ids.len(),
                x.len()
            )));
        }
        let mut out = self.clone();
        for (id, v) in ids.into_iter().zip(x) {
            out.set_clamped(id, *v)?;
        }
        Ok(out)
    }

    /// Cell description with every entry applied. Not validated.
    pub fn to_cell(&self) -> CellParameters {
        let mut p = self.base.clone();
        for id in ParamId::ALL {
            id.set(&mut p, self.value(id));
        }
        p
    }

    /// Bound and mask consistency.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for id in ParamId::ALL {
            let e = self.entry(id);
            if !(e.lower.is_finite() && e.upper.is_finite() && e.lower < e.upper) {
                v.push(format!(
                    "{id}: bounds [{}, {}] are not a finite interval",
                    e.lower, e.upper
                ));
            }
            if !e.free && e.value != e.nominal {
                v.push(format!("{id} is fixed but holds {} instead of {}", e.value, e.nominal));
            }
        }
        v
    }
}

/// Largest value a volume fraction can take with its neighbours held.
fn fraction_cap(p: &CellParameters, id: ParamId) -> f64 {
    match id {
        ParamId::EpsN => 1.0 - p.eps_e_n - p.eps_n_f,
        ParamId::EpsNF => 1.0 - p.eps_e_n - p.eps_n,
        ParamId::EpsP => 1.0 - p.eps_e_p - p.eps_p_f,
        ParamId::EpsPF => 1.0 - p.eps_e_p - p.eps_p,
        _ => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ParamId::ALL {
            assert_eq!(id.name().parse::<ParamId>().unwrap(), id);
            assert_eq!(ParamId::ALL[id.index()], id);
        }
        assert!("nope".parse::<ParamId>().is_err());
    }

    #[test]
    fn set_get_round_trip() {
        let mut p = CellParameters::reference();
        for (k, id) in ParamId::ALL.into_iter().enumerate() {
            id.set(&mut p, k as f64 + 0.5);
        }
        for (k, id) in ParamId::ALL.into_iter().enumerate() {
            assert_eq!(id.get(&p), k as f64 + 0.5);
        }
    }

    #[test]
    fn reference_vector_is_consistent() {
        let v = ParameterVector::reference();
        assert!(v.violations().is_empty());
        assert_eq!(v.to_cell(), CellParameters::reference());
        assert!(v.free_ids().is_empty());
        assert!(v.entry(ParamId::EpsN).upper <= 1.0 - 0.3282 - 0.07 + 1e-15);
    }

    #[test]
    fn fixed_entries_refuse_writes() {
        let mut v = ParameterVector::reference().with_free(&[ParamId::Area]);
        assert!(v.set(ParamId::RL, 0.03).is_err());
        v.set(ParamId::Area, 0.13).unwrap();
        assert!(v.set(ParamId::Area, 10.0).is_err());
        let v = v.with_free(&[]);
        assert_eq!(v.value(ParamId::Area), v.entry(ParamId::Area).nominal);
    }
}
