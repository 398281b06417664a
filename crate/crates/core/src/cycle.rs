//! Time-stamped current/temperature inputs.
//!
//! CSV layout: header `t_s,current_A,temperature_K` with an optional `voltage_V`
//! column. Positive current is discharge everywhere in this crate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardware plausibility bound on |I| used by the loader (A).
pub const DEFAULT_CURRENT_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CycleMeta {
    pub name: String,
    pub source: String,
    pub c_rate_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub temperature: Vec<f64>,
    pub voltage: Option<Vec<f64>>,
    pub meta: CycleMeta,
}

impl DriveCycle {
    pub fn new(t: Vec<f64>, current: Vec<f64>, temperature: Vec<f64>) -> Result<Self> {
        let c = Self {
            t,
            current,
            temperature,
            voltage: None,
            meta: CycleMeta::default(),
        };
        c.validate(DEFAULT_CURRENT_LIMIT)?;
        Ok(c)
    }

    /// Constant current and temperature sampled every `dt` seconds for `duration` s.
    pub fn constant(current: f64, temperature: f64, duration: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && duration >= 0.0) {
            return Err(Error::Config(format!(
                "bad constant cycle: dt {dt}, duration {duration}"
            )));
        }
        let n = (duration / dt).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let mut c = Self::new(t, vec![current; n], vec![temperature; n])?;
        c.meta.name = format!("constant {current} A");
        c.meta.source = "generated".into();
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Step length following sample k (zero for the last sample).
    pub fn dt_after(&self, k: usize) -> f64 {
        if k + 1 < self.t.len() {
            self.t[k + 1] - self.t[k]
        } else {
            0.0
        }
    }

    pub fn validate(&self, current_limit: f64) -> Result<()> {
        let n = self.t.len();
        if n == 0 {
            return Err(Error::Domain("drive cycle is empty".into()));
        }
        if self.current.len() != n || self.temperature.len() != n || self.voltage.as_ref().is_some_and(|v| v.len() != n)
        {
            return Err(Error::Domain("drive cycle channels have different lengths".into()));
        }
        for k in 0..n {
            let line = k + 2;
            let chans = [
                ("t_s", self.t[k]),
                ("current_A", self.current[k]),
                ("temperature_K", self.temperature[k]),
            ];
            for (name, v) in chans {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        path: self.meta.name.clone(),
                        line,
                        column: name.into(),
                    });
                }
            }
            if k > 0 && self.t[k] <= self.t[k - 1] {
                return Err(Error::NonMonotoneTime {
                    path: self.meta.name.clone(),
                    line,
                    t: self.t[k],
                });
            }
            if self.current[k].abs() > current_limit {
                return Err(Error::Domain(format!(
                    "current {} A at t = {} exceeds the {} A plausibility bound",
                    self.current[k], self.t[k], current_limit
                )));
            }
            if self.temperature[k] <= 0.0 {
                return Err(Error::Domain(format!(
                    "temperature {} K at t = {}",
                    self.temperature[k], self.t[k]
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_limit(path, DEFAULT_CURRENT_LIMIT)
    }

    pub fn load_with_limit(path: impl AsRef<Path>, current_limit: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text, &path.display().to_string(), current_limit)?;
        c.meta.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        c.meta.source = path.display().to_string();
        Ok(c)
    }

    pub fn parse(text: &str, origin: &str, current_limit: f64) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (it, ii, itemp) = match (col("t_s"), col("current_A"), col("temperature_K")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(perr(
                    1,
                    format!(
                        "header must contain t_s,current_A,temperature_K (got '{}')",
                        headers.iter().collect::<Vec<_>>().join(",")
                    ),
                ))
            }
        };
        let iv = col("voltage_V");
        let mut t = Vec::new();
        let mut current = Vec::new();
        let mut temperature = Vec::new();
        let mut voltage = iv.map(|_| Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                perr(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |i: usize, name: &str| -> Result<f64> {
                let s = rec
                    .get(i)
                    .ok_or_else(|| perr(line, format!("missing column '{name}'")))?;
                let v: f64 = s
                    .parse()
                    .map_err(|_| perr(line, format!("cannot parse '{s}' in column '{name}'")))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        path: origin.to_string(),
                        line,
                        column: name.to_string(),
                    });
                }
                Ok(v)
            };
            let tk = field(it, "t_s")?;
            if let Some(&prev) = t.last() {
                if tk <= prev {
                    return Err(Error::NonMonotoneTime {
                        path: origin.to_string(),
                        line,
                        t: tk,
                    });
                }
            }
            t.push(tk);
            current.push(field(ii, "current_A")?);
            temperature.push(field(itemp, "temperature_K")?);
            if let (Some(i), Some(v)) = (iv, voltage.as_mut()) {
                v.push(field(i, "voltage_V")?);
            }
        }
        let c = Self {
            t,
            current,
            temperature,
            voltage,
            meta: CycleMeta {
                name: origin.to_string(),
                source: origin.to_string(),
                c_rate_scale: 0.0,
            },
        };
        c.validate(current_limit)?;
        Ok(c)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        s.push_str("t_s,current_A,temperature_K");
        if self.voltage.is_some() {
            s.push_str(",voltage_V");
        }
        s.push('\n');
        for k in 0..self.len() {
            s.push_str(&format!("{},{},{}", self.t[k], self.current[k], self.temperature[k]));
            if let Some(v) = &self.voltage {
                s.push_str(&format!(",{}", v[k]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = format!("# {} ({})\n", self.meta.name, self.meta.source);
        text.push_str(&self.to_csv_string());
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Charge moved over the cycle in Ah, rectangular rule on the sample-and-hold input.
    pub fn charge_ah(&self) -> f64 {
        (0..self.len()).map(|k| self.current[k] * self.dt_after(k)).sum::<f64>() / 3600.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut c = self.clone();
        for i in c.current.iter_mut() {
            *i *= factor;
        }
        c.meta.c_rate_scale *= factor;
        c
    }
}
