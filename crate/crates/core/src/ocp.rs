//! Tabulated open-circuit potentials with shape-preserving cubic interpolation.
//!
//! Tables are three whitespace-separated columns: stoichiometry, U (V) at the
//! reference temperature, and the entropic coefficient dU/dT (V/K). Lines starting
//! with `#` are comments.

use std::path::Path;

use crate::error::{Error, Result};
use crate::params::Electrode;

const CATHODE_TABLE: &str = include_str!("../data/ocp_cathode_nmc.txt");
const ANODE_TABLE: &str = include_str!("../data/ocp_anode_graphite.txt");

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Config("interpolant needs >= 2 matching points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("interpolation grid must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, xq: f64) -> usize {
        let n = self.x.len();
        self.x.partition_point(|&v| v <= xq).clamp(1, n - 1) - 1
    }

    /// Value and first derivative. Outside the grid the end cubics are continued.
    pub fn eval_with_slope(&self, xq: f64) -> (f64, f64) {
        let k = self.segment(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1;
        let dv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        (v, dv)
    }

    pub fn eval(&self, xq: f64) -> f64 {
        self.eval_with_slope(xq).0
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}

/// One electrode's OCP curve.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpCurve {
    u: Pchip,
    dudt: Pchip,
}

/// Result of an OCP slope band check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeBand {
    pub min_slope: f64,
    pub max_slope: f64,
    pub within: bool,
}

impl OcpCurve {
    pub fn new(theta: Vec<f64>, u: Vec<f64>, dudt: Vec<f64>) -> Result<Self> {
        Ok(Self {
            u: Pchip::new(theta.clone(), u)?,
            dudt: Pchip::new(theta, dudt)?,
        })
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cols: [Vec<f64>; 3] = Default::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 columns, found {}", fields.len())));
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(format!("cannot parse '{f}' as a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("non-finite value '{f}'")));
                }
                cols[c].push(v);
            }
            let th = &cols[0];
            if th.len() >= 2 && th[th.len() - 1] <= th[th.len() - 2] {
                return Err(parse_err("stoichiometry grid must be strictly increasing".into()));
            }
            let last = th[th.len() - 1];
            if !(0.0..=1.0).contains(&last) {
                return Err(parse_err(format!("stoichiometry {last} outside [0, 1]")));
            }
        }
        let [theta, u, dudt] = cols;
        if theta.len() < 3 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 0,
                message: "table needs at least 3 rows".into(),
            });
        }
        Self::new(theta, u, dudt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn range(&self) -> (f64, f64) {
        self.u.domain()
    }

    fn check(&self, theta: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if theta >= lo && theta <= hi {
            Ok(())
        } else {
            Err(Error::Extrapolation { theta, lo, hi })
        }
    }

    /// U(theta, T) with the linear entropic correction about `t_ref`.
    pub fn potential(&self, theta: f64, t: f64, t_ref: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.potential_unchecked(theta, t, t_ref))
    }

    /// As [`potential`](Self::potential) but continues the end cubics outside the table.
    pub fn potential_unchecked(&self, theta: f64, t: f64, t_ref: f64) -> f64 {
        self.u.eval(theta) + self.dudt.eval(theta) * (t - t_ref)
    }

    /// dU/dtheta at the reference temperature (V per unit stoichiometry).
    pub fn slope(&self, theta: f64) -> f64 {
        self.u.eval_with_slope(theta).1
    }

    pub fn entropic(&self, theta: f64) -> f64 {
        self.dudt.eval(theta)
    }

    /// Sample dU/dtheta densely on `[a, b]` and compare against `[-gamma_1, -gamma_2]`.
    pub fn slope_band(&self, a: f64, b: f64, gamma_1: f64, gamma_2: f64) -> SlopeBand {
        let n = 2000;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n {
            let s = self.slope(a + (b - a) * i as f64 / n as f64);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        SlopeBand {
            min_slope: lo,
            max_slope: hi,
            within: lo >= -gamma_1 && hi <= -gamma_2,
        }
    }
}

/// OCP curves for both electrodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpTable {
    pub cathode: OcpCurve,
    pub anode: OcpCurve,
}

impl OcpTable {
    /// The shipped NMC / graphite tables.
    pub fn reference() -> Self {
        Self {
            cathode: OcpCurve::parse(CATHODE_TABLE, "<ocp_cathode_nmc.txt>").expect("shipped table"),
            anode: OcpCurve::parse(ANODE_TABLE, "<ocp_anode_graphite.txt>").expect("shipped table"),
        }
    }

    pub fn load(cathode: impl AsRef<Path>, anode: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            cathode: OcpCurve::load(cathode)?,
            anode: OcpCurve::load(anode)?,
        })
    }

    pub fn curve(&self, e: Electrode) -> &OcpCurve {
        match e {
            Electrode::Anode => &self.anode,
            Electrode::Cathode => &self.cathode,
        }
    }
}
