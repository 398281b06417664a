//! Electrolyte transport across anode, separator and cathode.
//!
//! Cell-centred finite volumes. Faces carry the harmonic-mean conductance of the two
//! neighbouring cells, which keeps the flux continuous across the region interfaces.
//! The outer faces are closed. Source terms are uniform per region and sum to zero,
//! so the stored amount of salt is constant for any current.

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::params::CellParameters;
use crate::props::{bruggeman, electrolyte_diffusivity};

use super::config::Integrator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Anode,
    Separator,
    Cathode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrolyteGrid {
    pub dx: Vec<f64>,
    pub eps: Vec<f64>,
    pub region: Vec<Region>,
    /// Cells per region (anode, separator, cathode).
    pub counts: [usize; 3],
    pub lengths: [f64; 3],
    /// Source per unit volume per ampere in each cell (mol / (m^3 s A)).
    source: Vec<f64>,
}

/// Split `m` cells across three lengths, at least two per region, largest remainder.
fn allocate(m: usize, lengths: [f64; 3]) -> [usize; 3] {
    let total: f64 = lengths.iter().sum();
    let spare = m - 6;
    let ideal: Vec<f64> = lengths.iter().map(|l| spare as f64 * l / total).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = ideal[i].floor() as usize;
    }
    let mut left = spare - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.map(|c| c + 2)
}

impl ElectrolyteGrid {
    pub fn new(params: &CellParameters, m: usize) -> Result<Self> {
        if m < 6 {
            return Err(Error::Config(format!("need at least 6 electrolyte volumes, got {m}")));
        }
        let lengths = [params.l_n, params.l_s, params.l_p];
        let counts = allocate(m, lengths);
        let eps_r = [params.eps_e_n, params.eps_e_s, params.eps_e_p];
        let regions = [Region::Anode, Region::Separator, Region::Cathode];
        let k = 1.0 - params.t_plus;
        let src = [
            k / (params.faraday * params.area * params.l_n),
            0.0,
            -k / (params.faraday * params.area * params.l_p),
        ];
        let mut dx = Vec::with_capacity(m);
        let mut eps = Vec::with_capacity(m);
        let mut region = Vec::with_capacity(m);
        let mut source = Vec::with_capacity(m);
        for r in 0..3 {
            for _ in 0..counts[r] {
                dx.push(lengths[r] / counts[r] as f64);
                eps.push(eps_r[r]);
                region.push(regions[r]);
                source.push(src[r]);
            }
        }
        Ok(Self {
            dx,
            eps,
            region,
            counts,
            lengths,
            source,
        })
    }

    pub fn m(&self) -> usize {
        self.dx.len()
    }

    /// Cell-centre positions measured from the anode current collector.
    pub fn centres(&self) -> Vec<f64> {
        let mut x = 0.0;
        self.dx
            .iter()
            .map(|d| {
                let c = x + 0.5 * d;
                x += d;
                c
            })
            .collect()
    }

    /// Salt per unit area (mol/m^2).
    pub fn inventory(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.eps.iter().zip(&self.dx))
            .map(|(c, (e, d))| c * e * d)
            .sum()
    }

    /// Length-weighted mean concentration per region.
    pub fn region_means(&self, c: &[f64]) -> [f64; 3] {
        let mut s = [0.0; 3];
        for i in 0..self.m() {
            let r = self.region[i] as usize;
            s[r] += c[i] * self.dx[i];
        }
        [s[0] / self.lengths[0], s[1] / self.lengths[1], s[2] / self.lengths[2]]
    }

    pub fn mean(&self, c: &[f64]) -> f64 {
        let total: f64 = self.lengths.iter().sum();
        c.iter().zip(&self.dx).map(|(c, d)| c * d).sum::<f64>() / total
    }

    /// Face conductances (m/s) between cells i and i+1, at the current concentrations.
    pub fn conductances(&self, c: &[f64], t: f64) -> Result<Vec<f64>> {
        let m = self.m();
        let mut d_eff = Vec::with_capacity(m);
        for i in 0..m {
            d_eff.push(bruggeman(electrolyte_diffusivity(c[i], t)?, self.eps[i]));
        }
        Ok((0..m - 1)
            .map(|i| 1.0 / (self.dx[i] / (2.0 * d_eff[i]) + self.dx[i + 1] / (2.0 * d_eff[i + 1])))
            .collect())
    }

    /// Largest stable explicit step at the given state.
    pub fn explicit_limit(&self, c: &[f64], t: f64) -> Result<f64> {
        let g = self.conductances(c, t)?;
        let m = self.m();
        let mut lim = f64::INFINITY;
        for i in 0..m {
            let gl = if i > 0 { g[i - 1] } else { 0.0 };
            let gr = if i + 1 < m { g[i] } else { 0.0 };
            lim = lim.min(self.eps[i] * self.dx[i] / (gl + gr));
        }
        Ok(lim)
    }

    /// One step with the diffusivity lagged at the start-of-step concentrations.
    pub fn step(&self, c: &mut [f64], current: f64, t: f64, dt: f64, integrator: Integrator) -> Result<()> {
        let m = self.m();
        let g = self.conductances(c, t)?;
        match integrator {
            Integrator::ExplicitEuler => {
                let old = c.to_vec();
                for i in 0..m {
                    let mut flux = self.source[i] * current * self.dx[i];
                    if i > 0 {
                        flux += g[i - 1] * (old[i - 1] - old[i]);
                    }
                    if i + 1 < m {
                        flux += g[i] * (old[i + 1] - old[i]);
                    }
                    c[i] = old[i] + dt * flux / (self.eps[i] * self.dx[i]);
                }
            }
            Integrator::ImplicitEuler => {
                let mut lower = vec![0.0; m];
                let mut diag = vec![0.0; m];
                let mut upper = vec![0.0; m];
                for i in 0..m {
                    let cap = self.eps[i] * self.dx[i] / dt;
                    diag[i] = cap;
                    if i > 0 {
                        lower[i] = -g[i - 1];
                        diag[i] += g[i - 1];
                    }
                    if i + 1 < m {
                        upper[i] = -g[i];
                        diag[i] += g[i];
                    }
                    c[i] = cap * c[i] + self.source[i] * current * self.dx[i];
                }
                if !solve_tridiagonal(&lower, &diag, &upper, c) {
                    return Err(Error::Integration("singular electrolyte system".into()));
                }
            }
        }
        if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Integration(format!(
                "electrolyte concentration {v} at volume {i} is not positive"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_respects_minimum_and_total() {
        for m in 6..60 {
            let c = allocate(m, [3.9e-5, 2.5e-5, 4.0e-5]);
            assert_eq!(c.iter().sum::<usize>(), m);
            assert!(c.iter().all(|&k| k >= 2));
        }
        assert_eq!(allocate(6, [1.0, 100.0, 1.0]), [2, 2, 2]);
    }

    #[test]
    fn grid_covers_cell() {
        let p = CellParameters::reference();
        let g = ElectrolyteGrid::new(&p, 30).unwrap();
        let total: f64 = g.dx.iter().sum();
        assert!((total - p.total_thickness()).abs() < 1e-18);
        assert_eq!(g.m(), 30);
        assert!(ElectrolyteGrid::new(&p, 5).is_err());
    }

    #[test]
    fn sources_cancel() {
        let p = CellParameters::reference();
        let g = ElectrolyteGrid::new(&p, 30).unwrap();
        let s: f64 = g.source.iter().zip(&g.dx).map(|(s, d)| s * d).sum();
        let scale = g.source[0] * p.l_n;
        assert!(s.abs() < 1e-13 * scale);
    }
}
