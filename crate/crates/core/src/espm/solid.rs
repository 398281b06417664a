//! Radial diffusion in a spherical particle on nodes r_i = i * dr, i = 1..N, dr = R/N.
//!
//! Row i of the bare operator is `[(1 - 1/i), -2, (1 + 1/i)] / dr^2`; the first row
//! drops the centre node and the last row closes with a ghost node carrying the
//! surface flux. The input vector has a single nonzero last entry
//! `+-2 (N+1) / (N dr F a_s A L)`: positive for the cathode, negative for the anode,
//! so positive (discharge) current lithiates the cathode and delithiates the anode.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::params::{CellParameters, Electrode};

use super::config::{DiscretizationConfig, Integrator};

/// Tridiagonal stencil plus input coefficient for one electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidOperator {
    pub electrode: Electrode,
    pub dr: f64,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Last entry of the input vector (mol / (m^3 s A)), already signed.
    pub b_last: f64,
    weights: Vec<f64>,
    weight_sum: f64,
}

impl SolidOperator {
    pub fn new(params: &CellParameters, n: usize, electrode: Electrode) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("need at least 3 radial nodes, got {n}")));
        }
        let g = params.electrode(electrode);
        let dr = g.radius / n as f64;
        let s = 1.0 / (dr * dr);
        let mut lower = vec![0.0; n];
        let mut diag = vec![-2.0 * s; n];
        let mut upper = vec![0.0; n];
        upper[0] = 2.0 * s;
        for i in 1..n - 1 {
            let k = (i + 1) as f64;
            lower[i] = (1.0 - 1.0 / k) * s;
            upper[i] = (1.0 + 1.0 / k) * s;
        }
        lower[n - 1] = 2.0 * s;
        diag[n - 1] = -2.0 * s;
        let sign = match electrode {
            Electrode::Cathode => 1.0,
            Electrode::Anode => -1.0,
        };
        let nf = n as f64;
        let b_last = sign * 2.0 * (nf + 1.0) / (nf * dr * params.faraday * g.a_s() * params.area * g.thickness);
        // Left null vector of the stencil: these weights make the discrete volume
        // average change only through the boundary term.
        let mut weights: Vec<f64> = (1..=n).map(|i| (i * i) as f64).collect();
        weights[n - 1] = nf * (nf - 1.0) / 2.0;
        let weight_sum = (nf * nf * nf - nf) / 3.0;
        Ok(Self {
            electrode,
            dr,
            lower,
            diag,
            upper,
            b_last,
            weights,
            weight_sum,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Dense copies of the bare operator and the input vector.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i > 0 {
                a[(i, i - 1)] = self.lower[i];
            }
            if i + 1 < n {
                a[(i, i + 1)] = self.upper[i];
            }
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = self.b_last;
        (a, b)
    }

    /// `(A c)_i` for the bare operator.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * c[i];
                if i > 0 {
                    v += self.lower[i] * c[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * c[i + 1];
                }
                v
            })
            .collect()
    }

    /// Surface row of the bare operator applied to `c`.
    pub fn surface_row(&self, c: &[f64]) -> f64 {
        let n = self.n();
        self.lower[n - 1] * c[n - 2] + self.diag[n - 1] * c[n - 1]
    }

    /// Discrete volume average.
    pub fn bulk(&self, c: &[f64]) -> f64 {
        self.weights.iter().zip(c).map(|(w, x)| w * x).sum::<f64>() / self.weight_sum
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Advance `dc/dt = d * A c + B u + extra` by one step. `extra` is an optional
    /// per-node forcing (used by the observer for output injection).
    pub fn step(
        &self,
        c: &mut [f64],
        d: f64,
        current: f64,
        dt: f64,
        integrator: Integrator,
        extra: Option<&[f64]>,
    ) -> Result<()> {
        let n = self.n();
        match integrator {
            Integrator::ExplicitEuler => {
                let ac = self.apply(c);
                for i in 0..n {
                    c[i] += dt * d * ac[i];
                }
                c[n - 1] += dt * self.b_last * current;
                if let Some(e) = extra {
                    for i in 0..n {
                        c[i] += dt * e[i];
                    }
                }
            }
            Integrator::ImplicitEuler => {
                let k = dt * d;
                let lower: Vec<f64> = self.lower.iter().map(|v| -k * v).collect();
                let upper: Vec<f64> = self.upper.iter().map(|v| -k * v).collect();
                let diag: Vec<f64> = self.diag.iter().map(|v| 1.0 - k * v).collect();
                c[n - 1] += dt * self.b_last * current;
                if let Some(e) = extra {
                    for i in 0..n {
                        c[i] += dt * e[i];
                    }
                }
                if !solve_tridiagonal(&lower, &diag, &upper, c) {
                    return Err(Error::Integration("singular solid-phase system".into()));
                }
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!(
                "non-finite {:?} concentration",
                self.electrode
            )));
        }
        Ok(())
    }
}

/// Bare stencil and signed input vector for one electrode, as dense matrices.
pub fn build_solid_system(
    params: &CellParameters,
    cfg: &DiscretizationConfig,
    electrode: Electrode,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    Ok(SolidOperator::new(params, cfg.n, electrode)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> CellParameters {
        CellParameters::reference()
    }

    #[test]
    fn n3_first_row() {
        let cfg = DiscretizationConfig::default().with_n(3);
        let (a, _) = build_solid_system(&p(), &cfg, Electrode::Cathode).unwrap();
        let dr = p().r_p / 3.0;
        let s = 1.0 / (dr * dr);
        assert_eq!(
            a.row(0).iter().copied().collect::<Vec<_>>(),
            vec![-2.0 * s, 2.0 * s, 0.0]
        );
        assert_eq!(
            a.row(1).iter().copied().collect::<Vec<_>>(),
            vec![0.5 * s, -2.0 * s, 1.5 * s]
        );
        assert_eq!(
            a.row(2).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 2.0 * s, -2.0 * s]
        );
    }

    #[test]
    fn uniform_vector_in_null_space() {
        let cfg = DiscretizationConfig::default().with_n(5);
        for e in [Electrode::Anode, Electrode::Cathode] {
            let (a, _) = build_solid_system(&p(), &cfg, e).unwrap();
            let r = &a * DVector::from_element(5, 1234.5);
            for v in r.iter() {
                assert!(v.abs() < 1e-12 * 1234.5 / (p().r_n / 5.0).powi(2));
            }
            for i in 0..5 {
                assert!(a.row(i).sum().abs() <= 1e-6 * a[(i, i)].abs());
            }
        }
    }

    #[test]
    fn input_sign_and_scaling() {
        let c = p();
        let cfg = DiscretizationConfig::default();
        let (_, b1) = build_solid_system(&c, &cfg, Electrode::Cathode).unwrap();
        let (_, b2) = build_solid_system(&c, &cfg, Electrode::Anode).unwrap();
        let dr = c.r_p / 10.0;
        let want = 2.0 / (dr * c.faraday * c.a_s(Electrode::Cathode) * c.area * c.l_p) * 11.0 / 10.0;
        assert!((b1[9] - want).abs() < 1e-12 * want);
        assert!(b2[9] < 0.0);
        assert!(b1.rows(0, 9).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weights_are_left_null_vector() {
        for n in [3, 4, 10, 37] {
            let op = SolidOperator::new(&p(), n, Electrode::Anode).unwrap();
            let (a, _) = op.to_dense();
            let w = DVector::from_column_slice(op.weights());
            let r = a.transpose() * w;
            let scale = a[(0, 0)].abs() * (n * n) as f64;
            assert!(r.amax() < 1e-12 * scale, "n = {n}: {}", r.amax());
            assert!((op.weights().iter().sum::<f64>() - op.weight_sum).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_nodes_is_config_error() {
        assert!(matches!(
            SolidOperator::new(&p(), 2, Electrode::Anode),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bulk_moves_by_exact_mole_balance() {
        let c = p();
        for integ in [Integrator::ImplicitEuler, Integrator::ExplicitEuler] {
            let op = SolidOperator::new(&c, 10, Electrode::Anode).unwrap();
            let mut x = vec![20000.0; 10];
            let before = op.bulk(&x);
            let d = c.d_s_n_ref;
            op.step(&mut x, d, 1.95, 1.0, integ, None).unwrap();
            let got = op.bulk(&x) - before;
            let want = -1.95 / (c.faraday * c.eps_n * c.area * c.l_n);
            assert!((got - want).abs() < 1e-9 * want.abs(), "{integ:?}: {got} vs {want}");
        }
    }
}
