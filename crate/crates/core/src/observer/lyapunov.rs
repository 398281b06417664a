//! Composite Lyapunov function of the interconnected observer, evaluated against a
//! known truth.
//!
//! Terms are made dimensionless before they are summed: concentrations by `c_max`,
//! capacity by `Q_0`, `theta_1` by its reference value and `theta_2` by its nominal
//! value. The adaptation weights are rescaled to match, so `k1` and `k2` keep the
//! meaning they have in the adaptation laws.

use super::{Observer, ObserverState};

/// True plant quantities matching an observer state.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPoint {
    pub c_s_p: Vec<f64>,
    pub c_s_n: Vec<f64>,
    pub q: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovTerms {
    pub cathode: f64,
    pub anode: f64,
    pub capacity: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub total: f64,
}

pub fn composite_lyapunov(obs: &Observer, st: &ObserverState, truth: &TruthPoint) -> LyapunovTerms {
    let p = &obs.params;
    let g = obs.gains();
    let sq = |a: &[f64], b: &[f64], scale: f64| -> f64 {
        a.iter().zip(b).map(|(x, y)| ((x - y) / scale).powi(2)).sum::<f64>()
    };
    let cathode = 0.5 * sq(&truth.c_s_p, &st.x1_hat, p.c_s_p_max);
    let anode = 0.5 * sq(&truth.c_s_n, &st.x2_hat, p.c_s_n_max);
    let capacity = 0.5 * ((truth.q - st.x3_hat) / obs.sei.q_0).powi(2);
    let d_ref = p.d_s_n_ref;
    let t2 = obs.theta2_nominal();
    let k1 = g.k1 * (d_ref / p.c_s_n_max).powi(2);
    let k2 = g.k2 * (t2 / p.c_s_p_max).powi(2);
    let theta1 = 0.5 * k1 * ((truth.theta1 - st.theta1_hat) / d_ref).powi(2);
    let theta2 = 0.5 * k2 * ((truth.theta2 - st.theta2_hat) / t2).powi(2);
    LyapunovTerms {
        cathode,
        anode,
        capacity,
        theta1,
        theta2,
        total: cathode + anode + capacity + theta1 + theta2,
    }
}
