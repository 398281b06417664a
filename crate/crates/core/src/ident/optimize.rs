use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;

/// Best point found by an [`Optimizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Best cost after each iteration, starting with the initial point.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// A bounded derivative-free minimiser. Implementations must keep every evaluated
/// point inside `bounds` and spend at most `budget` evaluations.
pub trait Optimizer {
    fn minimize(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        x0: &[f64],
        bounds: &[(f64, f64)],
        budget: usize,
        exec: Execution,
    ) -> Minimum;
}

/// DE/best/1/bin with per-generation dithered scale factor. Candidates of one
/// generation are evaluated together, so the result does not depend on the
/// execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifferentialEvolution {
    /// Population size; 0 means ten per dimension (at least 12).
    pub population: usize,
    /// Scale factor drawn uniformly from this range each generation.
    pub scale: (f64, f64),
    pub crossover: f64,
    pub seed: u64,
    /// Stop once the population cost spread falls below `tol * |best|`.
    pub tol: f64,
    /// Stop once every coordinate spread falls below `x_tol` of its bound width.
    pub x_tol: f64,
    /// Share of the budget left for a Nelder-Mead polish of the best member.
    pub polish: f64,
}

impl Default for DifferentialEvolution {
    fn default() -> Self {
        Self {
            population: 0,
            scale: (0.5, 0.9),
            crossover: 0.9,
            seed: 0x1d3e,
            tol: 1e-6,
            x_tol: 1e-4,
            polish: 0.5,
        }
    }
}

impl Optimizer for DifferentialEvolution {
    fn minimize(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        x0: &[f64],
        bounds: &[(f64, f64)],
        budget: usize,
        exec: Execution,
    ) -> Minimum {
        let polish = (budget as f64 * self.polish.clamp(0.0, 1.0)).round() as usize;
        let mut m = self.explore(f, x0, bounds, budget - polish, exec);
        if polish > 0 && !m.x.is_empty() && m.evaluations < budget {
            let nm = NelderMead {
                step: 0.02,
                ..NelderMead::default()
            };
            let p = nm.minimize(f, &m.x, bounds, budget - m.evaluations, exec);
            m.evaluations += p.evaluations;
            if p.f < m.f {
                m.x = p.x;
                m.f = p.f;
            }
            let best = m.f;
            m.history.extend(p.history.into_iter().skip(1).map(|c| c.min(best)));
            m.converged = m.converged || p.converged;
        }
        m
    }
}

impl DifferentialEvolution {
    fn explore(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        x0: &[f64],
        bounds: &[(f64, f64)],
        budget: usize,
        exec: Execution,
    ) -> Minimum {
        let d = x0.len();
        let clamp = |x: &mut [f64]| {
            for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
                *v = v.clamp(*lo, *hi);
            }
        };
        let mut start = x0.to_vec();
        clamp(&mut start);
        if budget == 0 || d == 0 {
            let (f0, evaluations) = if budget == 0 { (f64::NAN, 0) } else { (f(&start), 1) };
            return Minimum {
                x: start,
                f: f0,
                evaluations,
                history: if budget == 0 { vec![] } else { vec![f0] },
                converged: d == 0 && budget > 0,
            };
        }
        let np = if self.population == 0 {
            (10 * d).max(12)
        } else {
            self.population.max(4)
        };
        let np = np.min(budget);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut pop: Vec<Vec<f64>> = vec![start.clone()];
        while pop.len() < np {
            pop.push(bounds.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect());
        }
        let mut cost: Vec<f64> = exec.map(&pop, |x| f(x));
        let mut evaluations = np;
        let best_of = |c: &[f64]| (0..c.len()).fold(0, |b, i| if c[i].total_cmp(&c[b]).is_lt() { i } else { b });
        let mut best = best_of(&cost);
        let mut history = vec![cost[best]];
        let mut converged = false;
        loop {
            let spread = cost.iter().fold(f64::NEG_INFINITY, |m, c| m.max(*c)) - cost[best];
            let x_spread = (0..d).all(|j| {
                let (lo, hi) = pop.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x[j]), b.max(x[j]))
                });
                hi - lo <= self.x_tol * (bounds[j].1 - bounds[j].0)
            });
            if spread <= self.tol * cost[best].abs() || x_spread {
                converged = true;
                break;
            }
            if evaluations + np > budget {
                break;
            }
            let fscale = rng.random_range(self.scale.0..=self.scale.1);
            let trials: Vec<Vec<f64>> = (0..np)
                .map(|i| {
                    let (mut a, mut b) = (i, i);
                    while a == i {
                        a = rng.random_range(0..np);
                    }
                    while b == i || b == a {
                        b = rng.random_range(0..np);
                    }
                    let jr = rng.random_range(0..d);
                    let mut t = pop[i].clone();
                    for j in 0..d {
                        if j == jr || rng.random::<f64>() < self.crossover {
                            t[j] = pop[best][j] + fscale * (pop[a][j] - pop[b][j]);
                            // bounce back inside instead of sticking to the bound
                            let (lo, hi) = bounds[j];
                            if t[j] < lo {
                                t[j] = lo + rng.random::<f64>() * (pop[i][j] - lo);
                            } else if t[j] > hi {
                                t[j] = hi - rng.random::<f64>() * (hi - pop[i][j]);
                            }
                        }
                    }
                    t
                })
                .collect();
            let tc: Vec<f64> = exec.map(&trials, |x| f(x));
            evaluations += np;
            for (i, (t, c)) in trials.into_iter().zip(tc).enumerate() {
                if c <= cost[i] {
                    pop[i] = t;
                    cost[i] = c;
                }
            }
            best = best_of(&cost);
            history.push(cost[best]);
        }
        Minimum {
            x: pop[best].clone(),
            f: cost[best],
            evaluations,
            history,
            converged,
        }
    }
}

/// Bounded Nelder-Mead. Vertices are clamped to the box; the initial simplex steps
/// `step` of each bound width away from `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NelderMead {
    pub step: f64,
    /// Stop once the simplex cost spread falls below `tol * |best|` and its
    /// coordinate spread below `x_tol` of the bound widths.
    pub tol: f64,
    pub x_tol: f64,
    /// Fresh simplices built around the best point after a collapse; a restart
    /// that gains less than `tol` relative ends the search.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            step: 0.1,
            tol: 1e-10,
            x_tol: 1e-7,
            restarts: 4,
        }
    }
}

impl Optimizer for NelderMead {
    fn minimize(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        x0: &[f64],
        bounds: &[(f64, f64)],
        budget: usize,
        exec: Execution,
    ) -> Minimum {
        let mut m = self.simplex_search(f, x0, bounds, budget, exec);
        for _ in 0..self.restarts {
            if !m.converged || m.evaluations >= budget {
                break;
            }
            let r = self.simplex_search(f, &m.x, bounds, budget - m.evaluations, exec);
            m.evaluations += r.evaluations;
            let gain = m.f - r.f;
            let best = m.f;
            m.history.extend(r.history.iter().skip(1).map(|c| c.min(best)));
            if r.f < m.f {
                m.x = r.x;
                m.f = r.f;
            }
            m.converged = r.converged;
            if gain <= self.tol * best.abs() {
                break;
            }
        }
        m
    }
}

impl NelderMead {
    fn simplex_search(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        x0: &[f64],
        bounds: &[(f64, f64)],
        budget: usize,
        exec: Execution,
    ) -> Minimum {
        let d = x0.len();
        let clamp = |mut x: Vec<f64>| {
            for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
                *v = v.clamp(*lo, *hi);
            }
            x
        };
        let start = clamp(x0.to_vec());
        if budget <= d || d == 0 {
            let evaluations = usize::from(budget > 0);
            let f0 = if budget > 0 { f(&start) } else { f64::NAN };
            return Minimum {
                x: start,
                f: f0,
                evaluations,
                history: if budget > 0 { vec![f0] } else { vec![] },
                converged: false,
            };
        }
        let mut simplex = vec![start.clone()];
        for j in 0..d {
            let mut v = start.clone();
            let w = bounds[j].1 - bounds[j].0;
            // step inward when the start sits on the upper bound
            v[j] = if v[j] + self.step * w <= bounds[j].1 {
                v[j] + self.step * w
            } else {
                v[j] - self.step * w
            };
            simplex.push(clamp(v));
        }
        let mut cost: Vec<f64> = exec.map(&simplex, |x| f(x));
        let mut evaluations = d + 1;
        let mut history = vec![cost.iter().copied().fold(f64::INFINITY, f64::min)];
        let mut converged = false;
        let lerp = |a: &[f64], b: &[f64], t: f64| clamp(a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect());
        while evaluations + 2 <= budget {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|a, b| cost[*a].total_cmp(&cost[*b]));
            simplex = order.iter().map(|i| simplex[*i].clone()).collect();
            cost = order.iter().map(|i| cost[*i]).collect();
            let x_spread = (0..d).all(|j| {
                let (lo, hi) = simplex.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                    (a.min(x[j]), b.max(x[j]))
                });
                hi - lo <= self.x_tol * (bounds[j].1 - bounds[j].0)
            });
            if cost[d] - cost[0] <= self.tol * cost[0].abs() && x_spread {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|j| simplex[..d].iter().map(|x| x[j]).sum::<f64>() / d as f64)
                .collect();
            let xr = lerp(&centroid, &simplex[d], -1.0);
            let fr = f(&xr);
            evaluations += 1;
            if fr < cost[0] {
                let xe = lerp(&centroid, &simplex[d], -2.0);
                let fe = f(&xe);
                evaluations += 1;
                if fe < fr {
                    simplex[d] = xe;
                    cost[d] = fe;
                } else {
                    simplex[d] = xr;
                    cost[d] = fr;
                }
            } else if fr < cost[d - 1] {
                simplex[d] = xr;
                cost[d] = fr;
            } else {
                let (xc, fc) = if fr < cost[d] {
                    let xc = lerp(&centroid, &xr, 0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = lerp(&centroid, &simplex[d], 0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                evaluations += 1;
                if fc < cost[d].min(fr) {
                    simplex[d] = xc;
                    cost[d] = fc;
                } else {
                    if evaluations + d > budget {
                        break;
                    }
                    let best = simplex[0].clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..].iter().map(|x| lerp(&best, x, 0.5)).collect();
                    let sc = exec.map(&shrunk, |x| f(x));
                    evaluations += d;
                    for (k, (x, c)) in shrunk.into_iter().zip(sc).enumerate() {
                        simplex[k + 1] = x;
                        cost[k + 1] = c;
                    }
                }
            }
            history.push(cost.iter().copied().fold(f64::INFINITY, f64::min));
        }
        let b = (0..=d).fold(0, |b, i| if cost[i] < cost[b] { i } else { b });
        Minimum {
            x: simplex[b].clone(),
            f: cost[b],
            evaluations,
            history,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_shifted_bowl() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 0.7).powi(2) + 1.0;
        let de = DifferentialEvolution::default();
        let m = de.minimize(
            &f,
            &[0.0, 0.0],
            &[(-2.0, 2.0), (-2.0, 2.0)],
            5000,
            Execution::Sequential,
        );
        assert!(m.converged);
        assert!((m.x[0] - 0.3).abs() < 1e-2 && (m.x[1] + 0.7).abs() < 1e-2, "{:?}", m.x);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.evaluations <= 5000);
    }

    #[test]
    fn modes_and_seeds_are_deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.1).abs()).sum::<f64>();
        let de = DifferentialEvolution::default();
        let b = [(-1.0, 1.0); 3];
        let a = de.minimize(&f, &[0.5; 3], &b, 600, Execution::Parallel);
        let s = de.minimize(&f, &[0.5; 3], &b, 600, Execution::Sequential);
        assert_eq!(a, s);
    }

    #[test]
    fn nelder_mead_follows_a_narrow_valley() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = NelderMead::default().minimize(
            &f,
            &[-1.0, 1.5],
            &[(-2.0, 2.0), (-2.0, 2.0)],
            4000,
            Execution::Sequential,
        );
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.evaluations <= 4000);
    }

    #[test]
    fn bounds_are_respected() {
        let f = |x: &[f64]| -x[0] - x[1];
        for m in [
            DifferentialEvolution::default().minimize(
                &f,
                &[0.0, 0.0],
                &[(0.0, 1.0), (-1.0, 0.5)],
                800,
                Execution::Sequential,
            ),
            NelderMead::default().minimize(&f, &[0.0, 0.0], &[(0.0, 1.0), (-1.0, 0.5)], 800, Execution::Sequential),
        ] {
            assert!(m.x[0] <= 1.0 && m.x[1] <= 0.5);
            assert!((m.f + 1.5).abs() < 1e-6, "{m:?}");
        }
    }
}
