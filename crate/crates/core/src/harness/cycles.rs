//! Surrogate drive cycles.
//!
//! Both generators are deterministic: a fixed seed drives a sequence of
//! accelerate / cruise / regenerate / idle segments, and the result is rescaled so the
//! net charge hits its target. Levels are in C-rate and converted with the 1C current.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cycle::{CycleMeta, DriveCycle};
use crate::error::{Error, Result};

/// Room temperature used by the surrogate cycles (K).
pub const SURROGATE_TEMPERATURE: f64 = 298.15;

const US06_SEED: u64 = 0x5506;
const UDDS_SEED: u64 = 0x0dd5;

/// Samples in the shipped charge-sustaining surrogate.
pub const US06_LIKE_SAMPLES: usize = 4001;
/// Samples in the shipped charge-depleting surrogate.
pub const UDDS2_LIKE_SAMPLES: usize = 2741;

#[derive(Debug, Clone, Copy)]
struct Levels {
    accel: (f64, f64),
    cruise: (f64, f64),
    regen: (f64, f64),
    idle: (f64, f64),
    accel_len: (f64, f64),
    cruise_len: (f64, f64),
    regen_len: (f64, f64),
}

fn segments(rng: &mut ChaCha8Rng, n: usize, lv: Levels) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 64);
    let push = |out: &mut Vec<f64>, len: usize, f: &dyn Fn(f64) -> f64| {
        for k in 0..len {
            out.push(f(k as f64 / len.max(1) as f64));
        }
    };
    while out.len() < n {
        let a = rng.random_range(lv.accel.0..lv.accel.1);
        let len = rng.random_range(lv.accel_len.0..lv.accel_len.1) as usize;
        // ramp up over the first third, hold
        push(&mut out, len, &|x| a * (3.0 * x).min(1.0));
        let c = rng.random_range(lv.cruise.0..lv.cruise.1);
        let w = rng.random_range(0.05..0.3);
        let period = rng.random_range(6.0..15.0);
        let len = rng.random_range(lv.cruise_len.0..lv.cruise_len.1) as usize;
        let lf = len as f64;
        push(&mut out, len, &|x| {
            c * (1.0 + w * (std::f64::consts::TAU * x * lf / period).sin())
        });
        let r = rng.random_range(lv.regen.0..lv.regen.1);
        let len = rng.random_range(lv.regen_len.0..lv.regen_len.1) as usize;
        push(&mut out, len, &|x| -r * (1.0 - (2.0 * x - 1.0).powi(2)).sqrt().max(0.3));
        let len = rng.random_range(lv.idle.0..lv.idle.1) as usize;
        push(&mut out, len, &|_| 0.0);
    }
    out.truncate(n);
    out
}

fn build(name: &str, c_rate: f64, current: Vec<f64>) -> Result<DriveCycle> {
    if !(c_rate > 0.0 && c_rate.is_finite()) {
        return Err(Error::Domain(format!(
            "1C current must be finite and > 0, got {c_rate}"
        )));
    }
    let n = current.len();
    let t: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let mut c = DriveCycle::new(t, current, vec![SURROGATE_TEMPERATURE; n])?;
    c.meta = CycleMeta {
        name: name.into(),
        source: "synthetic surrogate".into(),
        c_rate_scale: c_rate,
    };
    Ok(c)
}

/// Aggressive charge-sustaining surrogate: 4000 s at 1 s, peaks near 3C each way, zero
/// net charge (the larger of the discharge and regenerative parts is scaled down to
/// cancel the other exactly).
pub fn us06_like(one_c: f64) -> Result<DriveCycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(US06_SEED);
    let lv = Levels {
        accel: (1.2, 3.0),
        cruise: (0.3, 1.2),
        regen: (0.8, 2.6),
        idle: (2.0, 8.0),
        accel_len: (6.0, 20.0),
        cruise_len: (10.0, 40.0),
        regen_len: (6.0, 18.0),
    };
    let mut c = segments(&mut rng, US06_LIKE_SAMPLES, lv);
    // the last sample carries no interval, so balance over the others
    let m = c.len() - 1;
    let dis: f64 = c[..m].iter().filter(|x| **x > 0.0).sum();
    let chg: f64 = -c[..m].iter().filter(|x| **x < 0.0).sum::<f64>();
    for x in c.iter_mut() {
        if *x > 0.0 && dis > chg {
            *x *= chg / dis;
        } else if *x < 0.0 && chg > dis {
            *x *= dis / chg;
        }
    }
    build("us06-like", one_c, c.into_iter().map(|x| x * one_c).collect())
}

/// Urban charge-depleting surrogate: two identical 1370 s halves at 1 s, mean current
/// 0.5C, so the pair removes about 38 % of the rated charge.
pub fn udds2_like(one_c: f64) -> Result<DriveCycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(UDDS_SEED);
    let lv = Levels {
        accel: (1.0, 2.6),
        cruise: (0.3, 1.1),
        regen: (0.3, 1.2),
        idle: (4.0, 15.0),
        accel_len: (8.0, 25.0),
        cruise_len: (15.0, 60.0),
        regen_len: (5.0, 15.0),
    };
    let half = (UDDS2_LIKE_SAMPLES - 1) / 2;
    let mut c = segments(&mut rng, half, lv);
    let target = 0.5 * half as f64;
    let dis: f64 = c.iter().filter(|x| **x > 0.0).sum();
    let chg: f64 = c.iter().filter(|x| **x < 0.0).sum();
    let k = (target - chg) / dis;
    for x in c.iter_mut() {
        if *x > 0.0 {
            *x *= k;
        }
    }
    let mut all = c.clone();
    all.extend_from_slice(&c);
    all.push(0.0);
    build("udds2-like", one_c, all.into_iter().map(|x| x * one_c).collect())
}
