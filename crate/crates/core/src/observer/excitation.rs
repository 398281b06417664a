//! Persistence-of-excitation check for a scalar input.

/// Windowed input energy `int u^2 dt` over every window that fits in the record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationReport {
    pub window: f64,
    pub windows: usize,
    pub min: f64,
    pub max: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub passed: bool,
}

/// Slide a window of length `window` (s) over the samples, one window per start
/// sample, and integrate `u^2` with the zero-order hold the plant uses. Passes when
/// every window lies in `[delta1, delta2]` and at least one window fits.
pub fn persistence_of_excitation(t: &[f64], u: &[f64], window: f64, delta1: f64, delta2: f64) -> ExcitationReport {
    let n = t.len().min(u.len());
    // prefix integral of u^2 at each sample time
    let mut prefix = vec![0.0; n];
    for k in 1..n {
        prefix[k] = prefix[k - 1] + u[k - 1] * u[k - 1] * (t[k] - t[k - 1]);
    }
    let integral_to = |x: f64| -> f64 {
        let k = t[..n].partition_point(|s| *s <= x);
        if k == 0 {
            return 0.0;
        }
        let j = k - 1;
        prefix[j] + u[j] * u[j] * (x - t[j])
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut windows = 0;
    if n > 0 {
        let end = t[n - 1];
        for k in 0..n {
            if t[k] + window > end + 1e-9 * window.max(1.0) {
                break;
            }
            let e = integral_to((t[k] + window).min(end)) - prefix[k];
            min = min.min(e);
            max = max.max(e);
            windows += 1;
        }
    }
    ExcitationReport {
        window,
        windows,
        min,
        max,
        delta1,
        delta2,
        passed: windows > 0 && min >= delta1 && max <= delta2,
    }
}
