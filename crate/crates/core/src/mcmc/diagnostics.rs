//! Autocorrelation and effective sample size of scalar traces.

use super::trace::ChainTrace;

/// Below this many samples the estimates are flagged as unreliable.
pub const MIN_RELIABLE_SAMPLES: usize = 100;

fn mean_and_autocov(xs: &[f64]) -> (f64, impl Fn(usize) -> f64 + '_) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let cov = move |k: usize| {
        xs[..n - k]
            .iter()
            .zip(&xs[k..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    (mean, cov)
}

/// Sample autocorrelation at lags `0..=max_lag`. Empty for constant or too short input.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    if xs.len() < 2 {
        return Vec::new();
    }
    let (_, cov) = mean_and_autocov(xs);
    let c0 = cov(0);
    if !(c0 > 0.0) {
        return Vec::new();
    }
    (0..=max_lag.min(xs.len() - 1))
        .map(|k| cov(k) / c0)
        .collect()
}

/// Integrated autocorrelation time `1 + 2 sum rho_k`, truncated by Geyer's
/// initial monotone positive sequence. `None` for constant input.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 4 {
        return None;
    }
    let (_, cov) = mean_and_autocov(xs);
    let c0 = cov(0);
    if !(c0 > 0.0) {
        return None;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (cov(2 * m) + cov(2 * m + 1)).min(prev);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        prev = pair;
        m += 1;
    }
    Some((2.0 * sum - c0) / c0)
}

/// Summary of one scalar trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesDiagnostics {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub iact: Option<f64>,
    pub ess: Option<f64>,
    /// False when the trace is shorter than [`MIN_RELIABLE_SAMPLES`].
    pub reliable: bool,
    /// True when the trace never changes.
    pub degenerate: bool,
}

impl SeriesDiagnostics {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            xs.iter().sum::<f64>() / n as f64
        };
        let sd = if n < 2 {
            f64::NAN
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let degenerate = n > 0 && xs.iter().all(|&x| x == xs[0]);
        let iact = if degenerate {
            None
        } else {
            integrated_autocorrelation_time(xs)
        };
        SeriesDiagnostics {
            n,
            mean,
            sd,
            iact,
            ess: iact.map(|t| n as f64 / t),
            reliable: n >= MIN_RELIABLE_SAMPLES,
            degenerate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub mu: SeriesDiagnostics,
    pub root_age: SeriesDiagnostics,
    pub log_prior: SeriesDiagnostics,
    pub log_likelihood: SeriesDiagnostics,
}

pub fn diagnostics(trace: &ChainTrace) -> DiagnosticsReport {
    DiagnosticsReport {
        mu: SeriesDiagnostics::of(&trace.mu()),
        root_age: SeriesDiagnostics::of(&trace.root_age()),
        log_prior: SeriesDiagnostics::of(&trace.series(|s| s.log_prior)),
        log_likelihood: SeriesDiagnostics::of(&trace.series(|s| s.log_likelihood)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_has_full_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let d = SeriesDiagnostics::of(&xs);
        let ess = d.ess.unwrap();
        assert!((ess / 20_000.0 - 1.0).abs() < 0.1, "{ess}");
        assert!(d.reliable && !d.degenerate);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let d = SeriesDiagnostics::of(&[3.0; 500]);
        assert!(d.degenerate);
        assert_eq!(d.ess, None);
        assert!(autocorrelation(&[3.0; 10], 3).is_empty());
    }

    #[test]
    fn short_trace_is_unreliable() {
        let d = SeriesDiagnostics::of(&[1.0, 2.0, 1.5, 0.3, 2.2]);
        assert!(!d.reliable);
    }

    #[test]
    fn acf_of_alternating_series() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let r = autocorrelation(&xs, 2);
        assert_eq!(r[0], 1.0);
        assert!((r[1] + 1.0).abs() < 0.01);
        assert!((r[2] - 1.0).abs() < 0.01);
    }
}
