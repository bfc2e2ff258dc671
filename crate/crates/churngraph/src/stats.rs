//! Small statistical helpers shared by the metrics module, the experiment
//! harness, and the oracle checks: Wilson intervals, one-sample KS tests,
//! quantiles, and a least-squares line fit.

/// z-quantile for a two-sided 99% interval (Phi^-1(0.995)).
pub const Z_99: f64 = 2.575829303548901;

/// Asymptotic Kolmogorov-Smirnov critical coefficient at alpha = 0.01:
/// reject when D > KS_COEF_001 / sqrt(m).
pub const KS_COEF_001: f64 = 1.62762;

/// Wilson score interval for a binomial proportion at 99% confidence.
pub fn wilson_99(successes: u64, trials: u64) -> (f64, f64) {
    wilson(successes, trials, Z_99)
}

pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// z-score of an observed count against a Bernoulli(p) null.
pub fn z_score(hits: u64, samples: u64, p: f64) -> f64 {
    let n = samples as f64;
    let se = (p * (1.0 - p) / n).sqrt();
    (hits as f64 / n - p) / se
}

/// One-sample KS statistic D against a CDF. Sorts a copy of the samples.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty());
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / m;
        let hi = (i + 1) as f64 / m;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// KS test against Exponential(rate) at alpha = 0.01 (asymptotic critical value).
pub fn ks_exponential_001(samples: &[f64], rate: f64) -> (f64, f64, bool) {
    let d = ks_statistic(samples, |x| 1.0 - (-rate * x).exp());
    let crit = KS_COEF_001 / (samples.len() as f64).sqrt();
    (d, crit, d < crit)
}

/// Nearest-rank quantile with averaged median; `q` in [0, 1].
/// `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let k = sorted.len();
    if q <= 0.0 {
        return sorted[0];
    }
    if q >= 1.0 {
        return sorted[k - 1];
    }
    let idx = ((q * k as f64).ceil() as usize).max(1) - 1;
    sorted[idx.min(k - 1)]
}

/// Median with the usual two-point average on even counts.
pub fn median(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty());
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Least-squares fit y = a + b*x. Returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    (a, b)
}

/// splitmix64 finalizer; used for order-independent set digests.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
