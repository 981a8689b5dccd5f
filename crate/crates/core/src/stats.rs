//! Numerical statistics shared by the estimators: compensated sums, batch
//! means, least squares and the one-sample Kolmogorov–Smirnov test.

use libm::erfc;

use crate::error::{Error, Result};

/// Minimum number of batches accepted by [`batch_means`].
pub const MIN_BATCHES: usize = 10;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
    pub batch_size: usize,
    /// Batch size times the variance of the batch means; estimates the
    /// asymptotic variance of the time average (sum of autocovariances).
    pub asymptotic_variance: f64,
}

/// Batch-means estimate with `floor(sqrt(N))` batches. The point estimate is
/// the mean over all `N` values; trailing values that do not fill a whole
/// batch are left out of the variance only.
pub fn batch_means(values: &[f64]) -> Result<BatchMeans> {
    batch_means_with(values, (values.len() as f64).sqrt().floor() as usize)
}

/// Batch means with an explicit number of batches.
pub fn batch_means_with(values: &[f64], batches: usize) -> Result<BatchMeans> {
    let n = values.len();
    if batches < MIN_BATCHES || batches > n {
        return Err(Error::InsufficientData(format!(
            "{n} samples give {batches} batches, need at least {MIN_BATCHES}"
        )));
    }
    let batch_size = n / batches;
    let means: Vec<f64> = values
        .chunks_exact(batch_size)
        .take(batches)
        .map(mean)
        .collect();
    let var_means = variance(&means);
    Ok(BatchMeans {
        mean: mean(values),
        std_error: (var_means / batches as f64).sqrt(),
        batches,
        batch_size,
        asymptotic_variance: var_means * batch_size as f64,
    })
}

/// Overlapping batch means: `b` times the variance of all `N − b + 1`
/// window means of length `b`, with the usual `N/(N − b)` correction.
/// Estimates the asymptotic variance of the time average.
pub fn overlapping_batch_means(values: &[f64], b: usize) -> Result<f64> {
    let n = values.len();
    if b == 0 || n < MIN_BATCHES * b {
        return Err(Error::InsufficientData(format!(
            "{n} samples for windows of {b}, need at least {}",
            MIN_BATCHES * b
        )));
    }
    let m = mean(values);
    let bf = b as f64;
    // window sums relative to the mean, updated by one element per shift
    let mut window = compensated_sum(values[..b].iter().map(|v| v - m));
    let windows = n - b + 1;
    let mut acc = Vec::with_capacity(windows);
    for k in 0..windows {
        if k > 0 {
            window += values[k + b - 1] - values[k - 1];
        }
        let d = window / bf;
        acc.push(d * d);
    }
    Ok(bf * compensated_sum(acc) / windows as f64 * n as f64 / (n - b) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub count: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} points for a line fit"
        )));
    }
    let mx = compensated_sum(points.iter().map(|p| p.0)) / n as f64;
    let my = compensated_sum(points.iter().map(|p| p.1)) / n as f64;
    let sxx = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    if !(sxx > 0.0) {
        return Err(Error::Domain("constant abscissa in line fit".into()));
    }
    let sxy = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = compensated_sum(points.iter().map(|p| {
        let r = p.1 - (intercept + slope * p.0);
        r * r
    }));
    Ok(LineFit {
        slope,
        intercept,
        slope_std_error: (ssr / (n as f64 - 2.0) / sxx).sqrt(),
        count: n,
    })
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub count: usize,
}

/// One-sample KS test of `samples` against the standard normal, with the
/// Stephens finite-sample correction of the asymptotic p-value.
pub fn ks_test_standard_normal(samples: &[f64]) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty sample for KS test".into()));
    }
    if let Some(i) = samples.iter().position(|v| v.is_nan()) {
        return Err(Error::NanInput(i));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = standard_normal_cdf(x);
            let hi = (i as f64 + 1.0) / n - cdf;
            let lo = cdf - i as f64 / n;
            hi.max(lo)
        })
        .fold(0.0_f64, f64::max);
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        count: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_normal, stream_rng};

    #[test]
    fn compensated_sum_beats_naive() {
        let v = vec![0.1; 1_000_000];
        assert!((compensated_sum(v.iter().copied()) - 100_000.0).abs() < 1e-9);
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn batch_means_constant_series_has_zero_error() {
        let bm = batch_means(&[1.0; 400]).unwrap();
        assert_eq!(bm.mean, 1.0);
        assert_eq!(bm.std_error, 0.0);
        assert_eq!(bm.batches, 20);
    }

    #[test]
    fn batch_means_needs_ten_batches() {
        assert!(matches!(
            batch_means(&[0.0; 99]),
            Err(Error::InsufficientData(_))
        ));
        assert!(batch_means(&[0.0; 100]).is_ok());
    }

    #[test]
    fn batch_means_iid_variance() {
        let mut rng = stream_rng(3, 0);
        let mut v = vec![0.0; 40_000];
        fill_normal(&mut rng, &mut v);
        let bm = batch_means(&v).unwrap();
        // unit variance i.i.d. data: asymptotic variance 1, loose check
        assert!((bm.asymptotic_variance - 1.0).abs() < 0.3, "{bm:?}");
    }

    #[test]
    fn overlapping_batch_means_of_iid() {
        let mut rng = stream_rng(5, 0);
        let mut v = vec![0.0; 200_000];
        fill_normal(&mut rng, &mut v);
        let s = overlapping_batch_means(&v, 1000).unwrap();
        assert!((s - 1.0).abs() < 0.15, "{s}");
        assert!(overlapping_batch_means(&v[..9999], 1000).is_err());
    }

    #[test]
    fn overlapping_batch_means_of_ar1() {
        // x_t = φ x_{t−1} + e_t: asymptotic variance 1/(1−φ)²
        let mut rng = stream_rng(6, 0);
        let mut e = vec![0.0; 400_000];
        fill_normal(&mut rng, &mut e);
        let phi = -0.5;
        let mut x = 0.0;
        let v: Vec<f64> = e
            .iter()
            .map(|ei| {
                x = phi * x + ei;
                x
            })
            .collect();
        let s = overlapping_batch_means(&v, 2000).unwrap();
        let expected = 1.0 / ((1.0 - phi) * (1.0 - phi));
        assert!((s / expected - 1.0).abs() < 0.1, "{s} vs {expected}");
    }

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..200)
            .map(|t| (t as f64, 3.0 - 0.01 * t as f64))
            .collect();
        let fit = least_squares(&pts).unwrap();
        assert!((fit.slope + 0.01).abs() < 1e-15);
        assert!(fit.slope_std_error < 1e-14);
    }

    #[test]
    fn line_fit_rejects_constant_abscissa() {
        let pts = vec![(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)];
        assert!(matches!(least_squares(&pts), Err(Error::Domain(_))));
    }

    #[test]
    fn normal_cdf_values() {
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((standard_normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_q_reference_values() {
        // Q(1.36) ≈ 0.05 and Q(1.63) ≈ 0.01 (classical critical values)
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_normal_rejects_shifted() {
        let mut rng = stream_rng(11, 0);
        let mut v = vec![0.0; 2000];
        fill_normal(&mut rng, &mut v);
        assert!(ks_test_standard_normal(&v).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = v.iter().map(|x| x + 0.5).collect();
        assert!(ks_test_standard_normal(&shifted).unwrap().p_value < 1e-6);
    }
}
