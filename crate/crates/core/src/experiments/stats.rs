use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with a standard error from contiguous batches of the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
}

/// Splits `values` (in path order) into at most `batches` contiguous batches
/// of near-equal size and uses the spread of the batch means.
pub fn batch_estimate(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            batches: 0,
        };
    }
    let b = batches.clamp(1, n);
    let mean = values.iter().sum::<f64>() / n as f64;
    if b == 1 {
        return Estimate {
            mean,
            stderr: f64::NAN,
            batches: 1,
        };
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * n / b..(i + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate {
        mean,
        stderr: (var / b as f64).sqrt(),
        batches: b,
    }
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided 95% interval from the Student t quantile with `n - 2`
    /// degrees of freedom; absent for two points.
    pub ci: Option<[f64; 2]>,
    pub points: usize,
}

pub fn fit_log_slope(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let ci = (n > 2).then(|| {
        let rss = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum::<f64>();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).map_or(f64::NAN, |d| d.inverse_cdf(0.975));
        [slope - t * se, slope + t * se]
    });
    Some(SlopeFit {
        slope,
        intercept,
        ci,
        points: n,
    })
}

/// Kolmogorov-Smirnov distance between the samples and `cdf`. Sorts in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_of_constant_data() {
        let e = batch_estimate(&[2.0; 40], 20);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.batches, 20);
        assert_eq!(batch_estimate(&[1.0, 3.0], 20).batches, 2);
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [1e-1, 1e-2, 1e-3];
        let y: Vec<f64> = x.iter().map(|m: &f64| 3.0 * m.powf(0.5)).collect();
        let f = fit_log_slope(&x, &y).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        let [lo, hi] = f.ci.unwrap();
        assert!(lo <= 0.5 && 0.5 <= hi && hi - lo < 1e-6);
        assert!(fit_log_slope(&x[..2], &y[..2]).unwrap().ci.is_none());
    }

    #[test]
    fn ks_against_the_uniform_law() {
        let mut s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&mut s, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        let mut t = vec![0.0; 10];
        assert!((ks_distance(&mut t, |x| x.clamp(0.0, 1.0)) - 1.0).abs() < 1e-12);
    }
}
