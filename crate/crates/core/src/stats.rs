//! Small-sample statistics used by the experiment drivers: moments with a
//! fixed summation order, bootstrap resampling, Kolmogorov–Smirnov
//! statistics and least-squares lines.

use rand::Rng;

use crate::error::{Error, Result};

/// Pairwise summation in a fixed order, independent of how the input was
/// produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (divisor `len − 1`).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Unbiased sample covariance of two equally long series.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    pairwise_sum(&prod) / (xs.len() as f64 - 1.0)
}

/// Gathers `xs[idx[i]]` into `out`.
pub fn gather(xs: &[f64], idx: &[usize], out: &mut Vec<f64>) {
    out.clear();
    out.extend(idx.iter().map(|&i| xs[i]));
}

/// Runs `resamples` bootstrap rounds over `len` observations. Each round
/// draws `len` indices with replacement and passes them to `stat`; the
/// returned matrix has one row per round.
pub fn bootstrap<R: Rng + ?Sized>(
    len: usize,
    resamples: usize,
    rng: &mut R,
    mut stat: impl FnMut(&[usize]) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut idx = vec![0usize; len];
    (0..resamples)
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.random_range(0..len);
            }
            stat(&idx)
        })
        .collect()
}

/// Standard deviation of column `k` of a bootstrap matrix.
pub fn bootstrap_se(rounds: &[Vec<f64>], k: usize) -> f64 {
    let col: Vec<f64> = rounds.iter().map(|r| r[k]).collect();
    std_dev(&col)
}

/// Linear-interpolated percentile of sorted data, `p ∈ [0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let sorted = sorted_copy(samples);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let below = f - i as f64 / n;
            let above = (i + 1) as f64 / n - f;
            below.max(above)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted_copy(a);
    let b = sorted_copy(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value `1.628/√n` of the one-sample statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample statistic.
pub fn ks_two_sample_critical_1pct(na: usize, nb: usize) -> f64 {
    let (a, b) = (na as f64, nb as f64);
    1.628 * ((a + b) / (a * b)).sqrt()
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("a line needs at least two points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert!((covariance(&xs, &xs) - variance(&xs)).abs() < 1e-15);
        let big: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&big), 499_500.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = [64.0f64, 128.0, 256.0, 512.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0_f64.ln() - 2.0 * v).collect();
        let (s, c) = ols(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        assert!((c - 3.0_f64.ln()).abs() < 1e-11);
        assert!(ols(&x[..1], &y[..1]).is_err());
        assert!(ols(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn ks_against_brute_force() {
        let mut rng = stream_rng(4, 0);
        let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        // brute force: evaluate |F_n − F| just left and right of each sample
        let mut best: f64 = 0.0;
        for &x in &xs {
            let le = xs.iter().filter(|&&y| y <= x).count() as f64 / 200.0;
            let lt = xs.iter().filter(|&&y| y < x).count() as f64 / 200.0;
            best = best.max((le - x).abs()).max((lt - x).abs());
        }
        assert!((d - best).abs() < 1e-15);
        assert!(d < ks_critical_1pct(200));
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        let mut rng = stream_rng(5, 0);
        let a: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_two_sample(&a, &b) < ks_two_sample_critical_1pct(2000, 3000));
        let c: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &c) > ks_two_sample_critical_1pct(2000, 3000));
    }

    #[test]
    fn bootstrap_se_of_mean() {
        let mut rng = stream_rng(6, 0);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| u.sample(&mut rng)).collect();
        let mut buf = Vec::new();
        let rounds = bootstrap(xs.len(), 1000, &mut rng, |idx| {
            gather(&xs, idx, &mut buf);
            vec![mean(&buf)]
        });
        let se = bootstrap_se(&rounds, 0);
        let analytic = std_dev(&xs) / (xs.len() as f64).sqrt();
        assert!((se / analytic - 1.0).abs() < 0.15, "{se} vs {analytic}");
    }

    #[test]
    fn percentiles() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.125), 0.5);
        assert_eq!(percentile(&v, 1.0), 4.0);
    }
}
