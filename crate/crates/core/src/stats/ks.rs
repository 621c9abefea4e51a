//! One-sample Kolmogorov-Smirnov statistic and its null distribution.

use super::StatsError;

/// Empirical CDF over a sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    samples: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(StatsError::InvalidInput("sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Ecdf { samples })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.samples.partition_point(|&s| s <= x);
        k as f64 / self.n() as f64
    }
}

/// `sup_x |F_n(x) - F(x)|`, evaluated at both sides of every jump.
pub fn ks_distance<F: Fn(f64) -> f64>(ecdf: &Ecdf, cdf: F) -> f64 {
    let n = ecdf.n() as f64;
    ecdf.samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.abs().max(below.abs())
        })
        .fold(0.0, f64::max)
}

/// Distance of a nonnegative sample from the Exp(1) law.
pub fn exp1_ks(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.iter().any(|&x| x < 0.0) {
        return Err(StatsError::InvalidInput("negative sample".into()));
    }
    let ecdf = Ecdf::new(samples.to_vec())?;
    Ok(ks_distance(&ecdf, |x| -(-x).exp_m1()))
}

/// Asymptotic Kolmogorov distribution `P(sqrt(n) D_n <= x)`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum();
        (2.0 * std::f64::consts::PI).sqrt() / x * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let k = k as f64;
                sign * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        (1.0 - 2.0 * s).min(1.0)
    }
}

pub fn kolmogorov_quantile(q: f64) -> f64 {
    bisect(|x| kolmogorov_cdf(x) - q, 0.0, 10.0)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact `P(D_n < d)` (Marsaglia, Tsang and Wang's matrix formulation).
pub fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    if n == 0 || d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    if d <= 0.5 / nf {
        return 0.0;
    }
    let k = (nf * d).floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m.min(i + 1) {
            for g in 1..=(i + 1 - j) {
                hm[i * m + j] /= g as f64;
            }
        }
    }
    let (q, eq) = matrix_power(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    let mut es = eq;
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            es -= 140;
        }
    }
    s * 10f64.powi(es)
}

fn matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

/// `a^n` with a decimal exponent carried separately to avoid overflow.
fn matrix_power(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, e_half) = matrix_power(a, m, n / 2);
    let mut out = matmul(&half, &half, m);
    let mut e = 2 * e_half;
    if n % 2 == 1 {
        out = matmul(a, &out, m);
    }
    let centre = out[(m / 2) * m + m / 2];
    if centre > 1e140 {
        out.iter_mut().for_each(|v| *v *= 1e-140);
        e += 140;
    }
    (out, e)
}

/// Critical value `d` with `P(D_n >= d) = level` under the null.
///
/// Samples of at least 100 points use the asymptotic Kolmogorov law; smaller
/// samples invert the exact distribution.
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    assert!(n > 0 && level > 0.0 && level < 1.0);
    if n >= 100 {
        kolmogorov_quantile(1.0 - level) / (n as f64).sqrt()
    } else {
        bisect(|d| ks_exact_cdf(n, d) - (1.0 - level), 0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_against_uniform() {
        let e = Ecdf::new(vec![0.5]).unwrap();
        assert_eq!(ks_distance(&e, |x| x.clamp(0.0, 1.0)), 0.5);
    }

    #[test]
    fn plotting_positions_give_half_step() {
        let n = 100;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let e = Ecdf::new(xs).unwrap();
        assert!((ks_distance(&e, |x| x) - 0.005).abs() < 1e-12);

        let n = 1000;
        let ys: Vec<f64> = (1..=n)
            .map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln())
            .collect();
        assert!((exp1_ks(&ys).unwrap() - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn exp1_singleton() {
        assert!((exp1_ks(&[std::f64::consts::LN_2]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exp1_ks(&[]), Err(StatsError::EmptySample));
        assert!(exp1_ks(&[-1.0]).is_err());
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert_eq!(Ecdf::new(vec![]), Err(StatsError::EmptySample));
        assert!(Ecdf::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn ecdf_eval_counts_ties() {
        let e = Ecdf::new(vec![2.0, 1.0, 1.0, 2.5]).unwrap();
        assert_eq!(e.eval(0.0), 0.0);
        assert_eq!(e.eval(1.0), 0.5);
        assert_eq!(e.eval(2.1), 0.75);
        assert_eq!(e.eval(3.0), 1.0);
    }

    #[test]
    fn kolmogorov_quantiles() {
        assert!((kolmogorov_quantile(0.99) - 1.627_624).abs() < 1e-5);
        assert!((kolmogorov_quantile(0.95) - 1.358_099).abs() < 1e-5);
        // Both series agree where they switch.
        let left = {
            let c = std::f64::consts::PI.powi(2) / 8.0;
            (2.0 * std::f64::consts::PI).sqrt()
                * (1..=20)
                    .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
                    .sum::<f64>()
        };
        assert!((left - kolmogorov_cdf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_small_sample_table() {
        // Two-sided critical values from the standard table.
        assert!((ks_critical_value(10, 0.05) - 0.409_25).abs() < 1e-4);
        assert!((ks_critical_value(10, 0.01) - 0.488_93).abs() < 1e-4);
        assert!((ks_critical_value(20, 0.05) - 0.294_08).abs() < 1e-4);
        // n = 1: D = max(U, 1-U) so P(D >= d) = 2(1-d).
        assert!((ks_critical_value(1, 0.1) - 0.95).abs() < 1e-9);
        assert!((ks_critical_value(500, 0.01) - 0.072_789).abs() < 1e-5);
    }

    #[test]
    fn exact_tends_to_asymptotic() {
        let n = 99;
        let x = 1.3;
        let exact = ks_exact_cdf(n, x / (n as f64).sqrt());
        assert!((exact - kolmogorov_cdf(x)).abs() < 0.02);
    }
}
