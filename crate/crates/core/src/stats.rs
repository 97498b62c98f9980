//! Statistical toolkit: empirical distributions, two-sample tests with
//! permutation calibration, sample moments, regression and reference CDFs.

use crate::rng::{domain, Stream};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

/// Empirical CDF over a sorted copy of the sample.
#[derive(Clone, Debug)]
pub struct Ecdf {
    xs: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Self {
        let mut xs = sample.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ecdf { xs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // number of points <= x
        let mut lo = 0usize;
        let mut hi = self.xs.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo as f64 / self.xs.len() as f64
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.xs
    }
}

/// Two-sample Kolmogorov-Smirnov statistic, correct in the presence of ties
/// (the sup is evaluated after all points sharing a value are absorbed).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let v = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] == v {
            i += 1;
        }
        while j < sb.len() && sb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS acceptance band at level `alpha`:
/// c(alpha) * sqrt((n+m)/(n m)), with c(0.01) = 1.628, c(0.05) = 1.358.
pub fn ks_band(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Permutation calibration of the two-sample KS statistic. Returns the
/// observed statistic and the permutation p-value (1 + #{D* >= D}) / (B + 1).
///
/// Labels are permuted over the pooled, pre-sorted sample so each replicate
/// costs one linear pass; ties are handled by evaluating only at group ends.
pub fn ks_permutation_pvalue(
    a: &[f64],
    b: &[f64],
    n_perm: usize,
    seed: u64,
) -> (f64, f64) {
    let d_obs = ks_two_sample(a, b);
    let n = a.len();
    let m = b.len();
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // group boundaries: last index of each run of equal values
    let mut is_group_end = vec![false; pooled.len()];
    for i in 0..pooled.len() {
        if i + 1 == pooled.len() || pooled[i + 1].0 != pooled[i].0 {
            is_group_end[i] = true;
        }
    }
    let mut labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let mut stream = Stream::new(&[seed, domain::PERMUTE]);
    let mut count_ge = 0usize;
    let (na, nb) = (n as f64, m as f64);
    for _ in 0..n_perm {
        stream.shuffle(&mut labels);
        let mut ca = 0usize;
        let mut cb = 0usize;
        let mut d: f64 = 0.0;
        for (i, &la) in labels.iter().enumerate() {
            if la {
                ca += 1;
            } else {
                cb += 1;
            }
            if is_group_end[i] {
                d = d.max((ca as f64 / na - cb as f64 / nb).abs());
            }
        }
        if d >= d_obs {
            count_ge += 1;
        }
    }
    let p = (1.0 + count_ge as f64) / (n_perm as f64 + 1.0);
    (d_obs, p)
}

/// Permutation test for two samples of indicator curves packed into u64
/// masks (bit i = indicator at grid point i, i < width). The statistic is
/// the sup over grid points of |mean_a(i) - mean_b(i)|, a KS-type distance
/// between the two empirical curve means. Returns (observed sup, p-value).
///
/// Replicas are pooled by distinct mask pattern so each label permutation
/// reduces to counting patterns on one side.
pub fn mask_perm_sup(
    a: &[u64],
    b: &[u64],
    width: usize,
    n_perm: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(width <= 64 && width > 0, "mask width out of range");
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sup_diff = |ca: &[u64], cb: &[u64]| -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..width {
            d = d.max((ca[i] as f64 / na - cb[i] as f64 / nb).abs());
        }
        d
    };
    let bit_counts = |side: &[u64]| -> Vec<u64> {
        let mut c = vec![0u64; width];
        for &m in side {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += (m >> i) & 1;
            }
        }
        c
    };
    let d_obs = sup_diff(&bit_counts(a), &bit_counts(b));

    // pattern classes over the pool
    let mut class_of: BTreeMap<u64, u32> = BTreeMap::new();
    let mut patterns: Vec<u64> = Vec::new();
    let mut pool_ids: Vec<u32> = Vec::with_capacity(a.len() + b.len());
    for &m in a.iter().chain(b.iter()) {
        let id = *class_of.entry(m).or_insert_with(|| {
            patterns.push(m);
            (patterns.len() - 1) as u32
        });
        pool_ids.push(id);
    }
    // per-bit totals over the pool are permutation-invariant
    let mut pool_totals = vec![0u64; width];
    for &m in a.iter().chain(b.iter()) {
        for (i, c) in pool_totals.iter_mut().enumerate() {
            *c += (m >> i) & 1;
        }
    }
    let mut stream = Stream::new(&[seed, domain::PERMUTE]);
    let mut count_ge = 0usize;
    let mut class_hits = vec![0u64; patterns.len()];
    for _ in 0..n_perm {
        stream.shuffle(&mut pool_ids);
        class_hits.iter_mut().for_each(|c| *c = 0);
        for &id in &pool_ids[..a.len()] {
            class_hits[id as usize] += 1;
        }
        let mut ca = vec![0u64; width];
        for (pi, &hits) in class_hits.iter().enumerate() {
            if hits == 0 {
                continue;
            }
            let m = patterns[pi];
            for (i, c) in ca.iter_mut().enumerate() {
                *c += hits * ((m >> i) & 1);
            }
        }
        let mut d: f64 = 0.0;
        for i in 0..width {
            let cb = pool_totals[i] - ca[i];
            d = d.max((ca[i] as f64 / na - cb as f64 / nb).abs());
        }
        if d >= d_obs {
            count_ge += 1;
        }
    }
    let p = (1.0 + count_ge as f64) / (n_perm as f64 + 1.0);
    (d_obs, p)
}

/// Sample moments.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len();
    assert!(n >= 2);
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    Moments {
        n,
        mean,
        var: m2 * nf / (nf - 1.0),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

/// Pearson correlation coefficient.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Least squares line y = slope*x + intercept; returns (slope, intercept, R^2).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc_approx(-x / std::f64::consts::SQRT_2)
}

/// erfc with ~1e-7 absolute accuracy (rational approximation).
fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Bootstrap confidence interval for a statistic of one sample.
pub fn bootstrap_band<F: Fn(&[f64]) -> f64>(
    xs: &[f64],
    stat: F,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    let mut stream = Stream::new(&[seed, domain::SAMPLE]);
    let mut vals = Vec::with_capacity(n_boot);
    let mut resample = vec![0.0; xs.len()];
    for _ in 0..n_boot {
        for r in resample.iter_mut() {
            *r = xs[stream.next_below(xs.len() as u64) as usize];
        }
        vals.push(stat(&resample));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = ((1.0 - level) / 2.0 * n_boot as f64) as usize;
    let hi_idx = ((1.0 - (1.0 - level) / 2.0) * n_boot as f64) as usize;
    (vals[lo_idx.min(n_boot - 1)], vals[hi_idx.min(n_boot - 1)])
}

/// Tabulated reference distribution (e.g. Tracy-Widom GUE) loaded from a CSV
/// with columns `s,F` and optional `# mean:` / `# variance:` comment lines.
#[derive(Clone, Debug)]
pub struct ReferenceCdf {
    pub s: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl ReferenceCdf {
    pub fn load(path: &Path) -> std::io::Result<ReferenceCdf> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut s = Vec::new();
        let mut cdf = Vec::new();
        let mut mean = f64::NAN;
        let mut variance = f64::NAN;
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("mean:") {
                    mean = v.trim().parse().unwrap_or(f64::NAN);
                } else if let Some(v) = rest.strip_prefix("variance:") {
                    variance = v.trim().parse().unwrap_or(f64::NAN);
                }
                continue;
            }
            if line.starts_with('s') {
                continue; // header
            }
            let mut parts = line.split(',');
            let sv: f64 = parts.next().unwrap().trim().parse().map_err(bad_data)?;
            let fv: f64 = parts.next().ok_or_else(|| bad_data("missing F column"))?.trim().parse().map_err(bad_data)?;
            s.push(sv);
            cdf.push(fv);
        }
        if s.len() < 2 {
            return Err(bad_data("reference table needs at least two rows"));
        }
        Ok(ReferenceCdf { s, cdf, mean, variance })
    }

    /// Linear interpolation; clamps to 0/1 outside the table.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.s[0] {
            return self.cdf[0];
        }
        if x >= *self.s.last().unwrap() {
            return *self.cdf.last().unwrap();
        }
        let mut lo = 0usize;
        let mut hi = self.s.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (x - self.s[lo]) / (self.s[hi] - self.s[lo]);
        self.cdf[lo] * (1.0 - w) + self.cdf[hi] * w
    }

    /// One-sample KS distance of a sample against this CDF.
    pub fn ks_distance(&self, sample: &[f64]) -> f64 {
        let mut xs = sample.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = self.eval(x);
            d = d.max((f - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - f).abs());
        }
        d
    }
}

fn bad_data<E: std::fmt::Display>(e: E) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_handles_ties() {
        // {0,0,1} vs {0,1,1}: F_a jumps to 2/3 at 0, F_b to 1/3; sup = 1/3
        let a = [0.0, 0.0, 1.0];
        let b = [0.0, 1.0, 1.0];
        let d = ks_two_sample(&a, &b);
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mask_perm_sup_hand_statistic_and_calibration() {
        // a: two curves with bit0 always set, bit1 set once; b: bit0 once,
        // bit1 never. sup diff = max(|1 - 1/2|, |1/2 - 0|) = 1/2
        let a = [0b01u64, 0b11];
        let b = [0b00u64, 0b01];
        let (d, _) = mask_perm_sup(&a, &b, 2, 50, 9);
        assert!((d - 0.5).abs() < 1e-12);

        // equal-law sides: the p-value must not be extreme
        let mut gen = Stream::new(&[42, domain::PERMUTE]);
        let draw = |g: &mut Stream| {
            // staircase of random length on 8 bits
            let k = g.next_below(9) as usize;
            if k == 0 { 0u64 } else { (1u64 << k) - 1 }
        };
        let a: Vec<u64> = (0..300).map(|_| draw(&mut gen)).collect();
        let b: Vec<u64> = (0..300).map(|_| draw(&mut gen)).collect();
        let (_, p) = mask_perm_sup(&a, &b, 8, 400, 7);
        assert!(p > 0.01, "p = {p}");

        // disjoint laws: tiny p
        let a = vec![0b1111u64; 100];
        let b = vec![0b0011u64; 100];
        let (d, p) = mask_perm_sup(&a, &b, 4, 400, 7);
        assert!((d - 1.0).abs() < 1e-12);
        assert!(p < 0.02, "p = {p}");
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0, 3.0, 5.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_is_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn band_constant_at_one_percent() {
        // c(0.01) = 1.628
        let c = (-(0.01f64 / 2.0).ln() / 2.0).sqrt();
        assert!((c - 1.628).abs() < 1e-3);
        let band = ks_band(1000, 1000, 0.01);
        assert!((band - 1.628 * (2.0f64 / 1000.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn permutation_pvalue_uniform_under_null() {
        // same distribution: p should not be tiny
        let mut s = Stream::new(&[9, domain::SAMPLE]);
        let a: Vec<f64> = (0..400).map(|_| s.normal()).collect();
        let b: Vec<f64> = (0..400).map(|_| s.normal()).collect();
        let (_, p) = ks_permutation_pvalue(&a, &b, 500, 7);
        assert!(p > 0.01, "p {p}");
        // clearly different distributions: p small
        let c: Vec<f64> = (0..400).map(|_| s.normal() + 1.0).collect();
        let (_, p2) = ks_permutation_pvalue(&a, &c, 500, 7);
        assert!(p2 < 0.01, "p2 {p2}");
    }

    #[test]
    fn moments_of_known_sample() {
        let xs: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let m = moments(&xs);
        assert!((m.mean - 3.0).abs() < 1e-12);
        assert!((m.var - 2.5).abs() < 1e-12);
        assert!(m.skewness.abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-6);
        assert!((normal_cdf(1.0) - 0.8413447461).abs() < 1e-6);
        assert!((normal_cdf(-2.0) - 0.0227501319).abs() < 1e-6);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.5 * v - 1.0).collect();
        let (s, i, r2) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-10);
        assert!((i + 1.0).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sampler_matches_normal_cdf() {
        let mut s = Stream::new(&[11]);
        let xs: Vec<f64> = (0..20000).map(|_| s.normal()).collect();
        let m = moments(&xs);
        assert!(m.mean.abs() < 0.03, "mean {}", m.mean);
        assert!((m.var - 1.0).abs() < 0.04, "var {}", m.var);
        // KS against the normal CDF
        let mut xs_sorted = xs.clone();
        xs_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs_sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs_sorted.iter().enumerate() {
            d = d.max((normal_cdf(x) - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - normal_cdf(x)).abs());
        }
        assert!(d < 1.63 / n.sqrt(), "KS {d}");
    }
}
