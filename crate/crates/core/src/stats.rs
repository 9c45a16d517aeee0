//! Small statistical helpers shared by the estimators.

use serde::Serialize;

/// Quality flags attached to estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Some quantity vanished in the sample (e.g. zero hits at large depth).
    Censored,
    /// Value clamped into its admissible range.
    Clamped,
    /// The fit had too little signal to be meaningful.
    Degenerate,
    /// Estimates at the full and half horizon disagree beyond 2 sigma.
    HorizonSensitive,
    /// Some runs hit a safety cap before finishing.
    CapReached,
    /// Least-squares problem was ill-conditioned.
    IllConditioned,
    /// The quantity is `-inf` (log of zero).
    NegInfinite,
    /// No sign change found on the grid.
    NoCrossing,
}

/// A Monte Carlo or fitted estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n_samples: u64, method: &'static str) -> Self {
        Self { value, stderr: stderr.max(0.0), n_samples: n_samples.max(1), method, ci95: None, flags: Vec::new() }
    }

    pub fn exact(value: f64, method: &'static str) -> Self {
        Self::new(value, 0.0, 1, method)
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flag(flag);
        self
    }

    pub fn flag(&mut self, flag: Flag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
            self.flags.sort();
        }
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// Binomial proportion with a Wilson 95% interval.
    pub fn proportion(hits: u64, n: u64, method: &'static str) -> Self {
        let n = n.max(1);
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let mut e = Self::new(p, se, n, method);
        e.ci95 = Some(wilson(hits, n, 1.959_963_984_540_054));
        e
    }
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson(hits: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n.max(1) as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = csum(xs.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = csum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Result of a weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope from the supplied weights (inverse variances).
    pub slope_se: f64,
    /// Standard error of the slope from the residual scatter.
    pub slope_se_resid: f64,
}

/// Weighted least squares with weights `w_i = 1 / Var(y_i)`.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw = csum(w.iter().copied());
    if sw <= 0.0 {
        return None;
    }
    let xm = csum(x.iter().zip(w).map(|(x, w)| x * w)) / sw;
    let ym = csum(y.iter().zip(w).map(|(y, w)| y * w)) / sw;
    let sxx = csum(x.iter().zip(w).map(|(x, w)| w * (x - xm) * (x - xm)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = csum((0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)));
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss = csum((0..n).map(|i| {
        let r = y[i] - intercept - slope * x[i];
        w[i] * r * r
    }));
    let slope_se_resid = if n > 2 { (rss / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Some(LineFit { intercept, slope, slope_se: (1.0 / sxx).sqrt(), slope_se_resid })
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    weighted_line_fit(x, y, &vec![1.0; x.len()])
}

/// Delete-one-group jackknife standard error for a statistic of grouped data.
pub fn jackknife_se(leave_one_out: &[f64]) -> f64 {
    let g = leave_one_out.len();
    if g < 2 {
        return 0.0;
    }
    let finite: Vec<f64> = leave_one_out.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return f64::INFINITY;
    }
    let m = csum(finite.iter().copied()) / finite.len() as f64;
    let ss = csum(finite.iter().map(|v| (v - m) * (v - m)));
    ((g as f64 - 1.0) / g as f64 * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson(0, 50, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.5 - 0.25 * x).collect();
        let fit = line_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-14);
        assert!((fit.intercept - 1.5).abs() < 1e-14);
        assert!(fit.slope_se_resid < 1e-12);
    }

    #[test]
    fn compensated_sum_is_order_stable() {
        let xs: Vec<f64> = (0..10_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let fwd = csum(xs.iter().copied());
        let rev = csum(xs.iter().rev().copied());
        assert!((fwd - rev).abs() < 1e-12);
        assert_eq!(csum([1e16, 1.0, -1e16]), 1.0);
    }
}
