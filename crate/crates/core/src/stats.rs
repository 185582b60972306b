//! Small statistical helpers shared by the analyses and their tests.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, StudentsT};

/// Streaming mean and variance (Welford), mergeable across partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// Sample variance (n − 1 denominator); needs two observations.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.n > 1).then(|| (self.m2 / (self.n - 1) as f64).max(0.0))
    }

    pub fn sample_std(&self) -> Option<f64> {
        self.sample_variance().map(f64::sqrt)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> Option<f64> {
        self.sample_std().map(|s| s / (self.n as f64).sqrt())
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Median of a slice of finite values; mean of the middle pair for even sizes.
pub fn median_f64(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Outcome of a chi-square test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi_square_tail(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Goodness of fit of `counts` to equal expected frequencies.
/// `None` when there are fewer than two cells or no observations.
pub fn chi_square_uniform(counts: &[u64]) -> Option<ChiSquare> {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return None;
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = (counts.len() - 1) as f64;
    Some(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_tail(statistic, dof),
    })
}

/// Two-sample homogeneity test on paired count vectors. Cells empty in both
/// samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Option<ChiSquare> {
    assert_eq!(a.len(), b.len(), "count vectors differ in length");
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    if ta == 0 || tb == 0 {
        return None;
    }
    let total = (ta + tb) as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        for (obs, row) in [(x, ta), (y, tb)] {
            let exp = col * row as f64 / total;
            statistic += (obs as f64 - exp).powi(2) / exp;
        }
    }
    if cells < 2 {
        return None;
    }
    let dof = (cells - 1) as f64;
    Some(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_tail(statistic, dof),
    })
}

/// Two-sided exact binomial test of `successes` out of `trials` against `p`,
/// summing the probabilities of outcomes no more likely than the observed one.
pub fn binomial_two_sided(successes: u64, trials: u64, p: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p, trials).expect("p in [0, 1]");
    use statrs::distribution::Discrete;
    let observed = dist.pmf(successes);
    let tol = observed * (1.0 + 1e-7);
    let p_value: f64 = (0..=trials).map(|k| dist.pmf(k)).filter(|&q| q <= tol).sum();
    p_value.min(1.0)
}

/// Binomial test of max/min parity: H0 says either kind is equally likely.
pub fn parity_test(max_count: u64, min_count: u64) -> f64 {
    binomial_two_sided(max_count, max_count + min_count, 0.5)
}

/// Upper tail `P(X ≥ k)` of a binomial.
pub fn binomial_upper_tail(k: u64, trials: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p, trials).expect("p in [0, 1]");
    dist.sf(k - 1)
}

/// Lower tail `P(X ≤ k)` of a binomial.
pub fn binomial_lower_tail(k: u64, trials: u64, p: f64) -> f64 {
    let dist = Binomial::new(p, trials).expect("p in [0, 1]");
    dist.cdf(k)
}

/// One-sample t-test of mean > 0 over paired differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mean: f64,
    pub t: f64,
    pub dof: f64,
    /// One-sided p-value for the alternative `mean > 0`.
    pub p_greater: f64,
}

pub fn one_sample_t(values: &[f64]) -> Option<TTest> {
    let w: Welford = values.iter().copied().collect();
    let se = w.std_error()?;
    let mean = w.mean()?;
    let dof = (w.count() - 1) as f64;
    let (t, p_greater) = if se == 0.0 {
        let t = if mean > 0.0 { f64::INFINITY } else if mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        (t, if mean > 0.0 { 0.0 } else if mean < 0.0 { 1.0 } else { 0.5 })
    } else {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
        (t, dist.sf(t))
    };
    Some(TTest { mean, t, dof, p_greater })
}
