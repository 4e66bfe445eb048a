//! Contingency-table tests and p-value adjustment.

use num_bigint::BigUint;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

/// Width of the log-probability band around the observed table inside which
/// "at most as probable" is decided by exact integer arithmetic instead of
/// floats. The cumulative log-factorial table carries absolute error well
/// below this for any supported total, so tables outside the band are
/// classified correctly by the float comparison alone.
const FISHER_TIE_BAND: f64 = 1e-7;

fn big_binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    // C(n, i+1) = C(n, i) * (n - i) / (i + 1), each step divides exactly.
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Relative weight of the table with top-left cell `x` under fixed margins
/// (the common denominator C(n, c1) cancels in comparisons).
fn table_weight(r1: u64, r2: u64, c1: u64, x: u64) -> BigUint {
    big_binomial(r1, x) * big_binomial(r2, c1 - x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub left: f64,
    pub right: f64,
    pub two_tailed: f64,
}

/// Fisher's exact test on 2x2 tables, backed by a cumulative log-factorial
/// table so that cell totals up to about 1e5 stay accurate.
pub struct Fisher2x2 {
    lnf: Vec<f64>,
}

impl Fisher2x2 {
    pub fn new(max_total: usize) -> Self {
        let mut lnf = Vec::with_capacity(max_total + 1);
        lnf.push(0.0);
        let mut acc = 0.0;
        for k in 1..=max_total {
            acc += (k as f64).ln();
            lnf.push(acc);
        }
        Fisher2x2 { lnf }
    }

    fn ln_table_prob(&self, a: u64, b: u64, c: u64, d: u64) -> f64 {
        let n = a + b + c + d;
        let lnf = |k: u64| self.lnf[k as usize];
        lnf(a + b) + lnf(c + d) + lnf(a + c) + lnf(b + d)
            - lnf(n)
            - lnf(a)
            - lnf(b)
            - lnf(c)
            - lnf(d)
    }

    /// Left, right and two-tailed p-values for the table
    /// `[[a, b], [c, d]]` with all margins fixed. The two-tailed value sums
    /// the probabilities of tables no more probable than the observed one.
    /// A zero margin leaves only one achievable table, so every p is 1.
    pub fn test(&self, a: u64, b: u64, c: u64, d: u64) -> FisherResult {
        let n = a + b + c + d;
        assert!(
            (n as usize) < self.lnf.len(),
            "table total {n} exceeds precomputed factorials"
        );
        let r1 = a + b;
        let r2 = c + d;
        let c1 = a + c;
        let c2 = b + d;
        if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
            return FisherResult { left: 1.0, right: 1.0, two_tailed: 1.0 };
        }
        let lo = c1.saturating_sub(r2);
        let hi = r1.min(c1);
        let ln_obs = self.ln_table_prob(a, b, c, d);
        let mut obs_weight: Option<BigUint> = None;

        let mut left = 0.0;
        let mut right = 0.0;
        let mut two = 0.0;
        for x in lo..=hi {
            let ln_p = self.ln_table_prob(x, r1 - x, c1 - x, r2 + x - c1);
            let p = ln_p.exp();
            if x <= a {
                left += p;
            }
            if x >= a {
                right += p;
            }
            let include = if ln_p <= ln_obs - FISHER_TIE_BAND {
                true
            } else if ln_p <= ln_obs + FISHER_TIE_BAND {
                let obs = obs_weight.get_or_insert_with(|| table_weight(r1, r2, c1, a));
                table_weight(r1, r2, c1, x) <= *obs
            } else {
                false
            };
            if include {
                two += p;
            }
        }
        FisherResult {
            left: left.min(1.0),
            right: right.min(1.0),
            two_tailed: two.min(1.0),
        }
    }
}

/// One-off Fisher's exact test; builds the factorial table for this call.
pub fn fisher_exact(a: u64, b: u64, c: u64, d: u64) -> FisherResult {
    Fisher2x2::new((a + b + c + d) as usize).test(a, b, c, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Result {
    pub statistic: f64,
    pub pvalue: f64,
}

/// Pearson chi-squared test on a 2x2 table, one degree of freedom, no
/// continuity correction. Counts are taken as `f64` because redundancy
/// analysis feeds in cell-grid sizes far beyond u32. A zero margin makes
/// the statistic undefined; the test degenerates to statistic 0, p 1.
pub fn chi2_2x2(a: f64, b: f64, c: f64, d: f64) -> Chi2Result {
    let n = a + b + c + d;
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let c2 = b + d;
    if r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return Chi2Result { statistic: 0.0, pvalue: 1.0 };
    }
    let diff = a * d - b * c;
    let statistic = n * diff * diff / (r1 * r2 * c1 * c2);
    // Survival of chi-squared with 1 df at x equals erfc(sqrt(x/2)).
    let pvalue = erfc((statistic / 2.0).sqrt());
    Chi2Result { statistic, pvalue }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjust {
    BenjaminiHochberg,
    Bonferroni,
}

/// Multiple-testing adjustment. Benjamini-Hochberg is the step-up variant
/// with the usual monotonicity pass; Bonferroni is `min(1, m * p)`.
pub fn adjust(pvalues: &[f64], method: Adjust) -> Vec<f64> {
    let m = pvalues.len();
    if m == 0 {
        return Vec::new();
    }
    let mf = m as f64;
    match method {
        Adjust::Bonferroni => pvalues.iter().map(|p| (p * mf).min(1.0)).collect(),
        Adjust::BenjaminiHochberg => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| pvalues[i].partial_cmp(&pvalues[j]).unwrap());
            let mut adjusted = vec![0.0; m];
            let mut running = f64::INFINITY;
            for rank in (1..=m).rev() {
                let idx = order[rank - 1];
                let raw = pvalues[idx] * mf / rank as f64;
                running = running.min(raw).min(1.0);
                adjusted[idx] = running;
            }
            adjusted
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub mean_diff: f64,
    pub pvalue: f64,
}

fn sample_var(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> WelchResult {
    assert!(!x.is_empty() && !y.is_empty(), "welch_t_test needs non-empty groups");
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let mx = x.iter().sum::<f64>() / nx;
    let my = y.iter().sum::<f64>() / ny;
    let vx = sample_var(x, mx);
    let vy = sample_var(y, my);
    let mean_diff = mx - my;
    let se2 = vx / nx + vy / ny;
    if se2 <= 0.0 {
        // No within-group variance: the test degenerates.
        let pvalue = if mean_diff == 0.0 { 1.0 } else { 0.0 };
        return WelchResult { t: if mean_diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean_diff) }, df: f64::INFINITY, mean_diff, pvalue };
    }
    let t = mean_diff / se2.sqrt();
    let mut denom = 0.0;
    if x.len() > 1 {
        denom += (vx / nx) * (vx / nx) / (nx - 1.0);
    }
    if y.len() > 1 {
        denom += (vy / ny) * (vy / ny) / (ny - 1.0);
    }
    let df = if denom > 0.0 { se2 * se2 / denom } else { 1.0 };
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    let pvalue = (2.0 * dist.sf(t.abs())).min(1.0);
    WelchResult { t, df, mean_diff, pvalue }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_small_tables() {
        // [[3,1],[1,3]]: hypergeometric weights [1,16,36,16,1]/70.
        let r = fisher_exact(3, 1, 1, 3);
        assert!((r.two_tailed - 34.0 / 70.0).abs() < 1e-12);
        assert!((r.left - 69.0 / 70.0).abs() < 1e-12);
        assert!((r.right - 17.0 / 70.0).abs() < 1e-12);

        // [[5,0],[0,5]]: only the two extreme tables are as improbable.
        let r = fisher_exact(5, 0, 0, 5);
        assert!((r.two_tailed - 2.0 / 252.0).abs() < 1e-12);
        assert!((r.right - 1.0 / 252.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_degenerate_margin() {
        let r = fisher_exact(0, 0, 3, 5);
        assert_eq!(r, FisherResult { left: 1.0, right: 1.0, two_tailed: 1.0 });
    }

    #[test]
    fn fisher_tails_sum_consistently() {
        // left + right counts the observed table twice.
        for (a, b, c, d) in [(2, 7, 8, 2), (10, 3, 5, 9), (1, 1, 1, 1)] {
            let r = fisher_exact(a, b, c, d);
            let obs = {
                let f = Fisher2x2::new((a + b + c + d) as usize);
                f.ln_table_prob(a, b, c, d).exp()
            };
            assert!((r.left + r.right - 1.0 - obs).abs() < 1e-12);
        }
    }

    #[test]
    fn chi2_known_value() {
        let r = chi2_2x2(40.0, 10.0, 10.0, 40.0);
        assert!((r.statistic - 36.0).abs() < 1e-12);
        assert!((r.pvalue - 1.9731752900754e-9).abs() < 1e-13, "{}", r.pvalue);
    }

    #[test]
    fn chi2_zero_margin() {
        assert_eq!(chi2_2x2(0.0, 0.0, 5.0, 5.0).pvalue, 1.0);
    }

    #[test]
    fn bh_known_vector() {
        let adj = adjust(&[0.01, 0.04, 0.03], Adjust::BenjaminiHochberg);
        let expect = [0.03, 0.04, 0.04];
        for (a, b) in adj.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{adj:?}");
        }
    }

    #[test]
    fn bonferroni_caps_at_one() {
        let adj = adjust(&[0.4, 0.001], Adjust::Bonferroni);
        assert_eq!(adj, vec![0.8, 0.002]);
        let adj = adjust(&[0.9, 0.8], Adjust::Bonferroni);
        assert_eq!(adj, vec![1.0, 1.0]);
    }

    #[test]
    fn bh_preserves_order_relationships() {
        let ps = [0.9, 0.001, 0.04, 0.03, 0.6, 0.0401];
        let adj = adjust(&ps, Adjust::BenjaminiHochberg);
        for (i, a) in adj.iter().enumerate() {
            assert!(*a >= ps[i] && *a <= 1.0);
            for (j, b) in adj.iter().enumerate() {
                if ps[i] <= ps[j] {
                    assert!(a <= b, "{i} {j} {adj:?}");
                }
            }
        }
    }

    #[test]
    fn welch_symmetry_and_degenerate_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 3.0, 4.0, 5.0];
        let r1 = welch_t_test(&x, &y);
        let r2 = welch_t_test(&y, &x);
        assert!((r1.pvalue - r2.pvalue).abs() < 1e-15);
        assert!((r1.t + r2.t).abs() < 1e-15);
        assert!((r1.df - 6.0).abs() < 1e-12);

        let r = welch_t_test(&[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(r.pvalue, 1.0);
        let r = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]);
        assert_eq!(r.pvalue, 0.0);
    }

    #[test]
    fn welch_matches_numeric_t_integration() {
        // Independent check of the t tail: Simpson integration of the pdf.
        fn t_pdf(x: f64, df: f64) -> f64 {
            use statrs::function::gamma::ln_gamma;
            let c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)
                - 0.5 * (df * std::f64::consts::PI).ln();
            (c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
        }
        let x = [1.1, 2.3, 2.9, 4.2, 5.0];
        let y = [2.0, 3.1, 4.4, 5.5, 6.1, 7.2];
        let r = welch_t_test(&x, &y);
        let (a, b) = (r.t.abs(), 60.0);
        let steps = 200000;
        let h = (b - a) / steps as f64;
        let mut tail = t_pdf(a, r.df) + t_pdf(b, r.df);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            tail += w * t_pdf(a + i as f64 * h, r.df);
        }
        tail *= h / 3.0;
        assert!((r.pvalue - 2.0 * tail).abs() < 1e-8, "{} vs {}", r.pvalue, 2.0 * tail);
    }
}
