//! Rank statistics, special functions and the hypothesis tests used to
//! validate the transfer grid.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the groups of tied values.
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        sizes.push(j - i + 1);
        i = j + 1;
    }
    sizes
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.is_empty() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation (Pearson on average ranks). Constant input gives 0.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y)).unwrap_or(0.0)
}

const EPS: f64 = 1e-15;
const MAX_TERMS: usize = 10_000;

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularised upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

/// Regularised lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_TERMS {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, x / 2.0)
}

/// Two-sided tail of the standard normal, `P(|Z| ≥ |z|)`.
pub fn normal_two_sided(z: f64) -> f64 {
    // erfc(|z|/√2) = Q(1/2, z²/2)
    gamma_q(0.5, z * z / 2.0)
}

/// Two-sided tail of Student's t, `P(|T| ≥ |t|)`.
pub fn student_two_sided(t: f64, dof: f64) -> f64 {
    beta_inc(dof / 2.0, 0.5, dof / (dof + t * t))
}

#[derive(Debug, Clone, Serialize)]
pub struct StatResult {
    pub test: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub group_sizes: Vec<usize>,
    /// Dunn only: Bonferroni-corrected pairwise p-values (symmetric, unit
    /// diagonal).
    pub pairwise: Option<Vec<Vec<f64>>>,
    /// Statistic undefined (zero variance); p-value set by convention.
    pub degenerate: bool,
}

struct Pooled {
    ranks: Vec<Vec<f64>>,
    n: f64,
    tie_term: f64,
}

fn pool_ranks(groups: &[&[f64]]) -> Pooled {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let ranks = average_ranks(&all);
    let mut out = Vec::with_capacity(groups.len());
    let mut at = 0;
    for g in groups {
        out.push(ranks[at..at + g.len()].to_vec());
        at += g.len();
    }
    let tie_term = tie_sizes(&all).iter().map(|&t| (t * t * t - t) as f64).sum();
    Pooled {
        ranks: out,
        n: all.len() as f64,
        tie_term,
    }
}

/// Kruskal–Wallis H with tie correction; p from χ²(k−1).
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<StatResult> {
    if groups.len() < 2 {
        return Err(Error::invalid("Kruskal-Wallis needs at least two groups"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::invalid("Kruskal-Wallis group is empty"));
    }
    let total: usize = groups.iter().map(|g| g.len()).sum();
    if total < 5 {
        return Err(Error::invalid("Kruskal-Wallis needs at least 5 observations"));
    }
    let pooled = pool_ranks(groups);
    let n = pooled.n;
    let correction = 1.0 - pooled.tie_term / (n * n * n - n);
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    if correction <= 0.0 {
        return Ok(StatResult {
            test: "kruskal_wallis",
            statistic: 0.0,
            p_value: 1.0,
            group_sizes: sizes,
            pairwise: None,
            degenerate: true,
        });
    }
    let mean_rank = (n + 1.0) / 2.0;
    let ss: f64 = pooled
        .ranks
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            r.len() as f64 * (m - mean_rank).powi(2)
        })
        .sum();
    let h = 12.0 / (n * (n + 1.0)) * ss / correction;
    Ok(StatResult {
        test: "kruskal_wallis",
        statistic: h,
        p_value: chi2_sf(h, (groups.len() - 1) as f64).clamp(0.0, 1.0),
        group_sizes: sizes,
        pairwise: None,
        degenerate: false,
    })
}

/// Dunn's pairwise test on pooled rank means with tie-corrected variance,
/// Bonferroni-corrected two-sided p-values clamped to 1. `statistic` holds
/// the largest |z|; `p_value` the smallest corrected p.
pub fn dunn_posthoc(groups: &[&[f64]]) -> Result<StatResult> {
    if groups.len() < 3 {
        return Err(Error::invalid("Dunn's test needs at least three groups"));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::invalid("Dunn's test group is empty"));
    }
    let pooled = pool_ranks(groups);
    let n = pooled.n;
    let k = groups.len();
    let comparisons = (k * (k - 1) / 2) as f64;
    let sigma2 = n * (n + 1.0) / 12.0 - pooled.tie_term / (12.0 * (n - 1.0));
    let means: Vec<f64> = pooled.ranks.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let mut p = vec![vec![1.0; k]; k];
    let mut max_z = 0.0f64;
    let degenerate = sigma2 <= 0.0;
    for i in 0..k {
        for j in i + 1..k {
            if degenerate {
                continue;
            }
            let se = (sigma2 * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let z = (means[i] - means[j]) / se;
            max_z = max_z.max(z.abs());
            let corrected = (normal_two_sided(z) * comparisons).min(1.0);
            p[i][j] = corrected;
            p[j][i] = corrected;
        }
    }
    let min_p = p.iter().flatten().cloned().fold(1.0, f64::min);
    Ok(StatResult {
        test: "dunn_bonferroni",
        statistic: max_z,
        p_value: min_p,
        group_sizes: groups.iter().map(|g| g.len()).collect(),
        pairwise: Some(p),
        degenerate,
    })
}

/// Paired two-sided t-test on `x − y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() {
        return Err(Error::invalid("paired samples differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sizes = vec![x.len(), y.len()];
    if var <= 0.0 {
        let zero = mean == 0.0;
        return Ok(StatResult {
            test: "paired_t",
            statistic: if zero { 0.0 } else { mean.signum() * f64::INFINITY },
            p_value: if zero { 1.0 } else { 0.0 },
            group_sizes: sizes,
            pairwise: None,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / n.sqrt());
    Ok(StatResult {
        test: "paired_t",
        statistic: t,
        p_value: student_two_sided(t, n - 1.0).clamp(0.0, 1.0),
        group_sizes: sizes,
        pairwise: None,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionSummary {
    pub slope: f64,
    pub intercept: f64,
    /// NaN when x or y has zero variance (flagged by `degenerate`).
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub n: usize,
    pub degenerate: bool,
}

/// Ordinary least squares of `y` on `x` with both correlations.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<RegressionSummary> {
    if x.len() != y.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    if x.len() < 3 {
        return Err(Error::invalid("regression needs at least three points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Ok(RegressionSummary {
            slope: f64::NAN,
            intercept: f64::NAN,
            pearson_r: f64::NAN,
            spearman_rho: f64::NAN,
            n: x.len(),
            degenerate: true,
        });
    }
    let slope = sxy / sxx;
    let r = pearson(x, y);
    Ok(RegressionSummary {
        slope,
        intercept: my - slope * mx,
        pearson_r: r.unwrap_or(f64::NAN),
        spearman_rho: spearman(x, y),
        n: x.len(),
        degenerate: r.is_none(),
    })
}
