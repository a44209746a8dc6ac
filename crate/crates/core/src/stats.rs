//! Significance tests: two-sided Fisher exact test on 2x2 tables and the
//! Pearson chi-square test of independence.

use alloc::vec;

use crate::effects::StratumTable2x2;
use crate::error::{Error, Result};
use crate::table::{is_whole, JointTable, VarSet};

/// Tables whose probability is within this relative margin of the observed
/// one count as equally extreme.
const FISHER_TIE_TOL: f64 = 1e-7;

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_TINY: f64 = 1e-300;
const GAMMA_MAX_TERMS: usize = 10_000;

fn ln_choose(n: f64, k: f64) -> f64 {
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// Two-sided p-value: the total hypergeometric probability of all tables
/// with the observed margins that are no more likely than the observed one.
pub fn fisher_exact_2x2(table: &StratumTable2x2) -> Result<f64> {
    let entries = [table.a, table.b, table.c, table.d];
    if entries.iter().any(|v| !is_whole(*v) || *v < 0.0) {
        return Err(Error::NonIntegerCounts);
    }
    let row1 = table.a + table.b;
    let row2 = table.c + table.d;
    let col1 = table.a + table.c;
    let n = row1 + row2;
    if n == 0.0 {
        return Ok(1.0);
    }
    let ln_denominator = ln_choose(n, col1);
    let ln_p = |k: f64| ln_choose(row1, k) + ln_choose(row2, col1 - k) - ln_denominator;
    let lo = (col1 - row2).max(0.0) as u64;
    let hi = row1.min(col1) as u64;
    let ln_observed = ln_p(table.a);
    let threshold = ln_observed + libm::log1p(FISHER_TIE_TOL);
    let mut p = 0.0;
    for k in lo..=hi {
        let lk = ln_p(k as f64);
        if lk <= threshold {
            p += libm::exp(lk);
        }
    }
    Ok(p.min(1.0))
}

/// Regularized upper incomplete gamma `Q(a, x) = Gamma(a, x) / Gamma(a)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    let ln_prefactor = -x + a * libm::log(x) - libm::lgamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_TERMS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * libm::exp(ln_prefactor)).max(0.0)
    } else {
        // modified Lentz continued fraction for Q(a, x)
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / GAMMA_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_TERMS {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < GAMMA_TINY {
                d = GAMMA_TINY;
            }
            c = b + an / c;
            if c.abs() < GAMMA_TINY {
                c = GAMMA_TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        libm::exp(ln_prefactor) * h
    }
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    regularized_gamma_q(dof / 2.0, statistic / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of independence between the composite profiles
/// of `rows` and of `cols`.
pub fn chi_square_independence(
    t: &JointTable,
    rows: &VarSet,
    cols: &VarSet,
) -> Result<ChiSquareTest> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptySubset);
    }
    if !rows.is_disjoint(cols) {
        return Err(Error::OverlappingSubsets);
    }
    let schema = t.schema();
    let n_rows = schema.subschema(rows)?.n_cells();
    let n_cols = schema.subschema(cols)?.n_cells();
    let row_map = schema.projection_map(rows);
    let col_map = schema.projection_map(cols);
    let mut observed = vec![0.0; n_rows * n_cols];
    for (i, w) in t.weights().iter().enumerate() {
        observed[row_map[i] * n_cols + col_map[i]] += w;
    }
    let mut row_sums = vec![0.0; n_rows];
    let mut col_sums = vec![0.0; n_cols];
    for r in 0..n_rows {
        for c in 0..n_cols {
            row_sums[r] += observed[r * n_cols + c];
            col_sums[c] += observed[r * n_cols + c];
        }
    }
    let total: f64 = row_sums.iter().sum();
    let mut statistic = 0.0;
    for r in 0..n_rows {
        for c in 0..n_cols {
            let expected = row_sums[r] * col_sums[c] / total;
            if expected.is_nan() || expected <= 0.0 {
                return Err(Error::ZeroExpectedCount { row: r, col: c });
            }
            let diff = observed[r * n_cols + c] - expected;
            statistic += diff * diff / expected;
        }
    }
    let dof = (n_rows - 1) * (n_cols - 1);
    let p_value = if dof == 0 {
        1.0
    } else {
        chi_square_sf(statistic, dof as f64)
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_q_closed_forms() {
        // Q(1, x) = exp(-x), Q(1/2, x) = erfc(sqrt(x))
        for &x in &[0.01, 0.3, 1.0, 2.5, 7.0, 30.0, 200.0] {
            let q1 = regularized_gamma_q(1.0, x);
            let e = libm::exp(-x);
            assert!(((q1 - e) / e).abs() < 1e-12, "Q(1,{x})={q1} vs {e}");
            let qh = regularized_gamma_q(0.5, x);
            let r = libm::erfc(libm::sqrt(x));
            assert!(((qh - r) / r).abs() < 1e-10, "Q(1/2,{x})={qh} vs {r}");
        }
        assert_eq!(regularized_gamma_q(3.0, 0.0), 1.0);
    }

    #[test]
    fn fisher_symmetric_rows_is_one() {
        let t = StratumTable2x2::new(5.0, 5.0, 5.0, 5.0).unwrap();
        assert!((fisher_exact_2x2(&t).unwrap() - 1.0).abs() < 1e-12);
        let t = StratumTable2x2::new(5.5, 5.0, 5.0, 5.0).unwrap();
        assert_eq!(fisher_exact_2x2(&t), Err(Error::NonIntegerCounts));
    }

    #[test]
    fn fisher_small_known_value() {
        // tea tasting: [[3, 1], [1, 3]] two-sided p = 34/70
        let t = StratumTable2x2::new(3.0, 1.0, 1.0, 3.0).unwrap();
        assert!((fisher_exact_2x2(&t).unwrap() - 34.0 / 70.0).abs() < 1e-12);
    }
}
