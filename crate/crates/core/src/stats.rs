//! Two-sample t-tests for comparing missing-rate samples between methods.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Sample means closer than this are reported as identical.
pub const IDENTICAL_MEANS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variance {
    /// Student's test with a pooled variance estimate.
    #[default]
    Pooled,
    /// Welch's test with Welch-Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TTestResult {
    /// Both samples have the same mean; no statistic is computed.
    IdenticalMeans,
    Computed {
        statistic: f64,
        degrees_of_freedom: f64,
        /// Two-sided.
        p_value: f64,
    },
}

impl TTestResult {
    pub fn identical_means(&self) -> bool {
        matches!(self, TTestResult::IdenticalMeans)
    }

    pub fn p_value(&self) -> Option<f64> {
        match self {
            TTestResult::IdenticalMeans => None,
            TTestResult::Computed { p_value, .. } => Some(*p_value),
        }
    }

    pub fn statistic(&self) -> Option<f64> {
        match self {
            TTestResult::IdenticalMeans => None,
            TTestResult::Computed { statistic, .. } => Some(*statistic),
        }
    }
}

/// Pooled-variance two-sample t-test, two-sided.
pub fn two_sample_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    two_sample_ttest_with(a, b, Variance::Pooled)
}

/// Two-sided two-sample t-test with the chosen variance treatment.
///
/// When the means differ but both samples are constant the statistic is
/// infinite and the p-value is 0.
pub fn two_sample_ttest_with(a: &[f64], b: &[f64], variance: Variance) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "t-test needs at least 2 values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("t-test samples must be finite"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let diff = mean_a - mean_b;
    if diff.abs() <= IDENTICAL_MEANS_TOLERANCE {
        return Ok(TTestResult::IdenticalMeans);
    }

    let (se, df) = match variance {
        Variance::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        Variance::Welch => {
            let (qa, qb) = (var_a / na, var_b / nb);
            let se2 = qa + qb;
            let df = if se2 > 0.0 {
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (se2.sqrt(), df)
        }
    };
    if se == 0.0 {
        return Ok(TTestResult::Computed {
            statistic: diff.signum() * f64::INFINITY,
            degrees_of_freedom: df,
            p_value: 0.0,
        });
    }
    let statistic = diff / se;
    Ok(TTestResult::Computed {
        statistic,
        degrees_of_freedom: df,
        p_value: students_t_two_sided_p(statistic, df),
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn students_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}
