//! Welch's heteroscedastic one-way ANOVA.
//!
//! The experiment batches have unequal sizes (failures are dropped) and no
//! reason to share variance across methods, so group comparisons use the
//! Welch statistic rather than the classical F.

use thiserror::Error;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[derive(Debug, Error, PartialEq)]
pub enum AnovaError {
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} has fewer than two observations")]
    TooFewObservations(usize),
    #[error("group {0} has zero variance; its weight is undefined")]
    ZeroVariance(usize),
    #[error("group {0} contains a non-finite value")]
    NonFinite(usize),
}

/// Result of the test: the statistic, its two degrees of freedom, and the
/// right-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchAnova {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub p: f64,
}

/// Welch's F for k independent groups. Each group is weighted by n over its
/// sample variance; the denominator degrees of freedom follow the
/// Welch-Satterthwaite correction.
pub fn welch_anova(groups: &[&[f64]]) -> Result<WelchAnova, AnovaError> {
    let k = groups.len();
    if k < 2 {
        return Err(AnovaError::TooFewGroups(k));
    }
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    for (j, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(AnovaError::TooFewObservations(j));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AnovaError::NonFinite(j));
        }
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            return Err(AnovaError::ZeroVariance(j));
        }
        weights.push(n / var);
        means.push(mean);
    }

    let kf = k as f64;
    let w_total: f64 = weights.iter().sum();
    let weighted_mean: f64 =
        weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / w_total;
    let numerator: f64 = weights
        .iter()
        .zip(&means)
        .map(|(w, m)| w * (m - weighted_mean).powi(2))
        .sum::<f64>()
        / (kf - 1.0);
    let lambda: f64 = weights
        .iter()
        .zip(groups)
        .map(|(w, g)| (1.0 - w / w_total).powi(2) / (g.len() as f64 - 1.0))
        .sum();
    let f = numerator / (1.0 + 2.0 * (kf - 2.0) / (kf * kf - 1.0) * lambda);
    let df1 = kf - 1.0;
    let df2 = (kf * kf - 1.0) / (3.0 * lambda);

    let dist = FisherSnedecor::new(df1, df2).expect("positive degrees of freedom");
    let p = dist.sf(f);
    Ok(WelchAnova { f, df1, df2, p })
}
