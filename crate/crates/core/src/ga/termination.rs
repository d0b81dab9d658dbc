use statrs::distribution::{ContinuousCDF, StudentsT};

use super::GaConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub statistic: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unequal-variance two-sample t-test of equal means.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidConfig("Welch test needs at least two values per sample".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let statistic = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let p_value = (2.0 * dist.sf(statistic.abs())).min(1.0);
    Ok(WelchTest {
        statistic,
        df,
        p_value,
    })
}

/// Termination rule, checked at generation `generation >= termination_gap`.
///
/// Compares the fitness values of the current generation with those
/// `termination_gap` generations earlier. By default the run stops when
/// equality of means is *not* rejected at `termination_alpha` (the mean
/// fitness has stabilised); with `terminate_on_reject` it stops on rejection.
/// Always stops at `max_generations`.
pub fn should_terminate(generation: usize, now: &[f64], lagged: &[f64], cfg: &GaConfig) -> bool {
    if generation >= cfg.max_generations {
        return true;
    }
    if generation < cfg.termination_gap {
        return false;
    }
    let rejected = match welch_t_test(now, lagged) {
        Ok(t) => t.p_value < cfg.termination_alpha,
        Err(Error::DegenerateVariance) => {
            let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
            mean(now) != mean(lagged)
        }
        Err(_) => false,
    };
    rejected == cfg.terminate_on_reject
}
