use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::CandidateSet;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mask::ModelMask;
use crate::model::{default_sigma2_floor, fit_least_squares, gic, GicConfig};
use crate::rng::{self, tag};

/// Monte-Carlo draws used for the null law of the variance statistic.
pub const NULL_DRAWS: usize = 5000;

struct GaussFit {
    sigma2: f64,
    resid: DVector<f64>,
}

fn gauss_fit(ds: &Dataset, mask: &ModelMask) -> Result<GaussFit> {
    let fit = fit_least_squares(ds, mask)?;
    let sigma2 = fit.sigma2_hat.max(default_sigma2_floor(ds));
    let resid = fit.residuals(ds.y());
    Ok(GaussFit { sigma2, resid })
}

fn loglik_of(g: &GaussFit) -> DVector<f64> {
    let c = -0.5 * (2.0 * std::f64::consts::PI * g.sigma2).ln();
    g.resid.map(|e| c - e * e / (2.0 * g.sigma2))
}

/// Per-observation Gaussian log-likelihood at the least-squares fit with the
/// maximum-likelihood variance (floored as in the GIC).
pub fn pointwise_loglik(ds: &Dataset, mask: &ModelMask) -> Result<DVector<f64>> {
    Ok(loglik_of(&gauss_fit(ds, mask)?))
}

fn sd_n(x: &DVector<f64>) -> f64 {
    let n = x.len() as f64;
    let m = x.sum() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}

/// Standard deviation (denominator `n`) of the pointwise log-likelihood
/// ratio between `u` and `u_sharp`.
pub fn omega_hat(ds: &Dataset, u: &ModelMask, u_sharp: &ModelMask) -> Result<f64> {
    if u == u_sharp {
        return Ok(0.0);
    }
    let lu = pointwise_loglik(ds, u)?;
    let ls = pointwise_loglik(ds, u_sharp)?;
    Ok(sd_n(&(lu - ls)))
}

/// Score contributions (rows = observations) and inverse information of the
/// Gaussian linear model in `(beta_u, sigma^2)`.
fn scores_and_inverse_info(ds: &Dataset, mask: &ModelMask, g: &GaussFit) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ds.n();
    let cols = mask.active();
    let p = cols.len();
    let s2 = g.sigma2;
    let xu = ds.submatrix(&cols);
    let mut scores = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        let e = g.resid[i];
        for j in 0..p {
            scores[(i, j)] = xu[(i, j)] * e / s2;
        }
        scores[(i, p)] = (e * e - s2) / (2.0 * s2 * s2);
    }
    let mut inv = DMatrix::zeros(p + 1, p + 1);
    if p > 0 {
        let xtx = xu.tr_mul(&xu);
        let chol = xtx.cholesky().ok_or(Error::RankDeficient { rank: 0, size: p })?;
        let xtx_inv = chol.inverse();
        inv.view_mut((0, 0), (p, p)).copy_from(&(xtx_inv * (n as f64 * s2)));
    }
    inv[(p, p)] = 2.0 * s2 * s2;
    Ok((scores, inv))
}

/// Eigenvalues whose squares weight the chi-square null law of `n omega^2`
/// for the pair `(u, u_sharp)`: the spectrum of `M B`, with `B` the outer
/// product of the stacked scores and `M = diag(-A_u^-1, A_sharp^-1)`.
pub fn vuong_eigenvalues(ds: &Dataset, u: &ModelMask, u_sharp: &ModelMask) -> Result<Vec<f64>> {
    let gu = gauss_fit(ds, u)?;
    let gs = gauss_fit(ds, u_sharp)?;
    eigen_from_fits(ds, u, &gu, u_sharp, &gs)
}

fn eigen_from_fits(ds: &Dataset, u: &ModelMask, gu: &GaussFit, us: &ModelMask, gs: &GaussFit) -> Result<Vec<f64>> {
    let n = ds.n() as f64;
    let (su, iu) = scores_and_inverse_info(ds, u, gu)?;
    let (ss, is) = scores_and_inverse_info(ds, us, gs)?;
    let (pu, ps) = (su.ncols(), ss.ncols());
    let m = pu + ps;
    let mut s = DMatrix::zeros(ds.n(), m);
    s.view_mut((0, 0), (ds.n(), pu)).copy_from(&su);
    s.view_mut((0, pu), (ds.n(), ps)).copy_from(&ss);
    let mut mm = DMatrix::zeros(m, m);
    mm.view_mut((0, 0), (pu, pu)).copy_from(&(-iu));
    mm.view_mut((pu, pu), (ps, ps)).copy_from(&is);
    // rescale parameters so that B has a unit diagonal
    let b = s.tr_mul(&s) / n;
    let scale: Vec<f64> = (0..m)
        .map(|j| if b[(j, j)] > 0.0 { b[(j, j)].sqrt() } else { 1.0 })
        .collect();
    let bt = DMatrix::from_fn(m, m, |i, j| b[(i, j)] / (scale[i] * scale[j]));
    let mt = DMatrix::from_fn(m, m, |i, j| mm[(i, j)] * scale[i] * scale[j]);
    let eb = SymmetricEigen::new(bt);
    let root_vals = eb.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eb.eigenvectors * DMatrix::from_diagonal(&root_vals) * eb.eigenvectors.transpose();
    let sym = &root * mt * &root;
    let sym = (&sym + sym.transpose()) * 0.5;
    let vals = SymmetricEigen::new(sym).eigenvalues;
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(vals.iter().copied().filter(|v| v.abs() > 1e-12 * top).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityTest {
    /// `n omega_hat^2`.
    pub statistic: f64,
    pub omega_hat: f64,
    pub p_value: f64,
    pub rejected: bool,
}

fn weighted_chi2_p_value(statistic: f64, eigenvalues: &[f64], seed: u64, stream: u64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let mut g = rng::stream(seed, tag::SMS_NULL, stream, 0);
    let lam2: Vec<f64> = eigenvalues.iter().map(|l| l * l).collect();
    let mut exceed = 0usize;
    for _ in 0..NULL_DRAWS {
        let mut v = 0.0;
        for l in &lam2 {
            let z: f64 = StandardNormal.sample(&mut g);
            v += l * z * z;
        }
        if v >= statistic {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (1 + NULL_DRAWS) as f64
}

/// Variance test of `H0: omega^2 = 0` for `u` against `u_sharp`, with the
/// weighted chi-square null simulated from [`vuong_eigenvalues`]. `stream`
/// selects the random stream so that different candidates get different
/// draws under one seed.
pub fn distinguishability_test(
    ds: &Dataset,
    u: &ModelMask,
    u_sharp: &ModelMask,
    alpha: f64,
    seed: u64,
    stream: u64,
) -> Result<DistinguishabilityTest> {
    check_alpha(alpha)?;
    if u == u_sharp {
        return Ok(DistinguishabilityTest {
            statistic: 0.0,
            omega_hat: 0.0,
            p_value: 1.0,
            rejected: false,
        });
    }
    let gu = gauss_fit(ds, u)?;
    let gs = gauss_fit(ds, u_sharp)?;
    let w = sd_n(&(loglik_of(&gu) - loglik_of(&gs)));
    let statistic = ds.n() as f64 * w * w;
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        let lam = eigen_from_fits(ds, u, &gu, u_sharp, &gs)?;
        weighted_chi2_p_value(statistic, &lam, seed, stream)
    };
    Ok(DistinguishabilityTest {
        statistic,
        omega_hat: w,
        p_value,
        rejected: p_value < alpha,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn z_quantile(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha)
}

/// Rejects "u is not worse than u_sharp" when
/// `GIC(u) - GIC(u_sharp) > 2 z_{1-alpha} omega_hat sqrt(n)`.
pub fn superiority_test(
    ds: &Dataset,
    u: &ModelMask,
    u_sharp: &ModelMask,
    cfg: &GicConfig,
    alpha: f64,
) -> Result<bool> {
    check_alpha(alpha)?;
    let diff = gic(ds, u, cfg)? - gic(ds, u_sharp, cfg)?;
    let w = omega_hat(ds, u, u_sharp)?;
    Ok(superiority_rule(diff, w, ds.n(), alpha))
}

pub(crate) fn superiority_rule(gic_diff: f64, omega: f64, n: usize, alpha: f64) -> bool {
    gic_diff > 2.0 * z_quantile(alpha) * omega * (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmsRecord {
    pub index: usize,
    pub mask: ModelMask,
    pub gic: f64,
    pub omega_hat: f64,
    pub dis_statistic: f64,
    pub dis_p_value: f64,
    pub dis_rejected: bool,
    pub sup_rejected: bool,
    pub survives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmsResult {
    pub alpha: f64,
    pub best_index: usize,
    /// Surviving candidate indices, increasing.
    pub survivors: Vec<usize>,
    pub records: Vec<SmsRecord>,
}

impl SmsResult {
    pub fn relative_size(&self) -> f64 {
        self.survivors.len() as f64 / self.records.len() as f64
    }
}

/// Eliminates a candidate when it is both distinguishable from and worse
/// than the best candidate at level `alpha`. The best candidate always
/// survives.
pub fn survival_model_set(
    ds: &Dataset,
    candidates: &CandidateSet,
    alpha: f64,
    seed: u64,
) -> Result<SmsResult> {
    check_alpha(alpha)?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let best = candidates.best();
    let gbest = candidates.gics[candidates.best_index];
    let mut records = Vec::with_capacity(candidates.len());
    for (i, (m, &g)) in candidates.masks.iter().zip(&candidates.gics).enumerate() {
        let rec = if i == candidates.best_index {
            SmsRecord {
                index: i,
                mask: m.clone(),
                gic: g,
                omega_hat: 0.0,
                dis_statistic: 0.0,
                dis_p_value: 1.0,
                dis_rejected: false,
                sup_rejected: false,
                survives: true,
            }
        } else {
            let dis = distinguishability_test(ds, m, best, alpha, seed, i as u64)?;
            let sup = superiority_rule(g - gbest, dis.omega_hat, ds.n(), alpha);
            SmsRecord {
                index: i,
                mask: m.clone(),
                gic: g,
                omega_hat: dis.omega_hat,
                dis_statistic: dis.statistic,
                dis_p_value: dis.p_value,
                dis_rejected: dis.rejected,
                sup_rejected: sup,
                survives: !(dis.rejected && sup),
            }
        };
        records.push(rec);
    }
    let survivors = records.iter().filter(|r| r.survives).map(|r| r.index).collect();
    Ok(SmsResult {
        alpha,
        best_index: candidates.best_index,
        survivors,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim(n: usize, d: usize, beta: &[f64], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |i, _| {
            let mut v: f64 = StandardNormal.sample(&mut rng);
            for (j, b) in beta.iter().enumerate() {
                v += b * x[(i, j)];
            }
            v
        });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn loglik_identity_and_density_oracle() {
        let ds = sim(40, 4, &[1.0, -1.0], 1);
        let m: ModelMask = "1100".parse().unwrap();
        let l = pointwise_loglik(&ds, &m).unwrap();
        let fit = fit_least_squares(&ds, &m).unwrap();
        let s2 = fit.sigma2_hat;
        let n = 40.0;
        let total = -(n / 2.0) * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
        assert!((l.sum() - total).abs() < 1e-10);
        let e = fit.residuals(ds.y());
        for i in 0..40 {
            let dens = (-(e[i] * e[i]) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            assert!((l[i] - dens.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn perfect_fit_loglik_is_finite() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DVector::from_row_slice(&[2.0, 4.0, 6.0, 8.0]);
        let ds = Dataset::new(x, y).unwrap();
        let l = pointwise_loglik(&ds, &"1".parse().unwrap()).unwrap();
        assert!(l.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn omega_cases() {
        let ds = sim(50, 5, &[1.0, 0.5, 0.0, 0.0, 0.0], 2);
        let u: ModelMask = "11000".parse().unwrap();
        let v: ModelMask = "10100".parse().unwrap();
        assert_eq!(omega_hat(&ds, &u, &u).unwrap(), 0.0);
        let lu = pointwise_loglik(&ds, &u).unwrap();
        let lv = pointwise_loglik(&ds, &v).unwrap();
        let diff: Vec<f64> = (0..50).map(|i| lu[i] - lv[i]).collect();
        let mean = diff.iter().sum::<f64>() / 50.0;
        let var = diff.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 50.0;
        assert!((omega_hat(&ds, &u, &v).unwrap() - var.sqrt()).abs() < 1e-10);

        // an exact copy of column 0 fits identically
        let mut x = ds.x().clone();
        let c0 = x.column(0).into_owned();
        x.set_column(4, &c0);
        let dup = Dataset::new(x, ds.y().clone()).unwrap();
        let a: ModelMask = "10000".parse().unwrap();
        let b: ModelMask = "00001".parse().unwrap();
        assert!(omega_hat(&dup, &a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn eigenvalues_match_nonsymmetric_oracle() {
        let ds = sim(60, 4, &[1.0, 0.7, 0.0, 0.3], 3);
        let u: ModelMask = "1100".parse().unwrap();
        let v: ModelMask = "1001".parse().unwrap();
        let mut got = vuong_eigenvalues(&ds, &u, &v).unwrap();
        // oracle: eigenvalues of the non-symmetric W = M B directly
        let gu = gauss_fit(&ds, &u).unwrap();
        let gv = gauss_fit(&ds, &v).unwrap();
        let (su, iu) = scores_and_inverse_info(&ds, &u, &gu).unwrap();
        let (sv, iv) = scores_and_inverse_info(&ds, &v, &gv).unwrap();
        let s = DMatrix::from_fn(60, 6, |i, j| if j < 3 { su[(i, j)] } else { sv[(i, j - 3)] });
        let b = s.tr_mul(&s) / 60.0;
        let m = DMatrix::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
            (true, true) => -iu[(i, j)],
            (false, false) => iv[(i - 3, j - 3)],
            _ => 0.0,
        });
        let w = m * b;
        let mut want: Vec<f64> = w
            .complex_eigenvalues()
            .iter()
            .map(|c| {
                assert!(c.im.abs() < 1e-8);
                c.re
            })
            .filter(|v| v.abs() > 1e-9)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn distinguishability_trivial_and_power() {
        let ds = sim(100, 4, &[2.0, 0.0, 0.0, 0.0], 4);
        let u: ModelMask = "1000".parse().unwrap();
        let t = distinguishability_test(&ds, &u, &u, 0.05, 1, 0).unwrap();
        assert_eq!((t.p_value, t.rejected), (1.0, false));
        let mut rejected = 0;
        for seed in 0..20 {
            let ds = sim(100, 4, &[2.0, 0.0, 0.0, 0.0], 100 + seed);
            let t = distinguishability_test(&ds, &"0100".parse().unwrap(), &u, 0.05, seed, 0).unwrap();
            rejected += t.rejected as usize;
        }
        assert!(rejected >= 19);
    }

    #[test]
    fn distinguishability_is_calibrated_on_nested_null() {
        // u adds an irrelevant column to u_sharp: the pseudo-true densities coincide
        let reps = 300;
        let mut rejected = 0;
        for r in 0..reps {
            let ds = sim(80, 3, &[1.0, 0.0, 0.0], 1000 + r);
            let t = distinguishability_test(&ds, &"110".parse().unwrap(), &"100".parse().unwrap(), 0.05, r, 0)
                .unwrap();
            rejected += t.rejected as usize;
        }
        let rate = rejected as f64 / reps as f64;
        assert!(rate <= 0.10, "type-I rate {rate}");
    }

    #[test]
    fn superiority_rule_cases() {
        assert!(!superiority_rule(0.0, 0.3, 100, 0.05));
        assert!(superiority_rule(1e-9, 0.0, 100, 0.05));
        let z = z_quantile(0.05);
        assert!((z - 1.6448536269514722).abs() < 1e-9);
        let w = 0.2;
        let diff = 3.0 * z * w * 10.0;
        assert!(superiority_rule(diff, w, 100, 0.05));
        assert!(!superiority_rule(1.9 * z * w * 10.0, w, 100, 0.05));
        let ds = sim(50, 3, &[1.0, 0.0, 0.0], 5);
        let u: ModelMask = "100".parse().unwrap();
        let cfg = GicConfig::for_dataset(&ds);
        assert!(!superiority_test(&ds, &u, &u, &cfg, 0.05).unwrap());
    }

    #[test]
    fn sms_contract() {
        let ds = sim(120, 6, &[1.5, -1.0, 0.0, 0.0, 0.0, 0.0], 6);
        let cfg = GicConfig::for_dataset(&ds);
        let single = CandidateSet::new(&ds, &["110000".parse().unwrap()], &cfg).unwrap();
        let r = survival_model_set(&ds, &single, 0.05, 0).unwrap();
        assert_eq!(r.survivors, vec![0]);

        let masks: Vec<ModelMask> = ["110000", "111000", "100000", "010000", "000011", "110100", "001100"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let cand = CandidateSet::new(&ds, &masks, &cfg).unwrap();
        let mut prev = usize::MAX;
        for alpha in [0.001, 0.01, 0.05, 0.1, 0.2] {
            let r = survival_model_set(&ds, &cand, alpha, 9).unwrap();
            assert!(r.survivors.contains(&cand.best_index));
            assert!(r.survivors.len() <= prev);
            prev = r.survivors.len();
        }
        let r = survival_model_set(&ds, &cand, 0.05, 9).unwrap();
        // an unrelated model is eliminated, a padded true model is not
        assert!(!r.survivors.contains(&4));
        assert!(r.survivors.contains(&1));
    }
}
