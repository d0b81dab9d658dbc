//! Least-squares fitting, the generalized information criterion and the
//! history-aware fitness function.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mask::ModelMask;

/// Relative threshold on `|R_jj| / max |R_ii|` below which a column of the
/// selected design is treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub rss: f64,
    /// `rss / n`.
    pub sigma2_hat: f64,
    /// Coefficients for the active columns, in increasing column order.
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    /// Diagonal of the hat matrix `X_u (X_u' X_u)^-1 X_u'`.
    pub hat_diagonals: DVector<f64>,
    pub rank: usize,
}

impl FitResult {
    pub fn residuals(&self, y: &DVector<f64>) -> DVector<f64> {
        y - &self.fitted
    }
}

/// Penalty and variance floor of the GIC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GicConfig {
    pub kappa_n: f64,
    pub sigma2_floor: f64,
}

impl GicConfig {
    pub fn new(kappa_n: f64, sigma2_floor: f64) -> Result<Self> {
        if !(kappa_n > 0.0 && kappa_n.is_finite()) {
            return Err(Error::InvalidConfig(format!("kappa_n must be positive, got {kappa_n}")));
        }
        if !(sigma2_floor > 0.0 && sigma2_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma2_floor must be positive, got {sigma2_floor}"
            )));
        }
        Ok(Self {
            kappa_n,
            sigma2_floor,
        })
    }

    /// `kappa_n = 3.5 log d` with the default floor `1e-12 (Y'Y/n + 1)`.
    /// For `d = 1` the penalty uses `log 2` so it stays positive.
    pub fn for_dataset(ds: &Dataset) -> Self {
        Self::with_kappa(ds, 3.5 * (ds.d().max(2) as f64).ln())
    }

    pub fn with_kappa(ds: &Dataset, kappa_n: f64) -> Self {
        Self {
            kappa_n,
            sigma2_floor: default_sigma2_floor(ds),
        }
    }
}

pub fn default_sigma2_floor(ds: &Dataset) -> f64 {
    1e-12 * (ds.yty() / ds.n() as f64 + 1.0)
}

struct Solved {
    coefficients: DVector<f64>,
    fitted: DVector<f64>,
    rss: f64,
    q: Option<DMatrix<f64>>,
}

fn solve_columns(ds: &Dataset, cols: &[usize], want_q: bool) -> Result<Solved> {
    let n = ds.n();
    let p = cols.len();
    if p >= n {
        return Err(Error::SizeTooLarge { size: p, n });
    }
    let y = ds.y();
    if p == 0 {
        return Ok(Solved {
            coefficients: DVector::zeros(0),
            fitted: DVector::zeros(n),
            rss: ds.yty(),
            q: want_q.then(|| DMatrix::zeros(n, 0)),
        });
    }
    let xu = ds.submatrix(cols);
    let qr = xu.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..p)
        .filter(|&i| r[(i, i)].abs() > RANK_TOL * max_diag)
        .count();
    if max_diag == 0.0 || rank < p {
        return Err(Error::RankDeficient { rank, size: p });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    let coefficients = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { rank, size: p })?;
    let fitted = &xu * &coefficients;
    let resid = y - &fitted;
    Ok(Solved {
        coefficients,
        fitted,
        rss: resid.dot(&resid),
        q: want_q.then(|| qr.q()),
    })
}

/// Ordinary least squares of `Y` on the active columns via a QR
/// decomposition.
pub fn fit_least_squares(ds: &Dataset, mask: &ModelMask) -> Result<FitResult> {
    mask.check_len(ds.d())?;
    let cols = mask.active();
    let s = solve_columns(ds, &cols, true)?;
    let q = s.q.expect("requested Q");
    let hat_diagonals = DVector::from_fn(ds.n(), |i, _| q.row(i).norm_squared());
    Ok(FitResult {
        rss: s.rss,
        sigma2_hat: s.rss / ds.n() as f64,
        coefficients: s.coefficients,
        fitted: s.fitted,
        hat_diagonals,
        rank: cols.len(),
    })
}

/// Residual sum of squares only; skips forming Q.
pub fn residual_sum_of_squares(ds: &Dataset, mask: &ModelMask) -> Result<f64> {
    mask.check_len(ds.d())?;
    Ok(solve_columns(ds, &mask.active(), false)?.rss)
}

/// GIC from a variance estimate and model size.
pub fn gic_from_sigma2(n: usize, sigma2_hat: f64, size: usize, cfg: &GicConfig) -> f64 {
    n as f64 * sigma2_hat.max(cfg.sigma2_floor).ln() + cfg.kappa_n * size as f64
}

/// `n log(max(sigma2_hat, floor)) + kappa_n |u|`.
pub fn gic(ds: &Dataset, mask: &ModelMask, cfg: &GicConfig) -> Result<f64> {
    let rss = residual_sum_of_squares(ds, mask)?;
    Ok(gic_from_sigma2(ds.n(), rss / ds.n() as f64, mask.size(), cfg))
}

/// Per-run memo of every model scored so far plus the worst feasible
/// fitness, which infeasible models inherit.
#[derive(Debug, Clone, Default)]
pub struct FitnessLedger {
    cache: HashMap<ModelMask, f64>,
    rank_deficient: HashSet<ModelMask>,
    infeasible_seen: HashSet<ModelMask>,
    worst_feasible: Option<f64>,
    fits_performed: usize,
}

impl FitnessLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn worst_feasible(&self) -> Option<f64> {
        self.worst_feasible
    }

    /// Cached fitness of a feasible model.
    pub fn cached(&self, mask: &ModelMask) -> Option<f64> {
        self.cache.get(mask).copied()
    }

    pub fn is_feasible_cached(&self, mask: &ModelMask) -> bool {
        self.cache.contains_key(mask)
    }

    /// Number of least-squares fits actually performed.
    pub fn fits_performed(&self) -> usize {
        self.fits_performed
    }

    /// Number of distinct models scored: feasible, rank-deficient and
    /// oversized.
    pub fn models_evaluated(&self) -> usize {
        self.cache.len() + self.rank_deficient.len() + self.infeasible_seen.len()
    }

    pub fn feasible_entries(&self) -> impl Iterator<Item = (&ModelMask, f64)> {
        self.cache.iter().map(|(m, f)| (m, *f))
    }

    fn record_feasible(&mut self, mask: ModelMask, value: f64) {
        self.worst_feasible = Some(match self.worst_feasible {
            Some(w) => w.min(value),
            None => value,
        });
        self.cache.insert(mask, value);
    }

    /// Current fitness of `mask`: the cached value for feasible models, the
    /// running worst feasible fitness otherwise. Does not fit anything.
    pub fn current(&self, mask: &ModelMask) -> Option<f64> {
        self.cache.get(mask).copied().or(self.worst_feasible)
    }
}

/// History-aware fitness: `-GIC(u)` when `|u| < n`, else the worst feasible
/// fitness scored so far in this run. Rank-deficient models are mapped to
/// the worst feasible fitness too.
pub fn fitness(
    ds: &Dataset,
    mask: &ModelMask,
    cfg: &GicConfig,
    ledger: &mut FitnessLedger,
) -> Result<f64> {
    mask.check_len(ds.d())?;
    if let Some(f) = ledger.cache.get(mask) {
        return Ok(*f);
    }
    let infeasible = |ledger: &FitnessLedger| ledger.worst_feasible.ok_or(Error::NoFeasibleHistory);
    if mask.size() >= ds.n() {
        let f = infeasible(ledger)?;
        ledger.infeasible_seen.insert(mask.clone());
        return Ok(f);
    }
    if ledger.rank_deficient.contains(mask) {
        return infeasible(ledger);
    }
    ledger.fits_performed += 1;
    match gic(ds, mask, cfg) {
        Ok(g) => {
            ledger.record_feasible(mask.clone(), -g);
            Ok(-g)
        }
        Err(Error::RankDeficient { .. }) => {
            log::debug!("rank-deficient model {mask} scored as worst feasible");
            ledger.rank_deficient.insert(mask.clone());
            infeasible(ledger)
        }
        Err(e) => Err(e),
    }
}
