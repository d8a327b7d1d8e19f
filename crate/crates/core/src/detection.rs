//! Quadratic (energy-based) noncoherent detectors.
//!
//! Given the channel statistics only, the received vector is conditionally
//! Gaussian with covariance `Sigma_x = sum_k |x_k|^2 p_k R_k + sigma^2 I` under
//! hypothesis `x`. Maximum likelihood picks the hypothesis minimising
//! `yᴴ Sigma_x⁻¹ y + log|Sigma_x|`, which depends on `y` only through quadratic
//! forms and is therefore blind to the symbol phase.
//!
//! Two scoring paths are provided:
//!
//! * dense: Cholesky factor of the full N x N `Sigma_x`, `O(N^2)` per score;
//! * low-rank: `Sigma_x = sigma^2 I + W Wᴴ` with `W` of rank `r <= K L`,
//!   scored through the Woodbury and matrix-determinant identities in
//!   `O(N r + r^2)` after an `O(N r^2)` setup.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::channel::{CorrelationModel, CovarianceMatrix};
use crate::constellation::Constellation;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringPath {
    Dense,
    #[default]
    LowRank,
}

/// Which channel model a single-user detector assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    /// Near-field covariance, matching the true channel.
    Exact,
    /// Far-field covariance built from the same scatterers.
    MismatchedFf,
}

impl DetectorModel {
    pub fn correlation(&self) -> CorrelationModel {
        match self {
            DetectorModel::Exact => CorrelationModel::NearField,
            DetectorModel::MismatchedFf => CorrelationModel::FarField,
        }
    }
}

fn check_inputs(models: &[CovarianceMatrix], powers: &[f64], sigma2: f64) -> Result<usize> {
    let Some(first) = models.first() else {
        return Err(Error::DimensionMismatch("no user covariances".into()));
    };
    let n = first.dim();
    if let Some(m) = models.iter().find(|m| m.dim() != n) {
        return Err(Error::DimensionMismatch(format!(
            "covariances of size {n} and {}",
            m.dim()
        )));
    }
    if powers.len() != models.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} powers for {} users",
            powers.len(),
            models.len()
        )));
    }
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidPower("power factors must be finite and >= 0".into()));
    }
    let floor = noise_floor(models, powers);
    if !(sigma2.is_finite() && sigma2 > 0.0 && sigma2 >= floor) {
        return Err(Error::NoiseFloor { sigma2, floor });
    }
    Ok(n)
}

/// Smallest admissible noise power, `1e-12 max_k(p_k tr R_k) / N`.
pub fn noise_floor(models: &[CovarianceMatrix], powers: &[f64]) -> f64 {
    let n = models.first().map_or(1, |m| m.dim()).max(1) as f64;
    let peak = models
        .iter()
        .zip(powers)
        .map(|(m, p)| p * m.trace())
        .fold(0.0, f64::max);
    1e-12 * peak / n
}

/// Dense `sum_k |x_k|^2 p_k R_k + sigma^2 I` for the amplitude vector `x`.
pub fn hypothesis_covariance(
    x: &[f64],
    models: &[CovarianceMatrix],
    powers: &[f64],
    sigma2: f64,
) -> Result<DMatrix<C64>> {
    let n = check_inputs(models, powers, sigma2)?;
    if x.len() != models.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {} users",
            x.len(),
            models.len()
        )));
    }
    let mut sigma = DMatrix::<C64>::identity(n, n) * C64::from(sigma2);
    for ((&xk, model), &p) in x.iter().zip(models).zip(powers) {
        let w = xk * xk * p;
        if w != 0.0 {
            sigma += model.entries() * C64::from(w);
        }
    }
    Ok(sigma)
}

#[derive(Debug, Clone)]
pub struct DenseFactor {
    lower: DMatrix<C64>,
    log_det: f64,
}

#[derive(Debug, Clone)]
pub struct LowRankFactor {
    sigma2: f64,
    /// `W / sigma`, N x r.
    scaled: DMatrix<C64>,
    /// Lower Cholesky factor of `I + scaledᴴ scaled`.
    inner: DMatrix<C64>,
    log_det: f64,
}

/// A factorization of one hypothesis covariance.
#[derive(Debug, Clone)]
pub enum Factorization {
    Dense(DenseFactor),
    LowRank(LowRankFactor),
}

impl Factorization {
    pub fn dense(sigma: DMatrix<C64>) -> Result<Self> {
        let chol = Cholesky::new(sigma).ok_or_else(|| {
            Error::InvalidCovariance("hypothesis covariance is not positive definite".into())
        })?;
        let lower = chol.unpack();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
        Ok(Factorization::Dense(DenseFactor { lower, log_det }))
    }

    /// `sigma2 I + W Wᴴ`.
    pub fn low_rank(sigma2: f64, w: &DMatrix<C64>) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::NoiseFloor {
                sigma2,
                floor: f64::MIN_POSITIVE,
            });
        }
        let n = w.nrows();
        let scaled = w * C64::from(sigma2.sqrt().recip());
        let gram = scaled.adjoint() * &scaled;
        let (inner, inner_log_det) = inner_cholesky(gram)?;
        Ok(Factorization::LowRank(LowRankFactor {
            sigma2,
            scaled,
            inner,
            log_det: n as f64 * sigma2.ln() + inner_log_det,
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Dense(f) => f.lower.nrows(),
            Factorization::LowRank(f) => f.scaled.nrows(),
        }
    }

    pub fn log_det(&self) -> f64 {
        match self {
            Factorization::Dense(f) => f.log_det,
            Factorization::LowRank(f) => f.log_det,
        }
    }
}

/// Cholesky factor of `I + gram` and its log-determinant.
fn inner_cholesky(mut gram: DMatrix<C64>) -> Result<(DMatrix<C64>, f64)> {
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(1.0, 0.0);
    }
    let lower = Cholesky::<C64, Dyn>::new(gram)
        .ok_or_else(|| Error::InvalidCovariance("inner Woodbury matrix is not positive definite".into()))?
        .unpack();
    let log_det = 2.0 * lower.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    Ok((lower, log_det))
}

/// `‖L⁻¹ b‖²` for lower-triangular `L`, by forward substitution.
fn forward_norm_sqr(lower: &DMatrix<C64>, b: &[C64], work: &mut Vec<C64>) -> f64 {
    let n = b.len();
    work.clear();
    work.extend_from_slice(b);
    let mut acc = 0.0;
    for i in 0..n {
        let mut v = work[i];
        for j in 0..i {
            v -= lower[(i, j)] * work[j];
        }
        v /= lower[(i, i)];
        work[i] = v;
        acc += v.norm_sqr();
    }
    acc
}

fn check_vector(y: &DVector<C64>, n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "received vector of length {} for N = {n}",
            y.len()
        )));
    }
    if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("received vector".into()));
    }
    Ok(())
}

/// `yᴴ Sigma⁻¹ y + log|Sigma|`.
pub fn quadratic_score(y: &DVector<C64>, fact: &Factorization) -> Result<f64> {
    check_vector(y, fact.dim())?;
    let score = match fact {
        Factorization::Dense(f) => {
            let v = f
                .lower
                .solve_lower_triangular(y)
                .ok_or_else(|| Error::InvalidCovariance("singular Cholesky factor".into()))?;
            v.norm_squared() + f.log_det
        }
        Factorization::LowRank(f) => {
            let d = f.scaled.ad_mul(y);
            let mut work = Vec::with_capacity(d.len());
            let explained = forward_norm_sqr(&f.inner, d.as_slice(), &mut work);
            (y.norm_squared() - explained) / f.sigma2 + f.log_det
        }
    };
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::NonFinite("quadratic score".into()))
    }
}

#[derive(Debug, Clone)]
struct LowRankEntry {
    /// Active users with `sqrt(|x_k|^2 p_k) / sigma`.
    blocks: Vec<(usize, f64)>,
    inner: DMatrix<C64>,
    log_det: f64,
}

#[derive(Debug, Clone)]
enum BankKind {
    Dense(Vec<DenseFactor>),
    LowRank {
        /// Column-stacked user factors `[F_1, ..., F_K]`.
        stacked: DMatrix<C64>,
        /// Column range of each user inside `stacked`.
        spans: Vec<(usize, usize)>,
        entries: Vec<LowRankEntry>,
    },
}

/// Precomputed factorizations for every hypothesis in `X^K`, enumerated in
/// lexicographic order of the symbol-index vector (user 1 most significant).
#[derive(Debug, Clone)]
pub struct HypothesisBank {
    users: usize,
    order: usize,
    dim: usize,
    sigma2: f64,
    symbols: Vec<Vec<usize>>,
    kind: BankKind,
}

/// All index vectors of `{0..order}^users` in lexicographic order.
pub fn enumerate_symbols(users: usize, order: usize) -> Vec<Vec<usize>> {
    let total = order.pow(users as u32);
    (0..total)
        .map(|mut code| {
            let mut v = vec![0; users];
            for slot in v.iter_mut().rev() {
                *slot = code % order;
                code /= order;
            }
            v
        })
        .collect()
}

impl HypothesisBank {
    /// Bank over `X^K` for the given user covariances and power factors.
    pub fn multiuser(
        models: &[CovarianceMatrix],
        powers: &[f64],
        sigma2: f64,
        constellation: &Constellation,
        path: ScoringPath,
    ) -> Result<Self> {
        let dim = check_inputs(models, powers, sigma2)?;
        let users = models.len();
        let order = constellation.order();
        let symbols = enumerate_symbols(users, order);
        let levels = constellation.levels();

        let kind = match path {
            ScoringPath::Dense => {
                let factors = symbols
                    .iter()
                    .map(|idx| {
                        let x: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
                        match Factorization::dense(hypothesis_covariance(&x, models, powers, sigma2)?)? {
                            Factorization::Dense(f) => Ok(f),
                            Factorization::LowRank(_) => unreachable!(),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                BankKind::Dense(factors)
            }
            ScoringPath::LowRank => {
                let factors = models
                    .iter()
                    .map(CovarianceMatrix::low_rank_factor)
                    .collect::<Result<Vec<_>>>()?;
                let mut spans = Vec::with_capacity(users);
                let mut start = 0;
                for f in &factors {
                    spans.push((start, f.ncols()));
                    start += f.ncols();
                }
                let columns: Vec<_> = factors
                    .iter()
                    .flat_map(|f| f.column_iter().map(|c| c.into_owned()))
                    .collect();
                let stacked = if columns.is_empty() {
                    DMatrix::zeros(dim, 0)
                } else {
                    DMatrix::from_columns(&columns)
                };
                let gram = stacked.adjoint() * &stacked;
                let base_log_det = dim as f64 * sigma2.ln();
                let entries = symbols
                    .iter()
                    .map(|idx| {
                        let blocks: Vec<(usize, f64)> = idx
                            .iter()
                            .enumerate()
                            .map(|(k, &i)| (k, (levels[i] * levels[i] * powers[k] / sigma2).sqrt()))
                            .filter(|&(k, s)| s > 0.0 && spans[k].1 > 0)
                            .collect();
                        let r: usize = blocks.iter().map(|&(k, _)| spans[k].1).sum();
                        let mut inner = DMatrix::<C64>::zeros(r, r);
                        let mut row = 0;
                        for &(j, sj) in &blocks {
                            let (oj, nj) = spans[j];
                            let mut col = 0;
                            for &(k, sk) in &blocks {
                                let (ok, nk) = spans[k];
                                let block = gram.view((oj, ok), (nj, nk)) * C64::from(sj * sk);
                                inner.view_mut((row, col), (nj, nk)).copy_from(&block);
                                col += nk;
                            }
                            row += nj;
                        }
                        let (inner, log_det) = inner_cholesky(inner)?;
                        Ok(LowRankEntry {
                            blocks,
                            inner,
                            log_det: base_log_det + log_det,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                BankKind::LowRank {
                    stacked,
                    spans,
                    entries,
                }
            }
        };
        Ok(Self {
            users,
            order,
            dim,
            sigma2,
            symbols,
            kind,
        })
    }

    /// Bank over `X` for one user, `|x|^2 p R + sigma^2 I`.
    pub fn single_user(
        model: &CovarianceMatrix,
        power: f64,
        sigma2: f64,
        constellation: &Constellation,
        path: ScoringPath,
    ) -> Result<Self> {
        Self::multiuser(std::slice::from_ref(model), &[power], sigma2, constellation, path)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbol-index vector of hypothesis `i`.
    pub fn symbols(&self, i: usize) -> &[usize] {
        &self.symbols[i]
    }

    pub fn path(&self) -> ScoringPath {
        match self.kind {
            BankKind::Dense(_) => ScoringPath::Dense,
            BankKind::LowRank { .. } => ScoringPath::LowRank,
        }
    }

    /// Stand-alone factorization of hypothesis `i`.
    pub fn factorization(&self, i: usize) -> Factorization {
        match &self.kind {
            BankKind::Dense(f) => Factorization::Dense(f[i].clone()),
            BankKind::LowRank {
                stacked,
                spans,
                entries,
            } => {
                let e = &entries[i];
                let r: usize = e.blocks.iter().map(|&(k, _)| spans[k].1).sum();
                let mut scaled = DMatrix::<C64>::zeros(self.dim, r);
                let mut col = 0;
                for &(k, s) in &e.blocks {
                    let (o, w) = spans[k];
                    scaled
                        .columns_mut(col, w)
                        .copy_from(&(stacked.columns(o, w) * C64::from(s)));
                    col += w;
                }
                Factorization::LowRank(LowRankFactor {
                    sigma2: self.sigma2,
                    scaled,
                    inner: e.inner.clone(),
                    log_det: e.log_det,
                })
            }
        }
    }

    /// Scores of every hypothesis, in enumeration order.
    pub fn scores(&self, y: &DVector<C64>) -> Result<Vec<f64>> {
        check_vector(y, self.dim)?;
        let scores: Vec<f64> = match &self.kind {
            BankKind::Dense(factors) => factors
                .iter()
                .map(|f| {
                    let v = f
                        .lower
                        .solve_lower_triangular(y)
                        .ok_or_else(|| Error::InvalidCovariance("singular Cholesky factor".into()))?;
                    Ok(v.norm_squared() + f.log_det)
                })
                .collect::<Result<_>>()?,
            BankKind::LowRank {
                stacked,
                spans,
                entries,
            } => {
                // project once; each hypothesis only rescales the user blocks
                let proj = stacked.ad_mul(y);
                let energy = y.norm_squared();
                let mut d = Vec::with_capacity(proj.len());
                let mut work = Vec::with_capacity(proj.len());
                entries
                    .iter()
                    .map(|e| {
                        d.clear();
                        for &(k, s) in &e.blocks {
                            let (o, w) = spans[k];
                            d.extend(proj.rows(o, w).iter().map(|z| z * s));
                        }
                        let explained = forward_norm_sqr(&e.inner, &d, &mut work);
                        (energy - explained) / self.sigma2 + e.log_det
                    })
                    .collect()
            }
        };
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("quadratic score".into()));
        }
        Ok(scores)
    }

    /// Minimum-score hypothesis; ties go to the lexicographically lowest.
    pub fn detect(&self, y: &DVector<C64>, keep_scores: bool) -> Result<DetectionResult> {
        if self.is_empty() {
            return Err(Error::EmptyBank);
        }
        let scores = self.scores(y)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s < scores[best] {
                best = i;
            }
        }
        Ok(DetectionResult {
            symbols: self.symbols[best].clone(),
            scores: keep_scores.then_some(scores),
        })
    }
}

/// Detected symbol indices (0-based into the constellation) and optionally
/// all hypothesis scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub symbols: Vec<usize>,
    pub scores: Option<Vec<f64>>,
}

/// Joint maximum-likelihood detection over `X^K`.
pub fn detect_ml_multiuser(y: &DVector<C64>, bank: &HypothesisBank) -> Result<DetectionResult> {
    bank.detect(y, false)
}

/// Single-user detector for one user, built on either the exact or the
/// far-field model. Other users are treated as absent.
#[derive(Debug, Clone)]
pub struct SingleUserDetector {
    pub user: usize,
    pub model: DetectorModel,
    bank: HypothesisBank,
}

impl SingleUserDetector {
    pub fn new(user: usize, model: DetectorModel, bank: HypothesisBank) -> Result<Self> {
        if bank.users() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "single-user detector needs a one-user bank, got {} users",
                bank.users()
            )));
        }
        Ok(Self { user, model, bank })
    }

    pub fn bank(&self) -> &HypothesisBank {
        &self.bank
    }

    pub fn detect(&self, y: &DVector<C64>) -> Result<usize> {
        Ok(self.bank.detect(y, false)?.symbols[0])
    }
}

/// Constellation index chosen by the single-user rule for `bank`.
pub fn detect_single_user(y: &DVector<C64>, bank: &HypothesisBank) -> Result<usize> {
    if bank.users() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "single-user detection needs a one-user bank, got {} users",
            bank.users()
        )));
    }
    Ok(bank.detect(y, false)?.symbols[0])
}
