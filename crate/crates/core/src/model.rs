//! Count datasets, model parameters, and node-wise log-likelihood kernels.
//!
//! All four families (ZINB, ZIP, NB, Poisson) are evaluated entirely in the
//! log domain: zero-branch mixtures go through log-sum-exp, NB probabilities
//! through `log r - logsumexp(log r, b)`, and the zero link through softplus,
//! so likelihoods and gradients stay finite however extreme the linear
//! predictors get.

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, logsumexp2, sigmoid, softplus};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

/// Dispersion floor; softplus output is clamped here to keep log r finite.
pub const MIN_DISPERSION: f64 = 1e-6;

/// Cap on exp() arguments in the Poisson-mean branches. NB branches are
/// expressed through sigmoids and need no cap.
const EXP_CAP: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Zinb,
    Zip,
    Nb,
    Poisson,
}

impl Family {
    /// Families with a zero-inflation component (W0, gamma active).
    pub fn has_zero_component(self) -> bool {
        matches!(self, Family::Zinb | Family::Zip)
    }

    /// Families with an NB dispersion parameter.
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Zinb | Family::Nb)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Zinb => "zinb",
            Family::Zip => "zip",
            Family::Nb => "nb",
            Family::Poisson => "poisson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zinb" => Ok(Family::Zinb),
            "zip" => Ok(Family::Zip),
            "nb" => Ok(Family::Nb),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::param(format!(
                "unknown family `{other}` (expected zinb|zip|nb|poisson)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An n x d matrix of nonnegative integer counts with column names.
///
/// Counts are stored as f64 (exact up to 2^53) so link computations can use
/// dense matrix products directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, names: Option<Vec<String>>) -> Result<Self> {
        for &v in x.iter() {
            if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
                return Err(Error::data(format!(
                    "counts must be nonnegative integers, got {v}"
                )));
            }
        }
        let d = x.ncols();
        let names = match names {
            Some(n) => {
                if n.len() != d {
                    return Err(Error::data(format!(
                        "{} column names for {d} columns",
                        n.len()
                    )));
                }
                n
            }
            None => (0..d).map(|j| format!("x{j}")).collect(),
        };
        Ok(Dataset { x, names })
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut x = Array2::zeros((n, d));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::data("ragged rows in count matrix"));
            }
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = v as f64;
            }
        }
        Dataset::new(x, None)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// The learnable parameter set: zero/count coefficient matrices, intercepts,
/// and the unconstrained dispersion (r = softplus(r_raw)).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub family: Family,
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub gamma: Array1<f64>,
    pub delta: Array1<f64>,
    pub r_raw: Array1<f64>,
}

/// Gradients with the same block structure as [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub gamma: Array1<f64>,
    pub delta: Array1<f64>,
    pub r_raw: Array1<f64>,
}

impl ParamGrads {
    pub fn zeros(d: usize) -> Self {
        ParamGrads {
            w0: Array2::zeros((d, d)),
            w1: Array2::zeros((d, d)),
            gamma: Array1::zeros(d),
            delta: Array1::zeros(d),
            r_raw: Array1::zeros(d),
        }
    }
}

/// r_raw value giving r = softplus(r_raw) = 1.
pub fn raw_for_dispersion(r: f64) -> f64 {
    // inverse softplus: ln(e^r - 1)
    if r > 30.0 {
        r
    } else {
        (r.exp() - 1.0).ln()
    }
}

impl ModelParams {
    pub fn zeros(d: usize, family: Family) -> Self {
        ModelParams {
            family,
            w0: Array2::zeros((d, d)),
            w1: Array2::zeros((d, d)),
            gamma: Array1::zeros(d),
            delta: Array1::zeros(d),
            r_raw: Array1::from_elem(d, raw_for_dispersion(1.0)),
        }
    }

    /// Moment-matched start: gamma_j from the per-column nonzero fraction
    /// (clamped to [-4, 4]), delta_j from the mean of positive counts, r = 1,
    /// all weights zero. Zero-component parameters stay at zero for NB and
    /// Poisson fits.
    pub fn init_from_data(x: &Dataset, family: Family) -> Self {
        let d = x.d();
        let n = x.n() as f64;
        let mut params = ModelParams::zeros(d, family);
        for j in 0..d {
            let col = x.x().column(j);
            let nonzero = col.iter().filter(|&&v| v > 0.0).count() as f64;
            if family.has_zero_component() {
                let frac = nonzero / n;
                let logit = if frac <= 0.0 {
                    f64::NEG_INFINITY
                } else if frac >= 1.0 {
                    f64::INFINITY
                } else {
                    (frac / (1.0 - frac)).ln()
                };
                params.gamma[j] = logit.clamp(-4.0, 4.0);
            }
            let pos_sum: f64 = col.iter().filter(|&&v| v > 0.0).sum();
            params.delta[j] = if nonzero > 0.0 {
                (pos_sum / nonzero).ln()
            } else {
                0.0
            };
        }
        params
    }

    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    /// Dispersion vector r = max(softplus(r_raw), floor).
    pub fn dispersion(&self) -> Array1<f64> {
        self.r_raw.mapv(|z| softplus(z).max(MIN_DISPERSION))
    }

    fn check_dims(&self, x: &Dataset) -> Result<()> {
        let d = self.d();
        if x.d() != d
            || self.w0.dim() != (d, d)
            || self.w1.dim() != (d, d)
            || self.delta.len() != d
            || self.r_raw.len() != d
        {
            return Err(Error::param(format!(
                "parameter dimensions do not match data (d={} vs {})",
                d,
                x.d()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let repr = ParamsJson {
            family: self.family.as_str().to_string(),
            w0: matrix_rows(&self.w0),
            w1: matrix_rows(&self.w1),
            gamma: self.gamma.to_vec(),
            delta: self.delta.to_vec(),
            r_raw: self.r_raw.to_vec(),
        };
        serde_json::to_string_pretty(&repr).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ParamsJson = serde_json::from_str(text)?;
        let family = Family::parse(&repr.family)?;
        Ok(ModelParams {
            family,
            w0: rows_matrix(repr.w0)?,
            w1: rows_matrix(repr.w1)?,
            gamma: Array1::from_vec(repr.gamma),
            delta: Array1::from_vec(repr.delta),
            r_raw: Array1::from_vec(repr.r_raw),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    family: String,
    w0: Vec<Vec<f64>>,
    w1: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    r_raw: Vec<f64>,
}

fn matrix_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_matrix(rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let mut m = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::data("ragged matrix rows"));
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Materialized link values for a row subset: zero-link probabilities pi,
/// conditional means mu, and NB success probabilities p = r / (r + mu).
#[derive(Debug, Clone)]
pub struct LinkValues {
    pub pi: Array2<f64>,
    pub mu: Array2<f64>,
    pub p: Array2<f64>,
}

impl LinkValues {
    pub fn compute(x: &Dataset, params: &ModelParams, rows: &[usize]) -> Result<LinkValues> {
        params.check_dims(x)?;
        let (a, b) = linear_predictors(x, params, rows);
        let r = params.dispersion();
        let d = params.d();
        let mut pi = Array2::zeros(a.raw_dim());
        let mut mu = Array2::zeros(b.raw_dim());
        let mut p = Array2::zeros(b.raw_dim());
        for i in 0..rows.len() {
            for j in 0..d {
                pi[(i, j)] = sigmoid(a[(i, j)]);
                mu[(i, j)] = b[(i, j)].min(700.0).exp();
                p[(i, j)] = sigmoid(r[j].ln() - b[(i, j)]);
            }
        }
        Ok(LinkValues { pi, mu, p })
    }
}

fn linear_predictors(
    x: &Dataset,
    params: &ModelParams,
    rows: &[usize],
) -> (Array2<f64>, Array2<f64>) {
    let xb = x.x().select(Axis(0), rows);
    let mut a = xb.dot(&params.w0);
    let mut b = xb.dot(&params.w1);
    for i in 0..rows.len() {
        for j in 0..params.d() {
            a[(i, j)] += params.gamma[j];
            b[(i, j)] += params.delta[j];
        }
    }
    (a, b)
}

/// Per-cell evaluation: log-likelihood plus derivatives w.r.t. the zero-link
/// predictor `a`, the count-link predictor `b`, and the dispersion `r`.
struct Cell {
    ll: f64,
    da: f64,
    db: f64,
    dr: f64,
}

fn eval_cell(family: Family, x: f64, a: f64, b: f64, r: f64, log_r: f64, grad: bool) -> Cell {
    match family {
        Family::Zinb => {
            let log_rpmu = logsumexp2(log_r, b);
            let log_p = log_r - log_rpmu;
            let mu_frac = sigmoid(b - log_r); // mu / (r + mu)
            if x == 0.0 {
                let log_pi = -softplus(-a);
                let log_1mpi = -softplus(a);
                let l1 = log_pi + r * log_p;
                let ll = logsumexp2(log_1mpi, l1);
                if !grad {
                    return Cell { ll, da: 0.0, db: 0.0, dr: 0.0 };
                }
                let s1 = (l1 - ll).exp();
                let s0 = (log_1mpi - ll).exp();
                let pi = sigmoid(a);
                Cell {
                    ll,
                    da: s0 * (-pi) + s1 * (1.0 - pi),
                    db: -s1 * r * mu_frac,
                    dr: s1 * (log_p + mu_frac),
                }
            } else {
                let log_pi = -softplus(-a);
                let log_1mp = b - log_rpmu;
                let ll = log_pi + ln_gamma(x + r) - ln_gamma(r) - ln_gamma(x + 1.0)
                    + r * log_p
                    + x * log_1mp;
                if !grad {
                    return Cell { ll, da: 0.0, db: 0.0, dr: 0.0 };
                }
                Cell {
                    ll,
                    da: 1.0 - sigmoid(a),
                    db: x - (r + x) * mu_frac,
                    dr: digamma(x + r) - digamma(r) + log_p + mu_frac
                        - x * (-log_rpmu).exp(),
                }
            }
        }
        Family::Zip => {
            let mu = b.min(EXP_CAP).exp();
            if x == 0.0 {
                let log_pi = -softplus(-a);
                let log_1mpi = -softplus(a);
                let l1 = log_pi - mu;
                let ll = logsumexp2(log_1mpi, l1);
                if !grad {
                    return Cell { ll, da: 0.0, db: 0.0, dr: 0.0 };
                }
                let s1 = (l1 - ll).exp();
                let s0 = (log_1mpi - ll).exp();
                let pi = sigmoid(a);
                Cell {
                    ll,
                    da: s0 * (-pi) + s1 * (1.0 - pi),
                    db: -s1 * mu,
                    dr: 0.0,
                }
            } else {
                let log_pi = -softplus(-a);
                let ll = log_pi + x * b - mu - ln_gamma(x + 1.0);
                Cell {
                    ll,
                    da: if grad { 1.0 - sigmoid(a) } else { 0.0 },
                    db: if grad { x - mu } else { 0.0 },
                    dr: 0.0,
                }
            }
        }
        Family::Nb => {
            let log_rpmu = logsumexp2(log_r, b);
            let log_p = log_r - log_rpmu;
            let mu_frac = sigmoid(b - log_r);
            if x == 0.0 {
                let ll = r * log_p;
                Cell {
                    ll,
                    da: 0.0,
                    db: if grad { -r * mu_frac } else { 0.0 },
                    dr: if grad { log_p + mu_frac } else { 0.0 },
                }
            } else {
                let log_1mp = b - log_rpmu;
                let ll = ln_gamma(x + r) - ln_gamma(r) - ln_gamma(x + 1.0)
                    + r * log_p
                    + x * log_1mp;
                if !grad {
                    return Cell { ll, da: 0.0, db: 0.0, dr: 0.0 };
                }
                Cell {
                    ll,
                    da: 0.0,
                    db: x - (r + x) * mu_frac,
                    dr: digamma(x + r) - digamma(r) + log_p + mu_frac
                        - x * (-log_rpmu).exp(),
                }
            }
        }
        Family::Poisson => {
            let mu = b.min(EXP_CAP).exp();
            let ll = if x == 0.0 {
                -mu
            } else {
                x * b - mu - ln_gamma(x + 1.0)
            };
            Cell {
                ll,
                da: 0.0,
                db: if grad { x - mu } else { 0.0 },
                dr: 0.0,
            }
        }
    }
}

fn batch_log_lik(
    x: &Dataset,
    params: &ModelParams,
    rows: &[usize],
) -> Result<(f64, Array2<f64>)> {
    params.check_dims(x)?;
    if rows.is_empty() {
        return Err(Error::param("row subset must be non-empty"));
    }
    for &i in rows {
        if i >= x.n() {
            return Err(Error::param(format!("row index {i} out of range")));
        }
    }
    let (a, b) = linear_predictors(x, params, rows);
    let r = params.dispersion();
    let log_r: Vec<f64> = r.iter().map(|&v| v.ln()).collect();
    let d = params.d();
    let mut per_cell = Array2::zeros((rows.len(), d));
    let mut total = 0.0;
    for (bi, &i) in rows.iter().enumerate() {
        for j in 0..d {
            let cell = eval_cell(
                params.family,
                x.x()[(i, j)],
                a[(bi, j)],
                b[(bi, j)],
                r[j],
                log_r[j],
                false,
            );
            per_cell[(bi, j)] = cell.ll;
            total += cell.ll;
        }
    }
    Ok((total, per_cell))
}

/// ZINB log-likelihood over a row subset: total and the per-cell matrix.
pub fn log_lik_zinb(x: &Dataset, params: &ModelParams, rows: &[usize]) -> Result<(f64, Array2<f64>)> {
    if params.family != Family::Zinb {
        return Err(Error::param(format!("family is {}, expected zinb", params.family)));
    }
    batch_log_lik(x, params, rows)
}

/// ZIP log-likelihood over a row subset.
pub fn log_lik_zip(x: &Dataset, params: &ModelParams, rows: &[usize]) -> Result<(f64, Array2<f64>)> {
    if params.family != Family::Zip {
        return Err(Error::param(format!("family is {}, expected zip", params.family)));
    }
    batch_log_lik(x, params, rows)
}

/// NB / Poisson log-likelihood (no zero-inflation component).
pub fn log_lik_reduced(
    x: &Dataset,
    params: &ModelParams,
    rows: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if params.family.has_zero_component() {
        return Err(Error::param(format!(
            "family is {}, expected nb or poisson",
            params.family
        )));
    }
    batch_log_lik(x, params, rows)
}

/// Log-likelihood for whatever family `params` carries.
pub fn log_lik(x: &Dataset, params: &ModelParams, rows: &[usize]) -> Result<(f64, Array2<f64>)> {
    batch_log_lik(x, params, rows)
}

/// Mean negative log-likelihood over `rows` and its gradient for every
/// parameter block. Diagonals of the weight gradients are forced to zero;
/// the dispersion gradient is chained through softplus.
pub fn nll_and_grad(
    x: &Dataset,
    params: &ModelParams,
    rows: &[usize],
) -> Result<(f64, ParamGrads)> {
    params.check_dims(x)?;
    if rows.is_empty() {
        return Err(Error::param("row subset must be non-empty"));
    }
    for &i in rows {
        if i >= x.n() {
            return Err(Error::param(format!("row index {i} out of range")));
        }
    }
    let nb = rows.len();
    let d = params.d();
    let xb = x.x().select(Axis(0), rows);
    let mut a = xb.dot(&params.w0);
    let mut b = xb.dot(&params.w1);
    for i in 0..nb {
        for j in 0..d {
            a[(i, j)] += params.gamma[j];
            b[(i, j)] += params.delta[j];
        }
    }
    let r = params.dispersion();
    let log_r: Vec<f64> = r.iter().map(|&v| v.ln()).collect();
    // chain factor d r / d r_raw; zero where the dispersion floor is active
    let chain: Vec<f64> = params
        .r_raw
        .iter()
        .map(|&z| {
            if softplus(z) > MIN_DISPERSION {
                sigmoid(z)
            } else {
                0.0
            }
        })
        .collect();

    let mut total = 0.0;
    let mut ga = Array2::zeros((nb, d));
    let mut gb = Array2::zeros((nb, d));
    let mut gr = vec![0.0; d];
    let need_zero = params.family.has_zero_component();
    let need_disp = params.family.has_dispersion();
    for (bi, _) in rows.iter().enumerate() {
        for j in 0..d {
            let cell = eval_cell(
                params.family,
                xb[(bi, j)],
                a[(bi, j)],
                b[(bi, j)],
                r[j],
                log_r[j],
                true,
            );
            total += cell.ll;
            ga[(bi, j)] = cell.da;
            gb[(bi, j)] = cell.db;
            gr[j] += cell.dr;
        }
    }

    let scale = -1.0 / nb as f64;
    let nll = scale * total;
    let mut grads = ParamGrads::zeros(d);
    if need_zero {
        grads.w0 = xb.t().dot(&ga) * scale;
        for bi in 0..nb {
            for j in 0..d {
                grads.gamma[j] += ga[(bi, j)];
            }
        }
        grads.gamma *= scale;
    }
    grads.w1 = xb.t().dot(&gb) * scale;
    for bi in 0..nb {
        for j in 0..d {
            grads.delta[j] += gb[(bi, j)];
        }
    }
    grads.delta *= scale;
    if need_disp {
        for j in 0..d {
            grads.r_raw[j] = scale * gr[j] * chain[j];
        }
    }
    for j in 0..d {
        grads.w0[(j, j)] = 0.0;
        grads.w1[(j, j)] = 0.0;
    }
    Ok((nll, grads))
}
