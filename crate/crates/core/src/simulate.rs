//! Ground-truth-parameterized synthetic data: ancestral (logic) sampling of
//! ZINB/ZIP structural equation models, sign-configuration variants, support
//! masks, and expression-dependent dropout.

use crate::error::{Error, Result};
use crate::graph::{DagGraph, SupportMasks};
use crate::model::{Dataset, Family};
use crate::special::sigmoid;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Sign pattern of the (W0, W1) edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignConfig {
    /// (+,+)
    PlusPlus,
    /// (-,-)
    MinusMinus,
    /// (+,-): positive zero link, negative count link (the generation default)
    PlusMinus,
    /// (-,+)
    MinusPlus,
}

impl SignConfig {
    pub fn signs(self) -> (f64, f64) {
        match self {
            SignConfig::PlusPlus => (1.0, 1.0),
            SignConfig::MinusMinus => (-1.0, -1.0),
            SignConfig::PlusMinus => (1.0, -1.0),
            SignConfig::MinusPlus => (-1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignConfig::PlusPlus => "++",
            SignConfig::MinusMinus => "--",
            SignConfig::PlusMinus => "+-",
            SignConfig::MinusPlus => "-+",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "++" => Ok(SignConfig::PlusPlus),
            "--" => Ok(SignConfig::MinusMinus),
            "+-" => Ok(SignConfig::PlusMinus),
            "-+" => Ok(SignConfig::MinusPlus),
            other => Err(Error::param(format!(
                "unknown sign configuration `{other}` (expected ++|--|+-|-+)"
            ))),
        }
    }
}

/// Generation knobs. Magnitude ranges are positive; the sign configuration
/// decides the orientation of each component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    pub sign_config: SignConfig,
    pub w0_magnitude: (f64, f64),
    pub w1_magnitude: (f64, f64),
    pub gamma_mean: f64,
    pub gamma_sd: f64,
    pub delta_mean: f64,
    pub delta_sd: f64,
    pub dispersion: f64,
    pub family: Family,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            sign_config: SignConfig::PlusMinus,
            w0_magnitude: (0.5, 2.0),
            w1_magnitude: (0.5, 2.0),
            gamma_mean: 1.5,
            gamma_sd: 0.2,
            delta_mean: 1.5,
            delta_sd: 0.2,
            dispersion: 5.0,
            family: Family::Zinb,
        }
    }
}

/// True generating parameters over a DAG (optionally on split supports).
#[derive(Debug, Clone)]
pub struct SimParams {
    pub graph: DagGraph,
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub gamma: Array1<f64>,
    pub delta: Array1<f64>,
    pub r: Array1<f64>,
    pub sign_config: SignConfig,
    pub family: Family,
}

/// Dataset plus the number of linear predictors clamped during sampling.
#[derive(Debug, Clone)]
pub struct LogicSample {
    pub data: Dataset,
    pub clamp_events: usize,
}

/// Expression-dependent dropout: retention probability
/// sigmoid(slope * (log1p(x) - m)) with m the q-th percentile of the pooled
/// log1p values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub slope: f64,
    pub percentile: f64,
    pub seed: u64,
}

impl DropoutConfig {
    pub fn new(slope: f64, percentile: f64, seed: u64) -> Result<Self> {
        if slope <= 0.0 {
            return Err(Error::param(format!("dropout slope must be > 0, got {slope}")));
        }
        if !(0.0..100.0).contains(&percentile) || percentile <= 0.0 {
            return Err(Error::param(format!(
                "dropout percentile must be in (0, 100), got {percentile}"
            )));
        }
        Ok(DropoutConfig {
            slope,
            percentile,
            seed,
        })
    }
}

/// Draw edge weights, intercepts, and dispersions for a DAG.
///
/// Weights are uniform over the signed magnitude range, on the graph's edges
/// or on the given support masks; intercepts are normal; the dispersion is
/// fixed by `opts.dispersion`.
pub fn sample_params(
    graph: &DagGraph,
    opts: &SimOptions,
    masks: Option<&SupportMasks>,
    seed: u64,
) -> Result<SimParams> {
    if !opts.family.has_zero_component() {
        return Err(Error::param(format!(
            "generation family must be zinb or zip, got {}",
            opts.family
        )));
    }
    if opts.w0_magnitude.0 <= 0.0 || opts.w0_magnitude.0 >= opts.w0_magnitude.1 {
        return Err(Error::param("w0 magnitude range must satisfy 0 < low < high"));
    }
    if opts.w1_magnitude.0 <= 0.0 || opts.w1_magnitude.0 >= opts.w1_magnitude.1 {
        return Err(Error::param("w1 magnitude range must satisfy 0 < low < high"));
    }
    if opts.dispersion <= 0.0 {
        return Err(Error::param("dispersion must be > 0"));
    }
    if let Some(m) = masks {
        if m.d != graph.d() {
            return Err(Error::param("support masks do not match the graph"));
        }
    }
    let d = graph.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sign0, sign1) = opts.sign_config.signs();
    let mut w0 = Array2::zeros((d, d));
    let mut w1 = Array2::zeros((d, d));
    let support0: Vec<(usize, usize)> = match masks {
        Some(m) => m.m0.iter().copied().collect(),
        None => graph.edges().iter().copied().collect(),
    };
    let support1: Vec<(usize, usize)> = match masks {
        Some(m) => m.m1.iter().copied().collect(),
        None => graph.edges().iter().copied().collect(),
    };
    for &(k, j) in &support0 {
        w0[(k, j)] = sign0 * rng.random_range(opts.w0_magnitude.0..opts.w0_magnitude.1);
    }
    for &(k, j) in &support1 {
        w1[(k, j)] = sign1 * rng.random_range(opts.w1_magnitude.0..opts.w1_magnitude.1);
    }
    let gamma_dist = Normal::new(opts.gamma_mean, opts.gamma_sd)
        .map_err(|e| Error::param(format!("bad gamma distribution: {e}")))?;
    let delta_dist = Normal::new(opts.delta_mean, opts.delta_sd)
        .map_err(|e| Error::param(format!("bad delta distribution: {e}")))?;
    let gamma = Array1::from_iter((0..d).map(|_| gamma_dist.sample(&mut rng)));
    let delta = Array1::from_iter((0..d).map(|_| delta_dist.sample(&mut rng)));
    let r = Array1::from_elem(d, opts.dispersion);
    Ok(SimParams {
        graph: graph.clone(),
        w0,
        w1,
        gamma,
        delta,
        r,
        sign_config: opts.sign_config,
        family: opts.family,
    })
}

/// Linear predictors above this are clamped during sampling to keep the
/// conditional mean representable.
pub const PREDICTOR_CLAMP: f64 = 30.0;

/// Ancestral sampling in topological order. Each (sample, node) cell draws
/// from its own counter-derived RNG stream, so regenerating with modified
/// parameters of one node leaves all non-descendant columns untouched.
pub fn logic_sample(sp: &SimParams, n: usize, seed: u64) -> Result<LogicSample> {
    if n < 1 {
        return Err(Error::param("need n >= 1 samples"));
    }
    let d = sp.graph.d();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut clamp_events = 0usize;
    let parents: Vec<Vec<usize>> = (0..d).map(|j| sp.graph.parents(j)).collect();
    for i in 0..n {
        for &j in sp.graph.topo_order() {
            let mut a = sp.gamma[j];
            let mut b = sp.delta[j];
            for &k in &parents[j] {
                a += sp.w0[(k, j)] * x[(i, k)];
                b += sp.w1[(k, j)] * x[(i, k)];
            }
            if b > PREDICTOR_CLAMP {
                b = PREDICTOR_CLAMP;
                clamp_events += 1;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((i as u64) * (d as u64) + j as u64);
            let pi = sigmoid(a);
            let u: f64 = rng.random();
            x[(i, j)] = if u < 1.0 - pi {
                0.0
            } else {
                let mu = b.exp();
                draw_count(sp.family, mu, sp.r[j], &mut rng)
            };
        }
    }
    Ok(LogicSample {
        data: Dataset::new(x, None)?,
        clamp_events,
    })
}

fn draw_count(family: Family, mu: f64, r: f64, rng: &mut ChaCha8Rng) -> f64 {
    if mu < 1e-280 {
        return 0.0;
    }
    let lambda = match family {
        // NB as a Gamma-Poisson mixture
        Family::Zinb | Family::Nb => {
            let gamma = Gamma::new(r, mu / r).expect("gamma params positive");
            gamma.sample(rng)
        }
        Family::Zip | Family::Poisson => mu,
    };
    if lambda < 1e-280 {
        return 0.0;
    }
    let poisson = Poisson::new(lambda).expect("poisson lambda positive");
    let draw: f64 = poisson.sample(rng);
    draw.round()
}

/// q-th percentile with linear interpolation between order statistics.
pub fn percentile_linear(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Apply the dropout mask Y = X ∘ B, b_ij ~ Bernoulli(p_ij).
pub fn apply_dropout(x: &Dataset, cfg: &DropoutConfig) -> Result<Dataset> {
    let z: Vec<f64> = x.x().iter().map(|&v| (v + 1.0).ln()).collect();
    let m = percentile_linear(&z, cfg.percentile);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y = x.x().clone();
    for (value, &zv) in y.iter_mut().zip(z.iter()) {
        let p = sigmoid(cfg.slope * (zv - m));
        let u: f64 = rng.random();
        if u >= p {
            *value = 0.0;
        }
    }
    Dataset::new(y, Some(x.names().to_vec()))
}
