//! The full training objective and the mini-batched AdamW loop.
//!
//! Per batch B and epoch t the objective is
//!
//! ```text
//! mu(t) * ( NLL_B + lambda_eff(t) * sum_{k != j} ||((W0)_kj, (W1)_kj)||_2 )
//!   + h-terms + alignment
//! ```
//!
//! where the h-terms are h(W0) + h(W1) in separate mode or h of the pooled
//! matrix in coupled mode, and the alignment penalty couples W0 and W1 by a
//! squared Frobenius or elementwise l1 norm. mu follows the central-path
//! decay, lambda_eff the cosine warm-up. For NB/Poisson fits the zero
//! component is frozen, the group penalty degenerates to an l1 penalty on W1,
//! and the W0 h-term and alignment vanish.

use crate::acyclicity::{
    coupled_h_and_grads, coupled_in_domain, h_ldet_with_grad, in_domain, AcyclicityMode,
};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::model::{nll_and_grad, Dataset, Family, ModelParams, ParamGrads};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignNorm {
    Frobenius,
    L1,
    None,
}

impl AlignNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignNorm::Frobenius => "frobenius",
            AlignNorm::L1 => "l1",
            AlignNorm::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frobenius" | "fro" => Ok(AlignNorm::Frobenius),
            "l1" => Ok(AlignNorm::L1),
            "none" => Ok(AlignNorm::None),
            other => Err(Error::param(format!(
                "unknown alignment norm `{other}` (expected frobenius|l1|none)"
            ))),
        }
    }
}

/// All optimizer, schedule, penalty, and coupling knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Initial central-path multiplier.
    pub mu0: f64,
    /// Multiplicative decay applied to mu every `decay_interval` epochs.
    pub alpha: f64,
    pub decay_interval: usize,
    pub lambda_group: f64,
    /// Cosine warm-up length (epochs) for the group penalty.
    pub warm: usize,
    pub lambda_align: f64,
    pub align_norm: AlignNorm,
    pub acyclicity_mode: AcyclicityMode,
    /// Log-det parameter.
    pub s: f64,
    /// Pooling stabilizer for coupled mode.
    pub epsilon: f64,
    /// Mini-batch size; capped at n when larger.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Global gradient-norm cap.
    pub clip_norm: f64,
    /// Binarization cutoff used downstream.
    pub threshold: f64,
    /// Scale the alignment penalty by the central-path multiplier, keeping
    /// its late-training pressure proportional to the data term.
    pub align_scaled_by_mu: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 4000,
            mu0: 1.0,
            alpha: 0.1,
            decay_interval: 1000,
            lambda_group: 0.001,
            warm: 400,
            lambda_align: 0.1,
            align_norm: AlignNorm::L1,
            acyclicity_mode: AcyclicityMode::Separate,
            s: 1.0,
            epsilon: 1e-8,
            batch_size: 256,
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            clip_norm: 5.0,
            threshold: 0.3,
            align_scaled_by_mu: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults rescaled for a different epoch budget: four central-path
    /// stages and a warm-up of a tenth of the run.
    pub fn for_epochs(epochs: usize) -> Self {
        TrainConfig {
            epochs,
            decay_interval: (epochs / 4).max(1),
            warm: (epochs / 10).max(1),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::param("epochs must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.mu0 <= 0.0 {
            return Err(Error::param(format!("mu0 must be > 0, got {}", self.mu0)));
        }
        if self.decay_interval < 1 {
            return Err(Error::param("decay_interval must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if self.warm < 1 {
            return Err(Error::param("warm must be >= 1"));
        }
        if self.lambda_group < 0.0 || self.lambda_align < 0.0 {
            return Err(Error::param("penalty weights must be >= 0"));
        }
        if self.s <= 0.0 {
            return Err(Error::param("s must be > 0"));
        }
        if self.acyclicity_mode == AcyclicityMode::Coupled && self.epsilon <= 0.0 {
            return Err(Error::param("epsilon must be > 0 in coupled mode"));
        }
        if self.learning_rate <= 0.0 || self.clip_norm <= 0.0 {
            return Err(Error::param("learning_rate and clip_norm must be > 0"));
        }
        if self.threshold < 0.0 {
            return Err(Error::param("threshold must be >= 0"));
        }
        Ok(())
    }
}

/// Learned parameters plus per-epoch traces and wall-clock accounting.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    /// Mean batch objective per epoch.
    pub loss_trace: Vec<f64>,
    /// Mean batch NLL per epoch.
    pub nll_trace: Vec<f64>,
    /// (h(W0), h(W1)) per epoch, or the pooled h duplicated in coupled mode.
    pub h_trace: Vec<(f64, f64)>,
    pub mu_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    pub elapsed_seconds: f64,
    pub config: TrainConfig,
    /// Set when training stopped early (non-finite objective or persistent
    /// domain rejections); traces then cover only the completed epochs.
    pub aborted: Option<String>,
    pub rejected_steps: usize,
}

/// mu(t) = mu0 * alpha^floor(t / decay_interval).
pub fn central_path_mu(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.mu0 * cfg.alpha.powi((epoch / cfg.decay_interval) as i32)
}

/// Cosine warm-up: (lambda_group / 2) (1 - cos(min(1, t/warm) pi)).
pub fn lambda_eff(epoch: usize, cfg: &TrainConfig) -> f64 {
    let frac = (epoch as f64 / cfg.warm as f64).min(1.0);
    cfg.lambda_group / 2.0 * (1.0 - (frac * std::f64::consts::PI).cos())
}

/// Objective value at one batch, decomposed, with gradients for all blocks.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub nll: f64,
    pub h0: f64,
    pub h1: f64,
    pub mu: f64,
    pub lambda_eff: f64,
    pub grads: ParamGrads,
}

/// Assemble the full objective and its gradient at the current epoch.
pub fn objective(
    x: &Dataset,
    params: &ModelParams,
    batch: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<ObjectiveEval> {
    let mu = central_path_mu(epoch, cfg);
    let lam = lambda_eff(epoch, cfg);
    let d = params.d();
    let zero_component = params.family.has_zero_component();

    let (nll, mut grads) = nll_and_grad(x, params, batch)?;
    grads.w0 *= mu;
    grads.w1 *= mu;
    grads.gamma *= mu;
    grads.delta *= mu;
    grads.r_raw *= mu;
    let mut value = mu * nll;

    // group penalty: l2 over ((W0)_kj, (W1)_kj) pairs, subgradient 0 at the
    // origin; degenerates to l1 on W1 without a zero component
    if lam > 0.0 {
        let mut group = 0.0;
        for k in 0..d {
            for j in 0..d {
                if k == j {
                    continue;
                }
                if zero_component {
                    let norm = (params.w0[(k, j)].powi(2) + params.w1[(k, j)].powi(2)).sqrt();
                    group += norm;
                    if norm > 0.0 {
                        grads.w0[(k, j)] += mu * lam * params.w0[(k, j)] / norm;
                        grads.w1[(k, j)] += mu * lam * params.w1[(k, j)] / norm;
                    }
                } else {
                    let v = params.w1[(k, j)];
                    group += v.abs();
                    grads.w1[(k, j)] += mu * lam * v.signum() * if v == 0.0 { 0.0 } else { 1.0 };
                }
            }
        }
        value += mu * lam * group;
    }

    // acyclicity terms sit outside the mu(...) group
    let (h0, h1) = match cfg.acyclicity_mode {
        AcyclicityMode::Separate => {
            let (h1, g1) = h_ldet_with_grad(&params.w1, cfg.s)?;
            grads.w1 += &g1;
            if zero_component {
                let (h0, g0) = h_ldet_with_grad(&params.w0, cfg.s)?;
                grads.w0 += &g0;
                value += h0 + h1;
                (h0, h1)
            } else {
                value += h1;
                (0.0, h1)
            }
        }
        AcyclicityMode::Coupled => {
            let (h, g0, g1) = coupled_h_and_grads(&params.w0, &params.w1, cfg.s, cfg.epsilon)?;
            value += h;
            grads.w1 += &g1;
            if zero_component {
                grads.w0 += &g0;
            }
            (h, h)
        }
    };

    // alignment couples W0 to W1; meaningless without a zero component
    if zero_component && cfg.lambda_align > 0.0 {
        let weight = if cfg.align_scaled_by_mu {
            mu * cfg.lambda_align
        } else {
            cfg.lambda_align
        };
        match cfg.align_norm {
            AlignNorm::Frobenius => {
                let mut sq = 0.0;
                for k in 0..d {
                    for j in 0..d {
                        let diff = params.w0[(k, j)] - params.w1[(k, j)];
                        sq += diff * diff;
                        grads.w0[(k, j)] += 2.0 * weight * diff;
                        grads.w1[(k, j)] -= 2.0 * weight * diff;
                    }
                }
                value += weight * sq;
            }
            AlignNorm::L1 => {
                let mut abs = 0.0;
                for k in 0..d {
                    for j in 0..d {
                        let diff = params.w0[(k, j)] - params.w1[(k, j)];
                        abs += diff.abs();
                        let sg = if diff == 0.0 { 0.0 } else { diff.signum() };
                        grads.w0[(k, j)] += weight * sg;
                        grads.w1[(k, j)] -= weight * sg;
                    }
                }
                value += weight * abs;
            }
            AlignNorm::None => {}
        }
    }

    if !zero_component {
        grads.w0.fill(0.0);
        grads.gamma.fill(0.0);
    }
    if !params.family.has_dispersion() {
        grads.r_raw.fill(0.0);
    }
    for j in 0..d {
        grads.w0[(j, j)] = 0.0;
        grads.w1[(j, j)] = 0.0;
    }

    Ok(ObjectiveEval {
        value,
        nll,
        h0,
        h1,
        mu,
        lambda_eff: lam,
        grads,
    })
}

/// Scale all gradient blocks so the global l2 norm is at most `clip_norm`.
/// Returns the post-clip norm.
pub fn clip_global_norm(grads: &mut ParamGrads, clip_norm: f64) -> f64 {
    let mut sq = 0.0;
    for v in grads
        .w0
        .iter()
        .chain(grads.w1.iter())
        .chain(grads.gamma.iter())
        .chain(grads.delta.iter())
        .chain(grads.r_raw.iter())
    {
        sq += v * v;
    }
    let norm = sq.sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        grads.w0 *= scale;
        grads.w1 *= scale;
        grads.gamma *= scale;
        grads.delta *= scale;
        grads.r_raw *= scale;
        clip_norm
    } else {
        norm
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MAX_HALVINGS: usize = 10;
const MAX_CONSECUTIVE_REJECTIONS: usize = 10;

struct AdamW {
    m: ParamGrads,
    v: ParamGrads,
    t: i32,
}

impl AdamW {
    fn new(d: usize) -> Self {
        AdamW {
            m: ParamGrads::zeros(d),
            v: ParamGrads::zeros(d),
            t: 0,
        }
    }

    /// Absorb a gradient and return the unscaled update direction
    /// m_hat / (sqrt(v_hat) + eps) for every block.
    fn direction(&mut self, g: &ParamGrads) -> ParamGrads {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        let mut dir = ParamGrads::zeros(g.gamma.len());
        macro_rules! block {
            ($field:ident) => {
                ndarray::Zip::from(&mut self.m.$field)
                    .and(&g.$field)
                    .for_each(|m, &gv| *m = BETA1 * *m + (1.0 - BETA1) * gv);
                ndarray::Zip::from(&mut self.v.$field)
                    .and(&g.$field)
                    .for_each(|v, &gv| *v = BETA2 * *v + (1.0 - BETA2) * gv * gv);
                ndarray::Zip::from(&mut dir.$field)
                    .and(&self.m.$field)
                    .and(&self.v.$field)
                    .for_each(|o, &m, &v| {
                        *o = (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
                    });
            };
        }
        block!(w0);
        block!(w1);
        block!(gamma);
        block!(delta);
        block!(r_raw);
        dir
    }
}

fn apply_update(params: &mut ModelParams, dir: &ParamGrads, lr: f64, weight_decay: f64) {
    let decay = 1.0 - lr * weight_decay;
    macro_rules! block {
        ($field:ident) => {
            ndarray::Zip::from(&mut params.$field)
                .and(&dir.$field)
                .for_each(|p, &d| *p = *p * decay - lr * d);
        };
    }
    block!(w0);
    block!(w1);
    block!(gamma);
    block!(delta);
    block!(r_raw);
    let d = params.d();
    for j in 0..d {
        params.w0[(j, j)] = 0.0;
        params.w1[(j, j)] = 0.0;
    }
}

fn params_in_domain(params: &ModelParams, cfg: &TrainConfig) -> bool {
    match cfg.acyclicity_mode {
        AcyclicityMode::Separate => {
            let ok1 = in_domain(&params.w1, cfg.s);
            if params.family.has_zero_component() {
                ok1 && in_domain(&params.w0, cfg.s)
            } else {
                ok1
            }
        }
        AcyclicityMode::Coupled => coupled_in_domain(&params.w0, &params.w1, cfg.s, cfg.epsilon),
    }
}

/// Run the full AdamW training loop and return the learned parameters with
/// their traces. Deterministic given (data, config, seed).
pub fn fit(x: &Dataset, family: Family, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if x.n() == 0 || x.d() < 2 {
        return Err(Error::data(format!(
            "need a non-empty dataset with >= 2 columns, got {}x{}",
            x.n(),
            x.d()
        )));
    }
    let start = Instant::now();
    let n = x.n();
    let batch_size = cfg.batch_size.min(n);
    let mut params = ModelParams::init_from_data(x, family);
    let mut optimizer = AdamW::new(x.d());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();

    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut nll_trace = Vec::with_capacity(cfg.epochs);
    let mut h_trace = Vec::with_capacity(cfg.epochs);
    let mut mu_trace = Vec::with_capacity(cfg.epochs);
    let mut lambda_trace = Vec::with_capacity(cfg.epochs);
    let mut aborted = None;
    let mut rejected_steps = 0usize;
    let mut consecutive_rejections = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_obj = 0.0;
        let mut epoch_nll = 0.0;
        let mut batches = 0usize;
        for batch in indices.chunks(batch_size) {
            let eval = match objective(x, &params, batch, cfg, epoch) {
                Ok(eval) => eval,
                Err(Error::Domain(msg)) => {
                    // current point fell out of the domain; should have been
                    // caught by step rejection, treat as fatal
                    aborted = Some(format!("epoch {epoch}: domain error at evaluation: {msg}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if !eval.value.is_finite() {
                aborted = Some(format!(
                    "epoch {epoch}: non-finite objective {} (nll {})",
                    eval.value, eval.nll
                ));
                break 'epochs;
            }
            epoch_obj += eval.value;
            epoch_nll += eval.nll;
            batches += 1;

            let mut grads = eval.grads;
            let norm = clip_global_norm(&mut grads, cfg.clip_norm);
            debug_assert!(norm <= cfg.clip_norm + 1e-9);
            let dir = optimizer.direction(&grads);

            let snapshot = params.clone();
            let mut accepted = false;
            let mut lr = cfg.learning_rate;
            for _ in 0..=MAX_HALVINGS {
                apply_update(&mut params, &dir, lr, cfg.weight_decay);
                if params_in_domain(&params, cfg) {
                    accepted = true;
                    break;
                }
                params = snapshot.clone();
                lr *= 0.5;
            }
            if accepted {
                consecutive_rejections = 0;
            } else {
                // drop the stale moments so the next step starts from the raw
                // gradient, where the log-det barrier dominates the cycle
                // coordinates and points back into the domain
                optimizer = AdamW::new(x.d());
                rejected_steps += 1;
                consecutive_rejections += 1;
                if consecutive_rejections > MAX_CONSECUTIVE_REJECTIONS {
                    aborted = Some(format!(
                        "epoch {epoch}: {consecutive_rejections} consecutive rejected steps"
                    ));
                    break 'epochs;
                }
            }
        }
        let scale = 1.0 / batches.max(1) as f64;
        loss_trace.push(epoch_obj * scale);
        nll_trace.push(epoch_nll * scale);
        mu_trace.push(central_path_mu(epoch, cfg));
        lambda_trace.push(lambda_eff(epoch, cfg));
        h_trace.push(current_h(&params, cfg));
    }

    Ok(FitResult {
        params,
        loss_trace,
        nll_trace,
        h_trace,
        mu_trace,
        lambda_trace,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
        aborted,
        rejected_steps,
    })
}

fn current_h(params: &ModelParams, cfg: &TrainConfig) -> (f64, f64) {
    match cfg.acyclicity_mode {
        AcyclicityMode::Separate => {
            let h0 = if params.family.has_zero_component() {
                crate::acyclicity::h_ldet(&params.w0, cfg.s).unwrap_or(f64::NAN)
            } else {
                0.0
            };
            let h1 = crate::acyclicity::h_ldet(&params.w1, cfg.s).unwrap_or(f64::NAN);
            (h0, h1)
        }
        AcyclicityMode::Coupled => {
            let h = crate::acyclicity::pool_coupled(&params.w0, &params.w1, cfg.epsilon)
                .and_then(|pooled| crate::acyclicity::h_ldet(&pooled, cfg.s))
                .unwrap_or(f64::NAN);
            (h, h)
        }
    }
}

/// Directed graph with an edge wherever |w_kj| exceeds the threshold.
pub fn binarize(w: &Array2<f64>, threshold: f64) -> Digraph {
    let d = w.nrows();
    let edges = (0..d)
        .flat_map(|k| (0..d).map(move |j| (k, j)))
        .filter(|&(k, j)| k != j && w[(k, j)].abs() > threshold);
    Digraph::from_edges(d, edges)
}
