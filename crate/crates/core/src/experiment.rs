//! Simulate -> fit -> eval experiment grids with per-cell replicates,
//! emitting one long-format CSV row per replicate per configuration.

use crate::acyclicity::AcyclicityMode;
use crate::error::{Error, Result};
use crate::graph::{generate_ba, generate_er, split_support, DagGraph, Digraph};
use crate::metrics::{combine_scores, evaluate, EvalReport};
use crate::model::{Dataset, Family};
use crate::simulate::{apply_dropout, logic_sample, sample_params, DropoutConfig, SimOptions, SignConfig};
use crate::train::{binarize, fit, AlignNorm, FitResult, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Er,
    Ba,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Er => "er",
            GraphKind::Ba => "ba",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er" => Ok(GraphKind::Er),
            "ba" => Ok(GraphKind::Ba),
            other => Err(Error::param(format!("unknown graph model `{other}` (expected er|ba)"))),
        }
    }
}

/// How W0 and W1 are coupled during the fit: the acyclicity mode plus the
/// alignment penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub mode: AcyclicityMode,
    pub norm: AlignNorm,
    pub lambda_align: f64,
}

impl Coupling {
    pub fn separate(norm: AlignNorm, lambda_align: f64) -> Self {
        Coupling {
            mode: AcyclicityMode::Separate,
            norm,
            lambda_align,
        }
    }

    pub fn coupled() -> Self {
        Coupling {
            mode: AcyclicityMode::Coupled,
            norm: AlignNorm::None,
            lambda_align: 0.0,
        }
    }

    /// Column label: the alignment norm, or `coupled` for pooled acyclicity.
    pub fn label(&self) -> &'static str {
        match self.mode {
            AcyclicityMode::Coupled => "coupled",
            AcyclicityMode::Separate => self.norm.as_str(),
        }
    }
}

/// Grid specification: data axes (graph, sign, rho, replicate) crossed with
/// fit axes (family, lambda_group, coupling). Replicate data is shared across
/// fit axes, so families are compared on identical datasets.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub graphs: Vec<GraphKind>,
    pub d: usize,
    pub n: usize,
    pub er_p: f64,
    pub ba_m: usize,
    pub families: Vec<Family>,
    pub signs: Vec<SignConfig>,
    pub lambda_groups: Vec<f64>,
    pub couplings: Vec<Coupling>,
    /// None entries skip the support split; Some(rho) splits the edge set.
    pub rhos: Vec<Option<f64>>,
    pub replicates: usize,
    pub seed_base: u64,
    pub base_train: TrainConfig,
    pub base_sim: SimOptions,
    /// (slope, percentile): fit on dropout-perturbed data when set.
    pub dropout: Option<(f64, f64)>,
    /// Thread count for the grid; 0 uses the rayon default.
    pub jobs: usize,
    /// When false, the seconds column is written as 0 so repeated runs are
    /// byte-identical.
    pub record_timing: bool,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            graphs: vec![GraphKind::Er],
            d: 20,
            n: 500,
            er_p: 0.25,
            ba_m: 3,
            families: vec![Family::Zinb],
            signs: vec![SignConfig::PlusMinus],
            lambda_groups: vec![TrainConfig::default().lambda_group],
            couplings: vec![Coupling::separate(AlignNorm::L1, 0.1)],
            rhos: vec![None],
            replicates: 5,
            seed_base: 0,
            base_train: TrainConfig::default(),
            base_sim: SimOptions::default(),
            dropout: None,
            jobs: 0,
            record_timing: true,
        }
    }
}

/// One row of results.csv.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub config_id: String,
    pub replicate: usize,
    pub graph: GraphKind,
    pub family: Family,
    pub sign: SignConfig,
    pub lambda_group: f64,
    pub lambda_align: f64,
    pub align_norm: &'static str,
    pub rho: Option<f64>,
    pub report: Option<EvalReport>,
    pub seconds: f64,
    pub error: Option<String>,
}

pub const RESULTS_CSV_HEADER: &str =
    "config_id,replicate,graph,family,sign,lambda_group,lambda_align,align_norm,rho,tpr,fdr,shd,auprc,auprc_ratio,seconds";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let rho = row.rho.map_or(String::new(), |r| format!("{r}"));
        let (tpr, fdr, shd, auprc, ratio) = match &row.report {
            Some(r) => (
                format!("{}", r.tpr),
                format!("{}", r.fdr),
                format!("{}", r.shd),
                format!("{}", r.auprc),
                format!("{}", r.auprc_ratio),
            ),
            None => (
                "NaN".into(),
                "NaN".into(),
                "NaN".into(),
                "NaN".into(),
                "NaN".into(),
            ),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.config_id,
            row.replicate,
            row.graph.as_str(),
            row.family.as_str(),
            row.sign.as_str(),
            row.lambda_group,
            row.lambda_align,
            row.align_norm,
            rho,
            tpr,
            fdr,
            shd,
            auprc,
            ratio,
            row.seconds
        );
    }
    out
}

/// The full pipeline for one cell: generate, optionally perturb, fit, score.
pub struct CellOutcome {
    pub truth: DagGraph,
    pub data: Dataset,
    pub fit: FitResult,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct CellSpec {
    pub graph: GraphKind,
    pub d: usize,
    pub n: usize,
    pub er_p: f64,
    pub ba_m: usize,
    pub sign: SignConfig,
    pub rho: Option<f64>,
    pub family: Family,
    pub train: TrainConfig,
    pub sim: SimOptions,
    pub dropout: Option<(f64, f64)>,
    pub seed: u64,
}

pub fn generate_graph(kind: GraphKind, d: usize, er_p: f64, ba_m: usize, seed: u64) -> Result<DagGraph> {
    match kind {
        GraphKind::Er => generate_er(d, er_p, seed),
        GraphKind::Ba => generate_ba(d, ba_m, seed),
    }
}

/// The generation stage of a cell: truth graph, optional masks, true
/// parameters, clean sample, and the dropout-perturbed variant when asked.
pub struct SimulatedCell {
    pub truth: DagGraph,
    pub masks: Option<crate::graph::SupportMasks>,
    pub params: crate::simulate::SimParams,
    pub clean: crate::simulate::LogicSample,
    pub perturbed: Option<Dataset>,
}

impl SimulatedCell {
    /// The dataset a fit should run on.
    pub fn fit_data(&self) -> &Dataset {
        self.perturbed.as_ref().unwrap_or(&self.clean.data)
    }
}

/// Generate the data for one cell. Seeds are derived from the cell seed so
/// the same cell always produces the same bytes.
pub fn simulate_cell(cell: &CellSpec) -> Result<SimulatedCell> {
    let truth = generate_graph(cell.graph, cell.d, cell.er_p, cell.ba_m, cell.seed)?;
    let masks = match cell.rho {
        Some(rho) => Some(split_support(&truth, rho, cell.seed.wrapping_add(1))?),
        None => None,
    };
    let mut sim = cell.sim.clone();
    sim.sign_config = cell.sign;
    let params = sample_params(&truth, &sim, masks.as_ref(), cell.seed.wrapping_add(2))?;
    let clean = logic_sample(&params, cell.n, cell.seed.wrapping_add(3))?;
    let perturbed = match cell.dropout {
        Some((slope, q)) => {
            let cfg = DropoutConfig::new(slope, q, cell.seed.wrapping_add(4))?;
            Some(apply_dropout(&clean.data, &cfg)?)
        }
        None => None,
    };
    Ok(SimulatedCell {
        truth,
        masks,
        params,
        clean,
        perturbed,
    })
}

pub fn run_cell(cell: &CellSpec) -> Result<CellOutcome> {
    let sim = simulate_cell(cell)?;
    let mut train = cell.train.clone();
    train.seed = cell.seed;
    let fit_result = fit(sim.fit_data(), cell.family, &train)?;
    if let Some(reason) = &fit_result.aborted {
        return Err(Error::Aborted(reason.clone()));
    }
    let scores = combine_scores(&fit_result.params.w0, &fit_result.params.w1)?;
    let pred = binarize(&scores, train.threshold);
    let report = evaluate(&pred, &scores, &Digraph::from(&sim.truth))?;
    let data = match sim.perturbed {
        Some(perturbed) => perturbed,
        None => sim.clean.data,
    };
    Ok(CellOutcome {
        truth: sim.truth,
        data,
        fit: fit_result,
        report,
    })
}

struct Task {
    order: usize,
    config_id: String,
    replicate: usize,
    cell: CellSpec,
    graph: GraphKind,
    family: Family,
    sign: SignConfig,
    lambda_group: f64,
    coupling: Coupling,
    rho: Option<f64>,
}

/// Run the whole grid and return the rows in deterministic order.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchRow>> {
    if spec.replicates < 1 {
        return Err(Error::param("need at least one replicate"));
    }
    let mut tasks = Vec::new();
    let mut config_idx = 0usize;
    for &graph in &spec.graphs {
        for &sign in &spec.signs {
            for &rho in &spec.rhos {
                for &lambda_group in &spec.lambda_groups {
                    for &coupling in &spec.couplings {
                        for &family in &spec.families {
                            let config_id = format!("c{config_idx:03}");
                            config_idx += 1;
                            for rep in 0..spec.replicates {
                                let mut train = spec.base_train.clone();
                                train.lambda_group = lambda_group;
                                train.lambda_align = coupling.lambda_align;
                                train.align_norm = coupling.norm;
                                train.acyclicity_mode = coupling.mode;
                                let cell = CellSpec {
                                    graph,
                                    d: spec.d,
                                    n: spec.n,
                                    er_p: spec.er_p,
                                    ba_m: spec.ba_m,
                                    sign,
                                    rho,
                                    family,
                                    train,
                                    sim: spec.base_sim.clone(),
                                    dropout: spec.dropout,
                                    seed: spec.seed_base + rep as u64,
                                };
                                tasks.push(Task {
                                    order: tasks.len(),
                                    config_id: config_id.clone(),
                                    replicate: rep,
                                    cell,
                                    graph,
                                    family,
                                    sign,
                                    lambda_group,
                                    coupling,
                                    rho,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let run_all = || -> Vec<BenchRow> {
        let mut rows: Vec<(usize, BenchRow)> = tasks
            .par_iter()
            .map(|task| {
                let outcome = run_cell(&task.cell);
                let (report, seconds, error) = match outcome {
                    Ok(out) => {
                        let secs = if spec.record_timing {
                            out.fit.elapsed_seconds
                        } else {
                            0.0
                        };
                        (Some(out.report), secs, None)
                    }
                    Err(e) => (None, 0.0, Some(e.to_string())),
                };
                (
                    task.order,
                    BenchRow {
                        config_id: task.config_id.clone(),
                        replicate: task.replicate,
                        graph: task.graph,
                        family: task.family,
                        sign: task.sign,
                        lambda_group: task.lambda_group,
                        lambda_align: task.coupling.lambda_align,
                        align_norm: task.coupling.label(),
                        rho: task.rho,
                        report,
                        seconds,
                        error,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|(order, _)| *order);
        rows.into_iter().map(|(_, row)| row).collect()
    };

    let rows = if spec.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?
            .install(run_all)
    } else {
        run_all()
    };
    Ok(rows)
}

/// Mean of a metric over the successful rows matching `keep`.
pub fn mean_metric<F>(rows: &[BenchRow], keep: impl Fn(&BenchRow) -> bool, metric: F) -> f64
where
    F: Fn(&EvalReport) -> f64,
{
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| keep(r))
        .filter_map(|r| r.report.as_ref().map(&metric))
        .collect();
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> BenchmarkSpec {
        BenchmarkSpec {
            graphs: vec![GraphKind::Er],
            d: 6,
            n: 80,
            er_p: 0.3,
            ba_m: 2,
            families: vec![Family::Zinb],
            signs: vec![SignConfig::PlusMinus],
            lambda_groups: vec![0.01],
            couplings: vec![Coupling::separate(AlignNorm::L1, 0.1)],
            rhos: vec![None],
            replicates: 2,
            seed_base: 5,
            base_train: TrainConfig {
                batch_size: 64,
                ..TrainConfig::for_epochs(60)
            },
            base_sim: SimOptions::default(),
            dropout: None,
            jobs: 0,
            record_timing: false,
        }
    }

    #[test]
    fn benchmark_rows_are_deterministic_without_timing() {
        let spec = tiny_spec();
        let a = rows_to_csv(&run_benchmark(&spec).unwrap());
        let b = rows_to_csv(&run_benchmark(&spec).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with(RESULTS_CSV_HEADER));
        assert_eq!(a.lines().count(), 1 + 2);
    }

    #[test]
    fn families_share_replicate_data() {
        let mut spec = tiny_spec();
        spec.families = vec![Family::Zinb, Family::Poisson];
        spec.replicates = 1;
        let rows = run_benchmark(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0].config_id, rows[1].config_id);
        // same data seed: identical truth, so identical per-row seed column
        assert_eq!(rows[0].replicate, rows[1].replicate);
    }

    #[test]
    fn run_cell_produces_consistent_outcome() {
        let spec = tiny_spec();
        let cell = CellSpec {
            graph: GraphKind::Ba,
            d: 6,
            n: 60,
            er_p: 0.3,
            ba_m: 2,
            sign: SignConfig::PlusMinus,
            rho: Some(0.5),
            family: Family::Zinb,
            train: spec.base_train.clone(),
            sim: spec.base_sim.clone(),
            dropout: Some((1.0, 65.0)),
            seed: 3,
        };
        let out = run_cell(&cell).unwrap();
        assert_eq!(out.truth.d(), 6);
        assert_eq!(out.data.n(), 60);
        assert!(out.report.tpr >= 0.0 && out.report.tpr <= 1.0);
        assert!(out.fit.aborted.is_none());
    }
}
