//! Scratch probe: desk-scale structure recovery with defaults.

use zico_core::experiment::{run_cell, CellSpec, GraphKind};
use zico_core::model::Family;
use zico_core::simulate::{SignConfig, SimOptions};
use zico_core::train::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let family = match args.get(2).map(|s| s.as_str()).unwrap_or("zinb") {
        "zinb" => Family::Zinb,
        "zip" => Family::Zip,
        "nb" => Family::Nb,
        "poisson" => Family::Poisson,
        _ => panic!(),
    };
    let sign = match args.get(3).map(|s| s.as_str()).unwrap_or("+-") {
        "++" => SignConfig::PlusPlus,
        "--" => SignConfig::MinusMinus,
        "+-" => SignConfig::PlusMinus,
        "-+" => SignConfig::MinusPlus,
        _ => panic!(),
    };
    let graph = match args.get(4).map(|s| s.as_str()).unwrap_or("er") {
        "er" => GraphKind::Er,
        "ba" => GraphKind::Ba,
        _ => panic!(),
    };
    let lambda_group: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let reps: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(2);

    let mut train = TrainConfig::for_epochs(epochs);
    train.lambda_group = lambda_group;
    if let Ok(v) = std::env::var("PROBE_LR") { train.learning_rate = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("PROBE_CLIP") { train.clip_norm = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("PROBE_BATCH") { train.batch_size = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("PROBE_WD") { train.weight_decay = v.parse().unwrap(); }
    if std::env::var("PROBE_ALIGN_MU").is_ok() { train.align_scaled_by_mu = true; }
    let dropout = if std::env::var("PROBE_DROPOUT").is_ok() { Some((1.0, 65.0)) } else { None };
    if let Ok(v) = std::env::var("PROBE_DECAY") { train.decay_interval = v.parse().unwrap(); }
    if std::env::var("PROBE_COUPLED").is_ok() {
        train.acyclicity_mode = zico_core::acyclicity::AcyclicityMode::Coupled;
        train.align_norm = zico_core::train::AlignNorm::None;
        train.lambda_align = 0.0;
    }
    if let Ok(v) = std::env::var("PROBE_WARM") { train.warm = v.parse().unwrap(); }
    
    let mut sim = SimOptions::default();
    if let Ok(v) = std::env::var("PROBE_GAMMA_MEAN") { sim.gamma_mean = v.parse().unwrap(); }
    if let Ok(v) = std::env::var("PROBE_DELTA_MEAN") { sim.delta_mean = v.parse().unwrap(); }
    println!("epochs={epochs} family={family:?} sign={sign:?} graph={graph:?} lg={lambda_group} gmean={}", sim.gamma_mean);
    for seed in 0..reps {
        let rho = std::env::var("PROBE_RHO").ok().map(|v| v.parse().unwrap());
        let cell = CellSpec {
            graph,
            d: 20,
            n: 500,
            er_p: 0.25,
            ba_m: 3,
            sign,
            rho,
            family,
            train: train.clone(),
            sim: sim.clone(),
            dropout,
            seed,
        };
        let t0 = std::time::Instant::now();
        match run_cell(&cell) {
            Ok(out) => {
                let r = &out.report;
                if std::env::var("PROBE_DIAG").is_ok() {
                    use zico_core::graph::Digraph;
                    use zico_core::metrics::auprc;
                    let truth = Digraph::from(&out.truth);
                    let a0 = auprc(&out.fit.params.w0.mapv(f64::abs), &truth).unwrap();
                    let a1 = auprc(&out.fit.params.w1.mapv(f64::abs), &truth).unwrap();
                    let w0max = out.fit.params.w0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let w1max = out.fit.params.w1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let mut shortcut = 0;
                    let mut other = 0;
                    let pred = zico_core::train::binarize(
                        &zico_core::metrics::combine_scores(&out.fit.params.w0, &out.fit.params.w1)
                            .unwrap(),
                        0.3,
                    );
                    // transitive closure of the truth
                    let d = out.truth.d();
                    let mut reach = vec![vec![false; d]; d];
                    for &(k, j) in out.truth.edges() {
                        reach[k][j] = true;
                    }
                    for m in 0..d {
                        for a in 0..d {
                            for b in 0..d {
                                if reach[a][m] && reach[m][b] {
                                    reach[a][b] = true;
                                }
                            }
                        }
                    }
                    for &(k, j) in &pred.edges {
                        if !out.truth.has_edge(k, j) && !out.truth.has_edge(j, k) {
                            if reach[k][j] || reach[j][k] {
                                shortcut += 1;
                            } else {
                                other += 1;
                            }
                        }
                    }
                    println!(
                        "  diag seed {seed}: auprc(|w0|)={a0:.3} auprc(|w1|)={a1:.3} max|w0|={w0max:.3} max|w1|={w1max:.3} tp={} fp={} rev={} shortcut={shortcut} unrelated={other}",
                        r.tp, r.fp, r.reversed
                    );
                }
                println!(
                    "seed {seed}: tpr={:.3} fdr={:.3} shd={} auprc={:.3} ratio={:.2} edges(true/pred)={}/{} h=({:.2e},{:.2e}) nll={:.3} rej={} {:.1}s",
                    r.tpr,
                    r.fdr,
                    r.shd,
                    r.auprc,
                    r.auprc_ratio,
                    out.truth.num_edges(),
                    r.tp + r.fp,
                    out.fit.h_trace.last().unwrap().0,
                    out.fit.h_trace.last().unwrap().1,
                    out.fit.nll_trace.last().unwrap(),
                    out.fit.rejected_steps,
                    t0.elapsed().as_secs_f64()
                );
            }
            Err(e) => println!("seed {seed}: FAILED: {e}"),
        }
    }
}
