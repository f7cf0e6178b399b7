use zico_core::experiment::{generate_graph, GraphKind};
use zico_core::graph::split_support;
use zico_core::simulate::{logic_sample, sample_params, SignConfig, SimOptions};

fn main() {
    for seed in 0..3u64 {
        let g = generate_graph(GraphKind::Ba, 20, 0.25, 3, seed).unwrap();
        let masks = split_support(&g, 0.0, seed.wrapping_add(1)).unwrap();
        let opts = SimOptions {
            sign_config: SignConfig::MinusPlus,
            gamma_mean: -1.5,
            ..SimOptions::default()
        };
        let sp = sample_params(&g, &opts, Some(&masks), seed.wrapping_add(2)).unwrap();
        let out = logic_sample(&sp, 500, seed.wrapping_add(3)).unwrap();
        let x = out.data.x();
        let zeros = x.iter().filter(|&&v| v == 0.0).count() as f64 / 10000.0;
        let max = x.iter().cloned().fold(0.0f64, f64::max);
        let big = x.iter().filter(|&&v| v > 1e6).count();
        let huge = x.iter().filter(|&&v| v > 1e12).count();
        println!(
            "seed {seed}: zeros={:.1}% max={max:.2e} >1e6: {big} >1e12: {huge} clamps={}",
            zeros * 100.0, out.clamp_events
        );
    }
}
