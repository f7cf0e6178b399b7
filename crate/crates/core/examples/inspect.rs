//! Scratch: look at simulated data scale under each sign configuration.

use zico_core::experiment::{generate_graph, GraphKind};
use zico_core::simulate::{logic_sample, sample_params, SignConfig, SimOptions};

fn main() {
    for sign in [
        SignConfig::PlusPlus,
        SignConfig::PlusMinus,
        SignConfig::MinusPlus,
        SignConfig::MinusMinus,
    ] {
        let g = generate_graph(GraphKind::Ba, 20, 0.25, 3, 0).unwrap();
        let opts = SimOptions {
            sign_config: sign,
            ..SimOptions::default()
        };
        let sp = sample_params(&g, &opts, None, 2).unwrap();
        let out = logic_sample(&sp, 500, 3).unwrap();
        let x = out.data.x();
        let nonzero = x.iter().filter(|&&v| v > 0.0).count();
        let max = x.iter().cloned().fold(0.0f64, f64::max);
        let big = x.iter().filter(|&&v| v > 1e6).count();
        let huge = x.iter().filter(|&&v| v > 1e12).count();
        println!(
            "{}: zeros={:.2}% max={:.3e} cells>1e6: {} cells>1e12: {} clamps={}",
            opts.sign_config.as_str(),
            100.0 * (1.0 - nonzero as f64 / (500.0 * 20.0)),
            max,
            big,
            huge,
            out.clamp_events
        );
        // per-column max
        let mut col_max: Vec<f64> = Vec::new();
        for j in 0..20 {
            col_max.push(x.column(j).iter().cloned().fold(0.0f64, f64::max));
        }
        let line: Vec<String> = col_max.iter().map(|v| format!("{v:.1e}")).collect();
        println!("  col max: {}", line.join(" "));
    }
}
