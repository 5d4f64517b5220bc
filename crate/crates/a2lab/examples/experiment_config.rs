//! Drive the experiment runner from a config, the same path the `a2lab run`
//! command takes: write a config, run it, inspect the report and the CSVs.
//!
//! Run with: cargo run --release --example experiment_config

use a2lab::experiment::{
    config_hash, emit_report, run_experiments, ExperimentConfig, ExperimentSpec, SpaceSpec,
};

fn main() {
    let config = ExperimentConfig {
        seed: 42,
        space: SpaceSpec::Net { net: 32 },
        delta: 0.25,
        levels: 2,
        gamma: 0.25,
        r: 1,
        weights: None,
        experiments: vec![
            ExperimentSpec::Cover { samples: 25 },
            ExperimentSpec::Census {
                spaces: 20,
                max_points: 6,
            },
            ExperimentSpec::Bellman {
                alpha: 0.25,
                q: 100.0,
                samples: 20_000,
            },
            ExperimentSpec::Containment {
                s0_max: 3,
                trials: 100,
            },
        ],
        enumeration_cap: 10_000_000,
    };
    println!("config hash: {}", config_hash(&config));
    let report = run_experiments(&config).expect("experiments run");
    for exp in &report.experiments {
        println!(
            "{:12} {}  ({:.2}s)  {:?}",
            exp.name,
            if exp.pass { "pass" } else { "FAIL" },
            exp.runtime_s,
            exp.metrics
        );
    }
    let dir = std::env::temp_dir().join("a2lab_example_report");
    let written = emit_report(&report, &dir).expect("report writes");
    println!("written:");
    for path in written {
        println!("  {}", path.display());
    }
}
