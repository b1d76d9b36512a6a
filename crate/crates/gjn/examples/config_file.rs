//! Load an experiment from a JSON config, resolve the case grid, and print
//! the analysis for each case. The same schema drives the `gjn` binary.
//!
//! ```bash
//! cargo run --release --example config_file
//! ```

use gjn::{build_approx, ExperimentConfig};

const CONFIG: &str = r#"{
    "network": {"preset": "paper-4.2"},
    "cases": [
        {"label": "B",
         "rho": [0.92, 0.98],
         "arrival_shapes": [0.75, 0.8],
         "service_shapes": [0.95, 0.6]},
        {"label": "B-separated",
         "rho": [0.84, 0.99],
         "arrival_shapes": [0.75, 0.8],
         "service_shapes": [0.95, 0.6]}
    ],
    "sim": {
        "horizon": 1e7,
        "warmup_fraction": 0.9,
        "num_batches": 20,
        "seed": 20260810,
        "pmf_cap": 0,
        "joint_interval": 1e4
    },
    "quantile_levels": [0.5, 0.9]
}"#;

fn main() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    for case in cfg.resolve_cases().unwrap() {
        let model = build_approx(&case.spec).unwrap();
        println!(
            "case {:<12} rho = {:?}",
            case.label,
            model
                .traffic
                .rho
                .iter()
                .map(|r| (r * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
        for j in 0..case.spec.num_stations() {
            let quants: Vec<String> = cfg
                .quantile_levels
                .iter()
                .map(|&q| format!("q{:.0}={:.2}", q * 100.0, model.quantile(j, q)))
                .collect();
            println!(
                "  station {}: mean {:>7.2}  {}",
                j + 1,
                model.mean_queue(j),
                quants.join("  ")
            );
        }
    }
}
