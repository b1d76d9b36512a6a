//! Simulation vs approximation on the two-station network with
//! high-variability gamma primitives, at a horizon short enough to finish
//! in a few seconds.
//!
//! ```bash
//! cargo run --release --example simulate_vs_approx
//! ```

use gjn::config::variability_experiment;
use gjn::{build_approx, simulate};

fn main() {
    let cfg = variability_experiment();
    let cases = cfg.resolve_cases().unwrap();

    println!(
        "{:<6} {:>22} {:>22}",
        "case", "station 1 Sim / Exp", "station 2 Sim / Exp"
    );
    for case in &cases {
        let model = build_approx(&case.spec).unwrap();
        let mut sim = cfg.sim_for(&case.spec).unwrap();
        sim.horizon = 3e6;
        sim.warmup_fraction = 0.5;
        let est = simulate(&case.spec, &sim).unwrap();
        println!(
            "{:<6} {:>10.2} / {:>8.2} {:>11.2} / {:>8.2}",
            case.label,
            est.stations[0].mean,
            model.mean_queue(0),
            est.stations[1].mean,
            model.mean_queue(1),
        );
    }
    println!();
    println!("(longer horizons tighten the agreement; the CLI `gjn simulate` uses 1e7+)");
}
