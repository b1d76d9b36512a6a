//! M/M/1 sanity check: the simulator, the exact geometric law, and the
//! approximation all agree (for a single exponential station the
//! approximation is exact: d = 1).
//!
//! ```bash
//! cargo run --release --example mm1_sanity
//! ```

use gjn::network::DistributionSpec;
use gjn::{build_approx, jackson_oracle, simulate, NetworkSpec, SimConfig};

fn main() {
    let rho = 0.5;
    let spec = NetworkSpec::new(
        vec![rho],
        vec![1.0],
        vec![vec![0.0]],
        vec![DistributionSpec::Exponential],
        vec![DistributionSpec::Exponential],
    )
    .unwrap();

    let model = build_approx(&spec).unwrap();
    println!("approximation: d = {:.6}, mean = {:.4}", model.d[0], model.mean_queue(0));

    let law = jackson_oracle(&spec, 16).unwrap();
    println!("exact:         mean = {:.4}", law.mean(0));

    let cfg = SimConfig {
        horizon: 1e6,
        warmup_fraction: 0.5,
        num_batches: 20,
        seed: 7,
        pmf_cap: 64,
        joint_interval: None,
    };
    let est = simulate(&spec, &cfg).unwrap();
    println!(
        "simulated:     mean = {:.4} +- {:.4} (95% batch-means CI)",
        est.stations[0].mean, est.stations[0].ci_halfwidth
    );
    println!();

    println!("{:>3} {:>10} {:>10} {:>10}", "k", "exact", "sim", "approx");
    for k in 0..8 {
        println!(
            "{k:>3} {:>10.5} {:>10.5} {:>10.5}",
            law.marginals[0][k],
            est.stations[0].pmf[k],
            model.pmf(0, k as u64, Default::default())
        );
    }
}
