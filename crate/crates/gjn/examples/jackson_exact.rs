//! All-exponential network: the simulated marginals converge to the exact
//! product-form geometric law, station by station.
//!
//! ```bash
//! cargo run --release --example jackson_exact
//! ```

use gjn::config::{preset_network, PRESET_TWO_STATION};
use gjn::{jackson_oracle, simulate, SimConfig};

fn main() {
    let mut spec = preset_network(PRESET_TWO_STATION).unwrap();
    spec.mu = vec![1.0 / 0.8, 1.0 / 0.9]; // rho = (0.8, 0.9)

    let law = jackson_oracle(&spec, 50).unwrap();
    let cfg = SimConfig {
        horizon: 2e6,
        warmup_fraction: 0.5,
        num_batches: 20,
        seed: 2024,
        pmf_cap: 50,
        joint_interval: None,
    };
    let est = simulate(&spec, &cfg).unwrap();

    for j in 0..2 {
        println!(
            "station {}: exact mean {:.3}, simulated {:.3} +- {:.3}",
            j + 1,
            law.mean(j),
            est.stations[j].mean,
            est.stations[j].ci_halfwidth
        );
    }
    println!();
    println!("{:>3}  {:>24}  {:>24}", "k", "station 1 exact / sim", "station 2 exact / sim");
    for k in 0..=10 {
        println!(
            "{k:>3}  {:>11.5} {:>11.5}   {:>11.5} {:>11.5}",
            law.marginals[0][k], est.stations[0].pmf[k], law.marginals[1][k], est.stations[1].pmf[k]
        );
    }
    let max_gap: f64 = (0..2)
        .flat_map(|j| (0..=10).map(move |k| (j, k)))
        .map(|(j, k)| (law.marginals[j][k] - est.stations[j].pmf[k]).abs())
        .fold(0.0, f64::max);
    println!("\nmax |pmf gap| over k <= 10: {max_gap:.2e}");
}
