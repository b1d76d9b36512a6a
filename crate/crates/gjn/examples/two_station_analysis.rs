//! Analytical pipeline on the built-in two-station network: traffic
//! solution, absorption probabilities, variance constants, and the
//! approximate means/quantiles at several load levels.
//!
//! ```bash
//! cargo run --release --example two_station_analysis
//! ```

use gjn::config::{preset_network, PRESET_TWO_STATION};
use gjn::network::DistributionSpec;
use gjn::{build_approx, solve_traffic};

fn main() {
    let mut spec = preset_network(PRESET_TWO_STATION).unwrap();
    // gamma primitives with low shape = high variability
    spec.arrival_dist = vec![
        DistributionSpec::Gamma { shape: 0.75 },
        DistributionSpec::Gamma { shape: 0.8 },
    ];
    spec.service_dist = vec![
        DistributionSpec::Gamma { shape: 0.95 },
        DistributionSpec::Gamma { shape: 0.6 },
    ];

    let traffic = solve_traffic(&spec).unwrap();
    println!("lambda = {:?}", traffic.lambda);
    println!("rho    = {:?}", traffic.rho);

    let model = build_approx(&spec).unwrap();
    println!("w      = {:?}", model.w.w);
    println!("sigma2 = {:?}", model.sigma2);
    println!("d      = {:?}", model.d);
    println!();

    println!("{:<22} {:>10} {:>10}", "load (rho1, rho2)", "mean 1", "mean 2");
    for rho in [[0.92, 0.98], [0.96, 0.99], [0.99, 0.99]] {
        let mut s = spec.clone();
        s.mu = vec![traffic.lambda[0] / rho[0], traffic.lambda[1] / rho[1]];
        let m = build_approx(&s).unwrap();
        println!(
            "{:<22} {:>10.2} {:>10.2}",
            format!("({}, {})", rho[0], rho[1]),
            m.mean_queue(0),
            m.mean_queue(1)
        );
    }
    println!();

    println!("quantiles at rho = (0.92, 0.98):");
    for j in 0..2 {
        let qs: Vec<String> = [0.25, 0.5, 0.75, 0.9]
            .iter()
            .map(|&q| format!("{:.2}", model.quantile(j, q)))
            .collect();
        println!("  station {}: {}", j + 1, qs.join("  "));
    }
}
