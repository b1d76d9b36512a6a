//! Numerical identities of the transform machinery: flow balance, the
//! variance identity sigma^2 = 2Q*, the theta-construction drift
//! identities, and the second-order Taylor decay of the exponents.
//!
//! ```bash
//! cargo run --release --example transform_identities
//! ```

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use gjn::config::variability_experiment;
use gjn::network::DistributionSpec;
use gjn::rng::child_stream;
use gjn::transform::{
    build_theta, check_linear, flow_balance_residual, q_star, taylor_check, ThetaVector,
};
use gjn::{build_approx, solve_traffic};

fn main() {
    let cfg = variability_experiment();
    let case = &cfg.resolve_cases().unwrap()[1];
    let spec = &case.spec;
    let traffic = solve_traffic(spec).unwrap();
    let model = build_approx(spec).unwrap();
    let mut rng = child_stream(1, 0);

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let theta = [-2.0 * rng.gen::<f64>(), -2.0 * rng.gen::<f64>()];
        worst = worst.max(flow_balance_residual(spec, &traffic.lambda, &theta).abs());
    }
    println!("flow balance, worst residual over 1000 theta: {worst:.2e}");

    for j in 0..2 {
        let mut u = vec![0.0; 2];
        for i in 0..j {
            u[i] = model.w.w[i][j];
        }
        u[j] = 1.0;
        let q2 = 2.0 * q_star(spec, &traffic.lambda, &u);
        println!(
            "station {}: sigma^2 = {:.6}, 2Q* = {:.6}, gap {:.2e}",
            j + 1,
            model.sigma2[j],
            q2,
            (q2 - model.sigma2[j]).abs()
        );
    }

    for j in 0..2 {
        let eta = ThetaVector::new(vec![-1.0, -1.0]).unwrap();
        let theta = build_theta(spec, &model.w, &eta, j, 0.1).unwrap();
        let lin = check_linear(spec, &model.w, &theta).unwrap();
        println!(
            "theta construction at station {}: theta = {:?}, worst drift residual {:.2e}",
            j + 1,
            theta.theta,
            lin.max_residual()
        );
    }

    println!();
    println!("Taylor decay of the exponents, gamma(0.75) primitives:");
    let scales: Vec<f64> = (3..=20).map(|n| -(2.0f64).powi(-n)).collect();
    let rows = taylor_check(
        &DistributionSpec::Gamma { shape: 0.75 },
        &DistributionSpec::Gamma { shape: 0.75 },
        &spec.routing[0],
        &[1.0, 1.0],
        &scales,
        0,
    );
    println!("{:>12} {:>14} {:>14}", "theta", "gamma ratio", "xi ratio");
    for row in rows.iter().step_by(3) {
        println!(
            "{:>12.3e} {:>14.3e} {:>14.3e}",
            row.theta, row.gamma_ratio, row.xi_ratio
        );
    }
}
