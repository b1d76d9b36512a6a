//! Test whether the two stations' queue lengths are independent: record
//! the joint state at widely separated instants, build the contingency
//! table, and run the G-test. Also prints the time-weighted
//! product-vs-joint occupancy for small queue values.
//!
//! ```bash
//! cargo run --release --example independence_gtest
//! ```

use gjn::config::variability_experiment;
use gjn::simulate;
use gjn::stats::{contingency_from_estimate, g_test, joint_product_report};

fn main() {
    let cfg = variability_experiment();
    let case = &cfg.resolve_cases().unwrap()[1]; // case B
    let mut sim = cfg.sim_for(&case.spec).unwrap();
    sim.horizon = 2e7;
    sim.warmup_fraction = 0.25;
    sim.joint_interval = Some(1e4); // 1500 representative points

    let est = simulate(&case.spec, &sim).unwrap();
    println!("representative points: {}", est.representative_points.len());

    let table = contingency_from_estimate(&est).unwrap();
    let g = g_test(&table).unwrap();
    println!(
        "contingency table {}x{}, G = {:.2}, df = {}, p = {:.4}",
        table.shape().0,
        table.shape().1,
        g.statistic,
        g.df,
        g.p_value
    );
    println!();

    println!("product(joint) occupancy, values in 1e-3:");
    for row in joint_product_report(&est, 5).unwrap() {
        let cells: Vec<String> = row
            .iter()
            .map(|c| format!("{:.2}({:.2})", c.product * 1e3, c.joint * 1e3))
            .collect();
        println!("  {}", cells.join("  "));
    }
}
