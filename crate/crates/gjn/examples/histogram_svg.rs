//! Render the simulated-vs-approximate queue-length histogram of one
//! station as an SVG file.
//!
//! ```bash
//! cargo run --release --example histogram_svg
//! # -> hist_station1.svg, hist_station2.svg in the working directory
//! ```

use gjn::approx::PmfConvention;
use gjn::config::variability_experiment;
use gjn::report::histogram_svg;
use gjn::{build_approx, simulate};

fn main() {
    let cfg = variability_experiment();
    let case = &cfg.resolve_cases().unwrap()[1]; // case B
    let model = build_approx(&case.spec).unwrap();
    let mut sim = cfg.sim_for(&case.spec).unwrap();
    sim.horizon = 5e6;
    sim.warmup_fraction = 0.5;
    let est = simulate(&case.spec, &sim).unwrap();

    for j in 0..2 {
        let k_show = model.quantile(j, 0.99).ceil() as usize;
        let approx_pmf: Vec<f64> = (0..=k_show)
            .map(|k| model.pmf(j, k as u64, PmfConvention::MassPreserving))
            .collect();
        let svg = histogram_svg(
            &format!("case B station {}", j + 1),
            &est.stations[j],
            &est,
            j,
            &approx_pmf,
            k_show,
        );
        let path = format!("hist_station{}.svg", j + 1);
        std::fs::write(&path, svg).unwrap();
        println!("wrote {path} (k up to {k_show})");
    }
}
