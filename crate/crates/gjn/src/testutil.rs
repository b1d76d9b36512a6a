//! Shared builders for the two-station reference network used across the
//! test suites.

use crate::network::{DistributionSpec, NetworkSpec};

/// The two-station network with gamma primitives, parameterized by traffic
/// intensities and gamma shapes.
pub fn two_station_gamma(
    rho: [f64; 2],
    arrival_shapes: [f64; 2],
    service_shapes: [f64; 2],
) -> NetworkSpec {
    NetworkSpec::new(
        vec![0.3, 0.2],
        vec![1.0 / rho[0], 1.0 / rho[1]],
        vec![vec![0.3, 0.6], vec![0.4, 0.2]],
        arrival_shapes
            .iter()
            .map(|&s| DistributionSpec::Gamma { shape: s })
            .collect(),
        service_shapes
            .iter()
            .map(|&s| DistributionSpec::Gamma { shape: s })
            .collect(),
    )
    .unwrap()
}

/// Variability cases A, B, C at `rho = (0.92, 0.98)`.
pub fn variability_case(label: char) -> NetworkSpec {
    match label {
        'A' => two_station_gamma([0.92, 0.98], [1.2, 1.3], [1.1, 1.25]),
        'B' => two_station_gamma([0.92, 0.98], [0.75, 0.8], [0.95, 0.6]),
        'C' => two_station_gamma([0.92, 0.98], [0.6, 0.45], [0.5, 0.4]),
        _ => panic!("unknown case {label}"),
    }
}
