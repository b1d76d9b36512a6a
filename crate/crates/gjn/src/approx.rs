//! Product-form steady-state approximation.
//!
//! Each station's queue length is approximated by a mixed law: an atom of
//! mass `1 - rho_j` at zero and an exponential with mean
//! `rho_j d_j / (1 - rho_j)` carrying the remaining mass `rho_j`. The
//! exponential-mean constant is
//!
//! ```text
//! d_j = sigma_j^2 / (2 lambda_j (1 - w_jj))
//! ```
//!
//! where `sigma_j^2` aggregates the variance of the arrival sources feeding
//! station `j`: external renewals, splits from lightly-loaded upstream
//! stations (weight `alpha_i`), splits from heavily-loaded service processes
//! (weight `lambda_i`), and the station's own service feedback.

use serde::{Deserialize, Serialize};

use crate::flow::{compute_w, routing_matrix, solve_traffic, TrafficSolution, WMatrix};
use crate::network::NetworkSpec;
use crate::{Error, Result};

/// How the continuous approximation is discretized into a pmf.
///
/// The atom `P(0) = 1 - rho` is shared by both conventions. `MassPreserving`
/// bins the exponential tail as `(k-1, k]`, so the pmf sums to exactly 1;
/// `Literal` bins it as `(k, k+1]`, which leaves a deficit of
/// `rho (1 - exp(-c))` spread nowhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmfConvention {
    #[default]
    MassPreserving,
    Literal,
}

impl std::str::FromStr for PmfConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass-preserving" => Ok(PmfConvention::MassPreserving),
            "literal" | "paper-literal" => Ok(PmfConvention::Literal),
            other => Err(Error::UnknownConvention(other.into())),
        }
    }
}

/// The assembled approximation for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxModel {
    pub traffic: TrafficSolution,
    pub w: WMatrix,
    /// Variance parameter per station.
    pub sigma2: Vec<f64>,
    /// Exponential-mean constant per station.
    pub d: Vec<f64>,
}

/// Compute the w-matrix, variance parameters, and d-constants for a network.
///
/// Requires `rho_j < 1` at every station.
pub fn build_approx(spec: &NetworkSpec) -> Result<ApproxModel> {
    let traffic = solve_traffic(spec)?;
    for (j, &rho) in traffic.rho.iter().enumerate() {
        if rho >= 1.0 {
            return Err(Error::Unstable { station: j, rho });
        }
    }
    let w = compute_w(&routing_matrix(spec))?;
    let n = spec.num_stations();
    let mut sigma2 = vec![0.0; n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        if (w.w[j][j] - 1.0).abs() < 1e-14 {
            return Err(Error::DegenerateSelfLoop { station: j });
        }
        let mut s = 0.0;
        for i in 0..n {
            let wij = w.w[i][j];
            if i < j {
                // lightly-loaded upstream split of the external renewal stream
                if spec.alpha[i] > 0.0 {
                    let c2 = spec.arrival_dist[i].scv();
                    s += spec.alpha[i] * (wij * wij * c2 + wij * (1.0 - wij));
                }
            } else if i > j {
                // heavily-loaded upstream split of the service process
                let c2 = spec.service_dist[i].scv();
                s += traffic.lambda[i] * (wij * wij * c2 + wij * (1.0 - wij));
            }
        }
        if spec.alpha[j] > 0.0 {
            s += spec.alpha[j] * spec.arrival_dist[j].scv();
        }
        let wjj = w.w[j][j];
        let c2s = spec.service_dist[j].scv();
        s += traffic.lambda[j] * (c2s * (1.0 - wjj) * (1.0 - wjj) + wjj * (1.0 - wjj));
        sigma2[j] = s;
        // a station no flow reaches has sigma2 = 0; keep d finite
        d[j] = if traffic.lambda[j] > 0.0 {
            s / (2.0 * traffic.lambda[j] * (1.0 - wjj))
        } else {
            0.0
        };
    }
    Ok(ApproxModel {
        traffic,
        w,
        sigma2,
        d,
    })
}

impl ApproxModel {
    pub fn num_stations(&self) -> usize {
        self.d.len()
    }

    /// Exponential decay rate `c = (1 - rho) / (rho d)` of station `j`.
    fn decay(&self, j: usize) -> f64 {
        let rho = self.traffic.rho[j];
        (1.0 - rho) / (rho * self.d[j])
    }

    /// Approximate mean queue length `rho_j d_j / (1 - rho_j)`.
    pub fn mean_queue(&self, j: usize) -> f64 {
        let rho = self.traffic.rho[j];
        if rho == 0.0 {
            return 0.0;
        }
        rho * self.d[j] / (1.0 - rho)
    }

    /// Approximate cdf: `F(x) = (1 - rho) + rho (1 - exp(-x c))` for
    /// `x >= 0`, zero for `x < 0`. The atom at zero equals the idle
    /// probability `1 - rho_j`.
    pub fn cdf(&self, j: usize, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let rho = self.traffic.rho[j];
        if rho == 0.0 {
            return 1.0;
        }
        (1.0 - rho) + rho * (-(-x * self.decay(j)).exp_m1())
    }

    /// Smallest `x >= 0` with `F(x) >= q`.
    ///
    /// Closed form: 0 when the atom already covers `q`, otherwise
    /// `-(rho d / (1 - rho)) ln((1 - q) / rho)`.
    pub fn quantile(&self, j: usize, q: f64) -> f64 {
        assert!(q > 0.0 && q < 1.0, "quantile level must be in (0,1)");
        let rho = self.traffic.rho[j];
        if q <= 1.0 - rho {
            return 0.0;
        }
        -(rho * self.d[j] / (1.0 - rho)) * ((1.0 - q) / rho).ln()
    }

    /// Probability mass at `k` under the chosen discretization convention.
    pub fn pmf(&self, j: usize, k: u64, convention: PmfConvention) -> f64 {
        let rho = self.traffic.rho[j];
        if k == 0 {
            return 1.0 - rho;
        }
        if rho == 0.0 {
            return 0.0;
        }
        let c = self.decay(j);
        let k = k as f64;
        match convention {
            // bin (k-1, k]: F(k) - F(k-1)
            PmfConvention::MassPreserving => {
                rho * ((-(k - 1.0) * c).exp() - (-k * c).exp())
            }
            // bin (k, k+1]: F(k+1) - F(k)
            PmfConvention::Literal => rho * ((-k * c).exp() - (-(k + 1.0) * c).exp()),
        }
    }

    /// Sum the pmf until the remaining exponential tail mass drops below
    /// `tail`; returns (sum, terms used).
    pub fn pmf_total_mass(&self, j: usize, convention: PmfConvention, tail: f64) -> (f64, u64) {
        let rho = self.traffic.rho[j];
        if rho == 0.0 {
            return (1.0, 1);
        }
        let c = self.decay(j);
        // tail above K is rho exp(-K c)
        let kmax = ((rho / tail).ln() / c).ceil().max(1.0) as u64;
        let mut sum = 0.0;
        for k in 0..=kmax {
            sum += self.pmf(j, k, convention);
        }
        (sum, kmax + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DistributionSpec;
    use crate::rng::child_stream;
    use rand::Rng;

    use crate::testutil::{two_station_gamma as paper_spec, variability_case as case};

    #[test]
    fn d_vectors_match_reference_table() {
        let expect = [
            ('A', [0.910, 0.864]),
            ('B', [1.166, 1.287]),
            ('C', [1.664, 1.771]),
        ];
        for (label, d) in expect {
            let model = build_approx(&case(label)).unwrap();
            for j in 0..2 {
                assert!(
                    (model.d[j] - d[j]).abs() < 5e-4,
                    "case {label} station {j}: {} vs {}",
                    model.d[j],
                    d[j]
                );
            }
        }
    }

    #[test]
    fn zero_variance_network_has_zero_d() {
        // all-deterministic primitives, no routing, single station
        let spec = NetworkSpec::new(
            vec![0.5],
            vec![1.0],
            vec![vec![0.0]],
            vec![DistributionSpec::Deterministic],
            vec![DistributionSpec::Deterministic],
        )
        .unwrap();
        let model = build_approx(&spec).unwrap();
        assert_eq!(model.sigma2[0], 0.0);
        assert_eq!(model.d[0], 0.0);
    }

    #[test]
    fn unstable_station_is_rejected() {
        let spec = paper_spec([1.0, 0.98], [1.0, 1.0], [1.0, 1.0]);
        assert!(matches!(
            build_approx(&spec),
            Err(Error::Unstable { station: 0, .. })
        ));
    }

    #[test]
    fn mean_queue_case_b() {
        let model = build_approx(&case('B')).unwrap();
        assert!((model.mean_queue(0) - 13.41).abs() < 5e-3);
        assert!((model.mean_queue(1) - 63.08).abs() < 5e-3);
    }

    #[test]
    fn mean_queue_high_separation() {
        let spec = paper_spec([0.99, 0.99], [0.75, 0.8], [0.95, 0.6]);
        let model = build_approx(&spec).unwrap();
        assert!((model.mean_queue(0) - 115.44).abs() < 5e-3);
        assert!((model.mean_queue(1) - 127.46).abs() < 5e-3);
    }

    #[test]
    fn cdf_atom_and_limits() {
        let model = build_approx(&case('B')).unwrap();
        for j in 0..2 {
            assert!((model.cdf(j, 0.0) - (1.0 - model.traffic.rho[j])).abs() < 1e-15);
            assert_eq!(model.cdf(j, -1.0), 0.0);
            assert!((model.cdf(j, 1e9) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_median_case_b_station_2() {
        let model = build_approx(&case('B')).unwrap();
        assert!((model.cdf(1, 42.45) - 0.50).abs() < 5e-3);
    }

    #[test]
    fn cdf_is_nondecreasing() {
        let model = build_approx(&case('A')).unwrap();
        let mut prev = 0.0;
        for i in 0..2000 {
            let x = i as f64 * 0.25;
            let f = model.cdf(1, x);
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn quantiles_case_b() {
        let model = build_approx(&case('B')).unwrap();
        assert!((model.quantile(0, 0.75) - 17.47).abs() < 5e-3);
        assert!((model.quantile(1, 0.50) - 42.45).abs() < 5e-3);
    }

    #[test]
    fn quantile_case_c_station_2() {
        let model = build_approx(&case('C')).unwrap();
        assert!((model.quantile(1, 0.90) - 198.06).abs() < 5e-3);
    }

    #[test]
    fn quantile_atom_region_is_zero() {
        let model = build_approx(&case('B')).unwrap();
        // 1 - rho_0 = 0.08
        assert_eq!(model.quantile(0, 0.05), 0.0);
        assert_eq!(model.quantile(0, 0.08), 0.0);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        let model = build_approx(&case('C')).unwrap();
        for j in 0..2 {
            let scale = model.mean_queue(j);
            for q in [0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
                let x = model.quantile(j, q);
                assert!(model.cdf(j, x) >= q - 1e-13);
                if x > 0.0 {
                    let eps = 1e-9 * scale;
                    assert!(model.cdf(j, x - eps) < q, "j={j} q={q}");
                }
            }
        }
    }

    #[test]
    fn pmf_atom_matches_idle_probability() {
        let model = build_approx(&case('B')).unwrap();
        for conv in [PmfConvention::MassPreserving, PmfConvention::Literal] {
            assert!((model.pmf(0, 0, conv) - 0.08).abs() < 1e-14);
            assert!((model.pmf(1, 0, conv) - 0.02).abs() < 1e-14);
        }
    }

    #[test]
    fn pmf_mass_preserving_sums_to_one() {
        let model = build_approx(&case('B')).unwrap();
        for j in 0..2 {
            let (sum, _) = model.pmf_total_mass(j, PmfConvention::MassPreserving, 1e-12);
            assert!((sum - 1.0).abs() <= 2e-12, "station {j}: {sum}");
        }
    }

    #[test]
    fn pmf_literal_deficit_case_b_station_1() {
        // the (k, k+1] binning leaves total mass 1 - rho (1 - exp(-c));
        // numeric series summation against the closed form, then against the
        // frozen value
        let model = build_approx(&case('B')).unwrap();
        let rho = model.traffic.rho[0];
        let c = (1.0 - rho) / (rho * model.d[0]);
        let closed = 1.0 - rho * (-(-c).exp_m1());
        let (sum, _) = model.pmf_total_mass(0, PmfConvention::Literal, 1e-12);
        assert!((sum - closed).abs() < 1e-10, "{sum} vs {closed}");
        assert!((sum - 0.9338875).abs() < 1e-6, "{sum}");
    }

    #[test]
    fn pmf_k0_both_conventions_equal() {
        let model = build_approx(&case('A')).unwrap();
        assert_eq!(
            model.pmf(0, 0, PmfConvention::MassPreserving),
            model.pmf(0, 0, PmfConvention::Literal)
        );
    }

    #[test]
    fn convention_labels_parse() {
        assert_eq!(
            "mass-preserving".parse::<PmfConvention>().unwrap(),
            PmfConvention::MassPreserving
        );
        assert_eq!(
            "literal".parse::<PmfConvention>().unwrap(),
            PmfConvention::Literal
        );
        assert!("banana".parse::<PmfConvention>().is_err());
    }

    #[test]
    fn mean_matches_conditional_mean_of_mixed_law() {
        // E[Y | Y > 0] of the mixed law equals rho d / (1 - rho); checked by
        // numeric integration of x dF over the exponential part
        let model = build_approx(&case('B')).unwrap();
        for j in 0..2 {
            let rho = model.traffic.rho[j];
            let c = model.decay(j);
            // integral of x * rho * c * exp(-c x) over [0, inf), by Simpson
            let upper = 60.0 / c;
            let n = 400_000;
            let h = upper / n as f64;
            let f = |x: f64| x * rho * c * (-c * x).exp();
            let mut integral = f(0.0) + f(upper);
            for i in 1..n {
                let x = i as f64 * h;
                integral += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            integral *= h / 3.0;
            let unconditional = integral; // atom contributes nothing
            let conditional = unconditional / rho;
            assert!(
                (conditional - model.mean_queue(j)).abs() < 1e-6 * model.mean_queue(j),
                "station {j}: {conditional} vs {}",
                model.mean_queue(j)
            );
            // the mixed law itself carries mean rho * mean_queue
            assert!((unconditional - rho * model.mean_queue(j)).abs() < 1e-6 * unconditional);
        }
    }

    #[test]
    fn sigma_identity_on_random_networks() {
        let mut rng = child_stream(31, 0);
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let p = crate::flow::random_transient_routing(n, 0.9, &mut rng);
            let routing: Vec<Vec<f64>> =
                (0..n).map(|r| (0..n).map(|c| p[(r, c)]).collect()).collect();
            let dists = |rng: &mut crate::rng::Stream| -> Vec<DistributionSpec> {
                (0..n)
                    .map(|_| match rng.gen_range(0..3) {
                        0 => DistributionSpec::Exponential,
                        1 => DistributionSpec::Gamma {
                            shape: rng.gen_range(0.3..3.0),
                        },
                        _ => DistributionSpec::Deterministic,
                    })
                    .collect()
            };
            let arrival = dists(&mut rng);
            let service = dists(&mut rng);
            let spec = NetworkSpec::new(
                (0..n).map(|_| rng.gen_range(0.05..1.0)).collect(),
                vec![100.0; n],
                routing,
                arrival,
                service,
            )
            .unwrap();
            let model = build_approx(&spec).unwrap();
            for j in 0..n {
                let mut u = vec![0.0; n];
                for i in 0..j {
                    u[i] = model.w.w[i][j];
                }
                u[j] = 1.0;
                let q2 = 2.0 * crate::transform::q_star(&spec, &model.traffic.lambda, &u);
                assert!(
                    (q2 - model.sigma2[j]).abs() <= 1e-12,
                    "station {j}: {q2} vs {}",
                    model.sigma2[j]
                );
            }
        }
    }

    #[test]
    fn all_exponential_network_has_unit_d() {
        // the approximation collapses to the exact product form: d_j = 1
        let mut rng = child_stream(37, 0);
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let p = crate::flow::random_transient_routing(n, 0.9, &mut rng);
            let routing: Vec<Vec<f64>> =
                (0..n).map(|r| (0..n).map(|c| p[(r, c)]).collect()).collect();
            let spec = NetworkSpec::new(
                (0..n).map(|_| rng.gen_range(0.05..1.0)).collect(),
                vec![100.0; n],
                routing,
                vec![DistributionSpec::Exponential; n],
                vec![DistributionSpec::Exponential; n],
            )
            .unwrap();
            let model = build_approx(&spec).unwrap();
            for j in 0..n {
                assert!((model.d[j] - 1.0).abs() < 1e-12, "d[{j}] = {}", model.d[j]);
            }
        }
    }
}
