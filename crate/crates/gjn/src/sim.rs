//! Exact discrete-event simulation of the network.
//!
//! Event-driven execution over the piecewise-constant queue-length vector:
//! the pending events are one external arrival per station with `alpha > 0`
//! and one departure per busy station, so extraction scans a flat array of
//! at most `2J` candidate times. Service times are drawn when service
//! starts; the primitives are i.i.d. and independent of history, so this is
//! distributionally identical to pre-assigning the next service time at an
//! idle station, and it keeps the state small.
//!
//! Statistics are time-weighted integrals over the post-warmup window,
//! split into equal batches for batch-means confidence intervals. Joint
//! occupancy of the first two stations is tracked time-weighted, and
//! "representative points" (instantaneous states at widely separated,
//! regularly spaced instants) are recorded for the independence test.

use serde::{Deserialize, Serialize};

use crate::network::{NetworkSpec, Sampler};
use crate::rng::child_stream;
use crate::special::student_t_quantile;
use crate::{Error, Result};

/// Simulation protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Total simulated time.
    pub horizon: f64,
    /// Fraction of the horizon discarded as warmup (statistics cover the
    /// remainder).
    pub warmup_fraction: f64,
    /// Number of equal batches the measurement window is split into.
    pub num_batches: usize,
    pub seed: u64,
    /// Highest queue length tracked per station in histograms; excess time
    /// is lumped into an overflow bucket.
    pub pmf_cap: usize,
    /// When set, record the joint state at the start of each interval of
    /// this length inside the measurement window.
    pub joint_interval: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 1e7,
            warmup_fraction: 0.9,
            num_batches: 20,
            seed: 0,
            pmf_cap: 512,
            joint_interval: None,
        }
    }
}

/// Mutable simulator state: queue lengths and the pending event times.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: f64,
    /// Queue length per station, including the job in service.
    pub z: Vec<u32>,
    /// Next external arrival per station; infinity when `alpha = 0`.
    pub next_arrival: Vec<f64>,
    /// Next departure per station; `None` iff the station is empty.
    pub next_departure: Vec<Option<f64>>,
}

/// Per-station simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationEstimate {
    /// Time-average queue length over the measurement window.
    pub mean: f64,
    /// 95% batch-means confidence halfwidth.
    pub ci_halfwidth: f64,
    /// Time fraction in each state `0..=pmf_cap`.
    pub pmf: Vec<f64>,
    /// Time fraction above the cap.
    pub overflow: f64,
    /// Contribution of overflow states to the mean (`integral of z` over
    /// overflow time, divided by the window).
    pub overflow_mean_contrib: f64,
    /// Queue-length mean per batch.
    pub batch_means: Vec<f64>,
    /// Per-batch time fractions, for histogram confidence intervals.
    pub batch_pmfs: Vec<Vec<f64>>,
}

/// Complete simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub config: SimConfig,
    pub stations: Vec<StationEstimate>,
    /// Time-weighted joint occupancy of stations 0 and 1 (row = station 0),
    /// present when the network has at least two stations.
    pub joint_time: Option<Vec<Vec<f64>>>,
    /// Joint states sampled at interval starts, when requested.
    pub representative_points: Vec<Vec<u32>>,
    /// Jobs leaving the network per batch, for the throughput check.
    pub batch_exits: Vec<u64>,
    /// Length of the measurement window.
    pub window: f64,
}

impl SimEstimate {
    /// The paper-protocol empirical quantile: the smallest queue length
    /// whose cumulative batch-averaged time fraction reaches `q`.
    pub fn empirical_quantile(&self, station: usize, q: f64) -> u64 {
        let st = &self.stations[station];
        let mut acc = 0.0;
        for (k, &p) in st.pmf.iter().enumerate() {
            acc += p;
            if acc >= q {
                return k as u64;
            }
        }
        st.pmf.len() as u64
    }

    /// Empirical `P(Z_j = 0)`.
    pub fn zero_prob(&self, station: usize) -> f64 {
        self.stations[station].pmf[0]
    }

    /// Batch standard error of the pmf entry `k` at a station.
    pub fn pmf_std_err(&self, station: usize, k: usize) -> f64 {
        let st = &self.stations[station];
        let n = st.batch_pmfs.len() as f64;
        let mean = st.pmf[k];
        let var = st
            .batch_pmfs
            .iter()
            .map(|b| (b[k] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }

    /// Batch standard error of the mean at a station.
    pub fn mean_std_err(&self, station: usize) -> f64 {
        let st = &self.stations[station];
        let n = st.batch_means.len() as f64;
        let var = st
            .batch_means
            .iter()
            .map(|b| (b - st.mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }

    /// Measured departure rate to the outside, with its batch standard error.
    pub fn exit_rate(&self) -> (f64, f64) {
        let batch_len = self.window / self.batch_exits.len() as f64;
        let rates: Vec<f64> = self
            .batch_exits
            .iter()
            .map(|&e| e as f64 / batch_len)
            .collect();
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

/// Time-weighted accumulators for one batch window.
struct Accumulator {
    z_integral: Vec<f64>,
    state_time: Vec<Vec<f64>>, // station x (cap+1)
    overflow_time: Vec<f64>,
    overflow_z_integral: Vec<f64>,
    exits: u64,
}

impl Accumulator {
    fn new(n: usize, cap: usize) -> Self {
        Accumulator {
            z_integral: vec![0.0; n],
            state_time: vec![vec![0.0; cap + 1]; n],
            overflow_time: vec![0.0; n],
            overflow_z_integral: vec![0.0; n],
            exits: 0,
        }
    }

    #[inline]
    fn dwell(&mut self, z: &[u32], cap: usize, dt: f64) {
        for (j, &zj) in z.iter().enumerate() {
            let zf = zj as f64;
            self.z_integral[j] += zf * dt;
            if (zj as usize) <= cap {
                self.state_time[j][zj as usize] += dt;
            } else {
                self.overflow_time[j] += dt;
                self.overflow_z_integral[j] += zf * dt;
            }
        }
    }
}

/// Run the discrete-event simulation.
///
/// Start state: all queues empty, first interarrival times drawn fresh.
/// Simultaneous events execute departures before arrivals, lower station
/// index first; ties have probability zero unless deterministic primitives
/// are in play, and the fixed order keeps replays exact.
pub fn simulate(spec: &NetworkSpec, cfg: &SimConfig) -> Result<SimEstimate> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(cfg.horizon > 0.0) {
        return Err(Error::BadHorizon(cfg.horizon));
    }
    if !(0.0..1.0).contains(&cfg.warmup_fraction) {
        return Err(Error::Config(format!(
            "warmup_fraction {} outside [0,1)",
            cfg.warmup_fraction
        )));
    }
    if cfg.num_batches < 2 {
        return Err(Error::TooFewBatches(cfg.num_batches));
    }
    if cfg.pmf_cap == 0 {
        return Err(Error::Config(
            "pmf_cap must be positive (experiment configs derive it when left 0)".into(),
        ));
    }
    if spec.alpha.iter().all(|&a| a == 0.0) {
        // empty initial state and nothing can ever arrive
        return Err(Error::DeadNetwork);
    }
    let violations = crate::network::validate(spec);
    if !violations.is_empty() {
        return Err(Error::InvalidNetwork(
            violations
                .iter()
                .map(|v| v.label.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    let n = spec.num_stations();
    let cap = cfg.pmf_cap;
    let mut rng = child_stream(cfg.seed, 0);
    let arrival_samplers: Vec<Sampler> = spec.arrival_dist.iter().map(Sampler::new).collect();
    let service_samplers: Vec<Sampler> = spec.service_dist.iter().map(Sampler::new).collect();

    let mut state = SimState {
        clock: 0.0,
        z: vec![0; n],
        next_arrival: (0..n)
            .map(|j| {
                if spec.alpha[j] > 0.0 {
                    arrival_samplers[j].sample(&mut rng) / spec.alpha[j]
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        next_departure: vec![None; n],
    };

    let warmup = cfg.warmup_fraction * cfg.horizon;
    let window = cfg.horizon - warmup;
    let batch_len = window / cfg.num_batches as f64;
    let mut batches: Vec<Accumulator> = (0..cfg.num_batches)
        .map(|_| Accumulator::new(n, cap))
        .collect();
    let mut batch_idx = 0usize;
    let mut batch_end = warmup + batch_len;

    let mut joint_time = if n >= 2 {
        Some(vec![vec![0.0; cap + 1]; cap + 1])
    } else {
        None
    };
    let mut rep_points: Vec<Vec<u32>> = Vec::new();
    let mut next_rep = cfg.joint_interval.map(|iv| {
        debug_assert!(iv > 0.0);
        (warmup, iv)
    });

    // Advance the piecewise-constant state from state.clock to t.
    macro_rules! advance_to {
        ($t:expr) => {{
            let t: f64 = $t;
            let mut t0 = state.clock;
            if let Some((ref mut next, iv)) = next_rep {
                while *next < t && *next < cfg.horizon {
                    if *next >= t0 {
                        rep_points.push(state.z.clone());
                    }
                    *next += iv;
                }
            }
            if t > warmup && t0 < cfg.horizon {
                t0 = t0.max(warmup);
                let t1 = t.min(cfg.horizon);
                let mut lo = t0;
                while lo < t1 {
                    // split across batch boundaries
                    while lo >= batch_end && batch_idx + 1 < cfg.num_batches {
                        batch_idx += 1;
                        batch_end = warmup + (batch_idx + 1) as f64 * batch_len;
                    }
                    let hi = if batch_idx + 1 < cfg.num_batches {
                        t1.min(batch_end)
                    } else {
                        t1
                    };
                    let dt = hi - lo;
                    if dt > 0.0 {
                        batches[batch_idx].dwell(&state.z, cap, dt);
                        if let Some(jt) = joint_time.as_mut() {
                            let a = (state.z[0] as usize).min(cap);
                            let b = (state.z[1] as usize).min(cap);
                            jt[a][b] += dt;
                        }
                    }
                    lo = hi;
                    if lo >= batch_end && batch_idx + 1 < cfg.num_batches {
                        batch_idx += 1;
                        batch_end = warmup + (batch_idx + 1) as f64 * batch_len;
                    }
                }
            }
            state.clock = t;
        }};
    }

    loop {
        // next event: departures first, then arrivals, lower index first
        let mut best = f64::INFINITY;
        let mut which = EventKind::None;
        for j in 0..n {
            if let Some(t) = state.next_departure[j] {
                if t < best {
                    best = t;
                    which = EventKind::Departure(j);
                }
            }
        }
        for j in 0..n {
            if state.next_arrival[j] < best {
                best = state.next_arrival[j];
                which = EventKind::Arrival(j);
            }
        }

        if best >= cfg.horizon || matches!(which, EventKind::None) {
            advance_to!(cfg.horizon);
            break;
        }
        advance_to!(best);

        match which {
            EventKind::Arrival(j) => {
                state.z[j] += 1;
                state.next_arrival[j] =
                    state.clock + arrival_samplers[j].sample(&mut rng) / spec.alpha[j];
                if state.z[j] == 1 {
                    state.next_departure[j] =
                        Some(state.clock + service_samplers[j].sample(&mut rng) / spec.mu[j]);
                }
            }
            EventKind::Departure(j) => {
                state.z[j] -= 1;
                state.next_departure[j] = if state.z[j] >= 1 {
                    Some(state.clock + service_samplers[j].sample(&mut rng) / spec.mu[j])
                } else {
                    None
                };
                // route the departing job
                let u: f64 = rand::Rng::gen(&mut rng);
                let mut acc = 0.0;
                let mut dest = None;
                for (k, &pk) in spec.routing[j].iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        dest = Some(k);
                        break;
                    }
                }
                match dest {
                    Some(k) => {
                        state.z[k] += 1;
                        if state.z[k] == 1 {
                            state.next_departure[k] = Some(
                                state.clock + service_samplers[k].sample(&mut rng) / spec.mu[k],
                            );
                        }
                    }
                    None => {
                        if state.clock >= warmup {
                            batches[batch_idx].exits += 1;
                        }
                    }
                }
            }
            EventKind::None => unreachable!(),
        }
    }

    // assemble estimates
    let t_mult = student_t_quantile(0.975, (cfg.num_batches - 1) as f64);
    let stations = (0..n)
        .map(|j| {
            let batch_means: Vec<f64> = batches
                .iter()
                .map(|b| b.z_integral[j] / batch_len)
                .collect();
            let nb = cfg.num_batches as f64;
            let mean = batch_means.iter().sum::<f64>() / nb;
            let var =
                batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            let ci_halfwidth = t_mult * (var / nb).sqrt();
            let batch_pmfs: Vec<Vec<f64>> = batches
                .iter()
                .map(|b| b.state_time[j].iter().map(|t| t / batch_len).collect())
                .collect();
            let pmf: Vec<f64> = (0..=cap)
                .map(|k| batch_pmfs.iter().map(|b| b[k]).sum::<f64>() / nb)
                .collect();
            let overflow =
                batches.iter().map(|b| b.overflow_time[j]).sum::<f64>() / window;
            let overflow_mean_contrib =
                batches.iter().map(|b| b.overflow_z_integral[j]).sum::<f64>() / window;
            StationEstimate {
                mean,
                ci_halfwidth,
                pmf,
                overflow,
                overflow_mean_contrib,
                batch_means,
                batch_pmfs,
            }
        })
        .collect();

    Ok(SimEstimate {
        config: cfg.clone(),
        stations,
        joint_time,
        representative_points: rep_points,
        batch_exits: batches.iter().map(|b| b.exits).collect(),
        window,
    })
}

enum EventKind {
    None,
    Arrival(usize),
    Departure(usize),
}

/// Exact product-form stationary law of an all-exponential network.
#[derive(Debug, Clone)]
pub struct JacksonLaw {
    pub rho: Vec<f64>,
    /// Geometric marginals `P(Z_j = k) = (1 - rho_j) rho_j^k`, truncated.
    pub marginals: Vec<Vec<f64>>,
}

impl JacksonLaw {
    pub fn mean(&self, j: usize) -> f64 {
        self.rho[j] / (1.0 - self.rho[j])
    }

    /// Joint probability of a state vector under the product law.
    pub fn joint(&self, state: &[u32]) -> f64 {
        state
            .iter()
            .enumerate()
            .map(|(j, &k)| (1.0 - self.rho[j]) * self.rho[j].powi(k as i32))
            .product()
    }
}

/// Exact stationary marginals for a network whose primitives are all
/// exponential, truncated at `cap`.
pub fn jackson_oracle(spec: &NetworkSpec, cap: usize) -> Result<JacksonLaw> {
    if !spec.all_exponential() {
        return Err(Error::NotJackson);
    }
    let traffic = crate::flow::solve_traffic(spec)?;
    for (j, &rho) in traffic.rho.iter().enumerate() {
        if rho >= 1.0 {
            return Err(Error::Unstable { station: j, rho });
        }
    }
    let marginals = traffic
        .rho
        .iter()
        .map(|&rho| (0..=cap).map(|k| (1.0 - rho) * rho.powi(k as i32)).collect())
        .collect();
    Ok(JacksonLaw {
        rho: traffic.rho,
        marginals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DistributionSpec;

    fn single_station(
        alpha: f64,
        mu: f64,
        arrival: DistributionSpec,
        service: DistributionSpec,
    ) -> NetworkSpec {
        NetworkSpec::new(vec![alpha], vec![mu], vec![vec![0.0]], vec![arrival], vec![service])
            .unwrap()
    }

    fn exp_spec() -> NetworkSpec {
        single_station(
            0.5,
            1.0,
            DistributionSpec::Exponential,
            DistributionSpec::Exponential,
        )
    }

    #[test]
    fn rejects_bad_horizon() {
        let cfg = SimConfig {
            horizon: 0.0,
            ..SimConfig::default()
        };
        assert!(matches!(simulate(&exp_spec(), &cfg), Err(Error::BadHorizon(_))));
    }

    #[test]
    fn rejects_dead_network() {
        let spec = single_station(
            0.0,
            1.0,
            DistributionSpec::Exponential,
            DistributionSpec::Exponential,
        );
        let cfg = SimConfig::default();
        assert!(matches!(simulate(&spec, &cfg), Err(Error::DeadNetwork)));
    }

    #[test]
    fn mm1_mean_matches_closed_form() {
        // M/M/1 at rho = 0.5: stationary mean rho/(1-rho) = 1
        let cfg = SimConfig {
            horizon: 1e7,
            warmup_fraction: 0.5,
            num_batches: 20,
            seed: 42,
            pmf_cap: 64,
            joint_interval: None,
        };
        let est = simulate(&exp_spec(), &cfg).unwrap();
        let st = &est.stations[0];
        assert!(
            (st.mean - 1.0).abs() <= 3.0 * st.ci_halfwidth,
            "mean {} +- {}",
            st.mean,
            st.ci_halfwidth
        );
    }

    #[test]
    fn dd1_alternates_exactly() {
        // deterministic interarrival 2 and service 1, started empty: the
        // queue alternates 0/1 and the time average over whole cycles is 1/2
        let spec = single_station(
            0.5,
            1.0,
            DistributionSpec::Deterministic,
            DistributionSpec::Deterministic,
        );
        let cfg = SimConfig {
            horizon: 10.0,
            warmup_fraction: 0.2,
            num_batches: 4,
            seed: 1,
            pmf_cap: 4,
            joint_interval: None,
        };
        let est = simulate(&spec, &cfg).unwrap();
        assert_eq!(est.stations[0].mean, 0.5);
        assert_eq!(est.stations[0].pmf[0], 0.5);
        assert_eq!(est.stations[0].pmf[1], 0.5);
        assert_eq!(est.stations[0].overflow, 0.0);
    }

    #[test]
    fn determinism_bit_identical() {
        let spec = crate::testutil::variability_case('B');
        let cfg = SimConfig {
            horizon: 2e4,
            warmup_fraction: 0.5,
            num_batches: 5,
            seed: 7,
            pmf_cap: 128,
            joint_interval: Some(100.0),
        };
        let a = simulate(&spec, &cfg).unwrap();
        let b = simulate(&spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conservation_mean_equals_pmf_sum() {
        let spec = crate::testutil::variability_case('B');
        let cfg = SimConfig {
            horizon: 1e5,
            warmup_fraction: 0.3,
            num_batches: 10,
            seed: 3,
            pmf_cap: 32, // force overflow traffic
            joint_interval: None,
        };
        let est = simulate(&spec, &cfg).unwrap();
        for st in &est.stations {
            let from_pmf: f64 = st
                .pmf
                .iter()
                .enumerate()
                .map(|(k, &p)| k as f64 * p)
                .sum::<f64>()
                + st.overflow_mean_contrib;
            assert!(
                (st.mean - from_pmf).abs() <= 1e-9 * st.mean.max(1.0),
                "{} vs {}",
                st.mean,
                from_pmf
            );
        }
    }

    #[test]
    fn throughput_matches_external_arrival_rate() {
        let spec = crate::testutil::variability_case('A');
        let cfg = SimConfig {
            horizon: 2e6,
            warmup_fraction: 0.3,
            num_batches: 20,
            seed: 11,
            pmf_cap: 256,
            joint_interval: None,
        };
        let est = simulate(&spec, &cfg).unwrap();
        let (rate, se) = est.exit_rate();
        let want: f64 = spec.alpha.iter().sum();
        assert!((rate - want).abs() <= 3.0 * se, "rate {rate} +- {se}, want {want}");
    }

    #[test]
    fn idle_probability_matches_one_minus_rho() {
        let spec = exp_spec();
        let cfg = SimConfig {
            horizon: 1e6,
            warmup_fraction: 0.3,
            num_batches: 20,
            seed: 13,
            pmf_cap: 64,
            joint_interval: None,
        };
        let est = simulate(&spec, &cfg).unwrap();
        let se = est.pmf_std_err(0, 0).max(1e-9);
        assert!((est.zero_prob(0) - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn jackson_oracle_geometric() {
        let law = jackson_oracle(&exp_spec(), 8).unwrap();
        assert!((law.marginals[0][0] - 0.5).abs() < 1e-15);
        assert!((law.marginals[0][1] - 0.25).abs() < 1e-15);
        assert!((law.marginals[0][2] - 0.125).abs() < 1e-15);
        assert!((law.mean(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jackson_oracle_two_station_means() {
        let spec = NetworkSpec::new(
            vec![0.3, 0.2],
            vec![1.0 / 0.8, 1.0 / 0.9],
            vec![vec![0.3, 0.6], vec![0.4, 0.2]],
            vec![DistributionSpec::Exponential; 2],
            vec![DistributionSpec::Exponential; 2],
        )
        .unwrap();
        let law = jackson_oracle(&spec, 4).unwrap();
        assert!((law.mean(0) - 4.0).abs() < 1e-12);
        assert!((law.mean(1) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn jackson_oracle_rejects_general_primitives() {
        let spec = single_station(
            0.5,
            1.0,
            DistributionSpec::Gamma { shape: 2.0 },
            DistributionSpec::Exponential,
        );
        assert!(matches!(jackson_oracle(&spec, 4), Err(Error::NotJackson)));
    }

    #[test]
    fn representative_points_are_spaced() {
        let spec = exp_spec();
        let cfg = SimConfig {
            horizon: 1000.0,
            warmup_fraction: 0.5,
            num_batches: 2,
            seed: 5,
            pmf_cap: 16,
            joint_interval: Some(10.0),
        };
        let est = simulate(&spec, &cfg).unwrap();
        // window [500, 1000), interval 10: points at 500, 510, ..., 990
        assert_eq!(est.representative_points.len(), 50);
    }
}
