//! Network description: stations, rates, routing, and the unit-mean
//! primitive distributions for interarrival and service times.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// A unit-mean primitive distribution.
///
/// Rates are kept separate from the distribution shapes: an interarrival
/// time is `sample(..) / alpha_j` and a service time `sample(..) / mu_j`,
/// so changing a station's load never touches the distribution objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    /// Exponential with rate 1.
    Exponential,
    /// Gamma with the given shape and scale `1/shape`.
    Gamma { shape: f64 },
    /// Constant 1.
    Deterministic,
}

impl DistributionSpec {
    /// Squared coefficient of variation of the unit-mean distribution.
    pub fn scv(&self) -> f64 {
        match self {
            DistributionSpec::Exponential => 1.0,
            DistributionSpec::Gamma { shape } => 1.0 / shape,
            DistributionSpec::Deterministic => 0.0,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, DistributionSpec::Exponential)
    }

    /// Shape parameter must be positive for the gamma family.
    pub fn is_well_formed(&self) -> bool {
        match self {
            DistributionSpec::Gamma { shape } => shape.is_finite() && *shape > 0.0,
            _ => true,
        }
    }
}

/// Draw one variate from the unit-mean distribution.
///
/// Deterministic given the stream state; the gamma variate uses the
/// Marsaglia-Tsang squeeze method from `rand_distr`.
pub fn sample(dist: &DistributionSpec, rng: &mut Stream) -> f64 {
    match dist {
        DistributionSpec::Exponential => rng.sample::<f64, _>(Exp1),
        DistributionSpec::Gamma { shape } => {
            // mean = shape * scale = 1
            let g = Gamma::new(*shape, 1.0 / shape).expect("validated shape");
            g.sample(rng)
        }
        DistributionSpec::Deterministic => 1.0,
    }
}

/// A pre-built sampler for one distribution, for hot loops.
#[derive(Clone)]
pub enum Sampler {
    Exponential,
    Gamma(Gamma<f64>),
    Deterministic,
}

impl Sampler {
    pub fn new(dist: &DistributionSpec) -> Self {
        match dist {
            DistributionSpec::Exponential => Sampler::Exponential,
            DistributionSpec::Gamma { shape } => {
                Sampler::Gamma(Gamma::new(*shape, 1.0 / shape).expect("validated shape"))
            }
            DistributionSpec::Deterministic => Sampler::Deterministic,
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            Sampler::Exponential => rng.sample::<f64, _>(Exp1),
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::Deterministic => 1.0,
        }
    }
}

/// Full description of an open generalized Jackson network.
///
/// Station `j` has external arrival rate `alpha[j]` (0 allowed: no external
/// arrivals), service rate `mu[j]`, and row `j` of `routing` gives the
/// probabilities of moving to each station after service; the leftover
/// probability `1 - sum(row)` is the exit probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
    pub arrival_dist: Vec<DistributionSpec>,
    pub service_dist: Vec<DistributionSpec>,
}

/// One violated invariant, with a human-readable label.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub label: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label)
    }
}

impl NetworkSpec {
    pub fn new(
        alpha: Vec<f64>,
        mu: Vec<f64>,
        routing: Vec<Vec<f64>>,
        arrival_dist: Vec<DistributionSpec>,
        service_dist: Vec<DistributionSpec>,
    ) -> crate::Result<Self> {
        let j = alpha.len();
        if j == 0 {
            return Err(crate::Error::InvalidNetwork("no stations".into()));
        }
        if mu.len() != j
            || routing.len() != j
            || routing.iter().any(|row| row.len() != j)
            || arrival_dist.len() != j
            || service_dist.len() != j
        {
            return Err(crate::Error::InvalidNetwork(format!(
                "dimension mismatch: J={j} but got mu={}, routing={}x?, dists={}/{}",
                mu.len(),
                routing.len(),
                arrival_dist.len(),
                service_dist.len()
            )));
        }
        Ok(NetworkSpec {
            alpha,
            mu,
            routing,
            arrival_dist,
            service_dist,
        })
    }

    /// Number of stations.
    pub fn num_stations(&self) -> usize {
        self.alpha.len()
    }

    /// Exit probability of station `j` (`1 - sum of routing row`).
    pub fn exit_prob(&self, j: usize) -> f64 {
        1.0 - self.routing[j].iter().sum::<f64>()
    }

    pub fn all_exponential(&self) -> bool {
        self.arrival_dist.iter().all(|d| d.is_exponential())
            && self.service_dist.iter().all(|d| d.is_exponential())
    }
}

/// Check every invariant of a network spec and return the violations.
///
/// Diagnostic only: no side effects, an empty list means the network is valid.
/// Invertibility of `(I - P)` is tested by attempting the solve and checking
/// the residual against 1e-10.
pub fn validate(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let j = spec.num_stations();
    let v = |label: String| Violation { label };

    for (i, &a) in spec.alpha.iter().enumerate() {
        if !a.is_finite() || a < 0.0 {
            out.push(v(format!("alpha[{i}] = {a} is not a nonnegative real")));
        }
    }
    for (i, &m) in spec.mu.iter().enumerate() {
        if !m.is_finite() || m <= 0.0 {
            out.push(v(format!("mu[{i}] = {m} is not a positive real")));
        }
    }
    for (i, row) in spec.routing.iter().enumerate() {
        let mut sum = 0.0;
        for (k, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                out.push(v(format!("routing[{i}][{k}] = {p} is negative")));
            }
            sum += p;
        }
        if sum > 1.0 + 1e-12 {
            out.push(v(format!(
                "row-stochasticity exceeded: routing row {i} sums to {sum}"
            )));
        }
    }
    for (i, d) in spec.arrival_dist.iter().enumerate() {
        // arrival_dist[i] is ignored when alpha_i = 0
        if spec.alpha[i] > 0.0 && !d.is_well_formed() {
            out.push(v(format!("arrival_dist[{i}] has a nonpositive gamma shape")));
        }
    }
    for (i, d) in spec.service_dist.iter().enumerate() {
        if !d.is_well_formed() {
            out.push(v(format!("service_dist[{i}] has a nonpositive gamma shape")));
        }
    }

    // Transience: try to solve (I - P') x = alpha and inspect the residual.
    if out.iter().all(|w| !w.label.contains("negative")) {
        let p = crate::flow::routing_matrix(spec);
        if crate::flow::solve_i_minus_pt(&p, &spec.alpha, 1e-10).is_none() {
            out.push(v(format!("(I-P) singular: routing matrix of size {j} is not transient")));
        }
    }
    out
}
