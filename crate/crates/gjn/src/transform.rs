//! Moment-transform machinery behind the product-form limit.
//!
//! For a unit-mean primitive distribution with Laplace transform
//! `L(s) = E[exp(-s T)]`, the arrival exponent `gamma(theta)` solves
//!
//! ```text
//! exp(theta) * L(gamma) = 1
//! ```
//!
//! and the service exponent `xi(theta)` solves
//!
//! ```text
//! (P_i0 exp(-theta_i) + sum_k P_ik exp(theta_k - theta_i)) * L(xi) = 1.
//! ```
//!
//! Both are found by a safeguarded Newton iteration on the analytic
//! transform (closed per family, so the solve is exact to solver
//! tolerance). Their second-order Taylor data (`xi_bar`, `gamma_star`,
//! `xi_star`, `q_star`) are plain polynomials in `theta`, and the
//! `build_theta` / `check_linear` pair turns the θ-vector construction used
//! in the heavy-traffic argument into a numerically checkable identity:
//! the drift terms of all lightly-loaded stations vanish and the station-j
//! term reduces to `-(1 - w_jj) r^j eta_j`.

use nalgebra::{DMatrix, DVector};

use crate::flow::WMatrix;
use crate::network::{DistributionSpec, NetworkSpec};
use crate::{Error, Result};

/// Residual tolerance of the defining equations for `gamma` and `xi`.
pub const ROOT_TOL: f64 = 1e-12;

/// A point `theta` in the nonpositive orthant, optionally carrying the
/// `(eta, station, r)` data that generated it via [`build_theta`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    pub theta: Vec<f64>,
    pub provenance: Option<Provenance>,
}

/// Construction data recorded by [`build_theta`].
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub eta: Vec<f64>,
    /// Station index (0-based).
    pub station: usize,
    pub scale: f64,
}

impl ThetaVector {
    /// Wrap a raw vector; every component must be `<= 0`.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        // the negated comparison also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if theta.iter().any(|&t| !(t <= 0.0)) {
            return Err(Error::Config(format!(
                "theta must be componentwise nonpositive, got {theta:?}"
            )));
        }
        Ok(ThetaVector {
            theta,
            provenance: None,
        })
    }
}

/// Log of the Laplace transform `ln E[exp(-s T)]` and its derivative in `s`.
///
/// Domains: exponential needs `s > -1`, gamma(k) needs `s > -k`,
/// deterministic is entire.
fn log_laplace(dist: &DistributionSpec, s: f64) -> Option<(f64, f64)> {
    match dist {
        DistributionSpec::Exponential => {
            if s <= -1.0 {
                None
            } else {
                Some((-s.ln_1p(), -1.0 / (1.0 + s)))
            }
        }
        DistributionSpec::Gamma { shape } => {
            let k = *shape;
            if s <= -k {
                None
            } else {
                Some((-k * (s / k).ln_1p(), -1.0 / (1.0 + s / k)))
            }
        }
        DistributionSpec::Deterministic => Some((-s, -1.0)),
    }
}

/// Greatest lower bound of the transform domain (exclusive).
fn domain_floor(dist: &DistributionSpec) -> f64 {
    match dist {
        DistributionSpec::Exponential => -1.0,
        DistributionSpec::Gamma { shape } => -shape,
        DistributionSpec::Deterministic => f64::NEG_INFINITY,
    }
}

/// Solve `ln L(s) + log_target = 0` for `s`.
///
/// The left side is strictly decreasing with range `(-inf, +inf)` over the
/// transform domain, so the root is unique. Newton steps are clamped to a
/// bracket that shrinks monotonically; bisection takes over whenever Newton
/// leaves the bracket.
fn solve_log_transform(dist: &DistributionSpec, log_target: f64) -> Result<f64> {
    let g = |s: f64| log_laplace(dist, s).map(|(v, d)| (v + log_target, d));

    if log_target == 0.0 {
        return Ok(0.0);
    }

    // g(0) = log_target and g is decreasing, so the root sits on the side
    // the sign of log_target points to.
    let floor = domain_floor(dist);
    let mut lo;
    let mut hi;
    if log_target > 0.0 {
        lo = 0.0;
        hi = 1.0;
        while g(hi).map(|(v, _)| v > 0.0).unwrap_or(false) {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Config("transform root bracket failure".into()));
            }
        }
    } else {
        hi = 0.0;
        let mut step = if floor.is_finite() { -floor / 2.0 } else { 1.0 };
        lo = -step;
        loop {
            if floor.is_finite() && lo <= floor {
                lo = floor * (1.0 - f64::EPSILON) + f64::MIN_POSITIVE;
            }
            match g(lo) {
                Some((v, _)) if v > 0.0 => break,
                Some(_) => {
                    step = if floor.is_finite() {
                        (lo - floor) / 2.0
                    } else {
                        step * 2.0
                    };
                    lo -= step;
                }
                None => return Err(Error::Config("transform root bracket failure".into())),
            }
        }
    }

    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = match g(s) {
            Some(x) => x,
            None => {
                s = 0.5 * (lo + hi);
                continue;
            }
        };
        // once inside the convergence basin, polish with unclamped Newton:
        // the log-residual tolerance alone would leave a root error of
        // residual/|g'|, which g' < 1 can push past the tolerance
        if v.abs() <= 0.25 * ROOT_TOL || hi - lo <= f64::EPSILON * (s.abs() + 1.0) {
            for _ in 0..3 {
                if let Some((pv, pd)) = g(s) {
                    if pv == 0.0 {
                        break;
                    }
                    let next = s - pv / pd;
                    if next.is_finite() && g(next).is_some() {
                        s = next;
                    } else {
                        break;
                    }
                }
            }
            return Ok(s);
        }
        if v > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / d;
        s = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(s)
}

/// Arrival exponent: the unique `gamma` with `exp(theta) E[exp(-gamma T)] = 1`.
pub fn gamma_fn(dist: &DistributionSpec, theta_i: f64) -> Result<f64> {
    solve_log_transform(dist, theta_i)
}

/// Closed-form arrival exponent per family, used to cross-check the solver
/// and for well-conditioned Taylor evaluation near zero.
pub fn gamma_closed_form(dist: &DistributionSpec, theta_i: f64) -> f64 {
    match dist {
        DistributionSpec::Exponential => theta_i.exp_m1(),
        DistributionSpec::Gamma { shape } => shape * (theta_i / shape).exp_m1(),
        DistributionSpec::Deterministic => theta_i,
    }
}

/// Routing multiplier `P_i0 exp(-theta_i) + sum_k P_ik exp(theta_k - theta_i)`,
/// returned as `ln` of the multiplier. Computed via `exp_m1`/`ln_1p` so the
/// value stays accurate as `theta -> 0`.
fn log_multiplier(p_row: &[f64], theta: &[f64], i: usize) -> f64 {
    let exit = 1.0 - p_row.iter().sum::<f64>();
    let mut m_minus_1 = exit * (-theta[i]).exp_m1();
    for (k, &pk) in p_row.iter().enumerate() {
        m_minus_1 += pk * (theta[k] - theta[i]).exp_m1();
    }
    m_minus_1.ln_1p()
}

/// Service exponent: the unique `xi` with `m(theta) E[exp(-xi T)] = 1`,
/// where `m` is the routing multiplier of station `i`.
pub fn xi_fn(dist: &DistributionSpec, p_row: &[f64], theta: &[f64], i: usize) -> Result<f64> {
    solve_log_transform(dist, log_multiplier(p_row, theta, i))
}

/// Closed-form service exponent per family.
pub fn xi_closed_form(dist: &DistributionSpec, p_row: &[f64], theta: &[f64], i: usize) -> f64 {
    let log_m = log_multiplier(p_row, theta, i);
    match dist {
        DistributionSpec::Exponential => log_m.exp_m1(),
        DistributionSpec::Gamma { shape } => shape * (log_m / shape).exp_m1(),
        DistributionSpec::Deterministic => log_m,
    }
}

/// First-order part of the service exponent: `sum_k P_ik theta_k - theta_i`.
pub fn xi_bar(p_row: &[f64], theta: &[f64], i: usize) -> f64 {
    let dot: f64 = p_row.iter().zip(theta).map(|(p, t)| p * t).sum();
    dot - theta[i]
}

/// Second-order arrival coefficient: `scv * theta^2`.
pub fn gamma_star(scv: f64, theta_i: f64) -> f64 {
    scv * theta_i * theta_i
}

/// Second-order service coefficient:
/// `scv * (P theta - theta_i)^2 + P theta^2 - (P theta)^2`.
pub fn xi_star(p_row: &[f64], scv: f64, theta: &[f64], i: usize) -> f64 {
    let dot: f64 = p_row.iter().zip(theta).map(|(p, t)| p * t).sum();
    let dot_sq: f64 = p_row.iter().zip(theta).map(|(p, t)| p * t * t).sum();
    scv * (dot - theta[i]).powi(2) + dot_sq - dot * dot
}

/// The quadratic form `Q*(theta) = 1/2 sum_i (alpha_i gamma*_i + lambda_i xi*_i)`.
///
/// Defined for every real `theta`; evaluated at the truncated w-column it
/// reproduces the variance parameter:
/// `2 Q*(w_1j,..,w_{j-1,j},1,0,..,0) = sigma_j^2`.
pub fn q_star(spec: &NetworkSpec, lambda: &[f64], theta: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..spec.num_stations() {
        if spec.alpha[i] > 0.0 {
            total += spec.alpha[i] * gamma_star(spec.arrival_dist[i].scv(), theta[i]);
        }
        total += lambda[i] * xi_star(&spec.routing[i], spec.service_dist[i].scv(), theta, i);
    }
    0.5 * total
}

/// Flow-balance residual `sum_i (alpha_i theta_i + lambda_i xi_bar_i(theta))`.
///
/// Zero for every real `theta` by the traffic equation.
pub fn flow_balance_residual(spec: &NetworkSpec, lambda: &[f64], theta: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..spec.num_stations() {
        total += spec.alpha[i] * theta[i] + lambda[i] * xi_bar(&spec.routing[i], theta, i);
    }
    total
}

/// Build the θ-vector for station `j` (0-based) from a basis `eta` and a
/// scale `r`.
///
/// Components above `j` are fixed at `eta_k r^(k+1)`; station `j` and the
/// stations below are filled in so that the drift `xi_bar` vanishes at every
/// station below `j`. The weights are first-passage probabilities at level
/// `j`: from a station below `j`, the chain wanders only through stations
/// below `j` until it first hits one of `j..J` or exits.
///
/// The resulting vector satisfies (see [`check_linear`]):
///
/// ```text
/// xi_bar_l(theta) = 0                         for l < j
/// xi_bar_j(theta) = -(1 - w_jj) r^j eta_j
/// ```
///
/// All components are nonpositive whenever `eta <= 0`.
pub fn build_theta(
    spec: &NetworkSpec,
    w: &WMatrix,
    eta: &ThetaVector,
    j: usize,
    r: f64,
) -> Result<ThetaVector> {
    let n = spec.num_stations();
    if j >= n {
        return Err(Error::Config(format!("station {j} out of range (J={n})")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Config(format!("scale r={r} outside (0,1)")));
    }
    if (w.w[j][j] - 1.0).abs() < 1e-14 {
        return Err(Error::DegenerateSelfLoop { station: j });
    }

    let p = crate::flow::routing_matrix(spec);
    let mut theta = vec![0.0; n];
    // exponent k+1 because stations are 0-based here
    for k in (j + 1)..n {
        theta[k] = eta.theta[k] * r.powi(k as i32 + 1);
    }

    // First-passage weights at level j. Column t = j of h equals the
    // w-column below j.
    let h = level_hit_probs(&p, j)?;
    let h_row_j: Vec<f64> = (j..n)
        .map(|t| {
            let mut v = p[(j, t)];
            for l in 0..j {
                v += p[(j, l)] * h[l][t - j];
            }
            v
        })
        .collect();

    let upper: f64 = ((j + 1)..n).map(|i| h_row_j[i - j] * theta[i]).sum();
    theta[j] = eta.theta[j] * r.powi(j as i32 + 1) + upper / (1.0 - w.w[j][j]);
    for l in 0..j {
        let mut v = w.w[l][j] * theta[j];
        for i in (j + 1)..n {
            v += h[l][i - j] * theta[i];
        }
        theta[l] = v;
    }

    Ok(ThetaVector {
        theta,
        provenance: Some(Provenance {
            eta: eta.theta.clone(),
            station: j,
            scale: r,
        }),
    })
}

/// `h[l][t - j]` = probability that from station `l < j` the routing chain
/// first hits station `t` among `{j, .., J-1}` while wandering only through
/// stations below `j` (exit counts as a miss).
fn level_hit_probs(p: &DMatrix<f64>, j: usize) -> Result<Vec<Vec<f64>>> {
    let n = p.nrows();
    if j == 0 {
        return Ok(Vec::new());
    }
    let block = DMatrix::identity(j, j) - p.view((0, 0), (j, j));
    let lu = block.clone().lu();
    let mut h = vec![vec![0.0; n - j]; j];
    for t in j..n {
        let rhs = DVector::from_fn(j, |l, _| p[(l, t)]);
        let x = lu.solve(&rhs).ok_or(Error::SingularBlock { j })?;
        let resid = &block * &x - &rhs;
        if resid.iter().any(|r| !r.is_finite() || r.abs() > 1e-10) {
            return Err(Error::SingularBlock { j });
        }
        for l in 0..j {
            h[l][t - j] = x[l];
        }
    }
    Ok(h)
}

/// Residual report of [`check_linear`].
#[derive(Debug, Clone)]
pub struct LinearCheck {
    /// `|xi_bar_l(theta)|` for each station `l` below the construction station.
    pub below: Vec<f64>,
    /// `|xi_bar_j(theta) + (1 - w_jj) r^j eta_j|`.
    pub at_station: f64,
    /// `sum_i |theta_i|`, the scale the residuals are judged against.
    pub theta_norm: f64,
    /// True when every component of theta is nonpositive.
    pub nonpositive: bool,
}

impl LinearCheck {
    pub fn max_residual(&self) -> f64 {
        self.below.iter().copied().fold(self.at_station, f64::max)
    }

    /// All residuals within `tol * max(|theta|, 1)`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol * self.theta_norm.max(1.0)
    }
}

/// Verify the linear-system identities satisfied by a constructed θ-vector.
pub fn check_linear(spec: &NetworkSpec, w: &WMatrix, theta: &ThetaVector) -> Result<LinearCheck> {
    let prov = theta
        .provenance
        .as_ref()
        .ok_or_else(|| Error::Config("check_linear needs a theta built by build_theta".into()))?;
    let j = prov.station;
    let r = prov.scale;
    let below = (0..j)
        .map(|l| xi_bar(&spec.routing[l], &theta.theta, l).abs())
        .collect();
    let expect = -(1.0 - w.w[j][j]) * r.powi(j as i32 + 1) * prov.eta[j];
    let at_station = (xi_bar(&spec.routing[j], &theta.theta, j) - expect).abs();
    Ok(LinearCheck {
        below,
        at_station,
        theta_norm: theta.theta.iter().map(|t| t.abs()).sum(),
        nonpositive: theta.theta.iter().all(|&t| t <= 0.0),
    })
}

/// One row of a Taylor-convergence report.
#[derive(Debug, Clone)]
pub struct TaylorRow {
    pub theta: f64,
    /// `|gamma(theta) - theta - scv theta^2 / 2| / theta^2`
    pub gamma_ratio: f64,
    /// `|xi(theta) - xi_bar(theta) - xi_star(theta) / 2| / |theta|^2`
    pub xi_ratio: f64,
}

/// Evaluate the normalized second-order Taylor residuals of `gamma` and `xi`
/// along a sequence of scales.
///
/// For each scale `t` the point is `theta = t * direction`. The closed-form
/// exponents are used here: near zero the defining-equation residual
/// tolerance of the generic solver would swamp the `o(theta^2)` term being
/// measured.
pub fn taylor_check(
    arrival: &DistributionSpec,
    service: &DistributionSpec,
    p_row: &[f64],
    direction: &[f64],
    scales: &[f64],
    station: usize,
) -> Vec<TaylorRow> {
    scales
        .iter()
        .map(|&t| {
            let theta: Vec<f64> = direction.iter().map(|d| d * t).collect();
            let ti = theta[station];
            let g = gamma_closed_form(arrival, ti);
            let g_ratio = (g - ti - 0.5 * gamma_star(arrival.scv(), ti)).abs() / (ti * ti);
            let x = xi_closed_form(service, p_row, &theta, station);
            let xb = xi_bar(p_row, &theta, station);
            let xs = xi_star(p_row, service.scv(), &theta, station);
            let norm: f64 = theta.iter().map(|v| v.abs()).sum();
            let x_ratio = (x - xb - 0.5 * xs).abs() / (norm * norm);
            TaylorRow {
                theta: ti,
                gamma_ratio: g_ratio,
                xi_ratio: x_ratio,
            }
        })
        .collect()
}
