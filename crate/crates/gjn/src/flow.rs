//! Traffic equation and absorption-probability matrix.
//!
//! The traffic equation `lambda = alpha + P' lambda` gives each station's
//! nominal total arrival rate; the w-matrix collects the probabilities
//! `w[i][j]` that the routing chain started at station `i` visits station
//! `j` before exiting or visiting any station indexed above `j`. Both are
//! obtained from dense LU solves; the network sizes of interest are small.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::network::NetworkSpec;
use crate::rng::{child_stream, Stream};
use crate::{Error, Result};

/// Solution of the traffic equation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSolution {
    /// Nominal total arrival rate per station.
    pub lambda: Vec<f64>,
    /// Traffic intensity `lambda_j / mu_j` per station.
    pub rho: Vec<f64>,
}

/// Absorption probabilities `w[i][j]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WMatrix {
    pub w: Vec<Vec<f64>>,
}

impl WMatrix {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Column `j` as a vector (`w[0][j] .. w[J-1][j]`).
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.w.iter().map(|row| row[j]).collect()
    }
}

/// Routing matrix of a network as a dense matrix.
pub fn routing_matrix(spec: &NetworkSpec) -> DMatrix<f64> {
    let j = spec.num_stations();
    DMatrix::from_fn(j, j, |r, c| spec.routing[r][c])
}

/// Solve `(I - P') x = b`; `None` if the residual exceeds `tol` per component.
pub(crate) fn solve_i_minus_pt(p: &DMatrix<f64>, b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - p.transpose();
    let rhs = DVector::from_column_slice(b);
    let x = a.clone().lu().solve(&rhs)?;
    let resid = &a * &x - &rhs;
    if resid.iter().any(|r| !r.is_finite() || r.abs() > tol) {
        return None;
    }
    Some(x.iter().copied().collect())
}

/// Solve the traffic equation `lambda = alpha + P' lambda`.
///
/// Stability (`rho_j < 1`) is not enforced here; simulating an unstable
/// network is the caller's mistake.
pub fn solve_traffic(spec: &NetworkSpec) -> Result<TrafficSolution> {
    let p = routing_matrix(spec);
    let lambda = solve_i_minus_pt(&p, &spec.alpha, 1e-10).ok_or(Error::NotTransient)?;
    let rho = lambda
        .iter()
        .zip(&spec.mu)
        .map(|(l, m)| l / m)
        .collect();
    Ok(TrafficSolution { lambda, rho })
}

/// Build the w-matrix column by column from the routing matrix.
///
/// Column `j` solves, with `B = (I - P_{j-1})^{-1}` over the leading block
/// of stations below `j`,
///
/// ```text
/// w[.. j][j] = B * P[.. j][j]
/// w[j ..][j] = P[j ..][j] + P[j ..][.. j] * B * P[.. j][j]
/// ```
///
/// with empty blocks contributing zero.
pub fn compute_w(p: &DMatrix<f64>) -> Result<WMatrix> {
    let n = p.nrows();
    let mut w = vec![vec![0.0; n]; n];
    for j in 0..n {
        let top = light_block_solve(p, j, j)?;
        for i in 0..j {
            w[i][j] = top[i];
        }
        for i in j..n {
            let mut v = p[(i, j)];
            for k in 0..j {
                v += p[(i, k)] * top[k];
            }
            w[i][j] = v;
        }
    }
    Ok(WMatrix { w })
}

/// Solve `(I - P_{level-1}) x = P[.. level][target]` for the hit
/// probabilities of `target` from the stations below `level`, wandering
/// only through stations below `level`. Empty when `level = 0`.
fn light_block_solve(p: &DMatrix<f64>, level: usize, target: usize) -> Result<Vec<f64>> {
    if level == 0 {
        return Ok(Vec::new());
    }
    let block = DMatrix::identity(level, level) - p.view((0, 0), (level, level));
    let rhs = DVector::from_fn(level, |i, _| p[(i, target)]);
    let x = block
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularBlock { j: level })?;
    let resid = &block * &x - &rhs;
    if resid.iter().any(|r| !r.is_finite() || r.abs() > 1e-10) {
        return Err(Error::SingularBlock { j: level });
    }
    Ok(x.iter().copied().collect())
}

/// Independent oracle: column `j` of the w-matrix as one J-dimensional
/// linear solve of `w[i][j] = P[i][j] + sum_{k<j} P[i][k] w[k][j]`.
///
/// The unknowns with index `>= j` only appear on the left, so the system is
/// `(I - P D_j) x = P[.][j]` where `D_j` zeroes columns `j..`.
pub fn oracle_w_linear(p: &DMatrix<f64>, j: usize) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = DMatrix::identity(n, n);
    for r in 0..n {
        for c in 0..j {
            a[(r, c)] -= p[(r, c)];
        }
    }
    let rhs = DVector::from_fn(n, |i, _| p[(i, j)]);
    let x = a
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularBlock { j })?;
    let resid = &a * &x - &rhs;
    if resid.iter().any(|r| !r.is_finite() || r.abs() > 1e-10) {
        return Err(Error::SingularBlock { j });
    }
    Ok(x.iter().copied().collect())
}

/// Monte-Carlo estimate of column `j` of the w-matrix.
#[derive(Debug, Clone)]
pub struct WMonteCarlo {
    /// Hit-frequency estimate per start station.
    pub estimate: Vec<f64>,
    /// Binomial standard error per start station.
    pub std_err: Vec<f64>,
    /// Walks cut off at the step cap (counted as failures).
    pub truncated: u64,
}

const MC_STEP_CAP: usize = 1_000_000;
const MC_SHARDS: u64 = 8;

/// Monte-Carlo oracle for column `j`: simulate the absorbing routing chain
/// from every start station and count the walks that reach `j` before
/// exiting or entering a station indexed above `j`.
///
/// Trials are sharded over a fixed number of worker threads with independent
/// child streams, so the estimate depends only on `(seed, trials)`. Walks
/// longer than the step cap are counted as failures and reported; a
/// transient chain absorbs geometrically fast, so truncations signal a bad
/// routing matrix.
pub fn oracle_w_montecarlo(p: &DMatrix<f64>, j: usize, trials: u64, seed: u64) -> WMonteCarlo {
    let n = p.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| p[(r, c)]).collect())
        .collect();

    let mut hits = vec![0u64; n];
    let mut truncated = 0u64;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for shard in 0..MC_SHARDS {
            let rows = &rows;
            let lo = trials * shard / MC_SHARDS;
            let hi = trials * (shard + 1) / MC_SHARDS;
            handles.push(scope.spawn(move || {
                let mut rng = child_stream(seed, shard);
                let mut hits = vec![0u64; n];
                let mut truncated = 0u64;
                for start in 0..n {
                    for _ in lo..hi {
                        match run_walk(rows, start, j, &mut rng) {
                            WalkOutcome::Hit => hits[start] += 1,
                            WalkOutcome::Miss => {}
                            WalkOutcome::Truncated => truncated += 1,
                        }
                    }
                }
                (hits, truncated)
            }));
        }
        for h in handles {
            let (shard_hits, shard_trunc) = h.join().expect("worker panicked");
            for (a, b) in hits.iter_mut().zip(shard_hits) {
                *a += b;
            }
            truncated += shard_trunc;
        }
    });

    let estimate: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let std_err = estimate
        .iter()
        .map(|&p_hat| (p_hat * (1.0 - p_hat) / trials as f64).sqrt())
        .collect();
    WMonteCarlo {
        estimate,
        std_err,
        truncated,
    }
}

enum WalkOutcome {
    Hit,
    Miss,
    Truncated,
}

fn run_walk(rows: &[Vec<f64>], start: usize, target: usize, rng: &mut Stream) -> WalkOutcome {
    let mut state = start;
    for _ in 0..MC_STEP_CAP {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = None;
        for (k, &pk) in rows[state].iter().enumerate() {
            acc += pk;
            if u < acc {
                next = Some(k);
                break;
            }
        }
        match next {
            None => return WalkOutcome::Miss, // exit
            Some(k) if k == target => return WalkOutcome::Hit,
            Some(k) if k > target => return WalkOutcome::Miss,
            Some(k) => state = k,
        }
    }
    WalkOutcome::Truncated
}

/// Random substochastic routing matrix with row sums at most `max_row_sum`.
pub fn random_transient_routing(n: usize, max_row_sum: f64, rng: &mut Stream) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let target = rng.gen_range(0.1..max_row_sum);
        for c in 0..n {
            m[(r, c)] = raw[c] / sum * target;
        }
    }
    m
}
